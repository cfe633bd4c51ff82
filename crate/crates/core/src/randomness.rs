//! Counter-based random streams for Monte Carlo runs.
//!
//! Every observation `X_n^(k)` of a run is drawn from its own ChaCha stream keyed
//! by `(run key, stream)` with stream position `n`. The value therefore depends
//! only on `(seed, K, run, stream, slot)` and not on which procedure is running
//! or which other streams were observed, so procedures run on the same run
//! index see identical sample paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::StreamId;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one key.
pub fn derive_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| mix64(acc ^ mix64(p)))
}

const TRUTH_DOMAIN: u64 = 1;
const DATA_DOMAIN: u64 = 2;
const SCHEDULE_DOMAIN: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunRandomness {
    run_key: u64,
}

impl RunRandomness {
    /// Randomness of replication `run` for an experiment with `k` streams.
    pub fn new(seed: u64, k: usize, run: u64) -> Self {
        Self {
            run_key: derive_key(&[seed, k as u64, run]),
        }
    }

    /// Source for change points and per-stream parameters.
    pub fn truth_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_key(&[self.run_key, TRUTH_DOMAIN]))
    }

    /// Source for the observation of `stream` at `slot`.
    pub fn observation_rng(&self, stream: StreamId, slot: u64) -> ChaCha8Rng {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_key(&[self.run_key, DATA_DOMAIN, stream as u64]));
        rng.set_stream(slot);
        rng
    }

    /// Source for randomized scheduling decisions at `slot`.
    pub fn scheduler_rng(&self, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_key(&[self.run_key, SCHEDULE_DOMAIN]));
        rng.set_stream(slot);
        rng
    }
}
