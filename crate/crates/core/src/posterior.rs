//! Per-stream sequential statistics.
//!
//! The posterior `pi_n = P(t <= n | data)` is carried as its log-odds
//! `ln(pi / (1 - pi))`, so thresholds such as `1 - alpha / K` keep full
//! resolution. With `Lambda = pi / (1 - pi)` the recursion reads
//!
//! ```text
//! observed:   Lambda <- L * (Lambda + rho) / (1 - rho)
//! unobserved: Lambda <-     (Lambda + rho) / (1 - rho)
//! ```
//!
//! The average likelihood ratio `G_n = G_{n-1} L + P(t >= n+1) (1 - L)` used by
//! D-FDR is carried as `ln G_n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::ScenarioModel;

/// `ln(e^a + e^b)`, exact at infinities.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY || hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Log-odds of `1 - tail`, accurate for tiny `tail`.
pub fn logit_of_complement(tail: f64) -> f64 {
    (-tail).ln_1p() - tail.ln()
}

/// Prior on a single change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// `P(t = m) = rho (1 - rho)^(m-1)`.
    Geometric { rho: f64 },
    /// Hazard `rho_n = P(t = n | t >= n)` for `n = 1, 2, ...`; the last value
    /// repeats past the end of the sequence.
    GeneralHazard { rho_n: Vec<f64> },
}

impl PriorSpec {
    pub fn geometric(rho: f64) -> Result<Self> {
        let prior = PriorSpec::Geometric { rho };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |h: f64| h > 0.0 && h < 1.0;
        match self {
            PriorSpec::Geometric { rho } if ok(*rho) => Ok(()),
            PriorSpec::GeneralHazard { rho_n } if !rho_n.is_empty() && rho_n.iter().all(|h| ok(*h)) => {
                Ok(())
            }
            _ => Err(invalid("hazard values must lie in (0, 1)")),
        }
    }

    /// Hazard at slot `n >= 1`.
    pub fn hazard(&self, n: u64) -> f64 {
        match self {
            PriorSpec::Geometric { rho } => *rho,
            PriorSpec::GeneralHazard { rho_n } => {
                let idx = (n.max(1) - 1) as usize;
                *rho_n.get(idx).unwrap_or_else(|| rho_n.last().expect("non-empty"))
            }
        }
    }

    /// `ln P(t >= n + 1)`.
    pub fn log_survival(&self, n: u64) -> f64 {
        match self {
            PriorSpec::Geometric { rho } => n as f64 * (-rho).ln_1p(),
            PriorSpec::GeneralHazard { .. } => (1..=n).map(|i| (-self.hazard(i)).ln_1p()).sum(),
        }
    }
}

/// Posterior log-odds of one stream.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogOdds(pub f64);

impl LogOdds {
    /// `pi_0 = 0`.
    pub const ZERO_POSTERIOR: LogOdds = LogOdds(f64::NEG_INFINITY);

    pub fn from_probability(pi: f64) -> Self {
        LogOdds(logit(pi))
    }

    pub fn probability(self) -> f64 {
        if self.0 == f64::INFINITY {
            1.0
        } else {
            1.0 / (1.0 + (-self.0).exp())
        }
    }

    /// Update with an observation whose log-likelihood ratio is `log_lr`.
    pub fn observe(self, log_lr: f64, hazard: f64) -> Self {
        if self.0 == f64::INFINITY {
            return self;
        }
        let prior = log_add_exp(self.0, hazard.ln()) - (-hazard).ln_1p();
        LogOdds(log_lr + prior)
    }

    /// Update for a slot without an observation.
    pub fn skip(self, hazard: f64) -> Self {
        if self.0 == f64::INFINITY {
            return self;
        }
        LogOdds(log_add_exp(self.0, hazard.ln()) - (-hazard).ln_1p())
    }
}

/// Posterior after observing a value with likelihood ratio `lr`.
pub fn update_observed(pi_prev: f64, hazard: f64, lr: f64) -> f64 {
    LogOdds::from_probability(pi_prev)
        .observe(lr.ln(), hazard)
        .probability()
}

/// Posterior after a slot in which the stream was not observed: `pi + rho (1 - pi)`.
pub fn update_unobserved(pi_prev: f64, hazard: f64) -> f64 {
    LogOdds::from_probability(pi_prev).skip(hazard).probability()
}

/// Log-scale ALR update. `log_survival` is `ln P(t >= n + 1)`.
///
/// The `(1 - L)` term changes sign at `L = 1`, so the update is an addition
/// for `L < 1` and a subtraction for `L > 1`.
pub fn update_log_alr(log_g_prev: f64, log_lr: f64, log_survival: f64) -> Result<f64> {
    if log_lr == 0.0 {
        return Ok(log_g_prev);
    }
    let carried = log_g_prev + log_lr;
    if log_lr == f64::NEG_INFINITY {
        return Ok(log_survival);
    }
    if log_lr < 0.0 {
        let gain = log_survival + (-(log_lr.exp_m1())).ln();
        return Ok(log_add_exp(carried, gain));
    }
    let loss = log_survival + log_lr.exp_m1().ln();
    let gap = loss - carried;
    if gap > 1e-12 {
        return Err(Error::NegativeAlr(carried.exp() - loss.exp()));
    }
    if gap >= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(carried + (-gap.exp()).ln_1p())
}

/// `G_n = G_{n-1} L + survival (1 - L)`, with `survival = P(t >= n + 1)`.
pub fn update_alr(g_prev: f64, lr: f64, survival: f64) -> Result<f64> {
    if g_prev < 0.0 || lr < 0.0 || !(survival > 0.0 && survival <= 1.0) {
        return Err(invalid(format!(
            "update_alr needs g >= 0, L >= 0, survival in (0, 1]; got {g_prev}, {lr}, {survival}"
        )));
    }
    update_log_alr(g_prev.ln(), lr.ln(), survival.ln()).map(f64::exp)
}

/// State of one stream inside a running procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    pub log_odds: LogOdds,
    /// `ln G_n`; `G_0 = 1`.
    pub log_alr: f64,
    pub slot: u64,
    pub active: bool,
    pub declared_at: Option<u64>,
}

impl Default for StreamState {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamState {
    pub fn new() -> Self {
        Self {
            log_odds: LogOdds::ZERO_POSTERIOR,
            log_alr: 0.0,
            slot: 0,
            active: true,
            declared_at: None,
        }
    }

    pub fn posterior(&self) -> f64 {
        self.log_odds.probability()
    }

    pub fn alr(&self) -> f64 {
        self.log_alr.exp()
    }

    /// Advances the posterior one slot, with `log_lr = None` for an unobserved slot.
    pub fn advance(&mut self, log_lr: Option<f64>, prior: &PriorSpec) {
        self.slot += 1;
        let hazard = prior.hazard(self.slot);
        self.log_odds = match log_lr {
            Some(l) => self.log_odds.observe(l, hazard),
            None => self.log_odds.skip(hazard),
        };
    }

    /// Advances the ALR one slot with an observation.
    pub fn advance_alr(&mut self, log_lr: f64, prior: &PriorSpec) -> Result<()> {
        self.slot += 1;
        self.log_alr = update_log_alr(self.log_alr, log_lr, prior.log_survival(self.slot))?;
        Ok(())
    }

    /// Marks the stream declared at slot `n`. Declaring twice is an error.
    pub fn declare(&mut self, n: u64) -> Result<()> {
        if self.declared_at.is_some() {
            return Err(invalid("stream declared twice"));
        }
        self.declared_at = Some(n);
        self.active = false;
        Ok(())
    }
}

/// `P(t <= n | observations)` by direct enumeration over `t = 1..=cutoff`,
/// with the prior tail beyond `cutoff` added analytically.
///
/// Each candidate `t = m` is weighted by its prior mass times the product of
/// likelihood ratios of the observations at slots `>= m`.
pub fn posterior_oracle(
    observations: &[(u64, f64)],
    prior: &PriorSpec,
    model: &ScenarioModel,
    n: u64,
    cutoff: u64,
) -> Result<f64> {
    if cutoff < n {
        return Err(invalid("cutoff must be at least n"));
    }
    if observations.iter().any(|&(s, _)| s == 0 || s > n) {
        return Err(invalid("observation slots must lie in 1..=n"));
    }
    let lrs = observations
        .iter()
        .map(|&(s, x)| model.likelihood_ratio(x).map(|l| (s, l)))
        .collect::<Result<Vec<_>>>()?;

    let mut survive = 1.0;
    let mut changed_by_n = 0.0;
    let mut not_changed = 0.0;
    for m in 1..=cutoff {
        let h = prior.hazard(m);
        let mass = survive * h;
        survive *= 1.0 - h;
        let weight: f64 = lrs
            .iter()
            .filter(|&&(s, _)| s >= m)
            .map(|&(_, l)| l)
            .product();
        if m <= n {
            changed_by_n += mass * weight;
        } else {
            not_changed += mass * weight;
        }
    }
    not_changed += survive;
    Ok(changed_by_n / (changed_by_n + not_changed))
}
