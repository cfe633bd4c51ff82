//! Multiple change-point detection procedures.
//!
//! All procedures advance slot by slot: pick the streams to observe, update
//! every active stream, then declare. They differ in statistic, thresholds,
//! and scheduler:
//!
//! | kind     | statistic | thresholds                | scheduler   |
//! |----------|-----------|---------------------------|-------------|
//! | `SMap`   | posterior | step-up, `1 - r alpha / K`| MAP top-q   |
//! | `ISMap`  | posterior | flat `1 - alpha`          | MAP top-q   |
//! | `Simple` | posterior | step-up, `1 - r alpha / K`| consecutive |
//! | `DFdr`   | ALR       | step-up, `K / (r alpha)`  | full        |
//!
//! Step-up declaration: with the `m` active statistics sorted ascending
//! (ties by id), rank `l` is compared against threshold `Q_{K-l+1}`. If some
//! rank clears its threshold, the lowest such rank and every rank above it are
//! declared.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{ScenarioModel, StreamTruth};
use crate::posterior::{logit_of_complement, LogOdds, PriorSpec, StreamState};
use crate::randomness::RunRandomness;
use crate::scheduling::{select_map, select_random_consecutive, subset_size, SchedulerKind};
use crate::StreamId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProcedureKind {
    #[serde(rename = "smap")]
    SMap,
    #[serde(rename = "ismap")]
    ISMap,
    #[serde(rename = "simple")]
    Simple,
    #[serde(rename = "dfdr")]
    DFdr,
}

impl ProcedureKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedureKind::SMap => "smap",
            ProcedureKind::ISMap => "ismap",
            ProcedureKind::Simple => "simple",
            ProcedureKind::DFdr => "dfdr",
        }
    }

    pub fn default_scheduler(&self) -> SchedulerKind {
        match self {
            ProcedureKind::SMap | ProcedureKind::ISMap => SchedulerKind::MapTopQ,
            ProcedureKind::Simple => SchedulerKind::RandomConsecutive,
            ProcedureKind::DFdr => SchedulerKind::Full,
        }
    }
}

impl std::str::FromStr for ProcedureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "smap" => Ok(ProcedureKind::SMap),
            "ismap" => Ok(ProcedureKind::ISMap),
            "simple" => Ok(ProcedureKind::Simple),
            "dfdr" => Ok(ProcedureKind::DFdr),
            other => Err(Error::Config(format!("unknown procedure {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureConfig {
    pub kind: ProcedureKind,
    pub alpha: f64,
    pub k: usize,
    /// Geometric hazard used by the detector; may differ from the generator's.
    pub rho_assumed: f64,
    pub scheduler: SchedulerKind,
    pub q: f64,
    pub horizon: u64,
}

impl ProcedureConfig {
    /// Builds a config with the kind's default scheduler. D-FDR always
    /// observes everything, so its `q` is forced to 1.
    pub fn new(
        kind: ProcedureKind,
        alpha: f64,
        k: usize,
        rho_assumed: f64,
        q: f64,
        horizon: u64,
    ) -> Result<Self> {
        let q = if kind == ProcedureKind::DFdr { 1.0 } else { q };
        let config = Self {
            kind,
            alpha,
            k,
            rho_assumed,
            scheduler: kind.default_scheduler(),
            q,
            horizon,
        };
        config.validate()?;
        Ok(config)
    }

    /// Overrides the scheduler (ignored for D-FDR).
    pub fn with_scheduler(mut self, scheduler: SchedulerKind) -> Self {
        if self.kind != ProcedureKind::DFdr {
            self.scheduler = scheduler;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.k == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        if !(self.rho_assumed > 0.0 && self.rho_assumed < 1.0) {
            return Err(Error::Config(format!(
                "rho_assumed must lie in (0, 1), got {}",
                self.rho_assumed
            )));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Config(format!("q must lie in [0, 1], got {}", self.q)));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.kind == ProcedureKind::DFdr && (self.scheduler != SchedulerKind::Full || self.q != 1.0) {
            return Err(Error::Config("D-FDR requires full observation".into()));
        }
        Ok(())
    }

    /// Fraction actually observed per slot.
    pub fn effective_q(&self) -> f64 {
        match self.scheduler {
            SchedulerKind::Full => 1.0,
            _ => self.q,
        }
    }
}

/// `Q_r = 1 - r alpha / K`, `r = 1..=K`.
pub fn smap_thresholds(k: usize, alpha: f64) -> Vec<f64> {
    (1..=k).map(|r| 1.0 - r as f64 * alpha / k as f64).collect()
}

pub fn ismap_threshold(alpha: f64) -> f64 {
    1.0 - alpha
}

/// `Q_r = K / (r alpha)`, `r = 1..=K`.
pub fn dfdr_thresholds(k: usize, alpha: f64) -> Vec<f64> {
    (1..=k).map(|r| k as f64 / (r as f64 * alpha)).collect()
}

/// Declarations made at the end of one sampling stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub slot: u64,
    pub declared: Vec<StreamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k: usize,
    pub q: f64,
    pub horizon: u64,
    /// True change point `t^(k)` per stream.
    pub change_points: Vec<u64>,
    /// Declaration slot `T^(k)`; `None` when censored at the horizon.
    pub stopping_times: Vec<Option<u64>>,
    /// Number of streams observed at slots `1, 2, ...`.
    pub observed_counts: Vec<usize>,
    pub stages: Vec<Stage>,
    pub censored: Vec<StreamId>,
}

impl RunRecord {
    pub fn is_censored(&self) -> bool {
        !self.censored.is_empty()
    }

    /// One JSON object per line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run records serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Record(e.to_string()))
    }
}

/// Supplies log-likelihood ratios of observed samples.
pub trait ObservationSource {
    /// `ln L(X_slot^(stream))`. Called only for streams scheduled at `slot`.
    fn log_lr(&mut self, stream: StreamId, slot: u64) -> Result<f64>;
}

/// Draws observations from a [`ScenarioModel`] using counter-based randomness.
pub struct SimulatedSource<'a> {
    model: &'a ScenarioModel,
    truths: &'a [StreamTruth],
    randomness: RunRandomness,
}

impl<'a> SimulatedSource<'a> {
    pub fn new(model: &'a ScenarioModel, truths: &'a [StreamTruth], randomness: RunRandomness) -> Self {
        Self {
            model,
            truths,
            randomness,
        }
    }
}

impl ObservationSource for SimulatedSource<'_> {
    fn log_lr(&mut self, stream: StreamId, slot: u64) -> Result<f64> {
        let mut rng = self.randomness.observation_rng(stream, slot);
        let x = self.model.sample(&self.truths[stream], slot, &mut rng);
        self.model.log_likelihood_ratio(x)
    }
}

impl<F> ObservationSource for F
where
    F: FnMut(StreamId, u64) -> Result<f64>,
{
    fn log_lr(&mut self, stream: StreamId, slot: u64) -> Result<f64> {
        self(stream, slot)
    }
}

/// Runs one replication with observations simulated from `model`.
pub fn run_procedure(
    config: &ProcedureConfig,
    truths: &[StreamTruth],
    model: &ScenarioModel,
    randomness: RunRandomness,
) -> Result<RunRecord> {
    let mut source = SimulatedSource::new(model, truths, randomness);
    run_with_source(config, truths, &mut source, randomness)
}

/// Runs one replication with an arbitrary observation source.
pub fn run_with_source<S: ObservationSource + ?Sized>(
    config: &ProcedureConfig,
    truths: &[StreamTruth],
    source: &mut S,
    randomness: RunRandomness,
) -> Result<RunRecord> {
    config.validate()?;
    if truths.len() != config.k {
        return Err(invalid(format!(
            "expected {} stream truths, got {}",
            config.k,
            truths.len()
        )));
    }
    let k = config.k;
    let prior = PriorSpec::geometric(config.rho_assumed)?;
    let use_alr = config.kind == ProcedureKind::DFdr;

    // Thresholds on the log scale of the statistic, indexed by r - 1.
    let thresholds: Vec<f64> = match config.kind {
        ProcedureKind::SMap | ProcedureKind::Simple => (1..=k)
            .map(|r| logit_of_complement(r as f64 * config.alpha / k as f64))
            .collect(),
        ProcedureKind::ISMap => vec![logit_of_complement(config.alpha)],
        ProcedureKind::DFdr => (1..=k)
            .map(|r| (k as f64).ln() - (r as f64 * config.alpha).ln())
            .collect(),
    };

    let mut states = vec![StreamState::new(); k];
    let mut active: Vec<StreamId> = (0..k).collect();
    let mut observed = vec![false; k];
    let mut ranked: Vec<(StreamId, f64)> = Vec::with_capacity(k);
    let mut record = RunRecord {
        k,
        q: config.effective_q(),
        horizon: config.horizon,
        change_points: truths.iter().map(|t| t.change_point).collect(),
        stopping_times: vec![None; k],
        observed_counts: Vec::new(),
        stages: Vec::new(),
        censored: Vec::new(),
    };

    for n in 1..=config.horizon {
        if active.is_empty() {
            break;
        }

        let chosen = match config.scheduler {
            SchedulerKind::Full => active.clone(),
            SchedulerKind::MapTopQ => {
                ranked.clear();
                ranked.extend(active.iter().map(|&id| (id, statistic(&states[id], use_alr))));
                select_map(&ranked, config.q)
            }
            SchedulerKind::RandomConsecutive => {
                select_random_consecutive(&active, config.q, &mut randomness.scheduler_rng(n))
            }
        };
        debug_assert_eq!(chosen.len(), match config.scheduler {
            SchedulerKind::Full => active.len(),
            _ => subset_size(config.q, active.len()),
        });
        record.observed_counts.push(chosen.len());
        for &id in &chosen {
            observed[id] = true;
        }

        for &id in &active {
            let state = &mut states[id];
            if use_alr {
                let l = source.log_lr(id, n)?;
                state.advance_alr(l, &prior)?;
            } else if observed[id] {
                let l = source.log_lr(id, n)?;
                state.advance(Some(l), &prior);
            } else {
                state.advance(None, &prior);
            }
        }
        for &id in &chosen {
            observed[id] = false;
        }

        let declared = match config.kind {
            ProcedureKind::ISMap => {
                let threshold = thresholds[0];
                active
                    .iter()
                    .copied()
                    .filter(|&id| states[id].log_odds.0 >= threshold)
                    .collect::<Vec<_>>()
            }
            _ => {
                ranked.clear();
                ranked.extend(active.iter().map(|&id| (id, statistic(&states[id], use_alr))));
                step_up(&mut ranked, &thresholds)
            }
        };

        if !declared.is_empty() {
            for &id in &declared {
                states[id].declare(n)?;
                record.stopping_times[id] = Some(n);
            }
            active.retain(|id| states[*id].active);
            let mut ids = declared;
            ids.sort_unstable();
            record.stages.push(Stage {
                slot: n,
                declared: ids,
            });
        }
    }

    record.censored = active;
    Ok(record)
}

fn statistic(state: &StreamState, use_alr: bool) -> f64 {
    if use_alr {
        state.log_alr
    } else {
        state.log_odds.0
    }
}

/// Step-up rule over `(id, statistic)` pairs against `thresholds[r - 1] = Q_r`.
///
/// Sorts `ranked` ascending (ties by id) and returns the ids at ranks
/// `l_j..=m`, where `l_j` is the smallest rank `l` whose statistic reaches
/// `Q_{K-l+1}`; empty if no rank does.
pub fn step_up(ranked: &mut [(StreamId, f64)], thresholds: &[f64]) -> Vec<StreamId> {
    let k = thresholds.len();
    let m = ranked.len();
    debug_assert!(m <= k);
    ranked.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let first = (1..=m).find(|&l| ranked[l - 1].1 >= thresholds[k - l]);
    match first {
        Some(l) => ranked[l - 1..].iter().map(|&(id, _)| id).collect(),
        None => Vec::new(),
    }
}

/// Step-up rule expressed on posterior probabilities with S-MAP thresholds.
pub fn smap_declarations(posteriors: &[(StreamId, f64)], k: usize, alpha: f64) -> Vec<StreamId> {
    let thresholds: Vec<f64> = (1..=k)
        .map(|r| logit_of_complement(r as f64 * alpha / k as f64))
        .collect();
    let mut ranked: Vec<(StreamId, f64)> = posteriors
        .iter()
        .map(|&(id, p)| (id, LogOdds::from_probability(p).0))
        .collect();
    let mut ids = step_up(&mut ranked, &thresholds);
    ids.sort_unstable();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let q = smap_thresholds(10, 0.1);
        assert!((q[0] - 0.99).abs() < 1e-15);
        assert!((q[9] - 0.90).abs() < 1e-15);
        assert!(q.windows(2).all(|w| w[0] > w[1]));
        assert!((smap_thresholds(1, 0.3)[0] - 0.7).abs() < 1e-15);

        assert!((ismap_threshold(0.1) - 0.9).abs() < 1e-15);
        assert!((ismap_threshold(0.01) - 0.99).abs() < 1e-15);
        assert!((ismap_threshold(1e-300) - 1.0).abs() < 1e-15);

        let d = dfdr_thresholds(10, 0.1);
        assert!((d[0] - 100.0).abs() < 1e-12);
        assert!((d[9] - 10.0).abs() < 1e-12);
        assert!(d.windows(2).all(|w| w[0] > w[1]));
        assert!((dfdr_thresholds(1, 0.5)[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_stream_step_up_indexing() {
        // K = 2, alpha = 0.1: the lower rank faces Q_2 = 0.90, the upper Q_1 = 0.95.
        assert_eq!(smap_declarations(&[(0, 0.92), (1, 0.93)], 2, 0.1), vec![0, 1]);
        assert!(smap_declarations(&[(0, 0.5), (1, 0.94)], 2, 0.1).is_empty());
        assert_eq!(smap_declarations(&[(0, 0.5), (1, 0.96)], 2, 0.1), vec![1]);
        // One active stream left out of two faces Q_{2-1+1} = Q_2 = 0.90.
        assert_eq!(smap_declarations(&[(1, 0.91)], 2, 0.1), vec![1]);
    }

    #[test]
    fn step_up_declares_everything_above_first_crossing() {
        let thresholds = vec![5.0, 4.0, 3.0, 2.0];
        // ascending: 1.0 (vs Q4=2), 2.5 (vs Q3=3), 3.5 (vs Q2=4), 3.9 (vs Q1=5)
        let mut ranked = vec![(7, 3.5), (2, 1.0), (4, 3.9), (9, 2.5)];
        assert!(step_up(&mut ranked, &thresholds).is_empty());
        let mut ranked = vec![(7, 3.5), (2, 1.0), (4, 5.0), (9, 3.0)];
        let mut got = step_up(&mut ranked, &thresholds);
        got.sort_unstable();
        assert_eq!(got, vec![4, 7, 9]);
    }

    #[test]
    fn horizon_must_be_positive() {
        assert!(matches!(
            ProcedureConfig::new(ProcedureKind::SMap, 0.1, 3, 0.01, 1.0, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dfdr_forces_full_observation() {
        let c = ProcedureConfig::new(ProcedureKind::DFdr, 0.1, 3, 0.01, 0.2, 10).unwrap();
        assert_eq!(c.q, 1.0);
        assert_eq!(c.scheduler, SchedulerKind::Full);
        assert_eq!(c.with_scheduler(SchedulerKind::MapTopQ).scheduler, SchedulerKind::Full);
        let s = ProcedureConfig::new(ProcedureKind::Simple, 0.1, 3, 0.01, 0.2, 10).unwrap();
        assert_eq!(s.scheduler, SchedulerKind::RandomConsecutive);
    }

    #[test]
    fn unit_lr_declares_at_prior_crossing() {
        // With L = 1 every update equals the prior-only update, so the single
        // stream is declared once 1 - (1 - rho)^n >= 1 - alpha.
        let n_star = (0.1f64.ln() / 0.99f64.ln()).ceil() as u64;
        assert_eq!(n_star, 230);
        for kind in [ProcedureKind::ISMap, ProcedureKind::SMap] {
            let config = ProcedureConfig::new(kind, 0.1, 1, 0.01, 1.0, 1000).unwrap();
            let truths = [StreamTruth::new(5)];
            let mut unit = |_: StreamId, _: u64| Ok(0.0);
            let rec = run_with_source(&config, &truths, &mut unit, RunRandomness::new(0, 1, 0)).unwrap();
            assert_eq!(rec.stopping_times, vec![Some(n_star)]);
            assert_eq!(rec.observed_counts.len() as u64, n_star);
        }
    }

    #[test]
    fn single_stream_ismap_stops_at_first_crossing() {
        let config = ProcedureConfig::new(ProcedureKind::ISMap, 0.1, 1, 0.01, 1.0, 500).unwrap();
        let truths = [StreamTruth::new(3)];
        let lrs = [-0.3, 0.2, 1.5, 1.5, 2.0, 2.0, 2.0, 2.0];
        let mut scripted = |_: StreamId, n: u64| Ok(*lrs.get(n as usize - 1).unwrap_or(&2.0));
        let rec = run_with_source(&config, &truths, &mut scripted, RunRandomness::new(0, 1, 0)).unwrap();

        let mut pi = 0.0;
        let mut expected = None;
        for n in 1..=500u64 {
            let l = lrs.get(n as usize - 1).copied().unwrap_or(2.0);
            pi = crate::posterior::update_observed(pi, 0.01, l.exp());
            if pi >= 0.9 {
                expected = Some(n);
                break;
            }
        }
        assert_eq!(rec.stopping_times[0], expected);
    }

    #[test]
    fn censoring_reported() {
        let config = ProcedureConfig::new(ProcedureKind::SMap, 0.1, 3, 0.01, 1.0, 5).unwrap();
        let truths = [StreamTruth::new(100); 3];
        let mut unit = |_: StreamId, _: u64| Ok(0.0);
        let rec = run_with_source(&config, &truths, &mut unit, RunRandomness::new(0, 3, 0)).unwrap();
        assert_eq!(rec.censored, vec![0, 1, 2]);
        assert_eq!(rec.observed_counts, vec![3; 5]);
        assert!(rec.stopping_times.iter().all(Option::is_none));
    }

    #[test]
    fn record_json_round_trip() {
        let config = ProcedureConfig::new(ProcedureKind::ISMap, 0.1, 4, 0.05, 0.5, 300).unwrap();
        let model = ScenarioModel::gaussian(0.0, 1.0, 1.0).unwrap();
        let truths = [
            StreamTruth::new(2),
            StreamTruth::new(9),
            StreamTruth::new(1),
            StreamTruth::new(30),
        ];
        let rec = run_procedure(&config, &truths, &model, RunRandomness::new(1, 4, 0)).unwrap();
        let back = RunRecord::from_json_line(&rec.to_json_line()).unwrap();
        assert_eq!(rec, back);
        assert!(RunRecord::from_json_line("{").is_err());
    }
}
