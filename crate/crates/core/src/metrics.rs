//! FDR, ADD, ANO and weighted-risk estimation from run records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::RunRecord;

/// False discovery proportion `V / max(R, 1)` of one run. Censored streams
/// count as never declared.
pub fn fdp(record: &RunRecord) -> f64 {
    let mut declared = 0usize;
    let mut false_ones = 0usize;
    for (t, stop) in record.change_points.iter().zip(&record.stopping_times) {
        if let Some(stop) = stop {
            declared += 1;
            if stop < t {
                false_ones += 1;
            }
        }
    }
    false_ones as f64 / declared.max(1) as f64
}

/// `(1/K) sum_k max(0, T^(k) - t^(k))`. Undefined for censored runs.
pub fn add(record: &RunRecord) -> Result<f64> {
    if record.is_censored() {
        return Err(Error::Censored(record.censored.len()));
    }
    let total: u64 = record
        .change_points
        .iter()
        .zip(&record.stopping_times)
        .map(|(&t, stop)| stop.expect("uncensored").saturating_sub(t))
        .sum();
    Ok(total as f64 / record.k as f64)
}

/// `(1/K) sum_n ceil(q K_n)` up to the last declaration (the horizon for
/// censored runs).
pub fn ano(record: &RunRecord) -> f64 {
    record.observed_counts.iter().sum::<usize>() as f64 / record.k as f64
}

pub fn weighted_risk(add: f64, ano: f64, c: f64) -> f64 {
    (1.0 - c) * add + c * ano
}

/// One point of a proportion sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub q: f64,
    pub add: f64,
    pub ano: f64,
}

/// The `q` minimizing `(1 - c) ADD + c ANO`; ties go to the smaller `q`.
pub fn best_proportion(sweep: &[SweepPoint], c: f64) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for p in sweep {
        let risk = weighted_risk(p.add, p.ano, c);
        best = match best {
            None => Some((p.q, risk)),
            Some((bq, br)) if risk < br || (risk == br && p.q < bq) => Some((p.q, risk)),
            keep => keep,
        };
    }
    best.map(|(q, _)| q).ok_or(Error::EmptySweep)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub fdr: f64,
    pub se_fdr: f64,
    /// Mean over uncensored runs only.
    pub add: f64,
    pub se_add: f64,
    pub ano: f64,
    pub se_ano: f64,
    pub c: f64,
    pub weighted_risk: f64,
    pub n_runs: usize,
    /// Fraction of runs with at least one censored stream.
    pub censored_fraction: f64,
}

impl MetricsSummary {
    /// Aggregates runs in the given order.
    pub fn from_records(records: &[RunRecord], c: f64) -> Self {
        let fdps: Vec<f64> = records.iter().map(fdp).collect();
        let adds: Vec<f64> = records.iter().filter_map(|r| add(r).ok()).collect();
        let anos: Vec<f64> = records.iter().map(ano).collect();
        let censored = records.iter().filter(|r| r.is_censored()).count();
        let (fdr, se_fdr) = mean_and_se(&fdps);
        let (add, se_add) = mean_and_se(&adds);
        let (ano, se_ano) = mean_and_se(&anos);
        Self {
            fdr,
            se_fdr,
            add,
            se_add,
            ano,
            se_ano,
            c,
            weighted_risk: weighted_risk(add, ano, c),
            n_runs: records.len(),
            censored_fraction: if records.is_empty() {
                0.0
            } else {
                censored as f64 / records.len() as f64
            },
        }
    }

    pub fn with_weight(mut self, c: f64) -> Self {
        self.c = c;
        self.weighted_risk = weighted_risk(self.add, self.ano, c);
        self
    }
}
