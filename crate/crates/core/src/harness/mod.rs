//! Monte Carlo experiment engine.
//!
//! A cell is one `(procedure, q)` pair at a fixed `K`. Each cell runs `runs`
//! replications; replication `r` draws its change points and observations from
//! [`RunRandomness::new(seed, K, r)`](RunRandomness::new), so every procedure
//! in a sweep sees the same sample paths. Replications run on the rayon pool
//! and are reduced in replication order, which keeps output byte-identical for
//! a given config and seed.

pub mod config;
pub mod output;
pub mod validate;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::ismap_upper_bound;
use crate::error::{invalid, Error, Result};
use crate::metrics::{best_proportion, MetricsSummary, SweepPoint};
use crate::models::{ScenarioModel, StreamTruth};
use crate::procedures::{run_procedure, ProcedureConfig, ProcedureKind, RunRecord};
use crate::randomness::RunRandomness;
use crate::scheduling::SchedulerKind;

/// Change points i.i.d. geometric on `{1, 2, ...}` with parameter `rho_true`
/// (`rho_true = 1` puts every change at slot 1). For the p-value scenario each
/// stream also gets `b_true ~ U[b_min, b_max]`.
pub fn generate_truths<R: Rng + ?Sized>(
    k: usize,
    rho_true: f64,
    model: &ScenarioModel,
    rng: &mut R,
) -> Result<Vec<StreamTruth>> {
    let failures =
        Geometric::new(rho_true).map_err(|e| invalid(format!("rho_true={rho_true}: {e}")))?;
    Ok((0..k)
        .map(|_| {
            let change_point = 1 + failures.sample(rng);
            let b_true = match *model {
                ScenarioModel::PValueBeta { b_min, b_max } => Some(rng.random_range(b_min..=b_max)),
                ScenarioModel::GaussianMeanShift { .. } => None,
            };
            StreamTruth {
                change_point,
                b_true,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioModel,
    pub k: usize,
    pub rho_true: f64,
    pub rho_assumed: f64,
    pub alpha: f64,
    pub procedures: Vec<ProcedureKind>,
    /// Replaces each procedure's default scheduler (except D-FDR's).
    pub scheduler: Option<SchedulerKind>,
    pub q_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    /// `None` selects [`default_horizon`].
    pub horizon: Option<u64>,
    /// Cells whose censored-run fraction exceeds this fail the gate.
    pub max_censored_fraction: f64,
}

/// `max(50 / rho_true, 10 * |ln alpha| / |ln(1 - rho_assumed)|)`.
pub fn default_horizon(rho_true: f64, rho_assumed: f64, alpha: f64) -> u64 {
    (50.0 / rho_true)
        .max(10.0 * ismap_upper_bound(alpha, rho_assumed))
        .ceil() as u64
}

impl ExperimentConfig {
    /// Paper-style Gaussian experiment (`N(0,1)` to `N(1,1)`, `rho = 0.01`,
    /// `alpha = 0.1`) with the given procedures and proportions.
    pub fn gaussian(k: usize, procedures: Vec<ProcedureKind>, q_grid: Vec<f64>, runs: usize, seed: u64) -> Self {
        Self {
            scenario: ScenarioModel::GaussianMeanShift {
                mu0: 0.0,
                mu1: 1.0,
                sigma: 1.0,
            },
            k,
            rho_true: 0.01,
            rho_assumed: 0.01,
            alpha: 0.1,
            procedures,
            scheduler: None,
            q_grid,
            c_grid: vec![0.0],
            runs,
            seed,
            horizon: None,
            max_censored_fraction: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(|e| Error::Config(e.to_string()))?;
        let cfg = |m: String| Err(Error::Config(m));
        if self.k == 0 {
            return cfg("K must be positive".into());
        }
        if !(self.rho_true > 0.0 && self.rho_true <= 1.0) {
            return cfg(format!("rho must lie in (0, 1], got {}", self.rho_true));
        }
        if self.procedures.is_empty() || self.q_grid.is_empty() || self.c_grid.is_empty() {
            return cfg("procedure, q and c grids must be non-empty".into());
        }
        if let Some(q) = self.q_grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return cfg(format!("q={q} outside [0, 1]"));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return cfg(format!("c={c} outside [0, 1]"));
        }
        if self.runs == 0 {
            return cfg("runs must be at least 1".into());
        }
        for &kind in &self.procedures {
            self.procedure_config(kind, self.q_grid[0])?;
        }
        Ok(())
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
            .unwrap_or_else(|| default_horizon(self.rho_true, self.rho_assumed, self.alpha))
    }

    pub fn procedure_config(&self, kind: ProcedureKind, q: f64) -> Result<ProcedureConfig> {
        let config = ProcedureConfig::new(kind, self.alpha, self.k, self.rho_assumed, q, self.horizon())?;
        Ok(match self.scheduler {
            Some(s) => config.with_scheduler(s),
            None => config,
        })
    }

    /// `(procedure, q)` cells in output order. D-FDR ignores `q` and appears once.
    pub fn cells(&self) -> Vec<(ProcedureKind, f64)> {
        let mut cells = Vec::new();
        for &kind in &self.procedures {
            if kind == ProcedureKind::DFdr {
                cells.push((kind, 1.0));
            } else {
                cells.extend(self.q_grid.iter().map(|&q| (kind, q)));
            }
        }
        cells
    }

    /// Hex SHA-256 of the JSON form of the config.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Runs all replications of one cell, in replication order.
pub fn run_cell(config: &ExperimentConfig, kind: ProcedureKind, q: f64) -> Result<Vec<RunRecord>> {
    let procedure = config.procedure_config(kind, q)?;
    (0..config.runs as u64)
        .into_par_iter()
        .map(|r| {
            let randomness = RunRandomness::new(config.seed, config.k, r);
            let truths = generate_truths(config.k, config.rho_true, &config.scenario, &mut randomness.truth_rng())?;
            run_procedure(&procedure, &truths, &config.scenario, randomness)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub procedure: ProcedureKind,
    pub scheduler: SchedulerKind,
    pub scenario: String,
    pub k: usize,
    pub q: f64,
    pub alpha: f64,
    pub rho: f64,
    pub rho_assumed: f64,
    pub seed: u64,
    pub summary: MetricsSummary,
    pub gate_failed: bool,
}

impl SweepRow {
    /// Procedure name, suffixed with the scheduler when it is not the default.
    pub fn label(&self) -> String {
        if self.scheduler == self.procedure.default_scheduler() {
            self.procedure.name().to_string()
        } else {
            format!("{}@{}", self.procedure.name(), self.scheduler.name())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// One row per `(procedure, q, K, c)`.
    pub rows: Vec<SweepRow>,
    pub provenance: Vec<Provenance>,
}

impl SweepResult {
    pub fn gate_failures(&self) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.gate_failed).collect()
    }

    pub fn extend(&mut self, other: SweepResult) {
        self.rows.extend(other.rows);
        self.provenance.extend(other.provenance);
    }

    /// Summary of the first row matching `(procedure, q)` at `K`.
    pub fn find(&self, procedure: ProcedureKind, k: usize, q: f64) -> Option<&MetricsSummary> {
        self.rows
            .iter()
            .find(|r| r.procedure == procedure && r.k == k && (r.q - q).abs() < 1e-12)
            .map(|r| &r.summary)
    }
}

/// Executes every cell of the experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for (kind, q) in config.cells() {
        let records = run_cell(config, kind, q)?;
        let procedure = config.procedure_config(kind, q)?;
        let base = MetricsSummary::from_records(&records, config.c_grid[0]);
        let gate_failed = base.censored_fraction > config.max_censored_fraction;
        for &c in &config.c_grid {
            rows.push(SweepRow {
                procedure: kind,
                scheduler: procedure.scheduler,
                scenario: config.scenario.name().to_string(),
                k: config.k,
                q: procedure.q,
                alpha: config.alpha,
                rho: config.rho_true,
                rho_assumed: config.rho_assumed,
                seed: config.seed,
                summary: base.with_weight(c),
                gate_failed,
            });
        }
    }
    Ok(SweepResult {
        rows,
        provenance: vec![Provenance {
            config_hash: config.config_hash(),
            seed: config.seed,
        }],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestProportionRow {
    pub k: usize,
    pub procedure: String,
    pub c: f64,
    pub best_q: f64,
    /// Whether the best `q` of this procedure is non-increasing over the c grid.
    pub non_increasing_in_c: bool,
}

/// Best proportion per `(K, procedure)` for every `c` in `c_grid`.
pub fn sweep_weighted_risk(sweep: &SweepResult, c_grid: &[f64]) -> Result<Vec<BestProportionRow>> {
    let mut groups: Vec<((usize, String), Vec<SweepPoint>)> = Vec::new();
    for row in &sweep.rows {
        let key = (row.k, row.label());
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let points = &mut groups[idx].1;
        if !points.iter().any(|p| p.q == row.q) {
            points.push(SweepPoint {
                q: row.q,
                add: row.summary.add,
                ano: row.summary.ano,
            });
        }
    }

    let mut out = Vec::new();
    for ((k, label), points) in groups {
        let best: Vec<f64> = c_grid
            .iter()
            .map(|&c| best_proportion(&points, c))
            .collect::<Result<_>>()?;
        let non_increasing = best.windows(2).all(|w| w[1] <= w[0]);
        out.extend(c_grid.iter().zip(&best).map(|(&c, &best_q)| BestProportionRow {
            k,
            procedure: label.clone(),
            c,
            best_q,
            non_increasing_in_c: non_increasing,
        }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_geometric() {
        let model = ScenarioModel::gaussian(0.0, 1.0, 1.0).unwrap();
        let t = generate_truths(50, 1.0, &model, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(t.iter().all(|s| s.change_point == 1 && s.b_true.is_none()));
    }

    #[test]
    fn geometric_moments() {
        let model = ScenarioModel::pvalue_beta(10.0, 20.0).unwrap();
        let t = generate_truths(100_000, 0.01, &model, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let n = t.len() as f64;
        let mean = t.iter().map(|s| s.change_point as f64).sum::<f64>() / n;
        // Var of geometric on {1,..}: (1 - rho) / rho^2.
        let se = (0.99f64 / 1e-4 / n).sqrt();
        assert!((mean - 100.0).abs() <= 3.0 * se, "mean={mean}");
        let p1 = t.iter().filter(|s| s.change_point == 1).count() as f64 / n;
        let se1 = (0.01 * 0.99 / n).sqrt();
        assert!((p1 - 0.01).abs() <= 3.0 * se1, "p1={p1}");
        assert!(t
            .iter()
            .all(|s| s.b_true.is_some_and(|b| (10.0..=20.0).contains(&b))));
    }

    #[test]
    fn default_horizon_values() {
        assert_eq!(default_horizon(0.01, 0.01, 0.1), 5000);
        assert!(default_horizon(0.01, 0.01, 1e-3) > 5000);
    }

    #[test]
    fn experiment_is_reproducible() {
        let mut cfg = ExperimentConfig::gaussian(5, vec![ProcedureKind::SMap, ProcedureKind::DFdr], vec![0.4, 1.0], 8, 42);
        cfg.c_grid = vec![0.0, 0.5];
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        // smap x 2 q + dfdr x 1, each for 2 c values
        assert_eq!(a.rows.len(), 6);
        assert_eq!(a.provenance[0].config_hash.len(), 64);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = ExperimentConfig::gaussian(5, vec![ProcedureKind::SMap], vec![1.5], 8, 42);
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        cfg.q_grid = vec![0.5];
        cfg.runs = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn censoring_gate() {
        let mut cfg = ExperimentConfig::gaussian(5, vec![ProcedureKind::SMap], vec![1.0], 10, 1);
        cfg.horizon = Some(3);
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.gate_failures().len(), 1);
    }

    #[test]
    fn best_q_endpoints() {
        let mut cfg = ExperimentConfig::gaussian(10, vec![ProcedureKind::ISMap], vec![0.2, 0.6, 1.0], 20, 5);
        cfg.c_grid = vec![0.0, 1.0];
        let res = run_experiment(&cfg).unwrap();
        let table = sweep_weighted_risk(&res, &cfg.c_grid).unwrap();
        assert_eq!(table.len(), 2);
        let points: Vec<(f64, f64, f64)> = res
            .rows
            .iter()
            .filter(|r| r.summary.c == 0.0)
            .map(|r| (r.q, r.summary.add, r.summary.ano))
            .collect();
        let argmin = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
            points
                .iter()
                .min_by(|a, b| f(a).total_cmp(&f(b)).then(a.0.total_cmp(&b.0)))
                .unwrap()
                .0
        };
        assert_eq!(table[0].best_q, argmin(&|p| p.1));
        assert_eq!(table[1].best_q, argmin(&|p| p.2));
        assert_eq!(table[1].best_q, 0.2);
    }
}
