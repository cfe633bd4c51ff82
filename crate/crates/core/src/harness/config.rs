//! TOML experiment configuration.
//!
//! `multicp run` uses `procedure`, `q` and `K`; `multicp sweep` uses
//! `procedures`, `q_grid`, `k_grid` and `c_grid`. Every key is optional; see
//! [`ConfigFile::default`] or `multicp --print-config`.
//!
//! In the `pvalue_glr` scenario the true post-change parameter of each stream
//! is drawn uniformly from `[b_min, b_max]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::models::ScenarioModel;
use crate::procedures::ProcedureKind;
use crate::scheduling::SchedulerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Gaussian,
    PvalueGlr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioName,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub b_min: f64,
    pub b_max: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub k_grid: Vec<usize>,
    /// Geometric parameter used to generate change points.
    pub rho: f64,
    /// Geometric parameter assumed by the detectors; defaults to `rho`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_assumed: Option<f64>,
    pub alpha: f64,
    pub procedure: ProcedureKind,
    pub procedures: Vec<ProcedureKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<SchedulerKind>,
    pub q: f64,
    pub q_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    /// Enables the tighter bound columns computed with this sampling interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_star: Option<f64>,
    pub max_censored_fraction: f64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            scenario: ScenarioName::Gaussian,
            mu0: 0.0,
            mu1: 1.0,
            sigma: 1.0,
            b_min: 10.0,
            b_max: 20.0,
            k: 100,
            k_grid: vec![10, 100, 200, 500, 1000],
            rho: 0.01,
            rho_assumed: None,
            alpha: 0.1,
            procedure: ProcedureKind::SMap,
            procedures: vec![ProcedureKind::SMap, ProcedureKind::ISMap],
            scheduler: None,
            q: 1.0,
            q_grid: (1..=20).map(|m| m as f64 / 20.0).collect(),
            c_grid: (0..=10).map(|m| m as f64 / 10.0).collect(),
            runs: 1000,
            seed: 1,
            horizon: None,
            g_star: None,
            max_censored_fraction: 0.01,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults as TOML, with the optional keys shown as comments.
    pub fn defaults_toml() -> String {
        let mut text = toml::to_string(&ConfigFile::default()).expect("defaults serialize");
        text.push_str(
            "# rho_assumed = 0.01      # defaults to rho\n\
             # scheduler = \"map\"       # map | consecutive | full; defaults per procedure\n\
             # horizon = 5000          # defaults to max(50 / rho, 10 |ln alpha| / |ln(1 - rho_assumed)|)\n\
             # g_star = 2.0            # adds g*-bound columns with --bounds\n",
        );
        text
    }

    pub fn model(&self) -> Result<ScenarioModel> {
        let model = match self.scenario {
            ScenarioName::Gaussian => ScenarioModel::gaussian(self.mu0, self.mu1, self.sigma),
            ScenarioName::PvalueGlr => ScenarioModel::pvalue_beta(self.b_min, self.b_max),
        };
        model.map_err(|e| Error::Config(e.to_string()))
    }

    fn experiment(&self, k: usize, procedures: Vec<ProcedureKind>, q_grid: Vec<f64>) -> Result<ExperimentConfig> {
        let config = ExperimentConfig {
            scenario: self.model()?,
            k,
            rho_true: self.rho,
            rho_assumed: self.rho_assumed.unwrap_or(self.rho),
            alpha: self.alpha,
            procedures,
            scheduler: self.scheduler,
            q_grid,
            c_grid: self.c_grid.clone(),
            runs: self.runs,
            seed: self.seed,
            horizon: self.horizon,
            max_censored_fraction: self.max_censored_fraction,
        };
        config.validate()?;
        Ok(config)
    }

    /// Single-cell experiment for `multicp run`.
    pub fn run_experiment(&self) -> Result<ExperimentConfig> {
        self.experiment(self.k, vec![self.procedure], vec![self.q])
    }

    /// One experiment per `K` in `k_grid` for `multicp sweep`.
    pub fn sweep_experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.k_grid.is_empty() {
            return Err(Error::Config("k_grid must be non-empty".into()));
        }
        self.k_grid
            .iter()
            .map(|&k| self.experiment(k, self.procedures.clone(), self.q_grid.clone()))
            .collect()
    }
}
