//! Pre/post-change observation models.
//!
//! Two scenarios are supported: a Gaussian mean shift with known densities, and
//! p-value observations where the post-change density is `Beta(1, b)` with `b`
//! only known to lie in `[b_min, b_max]`. The second case uses a generalized
//! likelihood ratio (GLR) maximized over `b`.
//!
//! Likelihood ratios are computed in log space; [`ScenarioModel::likelihood_ratio`]
//! exponentiates only at the API boundary.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioModel {
    /// `f0 = N(mu0, sigma^2)`, `f1 = N(mu1, sigma^2)`.
    #[serde(rename = "gaussian")]
    GaussianMeanShift { mu0: f64, mu1: f64, sigma: f64 },
    /// `f0 = U(0, 1)`, `f1 = Beta(1, b)` with unknown `b` in `[b_min, b_max]`.
    #[serde(rename = "pvalue_glr")]
    PValueBeta { b_min: f64, b_max: f64 },
}

/// Ground truth for one stream in one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamTruth {
    /// First slot drawn from the post-change density (`t >= 1`).
    pub change_point: u64,
    /// Actual post-change Beta parameter; `None` for the Gaussian scenario.
    pub b_true: Option<f64>,
}

impl StreamTruth {
    pub fn new(change_point: u64) -> Self {
        Self {
            change_point,
            b_true: None,
        }
    }
}

impl ScenarioModel {
    pub fn gaussian(mu0: f64, mu1: f64, sigma: f64) -> Result<Self> {
        let model = ScenarioModel::GaussianMeanShift { mu0, mu1, sigma };
        model.validate()?;
        Ok(model)
    }

    pub fn pvalue_beta(b_min: f64, b_max: f64) -> Result<Self> {
        let model = ScenarioModel::PValueBeta { b_min, b_max };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScenarioModel::GaussianMeanShift { mu0, mu1, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid(format!("sigma must be positive, got {sigma}")));
                }
                if !mu0.is_finite() || !mu1.is_finite() {
                    return Err(invalid("gaussian means must be finite"));
                }
            }
            ScenarioModel::PValueBeta { b_min, b_max } => {
                if !(b_min > 1.0 && b_max >= b_min && b_max.is_finite()) {
                    return Err(invalid(format!(
                        "need b_max >= b_min > 1, got b_min={b_min}, b_max={b_max}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short name used in CSV output and config files.
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioModel::GaussianMeanShift { .. } => "gaussian",
            ScenarioModel::PValueBeta { .. } => "pvalue_glr",
        }
    }

    /// Draws the observation of a stream at `slot`: pre-change density for
    /// `slot < t`, post-change density from `t` on.
    pub fn sample<R: Rng + ?Sized>(&self, truth: &StreamTruth, slot: u64, rng: &mut R) -> f64 {
        let changed = slot >= truth.change_point;
        match *self {
            ScenarioModel::GaussianMeanShift { mu0, mu1, sigma } => {
                let mean = if changed { mu1 } else { mu0 };
                Normal::new(mean, sigma)
                    .expect("validated sigma")
                    .sample(rng)
            }
            ScenarioModel::PValueBeta { b_min, .. } => {
                if changed {
                    let b = truth.b_true.unwrap_or(b_min);
                    Beta::new(1.0, b).expect("validated beta").sample(rng)
                } else {
                    rng.random::<f64>()
                }
            }
        }
    }

    /// `ln L(x)`; the GLR over `[b_min, b_max]` for the p-value scenario.
    pub fn log_likelihood_ratio(&self, x: f64) -> Result<f64> {
        match *self {
            ScenarioModel::GaussianMeanShift { mu0, mu1, sigma } => {
                let d0 = x - mu0;
                let d1 = x - mu1;
                Ok((d0 * d0 - d1 * d1) / (2.0 * sigma * sigma))
            }
            ScenarioModel::PValueBeta { b_min, b_max } => log_glr_beta(x, b_min, b_max),
        }
    }

    pub fn likelihood_ratio(&self, x: f64) -> Result<f64> {
        self.log_likelihood_ratio(x).map(f64::exp)
    }

    /// Exact log-LR of `Beta(1, b)` against `U(0, 1)`; only meaningful for the
    /// p-value scenario.
    pub fn log_exact_beta_lr(x: f64, b: f64) -> Result<f64> {
        check_unit(x)?;
        if x == 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(b.ln() + (b - 1.0) * (-x).ln_1p())
    }

    /// `D(f1 || f0)`. For the p-value scenario `b` selects the post-change density.
    pub fn kl_divergence(&self, b: Option<f64>) -> Result<f64> {
        match *self {
            ScenarioModel::GaussianMeanShift { mu0, mu1, sigma } => {
                let d = mu1 - mu0;
                Ok(d * d / (2.0 * sigma * sigma))
            }
            ScenarioModel::PValueBeta { b_min, b_max } => {
                let b = b.ok_or_else(|| invalid("p-value KL divergence needs a Beta parameter"))?;
                if !(b_min..=b_max).contains(&b) {
                    return Err(invalid(format!("b={b} outside [{b_min}, {b_max}]")));
                }
                Ok(b.ln() - (b - 1.0) / b)
            }
        }
    }

    /// KL divergence used for bound overlays: the midpoint of `[b_min, b_max]`
    /// for the p-value scenario.
    pub fn nominal_kl(&self) -> f64 {
        match *self {
            ScenarioModel::GaussianMeanShift { .. } => self.kl_divergence(None),
            ScenarioModel::PValueBeta { b_min, b_max } => {
                self.kl_divergence(Some(0.5 * (b_min + b_max)))
            }
        }
        .expect("nominal parameters are in range")
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

/// Maximizer of `b (1-x)^(b-1)` over `[b_min, b_max]`.
///
/// The density is unimodal in `b` with stationary point `-1 / ln(1-x)`.
pub fn glr_beta_argmax(x: f64, b_min: f64, b_max: f64) -> Result<f64> {
    check_unit(x)?;
    if x == 1.0 {
        return Ok(b_min);
    }
    let log_survival = (-x).ln_1p();
    if log_survival == 0.0 {
        return Ok(b_max);
    }
    Ok((-1.0 / log_survival).clamp(b_min, b_max))
}

pub fn log_glr_beta(x: f64, b_min: f64, b_max: f64) -> Result<f64> {
    let b = glr_beta_argmax(x, b_min, b_max)?;
    if x == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(b.ln() + (b - 1.0) * (-x).ln_1p())
}

/// `max_b f1^(b)(x) / f0(x)` for `f1^(b) = Beta(1, b)` and `f0 = U(0, 1)`.
/// Defined as 0 at `x = 1`.
pub fn glr_beta(x: f64, b_min: f64, b_max: f64) -> Result<f64> {
    log_glr_beta(x, b_min, b_max).map(f64::exp)
}
