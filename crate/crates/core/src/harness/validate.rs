//! Invariant checks behind `multicp validate`.
//!
//! Each check returns a [`CheckOutcome`] instead of panicking so the CLI can
//! print a pass/fail line per check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{generate_truths, ExperimentConfig};
use crate::bounds::{ratio_limit, seq_term, smap_upper_bound, ismap_upper_bound, BoundParams, BoundSet};
use crate::error::Result;
use crate::models::{ScenarioModel, StreamTruth};
use crate::posterior::{logit_of_complement, posterior_oracle, LogOdds, PriorSpec, StreamState};
use crate::procedures::{run_procedure, ProcedureConfig, ProcedureKind};
use crate::randomness::RunRandomness;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Recursion versus enumeration for every observe/skip mask over `horizon`
/// slots, comparing at every slot. Passes when the largest absolute gap is
/// within `tol`.
pub fn posterior_oracle_equivalence(horizon: u32, rho: f64, tol: f64, seed: u64) -> Result<CheckOutcome> {
    let model = ScenarioModel::gaussian(0.0, 1.0, 1.0)?;
    let prior = PriorSpec::geometric(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for mask in 0u32..(1 << horizon) {
        let change = rng.random_range(1..=horizon as u64 + 2);
        let truth = StreamTruth::new(change);
        let mut state = StreamState::new();
        let mut observations = Vec::new();
        for n in 1..=horizon as u64 {
            let observed = mask & (1 << (n - 1)) != 0;
            let lr = if observed {
                let x = model.sample(&truth, n, &mut rng);
                observations.push((n, x));
                Some(model.log_likelihood_ratio(x)?)
            } else {
                None
            };
            state.advance(lr, &prior);
            let oracle = posterior_oracle(&observations, &prior, &model, n, n + 50)?;
            worst = worst.max((state.posterior() - oracle).abs());
        }
    }
    Ok(CheckOutcome::new(
        "posterior recursion matches enumeration",
        worst <= tol,
        format!("{} masks, horizon {horizon}, max |diff| = {worst:.3e} (tol {tol:e})", 1u64 << horizon),
    ))
}

/// Results of the ALR checks on fully observed paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlrChecks {
    pub identity: CheckOutcome,
    pub decisions: CheckOutcome,
}

/// `G_n (1 - pi_n) = (1 - rho)^n`, and `G_n >= K / (r alpha)` iff
/// `pi_n >= 1 - (1 - rho)^n r alpha / K`, on `paths` random paths of length
/// `len`.
pub fn alr_identity(paths: usize, len: u64, rho: f64, k: usize, alpha: f64, tol: f64, seed: u64) -> Result<AlrChecks> {
    let model = ScenarioModel::gaussian(0.0, 1.0, 1.0)?;
    let prior = PriorSpec::geometric(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut mismatches = 0usize;
    let mut comparisons = 0usize;
    for _ in 0..paths {
        let truth = StreamTruth::new(rng.random_range(1..=len + 10));
        let mut posterior = StreamState::new();
        let mut alr = StreamState::new();
        for n in 1..=len {
            let l = model.log_likelihood_ratio(model.sample(&truth, n, &mut rng))?;
            posterior.advance(Some(l), &prior);
            alr.advance_alr(l, &prior)?;

            // G (1 - pi) computed in logs: ln G - ln(1 + Lambda).
            let log_lhs = alr.log_alr - log1p_exp(posterior.log_odds.0);
            let log_rhs = prior.log_survival(n);
            worst = worst.max((log_lhs - log_rhs).exp_m1().abs());

            for r in 1..=k {
                let ra = r as f64 * alpha / k as f64;
                let by_alr = alr.log_alr >= (k as f64).ln() - (r as f64 * alpha).ln();
                let tail = (prior.log_survival(n) + ra.ln()).exp();
                let boundary = logit_of_complement(tail);
                let by_posterior = posterior.log_odds >= LogOdds(boundary);
                comparisons += 1;
                // Disagreement is only tolerated within rounding of the boundary.
                if by_alr != by_posterior && (posterior.log_odds.0 - boundary).abs() > 1e-9 * boundary.abs().max(1.0) {
                    mismatches += 1;
                }
            }
        }
    }
    Ok(AlrChecks {
        identity: CheckOutcome::new(
            "ALR-posterior identity",
            worst <= tol,
            format!("{paths} paths x {len} slots, max relative error {worst:.3e} (tol {tol:e})"),
        ),
        decisions: CheckOutcome::new(
            "ALR and posterior threshold decisions agree",
            mismatches == 0,
            format!("{mismatches} mismatches in {comparisons} comparisons"),
        ),
    })
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Monotonicity and limit of `seq_term`, the IS-MAP/S-MAP ratio at
/// `K = 10^6`, and the bound orderings on random parameter draws.
pub fn bounds_checks(draws: usize, seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    let mut prev = seq_term(1);
    let mut monotone = prev >= 0.0;
    for k in 2..=10_000 {
        let cur = seq_term(k);
        monotone &= cur > prev && cur < 1.0;
        prev = cur;
    }
    out.push(CheckOutcome::new(
        "seq_term increasing on K = 1..10^4",
        monotone,
        format!("seq_term(10^4) = {prev:.9}"),
    ));

    let big = seq_term(1_000_000);
    out.push(CheckOutcome::new(
        "seq_term(10^6) near 1",
        (big - 1.0).abs() <= 1e-4,
        format!("seq_term(10^6) = {big:.9} (tol 1e-4)"),
    ));

    let ratio = ismap_upper_bound(0.1, 0.01) / smap_upper_bound(0.1, 0.01, 1_000_000);
    out.push(CheckOutcome::new(
        "IS-MAP/S-MAP bound ratio at K = 10^6",
        (ratio - 0.697206).abs() <= 1e-3,
        format!("ratio = {ratio:.6}, limit = {:.6} (tol 1e-3)", ratio_limit(0.1)),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    for _ in 0..draws {
        let p = BoundParams {
            alpha: rng.random_range(1e-6..0.999),
            rho: rng.random_range(1e-4..0.9),
            kl: rng.random_range(0.0..5.0),
            k: rng.random_range(1..=100_000),
            g_star: 1.0 + rng.random_range(0.0..20.0),
            zeta: 1.0 + rng.random_range(0.0..20.0),
            eta: rng.random_range(1e-6..0.999),
        };
        let ok = BoundSet::evaluate(&p).map(|b| b.orderings_hold()).unwrap_or(false);
        if !ok {
            violations += 1;
        }
    }
    out.push(CheckOutcome::new(
        "bound orderings on random parameters",
        violations == 0,
        format!("{violations} violations in {draws} draws"),
    ));
    out
}

/// Runs IS-MAP and S-MAP on identical sample paths and checks
/// `T_ISMap <= T_SMap` for every stream.
pub fn pathwise_dominance(runs: usize, k: usize, q: f64, seed: u64) -> Result<CheckOutcome> {
    let cfg = ExperimentConfig::gaussian(k, vec![ProcedureKind::ISMap, ProcedureKind::SMap], vec![q], runs, seed);
    let horizon = cfg.horizon();
    let ismap = ProcedureConfig::new(ProcedureKind::ISMap, cfg.alpha, k, cfg.rho_assumed, q, horizon)?;
    let smap = ProcedureConfig::new(ProcedureKind::SMap, cfg.alpha, k, cfg.rho_assumed, q, horizon)?;
    let mut violations = 0usize;
    let mut undecided = 0usize;
    for r in 0..runs as u64 {
        let randomness = RunRandomness::new(seed, k, r);
        let truths = generate_truths(k, cfg.rho_true, &cfg.scenario, &mut randomness.truth_rng())?;
        let a = run_procedure(&ismap, &truths, &cfg.scenario, randomness)?;
        let b = run_procedure(&smap, &truths, &cfg.scenario, randomness)?;
        for (ti, ts) in a.stopping_times.iter().zip(&b.stopping_times) {
            match (ti, ts) {
                (Some(ti), Some(ts)) if ti > ts => violations += 1,
                (None, Some(_)) => violations += 1,
                (_, None) => undecided += 1,
                _ => {}
            }
        }
    }
    Ok(CheckOutcome::new(
        format!("pathwise T_ISMap <= T_SMap (q = {q})"),
        violations == 0,
        format!("{violations} violations over {runs} runs x {k} streams ({undecided} censored under S-MAP)"),
    ))
}

/// Per-threshold pre-change crossing rates of single fully observed streams.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeOneRate {
    pub r: usize,
    pub threshold: f64,
    pub nominal: f64,
    pub rate: f64,
    pub se: f64,
}

impl TypeOneRate {
    pub fn passes(&self) -> bool {
        self.rate <= self.nominal + 3.0 * self.se
    }
}

/// Fraction of `runs` single-stream paths whose posterior reaches
/// `Q_r = 1 - r alpha / K` at some `n < t`, for each `r`.
pub fn type_one_rates(k: usize, alpha: f64, rho: f64, runs: usize, seed: u64) -> Result<Vec<TypeOneRate>> {
    let model = ScenarioModel::gaussian(0.0, 1.0, 1.0)?;
    let prior = PriorSpec::geometric(rho)?;
    let thresholds: Vec<f64> = (1..=k)
        .map(|r| logit_of_complement(r as f64 * alpha / k as f64))
        .collect();
    let mut crossings = vec![0usize; k];
    for run in 0..runs as u64 {
        let randomness = RunRandomness::new(seed, 1, run);
        let truth = generate_truths(1, rho, &model, &mut randomness.truth_rng())?[0];
        let mut state = StreamState::new();
        let mut peak = f64::NEG_INFINITY;
        for n in 1..truth.change_point {
            let x = model.sample(&truth, n, &mut randomness.observation_rng(0, n));
            state.advance(Some(model.log_likelihood_ratio(x)?), &prior);
            peak = peak.max(state.log_odds.0);
        }
        for (count, &thr) in crossings.iter_mut().zip(&thresholds) {
            if peak >= thr {
                *count += 1;
            }
        }
    }
    Ok(crossings
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let rate = c as f64 / runs as f64;
            TypeOneRate {
                r: i + 1,
                threshold: 1.0 - (i + 1) as f64 * alpha / k as f64,
                nominal: (i + 1) as f64 * alpha / k as f64,
                rate,
                se: (rate * (1.0 - rate) / runs as f64).sqrt(),
            }
        })
        .collect())
}

/// Default invariant suite for `multicp validate`.
pub fn run_suite(seed: u64, runs: usize) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![posterior_oracle_equivalence(10, 0.05, 1e-9, seed)?];
    let alr = alr_identity(100, 50, 0.01, 10, 0.1, 1e-9, seed)?;
    out.push(alr.identity);
    out.push(alr.decisions);
    out.extend(bounds_checks(10_000, seed));
    out.push(pathwise_dominance(runs.min(100), 50, 1.0, seed)?);
    for rate in type_one_rates(10, 0.1, 0.01, runs.max(1), seed)? {
        out.push(CheckOutcome::new(
            format!("pre-change crossing rate of Q_{}", rate.r),
            rate.passes(),
            format!("rate {:.4} vs nominal {:.3} + 3 SE ({:.4})", rate.rate, rate.nominal, rate.se),
        ));
    }
    Ok(out)
}
