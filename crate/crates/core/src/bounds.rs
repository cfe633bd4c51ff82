//! Asymptotic (alpha -> 0) average-detection-delay bounds for S-MAP and IS-MAP
//! under a geometric prior, and their large-`K` behaviour.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub rho: f64,
    /// `D(f1 || f0)`.
    pub kl: f64,
    pub k: usize,
    /// Worst-case mean sampling interval over all streams and both procedures.
    pub g_star: f64,
    /// Mean sampling interval of a single stopping rule.
    pub zeta: f64,
    pub eta: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.alpha) || !unit(self.rho) || !unit(self.eta) {
            return Err(invalid("alpha, rho and eta must lie in (0, 1)"));
        }
        if !(self.kl >= 0.0) || self.k == 0 || !(self.g_star >= 1.0) || !(self.zeta >= 1.0) {
            return Err(invalid("need kl >= 0, K >= 1, g* >= 1, zeta >= 1"));
        }
        Ok(())
    }
}

fn prior_rate(rho: f64) -> f64 {
    -(-rho).ln_1p()
}

/// `ln K - (1/K) ln K!`; increasing in `K` with limit 1.
pub fn seq_term(k: usize) -> f64 {
    let k = k as f64;
    k.ln() - ln_gamma(k + 1.0) / k
}

/// `|ln alpha| / (D + |ln(1 - rho)|)`, shared by both procedures.
pub fn add_lower_bound(alpha: f64, kl: f64, rho: f64) -> f64 {
    alpha.ln().abs() / (kl + prior_rate(rho))
}

/// `(seq_term(K) + |ln alpha|) / |ln(1 - rho)|`.
pub fn smap_upper_bound(alpha: f64, rho: f64, k: usize) -> f64 {
    (seq_term(k) + alpha.ln().abs()) / prior_rate(rho)
}

/// `(1 + |ln alpha|) / |ln(1 - rho)|`, the `K -> infinity` limit of
/// [`smap_upper_bound`].
pub fn smap_upper_bound_limit(alpha: f64, rho: f64) -> f64 {
    (1.0 + alpha.ln().abs()) / prior_rate(rho)
}

/// `|ln alpha| / |ln(1 - rho)|`.
pub fn ismap_upper_bound(alpha: f64, rho: f64) -> f64 {
    alpha.ln().abs() / prior_rate(rho)
}

/// Upper bounds assuming each stream is sampled on average every `g_star`
/// slots: `(S-MAP, IS-MAP)`.
pub fn gstar_upper_bounds(alpha: f64, rho: f64, kl: f64, g_star: f64, k: usize) -> (f64, f64) {
    let denom = kl / g_star + prior_rate(rho);
    let la = alpha.ln().abs();
    ((seq_term(k) + la) / denom, la / denom)
}

/// Single stopping rule `pi_n >= 1 - eta` sampled with mean interval `zeta`.
pub fn prop1_upper_bound(eta: f64, rho: f64, kl: f64, zeta: f64) -> f64 {
    eta.ln().abs() / (kl / zeta + prior_rate(rho))
}

/// `|ln alpha| / (1 + |ln alpha|)`, the large-`K` ratio of the IS-MAP and
/// S-MAP upper bounds.
pub fn ratio_limit(alpha: f64) -> f64 {
    let la = alpha.ln().abs();
    la / (1.0 + la)
}

/// All bounds for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub lower: f64,
    pub smap_upper: f64,
    pub ismap_upper: f64,
    pub smap_upper_gstar: f64,
    pub ismap_upper_gstar: f64,
    pub single_rule_upper: f64,
}

impl BoundSet {
    pub fn evaluate(p: &BoundParams) -> Result<Self> {
        p.validate()?;
        let (smap_g, ismap_g) = gstar_upper_bounds(p.alpha, p.rho, p.kl, p.g_star, p.k);
        Ok(Self {
            lower: add_lower_bound(p.alpha, p.kl, p.rho),
            smap_upper: smap_upper_bound(p.alpha, p.rho, p.k),
            ismap_upper: ismap_upper_bound(p.alpha, p.rho),
            smap_upper_gstar: smap_g,
            ismap_upper_gstar: ismap_g,
            single_rule_upper: prop1_upper_bound(p.eta, p.rho, p.kl, p.zeta),
        })
    }

    /// Orderings that hold for every valid parameter set.
    pub fn orderings_hold(&self) -> bool {
        let le = |a: f64, b: f64| a <= b * (1.0 + 1e-12);
        le(self.lower, self.ismap_upper_gstar)
            && le(self.ismap_upper_gstar, self.ismap_upper)
            && le(self.ismap_upper_gstar, self.smap_upper_gstar)
            && le(self.ismap_upper, self.smap_upper)
            && le(self.smap_upper_gstar, self.smap_upper)
            && le(self.lower, self.smap_upper_gstar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn literal_seq_term(k: usize) -> f64 {
        let log_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
        (k as f64).ln() - log_fact / k as f64
    }

    #[test]
    fn seq_term_examples() {
        assert!(seq_term(1).abs() < 1e-14);
        assert!((seq_term(2) - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert!((seq_term(2) - 0.346574).abs() < 1e-6);
        for k in [3, 10, 57, 1000] {
            assert!((seq_term(k) - literal_seq_term(k)).abs() < 1e-11, "K={k}");
        }
        let k = 1e6;
        let stirling = 1.0 - (2.0 * std::f64::consts::PI * k).ln() / (2.0 * k);
        assert!((seq_term(1_000_000) - stirling).abs() < 1e-8);
        assert!((seq_term(1_000_000) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn lower_bound_examples() {
        let v = add_lower_bound(0.1, 0.5, 0.01);
        assert!((0.5 + prior_rate(0.01) - 0.510050).abs() < 1e-6);
        assert!((v - 4.5144).abs() < 1e-4);
        assert!((add_lower_bound(0.1, 0.0, 0.01) - ismap_upper_bound(0.1, 0.01)).abs() < 1e-12);
        assert!(add_lower_bound(1.0 - 1e-15, 0.5, 0.01) < 1e-12);
    }

    #[test]
    fn upper_bound_examples() {
        assert!((smap_upper_bound(0.1, 0.01, 1) - 229.106).abs() < 1e-3);
        assert!((smap_upper_bound(0.1, 0.01, 2) - 263.59).abs() < 1e-2);
        assert!((smap_upper_bound(0.1, 0.01, 100_000_000) - smap_upper_bound_limit(0.1, 0.01)).abs() < 1e-3);
        assert!((ismap_upper_bound(0.1, 0.01) - 229.106).abs() < 1e-3);
        assert!((ismap_upper_bound(0.5, 0.5) - 1.0).abs() < 1e-15);
        assert!(ismap_upper_bound(1.0 - 1e-15, 0.3) < 1e-12);
    }

    #[test]
    fn gstar_examples() {
        let (s, i) = gstar_upper_bounds(0.1, 0.01, 0.5, 1.0, 1);
        assert!((s - 4.5144).abs() < 1e-4);
        assert!(i <= s);
        let (s, i) = gstar_upper_bounds(0.1, 0.01, 0.5, 1e15, 7);
        assert!((s - smap_upper_bound(0.1, 0.01, 7)).abs() < 1e-9);
        assert!((i - ismap_upper_bound(0.1, 0.01)).abs() < 1e-9);
    }

    #[test]
    fn prop1_examples() {
        assert!((prop1_upper_bound(0.1, 0.01, 0.5, 1.0) - 4.5144).abs() < 1e-4);
        assert!((prop1_upper_bound(0.1, 0.01, 0.5, 1e15) - ismap_upper_bound(0.1, 0.01)).abs() < 1e-9);
        let v = prop1_upper_bound(0.5, 0.2, 0.0, 3.0);
        assert!((v - 2f64.ln() / prior_rate(0.2)).abs() < 1e-14);
    }

    #[test]
    fn ratio_examples() {
        assert!((ratio_limit(0.1) - 0.697206).abs() < 1e-6);
        assert!((ratio_limit((-1.0f64).exp()) - 0.5).abs() < 1e-15);
        assert!(ratio_limit(1e-300) > 0.998);
    }

    #[test]
    fn validation() {
        let p = BoundParams {
            alpha: 0.1,
            rho: 0.01,
            kl: 0.5,
            k: 10,
            g_star: 0.5,
            zeta: 1.0,
            eta: 0.1,
        };
        assert!(BoundSet::evaluate(&p).is_err());
        let ok = BoundParams { g_star: 2.0, ..p };
        assert!(BoundSet::evaluate(&ok).unwrap().orderings_hold());
    }
}
