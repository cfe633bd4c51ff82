//! Bayesian multiple change-point detection over `K` independent data streams
//! when a fusion center may only observe a proportion `q` of the still-active
//! streams at each time slot.
//!
//! The crate provides
//! - observation models and (generalized) likelihood ratios ([`models`]),
//! - the per-stream posterior and average-likelihood-ratio recursions ([`posterior`]),
//! - observation scheduling under the budget `ceil(q * K_n)` ([`scheduling`]),
//! - the S-MAP, IS-MAP, simple and D-FDR detection procedures ([`procedures`]),
//! - FDR / ADD / ANO estimation ([`metrics`]) and asymptotic delay bounds ([`bounds`]),
//! - a reproducible Monte Carlo harness behind the `multicp` CLI ([`harness`]).

pub mod bounds;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod posterior;
pub mod procedures;
pub mod randomness;
pub mod scheduling;

pub use error::{Error, Result};

/// Stream identifier. Procedures number streams `0..K`.
pub type StreamId = usize;
