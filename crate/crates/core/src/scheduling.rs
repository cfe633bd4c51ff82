//! Which active streams the fusion center observes in a slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::StreamId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    /// The `ceil(q K_n)` streams with the highest posterior.
    #[serde(rename = "map")]
    MapTopQ,
    /// A window of `ceil(q K_n)` consecutive active streams at a uniform start.
    #[serde(rename = "consecutive")]
    RandomConsecutive,
    /// Every active stream, regardless of `q`.
    Full,
}

impl SchedulerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::MapTopQ => "map",
            SchedulerKind::RandomConsecutive => "consecutive",
            SchedulerKind::Full => "full",
        }
    }
}

/// `ceil(q * k_n)`, clamped to `[0, k_n]`.
///
/// Products within `1e-9` of an integer are snapped to it first, so grid
/// values such as `q = 0.15` give `15` for `k_n = 100` rather than `16`.
pub fn subset_size(q: f64, k_n: usize) -> usize {
    let x = q.clamp(0.0, 1.0) * k_n as f64;
    let nearest = x.round();
    let size = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (size as usize).min(k_n)
}

/// Ids of the `ceil(q |scores|)` highest-scoring streams, in ascending id order.
///
/// `scores` may be posteriors or any strictly increasing transform of them
/// (the procedures pass log-odds). Ties go to the smaller id.
pub fn select_map(scores: &[(StreamId, f64)], q: f64) -> Vec<StreamId> {
    let size = subset_size(q, scores.len());
    let mut ranked: Vec<(StreamId, f64)> = scores.to_vec();
    ranked.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<StreamId> = ranked[..size].iter().map(|&(id, _)| id).collect();
    chosen.sort_unstable();
    chosen
}

/// `size` consecutive entries of `active_ids` starting at position `start`,
/// wrapping past the end. Returned in ascending id order.
pub fn consecutive_window(active_ids: &[StreamId], size: usize, start: usize) -> Vec<StreamId> {
    let m = active_ids.len();
    if m == 0 {
        return Vec::new();
    }
    let mut chosen: Vec<StreamId> = (0..size.min(m))
        .map(|i| active_ids[(start + i) % m])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Random-consecutive selection over the (ascending) active list.
pub fn select_random_consecutive<R: Rng + ?Sized>(
    active_ids: &[StreamId],
    q: f64,
    rng: &mut R,
) -> Vec<StreamId> {
    if active_ids.is_empty() {
        return Vec::new();
    }
    let size = subset_size(q, active_ids.len());
    let start = rng.random_range(0..active_ids.len());
    consecutive_window(active_ids, size, start)
}
