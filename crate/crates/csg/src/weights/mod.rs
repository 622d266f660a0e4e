//! Integration weights over the evaluation history.
//!
//! At step `n` the CSG iteration forms `Ĝ_n = Σ_k α_k ∇_θ j(θ_k, x_k)` with
//! weights `α_k` that approximate the probability mass of the region of
//! sample space in which `(θ_n, x)` is joint-nearest to record `k`. Four
//! strategies compute these weights:
//!
//! - **exact** — `α_k` is the exact probability of record `k`'s joint-metric
//!   Voronoi cell, obtained in closed form for scalar samples from the cell
//!   boundaries and the distribution's cdf;
//! - **empirical** — `α_k` is the fraction of all drawn samples whose joint
//!   nearest record is `k`;
//! - **exact hybrid** — sample space is partitioned by the *samples* alone
//!   (ignoring designs), each sample's cell probability is computed exactly
//!   from the cdf, and that mass is routed to the sample's joint-nearest
//!   record;
//! - **inexact hybrid** — like the exact hybrid, but each evaluated sample's
//!   cell probability is estimated by counting a pool of `⌊n^β⌋` cheap draws
//!   (`β >= 1`) instead of using the cdf. `β = 1` reproduces the empirical
//!   strategy exactly; growing `β` approaches the exact hybrid.
//!
//! Every distance tie resolves toward the smallest record index, which makes
//! all strategies deterministic functions of their inputs.
//!
//! The functions in this module are the straightforward reference
//! implementations that rescan the whole history on every call; see
//! [`engine::WeightEngine`] for the incremental fast path used in long runs.

pub mod engine;
mod envelope;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{CsgError, Result};
use crate::metric::JointMetric;
use crate::types::{History, Sample, WeightVector};

pub use engine::{WeightEngine, WeightMode};

/// Strategy for computing integration weights from the history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightStrategy {
    Exact,
    Empirical,
    ExactHybrid,
    InexactHybrid { beta: f64 },
}

impl WeightStrategy {
    pub fn validate(&self) -> Result<()> {
        if let WeightStrategy::InexactHybrid { beta } = self {
            if !beta.is_finite() || *beta < 1.0 {
                return Err(CsgError::Config(format!(
                    "inexact hybrid exponent beta must be finite and >= 1, got {beta}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the strategy draws more pool samples than it evaluates.
    pub fn uses_pool(&self) -> bool {
        matches!(self, WeightStrategy::InexactHybrid { .. })
    }

    /// Whether the strategy needs the sampling distribution's cdf.
    pub fn needs_cdf(&self) -> bool {
        matches!(self, WeightStrategy::Exact | WeightStrategy::ExactHybrid)
    }

    /// Short label used in output files and figure legends.
    pub fn label(&self) -> String {
        match self {
            WeightStrategy::Exact => "exact".into(),
            WeightStrategy::Empirical => "empirical".into(),
            WeightStrategy::ExactHybrid => "exact_hybrid".into(),
            WeightStrategy::InexactHybrid { beta } => format!("inexact_hybrid_b{beta}"),
        }
    }
}

/// Target pool size `⌊n^β⌋` for the inexact hybrid at step `n`.
///
/// Guards against `powf` returning values a few ulps below an exact integer
/// (e.g. `1000² = 999999.9999…`), which would otherwise lose a whole sample
/// to the floor.
pub fn pool_target(n: usize, beta: f64) -> usize {
    debug_assert!(beta >= 1.0);
    if beta == 1.0 {
        return n;
    }
    let p = (n as f64).powf(beta);
    assert!(
        p < 9.0e15,
        "pool size n^beta = {p} exceeds the exactly representable integer range"
    );
    let r = p.round();
    if (p - r).abs() <= 1e-8 * r.max(1.0) {
        r as usize
    } else {
        p.floor() as usize
    }
}

/// Validates history layout and per-record dimensions against the query
/// point, returning `(d_des, d_par)`.
fn check_history(history: &History, theta_n: &[f64]) -> Result<(usize, usize)> {
    if history.is_empty() {
        return Err(CsgError::InvalidState(
            "weights requested for an empty history".into(),
        ));
    }
    let d_des = theta_n.len();
    let d_par = history.records()[0].x.dim();
    for (k, rec) in history.records().iter().enumerate() {
        if rec.theta.dim() != d_des {
            return Err(CsgError::DimensionMismatch {
                expected: d_des,
                actual: rec.theta.dim(),
            });
        }
        if rec.x.dim() != d_par {
            return Err(CsgError::DimensionMismatch {
                expected: d_par,
                actual: rec.x.dim(),
            });
        }
        if !rec.theta.is_finite() || !rec.x.is_finite() {
            return Err(CsgError::InvalidInput(format!(
                "history record {k} contains non-finite coordinates"
            )));
        }
    }
    Ok((d_des, d_par))
}

/// Lexicographic nearest-record fold shared by the reference
/// implementations: smallest distance first, then smallest index.
fn nearest_record(history: &History, metric: &JointMetric, theta_n: &[f64], x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for (k, rec) in history.records().iter().enumerate() {
        let d = metric.distance_unchecked(theta_n, x, rec.theta.as_slice(), rec.x.as_slice());
        if d < best.0 || (d == best.0 && k < best.1) {
            best = (d, k);
        }
    }
    best.1
}

/// Index of the history record whose `(θ_k, x_k)` is nearest to `(θ_n, x)`
/// in the joint metric, ties toward the smallest index.
pub fn joint_nearest(
    history: &History,
    metric: &JointMetric,
    theta_n: &[f64],
    x: &[f64],
) -> Result<usize> {
    let (_, d_par) = check_history(history, theta_n)?;
    if x.len() != d_par {
        return Err(CsgError::DimensionMismatch {
            expected: d_par,
            actual: x.len(),
        });
    }
    Ok(nearest_record(history, metric, theta_n, x))
}

/// Empirical weights: `α_k` is the fraction of all evaluated samples whose
/// joint nearest record is `k`. Works in any sample dimension.
pub fn empirical_weights(
    history: &History,
    metric: &JointMetric,
    theta_n: &[f64],
) -> Result<WeightVector> {
    check_history(history, theta_n)?;
    let n = history.len();
    let mut counts = vec![0u64; n];
    for rec in history.records() {
        counts[nearest_record(history, metric, theta_n, rec.x.as_slice())] += 1;
    }
    WeightVector::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
}

/// Sorted `(position, index)` view of the records' scalar samples.
fn sorted_positions(history: &History) -> Vec<(f64, u32)> {
    let mut sorted: Vec<(f64, u32)> = history
        .records()
        .iter()
        .enumerate()
        .map(|(k, rec)| (rec.x.as_slice()[0], k as u32))
        .collect();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("positions are finite"));
    sorted
}

fn require_scalar_samples(d_par: usize, what: &str) -> Result<()> {
    if d_par != 1 {
        return Err(CsgError::UnsupportedConfiguration(format!(
            "{what} requires one-dimensional samples, got dimension {d_par}"
        )));
    }
    Ok(())
}

fn require_cdf(dist: &Distribution, what: &str) -> Result<()> {
    if !dist.has_cdf() {
        return Err(CsgError::UnsupportedConfiguration(format!(
            "{what} requires a sampling distribution with a cdf"
        )));
    }
    Ok(())
}

/// Exact weights for scalar samples: `α_k` is the probability mass of record
/// `k`'s joint-metric Voronoi cell, read off the cdf at the cell boundaries.
pub fn exact_weights_1d(
    history: &History,
    metric: &JointMetric,
    theta_n: &[f64],
    dist: &Distribution,
) -> Result<WeightVector> {
    let (_, d_par) = check_history(history, theta_n)?;
    require_scalar_samples(d_par, "exact weights")?;
    require_cdf(dist, "exact weights")?;
    let sorted = sorted_positions(history);
    let offsets: Vec<f64> = history
        .records()
        .iter()
        .map(|rec| metric.design_offset(theta_n, rec.theta.as_slice()))
        .collect();
    let mut cells = Vec::new();
    envelope::build_envelope(&sorted, &offsets, metric.param_weight(), &mut cells);
    integrate_cells(&cells, dist, history.len())
}

/// Turns envelope cells into weights by cdf differences over the support.
pub(crate) fn integrate_cells(
    cells: &[envelope::EnvelopeCell],
    dist: &Distribution,
    n: usize,
) -> Result<WeightVector> {
    let lo = dist.support().lower()[0];
    let hi = dist.support().upper()[0];
    let mut alpha = vec![0.0f64; n];
    let mut left_cdf = 0.0; // cdf at the clipped left end of the current cell
    for (i, cell) in cells.iter().enumerate() {
        let right = cells.get(i + 1).map_or(hi, |c| c.left.clamp(lo, hi));
        let right_cdf = if i + 1 == cells.len() {
            1.0
        } else {
            dist.cdf(right)?
        };
        let mass = (right_cdf - left_cdf).max(0.0);
        alpha[cell.owner as usize] += mass;
        left_cdf = right_cdf;
    }
    WeightVector::new(alpha)
}

/// Probability mass of each center's sample-space Voronoi cell (scalar
/// samples). Duplicate centers tie at every point, so the smallest index in
/// each duplicate group receives the whole group mass and the rest get zero.
pub fn xspace_voronoi_measures_1d(centers: &[Sample], dist: &Distribution) -> Result<Vec<f64>> {
    if centers.is_empty() {
        return Err(CsgError::InvalidInput(
            "x-space cell measures require at least one center".into(),
        ));
    }
    for (k, c) in centers.iter().enumerate() {
        if c.dim() != 1 {
            return Err(CsgError::UnsupportedConfiguration(format!(
                "x-space cell measures require one-dimensional centers, got dimension {} at {k}",
                c.dim()
            )));
        }
        if !c.is_finite() {
            return Err(CsgError::InvalidInput(format!("center {k} is non-finite")));
        }
    }
    require_cdf(dist, "x-space cell measures")?;
    let mut sorted: Vec<(f64, u32)> = centers
        .iter()
        .enumerate()
        .map(|(k, c)| (c.as_slice()[0], k as u32))
        .collect();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("positions are finite"));
    measures_from_sorted(&sorted, dist)
}

/// Cell measures for centers already in sorted `(position, index)` order.
pub(crate) fn measures_from_sorted(sorted: &[(f64, u32)], dist: &Distribution) -> Result<Vec<f64>> {
    let lo = dist.support().lower()[0];
    let hi = dist.support().upper()[0];
    let mut measures = vec![0.0f64; sorted.len()];
    let mut i = 0;
    let mut left_cdf = 0.0;
    while i < sorted.len() {
        let pos = sorted[i].0;
        // duplicate group: first entry has the smallest index
        let owner = sorted[i].1;
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0 == pos {
            j += 1;
        }
        let right_cdf = if j == sorted.len() {
            1.0
        } else {
            // Written as `pos + Δ/2` rather than `(pos + next)/2` so the
            // boundary is bitwise identical to the envelope's crossing
            // point when all design offsets vanish (`a1 = 0`), where the
            // exact weights must reduce to these measures exactly.
            let boundary = (pos + 0.5 * (sorted[j].0 - pos)).clamp(lo, hi);
            dist.cdf(boundary)?
        };
        measures[owner as usize] = (right_cdf - left_cdf).max(0.0);
        left_cdf = right_cdf;
        i = j;
    }
    Ok(measures)
}

/// Exact hybrid weights: exact sample-space cell mass per evaluated sample,
/// routed to the sample's joint-nearest record.
pub fn exact_hybrid_weights(
    history: &History,
    metric: &JointMetric,
    theta_n: &[f64],
    dist: &Distribution,
) -> Result<WeightVector> {
    let (_, d_par) = check_history(history, theta_n)?;
    require_scalar_samples(d_par, "exact hybrid weights")?;
    let centers: Vec<Sample> = history.records().iter().map(|rec| rec.x.clone()).collect();
    let measures = xspace_voronoi_measures_1d(&centers, dist)?;
    let n = history.len();
    let mut alpha = vec![0.0f64; n];
    for (i, rec) in history.records().iter().enumerate() {
        alpha[nearest_record(history, metric, theta_n, rec.x.as_slice())] += measures[i];
    }
    WeightVector::new(alpha)
}

/// Nearest center in sample space (metric's parameter norm, no design term),
/// ties toward the smallest index.
fn nearest_center(centers: &[Sample], metric: &JointMetric, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for (k, c) in centers.iter().enumerate() {
        let d = metric.param_norm().diff(x, c.as_slice());
        if d < best.0 || (d == best.0 && k < best.1) {
            best = (d, k);
        }
    }
    best.1
}

/// Inexact hybrid weights: each evaluated sample's cell mass is estimated by
/// the fraction of the full sample pool falling in its sample-space cell,
/// then routed to the sample's joint-nearest record.
pub fn inexact_hybrid_weights(
    history: &History,
    metric: &JointMetric,
    theta_n: &[f64],
) -> Result<WeightVector> {
    check_history(history, theta_n)?;
    let n = history.len();
    let pool = history.pool();
    if pool.len() < n {
        return Err(CsgError::InvalidState(format!(
            "inexact hybrid weights need a pool at least as large as the history ({} < {n})",
            pool.len()
        )));
    }
    let centers: Vec<Sample> = history.records().iter().map(|rec| rec.x.clone()).collect();
    let mut counts = vec![0u64; n];
    for x in pool {
        counts[nearest_center(&centers, metric, x.as_slice())] += 1;
    }
    let mut alpha = vec![0.0f64; n];
    for (i, rec) in history.records().iter().enumerate() {
        alpha[nearest_record(history, metric, theta_n, rec.x.as_slice())] += counts[i] as f64;
    }
    let total = pool.len() as f64;
    for a in &mut alpha {
        *a /= total;
    }
    WeightVector::new(alpha)
}

/// Computes weights for `strategy` with the reference implementations.
pub fn compute_weights(
    strategy: &WeightStrategy,
    history: &History,
    metric: &JointMetric,
    theta_n: &[f64],
    dist: &Distribution,
) -> Result<WeightVector> {
    match strategy {
        WeightStrategy::Exact => exact_weights_1d(history, metric, theta_n, dist),
        WeightStrategy::Empirical => empirical_weights(history, metric, theta_n),
        WeightStrategy::ExactHybrid => exact_hybrid_weights(history, metric, theta_n, dist),
        WeightStrategy::InexactHybrid { .. } => inexact_hybrid_weights(history, metric, theta_n),
    }
}
