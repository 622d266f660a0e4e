//! Core value types: design/sample vectors, box domains, evaluation history,
//! and weight vectors.

use serde::{Deserialize, Serialize};

use crate::error::{CsgError, Result};

/// Tolerance used when validating that weight vectors sum to one.
pub const WEIGHT_NORMALIZATION_TOL: f64 = 1e-12;

/// A design point `θ` in the admissible set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Design(pub Vec<f64>);

/// A random-parameter sample `x` (or `y` for an outer integration variable).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sample(pub Vec<f64>);

macro_rules! impl_vector_newtype {
    ($name:ident) => {
        impl $name {
            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            /// The single coordinate of a one-dimensional point.
            ///
            /// Panics if the point is not one-dimensional; intended for code
            /// paths that have already validated the dimension.
            pub fn scalar(&self) -> f64 {
                assert_eq!(
                    self.0.len(),
                    1,
                    "{} is not one-dimensional",
                    stringify!($name)
                );
                self.0[0]
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(coords: Vec<f64>) -> Self {
                Self(coords)
            }
        }

        impl From<f64> for $name {
            fn from(coord: f64) -> Self {
                Self(vec![coord])
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

impl_vector_newtype!(Design);
impl_vector_newtype!(Sample);

/// An axis-aligned box `[lower_1, upper_1] × ... × [lower_d, upper_d]`, used
/// both as the admissible design set and as the support of sampling
/// distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    /// Creates a box from per-coordinate bounds.
    ///
    /// Errors if the bound vectors differ in length, are empty, contain
    /// non-finite entries, or violate `lower[i] <= upper[i]`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(CsgError::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(CsgError::InvalidInput(
                "box domain must have dimension >= 1".into(),
            ));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(CsgError::InvalidInput(format!(
                    "box bounds must be finite (coordinate {i}: [{lo}, {hi}])"
                )));
            }
            if lo > hi {
                return Err(CsgError::InvalidInput(format!(
                    "box lower bound exceeds upper bound (coordinate {i}: [{lo}, {hi}])"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Convenience constructor for a one-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Whether `v` lies inside the box (bounds inclusive).
    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Componentwise projection (clamp) onto the box.
    ///
    /// Errors if `v` has the wrong dimension.
    pub fn project(&self, v: &[f64]) -> Result<Design> {
        if v.len() != self.dim() {
            return Err(CsgError::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(Design(
            v.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(x, (lo, hi))| x.clamp(*lo, *hi))
                .collect(),
        ))
    }
}

/// Componentwise projection of `v` onto the box `domain`.
///
/// Free-function form of [`BoxDomain::project`].
pub fn project_box(domain: &BoxDomain, v: &[f64]) -> Result<Design> {
    domain.project(v)
}

/// One recorded evaluation: the design at which the sampled integrand was
/// evaluated, the sample itself, and the resulting gradient and value.
#[derive(Clone, Debug)]
pub struct EvaluationRecord {
    pub theta: Design,
    pub x: Sample,
    pub grad: Vec<f64>,
    pub jval: f64,
}

/// The full evaluation history of a CSG run.
///
/// `records` holds one entry per iteration. `pool` holds every sample drawn so
/// far; for strategies that only evaluate the integrand at a subset of drawn
/// samples (the inexact hybrid), `eval_indices[k]` is the position in `pool`
/// of the sample evaluated at step `k + 1`. For the other strategies the pool
/// coincides with the evaluated samples and `eval_indices` is `0, 1, 2, ...`.
#[derive(Clone, Debug, Default)]
pub struct History {
    records: Vec<EvaluationRecord>,
    pool: Vec<Sample>,
    eval_indices: Vec<usize>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded evaluations.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn pool(&self) -> &[Sample] {
        &self.pool
    }

    pub fn eval_indices(&self) -> &[usize] {
        &self.eval_indices
    }

    /// Appends a sample to the pool, returning its pool index.
    pub fn push_pool(&mut self, x: Sample) -> usize {
        self.pool.push(x);
        self.pool.len() - 1
    }

    /// Appends an evaluation record whose sample sits at `pool_index`.
    pub fn push_record(&mut self, record: EvaluationRecord, pool_index: usize) {
        debug_assert!(pool_index < self.pool.len(), "pool index out of bounds");
        debug_assert_eq!(
            self.pool[pool_index], record.x,
            "record sample must match the pool entry it references"
        );
        self.records.push(record);
        self.eval_indices.push(pool_index);
    }

    /// Consistency check used by tests: index vectors aligned and in bounds,
    /// record samples matching their pool entries.
    pub fn validate(&self) -> Result<()> {
        if self.eval_indices.len() != self.records.len() {
            return Err(CsgError::InvalidState(format!(
                "history has {} records but {} eval indices",
                self.records.len(),
                self.eval_indices.len()
            )));
        }
        if self.pool.len() < self.records.len() {
            return Err(CsgError::InvalidState(format!(
                "history pool ({} samples) smaller than record count {}",
                self.pool.len(),
                self.records.len()
            )));
        }
        for (k, (record, &idx)) in self.records.iter().zip(&self.eval_indices).enumerate() {
            if idx >= self.pool.len() {
                return Err(CsgError::InvalidState(format!(
                    "record {k} references pool index {idx} out of bounds"
                )));
            }
            if self.pool[idx] != record.x {
                return Err(CsgError::InvalidState(format!(
                    "record {k} sample disagrees with pool entry {idx}"
                )));
            }
        }
        Ok(())
    }
}

/// A convex-combination weight vector over the evaluation history.
///
/// Construction validates nonnegativity and normalization (sum within
/// [`WEIGHT_NORMALIZATION_TOL`] of one).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    alpha: Vec<f64>,
}

impl WeightVector {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(CsgError::InvalidInput(
                "weight vector must be nonempty".into(),
            ));
        }
        let mut sum = 0.0;
        for (k, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(CsgError::InvalidInput(format!(
                    "weight {k} is {a}; weights must be finite and nonnegative"
                )));
            }
            sum += a;
        }
        if (sum - 1.0).abs() > WEIGHT_NORMALIZATION_TOL {
            return Err(CsgError::InvalidInput(format!(
                "weights sum to {sum}, which deviates from 1 by more than {WEIGHT_NORMALIZATION_TOL}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.alpha.iter()
    }

    /// The weighted sum `Σ_k α_k v_k` over per-record vectors of common
    /// dimension, accumulated in record order.
    pub fn combine_vectors<'a>(
        &self,
        vectors: impl Iterator<Item = &'a [f64]>,
        dim: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (a, v) in self.alpha.iter().zip(vectors) {
            debug_assert_eq!(v.len(), dim);
            for (o, x) in out.iter_mut().zip(v) {
                *o += a * x;
            }
        }
        out
    }

    /// The weighted sum `Σ_k α_k s_k` over per-record scalars.
    pub fn combine_scalars(&self, scalars: impl Iterator<Item = f64>) -> f64 {
        self.alpha.iter().zip(scalars).map(|(a, s)| a * s).sum()
    }
}
