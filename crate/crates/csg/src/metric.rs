//! The joint metric on design × parameter space that defines nearest-neighbor
//! cells for the integration weights.

use serde::{Deserialize, Serialize};

use crate::error::{CsgError, Result};

/// Vector norm used inside the joint metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// `Σ |v_i|`
    One,
    /// `sqrt(Σ v_i^2)`
    Two,
    /// `max |v_i|`
    Inf,
}

impl Norm {
    /// Norm of the componentwise difference `a - b` (lengths must match,
    /// checked by the caller).
    pub fn diff(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        // All three norms coincide in one dimension; the shared expression
        // keeps scalar distances bitwise identical across code paths.
        if a.len() == 1 {
            return (a[0] - b[0]).abs();
        }
        match self {
            Norm::One => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Norm::Two => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Norm::Inf => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// Weighted product metric
/// `d((θ, x), (θ', x')) = a1·‖θ - θ'‖ + a2·‖x - x'‖`
/// on pairs of designs and samples.
///
/// `design_weight` (`a1`) must be nonnegative and `param_weight` (`a2`)
/// strictly positive. Large `a1/a2` makes cells shrink in the design
/// direction so that only the newest record gets weight (plain stochastic
/// gradient behavior); `a1 = 0` ignores designs entirely and the weights
/// reduce to pure sample-space Voronoi cells. Both norms default to the
/// 1-norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointMetric {
    design_weight: f64,
    param_weight: f64,
    #[serde(default = "default_norm")]
    design_norm: Norm,
    #[serde(default = "default_norm")]
    param_norm: Norm,
}

fn default_norm() -> Norm {
    Norm::One
}

impl Default for JointMetric {
    fn default() -> Self {
        Self {
            design_weight: 1.0,
            param_weight: 1.0,
            design_norm: Norm::One,
            param_norm: Norm::One,
        }
    }
}

impl JointMetric {
    /// Creates a metric with the given weights and 1-norms on both factors.
    pub fn new(design_weight: f64, param_weight: f64) -> Result<Self> {
        Self::with_norms(design_weight, param_weight, Norm::One, Norm::One)
    }

    pub fn with_norms(
        design_weight: f64,
        param_weight: f64,
        design_norm: Norm,
        param_norm: Norm,
    ) -> Result<Self> {
        let metric = Self {
            design_weight,
            param_weight,
            design_norm,
            param_norm,
        };
        metric.validate()?;
        Ok(metric)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.design_weight.is_finite() || self.design_weight < 0.0 {
            return Err(CsgError::InvalidInput(format!(
                "design weight must be finite and >= 0, got {}",
                self.design_weight
            )));
        }
        if !self.param_weight.is_finite() || self.param_weight <= 0.0 {
            return Err(CsgError::InvalidInput(format!(
                "parameter weight must be finite and > 0, got {}",
                self.param_weight
            )));
        }
        Ok(())
    }

    pub fn design_weight(&self) -> f64 {
        self.design_weight
    }

    pub fn param_weight(&self) -> f64 {
        self.param_weight
    }

    pub fn design_norm(&self) -> Norm {
        self.design_norm
    }

    pub fn param_norm(&self) -> Norm {
        self.param_norm
    }

    /// Distance between `(θ, x)` and `(θ', x')`.
    ///
    /// Errors if the two designs or the two samples have mismatched
    /// dimensions.
    pub fn distance(
        &self,
        theta_a: &[f64],
        x_a: &[f64],
        theta_b: &[f64],
        x_b: &[f64],
    ) -> Result<f64> {
        if theta_a.len() != theta_b.len() {
            return Err(CsgError::DimensionMismatch {
                expected: theta_a.len(),
                actual: theta_b.len(),
            });
        }
        if x_a.len() != x_b.len() {
            return Err(CsgError::DimensionMismatch {
                expected: x_a.len(),
                actual: x_b.len(),
            });
        }
        Ok(self.distance_unchecked(theta_a, x_a, theta_b, x_b))
    }

    /// `distance` without dimension checks, for validated hot loops.
    pub(crate) fn distance_unchecked(
        &self,
        theta_a: &[f64],
        x_a: &[f64],
        theta_b: &[f64],
        x_b: &[f64],
    ) -> f64 {
        self.design_weight * self.design_norm.diff(theta_a, theta_b)
            + self.param_weight * self.param_norm.diff(x_a, x_b)
    }

    /// The design-distance contribution `a1·‖θ - θ'‖` alone; this is the
    /// additive offset of a history site in sample space.
    pub(crate) fn design_offset(&self, theta_a: &[f64], theta_b: &[f64]) -> f64 {
        self.design_weight * self.design_norm.diff(theta_a, theta_b)
    }
}

/// Distance between `(θ, x)` and `(θ', x')` under `metric`.
///
/// Free-function form of [`JointMetric::distance`].
pub fn metric_distance(
    metric: &JointMetric,
    theta_a: &[f64],
    x_a: &[f64],
    theta_b: &[f64],
    x_b: &[f64],
) -> Result<f64> {
    metric.distance(theta_a, x_a, theta_b, x_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_combines_both_factors() {
        let m = JointMetric::new(2.0, 3.0).unwrap();
        // 2·|0.5 - 0.1| + 3·|0.2 - (-0.2)| = 0.8 + 1.2
        let d = m.distance(&[0.5], &[0.2], &[0.1], &[-0.2]).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let m = JointMetric::default();
        let d = m
            .distance(&[0.3, -0.1], &[0.25], &[0.3, -0.1], &[0.25])
            .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn rejects_nonpositive_param_weight() {
        assert!(JointMetric::new(1.0, 0.0).is_err());
        assert!(JointMetric::new(1.0, -1.0).is_err());
    }

    #[test]
    fn allows_zero_design_weight() {
        // The SAG-like extreme: designs are ignored entirely.
        let m = JointMetric::new(0.0, 1.0).unwrap();
        let d = m.distance(&[100.0], &[0.5], &[-100.0], &[0.5]).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let m = JointMetric::default();
        assert!(m.distance(&[0.0], &[0.0], &[0.0, 0.0], &[0.0]).is_err());
        assert!(m.distance(&[0.0], &[0.0], &[0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn norm_variants_agree_in_one_dimension() {
        for norm in [Norm::One, Norm::Two, Norm::Inf] {
            assert!((norm.diff(&[1.5], &[-0.5]) - 2.0).abs() < 1e-15);
        }
    }
}
