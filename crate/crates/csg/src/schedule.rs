//! Step-size schedules for the projected gradient update.

use serde::{Deserialize, Serialize};

use crate::error::{CsgError, Result};

/// A deterministic step-size sequence `τ_n`, `n = 1, 2, ...`.
///
/// The admissible variant emits the upper envelope of the family of schedules
/// bracketed by `s_lower·n^{-1} ≤ τ_n ≤ s_upper·n^{-1 + 1/max(d_par,2) - margin}`
/// with `margin ∈ (0, 1/max(d_par,2))`; validation guarantees the bracket is
/// nonempty for every `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `τ_n = c`
    Constant { c: f64 },
    /// `τ_n = c·n^{-p}`
    Power { c: f64, p: f64 },
    /// `τ_n = s_upper·n^{-1 + 1/max(d_par,2) - margin}`
    Admissible {
        s_lower: f64,
        s_upper: f64,
        margin: f64,
        d_par: usize,
    },
}

impl StepSchedule {
    pub fn constant(c: f64) -> Result<Self> {
        let s = StepSchedule::Constant { c };
        s.validate()?;
        Ok(s)
    }

    pub fn power(c: f64, p: f64) -> Result<Self> {
        let s = StepSchedule::Power { c, p };
        s.validate()?;
        Ok(s)
    }

    pub fn admissible(s_lower: f64, s_upper: f64, margin: f64, d_par: usize) -> Result<Self> {
        let s = StepSchedule::Admissible {
            s_lower,
            s_upper,
            margin,
            d_par,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant { c } => {
                if !c.is_finite() || c <= 0.0 {
                    return Err(CsgError::Config(format!(
                        "constant step size must be finite and positive, got {c}"
                    )));
                }
            }
            StepSchedule::Power { c, p } => {
                if !c.is_finite() || c <= 0.0 {
                    return Err(CsgError::Config(format!(
                        "power schedule scale must be finite and positive, got {c}"
                    )));
                }
                if !p.is_finite() || p < 0.0 {
                    return Err(CsgError::Config(format!(
                        "power schedule exponent must be finite and >= 0, got {p}"
                    )));
                }
            }
            StepSchedule::Admissible {
                s_lower,
                s_upper,
                margin,
                d_par,
            } => {
                if d_par == 0 {
                    return Err(CsgError::Config(
                        "admissible schedule requires d_par >= 1".into(),
                    ));
                }
                if !s_lower.is_finite() || s_lower <= 0.0 || !s_upper.is_finite() || s_upper <= 0.0
                {
                    return Err(CsgError::Config(format!(
                        "admissible schedule scales must be finite and positive, got [{s_lower}, {s_upper}]"
                    )));
                }
                if s_lower > s_upper {
                    return Err(CsgError::Config(format!(
                        "admissible schedule requires s_lower <= s_upper, got [{s_lower}, {s_upper}]"
                    )));
                }
                let cap = 1.0 / d_par.max(2) as f64;
                if !margin.is_finite() || margin <= 0.0 || margin >= cap {
                    return Err(CsgError::Config(format!(
                        "admissible schedule margin must lie in (0, {cap}), got {margin}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The step size for iteration `n >= 1`.
    ///
    /// Assumes a validated schedule; `n = 0` is a caller bug.
    pub fn step(&self, n: usize) -> f64 {
        assert!(n >= 1, "step schedules are indexed from n = 1");
        let nf = n as f64;
        match *self {
            StepSchedule::Constant { c } => c,
            StepSchedule::Power { c, p } => c * nf.powf(-p),
            StepSchedule::Admissible {
                s_lower,
                s_upper,
                margin,
                d_par,
            } => {
                let exponent = -1.0 + 1.0 / d_par.max(2) as f64 - margin;
                let tau = s_upper * nf.powf(exponent);
                debug_assert!(
                    tau >= s_lower / nf * (1.0 - 1e-12),
                    "admissible step fell below its lower envelope at n = {n}"
                );
                tau
            }
        }
    }
}

/// The step size of schedule `s` at iteration `n`.
///
/// Free-function form of [`StepSchedule::step`].
pub fn schedule_step(s: &StepSchedule, n: usize) -> f64 {
    s.step(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_schedule_is_constant() {
        let s = StepSchedule::constant(0.25).unwrap();
        assert_eq!(s.step(1), 0.25);
        assert_eq!(s.step(1000), 0.25);
    }

    #[test]
    fn power_schedule_decays() {
        let s = StepSchedule::power(2.0, 0.5).unwrap();
        assert!((s.step(1) - 2.0).abs() < 1e-15);
        assert!((s.step(4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn admissible_first_step_equals_upper_scale() {
        let s = StepSchedule::admissible(0.1, 1.0, 0.1, 1).unwrap();
        assert!((s.step(1) - 1.0).abs() < 1e-15);
        // exponent is -1 + 1/2 - 0.1 = -0.6
        assert!((s.step(4) - 4f64.powf(-0.6)).abs() < 1e-15);
    }

    #[test]
    fn admissible_respects_lower_envelope() {
        let s = StepSchedule::admissible(0.1, 1.0, 0.1, 1).unwrap();
        for n in 1..=100_000usize {
            let tau = s.step(n);
            assert!(
                tau >= 0.1 / n as f64,
                "step {tau} at n = {n} fell below the n^-1 lower envelope"
            );
        }
    }

    #[test]
    fn admissible_rejects_bad_margin() {
        // margin must stay below 1/max(d_par, 2) = 1/2 for a scalar design
        assert!(StepSchedule::admissible(0.1, 1.0, 0.5, 1).is_err());
        assert!(StepSchedule::admissible(0.1, 1.0, 0.0, 1).is_err());
        // for d_par = 4 the cap tightens to 1/4
        assert!(StepSchedule::admissible(0.1, 1.0, 0.3, 4).is_err());
        assert!(StepSchedule::admissible(0.1, 1.0, 0.2, 4).is_ok());
    }

    #[test]
    fn admissible_rejects_inverted_scales() {
        assert!(StepSchedule::admissible(2.0, 1.0, 0.1, 1).is_err());
    }

    #[test]
    fn rejects_nonpositive_constants() {
        assert!(StepSchedule::constant(0.0).is_err());
        assert!(StepSchedule::power(-1.0, 0.5).is_err());
    }
}
