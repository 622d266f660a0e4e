//! Deterministic reference oracles: checked Simpson quadrature for objective
//! values and a grid-refinement search for minimizers.
//!
//! Everything here is independent of the Monte-Carlo machinery under test —
//! no random draws, no history, no weights — so oracle outputs can serve as
//! ground truth when validating optimizer runs. Quadrature requires scalar
//! uniform distributions (the density is known in closed form); objectives
//! outside that class fall back to their stored closed forms.

use crate::dist::Distribution;
use crate::error::{CsgError, Result};
use crate::problems::ObjectiveRef;
use crate::types::Design;

/// Panel count for composite Simpson integration.
pub const ORACLE_PANELS: usize = 10_000;

/// Relative tolerance of the Richardson step-halving check.
const RICHARDSON_TOL: f64 = 1e-8;

/// Grid cells per refinement level of [`theta_opt_oracle`].
const GRID_CELLS: usize = 64;

/// Composite Simpson rule for `∫ f` over `[lo, hi]` with `panels` panels
/// (rounded up to even).
pub fn simpson(f: &mut dyn FnMut(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    assert!(hi >= lo, "integration bounds must be ordered");
    if hi == lo {
        return 0.0;
    }
    let n = panels.max(2) + panels % 2;
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Simpson integration with a Richardson step-halving error estimate.
///
/// Integrates with `panels / 2` and `panels` panels; the classical
/// `|S₂ - S₁| / 15` estimate must fall below a relative tolerance, otherwise
/// the integrand is deemed too rough and a quadrature error is returned.
pub fn simpson_checked(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    panels: usize,
) -> Result<f64> {
    let coarse = simpson(f, lo, hi, panels / 2);
    let fine = simpson(f, lo, hi, panels);
    let est = (fine - coarse).abs() / 15.0;
    if !fine.is_finite() || est > RICHARDSON_TOL * (1.0 + fine.abs()) {
        return Err(CsgError::Quadrature(format!(
            "Simpson refinement did not settle on [{lo}, {hi}]: estimate {fine} with error ~{est:.3e}"
        )));
    }
    Ok(fine)
}

/// `E[g(X)]` for a scalar uniform distribution, via checked quadrature.
pub fn uniform_expectation(dist: &Distribution, g: &mut dyn FnMut(f64) -> f64) -> Result<f64> {
    if dist.dim() != 1 || !dist.is_uniform() {
        return Err(CsgError::UnsupportedConfiguration(
            "quadrature expectations require a scalar uniform distribution".into(),
        ));
    }
    let lo = dist.support().lower()[0];
    let hi = dist.support().upper()[0];
    if lo == hi {
        return Ok(g(lo));
    }
    Ok(simpson_checked(g, lo, hi, ORACLE_PANELS)? / (hi - lo))
}

/// True objective value at `theta`, by quadrature when the sampling
/// distributions are scalar uniform, otherwise by stored closed form.
pub fn objective_value(objective: ObjectiveRef<'_>, theta: &Design) -> Result<f64> {
    match objective {
        ObjectiveRef::Plain(p) => {
            if p.dist().dim() == 1 && p.dist().is_uniform() {
                uniform_expectation(p.dist(), &mut |x| p.j(theta, &x.into()))
            } else if let Some(v) = p.analytic_j(theta) {
                Ok(v)
            } else {
                Err(CsgError::UnsupportedConfiguration(format!(
                    "problem '{}' has neither a scalar uniform distribution nor a closed form",
                    p.name()
                )))
            }
        }
        ObjectiveRef::Composed(c) => {
            let quadrable = |d: &Distribution| d.dim() == 1 && d.is_uniform();
            if quadrable(c.inner().dist()) && quadrable(c.y_dist()) {
                let u =
                    uniform_expectation(c.inner().dist(), &mut |x| c.inner().j(theta, &x.into()))?;
                uniform_expectation(c.y_dist(), &mut |y| c.outer(theta, &y.into(), u))
            } else if let Some(v) = c.analytic_value(theta) {
                Ok(v)
            } else {
                Err(CsgError::UnsupportedConfiguration(format!(
                    "composed objective '{}' has neither scalar uniform distributions nor a closed form",
                    c.name()
                )))
            }
        }
    }
}

/// Brute-force minimizer search for scalar designs: evaluates the true
/// objective on a uniform grid over the domain and repeatedly refines a
/// window of one cell around the best node until the node spacing drops to
/// `grid_resolution`. Ties go to the leftmost node, making the result a
/// deterministic function of the objective.
pub fn theta_opt_oracle(objective: ObjectiveRef<'_>, grid_resolution: f64) -> Result<Design> {
    if objective.domain().dim() != 1 {
        return Err(CsgError::UnsupportedConfiguration(
            "the minimizer oracle handles one-dimensional designs only".into(),
        ));
    }
    if !grid_resolution.is_finite() || grid_resolution <= 0.0 {
        return Err(CsgError::Config(format!(
            "grid resolution must be finite and positive, got {grid_resolution}"
        )));
    }
    let domain_lo = objective.domain().lower()[0];
    let domain_hi = objective.domain().upper()[0];
    let (mut lo, mut hi) = (domain_lo, domain_hi);
    loop {
        let h = (hi - lo) / GRID_CELLS as f64;
        let mut best = (f64::INFINITY, lo);
        for i in 0..=GRID_CELLS {
            let t = if i == GRID_CELLS {
                hi
            } else {
                lo + i as f64 * h
            };
            let v = objective_value(objective, &Design::from(t))?;
            if v < best.0 {
                best = (v, t);
            }
        }
        if h <= grid_resolution || hi - lo <= grid_resolution {
            return Ok(Design::from(best.1));
        }
        lo = (best.1 - h).max(domain_lo);
        hi = (best.1 + h).min(domain_hi);
    }
}
