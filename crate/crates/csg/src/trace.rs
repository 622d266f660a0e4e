//! Per-iteration run records shared by all optimizers.

use crate::error::CsgError;
use crate::types::Design;

/// One recorded iteration of an optimization run.
///
/// Row 0 holds the starting point; diagnostics that are undefined before the
/// first step (`jhat`, `stationarity`, `grad_error`, `ghat_norm`) are `None`
/// there, as is any diagnostic a given method cannot provide. `theta` is the
/// iterate *after* `iteration` steps, while the step diagnostics describe the
/// step that produced it: they are evaluated at the previous iterate, the
/// point where the search direction was formed.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub theta: Design,
    /// `‖θ - θ_ref‖₂` against the configured reference point, when one exists.
    pub abs_error: Option<f64>,
    /// The method's running objective estimate (CSG's `Ĵ_n`, SCGD's inner
    /// tracker `u`).
    pub jhat: Option<f64>,
    /// Projected-gradient stationarity measure `‖Proj(θ_n - t·Ĝ_n) - θ_n‖₂`
    /// at the previous iterate with the step's direction.
    pub stationarity: Option<f64>,
    /// `‖Ĝ_n - ∇J(θ_n)‖₂` when the problem has an analytic gradient.
    pub grad_error: Option<f64>,
    /// `‖Ĝ_n‖₂`, the length of the step's search direction.
    pub ghat_norm: Option<f64>,
    /// Cumulative count of gradient evaluations of the integrand.
    pub grad_evals: u64,
    /// Cumulative count of random samples drawn.
    pub sample_draws: u64,
    /// Cumulative wall-clock nanoseconds spent computing integration weights;
    /// recorded as 0 unless timing capture is enabled, so that output files
    /// stay byte-identical across runs.
    pub weight_time_ns: u64,
}

/// A completed (or truncated) optimization run.
#[derive(Clone, Debug, Default)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// The final iterate of the run.
    pub fn final_theta(&self) -> Option<&Design> {
        self.rows.last().map(|r| &r.theta)
    }

    /// The row recorded at iteration `n`, if present.
    pub fn row_at(&self, iteration: usize) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.iteration == iteration)
    }
}

/// A run that stopped on an error, together with everything recorded up to
/// the failure point.
#[derive(Debug)]
pub struct RunFailure {
    pub error: CsgError,
    pub partial: RunTrace,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "run failed after {} recorded rows: {}",
            self.partial.len(),
            self.error
        )
    }
}

impl std::error::Error for RunFailure {}
