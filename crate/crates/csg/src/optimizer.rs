//! The continuous stochastic gradient method (CSG) with projected steps.
//!
//! Each iteration draws one fresh sample, evaluates the integrand and its
//! design gradient there, and then recombines the *entire* evaluation
//! history with integration weights into the search direction
//! `Ĝ_n = Σ_k α_k ∇_θ j(θ_k, x_k)` and the objective estimate
//! `Ĵ_n = Σ_k α_k j(θ_k, x_k)`, followed by a projected gradient step
//! `θ_{n+1} = Proj_P(θ_n - τ_n Ĝ_n)`. Because the weights concentrate on
//! history records close to the current design, both estimates converge to
//! the true gradient and objective value, and the method behaves more and
//! more like a deterministic projected gradient descent.
//!
//! [`csg_step_composed`] extends the iteration to nested objectives
//! `E_Y[f(θ, Y, E_X[j(θ, X)])]`: a second weight vector over the `(θ, y)`
//! history turns the chain rule into the direction
//! `(Σ_l α^Y_l ∂_u f(θ_n, y_l, Ĵ_n))·Ĝ_n + Σ_l α^Y_l ∂_θ f(θ_n, y_l, Ĵ_n)`.
//!
//! [`run_loop`] drives any [`Stepper`] (CSG here, the comparison methods in
//! the baselines module) against a [`StoppingRule`] and records a
//! [`RunTrace`] row per iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution;
use crate::error::{CsgError, Result};
use crate::metric::{JointMetric, Norm};
use crate::problems::{ComposedObjective, ObjectiveRef, Problem};
use crate::schedule::StepSchedule;
use crate::trace::{RunFailure, RunTrace, TraceRow};
use crate::types::{BoxDomain, Design, EvaluationRecord, History, WeightVector};
use crate::weights::{pool_target, WeightEngine, WeightMode, WeightStrategy};

/// The zero-at-kink subgradient of `t ↦ max{0, t}`.
pub fn subgradient_max0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Euclidean distance between two equally sized coordinate slices.
pub(crate) fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    Norm::Two.diff(a, b)
}

/// Euclidean length of a coordinate slice.
pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projected-gradient stationarity measure `‖Proj_P(θ - t·g) - θ‖₂`.
///
/// Zero exactly at first-order stationary points of the box-constrained
/// problem, for every probe length `t > 0`.
pub fn stationarity_measure(theta: &Design, g: &[f64], t: f64, domain: &BoxDomain) -> Result<f64> {
    if g.len() != theta.dim() {
        return Err(CsgError::DimensionMismatch {
            expected: theta.dim(),
            actual: g.len(),
        });
    }
    if !t.is_finite() || t < 0.0 {
        return Err(CsgError::InvalidInput(format!(
            "stationarity probe length must be finite and nonnegative, got {t}"
        )));
    }
    let shifted: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(g)
        .map(|(&th, &gi)| th - t * gi)
        .collect();
    let projected = domain.project(&shifted)?;
    Ok(l2_diff(projected.as_slice(), theta.as_slice()))
}

/// When to end an optimization run.
///
/// `max_iters` always applies; `stationarity_tol`, when set, additionally
/// stops the run at the first iteration whose stationarity measure (probe
/// length `stationarity_t`) falls to or below the tolerance. At least one
/// iteration is always attempted unless `max_iters` is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct StoppingRule {
    pub max_iters: u64,
    pub stationarity_tol: Option<f64>,
    pub stationarity_t: f64,
}

impl StoppingRule {
    /// Runs for exactly `max_iters` iterations.
    pub fn max_iters(max_iters: u64) -> Self {
        Self {
            max_iters,
            stationarity_tol: None,
            stationarity_t: 1.0,
        }
    }

    /// Runs until the stationarity measure drops to `tol` (probe length `t`)
    /// or `max_iters` iterations, whichever comes first.
    pub fn with_stationarity(max_iters: u64, tol: f64, t: f64) -> Result<Self> {
        let rule = Self {
            max_iters,
            stationarity_tol: Some(tol),
            stationarity_t: t,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.stationarity_t.is_finite() || self.stationarity_t <= 0.0 {
            return Err(CsgError::Config(format!(
                "stationarity probe length must be finite and positive, got {}",
                self.stationarity_t
            )));
        }
        if let Some(tol) = self.stationarity_tol {
            if tol.is_nan() || tol <= 0.0 {
                return Err(CsgError::Config(format!(
                    "stationarity tolerance must be positive, got {tol}"
                )));
            }
        }
        Ok(())
    }
}

/// Mutable state of a plain CSG run.
#[derive(Debug)]
pub struct CsgState {
    theta: Design,
    history: History,
    iteration: u64,
    grad_evals: u64,
    sample_draws: u64,
    last_jhat: Option<f64>,
    last_direction: Option<Vec<f64>>,
    last_weights: Option<WeightVector>,
}

impl CsgState {
    pub fn new(theta0: Design) -> Self {
        Self {
            theta: theta0,
            history: History::new(),
            iteration: 0,
            grad_evals: 0,
            sample_draws: 0,
            last_jhat: None,
            last_direction: None,
            last_weights: None,
        }
    }

    /// Current iterate `θ_{n+1}` after `iteration()` completed steps.
    pub fn theta(&self) -> &Design {
        &self.theta
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    pub fn sample_draws(&self) -> u64 {
        self.sample_draws
    }

    /// Objective estimate `Ĵ_n` of the most recent step.
    pub fn jhat(&self) -> Option<f64> {
        self.last_jhat
    }

    /// Search direction `Ĝ_n` of the most recent step.
    pub fn direction(&self) -> Option<&[f64]> {
        self.last_direction.as_deref()
    }

    /// Integration weights `α` of the most recent step.
    pub fn weights(&self) -> Option<&WeightVector> {
        self.last_weights.as_ref()
    }
}

/// One CSG iteration: draw, evaluate, reweight the history, and take a
/// projected gradient step of length `tau`.
///
/// The weight engine carries the strategy and (for the incremental mode) the
/// cached sorted positions and pool assignments; it must be used with one
/// state only.
pub fn csg_step(
    state: &mut CsgState,
    problem: &Problem,
    engine: &mut WeightEngine,
    metric: &JointMetric,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(CsgError::InvalidInput(format!(
            "step length must be finite and positive, got {tau}"
        )));
    }
    let n = state.iteration + 1;

    // Draw: one sample, or a pool batch up to ⌊n^β⌋ for the inexact hybrid
    // (evaluating the first new draw).
    let eval_idx = draw_batch(
        &mut state.history,
        engine.strategy(),
        problem.dist(),
        n,
        &mut state.sample_draws,
        rng,
    );
    let x_n = state.history.pool()[eval_idx].clone();

    // Evaluate the integrand at (θ_n, x_n).
    let jval = problem.j(&state.theta, &x_n);
    let grad = problem.grad_j(&state.theta, &x_n);
    state.grad_evals += 1;
    if grad.len() != state.theta.dim() {
        return Err(CsgError::DimensionMismatch {
            expected: state.theta.dim(),
            actual: grad.len(),
        });
    }
    if !jval.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(CsgError::numeric(
            n as usize,
            format!(
                "integrand returned non-finite values at θ = {:?}",
                state.theta
            ),
        ));
    }
    state.history.push_record(
        EvaluationRecord {
            theta: state.theta.clone(),
            x: x_n,
            grad,
            jval,
        },
        eval_idx,
    );

    // Reweight the full history at the current design.
    let alpha = engine.compute(
        &state.history,
        metric,
        state.theta.as_slice(),
        problem.dist(),
    )?;
    let ghat = alpha.combine_vectors(
        state.history.records().iter().map(|r| r.grad.as_slice()),
        state.theta.dim(),
    );
    let jhat = alpha.combine_scalars(state.history.records().iter().map(|r| r.jval));

    // Projected step.
    let proposal: Vec<f64> = state
        .theta
        .as_slice()
        .iter()
        .zip(&ghat)
        .map(|(&th, &g)| th - tau * g)
        .collect();
    state.theta = problem.domain().project(&proposal)?;
    state.iteration = n;
    state.last_jhat = Some(jhat);
    state.last_direction = Some(ghat);
    state.last_weights = Some(alpha);
    Ok(())
}

/// Mutable state of a composed-objective CSG run.
///
/// Keeps two histories: the inner `(θ, x)` evaluations and the outer `(θ, y)`
/// draws. Outer records carry no integrand data of their own (empty gradient,
/// NaN value); only their positions enter the second weight vector.
#[derive(Debug)]
pub struct ComposedCsgState {
    theta: Design,
    x_history: History,
    y_history: History,
    iteration: u64,
    grad_evals: u64,
    sample_draws: u64,
    last_jhat: Option<f64>,
    last_inner_direction: Option<Vec<f64>>,
    last_direction: Option<Vec<f64>>,
    last_weights_x: Option<WeightVector>,
    last_weights_y: Option<WeightVector>,
}

impl ComposedCsgState {
    pub fn new(theta0: Design) -> Self {
        Self {
            theta: theta0,
            x_history: History::new(),
            y_history: History::new(),
            iteration: 0,
            grad_evals: 0,
            sample_draws: 0,
            last_jhat: None,
            last_inner_direction: None,
            last_direction: None,
            last_weights_x: None,
            last_weights_y: None,
        }
    }

    pub fn theta(&self) -> &Design {
        &self.theta
    }

    pub fn x_history(&self) -> &History {
        &self.x_history
    }

    pub fn y_history(&self) -> &History {
        &self.y_history
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    pub fn sample_draws(&self) -> u64 {
        self.sample_draws
    }

    /// Inner objective estimate `Ĵ_n` of the most recent step.
    pub fn jhat(&self) -> Option<f64> {
        self.last_jhat
    }

    /// Inner gradient estimate `Ĝ_n` of the most recent step.
    pub fn inner_direction(&self) -> Option<&[f64]> {
        self.last_inner_direction.as_deref()
    }

    /// Full chain-rule search direction of the most recent step.
    pub fn direction(&self) -> Option<&[f64]> {
        self.last_direction.as_deref()
    }

    pub fn weights_x(&self) -> Option<&WeightVector> {
        self.last_weights_x.as_ref()
    }

    pub fn weights_y(&self) -> Option<&WeightVector> {
        self.last_weights_y.as_ref()
    }
}

/// One composed CSG iteration on `E_Y[f(θ, Y, E_X[j(θ, X)])]`.
///
/// Draws `x` then `y`, evaluates the inner integrand at `(θ_n, x_n)`, and
/// assembles the direction
/// `(Σ_l α^Y_l ∂_u f(θ_n, y_l, Ĵ_n))·Ĝ_n + Σ_l α^Y_l ∂_θ f(θ_n, y_l, Ĵ_n)`
/// from the two weight vectors before the projected step. Both weight
/// engines must use the same strategy family; for the inexact hybrid both
/// histories grow their pools to `⌊n^β⌋`.
pub fn csg_step_composed(
    state: &mut ComposedCsgState,
    composed: &ComposedObjective,
    x_engine: &mut WeightEngine,
    y_engine: &mut WeightEngine,
    metric: &JointMetric,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(CsgError::InvalidInput(format!(
            "step length must be finite and positive, got {tau}"
        )));
    }
    let n = state.iteration + 1;
    let d_des = state.theta.dim();

    // Draw x (batch for the inexact hybrid), then y (same batch rule).
    let x_eval_idx = draw_batch(
        &mut state.x_history,
        x_engine.strategy(),
        composed.inner().dist(),
        n,
        &mut state.sample_draws,
        rng,
    );
    let y_eval_idx = draw_batch(
        &mut state.y_history,
        y_engine.strategy(),
        composed.y_dist(),
        n,
        &mut state.sample_draws,
        rng,
    );
    let x_n = state.x_history.pool()[x_eval_idx].clone();
    let y_n = state.y_history.pool()[y_eval_idx].clone();

    // Evaluate the inner integrand at (θ_n, x_n).
    let jval = composed.inner().j(&state.theta, &x_n);
    let grad = composed.inner().grad_j(&state.theta, &x_n);
    state.grad_evals += 1;
    if grad.len() != d_des {
        return Err(CsgError::DimensionMismatch {
            expected: d_des,
            actual: grad.len(),
        });
    }
    if !jval.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(CsgError::numeric(
            n as usize,
            format!(
                "inner integrand returned non-finite values at θ = {:?}",
                state.theta
            ),
        ));
    }
    state.x_history.push_record(
        EvaluationRecord {
            theta: state.theta.clone(),
            x: x_n,
            grad,
            jval,
        },
        x_eval_idx,
    );
    // Outer records only mark where (θ, y) was drawn; they carry no
    // integrand data.
    state.y_history.push_record(
        EvaluationRecord {
            theta: state.theta.clone(),
            x: y_n,
            grad: Vec::new(),
            jval: f64::NAN,
        },
        y_eval_idx,
    );

    // Inner estimates from the x-history.
    let alpha_x = x_engine.compute(
        &state.x_history,
        metric,
        state.theta.as_slice(),
        composed.inner().dist(),
    )?;
    let ghat = alpha_x.combine_vectors(
        state.x_history.records().iter().map(|r| r.grad.as_slice()),
        d_des,
    );
    let jhat = alpha_x.combine_scalars(state.x_history.records().iter().map(|r| r.jval));

    // Outer weights over the y-history, then the chain rule.
    let alpha_y = y_engine.compute(
        &state.y_history,
        metric,
        state.theta.as_slice(),
        composed.y_dist(),
    )?;
    let du = alpha_y.combine_scalars(
        state
            .y_history
            .records()
            .iter()
            .map(|r| composed.outer_du(&state.theta, &r.x, jhat)),
    );
    let mut direction = vec![0.0f64; d_des];
    for (l, rec) in state.y_history.records().iter().enumerate() {
        let al = alpha_y.as_slice()[l];
        let dth = composed.outer_dtheta(&state.theta, &rec.x, jhat);
        if dth.len() != d_des {
            return Err(CsgError::DimensionMismatch {
                expected: d_des,
                actual: dth.len(),
            });
        }
        for (o, t) in direction.iter_mut().zip(&dth) {
            *o += al * t;
        }
    }
    for (o, g) in direction.iter_mut().zip(&ghat) {
        *o += du * g;
    }
    if direction.iter().any(|d| !d.is_finite()) {
        return Err(CsgError::numeric(
            n as usize,
            "composed search direction became non-finite".to_string(),
        ));
    }

    // Projected step.
    let proposal: Vec<f64> = state
        .theta
        .as_slice()
        .iter()
        .zip(&direction)
        .map(|(&th, &d)| th - tau * d)
        .collect();
    state.theta = composed.domain().project(&proposal)?;
    state.iteration = n;
    state.last_jhat = Some(jhat);
    state.last_inner_direction = Some(ghat);
    state.last_direction = Some(direction);
    state.last_weights_x = Some(alpha_x);
    state.last_weights_y = Some(alpha_y);
    Ok(())
}

/// Draws one step's samples into `history` per the strategy's pool rule.
fn draw_batch(
    history: &mut History,
    strategy: &WeightStrategy,
    dist: &Distribution,
    n: u64,
    sample_draws: &mut u64,
    rng: &mut ChaCha8Rng,
) -> usize {
    if let WeightStrategy::InexactHybrid { beta } = strategy {
        let target = pool_target(n as usize, *beta);
        let first_new = history.pool().len();
        debug_assert!(target > first_new, "pool target must grow every step");
        while history.pool().len() < target {
            let x = dist.sample(rng);
            history.push_pool(x);
            *sample_draws += 1;
        }
        first_new
    } else {
        let x = dist.sample(rng);
        *sample_draws += 1;
        history.push_pool(x)
    }
}

/// One optimizer inside the shared [`run_loop`].
pub trait Stepper {
    /// Current iterate.
    fn theta(&self) -> &Design;
    /// Feasible box of the underlying problem.
    fn domain(&self) -> &BoxDomain;
    /// Performs iteration `n` (1-based).
    fn do_step(&mut self, n: u64, rng: &mut ChaCha8Rng) -> Result<()>;
    /// Objective estimate produced by the last step, if the method has one.
    fn jhat(&self) -> Option<f64>;
    /// Search direction used by the last step.
    fn direction(&self) -> Option<&[f64]>;
    /// Analytic objective gradient at `theta`, when available.
    fn true_grad(&self, theta: &Design) -> Option<Vec<f64>>;
    /// Reference point for the error column (typically `θ*`).
    fn reference(&self) -> Option<&Design>;
    /// Cumulative integrand-gradient evaluations.
    fn grad_evals(&self) -> u64;
    /// Cumulative sample draws.
    fn sample_draws(&self) -> u64;
    /// Cumulative nanoseconds spent on weight computation (0 when untimed).
    fn weight_time_ns(&self) -> u64;
}

/// Runs a stepper to completion, recording one [`TraceRow`] per iteration
/// plus row 0 for the starting point.
///
/// On a step error the trace gathered so far is returned inside the failure.
/// With `max_iters = 0` the trace holds only the starting point; a
/// stationarity tolerance is checked after each completed iteration.
pub fn run_loop(
    stepper: &mut dyn Stepper,
    stopping: &StoppingRule,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<RunTrace, Box<RunFailure>> {
    let mut trace = RunTrace::new();
    let fail = |error: CsgError, partial: RunTrace| Box::new(RunFailure { error, partial });
    if let Err(e) = stopping.validate() {
        return Err(fail(e, trace));
    }
    let start = stepper.theta().clone();
    trace.push(TraceRow {
        iteration: 0,
        abs_error: stepper
            .reference()
            .map(|r| l2_diff(start.as_slice(), r.as_slice())),
        theta: start,
        jhat: None,
        stationarity: None,
        grad_error: None,
        ghat_norm: None,
        grad_evals: stepper.grad_evals(),
        sample_draws: stepper.sample_draws(),
        weight_time_ns: stepper.weight_time_ns(),
    });

    for n in 1..=stopping.max_iters {
        let theta_prev = stepper.theta().clone();
        if let Err(e) = stepper.do_step(n, rng) {
            return Err(fail(e, trace));
        }
        let theta = stepper.theta().clone();
        let direction = stepper.direction().map(<[f64]>::to_vec);
        let stationarity = match &direction {
            Some(g) => {
                match stationarity_measure(
                    &theta_prev,
                    g,
                    stopping.stationarity_t,
                    stepper.domain(),
                ) {
                    Ok(s) => Some(s),
                    Err(e) => return Err(fail(e, trace)),
                }
            }
            None => None,
        };
        let grad_error = match (&direction, stepper.true_grad(&theta_prev)) {
            (Some(g), Some(tg)) => Some(l2_diff(g, &tg)),
            _ => None,
        };
        trace.push(TraceRow {
            iteration: n as usize,
            abs_error: stepper
                .reference()
                .map(|r| l2_diff(theta.as_slice(), r.as_slice())),
            theta,
            jhat: stepper.jhat(),
            stationarity,
            grad_error,
            ghat_norm: direction.as_deref().map(l2_norm),
            grad_evals: stepper.grad_evals(),
            sample_draws: stepper.sample_draws(),
            weight_time_ns: stepper.weight_time_ns(),
        });
        if let (Some(tol), Some(s)) = (stopping.stationarity_tol, stationarity) {
            if s <= tol {
                break;
            }
        }
    }
    Ok(trace)
}

/// CSG on a plain expectation objective, packaged as a [`Stepper`].
pub struct CsgRunner<'a> {
    problem: &'a Problem,
    state: CsgState,
    engine: WeightEngine,
    metric: JointMetric,
    schedule: StepSchedule,
}

impl<'a> CsgRunner<'a> {
    pub fn new(
        problem: &'a Problem,
        theta0: Design,
        strategy: WeightStrategy,
        mode: WeightMode,
        metric: JointMetric,
        schedule: StepSchedule,
    ) -> Result<Self> {
        metric.validate()?;
        schedule.validate()?;
        if !problem.domain().contains(theta0.as_slice()) {
            return Err(CsgError::InvalidInput(format!(
                "starting point {:?} lies outside the problem domain",
                theta0
            )));
        }
        if strategy.needs_cdf() && !problem.dist().has_cdf() {
            return Err(CsgError::UnsupportedConfiguration(format!(
                "the {} strategy needs a sampling distribution with a cdf",
                strategy.label()
            )));
        }
        Ok(Self {
            problem,
            state: CsgState::new(theta0),
            engine: WeightEngine::new(strategy, mode)?,
            metric,
            schedule,
        })
    }

    /// Enables wall-clock capture of weight-computation time.
    pub fn enable_timing(&mut self) {
        self.engine.enable_timing();
    }

    pub fn state(&self) -> &CsgState {
        &self.state
    }
}

impl Stepper for CsgRunner<'_> {
    fn theta(&self) -> &Design {
        self.state.theta()
    }

    fn domain(&self) -> &BoxDomain {
        self.problem.domain()
    }

    fn do_step(&mut self, n: u64, rng: &mut ChaCha8Rng) -> Result<()> {
        let tau = self.schedule.step(n as usize);
        csg_step(
            &mut self.state,
            self.problem,
            &mut self.engine,
            &self.metric,
            tau,
            rng,
        )
    }

    fn jhat(&self) -> Option<f64> {
        self.state.jhat()
    }

    fn direction(&self) -> Option<&[f64]> {
        self.state.direction()
    }

    fn true_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        self.problem.analytic_grad_j(theta)
    }

    fn reference(&self) -> Option<&Design> {
        self.problem.theta_star()
    }

    fn grad_evals(&self) -> u64 {
        self.state.grad_evals()
    }

    fn sample_draws(&self) -> u64 {
        self.state.sample_draws()
    }

    fn weight_time_ns(&self) -> u64 {
        self.engine.elapsed_ns()
    }
}

/// CSG on a composed objective, packaged as a [`Stepper`].
pub struct ComposedCsgRunner<'a> {
    composed: &'a ComposedObjective,
    state: ComposedCsgState,
    x_engine: WeightEngine,
    y_engine: WeightEngine,
    metric: JointMetric,
    schedule: StepSchedule,
}

impl<'a> ComposedCsgRunner<'a> {
    pub fn new(
        composed: &'a ComposedObjective,
        theta0: Design,
        strategy: WeightStrategy,
        mode: WeightMode,
        metric: JointMetric,
        schedule: StepSchedule,
    ) -> Result<Self> {
        metric.validate()?;
        schedule.validate()?;
        if !composed.domain().contains(theta0.as_slice()) {
            return Err(CsgError::InvalidInput(format!(
                "starting point {:?} lies outside the problem domain",
                theta0
            )));
        }
        if strategy.needs_cdf()
            && !(composed.inner().dist().has_cdf() && composed.y_dist().has_cdf())
        {
            return Err(CsgError::UnsupportedConfiguration(format!(
                "the {} strategy needs sampling distributions with cdfs on both axes",
                strategy.label()
            )));
        }
        Ok(Self {
            composed,
            state: ComposedCsgState::new(theta0),
            x_engine: WeightEngine::new(strategy.clone(), mode)?,
            y_engine: WeightEngine::new(strategy, mode)?,
            metric,
            schedule,
        })
    }

    /// Enables wall-clock capture of weight-computation time.
    pub fn enable_timing(&mut self) {
        self.x_engine.enable_timing();
        self.y_engine.enable_timing();
    }

    pub fn state(&self) -> &ComposedCsgState {
        &self.state
    }
}

impl Stepper for ComposedCsgRunner<'_> {
    fn theta(&self) -> &Design {
        self.state.theta()
    }

    fn domain(&self) -> &BoxDomain {
        self.composed.domain()
    }

    fn do_step(&mut self, n: u64, rng: &mut ChaCha8Rng) -> Result<()> {
        let tau = self.schedule.step(n as usize);
        csg_step_composed(
            &mut self.state,
            self.composed,
            &mut self.x_engine,
            &mut self.y_engine,
            &self.metric,
            tau,
            rng,
        )
    }

    fn jhat(&self) -> Option<f64> {
        self.state.jhat()
    }

    fn direction(&self) -> Option<&[f64]> {
        self.state.direction()
    }

    fn true_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        self.composed.analytic_grad(theta)
    }

    fn reference(&self) -> Option<&Design> {
        self.composed.theta_star()
    }

    fn grad_evals(&self) -> u64 {
        self.state.grad_evals()
    }

    fn sample_draws(&self) -> u64 {
        self.state.sample_draws()
    }

    fn weight_time_ns(&self) -> u64 {
        self.x_engine.elapsed_ns() + self.y_engine.elapsed_ns()
    }
}

/// Draws a uniform starting point in `domain` from the seed's stream 0, the
/// convention shared with the experiment harness.
pub fn draw_start(domain: &BoxDomain, seed: u64) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut point = Vec::with_capacity(domain.dim());
    for (&lo, &hi) in domain.lower().iter().zip(domain.upper()) {
        point.push(if lo == hi { lo } else { rng.gen_range(lo..=hi) });
    }
    Design(point)
}

/// Complete seeded CSG run on either objective kind.
///
/// The starting point is drawn uniformly in the domain from the seed's
/// stream 0 and the optimizer consumes stream 1, matching the harness
/// convention. Weights run in the incremental mode; use the runner types
/// directly for the naive mode or custom starting points.
pub fn run(
    objective: ObjectiveRef<'_>,
    strategy: WeightStrategy,
    schedule: &StepSchedule,
    metric: &JointMetric,
    stopping: &StoppingRule,
    seed: u64,
) -> std::result::Result<RunTrace, Box<RunFailure>> {
    let theta0 = draw_start(objective.domain(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    run_from(
        objective,
        theta0,
        strategy,
        WeightMode::Incremental,
        schedule,
        metric,
        stopping,
        &mut rng,
    )
}

/// [`run`] with an explicit starting point, weight mode, and generator.
#[allow(clippy::too_many_arguments)]
pub fn run_from(
    objective: ObjectiveRef<'_>,
    theta0: Design,
    strategy: WeightStrategy,
    mode: WeightMode,
    schedule: &StepSchedule,
    metric: &JointMetric,
    stopping: &StoppingRule,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<RunTrace, Box<RunFailure>> {
    let build_err = |error: CsgError| {
        Box::new(RunFailure {
            error,
            partial: RunTrace::new(),
        })
    };
    match objective {
        ObjectiveRef::Plain(problem) => {
            let mut runner = CsgRunner::new(
                problem,
                theta0,
                strategy,
                mode,
                metric.clone(),
                schedule.clone(),
            )
            .map_err(build_err)?;
            run_loop(&mut runner, stopping, rng)
        }
        ObjectiveRef::Composed(composed) => {
            let mut runner = ComposedCsgRunner::new(
                composed,
                theta0,
                strategy,
                mode,
                metric.clone(),
                schedule.clone(),
            )
            .map_err(build_err)?;
            run_loop(&mut runner, stopping, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_quadratic_1d;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn constant_dist(value: f64, lo: f64, hi: f64) -> Distribution {
        Distribution::custom(
            BoxDomain::interval(lo, hi).expect("valid interval"),
            Arc::new(move |_rng: &mut ChaCha8Rng| vec![value]),
            None,
        )
        .expect("valid distribution")
    }

    fn test_metric() -> JointMetric {
        JointMetric::new(1.0, 1.0).expect("valid metric")
    }

    #[test]
    fn subgradient_is_zero_at_and_below_the_kink() {
        assert_eq!(subgradient_max0(-1.0), 0.0, "below the kink");
        assert_eq!(subgradient_max0(0.0), 0.0, "at the kink");
        assert_eq!(subgradient_max0(1e-300), 1.0, "above the kink");
        assert_eq!(subgradient_max0(2.0), 1.0, "well above the kink");
    }

    #[test]
    fn stationarity_matches_projected_step_length() {
        let domain = BoxDomain::interval(-0.5, 0.5).expect("valid interval");
        let theta = Design::from(0.2);
        let interior =
            stationarity_measure(&theta, &[0.1], 1.0, &domain).expect("interior stationarity");
        assert!(
            (interior - 0.1).abs() < 1e-15,
            "unconstrained step of length 0.1 should move exactly 0.1, got {interior}"
        );

        let at_edge = Design::from(0.5);
        let outward =
            stationarity_measure(&at_edge, &[-1.0], 1.0, &domain).expect("boundary stationarity");
        assert_eq!(
            outward, 0.0,
            "an outward gradient at the boundary is projected stationary"
        );

        let clipped =
            stationarity_measure(&theta, &[-1.0], 1.0, &domain).expect("clipped stationarity");
        assert!(
            (clipped - 0.3).abs() < 1e-15,
            "step to 1.2 clips to the upper bound 0.5, moving 0.3, got {clipped}"
        );
    }

    #[test]
    fn stationarity_rejects_bad_inputs() {
        let domain = BoxDomain::interval(0.0, 1.0).expect("valid interval");
        let theta = Design::from(0.5);
        assert!(
            stationarity_measure(&theta, &[1.0, 2.0], 1.0, &domain).is_err(),
            "gradient dimension mismatch must be rejected"
        );
        assert!(
            stationarity_measure(&theta, &[1.0], -1.0, &domain).is_err(),
            "negative probe length must be rejected"
        );
        assert!(
            stationarity_measure(&theta, &[1.0], f64::NAN, &domain).is_err(),
            "NaN probe length must be rejected"
        );
    }

    #[test]
    fn stopping_rule_validation() {
        assert!(StoppingRule::max_iters(0).validate().is_ok());
        assert!(
            StoppingRule::with_stationarity(10, 1e-3, 1.0).is_ok(),
            "positive tolerance and probe length are valid"
        );
        assert!(
            StoppingRule::with_stationarity(10, f64::INFINITY, 1.0).is_ok(),
            "an infinite tolerance stops after the first iteration but is legal"
        );
        assert!(StoppingRule::with_stationarity(10, 0.0, 1.0).is_err());
        assert!(StoppingRule::with_stationarity(10, f64::NAN, 1.0).is_err());
        assert!(StoppingRule::with_stationarity(10, 1e-3, 0.0).is_err());
    }

    #[test]
    fn csg_step_reproduces_the_quadratic_hand_calculation() {
        // θ_1 = 0.2, a single sample x = 0.4, τ = 1: the gradient θ - x is
        // -0.2, so Ĝ_1 = -0.2, Ĵ_1 = (1/2)(0.4 - 0.2)² = 0.02, and the step
        // lands exactly on θ_2 = 0.4.
        let problem = Problem::new(
            "quadratic_const_sample",
            BoxDomain::interval(-0.5, 0.5).expect("valid interval"),
            constant_dist(0.4, -0.5, 0.5),
            |theta, x| 0.5 * (x.scalar() - theta.scalar()).powi(2),
            |theta, x| vec![theta.scalar() - x.scalar()],
        );
        let mut state = CsgState::new(Design::from(0.2));
        let mut engine =
            WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("engine");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        csg_step(
            &mut state,
            &problem,
            &mut engine,
            &test_metric(),
            1.0,
            &mut rng,
        )
        .expect("first csg step");

        assert_eq!(
            state.theta().scalar(),
            0.4,
            "θ_2 = 0.2 - 1·(-0.2) must land exactly on 0.4"
        );
        let jhat = state.jhat().expect("jhat after a step");
        let expected_j = 0.5 * (0.4f64 - 0.2f64).powi(2);
        assert_eq!(jhat, expected_j, "Ĵ_1 must equal the single evaluation");
        let ghat = state.direction().expect("direction after a step");
        assert_eq!(
            ghat,
            &[0.2f64 - 0.4f64],
            "Ĝ_1 must equal the single gradient"
        );
        let alpha = state.weights().expect("weights after a step");
        assert_eq!(
            alpha.as_slice(),
            &[1.0],
            "one record carries all the weight"
        );
        assert_eq!(state.sample_draws(), 1);
        assert_eq!(state.grad_evals(), 1);
    }

    #[test]
    fn composed_step_reproduces_the_nested_cosine_hand_calculation() {
        // θ_1 = 6, x_1 = 0, y_1 = 0, τ = 1/30 on the nested cosine problem:
        //   Ĵ_1 = 10·cos(6/π)      ≈ -3.3260358
        //   Ĝ_1 = -(10/π)·sin(6/π) ≈ -3.0018746
        //   ∂_u f(θ, 0, Ĵ_1) = 0.6·Ĵ_1, ∂_θ f = 0, so the direction is
        //   0.6·Ĵ_1·Ĝ_1 ≈ 5.9906054 and θ_2 ≈ 5.8003132.
        let inner = Problem::new(
            "nested_cosine_inner_const",
            BoxDomain::interval(0.0, 10.0).expect("valid interval"),
            constant_dist(0.0, -1.0, 1.0),
            |theta, x| 10.0 * ((theta.scalar() - x.scalar()) / PI).cos(),
            |theta, x| vec![-(10.0 / PI) * ((theta.scalar() - x.scalar()) / PI).sin()],
        );
        let composed = ComposedObjective::new(
            "nested_cosine_const",
            inner,
            constant_dist(0.0, -3.0, 3.0),
            |_theta, y, u| {
                let t = 2.0 * y.scalar() + u;
                0.3 * t * t
            },
            |_theta, y, u| 0.6 * (2.0 * y.scalar() + u),
            |_theta, _y, _u| vec![0.0],
        );
        let mut state = ComposedCsgState::new(Design::from(6.0));
        let mut x_engine =
            WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("engine");
        let mut y_engine =
            WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("engine");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        csg_step_composed(
            &mut state,
            &composed,
            &mut x_engine,
            &mut y_engine,
            &test_metric(),
            1.0 / 30.0,
            &mut rng,
        )
        .expect("first composed csg step");

        let expected_j = 10.0 * (6.0f64 / PI).cos();
        let expected_g = -(10.0 / PI) * (6.0f64 / PI).sin();
        let expected_du = 0.6 * (2.0 * 0.0 + expected_j);
        let expected_dir = expected_du * expected_g;
        let expected_theta = 6.0 - (1.0 / 30.0) * expected_dir;

        let jhat = state.jhat().expect("jhat after a step");
        assert_eq!(
            jhat, expected_j,
            "Ĵ_1 must equal the single inner evaluation"
        );
        assert!(
            (jhat - (-3.326_035_756_124_746)).abs() < 1e-9,
            "Ĵ_1 ≈ -3.3260358, got {jhat}"
        );
        let ghat = state.inner_direction().expect("inner direction");
        assert_eq!(
            ghat,
            &[expected_g],
            "Ĝ_1 must equal the single inner gradient"
        );
        let dir = state.direction().expect("direction");
        assert_eq!(
            dir,
            &[expected_dir],
            "chain-rule direction must match by hand"
        );
        assert!(
            (dir[0] - 5.990_605_436_985_9).abs() < 1e-9,
            "direction ≈ 5.9906054, got {}",
            dir[0]
        );
        assert_eq!(state.theta().scalar(), expected_theta);
        assert!(
            (state.theta().scalar() - 5.800_313_152_100_47).abs() < 1e-9,
            "θ_2 ≈ 5.8003132, got {}",
            state.theta().scalar()
        );
        assert_eq!(state.sample_draws(), 2, "one x draw and one y draw");
        assert_eq!(state.grad_evals(), 1, "one inner gradient evaluation");
        assert_eq!(
            state.y_history().records()[0].grad.len(),
            0,
            "outer records carry no gradient data"
        );
    }

    #[test]
    fn csg_step_rejects_bad_step_lengths() {
        let problem = make_quadratic_1d();
        let mut state = CsgState::new(Design::from(0.0));
        let mut engine =
            WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("engine");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(
                csg_step(
                    &mut state,
                    &problem,
                    &mut engine,
                    &test_metric(),
                    bad,
                    &mut rng
                )
                .is_err(),
                "step length {bad} must be rejected"
            );
        }
        assert_eq!(state.iteration(), 0, "no step must have been taken");
    }

    #[test]
    fn inexact_hybrid_grows_the_pool_and_evaluates_the_first_new_draw() {
        let problem = make_quadratic_1d();
        let mut state = CsgState::new(Design::from(0.0));
        let strategy = WeightStrategy::InexactHybrid { beta: 2.0 };
        let mut engine = WeightEngine::new(strategy, WeightMode::Incremental).expect("engine");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut expected_firsts = Vec::new();
        for n in 1..=4u64 {
            expected_firsts.push(((n - 1) * (n - 1)) as usize);
            csg_step(
                &mut state,
                &problem,
                &mut engine,
                &test_metric(),
                0.5,
                &mut rng,
            )
            .expect("csg step");
            assert_eq!(
                state.history().pool().len(),
                (n * n) as usize,
                "pool grows to ⌊n²⌋ at iteration {n}"
            );
        }
        assert_eq!(state.sample_draws(), 16, "all pool draws are counted");
        assert_eq!(state.history().records().len(), 4);
        assert_eq!(
            state.history().eval_indices(),
            expected_firsts.as_slice(),
            "each step evaluates the first sample of its new pool batch"
        );
    }

    #[test]
    fn run_loop_row_counts_and_edge_cases() {
        let problem = make_quadratic_1d();
        let schedule = StepSchedule::constant(1.0).expect("valid schedule");
        let make_runner = || {
            CsgRunner::new(
                &problem,
                Design::from(0.2),
                WeightStrategy::Exact,
                WeightMode::Incremental,
                test_metric(),
                schedule.clone(),
            )
            .expect("runner")
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        let trace =
            run_loop(&mut make_runner(), &StoppingRule::max_iters(0), &mut rng).expect("empty run");
        assert_eq!(
            trace.len(),
            1,
            "zero iterations leave only the starting row"
        );
        assert_eq!(trace.rows[0].iteration, 0);
        assert!(
            trace.rows[0].jhat.is_none(),
            "row 0 has no step diagnostics"
        );

        let loose = StoppingRule::with_stationarity(5, f64::INFINITY, 1.0).expect("rule");
        let trace = run_loop(&mut make_runner(), &loose, &mut rng).expect("one-step run");
        assert_eq!(
            trace.len(),
            2,
            "an infinite tolerance stops after the first iteration"
        );

        let trace =
            run_loop(&mut make_runner(), &StoppingRule::max_iters(10), &mut rng).expect("full run");
        assert_eq!(trace.len(), 11, "row 0 plus one row per iteration");
        for (i, row) in trace.rows.iter().enumerate() {
            assert_eq!(row.iteration, i, "rows are indexed consecutively");
            assert!(
                problem.domain().contains(row.theta.as_slice()),
                "iterate {i} must stay inside the box"
            );
        }
        let last = trace.last().expect("last row");
        assert!(last.jhat.is_some(), "csg rows carry an objective estimate");
        assert!(last.stationarity.is_some());
        assert!(
            last.grad_error.is_some(),
            "quadratic has an analytic gradient"
        );
        assert!(
            last.abs_error.is_some(),
            "quadratic supplies a reference point for the error column"
        );
        assert_eq!(last.grad_evals, 10);
    }

    #[test]
    fn runner_rejects_infeasible_starts_and_missing_cdfs() {
        let problem = make_quadratic_1d();
        assert!(
            CsgRunner::new(
                &problem,
                Design::from(0.7),
                WeightStrategy::Empirical,
                WeightMode::Incremental,
                test_metric(),
                StepSchedule::constant(1.0).expect("schedule"),
            )
            .is_err(),
            "starting point outside the box must be rejected"
        );

        let no_cdf = Problem::new(
            "quadratic_no_cdf",
            BoxDomain::interval(-0.5, 0.5).expect("valid interval"),
            constant_dist(0.1, -0.5, 0.5),
            |theta, x| 0.5 * (x.scalar() - theta.scalar()).powi(2),
            |theta, x| vec![theta.scalar() - x.scalar()],
        );
        assert!(
            CsgRunner::new(
                &no_cdf,
                Design::from(0.0),
                WeightStrategy::Exact,
                WeightMode::Incremental,
                test_metric(),
                StepSchedule::constant(1.0).expect("schedule"),
            )
            .is_err(),
            "exact weights need a cdf"
        );
        assert!(
            CsgRunner::new(
                &no_cdf,
                Design::from(0.0),
                WeightStrategy::Empirical,
                WeightMode::Incremental,
                test_metric(),
                StepSchedule::constant(1.0).expect("schedule"),
            )
            .is_ok(),
            "empirical weights work without a cdf"
        );
    }

    #[test]
    fn seeded_runs_are_bitwise_reproducible() {
        let problem = make_quadratic_1d();
        let objective = ObjectiveRef::Plain(&problem);
        let schedule = StepSchedule::power(1.0, 2.0 / 3.0).expect("schedule");
        let stopping = StoppingRule::max_iters(40);
        let run_once = || {
            run(
                objective,
                WeightStrategy::ExactHybrid,
                &schedule,
                &test_metric(),
                &stopping,
                42,
            )
            .expect("seeded run")
        };
        let a = run_once();
        let b = run_once();
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(
                ra.theta.as_slice()[0].to_bits(),
                rb.theta.as_slice()[0].to_bits(),
                "iterate {} must be bit-identical across reruns",
                ra.iteration
            );
            assert_eq!(ra.jhat.map(f64::to_bits), rb.jhat.map(f64::to_bits));
        }
    }

    #[test]
    fn draw_start_stays_inside_the_domain_and_is_deterministic() {
        let domain = BoxDomain::new(vec![-1.0, 2.0], vec![1.0, 2.0]).expect("domain");
        let a = draw_start(&domain, 9);
        let b = draw_start(&domain, 9);
        assert_eq!(a.as_slice(), b.as_slice(), "same seed, same start");
        assert!(domain.contains(a.as_slice()), "start must be feasible");
        assert_eq!(a.as_slice()[1], 2.0, "degenerate coordinates stay pinned");
        let c = draw_start(&domain, 10);
        assert_ne!(a.as_slice()[0], c.as_slice()[0], "different seeds differ");
    }
}
