//! Comparison methods: stochastic gradient descent (SG), stochastic average
//! gradients (SAG), and the stochastic compositional gradient descent family
//! (SCGD and its accelerated variant aSCGD).
//!
//! SG takes projected steps along single-sample gradients. SAG fixes a
//! finite sample set up front and averages a table of per-sample gradients,
//! refreshing one randomly chosen slot per iteration. SCGD tracks the inner
//! expectation of a composed objective with the running average
//! `u_{k+1} = (1 - β_k) u_k + β_k j(θ_k, x_k)` and steps along the
//! chain-rule direction `∂_u f(θ_k, y_k, u_{k+1})·∇_θ j(θ_k, x_k) +
//! ∂_θ f(θ_k, y_k, u_{k+1})`; aSCGD evaluates the inner integrand at the
//! extrapolated point `z_k` instead of `θ_k` and updates
//! `z_{k+1} = (1 - 1/β_k)θ_k + (1/β_k)θ_{k+1}`.
//!
//! All methods implement [`Stepper`], so they run under the same
//! [`run_loop`](crate::optimizer::run_loop) and tracing as CSG.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CsgError, Result};
use crate::optimizer::Stepper;
use crate::problems::{ComposedObjective, Problem};
use crate::schedule::StepSchedule;
use crate::types::{BoxDomain, Design, Sample};

/// Default number of fixed sample slots for SAG.
pub const SAG_DEFAULT_SLOTS: usize = 100;

/// One projected stochastic gradient step `θ ← Proj_P(θ - τ ∇_θ j(θ, x))`
/// with a freshly drawn sample `x`.
pub fn sg_step(
    theta: &Design,
    problem: &Problem,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Design> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(CsgError::InvalidInput(format!(
            "step length must be finite and positive, got {tau}"
        )));
    }
    let x = problem.dist().sample(rng);
    let grad = problem.grad_j(theta, &x);
    project_step(theta, &grad, tau, problem.domain())
}

fn project_step(theta: &Design, g: &[f64], tau: f64, domain: &BoxDomain) -> Result<Design> {
    if g.len() != theta.dim() {
        return Err(CsgError::DimensionMismatch {
            expected: theta.dim(),
            actual: g.len(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(CsgError::InvalidInput(
            "gradient contains non-finite entries".to_string(),
        ));
    }
    let proposal: Vec<f64> = theta
        .as_slice()
        .iter()
        .zip(g)
        .map(|(&th, &gi)| th - tau * gi)
        .collect();
    domain.project(&proposal)
}

/// SAG's fixed sample set and gradient table.
///
/// The table starts at zero, so early directions average over slots that
/// have not been visited yet; each visited slot holds the gradient from its
/// most recent refresh.
#[derive(Debug)]
pub struct SagState {
    samples: Vec<Sample>,
    table: Vec<Vec<f64>>,
    d_des: usize,
}

impl SagState {
    /// Draws `slots` samples from the problem's distribution and zeroes the
    /// gradient table.
    pub fn new(problem: &Problem, slots: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if slots == 0 {
            return Err(CsgError::InvalidInput(
                "sag needs at least one sample slot".to_string(),
            ));
        }
        let samples = (0..slots).map(|_| problem.dist().sample(rng)).collect();
        Ok(Self {
            samples,
            table: vec![vec![0.0; problem.d_des()]; slots],
            d_des: problem.d_des(),
        })
    }

    pub fn slots(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Mean of the gradient table, accumulated in slot order.
    pub fn table_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d_des];
        for row in &self.table {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let inv = 1.0 / self.slots() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        mean
    }
}

/// One SAG step: refresh the gradient of `slot_index` at the current design,
/// then step along the table mean.
pub fn sag_step(
    theta: &Design,
    problem: &Problem,
    state: &mut SagState,
    tau: f64,
    slot_index: usize,
) -> Result<Design> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(CsgError::InvalidInput(format!(
            "step length must be finite and positive, got {tau}"
        )));
    }
    if slot_index >= state.slots() {
        return Err(CsgError::InvalidInput(format!(
            "slot index {slot_index} out of range for {} slots",
            state.slots()
        )));
    }
    let grad = problem.grad_j(theta, &state.samples[slot_index]);
    if grad.len() != state.d_des {
        return Err(CsgError::DimensionMismatch {
            expected: state.d_des,
            actual: grad.len(),
        });
    }
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(CsgError::InvalidInput(
            "gradient contains non-finite entries".to_string(),
        ));
    }
    state.table[slot_index] = grad;
    let mean = state.table_mean();
    project_step(theta, &mean, tau, problem.domain())
}

/// Which inner-evaluation point the SCGD family uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScgdVariant {
    /// Inner integrand evaluated at the current iterate `θ_k`.
    Basic,
    /// Inner integrand evaluated at the extrapolated point `z_k` (aSCGD).
    Accelerated,
}

/// Mutable state of an SCGD run: the iterate, the inner-value tracker `u`,
/// and (for aSCGD) the extrapolation point `z`.
#[derive(Clone, Debug)]
pub struct ScgdState {
    theta: Design,
    u: f64,
    z: Design,
    k: u64,
    variant: ScgdVariant,
}

impl ScgdState {
    /// Basic SCGD starting at `theta0` with `u_1 = 0`.
    pub fn basic(theta0: Design) -> Self {
        Self {
            z: theta0.clone(),
            theta: theta0,
            u: 0.0,
            k: 0,
            variant: ScgdVariant::Basic,
        }
    }

    /// Accelerated SCGD starting at `theta0` with `u_1 = 0` and `z_1 = θ_1`.
    pub fn accelerated(theta0: Design) -> Self {
        Self {
            z: theta0.clone(),
            theta: theta0,
            u: 0.0,
            k: 0,
            variant: ScgdVariant::Accelerated,
        }
    }

    pub fn theta(&self) -> &Design {
        &self.theta
    }

    /// Running estimate of the inner expectation after the last step.
    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn z(&self) -> &Design {
        &self.z
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn variant(&self) -> ScgdVariant {
        self.variant
    }
}

/// One SCGD step on a composed objective with stepsizes `alpha_k` and
/// `beta_k`, returning the chain-rule direction that was used.
///
/// Draws `x` then `y`, updates `u` with the inner value at `θ_k` (basic) or
/// `z_k` (accelerated), and takes the projected step; aSCGD then moves its
/// extrapolation point. The extrapolated `z` may leave the feasible box —
/// the integrands of the shipped problems are defined on all of `ℝ`.
pub fn scgd_step(
    state: &mut ScgdState,
    composed: &ComposedObjective,
    alpha_k: f64,
    beta_k: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if !alpha_k.is_finite() || alpha_k <= 0.0 {
        return Err(CsgError::InvalidInput(format!(
            "scgd stepsize alpha must be finite and positive, got {alpha_k}"
        )));
    }
    if !beta_k.is_finite() || beta_k <= 0.0 || beta_k > 1.0 {
        return Err(CsgError::InvalidInput(format!(
            "scgd averaging weight beta must lie in (0, 1], got {beta_k}"
        )));
    }
    let k = state.k + 1;
    let x = composed.inner().dist().sample(rng);
    let y = composed.y_dist().sample(rng);

    let eval_point = match state.variant {
        ScgdVariant::Basic => &state.theta,
        ScgdVariant::Accelerated => &state.z,
    };
    let jval = composed.inner().j(eval_point, &x);
    let grad = composed.inner().grad_j(&state.theta, &x);
    if grad.len() != state.theta.dim() {
        return Err(CsgError::DimensionMismatch {
            expected: state.theta.dim(),
            actual: grad.len(),
        });
    }
    if !jval.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(CsgError::numeric(
            k as usize,
            format!(
                "inner integrand returned non-finite values near θ = {:?}",
                state.theta
            ),
        ));
    }
    let u_next = (1.0 - beta_k) * state.u + beta_k * jval;

    let du = composed.outer_du(&state.theta, &y, u_next);
    let dth = composed.outer_dtheta(&state.theta, &y, u_next);
    if dth.len() != state.theta.dim() {
        return Err(CsgError::DimensionMismatch {
            expected: state.theta.dim(),
            actual: dth.len(),
        });
    }
    let direction: Vec<f64> = grad.iter().zip(&dth).map(|(&g, &t)| du * g + t).collect();
    if !du.is_finite() || direction.iter().any(|d| !d.is_finite()) {
        return Err(CsgError::numeric(
            k as usize,
            "scgd search direction became non-finite".to_string(),
        ));
    }
    let theta_next = project_step(&state.theta, &direction, alpha_k, composed.domain())?;

    if state.variant == ScgdVariant::Accelerated {
        let inv = 1.0 / beta_k;
        let z: Vec<f64> = state
            .theta
            .as_slice()
            .iter()
            .zip(theta_next.as_slice())
            .map(|(&th, &tn)| (1.0 - inv) * th + inv * tn)
            .collect();
        state.z = Design::from(z);
    }
    state.theta = theta_next;
    state.u = u_next;
    state.k = k;
    Ok(direction)
}

/// Stepsize laws `α_k = C_α k^{-e_α}` and `β_k = min{1, C_β k^{-e_β}}` for
/// the SCGD family.
#[derive(Clone, Debug, PartialEq)]
pub struct ScgdSchedule {
    pub c_alpha: f64,
    pub e_alpha: f64,
    pub c_beta: f64,
    pub e_beta: f64,
}

impl ScgdSchedule {
    /// Exponents for general smooth objectives: `α_k ∝ k^{-3/4}`,
    /// `β_k ∝ k^{-1/2}`.
    pub fn general() -> Self {
        Self {
            c_alpha: 1.0,
            e_alpha: 3.0 / 4.0,
            c_beta: 1.0,
            e_beta: 1.0 / 2.0,
        }
    }

    /// Exponents for strongly convex objectives: `α_k ∝ k^{-1}`,
    /// `β_k ∝ k^{-4/5}`.
    pub fn strongly_convex() -> Self {
        Self {
            c_alpha: 1.0,
            e_alpha: 1.0,
            c_beta: 1.0,
            e_beta: 4.0 / 5.0,
        }
    }

    /// Scales both stepsize constants.
    pub fn with_constants(mut self, c_alpha: f64, c_beta: f64) -> Self {
        self.c_alpha = c_alpha;
        self.c_beta = c_beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_alpha", self.c_alpha),
            ("e_alpha", self.e_alpha),
            ("c_beta", self.c_beta),
            ("e_beta", self.e_beta),
        ] {
            if !v.is_finite() {
                return Err(CsgError::Config(format!(
                    "scgd schedule parameter {name} must be finite, got {v}"
                )));
            }
        }
        if self.c_alpha <= 0.0 || self.c_beta <= 0.0 {
            return Err(CsgError::Config(
                "scgd stepsize constants must be positive".to_string(),
            ));
        }
        if self.e_alpha < 0.0 || self.e_beta < 0.0 {
            return Err(CsgError::Config(
                "scgd stepsize exponents must be nonnegative".to_string(),
            ));
        }
        Ok(())
    }

    pub fn alpha(&self, k: u64) -> f64 {
        self.c_alpha * (k as f64).powf(-self.e_alpha)
    }

    /// `β_k`, clamped into `(0, 1]`.
    pub fn beta(&self, k: u64) -> f64 {
        (self.c_beta * (k as f64).powf(-self.e_beta)).min(1.0)
    }
}

/// Projected stochastic gradient descent as a [`Stepper`].
pub struct SgRunner<'a> {
    problem: &'a Problem,
    theta: Design,
    schedule: StepSchedule,
    last_direction: Option<Vec<f64>>,
    grad_evals: u64,
    sample_draws: u64,
}

impl<'a> SgRunner<'a> {
    pub fn new(problem: &'a Problem, theta0: Design, schedule: StepSchedule) -> Result<Self> {
        schedule.validate()?;
        if !problem.domain().contains(theta0.as_slice()) {
            return Err(CsgError::InvalidInput(format!(
                "starting point {:?} lies outside the problem domain",
                theta0
            )));
        }
        Ok(Self {
            problem,
            theta: theta0,
            schedule,
            last_direction: None,
            grad_evals: 0,
            sample_draws: 0,
        })
    }
}

impl Stepper for SgRunner<'_> {
    fn theta(&self) -> &Design {
        &self.theta
    }

    fn domain(&self) -> &BoxDomain {
        self.problem.domain()
    }

    fn do_step(&mut self, n: u64, rng: &mut ChaCha8Rng) -> Result<()> {
        let tau = self.schedule.step(n as usize);
        let x = self.problem.dist().sample(rng);
        self.sample_draws += 1;
        let grad = self.problem.grad_j(&self.theta, &x);
        self.grad_evals += 1;
        self.theta = project_step(&self.theta, &grad, tau, self.problem.domain())?;
        self.last_direction = Some(grad);
        Ok(())
    }

    fn jhat(&self) -> Option<f64> {
        None
    }

    fn direction(&self) -> Option<&[f64]> {
        self.last_direction.as_deref()
    }

    fn true_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        self.problem.analytic_grad_j(theta)
    }

    fn reference(&self) -> Option<&Design> {
        self.problem.theta_star()
    }

    fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn sample_draws(&self) -> u64 {
        self.sample_draws
    }

    fn weight_time_ns(&self) -> u64 {
        0
    }
}

/// Stochastic average gradients as a [`Stepper`], refreshing a uniformly
/// random slot each iteration.
pub struct SagRunner<'a> {
    problem: &'a Problem,
    state: SagState,
    theta: Design,
    schedule: StepSchedule,
    last_direction: Option<Vec<f64>>,
    grad_evals: u64,
    sample_draws: u64,
}

impl<'a> SagRunner<'a> {
    pub fn new(
        problem: &'a Problem,
        theta0: Design,
        slots: usize,
        schedule: StepSchedule,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        schedule.validate()?;
        if !problem.domain().contains(theta0.as_slice()) {
            return Err(CsgError::InvalidInput(format!(
                "starting point {:?} lies outside the problem domain",
                theta0
            )));
        }
        let state = SagState::new(problem, slots, rng)?;
        Ok(Self {
            problem,
            theta: theta0,
            schedule,
            last_direction: None,
            grad_evals: 0,
            sample_draws: slots as u64,
            state,
        })
    }
}

impl Stepper for SagRunner<'_> {
    fn theta(&self) -> &Design {
        &self.theta
    }

    fn domain(&self) -> &BoxDomain {
        self.problem.domain()
    }

    fn do_step(&mut self, n: u64, rng: &mut ChaCha8Rng) -> Result<()> {
        let tau = self.schedule.step(n as usize);
        let slot = rng.gen_range(0..self.state.slots());
        self.theta = sag_step(&self.theta, self.problem, &mut self.state, tau, slot)?;
        self.grad_evals += 1;
        self.last_direction = Some(self.state.table_mean());
        Ok(())
    }

    fn jhat(&self) -> Option<f64> {
        None
    }

    fn direction(&self) -> Option<&[f64]> {
        self.last_direction.as_deref()
    }

    fn true_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        self.problem.analytic_grad_j(theta)
    }

    fn reference(&self) -> Option<&Design> {
        self.problem.theta_star()
    }

    fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn sample_draws(&self) -> u64 {
        self.sample_draws
    }

    fn weight_time_ns(&self) -> u64 {
        0
    }
}

/// The SCGD family as a [`Stepper`].
pub struct ScgdRunner<'a> {
    composed: &'a ComposedObjective,
    state: ScgdState,
    schedule: ScgdSchedule,
    last_direction: Option<Vec<f64>>,
    grad_evals: u64,
    sample_draws: u64,
}

impl<'a> ScgdRunner<'a> {
    pub fn new(
        composed: &'a ComposedObjective,
        theta0: Design,
        variant: ScgdVariant,
        schedule: ScgdSchedule,
    ) -> Result<Self> {
        schedule.validate()?;
        if !composed.domain().contains(theta0.as_slice()) {
            return Err(CsgError::InvalidInput(format!(
                "starting point {:?} lies outside the problem domain",
                theta0
            )));
        }
        let state = match variant {
            ScgdVariant::Basic => ScgdState::basic(theta0),
            ScgdVariant::Accelerated => ScgdState::accelerated(theta0),
        };
        Ok(Self {
            composed,
            state,
            schedule,
            last_direction: None,
            grad_evals: 0,
            sample_draws: 0,
        })
    }

    pub fn state(&self) -> &ScgdState {
        &self.state
    }
}

impl Stepper for ScgdRunner<'_> {
    fn theta(&self) -> &Design {
        self.state.theta()
    }

    fn domain(&self) -> &BoxDomain {
        self.composed.domain()
    }

    fn do_step(&mut self, n: u64, rng: &mut ChaCha8Rng) -> Result<()> {
        let alpha = self.schedule.alpha(n);
        let beta = self.schedule.beta(n);
        let direction = scgd_step(&mut self.state, self.composed, alpha, beta, rng)?;
        self.grad_evals += 1;
        self.sample_draws += 2;
        self.last_direction = Some(direction);
        Ok(())
    }

    fn jhat(&self) -> Option<f64> {
        Some(self.state.u())
    }

    fn direction(&self) -> Option<&[f64]> {
        self.last_direction.as_deref()
    }

    fn true_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        self.composed.analytic_grad(theta)
    }

    fn reference(&self) -> Option<&Design> {
        self.composed.theta_star()
    }

    fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn sample_draws(&self) -> u64 {
        self.sample_draws
    }

    fn weight_time_ns(&self) -> u64 {
        0
    }
}
