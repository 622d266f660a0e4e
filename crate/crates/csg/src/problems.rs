//! Benchmark problems: a quadratic tracking problem, a nested-cosine
//! composition, and a smoothed chance-constraint penalty.
//!
//! [`Problem`] describes an expectation objective `J(θ) = E_X[j(θ, X)]` by
//! its sampled integrand `j`, the integrand's design gradient, the box
//! domain, and the sampling distribution; closed-form values, gradients, and
//! minimizers are attached when known. [`ComposedObjective`] wraps an inner
//! problem into `J̃(θ) = E_Y[f(θ, Y, E_X[j(θ, X)])]`, the composed form
//! handled by the CSG method with a second weight vector and by the SCGD
//! baselines. All maximization examples are stored negated, so every
//! objective in the crate is minimized.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::dist::Distribution;
use crate::error::{CsgError, Result};
use crate::optimizer::subgradient_max0;
use crate::schedule::StepSchedule;
use crate::types::{BoxDomain, Design, Sample};

type IntegrandFn = Arc<dyn Fn(&Design, &Sample) -> f64 + Send + Sync>;
type IntegrandGradFn = Arc<dyn Fn(&Design, &Sample) -> Vec<f64> + Send + Sync>;
type ValueFn = Arc<dyn Fn(&Design) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&Design) -> Vec<f64> + Send + Sync>;
type OuterFn = Arc<dyn Fn(&Design, &Sample, f64) -> f64 + Send + Sync>;
type OuterGradFn = Arc<dyn Fn(&Design, &Sample, f64) -> Vec<f64> + Send + Sync>;

/// An expectation-minimization problem `min_θ E_X[j(θ, X)]` over a box.
#[derive(Clone)]
pub struct Problem {
    name: String,
    domain: BoxDomain,
    dist: Distribution,
    j: IntegrandFn,
    grad_j: IntegrandGradFn,
    analytic_j: Option<ValueFn>,
    analytic_grad_j: Option<GradFn>,
    theta_star: Option<Design>,
}

impl Problem {
    /// Builds a problem from its domain, sampling distribution, integrand,
    /// and integrand gradient. Closed-form data is attached with the
    /// `with_*` builders.
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        dist: Distribution,
        j: impl Fn(&Design, &Sample) -> f64 + Send + Sync + 'static,
        grad_j: impl Fn(&Design, &Sample) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            dist,
            j: Arc::new(j),
            grad_j: Arc::new(grad_j),
            analytic_j: None,
            analytic_grad_j: None,
            theta_star: None,
        }
    }

    /// Attaches the closed-form objective `J(θ)` and its gradient.
    pub fn with_analytic(
        mut self,
        value: impl Fn(&Design) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Design) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_j = Some(Arc::new(value));
        self.analytic_grad_j = Some(Arc::new(grad));
        self
    }

    /// Attaches the known minimizer.
    pub fn with_theta_star(mut self, theta_star: Design) -> Self {
        self.theta_star = Some(theta_star);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Design-space dimension.
    pub fn d_des(&self) -> usize {
        self.domain.dim()
    }

    /// Sample-space dimension.
    pub fn d_par(&self) -> usize {
        self.dist.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }

    /// Sampled integrand value `j(θ, x)`.
    pub fn j(&self, theta: &Design, x: &Sample) -> f64 {
        (self.j)(theta, x)
    }

    /// Sampled integrand gradient `∇_θ j(θ, x)`.
    pub fn grad_j(&self, theta: &Design, x: &Sample) -> Vec<f64> {
        (self.grad_j)(theta, x)
    }

    /// Closed-form `J(θ)`, if known.
    pub fn analytic_j(&self, theta: &Design) -> Option<f64> {
        self.analytic_j.as_ref().map(|f| f(theta))
    }

    /// Closed-form `∇J(θ)`, if known.
    pub fn analytic_grad_j(&self, theta: &Design) -> Option<Vec<f64>> {
        self.analytic_grad_j.as_ref().map(|f| f(theta))
    }

    /// Known minimizer, if any.
    pub fn theta_star(&self) -> Option<&Design> {
        self.theta_star.as_ref()
    }
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("d_par", &self.d_par())
            .field("has_analytic", &self.analytic_j.is_some())
            .field("theta_star", &self.theta_star)
            .finish()
    }
}

/// A composed objective `min_θ E_Y[f(θ, Y, u(θ))]` with inner expectation
/// `u(θ) = E_X[j(θ, X)]`.
///
/// The outer integrand is supplied together with its partial derivatives
/// `∂f/∂u` and `∂f/∂θ`, from which the chain rule assembles descent
/// directions.
#[derive(Clone)]
pub struct ComposedObjective {
    name: String,
    inner: Problem,
    y_dist: Distribution,
    outer: OuterFn,
    outer_du: OuterFn,
    outer_dtheta: OuterGradFn,
    analytic_value: Option<ValueFn>,
    analytic_grad: Option<GradFn>,
    theta_star: Option<Design>,
    default_schedule: Option<StepSchedule>,
}

impl ComposedObjective {
    /// Builds a composed objective from the inner problem, the outer sample
    /// distribution, the outer integrand `f(θ, y, u)`, and its partials
    /// `∂f/∂u` and `∂f/∂θ`.
    pub fn new(
        name: impl Into<String>,
        inner: Problem,
        y_dist: Distribution,
        outer: impl Fn(&Design, &Sample, f64) -> f64 + Send + Sync + 'static,
        outer_du: impl Fn(&Design, &Sample, f64) -> f64 + Send + Sync + 'static,
        outer_dtheta: impl Fn(&Design, &Sample, f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            inner,
            y_dist,
            outer: Arc::new(outer),
            outer_du: Arc::new(outer_du),
            outer_dtheta: Arc::new(outer_dtheta),
            analytic_value: None,
            analytic_grad: None,
            theta_star: None,
            default_schedule: None,
        }
    }

    /// Attaches the closed-form composed objective and its gradient.
    pub fn with_analytic(
        mut self,
        value: impl Fn(&Design) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Design) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.analytic_value = Some(Arc::new(value));
        self.analytic_grad = Some(Arc::new(grad));
        self
    }

    /// Attaches the known minimizer.
    pub fn with_theta_star(mut self, theta_star: Design) -> Self {
        self.theta_star = Some(theta_star);
        self
    }

    /// Attaches the step schedule used by the stored reference experiment.
    pub fn with_default_schedule(mut self, schedule: StepSchedule) -> Self {
        self.default_schedule = Some(schedule);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The inner expectation problem `u(θ) = E_X[j(θ, X)]`.
    pub fn inner(&self) -> &Problem {
        &self.inner
    }

    /// Distribution of the outer sample `Y`.
    pub fn y_dist(&self) -> &Distribution {
        &self.y_dist
    }

    pub fn domain(&self) -> &BoxDomain {
        self.inner.domain()
    }

    /// Outer integrand value `f(θ, y, u)`.
    pub fn outer(&self, theta: &Design, y: &Sample, u: f64) -> f64 {
        (self.outer)(theta, y, u)
    }

    /// Outer partial `∂f/∂u (θ, y, u)`.
    pub fn outer_du(&self, theta: &Design, y: &Sample, u: f64) -> f64 {
        (self.outer_du)(theta, y, u)
    }

    /// Outer partial `∂f/∂θ (θ, y, u)`.
    pub fn outer_dtheta(&self, theta: &Design, y: &Sample, u: f64) -> Vec<f64> {
        (self.outer_dtheta)(theta, y, u)
    }

    /// Closed-form composed objective `J̃(θ)`, if known.
    pub fn analytic_value(&self, theta: &Design) -> Option<f64> {
        self.analytic_value.as_ref().map(|f| f(theta))
    }

    /// Closed-form `∇J̃(θ)`, if known.
    pub fn analytic_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        self.analytic_grad.as_ref().map(|f| f(theta))
    }

    /// Known minimizer, if any.
    pub fn theta_star(&self) -> Option<&Design> {
        self.theta_star.as_ref()
    }

    /// Step schedule of the stored reference experiment, if any.
    pub fn default_schedule(&self) -> Option<&StepSchedule> {
        self.default_schedule.as_ref()
    }
}

impl fmt::Debug for ComposedObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComposedObjective")
            .field("name", &self.name)
            .field("inner", &self.inner)
            .field("theta_star", &self.theta_star)
            .field("default_schedule", &self.default_schedule)
            .finish()
    }
}

/// Borrowed reference to either objective kind, for code paths (oracles,
/// runners) that handle both.
#[derive(Clone, Copy, Debug)]
pub enum ObjectiveRef<'a> {
    Plain(&'a Problem),
    Composed(&'a ComposedObjective),
}

impl<'a> ObjectiveRef<'a> {
    pub fn name(&self) -> &str {
        match self {
            ObjectiveRef::Plain(p) => p.name(),
            ObjectiveRef::Composed(c) => c.name(),
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        match self {
            ObjectiveRef::Plain(p) => p.domain(),
            ObjectiveRef::Composed(c) => c.domain(),
        }
    }

    pub fn theta_star(&self) -> Option<&Design> {
        match self {
            ObjectiveRef::Plain(p) => p.theta_star(),
            ObjectiveRef::Composed(c) => c.theta_star(),
        }
    }

    /// Closed-form objective value, if known.
    pub fn analytic_value(&self, theta: &Design) -> Option<f64> {
        match self {
            ObjectiveRef::Plain(p) => p.analytic_j(theta),
            ObjectiveRef::Composed(c) => c.analytic_value(theta),
        }
    }

    /// Closed-form objective gradient, if known.
    pub fn analytic_grad(&self, theta: &Design) -> Option<Vec<f64>> {
        match self {
            ObjectiveRef::Plain(p) => p.analytic_grad_j(theta),
            ObjectiveRef::Composed(c) => c.analytic_grad(theta),
        }
    }
}

/// The scalar quadratic tracking problem on `P = X = [-1/2, 1/2]`.
///
/// `j(θ, x) = (1/2)(x - θ)²` with `X` uniform, so `J(θ) = θ²/2 + 1/24`,
/// `∇J(θ) = θ`, and `θ* = 0`.
pub fn make_quadratic_1d() -> Problem {
    let domain = BoxDomain::interval(-0.5, 0.5).expect("valid interval");
    let support = BoxDomain::interval(-0.5, 0.5).expect("valid interval");
    Problem::new(
        "quadratic1d",
        domain,
        Distribution::uniform(support),
        |theta, x| {
            let d = x.scalar() - theta.scalar();
            0.5 * d * d
        },
        |theta, x| vec![theta.scalar() - x.scalar()],
    )
    .with_analytic(
        |theta| 0.5 * theta.scalar() * theta.scalar() + 1.0 / 24.0,
        |theta| vec![theta.scalar()],
    )
    .with_theta_star(Design::from(0.0))
}

/// The nested-cosine composition on `P = [0, 10]`.
///
/// Inner `u(θ) = E_X[10·cos((θ - x)/π)]` with `X` uniform on `[-1, 1]`,
/// outer `f(y, u) = (3/10)(2y + u)²` with `Y` uniform on `[-3, 3]`. In
/// closed form `u(θ) = 10π·sin(1/π)·cos(θ/π)` and
/// `J̃(θ) = 3.6 + 0.3·u(θ)²`, minimized at `θ* = π²/2`.
pub fn make_nested_cosine() -> ComposedObjective {
    let domain = BoxDomain::interval(0.0, 10.0).expect("valid interval");
    let x_support = BoxDomain::interval(-1.0, 1.0).expect("valid interval");
    let y_support = BoxDomain::interval(-3.0, 3.0).expect("valid interval");
    let inner = Problem::new(
        "nested_cosine_inner",
        domain,
        Distribution::uniform(x_support),
        |theta, x| 10.0 * ((theta.scalar() - x.scalar()) / PI).cos(),
        |theta, x| vec![-(10.0 / PI) * ((theta.scalar() - x.scalar()) / PI).sin()],
    )
    .with_analytic(
        |theta| 10.0 * PI * (1.0 / PI).sin() * (theta.scalar() / PI).cos(),
        |theta| vec![-10.0 * (1.0 / PI).sin() * (theta.scalar() / PI).sin()],
    );
    let u_of = |theta: &Design| 10.0 * PI * (1.0 / PI).sin() * (theta.scalar() / PI).cos();
    let du_of = |theta: &Design| -10.0 * (1.0 / PI).sin() * (theta.scalar() / PI).sin();
    ComposedObjective::new(
        "nested_cosine",
        inner,
        Distribution::uniform(y_support),
        |_theta, y, u| {
            let t = 2.0 * y.scalar() + u;
            0.3 * t * t
        },
        |_theta, y, u| 0.6 * (2.0 * y.scalar() + u),
        |_theta, _y, _u| vec![0.0],
    )
    .with_analytic(
        move |theta| {
            let u = u_of(theta);
            3.6 + 0.3 * u * u
        },
        move |theta| vec![0.6 * u_of(theta) * du_of(theta)],
    )
    .with_theta_star(Design::from(PI * PI / 2.0))
    .with_default_schedule(StepSchedule::constant(1.0 / 30.0).expect("valid schedule"))
}

/// The smoothed chance-constraint penalty problem on `P = [0, 3/4]`.
///
/// Maximizing `θ - λ·max{0, P(θ - X² ≥ 0) - 1/2}` is stored as minimizing
/// its negation. The probability is smoothed to the inner expectation
/// `u(θ) = E_X[(tanh(a(θ - x²)) + 1)/2]` with `X` uniform on `[-1, 1]`; the
/// outer integrand `-θ + λ·max{0, u - 1/2}` uses the zero-at-kink
/// subgradient of `max{0, ·}`. The unsmoothed optimum is `θ = 1/4`; the
/// smoothed one lies within `1.5e-3` of it for `λ = 3`, `a = 25`.
///
/// The outer integrand ignores its sample, so `Y` is a placeholder uniform
/// draw that keeps the composed interfaces uniform across problems.
pub fn make_chance_penalty(lambda: f64, a: f64) -> Result<ComposedObjective> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(CsgError::Config(format!(
            "chance penalty weight lambda must be finite and positive, got {lambda}"
        )));
    }
    if !a.is_finite() || a <= 0.0 {
        return Err(CsgError::Config(format!(
            "chance penalty sharpness a must be finite and positive, got {a}"
        )));
    }
    let domain = BoxDomain::interval(0.0, 0.75).expect("valid interval");
    let x_support = BoxDomain::interval(-1.0, 1.0).expect("valid interval");
    let y_support = BoxDomain::interval(-1.0, 1.0).expect("valid interval");
    let inner = Problem::new(
        "chance_penalty_inner",
        domain,
        Distribution::uniform(x_support),
        move |theta, x| {
            let xs = x.scalar();
            0.5 * ((a * (theta.scalar() - xs * xs)).tanh() + 1.0)
        },
        move |theta, x| {
            let xs = x.scalar();
            let c = (a * (theta.scalar() - xs * xs)).cosh();
            vec![a / (2.0 * c * c)]
        },
    );
    Ok(ComposedObjective::new(
        "chance_penalty",
        inner,
        Distribution::uniform(y_support),
        move |theta, _y, u| -theta.scalar() + lambda * (u - 0.5).max(0.0),
        move |_theta, _y, u| lambda * subgradient_max0(u - 0.5),
        |_theta, _y, _u| vec![-1.0],
    )
    .with_default_schedule(StepSchedule::power(1.0, 1.0).expect("valid schedule")))
}
