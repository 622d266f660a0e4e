//! Continuous stochastic gradient (CSG) optimization.
//!
//! CSG minimizes expectation objectives `J(θ) = E_X[j(θ, X)]` over a box of
//! admissible designs by reusing *every* gradient sample ever drawn: at step
//! `n` the iterate moves along `Ĝ_n = Σ_k α_k ∇_θ j(θ_k, x_k)`, where the
//! integration weights `α_k` are nearest-neighbor cell probabilities in the
//! joint design × sample space. As the iterates settle, `Ĝ_n` approaches the
//! exact gradient `∇J(θ_n)` and `Ĵ_n = Σ_k α_k j(θ_k, x_k)` approaches the
//! objective value, which is why CSG tolerates constant step sizes that plain
//! stochastic gradient cannot.
//!
//! The crate provides:
//!
//! - four weight strategies ([`weights`]): exact cell probabilities,
//!   empirical counts, and two hybrids that mix sample-space cell measures
//!   with joint-space assignment, including the pool-based inexact hybrid
//!   that interpolates between the empirical and exact-hybrid extremes;
//! - the plain and composed-objective CSG iterations ([`optimizer`]), the
//!   latter handling nested objectives `E_Y[f(Y, E_X[j(θ, X)])]`;
//! - reference methods for comparison ([`baselines`]): projected stochastic
//!   gradient, SAG, and the two-timescale compositional methods SCGD and
//!   accelerated SCGD;
//! - benchmark problems ([`problems`]), a deterministic quadrature oracle for
//!   true optima ([`oracle`]), and an experiment [`harness`] with a CLI for
//!   reproducible multi-replication studies.
//!
//! Runnable examples (`cargo run --release --example <name>`):
//!
//! - `weight_strategies` — the four weight vectors on a tiny history
//! - `quadratic_race` — CSG vs. plain SG on a quadratic with constant steps
//! - `beta_interpolation` — inexact hybrid sweeping β between the extremes
//! - `nested_cosine` — composed CSG vs. accelerated SCGD
//! - `chance_penalty` — probability-constrained design via penalty smoothing
//! - `custom_problem` — user-defined problem, stopping rules, diagnostics

pub mod baselines;
pub mod dist;
pub mod error;
pub mod harness;
pub mod metric;
pub mod optimizer;
pub mod oracle;
pub mod problems;
pub mod schedule;
pub mod trace;
pub mod types;
pub mod weights;

pub use baselines::{
    sag_step, scgd_step, sg_step, SagRunner, SagState, ScgdRunner, ScgdSchedule, ScgdState,
    ScgdVariant, SgRunner, SAG_DEFAULT_SLOTS,
};
pub use dist::{CdfFn, Distribution, SamplerFn};
pub use error::{CsgError, Result};
pub use harness::{
    figure_config, run_experiment, run_selftest, ExperimentConfig, ExperimentResult, FigureId,
    MethodSpec, OptimizerSpec, ProblemInstance, ProblemSpec, StartRegion,
};
pub use metric::{metric_distance, JointMetric, Norm};
pub use optimizer::{
    csg_step, csg_step_composed, draw_start, run, run_from, run_loop, stationarity_measure,
    subgradient_max0, ComposedCsgRunner, ComposedCsgState, CsgRunner, CsgState, Stepper,
    StoppingRule,
};
pub use oracle::{objective_value, theta_opt_oracle, uniform_expectation, ORACLE_PANELS};
pub use problems::{
    make_chance_penalty, make_nested_cosine, make_quadratic_1d, ComposedObjective, ObjectiveRef,
    Problem,
};
pub use schedule::{schedule_step, StepSchedule};
pub use trace::{RunFailure, RunTrace, TraceRow};
pub use types::{
    project_box, BoxDomain, Design, EvaluationRecord, History, Sample, WeightVector,
    WEIGHT_NORMALIZATION_TOL,
};
pub use weights::{
    compute_weights, empirical_weights, exact_hybrid_weights, exact_weights_1d,
    inexact_hybrid_weights, joint_nearest, pool_target, xspace_voronoi_measures_1d, WeightEngine,
    WeightMode, WeightStrategy,
};
