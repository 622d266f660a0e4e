//! End-to-end behavior of the optimization loops: frozen worked examples,
//! bitwise agreement of the naive and incremental weight modes, seeded
//! reproducibility, early stopping, failure reporting, and the consistency
//! of the composed search direction with its own linearized surrogate.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use csg::{
    csg_step, csg_step_composed, make_nested_cosine, run, run_from, BoxDomain, ComposedCsgState,
    ComposedObjective, CsgState, Design, Distribution, JointMetric, ObjectiveRef, Problem,
    StepSchedule, StoppingRule, WeightEngine, WeightMode, WeightStrategy,
};

/// Distribution that always returns `value`, with support `[lo, hi]`.
fn constant_dist(value: f64, lo: f64, hi: f64) -> Distribution {
    Distribution::custom(
        BoxDomain::interval(lo, hi).expect("valid interval"),
        Arc::new(move |_rng: &mut ChaCha8Rng| vec![value]),
        None,
    )
    .expect("valid constant distribution")
}

/// The quadratic tracking integrand with a pinned sample value.
fn quadratic_with_constant_sample(x: f64) -> Problem {
    Problem::new(
        "quadratic_pinned",
        BoxDomain::interval(-0.5, 0.5).expect("valid interval"),
        constant_dist(x, -0.5, 0.5),
        |theta, x| {
            let d = x.scalar() - theta.scalar();
            0.5 * d * d
        },
        |theta, x| vec![theta.scalar() - x.scalar()],
    )
}

/// The nested-cosine composition with pinned inner and outer samples.
fn nested_cosine_with_constant_samples(x: f64, y: f64) -> ComposedObjective {
    use std::f64::consts::PI;
    let inner = Problem::new(
        "nested_cosine_inner_pinned",
        BoxDomain::interval(0.0, 10.0).expect("valid interval"),
        constant_dist(x, -1.0, 1.0),
        |theta, x| 10.0 * ((theta.scalar() - x.scalar()) / PI).cos(),
        |theta, x| vec![-(10.0 / PI) * ((theta.scalar() - x.scalar()) / PI).sin()],
    );
    ComposedObjective::new(
        "nested_cosine_pinned",
        inner,
        constant_dist(y, -3.0, 3.0),
        |_theta, y, u| {
            let t = 2.0 * y.scalar() + u;
            0.3 * t * t
        },
        |_theta, y, u| 0.6 * (2.0 * y.scalar() + u),
        |_theta, _y, _u| vec![0.0],
    )
}

#[test]
fn first_quadratic_step_reproduces_the_hand_calculation() {
    // theta_1 = 0.2, pinned sample 0.4, tau = 1: the single record carries
    // weight 1, G = 0.2 - 0.4, and theta_2 = 0.2 - (-0.2) = 0.4 exactly.
    let problem = quadratic_with_constant_sample(0.4);
    let mut engine =
        WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("engine");
    let mut state = CsgState::new(Design::from(0.2));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    csg_step(
        &mut state,
        &problem,
        &mut engine,
        &JointMetric::default(),
        1.0,
        &mut rng,
    )
    .expect("first step");

    assert_eq!(
        state.theta().scalar().to_bits(),
        0.4f64.to_bits(),
        "theta_2 must be exactly 0.4"
    );
    let d = 0.4f64 - 0.2;
    assert_eq!(
        state.jhat().expect("jhat recorded").to_bits(),
        (0.5 * d * d).to_bits(),
        "J_1 is the integrand value at (0.2, 0.4)"
    );
    assert_eq!(
        state.direction().expect("direction recorded")[0].to_bits(),
        (0.2f64 - 0.4).to_bits(),
        "G_1 is the gradient sample at (0.2, 0.4)"
    );
    let w = state.weights().expect("weights recorded");
    assert_eq!(w.as_slice(), &[1.0], "a single record has weight one");
}

#[test]
fn first_nested_step_reproduces_the_hand_calculation() {
    // theta_1 = 6, pinned x = 0, pinned y = 0, tau = 1/30:
    //   J_1 = 10 cos(6/pi)            = -3.326035756124746
    //   G_1 = -(10/pi) sin(6/pi)      = -3.0018746420842835
    //   direction = 0.6 * J_1 * G_1   =  5.9906054369859
    //   theta_2 = 6 - direction / 30  =  5.80031315210047
    let composed = nested_cosine_with_constant_samples(0.0, 0.0);
    let mut x_engine =
        WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("x engine");
    let mut y_engine =
        WeightEngine::new(WeightStrategy::Empirical, WeightMode::Incremental).expect("y engine");
    let mut state = ComposedCsgState::new(Design::from(6.0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    csg_step_composed(
        &mut state,
        &composed,
        &mut x_engine,
        &mut y_engine,
        &JointMetric::default(),
        1.0 / 30.0,
        &mut rng,
    )
    .expect("first composed step");

    let jhat = state.jhat().expect("jhat recorded");
    let ghat = state.inner_direction().expect("inner direction recorded")[0];
    let direction = state.direction().expect("direction recorded")[0];
    let theta_2 = state.theta().scalar();
    assert!(
        (jhat - (-3.326035756124746)).abs() < 1e-9,
        "inner estimate J_1 should be 10 cos(6/pi), got {jhat}"
    );
    assert!(
        (ghat - (-3.0018746420842835)).abs() < 1e-9,
        "inner gradient G_1 should be -(10/pi) sin(6/pi), got {ghat}"
    );
    assert!(
        (direction - 5.9906054369859).abs() < 1e-9,
        "outer chain-rule direction should be 0.6 J_1 G_1, got {direction}"
    );
    assert!(
        (theta_2 - 5.80031315210047).abs() < 1e-9,
        "theta_2 should be 6 - direction/30, got {theta_2}"
    );
}

#[test]
fn naive_and_incremental_weight_modes_run_identically() {
    let nested = make_nested_cosine();
    let schedule = StepSchedule::constant(1.0 / 30.0).expect("valid schedule");
    let metric = JointMetric::default();
    let stopping = StoppingRule::max_iters(120);
    for strategy in [
        WeightStrategy::Exact,
        WeightStrategy::Empirical,
        WeightStrategy::ExactHybrid,
        WeightStrategy::InexactHybrid { beta: 1.5 },
    ] {
        let mut traces = Vec::new();
        for mode in [WeightMode::Naive, WeightMode::Incremental] {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            rng.set_stream(1);
            let trace = run_from(
                ObjectiveRef::Composed(&nested),
                Design::from(7.0),
                strategy.clone(),
                mode,
                &schedule,
                &metric,
                &stopping,
                &mut rng,
            )
            .unwrap_or_else(|f| panic!("{mode:?} run failed: {f}"));
            traces.push(trace);
        }
        let (naive, incremental) = (&traces[0], &traces[1]);
        assert_eq!(naive.rows.len(), incremental.rows.len());
        for (a, b) in naive.rows.iter().zip(&incremental.rows) {
            assert_eq!(
                a.theta.scalar().to_bits(),
                b.theta.scalar().to_bits(),
                "{} iterates diverge between modes at iteration {}",
                strategy.label(),
                a.iteration
            );
            assert_eq!(
                a.jhat.map(f64::to_bits),
                b.jhat.map(f64::to_bits),
                "{} objective estimates diverge between modes at iteration {}",
                strategy.label(),
                a.iteration
            );
        }
    }
}

#[test]
fn identical_seeds_replay_and_different_seeds_differ() {
    let nested = make_nested_cosine();
    let schedule = StepSchedule::constant(1.0 / 30.0).expect("valid schedule");
    let metric = JointMetric::default();
    let stopping = StoppingRule::max_iters(50);
    let run_seeded = |seed: u64| {
        run(
            ObjectiveRef::Composed(&nested),
            WeightStrategy::ExactHybrid,
            &schedule,
            &metric,
            &stopping,
            seed,
        )
        .expect("seeded run")
    };
    let a = run_seeded(123);
    let b = run_seeded(123);
    let c = run_seeded(124);
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(
            ra.theta.scalar().to_bits(),
            rb.theta.scalar().to_bits(),
            "same seed must replay bitwise at iteration {}",
            ra.iteration
        );
    }
    assert!(
        a.rows
            .iter()
            .zip(&c.rows)
            .any(|(ra, rc)| ra.theta.scalar().to_bits() != rc.theta.scalar().to_bits()),
        "different seeds should produce different trajectories"
    );
}

#[test]
fn stationarity_stopping_halts_before_the_iteration_budget() {
    let problem = csg::make_quadratic_1d();
    let schedule = StepSchedule::constant(0.5).expect("valid schedule");
    let stopping = StoppingRule::with_stationarity(2000, 1e-4, 1.0).expect("valid rule");
    let trace = run(
        ObjectiveRef::Plain(&problem),
        WeightStrategy::Exact,
        &schedule,
        &JointMetric::default(),
        &stopping,
        31,
    )
    .expect("run with stationarity stop");
    assert!(
        trace.rows.len() < 2001,
        "stationarity tolerance should stop the run early, got {} rows",
        trace.rows.len()
    );
    let last = trace.rows.last().expect("nonempty trace");
    assert!(
        last.stationarity.expect("stationarity recorded") < 1e-4,
        "final stationarity should be below the tolerance"
    );
}

#[test]
fn numeric_failures_carry_the_iteration_and_partial_trace() {
    // The gradient turns non-finite once theta drops below 0.35; with a
    // pinned sample at zero the trajectory 0.5 -> 0.4 -> 0.32 trips the
    // check during step 3.
    let problem = Problem::new(
        "poisoned",
        BoxDomain::interval(-0.5, 0.5).expect("valid interval"),
        constant_dist(0.0, -0.5, 0.5),
        |theta, _x| 0.5 * theta.scalar() * theta.scalar(),
        |theta, _x| {
            if theta.scalar() < 0.35 {
                vec![f64::NAN]
            } else {
                vec![theta.scalar()]
            }
        },
    );
    let schedule = StepSchedule::constant(0.2).expect("valid schedule");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let failure = run_from(
        ObjectiveRef::Plain(&problem),
        Design::from(0.5),
        WeightStrategy::Empirical,
        WeightMode::Incremental,
        &schedule,
        &JointMetric::default(),
        &StoppingRule::max_iters(100),
        &mut rng,
    )
    .expect_err("the poisoned gradient must abort the run");
    assert_eq!(
        failure.partial.rows.len(),
        3,
        "rows 0..=2 should be retained from before the failure"
    );
    let message = failure.error.to_string();
    assert!(
        message.contains("iteration 3"),
        "error should carry the failing iteration, got '{message}'"
    );
}

#[test]
fn composed_direction_differentiates_the_frozen_surrogate() {
    // After each step, the recorded direction must equal the derivative of
    //   phi(t) = sum_l w_l f(t, y_l, J + G (t - theta))
    // at the pre-step iterate: the search direction is exactly the gradient
    // of the weight-frozen, inner-linearized surrogate.
    let composed = make_nested_cosine();
    let metric = JointMetric::default();
    let mut x_engine =
        WeightEngine::new(WeightStrategy::ExactHybrid, WeightMode::Incremental).expect("x engine");
    let mut y_engine =
        WeightEngine::new(WeightStrategy::ExactHybrid, WeightMode::Incremental).expect("y engine");
    let mut state = ComposedCsgState::new(Design::from(7.5));
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for step in 1..=25u32 {
        let theta_pre = state.theta().scalar();
        csg_step_composed(
            &mut state,
            &composed,
            &mut x_engine,
            &mut y_engine,
            &metric,
            1.0 / 30.0,
            &mut rng,
        )
        .expect("composed step");
        if step <= 20 {
            continue;
        }
        let jhat = state.jhat().expect("jhat recorded");
        let ghat = state.inner_direction().expect("inner direction")[0];
        let weights = state.weights_y().expect("outer weights").clone();
        let ys: Vec<f64> = state
            .y_history()
            .records()
            .iter()
            .map(|r| r.x.scalar())
            .collect();
        let phi = |t: f64| -> f64 {
            weights
                .iter()
                .zip(&ys)
                .map(|(&w, &y)| {
                    let u = jhat + ghat * (t - theta_pre);
                    let s = 2.0 * y + u;
                    w * 0.3 * s * s
                })
                .sum()
        };
        let h = 1e-6;
        let fd = (phi(theta_pre + h) - phi(theta_pre - h)) / (2.0 * h);
        let direction = state.direction().expect("direction recorded")[0];
        assert!(
            (fd - direction).abs() <= 1e-4 * (1.0 + direction.abs()),
            "step {step}: direction {direction} vs surrogate derivative {fd}"
        );
    }
}

#[test]
fn trace_counters_accumulate_per_step() {
    let problem = csg::make_quadratic_1d();
    let schedule = StepSchedule::constant(0.5).expect("valid schedule");
    let trace = run(
        ObjectiveRef::Plain(&problem),
        WeightStrategy::InexactHybrid { beta: 2.0 },
        &schedule,
        &JointMetric::default(),
        &StoppingRule::max_iters(30),
        5,
    )
    .expect("inexact hybrid run");
    for pair in trace.rows.windows(2) {
        assert!(
            pair[1].grad_evals >= pair[0].grad_evals
                && pair[1].sample_draws >= pair[0].sample_draws,
            "counters must be cumulative"
        );
    }
    let last = trace.rows.last().expect("nonempty trace");
    assert_eq!(
        last.grad_evals, 30,
        "one integrand gradient per iteration regardless of pool growth"
    );
    assert_eq!(
        last.sample_draws, 900,
        "beta = 2 grows the sample pool to n^2 draws"
    );
    assert_eq!(
        last.weight_time_ns, 0,
        "timing stays zero unless explicitly enabled"
    );
}
