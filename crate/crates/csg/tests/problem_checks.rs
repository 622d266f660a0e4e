//! Validation of the bundled benchmark problems: finite-difference checks of
//! every integrand gradient and outer partial, agreement of the closed
//! forms with deterministic quadrature, monotonicity of the smoothed
//! probability, the stored minimizers, and the stored step schedules.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use csg::{
    make_chance_penalty, make_nested_cosine, make_quadratic_1d, objective_value, theta_opt_oracle,
    uniform_expectation, Design, ObjectiveRef, Problem, Sample,
};

const FD_STEP: f64 = 1e-6;

fn central_difference(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    (f(t + FD_STEP) - f(t - FD_STEP)) / (2.0 * FD_STEP)
}

/// Checks `grad_j` against central differences of `j` at `count` random
/// points of the design box × sample support (shrunk slightly so the probe
/// stencil stays inside).
fn check_integrand_gradient(problem: &Problem, seed: u64, count: usize, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tlo, thi) = (problem.domain().lower()[0], problem.domain().upper()[0]);
    let (xlo, xhi) = (
        problem.dist().support().lower()[0],
        problem.dist().support().upper()[0],
    );
    let margin = 10.0 * FD_STEP;
    for _ in 0..count {
        let t = rng.gen_range(tlo + margin..thi - margin);
        let x = rng.gen_range(xlo..xhi);
        let sample = Sample::from(x);
        let fd = central_difference(&|t| problem.j(&Design::from(t), &sample), t);
        let g = problem.grad_j(&Design::from(t), &sample)[0];
        assert!(
            (fd - g).abs() <= tol * (1.0 + g.abs()),
            "{}: gradient {g} vs central difference {fd} at (theta, x) = ({t}, {x})",
            problem.name()
        );
    }
}

#[test]
fn integrand_gradients_match_finite_differences() {
    check_integrand_gradient(&make_quadratic_1d(), 1, 100, 1e-5);
    check_integrand_gradient(make_nested_cosine().inner(), 2, 100, 1e-5);
    // tanh saturates fast; the larger a, the sharper the transition, but the
    // derivative stays bounded by a/2, well within reach of central
    // differences at 1e-6.
    check_integrand_gradient(
        make_chance_penalty(3.0, 25.0)
            .expect("chance builds")
            .inner(),
        3,
        100,
        1e-4,
    );
}

#[test]
fn outer_partials_match_finite_differences() {
    let nested = make_nested_cosine();
    let chance = make_chance_penalty(3.0, 25.0).expect("chance builds");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let y = Sample::from(rng.gen_range(-3.0..3.0));
        let theta = Design::from(rng.gen_range(0.0..10.0));
        let u = rng.gen_range(-12.0..12.0);
        let fd = central_difference(&|u| nested.outer(&theta, &y, u), u);
        let du = nested.outer_du(&theta, &y, u);
        assert!(
            (fd - du).abs() <= 1e-5 * (1.0 + du.abs()),
            "nested outer du {du} vs {fd} at (y, u) = ({}, {u})",
            y.scalar()
        );
        assert_eq!(
            nested.outer_dtheta(&theta, &y, u),
            vec![0.0],
            "the nested outer integrand does not depend on theta"
        );
    }
    for _ in 0..100 {
        let y = Sample::from(rng.gen_range(-1.0..1.0));
        let theta = Design::from(rng.gen_range(0.0..0.75));
        // Probe away from the hinge at u = 1/2 where the subgradient jumps.
        let u = loop {
            let u: f64 = rng.gen_range(0.0..1.0);
            if (u - 0.5).abs() > 1e-3 {
                break u;
            }
        };
        let fd = central_difference(&|u| chance.outer(&theta, &y, u), u);
        let du = chance.outer_du(&theta, &y, u);
        assert!(
            (fd - du).abs() <= 1e-5 * (1.0 + du.abs()),
            "chance outer du {du} vs {fd} at u = {u}"
        );
        assert_eq!(
            chance.outer_dtheta(&theta, &y, u),
            vec![-1.0],
            "the design enters the chance outer integrand linearly"
        );
    }
}

#[test]
fn closed_forms_agree_with_quadrature() {
    let quadratic = make_quadratic_1d();
    let nested = make_nested_cosine();
    for i in 0..=20 {
        let t = -0.5 + i as f64 / 20.0;
        let theta = Design::from(t);
        let exact = quadratic.analytic_j(&theta).expect("closed form");
        let quad = objective_value(ObjectiveRef::Plain(&quadratic), &theta).expect("quadrature");
        assert!(
            (exact - quad).abs() < 1e-10,
            "quadratic closed form {exact} vs quadrature {quad} at theta = {t}"
        );
    }
    for i in 0..=20 {
        let t = 0.5 * i as f64;
        let theta = Design::from(t);
        // Inner expectation u(theta).
        let exact_u = nested.inner().analytic_j(&theta).expect("closed form");
        let quad_u = uniform_expectation(nested.inner().dist(), &mut |x| {
            nested.inner().j(&theta, &Sample::from(x))
        })
        .expect("inner quadrature");
        assert!(
            (exact_u - quad_u).abs() < 1e-10,
            "nested inner closed form {exact_u} vs quadrature {quad_u} at theta = {t}"
        );
        // Full composition.
        let exact_j = nested.analytic_value(&theta).expect("closed form");
        let quad_j = objective_value(ObjectiveRef::Composed(&nested), &theta).expect("quadrature");
        assert!(
            (exact_j - quad_j).abs() < 1e-9,
            "nested closed form {exact_j} vs quadrature {quad_j} at theta = {t}"
        );
    }
}

#[test]
fn smoothed_probability_is_increasing_in_theta() {
    let chance = make_chance_penalty(3.0, 25.0).expect("chance builds");
    let inner = chance.inner();
    let mut previous = f64::NEG_INFINITY;
    for i in 0..=30 {
        let t = 0.75 * i as f64 / 30.0;
        let u = uniform_expectation(inner.dist(), &mut |x| {
            inner.j(&Design::from(t), &Sample::from(x))
        })
        .expect("inner quadrature");
        assert!(
            (0.0..=1.0).contains(&u),
            "smoothed probability {u} is not a probability at theta = {t}"
        );
        assert!(
            u > previous,
            "smoothed probability must increase with theta: u({t}) = {u} after {previous}"
        );
        previous = u;
    }
}

#[test]
fn oracle_finds_the_known_minimizers() {
    let quadratic = make_quadratic_1d();
    let t = theta_opt_oracle(ObjectiveRef::Plain(&quadratic), 1e-6)
        .expect("quadratic oracle")
        .scalar();
    assert!(
        t.abs() < 1e-5,
        "quadratic minimizer should be 0, oracle found {t}"
    );

    let nested = make_nested_cosine();
    let t = theta_opt_oracle(ObjectiveRef::Composed(&nested), 1e-6)
        .expect("nested oracle")
        .scalar();
    assert!(
        (t - PI * PI / 2.0).abs() < 1e-4,
        "nested minimizer should be pi^2/2 = {}, oracle found {t}",
        PI * PI / 2.0
    );

    let chance = make_chance_penalty(3.0, 25.0).expect("chance builds");
    let t = theta_opt_oracle(ObjectiveRef::Composed(&chance), 1e-6)
        .expect("chance oracle")
        .scalar();
    assert!(
        (t - 0.25).abs() < 1.5e-3,
        "smoothed chance optimum should fall within 1.5e-3 of 1/4, oracle found {t}"
    );
}

#[test]
fn stored_minimizers_are_stationary() {
    let quadratic = make_quadratic_1d();
    let g = quadratic
        .analytic_grad_j(quadratic.theta_star().expect("stored minimizer"))
        .expect("closed-form gradient");
    assert_eq!(g, vec![0.0], "the quadratic gradient vanishes at theta*");

    let nested = make_nested_cosine();
    let g = nested
        .analytic_grad(nested.theta_star().expect("stored minimizer"))
        .expect("closed-form gradient");
    assert!(
        g[0].abs() < 1e-12,
        "the nested gradient should vanish at theta* = pi^2/2, got {}",
        g[0]
    );
}

#[test]
fn stored_schedules_match_the_reference_experiments() {
    let nested = make_nested_cosine();
    let schedule = nested.default_schedule().expect("stored schedule");
    for n in [1usize, 10, 5000] {
        assert_eq!(
            schedule.step(n),
            1.0 / 30.0,
            "nested cosine uses the constant step 1/30"
        );
    }
    let chance = make_chance_penalty(3.0, 25.0).expect("chance builds");
    let schedule = chance.default_schedule().expect("stored schedule");
    assert_eq!(schedule.step(1), 1.0, "chance penalty uses tau_n = 1/n");
    assert_eq!(schedule.step(4), 0.25, "chance penalty uses tau_n = 1/n");
}
