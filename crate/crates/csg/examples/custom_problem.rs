//! Defines a problem from scratch — the classic newsvendor stocking model —
//! and solves it with CSG under a stationarity stopping rule.
//!
//! Order `theta` units before demand `X` is known; pay 1 per unit left over
//! and 3 per unit of unmet demand. Demand follows a triangular distribution
//! on [0, 1] with density `2x`, supplied here as a custom sampler (inverse
//! transform, `sqrt(U)`) plus its cdf `x^2`. The cdf is the ingredient that
//! lets the *exact* weight strategy compute true Voronoi cell probabilities
//! for a non-uniform distribution. The optimal order is the critical
//! quantile `F^{-1}(3/4) = sqrt(3)/2`.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use csg::{
    run_from, BoxDomain, Design, Distribution, ObjectiveRef, Problem, Sample, SamplerFn,
    StepSchedule, StoppingRule, TraceRow, WeightMode, WeightStrategy,
};

const OVERAGE: f64 = 1.0;
const UNDERAGE: f64 = 3.0;

fn main() -> csg::Result<()> {
    // Demand distribution: density 2x on [0, 1], cdf x^2, inverse-transform
    // sampler. `Distribution::custom` validates the cdf endpoints.
    let support = BoxDomain::interval(0.0, 1.0)?;
    let sampler: Arc<SamplerFn> =
        Arc::new(|rng: &mut ChaCha8Rng| vec![rng.gen_range(0.0..1.0f64).sqrt()]);
    let demand = Distribution::custom(support, sampler, Some(Arc::new(|x: f64| x * x)))?;

    // Integrand: overage + underage cost with its subgradient. The closed
    // forms follow from E[(theta - X)^+] = integral of the cdf:
    // J(theta) = (OVERAGE + UNDERAGE) * theta^3 / 3 + UNDERAGE * (2/3 - theta).
    let theta_star = (UNDERAGE / (OVERAGE + UNDERAGE)).sqrt();
    let problem = Problem::new(
        "newsvendor_triangular",
        BoxDomain::interval(0.0, 1.0)?,
        demand,
        |theta: &Design, x: &Sample| {
            let gap = theta.scalar() - x.scalar();
            OVERAGE * gap.max(0.0) + UNDERAGE * (-gap).max(0.0)
        },
        |theta: &Design, x: &Sample| {
            if theta.scalar() >= x.scalar() {
                vec![OVERAGE]
            } else {
                vec![-UNDERAGE]
            }
        },
    )
    .with_analytic(
        |theta: &Design| {
            let t = theta.scalar();
            (OVERAGE + UNDERAGE) * t * t * t / 3.0 + UNDERAGE * (2.0 / 3.0 - t)
        },
        |theta: &Design| {
            let t = theta.scalar();
            vec![(OVERAGE + UNDERAGE) * t * t - UNDERAGE]
        },
    )
    .with_theta_star(Design::from(theta_star));

    println!("newsvendor: overage cost {OVERAGE}, underage cost {UNDERAGE}, demand ~ 2x on [0,1]");
    println!("critical-quantile optimum: theta* = sqrt(3)/2 = {theta_star:.6}\n");

    // Solve from a deliberately bad start, stopping when the projected
    // gradient step shrinks below 5e-4 (or after 4000 iterations).
    let schedule = StepSchedule::constant(0.2)?;
    let metric = csg::JointMetric::default();
    let stopping = StoppingRule::with_stationarity(4000, 2e-5, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    rng.set_stream(1);
    let trace = run_from(
        ObjectiveRef::Plain(&problem),
        Design::from(0.05),
        WeightStrategy::Exact,
        WeightMode::Incremental,
        &schedule,
        &metric,
        &stopping,
        &mut rng,
    )
    .map_err(|failure| failure.error)?;

    println!(
        "{:>6} {:>10} {:>11} {:>11} {:>13} {:>11}",
        "n", "theta_n", "|err|", "Jhat_n", "stationarity", "J(theta_n)"
    );
    let last = trace.rows.len() - 1;
    for &n in &[1usize, 10, 100, 1000, last] {
        if n <= last {
            print_row(&problem, &trace.rows[n]);
        }
    }

    let final_row = trace.rows.last().expect("trace has rows");
    println!(
        "\nstopped after {} iterations (budget 4000): stationarity {:.2e} < 2e-5",
        final_row.iteration,
        final_row.stationarity.expect("diagnostic after first step")
    );
    println!(
        "final order quantity {:.6}, off the optimum by {:.2e}",
        final_row.theta.scalar(),
        final_row.abs_error.expect("theta* was attached")
    );
    let final_cost = problem
        .analytic_j(&final_row.theta)
        .expect("closed form was attached");
    let best_cost = problem
        .analytic_j(&Design::from(theta_star))
        .expect("closed form was attached");
    println!(
        "objective estimate Jhat = {:.6} vs. closed form J = {:.6}",
        final_row.jhat.expect("diagnostic after first step"),
        final_cost
    );
    println!(
        "expected cost {:.6} vs. optimal {:.6} — {:.1}% above optimal",
        final_cost,
        best_cost,
        100.0 * (final_cost / best_cost - 1.0)
    );
    println!(
        "total spend: {} integrand gradients, {} demand draws",
        final_row.grad_evals, final_row.sample_draws
    );
    println!(
        "\nThe rule fires once the weighted model is stationary; the leftover\n\
         offset in theta is the resolution of a {}-point quadrature, and the\n\
         flat cost bowl around the critical quantile makes it nearly free.",
        final_row.iteration
    );
    Ok(())
}

fn print_row(problem: &Problem, row: &TraceRow) {
    println!(
        "{:>6} {:>10.6} {:>11.3e} {:>11.6} {:>13.3e} {:>11.6}",
        row.iteration,
        row.theta.scalar(),
        row.abs_error.unwrap_or(f64::NAN),
        row.jhat.unwrap_or(f64::NAN),
        row.stationarity.unwrap_or(f64::NAN),
        problem.analytic_j(&row.theta).unwrap_or(f64::NAN),
    );
}
