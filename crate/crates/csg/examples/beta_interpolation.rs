//! Sweeps the inexact hybrid's pool exponent `beta` between its two
//! strategy-collapsing endpoints.
//!
//! With a pool of `floor(n^beta)` stored samples, `beta = 1` makes the
//! inexact hybrid *identical* to the empirical strategy (the pool is just
//! the evaluated samples), while `beta -> infinity` would recover the exact
//! hybrid (the pool tiles the sample space). The sweep shows the final
//! error interpolating monotonically between those endpoints — extra
//! *samples* (cheap draws, no objective evaluations) buy accuracy.

use csg::{
    make_quadratic_1d, run, run_experiment, ExperimentConfig, JointMetric, MethodSpec,
    ObjectiveRef, OptimizerSpec, ProblemSpec, StepSchedule, StoppingRule, WeightStrategy,
};

fn main() -> csg::Result<()> {
    let unit = StepSchedule::constant(1.0)?;
    let entry = |name: &str, strategy: WeightStrategy| {
        OptimizerSpec::named(
            name,
            MethodSpec::Csg {
                strategy,
                schedule: Some(unit.clone()),
                metric: None,
                mode: None,
                record_timings: false,
            },
        )
    };
    let config = ExperimentConfig {
        name: "beta interpolation".to_string(),
        problem: ProblemSpec::Quadratic1d,
        optimizers: vec![
            entry("empirical", WeightStrategy::Empirical),
            entry("beta 1.0", WeightStrategy::InexactHybrid { beta: 1.0 }),
            entry("beta 1.25", WeightStrategy::InexactHybrid { beta: 1.25 }),
            entry("beta 1.5", WeightStrategy::InexactHybrid { beta: 1.5 }),
            entry("beta 2.0", WeightStrategy::InexactHybrid { beta: 2.0 }),
            entry("exact hybrid", WeightStrategy::ExactHybrid),
        ],
        replications: 40,
        iterations: 400,
        base_seed: 77,
        start_region: None,
        outputs: None,
        tolerances: vec![0.1, 0.01],
    };

    let result = run_experiment(&config)?;
    let last = config.iterations as usize;

    println!(
        "quadratic problem, tau = 1, {} replications x {} iterations\n",
        config.replications, config.iterations
    );
    println!(
        "{:>14} {:>14} {:>14} {:>16}",
        "strategy", "median error", "q90 error", "pool at n = 400"
    );
    for opt in &result.optimizers {
        let pool = match opt.name.as_str() {
            "empirical" => "400 (= n)".to_string(),
            "exact hybrid" => "whole space".to_string(),
            name => {
                let beta: f64 = name
                    .trim_start_matches("beta ")
                    .parse()
                    .expect("sweep names end in the exponent");
                format!("{}", csg::pool_target(400, beta))
            }
        };
        let q = &opt.quantiles[last];
        println!(
            "{:>14} {:>14.3e} {:>14.3e} {:>16}",
            opt.name, q.q50, q.q90, pool
        );
    }
    println!(
        "\nRaising beta enlarges the pool the hybrid uses to approximate the\n\
         exact Voronoi cell measures, and the final error walks down toward\n\
         the exact hybrid's. (The experiment gives every optimizer its own\n\
         random stream, so the first two rows differ despite computing the\n\
         same weights.)"
    );

    // At beta = 1 the collapse to the empirical strategy is exact: replaying
    // the *same* seed with both strategies reproduces every iterate bit for
    // bit, because the pool is exactly the evaluated samples.
    let problem = make_quadratic_1d();
    let metric = JointMetric::default();
    let stopping = StoppingRule::max_iters(200);
    let schedule = StepSchedule::constant(1.0)?;
    let emp = run(
        ObjectiveRef::Plain(&problem),
        WeightStrategy::Empirical,
        &schedule,
        &metric,
        &stopping,
        913,
    )
    .map_err(|failure| failure.error)?;
    let hybrid = run(
        ObjectiveRef::Plain(&problem),
        WeightStrategy::InexactHybrid { beta: 1.0 },
        &schedule,
        &metric,
        &stopping,
        913,
    )
    .map_err(|failure| failure.error)?;
    let identical = emp
        .rows
        .iter()
        .zip(&hybrid.rows)
        .all(|(a, b)| a.theta.as_slice()[0].to_bits() == b.theta.as_slice()[0].to_bits());
    println!(
        "\nsame-seed replay, empirical vs. beta = 1.0: {} iterates, bitwise identical: {}",
        emp.rows.len(),
        identical
    );
    Ok(())
}
