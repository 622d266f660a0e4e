//! Composed objectives: CSG against accelerated SCGD on the nested cosine
//! benchmark.
//!
//! The objective is E_y[f(theta, y, u(theta))] with an inner expectation
//! u(theta) = E_x[j(theta, x)] nested inside the outer integrand — average
//! first, then square. A plain stochastic gradient of `f(theta, y, j)` is
//! biased here; SCGD fixes that with an auxiliary tracking sequence, and
//! CSG fixes it by integrating both expectations with its history weights.

use csg::{
    run_experiment, theta_opt_oracle, ExperimentConfig, MethodSpec, OptimizerSpec, ProblemSpec,
    StartRegion, StepSchedule, WeightStrategy,
};

fn main() -> csg::Result<()> {
    let tau = StepSchedule::constant(1.0 / 30.0)?;
    let csg = |strategy: WeightStrategy| {
        OptimizerSpec::new(MethodSpec::Csg {
            strategy,
            schedule: Some(tau.clone()),
            metric: None,
            mode: None,
            record_timings: false,
        })
    };
    let config = ExperimentConfig {
        name: "nested cosine".to_string(),
        problem: ProblemSpec::NestedCosine,
        optimizers: vec![
            OptimizerSpec::new(MethodSpec::Ascgd {
                stepsizes: None,
                c_alpha: 1.0,
                c_beta: 1.0,
            }),
            csg(WeightStrategy::Empirical),
            csg(WeightStrategy::ExactHybrid),
        ],
        replications: 30,
        iterations: 2000,
        base_seed: 3030,
        start_region: Some(StartRegion::interval(5.5, 9.5)),
        outputs: None,
        tolerances: vec![0.1, 0.01],
    };

    let instance = config.problem.build()?;
    let minimizer = theta_opt_oracle(instance.objective(), 1e-6)?;
    println!(
        "problem {}: minimizer found by quadrature at theta* = {:.6}",
        instance.name(),
        minimizer.scalar()
    );
    println!(
        "(analytically theta* = pi^2/2 = {:.6}; starts drawn from [5.5, 9.5])\n",
        std::f64::consts::PI * std::f64::consts::PI / 2.0
    );
    drop(instance);

    let result = run_experiment(&config)?;
    let checkpoints = [10u64, 100, 500, 2000];
    print!("{:>22}", "median error at n =");
    for n in checkpoints {
        print!(" {n:>12}");
    }
    println!();
    for opt in &result.optimizers {
        print!("{:>22}", opt.name);
        for n in checkpoints {
            print!(" {:>12.3e}", opt.quantiles[n as usize].q50);
        }
        println!();
    }

    println!("\nsteps until 90% of replications are below tolerance");
    println!("{:>22} {:>10} {:>10}", "", "tol 0.1", "tol 0.01");
    for opt in &result.optimizers {
        print!("{:>22}", opt.name);
        for (_, steps) in &opt.steps_to_tolerance {
            match steps {
                Some(n) => print!(" {n:>10}"),
                None => print!(" {:>10}", "never"),
            }
        }
        println!();
    }
    println!(
        "\nBoth methods are unbiased for the nested objective, but SCGD's\n\
         averaged auxiliary variable forgets slowly, while CSG reuses every\n\
         stored evaluation at full strength — the hybrid weights buy another\n\
         order of magnitude over sample counting."
    );
    Ok(())
}
