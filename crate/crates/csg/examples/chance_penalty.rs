//! Probability-constrained design via penalty smoothing: pick the largest
//! design that still satisfies a chance constraint.
//!
//! The task is to maximize `theta` subject to `P(X^2 <= theta) <= 1/2` for
//! `X` uniform on [-1, 1]. The probability is smoothed by a steep `tanh`
//! sigmoid so the inner expectation `u(theta) ~ P(X^2 <= theta)` has a
//! usable gradient, and the constraint enters as the hinge penalty
//! `lambda * max(0, u - 1/2)`. Since `P(X^2 <= theta) = sqrt(theta)`, the
//! true optimum sits at `theta = 1/4`.

use csg::{
    run_experiment, theta_opt_oracle, uniform_expectation, Design, ExperimentConfig, MethodSpec,
    OptimizerSpec, ProblemSpec, Sample, StepSchedule, WeightStrategy,
};

fn main() -> csg::Result<()> {
    let lambda = 3.0;
    let sharpness = 25.0;
    let config = ExperimentConfig {
        name: "chance penalty".to_string(),
        problem: ProblemSpec::ChancePenalty {
            lambda,
            a: sharpness,
        },
        optimizers: vec![
            OptimizerSpec::new(MethodSpec::Scgd {
                stepsizes: None,
                c_alpha: 1.0,
                c_beta: 1.0,
            }),
            OptimizerSpec::new(MethodSpec::Csg {
                strategy: WeightStrategy::ExactHybrid,
                schedule: Some(StepSchedule::power(1.0, 1.0)?),
                metric: None,
                mode: None,
                record_timings: false,
            }),
        ],
        replications: 30,
        iterations: 1500,
        base_seed: 5150,
        start_region: None,
        outputs: None,
        tolerances: vec![0.1, 0.01],
    };

    let instance = config.problem.build()?;
    let composed = instance.composed().expect("chance penalty is composed");
    let smoothed_opt = theta_opt_oracle(instance.objective(), 1e-6)?;
    println!(
        "penalty objective: -theta + {lambda} * max(0, u(theta) - 1/2), sigmoid sharpness a = {sharpness}"
    );
    println!(
        "smoothed optimum by quadrature: theta = {:.5}  (hard-constraint optimum: 0.25)\n",
        smoothed_opt.scalar()
    );

    let result = run_experiment(&config)?;
    let checkpoints = [10u64, 100, 500, 1500];
    print!("{:>18}", "median error at n =");
    for n in checkpoints {
        print!(" {n:>12}");
    }
    println!();
    for opt in &result.optimizers {
        print!("{:>18}", opt.name);
        for n in checkpoints {
            print!(" {:>12.3e}", opt.quantiles[n as usize].q50);
        }
        println!();
    }

    // Check the chance constraint at the solutions CSG actually returned:
    // median final design, its smoothed acceptance probability u(theta), and
    // the exact probability sqrt(theta).
    let hybrid = result
        .optimizer("csg_exact_hybrid")
        .expect("hybrid optimizer present");
    let mut finals: Vec<f64> = hybrid.final_thetas.iter().map(Design::scalar).collect();
    finals.sort_by(f64::total_cmp);
    let median_theta = finals[finals.len() / 2];
    let theta = Design::from(median_theta);
    let u = uniform_expectation(composed.inner().dist(), &mut |x| {
        composed.inner().j(&theta, &Sample::from(x))
    })?;
    println!("\nmedian CSG final design: theta = {median_theta:.5}");
    println!("smoothed constraint value u(theta) = {u:.5}  (target: at most 0.5)");
    println!(
        "exact probability P(X^2 <= theta) = {:.5}",
        median_theta.sqrt()
    );
    println!(
        "\nThe penalty parks the design where the *smoothed* probability hits\n\
         one half. The sigmoid slightly undercounts the probability at the\n\
         threshold, so that point sits a hair above the hard-constraint\n\
         answer of 0.25 — the usual price of penalty smoothing, shrinking as\n\
         the sharpness a grows."
    );
    Ok(())
}
