//! Fast invariant checks behind the `selftest` subcommand.
//!
//! Each check prints one `ok`/`FAILED` line; the whole battery runs in
//! seconds and exercises the load-bearing identities: weight normalization,
//! bitwise agreement of the naive and incremental weight paths, the β = 1
//! collapse of the inexact hybrid onto the empirical weights, the metric
//! extremes (stochastic-gradient one-hot and pure sample-space Voronoi),
//! run determinism and feasibility, quantile coherence of a small
//! experiment, and finite-difference validation of the bundled problems.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution;
use crate::error::{CsgError, Result};
use crate::harness::config::{ExperimentConfig, MethodSpec, OptimizerSpec, ProblemSpec};
use crate::harness::experiment::run_experiment;
use crate::metric::JointMetric;
use crate::oracle::theta_opt_oracle;
use crate::problems::{make_chance_penalty, make_nested_cosine, make_quadratic_1d, ObjectiveRef};
use crate::schedule::StepSchedule;
use crate::types::{BoxDomain, Design, EvaluationRecord, History, Sample};
use crate::weights::{
    compute_weights, xspace_voronoi_measures_1d, WeightEngine, WeightMode, WeightStrategy,
};
use crate::{run, StoppingRule};

const STRATEGIES: [WeightStrategy; 4] = [
    WeightStrategy::Exact,
    WeightStrategy::Empirical,
    WeightStrategy::ExactHybrid,
    WeightStrategy::InexactHybrid { beta: 1.5 },
];

/// One named consistency check: returns a detail line on success.
type Check = fn() -> Result<String>;

/// Runs the whole check battery, printing one line per check.
///
/// Returns an error (after running everything) if any check failed.
pub fn run_selftest() -> Result<()> {
    let checks: [(&str, Check); 8] = [
        ("weights normalize", check_weights_normalize),
        ("naive matches incremental", check_naive_matches_incremental),
        ("beta=1 equals empirical", check_beta_one_is_empirical),
        ("metric extremes", check_metric_extremes),
        ("runs are deterministic", check_runs_deterministic),
        ("iterates stay feasible", check_iterates_feasible),
        ("experiment quantiles coherent", check_quantiles_coherent),
        ("problem gradients match FD", check_problem_gradients),
    ];
    let mut failures = 0usize;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("ok      {name}: {detail}"),
            Err(err) => {
                failures += 1;
                println!("FAILED  {name}: {err}");
            }
        }
    }
    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(CsgError::invalid_state(format!(
            "selftest: {failures} check(s) failed"
        )))
    }
}

/// Appends one synthetic evaluation (plus `extra_pool` unevaluated draws)
/// to `history`, returning the design the evaluation used.
fn push_random_step(history: &mut History, rng: &mut ChaCha8Rng, extra_pool: usize) -> Vec<f64> {
    let theta = vec![rng.gen_range(0.0..1.0)];
    let x = vec![rng.gen_range(0.0..1.0)];
    let idx = history.push_pool(Sample(x.clone()));
    history.push_record(
        EvaluationRecord {
            theta: Design(theta.clone()),
            x: Sample(x),
            grad: vec![rng.gen_range(-1.0..1.0)],
            jval: rng.gen_range(-1.0..1.0),
        },
        idx,
    );
    for _ in 0..extra_pool {
        history.push_pool(Sample(vec![rng.gen_range(0.0..1.0)]));
    }
    theta
}

fn unit_uniform() -> Result<Distribution> {
    Ok(Distribution::uniform(BoxDomain::interval(0.0, 1.0)?))
}

fn check_weights_normalize() -> Result<String> {
    let dist = unit_uniform()?;
    let metric = JointMetric::default();
    let mut checked = 0usize;
    for seed in [11u64, 12, 13] {
        for strategy in &STRATEGIES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut history = History::new();
            let extra = usize::from(strategy.uses_pool());
            let mut theta = Vec::new();
            for _ in 0..40 {
                theta = push_random_step(&mut history, &mut rng, extra);
            }
            let w = compute_weights(strategy, &history, &metric, &theta, &dist)?;
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CsgError::invalid_state(format!(
                    "{} weights sum to {sum} over 40 records",
                    strategy.label()
                )));
            }
            if w.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
                return Err(CsgError::invalid_state(format!(
                    "{} produced a weight outside [0, 1]",
                    strategy.label()
                )));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} random histories, all weight vectors in the simplex"
    ))
}

fn check_naive_matches_incremental() -> Result<String> {
    let dist = unit_uniform()?;
    let metric = JointMetric::default();
    let steps = 60usize;
    for strategy in &STRATEGIES {
        let mut naive = WeightEngine::new(strategy.clone(), WeightMode::Naive)?;
        let mut incremental = WeightEngine::new(strategy.clone(), WeightMode::Incremental)?;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut history = History::new();
        let extra = if strategy.uses_pool() { 2 } else { 0 };
        for step in 0..steps {
            let theta = push_random_step(&mut history, &mut rng, extra);
            let a = naive.compute(&history, &metric, &theta, &dist)?;
            let b = incremental.compute(&history, &metric, &theta, &dist)?;
            for (k, (x, y)) in a.iter().zip(b.iter()).enumerate() {
                if x.to_bits() != y.to_bits() {
                    return Err(CsgError::invalid_state(format!(
                        "{} weights diverge at step {} record {k}: naive {x} vs incremental {y}",
                        strategy.label(),
                        step + 1
                    )));
                }
            }
        }
    }
    Ok(format!(
        "4 strategies bitwise identical over {steps}-step histories"
    ))
}

fn check_beta_one_is_empirical() -> Result<String> {
    let dist = unit_uniform()?;
    let metric = JointMetric::default();
    let steps = 50usize;
    // β = 1 keeps the pool the same size as the record list, so both
    // strategies see identical inputs and must agree bitwise.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut history = History::new();
    for step in 0..steps {
        let theta = push_random_step(&mut history, &mut rng, 0);
        let emp = compute_weights(&WeightStrategy::Empirical, &history, &metric, &theta, &dist)?;
        let ih = compute_weights(
            &WeightStrategy::InexactHybrid { beta: 1.0 },
            &history,
            &metric,
            &theta,
            &dist,
        )?;
        for (k, (x, y)) in emp.iter().zip(ih.iter()).enumerate() {
            if x.to_bits() != y.to_bits() {
                return Err(CsgError::invalid_state(format!(
                    "weights diverge at step {} record {k}: empirical {x} vs beta=1 {y}",
                    step + 1
                )));
            }
        }
    }
    Ok(format!("bitwise equal along a {steps}-step history"))
}

fn check_metric_extremes() -> Result<String> {
    let dist = unit_uniform()?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut history = History::new();
    let mut theta = Vec::new();
    for _ in 0..30 {
        theta = push_random_step(&mut history, &mut rng, 0);
    }
    // Dominant design distance: every cell but the current record's collapses.
    let sg_metric = JointMetric::new(1e8, 1.0)?;
    let w = compute_weights(&WeightStrategy::Exact, &history, &sg_metric, &theta, &dist)?;
    let (argmax, max) =
        w.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (k, &a)| {
                if a > acc.1 {
                    (k, a)
                } else {
                    acc
                }
            },
        );
    let nearest = history
        .records()
        .iter()
        .enumerate()
        .min_by(|(_, r), (_, s)| {
            let dr = (r.theta.0[0] - theta[0]).abs();
            let ds = (s.theta.0[0] - theta[0]).abs();
            dr.total_cmp(&ds)
        })
        .map(|(k, _)| k)
        .expect("nonempty history");
    if argmax != nearest || max < 1.0 - 1e-9 {
        return Err(CsgError::invalid_state(format!(
            "a1/a2 = 1e8 gave weight {max} to record {argmax}, nearest-design record is {nearest}"
        )));
    }
    // Vanishing design distance: weights are the sample-space Voronoi measures.
    let x_metric = JointMetric::new(0.0, 1.0)?;
    let w = compute_weights(&WeightStrategy::Exact, &history, &x_metric, &theta, &dist)?;
    let centers: Vec<Sample> = history.records().iter().map(|r| r.x.clone()).collect();
    let measures = xspace_voronoi_measures_1d(&centers, &dist)?;
    for (k, (a, m)) in w.iter().zip(measures.iter()).enumerate() {
        if a.to_bits() != m.to_bits() {
            return Err(CsgError::invalid_state(format!(
                "a1 = 0 weight {a} differs from x-Voronoi measure {m} at record {k}"
            )));
        }
    }
    Ok("a1/a2 = 1e8 one-hot on newest design; a1 = 0 equals x-Voronoi".to_string())
}

fn check_runs_deterministic() -> Result<String> {
    let problem = make_quadratic_1d();
    let schedule = StepSchedule::constant(1.0)?;
    let run_once = || {
        run(
            ObjectiveRef::Plain(&problem),
            WeightStrategy::ExactHybrid,
            &schedule,
            &JointMetric::default(),
            &StoppingRule::max_iters(40),
            9001,
        )
        .map_err(|boxed| boxed.error)
    };
    let a = run_once()?;
    let b = run_once()?;
    for (row_a, row_b) in a.rows.iter().zip(&b.rows) {
        let same_theta = row_a
            .theta
            .0
            .iter()
            .zip(&row_b.theta.0)
            .all(|(x, y)| x.to_bits() == y.to_bits());
        let same_jhat = match (row_a.jhat, row_b.jhat) {
            (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
            (None, None) => true,
            _ => false,
        };
        if !same_theta || !same_jhat {
            return Err(CsgError::invalid_state(format!(
                "reruns diverge at iteration {}",
                row_a.iteration
            )));
        }
    }
    Ok("two seeded 40-step runs are bitwise identical".to_string())
}

fn check_iterates_feasible() -> Result<String> {
    let problem = make_quadratic_1d();
    let trace = run(
        ObjectiveRef::Plain(&problem),
        WeightStrategy::Empirical,
        &StepSchedule::constant(5.0)?,
        &JointMetric::default(),
        &StoppingRule::max_iters(60),
        4242,
    )
    .map_err(|boxed| boxed.error)?;
    for row in &trace.rows {
        if !problem.domain().contains(&row.theta.0) {
            return Err(CsgError::invalid_state(format!(
                "iterate {:?} left the box at iteration {}",
                row.theta.0, row.iteration
            )));
        }
    }
    Ok(format!(
        "{} iterates of an oversized-step run stay in the box",
        trace.rows.len()
    ))
}

fn check_quantiles_coherent() -> Result<String> {
    let schedule = StepSchedule::constant(1.0)?;
    let config = ExperimentConfig {
        name: "selftest".to_string(),
        problem: ProblemSpec::Quadratic1d,
        optimizers: vec![
            OptimizerSpec::new(MethodSpec::Sg {
                schedule: schedule.clone(),
            }),
            OptimizerSpec::new(MethodSpec::Csg {
                strategy: WeightStrategy::Empirical,
                schedule: Some(schedule),
                metric: None,
                mode: None,
                record_timings: false,
            }),
        ],
        replications: 6,
        iterations: 40,
        base_seed: 31,
        start_region: None,
        outputs: None,
        tolerances: vec![0.1],
    };
    let result = run_experiment(&config)?;
    for opt in &result.optimizers {
        for q in &opt.quantiles {
            let levels = [q.q10, q.q25, q.q50, q.q75, q.q90];
            if levels.windows(2).any(|w| w[0] > w[1]) {
                return Err(CsgError::invalid_state(format!(
                    "{} quantiles out of order at iteration {}: {levels:?}",
                    opt.name, q.iteration
                )));
            }
        }
    }
    Ok("6-replication experiment has ordered error quantiles".to_string())
}

fn fd_check(
    label: &str,
    value: &dyn Fn(f64) -> f64,
    grad: &dyn Fn(f64) -> f64,
    points: &[f64],
    tol: f64,
) -> Result<()> {
    let h = 1e-6;
    for &t in points {
        let fd = (value(t + h) - value(t - h)) / (2.0 * h);
        let g = grad(t);
        if (fd - g).abs() > tol {
            return Err(CsgError::invalid_state(format!(
                "{label}: gradient {g} vs central difference {fd} at theta = {t}"
            )));
        }
    }
    Ok(())
}

fn check_problem_gradients() -> Result<String> {
    let quadratic = make_quadratic_1d();
    let x = Sample(vec![0.37]);
    fd_check(
        "quadratic integrand",
        &|t| quadratic.j(&Design(vec![t]), &x),
        &|t| quadratic.grad_j(&Design(vec![t]), &x)[0],
        &[0.1, 0.5, 0.9],
        1e-5,
    )?;

    let nested = make_nested_cosine();
    let y = Sample(vec![0.6]);
    fd_check(
        "nested cosine inner integrand",
        &|t| nested.inner().j(&Design(vec![t]), &x),
        &|t| nested.inner().grad_j(&Design(vec![t]), &x)[0],
        &[1.0, 5.0, 8.5],
        1e-5,
    )?;
    fd_check(
        "nested cosine outer integrand",
        &|t| nested.outer(&Design(vec![t]), &y, 2.0),
        &|t| nested.outer_dtheta(&Design(vec![t]), &y, 2.0)[0],
        &[1.0, 5.0, 8.5],
        1e-5,
    )?;

    let chance = make_chance_penalty(3.0, 25.0)?;
    // The max(0, ·) kink sits where 1 + x(θ - 1) = 0; the probe points keep
    // clear of it so the one-sided subgradient matches the difference
    // quotient.
    fd_check(
        "chance penalty inner integrand",
        &|t| chance.inner().j(&Design(vec![t]), &x),
        &|t| chance.inner().grad_j(&Design(vec![t]), &x)[0],
        &[0.05, 0.3, 0.8],
        1e-4,
    )?;

    let oracle = theta_opt_oracle(ObjectiveRef::Composed(&nested), 1e-5)?;
    let expected = std::f64::consts::PI * std::f64::consts::PI / 2.0;
    if (oracle.0[0] - expected).abs() > 1e-4 {
        return Err(CsgError::invalid_state(format!(
            "nested cosine oracle minimizer {} is not pi^2/2 = {expected}",
            oracle.0[0]
        )));
    }
    Ok("3 integrands pass central differences; nested minimizer is pi^2/2".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for (name, check) in [
            (
                "weights_normalize",
                check_weights_normalize as fn() -> Result<String>,
            ),
            ("naive_matches_incremental", check_naive_matches_incremental),
            ("beta_one_is_empirical", check_beta_one_is_empirical),
            ("metric_extremes", check_metric_extremes),
            ("runs_deterministic", check_runs_deterministic),
            ("iterates_feasible", check_iterates_feasible),
            ("quantiles_coherent", check_quantiles_coherent),
            ("problem_gradients", check_problem_gradients),
        ] {
            check().unwrap_or_else(|err| panic!("selftest check {name} failed: {err}"));
        }
    }
}
