//! Replicated optimizer races with deterministic seeding and quantile
//! aggregation.
//!
//! Replication `r` derives its seed as `base_seed + r`. Stream 0 of that
//! seed draws the starting point, which all optimizers of the replication
//! share; optimizer `i` consumes stream `i + 1`. Replications therefore
//! commute: batches run in parallel, results are written back in replication
//! order, and rerunning a configuration reproduces every output byte.
//!
//! Aggregation keeps only the per-iteration absolute errors
//! `‖θ_n - θ_ref‖₂` in memory; full traces are streamed to the CSV writers
//! batch by batch. The reference point is the problem's analytic optimum
//! when it has one, otherwise the deterministic quadrature oracle's optimum.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{SagRunner, ScgdRunner, ScgdSchedule, ScgdVariant, SgRunner};
use crate::error::{CsgError, Result};
use crate::harness::config::{
    ExperimentConfig, MethodSpec, OptimizerSpec, ProblemInstance, ScgdLaw,
};
use crate::harness::output::{self, CsvSink};
use crate::metric::JointMetric;
use crate::optimizer::{draw_start, run_loop, ComposedCsgRunner, CsgRunner, StoppingRule};
use crate::oracle::theta_opt_oracle;
use crate::schedule::StepSchedule;
use crate::trace::RunTrace;
use crate::types::{BoxDomain, Design};
use crate::weights::{WeightMode, WeightStrategy};

/// Quantile levels reported per iteration for the error bands.
pub const QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Replications per parallel batch; bounds peak trace memory.
const BATCH_SIZE: usize = 16;

/// Oracle grid resolution used when a problem has no analytic optimum.
const REFERENCE_RESOLUTION: f64 = 1e-6;

/// Minimum fraction of replications that must succeed per optimizer.
const SUCCESS_FRACTION: f64 = 0.9;

/// Linear-interpolation (type 7) quantile of `values` at level `q`.
///
/// `values` must be sorted ascending and nonempty; `q` in `[0, 1]`.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!(
        (0.0..=1.0).contains(&q),
        "quantile level {q} outside [0, 1]"
    );
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// The five reported quantiles of one iteration's error distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationQuantiles {
    pub iteration: u64,
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
}

impl IterationQuantiles {
    fn from_sorted(iteration: u64, sorted: &[f64]) -> Self {
        Self {
            iteration,
            q10: quantile_type7(sorted, 0.10),
            q25: quantile_type7(sorted, 0.25),
            q50: quantile_type7(sorted, 0.50),
            q75: quantile_type7(sorted, 0.75),
            q90: quantile_type7(sorted, 0.90),
        }
    }

    pub fn levels(&self) -> [f64; 5] {
        [self.q10, self.q25, self.q50, self.q75, self.q90]
    }
}

/// Smallest iteration at which at least `confidence` of the replications
/// have error strictly below `tolerance`; `None` if never.
///
/// `abs_error[r][n]` is replication `r`'s error after `n` steps (row 0 is
/// the starting point, so a return of 0 means the starts already qualify).
pub fn steps_to_tolerance(abs_error: &[Vec<f64>], tolerance: f64, confidence: f64) -> Option<u64> {
    if abs_error.is_empty() {
        return None;
    }
    let total = abs_error.len();
    let rows = abs_error[0].len();
    for n in 0..rows {
        let count = abs_error.iter().filter(|rep| rep[n] < tolerance).count();
        if count as f64 / total as f64 >= confidence {
            return Some(n as u64);
        }
    }
    None
}

/// Aggregated outcome for one optimizer.
#[derive(Clone, Debug)]
pub struct OptimizerResult {
    pub name: String,
    /// Per-iteration error quantiles over the successful replications;
    /// empty when the problem has no reference point.
    pub quantiles: Vec<IterationQuantiles>,
    /// `(tolerance, steps)` rows of the steps-to-tolerance table.
    pub steps_to_tolerance: Vec<(f64, Option<u64>)>,
    /// `abs_error[r][n]` for successful replications, in replication order.
    pub abs_error: Vec<Vec<f64>>,
    /// Final iterate of each successful replication, in replication order.
    pub final_thetas: Vec<Design>,
    /// Replication indices whose runs failed.
    pub failed_replications: Vec<usize>,
}

/// A completed experiment.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Reference point used for the error columns, when one exists.
    pub reference: Option<Design>,
    pub optimizers: Vec<OptimizerResult>,
}

impl ExperimentResult {
    pub fn optimizer(&self, name: &str) -> Option<&OptimizerResult> {
        self.optimizers.iter().find(|o| o.name == name)
    }
}

/// A fully resolved optimizer: schedule fallbacks applied, compatibility
/// with the problem checked.
struct ResolvedOptimizer {
    name: String,
    method: ResolvedMethod,
}

enum ResolvedMethod {
    Csg {
        strategy: WeightStrategy,
        schedule: StepSchedule,
        metric: JointMetric,
        mode: WeightMode,
        record_timings: bool,
    },
    Sg {
        schedule: StepSchedule,
    },
    Sag {
        schedule: StepSchedule,
        slots: usize,
    },
    Scgd {
        variant: ScgdVariant,
        schedule: ScgdSchedule,
    },
}

fn resolve_optimizer(
    spec: &OptimizerSpec,
    instance: &ProblemInstance,
) -> Result<ResolvedOptimizer> {
    let name = spec.name();
    let method = match &spec.method {
        MethodSpec::Csg {
            strategy,
            schedule,
            metric,
            mode,
            record_timings,
        } => {
            strategy.validate()?;
            let schedule = schedule
                .clone()
                .or_else(|| instance.default_schedule())
                .ok_or_else(|| {
                    CsgError::Config(format!(
                        "optimizer '{name}': problem '{}' has no default schedule; set one",
                        instance.name()
                    ))
                })?;
            schedule.validate()?;
            let metric = metric.clone().unwrap_or_default();
            metric.validate()?;
            if strategy.needs_cdf() {
                let has = match instance {
                    ProblemInstance::Plain(p) => p.dist().has_cdf(),
                    ProblemInstance::Composed(c) => {
                        c.inner().dist().has_cdf() && c.y_dist().has_cdf()
                    }
                };
                if !has {
                    return Err(CsgError::Config(format!(
                        "optimizer '{name}': the {} strategy needs distributions with cdfs",
                        strategy.label()
                    )));
                }
            }
            ResolvedMethod::Csg {
                strategy: strategy.clone(),
                schedule,
                metric,
                mode: mode.unwrap_or(WeightMode::Incremental),
                record_timings: *record_timings,
            }
        }
        MethodSpec::Sg { schedule } => {
            schedule.validate()?;
            if instance.plain().is_none() {
                return Err(CsgError::Config(format!(
                    "optimizer '{name}': sg runs on plain expectation problems only"
                )));
            }
            ResolvedMethod::Sg {
                schedule: schedule.clone(),
            }
        }
        MethodSpec::Sag { schedule, slots } => {
            schedule.validate()?;
            if instance.plain().is_none() {
                return Err(CsgError::Config(format!(
                    "optimizer '{name}': sag runs on plain expectation problems only"
                )));
            }
            if *slots == 0 {
                return Err(CsgError::Config(format!(
                    "optimizer '{name}': sag needs at least one sample slot"
                )));
            }
            ResolvedMethod::Sag {
                schedule: schedule.clone(),
                slots: *slots,
            }
        }
        MethodSpec::Scgd {
            stepsizes,
            c_alpha,
            c_beta,
        } => resolve_scgd(
            &name,
            instance,
            ScgdVariant::Basic,
            *stepsizes,
            *c_alpha,
            *c_beta,
        )?,
        MethodSpec::Ascgd {
            stepsizes,
            c_alpha,
            c_beta,
        } => resolve_scgd(
            &name,
            instance,
            ScgdVariant::Accelerated,
            *stepsizes,
            *c_alpha,
            *c_beta,
        )?,
    };
    Ok(ResolvedOptimizer { name, method })
}

fn resolve_scgd(
    name: &str,
    instance: &ProblemInstance,
    variant: ScgdVariant,
    stepsizes: Option<ScgdLaw>,
    c_alpha: f64,
    c_beta: f64,
) -> Result<ResolvedMethod> {
    if instance.composed().is_none() {
        return Err(CsgError::Config(format!(
            "optimizer '{name}': the scgd family runs on composed problems only"
        )));
    }
    let law = stepsizes.unwrap_or(match variant {
        ScgdVariant::Basic => ScgdLaw::General,
        ScgdVariant::Accelerated => ScgdLaw::StronglyConvex,
    });
    let schedule = match law {
        ScgdLaw::General => ScgdSchedule::general(),
        ScgdLaw::StronglyConvex => ScgdSchedule::strongly_convex(),
    }
    .with_constants(c_alpha, c_beta);
    schedule.validate()?;
    Ok(ResolvedMethod::Scgd { variant, schedule })
}

/// Runs one optimizer for one replication.
fn run_single(
    method: &ResolvedMethod,
    instance: &ProblemInstance,
    theta0: Design,
    iterations: u64,
    seed: u64,
    stream: u64,
) -> std::result::Result<RunTrace, Box<crate::trace::RunFailure>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let stopping = StoppingRule::max_iters(iterations);
    let build_err = |error: CsgError| {
        Box::new(crate::trace::RunFailure {
            error,
            partial: RunTrace::new(),
        })
    };
    match method {
        ResolvedMethod::Csg {
            strategy,
            schedule,
            metric,
            mode,
            record_timings,
        } => match instance {
            ProblemInstance::Plain(problem) => {
                let mut runner = CsgRunner::new(
                    problem,
                    theta0,
                    strategy.clone(),
                    *mode,
                    metric.clone(),
                    schedule.clone(),
                )
                .map_err(build_err)?;
                if *record_timings {
                    runner.enable_timing();
                }
                run_loop(&mut runner, &stopping, &mut rng)
            }
            ProblemInstance::Composed(composed) => {
                let mut runner = ComposedCsgRunner::new(
                    composed,
                    theta0,
                    strategy.clone(),
                    *mode,
                    metric.clone(),
                    schedule.clone(),
                )
                .map_err(build_err)?;
                if *record_timings {
                    runner.enable_timing();
                }
                run_loop(&mut runner, &stopping, &mut rng)
            }
        },
        ResolvedMethod::Sg { schedule } => {
            let problem = instance.plain().expect("validated as plain");
            let mut runner = SgRunner::new(problem, theta0, schedule.clone()).map_err(build_err)?;
            run_loop(&mut runner, &stopping, &mut rng)
        }
        ResolvedMethod::Sag { schedule, slots } => {
            let problem = instance.plain().expect("validated as plain");
            let mut runner = SagRunner::new(problem, theta0, *slots, schedule.clone(), &mut rng)
                .map_err(build_err)?;
            run_loop(&mut runner, &stopping, &mut rng)
        }
        ResolvedMethod::Scgd { variant, schedule } => {
            let composed = instance.composed().expect("validated as composed");
            let mut runner =
                ScgdRunner::new(composed, theta0, *variant, schedule.clone()).map_err(build_err)?;
            run_loop(&mut runner, &stopping, &mut rng)
        }
    }
}

/// Runs the full experiment: all replications of all optimizers, quantile
/// aggregation, and (when `outputs` is configured) CSV and summary files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate_shape()?;
    let instance = config.problem.build()?;
    let optimizers: Vec<ResolvedOptimizer> = config
        .optimizers
        .iter()
        .map(|spec| resolve_optimizer(spec, &instance))
        .collect::<Result<_>>()?;
    let start_box: BoxDomain = match &config.start_region {
        Some(region) => region.to_box_within(instance.domain())?,
        None => instance.domain().clone(),
    };
    let reference: Option<Design> = match instance.objective().theta_star() {
        Some(t) => Some(t.clone()),
        None => theta_opt_oracle(instance.objective(), REFERENCE_RESOLUTION).ok(),
    };

    let out_dir = output::resolve_out_dir(config.outputs.as_deref())?;
    let mut sinks: Vec<Option<CsvSink>> = match &out_dir {
        Some(dir) => optimizers
            .iter()
            .map(|o| CsvSink::create(dir, &o.name).map(Some))
            .collect::<Result<_>>()?,
        None => optimizers.iter().map(|_| None).collect(),
    };

    let mut abs_error: Vec<Vec<Vec<f64>>> = vec![Vec::new(); optimizers.len()];
    let mut final_thetas: Vec<Vec<Design>> = vec![Vec::new(); optimizers.len()];
    let mut failures: Vec<Vec<(usize, String)>> = vec![Vec::new(); optimizers.len()];

    let reps: Vec<usize> = (0..config.replications).collect();
    for batch in reps.chunks(BATCH_SIZE) {
        // One replication = shared starting point + one seeded run per
        // optimizer. Batches compute in parallel; writes stay in order.
        let batch_results: Vec<Vec<std::result::Result<RunTrace, Box<crate::trace::RunFailure>>>> =
            batch
                .par_iter()
                .map(|&rep| {
                    let seed = config.base_seed + rep as u64;
                    let theta0 = draw_start(&start_box, seed);
                    optimizers
                        .iter()
                        .enumerate()
                        .map(|(i, opt)| {
                            run_single(
                                &opt.method,
                                &instance,
                                theta0.clone(),
                                config.iterations,
                                seed,
                                i as u64 + 1,
                            )
                        })
                        .collect()
                })
                .collect();

        for (&rep, results) in batch.iter().zip(batch_results) {
            for (i, outcome) in results.into_iter().enumerate() {
                match outcome {
                    Ok(trace) => {
                        debug_assert_eq!(
                            trace.len() as u64,
                            config.iterations + 1,
                            "a completed run has one row per iteration plus the start"
                        );
                        if let Some(sink) = &mut sinks[i] {
                            sink.write_trace(rep, &optimizers[i].name, &trace, reference.as_ref())?;
                        }
                        if let Some(r) = &reference {
                            abs_error[i].push(
                                trace
                                    .rows
                                    .iter()
                                    .map(|row| error_to(&row.theta, r))
                                    .collect(),
                            );
                        }
                        if let Some(theta) = trace.final_theta() {
                            final_thetas[i].push(theta.clone());
                        }
                    }
                    Err(failure) => {
                        failures[i].push((rep, failure.error.to_string()));
                    }
                }
            }
        }
    }

    let mut results = Vec::with_capacity(optimizers.len());
    for (i, opt) in optimizers.iter().enumerate() {
        let failed = &failures[i];
        let succeeded = config.replications - failed.len();
        if (succeeded as f64) < SUCCESS_FRACTION * config.replications as f64 {
            let detail = failed
                .iter()
                .take(3)
                .map(|(rep, msg)| format!("replication {rep}: {msg}"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(CsgError::InvalidState(format!(
                "optimizer '{}': only {succeeded}/{} replications succeeded ({detail})",
                opt.name, config.replications
            )));
        }
        let errors = std::mem::take(&mut abs_error[i]);
        let quantiles = aggregate_quantiles(&errors);
        let steps: Vec<(f64, Option<u64>)> = config
            .tolerances
            .iter()
            .map(|&tol| (tol, steps_to_tolerance(&errors, tol, SUCCESS_FRACTION)))
            .collect();
        results.push(OptimizerResult {
            name: opt.name.clone(),
            quantiles,
            steps_to_tolerance: steps,
            abs_error: errors,
            final_thetas: std::mem::take(&mut final_thetas[i]),
            failed_replications: failed.iter().map(|(rep, _)| *rep).collect(),
        });
    }

    let result = ExperimentResult {
        config: config.clone(),
        reference,
        optimizers: results,
    };
    if let Some(dir) = &out_dir {
        for sink in sinks.iter_mut().flatten() {
            sink.finish()?;
        }
        output::write_summary(dir, &result)?;
    }
    Ok(result)
}

fn error_to(theta: &Design, reference: &Design) -> f64 {
    theta
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Per-iteration quantiles of the error matrix (empty input → empty output).
fn aggregate_quantiles(abs_error: &[Vec<f64>]) -> Vec<IterationQuantiles> {
    let Some(first) = abs_error.first() else {
        return Vec::new();
    };
    let rows = first.len();
    let mut out = Vec::with_capacity(rows);
    let mut column = Vec::with_capacity(abs_error.len());
    for n in 0..rows {
        column.clear();
        column.extend(abs_error.iter().map(|rep| rep[n]));
        column.sort_by(f64::total_cmp);
        out.push(IterationQuantiles::from_sorted(n as u64, &column));
    }
    out
}

/// Steps-to-tolerance rows keyed by tolerance, for the JSON summary.
pub fn steps_map(result: &OptimizerResult) -> BTreeMap<String, Option<u64>> {
    result
        .steps_to_tolerance
        .iter()
        .map(|(tol, n)| (format!("{tol}"), *n))
        .collect()
}
