//! Preconfigured experiment plans behind the `reproduce` subcommand.
//!
//! Each plan regenerates the data of one benchmark study at desk scale
//! (1000 replications by default; scale down with `--reps` for quick runs):
//!
//! - `fig1` — β-interpolation on the quadratic problem, constant τ = 1:
//!   inexact hybrid β ∈ {1, 1.5, 2} between the empirical and exact-hybrid
//!   envelopes;
//! - `fig2` — four stepsize laws × {sg, csg-empirical, csg-exact-hybrid,
//!   csg-exact} on the quadratic problem;
//! - `fig3` — nested cosine: aSCGD vs. three CSG variants, constant 1/30;
//! - `fig4` — the same race with a finer steps-to-tolerance table;
//! - `fig5` — chance-constraint penalty: SCGD vs. three CSG variants,
//!   τ_n = 1/n.

use std::path::PathBuf;

use crate::error::{CsgError, Result};
use crate::harness::config::{
    ExperimentConfig, MethodSpec, OptimizerSpec, ProblemSpec, StartRegion,
};
use crate::schedule::StepSchedule;
use crate::weights::WeightStrategy;

/// Identifier of a reproducible figure study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl FigureId {
    pub const ALL: [FigureId; 5] = [
        FigureId::Fig1,
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureId::Fig1 => "fig1",
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                CsgError::Config(format!(
                    "unknown figure id '{s}'; expected one of fig1..fig5"
                ))
            })
    }
}

impl std::str::FromStr for FigureId {
    type Err = CsgError;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl std::fmt::Display for FigureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn csg(strategy: WeightStrategy, schedule: StepSchedule) -> OptimizerSpec {
    OptimizerSpec::new(MethodSpec::Csg {
        strategy,
        schedule: Some(schedule),
        metric: None,
        mode: None,
        record_timings: false,
    })
}

fn csg_named(name: &str, strategy: WeightStrategy, schedule: StepSchedule) -> OptimizerSpec {
    OptimizerSpec::named(
        name,
        MethodSpec::Csg {
            strategy,
            schedule: Some(schedule),
            metric: None,
            mode: None,
            record_timings: false,
        },
    )
}

/// Builds the experiment plan of one figure.
///
/// `replications` defaults to the desk-scale 1000, `iterations` to the
/// figure's published budget, `out` to `out/<fig-id>`.
pub fn figure_config(
    id: FigureId,
    replications: Option<usize>,
    iterations: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig> {
    let replications = replications.unwrap_or(1000);
    let outputs = Some(out.unwrap_or_else(|| PathBuf::from("out").join(id.as_str())));
    let tau1 = StepSchedule::constant(1.0)?;
    let config = match id {
        FigureId::Fig1 => ExperimentConfig {
            name: "fig1_beta_interpolation".to_string(),
            problem: ProblemSpec::Quadratic1d,
            optimizers: vec![
                csg(WeightStrategy::Empirical, tau1.clone()),
                csg(WeightStrategy::InexactHybrid { beta: 1.0 }, tau1.clone()),
                csg(WeightStrategy::InexactHybrid { beta: 1.5 }, tau1.clone()),
                csg(WeightStrategy::InexactHybrid { beta: 2.0 }, tau1.clone()),
                csg(WeightStrategy::ExactHybrid, tau1),
            ],
            replications,
            iterations: iterations.unwrap_or(1000),
            base_seed: 101,
            start_region: None,
            outputs,
            tolerances: vec![0.1, 0.01],
        },
        FigureId::Fig2 => {
            let schedules = [
                ("n1", StepSchedule::power(1.0, 1.0)?),
                ("n23", StepSchedule::power(1.0, 2.0 / 3.0)?),
                ("n13", StepSchedule::power(1.0, 1.0 / 3.0)?),
                ("const1", tau1),
            ];
            let mut optimizers = Vec::new();
            for (label, schedule) in &schedules {
                optimizers.push(OptimizerSpec::named(
                    format!("sg_{label}"),
                    MethodSpec::Sg {
                        schedule: schedule.clone(),
                    },
                ));
                optimizers.push(csg_named(
                    &format!("csg_empirical_{label}"),
                    WeightStrategy::Empirical,
                    schedule.clone(),
                ));
                optimizers.push(csg_named(
                    &format!("csg_exact_hybrid_{label}"),
                    WeightStrategy::ExactHybrid,
                    schedule.clone(),
                ));
                optimizers.push(csg_named(
                    &format!("csg_exact_{label}"),
                    WeightStrategy::Exact,
                    schedule.clone(),
                ));
            }
            ExperimentConfig {
                name: "fig2_stepsize_grid".to_string(),
                problem: ProblemSpec::Quadratic1d,
                optimizers,
                replications,
                iterations: iterations.unwrap_or(1000),
                base_seed: 202,
                start_region: None,
                outputs,
                tolerances: vec![0.1, 0.01],
            }
        }
        FigureId::Fig3 | FigureId::Fig4 => {
            let tau = StepSchedule::constant(1.0 / 30.0)?;
            ExperimentConfig {
                name: if id == FigureId::Fig3 {
                    "fig3_nested_cosine_quantiles".to_string()
                } else {
                    "fig4_nested_cosine_steps".to_string()
                },
                problem: ProblemSpec::NestedCosine,
                optimizers: vec![
                    OptimizerSpec::new(MethodSpec::Ascgd {
                        stepsizes: None,
                        c_alpha: 1.0,
                        c_beta: 1.0,
                    }),
                    csg(WeightStrategy::Empirical, tau.clone()),
                    csg(WeightStrategy::InexactHybrid { beta: 1.5 }, tau.clone()),
                    csg(WeightStrategy::ExactHybrid, tau),
                ],
                replications,
                iterations: iterations.unwrap_or(5000),
                base_seed: 303,
                start_region: Some(StartRegion::interval(5.5, 9.5)),
                outputs,
                tolerances: if id == FigureId::Fig3 {
                    vec![0.1, 0.01]
                } else {
                    vec![0.1, 0.01, 0.001]
                },
            }
        }
        FigureId::Fig5 => {
            let tau = StepSchedule::power(1.0, 1.0)?;
            ExperimentConfig {
                name: "fig5_chance_penalty".to_string(),
                problem: ProblemSpec::ChancePenalty {
                    lambda: 3.0,
                    a: 25.0,
                },
                optimizers: vec![
                    OptimizerSpec::new(MethodSpec::Scgd {
                        stepsizes: None,
                        c_alpha: 1.0,
                        c_beta: 1.0,
                    }),
                    csg(WeightStrategy::Empirical, tau.clone()),
                    csg(WeightStrategy::InexactHybrid { beta: 1.5 }, tau.clone()),
                    csg(WeightStrategy::ExactHybrid, tau),
                ],
                replications,
                iterations: iterations.unwrap_or(2000),
                base_seed: 505,
                start_region: None,
                outputs,
                tolerances: vec![0.1, 0.01],
            }
        }
    };
    config.validate_shape()?;
    Ok(config)
}
