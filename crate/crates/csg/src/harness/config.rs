//! Experiment configuration: the JSON document accepted by the `run`
//! subcommand, plus problem construction from the named benchmark set.
//!
//! A configuration names a problem, a list of optimizers, and the
//! replication plan. Example:
//!
//! ```json
//! {
//!   "problem": "quadratic1d",
//!   "optimizers": [
//!     { "method": "sg", "schedule": { "constant": { "c": 1.0 } } },
//!     { "method": "csg", "strategy": "exact",
//!       "schedule": { "constant": { "c": 1.0 } } }
//!   ],
//!   "replications": 100,
//!   "iterations": 1000,
//!   "base_seed": 7,
//!   "outputs": "out/demo"
//! }
//! ```
//!
//! `start_region` (optional) restricts the uniform starting points to a
//! sub-box of the problem domain; `tolerances` (optional, default
//! `[0.1, 0.01]`) selects the steps-to-tolerance columns; `outputs`
//! (optional) is the directory for CSV and summary files — absent, the
//! experiment runs in memory only.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CsgError, Result};
use crate::metric::JointMetric;
use crate::problems::{
    make_chance_penalty, make_nested_cosine, make_quadratic_1d, ComposedObjective, ObjectiveRef,
    Problem,
};
use crate::schedule::StepSchedule;
use crate::types::BoxDomain;
use crate::weights::{WeightMode, WeightStrategy};

/// Default slot count for the SAG baseline.
fn default_sag_slots() -> usize {
    crate::baselines::SAG_DEFAULT_SLOTS
}

fn default_chance_lambda() -> f64 {
    3.0
}

fn default_chance_sharpness() -> f64 {
    25.0
}

fn one() -> f64 {
    1.0
}

fn default_tolerances() -> Vec<f64> {
    vec![0.1, 0.01]
}

/// A benchmark problem addressable by name in a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSpec {
    Quadratic1d,
    NestedCosine,
    ChancePenalty {
        #[serde(default = "default_chance_lambda")]
        lambda: f64,
        #[serde(default = "default_chance_sharpness")]
        a: f64,
    },
}

impl ProblemSpec {
    /// Instantiates the named problem.
    pub fn build(&self) -> Result<ProblemInstance> {
        Ok(match self {
            ProblemSpec::Quadratic1d => ProblemInstance::Plain(Box::new(make_quadratic_1d())),
            ProblemSpec::NestedCosine => ProblemInstance::Composed(Box::new(make_nested_cosine())),
            ProblemSpec::ChancePenalty { lambda, a } => {
                ProblemInstance::Composed(Box::new(make_chance_penalty(*lambda, *a)?))
            }
        })
    }
}

/// A constructed benchmark problem of either objective kind.
#[derive(Debug)]
pub enum ProblemInstance {
    Plain(Box<Problem>),
    Composed(Box<ComposedObjective>),
}

impl ProblemInstance {
    pub fn objective(&self) -> ObjectiveRef<'_> {
        match self {
            ProblemInstance::Plain(p) => ObjectiveRef::Plain(p),
            ProblemInstance::Composed(c) => ObjectiveRef::Composed(c),
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        match self {
            ProblemInstance::Plain(p) => p.domain(),
            ProblemInstance::Composed(c) => c.domain(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ProblemInstance::Plain(p) => p.name(),
            ProblemInstance::Composed(c) => c.name(),
        }
    }

    pub fn plain(&self) -> Option<&Problem> {
        match self {
            ProblemInstance::Plain(p) => Some(p),
            ProblemInstance::Composed(_) => None,
        }
    }

    pub fn composed(&self) -> Option<&ComposedObjective> {
        match self {
            ProblemInstance::Plain(_) => None,
            ProblemInstance::Composed(c) => Some(c),
        }
    }

    /// The problem's stored default step schedule, when it has one.
    pub fn default_schedule(&self) -> Option<StepSchedule> {
        match self {
            ProblemInstance::Plain(_) => None,
            ProblemInstance::Composed(c) => c.default_schedule().cloned(),
        }
    }
}

/// Which published stepsize law an SCGD-family optimizer follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScgdLaw {
    /// `α_k ∝ k^{-3/4}`, `β_k ∝ k^{-1/2}` — general smooth objectives.
    General,
    /// `α_k ∝ k^{-1}`, `β_k ∝ k^{-4/5}` — strongly convex objectives.
    StronglyConvex,
}

/// One optimizer in the experiment, tagged by `method`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    /// Continuous stochastic gradient with one of the four weight
    /// strategies. `schedule` falls back to the problem's default when
    /// omitted; `metric` defaults to unit weights with 1-norms; `mode`
    /// defaults to the incremental engine. `record_timings` fills the
    /// `weight_time_ns` column at the cost of byte-identical reruns.
    Csg {
        strategy: WeightStrategy,
        #[serde(default)]
        schedule: Option<StepSchedule>,
        #[serde(default)]
        metric: Option<JointMetric>,
        #[serde(default)]
        mode: Option<WeightMode>,
        #[serde(default)]
        record_timings: bool,
    },
    /// Projected stochastic gradient descent (plain problems only).
    Sg { schedule: StepSchedule },
    /// Stochastic average gradients over a fixed sample set (plain problems
    /// only).
    Sag {
        schedule: StepSchedule,
        #[serde(default = "default_sag_slots")]
        slots: usize,
    },
    /// Basic SCGD (composed problems only); defaults to the general law.
    Scgd {
        #[serde(default)]
        stepsizes: Option<ScgdLaw>,
        #[serde(default = "one")]
        c_alpha: f64,
        #[serde(default = "one")]
        c_beta: f64,
    },
    /// Accelerated SCGD (composed problems only); defaults to the strongly
    /// convex law.
    Ascgd {
        #[serde(default)]
        stepsizes: Option<ScgdLaw>,
        #[serde(default = "one")]
        c_alpha: f64,
        #[serde(default = "one")]
        c_beta: f64,
    },
}

impl MethodSpec {
    /// The optimizer name used in file names and the CSV `optimizer` column
    /// when the entry's `name` field does not override it.
    pub fn default_name(&self) -> String {
        match self {
            MethodSpec::Csg { strategy, .. } => format!("csg_{}", strategy.label()),
            MethodSpec::Sg { .. } => "sg".to_string(),
            MethodSpec::Sag { .. } => "sag".to_string(),
            MethodSpec::Scgd { .. } => "scgd".to_string(),
            MethodSpec::Ascgd { .. } => "ascgd".to_string(),
        }
    }
}

/// One named optimizer entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub method: MethodSpec,
}

impl OptimizerSpec {
    pub fn new(method: MethodSpec) -> Self {
        Self { name: None, method }
    }

    pub fn named(name: impl Into<String>, method: MethodSpec) -> Self {
        Self {
            name: Some(name.into()),
            method,
        }
    }

    pub fn name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.method.default_name())
    }
}

/// A sub-box of the problem domain for uniform starting points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StartRegion {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo],
            upper: vec![hi],
        }
    }

    /// Converts to a box, checking containment in `domain`.
    pub fn to_box_within(&self, domain: &BoxDomain) -> Result<BoxDomain> {
        let region = BoxDomain::new(self.lower.clone(), self.upper.clone())?;
        if region.dim() != domain.dim() {
            return Err(CsgError::Config(format!(
                "start region has dimension {}, problem domain has {}",
                region.dim(),
                domain.dim()
            )));
        }
        let inside = region
            .lower()
            .iter()
            .zip(domain.lower())
            .all(|(&r, &d)| r >= d)
            && region
                .upper()
                .iter()
                .zip(domain.upper())
                .all(|(&r, &d)| r <= d);
        if !inside {
            return Err(CsgError::Config(format!(
                "start region [{:?}, {:?}] is not contained in the problem domain",
                region.lower(),
                region.upper()
            )));
        }
        Ok(region)
    }
}

/// The full experiment plan: problem, optimizers, replications, outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Label echoed into the summary; defaults to empty.
    #[serde(default)]
    pub name: String,
    pub problem: ProblemSpec,
    pub optimizers: Vec<OptimizerSpec>,
    pub replications: usize,
    pub iterations: u64,
    pub base_seed: u64,
    /// Starting points are uniform in this region (default: whole domain).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_region: Option<StartRegion>,
    /// Output directory for CSV traces and the JSON summary. Absent, no
    /// files are written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    /// Tolerances for the steps-to-tolerance table.
    #[serde(default = "default_tolerances")]
    pub tolerances: Vec<f64>,
}

impl ExperimentConfig {
    /// Parses a configuration from a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural checks that do not need the problem instantiated.
    pub fn validate_shape(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(CsgError::Config(
                "replications must be at least 1".to_string(),
            ));
        }
        if self.optimizers.is_empty() {
            return Err(CsgError::Config(
                "at least one optimizer is required".to_string(),
            ));
        }
        let mut names: Vec<String> = self.optimizers.iter().map(OptimizerSpec::name).collect();
        names.sort();
        for pair in names.windows(2) {
            if pair[0] == pair[1] {
                return Err(CsgError::Config(format!(
                    "duplicate optimizer name '{}'; set distinct 'name' fields",
                    pair[0]
                )));
            }
        }
        for &tol in &self.tolerances {
            if !tol.is_finite() || tol <= 0.0 {
                return Err(CsgError::Config(format!(
                    "tolerances must be finite and positive, got {tol}"
                )));
            }
        }
        Ok(())
    }
}
