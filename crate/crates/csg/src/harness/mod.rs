//! Multi-replication experiment harness: seeded runs, quantile aggregation,
//! CSV/JSON output, and the preconfigured figure studies.

pub mod config;
pub mod experiment;
pub mod figures;
pub mod output;
pub mod selftest;

pub use config::{
    ExperimentConfig, MethodSpec, OptimizerSpec, ProblemInstance, ProblemSpec, ScgdLaw, StartRegion,
};
pub use experiment::{
    quantile_type7, run_experiment, steps_to_tolerance, ExperimentResult, IterationQuantiles,
    OptimizerResult, QUANTILE_LEVELS,
};
pub use figures::{figure_config, FigureId};
pub use output::{resolve_out_dir, write_summary, CsvSink, CSV_HEADER, OUT_DIR_ENV};
pub use selftest::run_selftest;
