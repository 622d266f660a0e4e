//! Deterministic CSV and JSON writers for experiment outputs.
//!
//! Each optimizer gets one CSV of raw trace rows; the experiment gets one
//! `summary.json` with the configuration echo, per-optimizer quantile
//! series, and the steps-to-tolerance table. Floats are written in Rust's
//! shortest round-trip form, so identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{steps_map, ExperimentResult, IterationQuantiles};
use crate::trace::RunTrace;
use crate::types::Design;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "CSG_OUT_DIR";

/// Fixed CSV header, one column per trace field.
pub const CSV_HEADER: &str =
    "iteration,replication,optimizer,theta,abs_error,jhat,stationarity,grad_error,grad_evals,sample_draws,weight_time_ns";

/// Applies the `CSG_OUT_DIR` override and creates the directory.
///
/// A configuration without an output directory stays in memory — the
/// override only redirects writes that would happen anyway.
pub fn resolve_out_dir(configured: Option<&Path>) -> Result<Option<PathBuf>> {
    let Some(configured) = configured else {
        return Ok(None);
    };
    let dir = match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    };
    fs::create_dir_all(&dir)?;
    Ok(Some(dir))
}

/// Streaming writer for one optimizer's trace CSV.
pub struct CsvSink {
    writer: BufWriter<File>,
    path: PathBuf,
}

impl CsvSink {
    /// Creates `<dir>/<name>.csv` and writes the header.
    pub fn create(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(format!("{name}.csv"));
        let mut writer = BufWriter::new(File::create(&path)?);
        writeln!(writer, "{CSV_HEADER}")?;
        Ok(Self { writer, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends every row of one replication's trace.
    ///
    /// The error column is recomputed against `reference` so that problems
    /// whose optimum comes from the oracle (no stored `theta_star`) still
    /// fill it; without a reference it stays empty.
    pub fn write_trace(
        &mut self,
        replication: usize,
        optimizer: &str,
        trace: &RunTrace,
        reference: Option<&Design>,
    ) -> Result<()> {
        for row in &trace.rows {
            let abs_error = reference.map(|r| {
                row.theta
                    .as_slice()
                    .iter()
                    .zip(r.as_slice())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            });
            writeln!(
                self.writer,
                "{},{},{},{},{},{},{},{},{},{},{}",
                row.iteration,
                replication,
                optimizer,
                format_theta(&row.theta),
                format_opt(abs_error),
                format_opt(row.jhat),
                format_opt(row.stationarity),
                format_opt(row.grad_error),
                row.grad_evals,
                row.sample_draws,
                row.weight_time_ns,
            )?;
        }
        Ok(())
    }

    /// Flushes buffered rows to disk.
    pub fn finish(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

fn format_theta(theta: &Design) -> String {
    let coords = theta.as_slice();
    if coords.len() == 1 {
        format!("{}", coords[0])
    } else {
        coords
            .iter()
            .map(|c| format!("{c}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn format_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<Vec<f64>>,
    per_optimizer: BTreeMap<&'a str, OptimizerSummary<'a>>,
}

#[derive(Serialize)]
struct OptimizerSummary<'a> {
    replications_succeeded: usize,
    failed_replications: &'a [usize],
    quantiles: &'a [IterationQuantiles],
    steps_to_tolerance: BTreeMap<String, Option<u64>>,
}

/// Writes `<dir>/summary.json` for a completed experiment.
pub fn write_summary(dir: &Path, result: &ExperimentResult) -> Result<()> {
    let per_optimizer: BTreeMap<&str, OptimizerSummary<'_>> = result
        .optimizers
        .iter()
        .map(|opt| {
            (
                opt.name.as_str(),
                OptimizerSummary {
                    replications_succeeded: result.config.replications
                        - opt.failed_replications.len(),
                    failed_replications: &opt.failed_replications,
                    quantiles: &opt.quantiles,
                    steps_to_tolerance: steps_map(opt),
                },
            )
        })
        .collect();
    let summary = Summary {
        config: &result.config,
        reference: result.reference.as_ref().map(|r| r.as_slice().to_vec()),
        per_optimizer,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceRow;

    #[test]
    fn csv_rows_follow_the_fixed_schema() {
        let dir = std::env::temp_dir().join(format!("csg_csv_test_{}", std::process::id()));
        fs::create_dir_all(&dir).expect("temp dir");
        let mut sink = CsvSink::create(&dir, "demo").expect("sink");
        let mut trace = RunTrace::new();
        trace.push(TraceRow {
            iteration: 0,
            theta: Design::from(0.25),
            abs_error: None,
            jhat: None,
            stationarity: None,
            grad_error: None,
            ghat_norm: None,
            grad_evals: 0,
            sample_draws: 0,
            weight_time_ns: 0,
        });
        trace.push(TraceRow {
            iteration: 1,
            theta: Design::from(0.125),
            abs_error: Some(0.125),
            jhat: Some(0.5),
            stationarity: Some(0.25),
            grad_error: None,
            ghat_norm: Some(0.25),
            grad_evals: 1,
            sample_draws: 1,
            weight_time_ns: 0,
        });
        sink.write_trace(4, "demo", &trace, Some(&Design::from(0.0)))
            .expect("rows written");
        sink.finish().expect("flushed");
        let text = fs::read_to_string(sink.path()).expect("read back");
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER), "header is bit-exact");
        assert_eq!(
            lines.next(),
            Some("0,4,demo,0.25,0.25,,,,0,0,0"),
            "row 0 leaves step diagnostics empty and recomputes abs_error"
        );
        assert_eq!(
            lines.next(),
            Some("1,4,demo,0.125,0.125,0.5,0.25,,1,1,0"),
            "row 1 carries the step diagnostics"
        );
        assert_eq!(lines.next(), None);
        fs::remove_dir_all(&dir).ok();
    }
}
