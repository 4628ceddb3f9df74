//! Replicated experiments: runs, raw records, summaries and file export.
//!
//! Raw records are written as `records.csv` (or `.json`) with the columns
//! `instance,algorithm,local_search,seed,best_cost,iterations,wall_ms`, one
//! line per run ordered by instance and replication. Summaries go to
//! `summary.csv`, per-run traces to `traces/<record>.trace.csv`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{run, DriverError, RunConfig, TraceRow};
use crate::instance::{Cost, Instance, InstanceError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Instance {
        path: PathBuf,
        #[source]
        source: InstanceError,
    },
    #[error("{path}: {message}")]
    InvalidInstance { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Run(#[from] DriverError),
}

impl HarnessError {
    /// Process exit code: 2 for instance problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Instance { .. } | HarnessError::InvalidInstance { .. } => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, err: impl fmt::Display) -> HarnessError {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExportFormat {
    #[default]
    Csv,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(HarnessError::Config(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub instances: Vec<PathBuf>,
    /// Template for every run; replication `r` uses seed `config.seed + r`.
    pub config: RunConfig<f64>,
    pub runs: usize,
    pub output: Option<PathBuf>,
    pub format: ExportFormat,
    /// Concurrent replications; 0 uses every core.
    pub jobs: usize,
    pub write_traces: bool,
}

impl ExperimentSpec {
    pub fn new(instances: Vec<PathBuf>, config: RunConfig<f64>, runs: usize) -> Self {
        ExperimentSpec {
            instances,
            config,
            runs,
            output: None,
            format: ExportFormat::Csv,
            jobs: 1,
            write_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub algorithm: String,
    pub local_search: String,
    pub seed: u64,
    pub best_cost: Cost,
    pub iterations: u64,
    pub wall_ms: u64,
}

impl RunRecord {
    /// File name of this run's trace inside the `traces` directory.
    pub fn trace_file_name(&self) -> String {
        format!(
            "{}_{}_{}_{}.trace.csv",
            self.instance, self.algorithm, self.local_search, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: String,
    pub algorithm: String,
    pub local_search: String,
    pub runs: usize,
    pub mean_cost: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std_dev: f64,
    pub best_cost: Cost,
    pub mean_iterations: f64,
    pub mean_wall_ms: f64,
    pub single_sample: bool,
}

/// Groups records by (instance, algorithm, local search) in order of first
/// appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(&RunRecord, Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key =
            |g: &RunRecord| g.instance == r.instance && g.algorithm == r.algorithm && g.local_search == r.local_search;
        match groups.iter_mut().find(|(head, _)| key(head)) {
            Some((_, members)) => members.push(r),
            None => groups.push((r, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(head, members)| {
            let k = members.len() as f64;
            let mean = members.iter().map(|r| r.best_cost as f64).sum::<f64>() / k;
            let std_dev = if members.len() > 1 {
                let ss: f64 = members.iter().map(|r| (r.best_cost as f64 - mean).powi(2)).sum();
                (ss / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                instance: head.instance.clone(),
                algorithm: head.algorithm.clone(),
                local_search: head.local_search.clone(),
                runs: members.len(),
                mean_cost: mean,
                std_dev,
                best_cost: members.iter().map(|r| r.best_cost).min().unwrap_or_default(),
                mean_iterations: members.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
                mean_wall_ms: members.iter().map(|r| r.wall_ms as f64).sum::<f64>() / k,
                single_sample: members.len() == 1,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    /// Trace of each record, same order.
    pub traces: Vec<Vec<TraceRow>>,
}

/// Loads an instance and rejects it when its precedences are cyclic or its
/// diagonal is non-zero.
pub fn load_instance(path: &Path) -> Result<Instance, HarnessError> {
    let instance = Instance::load(path).map_err(|source| HarnessError::Instance {
        path: path.to_path_buf(),
        source,
    })?;
    let report = instance.validate();
    if let Some(v) = report.errors().next() {
        return Err(HarnessError::InvalidInstance {
            path: path.to_path_buf(),
            message: v.to_string(),
        });
    }
    Ok(instance)
}

/// Runs every replication, writes the outputs (when an output directory
/// is set) and returns records, summaries and traces.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome, HarnessError> {
    if spec.runs == 0 {
        return Err(HarnessError::Config("at least one run is required".into()));
    }
    if spec.instances.is_empty() {
        return Err(HarnessError::Config("no instance given".into()));
    }
    if spec.config.budget.is_zero() {
        return Err(HarnessError::Config("budget must be positive".into()));
    }
    spec.config.validate()?;

    let instances = spec
        .instances
        .iter()
        .map(|p| load_instance(p))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..spec.runs).map(move |r| (i, r)))
        .collect();
    let execute = |&(i, r): &(usize, usize)| -> Result<(RunRecord, Vec<TraceRow>), DriverError> {
        let instance = &instances[i];
        let mut config = spec.config.clone();
        config.seed = spec.config.seed.wrapping_add(r as u64);
        let report = run(&config, instance)?;
        let record = RunRecord {
            instance: instance.name().to_string(),
            algorithm: config.algorithm.to_string(),
            local_search: config.local_search.to_string(),
            seed: config.seed,
            best_cost: report.best_cost().ok_or(DriverError::NoFeasibleRoute)?,
            iterations: report.iterations,
            wall_ms: report.wall_time.as_millis() as u64,
        };
        Ok((record, report.trace))
    };
    let results: Vec<_> = if spec.jobs == 1 {
        jobs.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(execute).collect())
    };
    let (records, traces): (Vec<_>, Vec<_>) = results.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().unzip();
    let outcome = ExperimentOutcome {
        summary: summarize(&records),
        records,
        traces,
    };
    if let Some(dir) = &spec.output {
        write_outcome(dir, spec.format, spec.write_traces, &outcome)?;
    }
    Ok(outcome)
}

fn write_outcome(
    dir: &Path,
    format: ExportFormat,
    traces: bool,
    outcome: &ExperimentOutcome,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let records = dir.join(format!("records.{}", format.extension()));
    let summary = dir.join(format!("summary.{}", format.extension()));
    match format {
        ExportFormat::Csv => {
            write_records_csv(&records, &outcome.records)?;
            write_summary_csv(&summary, &outcome.summary)?;
        }
        ExportFormat::Json => {
            write_json(&records, &outcome.records)?;
            write_json(&summary, &outcome.summary)?;
        }
    }
    if traces {
        let trace_dir = dir.join("traces");
        fs::create_dir_all(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;
        for (record, rows) in outcome.records.iter().zip(&outcome.traces) {
            write_trace_csv(&trace_dir.join(record.trace_file_name()), rows)?;
        }
    }
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| HarnessError::io(path, e))?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| HarnessError::io(path, e))
}

pub fn write_records_csv(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    write_csv(path, records)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    read_csv(path)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    write_csv(path, rows)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    read_csv(path)
}

#[derive(Serialize, Deserialize)]
struct TraceLine {
    iteration: u64,
    best_cost: Cost,
    active_cost: Cost,
    temperature: f64,
}

/// Trace columns: `iteration,best_cost,active_cost,temperature`.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<(), HarnessError> {
    let lines: Vec<TraceLine> = rows
        .iter()
        .map(|r| TraceLine {
            iteration: r.iteration,
            best_cost: r.best_cost,
            active_cost: r.active_cost,
            temperature: r.temperature,
        })
        .collect();
    write_csv(path, &lines)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>, HarnessError> {
    Ok(read_csv::<TraceLine>(path)?
        .into_iter()
        .map(|l| TraceRow {
            iteration: l.iteration,
            best_cost: l.best_cost,
            active_cost: l.active_cost,
            temperature: l.temperature,
        })
        .collect())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(cost: Cost) -> RunRecord {
        RunRecord {
            instance: "R".into(),
            algorithm: "eacs".into(),
            local_search: "sop3".into(),
            seed: 0,
            best_cost: cost,
            iterations: 10,
            wall_ms: 5,
        }
    }

    #[test]
    fn constant_costs() {
        let rows = summarize(&[record(4216), record(4216), record(4216)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_cost, 4216.0);
        assert_eq!(rows[0].std_dev, 0.0);
        assert_eq!(rows[0].best_cost, 4216);
        assert!(!rows[0].single_sample);
    }

    #[test]
    fn two_costs() {
        let rows = summarize(&[record(10), record(20)]);
        assert_eq!(rows[0].mean_cost, 15.0);
        assert!((rows[0].std_dev - 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(rows[0].best_cost, 10);
    }

    #[test]
    fn single_record() {
        let rows = summarize(&[record(7)]);
        assert_eq!(rows[0].mean_cost, 7.0);
        assert_eq!(rows[0].best_cost, 7);
        assert_eq!(rows[0].std_dev, 0.0);
        assert!(rows[0].single_sample);
    }

    #[test]
    fn groups_keep_first_appearance_order() {
        let mut other = record(3);
        other.instance = "A".into();
        let rows = summarize(&[record(1), other, record(2)]);
        assert_eq!(rows.iter().map(|r| r.instance.as_str()).collect::<Vec<_>>(), ["R", "A"]);
        assert_eq!(rows[0].runs, 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 1);
        let err = HarnessError::InvalidInstance {
            path: "x".into(),
            message: "cycle".into(),
        };
        assert_eq!(err.exit_code(), 2);
    }
}
