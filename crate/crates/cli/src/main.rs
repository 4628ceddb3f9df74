//! `sop`: run the colony solvers on SOP instances and export the results.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use sop_core::harness::{run_experiment, ExperimentSpec, ExportFormat, HarnessError};
use sop_core::{Algorithm, Budget, ColonyParams, LocalSearchKind, RunConfigF64};

#[derive(Debug, Parser)]
#[command(
    name = "sop",
    version,
    about = "Ant colony solvers for the sequential ordering problem"
)]
struct Args {
    /// Instance file or glob pattern (repeatable).
    #[arg(long, required = true)]
    instance: Vec<String>,
    /// acs, acs-sa, eacs or eacs-sa.
    #[arg(long, default_value = "eacs")]
    algorithm: String,
    /// none, sop3 or sop3-sa.
    #[arg(long, default_value = "sop3")]
    local_search: String,
    /// Wall-clock budget per run, in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Iteration budget per run.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Seed of the first run; run r uses seed + r.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Concurrent runs (0 = all cores).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    ants: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    /// Defaults to (n - 20) / n.
    #[arg(long)]
    q0: Option<f64>,
    #[arg(long, default_value_t = 0.9999)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 0.99)]
    lambda_ls: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma_ls: f64,
    #[arg(long, default_value_t = 0.2)]
    ls_gate: f64,
    #[arg(long)]
    candidate_size: Option<usize>,
    /// Directory for records, summaries and traces.
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Also write one trace file per run.
    #[arg(long)]
    trace: bool,
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, HarnessError> {
    let mut paths = Vec::new();
    for pattern in patterns {
        let matches = glob::glob(pattern).map_err(|e| HarnessError::Config(format!("{pattern}: {e}")))?;
        let mut found: Vec<PathBuf> = matches.filter_map(Result::ok).collect();
        if found.is_empty() {
            // let the loader report the missing file
            found.push(PathBuf::from(pattern));
        }
        found.sort();
        paths.extend(found);
    }
    Ok(paths)
}

fn build_spec(args: &Args) -> Result<ExperimentSpec, HarnessError> {
    let algorithm: Algorithm = args.algorithm.parse()?;
    let local_search: LocalSearchKind = args.local_search.parse()?;
    let time_limit = match args.time_limit {
        Some(t) if !(t.is_finite() && t > 0.0) => {
            return Err(HarnessError::Config(format!("time limit {t} must be positive")))
        }
        t => t.map(Duration::from_secs_f64),
    };
    let budget = Budget {
        iterations: args.iterations,
        time_limit,
    };
    if budget.iterations.is_none() && budget.time_limit.is_none() {
        return Err(HarnessError::Config("set --time-limit and/or --iterations".into()));
    }
    let mut config = RunConfigF64::new(algorithm, local_search, budget, args.seed);
    config.annealing.lambda = args.lambda;
    config.annealing.gamma = args.gamma;
    config.annealing.lambda_ls = args.lambda_ls;
    config.annealing.gamma_ls = args.gamma_ls;
    config.ls_gate = args.ls_gate;

    let overrides = args.ants.is_some()
        || args.beta.is_some()
        || args.rho.is_some()
        || args.psi.is_some()
        || args.q0.is_some()
        || args.candidate_size.is_some();
    let instances = expand(&args.instance)?;
    if overrides {
        // q0 defaults depend on n, so colony overrides need one size
        let sizes: Vec<usize> = instances
            .iter()
            .map(|p| sop_core::harness::load_instance(p).map(|i| i.len()))
            .collect::<Result<_, _>>()?;
        if args.q0.is_none() && sizes.windows(2).any(|w| w[0] != w[1]) {
            return Err(HarnessError::Config(
                "colony overrides without --q0 need instances of equal size".into(),
            ));
        }
        let mut colony = ColonyParams::defaults_for(sizes.first().copied().unwrap_or(0));
        if let Some(v) = args.ants {
            colony.ants = v;
        }
        if let Some(v) = args.beta {
            colony.beta = v;
        }
        if let Some(v) = args.rho {
            colony.rho = v;
        }
        if let Some(v) = args.psi {
            colony.psi = v;
        }
        if let Some(v) = args.q0 {
            colony.q0 = v;
        }
        if let Some(v) = args.candidate_size {
            colony.candidate_size = v;
        }
        config.colony = Some(colony);
    }

    let mut spec = ExperimentSpec::new(instances, config, args.runs);
    spec.output = args.output.clone();
    spec.format = args.format.parse::<ExportFormat>()?;
    spec.jobs = args.jobs;
    spec.write_traces = args.trace;
    if spec.write_traces && spec.output.is_none() {
        return Err(HarnessError::Config("--trace needs --output".into()));
    }
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = build_spec(&args).and_then(|spec| run_experiment(&spec));
    match result {
        Ok(outcome) => {
            println!("instance,algorithm,local_search,runs,mean,std,best,mean_iterations");
            for row in &outcome.summary {
                println!(
                    "{},{},{},{},{:.1},{:.1},{},{:.1}",
                    row.instance,
                    row.algorithm,
                    row.local_search,
                    row.runs,
                    row.mean_cost,
                    row.std_dev,
                    row.best_cost,
                    row.mean_iterations
                );
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
