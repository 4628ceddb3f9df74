//! Full algorithm runs: colony loop, optional local search, annealing and
//! traces.
//!
//! Random draws of one run come from a single ChaCha8 stream seeded with
//! `RunConfig::seed`, in this order:
//!
//! 1. colony temperature calibration (SA variants without a forced `T0`),
//! 2. per ant: construction, then local search,
//! 3. per iteration: active-solution selection, then the greedy-update coin
//!    (SA variants only).
//!
//! Decisions whose outcome is certain draw nothing, so a run with `T0 = 0`
//! and a greedy-update probability of 1 consumes the same stream as the
//! plain variant.

mod exact;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::annealing::{random_route_deltas, select_active_solution, AnnealerState, AnnealingError};
use crate::colony::{construct_solution, AntState, ColonyError, ColonyParams, ConstructionRule, PheromoneModel};
use crate::instance::{Cost, Instance};
use crate::local_search::{run_local_search, AcceptancePolicy, LsAnnealer, SearchContext, SearchOptions, StackInit};
use crate::scalar::Scalar;
use crate::solution::Route;

pub use exact::{brute_force_optimum, DEFAULT_EXACT_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Colony(#[from] ColonyError),
    #[error(transparent)]
    Annealing(#[from] AnnealingError),
    #[error("instance has {n} nodes, exhaustive search is limited to {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("instance has no feasible route")]
    NoFeasibleRoute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Acs,
    AcsSa,
    Eacs,
    EacsSa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Acs, Algorithm::AcsSa, Algorithm::Eacs, Algorithm::EacsSa];

    pub fn rule(self) -> ConstructionRule {
        match self {
            Algorithm::Acs | Algorithm::AcsSa => ConstructionRule::Acs,
            Algorithm::Eacs | Algorithm::EacsSa => ConstructionRule::Eacs,
        }
    }

    pub fn is_annealing(self) -> bool {
        matches!(self, Algorithm::AcsSa | Algorithm::EacsSa)
    }

    pub fn is_eacs(self) -> bool {
        self.rule() == ConstructionRule::Eacs
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Acs => "acs",
            Algorithm::AcsSa => "acs-sa",
            Algorithm::Eacs => "eacs",
            Algorithm::EacsSa => "eacs-sa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = DriverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| DriverError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LocalSearchKind {
    None,
    Sop3,
    Sop3Sa,
}

impl LocalSearchKind {
    pub const ALL: [LocalSearchKind; 3] = [LocalSearchKind::None, LocalSearchKind::Sop3, LocalSearchKind::Sop3Sa];

    pub fn label(self) -> &'static str {
        match self {
            LocalSearchKind::None => "none",
            LocalSearchKind::Sop3 => "sop3",
            LocalSearchKind::Sop3Sa => "sop3-sa",
        }
    }
}

impl fmt::Display for LocalSearchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LocalSearchKind {
    type Err = DriverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LocalSearchKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| DriverError::Config(format!("unknown local search {s:?}")))
    }
}

/// Stopping rule; the run ends at whichever bound is hit first. The clock
/// is checked once per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Budget {
    pub iterations: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl Budget {
    pub fn iterations(k: u64) -> Budget {
        Budget {
            iterations: Some(k),
            time_limit: None,
        }
    }

    pub fn time(limit: Duration) -> Budget {
        Budget {
            iterations: None,
            time_limit: Some(limit),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.iterations == Some(0) || self.time_limit == Some(Duration::ZERO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealingParams<F> {
    /// Colony cooling factor.
    pub lambda: F,
    /// Colony initial worse-acceptance probability.
    pub gamma: F,
    pub lambda_ls: F,
    pub gamma_ls: F,
    /// Random routes drawn to calibrate the colony temperature.
    pub colony_sample: usize,
    /// Worsening moves collected before the local-search temperature is set.
    pub ls_sample: usize,
    /// Skips colony calibration and starts from this temperature.
    pub colony_t0: Option<F>,
    /// Skips local-search calibration and starts from this temperature.
    pub ls_t0: Option<F>,
    /// Probability of accepting an exchange as good as the best so far.
    pub ls_tie_probability: F,
    /// Probability that an SA iteration reinforces the global best instead
    /// of the active solution.
    pub greedy_update_probability: F,
}

impl<F: Scalar> Default for AnnealingParams<F> {
    fn default() -> Self {
        AnnealingParams {
            lambda: F::of(0.9999),
            gamma: F::of(0.1),
            lambda_ls: F::of(0.99),
            gamma_ls: F::of(0.1),
            colony_sample: 1000,
            ls_sample: 100_000,
            colony_t0: None,
            ls_t0: None,
            ls_tie_probability: F::of(0.1),
            greedy_update_probability: F::of(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<F> {
    pub algorithm: Algorithm,
    pub local_search: LocalSearchKind,
    pub budget: Budget,
    pub seed: u64,
    /// `None` picks the defaults for the instance size.
    pub colony: Option<ColonyParams<F>>,
    pub annealing: AnnealingParams<F>,
    pub search: SearchOptions,
    /// `None` seeds the don't-push stack with all nodes for ACS variants
    /// and out-of-order nodes for EACS variants.
    pub stack_init: Option<StackInit>,
    /// EACS variants only search routes within `(1 + ls_gate)` of the best.
    pub ls_gate: F,
    /// Keep one trace row every `trace_every` iterations (0 disables).
    pub trace_every: u64,
}

impl<F: Scalar> RunConfig<F> {
    pub fn new(algorithm: Algorithm, local_search: LocalSearchKind, budget: Budget, seed: u64) -> Self {
        RunConfig {
            algorithm,
            local_search,
            budget,
            seed,
            colony: None,
            annealing: AnnealingParams::default(),
            search: SearchOptions::default(),
            stack_init: None,
            ls_gate: F::of(0.2),
            trace_every: 1,
        }
    }

    pub fn colony_params(&self, n: usize) -> ColonyParams<F> {
        self.colony.unwrap_or_else(|| ColonyParams::defaults_for(n))
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if self.budget.iterations.is_none() && self.budget.time_limit.is_none() {
            return Err(DriverError::Config("no iteration or time bound".into()));
        }
        if let Some(colony) = &self.colony {
            colony.validate()?;
        }
        let a = &self.annealing;
        let unit_open = |x: F| x > F::zero() && x < F::one();
        let unit_closed = |x: F| x >= F::zero() && x <= F::one();
        for (name, value) in [
            ("lambda", a.lambda),
            ("gamma", a.gamma),
            ("lambda-ls", a.lambda_ls),
            ("gamma-ls", a.gamma_ls),
        ] {
            if !unit_open(value) {
                return Err(DriverError::Config(format!("{name} = {value} must lie in (0, 1)")));
            }
        }
        for (name, value) in [
            ("greedy update probability", a.greedy_update_probability),
            ("tie probability", a.ls_tie_probability),
        ] {
            if !unit_closed(value) {
                return Err(DriverError::Config(format!("{name} = {value} must lie in [0, 1]")));
            }
        }
        if a.colony_t0.is_some_and(|t| !(t >= F::zero() && t.is_finite()))
            || a.ls_t0.is_some_and(|t| !(t >= F::zero() && t.is_finite()))
        {
            return Err(DriverError::Config(
                "forced temperatures must be finite and >= 0".into(),
            ));
        }
        if a.colony_sample < 2 || a.ls_sample == 0 {
            return Err(DriverError::Config("calibration samples are too small".into()));
        }
        if !(self.ls_gate >= F::zero() && self.ls_gate.is_finite()) {
            return Err(DriverError::Config(format!("ls gate = {} must be >= 0", self.ls_gate)));
        }
        if self.search.or_limit == Some(0) {
            return Err(DriverError::Config("or limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub best_cost: Cost,
    /// Cost of the active solution; equals `best_cost` for plain variants.
    pub active_cost: Cost,
    /// Colony temperature after cooling; 0 for plain variants.
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub best: Option<Route>,
    pub iterations: u64,
    pub trace: Vec<TraceRow>,
    pub wall_time: Duration,
    /// Worse candidates that replaced the active solution.
    pub worse_acceptances: u64,
    /// Colony temperature the run started from (SA variants).
    pub colony_t0: Option<f64>,
}

impl RunReport {
    pub fn best_cost(&self) -> Option<Cost> {
        self.best.as_ref().map(Route::cost)
    }

    /// Equality ignoring the wall time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        self.best == other.best
            && self.iterations == other.iterations
            && self.trace == other.trace
            && self.worse_acceptances == other.worse_acceptances
            && self.colony_t0 == other.colony_t0
    }
}

/// Whether the EACS gate lets a route of `candidate_cost` into local
/// search: `candidate_cost <= (1 + gate) * best_cost`.
pub fn ls_gate_check<F: Scalar>(candidate_cost: Cost, best_cost: Cost, gate: F) -> bool {
    F::of(candidate_cost as f64) <= (F::one() + gate) * F::of(best_cost as f64)
}

/// `true` with probability `p`, drawing only when `0 < p < 1`.
fn coin<F: Scalar, R: rand::Rng + ?Sized>(p: F, rng: &mut R) -> bool {
    if p >= F::one() {
        true
    } else if p <= F::zero() {
        false
    } else {
        F::sample_unit(rng) < p
    }
}

/// Runs one configuration on one instance.
pub fn run<F: Scalar>(config: &RunConfig<F>, instance: &Instance) -> Result<RunReport, DriverError> {
    config.validate()?;
    let started = Instant::now();
    let mut report = RunReport {
        best: None,
        iterations: 0,
        trace: Vec::new(),
        wall_time: Duration::ZERO,
        worse_acceptances: 0,
        colony_t0: None,
    };
    if config.budget.is_zero() {
        return Ok(report);
    }

    let n = instance.len();
    let params = config.colony_params(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = PheromoneModel::for_instance(instance, &params);
    let mut ant = AntState::new(instance);
    let rule = config.algorithm.rule();
    let sa = &config.annealing;

    let mut colony_annealer = if config.algorithm.is_annealing() {
        let mut state = AnnealerState::new(sa.lambda, sa.gamma, sa.colony_sample)?;
        match sa.colony_t0 {
            Some(t0) => state.force_temperature(t0),
            None => state.calibrate(&random_route_deltas::<F, _>(instance, sa.colony_sample, &mut rng))?,
        }
        report.colony_t0 = Some(state.initial_temperature().to_f64_lossy());
        Some(state)
    } else {
        None
    };

    let mut policy = match config.local_search {
        LocalSearchKind::Sop3Sa => {
            let mut state = AnnealerState::new(sa.lambda_ls, sa.gamma_ls, sa.ls_sample)?;
            if let Some(t0) = sa.ls_t0 {
                state.force_temperature(t0);
            }
            AcceptancePolicy::Annealing(LsAnnealer {
                state,
                tie_probability: sa.ls_tie_probability,
            })
        }
        _ => AcceptancePolicy::Greedy,
    };
    let search = SearchOptions {
        stack_init: config.stack_init.unwrap_or(if config.algorithm.is_eacs() {
            StackInit::OutOfOrder
        } else {
            StackInit::All
        }),
        ..config.search
    };
    let mut ctx = SearchContext::new(n);

    let mut best: Option<Route> = None;
    let mut active: Option<Route> = None;
    let mut batch: Vec<Route> = Vec::with_capacity(params.ants);

    loop {
        if config.budget.iterations.is_some_and(|k| report.iterations >= k)
            || config.budget.time_limit.is_some_and(|t| started.elapsed() >= t)
        {
            break;
        }

        batch.clear();
        for _ in 0..params.ants {
            let mut route = construct_solution(rule, &mut model, &params, instance, best.as_ref(), &mut ant, &mut rng)?;
            if config.local_search != LocalSearchKind::None {
                let gated = config.algorithm.is_eacs()
                    && best
                        .as_ref()
                        .is_some_and(|b| !ls_gate_check(route.cost(), b.cost(), config.ls_gate));
                if !gated {
                    route = run_local_search(route, best.as_ref(), instance, &mut policy, &search, &mut ctx, &mut rng);
                }
            }
            if best.as_ref().is_none_or(|b| route.cost() < b.cost()) {
                best = Some(route.clone());
            }
            batch.push(route);
        }
        let best_route = best.as_ref().expect("at least one ant ran");

        let (active_cost, temperature) = match colony_annealer.as_mut() {
            Some(state) => {
                let selection = select_active_solution(active.take(), &batch, state, &mut rng);
                report.worse_acceptances += selection.worse_accepted as u64;
                let current = active.insert(selection.active);
                let target = if coin(sa.greedy_update_probability, &mut rng) {
                    best_route
                } else {
                    &*current
                };
                let active_cost = current.cost();
                // zero-length routes carry no usable deposit
                if target.cost() > 0 {
                    model.global_update(target, params.rho)?;
                }
                state.cool();
                (active_cost, state.temperature().to_f64_lossy())
            }
            None => {
                if best_route.cost() > 0 {
                    model.global_update(best_route, params.rho)?;
                }
                (best_route.cost(), 0.0)
            }
        };
        report.iterations += 1;
        if config.trace_every > 0 && (report.iterations - 1).is_multiple_of(config.trace_every) {
            report.trace.push(TraceRow {
                iteration: report.iterations,
                best_cost: best_route.cost(),
                active_cost,
                temperature,
            });
        }
    }

    report.best = best;
    report.wall_time = started.elapsed();
    Ok(report)
}
