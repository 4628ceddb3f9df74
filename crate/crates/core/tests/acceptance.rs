//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Benchmark criteria read instance files from `$SOPLIB_DIR` (SOPLIB2006
//! `R.*` instances) and `$TSPLIB_SOP_DIR` (TSPLIB SOP instances). Set
//! `ACCEPTANCE_FILTER` to a comma separated list of criterion ids to run a
//! subset.

mod common;

use std::collections::BTreeSet;
use std::env;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sop_core::annealing::{initial_temperature, metropolis_accept};
use sop_core::colony::{construct_solution, AntState};
use sop_core::driver::DEFAULT_EXACT_LIMIT;
use sop_core::harness::{load_instance, run_experiment, ExperimentSpec};
use sop_core::local_search::{
    backward_search, exchange_delta, explored_moves, forward_search, Direction, SearchContext,
};
use sop_core::solution::{evaluate_cost, is_feasible, random_feasible};
use sop_core::{
    brute_force_optimum, run, AcceptancePolicyF64, Algorithm, Budget, ColonyParamsF64, ConstructionRule, Cost,
    Instance, LocalSearchKind, PheromoneModelF64, RunConfigF64,
};

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn find_instance(var: &str, name: &str) -> Result<PathBuf, String> {
    let dir = env::var_os(var).ok_or_else(|| format!("${var} is not set; instance {name} unavailable"))?;
    let dir = PathBuf::from(dir);
    [format!("{name}.sop"), name.to_string()]
        .into_iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| format!("{name} not found in {}", dir.display()))
}

/// Runs `runs` replications with all cores and returns the best costs.
fn replicate(
    path: PathBuf,
    algorithm: Algorithm,
    ls: LocalSearchKind,
    seconds: u64,
    runs: usize,
) -> Result<Vec<Cost>, String> {
    let config = RunConfigF64::new(algorithm, ls, Budget::time(Duration::from_secs(seconds)), 1);
    let mut spec = ExperimentSpec::new(vec![path], config, runs);
    spec.jobs = 0;
    let outcome = run_experiment(&spec).map_err(|e| e.to_string())?;
    Ok(outcome.records.iter().map(|r| r.best_cost).collect())
}

// 1: exact SOPLIB targets, 120 s, 30 replications, >= 28 hits.
fn soplib_exact() -> Verdict {
    let targets = [
        ("R.200.100.30", 4216),
        ("R.200.100.60", 71749),
        ("R.200.1000.30", 41196),
        ("R.200.1000.60", 71556),
        ("R.300.100.60", 9726),
    ];
    let configs = [
        (Algorithm::Eacs, LocalSearchKind::Sop3),
        (Algorithm::EacsSa, LocalSearchKind::Sop3Sa),
    ];
    let mut details = Vec::new();
    let mut pass = true;
    for (name, target) in targets {
        let path = match find_instance("SOPLIB_DIR", name) {
            Ok(p) => p,
            Err(e) => return verdict(false, e),
        };
        for (algorithm, ls) in configs {
            match replicate(path.clone(), algorithm, ls, 120, 30) {
                Ok(costs) => {
                    let hits = costs.iter().filter(|&&c| c == target).count();
                    pass &= hits >= 28;
                    details.push(format!("{name} {algorithm}+{ls}: {hits}/30 at {target}"));
                }
                Err(e) => return verdict(false, e),
            }
        }
    }
    verdict(pass, details.join("; "))
}

// 2: eacs-sa+sop3-sa on R.200.100.15, best of 30 <= 1850.
fn soplib_competitive() -> Verdict {
    let path = match find_instance("SOPLIB_DIR", "R.200.100.15") {
        Ok(p) => p,
        Err(e) => return verdict(false, e),
    };
    match replicate(path, Algorithm::EacsSa, LocalSearchKind::Sop3Sa, 120, 30) {
        Ok(costs) => {
            let best = costs.iter().copied().min().unwrap_or(Cost::MAX);
            verdict(best <= 1850, format!("best of 30 = {best} (limit 1850)"))
        }
        Err(e) => verdict(false, e),
    }
}

// 3: 50 random instances, n <= 8, every algorithm with sop3 and 1e4
// iterations: >= 90% optimal, none more than 5% above.
fn oracle_desk_scale() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut runs, mut hits, mut worst) = (0, 0, 0.0f64);
    for k in 0..50 {
        let n = rng.random_range(4..=8);
        let density = rng.random_range(0.0..0.6);
        let inst = random_instance(&mut rng, n, density, 100);
        let (opt, _) = brute_force_optimum(&inst, DEFAULT_EXACT_LIMIT).expect("small instance");
        for algorithm in Algorithm::ALL {
            let config = RunConfigF64::new(algorithm, LocalSearchKind::Sop3, Budget::iterations(10_000), 100 + k);
            let best = run(&config, &inst)
                .expect("valid run")
                .best_cost()
                .expect("non-empty run");
            runs += 1;
            if best == opt {
                hits += 1;
            } else {
                worst = worst.max((best - opt) as f64 / opt.max(1) as f64);
            }
        }
    }
    let rate = hits as f64 / runs as f64;
    verdict(
        rate >= 0.9 && worst <= 0.05,
        format!(
            "{hits}/{runs} optimal ({:.1}%), worst excess {:.2}%",
            100.0 * rate,
            100.0 * worst
        ),
    )
}

// 4a: every constructed or exchanged route stays feasible, 1e5 operations
// per fixture.
fn invariant_feasibility() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fixtures = vec![
        t4(),
        chain(12),
        random_instance(&mut rng, 15, 0.3, 100),
        random_instance(&mut rng, 40, 0.1, 100),
        r_class(&mut rng, 100, 100, 30),
    ];
    for inst in &fixtures {
        let n = inst.len();
        let params = ColonyParamsF64::defaults_for(n);
        let mut model = PheromoneModelF64::for_instance(inst, &params);
        let mut ant = AntState::new(inst);
        let mut ctx = SearchContext::new(n);
        let mut policy = AcceptancePolicyF64::annealing(0.999, 0.5, 20).expect("valid parameters");
        let mut ops = 0u64;
        let mut best: Option<sop_core::Route> = None;
        while ops < 100_000 {
            let rule = if ops.is_multiple_of(2) {
                ConstructionRule::Acs
            } else {
                ConstructionRule::Eacs
            };
            let mut route = construct_solution(rule, &mut model, &params, inst, best.as_ref(), &mut ant, &mut rng)
                .expect("construction succeeds");
            ops += 1;
            if !is_feasible(route.order(), inst) || evaluate_cost(route.order(), inst) != Ok(route.cost()) {
                return verdict(false, format!("{}: infeasible construction {route}", inst.name()));
            }
            for _ in 0..50 {
                let h = rng.random_range(0..n);
                let forward = rng.random_bool(0.5);
                let applied = if forward {
                    forward_search(h, &mut route, inst, &mut ctx, &mut policy, Some(3), &mut rng)
                } else {
                    backward_search(h, &mut route, inst, &mut ctx, &mut policy, None, &mut rng)
                };
                if applied.is_some() {
                    ops += 1;
                    if !is_feasible(route.order(), inst) || evaluate_cost(route.order(), inst) != Ok(route.cost()) {
                        return verdict(false, format!("{}: infeasible exchange {route}", inst.name()));
                    }
                }
            }
            if route.cost() > 0 {
                model.global_update(&route, params.rho).expect("positive length");
            }
            if best.as_ref().is_none_or(|b| route.cost() < b.cost()) {
                best = Some(route);
            }
        }
    }
    verdict(true, format!("{} fixtures x 1e5 operations", fixtures.len()))
}

// 4b: constant-time delta equals full recomputation on 1e4 moves.
fn invariant_delta() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 10_000 {
        let n = rng.random_range(4..60);
        let constrained = checked % 2 == 1;
        let inst = random_instance(&mut rng, n, if constrained { 0.1 } else { 0.0 }, 10_000);
        let route = random_feasible(&inst, &mut rng);
        let moves: Vec<(usize, usize, usize)> = if constrained {
            explored_moves(&route, &inst, None, Direction::Forward)
        } else {
            let h = rng.random_range(0..n - 3);
            let i = rng.random_range(h + 1..n - 2);
            let j = rng.random_range(i + 1..n - 1);
            vec![(h, i, j)]
        };
        for _ in 0..moves.len().min(20) {
            let (h, i, j) = moves[rng.random_range(0..moves.len())];
            let delta = exchange_delta(&route, h, i, j, &inst).expect("valid indices");
            let mut order = route.order().to_vec();
            order[h + 1..=j].rotate_left(i - h);
            let Some(recomputed) = naive_cost(&order, &inst) else {
                return verdict(false, format!("move ({h},{i},{j}) uses a forbidden arc"));
            };
            if route.cost() - recomputed != delta {
                return verdict(
                    false,
                    format!("({h},{i},{j}) delta {delta} != {}", route.cost() - recomputed),
                );
            }
            checked += 1;
        }
    }
    verdict(true, format!("{checked} moves exact"))
}

// 4c: labelled search explores exactly the naively feasible exchanges.
fn invariant_labelling() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut total = 0;
    for r in 0..100 {
        let n = rng.random_range(4..=10);
        let density = rng.random_range(0.0..0.6);
        let inst = random_instance(&mut rng, n, density, 50);
        let closure = naive_closure(&inst);
        let route = random_feasible(&inst, &mut rng);
        let naive: BTreeSet<_> = naive_moves(route.order(), &closure).into_iter().collect();
        for direction in [Direction::Forward, Direction::Backward] {
            let found: BTreeSet<_> = explored_moves(&route, &inst, None, direction).into_iter().collect();
            if found != naive {
                return verdict(
                    false,
                    format!("route {r} ({direction:?}): {} vs {} moves", found.len(), naive.len()),
                );
            }
        }
        let limited: BTreeSet<_> = explored_moves(&route, &inst, Some(3), Direction::Forward)
            .into_iter()
            .collect();
        let expected: BTreeSet<_> = naive.iter().copied().filter(|&(h, i, _)| i - h <= 3).collect();
        if limited != expected {
            return verdict(false, format!("route {r}: OR-limited forward set differs"));
        }
        total += naive.len();
    }
    verdict(true, format!("100 routes, {total} feasible moves matched"))
}

fn within_three_sigma(hits: u32, trials: u32, p: f64) -> (bool, f64, f64) {
    let freq = f64::from(hits) / f64::from(trials);
    let sigma = (p * (1.0 - p) / f64::from(trials)).sqrt();
    ((freq - p).abs() <= 3.0 * sigma, freq, sigma)
}

// 4d: Metropolis acceptance at delta = T is e^-1.
fn invariant_metropolis() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let t = 37.5;
    let hits = (0..100_000).filter(|_| metropolis_accept(t, t, &mut rng)).count() as u32;
    let p = (-1.0f64).exp();
    let (ok, freq, sigma) = within_three_sigma(hits, 100_000, p);
    verdict(ok, format!("freq {freq:.5} vs {p:.5} (3 sigma = {:.5})", 3.0 * sigma))
}

// 4e: exchanges tying the best are accepted 10% of the time.
fn invariant_ties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut policy = AcceptancePolicyF64::annealing(0.99, 0.1, 1000).expect("valid parameters");
    let hits = (0..100_000).filter(|_| policy.accept(-4, -4, &mut rng)).count() as u32;
    let (ok, freq, sigma) = within_three_sigma(hits, 100_000, 0.1);
    verdict(ok, format!("freq {freq:.5} vs 0.10000 (3 sigma = {:.5})", 3.0 * sigma))
}

// 4f: T0 of a sample with mean 100 and sd 10 at gamma 0.1 is 130 / ln 10.
fn invariant_t0() -> Verdict {
    let t0 = initial_temperature(&[90.0f64, 100.0, 110.0], 0.1)
        .expect("valid sample")
        .t0;
    let expected = 130.0 / 10f64.ln();
    let rel = (t0 - expected).abs() / expected;
    verdict(rel <= 1e-9, format!("T0 = {t0:.12}, relative error {rel:.1e}"))
}

// 4g: SA variant with T0 = 0 and greedy update probability 1 replays the
// plain variant.
fn invariant_frozen_sa() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 0..5u64 {
        let inst = random_instance(&mut rng, 30, 0.1, 100);
        for (plain, sa) in [(Algorithm::Acs, Algorithm::AcsSa), (Algorithm::Eacs, Algorithm::EacsSa)] {
            let base = RunConfigF64::new(plain, LocalSearchKind::Sop3, Budget::iterations(100), k);
            let mut frozen = base.clone();
            frozen.algorithm = sa;
            frozen.annealing.colony_t0 = Some(0.0);
            frozen.annealing.greedy_update_probability = 1.0;
            let a = run(&base, &inst).expect("valid run");
            let b = run(&frozen, &inst).expect("valid run");
            let key = |r: &sop_core::RunReport| r.trace.iter().map(|t| (t.iteration, t.best_cost)).collect::<Vec<_>>();
            if a.best != b.best || key(&a) != key(&b) {
                return verdict(false, format!("{plain} vs {sa} diverged on instance {k}"));
            }
        }
    }
    verdict(true, "5 instances x 2 pairs, identical best-cost traces")
}

fn kro_instance() -> (Instance, String) {
    match find_instance("TSPLIB_SOP_DIR", "kro124p.2") {
        Ok(path) => match load_instance(&path) {
            Ok(inst) => return (inst, "kro124p.2".into()),
            Err(e) => eprintln!("cannot use {}: {e}", path.display()),
        },
        Err(e) => eprintln!("{e}; using a synthetic kro-like instance"),
    }
    (
        kro_like(&mut ChaCha8Rng::seed_from_u64(124)),
        "synthetic kro-like".into(),
    )
}

// 5: hotter, slower schedule accepts more worse candidates.
fn worse_acceptances() -> Verdict {
    let (inst, label) = kro_instance();
    let count = |lambda: f64, gamma: f64| -> u64 {
        (0..10)
            .map(|seed| {
                let mut config =
                    RunConfigF64::new(Algorithm::AcsSa, LocalSearchKind::None, Budget::iterations(1000), seed);
                config.annealing.lambda = lambda;
                config.annealing.gamma = gamma;
                run(&config, &inst).expect("valid run").worse_acceptances
            })
            .sum()
    };
    let hot = count(0.9999, 0.9);
    let cold = count(0.999, 0.1);
    verdict(
        hot > cold,
        format!("{label}: {hot} (lambda 0.9999, gamma 0.9) vs {cold} (lambda 0.999, gamma 0.1) over 10 runs"),
    )
}

// 6: EACS completes more iterations than ACS in >= 9 of 10 paired 60 s runs.
fn throughput() -> Verdict {
    let (inst, label) = match env::var_os("SOPLIB_DIR").and_then(|_| find_instance("SOPLIB_DIR", "R.200.100.30").ok()) {
        Some(path) => match load_instance(&path) {
            Ok(inst) => (inst, "R.200.100.30".to_string()),
            Err(e) => return verdict(false, e.to_string()),
        },
        None => {
            eprintln!("R.200.100.30 unavailable; using a synthetic instance with the same recipe");
            (
                r_class(&mut ChaCha8Rng::seed_from_u64(200), 200, 100, 30),
                "synthetic R.200.100.30".to_string(),
            )
        }
    };
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let iterations = |algorithm| {
            let config = RunConfigF64::new(
                algorithm,
                LocalSearchKind::None,
                Budget::time(Duration::from_secs(60)),
                seed,
            );
            run(&config, &inst).expect("valid run").iterations
        };
        let eacs = iterations(Algorithm::Eacs);
        let acs = iterations(Algorithm::Acs);
        if eacs > acs {
            wins += 1;
        }
        pairs.push(format!("{eacs}/{acs}"));
    }
    verdict(
        wins >= 9,
        format!(
            "{label}: EACS ahead in {wins}/10 (eacs/acs iterations {})",
            pairs.join(" ")
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 12] = [
        ("1", "SOPLIB exact targets (120 s, 28/30)", soplib_exact),
        ("2", "R.200.100.15 best of 30 <= 1850", soplib_competitive),
        ("3", "oracle equivalence, 50 instances n <= 8", oracle_desk_scale),
        (
            "4a",
            "feasibility over 1e5 operations per fixture",
            invariant_feasibility,
        ),
        ("4b", "exchange delta equals recomputation, 1e4 moves", invariant_delta),
        ("4c", "labelled move set equals naive set", invariant_labelling),
        (
            "4d",
            "Metropolis frequency at delta = T within 3 sigma of 1/e",
            invariant_metropolis,
        ),
        ("4e", "tie acceptance frequency within 3 sigma of 0.10", invariant_ties),
        ("4f", "T0 spot value 130/ln 10 within 1e-9", invariant_t0),
        ("4g", "frozen SA variant replays plain variant", invariant_frozen_sa),
        (
            "5",
            "worse acceptances: hot schedule > cold schedule",
            worse_acceptances,
        ),
        ("6", "EACS iterations > ACS in >= 9/10 runs of 60 s", throughput),
    ];
    let filter: Option<Vec<String>> = env::var("ACCEPTANCE_FILTER")
        .ok()
        .map(|f| f.split(',').map(|s| s.trim().to_string()).collect());

    let mut failed = 0;
    for (id, title, check) in &criteria {
        if filter.as_ref().is_some_and(|f| !f.iter().any(|x| x == id)) {
            continue;
        }
        let started = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} [{id}] {title}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
