//! Pheromone memory and solution construction for ACS and EACS.
//!
//! Selection follows the pseudo-random proportional rule: with probability
//! `q0` the ant takes the arc maximising `tau * eta^beta`, otherwise it
//! samples an arc with probability proportional to that product. Both
//! choices range over the current node's candidate list restricted to the
//! frontier, or the whole frontier when that restriction is empty.
//!
//! Random draws per selection step, in order: `q` (skipped when the
//! frontier holds a single node), then one roulette draw when exploring.

use rand::Rng;
use thiserror::Error;

use crate::instance::{Cost, Instance};
use crate::scalar::Scalar;
use crate::solution::{greedy_nearest_feasible, Frontier, Route};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColonyError {
    #[error("ant has no feasible next node")]
    EmptyFrontier,
    #[error("global update needs a route of positive length")]
    ZeroLengthRoute,
    #[error("invalid colony parameter: {0}")]
    InvalidParameter(String),
}

/// Exploitation threshold for an instance of `n` nodes: `(n - 20) / n`,
/// or 0 when `n <= 20`.
pub fn default_q0(n: usize) -> f64 {
    if n <= 20 {
        0.0
    } else {
        (n - 20) as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColonyParams<F> {
    pub ants: usize,
    pub beta: F,
    /// Local evaporation.
    pub psi: F,
    /// Global evaporation.
    pub rho: F,
    pub q0: F,
    pub candidate_size: usize,
}

impl<F: Scalar> ColonyParams<F> {
    pub const DEFAULT_CANDIDATES: usize = 25;

    /// m = 10, beta = 0.5, psi = 0.01, rho = 0.1, q0 = (n - 20) / n and 25
    /// candidates.
    pub fn defaults_for(n: usize) -> Self {
        ColonyParams {
            ants: 10,
            beta: F::of(0.5),
            psi: F::of(0.01),
            rho: F::of(0.1),
            q0: F::of(default_q0(n)),
            candidate_size: Self::DEFAULT_CANDIDATES,
        }
    }

    pub fn validate(&self) -> Result<(), ColonyError> {
        let unit_open = |x: F| x > F::zero() && x < F::one();
        if self.ants == 0 {
            return Err(ColonyError::InvalidParameter("ants must be at least 1".into()));
        }
        if !unit_open(self.psi) {
            return Err(ColonyError::InvalidParameter(format!(
                "psi = {} not in (0, 1)",
                self.psi
            )));
        }
        if !unit_open(self.rho) {
            return Err(ColonyError::InvalidParameter(format!(
                "rho = {} not in (0, 1)",
                self.rho
            )));
        }
        if !(self.q0 >= F::zero() && self.q0 <= F::one()) {
            return Err(ColonyError::InvalidParameter(format!("q0 = {} not in [0, 1]", self.q0)));
        }
        if !self.beta.is_finite() {
            return Err(ColonyError::InvalidParameter(format!(
                "beta = {} is not finite",
                self.beta
            )));
        }
        if self.candidate_size == 0 {
            return Err(ColonyError::InvalidParameter(
                "candidate list size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Pheromone trails, heuristic values and candidate lists of one run.
#[derive(Debug, Clone)]
pub struct PheromoneModel<F> {
    n: usize,
    tau: Vec<F>,
    eta: Vec<F>,
    eta_pow: Vec<F>,
    tau0: F,
    candidates: Vec<Vec<usize>>,
}

impl<F: Scalar> PheromoneModel<F> {
    /// Model with every trail at `tau0 = 1 / (n * C_nn)`, `C_nn` being the
    /// nearest-neighbour route length (taken as 1 when it is 0).
    pub fn for_instance(instance: &Instance, params: &ColonyParams<F>) -> Self {
        let greedy = greedy_nearest_feasible(instance);
        let tau0 = F::one() / (F::of(instance.len() as f64) * F::of(greedy.cost().max(1) as f64));
        Self::with_tau0(instance, params, tau0)
    }

    pub fn with_tau0(instance: &Instance, params: &ColonyParams<F>, tau0: F) -> Self {
        let n = instance.len();
        let mut eta = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                eta.push(F::one() / F::of(instance.cost(a, b).max(1) as f64));
            }
        }
        let eta_pow = eta.iter().map(|&e| e.powf(params.beta)).collect();

        let start = instance.start();
        let candidates = (0..n)
            .map(|a| {
                let mut list: Vec<usize> = (0..n)
                    .filter(|&b| b != a && b != start && !instance.is_forbidden(a, b))
                    .collect();
                list.sort_by_key(|&b| (instance.cost(a, b), b));
                list.truncate(params.candidate_size);
                list
            })
            .collect();

        PheromoneModel {
            n,
            tau: vec![tau0; n * n],
            eta,
            eta_pow,
            tau0,
            candidates,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn tau0(&self) -> F {
        self.tau0
    }

    #[inline]
    pub fn tau(&self, a: usize, b: usize) -> F {
        self.tau[a * self.n + b]
    }

    pub fn set_tau(&mut self, a: usize, b: usize, value: F) {
        self.tau[a * self.n + b] = value;
    }

    #[inline]
    pub fn eta(&self, a: usize, b: usize) -> F {
        self.eta[a * self.n + b]
    }

    /// `tau(a, b) * eta(a, b)^beta`.
    #[inline]
    pub fn attractiveness(&self, a: usize, b: usize) -> F {
        let k = a * self.n + b;
        self.tau[k] * self.eta_pow[k]
    }

    /// Cheapest successors of `a`, ascending by cost.
    #[inline]
    pub fn candidates(&self, a: usize) -> &[usize] {
        &self.candidates[a]
    }

    pub fn min_tau(&self) -> F {
        self.tau.iter().copied().fold(F::infinity(), F::min)
    }

    /// `tau(a, b) <- (1 - psi) * tau(a, b) + psi * tau0`.
    #[inline]
    pub fn local_update(&mut self, a: usize, b: usize, psi: F) {
        let k = a * self.n + b;
        self.tau[k] = (F::one() - psi) * self.tau[k] + psi * self.tau0;
    }

    /// Reinforces every arc of `route`:
    /// `tau(u, v) <- (1 - rho) * tau(u, v) + rho / L`.
    pub fn global_update(&mut self, route: &Route, rho: F) -> Result<(), ColonyError> {
        if route.cost() <= 0 {
            return Err(ColonyError::ZeroLengthRoute);
        }
        let deposit = rho / F::of(route.cost() as f64);
        let keep = F::one() - rho;
        for pair in route.order().windows(2) {
            let k = pair[0] * self.n + pair[1];
            self.tau[k] = keep * self.tau[k] + deposit;
        }
        Ok(())
    }
}

/// Free function form of [`PheromoneModel::local_update`].
pub fn local_pheromone_update<F: Scalar>(model: &mut PheromoneModel<F>, a: usize, b: usize, psi: F) {
    model.local_update(a, b, psi);
}

/// Free function form of [`PheromoneModel::global_update`].
pub fn global_pheromone_update<F: Scalar>(
    model: &mut PheromoneModel<F>,
    route: &Route,
    rho: F,
) -> Result<(), ColonyError> {
    model.global_update(route, rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstructionRule {
    Acs,
    /// Follow the best route's successor when exploiting.
    Eacs,
}

/// A partially built route together with its frontier.
#[derive(Debug, Clone)]
pub struct AntState<F> {
    frontier: Frontier,
    order: Vec<usize>,
    cost: Cost,
    pool: Vec<usize>,
    weights: Vec<F>,
}

impl<F: Scalar> AntState<F> {
    pub fn new(instance: &Instance) -> Self {
        AntState {
            frontier: Frontier::new(instance),
            order: Vec::with_capacity(instance.len()),
            cost: 0,
            pool: Vec::with_capacity(instance.len()),
            weights: Vec::with_capacity(instance.len()),
        }
    }

    /// Empties the route and places the ant on the start node.
    pub fn reset(&mut self, instance: &Instance) {
        self.frontier.reset(instance);
        self.order.clear();
        self.cost = 0;
        self.frontier.visit(instance.start(), instance);
        self.order.push(instance.start());
    }

    #[inline]
    pub fn current(&self) -> usize {
        *self.order.last().expect("ant has been reset")
    }

    pub fn partial_route(&self) -> &[usize] {
        &self.order
    }

    pub fn frontier(&self) -> &Frontier {
        &self.frontier
    }

    pub fn is_complete(&self) -> bool {
        self.frontier.available().is_empty()
    }

    /// Moves to `node`, which must be in the frontier.
    pub fn advance(&mut self, node: usize, instance: &Instance) {
        self.cost += instance.cost(self.current(), node);
        self.frontier.visit(node, instance);
        self.order.push(node);
    }

    fn fill_pool(&mut self, model: &PheromoneModel<F>) {
        let current = self.current();
        self.pool.clear();
        self.pool.extend(
            model
                .candidates(current)
                .iter()
                .copied()
                .filter(|&b| self.frontier.contains(b)),
        );
        if self.pool.is_empty() {
            self.pool.extend_from_slice(self.frontier.available());
        }
    }

    fn argmax(&self, model: &PheromoneModel<F>) -> usize {
        let current = self.current();
        let mut best = self.pool[0];
        let mut best_value = model.attractiveness(current, best);
        for &b in &self.pool[1..] {
            let value = model.attractiveness(current, b);
            if value > best_value || (value == best_value && b < best) {
                best = b;
                best_value = value;
            }
        }
        best
    }

    fn roulette<R: Rng + ?Sized>(&mut self, model: &PheromoneModel<F>, rng: &mut R) -> usize {
        let current = self.current();
        self.weights.clear();
        let mut total = F::zero();
        for &b in &self.pool {
            let w = model.attractiveness(current, b);
            total = total + w;
            self.weights.push(w);
        }
        let r = F::sample_unit(rng);
        if !(total > F::zero() && total.is_finite()) {
            let k = (r * F::of(self.pool.len() as f64)).to_usize().unwrap_or(0);
            return self.pool[k.min(self.pool.len() - 1)];
        }
        let target = r * total;
        let mut acc = F::zero();
        for (k, &w) in self.weights.iter().enumerate() {
            acc = acc + w;
            if acc > target {
                return self.pool[k];
            }
        }
        // rounding left the target at the very top of the range
        let last = self.weights.iter().rposition(|&w| w > F::zero()).unwrap_or(0);
        self.pool[last]
    }
}

/// Selection probabilities of the exploring branch, in pool order.
pub fn selection_probabilities<F: Scalar>(ant: &mut AntState<F>, model: &PheromoneModel<F>) -> Vec<(usize, F)> {
    ant.fill_pool(model);
    let current = ant.current();
    let total = ant
        .pool
        .iter()
        .fold(F::zero(), |acc, &b| acc + model.attractiveness(current, b));
    ant.pool
        .iter()
        .map(|&b| (b, model.attractiveness(current, b) / total))
        .collect()
}

/// Next node under the ACS pseudo-random proportional rule.
pub fn select_next_acs<F: Scalar, R: Rng + ?Sized>(
    ant: &mut AntState<F>,
    model: &PheromoneModel<F>,
    params: &ColonyParams<F>,
    rng: &mut R,
) -> Result<usize, ColonyError> {
    match ant.frontier.available() {
        [] => return Err(ColonyError::EmptyFrontier),
        [only] => return Ok(*only),
        _ => {}
    }
    let q = F::sample_unit(rng);
    ant.fill_pool(model);
    if q <= params.q0 {
        Ok(ant.argmax(model))
    } else {
        Ok(ant.roulette(model, rng))
    }
}

/// Next node under the EACS rule: when exploiting, prefer the successor of
/// the current node in `best`, falling back to the ACS argmax if that node
/// cannot be taken.
pub fn select_next_eacs<F: Scalar, R: Rng + ?Sized>(
    ant: &mut AntState<F>,
    model: &PheromoneModel<F>,
    params: &ColonyParams<F>,
    best: &Route,
    rng: &mut R,
) -> Result<usize, ColonyError> {
    match ant.frontier.available() {
        [] => return Err(ColonyError::EmptyFrontier),
        [only] => return Ok(*only),
        _ => {}
    }
    let q = F::sample_unit(rng);
    if q <= params.q0 {
        if let Some(next) = best.successor_of(ant.current()) {
            if ant.frontier.contains(next) {
                return Ok(next);
            }
        }
        ant.fill_pool(model);
        Ok(ant.argmax(model))
    } else {
        ant.fill_pool(model);
        Ok(ant.roulette(model, rng))
    }
}

/// Builds one complete route, applying the local pheromone update after
/// every move. EACS without a `best` route falls back to the ACS rule.
pub fn construct_solution<F: Scalar, R: Rng + ?Sized>(
    rule: ConstructionRule,
    model: &mut PheromoneModel<F>,
    params: &ColonyParams<F>,
    instance: &Instance,
    best: Option<&Route>,
    ant: &mut AntState<F>,
    rng: &mut R,
) -> Result<Route, ColonyError> {
    ant.reset(instance);
    while !ant.is_complete() {
        let current = ant.current();
        let next = match (rule, best) {
            (ConstructionRule::Eacs, Some(best)) => select_next_eacs(ant, model, params, best, rng)?,
            _ => select_next_acs(ant, model, params, rng)?,
        };
        model.local_update(current, next, params.psi);
        ant.advance(next, instance);
    }
    Ok(Route::from_feasible(ant.order.clone(), ant.cost))
}
