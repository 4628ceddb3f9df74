//! Routes and the constructive baselines.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::instance::{Cost, Instance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolutionError {
    #[error("arc {from} -> {to} is forbidden by a precedence constraint")]
    ForbiddenArc { from: usize, to: usize },
    #[error("route is not a permutation of the {n} nodes")]
    NotPermutation { n: usize },
    #[error("route violates the precedence constraints or the start/final anchors")]
    Infeasible,
    #[error("cannot parse route: {0}")]
    Parse(String),
}

/// A feasible SOP solution: a Hamiltonian path from the start node to the
/// final node that respects every precedence, with its cached length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    order: Vec<usize>,
    position: Vec<usize>,
    cost: Cost,
}

impl Route {
    /// Validates `order` against `instance` and computes its cost.
    pub fn new(order: Vec<usize>, instance: &Instance) -> Result<Route, SolutionError> {
        if order.len() != instance.len() || !is_permutation(&order) {
            return Err(SolutionError::NotPermutation { n: instance.len() });
        }
        if !is_feasible(&order, instance) {
            return Err(SolutionError::Infeasible);
        }
        let cost = evaluate_cost(&order, instance)?;
        Ok(Route::from_feasible(order, cost))
    }

    /// Wraps an order already known to be feasible with cost `cost`.
    pub(crate) fn from_feasible(order: Vec<usize>, cost: Cost) -> Route {
        let mut position = vec![0; order.len()];
        for (k, &node) in order.iter().enumerate() {
            position[node] = k;
        }
        Route { order, position, cost }
    }

    /// Parses the one-line whitespace separated node list written by
    /// `Display`.
    pub fn parse(line: &str, instance: &Instance) -> Result<Route, SolutionError> {
        let order = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| SolutionError::Parse(t.into())))
            .collect::<Result<Vec<_>, _>>()?;
        Route::new(order, instance)
    }

    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    #[inline]
    pub fn cost(&self) -> Cost {
        self.cost
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    #[inline]
    pub fn node_at(&self, position: usize) -> usize {
        self.order[position]
    }

    #[inline]
    pub fn position_of(&self, node: usize) -> usize {
        self.position[node]
    }

    /// The node following `node`, `None` for the last one.
    #[inline]
    pub fn successor_of(&self, node: usize) -> Option<usize> {
        self.order.get(self.position[node] + 1).copied()
    }

    /// Swaps the adjacent blocks `h+1..=i` and `i+1..=j` and lowers the
    /// cached cost by `gain`. Feasibility is the caller's responsibility.
    pub(crate) fn swap_blocks(&mut self, h: usize, i: usize, j: usize, gain: Cost) {
        self.order[h + 1..=j].rotate_left(i - h);
        for k in h + 1..=j {
            self.position[self.order[k]] = k;
        }
        self.cost -= gain;
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for node in &self.order {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{node}")?;
        }
        Ok(())
    }
}

fn is_permutation(order: &[usize]) -> bool {
    let mut seen = vec![false; order.len()];
    order
        .iter()
        .all(|&v| v < seen.len() && !std::mem::replace(&mut seen[v], true))
}

/// Length of the path `order`: the sum of its consecutive arc costs. There
/// is no closing arc.
pub fn evaluate_cost(order: &[usize], instance: &Instance) -> Result<Cost, SolutionError> {
    let mut total = 0;
    for pair in order.windows(2) {
        let c = instance.cost(pair[0], pair[1]);
        if c < 0 {
            return Err(SolutionError::ForbiddenArc {
                from: pair[0],
                to: pair[1],
            });
        }
        total += c;
    }
    Ok(total)
}

/// True iff `order` is a permutation anchored at the start and final nodes
/// and respects every explicit precedence pair.
pub fn is_feasible(order: &[usize], instance: &Instance) -> bool {
    let n = instance.len();
    if order.len() != n || !is_permutation(order) {
        return false;
    }
    if order[0] != instance.start() || order[n - 1] != instance.final_node() {
        return false;
    }
    let mut position = vec![0; n];
    for (k, &v) in order.iter().enumerate() {
        position[v] = k;
    }
    instance.precedences().iter().all(|&(u, v)| position[u] < position[v])
}

/// Nodes that can be appended to a partial route: unvisited, with every
/// predecessor already visited.
#[derive(Debug, Clone)]
pub struct Frontier {
    remaining: Vec<u32>,
    available: Vec<usize>,
    slot: Vec<usize>,
    visited: Vec<bool>,
}

const ABSENT: usize = usize::MAX;

impl Frontier {
    pub fn new(instance: &Instance) -> Frontier {
        let n = instance.len();
        let mut frontier = Frontier {
            remaining: Vec::with_capacity(n),
            available: Vec::with_capacity(n),
            slot: vec![ABSENT; n],
            visited: vec![false; n],
        };
        frontier.reset(instance);
        frontier
    }

    pub fn reset(&mut self, instance: &Instance) {
        self.remaining.clear();
        self.remaining.extend_from_slice(instance.predecessor_counts());
        self.available.clear();
        self.slot.fill(ABSENT);
        self.visited.fill(false);
        for (v, &count) in self.remaining.iter().enumerate() {
            if count == 0 {
                self.slot[v] = self.available.len();
                self.available.push(v);
            }
        }
    }

    /// Current frontier. Its order is deterministic but otherwise
    /// unspecified.
    #[inline]
    pub fn available(&self) -> &[usize] {
        &self.available
    }

    #[inline]
    pub fn contains(&self, node: usize) -> bool {
        self.slot[node] != ABSENT
    }

    #[inline]
    pub fn is_visited(&self, node: usize) -> bool {
        self.visited[node]
    }

    /// Marks `node` visited. `node` must be in the frontier.
    pub fn visit(&mut self, node: usize, instance: &Instance) {
        debug_assert!(self.contains(node), "node {node} is not in the frontier");
        let k = self.slot[node];
        self.available.swap_remove(k);
        if let Some(&moved) = self.available.get(k) {
            self.slot[moved] = k;
        }
        self.slot[node] = ABSENT;
        self.visited[node] = true;
        for &s in instance.direct_successors(node) {
            self.remaining[s] -= 1;
            if self.remaining[s] == 0 {
                self.slot[s] = self.available.len();
                self.available.push(s);
            }
        }
    }
}

/// Random feasible route: at every step one node is drawn uniformly from
/// the frontier. A draw is only made when the frontier holds more than one
/// node.
pub fn random_feasible<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Route {
    let mut frontier = Frontier::new(instance);
    let mut order = Vec::with_capacity(instance.len());
    while !frontier.available().is_empty() {
        let choices = frontier.available();
        let node = if choices.len() == 1 {
            choices[0]
        } else {
            choices[rng.random_range(0..choices.len())]
        };
        frontier.visit(node, instance);
        order.push(node);
    }
    let cost = evaluate_cost(&order, instance).expect("frontier walk never uses forbidden arcs");
    Route::from_feasible(order, cost)
}

/// Nearest-neighbour route: always move to the cheapest frontier node,
/// lowest index on ties.
pub fn greedy_nearest_feasible(instance: &Instance) -> Route {
    let mut frontier = Frontier::new(instance);
    let mut order = Vec::with_capacity(instance.len());
    let mut current = instance.start();
    frontier.visit(current, instance);
    order.push(current);
    let mut total = 0;
    while !frontier.available().is_empty() {
        let (next, c) = frontier
            .available()
            .iter()
            .map(|&v| (v, instance.cost(current, v)))
            .min_by_key(|&(v, c)| (c, v))
            .expect("frontier is non-empty");
        frontier.visit(next, instance);
        order.push(next);
        total += c;
        current = next;
    }
    Route::from_feasible(order, total)
}
