//! SOP-3-exchange local search and its simulated annealing variant.
//!
//! A path-preserving 3-exchange `(h, i, j)` with `h < i < j` (route
//! positions) removes the arcs leaving positions `h`, `i` and `j` and swaps
//! the adjacent blocks `h+1..=i` (left) and `i+1..=j` (right) without
//! reversing either, so its gain is computable in constant time.
//!
//! The forward search fixes `h` and grows the left block one node at a
//! time. Whenever a node joins the left block, all of its transitive
//! successors are labelled with the current epoch; the right block is then
//! grown until it would include a labelled node, at which point every
//! larger `j` is infeasible too. The backward search mirrors this: `h`
//! anchors the right end, blocks grow towards the start of the route and
//! predecessors are labelled instead. Only the start and final nodes never
//! move.
//!
//! Starting points are drawn from a duplicate-free LIFO stack of nodes
//! (the don't-push stack). A node whose forward and backward searches both
//! fail gets its don't-look bit set; the six pivot nodes of every applied
//! exchange are pushed back with their bits cleared.

use rand::Rng;
use thiserror::Error;

use crate::annealing::AnnealerState;
use crate::instance::{Cost, Instance};
use crate::scalar::Scalar;
use crate::solution::Route;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocalSearchError {
    #[error("exchange ({h}, {i}, {j}) needs h < i < j <= {max}")]
    BadIndices { h: usize, i: usize, j: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

/// How the don't-push stack is seeded at the start of an invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StackInit {
    /// Every node.
    All,
    /// Only nodes whose successor differs from their successor in the best
    /// route (all nodes when no best route is known).
    OutOfOrder,
}

/// A path-preserving 3-exchange in forward geometry: blocks `h+1..=i` and
/// `i+1..=j` swap places. `delta` is the cost decrease when applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeMove {
    pub h: usize,
    pub i: usize,
    pub j: usize,
    pub delta: Cost,
}

impl ExchangeMove {
    /// The exchange that undoes this one.
    pub fn inverse(&self) -> ExchangeMove {
        ExchangeMove {
            h: self.h,
            i: self.h + (self.j - self.i),
            j: self.j,
            delta: -self.delta,
        }
    }
}

#[inline]
fn gain(order: &[usize], instance: &Instance, h: usize, i: usize, j: usize) -> Cost {
    let (a, b) = (order[h], order[h + 1]);
    let (c, d) = (order[i], order[i + 1]);
    let (e, f) = (order[j], order[j + 1]);
    instance.cost(a, b) + instance.cost(c, d) + instance.cost(e, f)
        - instance.cost(a, d)
        - instance.cost(e, b)
        - instance.cost(c, f)
}

/// Removed-minus-added arc cost of the exchange `(h, i, j)`; positive means
/// the route gets shorter. Precedence feasibility is not checked.
pub fn exchange_delta(
    route: &Route,
    h: usize,
    i: usize,
    j: usize,
    instance: &Instance,
) -> Result<Cost, LocalSearchError> {
    let max = route.len().saturating_sub(2);
    if !(h < i && i < j && j <= max) {
        return Err(LocalSearchError::BadIndices { h, i, j, max });
    }
    Ok(gain(route.order(), instance, h, i, j))
}

/// Swaps the two blocks of `mv` in place and lowers the cached cost by
/// `mv.delta`. The move must be precedence-feasible.
pub fn apply_exchange(route: &mut Route, mv: &ExchangeMove) {
    route.swap_blocks(mv.h, mv.i, mv.j, mv.delta);
}

/// Nodes at the six pivot positions, read from the route after `mv` was
/// applied.
fn pivots_after(route: &Route, mv: &ExchangeMove) -> [usize; 6] {
    let mid = mv.h + (mv.j - mv.i);
    [
        route.node_at(mv.h),
        route.node_at(mv.h + 1),
        route.node_at(mid),
        route.node_at(mid + 1),
        route.node_at(mv.j),
        route.node_at(mv.j + 1),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Maximum length of the block adjacent to `h` (3 gives the
    /// OR-exchange neighbourhood); `None` searches every length.
    pub or_limit: Option<usize>,
    pub stack_init: StackInit,
    /// The annealing policy stops after `cap * n` applied moves per
    /// invocation.
    pub sa_move_cap_per_node: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            or_limit: Some(3),
            stack_init: StackInit::All,
            sa_move_cap_per_node: 50,
        }
    }
}

/// Scratch state of the search, reused across invocations of one run.
#[derive(Debug, Clone, Default)]
pub struct SearchContext {
    stack: Vec<usize>,
    in_stack: Vec<bool>,
    dont_look: Vec<bool>,
    mark: Vec<u32>,
    count: u32,
    moves: usize,
}

impl SearchContext {
    pub fn new(n: usize) -> Self {
        let mut ctx = SearchContext::default();
        ctx.prepare(n);
        ctx
    }

    fn prepare(&mut self, n: usize) {
        if self.mark.len() != n {
            self.mark = vec![0; n];
            self.count = 0;
        }
        self.in_stack.clear();
        self.in_stack.resize(n, false);
        self.dont_look.clear();
        self.dont_look.resize(n, false);
        self.stack.clear();
        self.moves = 0;
    }

    /// Starts a fresh labelling epoch.
    fn next_epoch(&mut self) -> u32 {
        if self.count == u32::MAX {
            self.mark.fill(0);
            self.count = 0;
        }
        self.count += 1;
        self.count
    }

    /// Pushes `node` unless it is already on the stack.
    pub fn push(&mut self, node: usize) {
        if !std::mem::replace(&mut self.in_stack[node], true) {
            self.stack.push(node);
        }
    }

    pub fn pop(&mut self) -> Option<usize> {
        let node = self.stack.pop()?;
        self.in_stack[node] = false;
        Some(node)
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    pub fn is_dont_look(&self, node: usize) -> bool {
        self.dont_look[node]
    }

    /// Exchanges applied by the last [`run_local_search`] call.
    pub fn moves_applied(&self) -> usize {
        self.moves
    }
}

/// Stack contents (bottom first) for the given seeding mode. Nodes are
/// pushed from the end of the route backwards, so the first pop is the
/// earliest node.
pub fn init_dont_push_stack(route: &Route, best: Option<&Route>, mode: StackInit) -> Vec<usize> {
    let order = route.order().iter().rev().copied();
    match (mode, best) {
        (StackInit::OutOfOrder, Some(best)) => order
            .filter(|&u| route.successor_of(u) != best.successor_of(u))
            .collect(),
        _ => order.collect(),
    }
}

/// Annealing acceptance state for the local search.
#[derive(Debug, Clone)]
pub struct LsAnnealer<F> {
    pub state: AnnealerState<F>,
    /// Probability of taking a move exactly as good as the best so far.
    pub tie_probability: F,
}

/// Decides whether a candidate exchange replaces the best one found so far
/// for the current left block.
#[derive(Debug, Clone)]
pub enum AcceptancePolicy<F> {
    /// Strict improvement only.
    Greedy,
    Annealing(LsAnnealer<F>),
}

impl<F: Scalar> AcceptancePolicy<F> {
    /// Annealing policy with a tie probability of 0.1, calibrated lazily
    /// from the first `sample_target` worsening deltas.
    pub fn annealing(lambda: F, gamma: F, sample_target: usize) -> Result<Self, crate::annealing::AnnealingError> {
        Ok(AcceptancePolicy::Annealing(LsAnnealer {
            state: AnnealerState::new(lambda, gamma, sample_target)?,
            tie_probability: F::of(0.1),
        }))
    }

    pub fn is_annealing(&self) -> bool {
        matches!(self, AcceptancePolicy::Annealing(_))
    }

    pub fn annealer(&self) -> Option<&AnnealerState<F>> {
        match self {
            AcceptancePolicy::Greedy => None,
            AcceptancePolicy::Annealing(sa) => Some(&sa.state),
        }
    }

    pub fn annealer_mut(&mut self) -> Option<&mut AnnealerState<F>> {
        match self {
            AcceptancePolicy::Greedy => None,
            AcceptancePolicy::Annealing(sa) => Some(&mut sa.state),
        }
    }

    /// Resets the temperature to `T0` (once calibrated).
    pub fn begin_invocation(&mut self) {
        if let AcceptancePolicy::Annealing(sa) = self {
            if sa.state.is_calibrated() {
                sa.state.reset();
            }
        }
    }

    /// `delta` is the candidate's cost decrease, `best_delta` the decrease
    /// of the best candidate so far.
    ///
    /// Greedy: `delta > best_delta`. Annealing, with `d = delta -
    /// best_delta`: `d > 0` accepts; `d == 0` accepts with the tie
    /// probability; `d < 0` either feeds `|d|` to the calibration sample
    /// and rejects, or (once calibrated) accepts with probability
    /// `exp(-|d| / T)` and cools.
    pub fn accept<R: Rng + ?Sized>(&mut self, delta: Cost, best_delta: Cost, rng: &mut R) -> bool {
        match self {
            AcceptancePolicy::Greedy => delta > best_delta,
            AcceptancePolicy::Annealing(sa) => {
                let diff = delta - best_delta;
                if diff > 0 {
                    true
                } else if diff == 0 {
                    sa.tie_probability > F::zero() && F::sample_unit(rng) < sa.tie_probability
                } else if sa.state.is_calibrated() {
                    let accepted = sa.state.accept(F::of(-diff as f64), rng);
                    sa.state.cool();
                    accepted
                } else {
                    sa.state.calibration_push(F::of(-diff as f64));
                    false
                }
            }
        }
    }
}

/// Free function form of [`AcceptancePolicy::accept`].
pub fn accept_move<F: Scalar, R: Rng + ?Sized>(
    policy: &mut AcceptancePolicy<F>,
    delta: Cost,
    best_delta: Cost,
    rng: &mut R,
) -> bool {
    policy.accept(delta, best_delta, rng)
}

trait MoveJudge {
    fn judge(&mut self, h: usize, i: usize, j: usize, delta: Cost, best_delta: Cost) -> bool;
}

struct PolicyJudge<'a, F, R: ?Sized> {
    policy: &'a mut AcceptancePolicy<F>,
    rng: &'a mut R,
}

impl<F: Scalar, R: Rng + ?Sized> MoveJudge for PolicyJudge<'_, F, R> {
    #[inline]
    fn judge(&mut self, _h: usize, _i: usize, _j: usize, delta: Cost, best_delta: Cost) -> bool {
        self.policy.accept(delta, best_delta, self.rng)
    }
}

/// Records every triple it is shown and accepts none.
struct Recorder(Vec<(usize, usize, usize)>);

impl MoveJudge for Recorder {
    fn judge(&mut self, h: usize, i: usize, j: usize, _delta: Cost, _best: Cost) -> bool {
        self.0.push((h, i, j));
        false
    }
}

fn scan_forward<J: MoveJudge>(
    h: usize,
    route: &mut Route,
    instance: &Instance,
    ctx: &mut SearchContext,
    or_limit: Option<usize>,
    judge: &mut J,
) -> Option<ExchangeMove> {
    let n = route.len();
    if h + 4 > n {
        return None;
    }
    let last_i = or_limit.map_or(n - 3, |k| (h + k).min(n - 3));
    let epoch = ctx.next_epoch();
    for i in h + 1..=last_i {
        for v in instance.successor_set(route.node_at(i)).ones() {
            ctx.mark[v] = epoch;
        }
        let mut best: Option<usize> = None;
        let mut best_delta = 0;
        let mut j = i + 1;
        while j <= n - 2 && ctx.mark[route.node_at(j)] != epoch {
            let delta = gain(route.order(), instance, h, i, j);
            if judge.judge(h, i, j, delta, best_delta) {
                best = Some(j);
                best_delta = delta;
            }
            j += 1;
        }
        if let Some(j) = best {
            let mv = ExchangeMove {
                h,
                i,
                j,
                delta: best_delta,
            };
            apply_exchange(route, &mv);
            return Some(mv);
        }
    }
    None
}

fn scan_backward<J: MoveJudge>(
    h: usize,
    route: &mut Route,
    instance: &Instance,
    ctx: &mut SearchContext,
    or_limit: Option<usize>,
    judge: &mut J,
) -> Option<ExchangeMove> {
    let n = route.len();
    if h < 3 || h >= n {
        return None;
    }
    let first_i = or_limit.map_or(2, |k| h.saturating_sub(k).max(2));
    let epoch = ctx.next_epoch();
    // blocks j..=i-1 and i..=h-1 swap; in forward geometry that is the
    // exchange (j - 1, i - 1, h - 1)
    for i in (first_i..h).rev() {
        for v in instance.predecessor_set(route.node_at(i)).ones() {
            ctx.mark[v] = epoch;
        }
        let mut best: Option<usize> = None;
        let mut best_delta = 0;
        let mut j = i - 1;
        while j >= 1 && ctx.mark[route.node_at(j)] != epoch {
            let delta = gain(route.order(), instance, j - 1, i - 1, h - 1);
            if judge.judge(j - 1, i - 1, h - 1, delta, best_delta) {
                best = Some(j);
                best_delta = delta;
            }
            j -= 1;
        }
        if let Some(j) = best {
            let mv = ExchangeMove {
                h: j - 1,
                i: i - 1,
                j: h - 1,
                delta: best_delta,
            };
            apply_exchange(route, &mv);
            return Some(mv);
        }
    }
    None
}

/// Forward search from position `h`; applies and returns the accepted
/// exchange, if any.
pub fn forward_search<F: Scalar, R: Rng + ?Sized>(
    h: usize,
    route: &mut Route,
    instance: &Instance,
    ctx: &mut SearchContext,
    policy: &mut AcceptancePolicy<F>,
    or_limit: Option<usize>,
    rng: &mut R,
) -> Option<ExchangeMove> {
    ctx.prepare(route.len());
    scan_forward(h, route, instance, ctx, or_limit, &mut PolicyJudge { policy, rng })
}

/// Backward search anchored at position `h`; applies and returns the
/// accepted exchange (in forward geometry), if any.
pub fn backward_search<F: Scalar, R: Rng + ?Sized>(
    h: usize,
    route: &mut Route,
    instance: &Instance,
    ctx: &mut SearchContext,
    policy: &mut AcceptancePolicy<F>,
    or_limit: Option<usize>,
    rng: &mut R,
) -> Option<ExchangeMove> {
    ctx.prepare(route.len());
    scan_backward(h, route, instance, ctx, or_limit, &mut PolicyJudge { policy, rng })
}

/// Every triple (forward geometry) that the labelled search in `direction`
/// evaluates over all starting positions of `route`.
pub fn explored_moves(
    route: &Route,
    instance: &Instance,
    or_limit: Option<usize>,
    direction: Direction,
) -> Vec<(usize, usize, usize)> {
    let mut route = route.clone();
    let mut ctx = SearchContext::new(route.len());
    let mut recorder = Recorder(Vec::new());
    for h in 0..route.len() {
        match direction {
            Direction::Forward => scan_forward(h, &mut route, instance, &mut ctx, or_limit, &mut recorder),
            Direction::Backward => scan_backward(h, &mut route, instance, &mut ctx, or_limit, &mut recorder),
        };
    }
    recorder.0
}

/// Improves `route` until the don't-push stack is empty.
///
/// The greedy policy returns a route no longer than its input. The
/// annealing policy may walk uphill; it stops after the move cap and
/// returns the cheapest route it saw (the final one on ties).
pub fn run_local_search<F: Scalar, R: Rng + ?Sized>(
    mut route: Route,
    best: Option<&Route>,
    instance: &Instance,
    policy: &mut AcceptancePolicy<F>,
    options: &SearchOptions,
    ctx: &mut SearchContext,
    rng: &mut R,
) -> Route {
    let n = route.len();
    ctx.prepare(n);
    for node in init_dont_push_stack(&route, best, options.stack_init) {
        ctx.push(node);
    }
    policy.begin_invocation();

    let annealing = policy.is_annealing();
    let cap = annealing.then(|| options.sa_move_cap_per_node.saturating_mul(n).max(1));
    let mut best_seen = annealing.then(|| route.clone());
    let mut moves = 0;

    while let Some(node) = ctx.pop() {
        if ctx.dont_look[node] {
            continue;
        }
        let h = route.position_of(node);
        let mut judge = PolicyJudge {
            policy: &mut *policy,
            rng: &mut *rng,
        };
        let mut found = scan_forward(h, &mut route, instance, ctx, options.or_limit, &mut judge);
        if found.is_none() {
            found = scan_backward(h, &mut route, instance, ctx, options.or_limit, &mut judge);
        }
        match found {
            Some(mv) => {
                moves += 1;
                for pivot in pivots_after(&route, &mv) {
                    ctx.dont_look[pivot] = false;
                    ctx.push(pivot);
                }
                if let Some(seen) = best_seen.as_mut() {
                    if route.cost() < seen.cost() {
                        seen.clone_from(&route);
                    }
                }
                if cap.is_some_and(|c| moves >= c) {
                    break;
                }
            }
            None => ctx.dont_look[node] = true,
        }
    }
    ctx.moves = moves;

    match best_seen {
        Some(seen) if seen.cost() < route.cost() => seen,
        _ => route,
    }
}
