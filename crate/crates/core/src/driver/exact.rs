//! Exhaustive search used as a test oracle on small instances.

use crate::instance::{Cost, Instance};
use crate::solution::{Frontier, Route};

use super::DriverError;

/// Largest instance [`brute_force_optimum`] accepts by default.
pub const DEFAULT_EXACT_LIMIT: usize = 10;

/// Minimum cost and one optimal route, found by depth-first enumeration of
/// the feasible orders. Partial routes already as long as the incumbent
/// are cut; among optimal routes the lexicographically smallest order
/// (by node index) is returned.
pub fn brute_force_optimum(instance: &Instance, limit_n: usize) -> Result<(Cost, Route), DriverError> {
    let n = instance.len();
    if n > limit_n {
        return Err(DriverError::TooLarge { n, limit: limit_n });
    }
    let mut frontier = Frontier::new(instance);
    let mut search = Dfs {
        instance,
        order: Vec::with_capacity(n),
        best: None,
    };
    let start = instance.start();
    frontier.visit(start, instance);
    search.order.push(start);
    search.descend(&frontier, 0);
    let (cost, order) = search.best.ok_or(DriverError::NoFeasibleRoute)?;
    Ok((cost, Route::from_feasible(order, cost)))
}

struct Dfs<'a> {
    instance: &'a Instance,
    order: Vec<usize>,
    best: Option<(Cost, Vec<usize>)>,
}

impl Dfs<'_> {
    fn descend(&mut self, frontier: &Frontier, cost: Cost) {
        if let Some((best, _)) = &self.best {
            if cost >= *best {
                return;
            }
        }
        let mut choices = frontier.available().to_vec();
        if choices.is_empty() {
            if self.order.len() == self.instance.len() {
                self.best = Some((cost, self.order.clone()));
            }
            return;
        }
        choices.sort_unstable();
        let current = *self.order.last().expect("route holds the start node");
        for next in choices {
            let mut child = frontier.clone();
            child.visit(next, self.instance);
            self.order.push(next);
            self.descend(&child, cost + self.instance.cost(current, next));
            self.order.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t4_optimum() {
        let inst = Instance::from_matrix("T4", 4, vec![0, 2, 9, 14, -1, 0, 3, 7, -1, -1, 0, 1, -1, -1, -1, 0]).unwrap();
        let (cost, route) = brute_force_optimum(&inst, DEFAULT_EXACT_LIMIT).unwrap();
        assert_eq!(cost, 6);
        assert_eq!(route.order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = Instance::from_matrix("z", 4, vec![0; 16]).unwrap();
        assert_eq!(
            brute_force_optimum(&inst, 3).unwrap_err(),
            DriverError::TooLarge { n: 4, limit: 3 }
        );
    }
}
