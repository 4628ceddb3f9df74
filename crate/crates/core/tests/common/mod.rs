//! Fixtures, instance generators and naive reference implementations
//! shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use sop_core::{Cost, Instance};

/// Four nodes, the only feasible route is 0 1 2 3 with cost 6.
pub fn t4() -> Instance {
    Instance::from_matrix("T4", 4, vec![0, 2, 9, 14, -1, 0, 3, 7, -1, -1, 0, 1, -1, -1, -1, 0]).unwrap()
}

/// `n` nodes that must be visited in index order; arc `i -> i+1` costs
/// `i + 1`.
pub fn chain(n: usize) -> Instance {
    let mut m = vec![5; n * n];
    for i in 0..n {
        m[i * n + i] = 0;
        if i + 1 < n {
            m[i * n + i + 1] = (i + 1) as Cost;
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    Instance::from_costs_and_precedences("chain", n, m, &pairs).unwrap()
}

/// Random instance: costs uniform in `0..=max_cost`, each pair of interior
/// nodes constrained with probability `density` along a hidden random
/// order, plus the start/final anchors.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, density: f64, max_cost: Cost) -> Instance {
    let mut m = vec![0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                m[a * n + b] = rng.random_range(0..=max_cost);
            }
        }
    }
    let mut interior: Vec<usize> = (1..n - 1).collect();
    interior.shuffle(rng);
    let mut pairs = Vec::new();
    for x in 0..interior.len() {
        for y in x + 1..interior.len() {
            if rng.random_bool(density) {
                pairs.push((interior[x], interior[y]));
            }
        }
    }
    for v in 1..n {
        pairs.push((0, v));
    }
    for v in 1..n - 1 {
        pairs.push((v, n - 1));
    }
    Instance::from_costs_and_precedences(format!("rand{n}"), n, m, &pairs).unwrap()
}

/// Same recipe as the SOPLIB `R.n.c.p` class: costs uniform in `0..=c`,
/// each interior pair constrained with probability `p / 100`.
pub fn r_class<R: Rng>(rng: &mut R, n: usize, c: Cost, p: u32) -> Instance {
    random_instance(rng, n, f64::from(p) / 100.0, c).with_name(format!("R.{n}.{c}.{p}.synthetic"))
}

/// A 100-node asymmetric Euclidean instance with a handful of precedences,
/// shaped like the TSPLIB `kro*p` SOP instances.
pub fn kro_like<R: Rng>(rng: &mut R) -> Instance {
    let n = 100;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0.0..4000.0), rng.random_range(0.0..2000.0)))
        .collect();
    let mut m = vec![0; n * n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                let d = ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt();
                m[a * n + b] = d.round() as Cost + rng.random_range(0..100);
            }
        }
    }
    let mut interior: Vec<usize> = (1..n - 1).collect();
    interior.shuffle(rng);
    let mut pairs = Vec::new();
    while pairs.len() < 25 {
        let x = rng.random_range(0..interior.len() - 1);
        let y = rng.random_range(x + 1..interior.len());
        if !pairs.contains(&(interior[x], interior[y])) {
            pairs.push((interior[x], interior[y]));
        }
    }
    for v in 1..n {
        pairs.push((0, v));
    }
    for v in 1..n - 1 {
        pairs.push((v, n - 1));
    }
    Instance::from_costs_and_precedences("kro-like", n, m, &pairs).unwrap()
}

/// Transitive closure by Floyd-Warshall over the explicit pairs:
/// `closure[u][v]` iff u must precede v.
pub fn naive_closure(instance: &Instance) -> Vec<Vec<bool>> {
    let n = instance.len();
    let mut reach = vec![vec![false; n]; n];
    for &(u, v) in instance.precedences() {
        reach[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                let row = reach[k].clone();
                for (dst, src) in reach[i].iter_mut().zip(row) {
                    *dst |= src;
                }
            }
        }
    }
    reach
}

/// Route cost straight from the matrix, `None` on a forbidden arc.
pub fn naive_cost(order: &[usize], instance: &Instance) -> Option<Cost> {
    let n = instance.len();
    let m = instance.matrix();
    order.windows(2).try_fold(0, |acc, w| {
        let c = m[w[0] * n + w[1]];
        (c >= 0).then_some(acc + c)
    })
}

/// Checks every pair of positions against the closure.
pub fn naive_feasible(order: &[usize], closure: &[Vec<bool>]) -> bool {
    let n = closure.len();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
        return false;
    }
    if order[0] != 0 || order[n - 1] != n - 1 {
        return false;
    }
    for a in 0..n {
        for b in a + 1..n {
            if closure[order[b]][order[a]] {
                return false;
            }
        }
    }
    true
}

/// Every permutation of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Minimum cost over all feasible permutations.
pub fn naive_optimum(instance: &Instance) -> Option<Cost> {
    let closure = naive_closure(instance);
    permutations(instance.len())
        .into_iter()
        .filter(|p| naive_feasible(p, &closure))
        .filter_map(|p| naive_cost(&p, instance))
        .min()
}

/// All forward-geometry exchanges `(h, i, j)` on `order` whose left block
/// holds no node that must precede a node of the right block.
pub fn naive_moves(order: &[usize], closure: &[Vec<bool>]) -> Vec<(usize, usize, usize)> {
    let n = order.len();
    let mut out = Vec::new();
    for h in 0..n {
        for i in h + 1..n {
            for j in i + 1..n.saturating_sub(1) {
                let ok = (h + 1..=i).all(|a| (i + 1..=j).all(|b| !closure[order[a]][order[b]]));
                if ok {
                    out.push((h, i, j));
                }
            }
        }
    }
    out
}
