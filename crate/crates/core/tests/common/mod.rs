//! Exhaustive reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use sigcausal::graph::{descendants, Dag, DirectedGraph, Mark, MixedGraph};

/// Every labelled DAG without loops on `d` nodes.
pub fn all_dags(d: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match code % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            code /= 3;
        }
        if let Ok(g) = Dag::new(d, &edges) {
            out.push(g);
        }
    }
    out
}

/// d-connection by enumerating simple trails between `a` and `b`.
pub fn connected_by_paths(g: &Dag, a: usize, b: usize, c: &BTreeSet<usize>) -> bool {
    fn walk(g: &Dag, path: &mut Vec<usize>, b: usize, c: &BTreeSet<usize>) -> bool {
        let v = *path.last().unwrap();
        if v == b {
            return trail_open(g, path, c);
        }
        let mut nbrs = g.parents_of(v);
        nbrs.extend(g.children_of(v));
        for w in nbrs {
            if !path.contains(&w) {
                path.push(w);
                if walk(g, path, b, c) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    walk(g, &mut vec![a], b, c)
}

pub fn trail_open(g: &Dag, path: &[usize], c: &BTreeSet<usize>) -> bool {
    for k in 1..path.len() - 1 {
        let (p, v, n) = (path[k - 1], path[k], path[k + 1]);
        let collider = g.has_edge(p, v) && g.has_edge(n, v);
        if collider {
            if !descendants(g, v).iter().any(|x| c.contains(x)) {
                return false;
            }
        } else if c.contains(&v) {
            return false;
        }
    }
    true
}

pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << items.len())
        .map(|m| items.iter().enumerate().filter(|(k, _)| m >> k & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}

pub fn v_structures(g: &Dag) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for c in 0..g.d() {
        let pa = g.parents_of(c);
        for &a in &pa {
            for &b in &pa {
                if a < b && !g.has_edge(a, b) && !g.has_edge(b, a) {
                    out.insert((a, c, b));
                }
            }
        }
    }
    out
}

/// CPDAG as the union of all Markov-equivalent DAGs.
pub fn brute_cpdag(g: &Dag) -> MixedGraph {
    let skel: Vec<(usize, usize)> = g.edges().into_iter().filter(|(i, j)| i != j).collect();
    let target = v_structures(g);
    let mut seen_fwd = vec![false; skel.len()];
    let mut seen_bwd = vec![false; skel.len()];
    for mask in 0..1usize << skel.len() {
        let edges: Vec<(usize, usize)> =
            skel.iter().enumerate().map(|(k, &(i, j))| if mask >> k & 1 == 1 { (j, i) } else { (i, j) }).collect();
        let Ok(h) = Dag::new(g.d(), &edges) else { continue };
        if v_structures(&h) != target {
            continue;
        }
        for k in 0..skel.len() {
            if mask >> k & 1 == 1 {
                seen_bwd[k] = true;
            } else {
                seen_fwd[k] = true;
            }
        }
    }
    let mut m = MixedGraph::new(g.d());
    for (k, &(i, j)) in skel.iter().enumerate() {
        match (seen_fwd[k], seen_bwd[k]) {
            (true, true) => m.set(i, j, Mark::Tail, Mark::Tail),
            (true, false) => m.set(i, j, Mark::Tail, Mark::Arrow),
            (false, true) => m.set(i, j, Mark::Arrow, Mark::Tail),
            _ => unreachable!(),
        }
    }
    m
}

/// Minimum of `sum_i dist[i][sigma(i)]` over all fixed-point-free permutations.
pub fn derangement_brute_force(dist: &[f64], n: usize) -> f64 {
    fn rec(i: usize, n: usize, used: &mut [bool], acc: f64, dist: &[f64], best: &mut f64) {
        if i == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if j != i && !used[j] {
                used[j] = true;
                rec(i + 1, n, used, acc + dist[i * n + j], dist, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(0, n, &mut vec![false; n], 0.0, dist, &mut best);
    best
}
