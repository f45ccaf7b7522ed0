//! Graph routines checked against exhaustive enumeration.

mod common;

use std::collections::BTreeSet;

use common::{all_dags, brute_cpdag, connected_by_paths, subsets};
use sigcausal::graph::{ancestors, cpdag, d_separated, lift, project_to_mag, sample_er_dag, Dag, DiGraph, Mark};
use sigcausal::rng::from_seed;

#[test]
fn dsep_matches_path_enumeration_up_to_five_nodes() {
    let mut checked = 0usize;
    for d in 2..=5 {
        for g in all_dags(d) {
            for a in 0..d {
                for b in a + 1..d {
                    let rest: Vec<usize> = (0..d).filter(|&v| v != a && v != b).collect();
                    for c in subsets(&rest) {
                        let cs: BTreeSet<usize> = c.iter().copied().collect();
                        let fast = d_separated(&g, &[a], &[b], &c).unwrap();
                        assert_eq!(fast, !connected_by_paths(&g, a, b, &cs), "{g:?} {a} {b} {c:?}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert!(checked > 2_000_000);
}

#[test]
fn dsep_on_lifted_graphs_matches_path_enumeration() {
    for seed in 0..200 {
        let g = sample_er_dag(3, 0.5, 0.5, &mut from_seed(seed));
        let lg = lift(&g).to_digraph();
        let lg = Dag::try_from(lg).unwrap();
        let n = 6;
        for a in 0..n {
            for b in a + 1..n {
                let rest: Vec<usize> = (0..n).filter(|&v| v != a && v != b).collect();
                for c in subsets(&rest) {
                    let cs: BTreeSet<usize> = c.iter().copied().collect();
                    assert_eq!(d_separated(&lg, &[a], &[b], &c).unwrap(), !connected_by_paths(&lg, a, b, &cs));
                }
            }
        }
    }
}

#[test]
fn meek_closure_matches_equivalence_class_on_all_small_dags() {
    for d in 2..=4 {
        for g in all_dags(d) {
            assert_eq!(cpdag(&g), brute_cpdag(&g), "{g:?}");
        }
    }
}

#[test]
fn meek_closure_matches_equivalence_class_on_random_dags() {
    for seed in 0..300 {
        let g = sample_er_dag(6, 0.45, 0.0, &mut from_seed(seed));
        assert_eq!(cpdag(&g), brute_cpdag(&g), "{g:?}");
    }
}

#[test]
fn mag_adjacency_matches_subset_search() {
    for seed in 0..400 {
        let d = 6;
        let g = sample_er_dag(d, 0.4, 0.0, &mut from_seed(seed));
        let observed: Vec<usize> = (0..4).collect();
        let m = project_to_mag(&g, &observed).unwrap();
        for (p, &u) in observed.iter().enumerate() {
            for (q, &v) in observed.iter().enumerate().skip(p + 1) {
                let rest: Vec<usize> = observed.iter().copied().filter(|&w| w != u && w != v).collect();
                let separable = subsets(&rest).iter().any(|z| d_separated(&g, &[u], &[v], z).unwrap());
                assert_eq!(m.adjacent(p, q), !separable, "{g:?} {u} {v}");
                if let Some((mu, mv)) = m.get(p, q) {
                    assert_eq!(mu == Mark::Tail, ancestors(&g, v).contains(&u));
                    assert_eq!(mv == Mark::Tail, ancestors(&g, u).contains(&v));
                }
            }
        }
    }
}

#[test]
fn cpdag_of_tree_orients_nothing() {
    let g = Dag::new(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
    let c = cpdag(&g);
    assert_eq!(c.undirected_edges().len(), 3);
    let dg: DiGraph = c.to_digraph();
    assert_eq!(dg.edge_count(), 6);
}
