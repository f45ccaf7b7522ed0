use sigcausal_demo::{oracle_discovery, signature_kernel_json, simulate_paths};

#[test]
fn kernel_of_unit_segments_matches_series() {
    let k = signature_kernel_json(r#"{"x": [[0, 0], [1, 0]], "y": [[0, 0], [1, 0]], "refinement": 4}"#).unwrap();
    let exact = sigcausal::kernel::linear_path_kernel_series(1.0, 1.0, 40);
    assert!((k - exact).abs() < 5e-4, "{k} vs {exact}");
    let orth = signature_kernel_json(r#"{"x": [[0, 0], [1, 0]], "y": [[0, 0], [0, 1]]}"#).unwrap();
    assert!((orth - 1.0).abs() < 1e-12);
}

#[test]
fn kernel_rejects_bad_input() {
    assert!(signature_kernel_json("not json").is_err());
    assert!(signature_kernel_json(r#"{"x": [[0]], "y": [[0], [1]]}"#).is_err());
    assert!(signature_kernel_json(r#"{"x": [[0], [1]], "y": [[0, 0], [1, 1]]}"#).is_err());
}

#[test]
fn simulated_paths_have_plot_layout() {
    let s = simulate_paths("linear-drift", 2, 3, 20, 9).unwrap();
    assert_eq!(s.times.len(), 21);
    assert_eq!(s.values.len(), 3);
    assert!(s.values.iter().all(|p| p.len() == 2 && p.iter().all(|v| v.len() == 21)));
    assert_eq!(s.truth.edges, vec![[0, 1]]);
    assert!(simulate_paths("unknown", 2, 3, 20, 9).is_err());
}

#[test]
fn oracle_runs_recover_truth() {
    for seed in 0..10 {
        for alg in ["alg1", "pc-init", "robust"] {
            let r = oracle_discovery(alg, 5, 0.4, seed).unwrap();
            assert_eq!(r.shd, Some(0), "{alg} {seed}");
            assert!(r.queries > 0);
        }
        let r = oracle_discovery("fci", 5, 0.4, seed).unwrap();
        assert!(r.found.get("marks").is_some());
    }
    assert!(oracle_discovery("alg1", 40, 0.4, 0).is_err());
}
