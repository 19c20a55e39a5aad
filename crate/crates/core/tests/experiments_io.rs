use std::fs;

use pricer::experiments::*;
use pricer::analysis::sigma_pr_sq;
use pricer::network::erdos_renyi_model;
use pricer::optimizer::{objective, optimize, sigma_threshold, update_sigma};
use pricer::SquareMatrix;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

fn small_good_nodes(trials: usize) -> ExperimentConfig {
    config(&format!(
        r#"{{"kind": "good_nodes_sweep", "master_seed": 4, "trials": {trials},
            "network": {{"n": 6}}, "privacy": {{"trusted_neighbors": 2}},
            "data": {{"d": 8}}, "sweep": {{"good_counts": [0, 2, 6]}}}}"#
    ))
}

#[test]
fn emit_writes_csv_and_summary() {
    let cfg = small_good_nodes(20);
    let table = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_results(&table, &cfg, dir.path()).unwrap();
    assert_eq!(files.csv, dir.path().join("good_nodes_sweep.csv"));
    let csv = fs::read_to_string(&files.csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "num_good,mse_pricer,mse_pricer_stderr,mse_naive,mse_naive_stderr,trials,seed"
    );
    assert_eq!(lines.count(), 3);

    let summary: Summary = serde_json::from_str(&fs::read_to_string(&files.summary).unwrap()).unwrap();
    assert_eq!(summary.config, cfg.resolved());
    assert_eq!(summary.errors, 0);
}

#[test]
fn rerun_is_byte_identical() {
    let cfg = small_good_nodes(30);
    let a = table_to_csv(&run_experiment(&cfg).unwrap()).unwrap();
    let b = table_to_csv(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resolved_config_round_trips() {
    for text in [
        r#"{"kind": "trust_sweep", "master_seed": 1}"#,
        r#"{"kind": "good_nodes_sweep", "master_seed": 2, "network": {"n": 5, "reciprocity": "independent"}}"#,
    ] {
        let resolved = config(text).resolved();
        let json = serde_json::to_string(&resolved).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back, resolved);
        assert_eq!(back.resolved(), resolved);
    }
}

#[test]
fn more_trials_shrink_stderr() {
    let rows = |trials| match run_experiment(&small_good_nodes(trials)).unwrap() {
        ResultTable::GoodNodes(rows) => rows,
        _ => unreachable!(),
    };
    let (few, many) = (rows(2000), rows(4000));
    for (a, b) in few.iter().zip(&many) {
        let ratio = b.mse_naive_stderr.unwrap() / a.mse_naive_stderr.unwrap();
        if a.mse_naive_stderr.unwrap() > 0.0 {
            assert!((ratio - 0.5f64.sqrt()).abs() < 0.1, "num_good {}: ratio {ratio}", a.num_good);
        }
    }
}

#[test]
fn no_trust_matches_diagonal_start() {
    let cfg = config(r#"{"kind": "trust_sweep", "master_seed": 1, "sweep": {"trusted": [0]}}"#);
    let row = match run_experiment(&cfg).unwrap() {
        ResultTable::Trust(rows) => rows.into_iter().next().unwrap(),
        _ => unreachable!(),
    };
    let model = cfg.model().unwrap();
    let spec = cfg.privacy_spec(0);
    let diag = SquareMatrix::diagonal(&model.p().iter().map(|p| 1.0 / p).collect::<Vec<_>>());
    let sigma = update_sigma(&diag, &spec, sigma_threshold(&model, &spec).unwrap()).unwrap();
    let start = objective(&model, &spec, &diag, sigma, cfg.data.d);
    assert!(row.objective.unwrap() <= start * (1.0 + 1e-9));
}

#[test]
fn equal_budgets_make_trust_irrelevant() {
    let cfg = config(
        r#"{"kind": "trust_sweep", "master_seed": 1, "network": {"n": 5, "p": [0.3, 0.9, 0.5, 0.2, 0.7]},
            "privacy": {"eps_high": 5.0, "eps_low": 5.0}}"#,
    );
    let ResultTable::Trust(rows) = run_experiment(&cfg).unwrap() else { unreachable!() };
    let first = rows[0].objective.unwrap();
    for r in &rows {
        assert_eq!(r.objective.unwrap(), first, "k = {}", r.k_trusted);
    }
}

#[test]
fn invalid_point_recorded_and_sweep_continues() {
    // A zero budget on a live link is only legal once that link is trusted.
    let cfg = config(
        r#"{"kind": "trust_sweep", "master_seed": 1, "network": {"n": 4, "p": [0.5, 0.5, 0.5, 0.5], "p_c": 0.5},
            "privacy": {"eps_high": 1.0, "eps_low": 0.0}, "sweep": {"trusted": [0, 3]}}"#,
    );
    let table = run_experiment(&cfg).unwrap();
    let ResultTable::Trust(rows) = &table else { unreachable!() };
    assert!(!rows[0].feasible && rows[0].error.is_some());
    assert!(rows[1].feasible && rows[1].error.is_none());
    assert_eq!(table.error_count(), 1);
    let csv = String::from_utf8(table_to_csv(&table).unwrap()).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "0,,,false");
}

#[test]
fn optimizer_output_feasible_across_configs() {
    for text in [
        r#"{"kind": "trust_sweep", "master_seed": 1, "sweep": {"trusted": [0, 3, 9]}}"#,
        r#"{"kind": "good_nodes_sweep", "master_seed": 1, "trials": 4, "sweep": {"good_counts": [0, 5, 10]}}"#,
    ] {
        let cfg = config(text);
        match run_experiment(&cfg).unwrap() {
            ResultTable::Trust(rows) => {
                for r in rows {
                    let sol = r.solution.unwrap();
                    let spec = cfg.privacy_spec(r.k_trusted);
                    sol.check(&cfg.model().unwrap(), &spec).unwrap();
                }
            }
            ResultTable::GoodNodes(rows) => assert!(rows.iter().all(|r| r.error.is_none())),
        }
    }
}

#[test]
fn independent_erdos_renyi_matches_default_links() {
    let cfg = config(r#"{"kind": "custom", "master_seed": 1}"#);
    let model = cfg.model().unwrap();
    let er = erdos_renyi_model(10, 0.8, DEFAULT_P.to_vec()).unwrap();
    assert_eq!(model, er);
    let report = optimize(&model, &cfg.privacy_spec(6), 32, &cfg.optimizer_config()).unwrap();
    report.solution.check(&model, &cfg.privacy_spec(6)).unwrap();
}

fn near_perfect_row(trials: usize) -> (GoodNodesRow, f64) {
    let cfg = config(&format!(
        r#"{{"kind": "good_nodes_sweep", "master_seed": 9, "trials": {trials},
            "sweep": {{"good_counts": [10], "p_good": 0.99}}}}"#
    ));
    let ResultTable::GoodNodes(mut rows) = run_experiment(&cfg).unwrap() else { unreachable!() };
    let row = rows.remove(0);
    let model = cfg.model_with_ps(vec![0.99; 10]).unwrap();
    let piv = sigma_pr_sq(&model, row.solution.as_ref().unwrap().sigma, cfg.data.d);
    (row, piv)
}

#[test]
fn near_perfect_uplinks_differ_by_privacy_noise() {
    let (r, piv) = near_perfect_row(4000);
    let (pricer, naive) = (r.mse_pricer.unwrap(), r.mse_naive.unwrap());
    let se = r.mse_pricer_stderr.unwrap().hypot(r.mse_naive_stderr.unwrap());
    assert!(pricer < 0.01 && naive < 0.01, "{pricer} {naive}");
    assert!(pricer - piv <= naive + 3.0 * se, "{pricer} - {piv} vs {naive}");
}

/// The naive scheme sends raw vectors, so once uplinks are nearly perfect
/// its only cost is a tiny bias while PriCER still pays its privacy noise.
#[test]
#[ignore = "known shortfall: privacy noise outweighs the naive bias at p = 0.99"]
fn near_perfect_uplinks_pricer_within_naive_stderr() {
    let (r, _) = near_perfect_row(400);
    let (pricer, naive) = (r.mse_pricer.unwrap(), r.mse_naive.unwrap());
    assert!(pricer <= naive + r.mse_naive_stderr.unwrap(), "{pricer} vs {naive}");
}
