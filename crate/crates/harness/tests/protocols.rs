//! Benchmark protocols on synthetic data.

use kphd_core::model::{forward, predict, train, TrainConfig};
use kphd_harness::clustering::{cluster_assignments, clustering_accuracy};
use kphd_harness::corrupt::{corrupt, CorruptionSpec};
use kphd_harness::experiment::{evaluate_model, quickstart, summary_json};
use kphd_harness::metrics::accuracy;
use kphd_harness::synthetic::{generate_synthetic, SyntheticConfig};

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 15,
        ..TrainConfig::default()
    }
}

#[test]
fn no_separation_means_chance_accuracy() {
    let cfg = SyntheticConfig {
        separation: 0.0,
        n_train: 600,
        n_test: 600,
        ..SyntheticConfig::default()
    };
    let (tr, te) = generate_synthetic(&cfg).unwrap();
    let model = train(&tr, &quick_train()).unwrap().model;
    let acc = accuracy(&predict(&model, &te, None).unwrap().labels, te.labels()).unwrap();
    // 3 binomial standard deviations around 1/3.
    let sd = (1.0 / 3.0 * 2.0 / 3.0 / 600.0f64).sqrt();
    assert!((acc - 1.0 / 3.0).abs() <= 3.0 * sd, "{acc}");
}

#[test]
fn large_separation_is_separable_per_view() {
    let cfg = SyntheticConfig {
        separation: 10.0,
        n_train: 300,
        n_test: 300,
        ..SyntheticConfig::default()
    };
    let (tr, te) = generate_synthetic(&cfg).unwrap();
    let model = train(&tr, &quick_train()).unwrap().model;
    let m = evaluate_model(&model, &te, None, Some(1)).unwrap();
    for v in m.view_accuracy {
        assert!(v.unwrap() >= 0.99);
    }
    assert_eq!(m.clustering_accuracy, Some(1.0));
}

#[test]
fn clustering_is_deterministic_per_seed() {
    let cfg = SyntheticConfig {
        n_train: 150,
        n_test: 90,
        ..SyntheticConfig::default()
    };
    let (tr, te) = generate_synthetic(&cfg).unwrap();
    let model = train(&tr, &quick_train()).unwrap().model;
    let a = cluster_assignments(&model, &te, 3, 5).unwrap();
    assert_eq!(a, cluster_assignments(&model, &te, 3, 5).unwrap());
    assert!(clustering_accuracy(&a, te.labels(), 3).unwrap() > 0.9);
    assert_eq!(cluster_assignments(&model, &te, 1, 5).unwrap(), vec![0; te.len()]);
}

#[test]
fn dropping_second_view_leaves_first_view_prediction() {
    let cfg = SyntheticConfig {
        separation: 1.5,
        n_train: 300,
        n_test: 200,
        ..SyntheticConfig::default()
    };
    let (tr, te) = generate_synthetic(&cfg).unwrap();
    let tc = TrainConfig {
        pseudo_view: false,
        ..quick_train()
    };
    let model = train(&tr, &tc).unwrap().model;
    let spec = CorruptionSpec {
        missing_rate: 1.0,
        target_views: vec![1],
        ..CorruptionSpec::clean()
    };
    let te = corrupt(&te, &spec, 9).unwrap();
    let pred = predict(&model, &te, None).unwrap();
    for (i, ops) in pred.views.iter().enumerate() {
        assert!(ops[1].is_none());
        assert_eq!(ops[0].as_ref().unwrap(), &pred.fused[i]);
    }
}

#[test]
fn regularizer_reduces_off_label_evidence() {
    let cfg = SyntheticConfig {
        separation: 2.0,
        n_train: 600,
        n_test: 300,
        ..SyntheticConfig::default()
    };
    let (tr, te) = generate_synthetic(&cfg).unwrap();
    let off_label = |lambda_max: f64| {
        let tc = TrainConfig {
            lambda_max,
            ..quick_train()
        };
        let model = train(&tr, &tc).unwrap().model;
        let out = forward(&model, &te).unwrap();
        let mut total = 0.0;
        for (o, &y) in out.iter().zip(te.labels()) {
            total += o.fused.alpha().iter().enumerate().filter(|(k, _)| *k != y).map(|(_, a)| a - 1.0).sum::<f64>();
        }
        total / te.len() as f64
    };
    let (plain, regularized) = (off_label(0.0), off_label(0.5));
    assert!(regularized < plain, "{regularized} vs {plain}");
}

#[test]
fn quickstart_summary_is_reproducible() {
    let a = summary_json(&quickstart(Some(3)).unwrap());
    let b = summary_json(&quickstart(Some(3)).unwrap());
    assert_eq!(a.to_string(), b.to_string());
    assert_eq!(a["rows"], 12);
}
