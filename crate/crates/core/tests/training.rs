mod common;

use std::sync::Arc;

use common::*;
use ndarray::{Array1, Array2};
use piecon::filterbank::{constant_filter, FilterBank};
use piecon::model::{
    accuracy, free_eigenvalues_forward, load_checkpoint, save_checkpoint, train, train_full, Activation, Model,
    ModelConfig, Variant,
};
use piecon::{graph_spectrum, make_splits, normalized_adjacency, synth_spectral_dataset, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> ModelConfig {
    ModelConfig {
        epochs: 60,
        hidden_dim: 8,
        num_intervals: 3,
        window: 3,
        ..ModelConfig::default()
    }
}

fn strip_timing(mut r: piecon::TrainReport) -> piecon::TrainReport {
    r.epoch_seconds.clear();
    r
}

#[test]
fn same_inputs_give_identical_reports() {
    let ds = synth_spectral_dataset(80, 4, 0.05).unwrap();
    let split = make_splits(80, 2).unwrap();
    let cfg = ModelConfig {
        feat_dropout: 0.3,
        hidden_dropout: true,
        ..small_config()
    };
    let a = strip_timing(train(&cfg, &ds, &split).unwrap());
    let b = strip_timing(train(&cfg, &ds, &split).unwrap());
    assert_eq!(a, b);
    let c = strip_timing(train(&ModelConfig { seed: 1, ..cfg }, &ds, &split).unwrap());
    assert_ne!(a.train_loss, c.train_loss);
}

#[test]
fn loss_decreases_early_at_small_learning_rate() {
    let ds = synth_spectral_dataset(100, 5, 0.05).unwrap();
    let split = make_splits(100, 0).unwrap();
    for variant in [Variant::Piecon, Variant::PolyOnly, Variant::FreeEigenvalues] {
        let cfg = ModelConfig {
            epochs: 11,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            variant,
            ..small_config()
        };
        let loss = train(&cfg, &ds, &split).unwrap().train_loss;
        for w in loss.windows(2) {
            assert!(w[1] <= w[0], "{variant:?}: {loss:?}");
        }
    }
}

#[test]
fn random_logits_score_near_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let logits = Array2::from_shape_simple_fn((n, 5), || rng.random::<f64>());
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
    let idx: Vec<usize> = (0..n).collect();
    let acc = accuracy(&logits, &labels, &idx).unwrap();
    // Binomial sd is about 0.003.
    assert!((acc - 0.2).abs() < 0.015, "{acc}");
}

fn mlp_output(x: &Array2<f64>, w1: &Array2<f64>, w2: &Array2<f64>) -> Array2<f64> {
    x.dot(w1).mapv(|v| v.max(0.0)).dot(w2)
}

#[test]
fn free_eigenvalues_cross_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = graph_with_multiplicities(&mut rng, 14, 5);
    let n = g.num_nodes();
    let sp = graph_spectrum(&g).unwrap();
    let u = sp.eigenvectors();
    let x = Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0));
    let w1 = Array2::from_shape_simple_fn((3, 6), || rng.random_range(-1.0..1.0));
    let w2 = Array2::from_shape_simple_fn((6, 2), || rng.random_range(-1.0..1.0));
    let h = mlp_output(&x, &w1, &w2);

    let z = free_eigenvalues_forward(sp.eigenvalues(), u, &x, &w1, &w2, Activation::Relu).unwrap();
    assert!(max_abs_diff(&z, &normalized_adjacency(&g).dot(&h)) <= 1e-6);

    let ones = Array1::<f64>::ones(n);
    let z = free_eigenvalues_forward(&ones, u, &x, &w1, &w2, Activation::Relu).unwrap();
    assert!(max_abs_diff(&z, &h) <= 1e-10);

    let zero: Vec<usize> = (0..n).filter(|&i| sp.eigenvalues()[i].abs() <= 1e-8).collect();
    let (a, b) = (zero[0], zero[zero.len() - 1] + 1);
    assert_eq!(zero.len(), b - a);
    let indicator = Array1::from_shape_fn(n, |i| if (a..b).contains(&i) { 1.0 } else { 0.0 });
    let z = free_eigenvalues_forward(&indicator, u, &x, &w1, &w2, Activation::Relu).unwrap();
    let t = constant_filter(&sp, a, b).unwrap().dense.unwrap();
    assert!(max_abs_diff(&z, &t.dot(&h)) <= 1e-8);
}

#[test]
fn zero_coefficients_give_zero_logits_and_identity_path_gives_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = Graph::ring_with_chords(12, 4, &mut rng).unwrap();
    let sp = Arc::new(graph_spectrum(&g).unwrap());
    let bank = FilterBank::polynomial_only(&g, sp, 2);
    let cfg = ModelConfig {
        variant: Variant::PolyOnly,
        poly_degree: 2,
        hidden_dim: 3,
        activation: Activation::Identity,
        ..ModelConfig::default()
    };
    let x = Array2::from_shape_simple_fn((12, 3), || rng.random_range(-1.0..1.0));
    let mut model = Model::new(cfg, 3, 3, &bank, &mut rng).unwrap();
    model.params.beta.fill(0.0);
    let z = model.forward::<ChaCha8Rng>(&bank, &x, None).unwrap().logits;
    assert_eq!(max_abs(&z), 0.0);

    model.params.w1 = vec![Array2::eye(3)];
    model.params.w2 = Array2::eye(3);
    model.params.beta.row_mut(0).fill(1.0);
    let z = model.forward::<ChaCha8Rng>(&bank, &x, None).unwrap().logits;
    assert!(max_abs_diff(&z, &x) <= 1e-14);
}

#[test]
fn checkpoint_round_trip_reproduces_predictions() {
    let ds = synth_spectral_dataset(60, 9, 0.0).unwrap();
    let split = make_splits(60, 1).unwrap();
    let cfg = small_config();
    let trained = train_full(&cfg, &ds, &split).unwrap();
    let dir = std::env::temp_dir().join(format!("piecon-ckpt-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.ckpt");
    save_checkpoint(&path, &cfg, &trained.bank.intervals(), &trained.model.params).unwrap();
    let ck = load_checkpoint(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(ck.config, cfg);
    assert_eq!(ck.intervals, trained.bank.intervals());
    assert_eq!(ck.params, trained.model.params);
    let acc = piecon::model::evaluate(&trained.model, &trained.bank, &ds.features, &ds.labels, &split.test_indices()).unwrap();
    assert_eq!(acc, trained.report.test_acc);
}

/// Proxy settings selected on synthetic seeds other than 7.
fn proxy() -> ModelConfig {
    ModelConfig {
        num_intervals: 3,
        hidden_dim: 8,
        activation: Activation::Identity,
        weight_decay: 0.02,
        decay_coefficients: true,
        epochs: 500,
        ..ModelConfig::default()
    }
}

#[test]
fn noiseless_synthetic_task_is_learned_and_beats_polynomials() {
    let ds = synth_spectral_dataset(200, 7, 0.0).unwrap();
    let split = make_splits(200, 0).unwrap();
    let full = train(&proxy(), &ds, &split).unwrap().test_acc;
    let poly = train(
        &ModelConfig {
            variant: Variant::PolyOnly,
            poly_degree: 5,
            ..proxy()
        },
        &ds,
        &split,
    )
    .unwrap()
    .test_acc;
    assert!(full >= 0.9, "full {full}");
    assert!(full - poly >= 0.10, "full {full}, poly {poly}");
}
