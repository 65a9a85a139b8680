mod common;

use common::{random_images, synthetic_images};
use qocnn::checkpoint::{decode, encode, load_checkpoint, save_checkpoint};
use qocnn::data::{Dataset, FoldedInput, Split};
use qocnn::eval::evaluate;
use qocnn::model::{ArchConfig, Architecture, ModelGraph};
use qocnn::train::{forward_loss, loss_and_grad, score, train, Optimizer, OptimizerKind, TrainConfig};
use qocnn::Error;

fn small_cfg(arch: Architecture) -> ArchConfig {
    ArchConfig {
        hidden: 16,
        ..ArchConfig::defaults(arch)
    }
}

fn datasets() -> (Dataset, Dataset) {
    (
        Dataset::from_raw(&synthetic_images(200, 1), Split::Train),
        Dataset::from_raw(&synthetic_images(60, 2), Split::Test),
    )
}

#[test]
fn fresh_model_predicts_near_uniform() {
    let train_ds = Dataset::from_raw(&random_images(200, 4), Split::Train);
    let batch: Vec<&FoldedInput> = train_ds.items.iter().collect();
    for arch in [Architecture::Onn, Architecture::Qonn, Architecture::Qocnn] {
        let model = ModelGraph::build(arch, &ArchConfig::defaults(arch), 0).unwrap();
        let (loss, _) = forward_loss(&model, &batch).unwrap();
        assert!((loss - 10f64.ln()).abs() < 0.5, "{arch}: {loss}");
    }
}

fn steps(kind: OptimizerKind, lr: f64, n: usize) -> (f64, f64) {
    let (train_ds, _) = datasets();
    let items: Vec<&FoldedInput> = train_ds.items.iter().take(32).collect();
    let mut model = ModelGraph::build(Architecture::Qonn, &small_cfg(Architecture::Qonn), 3).unwrap();
    let mut opt = Optimizer::new(kind, lr);
    let (initial, _) = loss_and_grad(&model, &items).unwrap();
    for _ in 0..n {
        let (_, g) = loss_and_grad(&model, &items).unwrap();
        opt.step(&mut model, &g);
    }
    (initial, loss_and_grad(&model, &items).unwrap().0)
}

#[test]
fn sgd_decreases_loss_on_a_small_set() {
    let (initial, last) = steps(OptimizerKind::Sgd, 0.5, 50);
    assert!(last < initial, "{initial} -> {last}");
}

#[test]
fn adam_overfits_a_small_set() {
    let (initial, last) = steps(OptimizerKind::Adam, 1e-2, 100);
    assert!(last < 0.1 * initial, "{initial} -> {last}");
}

#[test]
fn training_is_bit_reproducible() {
    let (train_ds, test_ds) = datasets();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = ModelGraph::build(Architecture::Qocnn, &small_cfg(Architecture::Qocnn), 5).unwrap();
        let h = train(&mut m, &train_ds, &test_ds, &cfg, |_| {}).unwrap();
        (m, h)
    };
    let (m1, h1) = run();
    let (m2, h2) = run();
    assert_eq!(h1, h2);
    assert_eq!(encode(&m1), encode(&m2));
    for (a, b) in h1.epochs.iter().zip(&h2.epochs) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
        assert_eq!(a.test_loss.to_bits(), b.test_loss.to_bits());
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (train_ds, _) = datasets();
    let batch: Vec<&FoldedInput> = train_ds.items.iter().take(70).collect();
    let model = ModelGraph::build(Architecture::Qonn, &small_cfg(Architecture::Qonn), 8).unwrap();
    let on = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| loss_and_grad(&model, &batch).unwrap())
    };
    let (l1, g1) = on(1);
    let (l3, g3) = on(3);
    assert_eq!(l1.to_bits(), l3.to_bits());
    assert_eq!(g1, g3);
}

#[test]
fn trained_checkpoint_round_trips() {
    let (train_ds, test_ds) = datasets();
    let mut m = ModelGraph::build(Architecture::Qocnn, &small_cfg(Architecture::Qocnn), 1).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 32,
        ..TrainConfig::default()
    };
    train(&mut m, &train_ds, &test_ds, &cfg, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&m, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, m);
    for (a, b) in back.layers.iter().zip(&m.layers) {
        if let (Some(wa), Some(wb)) = (&a.weights, &b.weights) {
            let bits = |w: &qocnn::ComplexMatrix| w.re.iter().chain(&w.im).map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(wa), bits(wb));
        }
    }
    let (l1, a1, _) = score(&m, &test_ds).unwrap();
    let (l2, a2, _) = score(&back, &test_ds).unwrap();
    assert_eq!((l1.to_bits(), a1.to_bits()), (l2.to_bits(), a2.to_bits()));
    assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(Error::Io(_))));
    assert_eq!(decode(&encode(&back)).unwrap(), m);
}

#[test]
fn synthetic_digits_are_learned() {
    let (train_ds, test_ds) = datasets();
    for arch in [Architecture::Onn, Architecture::Qonn, Architecture::Qocnn] {
        let mut m = ModelGraph::build(arch, &small_cfg(arch), 2).unwrap();
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 16,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let h = train(&mut m, &train_ds, &test_ds, &cfg, |_| {}).unwrap();
        let first = h.epochs[0].train_loss;
        let last = h.last().unwrap();
        assert!(last.train_loss < first, "{arch}");
        let report = evaluate(&m, &test_ds).unwrap();
        assert!(report.accuracy > 0.9, "{arch}: {}", report.accuracy);
        assert_eq!(report.accuracy, last.test_accuracy);
        assert!(report.max_prob_sum_error <= 1e-12);
    }
}

#[test]
fn divergence_is_reported() {
    let (train_ds, test_ds) = datasets();
    let mut m = ModelGraph::build(Architecture::Qonn, &small_cfg(Architecture::Qonn), 0).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        learning_rate: 1e6,
        optimizer: OptimizerKind::Sgd,
        ..TrainConfig::default()
    };
    let err = train(&mut m, &train_ds, &test_ds, &cfg, |_| {}).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
}

#[test]
fn empty_sets_rejected() {
    let (train_ds, test_ds) = datasets();
    let empty = train_ds.subset(0);
    let mut m = ModelGraph::build(Architecture::Qonn, &small_cfg(Architecture::Qonn), 0).unwrap();
    assert!(train(&mut m, &empty, &test_ds, &TrainConfig::default(), |_| {}).is_err());
    assert!(train(&mut m, &train_ds, &empty, &TrainConfig::default(), |_| {}).is_err());
}

#[test]
fn evaluation_writes_all_tables() {
    let (_, test_ds) = datasets();
    let m = ModelGraph::build(Architecture::Qonn, &small_cfg(Architecture::Qonn), 0).unwrap();
    let report = evaluate(&m, &test_ds).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write_dir(dir.path()).unwrap();
    let auc = std::fs::read_to_string(dir.path().join("auc.csv")).unwrap();
    assert_eq!(auc.lines().count(), 11);
    let conf = std::fs::read_to_string(dir.path().join("confusion.csv")).unwrap();
    let rows: Vec<u64> = conf
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse::<u64>().unwrap()).sum())
        .collect();
    assert_eq!(rows, vec![6; 10]);
    for c in 0..10 {
        assert!(dir.path().join(format!("roc_class_{c}.csv")).exists());
    }
}
