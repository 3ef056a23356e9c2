//! SGD training loop behaviour.

mod common;

use common::random;
use highway::data::Dataset;
use highway::init::{init_network, InitScheme, WeightInit};
use highway::optim::{train, train_with, Momentum, SgdConfig, TrainOptions, TrainStatus};
use highway::{Activation, Architecture, BodyKind, Network, Rng, Tensor};

/// Two Gaussian blobs in 4-D separated along the first axis, label 1 for
/// positive first coordinate.
fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut x = random(&mut rng, &[n, 4], 0.3);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        x.row_mut(i)[0] += if label == 1 { 1.0 } else { -1.0 };
        labels.push(label);
    }
    Dataset::new(x, labels, 2, "blobs").unwrap()
}

fn net(kind: BodyKind, depth: usize, act: Activation, inputs: usize, classes: usize, seed: u64) -> Network {
    let arch = Architecture::dense(kind, depth, 8, act, inputs, classes);
    init_network(arch.build().unwrap(), &InitScheme::new(WeightInit::He, -1.0, seed).unwrap())
}

fn accuracy(net: &Network, ds: &Dataset) -> f64 {
    let p = net.probabilities(ds.inputs()).unwrap();
    let hits = (0..ds.len())
        .filter(|&i| {
            let row = p.row(i);
            let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            argmax == ds.labels()[i]
        })
        .count();
    hits as f64 / ds.len() as f64
}

const NO_TIMING: TrainOptions = TrainOptions { timing: false };

#[test]
fn one_highway_layer_separates_blobs() {
    let ds = separable(200, 1);
    for seed in 0..3 {
        let cfg = SgdConfig {
            lr0: 0.05,
            epochs: 50,
            batch_size: 16,
            ..SgdConfig::default()
        };
        let (trained, log) = train(net(BodyKind::Highway, 2, Activation::Tanh, 4, 2, seed), &ds, &cfg, &mut Rng::new(seed)).unwrap();
        assert_eq!(log.status, TrainStatus::Ok);
        assert_eq!(accuracy(&trained, &ds), 1.0, "seed {seed}");
        assert_eq!(log.epochs.last().unwrap().accuracy, 1.0);
    }
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let ds = separable(100, 2);
    let start = net(BodyKind::Highway, 3, Activation::Relu, 4, 2, 3);
    let cfg = SgdConfig {
        lr0: 0.0,
        epochs: 4,
        batch_size: 7,
        ..SgdConfig::default()
    };
    let (after, log) = train(start.clone(), &ds, &cfg, &mut Rng::new(0)).unwrap();
    assert_eq!(after, start);
    for e in &log.epochs {
        // Batch composition changes the summation order only.
        assert!((e.loss - log.initial_loss).abs() < 1e-12 * log.initial_loss, "{e:?}");
    }
}

#[test]
fn same_seed_same_log_bytes() {
    let ds = separable(120, 4);
    let cfg = SgdConfig {
        epochs: 5,
        batch_size: 10,
        ..SgdConfig::default()
    };
    let run = || {
        let n = net(BodyKind::Highway, 4, Activation::Relu, 4, 2, 5);
        train_with(n, &ds, &cfg, &mut Rng::new(6), NO_TIMING).unwrap()
    };
    let (a_net, a) = run();
    let (b_net, b) = run();
    assert_eq!(a_net, b_net);
    assert_eq!(a.to_csv(), b.to_csv());
    let (_, c) = train_with(net(BodyKind::Highway, 4, Activation::Relu, 4, 2, 5), &ds, &cfg, &mut Rng::new(7), NO_TIMING).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}

#[test]
fn learning_rate_column_follows_schedule_exactly() {
    let ds = separable(40, 5);
    let cfg = SgdConfig {
        lr0: 0.03,
        decay: 0.9,
        epochs: 6,
        ..SgdConfig::default()
    };
    let (_, log) = train(net(BodyKind::Plain, 2, Activation::Tanh, 4, 2, 1), &ds, &cfg, &mut Rng::new(1)).unwrap();
    for (e, rec) in log.epochs.iter().enumerate() {
        let mut expected = 0.03;
        for _ in 0..e {
            expected *= 0.9;
        }
        assert!((rec.lr - expected).abs() <= 1e-17, "epoch {e}: {} vs {expected}", rec.lr);
    }
}

#[test]
fn small_step_descends_on_fixed_batch() {
    for seed in 0..10 {
        let mut rng = Rng::new(100 + seed);
        let kind = [BodyKind::Plain, BodyKind::Highway][seed as usize % 2];
        let mut n = net(kind, 3, Activation::Tanh, 5, 3, seed);
        let x = random(&mut rng, &[16, 5], 1.0);
        let y: Vec<usize> = (0..16).map(|_| rng.below(3)).collect();
        let (before, grads) = n.loss_and_grad(&x, &y).unwrap();
        assert!(grads.iter().any(|g| g.max_abs() > 0.0));
        let mut momentum = Momentum::new(&mut n);
        momentum.step(&mut n, &grads, 1e-4, 0.9).unwrap();
        let after = n.evaluate(&x, &y).unwrap();
        assert!(after.loss < before.loss, "seed {seed}: {} -> {}", before.loss, after.loss);
    }
}

#[test]
fn divergence_is_reported_not_propagated() {
    let ds = separable(64, 6);
    let cfg = SgdConfig {
        lr0: 1e6,
        momentum: 0.99,
        decay: 1.0,
        epochs: 20,
        batch_size: 8,
    };
    let mut n = net(BodyKind::Plain, 6, Activation::Relu, 4, 2, 2);
    // Large weights make the first steps overflow quickly.
    for layer in n.layer_params_mut() {
        for t in layer {
            *t = t.scale(50.0);
        }
    }
    let (_, log) = train_with(n, &ds, &cfg, &mut Rng::new(3), NO_TIMING).unwrap();
    assert_eq!(log.status, TrainStatus::Diverged);
    assert!(log.diverged_at.is_some());
    assert!(log.epochs.iter().all(|e| e.loss.is_finite() && e.accuracy.is_finite()));
    let csv = log.to_csv();
    assert!(!csv.contains("NaN") && !csv.contains("inf"), "{csv}");
}

#[test]
fn empty_epoch_budget_rejected() {
    let ds = separable(10, 7);
    let cfg = SgdConfig {
        epochs: 0,
        ..SgdConfig::default()
    };
    assert!(train(net(BodyKind::Plain, 2, Activation::Relu, 4, 2, 0), &ds, &cfg, &mut Rng::new(0)).is_err());
}

#[test]
fn momentum_buffers_match_hand_recurrence() {
    // Two steps with a constant gradient: v1 = −lr·g, v2 = μ·v1 − lr·g.
    let mut n = net(BodyKind::Plain, 1, Activation::Identity, 2, 2, 9);
    let start = n.clone();
    let x = Tensor::from_rows(&[&[0.5, -0.25]]).unwrap();
    let (_, grads) = n.loss_and_grad(&x, &[1]).unwrap();
    let mut m = Momentum::new(&mut n);
    m.step(&mut n, &grads, 0.1, 0.5).unwrap();
    m.step(&mut n, &grads, 0.1, 0.5).unwrap();
    for ((w, w0), g) in n.parameters().iter().zip(start.parameters()).zip(grads.iter()) {
        for ((&a, &b), &gi) in w.data().iter().zip(w0.data()).zip(g.data()) {
            let expected = b + (-0.1 * gi) + (0.5 * (-0.1 * gi) - 0.1 * gi);
            assert!((a - expected).abs() < 1e-15);
        }
    }
}
