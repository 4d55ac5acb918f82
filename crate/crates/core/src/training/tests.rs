// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffcore::{ParamSet, Tape, Tensor};
use crate::graphio::{make_split, Corpus, EmbeddingRecord, LabelRecord, LutGraph};
use crate::models::write_checkpoint;

fn scalar_losses(pred: &[f64], target: &[f64]) -> f64 {
    let tape = Tape::new();
    let p = tape.constant(Tensor::new(vec![pred.len(), 1], pred.to_vec()).unwrap());
    let t = tape.constant(Tensor::new(vec![target.len(), 1], target.to_vec()).unwrap());
    tape.item(loss_sl(&tape, p, t).unwrap()).unwrap()
}

#[test]
fn supervised_loss_examples() {
    assert_eq!(scalar_losses(&[1.5, -2.0], &[1.5, -2.0]), 0.0);
    assert_eq!(scalar_losses(&[3.0], &[1.0]), 4.0);
    assert_eq!(scalar_losses(&[0.0, 0.0], &[1.0, 3.0]), 5.0);
    let tape = Tape::new();
    let p = tape.constant(Tensor::zeros(&[2, 1]));
    let t = tape.constant(Tensor::zeros(&[3, 1]));
    assert!(loss_sl(&tape, p, t).is_err());
}

#[test]
fn distillation_loss_is_a_squared_norm_and_blocks_teacher_gradient() {
    let tape = Tape::new();
    let zs = tape.leaf(Tensor::zeros(&[1, 512]));
    let mut t = vec![0.0; 512];
    t[17] = 2.0;
    let zt = tape.leaf(Tensor::new(vec![1, 512], t).unwrap());
    let kd = loss_kd(&tape, zs, zt).unwrap();
    assert_eq!(tape.item(kd).unwrap(), 4.0);
    tape.backward(kd).unwrap();
    assert!(tape.grad(zt).unwrap().data().iter().all(|&g| g == 0.0));
    assert_eq!(tape.grad(zs).unwrap().data()[17], -4.0);

    let same = tape.constant(Tensor::full(&[3, 8], 0.5));
    let same2 = tape.constant(Tensor::full(&[3, 8], 0.5));
    assert_eq!(tape.item(loss_kd(&tape, same, same2).unwrap()).unwrap(), 0.0);
    let wrong = tape.constant(Tensor::zeros(&[3, 4]));
    assert!(loss_kd(&tape, same, wrong).is_err());

    // batch mean of per-example squared distances
    let a = tape.constant(Tensor::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap());
    let b = tape.constant(Tensor::zeros(&[2, 2]));
    assert_eq!(tape.item(loss_kd(&tape, a, b).unwrap()).unwrap(), 1.0);
}

#[test]
fn total_loss_examples_and_identity() {
    assert_eq!(loss_total(2.0, 4.0, 1.0).unwrap(), 2.0);
    assert_eq!(loss_total(2.0, 4.0, 0.0).unwrap(), 4.0);
    assert_eq!(loss_total(2.0, 4.0, 0.5).unwrap(), 3.0);
    assert!(loss_total(1.0, 1.0, 1.5).is_err());
    assert!(loss_total(1.0, 1.0, -0.1).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let (sl, kd, a) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(0.0..=1.0));
        let lhs = loss_total(sl, kd, a).unwrap() + loss_total(kd, sl, a).unwrap();
        assert!((lhs - (sl + kd)).abs() < 1e-12);
    }
    let tape = Tape::new();
    let sl = tape.constant(Tensor::scalar(2.0));
    let kd = tape.constant(Tensor::scalar(4.0));
    assert_eq!(tape.item(combine_losses(&tape, sl, kd, 0.5).unwrap()).unwrap(), 3.0);
}

#[test]
fn alpha_schedule() {
    let w = LossWeights::default();
    assert_eq!(alpha_at(0, &w), 0.5);
    assert_eq!(alpha_at(149, &w), 0.5);
    assert_eq!(alpha_at(150, &w), 0.75);
    assert_eq!(alpha_at(249, &w), 0.75);
    assert_eq!(alpha_at(250, &w), 1.0);
    assert_eq!(alpha_at(10_000, &w), 1.0);
    let mut prev = 0.0;
    for e in 0..400 {
        assert!(w.alpha_at(e) >= prev);
        prev = w.alpha_at(e);
    }
    assert_eq!(LossWeights::parse("0:0.5, 150:0.75, 250:1").unwrap(), w);
    assert!(LossWeights::new(vec![(0, 0.5), (10, 0.7), (10, 0.8)]).is_err());
    assert!(LossWeights::new(vec![(5, 0.5)]).is_err());
    assert!(LossWeights::new(vec![(0, 1.2)]).is_err());
    assert!(LossWeights::parse("0-0.5").is_err());
}

#[test]
fn cosine_schedule() {
    assert_eq!(cosine_lr(0), 1e-3);
    assert!((cosine_lr(25) - 5e-4).abs() < 1e-15);
    assert_eq!(cosine_lr(50), 1e-3);
    assert_eq!(cosine_lr(75), cosine_lr(25));
    assert!(cosine_lr(49) < cosine_lr(48));
    for e in 0..200 {
        assert!((0.0..=1e-3).contains(&cosine_lr(e)));
    }
}

#[test]
fn plateau_schedule() {
    let mut s = PlateauScheduler::default();
    assert_eq!(s.step(1.0), 1e-3);
    for _ in 0..30 {
        assert_eq!(plateau_step(&mut s, 1.0), 1e-3);
    }
    assert_eq!(plateau_step(&mut s, 1.0), 5e-4, "31st non-improving epoch");
    for _ in 0..31 {
        s.step(2.0);
    }
    assert_eq!(s.lr, 2.5e-4);

    let mut s = PlateauScheduler::default();
    s.step(1.0);
    for _ in 0..29 {
        s.step(1.0);
    }
    s.step(0.5);
    assert_eq!((s.lr, s.epochs_since_best), (1e-3, 0));
    for _ in 0..30 {
        s.step(0.5);
    }
    assert_eq!(s.lr, 1e-3);
}

#[test]
fn trailing_singleton_batches_are_merged() {
    let ids: Vec<usize> = (0..9).collect();
    let b = make_batches(&ids, 4);
    assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 5]);
    assert_eq!(make_batches(&ids, 3).len(), 3);
    assert_eq!(make_batches(&ids[..1], 4), vec![vec![0]]);
    assert_eq!(make_batches(&ids[..6], 4).iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 2]);
}

#[test]
fn one_sgd_step_on_a_linear_model_does_not_increase_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::uniform(&[16, 8], 1.0, &mut rng);
    let y = Tensor::uniform(&[16, 1], 1.0, &mut rng);
    let zt = Tensor::uniform(&[16, 4], 1.0, &mut rng);
    let mut ps = ParamSet::new();
    ps.insert("w", Tensor::uniform(&[8, 4], 0.5, &mut rng));
    ps.insert("v", Tensor::uniform(&[4, 1], 0.5, &mut rng));
    let loss = |ps: &mut ParamSet, backprop: bool| {
        let tape = Tape::new();
        let b = ps.bind(&tape);
        let xv = tape.constant(x.clone());
        let z = tape.linear(xv, b["w"], None).unwrap();
        let p = tape.linear(z, b["v"], None).unwrap();
        let sl = loss_sl(&tape, p, tape.constant(y.clone())).unwrap();
        let kd = loss_kd(&tape, z, tape.constant(zt.clone())).unwrap();
        let total = combine_losses(&tape, sl, kd, 0.5).unwrap();
        if backprop {
            tape.backward(total).unwrap();
            ps.zero_grad();
            ps.accumulate_grads(&tape, &b).unwrap();
        }
        tape.item(total).unwrap()
    };
    let before = loss(&mut ps, true);
    Optimizer::new(OptimizerConfig::default()).step(&mut ps, 1e-4);
    let after = loss(&mut ps, false);
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn optimizers_minimize_a_quadratic_and_skip_frozen_sets() {
    for cfg in [
        OptimizerConfig::default(),
        OptimizerConfig::Sgd { momentum: 0.9 },
        OptimizerConfig::adam(),
    ] {
        let mut ps = ParamSet::new();
        ps.insert("x", Tensor::vector(vec![3.0, -2.0]));
        let mut opt = Optimizer::new(cfg.clone());
        for _ in 0..2000 {
            let tape = Tape::new();
            let b = ps.bind(&tape);
            let target = tape.constant(Tensor::vector(vec![1.0, 1.0]));
            let l = tape.mse(b["x"], target).unwrap();
            tape.backward(l).unwrap();
            ps.zero_grad();
            ps.accumulate_grads(&tape, &b).unwrap();
            opt.step(&mut ps, 0.01);
        }
        let x = ps.get("x").unwrap().data();
        assert!((x[0] - 1.0).abs() < 1e-2 && (x[1] - 1.0).abs() < 1e-2, "{cfg:?}: {x:?}");

        let before = ps.fingerprint();
        ps.freeze();
        ps.iter_mut().for_each(|(_, p)| p.grad.iter_mut().for_each(|g| *g = 1.0));
        opt.step(&mut ps, 0.1);
        assert_eq!(ps.fingerprint(), before);
    }
    assert!(OptimizerConfig::Sgd { momentum: 1.5 }.validate().is_err());
}

#[test]
fn config_validation_and_serde() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.batch_size, 1024);
    cfg.validate().unwrap();
    assert!(TrainConfig { batch_size: 1, ..cfg.clone() }.validate().is_err());
    assert!(TrainConfig { lr: 0.0, ..cfg.clone() }.validate().is_err());
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), cfg);
    let partial: TrainConfig = serde_json::from_str(r#"{"seed": 4, "optimizer": {"kind": "adam", "beta1": 0.9, "beta2": 0.99, "eps": 1e-8}}"#).unwrap();
    assert_eq!(partial.seed, 4);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"sede": 4}"#).is_err());
    assert_eq!("ast_gnn_kd".parse::<BaselineVariant>().unwrap(), BaselineVariant::AstGnnKd);
}

/// Tiny corpus whose log-area is ln(node count).
fn toy_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Corpus::default();
    for i in 0..n {
        let id = format!("d{i:03}");
        let nodes = rng.random_range(2..10);
        let attrs: Vec<[f64; 16]> = (0..nodes)
            .map(|_| std::array::from_fn(|_| f64::from(rng.random_range(0..2u8))))
            .collect();
        let edges = (1..nodes).map(|d| (rng.random_range(0..d), d)).collect();
        c.lut.insert(id.clone(), LutGraph::new(&id, attrs, edges).unwrap());
        let emb: Vec<f32> = (0..8).map(|k| if k == 0 { (nodes as f32).ln() } else { rng.random_range(-1.0..1.0) }).collect();
        c.embeddings.insert(id.clone(), EmbeddingRecord::pooled(&id, emb).unwrap());
        c.labels.insert(id.clone(), LabelRecord::new(&id, nodes as f64, 1.0 + i as f64).unwrap());
    }
    let ids: Vec<String> = c.labels.keys().cloned().collect();
    c.split = make_split(&ids, seed).unwrap();
    c
}

fn quick_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        max_epochs: 3,
        optimizer: OptimizerConfig::adam(),
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_keeps_the_teacher_frozen() {
    let corpus = toy_corpus(20, 2);
    let cfg = quick_cfg();
    let a = pretrain_teacher(&corpus, &cfg).unwrap();
    let b = pretrain_teacher(&corpus, &cfg).unwrap();
    assert_eq!(write_checkpoint(&a.checkpoint), write_checkpoint(&b.checkpoint));
    assert_eq!(a.log, b.log);
    assert_eq!(a.log.len(), 3);
    assert_eq!(a.best_val, a.log[a.best_epoch].val_metric);
    assert!(a.log.iter().all(|l| l.train_kd.is_none() && l.alpha == 1.0));

    let s = train_student_kd(&corpus, &a.checkpoint, &cfg).unwrap();
    let (before, after) = s.teacher_fingerprints.clone().unwrap();
    assert_eq!(before, after);
    assert_eq!(before, a.checkpoint.model.params.fingerprint());
    assert!(s.log.iter().all(|l| l.train_kd.is_some() && l.alpha == 0.5));
    assert!((s.log[1].lr - cosine_lr(1)).abs() < 1e-18);
    let s2 = train_student_kd(&corpus, &a.checkpoint, &cfg).unwrap();
    assert_eq!(write_checkpoint(&s.checkpoint), write_checkpoint(&s2.checkpoint));

    let d = train_baseline(BaselineVariant::LlmDecoder, &corpus, None, &cfg).unwrap();
    assert!(d.log.iter().all(|l| l.alpha == 1.0 && l.train_kd.is_none()));
    assert!(train_baseline(BaselineVariant::AstGnnKd, &corpus, None, &cfg).is_err());
}

#[test]
fn missing_inputs_are_listed() {
    let mut corpus = toy_corpus(20, 3);
    let gone: Vec<String> = corpus.split.train[..2].to_vec();
    for id in &gone {
        corpus.lut.remove(id);
    }
    match pretrain_teacher(&corpus, &quick_cfg()) {
        Err(TrainError::Alignment { ids, count, .. }) => {
            assert_eq!(count, 2);
            let mut want = gone.clone();
            want.sort();
            let mut got = ids.clone();
            got.sort();
            assert_eq!(got, want);
        }
        other => panic!("{other:?}"),
    }
    let mut corpus = toy_corpus(20, 3);
    corpus.labels.remove(&corpus.split.val[0].clone());
    assert!(matches!(pretrain_teacher(&corpus, &quick_cfg()), Err(TrainError::Alignment { .. })));
    let corpus = toy_corpus(20, 3);
    assert!(matches!(
        train_baseline(BaselineVariant::AstGnn, &corpus, None, &quick_cfg()),
        Err(TrainError::Alignment { .. })
    ));
}

#[test]
fn teacher_fits_a_tiny_law() {
    let corpus = toy_corpus(40, 4);
    let cfg = TrainConfig {
        max_epochs: 40,
        ..quick_cfg()
    };
    let out = pretrain_teacher(&corpus, &cfg).unwrap();
    let first = out.log[0].train_sl;
    let last = out.log.last().unwrap().train_sl;
    assert!(last < 0.5 * first, "{first} -> {last}");
}
