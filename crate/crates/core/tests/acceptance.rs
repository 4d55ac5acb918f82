// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use qorlens_core::diffcore::{grad_check, grad_check_params, Mode, ParamSet, RunningStats, Tensor, TensorError};
use qorlens_core::evalx::{evaluate, metrics};
use qorlens_core::graphio::{
    load_split, read_ast_graphs, read_embeddings, read_labels, read_lut_graphs, save_split, write_ast_graphs,
    write_embeddings, write_labels, write_lut_graphs, AstGraph, DatasetSplit, EmbeddingRecord, LabelRecord,
    LutGraph, Target,
};
use qorlens_core::models::{
    embedding_batch, gcn_normalize, graph_conv, read_checkpoint, write_checkpoint, Checkpoint, GraphBatch, Model,
    ModelConfig, ModelError, ModelInput, ModelKind, PreparedGraph,
};
use qorlens_core::synthgen::{generate_corpus, SynthCorpus, SynthSpec};
use qorlens_core::training::{
    alpha_at, cosine_lr, pretrain_teacher, train_student_kd, LossWeights, OptimizerConfig, PlateauScheduler,
    TrainConfig,
};
use qorlens_core::verilog::{extract_features_108, parse, to_ast_graph, FEATURE_DIM};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/verilog")
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

/// Keeps values away from the relu kink so central differences stay valid.
fn off_kink(mut t: Tensor) -> Tensor {
    for v in t.data_mut() {
        if v.abs() < 1e-2 {
            *v += 0.05;
        }
    }
    t
}

fn random_lut(rng: &mut ChaCha8Rng, id: &str, n: usize) -> LutGraph {
    let attrs: Vec<[f64; 16]> = (0..n)
        .map(|_| std::array::from_fn(|_| f64::from(rng.random_range(0..2u8))))
        .collect();
    let mut edges = Vec::new();
    for d in 1..n {
        for _ in 0..rng.random_range(1..=3.min(d)) {
            let s = rng.random_range(0..d);
            if !edges.contains(&(s, d)) {
                edges.push((s, d));
            }
        }
    }
    LutGraph::new(id, attrs, edges).unwrap()
}

fn unwrap_tensor(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

fn small_config(kind: ModelKind) -> ModelConfig {
    let base = match kind {
        ModelKind::Teacher => ModelConfig::teacher(),
        ModelKind::AstGnn => ModelConfig::ast_gnn(),
        ModelKind::Student => ModelConfig::student(6),
    };
    ModelConfig {
        conv_dim: if kind.is_graph() { 4 } else { 0 },
        hidden_dim: 8,
        ..base
    }
}

/// Init puts beta at 0 and the running mean at 0, so a dead layer feeds the
/// next relu exactly at its kink. Random affine and stats avoid that.
fn randomize_norms(model: &mut Model, rng: &mut ChaCha8Rng) {
    let names: Vec<String> = model.params.names().filter(|n| n.starts_with("bn")).map(str::to_string).collect();
    for name in names {
        for v in model.params.get_mut(&name).unwrap().data_mut() {
            *v = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
    for st in &mut model.stats {
        for (mu, var) in st.mean.iter_mut().zip(st.var.iter_mut()) {
            *mu = rng.random_range(-0.5..0.5);
            *var = rng.random_range(0.5..2.0);
        }
    }
}

fn gradients() -> Outcome {
    const TOL: f64 = 1e-5;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |op: &'static str, err: f64| {
        let w = worst.entry(op).or_insert(0.0);
        *w = w.max(err);
    };
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[5, 4]);
        let w = rand_tensor(&mut rng, &[4, 3]);
        let b = rand_tensor(&mut rng, &[3]);
        let target = rand_tensor(&mut rng, &[5, 3]);

        let mut ps = ParamSet::new();
        ps.insert("x", x.clone());
        ps.insert("w", w.clone());
        ps.insert("b", b.clone());
        let e = grad_check_params(&ps, 1e-6, |t, p| {
            let y = t.linear(p["x"], p["w"], Some(p["b"]))?;
            let tv = t.constant(target.clone());
            t.mse(y, tv)
        })
        .map_err(|e| e.to_string())?;
        note("linear", e);

        let xr = off_kink(x.clone());
        let e = grad_check(
            |t, v| {
                let y = t.relu(v)?;
                let tv = t.constant(rand_target(&[5, 4], seed));
                t.mse(y, tv)
            },
            &xr,
            1e-6,
        )
        .map_err(|e| e.to_string())?;
        note("relu", e);

        let gamma = rand_tensor(&mut rng, &[4]);
        let beta = rand_tensor(&mut rng, &[4]);
        let stats = RunningStats {
            mean: (0..4).map(|_| rng.random_range(-0.5..0.5)).collect(),
            var: (0..4).map(|_| rng.random_range(0.5..2.0)).collect(),
        };
        for mode in [Mode::Train, Mode::Eval] {
            let mut bn = ParamSet::new();
            bn.insert("x", x.clone());
            bn.insert("gamma", gamma.clone());
            bn.insert("beta", beta.clone());
            let e = grad_check_params(&bn, 1e-6, |t, p| {
                let mut s = stats.clone();
                let y = t.batch_norm(p["x"], p["gamma"], p["beta"], &mut s, mode)?;
                let tv = t.constant(rand_target(&[5, 4], seed));
                t.mse(y, tv)
            })
            .map_err(|e| e.to_string())?;
            note("batch_norm", e);
        }

        let n = rng.random_range(2..8);
        let g = random_lut(&mut rng, "g", n);
        let adj = Arc::new(gcn_normalize(n, &g.edges));
        let mut gc = ParamSet::new();
        gc.insert("x", rand_tensor(&mut rng, &[n, 3]));
        gc.insert("w", rand_tensor(&mut rng, &[3, 2]));
        let gt = rand_tensor(&mut rng, &[n, 2]);
        let e = grad_check_params(&gc, 1e-6, |t, p| {
            let y = graph_conv(t, p["x"], &adj, p["w"])?;
            let tv = t.constant(gt.clone());
            t.mse(y, tv)
        })
        .map_err(|e| e.to_string())?;
        note("graph_conv", e);

        let offsets: Arc<[usize]> = Arc::from(vec![0, 2, 5]);
        let pw = rand_tensor(&mut rng, &[4]);
        let e = grad_check(
            |t, v| {
                let mean = t.segment_mean(v, offsets.clone())?;
                let max = t.segment_max(v, offsets.clone())?;
                let mp = t.mean_pool_rows(v)?;
                let xp = t.max_pool_rows(v)?;
                let cat = t.concat_cols(&[mean, max])?;
                let ct = t.constant(rand_target(&[2, 8], seed + 200));
                let s1 = t.mse(cat, ct)?;
                let pv = t.constant(pw.clone());
                let both = t.add(mp, xp)?;
                let both = t.reshape(both, vec![1, 4])?;
                let pv = t.reshape(pv, vec![4, 1])?;
                let s2 = t.linear(both, pv, None)?;
                let s2 = t.sum(s2)?;
                t.add(s1, s2)
            },
            &x,
            1e-6,
        )
        .map_err(|e| e.to_string())?;
        note("pooling", e);

        let e = grad_check(
            |t, v| {
                let tv = t.constant(rand_target(&[5, 4], seed + 100));
                t.mse(v, tv)
            },
            &x,
            1e-6,
        )
        .map_err(|e| e.to_string())?;
        note("mse", e);

        // composed models, train and eval mode
        let graphs: Vec<PreparedGraph> = (0..2)
            .map(|i| PreparedGraph::from_lut(&random_lut(&mut rng, &format!("g{i}"), 3 + i)))
            .collect();
        let lut_in = ModelInput::Graphs(GraphBatch::assemble(&graphs.iter().collect::<Vec<_>>()));
        let src = std::fs::read_to_string(fixtures().join(["valid/and2.v", "valid/add8.v"][seed as usize % 2])).unwrap();
        let ast = PreparedGraph::from_ast(&to_ast_graph(&parse(&src).unwrap()));
        let ast2 = PreparedGraph::from_ast(&to_ast_graph(&parse(&std::fs::read_to_string(fixtures().join("valid/inv.v")).unwrap()).unwrap()));
        let ast_in = ModelInput::Graphs(GraphBatch::assemble(&[&ast, &ast2]));
        let emb_in = ModelInput::Embeddings(rand_tensor(&mut rng, &[3, 6]));
        for (kind, input, name) in [
            (ModelKind::Teacher, &lut_in, "teacher"),
            (ModelKind::AstGnn, &ast_in, "ast_gnn"),
            (ModelKind::Student, &emb_in, "student"),
        ] {
            let mut model = Model::new(small_config(kind), &mut rng).map_err(|e| e.to_string())?;
            randomize_norms(&mut model, &mut rng);
            let tgt = rand_tensor(&mut rng, &[input.batch_size(), 1]);
            for mode in [Mode::Train, Mode::Eval] {
                let e = grad_check_params(&model.params, 1e-6, |t, p| {
                    let mut stats = model.stats.clone();
                    let f = Model::forward_with(&model.config, t, p, input, mode, &mut stats).map_err(unwrap_tensor)?;
                    let tv = t.constant(tgt.clone());
                    t.mse(f.pred, tv)
                })
                .map_err(|e| e.to_string())?;
                note(name, e);
            }
        }
    }
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    ensure(worst.values().all(|&v| v < TOL), || format!("max rel err >= {TOL}: {detail}"))?;
    Ok(format!("20 seeds, worst: {detail}"))
}

fn rand_target(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Tensor::uniform(shape, 1.0, &mut rng)
}

/// Direct definitions; SS_tot via the pairwise identity.
fn naive_metrics(y: &[f64], yhat: &[f64]) -> [f64; 4] {
    let n = y.len() as f64;
    let (mut abs, mut res, mut rel) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(yhat) {
        abs += (a - b).abs();
        res += (a - b) * (a - b);
        rel += (a - b).abs() / a.abs();
    }
    let mut pair = 0.0;
    for a in y {
        for b in y {
            pair += (a - b) * (a - b);
        }
    }
    let rse = res / (pair / (2.0 * n));
    [abs / n, 1.0 - rse, rel / n, rse]
}

fn metric_oracle() -> Outcome {
    let r = metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], Target::Area).map_err(|e| e.to_string())?;
    ensure(
        (r.mae - 2.0 / 3.0).abs() < 1e-12 && r.rse == 1.0 && r.r2 == 0.0 && (r.mape - 4.0 / 9.0).abs() < 1e-12,
        || format!("hand example gave {r:?}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(2..=500);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..10.0)).collect();
        let yhat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
        let r = metrics(&y, &yhat, Target::Delay).map_err(|e| e.to_string())?;
        for (got, want) in [r.mae, r.r2, r.mape, r.rse].into_iter().zip(naive_metrics(&y, &yhat)) {
            let err = (got - want).abs() / want.abs().max(1.0);
            worst = worst.max(err);
        }
        ensure(r.r2 + r.rse == 1.0, || format!("case {case}: r2 + rse = {}", r.r2 + r.rse))?;
    }
    ensure(worst <= 1e-12, || format!("worst deviation {worst:.2e}"))?;
    Ok(format!("hand example exact, 100 vectors within {worst:.1e}"))
}

/// The synthetic corpus shared by the training criteria: 800/100/100.
fn synth(embed_noise: f64) -> SynthCorpus {
    generate_corpus(&SynthSpec {
        n_designs: 1000,
        min_nodes: 4,
        max_nodes: 64,
        noise_sigma: 0.05,
        embed_noise,
        train_percent: 80,
        val_percent: 10,
        seed: 1,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn base_config() -> TrainConfig {
    TrainConfig {
        batch_size: 64,
        optimizer: OptimizerConfig::adam(),
        ..TrainConfig::default()
    }
}

fn teacher_learnability(corpus: &SynthCorpus, out: &mut Option<Checkpoint>) -> Outcome {
    let c = &corpus.corpus;
    let sizes = (c.split.train.len(), c.split.val.len(), c.split.test.len());
    ensure(sizes == (800, 100, 100), || format!("split sizes {sizes:?}"))?;
    let t = Instant::now();
    // schedule: None selects the plateau scheduler for the teacher
    let cfg = TrainConfig {
        max_epochs: 40,
        ..base_config()
    };
    let run = pretrain_teacher(c, &cfg).map_err(|e| e.to_string())?;
    let (report, _) = evaluate(&run.checkpoint, c, "test").map_err(|e| e.to_string())?;
    let detail = format!(
        "test R2 {:.4} after {} epochs (best {}), {:.0}s",
        report.r2,
        cfg.max_epochs,
        run.best_epoch,
        t.elapsed().as_secs_f64()
    );
    *out = Some(run.checkpoint);
    ensure(report.r2 >= 0.9, || detail.clone())?;
    Ok(detail)
}

fn kd_pull(corpus: &SynthCorpus, teacher: &Checkpoint) -> Outcome {
    let before = sha(&write_checkpoint(teacher));
    let cfg = TrainConfig {
        max_epochs: 100,
        alpha: LossWeights::constant(0.0).unwrap(),
        ..base_config()
    };
    let run = train_student_kd(&corpus.corpus, teacher, &cfg).map_err(|e| e.to_string())?;
    let after = sha(&write_checkpoint(teacher));
    ensure(before == after, || "teacher checkpoint bytes changed".into())?;
    let (fa, fb) = run.teacher_fingerprints.clone().ok_or("no teacher fingerprints recorded")?;
    ensure(fa == fb, || "teacher parameter fingerprint changed".into())?;
    let kd: Vec<f64> = run.log.iter().map(|l| l.train_kd.unwrap_or(f64::NAN)).collect();
    let first = kd.iter().position(|&v| v < 0.05 * kd[0]);
    let best = kd.iter().cloned().fold(f64::INFINITY, f64::min);
    let detail = format!("epoch-0 KD {:.3}, min ratio {:.4}, first below 5% at epoch {first:?}", kd[0], best / kd[0]);
    ensure(first.is_some(), || detail.clone())?;
    Ok(detail + ", teacher bytes unchanged")
}

fn kd_benefit(teacher: &Checkpoint) -> Outcome {
    let noisy = synth(0.5);
    let c = &noisy.corpus;
    let mut kd_mae = Vec::new();
    let mut sl_mae = Vec::new();
    for seed in 0..3 {
        let cfg = TrainConfig {
            seed,
            max_epochs: 100,
            ..base_config()
        };
        let kd = train_student_kd(c, teacher, &cfg).map_err(|e| e.to_string())?;
        let sl_cfg = TrainConfig {
            alpha: LossWeights::constant(1.0).unwrap(),
            ..cfg
        };
        let sl = train_student_kd(c, teacher, &sl_cfg).map_err(|e| e.to_string())?;
        kd_mae.push(evaluate(&kd.checkpoint, c, "test").map_err(|e| e.to_string())?.0.mae);
        sl_mae.push(evaluate(&sl.checkpoint, c, "test").map_err(|e| e.to_string())?.0.mae);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (a, b) = (median(&mut kd_mae), median(&mut sl_mae));
    let detail = format!("median test MAE: default schedule {a:.4}, alpha=1 {b:.4}");
    ensure(a < b, || detail.clone())?;
    Ok(detail)
}

fn schedules() -> Outcome {
    let w = LossWeights::default();
    for (e, want) in [(0, 0.5), (149, 0.5), (150, 0.75), (249, 0.75), (250, 1.0), (299, 1.0)] {
        let got = alpha_at(e, &w);
        ensure(got == want, || format!("alpha_at({e}) = {got}, want {want}"))?;
    }
    for (e, want) in [(0, 1e-3), (25, 5e-4), (50, 1e-3)] {
        let got = cosine_lr(e);
        ensure((got - want).abs() <= 1e-15, || format!("cosine_lr({e}) = {got}, want {want}"))?;
    }
    let mut p = PlateauScheduler::default();
    ensure(p.step(1.0) == 1e-3, || "first step changed the rate".into())?;
    for k in 1..=31 {
        let lr = p.step(1.0);
        let want = if k < 31 { 1e-3 } else { 5e-4 };
        ensure(lr == want, || format!("non-improving epoch {k}: lr {lr}, want {want}"))?;
    }
    Ok("alpha 0.5/0.75/1.0, cosine 1e-3/5e-4/1e-3, plateau halves after 31 stale epochs".into())
}

#[derive(Deserialize)]
struct FeatureFixture {
    file: String,
    #[serde(rename = "in")]
    in_bits: u64,
    out: u64,
    longest_path: u64,
    node_types: [u64; 5],
    ops: BTreeMap<usize, u64>,
}

/// Longest root-anchored path by enumerating every path from the edge list.
fn dfs_longest(g: &AstGraph) -> u64 {
    fn walk(v: usize, edges: &[(usize, usize)], depth: u64) -> u64 {
        edges
            .iter()
            .filter(|e| e.0 == v)
            .map(|e| walk(e.1, edges, depth + 1))
            .max()
            .unwrap_or(depth)
    }
    let root = g.nodes.iter().position(|n| n.category.code() == 0).expect("root node");
    walk(root, &g.edges, 0)
}

fn features() -> Outcome {
    let fx: Vec<FeatureFixture> =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("features.json")).unwrap()).unwrap();
    ensure(fx.len() == 10, || format!("{} feature fixtures", fx.len()))?;
    for f in &fx {
        let m = parse(&std::fs::read_to_string(fixtures().join(&f.file)).unwrap()).map_err(|e| format!("{}: {e}", f.file))?;
        let g = to_ast_graph(&m);
        let got = extract_features_108(&g, &m).to_array();
        let mut want = [0.0; FEATURE_DIM];
        want[0] = f.in_bits as f64;
        want[1] = f.out as f64;
        want[2] = f.longest_path as f64;
        for (k, v) in f.node_types.iter().enumerate() {
            want[3 + k] = *v as f64;
        }
        for (op, v) in &f.ops {
            want[8 + op] = *v as f64;
        }
        ensure(got.len() == 108, || "length".into())?;
        ensure(got == want, || {
            let diffs: Vec<usize> = (0..FEATURE_DIM).filter(|&i| got[i] != want[i]).collect();
            format!("{}: differs at {diffs:?}", f.file)
        })?;
    }
    let mut small = 0;
    for entry in std::fs::read_dir(fixtures().join("valid")).unwrap() {
        let path = entry.unwrap().path();
        let m = parse(&std::fs::read_to_string(&path).unwrap()).map_err(|e| format!("{}: {e}", path.display()))?;
        let g = to_ast_graph(&m);
        ensure(extract_features_108(&g, &m).to_array().len() == 108, || "length".into())?;
        if g.nodes.len() <= 12 {
            small += 1;
            let (a, b) = (qorlens_core::verilog::longest_path(&g), dfs_longest(&g));
            ensure(a == b, || format!("{}: longest_path {a}, DFS {b}", path.display()))?;
        }
    }
    ensure(small > 0, || "no fixture with <= 12 nodes".into())?;
    Ok(format!("10 vectors exact, DFS agrees on {small} small fixtures"))
}

#[derive(Deserialize)]
struct ParseFixture {
    file: String,
    expect: String,
    construct: Option<String>,
    line: Option<usize>,
}

fn parser_corpus() -> Outcome {
    let fx: Vec<ParseFixture> =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("manifest.json")).unwrap()).unwrap();
    let valid = fx.iter().filter(|f| f.expect == "ok").count();
    ensure(fx.len() == 30 && valid == 20, || format!("{} files, {valid} valid", fx.len()))?;
    for f in &fx {
        let src = std::fs::read_to_string(fixtures().join(&f.file)).unwrap();
        match (parse(&src), f.expect.as_str()) {
            (Ok(_), "ok") => {}
            (Ok(_), want) => return Err(format!("{}: parsed, expected {want}", f.file)),
            (Err(e), "ok") => return Err(format!("{}: {e}", f.file)),
            (Err(e), want) => {
                ensure(e.category() == want, || format!("{}: category {}, want {want}", f.file, e.category()))?;
                if let Some(line) = f.line {
                    ensure(e.span.line as usize == line, || format!("{}: line {}, want {line}", f.file, e.span.line))?;
                }
                if let Some(c) = &f.construct {
                    ensure(e.message.contains(c.as_str()), || format!("{}: {e}", f.file))?;
                }
                // stable across runs
                ensure(parse(&src).unwrap_err() == e, || format!("{}: unstable error", f.file))?;
            }
        }
    }
    Ok("20 accepted, 10 rejected with annotated categories".into())
}

fn permuted(g: &LutGraph, perm: &[usize]) -> LutGraph {
    let mut attrs = vec![[0.0; 16]; g.num_nodes];
    for (i, &p) in perm.iter().enumerate() {
        attrs[p].copy_from_slice(g.node_attrs.row(i));
    }
    let edges = g.edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
    LutGraph::new(g.design_id.clone(), attrs, edges).unwrap()
}

fn invariances() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut m = Model::teacher(&mut rng);
    for st in &mut m.stats {
        for (mu, var) in st.mean.iter_mut().zip(st.var.iter_mut()) {
            *mu = rng.random_range(-0.5..0.5);
            *var = rng.random_range(0.5..2.0);
        }
    }
    let pred = |g: &LutGraph| m.predict(&ModelInput::Graphs(GraphBatch::single(g))).unwrap().pred[0];
    let mut drift: f64 = 0.0;
    for i in 0..50 {
        let n = rng.random_range(2..=64);
        let g = random_lut(&mut rng, &format!("p{i}"), n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        drift = drift.max((pred(&g) - pred(&permuted(&g, &perm))).abs());
    }
    ensure(drift < 1e-9, || format!("teacher drift {drift:.2e}"))?;

    let dim = 32;
    let s = Model::student(dim, &mut rng).map_err(|e| e.to_string())?;
    for i in 0..50 {
        let rows = rng.random_range(1..20);
        let data: Vec<f32> = (0..rows * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rec = EmbeddingRecord::new(format!("s{i}"), rows, dim, data, false).unwrap();
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut rng);
        let shuffled: Vec<f32> = order.iter().flat_map(|&r| rec.row(r).to_vec()).collect();
        let rec2 = EmbeddingRecord::new(format!("s{i}"), rows, dim, shuffled, false).unwrap();
        let a = s.predict(&ModelInput::Embeddings(embedding_batch(&[&rec], dim).unwrap())).unwrap();
        let b = s.predict(&ModelInput::Embeddings(embedding_batch(&[&rec2], dim).unwrap())).unwrap();
        ensure(a.pred[0].to_bits() == b.pred[0].to_bits(), || format!("student record {i} not bitwise equal"))?;
    }
    Ok(format!("teacher drift {drift:.1e} on 50 graphs, student bitwise on 50 records"))
}

fn determinism() -> Outcome {
    let small = generate_corpus(&SynthSpec {
        n_designs: 60,
        seed: 4,
        ..SynthSpec::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        batch_size: 16,
        max_epochs: 3,
        seed: 11,
        ..base_config()
    };
    let run = |_: u8| -> Result<(String, String), String> {
        let t = pretrain_teacher(&small.corpus, &cfg).map_err(|e| e.to_string())?;
        let s = train_student_kd(&small.corpus, &t.checkpoint, &cfg).map_err(|e| e.to_string())?;
        let (rep, per) = evaluate(&s.checkpoint, &small.corpus, "test").map_err(|e| e.to_string())?;
        let mut csv = Vec::new();
        per.write_csv(&mut csv).map_err(|e| e.to_string())?;
        let ck = [write_checkpoint(&t.checkpoint), write_checkpoint(&s.checkpoint)].concat();
        Ok((sha(&ck), sha(&[rep.to_json().into_bytes(), csv].concat())))
    };
    let (a, b) = (run(0)?, run(1)?);
    ensure(a == b, || "repeated runs differ".into())?;
    let bytes = {
        let t = pretrain_teacher(&small.corpus, &cfg).map_err(|e| e.to_string())?;
        write_checkpoint(&t.checkpoint)
    };
    ensure(write_checkpoint(&read_checkpoint(&bytes).map_err(|e| e.to_string())?) == bytes, || "checkpoint round trip".into())?;

    // five record kinds, randomized
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dir = tempfile::tempdir().unwrap();
    for round in 0..20 {
        let luts: Vec<LutGraph> = (0..rng.random_range(1..6))
            .map(|i| {
                let n = rng.random_range(1..40);
                random_lut(&mut rng, &format!("lut{round}_{i}"), n)
            })
            .collect();
        let mut buf = Vec::new();
        write_lut_graphs(&mut buf, &luts).unwrap();
        ensure(read_lut_graphs(buf.as_slice()).map_err(|e| e.to_string())? == luts, || "LUT graphs".into())?;

        let asts: Vec<AstGraph> = generate_corpus(&SynthSpec {
            n_designs: 10,
            seed: round,
            ..SynthSpec::default()
        })
        .unwrap()
        .corpus
        .ast
        .into_values()
        .collect();
        let mut buf = Vec::new();
        write_ast_graphs(&mut buf, &asts).unwrap();
        ensure(read_ast_graphs(buf.as_slice()).map_err(|e| e.to_string())? == asts, || "AST graphs".into())?;

        let recs: Vec<EmbeddingRecord> = (0..rng.random_range(1..6))
            .map(|i| {
                let (rows, dim) = (rng.random_range(1..9), rng.random_range(1..33));
                let data = (0..rows * dim).map(|_| rng.random::<f32>() * 8.0 - 4.0).collect();
                EmbeddingRecord::new(format!("e{i}"), rows, dim, data, rows == 1).unwrap()
            })
            .collect();
        let back = read_embeddings(&write_embeddings(&recs)).map_err(|e| e.to_string())?;
        ensure(back.into_values().collect::<Vec<_>>() == recs, || "embeddings".into())?;

        let labels: Vec<LabelRecord> = (0..rng.random_range(1..20))
            .map(|i| LabelRecord::new(format!("d{i:03}"), rng.random_range(1e-3..1e6), rng.random_range(1e-3..1e3)).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels).map_err(|e| e.to_string())?;
        let back = read_labels(buf.as_slice()).map_err(|e| e.to_string())?;
        ensure(back.into_values().collect::<Vec<_>>() == labels, || "labels".into())?;

        let ids: Vec<String> = (0..rng.random_range(10..60)).map(|i| format!("id{i}")).collect();
        let split: DatasetSplit = qorlens_core::graphio::make_split(&ids, rng.random()).map_err(|e| e.to_string())?;
        let p = dir.path().join("split.json");
        save_split(&p, &split).map_err(|e| e.to_string())?;
        ensure(load_split(&p).map_err(|e| e.to_string())? == split, || "split".into())?;
    }
    Ok("repeated pipeline hash-identical, checkpoint and 5 record kinds round-trip (20 rounds)".into())
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match &r {
            Ok(d) => println!("PASS {id:>2} {name}: {d}"),
            Err(d) => println!("FAIL {id:>2} {name}: {d}"),
        }
        results.push((id, name, r));
    };

    run(1, "gradient integrity", &mut gradients);
    run(2, "metric oracle", &mut metric_oracle);
    let corpus = synth(0.1);
    let mut teacher = None;
    run(3, "teacher learnability", &mut || teacher_learnability(&corpus, &mut teacher));
    match &teacher {
        Some(t) => {
            run(4, "KD pull", &mut || kd_pull(&corpus, t));
            run(5, "KD benefit", &mut || kd_benefit(t));
        }
        None => {
            run(4, "KD pull", &mut || Err("no trained teacher".into()));
            run(5, "KD benefit", &mut || Err("no trained teacher".into()));
        }
    }
    run(6, "schedules", &mut schedules);
    run(7, "feature extractor", &mut features);
    run(8, "parser corpus", &mut parser_corpus);
    run(9, "permutation invariance", &mut invariances);
    run(10, "determinism and round trips", &mut determinism);

    let failed: Vec<String> = results.iter().filter(|r| r.2.is_err()).map(|r| format!("{} {}", r.0, r.1)).collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
