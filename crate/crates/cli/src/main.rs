// SPDX-License-Identifier: Apache-2.0

//! `qorlens`: data generation, Verilog parsing, training, evaluation and
//! hidden-state export from one binary.

mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qorlens_core::evalx::{evaluate, export_hidden};
use qorlens_core::graphio::{save_ast_graphs, save_embeddings, Corpus, DataError, Target};
use qorlens_core::models::{load_checkpoint, write_checkpoint, Checkpoint};
use qorlens_core::synthgen::{generate, SynthSpec};
use qorlens_core::training::{
    pretrain_teacher, train_baseline, train_student_kd, BaselineVariant, LossWeights, OptimizerConfig,
    TrainConfig, TrainOutcome,
};
use qorlens_core::verilog::{extract_features_108, parse_with_top, to_ast_graph, write_features_csv};

use error::{CliError, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "qorlens", version, about = "Predict post-synthesis area and delay from RTL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus from a JSON spec.
    SynthData {
        spec: PathBuf,
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_designs: Option<usize>,
    },
    /// Parse a Verilog file, print its summary and optionally write the AST
    /// graph and the 108 design features.
    Parse {
        verilog: PathBuf,
        #[arg(long)]
        top: Option<String>,
        #[arg(long)]
        ast_out: Option<PathBuf>,
        #[arg(long)]
        features_out: Option<PathBuf>,
    },
    /// Pretrain the LUT-graph teacher.
    TrainTeacher {
        data_dir: PathBuf,
        ckpt_out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Train the embedding student against a frozen teacher.
    TrainStudent {
        data_dir: PathBuf,
        ckpt_out: PathBuf,
        #[arg(long)]
        teacher: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Train a comparison model: ast_gnn, ast_gnn_kd or llm_decoder.
    TrainBaseline {
        variant: BaselineVariant,
        data_dir: PathBuf,
        ckpt_out: PathBuf,
        /// Required by ast_gnn_kd.
        #[arg(long)]
        teacher: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Score a checkpoint on one split part.
    Evaluate {
        ckpt: PathBuf,
        data_dir: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        report_out: Option<PathBuf>,
        #[arg(long)]
        per_design_out: Option<PathBuf>,
    },
    /// Write last hidden vectors as pooled embedding records.
    ExportHidden {
        ckpt: PathBuf,
        data_dir: PathBuf,
        out: PathBuf,
        /// train, val, test or all.
        #[arg(long, default_value = "all")]
        split: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerFlag {
    Sgd,
    Adam,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    /// JSON training config; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    target: Option<Target>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerFlag>,
    /// Epoch:alpha pairs, e.g. `0:0.5,150:0.75,250:1`.
    #[arg(long)]
    alpha_schedule: Option<String>,
    /// JSONL training log; defaults to `<ckpt_out>.log.jsonl`.
    #[arg(long)]
    log_out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| DataError::io(path, e).into())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes") + "\n"
}

impl TrainFlags {
    /// Defaults, then the config file, then explicit flags.
    fn effective(&self) -> Result<TrainConfig, CliError> {
        let mut cfg: TrainConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => TrainConfig::default(),
        };
        if let Some(t) = self.target {
            cfg.target = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.max_epochs {
            cfg.max_epochs = n;
        }
        if let Some(b) = self.batch_size {
            cfg.batch_size = b;
        }
        if let Some(lr) = self.lr {
            cfg.lr = lr;
        }
        match self.optimizer {
            Some(OptimizerFlag::Sgd) => cfg.optimizer = OptimizerConfig::default(),
            Some(OptimizerFlag::Adam) => cfg.optimizer = OptimizerConfig::adam(),
            None => {}
        }
        if let Some(a) = &self.alpha_schedule {
            cfg.alpha = LossWeights::parse(a)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the checkpoint and its JSONL log, and prints a summary line.
fn finish_training(run: TrainOutcome, ckpt_out: &Path, flags: &TrainFlags) -> Result<(), CliError> {
    let bytes = write_checkpoint(&run.checkpoint);
    write_file(ckpt_out, &bytes)?;
    let log_path = flags.log_out.clone().unwrap_or_else(|| {
        let mut s = ckpt_out.as_os_str().to_owned();
        s.push(".log.jsonl");
        PathBuf::from(s)
    });
    let mut log = serde_json::to_string(&json!({"run": run.checkpoint.meta.training})).unwrap() + "\n";
    for line in &run.log {
        log += &(serde_json::to_string(line).unwrap() + "\n");
    }
    write_file(&log_path, log.as_bytes())?;
    let mut summary = json!({
        "checkpoint_sha256": digest(&bytes),
        "best_epoch": run.best_epoch,
        "best_val": run.best_val,
        "epochs": run.log.len(),
    });
    if let Some((before, after)) = &run.teacher_fingerprints {
        summary["teacher_unchanged"] = json!(before == after);
    }
    println!("{summary}");
    Ok(())
}

fn load_teacher(path: &Path) -> Result<Checkpoint, CliError> {
    Ok(load_checkpoint(path, None)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SynthData {
            spec,
            out_dir,
            seed,
            n_designs,
        } => {
            let mut s: SynthSpec = read_json(&spec)?;
            if let Some(v) = seed {
                s.seed = v;
            }
            if let Some(v) = n_designs {
                s.n_designs = v;
            }
            s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let synth = generate(&s, &out_dir)?;
            let c = &synth.corpus;
            println!(
                "{}",
                json!({"designs": synth.designs.len(), "train": c.split.train.len(), "val": c.split.val.len(), "test": c.split.test.len()})
            );
        }
        Command::Parse {
            verilog,
            top,
            ast_out,
            features_out,
        } => {
            let src = fs::read_to_string(&verilog).map_err(|e| DataError::io(&verilog, e))?;
            let m = parse_with_top(&src, top.as_deref())?;
            let g = to_ast_graph(&m);
            let fv = extract_features_108(&g, &m);
            if let Some(p) = &ast_out {
                save_ast_graphs(p, std::slice::from_ref(&g))?;
            }
            if let Some(p) = &features_out {
                let mut buf = Vec::new();
                write_features_csv(&mut buf, &[(m.name.clone(), fv.clone())])?;
                write_file(p, &buf)?;
            }
            println!(
                "{}",
                json!({
                    "module": m.name,
                    "nodes": g.nodes.len(),
                    "edges": g.edges.len(),
                    "flow_edges": g.flow.len(),
                    "features": fv.to_array().to_vec(),
                })
            );
        }
        Command::TrainTeacher { data_dir, ckpt_out, train } => {
            let cfg = train.effective()?;
            let corpus = Corpus::load(&data_dir)?;
            finish_training(pretrain_teacher(&corpus, &cfg)?, &ckpt_out, &train)?;
        }
        Command::TrainStudent {
            data_dir,
            ckpt_out,
            teacher,
            train,
        } => {
            let cfg = train.effective()?;
            let teacher = load_teacher(&teacher)?;
            let corpus = Corpus::load(&data_dir)?;
            finish_training(train_student_kd(&corpus, &teacher, &cfg)?, &ckpt_out, &train)?;
        }
        Command::TrainBaseline {
            variant,
            data_dir,
            ckpt_out,
            teacher,
            train,
        } => {
            let cfg = train.effective()?;
            let teacher = match (variant, teacher) {
                (BaselineVariant::AstGnnKd, None) => {
                    return Err(CliError::Usage("ast_gnn_kd needs --teacher".into()))
                }
                (_, t) => t.as_deref().map(load_teacher).transpose()?,
            };
            let corpus = Corpus::load(&data_dir)?;
            finish_training(train_baseline(variant, &corpus, teacher.as_ref(), &cfg)?, &ckpt_out, &train)?;
        }
        Command::Evaluate {
            ckpt,
            data_dir,
            split,
            report_out,
            per_design_out,
        } => {
            if !["train", "val", "test"].contains(&split.as_str()) {
                return Err(CliError::Usage(format!("--split {split:?}: expected train, val or test")));
            }
            let bytes = fs::read(&ckpt).map_err(|e| DataError::io(&ckpt, e))?;
            let ck = load_checkpoint(&ckpt, None)?;
            let corpus = Corpus::load(&data_dir)?;
            let (report, per) = evaluate(&ck, &corpus, &split)?;
            let mut out = serde_json::to_value(&report).expect("report serializes");
            out["run"] = json!({
                "command": "evaluate",
                "split": split,
                "checkpoint_sha256": digest(&bytes),
                "model": ck.meta.model.kind,
                "training": ck.meta.training,
            });
            let text = pretty(&out);
            if let Some(p) = &report_out {
                write_file(p, text.as_bytes())?;
            }
            if let Some(p) = &per_design_out {
                let mut buf = Vec::new();
                per.write_csv(&mut buf)?;
                write_file(p, &buf)?;
            }
            print!("{text}");
        }
        Command::ExportHidden {
            ckpt,
            data_dir,
            out,
            split,
        } => {
            let ck = load_checkpoint(&ckpt, None)?;
            let corpus = Corpus::load(&data_dir)?;
            let ids: Vec<String> = match split.as_str() {
                "all" => corpus.split.train.iter().chain(&corpus.split.val).chain(&corpus.split.test).cloned().collect(),
                "train" | "val" | "test" => corpus.ids(&split)?.to_vec(),
                other => return Err(CliError::Usage(format!("--split {other:?}: expected train, val, test or all"))),
            };
            let records = export_hidden(&ck, &corpus, &ids)?;
            save_embeddings(&out, &records)?;
            println!("{}", json!({"records": records.len(), "dim": records.first().map_or(0, |r| r.dim)}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            // keep clap's explanation, drop the usage block that follows it
            let text: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            let text = text.join(" ").trim_start_matches("error: ").to_string();
            eprintln!("{}", json!({"error": "usage", "message": text}));
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
