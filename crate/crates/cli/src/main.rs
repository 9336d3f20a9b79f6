//! `simmlp` command-line tool.

mod commands;
mod convert;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "simmlp", version, about = "Train, evaluate and benchmark structure-free MLPs on graphs")]
pub struct Cli {
    /// Root seed; every random stream of the run is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "simmlp-out")]
    pub out: PathBuf,
    /// Worker threads for sweeps and benchmarks.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    /// Floating-point precision; benchmarks default to f32, everything else to f64.
    #[arg(long, global = true, value_enum)]
    pub precision: Option<Precision>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineModel {
    Mlp,
    Gcn,
    Glnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalProtocol {
    Transductive,
    Inductive,
    Coldstart,
    Linkpred,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Feature,
    Edge,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReadoutArg {
    Probe,
    Logits,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an edge list plus feature and label tables into a dataset directory (written to --out).
    Convert {
        /// Edge list, two integer columns per row (tab, comma or space separated).
        #[arg(long)]
        edges: PathBuf,
        /// Feature table: node id followed by the feature values.
        #[arg(long)]
        features: PathBuf,
        /// Label table: node id and label (integer class or class name).
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Skip the first row of every input file.
        #[arg(long)]
        header: bool,
    },
    /// Self-supervised pretraining; writes model.ckpt and train_log.jsonl.
    Pretrain {
        /// Dataset directory, or a name under $SIMMLP_DATA_DIR.
        #[arg(long)]
        data: String,
        /// JSON training config; missing keys take defaults, unknown keys are rejected.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Supervised MLP/GCN training or GLNN distillation on a transductive split.
    TrainBaseline {
        #[arg(long, value_enum)]
        model: BaselineModel,
        #[arg(long)]
        data: String,
        /// JSON config (supervised settings; for glnn `{student, teacher, kd}`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pretrained GCN checkpoint used as the glnn teacher.
        #[arg(long)]
        teacher: Option<PathBuf>,
    },
    /// Multi-seed evaluation; writes report.json.
    Eval {
        #[arg(long, value_enum)]
        protocol: EvalProtocol,
        #[arg(long)]
        data: String,
        /// Score this frozen checkpoint instead of training per seed.
        #[arg(long, conflicts_with = "method")]
        checkpoint: Option<PathBuf>,
        /// simmlp, mlp, gcn, glnn or a JSON method file; trained once per seed.
        #[arg(long)]
        method: Option<String>,
        /// Number of seeds, counting up from --seed.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        /// Readout for --checkpoint (default: probe for simmlp, logits otherwise).
        #[arg(long, value_enum)]
        readout: Option<ReadoutArg>,
        /// Skip smoothness and min-cut metrics.
        #[arg(long)]
        no_metrics: bool,
    },
    /// Robustness sweep over noise or label levels; writes sweep.csv and sweep.json.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated, strictly ascending levels.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long)]
        data: String,
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
    /// Inference latency of MLP encoding against ego-graph GCN inference; writes latency.json.
    Bench {
        /// Dataset to benchmark on; a synthetic graph is generated when absent.
        #[arg(long)]
        data: Option<String>,
        #[arg(long, default_value_t = 20_000)]
        nodes: usize,
        #[arg(long, default_value_t = 20.0)]
        degree: f64,
        #[arg(long, default_value_t = 512)]
        features: usize,
        #[arg(long, default_value_t = 512)]
        hidden: usize,
        #[arg(long, default_value_t = 2)]
        hops: usize,
        #[arg(long, default_value_t = 1000)]
        targets: usize,
        #[arg(long, default_value_t = 30)]
        reps: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        /// SimMLP checkpoint to time instead of a randomly initialised encoder.
        #[arg(long)]
        mlp_checkpoint: Option<PathBuf>,
        /// GCN checkpoint to time instead of a randomly initialised one.
        #[arg(long)]
        gcn_checkpoint: Option<PathBuf>,
    },
}

/// Prints `{"error": kind, "message": ...}` on one line of stderr.
fn report(kind: &str, message: &str) {
    let v = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let msg: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            report("argument", &msg.join(" "));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(commands::error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}
