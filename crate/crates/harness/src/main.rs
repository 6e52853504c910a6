use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kphd_core::divergence::{kl_dirichlet, phd_closed, phd_symmetric, HolderConfig};
use kphd_core::evidence::{ds_combine_multi, Opinion};
use kphd_core::model::{read_model, train, write_model, MultiViewBatch};
use kphd_core::DirichletParams;
use kphd_harness::dataset::read_dataset;
use kphd_harness::experiment::{self, evaluate_model, Report};
use kphd_harness::synthetic::generate_synthetic;
use kphd_harness::{ExperimentConfig, HarnessError, Result};
use log::info;
use serde_json::json;

#[derive(Parser)]
#[command(name = "kphd", version, about = "Evidential multi-view classification with Hölder-divergence regularization")]
struct Cli {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "kphd-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DivergenceKind {
    Phd,
    Symmetric,
    Kl,
}

#[derive(Subcommand)]
enum Command {
    /// Divergence between two Dirichlets given as comma-separated concentrations.
    Divergence {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        q: Vec<f64>,
        #[arg(long, default_value_t = 1.7)]
        alpha_h: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "phd")]
        kind: DivergenceKind,
    },
    /// Combine opinions, each given as `b_1,...,b_K,u`.
    Fuse {
        #[arg(long = "opinion", required = true)]
        opinions: Vec<String>,
    },
    /// Train on the configured synthetic data (or a dataset CSV) and save the model.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a saved model on a dataset CSV or the configured synthetic test set.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// One run per configured regularizer.
    Ablate,
    /// One run per (alpha_h, gamma) grid cell.
    Grid,
    /// Small bundled ablation; ignores --config.
    Quickstart,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn load_dataset(path: &Path, classes: Option<usize>) -> Result<MultiViewBatch> {
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_dataset(BufReader::new(f), classes)
}

fn dirichlet(values: &[f64], key: &str) -> Result<DirichletParams> {
    DirichletParams::new(values.to_vec()).map_err(|e| HarnessError::config(key, e.to_string()))
}

fn save_report(report: &Report, out: &Path) -> Result<()> {
    experiment::write_report(report, out)?;
    println!("{}", out.join("metrics.csv").display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Divergence {
            p,
            q,
            alpha_h,
            gamma,
            kind,
        } => {
            let (p, q) = (dirichlet(p, "--p")?, dirichlet(q, "--q")?);
            let cfg = HolderConfig::new(*alpha_h, *gamma).map_err(|e| HarnessError::config("--alpha-h", e.to_string()))?;
            let value = match kind {
                DivergenceKind::Phd => phd_closed(&cfg, &p, &q)?,
                DivergenceKind::Symmetric => phd_symmetric(&cfg, &p, &q)?,
                DivergenceKind::Kl => kl_dirichlet(&p, &q)?,
            };
            println!("{}", json!({ "divergence": value }));
        }
        Command::Fuse { opinions } => {
            let ops = opinions
                .iter()
                .map(|s| {
                    let mut v = s
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| HarnessError::config("--opinion", format!("`{s}`: {e}")))?;
                    let u = v.pop().ok_or_else(|| HarnessError::config("--opinion", "empty opinion"))?;
                    Opinion::new(v, u).map_err(|e| HarnessError::config("--opinion", e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            let fused = ds_combine_multi(&ops)?;
            println!(
                "{}",
                json!({
                    "beliefs": fused.opinion.beliefs(),
                    "uncertainty": fused.opinion.uncertainty(),
                    "conflicts": fused.conflicts,
                })
            );
        }
        Command::Train { data } => {
            let cfg = load_config(&cli)?;
            let train_set = match data {
                Some(p) => load_dataset(p, None)?,
                None => generate_synthetic(&cfg.data)?.0,
            };
            let outcome = train(&train_set, &cfg.train)?;
            fs::create_dir_all(&cli.out).map_err(|e| HarnessError::io(&cli.out, e))?;
            let model_path = cli.out.join("model.kphd");
            let f = File::create(&model_path).map_err(|e| HarnessError::io(&model_path, e))?;
            write_model(&outcome.model, BufWriter::new(f))?;
            let trace: Vec<_> = outcome
                .trace
                .iter()
                .map(|e| json!({"epoch": e.epoch, "lambda": e.lambda, "loss": e.loss, "accuracy": e.accuracy}))
                .collect();
            let trace_path = cli.out.join("trace.json");
            let text = serde_json::to_string_pretty(&json!({ "config": cfg.to_json(), "trace": trace }))?;
            fs::write(&trace_path, text + "\n").map_err(|e| HarnessError::io(&trace_path, e))?;
            info!("trained {} epochs", outcome.trace.len());
            println!("{}", model_path.display());
        }
        Command::Eval { model, data } => {
            let cfg = load_config(&cli)?;
            let f = File::open(model).map_err(|e| HarnessError::io(model, e))?;
            let model = read_model(BufReader::new(f))?;
            let test = match data {
                Some(p) => load_dataset(p, Some(model.classes()))?,
                None => generate_synthetic(&cfg.data)?.1,
            };
            let metrics = evaluate_model(&model, &test, cfg.kalman.as_ref(), cfg.clustering.then_some(cfg.seed))?;
            fs::create_dir_all(&cli.out).map_err(|e| HarnessError::io(&cli.out, e))?;
            let path = cli.out.join("eval.json");
            let text = serde_json::to_string_pretty(&metrics)?;
            fs::write(&path, text.clone() + "\n").map_err(|e| HarnessError::io(&path, e))?;
            println!("{text}");
        }
        Command::Ablate => save_report(&experiment::ablation(&load_config(&cli)?)?, &cli.out)?,
        Command::Grid => save_report(&experiment::grid(&load_config(&cli)?)?, &cli.out)?,
        Command::Quickstart => save_report(&experiment::quickstart(cli.seed)?, &cli.out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
