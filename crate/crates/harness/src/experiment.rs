//! Train, evaluate and report: single runs, the regularizer ablation and the
//! (alpha_h, gamma) grid.

use std::fs;
use std::io::Write;
use std::path::Path;

use kphd_core::divergence::HolderConfig;
use kphd_core::model::{argmax, predict, train, EpochMetrics, MultiViewBatch, MultiViewModel, RegularizerKind};
use kphd_core::KalmanConfig;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::clustering::{cluster_assignments, clustering_accuracy};
use crate::config::ExperimentConfig;
use crate::corrupt::corrupt;
use crate::error::{HarnessError, Result};
use crate::metrics::{accuracy, macro_f1, MetricsReport};
use crate::synthetic::generate_synthetic;

/// Offset separating corruption streams from the data seed.
const CORRUPTION_SEED_OFFSET: u64 = 0x9E37_79B9;

/// One trained model: what differs between runs of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: String,
    pub holder: HolderConfig,
    pub regularizer: RegularizerKind,
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub alpha_h: f64,
    pub gamma: f64,
    pub regularizer: String,
    pub sigma2: f64,
    pub eta: f64,
    pub metrics: MetricsReport,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub spec: RunSpec,
    pub model: MultiViewModel,
    pub trace: Vec<EpochMetrics>,
    /// One per corruption setting, in plan order.
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub kind: &'static str,
    pub views: usize,
    pub config: serde_json::Value,
    pub runs: Vec<RunOutcome>,
}

impl Report {
    pub fn rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.runs.iter().flat_map(|r| &r.rows)
    }
}

/// Metrics of `model` on `test`. Per-view accuracy and uncertainty average
/// over the samples where that view is present.
pub fn evaluate_model(
    model: &MultiViewModel,
    test: &MultiViewBatch,
    kalman: Option<&KalmanConfig>,
    clustering_seed: Option<u64>,
) -> Result<MetricsReport> {
    let pred = predict(model, test, kalman)?;
    let truth = test.labels();
    let k = test.classes();
    let mut view_accuracy = Vec::with_capacity(test.view_count());
    let mut mean_uncertainty = Vec::with_capacity(test.view_count());
    for m in 0..test.view_count() {
        let mut hits = 0usize;
        let mut u_sum = 0.0;
        let mut count = 0usize;
        for (i, ops) in pred.views.iter().enumerate() {
            if let Some(op) = &ops[m] {
                count += 1;
                u_sum += op.uncertainty();
                hits += usize::from(argmax(op.beliefs()) == truth[i]);
            }
        }
        let present = (count > 0).then_some(count as f64);
        view_accuracy.push(present.map(|c| hits as f64 / c));
        mean_uncertainty.push(present.map(|c| u_sum / c));
    }
    let clustering_accuracy = match clustering_seed {
        Some(seed) => {
            let ids = cluster_assignments(model, test, k, seed)?;
            Some(clustering_accuracy(&ids, truth, k)?)
        }
        None => None,
    };
    let smoothed_confidence = pred.smoothed.as_ref().map(|track| {
        let outside = track.iter().filter(|(x, _)| !(0.0..=1.0).contains(x)).count();
        if outside > 0 {
            warn!("{outside} smoothed confidences fell outside [0, 1] and were clamped");
        }
        track.iter().map(|(x, _)| x.clamp(0.0, 1.0)).sum::<f64>() / track.len() as f64
    });
    Ok(MetricsReport {
        accuracy: accuracy(&pred.labels, truth)?,
        macro_f1: macro_f1(&pred.labels, truth, k)?,
        clustering_accuracy,
        view_accuracy,
        mean_uncertainty,
        smoothed_confidence,
    })
}

fn run_one(cfg: &ExperimentConfig, spec: &RunSpec, train_set: &MultiViewBatch, test_set: &MultiViewBatch) -> Result<RunOutcome> {
    let tc = kphd_core::model::TrainConfig {
        holder: spec.holder,
        regularizer: spec.regularizer,
        ..cfg.train.clone()
    };
    let outcome = train(train_set, &tc)?;
    let mut rows = Vec::new();
    for (j, c) in cfg.corruption.specs(cfg.data.views()).into_iter().enumerate() {
        let test = corrupt(test_set, &c, cfg.seed.wrapping_add(CORRUPTION_SEED_OFFSET).wrapping_add(j as u64))?;
        let metrics = evaluate_model(&outcome.model, &test, cfg.kalman.as_ref(), cfg.clustering.then_some(cfg.seed))?;
        rows.push(MetricsRow {
            run_id: spec.run_id.clone(),
            alpha_h: spec.holder.alpha_h(),
            gamma: spec.holder.gamma(),
            regularizer: spec.regularizer.to_string(),
            sigma2: c.noise_sigma2,
            eta: c.missing_rate,
            metrics,
            seed: cfg.seed,
        });
    }
    info!(
        "{}: fused accuracy {:.4} on the first test setting",
        spec.run_id,
        rows.first().map_or(f64::NAN, |r| r.metrics.accuracy)
    );
    Ok(RunOutcome {
        spec: spec.clone(),
        model: outcome.model,
        trace: outcome.trace,
        rows,
    })
}

/// Runs every entry on one shared dataset. Runs are independent and execute
/// in parallel; each trains from the configured seed, so the comparison
/// between runs is paired. Results keep input order.
pub fn run_specs(cfg: &ExperimentConfig, kind: &'static str, specs: &[RunSpec]) -> Result<Report> {
    cfg.validate()?;
    let (train_set, test_set) = generate_synthetic(&cfg.data)?;
    let runs = specs
        .par_iter()
        .map(|s| run_one(cfg, s, &train_set, &test_set))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        kind,
        views: cfg.data.views(),
        config: cfg.to_json(),
        runs,
    })
}

pub fn single_spec(cfg: &ExperimentConfig) -> RunSpec {
    RunSpec {
        run_id: "run".into(),
        holder: cfg.train.holder,
        regularizer: cfg.train.regularizer,
    }
}

pub fn ablation_specs(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    cfg.ablation
        .iter()
        .map(|&r| RunSpec {
            run_id: format!("ablation-{r}"),
            holder: cfg.train.holder,
            regularizer: r,
        })
        .collect()
}

/// Row-major over `alpha_h`, then `gamma`.
pub fn grid_specs(cfg: &ExperimentConfig) -> Result<Vec<RunSpec>> {
    let mut specs = Vec::new();
    for &a in &cfg.grid.alpha_h {
        for &g in &cfg.grid.gamma {
            specs.push(RunSpec {
                run_id: format!("grid-a{a}-g{g}"),
                holder: HolderConfig::new(a, g).map_err(|e| HarnessError::config("grid", e.to_string()))?,
                regularizer: cfg.train.regularizer,
            });
        }
    }
    Ok(specs)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    run_specs(cfg, "run", &[single_spec(cfg)])
}

pub fn ablation(cfg: &ExperimentConfig) -> Result<Report> {
    run_specs(cfg, "ablation", &ablation_specs(cfg))
}

pub fn grid(cfg: &ExperimentConfig) -> Result<Report> {
    run_specs(cfg, "grid", &grid_specs(cfg)?)
}

/// The bundled quickstart: the regularizer ablation at a small scale.
pub fn quickstart(seed: Option<u64>) -> Result<Report> {
    let mut cfg = ExperimentConfig::quickstart();
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    run_specs(&cfg, "quickstart", &ablation_specs(&cfg))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Columns: `run_id, alpha_h, gamma, regularizer, sigma2, eta, acc_view_0..,
/// acc_fused, f1_fused, ca, mean_u_view_0.., seed`. Floats use the shortest
/// round-tripping form; absent values are empty cells.
pub fn write_metrics_csv<'a, W: Write>(rows: impl IntoIterator<Item = &'a MetricsRow>, views: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["run_id", "alpha_h", "gamma", "regularizer", "sigma2", "eta"]
        .map(String::from)
        .to_vec();
    header.extend((0..views).map(|m| format!("acc_view_{m}")));
    header.extend(["acc_fused", "f1_fused", "ca"].map(String::from));
    header.extend((0..views).map(|m| format!("mean_u_view_{m}")));
    header.push("seed".into());
    out.write_record(&header)?;
    for r in rows {
        let m = &r.metrics;
        let mut rec = vec![
            r.run_id.clone(),
            format!("{:?}", r.alpha_h),
            format!("{:?}", r.gamma),
            r.regularizer.clone(),
            format!("{:?}", r.sigma2),
            format!("{:?}", r.eta),
        ];
        rec.extend(m.view_accuracy.iter().map(|&v| cell(v)));
        rec.extend([format!("{:?}", m.accuracy), format!("{:?}", m.macro_f1), cell(m.clustering_accuracy)]);
        rec.extend(m.mean_uncertainty.iter().map(|&v| cell(v)));
        rec.push(r.seed.to_string());
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| HarnessError::io("metrics", e))?;
    Ok(())
}

pub fn summary_json(report: &Report) -> serde_json::Value {
    let runs: Vec<_> = report
        .runs
        .iter()
        .map(|r| {
            json!({
                "run_id": r.spec.run_id,
                "alpha_h": r.spec.holder.alpha_h(),
                "gamma": r.spec.holder.gamma(),
                "regularizer": r.spec.regularizer.as_str(),
                "trace": r.trace.iter().map(|e| json!({
                    "epoch": e.epoch, "lambda": e.lambda, "loss": e.loss, "accuracy": e.accuracy,
                })).collect::<Vec<_>>(),
                "results": r.rows,
            })
        })
        .collect();
    let rows: Vec<&MetricsRow> = report.rows().collect();
    let mean_fused = rows.iter().map(|r| r.metrics.accuracy).sum::<f64>() / rows.len().max(1) as f64;
    json!({
        "kind": report.kind,
        "config": report.config,
        "rows": rows.len(),
        "mean_fused_accuracy": mean_fused,
        "runs": runs,
    })
}

/// Writes `metrics.csv` and `summary.json` into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv_path = dir.join("metrics.csv");
    let f = fs::File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
    write_metrics_csv(report.rows(), report.views, f)?;
    let json_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary_json(report))?;
    fs::write(&json_path, text + "\n").map_err(|e| HarnessError::io(&json_path, e))?;
    Ok(())
}
