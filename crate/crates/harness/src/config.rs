//! Experiment configuration from TOML. Tables are flattened to dotted keys
//! so every error names the full key path, and unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use kphd_core::divergence::HolderConfig;
use kphd_core::model::{RegularizerKind, TrainConfig};
use kphd_core::KalmanConfig;
use serde_json::json;
use toml::Value;

use crate::corrupt::CorruptionSpec;
use crate::error::{HarnessError, Result};
use crate::synthetic::SyntheticConfig;

pub const QUICKSTART: &str = include_str!("../configs/quickstart.toml");

/// Corrupted test sets to evaluate: every `sigma2` paired with every `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionPlan {
    pub sigma2: Vec<f64>,
    pub eta: Vec<f64>,
    /// `None` targets every view.
    pub views: Option<Vec<usize>>,
}

impl CorruptionPlan {
    pub fn specs(&self, view_count: usize) -> Vec<CorruptionSpec> {
        let views = self.views.clone().unwrap_or_else(|| (0..view_count).collect());
        self.sigma2
            .iter()
            .flat_map(|&s| {
                let views = views.clone();
                self.eta.iter().map(move |&e| CorruptionSpec {
                    noise_sigma2: s,
                    missing_rate: e,
                    target_views: views.clone(),
                })
            })
            .collect()
    }
}

impl Default for CorruptionPlan {
    fn default() -> Self {
        Self {
            sigma2: vec![0.0],
            eta: vec![0.0],
            views: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxes {
    pub alpha_h: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for GridAxes {
    fn default() -> Self {
        Self {
            alpha_h: vec![1.1, 1.3, 1.5, 1.7, 2.0, 2.5],
            gamma: vec![0.5, 0.8, 1.0, 1.3, 1.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: SyntheticConfig,
    pub train: TrainConfig,
    pub corruption: CorruptionPlan,
    pub kalman: Option<KalmanConfig>,
    pub grid: GridAxes,
    pub ablation: Vec<RegularizerKind>,
    pub clustering: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let seed = 7;
        Self {
            seed,
            data: SyntheticConfig {
                seed,
                ..SyntheticConfig::default()
            },
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            corruption: CorruptionPlan::default(),
            kalman: None,
            grid: GridAxes::default(),
            ablation: vec![RegularizerKind::Kl, RegularizerKind::Phd, RegularizerKind::PhdUnmasked],
            clustering: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::config("<file>", e.message()))?;
        let mut keys = Keys::default();
        keys.flatten("", table);
        let cfg = Self::from_keys(&mut keys)?;
        keys.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn quickstart() -> Self {
        Self::from_toml_str(QUICKSTART).expect("bundled quickstart config is valid")
    }

    /// One seed drives data generation, initialisation and shuffling.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.data.seed = seed;
        self.train.seed = seed;
    }

    fn from_keys(k: &mut Keys) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(s) = k.u64("seed")? {
            cfg.set_seed(s);
        }

        let d = &mut cfg.data;
        set(&mut d.classes, k.usize("data.classes")?);
        set(&mut d.dims, k.usize_list("data.dims")?);
        d.informativeness = vec![1.0; d.dims.len()];
        set(&mut d.informativeness, k.f64_list("data.informativeness")?);
        set(&mut d.separation, k.f64("data.separation")?);
        set(&mut d.spread, k.f64("data.spread")?);
        set(&mut d.n_train, k.usize("data.n_train")?);
        set(&mut d.n_test, k.usize("data.n_test")?);

        let t = &mut cfg.train;
        let alpha_h = k.f64("train.alpha_h")?.unwrap_or(t.holder.alpha_h());
        let gamma = k.f64("train.gamma")?.unwrap_or(t.holder.gamma());
        t.holder = HolderConfig::new(alpha_h, gamma).map_err(|e| HarnessError::config("train.alpha_h", e.to_string()))?;
        if let Some(name) = k.string("train.regularizer")? {
            t.regularizer = name.parse().map_err(|e: kphd_core::Error| HarnessError::config("train.regularizer", e.to_string()))?;
        }
        set(&mut t.lambda_max, k.f64("train.lambda_max")?);
        set(&mut t.anneal_epochs, k.usize("train.anneal_epochs")?);
        set(&mut t.learning_rate, k.f64("train.learning_rate")?);
        set(&mut t.epochs, k.usize("train.epochs")?);
        set(&mut t.batch_size, k.usize("train.batch_size")?);
        if let Some(h) = k.usize("train.hidden")? {
            t.hidden = (h > 0).then_some(h);
        }
        set(&mut t.pseudo_view, k.bool("train.pseudo_view")?);

        set(&mut cfg.corruption.sigma2, k.f64_list("corruption.sigma2")?);
        set(&mut cfg.corruption.eta, k.f64_list("corruption.eta")?);
        if let Some(v) = k.usize_list("corruption.views")? {
            cfg.corruption.views = Some(v);
        }

        let mut kalman = KalmanConfig::default();
        let enabled = k.bool("kalman.enabled")?.unwrap_or(false);
        set(&mut kalman.p0, k.f64("kalman.p0")?);
        set(&mut kalman.q, k.f64("kalman.q")?);
        set(&mut kalman.r, k.f64("kalman.r")?);
        cfg.kalman = enabled.then_some(kalman);

        set(&mut cfg.grid.alpha_h, k.f64_list("grid.alpha_h")?);
        set(&mut cfg.grid.gamma, k.f64_list("grid.gamma")?);
        if let Some(names) = k.string_list("ablation.regularizers")? {
            cfg.ablation = names
                .iter()
                .map(|n| n.parse().map_err(|e: kphd_core::Error| HarnessError::config("ablation.regularizers", e.to_string())))
                .collect::<Result<_>>()?;
        }
        set(&mut cfg.clustering, k.bool("clustering.enabled")?);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.train.validate().map_err(|e| HarnessError::config("train", e.to_string()))?;
        let views = self.data.views();
        if self.corruption.sigma2.is_empty() || self.corruption.eta.is_empty() {
            return Err(HarnessError::config("corruption", "sigma2 and eta need at least one value each"));
        }
        for spec in self.corruption.specs(views) {
            spec.validate(views)?;
        }
        if let Some(kc) = &self.kalman {
            for (key, v) in [("kalman.p0", kc.p0), ("kalman.q", kc.q), ("kalman.r", kc.r)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(HarnessError::config(key, format!("{v} is not a finite variance")));
                }
            }
            if kc.r <= 0.0 {
                return Err(HarnessError::config("kalman.r", "must be > 0"));
            }
        }
        for &a in &self.grid.alpha_h {
            for &g in &self.grid.gamma {
                HolderConfig::new(a, g).map_err(|e| HarnessError::config("grid", e.to_string()))?;
            }
        }
        if self.ablation.is_empty() {
            return Err(HarnessError::config("ablation.regularizers", "list is empty"));
        }
        if self.clustering && self.data.classes > crate::clustering::MAX_CLUSTERS {
            return Err(HarnessError::config("clustering.enabled", "too many classes for clustering accuracy"));
        }
        Ok(())
    }

    /// Echo of the effective settings for the JSON summary.
    pub fn to_json(&self) -> serde_json::Value {
        let t = &self.train;
        json!({
            "seed": self.seed,
            "data": self.data,
            "train": {
                "alpha_h": t.holder.alpha_h(),
                "gamma": t.holder.gamma(),
                "regularizer": t.regularizer.as_str(),
                "lambda_max": t.lambda_max,
                "anneal_epochs": t.anneal_epochs,
                "learning_rate": t.learning_rate,
                "epochs": t.epochs,
                "batch_size": t.batch_size,
                "hidden": t.hidden.unwrap_or(0),
                "pseudo_view": t.pseudo_view,
            },
            "corruption": {
                "sigma2": self.corruption.sigma2,
                "eta": self.corruption.eta,
                "views": self.corruption.views,
            },
            "kalman": self.kalman.map(|k| json!({"p0": k.p0, "q": k.q, "r": k.r})),
            "grid": {"alpha_h": self.grid.alpha_h, "gamma": self.grid.gamma},
            "ablation": self.ablation.iter().map(|r| r.as_str()).collect::<Vec<_>>(),
            "clustering": self.clustering,
        })
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Flattened key/value pairs; typed accessors consume entries so leftovers
/// are unknown keys.
#[derive(Default)]
struct Keys {
    map: BTreeMap<String, Value>,
}

impl Keys {
    fn flatten(&mut self, prefix: &str, table: toml::Table) {
        for (k, v) in table {
            let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
            match v {
                Value::Table(t) => self.flatten(&key, t),
                other => {
                    self.map.insert(key, other);
                }
            }
        }
    }

    fn take<T>(&mut self, key: &str, expected: &str, conv: impl Fn(&Value) -> Option<T>) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => conv(&v)
                .map(Some)
                .ok_or_else(|| HarnessError::config(key, format!("expected {expected}, found `{v}`"))),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key, "a number", as_f64)
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.take(key, "a non-negative integer", |v| v.as_integer().and_then(|i| u64::try_from(i).ok()))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key, "a non-negative integer", as_usize)
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.take(key, "true or false", Value::as_bool)
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        self.take(key, "a string", |v| v.as_str().map(str::to_string))
    }

    /// A bare number is read as a one-element list.
    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key, "a number or a list of numbers", |v| match v {
            Value::Array(a) => a.iter().map(as_f64).collect(),
            other => as_f64(other).map(|x| vec![x]),
        })
    }

    fn usize_list(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        self.take(key, "a list of non-negative integers", |v| {
            v.as_array().and_then(|a| a.iter().map(as_usize).collect())
        })
    }

    fn string_list(&mut self, key: &str) -> Result<Option<Vec<String>>> {
        self.take(key, "a list of strings", |v| {
            v.as_array()
                .and_then(|a| a.iter().map(|s| s.as_str().map(str::to_string)).collect())
        })
    }

    fn finish(self) -> Result<()> {
        match self.map.into_keys().next() {
            Some(key) => Err(HarnessError::config(key, "unknown key")),
            None => Ok(()),
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}
