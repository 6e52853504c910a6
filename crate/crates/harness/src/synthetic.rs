//! Gaussian class clusters observed through several views.

use kphd_core::model::{FeatureMatrix, MultiViewBatch};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub classes: usize,
    /// Feature dimension of each view; the number of entries is the view count.
    pub dims: Vec<usize>,
    /// Distance of each class centre from the origin, in units of `spread`.
    /// With `classes <= dim` the centres are orthogonal, so any two are
    /// `sqrt(2) * separation * spread` apart.
    pub separation: f64,
    /// Within-class standard deviation per feature.
    pub spread: f64,
    /// Per-view multiplier on `separation`; 0 makes a view class-blind.
    pub informativeness: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            dims: vec![8, 8],
            separation: 4.0,
            spread: 0.1,
            informativeness: vec![1.0, 1.0],
            n_train: 1200,
            n_test: 300,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn views(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(HarnessError::config("data.classes", "need at least 2 classes"));
        }
        if self.dims.is_empty() {
            return Err(HarnessError::config("data.dims", "need at least one view"));
        }
        if let Some(m) = self.dims.iter().position(|&d| d == 0) {
            return Err(HarnessError::config("data.dims", format!("view {m} has dimension 0")));
        }
        if self.informativeness.len() != self.dims.len() {
            return Err(HarnessError::config(
                "data.informativeness",
                format!("{} weights for {} views", self.informativeness.len(), self.dims.len()),
            ));
        }
        if self.informativeness.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HarnessError::config("data.informativeness", "weights must be finite and >= 0"));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(HarnessError::config("data.separation", "must be finite and >= 0"));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(HarnessError::config("data.spread", "must be finite and > 0"));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(HarnessError::config("data.n_train", "train and test sizes must be >= 1"));
        }
        Ok(())
    }
}

/// Training and test batches drawn from the same class centres. Classes are
/// balanced (label `i % K` before shuffling); every view is present.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(MultiViewBatch, MultiViewBatch)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centres: Vec<Vec<Vec<f64>>> = cfg
        .dims
        .iter()
        .zip(&cfg.informativeness)
        .map(|(&d, &w)| {
            let scale = cfg.separation * w * cfg.spread;
            directions(cfg.classes, d, &mut rng)
                .into_iter()
                .map(|v| v.into_iter().map(|x| x * scale).collect())
                .collect()
        })
        .collect();
    let train = draw(cfg, &centres, cfg.n_train, &mut rng)?;
    let test = draw(cfg, &centres, cfg.n_test, &mut rng)?;
    Ok((train, test))
}

/// `k` unit vectors in `d` dimensions, mutually orthogonal when `k <= d` so
/// every pair of classes is equally far apart.
fn directions(k: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    while out.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        if out.len() < d {
            for u in &out {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, a) in v.iter_mut().zip(u) {
                    *x -= dot * a;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // A draw that is numerically inside the span is discarded.
        if norm > 1e-6 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

fn draw(cfg: &SyntheticConfig, centres: &[Vec<Vec<f64>>], n: usize, rng: &mut ChaCha8Rng) -> Result<MultiViewBatch> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % cfg.classes).collect();
    labels.shuffle(rng);
    let mut views = Vec::with_capacity(cfg.views());
    for (m, &d) in cfg.dims.iter().enumerate() {
        let mut data = Vec::with_capacity(n * d);
        for &y in &labels {
            for c in &centres[m][y] {
                let z: f64 = StandardNormal.sample(rng);
                data.push(c + cfg.spread * z);
            }
        }
        views.push(FeatureMatrix::new(n, d, data)?);
    }
    Ok(MultiViewBatch::complete(cfg.classes, views, labels)?)
}
