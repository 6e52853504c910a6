//! Test-time corruption: additive Gaussian noise and view dropout.

use kphd_core::model::MultiViewBatch;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Variance of the additive noise.
    pub noise_sigma2: f64,
    /// Probability that a target view is dropped for a sample.
    pub missing_rate: f64,
    /// Views the corruption applies to (0-based).
    pub target_views: Vec<usize>,
}

impl CorruptionSpec {
    pub fn clean() -> Self {
        Self {
            noise_sigma2: 0.0,
            missing_rate: 0.0,
            target_views: Vec::new(),
        }
    }

    pub fn validate(&self, views: usize) -> Result<()> {
        if !(self.noise_sigma2.is_finite() && self.noise_sigma2 >= 0.0) {
            return Err(HarnessError::config("corruption.sigma2", format!("{} is not >= 0", self.noise_sigma2)));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(HarnessError::config("corruption.eta", format!("{} is outside [0, 1]", self.missing_rate)));
        }
        if let Some(m) = self.target_views.iter().find(|&&m| m >= views) {
            return Err(HarnessError::config(
                "corruption.views",
                format!("view {m} does not exist ({views} views)"),
            ));
        }
        Ok(())
    }
}

/// Noise and dropout use separate random streams, so changing one setting
/// leaves the other's draws alone. A sample's last present view is never
/// dropped.
pub fn corrupt(batch: &MultiViewBatch, spec: &CorruptionSpec, seed: u64) -> Result<MultiViewBatch> {
    spec.validate(batch.view_count())?;
    let mut out = batch.clone();
    if spec.noise_sigma2 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let noise = Normal::new(0.0, spec.noise_sigma2.sqrt()).map_err(|e| HarnessError::config("corruption.sigma2", e.to_string()))?;
        for &m in &spec.target_views {
            let view = out.view_mut(m);
            for i in 0..view.rows() {
                for x in view.row_mut(i) {
                    *x += noise.sample(&mut rng);
                }
            }
        }
    }
    if spec.missing_rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        for i in 0..out.len() {
            for &m in &spec.target_views {
                let drop = rng.random_bool(spec.missing_rate);
                if drop && out.is_present(i, m) && out.present_count(i) > 1 {
                    out.set_present(i, m, false);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_synthetic, SyntheticConfig};

    fn data(n: usize) -> MultiViewBatch {
        let cfg = SyntheticConfig {
            n_train: 1,
            n_test: n,
            ..SyntheticConfig::default()
        };
        generate_synthetic(&cfg).unwrap().1
    }

    #[test]
    fn clean_spec_is_identity() {
        let b = data(50);
        let spec = CorruptionSpec {
            target_views: vec![0, 1],
            ..CorruptionSpec::clean()
        };
        assert_eq!(corrupt(&b, &spec, 1).unwrap(), b);
    }

    #[test]
    fn full_dropout_leaves_single_view() {
        let b = data(40);
        let spec = CorruptionSpec {
            missing_rate: 1.0,
            target_views: vec![1],
            ..CorruptionSpec::clean()
        };
        let c = corrupt(&b, &spec, 2).unwrap();
        for i in 0..c.len() {
            assert!(c.is_present(i, 0) && !c.is_present(i, 1));
        }
    }

    #[test]
    fn never_drops_every_view() {
        let b = data(200);
        let spec = CorruptionSpec {
            missing_rate: 1.0,
            target_views: vec![0, 1],
            ..CorruptionSpec::clean()
        };
        let c = corrupt(&b, &spec, 3).unwrap();
        assert!((0..c.len()).all(|i| c.present_count(i) == 1));
    }

    #[test]
    fn realised_missing_rate_is_binomial() {
        let n = 10_000;
        let b = data(n);
        let spec = CorruptionSpec {
            missing_rate: 0.3,
            target_views: vec![1],
            ..CorruptionSpec::clean()
        };
        let c = corrupt(&b, &spec, 4).unwrap();
        let missing = (0..n).filter(|&i| !c.is_present(i, 1)).count() as f64;
        let sd = (n as f64 * 0.3 * 0.7).sqrt();
        assert!((missing - 0.3 * n as f64).abs() <= 3.0 * sd, "{missing}");
    }

    #[test]
    fn noise_has_requested_variance_on_targets_only() {
        let b = data(5000);
        let spec = CorruptionSpec {
            noise_sigma2: 0.03,
            target_views: vec![0],
            ..CorruptionSpec::clean()
        };
        let c = corrupt(&b, &spec, 5).unwrap();
        assert_eq!(c.view(1), b.view(1));
        let diffs: Vec<f64> = c.view(0).data().iter().zip(b.view(0).data()).map(|(x, y)| x - y).collect();
        let var = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        assert!((var - 0.03).abs() < 0.002, "{var}");
    }

    #[test]
    fn rejects_out_of_range() {
        let b = data(5);
        let bad = CorruptionSpec {
            missing_rate: 1.5,
            ..CorruptionSpec::clean()
        };
        assert!(matches!(corrupt(&b, &bad, 0), Err(HarnessError::Config { .. })));
        let bad = CorruptionSpec {
            target_views: vec![2],
            ..CorruptionSpec::clean()
        };
        assert!(corrupt(&b, &bad, 0).is_err());
    }
}
