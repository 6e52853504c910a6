//! Mini-batch training with Adam and a linear warm-up of the regularizer weight.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::divergence::HolderConfig;
use crate::error::{Error, Result};
use crate::model::batch::MultiViewBatch;
use crate::model::loss::{evaluate, forward, LossReport, Objective, RegularizerKind};
use crate::model::network::{Architecture, MultiViewModel};
use crate::model::predict::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub holder: HolderConfig,
    pub regularizer: RegularizerKind,
    /// Final regularizer weight, in `[0, 1]`.
    pub lambda_max: f64,
    /// Epochs over which the weight ramps linearly from 0 to `lambda_max`.
    pub anneal_epochs: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: Option<usize>,
    pub pseudo_view: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            holder: HolderConfig::new(1.7, 1.0).expect("valid constants"),
            regularizer: RegularizerKind::Phd,
            lambda_max: 0.5,
            anneal_epochs: 10,
            learning_rate: 0.01,
            epochs: 40,
            batch_size: 64,
            hidden: Some(16),
            pseudo_view: true,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_max) {
            return Err(Error::Domain(format!("lambda_max {} outside [0, 1]", self.lambda_max)));
        }
        if self.anneal_epochs == 0 {
            return Err(Error::Domain("anneal_epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be >= 1".into()));
        }
        if self.hidden == Some(0) {
            return Err(Error::Domain("hidden layer width must be >= 1".into()));
        }
        Ok(())
    }

    /// `lambda_t = lambda_max * min(1, epoch / anneal_epochs)`.
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        self.lambda_max * (epoch as f64 / self.anneal_epochs as f64).min(1.0)
    }

    pub fn objective_at(&self, epoch: usize) -> Objective {
        Objective {
            holder: self.holder,
            regularizer: self.regularizer,
            lambda: self.lambda_at(epoch),
        }
    }

    pub fn architecture(&self, batch: &MultiViewBatch) -> Architecture {
        Architecture {
            classes: batch.classes(),
            view_dims: batch.view_dims(),
            hidden: self.hidden,
            pseudo_view: self.pseudo_view,
        }
    }
}

/// Loss of the model on `batch` at `epoch`, with gradient.
pub fn total_loss(model: &MultiViewModel, batch: &MultiViewBatch, cfg: &TrainConfig, epoch: usize) -> Result<LossReport> {
    evaluate(model, batch, &cfg.objective_at(epoch), epoch, true)
}

/// Adam with bias correction; moment decays 0.9 / 0.999, epsilon 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; params],
            v: vec![0.0; params],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lambda: f64,
    /// Full-data loss after the epoch's updates, at that epoch's `lambda_t`.
    pub loss: f64,
    /// Fused-opinion accuracy on the training data after the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MultiViewModel,
    pub trace: Vec<EpochMetrics>,
}

fn fused_accuracy(model: &MultiViewModel, data: &MultiViewBatch) -> Result<f64> {
    let out = forward(model, data)?;
    let hits = out
        .iter()
        .zip(data.labels())
        .filter(|(o, &y)| argmax(o.fused_opinion.beliefs()) == y)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Trains from a seeded initialisation; deterministic for a given config.
pub fn train(data: &MultiViewBatch, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = MultiViewModel::init(&cfg.architecture(data), &mut rng)?;
    train_from(model, data, cfg, &mut rng)
}

/// Continues training an existing model with the given random stream.
pub fn train_from(
    mut model: MultiViewModel,
    data: &MultiViewBatch,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Shape("training set is empty".into()));
    }
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let obj = cfg.objective_at(epoch);
        order.shuffle(rng);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.subset(idx);
            let report = evaluate(&model, &batch, &obj, epoch, true)?;
            if let Some(term) = report.breakdown.non_finite_term() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    term: term.into(),
                });
            }
            let grad = report.grad.expect("gradient requested");
            if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    term: format!("gradient[{k}]"),
                });
            }
            adam.update(&mut params, &grad);
            model.set_params(&params)?;
        }
        let full = evaluate(&model, data, &obj, epoch, false)?;
        trace.push(EpochMetrics {
            epoch,
            lambda: obj.lambda,
            loss: full.loss,
            accuracy: fused_accuracy(&model, data)?,
        });
    }
    Ok(TrainOutcome { model, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_schedule() {
        let cfg = TrainConfig {
            lambda_max: 0.8,
            anneal_epochs: 4,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lambda_at(0), 0.0);
        assert_eq!(cfg.lambda_at(2), 0.4);
        assert_eq!(cfg.lambda_at(4), 0.8);
        assert_eq!(cfg.lambda_at(100), 0.8);
        let mut prev = 0.0;
        for e in 0..20 {
            let l = cfg.lambda_at(e);
            assert!(l >= prev && l <= cfg.lambda_max);
            prev = l;
        }
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { anneal_epochs: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { lambda_max: 1.5, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..ok }.validate().is_err());
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = vec![1.0, -1.0];
        adam.update(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }
}
