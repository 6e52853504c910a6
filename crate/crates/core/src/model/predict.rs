//! Inference: fused-opinion labels and the optional Kalman-smoothed
//! confidence stream.

use crate::error::Result;
use crate::evidence::{ds_bpa, Opinion};
use crate::kalman::{filter_sequence, KalmanConfig};
use crate::model::batch::MultiViewBatch;
use crate::model::loss::forward;
use crate::model::network::MultiViewModel;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub fused: Vec<Opinion>,
    /// Set when the fused opinion is vacuous and the label is a fallback.
    pub low_confidence: Vec<bool>,
    /// Per sample, per view; `None` where the view was absent.
    pub views: Vec<Vec<Option<Opinion>>>,
    /// `m_true` of the fused opinion's BPA for each sample.
    pub observations: Option<Vec<f64>>,
    /// Kalman `(x_hat, p_var)` after each observation.
    pub smoothed: Option<Vec<(f64, f64)>>,
}

/// Labels are the argmax of the fused belief. A vacuous fused opinion
/// carries no belief; its label falls back to the argmax of the fused
/// concentration (class 0 when uniform) and is flagged low-confidence.
///
/// With `kalman` set, every sample's fused opinion is turned into a BPA with
/// `belief = 1 - u` and `sensor = max projected probability`; the resulting
/// `m_true` sequence is filtered in sample order.
pub fn predict(model: &MultiViewModel, batch: &MultiViewBatch, kalman: Option<&KalmanConfig>) -> Result<Prediction> {
    let outputs = forward(model, batch)?;
    let mut labels = Vec::with_capacity(outputs.len());
    let mut fused = Vec::with_capacity(outputs.len());
    let mut low_confidence = Vec::with_capacity(outputs.len());
    let mut views = Vec::with_capacity(outputs.len());
    for o in outputs {
        let vacuous = o.fused_opinion.beliefs().iter().all(|&b| b == 0.0);
        labels.push(if vacuous { argmax(o.fused.alpha()) } else { argmax(o.fused_opinion.beliefs()) });
        low_confidence.push(vacuous);
        views.push(
            o.views
                .iter()
                .map(|d| d.as_ref().map(crate::evidence::dirichlet_to_opinion).transpose())
                .collect::<Result<Vec<_>>>()?,
        );
        fused.push(o.fused_opinion);
    }
    let (observations, smoothed) = match kalman {
        Some(cfg) if !fused.is_empty() => {
            let obs = fused
                .iter()
                .map(|op| {
                    let belief = (1.0 - op.uncertainty()).clamp(0.0, 1.0);
                    let sensor = op.projected().into_iter().fold(0.0, f64::max).clamp(0.0, 1.0);
                    ds_bpa(belief, sensor).map(|b| b.m_true)
                })
                .collect::<Result<Vec<_>>>()?;
            let (track, _) = filter_sequence(cfg.initial_state(obs[0])?, &obs)?;
            (Some(obs), Some(track))
        }
        _ => (None, None),
    };
    Ok(Prediction {
        labels,
        fused,
        low_confidence,
        views,
        observations,
        smoothed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0]), 0);
    }
}
