//! Classification metrics.

use serde::Serialize;

use crate::error::{HarnessError, Result};

fn check(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(HarnessError::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(HarnessError::Shape("no predictions".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of one-vs-rest F1 over `classes`. A class that is never
/// predicted correctly scores 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    check(pred, truth)?;
    if let Some(&y) = pred.iter().chain(truth).find(|&&y| y >= classes) {
        return Err(HarnessError::Shape(format!("label {y} is not below {classes}")));
    }
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..classes)
        .map(|k| {
            if tp[k] == 0 {
                return 0.0;
            }
            let precision = tp[k] as f64 / (tp[k] + fp[k]) as f64;
            let recall = tp[k] as f64 / (tp[k] + fn_[k]) as f64;
            2.0 * precision * recall / (precision + recall)
        })
        .sum();
    Ok(total / classes as f64)
}

/// Metrics of one evaluated model on one (possibly corrupted) test set.
/// Per-view figures cover only samples where the view is present and are
/// `None` when it is absent everywhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub clustering_accuracy: Option<f64>,
    pub view_accuracy: Vec<Option<f64>>,
    pub mean_uncertainty: Vec<Option<f64>>,
    /// Mean Kalman-smoothed confidence, when the filter ran.
    pub smoothed_confidence: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_empty_agreement() {
        let t = [0, 1, 2, 1];
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(macro_f1(&t, &t, 3).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2, 0, 0], &t).unwrap(), 0.0);
    }

    #[test]
    fn single_class_predictions() {
        let truth = [0, 1, 0, 1];
        let pred = [0; 4];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.5);
        let f1 = macro_f1(&pred, &truth, 2).unwrap();
        assert!((f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(accuracy(&[0], &[0, 1]).is_err());
        assert!(macro_f1(&[0, 3], &[0, 1], 2).is_err());
    }
}
