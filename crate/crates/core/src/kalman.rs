//! Scalar Kalman filter with identity dynamics and identity observation,
//! used to smooth a stream of fused belief masses.

use crate::error::{Error, Result};

pub const DEFAULT_P0: f64 = 1.0;
pub const DEFAULT_Q: f64 = 1e-4;
pub const DEFAULT_R: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x_hat: f64,
    pub p_var: f64,
    pub q_var: f64,
    pub r_var: f64,
}

impl KalmanState {
    pub fn new(x_hat: f64, p_var: f64, q_var: f64, r_var: f64) -> Result<Self> {
        if !x_hat.is_finite() {
            return Err(Error::Domain(format!("initial estimate {x_hat} is not finite")));
        }
        if !(p_var >= 0.0 && p_var.is_finite()) {
            return Err(Error::Domain(format!("estimate variance {p_var} must be >= 0")));
        }
        if !(q_var >= 0.0 && q_var.is_finite()) {
            return Err(Error::Domain(format!("process noise {q_var} must be >= 0")));
        }
        if !(r_var > 0.0 && r_var.is_finite()) {
            return Err(Error::Domain(format!("measurement noise {r_var} must be > 0")));
        }
        Ok(Self {
            x_hat,
            p_var,
            q_var,
            r_var,
        })
    }

    /// Identity dynamics: the estimate is carried over, its variance grows by `q`.
    pub fn predict(self) -> Self {
        Self {
            p_var: self.p_var + self.q_var,
            ..self
        }
    }

    pub fn update(self, z: f64) -> Self {
        let gain = self.p_var / (self.p_var + self.r_var);
        Self {
            x_hat: self.x_hat + gain * (z - self.x_hat),
            p_var: (1.0 - gain) * self.p_var,
            ..self
        }
    }

    pub fn step(self, z: f64) -> Self {
        self.predict().update(z)
    }
}

/// Noise parameters and initial variance; the initial estimate is taken
/// from the first observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    pub p0: f64,
    pub q: f64,
    pub r: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            p0: DEFAULT_P0,
            q: DEFAULT_Q,
            r: DEFAULT_R,
        }
    }
}

impl KalmanConfig {
    pub fn initial_state(&self, first_observation: f64) -> Result<KalmanState> {
        KalmanState::new(first_observation, self.p0, self.q, self.r)
    }
}

/// Runs predict/update over every observation, returning `(x_hat, p_var)`
/// after each update together with the final state so a stream can be resumed.
pub fn filter_sequence(init: KalmanState, observations: &[f64]) -> Result<(Vec<(f64, f64)>, KalmanState)> {
    if observations.is_empty() {
        return Err(Error::Precondition("Kalman filter needs at least one observation".into()));
    }
    let mut state = init;
    let mut out = Vec::with_capacity(observations.len());
    for &z in observations {
        state = state.step(z);
        out.push((state.x_hat, state.p_var));
    }
    Ok((out, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn state(x: f64, p: f64, q: f64, r: f64) -> KalmanState {
        KalmanState::new(x, p, q, r).unwrap()
    }

    #[test]
    fn predict_cases() {
        let s = state(0.3, 1.0, 0.0, 1.0);
        assert_eq!(s.predict(), s);
        let s = state(0.3, 1.0, 0.5, 1.0).predict();
        assert_eq!(s.p_var, 1.5);
        assert_eq!(s.x_hat, 0.3);
        let mut s = state(0.0, 0.0, 0.25, 1.0);
        for i in 1..=8 {
            s = s.predict();
            assert_abs_diff_eq!(s.p_var, 0.25 * i as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn update_cases() {
        let s = state(0.0, 1.0, 0.0, 1.0).update(1.0);
        assert_eq!((s.x_hat, s.p_var), (0.5, 0.5));
        let s = state(0.2, 1.0, 0.0, 1e12).update(0.9);
        assert_abs_diff_eq!(s.x_hat, 0.2, epsilon = 1e-11);
        let s = state(0.2, 1e12, 0.0, 0.5).update(0.9);
        assert_abs_diff_eq!(s.x_hat, 0.9, epsilon = 1e-11);
    }

    #[test]
    fn rejects_invalid_state() {
        assert!(KalmanState::new(0.0, -1.0, 0.0, 1.0).is_err());
        assert!(KalmanState::new(0.0, 1.0, -1.0, 1.0).is_err());
        assert!(KalmanState::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(filter_sequence(state(0.0, 1.0, 0.0, 1.0), &[]).is_err());
    }

    #[test]
    fn converges_monotonically_to_constant() {
        let (out, _) = filter_sequence(state(0.0, 1.0, 0.0, 0.1), &[0.8; 50]).unwrap();
        let mut prev = 0.0;
        for (x, _) in &out {
            assert!(*x >= prev && *x <= 0.8);
            prev = *x;
        }
        assert!((prev - 0.8).abs() < 1e-2);
    }

    #[test]
    fn tiny_measurement_noise_tracks_observations() {
        let obs = [0.1, 0.9, 0.4, 0.6, 0.3];
        let (out, _) = filter_sequence(state(0.5, 1.0, 1e-4, 1e-12), &obs).unwrap();
        for ((x, _), z) in out.iter().zip(&obs) {
            assert_abs_diff_eq!(*x, *z, epsilon = 1e-7);
        }
    }

    #[test]
    fn variance_non_increasing_without_process_noise() {
        let obs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let (out, _) = filter_sequence(state(0.0, 2.0, 0.0, 0.3), &obs).unwrap();
        let mut prev = 2.0;
        for &(_, p) in &out {
            assert!(p >= 0.0 && p <= prev);
            prev = p;
        }
    }

    #[test]
    fn streaming_equals_batch_and_variance_ignores_data() {
        let a: Vec<f64> = (0..30).map(|i| 0.5 + 0.1 * ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let init = state(0.5, 1.0, 1e-3, 1e-2);
        let (full, _) = filter_sequence(init, &a).unwrap();
        let (head, mid) = filter_sequence(init, &a[..13]).unwrap();
        let (tail, _) = filter_sequence(mid, &a[13..]).unwrap();
        let joined: Vec<_> = head.into_iter().chain(tail).collect();
        assert_eq!(full, joined);
        let (other, _) = filter_sequence(init, &b).unwrap();
        let pa: Vec<u64> = full.iter().map(|(_, p)| p.to_bits()).collect();
        let pb: Vec<u64> = other.iter().map(|(_, p)| p.to_bits()).collect();
        assert_eq!(pa, pb);
    }
}
