//! Dirichlet distribution over the probability simplex, in both the usual
//! concentration parameterisation and the exponential-family (natural
//! parameter) form.
//!
//! With natural parameter `theta = alpha - 1`, sufficient statistic
//! `log mu` and zero base measure with respect to Lebesgue measure on the
//! simplex, the density is `exp(<theta, log mu> - F(theta))` where
//! `F(theta) = sum_k ln Gamma(theta_k + 1) - ln Gamma(sum_k (theta_k + 1))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, psi};

/// Tolerance on `sum(mu) == 1` for simplex points.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
}

/// Natural parameters `theta_k = alpha_k - 1`; every component is `> -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParams {
    theta: Vec<f64>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Domain(format!(
                "Dirichlet needs K >= 2 classes, got {}",
                alpha.len()
            )));
        }
        if let Some((k, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0))
        {
            return Err(Error::Domain(format!("alpha[{k}] = {a} is not a finite positive value")));
        }
        Ok(Self { alpha })
    }

    /// `Dir(1, ..., 1)`, the uniform distribution on the simplex.
    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![1.0; classes])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn into_alpha(self) -> Vec<f64> {
        self.alpha
    }

    pub fn classes(&self) -> usize {
        self.alpha.len()
    }

    /// Dirichlet strength `S = sum_k alpha_k`.
    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Mean of the distribution, `alpha / S`.
    pub fn mean(&self) -> Vec<f64> {
        let s = self.strength();
        self.alpha.iter().map(|a| a / s).collect()
    }

    pub fn to_natural(&self) -> NaturalParams {
        NaturalParams {
            theta: self.alpha.iter().map(|a| a - 1.0).collect(),
        }
    }

    /// Inverse of [`Self::to_natural`]; the round trip is exact for every
    /// `alpha_k >= 0.5`, where `alpha - 1` is computed without rounding.
    pub fn from_natural(theta: &NaturalParams) -> Self {
        Self {
            alpha: theta.theta.iter().map(|t| t + 1.0).collect(),
        }
    }

    /// Log density at an interior simplex point.
    pub fn log_pdf(&self, mu: &[f64]) -> Result<f64> {
        check_simplex_point(mu, self.classes())?;
        Ok(self.log_pdf_unchecked(mu))
    }

    pub(crate) fn log_pdf_unchecked(&self, mu: &[f64]) -> f64 {
        let dot: f64 = self
            .alpha
            .iter()
            .zip(mu)
            .map(|(a, m)| (a - 1.0) * m.ln())
            .sum();
        dot - self.log_beta()
    }

    /// `ln B(alpha) = sum ln Gamma(alpha_k) - ln Gamma(S)`, i.e. `F(alpha - 1)`.
    pub fn log_beta(&self) -> f64 {
        let s: f64 = self.alpha.iter().map(|&a| ln_gamma(a)).sum();
        s - ln_gamma(self.strength())
    }

    /// `E[log mu_k] = psi(alpha_k) - psi(S)` for every class.
    pub fn expected_log_mu(&self) -> Vec<f64> {
        let ps = psi(self.strength());
        self.alpha.iter().map(|&a| psi(a) - ps).collect()
    }

    /// `n` i.i.d. draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = self.sampler();
        (0..n)
            .map(|_| {
                let mut mu = vec![0.0; self.classes()];
                sampler.draw_into(&mut rng, &mut mu);
                mu
            })
            .collect()
    }

    pub fn sampler(&self) -> DirichletSampler {
        DirichletSampler {
            gammas: self
                .alpha
                .iter()
                .map(|&a| Gamma::new(a, 1.0).expect("alpha validated positive"))
                .collect(),
        }
    }
}

/// Draws simplex points by normalising independent `Gamma(alpha_k, 1)` variates.
#[derive(Debug, Clone)]
pub struct DirichletSampler {
    gammas: Vec<Gamma<f64>>,
}

impl DirichletSampler {
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.gammas.len());
        loop {
            let mut total = 0.0;
            for (o, g) in out.iter_mut().zip(&self.gammas) {
                *o = g.sample(rng);
                total += *o;
            }
            // Reject draws that underflowed to the boundary.
            if total > 0.0 && out.iter().all(|&x| x > 0.0) {
                out.iter_mut().for_each(|x| *x /= total);
                return;
            }
        }
    }
}

impl NaturalParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::Domain(format!("natural parameter needs K >= 2, got {}", theta.len())));
        }
        if let Some((k, t)) = theta
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > -1.0))
        {
            return Err(Error::Domain(format!("theta[{k}] = {t} must be finite and > -1")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// Log-normalizer `F(theta) = sum_k ln Gamma(theta_k + 1) - ln Gamma(sum_k (theta_k + 1))`.
pub fn log_normalizer(theta: &NaturalParams) -> f64 {
    log_normalizer_raw(&theta.theta)
}

/// `F` on a raw slice already known to satisfy `theta_k > -1`.
pub(crate) fn log_normalizer_raw(theta: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut total = 0.0;
    for &t in theta {
        sum += ln_gamma(t + 1.0);
        total += t + 1.0;
    }
    sum - ln_gamma(total)
}

/// Gradient of `F`: `dF/dtheta_k = psi(theta_k + 1) - psi(sum_j (theta_j + 1))`.
pub(crate) fn log_normalizer_grad_raw(theta: &[f64]) -> Vec<f64> {
    let total: f64 = theta.iter().map(|t| t + 1.0).sum();
    let ps = psi(total);
    theta.iter().map(|t| psi(t + 1.0) - ps).collect()
}

fn check_simplex_point(mu: &[f64], classes: usize) -> Result<()> {
    if mu.len() != classes {
        return Err(Error::Shape(format!(
            "simplex point has {} components, distribution has {classes}",
            mu.len()
        )));
    }
    if let Some((k, m)) = mu.iter().enumerate().find(|(_, m)| !(**m > 0.0 && **m < 1.0)) {
        return Err(Error::Domain(format!("mu[{k}] = {m} is not strictly inside (0, 1)")));
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Domain(format!("simplex point sums to {s}")));
    }
    Ok(())
}
