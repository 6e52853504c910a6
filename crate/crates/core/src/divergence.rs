//! Divergences between Dirichlet distributions.
//!
//! The proper Hölder divergence of two members of the same exponential
//! family has the closed form
//!
//! ```text
//! D(p:q) = F(g*tp)/a + F(g*tq)/b - F((g/a)*tp + (g/b)*tq)
//! ```
//!
//! with `a` the Hölder exponent, `b = a/(a-1)` its conjugate, `g` the power
//! and `F` the Dirichlet log-normalizer. [`phd_mc_oracle`] evaluates the
//! integral definition directly and is kept free of `F` so the two routes
//! stay independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dirichlet::{log_normalizer_grad_raw, log_normalizer_raw, DirichletParams};
use crate::error::{DivergenceArgument, Error, Result};
use crate::special::{ln_gamma, psi, psi1};

/// Minimum sample count accepted by the Monte-Carlo oracles.
pub const MIN_ORACLE_SAMPLES: usize = 10_000;

/// Hölder exponent `alpha_h > 1`, its conjugate `beta_h` and the power `gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderConfig {
    alpha_h: f64,
    beta_h: f64,
    gamma: f64,
}

impl HolderConfig {
    pub fn new(alpha_h: f64, gamma: f64) -> Result<Self> {
        if !(alpha_h.is_finite() && alpha_h > 1.0) {
            return Err(Error::Domain(format!("Hölder exponent must be > 1, got {alpha_h}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Domain(format!("Hölder power must be > 0, got {gamma}")));
        }
        Ok(Self {
            alpha_h,
            beta_h: alpha_h / (alpha_h - 1.0),
            gamma,
        })
    }

    /// Exponent 2, power 1: the Cauchy-Schwarz divergence.
    pub fn cauchy_schwarz() -> Self {
        Self::new(2.0, 1.0).expect("valid constants")
    }

    pub fn alpha_h(&self) -> f64 {
        self.alpha_h
    }

    pub fn beta_h(&self) -> f64 {
        self.beta_h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn same_order(p: &DirichletParams, q: &DirichletParams) -> Result<()> {
    if p.classes() == q.classes() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "divergence between Dir of order {} and {}",
            p.classes(),
            q.classes()
        )))
    }
}

fn check_argument(theta: &[f64], argument: DivergenceArgument) -> Result<()> {
    match theta.iter().enumerate().find(|(_, t)| t.is_nan() || **t <= -1.0) {
        Some((component, &value)) => Err(Error::DivergenceDomain {
            argument,
            component,
            value,
        }),
        None => Ok(()),
    }
}

fn natural(d: &DirichletParams) -> Vec<f64> {
    d.alpha().iter().map(|a| a - 1.0).collect()
}

fn scaled(theta: &[f64], s: f64) -> Vec<f64> {
    theta.iter().map(|t| s * t).collect()
}

fn mix(tp: &[f64], wp: f64, tq: &[f64], wq: f64) -> Vec<f64> {
    tp.iter().zip(tq).map(|(p, q)| wp * p + wq * q).collect()
}

/// Closed-form proper Hölder divergence `D_{alpha,gamma}(p : q)`.
pub fn phd_closed(cfg: &HolderConfig, p: &DirichletParams, q: &DirichletParams) -> Result<f64> {
    same_order(p, q)?;
    let (a, b, g) = (cfg.alpha_h, cfg.beta_h, cfg.gamma);
    let tp = natural(p);
    let tq = natural(q);
    let sp = scaled(&tp, g);
    let sq = scaled(&tq, g);
    let m = mix(&tp, g / a, &tq, g / b);
    check_argument(&sp, DivergenceArgument::ScaledP)?;
    check_argument(&sq, DivergenceArgument::ScaledQ)?;
    check_argument(&m, DivergenceArgument::Mixed)?;
    Ok(log_normalizer_raw(&sp) / a + log_normalizer_raw(&sq) / b - log_normalizer_raw(&m))
}

/// Symmetrised divergence `(D(p:q) + D(q:p)) / 2`, expanded as
/// `[F(g tp) + F(g tq) - F((g/a) tp + (g/b) tq) - F((g/b) tp + (g/a) tq)] / 2`.
///
/// Both pairs of terms are combined with a single commutative addition, so
/// swapping `p` and `q` yields the bitwise-identical result.
pub fn phd_symmetric(cfg: &HolderConfig, p: &DirichletParams, q: &DirichletParams) -> Result<f64> {
    same_order(p, q)?;
    let (a, b, g) = (cfg.alpha_h, cfg.beta_h, cfg.gamma);
    let tp = natural(p);
    let tq = natural(q);
    let sp = scaled(&tp, g);
    let sq = scaled(&tq, g);
    let m1 = mix(&tp, g / a, &tq, g / b);
    let m2 = mix(&tp, g / b, &tq, g / a);
    check_argument(&sp, DivergenceArgument::ScaledP)?;
    check_argument(&sq, DivergenceArgument::ScaledQ)?;
    check_argument(&m1, DivergenceArgument::Mixed)?;
    check_argument(&m2, DivergenceArgument::MixedSwapped)?;
    let outer = log_normalizer_raw(&sp) + log_normalizer_raw(&sq);
    let inner = log_normalizer_raw(&m1) + log_normalizer_raw(&m2);
    Ok(0.5 * (outer - inner))
}

/// Gradient of [`phd_closed`] with respect to the concentration of `p`.
pub fn phd_closed_grad_p(
    cfg: &HolderConfig,
    p: &DirichletParams,
    q: &DirichletParams,
) -> Result<(f64, Vec<f64>)> {
    let value = phd_closed(cfg, p, q)?;
    let (a, b, g) = (cfg.alpha_h, cfg.beta_h, cfg.gamma);
    let tp = natural(p);
    let tq = natural(q);
    let gs = log_normalizer_grad_raw(&scaled(&tp, g));
    let gm = log_normalizer_grad_raw(&mix(&tp, g / a, &tq, g / b));
    let grad = gs.iter().zip(&gm).map(|(s, m)| (g / a) * (s - m)).collect();
    Ok((value, grad))
}

/// `KL(p || q)` in closed form.
pub fn kl_dirichlet(p: &DirichletParams, q: &DirichletParams) -> Result<f64> {
    same_order(p, q)?;
    let sp = p.strength();
    let sq = q.strength();
    let psp = psi(sp);
    let mut acc = ln_gamma(sp) - ln_gamma(sq);
    for (&ap, &aq) in p.alpha().iter().zip(q.alpha()) {
        acc += ln_gamma(aq) - ln_gamma(ap) + (ap - aq) * (psi(ap) - psp);
    }
    Ok(acc)
}

/// Gradient of [`kl_dirichlet`] with respect to the concentration of `p`:
/// `(a_pj - a_qj) psi1(a_pj) - sum_k (a_pk - a_qk) psi1(S_p)`.
pub fn kl_dirichlet_grad_p(p: &DirichletParams, q: &DirichletParams) -> Result<(f64, Vec<f64>)> {
    let value = kl_dirichlet(p, q)?;
    let diff_total: f64 = p.alpha().iter().zip(q.alpha()).map(|(a, b)| a - b).sum();
    let tail = diff_total * psi1(p.strength());
    let grad = p
        .alpha()
        .iter()
        .zip(q.alpha())
        .map(|(&ap, &aq)| (ap - aq) * psi1(ap) - tail)
        .collect();
    Ok((value, grad))
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Running means and co-moments of a fixed-width vector (Welford).
struct Moments<const N: usize> {
    n: f64,
    mean: [f64; N],
    comoment: [[f64; N]; N],
}

impl<const N: usize> Moments<N> {
    fn new() -> Self {
        Self {
            n: 0.0,
            mean: [0.0; N],
            comoment: [[0.0; N]; N],
        }
    }

    fn push(&mut self, x: [f64; N]) {
        self.n += 1.0;
        let mut delta = [0.0; N];
        for ((d, m), xi) in delta.iter_mut().zip(self.mean.iter_mut()).zip(x) {
            *d = xi - *m;
            *m += *d / self.n;
        }
        for (row, d) in self.comoment.iter_mut().zip(delta) {
            for ((c, xj), mj) in row.iter_mut().zip(x).zip(self.mean) {
                *c += d * (xj - mj);
            }
        }
    }

    fn covariance(&self) -> [[f64; N]; N] {
        let mut c = self.comoment;
        c.iter_mut().flatten().for_each(|v| *v /= self.n - 1.0);
        c
    }
}

/// Direct numerical evaluation of the integral definition
///
/// ```text
/// D(p:q) = -log( Int p^{g/a} q^{g/b} / ( (Int p^g)^{1/a} (Int q^g)^{1/b} ) )
/// ```
///
/// by averaging the three integrands over uniform draws on the simplex.
/// The simplex volume and both Dirichlet normalising constants cancel in the
/// ratio (the exponents of each sum to one), so only `prod_k mu_k^{theta_k}`
/// is evaluated. The standard error comes from the delta method on the
/// joint sample covariance of the three integrand averages.
pub fn phd_mc_oracle(
    cfg: &HolderConfig,
    p: &DirichletParams,
    q: &DirichletParams,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    same_order(p, q)?;
    if n_samples < MIN_ORACLE_SAMPLES {
        return Err(Error::Precondition(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {n_samples}"
        )));
    }
    for (name, d) in [("p", p), ("q", q)] {
        if let Some(a) = d.alpha().iter().find(|&&a| a < 1.0) {
            return Err(Error::Precondition(format!(
                "oracle requires every concentration >= 1; {name} has {a}"
            )));
        }
    }
    let (a, b, g) = (cfg.alpha_h, cfg.beta_h, cfg.gamma);
    let tp = natural(p);
    let tq = natural(q);
    let uniform = DirichletParams::uniform(p.classes())?.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = vec![0.0; p.classes()];
    let mut moments = Moments::<3>::new();
    for _ in 0..n_samples {
        uniform.draw_into(&mut rng, &mut mu);
        let mut lp = 0.0;
        let mut lq = 0.0;
        for ((m, x), y) in mu.iter().zip(&tp).zip(&tq) {
            let l = m.ln();
            lp += x * l;
            lq += y * l;
        }
        moments.push([
            (g * lp).exp(),
            (g * lq).exp(),
            (g / a * lp + g / b * lq).exp(),
        ]);
    }
    let [ip, iq, im] = moments.mean;
    let estimate = -im.ln() + ip.ln() / a + iq.ln() / b;
    let grad = [1.0 / (a * ip), 1.0 / (b * iq), -1.0 / im];
    let cov = moments.covariance();
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += grad[i] * cov[i][j] * grad[j];
        }
    }
    Ok(McEstimate {
        estimate,
        std_error: (var.max(0.0) / n_samples as f64).sqrt(),
    })
}

/// Monte-Carlo estimate of `KL(p || q) = E_p[log p - log q]` from draws of `p`.
pub fn kl_mc_oracle(
    p: &DirichletParams,
    q: &DirichletParams,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    same_order(p, q)?;
    if n_samples < 2 {
        return Err(Error::Precondition("KL oracle needs at least 2 samples".into()));
    }
    let sampler = p.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = vec![0.0; p.classes()];
    let mut moments = Moments::<1>::new();
    for _ in 0..n_samples {
        sampler.draw_into(&mut rng, &mut mu);
        moments.push([p.log_pdf_unchecked(&mu) - q.log_pdf_unchecked(&mu)]);
    }
    Ok(McEstimate {
        estimate: moments.mean[0],
        std_error: (moments.covariance()[0][0] / n_samples as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dir(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    #[test]
    fn conjugate_exponent() {
        for a in [1.1, 1.5, 2.0, 3.7] {
            let cfg = HolderConfig::new(a, 1.0).unwrap();
            assert!((1.0 / cfg.alpha_h() + 1.0 / cfg.beta_h() - 1.0).abs() < 1e-12);
        }
        assert_eq!(HolderConfig::cauchy_schwarz().beta_h(), 2.0);
        assert!(HolderConfig::new(1.0, 1.0).is_err());
        assert!(HolderConfig::new(2.0, 0.0).is_err());
    }

    #[test]
    fn phd_self_is_zero() {
        let cfg = HolderConfig::cauchy_schwarz();
        let p = dir(&[2.0, 2.0]);
        assert_abs_diff_eq!(phd_closed(&cfg, &p, &p).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn phd_domain_error_names_argument() {
        // gamma * theta_p = 2 * (-0.6) = -1.2 leaves the valid region.
        let cfg = HolderConfig::new(2.0, 2.0).unwrap();
        let p = dir(&[0.4, 3.0]);
        let q = dir(&[2.0, 2.0]);
        match phd_closed(&cfg, &p, &q) {
            Err(Error::DivergenceDomain { argument, component, .. }) => {
                assert_eq!(argument, DivergenceArgument::ScaledP);
                assert_eq!(component, 0);
            }
            other => panic!("expected domain error, got {other:?}"),
        }
        match phd_closed(&cfg, &q, &p) {
            Err(Error::DivergenceDomain { argument, .. }) => {
                assert_eq!(argument, DivergenceArgument::ScaledQ)
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn mixed_argument_is_valid_whenever_scaled_ones_are() {
        // The mix is a convex combination of gamma*theta_p and gamma*theta_q.
        let cfg = HolderConfig::new(3.0, 1.05).unwrap();
        let p = dir(&[0.05, 2.0]);
        let q = dir(&[0.06, 9.0]);
        assert!(phd_closed(&cfg, &p, &q).is_ok());
        assert!(phd_symmetric(&cfg, &p, &q).is_ok());
    }

    #[test]
    fn cauchy_schwarz_is_symmetric() {
        let cfg = HolderConfig::cauchy_schwarz();
        let p = dir(&[2.0, 5.0, 1.5]);
        let q = dir(&[4.0, 1.0, 3.0]);
        let pq = phd_closed(&cfg, &p, &q).unwrap();
        let qp = phd_closed(&cfg, &q, &p).unwrap();
        assert_abs_diff_eq!(pq, qp, epsilon = 1e-12);
        let s = phd_symmetric(&cfg, &p, &q).unwrap();
        assert_abs_diff_eq!(s, 0.5 * (pq + qp), epsilon = 1e-12);
    }

    #[test]
    fn kl_basics() {
        let u = dir(&[1.0, 1.0]);
        assert_eq!(kl_dirichlet(&u, &u).unwrap(), 0.0);
        let a = dir(&[5.0, 1.0]);
        let b = dir(&[1.0, 5.0]);
        let ab = kl_dirichlet(&a, &b).unwrap();
        assert!(ab > 0.0);
        // Dir(5,1) and Dir(1,5) are mirror images, so this pair cannot witness
        // asymmetry.
        let ba = kl_dirichlet(&b, &a).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        let c = dir(&[5.0, 2.0]);
        assert!(kl_dirichlet(&c, &b).unwrap() != kl_dirichlet(&b, &c).unwrap());
    }

    #[test]
    fn oracle_preconditions() {
        let cfg = HolderConfig::cauchy_schwarz();
        let p = dir(&[0.5, 2.0]);
        let q = dir(&[2.0, 2.0]);
        assert!(matches!(phd_mc_oracle(&cfg, &p, &q, 20_000, 1), Err(Error::Precondition(_))));
        assert!(matches!(phd_mc_oracle(&cfg, &q, &q, 100, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn oracle_is_deterministic_and_zero_on_identity() {
        let cfg = HolderConfig::cauchy_schwarz();
        let p = dir(&[2.0, 3.0, 4.0]);
        let a = phd_mc_oracle(&cfg, &p, &p, 50_000, 5).unwrap();
        let b = phd_mc_oracle(&cfg, &p, &p, 50_000, 5).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert!(a.estimate.abs() <= 3.0 * a.std_error + 1e-12, "{a:?}");
    }

    fn finite_diff<F: Fn(&DirichletParams) -> f64>(f: F, p: &DirichletParams) -> Vec<f64> {
        let h = 1e-6;
        (0..p.classes())
            .map(|k| {
                let mut up = p.alpha().to_vec();
                let mut dn = p.alpha().to_vec();
                up[k] += h;
                dn[k] -= h;
                (f(&dir(&up)) - f(&dir(&dn))) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = HolderConfig::new(1.7, 0.8).unwrap();
        let p = dir(&[1.3, 4.0, 2.2]);
        let q = dir(&[1.0, 1.0, 1.0]);
        let (_, g) = phd_closed_grad_p(&cfg, &p, &q).unwrap();
        let fd = finite_diff(|x| phd_closed(&cfg, x, &q).unwrap(), &p);
        for (a, n) in g.iter().zip(&fd) {
            assert!((a - n).abs() < 1e-7, "{a} vs {n}");
        }
        let (_, g) = kl_dirichlet_grad_p(&p, &q).unwrap();
        let fd = finite_diff(|x| kl_dirichlet(x, &q).unwrap(), &p);
        for (a, n) in g.iter().zip(&fd) {
            assert!((a - n).abs() < 1e-7, "{a} vs {n}");
        }
    }

    proptest! {
        #[test]
        fn symmetric_form_is_bitwise_symmetric(
            ap in prop::collection::vec(0.6f64..10.0, 3),
            aq in prop::collection::vec(0.6f64..10.0, 3),
            alpha_h in 1.1f64..2.5,
            gamma in 0.5f64..1.0,
        ) {
            let cfg = HolderConfig::new(alpha_h, gamma).unwrap();
            let p = dir(&ap);
            let q = dir(&aq);
            let pq = phd_symmetric(&cfg, &p, &q).unwrap();
            let qp = phd_symmetric(&cfg, &q, &p).unwrap();
            prop_assert_eq!(pq.to_bits(), qp.to_bits());
            let mean = 0.5 * (phd_closed(&cfg, &p, &q).unwrap() + phd_closed(&cfg, &q, &p).unwrap());
            prop_assert!((pq - mean).abs() <= 1e-10 * mean.abs().max(1.0));
        }

        #[test]
        fn phd_self_zero_any_exponent(
            ap in prop::collection::vec(1.0f64..10.0, 2..6),
            alpha_h in 1.1f64..2.5,
            gamma in 0.5f64..2.0,
        ) {
            let cfg = HolderConfig::new(alpha_h, gamma).unwrap();
            let p = dir(&ap);
            prop_assert!(phd_closed(&cfg, &p, &p).unwrap().abs() <= 1e-10);
        }

        #[test]
        fn phd_and_kl_non_negative(
            ap in prop::collection::vec(1.0f64..10.0, 3),
            aq in prop::collection::vec(1.0f64..10.0, 3),
            alpha_h in 1.1f64..2.5,
            gamma in 0.5f64..2.0,
        ) {
            let cfg = HolderConfig::new(alpha_h, gamma).unwrap();
            let p = dir(&ap);
            let q = dir(&aq);
            prop_assert!(phd_closed(&cfg, &p, &q).unwrap() >= -1e-10);
            prop_assert!(kl_dirichlet(&p, &q).unwrap() >= -1e-12);
        }
    }
}
