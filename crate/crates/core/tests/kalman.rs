use kphd_core::kalman::filter_sequence;
use kphd_core::KalmanConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Iterates the variance recurrence on its own until it stops moving.
fn riccati_fixed_point(q: f64, r: f64) -> f64 {
    let mut p = 1.0;
    for _ in 0..1_000_000 {
        let next = ((p + q) * r) / ((p + q) + r);
        if next == p {
            break;
        }
        p = next;
    }
    p
}

#[test]
fn variance_reaches_riccati_fixed_point() {
    let cfg = KalmanConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise = Normal::new(0.7, 0.1).unwrap();
    let obs: Vec<f64> = (0..1000).map(|_| noise.sample(&mut rng)).collect();
    let (track, last) = filter_sequence(cfg.initial_state(obs[0]).unwrap(), &obs).unwrap();
    let fixed = riccati_fixed_point(cfg.q, cfg.r);
    let quadratic = (-cfg.q + (cfg.q * cfg.q + 4.0 * cfg.q * cfg.r).sqrt()) / 2.0;
    assert!((fixed - quadratic).abs() < 1e-15);
    assert!((last.p_var - fixed).abs() <= 1e-8, "{} vs {fixed}", last.p_var);
    assert_eq!(track.len(), obs.len());
    // The estimate settles near the noise mean.
    assert!((last.x_hat - 0.7).abs() < 0.05);
}
