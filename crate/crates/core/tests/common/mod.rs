#![allow(dead_code)]

use cmlm::MarketMoments;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Well-conditioned positive-definite covariance: `G Gᵀ/p + d I`.
pub fn random_covariance(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| 0.2 * normal(rng));
    let mut s = &g * g.transpose() / p as f64;
    for i in 0..p {
        s[(i, i)] += 0.01 + 0.02 * rng.random::<f64>();
    }
    (&s + s.transpose()) / 2.0
}

/// Random moments with the risk-free rate safely below the GMV return.
pub fn random_moments(rng: &mut ChaCha8Rng, p: usize) -> MarketMoments {
    let sigma = random_covariance(rng, p);
    let mu = DVector::from_fn(p, |_, _| 0.05 + 0.05 * normal(rng));
    let inv = sigma.clone().try_inverse().unwrap();
    let e = DVector::from_element(p, 1.0);
    let b = mu.dot(&(&inv * &e));
    let c = e.dot(&(&inv * &e));
    let rf = b / c - 0.01 - 0.05 * rng.random::<f64>();
    let ids = (0..p).map(|i| format!("X{i}")).collect();
    MarketMoments::new(ids, mu, sigma, rf).unwrap()
}

pub fn sharpe(w: &DVector<f64>, m: &MarketMoments) -> f64 {
    let mu = w.dot(m.mu());
    let var = (m.sigma() * w).dot(w);
    (mu - m.rf()) / var.sqrt()
}
