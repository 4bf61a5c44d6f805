mod common;

use cmlm::frontier::{frontier_coefficients, frontier_sigma, frontier_weights, tangency_portfolio, Frontier};
use cmlm::MarketMoments;
use common::{random_moments, rng, sharpe};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn tangency_beats_random_portfolios() {
    let mut r = rng(7);
    for instance in 0..200 {
        let p = 2 + instance % 9;
        let m = random_moments(&mut r, p);
        let (cml, w) = tangency_portfolio(&m, m.rf()).unwrap();
        let best = sharpe(&w, &m);
        assert!((best - cml.lambda_mkt()).abs() <= 1e-9 * best.abs().max(1.0));
        for _ in 0..1000 {
            let mut v = DVector::from_fn(p, |_, _| r.random_range(-1.0..1.0));
            let s: f64 = v.sum();
            if s.abs() < 1e-3 {
                continue;
            }
            v /= s;
            assert!(sharpe(&v, &m) <= best + 1e-12, "instance {instance}");
        }
    }
}

#[test]
fn coefficients_match_explicit_inverse() {
    let mut r = rng(11);
    for p in 2..8 {
        let m = random_moments(&mut r, p);
        let k = frontier_coefficients(&m).unwrap();
        let inv = m.sigma().clone().try_inverse().unwrap();
        let e = DVector::from_element(p, 1.0);
        let a = m.mu().dot(&(&inv * m.mu()));
        let b = m.mu().dot(&(&inv * &e));
        let c = e.dot(&(&inv * &e));
        assert!((k.a_coef - a).abs() <= 1e-9 * a.abs().max(1.0));
        assert!((k.b_coef - b).abs() <= 1e-9 * b.abs().max(1.0));
        assert!((k.c_coef - c).abs() <= 1e-9 * c.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tangency_lies_on_frontier(seed in any::<u64>(), p in 2usize..10) {
        let m = random_moments(&mut rng(seed), p);
        let (cml, _) = tangency_portfolio(&m, m.rf()).unwrap();
        let k = frontier_coefficients(&m).unwrap();
        let s = frontier_sigma(cml.mu_mkt(), &k).unwrap();
        prop_assert!((s - cml.sigma_mkt()).abs() <= 1e-9 * cml.sigma_mkt().max(1.0));
    }

    #[test]
    fn frontier_slope_at_tangency(seed in any::<u64>(), p in 2usize..10) {
        let m = random_moments(&mut rng(seed), p);
        let f = Frontier::new(&m).unwrap();
        let t = f.tangency(m.rf()).unwrap();
        let k = frontier_coefficients(&m).unwrap();
        let mu = t.cml.mu_mkt();
        // sigma^2 = (C mu^2 - 2 B mu + A) / D on the frontier.
        let d = k.a_coef * k.c_coef - k.b_coef * k.b_coef;
        let slope = (k.c_coef * mu - k.b_coef) / (d * f.sigma(mu).unwrap());
        let expected = t.cml.sigma_mkt() / (mu - m.rf());
        prop_assert!((slope - expected).abs() <= 1e-8 * expected.abs().max(1.0), "{slope} vs {expected}");
    }

    #[test]
    fn frontier_weights_kkt(seed in any::<u64>(), p in 2usize..10, target in -0.1f64..0.3) {
        let m = random_moments(&mut rng(seed), p);
        let fw = frontier_weights(target, &m).unwrap();
        let w = &fw.weights;
        prop_assert!((w.sum() - 1.0).abs() <= 1e-9);
        prop_assert!((w.dot(m.mu()) - target).abs() <= 1e-9);
        // Stationarity of ½wᵀΣw with multipliers on the two constraints.
        let grad = m.sigma() * w * 2.0 + m.mu() * fw.lambda_mult + DVector::from_element(p, fw.nu_mult);
        prop_assert!(grad.amax() <= 1e-9 * (1.0 + fw.lambda_mult.abs()));
        let k = frontier_coefficients(&m).unwrap();
        let s = frontier_sigma(target, &k).unwrap();
        let direct = (m.sigma() * w).dot(w).sqrt();
        prop_assert!((s - direct).abs() <= 1e-9 * direct.max(1.0), "{s} vs {direct}");
    }

    #[test]
    fn scaling_units(seed in any::<u64>(), p in 2usize..8, c in 0.1f64..10.0) {
        let m = random_moments(&mut rng(seed), p);
        let scaled = MarketMoments::new(m.asset_ids().to_vec(), m.mu() * c, m.sigma() * (c * c), m.rf() * c).unwrap();
        let (a, wa) = tangency_portfolio(&m, m.rf()).unwrap();
        let (b, wb) = tangency_portfolio(&scaled, scaled.rf()).unwrap();
        prop_assert!((b.mu_mkt() - c * a.mu_mkt()).abs() <= 1e-9 * (c * a.mu_mkt()).abs().max(1.0));
        prop_assert!((b.sigma_mkt() - c * a.sigma_mkt()).abs() <= 1e-9 * (c * a.sigma_mkt()).max(1.0));
        prop_assert!((&wa - &wb).amax() <= 1e-9 * wa.amax().max(1.0));
    }
}
