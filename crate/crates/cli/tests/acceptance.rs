//! Acceptance suite: one PASS/FAIL line per criterion, each checked
//! against an independent oracle.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use cmlm::factor_model::fit_loadings_with_errors;
use cmlm::frontier::{frontier_weights, tangency_portfolio};
use cmlm::inference::{efficiency, implied_risk_aversion, iqr_filter, project_onto_cml, quartiles};
use cmlm::panel::{fit_panel, Effects, PanelObservation, RegressionSpec};
use cmlm::{CapitalMarketLine, FactorObservation, FactorSeries, MarketMoments, PortfolioPoint, ReturnSeries};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, o: &Outcome) {
    println!(
        "{} criterion {id:>2}: {name} ({})",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

// ---------------------------------------------------------------- frontier

fn random_instance(r: &mut ChaCha8Rng) -> MarketMoments {
    let p = r.random_range(2..=10);
    let g = DMatrix::from_fn(p, p, |_, _| 0.2 * normal(r));
    let mut sigma = &g * g.transpose() / p as f64;
    for i in 0..p {
        sigma[(i, i)] += 0.01 + 0.02 * r.random::<f64>();
    }
    let sigma = (&sigma + sigma.transpose()) / 2.0;
    let mu = DVector::from_fn(p, |_, _| 0.05 + 0.05 * normal(r));
    let inv = sigma.clone().try_inverse().unwrap();
    let e = DVector::from_element(p, 1.0);
    let b = mu.dot(&(&inv * &e));
    let c = e.dot(&(&inv * &e));
    let rf = b / c - 0.01 - 0.05 * r.random::<f64>();
    let ids = (0..p).map(|i| format!("X{i}")).collect();
    MarketMoments::new(ids, mu, sigma, rf).unwrap()
}

/// Sharpe ratio of `w = base + Z x`, where the columns of `Z` span the
/// budget-neutral directions, and its gradient in `x`.
fn sharpe_and_gradient(m: &MarketMoments, x: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let p = m.len();
    let mut w = DVector::zeros(p);
    w[p - 1] = 1.0;
    for i in 0..p - 1 {
        w[i] += x[i];
        w[p - 1] -= x[i];
    }
    let sw = m.sigma() * &w;
    let var = sw.dot(&w);
    let sd = var.sqrt();
    let excess = w.dot(m.mu()) - m.rf();
    let s = excess / sd;
    let gw = m.mu() / sd - &sw * (excess / (var * sd));
    let g = DVector::from_fn(p - 1, |i, _| gw[i] - gw[p - 1]);
    (s, g, w)
}

/// Maximises the Sharpe ratio over fully-invested weights by gradient
/// ascent followed by Newton steps on a finite-difference Hessian.
fn numerical_tangency(m: &MarketMoments) -> DVector<f64> {
    let p = m.len();
    let mut x = DVector::from_element(p - 1, 1.0 / p as f64);
    let mut step = 1.0;
    for _ in 0..5000 {
        let (s, g, _) = sharpe_and_gradient(m, &x);
        // Close enough for Newton to take over.
        if g.norm() < 1e-3 {
            break;
        }
        loop {
            let trial = &x + &g * step;
            let (st, _, _) = sharpe_and_gradient(m, &trial);
            if st > s {
                x = trial;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                break;
            }
        }
    }
    for _ in 0..50 {
        let (_, g, _) = sharpe_and_gradient(m, &x);
        if g.norm() < 1e-14 {
            break;
        }
        let h = 1e-6;
        let mut hess = DMatrix::zeros(p - 1, p - 1);
        for j in 0..p - 1 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (_, gp, _) = sharpe_and_gradient(m, &xp);
            let (_, gm, _) = sharpe_and_gradient(m, &xm);
            hess.set_column(j, &((gp - gm) / (2.0 * h)));
        }
        let hess = (&hess + hess.transpose()) / 2.0;
        match hess.lu().solve(&g) {
            Some(d) => x -= d,
            None => break,
        }
    }
    sharpe_and_gradient(m, &x).2
}

fn criterion_tangency() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = random_instance(&mut r);
        let (cml, _) = tangency_portfolio(&m, m.rf()).unwrap();
        let w = numerical_tangency(&m);
        let mu = w.dot(m.mu());
        let sd = (m.sigma() * &w).dot(&w).sqrt();
        worst = worst
            .max(((mu - cml.mu_mkt()) / cml.mu_mkt()).abs())
            .max(((sd - cml.sigma_mkt()) / cml.sigma_mkt()).abs());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-6 && elapsed < Duration::from_secs(10),
        detail: format!("max rel err {worst:.2e} over 200 instances, {:.2}s", elapsed.as_secs_f64()),
    }
}

fn criterion_kkt() -> Outcome {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = random_instance(&mut r);
        let p = m.len();
        let (cml, _) = tangency_portfolio(&m, m.rf()).unwrap();
        for target in [cml.mu_mkt(), m.rf(), 0.5 * (cml.mu_mkt() + m.rf()), 2.0 * cml.mu_mkt()] {
            let fw = frontier_weights(target, &m).unwrap();
            let w = &fw.weights;
            let stationarity = m.sigma() * w * 2.0 + m.mu() * fw.lambda_mult + DVector::from_element(p, fw.nu_mult);
            worst = worst
                .max(stationarity.amax())
                .max((w.sum() - 1.0).abs())
                .max((w.dot(m.mu()) - target).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max residual {worst:.2e} over 200 instances x 4 targets"),
    }
}

// ---------------------------------------------------------------- inference

fn random_cml(r: &mut ChaCha8Rng) -> CapitalMarketLine {
    let rf = 0.03 * r.random::<f64>();
    let sigma = 0.05 + 0.3 * r.random::<f64>();
    let lambda = 0.1 + 1.5 * r.random::<f64>();
    CapitalMarketLine::new(rf, rf + lambda * sigma, sigma).unwrap()
}

fn criterion_projection() -> Outcome {
    let mut r = rng(303);
    let (mut on_line, mut orth): (f64, f64) = (0.0, 0.0);
    let mut n = 0;
    for _ in 0..20 {
        let cml = random_cml(&mut r);
        let lambda = cml.lambda_mkt();
        let mut done = 0;
        while done < 10_000 {
            let sigma = 0.01 + 0.5 * r.random::<f64>();
            let mu = -0.2 + 0.6 * r.random::<f64>();
            let p = PortfolioPoint::new(mu, sigma, cml.rf()).unwrap();
            let Ok(q) = project_onto_cml(&p, &cml) else { continue };
            on_line = on_line.max((q.mu_perp - (cml.rf() + lambda * q.sigma_perp)).abs());
            orth = orth.max(((sigma - q.sigma_perp) + lambda * (mu - q.mu_perp)).abs());
            done += 1;
        }
        n += done;
    }
    Outcome {
        pass: on_line <= 1e-12 && orth <= 1e-12,
        detail: format!("{n} points; line residual {on_line:.2e}, orthogonality {orth:.2e}"),
    }
}

fn criterion_round_trip() -> Outcome {
    let mut r = rng(404);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let cml = random_cml(&mut r);
        for _ in 0..1000 {
            let theta = 10f64.powf(-1.0 + 4.0 * r.random::<f64>());
            // Optimal mix of the market and the risk-free asset.
            let w = cml.lambda_mkt() / (theta * cml.sigma_mkt());
            let p = PortfolioPoint::new(cml.rf() + w * (cml.mu_mkt() - cml.rf()), w * cml.sigma_mkt(), cml.rf()).unwrap();
            let back = implied_risk_aversion(&p, &cml).unwrap();
            worst = worst.max(((back - theta) / theta).abs());
        }
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("max rel err {worst:.2e} over 20,000 samples"),
    }
}

fn valid_points(r: &mut ChaCha8Rng, cml: &CapitalMarketLine, n: usize) -> Vec<PortfolioPoint> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let sigma = 0.01 + 0.5 * r.random::<f64>();
        let mu = cml.rf() + (cml.lambda_mkt() * sigma) * (2.0 * r.random::<f64>() - 0.5);
        let p = PortfolioPoint::new(mu, sigma, cml.rf()).unwrap();
        if implied_risk_aversion(&p, cml).is_ok() {
            out.push(p);
        }
    }
    out
}

fn criterion_sign_law() -> Outcome {
    let mut r = rng(505);
    let mut violations = 0;
    for _ in 0..10 {
        let cml = random_cml(&mut r);
        for p in valid_points(&mut r, &cml, 1000) {
            let e = efficiency(&p, &cml).unwrap();
            let expected = (p.lambda_obs() - cml.lambda_mkt()).signum();
            if e.signum() != expected || e == 0.0 {
                violations += 1;
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in 10,000 points"),
    }
}

fn criterion_monotonicity() -> Outcome {
    let mut r = rng(606);
    let (mut violations, mut checked) = (0, 0);
    for _ in 0..10 {
        let cml = random_cml(&mut r);
        for p in valid_points(&mut r, &cml, 1000) {
            let theta = implied_risk_aversion(&p, &cml).unwrap();
            let wider = PortfolioPoint::new(p.mu_obs(), p.sigma_obs() + 1e-6, cml.rf()).unwrap();
            let richer = PortfolioPoint::new(p.mu_obs() + 1e-6, p.sigma_obs(), cml.rf()).unwrap();
            for q in [wider, richer] {
                checked += 1;
                match implied_risk_aversion(&q, &cml) {
                    Ok(t) if t < theta => {}
                    _ => violations += 1,
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in {checked} perturbations"),
    }
}

// ---------------------------------------------------------------- factor model

fn factor_sample(r: &mut ChaCha8Rng, n: usize) -> FactorSeries {
    let start = NaiveDate::from_ymd_opt(1990, 1, 31).unwrap();
    let obs = (0..n)
        .map(|t| FactorObservation {
            date: start + chrono::Days::new(31 * t as u64),
            mkt_excess: 0.006 + 0.045 * normal(r),
            smb: 0.002 + 0.03 * normal(r),
            hml: 0.003 + 0.03 * normal(r),
            rmw: 0.003 + 0.02 * normal(r),
            cma: 0.003 + 0.02 * normal(r),
            rf: 0.002 + 0.001 * r.random::<f64>(),
        })
        .collect();
    FactorSeries::new(obs).unwrap()
}

fn planted_returns(r: &mut ChaCha8Rng, f: &FactorSeries, id: &str, noise: f64) -> ([f64; 6], ReturnSeries) {
    let mut coef = [0.0; 6];
    coef[0] = 0.002 * normal(r);
    coef[1] = 0.5 + r.random::<f64>();
    for c in coef.iter_mut().skip(2) {
        *c = 0.5 * normal(r);
    }
    let points = f
        .observations()
        .iter()
        .map(|o| {
            let x = o.factors();
            let mut y = o.rf + coef[0];
            for j in 0..5 {
                y += coef[j + 1] * x[j];
            }
            (o.date, y + noise * normal(r))
        })
        .collect();
    (coef, ReturnSeries::new(id, points).unwrap())
}

fn criterion_factor_recovery() -> Outcome {
    let mut r = rng(707);
    let f = factor_sample(&mut r, 120);
    let mut exact_err: f64 = 0.0;
    for i in 0..100 {
        let (coef, ret) = planted_returns(&mut r, &f, &format!("Z{i}"), 0.0);
        let fit = fit_loadings_with_errors(&ret, &f).unwrap();
        let est = [fit.loadings.alpha, fit.loadings.betas[0], fit.loadings.betas[1], fit.loadings.betas[2], fit.loadings.betas[3], fit.loadings.betas[4]];
        for j in 0..6 {
            exact_err = exact_err.max((est[j] - coef[j]).abs());
        }
    }
    let (mut within, mut total, mut assets_all_within) = (0, 0, 0);
    for i in 0..1000 {
        let (coef, ret) = planted_returns(&mut r, &f, &format!("N{i}"), 0.03);
        let fit = fit_loadings_with_errors(&ret, &f).unwrap();
        let l = &fit.loadings;
        let est = [l.alpha, l.betas[0], l.betas[1], l.betas[2], l.betas[3], l.betas[4]];
        let mut all = true;
        for j in 0..6 {
            total += 1;
            if (est[j] - coef[j]).abs() <= 3.0 * fit.std_errors[j] {
                within += 1;
            } else {
                all = false;
            }
        }
        assets_all_within += usize::from(all);
    }
    let rate = within as f64 / total as f64;
    Outcome {
        pass: exact_err <= 1e-10 && rate >= 0.99,
        detail: format!(
            "noise-free max err {exact_err:.2e}; {:.2}% of {total} coefficients within 3 SE ({assets_all_within}/1000 assets with all six)",
            100.0 * rate
        ),
    }
}

// ---------------------------------------------------------------- panel

fn random_panel(r: &mut ChaCha8Rng, n_e: usize, n_t: usize, k: usize) -> Vec<PanelObservation> {
    let alpha: Vec<f64> = (0..n_e).map(|_| normal(r)).collect();
    let gamma: Vec<f64> = (0..n_t).map(|_| normal(r)).collect();
    let beta: Vec<f64> = (0..k).map(|_| normal(r)).collect();
    let mut out = Vec::new();
    for e in 0..n_e {
        for t in 0..n_t {
            // Every entity keeps the first period so the panel stays connected.
            if t > 0 && r.random::<f64>() < 0.25 {
                continue;
            }
            let xs: Vec<f64> = (0..k).map(|_| normal(r) + 0.5 * alpha[e] + 0.3 * gamma[t]).collect();
            let y = alpha[e] + gamma[t] + xs.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + normal(r);
            out.push(PanelObservation {
                entity_id: format!("e{e:02}"),
                time_id: format!("t{t:02}"),
                response: y,
                covariates: xs.iter().enumerate().map(|(j, v)| (format!("x{j}"), *v)).collect::<BTreeMap<_, _>>(),
            });
        }
    }
    out
}

/// Coefficients and standard errors of the slopes from least squares with
/// explicit dummy columns, solved through the normal equations.
fn dummy_ols(data: &[PanelObservation], k: usize, effects: Effects) -> (Vec<f64>, Vec<f64>) {
    let ids = |f: fn(&PanelObservation) -> &str| {
        let mut v: Vec<&str> = data.iter().map(f).collect();
        v.sort();
        v.dedup();
        v
    };
    let entities = ids(|o| o.entity_id.as_str());
    let times = ids(|o| o.time_id.as_str());
    let (use_e, use_t) = match effects {
        Effects::Entity => (true, false),
        Effects::Time => (false, true),
        Effects::TwoWay => (true, true),
        Effects::None => unreachable!(),
    };
    let t_skip = usize::from(use_e && use_t);
    let cols = k + if use_e { entities.len() } else { 0 } + if use_t { times.len() - t_skip } else { 0 };
    let n = data.len();
    let mut x = DMatrix::zeros(n, cols);
    let mut y = DVector::zeros(n);
    for (i, o) in data.iter().enumerate() {
        y[i] = o.response;
        for j in 0..k {
            x[(i, j)] = o.covariates[&format!("x{j}")];
        }
        let mut c = k;
        if use_e {
            x[(i, c + entities.iter().position(|e| *e == o.entity_id).unwrap())] = 1.0;
            c += entities.len();
        }
        if use_t {
            let t = times.iter().position(|t| *t == o.time_id).unwrap();
            if t >= t_skip {
                x[(i, c + t - t_skip)] = 1.0;
            }
        }
    }
    let inv = (x.transpose() * &x).cholesky().expect("full rank").inverse();
    let b = &inv * (x.transpose() * &y);
    let resid = &y - &x * &b;
    let s2 = resid.norm_squared() / (n - cols) as f64;
    ((0..k).map(|j| b[j]).collect(), (0..k).map(|j| (s2 * inv[(j, j)]).sqrt()).collect())
}

fn criterion_fwl() -> Outcome {
    let mut r = rng(808);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n_e = r.random_range(3..=20);
        let n_t = r.random_range(3..=12);
        let k = r.random_range(1..=3);
        let data = random_panel(&mut r, n_e, n_t, k);
        for effects in [Effects::Entity, Effects::Time, Effects::TwoWay] {
            let spec = RegressionSpec {
                effects,
                regressors: (0..k).map(|j| format!("x{j}")).collect(),
                interactions: vec![],
            };
            let fit = fit_panel(&data, &spec).unwrap();
            let (b, se) = dummy_ols(&data, k, effects);
            for j in 0..k {
                let t = fit.term(&format!("x{j}")).unwrap();
                worst = worst.max((t.estimate - b[j]).abs()).max((t.std_error - se[j]).abs());
            }
        }
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max abs diff {worst:.2e} over 100 panels x 3 effects"),
    }
}

// ---------------------------------------------------------------- end to end

fn cmlm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cmlm"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn criterion_end_to_end(dir: &Path) -> Outcome {
    let config = dir.join("synth.cfg");
    std::fs::write(
        &config,
        "seed=1\nn_assets=5\nn_households=1000\nn_months=36\nwindow=36\nnoise_sd=0\nfraction_on_cml=1\n",
    )
    .unwrap();
    let data = dir.join("data");
    let moments = dir.join("moments.cmlm");
    let profiles = dir.join("profiles.csv");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let start = Instant::now();
    let steps: [Vec<String>; 3] = [
        vec!["synth".into(), "--config".into(), p(&config), "--out".into(), p(&data)],
        vec![
            "estimate".into(),
            "--factors".into(),
            p(&data.join("factors.csv")),
            "--returns".into(),
            p(&data.join("returns.csv")),
            "--window".into(),
            "36".into(),
            "--market".into(),
            p(&data.join("market_assets.csv")),
            "--out".into(),
            p(&moments),
        ],
        vec![
            "infer".into(),
            "--moments".into(),
            p(&moments),
            "--positions".into(),
            p(&data.join("positions.csv")),
            "--rf-source".into(),
            "factors".into(),
            "--out".into(),
            p(&profiles),
        ],
    ];
    for s in &steps {
        let args: Vec<&str> = s.iter().map(String::as_str).collect();
        let out = cmlm(&args);
        if !out.status.success() {
            return Outcome {
                pass: false,
                detail: format!("`{}` failed: {}", s[0], String::from_utf8_lossy(&out.stderr)),
            };
        }
    }
    let elapsed = start.elapsed();

    let truth: BTreeMap<String, f64> = std::fs::read_to_string(data.join("theta_true.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (h, t) = l.split_once(',').unwrap();
            (h.to_string(), t.parse().unwrap())
        })
        .collect();
    let mut reader = csv::Reader::from_path(&profiles).unwrap();
    let (mut rows, mut bad_status, mut theta_err, mut e_max): (usize, usize, f64, f64) = (0, 0, 0.0, 0.0);
    let mut households = std::collections::BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        rows += 1;
        if &rec[8] != "ok" {
            bad_status += 1;
            continue;
        }
        let household = rec[0].rsplit_once('-').unwrap().0.to_string();
        let planted = truth[&household];
        households.insert(household);
        let theta: f64 = rec[5].parse().unwrap();
        let e: f64 = rec[7].parse().unwrap();
        theta_err = theta_err.max(((theta - planted) / planted).abs());
        e_max = e_max.max(e.abs());
    }
    Outcome {
        pass: bad_status == 0
            && rows > 0
            && households.len() == truth.len()
            && theta_err <= 1e-6
            && e_max <= 1e-8
            && elapsed < Duration::from_secs(60),
        detail: format!(
            "{rows} account-months of {} households, {bad_status} not ok; max rel theta err {theta_err:.2e}, max |E| {e_max:.2e}, {:.2}s",
            households.len(),
            elapsed.as_secs_f64()
        ),
    }
}

// ---------------------------------------------------------------- IQR

fn criterion_iqr() -> Outcome {
    let mut values: Vec<f64> = (1..=100).map(f64::from).collect();
    values.push(10_000.0);
    let (q1, q2, q3) = quartiles(&values).unwrap();
    // Interpolation at (n - 1) q with n = 101 lands on ranks 25, 50 and 75.
    let expected = (values[25], values[50], values[75]);
    let keep = iqr_filter(&values, 1.5).unwrap();
    let removed: Vec<f64> = values.iter().zip(&keep).filter(|(_, k)| !**k).map(|(v, _)| *v).collect();
    Outcome {
        pass: (q1, q2, q3) == expected && (q1, q2, q3) == (26.0, 51.0, 76.0) && removed == vec![10_000.0],
        detail: format!("quartiles ({q1}, {q2}, {q3}), removed {removed:?}"),
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let results = [
        ("tangency closed form matches numerical Sharpe maximisation", criterion_tangency()),
        ("frontier weights satisfy KKT conditions", criterion_kkt()),
        ("projection lies on the line and is orthogonal", criterion_projection()),
        ("risk aversion round trip through the optimal weight", criterion_round_trip()),
        ("sign of efficiency follows the Sharpe ratio gap", criterion_sign_law()),
        ("risk aversion decreases in volatility and in mean", criterion_monotonicity()),
        ("factor loadings recovered", criterion_factor_recovery()),
        ("within estimators equal dummy-variable least squares", criterion_fwl()),
        ("end-to-end planted risk aversion recovery", criterion_end_to_end(dir.path())),
        ("IQR filter and quartiles", criterion_iqr()),
    ];
    for (i, (name, o)) in results.iter().enumerate() {
        report(i + 1, name, o);
    }
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, o))| !o.pass)
        .map(|(i, _)| i + 1)
        .collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
