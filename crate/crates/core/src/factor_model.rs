//! Five-factor loadings and the moment estimates built from them.
//!
//! Each asset's excess return is regressed on an intercept and the five
//! factors `[mkt − rf, SMB, HML, RMW, CMA]`. The expected-return vector and
//! covariance matrix then follow from the fitted loadings:
//!
//! ```text
//! μ̂ = r̄f + α̂ + B̂ f̄
//! Σ̂ = B̂ Cov(f) B̂ᵀ + diag(Var ε)
//! ```
//!
//! `r̄f` is the mean risk-free rate of the estimation window, `Cov(f)` uses the
//! `n − 1` denominator and `Var ε` the OLS `n − 6` denominator.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::inference::PortfolioPoint;
use crate::linalg;

pub const N_FACTORS: usize = 5;
/// Intercept, five slopes and one residual degree of freedom.
pub const MIN_OBSERVATIONS: usize = N_FACTORS + 2;
/// Budget tolerance on portfolio weights.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

pub const FACTOR_NAMES: [&str; N_FACTORS] = ["mkt_rf", "smb", "hml", "rmw", "cma"];

pub type FactorVector = SVector<f64, N_FACTORS>;
pub type FactorCovariance = SMatrix<f64, N_FACTORS, N_FACTORS>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FactorError {
    #[error("insufficient data: {available} observations, {required} required")]
    InsufficientData { required: usize, available: usize },
    #[error("regressors are rank deficient on the common sample")]
    RankDeficient,
    #[error("no assets to estimate")]
    EmptyUniverse,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("weights sum to {sum}, expected 1")]
    WeightsNotNormalized { sum: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("dates must be strictly increasing ({0})")]
    UnorderedDates(NaiveDate),
    #[error("invalid loadings for {asset_id}: {reason}")]
    InvalidLoadings { asset_id: String, reason: String },
    #[error("covariance matrix is not symmetric")]
    Asymmetric,
    #[error("duplicate asset id {0}")]
    DuplicateAsset(String),
    #[error("portfolio has zero volatility")]
    ZeroVolatility,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorObservation {
    pub date: NaiveDate,
    /// Market excess return `r_mkt − r_f`.
    pub mkt_excess: f64,
    pub smb: f64,
    pub hml: f64,
    pub rmw: f64,
    pub cma: f64,
    pub rf: f64,
}

impl FactorObservation {
    pub fn factors(&self) -> FactorVector {
        FactorVector::new(self.mkt_excess, self.smb, self.hml, self.rmw, self.cma)
    }

    fn is_finite(&self) -> bool {
        self.factors().iter().all(|v| v.is_finite()) && self.rf.is_finite()
    }
}

/// Dated factor observations, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    observations: Vec<FactorObservation>,
}

impl FactorSeries {
    pub fn new(observations: Vec<FactorObservation>) -> Result<Self, FactorError> {
        for (i, obs) in observations.iter().enumerate() {
            if !obs.is_finite() {
                return Err(FactorError::NonFinite(format!("factors at {}", obs.date)));
            }
            if i > 0 && observations[i - 1].date >= obs.date {
                return Err(FactorError::UnorderedDates(obs.date));
            }
        }
        Ok(Self { observations })
    }

    pub fn observations(&self) -> &[FactorObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<&FactorObservation> {
        self.observations
            .binary_search_by_key(&date, |o| o.date)
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn rf_mean(&self) -> f64 {
        self.observations.iter().map(|o| o.rf).sum::<f64>() / self.len() as f64
    }

    pub fn factor_mean(&self) -> FactorVector {
        let sum = self
            .observations
            .iter()
            .fold(FactorVector::zeros(), |acc, o| acc + o.factors());
        sum / self.len() as f64
    }

    /// Sample covariance of the factor vectors, `n − 1` denominator.
    pub fn factor_covariance(&self) -> FactorCovariance {
        let mean = self.factor_mean();
        let mut cov = FactorCovariance::zeros();
        for o in &self.observations {
            let d = o.factors() - mean;
            cov += d * d.transpose();
        }
        cov /= (self.len() - 1) as f64;
        symmetrize(&mut cov);
        cov
    }
}

/// One asset's dated returns, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    asset_id: String,
    points: Vec<(NaiveDate, f64)>,
}

impl ReturnSeries {
    pub fn new(asset_id: impl Into<String>, points: Vec<(NaiveDate, f64)>) -> Result<Self, FactorError> {
        let asset_id = asset_id.into();
        for (i, &(date, r)) in points.iter().enumerate() {
            if !r.is_finite() {
                return Err(FactorError::NonFinite(format!("{asset_id} at {date}")));
            }
            if i > 0 && points[i - 1].0 >= date {
                return Err(FactorError::UnorderedDates(date));
            }
        }
        Ok(Self { asset_id, points })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn points(&self) -> &[(NaiveDate, f64)] {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorLoadings {
    pub asset_id: String,
    pub alpha: f64,
    pub betas: FactorVector,
    pub resid_variance: f64,
    pub n_obs: usize,
}

impl FactorLoadings {
    fn validate(&self) -> Result<(), FactorError> {
        let bad = |reason: &str| FactorError::InvalidLoadings {
            asset_id: self.asset_id.clone(),
            reason: reason.to_string(),
        };
        if !self.alpha.is_finite() || self.betas.iter().any(|b| !b.is_finite()) {
            return Err(bad("non-finite coefficient"));
        }
        if !(self.resid_variance >= 0.0 && self.resid_variance.is_finite()) {
            return Err(bad("residual variance must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Loadings plus the inferential by-products of the regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingsFit {
    pub loadings: FactorLoadings,
    /// Standard errors ordered `[alpha, beta_1..beta_5]`.
    pub std_errors: [f64; N_FACTORS + 1],
    /// `Xᵀε̂`, which vanishes at the least-squares solution.
    pub normal_residual: [f64; N_FACTORS + 1],
}

pub fn fit_loadings(asset_returns: &ReturnSeries, factors: &FactorSeries) -> Result<FactorLoadings, FactorError> {
    fit_loadings_with_errors(asset_returns, factors).map(|f| f.loadings)
}

/// OLS of `r − rf` on an intercept and the five factors over the dates
/// common to both series.
pub fn fit_loadings_with_errors(
    asset_returns: &ReturnSeries,
    factors: &FactorSeries,
) -> Result<LoadingsFit, FactorError> {
    let common: Vec<(f64, &FactorObservation)> = asset_returns
        .points()
        .iter()
        .filter_map(|&(date, r)| factors.get(date).map(|f| (r, f)))
        .collect();
    let n = common.len();
    if n < MIN_OBSERVATIONS {
        return Err(FactorError::InsufficientData {
            required: MIN_OBSERVATIONS,
            available: n,
        });
    }

    let k = N_FACTORS + 1;
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (row, (r, f)) in common.iter().enumerate() {
        x[(row, 0)] = 1.0;
        for (j, v) in f.factors().iter().enumerate() {
            x[(row, j + 1)] = *v;
        }
        y[row] = r - f.rf;
    }

    let fit = linalg::least_squares(&x, &y).map_err(|_| FactorError::RankDeficient)?;
    let dof = (n - k) as f64;
    let resid_variance = fit.rss / dof;
    let mut std_errors = [0.0; N_FACTORS + 1];
    for (j, se) in std_errors.iter_mut().enumerate() {
        *se = (resid_variance * fit.xtx_inverse[(j, j)]).max(0.0).sqrt();
    }
    let xte = x.transpose() * &fit.residuals;
    let mut normal_residual = [0.0; N_FACTORS + 1];
    normal_residual.copy_from_slice(xte.as_slice());

    let c = &fit.coefficients;
    let loadings = FactorLoadings {
        asset_id: asset_returns.asset_id().to_string(),
        alpha: c[0],
        betas: FactorVector::new(c[1], c[2], c[3], c[4], c[5]),
        resid_variance,
        n_obs: n,
    };
    Ok(LoadingsFit {
        loadings,
        std_errors,
        normal_residual,
    })
}

/// Mean vector and covariance matrix over an ordered asset universe.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketMoments {
    asset_ids: Vec<String>,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    rf: f64,
}

impl MarketMoments {
    pub fn new(asset_ids: Vec<String>, mu: DVector<f64>, sigma: DMatrix<f64>, rf: f64) -> Result<Self, FactorError> {
        let p = asset_ids.len();
        if mu.len() != p {
            return Err(FactorError::DimensionMismatch {
                expected: p,
                actual: mu.len(),
            });
        }
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(FactorError::DimensionMismatch {
                expected: p,
                actual: sigma.nrows().max(sigma.ncols()),
            });
        }
        if !rf.is_finite() || mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(FactorError::NonFinite("moments".into()));
        }
        for i in 0..p {
            for j in 0..i {
                let (a, b) = (sigma[(i, j)], sigma[(j, i)]);
                if (a - b).abs() > 1e-12 * f64::max(1.0, a.abs()) {
                    return Err(FactorError::Asymmetric);
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &asset_ids {
            if !seen.insert(id.as_str()) {
                return Err(FactorError::DuplicateAsset(id.clone()));
            }
        }
        Ok(Self {
            asset_ids,
            mu,
            sigma,
            rf,
        })
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn rf(&self) -> f64 {
        self.rf
    }

    pub fn len(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.asset_ids.is_empty()
    }

    pub fn index_of(&self, asset_id: &str) -> Option<usize> {
        self.asset_ids.iter().position(|a| a == asset_id)
    }
}

/// Moments kept in factor form: loadings plus factor mean and covariance.
///
/// Equivalent to [`MarketMoments`] but linear in the number of assets, so a
/// large universe can be stored and sub-universes densified on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMoments {
    pub rf: f64,
    pub factor_mean: FactorVector,
    pub factor_cov: FactorCovariance,
    pub loadings: Vec<FactorLoadings>,
}

impl FactorMoments {
    pub fn estimate(loadings: &[FactorLoadings], factors: &FactorSeries) -> Result<Self, FactorError> {
        if loadings.is_empty() {
            return Err(FactorError::EmptyUniverse);
        }
        if factors.len() < 2 {
            return Err(FactorError::InsufficientData {
                required: 2,
                available: factors.len(),
            });
        }
        for l in loadings {
            l.validate()?;
        }
        Ok(Self {
            rf: factors.rf_mean(),
            factor_mean: factors.factor_mean(),
            factor_cov: factors.factor_covariance(),
            loadings: loadings.to_vec(),
        })
    }

    pub fn mean_return(&self, l: &FactorLoadings) -> f64 {
        self.rf + l.alpha + l.betas.dot(&self.factor_mean)
    }

    pub fn find(&self, asset_id: &str) -> Option<&FactorLoadings> {
        self.loadings.iter().find(|l| l.asset_id == asset_id)
    }

    /// Dense moments over all assets, in loading order.
    pub fn to_market_moments(&self) -> Result<MarketMoments, FactorError> {
        let refs: Vec<&FactorLoadings> = self.loadings.iter().collect();
        self.densify(&refs)
    }

    /// Dense moments over `asset_ids`, in the given order.
    pub fn subset(&self, asset_ids: &[&str]) -> Option<Result<MarketMoments, FactorError>> {
        let mut refs = Vec::with_capacity(asset_ids.len());
        for id in asset_ids {
            refs.push(self.find(id)?);
        }
        Some(self.densify(&refs))
    }

    fn densify(&self, loadings: &[&FactorLoadings]) -> Result<MarketMoments, FactorError> {
        if loadings.is_empty() {
            return Err(FactorError::EmptyUniverse);
        }
        let p = loadings.len();
        let mu = DVector::from_iterator(p, loadings.iter().map(|l| self.mean_return(l)));
        let mut b = DMatrix::zeros(p, N_FACTORS);
        for (i, l) in loadings.iter().enumerate() {
            for j in 0..N_FACTORS {
                b[(i, j)] = l.betas[j];
            }
        }
        let cov = DMatrix::from_iterator(N_FACTORS, N_FACTORS, self.factor_cov.iter().cloned());
        let bc = &b * cov;
        let mut sigma = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let v = bc.row(i).dot(&b.row(j));
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
            sigma[(i, i)] += loadings[i].resid_variance;
        }
        let ids = loadings.iter().map(|l| l.asset_id.clone()).collect();
        MarketMoments::new(ids, mu, sigma, self.rf)
    }
}

pub fn estimate_moments(loadings: &[FactorLoadings], factors: &FactorSeries) -> Result<MarketMoments, FactorError> {
    FactorMoments::estimate(loadings, factors)?.to_market_moments()
}

/// Mean and standard deviation of a fully-invested portfolio, with the
/// Sharpe ratio taken against `moments.rf()`.
pub fn portfolio_moments(weights: &[f64], moments: &MarketMoments) -> Result<PortfolioPoint, FactorError> {
    if weights.len() != moments.len() {
        return Err(FactorError::DimensionMismatch {
            expected: moments.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(FactorError::NonFinite("weights".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(FactorError::WeightsNotNormalized { sum });
    }
    let w = DVector::from_column_slice(weights);
    let mu = w.dot(moments.mu());
    let variance = (moments.sigma() * &w).dot(&w);
    let sigma = variance.max(0.0).sqrt();
    PortfolioPoint::new(mu, sigma, moments.rf()).map_err(|_| FactorError::ZeroVolatility)
}

fn symmetrize(m: &mut FactorCovariance) {
    for i in 0..N_FACTORS {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn date(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Days::new(i as u64 * 30)
    }

    fn sample_factors(n: usize) -> FactorSeries {
        let obs = (0..n)
            .map(|i| {
                let t = i as f64;
                FactorObservation {
                    date: date(i),
                    mkt_excess: 0.01 * (t * 0.7).sin() + 0.002 * t,
                    smb: 0.008 * (t * 1.3 + 0.5).cos(),
                    hml: 0.006 * (t * 2.1).sin(),
                    rmw: 0.005 * (t * 0.4 + 1.0).cos() + 0.0001 * t * t,
                    cma: 0.004 * (t * 3.3).sin() - 0.001,
                    rf: 0.001 + 0.0001 * (i % 3) as f64,
                }
            })
            .collect();
        FactorSeries::new(obs).unwrap()
    }

    #[test]
    fn zero_noise_single_factor_recovery() {
        let factors: Vec<FactorObservation> = (0..12)
            .map(|i| FactorObservation {
                date: date(i),
                mkt_excess: 0.01 * (i as f64 - 5.5) + 0.003 * ((i * i) % 5) as f64,
                smb: 0.0,
                hml: 0.0,
                rmw: 0.0,
                cma: 0.0,
                rf: 0.002,
            })
            .collect();
        let fs = FactorSeries::new(factors).unwrap();
        // Zero factor columns make the design rank deficient.
        let series = ReturnSeries::new(
            "x",
            fs.observations()
                .iter()
                .map(|o| (o.date, o.rf + 0.001 + 0.8 * o.mkt_excess))
                .collect(),
        )
        .unwrap();
        assert_eq!(fit_loadings(&series, &fs), Err(FactorError::RankDeficient));

        let fs = sample_factors(12);
        let series = ReturnSeries::new(
            "x",
            fs.observations()
                .iter()
                .map(|o| (o.date, o.rf + 0.001 + 0.8 * o.mkt_excess))
                .collect(),
        )
        .unwrap();
        let l = fit_loadings(&series, &fs).unwrap();
        assert!((l.alpha - 0.001).abs() < 1e-10);
        assert!((l.betas[0] - 0.8).abs() < 1e-10);
        for j in 1..5 {
            assert!(l.betas[j].abs() < 1e-10);
        }
        assert!(l.resid_variance < 1e-20);
        assert_eq!(l.n_obs, 12);
    }

    #[test]
    fn all_zero_factors_are_rank_deficient() {
        let obs = (0..12)
            .map(|i| FactorObservation {
                date: date(i),
                mkt_excess: 0.0,
                smb: 0.0,
                hml: 0.0,
                rmw: 0.0,
                cma: 0.0,
                rf: 0.001,
            })
            .collect();
        let fs = FactorSeries::new(obs).unwrap();
        let series = ReturnSeries::new("c", (0..12).map(|i| (date(i), 0.003)).collect()).unwrap();
        assert_eq!(fit_loadings(&series, &fs), Err(FactorError::RankDeficient));
    }

    #[test]
    fn too_few_common_dates() {
        let fs = sample_factors(12);
        let series = ReturnSeries::new("x", (0..6).map(|i| (date(i), 0.01)).collect()).unwrap();
        assert_eq!(
            fit_loadings(&series, &fs),
            Err(FactorError::InsufficientData {
                required: 7,
                available: 6
            })
        );
        // Dates outside the factor sample are dropped, not imputed.
        let shifted = ReturnSeries::new(
            "x",
            (0..12).map(|i| (date(i) + chrono::Days::new(1), 0.01)).collect(),
        )
        .unwrap();
        assert!(matches!(
            fit_loadings(&shifted, &fs),
            Err(FactorError::InsufficientData { available: 0, .. })
        ));
    }

    #[test]
    fn factor_free_asset_moments() {
        let fs = sample_factors(10);
        let l = FactorLoadings {
            asset_id: "cash-like".into(),
            alpha: 0.0,
            betas: FactorVector::zeros(),
            resid_variance: 0.04,
            n_obs: 10,
        };
        let m = estimate_moments(&[l], &fs).unwrap();
        assert_relative_eq!(m.mu()[0], fs.rf_mean(), max_relative = 1e-15);
        assert_relative_eq!(m.sigma()[(0, 0)], 0.04, max_relative = 1e-15);
    }

    #[test]
    fn two_factor_covariance_example() {
        // Factor draws with Var(mkt)=0.02, Var(smb)=0.03, Cov=0.005 exactly:
        // build from orthonormal contrasts scaled to the target covariance.
        let n = 4usize;
        let z1 = [1.0, -1.0, 1.0, -1.0];
        let z2 = [1.0, 1.0, -1.0, -1.0];
        // Each contrast has mean 0 and sum of squares 4, so sample variance 4/3.
        let s = (3.0f64 / 4.0).sqrt();
        let target = nalgebra::Matrix2::new(0.02, 0.005, 0.005, 0.03);
        let l = target.cholesky().unwrap().l();
        let obs = (0..n)
            .map(|i| {
                let z = nalgebra::Vector2::new(z1[i] * s, z2[i] * s);
                let f = l * z;
                FactorObservation {
                    date: date(i),
                    mkt_excess: f[0],
                    smb: f[1],
                    hml: 0.0,
                    rmw: 0.0,
                    cma: 0.0,
                    rf: 0.0,
                }
            })
            .collect();
        let fs = FactorSeries::new(obs).unwrap();
        let mk = |id: &str, b: FactorVector| FactorLoadings {
            asset_id: id.into(),
            alpha: 0.0,
            betas: b,
            resid_variance: 0.0,
            n_obs: n,
        };
        let loads = [
            mk("a", FactorVector::new(1.0, 0.0, 0.0, 0.0, 0.0)),
            mk("b", FactorVector::new(0.0, 1.0, 0.0, 0.0, 0.0)),
        ];
        let m = estimate_moments(&loads, &fs).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.02, 0.005, 0.005, 0.03]);
        assert!((m.sigma() - &expected).amax() < 1e-15);

        // Cross-check: sample covariance of the reconstructed asset returns.
        let ra: Vec<f64> = fs.observations().iter().map(|o| o.mkt_excess).collect();
        let rb: Vec<f64> = fs.observations().iter().map(|o| o.smb).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&ra), mean(&rb));
        let cov_ab: f64 = ra.iter().zip(&rb).map(|(a, b)| (a - ma) * (b - mb)).sum::<f64>() / (n - 1) as f64;
        assert_relative_eq!(m.sigma()[(0, 1)], cov_ab, max_relative = 1e-12);
    }

    #[test]
    fn portfolio_moments_examples() {
        let m = MarketMoments::new(
            vec!["a".into(), "b".into()],
            DVector::from_vec(vec![0.05, 0.10]),
            DMatrix::from_row_slice(2, 2, &[0.04, 0.0, 0.0, 0.09]),
            0.01,
        )
        .unwrap();
        let p = portfolio_moments(&[0.5, 0.5], &m).unwrap();
        assert_relative_eq!(p.mu_obs(), 0.075, max_relative = 1e-14);
        assert!((p.sigma_obs() - 0.180278).abs() < 1e-6);
        let p = portfolio_moments(&[0.0, 1.0], &m).unwrap();
        assert_relative_eq!(p.mu_obs(), 0.10);
        assert_relative_eq!(p.sigma_obs(), 0.3, max_relative = 1e-15);

        assert!(matches!(
            portfolio_moments(&[1.0], &m),
            Err(FactorError::DimensionMismatch { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            portfolio_moments(&[0.5, 0.6], &m),
            Err(FactorError::WeightsNotNormalized { .. })
        ));
    }

    #[test]
    fn equal_means_give_that_mean() {
        let m = MarketMoments::new(
            vec!["a".into(), "b".into(), "c".into()],
            DVector::from_element(3, 0.07),
            DMatrix::from_row_slice(3, 3, &[0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.05]),
            0.0,
        )
        .unwrap();
        let p = portfolio_moments(&[1.0 / 3.0; 3], &m).unwrap();
        assert_relative_eq!(p.mu_obs(), 0.07, max_relative = 1e-14);
    }

    #[test]
    fn series_validation() {
        let dup = vec![(date(1), 0.0), (date(1), 0.1)];
        assert!(matches!(ReturnSeries::new("x", dup), Err(FactorError::UnorderedDates(_))));
        let nan = vec![(date(1), f64::NAN)];
        assert!(matches!(ReturnSeries::new("x", nan), Err(FactorError::NonFinite(_))));
    }

    #[test]
    fn moments_need_assets_and_history() {
        let fs = sample_factors(10);
        assert_eq!(estimate_moments(&[], &fs), Err(FactorError::EmptyUniverse));
        let one = sample_factors(1);
        let l = FactorLoadings {
            asset_id: "a".into(),
            alpha: 0.0,
            betas: FactorVector::zeros(),
            resid_variance: 0.01,
            n_obs: 7,
        };
        assert!(matches!(
            estimate_moments(&[l], &one),
            Err(FactorError::InsufficientData { .. })
        ));
    }
}
