//! Implied risk aversion and signed efficiency from a portfolio's position
//! relative to the capital market line.
//!
//! An observed portfolio `(σ_obs, μ_obs)` is projected orthogonally onto the
//! line `μ = rf + λ σ`. The projected risk level fixes the market weight of
//! a mean-variance investor, `w* σ_mkt = σ⊥`, and through `w* = λ/(θ σ_mkt)`
//! the risk-aversion coefficient
//!
//! ```text
//! θ = ((1 + λ²)/σ_obs) / (λ_obs + 1/λ)
//! ```
//!
//! Efficiency is the Euclidean distance to the projection, positive when
//! the portfolio's Sharpe ratio beats the market's.
//!
//! Also hosts the descriptive statistics used on the implied quantities:
//! quantiles by linear interpolation at position `(n − 1)·q` between order
//! statistics, and the interquartile-range outlier fence.

use crate::frontier::CapitalMarketLine;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferenceError {
    #[error("portfolio volatility {0} must be positive and finite")]
    NonPositiveVolatility(f64),
    #[error("non-finite portfolio return")]
    NonFinite,
    #[error("projection falls at non-positive risk ({sigma_perp})")]
    ProjectionOutOfDomain { sigma_perp: f64 },
    #[error("implied risk aversion is not positive (denominator {denominator})")]
    NonPositiveRiskAversion { denominator: f64 },
    #[error("risk aversion {0} must be positive and finite")]
    NonPositiveTheta(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("fence multiplier {0} must be non-negative")]
    InvalidFence(f64),
}

/// Expected return and volatility of an observed portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioPoint {
    mu_obs: f64,
    sigma_obs: f64,
    lambda_obs: f64,
}

impl PortfolioPoint {
    /// `rf` is used only to fill the Sharpe ratio.
    pub fn new(mu_obs: f64, sigma_obs: f64, rf: f64) -> Result<Self, InferenceError> {
        if !(sigma_obs > 0.0 && sigma_obs.is_finite()) {
            return Err(InferenceError::NonPositiveVolatility(sigma_obs));
        }
        if !(mu_obs.is_finite() && rf.is_finite()) {
            return Err(InferenceError::NonFinite);
        }
        Ok(Self {
            mu_obs,
            sigma_obs,
            lambda_obs: (mu_obs - rf) / sigma_obs,
        })
    }

    pub fn mu_obs(&self) -> f64 {
        self.mu_obs
    }

    pub fn sigma_obs(&self) -> f64 {
        self.sigma_obs
    }

    /// Sharpe ratio against the rate the point was built with.
    pub fn lambda_obs(&self) -> f64 {
        self.lambda_obs
    }
}

/// Foot of the perpendicular from a portfolio to the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub mu_perp: f64,
    pub sigma_perp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskProfile {
    pub theta: f64,
    pub w_star: f64,
    pub projected: ProjectedPoint,
    pub efficiency: f64,
}

pub fn project_onto_cml(p: &PortfolioPoint, cml: &CapitalMarketLine) -> Result<ProjectedPoint, InferenceError> {
    let lambda = cml.lambda_mkt();
    let rf = cml.rf();
    let norm = 1.0 + lambda * lambda;
    let mu_perp = (lambda * lambda * p.mu_obs + lambda * p.sigma_obs + rf) / norm;
    let sigma_perp = (lambda * p.mu_obs + p.sigma_obs - lambda * rf) / norm;
    if !(sigma_perp > 0.0) {
        return Err(InferenceError::ProjectionOutOfDomain { sigma_perp });
    }
    Ok(ProjectedPoint { mu_perp, sigma_perp })
}

pub fn implied_risk_aversion(p: &PortfolioPoint, cml: &CapitalMarketLine) -> Result<f64, InferenceError> {
    let lambda = cml.lambda_mkt();
    // Sharpe ratio against the line's own rate.
    let lambda_obs = (p.mu_obs - cml.rf()) / p.sigma_obs;
    let denominator = lambda_obs + 1.0 / lambda;
    if !(denominator > 0.0) {
        return Err(InferenceError::NonPositiveRiskAversion { denominator });
    }
    Ok(((1.0 + lambda * lambda) / p.sigma_obs) / denominator)
}

/// Fraction of wealth in the market portfolio for risk aversion `theta`.
pub fn optimal_weight(theta: f64, cml: &CapitalMarketLine) -> Result<f64, InferenceError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(InferenceError::NonPositiveTheta(theta));
    }
    Ok(cml.lambda_mkt() / (theta * cml.sigma_mkt()))
}

/// Signed distance to the projection: positive above the line, negative
/// below, `+0.0` on it.
pub fn efficiency(p: &PortfolioPoint, cml: &CapitalMarketLine) -> Result<f64, InferenceError> {
    let projected = project_onto_cml(p, cml)?;
    Ok(signed_distance(p, &projected, cml))
}

fn signed_distance(p: &PortfolioPoint, projected: &ProjectedPoint, cml: &CapitalMarketLine) -> f64 {
    // The projection sits on the line, so its Sharpe ratio is λ_mkt.
    let lambda_obs = (p.mu_obs - cml.rf()) / p.sigma_obs;
    let diff = lambda_obs - cml.lambda_mkt();
    if diff == 0.0 {
        return 0.0;
    }
    let distance = (p.mu_obs - projected.mu_perp).hypot(p.sigma_obs - projected.sigma_perp);
    if diff > 0.0 {
        distance
    } else {
        -distance
    }
}

pub fn profile_portfolio(p: &PortfolioPoint, cml: &CapitalMarketLine) -> Result<RiskProfile, InferenceError> {
    let projected = project_onto_cml(p, cml)?;
    let theta = implied_risk_aversion(p, cml)?;
    let w_star = optimal_weight(theta, cml)?;
    Ok(RiskProfile {
        theta,
        w_star,
        projected,
        efficiency: signed_distance(p, &projected, cml),
    })
}

/// Linear-interpolation quantile at position `(n − 1)·q` of the sorted data.
pub fn quantile(values: &[f64], q: f64) -> Result<f64, InferenceError> {
    let sorted = sorted_copy(values)?;
    Ok(quantile_sorted(&sorted, q))
}

pub fn quartiles(values: &[f64]) -> Result<(f64, f64, f64), InferenceError> {
    let sorted = sorted_copy(values)?;
    Ok((
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.75),
    ))
}

/// Mask of values inside `[Q1 − k·IQR, Q3 + k·IQR]`.
pub fn iqr_filter(values: &[f64], k: f64) -> Result<Vec<bool>, InferenceError> {
    if !(k >= 0.0) {
        return Err(InferenceError::InvalidFence(k));
    }
    let (q1, _, q3) = quartiles(values)?;
    let (lo, hi) = iqr_fences(q1, q3, k);
    Ok(values.iter().map(|&v| v >= lo && v <= hi).collect())
}

pub fn iqr_fences(q1: f64, q3: f64, k: f64) -> (f64, f64) {
    let iqr = q3 - q1;
    (q1 - k * iqr, q3 + k * iqr)
}

fn sorted_copy(values: &[f64]) -> Result<Vec<f64>, InferenceError> {
    if values.is_empty() {
        return Err(InferenceError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}
