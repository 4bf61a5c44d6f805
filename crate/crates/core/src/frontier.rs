//! Closed-form mean-variance frontier and tangency portfolio.
//!
//! Everything is expressed through the three scalars
//!
//! ```text
//! A = μᵀΣ⁻¹μ,   B = μᵀΣ⁻¹e,   C = eᵀΣ⁻¹e
//! ```
//!
//! which come from two triangular solves against one Cholesky factor of Σ.
//! Σ is never inverted explicitly. Short positions are allowed throughout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::factor_model::MarketMoments;

/// `AC − B² ≤ DEGENERACY_TOLERANCE · max(1, AC)` is treated as a degenerate
/// frontier (μ proportional to e).
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Smallest admissible squared Cholesky pivot, relative to the largest
/// diagonal entry of Σ.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

/// Relative band around `rf = B/C` inside which the tangency is undefined.
pub const TANGENCY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrontierError {
    #[error("covariance matrix is not positive definite")]
    SingularCovariance,
    #[error("risk-free rate {rf} is not below the global minimum-variance return {gmv_return}")]
    TangencyUndefined { rf: f64, gmv_return: f64 },
    #[error("market Sharpe ratio {lambda} is not positive")]
    NegativeSharpeMarket { lambda: f64 },
    #[error("frontier is degenerate (AC - B^2 = {discriminant})")]
    DegenerateFrontier { discriminant: f64 },
    #[error("market volatility {sigma} must be positive and finite")]
    InvalidMarketVolatility { sigma: f64 },
    #[error("non-finite input to the capital market line")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierCoefficients {
    pub a_coef: f64,
    pub b_coef: f64,
    pub c_coef: f64,
}

impl FrontierCoefficients {
    /// `AC − B²`.
    pub fn discriminant(&self) -> f64 {
        self.a_coef * self.c_coef - self.b_coef * self.b_coef
    }

    /// Expected return of the global minimum-variance portfolio, `B/C`.
    pub fn gmv_return(&self) -> f64 {
        self.b_coef / self.c_coef
    }

    pub fn is_degenerate(&self) -> bool {
        let d = self.discriminant();
        !(d > DEGENERACY_TOLERANCE * f64::max(1.0, self.a_coef * self.c_coef))
    }

    fn checked_discriminant(&self) -> Result<f64, FrontierError> {
        if self.is_degenerate() {
            Err(FrontierError::DegenerateFrontier {
                discriminant: self.discriminant(),
            })
        } else {
            Ok(self.discriminant())
        }
    }
}

/// The line `μ = rf + λ_mkt σ` through the risk-free asset and the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapitalMarketLine {
    rf: f64,
    mu_mkt: f64,
    sigma_mkt: f64,
    lambda_mkt: f64,
}

impl CapitalMarketLine {
    /// Builds the line from the market point. Downward-sloping or flat lines
    /// are rejected.
    pub fn new(rf: f64, mu_mkt: f64, sigma_mkt: f64) -> Result<Self, FrontierError> {
        if !(rf.is_finite() && mu_mkt.is_finite()) {
            return Err(FrontierError::NonFinite);
        }
        if !(sigma_mkt > 0.0 && sigma_mkt.is_finite()) {
            return Err(FrontierError::InvalidMarketVolatility { sigma: sigma_mkt });
        }
        let lambda_mkt = (mu_mkt - rf) / sigma_mkt;
        if !(lambda_mkt > 0.0) {
            return Err(FrontierError::NegativeSharpeMarket { lambda: lambda_mkt });
        }
        Ok(Self {
            rf,
            mu_mkt,
            sigma_mkt,
            lambda_mkt,
        })
    }

    pub fn rf(&self) -> f64 {
        self.rf
    }

    pub fn mu_mkt(&self) -> f64 {
        self.mu_mkt
    }

    pub fn sigma_mkt(&self) -> f64 {
        self.sigma_mkt
    }

    pub fn lambda_mkt(&self) -> f64 {
        self.lambda_mkt
    }

    /// Expected return on the line at risk level `sigma`.
    pub fn mu_at(&self, sigma: f64) -> f64 {
        self.rf + self.lambda_mkt * sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierWeights {
    pub weights: DVector<f64>,
    /// Multiplier on the return constraint.
    pub lambda_mult: f64,
    /// Multiplier on the budget constraint.
    pub nu_mult: f64,
    pub target_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tangency {
    pub cml: CapitalMarketLine,
    /// Fully-invested market weights, `Σ⁻¹(μ − rf·e)` normalised to sum 1.
    pub weights: DVector<f64>,
}

/// A factored instance: one Cholesky of Σ shared by every frontier query.
#[derive(Debug, Clone)]
pub struct Frontier {
    sigma_inv_mu: DVector<f64>,
    sigma_inv_e: DVector<f64>,
    coefficients: FrontierCoefficients,
}

impl Frontier {
    pub fn new(moments: &MarketMoments) -> Result<Self, FrontierError> {
        Self::from_parts(moments.mu(), moments.sigma())
    }

    pub fn from_parts(mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self, FrontierError> {
        let p = mu.len();
        if p == 0 || sigma.shape() != (p, p) {
            return Err(FrontierError::SingularCovariance);
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(FrontierError::NonFinite);
        }
        let chol = factor(sigma)?;
        let sigma_inv_mu = chol.solve(mu);
        let sigma_inv_e = chol.solve(&DVector::from_element(p, 1.0));
        let coefficients = FrontierCoefficients {
            a_coef: mu.dot(&sigma_inv_mu),
            b_coef: sigma_inv_mu.sum(),
            c_coef: sigma_inv_e.sum(),
        };
        Ok(Self {
            sigma_inv_mu,
            sigma_inv_e,
            coefficients,
        })
    }

    pub fn coefficients(&self) -> FrontierCoefficients {
        self.coefficients
    }

    pub fn tangency(&self, rf: f64) -> Result<Tangency, FrontierError> {
        let FrontierCoefficients {
            a_coef: a,
            b_coef: b,
            c_coef: c,
        } = self.coefficients;
        if !rf.is_finite() {
            return Err(FrontierError::NonFinite);
        }
        let denom = b - c * rf;
        if !(denom > TANGENCY_TOLERANCE * (b.abs() + (c * rf).abs())) {
            return Err(FrontierError::TangencyUndefined {
                rf,
                gmv_return: b / c,
            });
        }
        let excess_quadratic = a - 2.0 * b * rf + c * rf * rf;
        if !(excess_quadratic > 0.0) {
            return Err(FrontierError::NegativeSharpeMarket { lambda: 0.0 });
        }
        let mu_mkt = (a - b * rf) / denom;
        let sigma_mkt = excess_quadratic.sqrt() / denom;
        let cml = CapitalMarketLine::new(rf, mu_mkt, sigma_mkt)?;

        let raw = &self.sigma_inv_mu - &self.sigma_inv_e * rf;
        let weights = raw / denom;
        Ok(Tangency { cml, weights })
    }

    pub fn weights(&self, target_return: f64) -> Result<FrontierWeights, FrontierError> {
        let FrontierCoefficients {
            a_coef: a,
            b_coef: b,
            c_coef: c,
        } = self.coefficients;
        let d = self.coefficients.checked_discriminant()?;
        let t = target_return;
        let on_mu = (c * t - b) / d;
        let on_e = (a - b * t) / d;
        let weights = &self.sigma_inv_mu * on_mu + &self.sigma_inv_e * on_e;
        Ok(FrontierWeights {
            weights,
            lambda_mult: 2.0 * (-t * c + b) / d,
            nu_mult: 2.0 * (-a + t * b) / d,
            target_return,
        })
    }

    pub fn sigma(&self, target_return: f64) -> Result<f64, FrontierError> {
        frontier_sigma(target_return, &self.coefficients)
    }
}

fn factor(sigma: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, FrontierError> {
    let max_diag = sigma.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    if !(max_diag > 0.0) {
        return Err(FrontierError::SingularCovariance);
    }
    let chol = Cholesky::new(sigma.clone()).ok_or(FrontierError::SingularCovariance)?;
    let l = chol.l_dirty();
    let min_pivot = (0..sigma.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_TOLERANCE * max_diag) {
        return Err(FrontierError::SingularCovariance);
    }
    Ok(chol)
}

pub fn frontier_coefficients(moments: &MarketMoments) -> Result<FrontierCoefficients, FrontierError> {
    Frontier::new(moments).map(|f| f.coefficients())
}

/// Market portfolio and capital market line for risk-free rate `rf`.
pub fn tangency_portfolio(
    moments: &MarketMoments,
    rf: f64,
) -> Result<(CapitalMarketLine, DVector<f64>), FrontierError> {
    let t = Frontier::new(moments)?.tangency(rf)?;
    Ok((t.cml, t.weights))
}

pub fn frontier_weights(
    target_return: f64,
    moments: &MarketMoments,
) -> Result<FrontierWeights, FrontierError> {
    Frontier::new(moments)?.weights(target_return)
}

/// Minimum standard deviation attainable at expected return `target_return`.
pub fn frontier_sigma(target_return: f64, coeffs: &FrontierCoefficients) -> Result<f64, FrontierError> {
    let d = coeffs.checked_discriminant()?;
    let a = target_return;
    let variance = (coeffs.c_coef * a * a - 2.0 * coeffs.b_coef * a + coeffs.a_coef) / d;
    Ok(variance.max(0.0).sqrt())
}
