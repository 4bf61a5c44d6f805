//! Capital-market-line inference of household risk aversion.
//!
//! The pipeline runs from monthly factor data and asset returns to
//! five-factor moment estimates (`factor_model`), the efficient frontier and
//! tangency portfolio (`frontier`), per-portfolio risk aversion and
//! efficiency (`inference`), and fixed-effects panel regressions on the
//! resulting profiles (`panel`). `ingest` reads and writes the tabular
//! formats and `synth` generates deterministic synthetic datasets.

pub mod factor_model;
pub mod frontier;
pub mod inference;
pub mod ingest;
pub mod linalg;
pub mod month;
pub mod panel;
pub mod synth;

pub use factor_model::{
    estimate_moments, fit_loadings, portfolio_moments, FactorError, FactorLoadings, FactorMoments,
    FactorObservation, FactorSeries, MarketMoments, ReturnSeries,
};
pub use frontier::{frontier_coefficients, frontier_weights, tangency_portfolio, CapitalMarketLine, Frontier, FrontierError};
pub use inference::{
    efficiency, implied_risk_aversion, iqr_filter, optimal_weight, profile_portfolio, project_onto_cml, quartiles,
    InferenceError, PortfolioPoint, RiskProfile,
};
pub use month::Month;
pub use panel::{fit_panel, Effects, PanelError, PanelObservation, RegressionResult, RegressionSpec};
