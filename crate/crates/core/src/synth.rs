//! Seeded synthetic cohorts with planted risk aversion.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the config seed
//! and a fixed stream id, so factors, asset parameters, the VIX and each
//! household are reproducible independently of generation order.
//!
//! Layout of a generated market: `window + n_months` month-end factor
//! observations starting at `start_month`, `n_assets` risky assets `A001…`
//! following the five-factor equation exactly (plus noise), and a risk-free
//! asset `RF` returning `rf_t`. For each of the last `n_months` months the
//! tangency portfolio of the risky assets, computed from the true loadings
//! and the preceding `window` factor observations, is published as a fund
//! asset `MKT-YYYY-MM` whose return is the weighted sum of its constituents.
//! Households on the capital market line hold that month's fund and `RF`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::factor_model::{
    FactorCovariance, FactorLoadings, FactorMoments, FactorObservation, FactorSeries, FactorVector, ReturnSeries,
    N_FACTORS,
};
use crate::frontier::{CapitalMarketLine, Frontier};
use crate::ingest::{
    self, AccountMonthPortfolio, AccountType, HouseholdProfile, IngestError, Knowledge, Marital, PositionRecord,
    Segment, VixObservation,
};
use crate::month::Month;

pub const RISK_FREE_ASSET: &str = "RF";
pub const MAX_OFF_CML_HOLDINGS: usize = 10;

const STREAM_FACTORS: u64 = 1;
const STREAM_ASSETS: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_VIX: u64 = 4;
const STREAM_SELECTION: u64 = 5;
const STREAM_HOUSEHOLD_BASE: u64 = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_assets: usize,
    pub n_households: usize,
    /// Months with household holdings.
    pub n_months: usize,
    /// Estimation window preceding the first holding month.
    pub window: usize,
    pub start_month: Month,
    pub factor_mean: FactorVector,
    pub factor_cov: FactorCovariance,
    pub rf_level: f64,
    pub noise_sd: f64,
    pub planted_theta_range: (f64, f64),
    pub fraction_on_cml: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let sd = [0.045, 0.03, 0.03, 0.02, 0.02];
        let mut cov = FactorCovariance::zeros();
        for (i, s) in sd.iter().enumerate() {
            cov[(i, i)] = s * s;
        }
        Self {
            seed: 1,
            n_assets: 20,
            n_households: 1000,
            n_months: 72,
            window: 36,
            start_month: Month::new(1988, 1).expect("valid month"),
            factor_mean: FactorVector::new(0.008, 0.002, 0.003, 0.003, 0.003),
            factor_cov: cov,
            rf_level: 0.002,
            noise_sd: 0.02,
            planted_theta_range: (40.0, 110.0),
            fraction_on_cml: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_assets == 0 {
            return Err(invalid("n_assets must be at least 1"));
        }
        if self.window < crate::factor_model::MIN_OBSERVATIONS {
            return Err(invalid(format!(
                "window must be at least {}",
                crate::factor_model::MIN_OBSERVATIONS
            )));
        }
        if self.factor_mean.iter().any(|v| !v.is_finite()) || !self.rf_level.is_finite() {
            return Err(invalid("factor_mean and rf_level must be finite"));
        }
        if self.factor_cov.iter().any(|v| !v.is_finite()) || self.factor_cov != self.factor_cov.transpose() {
            return Err(invalid("factor_cov must be finite and symmetric"));
        }
        if self.factor_cov.cholesky().is_none() {
            return Err(invalid("factor_cov must be positive definite"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(invalid("noise_sd must be finite and non-negative"));
        }
        if self.noise_sd == 0.0 && self.n_assets > N_FACTORS {
            return Err(invalid(format!(
                "noise_sd = 0 with more than {N_FACTORS} assets gives a singular covariance"
            )));
        }
        let (lo, hi) = self.planted_theta_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid("planted_theta_range must satisfy 0 < lo <= hi"));
        }
        if !(0.0..=1.0).contains(&self.fraction_on_cml) {
            return Err(invalid("fraction_on_cml must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn total_months(&self) -> usize {
        self.window + self.n_months
    }

    /// Months with household holdings.
    pub fn holding_months(&self) -> impl Iterator<Item = Month> + '_ {
        (0..self.n_months).map(|i| self.start_month.add_months((self.window + i) as i32))
    }

    /// Parses `key=value` lines; `#` starts a comment. Missing keys keep
    /// their defaults, unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key=value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| invalid(format!("line {}: bad {key}: {what}", i + 1));
            match key {
                "seed" => c.seed = scalar(value).map_err(|_| bad(value))?,
                "n_assets" => c.n_assets = scalar(value).map_err(|_| bad(value))?,
                "n_households" => c.n_households = scalar(value).map_err(|_| bad(value))?,
                "n_months" => c.n_months = scalar(value).map_err(|_| bad(value))?,
                "window" => c.window = scalar(value).map_err(|_| bad(value))?,
                "start_month" => c.start_month = scalar(value).map_err(|_| bad(value))?,
                "rf_level" => c.rf_level = scalar(value).map_err(|_| bad(value))?,
                "noise_sd" => c.noise_sd = scalar(value).map_err(|_| bad(value))?,
                "fraction_on_cml" => c.fraction_on_cml = scalar(value).map_err(|_| bad(value))?,
                "factor_mean" => {
                    let v = list(value, N_FACTORS).map_err(|_| bad("expected 5 numbers"))?;
                    c.factor_mean = FactorVector::from_column_slice(&v);
                }
                "factor_cov" => {
                    let v = list(value, N_FACTORS * N_FACTORS).map_err(|_| bad("expected 25 numbers"))?;
                    c.factor_cov = FactorCovariance::from_row_slice(&v);
                }
                "planted_theta_range" => {
                    let v = list(value, 2).map_err(|_| bad("expected lo,hi"))?;
                    c.planted_theta_range = (v[0], v[1]);
                }
                _ => return Err(invalid(format!("line {}: unknown key `{key}`", i + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn scalar<T: FromStr>(s: &str) -> Result<T, ()> {
    s.parse().map_err(|_| ())
}

fn list(s: &str, n: usize) -> Result<Vec<f64>, ()> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| ())).collect::<Result<_, _>>()?;
    if v.len() == n {
        Ok(v)
    } else {
        Err(())
    }
}

impl fmt::Display for SynthConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "n_assets={}", self.n_assets)?;
        writeln!(f, "n_households={}", self.n_households)?;
        writeln!(f, "n_months={}", self.n_months)?;
        writeln!(f, "window={}", self.window)?;
        writeln!(f, "start_month={}", self.start_month)?;
        writeln!(f, "factor_mean={}", join(&mut self.factor_mean.iter().cloned()))?;
        writeln!(f, "factor_cov={}", join(&mut self.factor_cov.transpose().iter().cloned()))?;
        writeln!(f, "rf_level={}", self.rf_level)?;
        writeln!(f, "noise_sd={}", self.noise_sd)?;
        writeln!(f, "planted_theta_range={},{}", self.planted_theta_range.0, self.planted_theta_range.1)?;
        writeln!(f, "fraction_on_cml={}", self.fraction_on_cml)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn asset_id(i: usize) -> String {
    format!("A{:03}", i + 1)
}

pub fn fund_id(month: Month) -> String {
    format!("MKT-{month}")
}

// ---------------------------------------------------------------- market

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub factors: FactorSeries,
    /// True parameters; `resid_variance` is `noise_sd²`.
    pub loadings: Vec<FactorLoadings>,
    pub returns: Vec<ReturnSeries>,
}

pub fn generate_market(config: &SynthConfig) -> Result<SyntheticMarket, SynthError> {
    config.validate()?;
    let chol = config.factor_cov.cholesky().ok_or_else(|| invalid("factor_cov must be positive definite"))?;
    let l = chol.l();

    let mut rng = stream(config.seed, STREAM_FACTORS);
    let mut observations = Vec::with_capacity(config.total_months());
    for t in 0..config.total_months() {
        let z = FactorVector::from_fn(|_, _| rng.sample(StandardNormal));
        let f = config.factor_mean + l * z;
        observations.push(FactorObservation {
            date: config.start_month.add_months(t as i32).last_day(),
            mkt_excess: f[0],
            smb: f[1],
            hml: f[2],
            rmw: f[3],
            cma: f[4],
            rf: config.rf_level,
        });
    }
    let factors = FactorSeries::new(observations).map_err(|e| invalid(e.to_string()))?;

    let mut rng = stream(config.seed, STREAM_ASSETS);
    let loadings: Vec<FactorLoadings> = (0..config.n_assets)
        .map(|i| {
            let alpha = 0.003 + 0.0005 * rng.sample::<f64, _>(StandardNormal);
            // Market exposure plus one dominant style factor per asset (none
            // for every fifth), which keeps small universes well conditioned.
            let mut betas = FactorVector::zeros();
            betas[0] = rng.random_range(0.6..1.4);
            for j in 1..N_FACTORS {
                betas[j] = 0.3 * rng.sample::<f64, _>(StandardNormal);
            }
            if i % N_FACTORS != 0 {
                betas[i % N_FACTORS] += 1.0;
            }
            FactorLoadings {
                asset_id: asset_id(i),
                alpha,
                betas,
                resid_variance: config.noise_sd * config.noise_sd,
                n_obs: config.window,
            }
        })
        .collect();

    let mut rng = stream(config.seed, STREAM_NOISE);
    let mut returns = Vec::with_capacity(config.n_assets);
    for l in &loadings {
        let points = factors
            .observations()
            .iter()
            .map(|o| {
                let eps: f64 = rng.sample(StandardNormal);
                (o.date, o.rf + l.alpha + l.betas.dot(&o.factors()) + config.noise_sd * eps)
            })
            .collect();
        returns.push(ReturnSeries::new(l.asset_id.clone(), points).map_err(|e| invalid(e.to_string()))?);
    }
    Ok(SyntheticMarket {
        factors,
        loadings,
        returns,
    })
}

/// The tangency portfolio published for one holding month.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketFund {
    pub month: Month,
    pub asset_id: String,
    pub weights: DVector<f64>,
    pub cml: CapitalMarketLine,
}

/// Tangency portfolios of the risky assets for every holding month. Months
/// where the tangency is undefined or has a non-positive Sharpe ratio get no
/// fund and are logged.
pub fn market_funds(config: &SynthConfig, market: &SyntheticMarket) -> Vec<MarketFund> {
    let obs = market.factors.observations();
    let mut funds = Vec::new();
    for (i, month) in config.holding_months().enumerate() {
        let window = FactorSeries::new(obs[i..i + config.window].to_vec()).expect("ordered slice");
        let fund = FactorMoments::estimate(&market.loadings, &window)
            .and_then(|m| m.to_market_moments())
            .map_err(|e| e.to_string())
            .and_then(|m| {
                let frontier = Frontier::new(&m).map_err(|e| e.to_string())?;
                frontier.tangency(m.rf()).map_err(|e| e.to_string())
            });
        match fund {
            Ok(t) => funds.push(MarketFund {
                month,
                asset_id: fund_id(month),
                weights: t.weights,
                cml: t.cml,
            }),
            Err(e) => log::warn!("no market fund for {month}: {e}"),
        }
    }
    funds
}

/// Return series of the funds and the risk-free asset over the full sample.
pub fn derived_returns(market: &SyntheticMarket, funds: &[MarketFund]) -> Vec<ReturnSeries> {
    let obs = market.factors.observations();
    let mut out = Vec::with_capacity(funds.len() + 1);
    for f in funds {
        let points = (0..obs.len())
            .map(|t| {
                let r = market
                    .returns
                    .iter()
                    .zip(f.weights.iter())
                    .map(|(s, w)| w * s.points()[t].1)
                    .sum::<f64>();
                (obs[t].date, r)
            })
            .collect();
        out.push(ReturnSeries::new(f.asset_id.clone(), points).expect("finite, ordered"));
    }
    let rf = obs.iter().map(|o| (o.date, o.rf)).collect();
    out.push(ReturnSeries::new(RISK_FREE_ASSET, rf).expect("finite, ordered"));
    out
}

// ---------------------------------------------------------------- households

// Category sizes of the reference cohort, in domain order.
const NET_WORTH_COUNTS: [f64; 6] = [23817.0, 2158.0, 1237.0, 1442.0, 4752.0, 3702.0];
const INCOME_COUNTS: [f64; 5] = [23395.0, 3945.0, 2798.0, 3085.0, 3885.0];
const KNOWLEDGE_COUNTS: [f64; 5] = [3103.0, 11188.0, 7373.0, 2087.0, 30390.0];
const AGE_COUNTS: [f64; 7] = [52.0, 1843.0, 8822.0, 10289.0, 6746.0, 5521.0, 3835.0];
const CHILDREN_COUNTS: [f64; 7] = [26154.0, 6236.0, 3525.0, 966.0, 208.0, 17.0, 2.0];
const MARITAL_COUNTS: [f64; 5] = [23834.0, 6165.0, 1146.0, 1792.0, 4171.0];
const RESIDENCE_COUNTS: [f64; 16] = [
    1715.0, 3512.0, 3272.0, 2816.0, 2423.0, 2470.0, 2095.0, 2100.0, 1909.0, 1688.0, 1203.0, 984.0, 868.0, 633.0,
    766.0, 8654.0,
];
const CARS_COUNTS: [f64; 4] = [18199.0, 10778.0, 5748.0, 2383.0];
const CREDIT_CARD_COUNTS: [f64; 7] = [1193.0, 3006.0, 6240.0, 11693.0, 12983.0, 1958.0, 35.0];
const ACCOUNT_TYPE_COUNTS: [f64; 5] = [12618.0, 18734.0, 478.0, 5462.0, 16849.0];
const SEGMENT_COUNTS: [f64; 3] = [6450.0, 10325.0, 37366.0];

/// Marginal category probabilities used by the demographic sampler.
pub fn category_probabilities(field: &str) -> Option<Vec<f64>> {
    let counts: &[f64] = match field {
        "net_worth_band" => &NET_WORTH_COUNTS,
        "income_band" => &INCOME_COUNTS,
        "knowledge" => &KNOWLEDGE_COUNTS,
        "age_band" => &AGE_COUNTS,
        "n_children" => &CHILDREN_COUNTS,
        "marital" => &MARITAL_COUNTS,
        "residence_years" => &RESIDENCE_COUNTS,
        "n_cars" => &CARS_COUNTS,
        "n_credit_cards" => &CREDIT_CARD_COUNTS,
        "account_type" => &ACCOUNT_TYPE_COUNTS,
        "segment" => &SEGMENT_COUNTS,
        _ => return None,
    };
    let total: f64 = counts.iter().sum();
    Some(counts.iter().map(|c| c / total).collect())
}

fn draw(rng: &mut ChaCha8Rng, counts: &[f64]) -> usize {
    WeightedIndex::new(counts).expect("positive weights").sample(rng)
}

fn draw_profile(rng: &mut ChaCha8Rng, household_id: String) -> HouseholdProfile {
    HouseholdProfile {
        household_id,
        net_worth_band: 1 + draw(rng, &NET_WORTH_COUNTS) as u8,
        income_band: 1 + draw(rng, &INCOME_COUNTS) as u8,
        knowledge: Knowledge::ALL[draw(rng, &KNOWLEDGE_COUNTS)],
        age_band: 1 + draw(rng, &AGE_COUNTS) as u8,
        n_children: draw(rng, &CHILDREN_COUNTS) as u8,
        marital: Marital::ALL[draw(rng, &MARITAL_COUNTS)],
        residence_years: draw(rng, &RESIDENCE_COUNTS) as u8,
        n_cars: draw(rng, &CARS_COUNTS) as u8,
        n_credit_cards: draw(rng, &CREDIT_CARD_COUNTS) as u8,
        account_type: AccountType::ALL[draw(rng, &ACCOUNT_TYPE_COUNTS)],
        segment: Segment::ALL[draw(rng, &SEGMENT_COUNTS)],
    }
}

/// A holding planted exactly on the capital market line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedPoint {
    pub theta: f64,
    pub w_star: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHouseholds {
    pub profiles: Vec<HouseholdProfile>,
    pub portfolios: Vec<AccountMonthPortfolio>,
    pub positions: Vec<PositionRecord>,
    /// Planted θ of every household on the capital market line.
    pub planted_theta: BTreeMap<String, f64>,
    /// Planted (σ, μ) of each on-line account-month.
    pub planted_points: BTreeMap<(String, Month), PlantedPoint>,
    /// Account-months skipped because the optimal holding would need
    /// borrowing at the risk-free rate.
    pub skipped_leveraged: usize,
}

pub fn household_id(i: usize) -> String {
    format!("H{:05}", i + 1)
}

pub fn account_id(i: usize) -> String {
    format!("{}-1", household_id(i))
}

pub fn generate_households(config: &SynthConfig, funds: &[MarketFund]) -> Result<SyntheticHouseholds, SynthError> {
    config.validate()?;
    let n = config.n_households;
    let n_on = (config.fraction_on_cml * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(config.seed, STREAM_SELECTION));
    let mut on_cml = vec![false; n];
    for &i in &order[..n_on] {
        on_cml[i] = true;
    }

    let mut out = SyntheticHouseholds {
        profiles: Vec::with_capacity(n),
        portfolios: Vec::new(),
        positions: Vec::new(),
        planted_theta: BTreeMap::new(),
        planted_points: BTreeMap::new(),
        skipped_leveraged: 0,
    };
    let (lo, hi) = config.planted_theta_range;
    for i in 0..n {
        let mut rng = stream(config.seed, STREAM_HOUSEHOLD_BASE + i as u64);
        let hid = household_id(i);
        let aid = account_id(i);
        out.profiles.push(draw_profile(&mut rng, hid.clone()));
        // Account value, log-uniform between 10^3 and 10^6.
        let value = 10f64.powf(rng.random_range(3.0..6.0));
        let theta = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        if on_cml[i] {
            out.planted_theta.insert(hid.clone(), theta);
        }

        for fund in funds {
            let weights: BTreeMap<String, f64> = if on_cml[i] {
                let cml = &fund.cml;
                let w_star = cml.lambda_mkt() / (theta * cml.sigma_mkt());
                if w_star > 1.0 {
                    out.skipped_leveraged += 1;
                    continue;
                }
                out.planted_points.insert(
                    (aid.clone(), fund.month),
                    PlantedPoint {
                        theta,
                        w_star,
                        mu: cml.rf() + w_star * (cml.mu_mkt() - cml.rf()),
                        sigma: w_star * cml.sigma_mkt(),
                    },
                );
                let mut w = BTreeMap::new();
                w.insert(fund.asset_id.clone(), w_star);
                if w_star < 1.0 {
                    w.insert(RISK_FREE_ASSET.to_string(), 1.0 - w_star);
                }
                w
            } else {
                let k = rng.random_range(1..=config.n_assets.min(MAX_OFF_CML_HOLDINGS));
                let picks = index::sample(&mut rng, config.n_assets, k).into_vec();
                let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = draws.iter().sum();
                picks
                    .iter()
                    .zip(&draws)
                    .map(|(&a, d)| (asset_id(a), d / total))
                    .collect()
            };
            for (asset, w) in &weights {
                out.positions.push(PositionRecord {
                    household_id: hid.clone(),
                    account_id: aid.clone(),
                    month: fund.month,
                    asset_id: asset.clone(),
                    market_value: value * w,
                });
            }
            out.portfolios.push(AccountMonthPortfolio {
                account_id: aid.clone(),
                month: fund.month,
                weights,
            });
        }
    }
    Ok(out)
}

/// Month-end VIX levels following a log AR(1) around 20.
pub fn generate_vix(config: &SynthConfig) -> Vec<VixObservation> {
    let mut rng = stream(config.seed, STREAM_VIX);
    let mean = 20f64.ln();
    let mut x = mean;
    (0..config.total_months())
        .map(|t| {
            let z: f64 = rng.sample(StandardNormal);
            x = mean + 0.8 * (x - mean) + 0.15 * z;
            VixObservation {
                date: config.start_month.add_months(t as i32).last_day(),
                close: (x.exp() * 100.0).round() / 100.0,
            }
        })
        .collect()
}

// ---------------------------------------------------------------- dataset

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub config: SynthConfig,
    pub market: SyntheticMarket,
    pub funds: Vec<MarketFund>,
    pub households: SyntheticHouseholds,
    pub vix: Vec<VixObservation>,
}

impl SyntheticDataset {
    /// Risky assets, funds and the risk-free asset, ordered by id.
    pub fn all_returns(&self) -> Vec<ReturnSeries> {
        let mut all = self.market.returns.clone();
        all.extend(derived_returns(&self.market, &self.funds));
        all.sort_by(|a, b| a.asset_id().cmp(b.asset_id()));
        all
    }
}

pub fn generate(config: &SynthConfig) -> Result<SyntheticDataset, SynthError> {
    let market = generate_market(config)?;
    let funds = market_funds(config, &market);
    let households = generate_households(config, &funds)?;
    if households.skipped_leveraged > 0 {
        log::warn!(
            "{} account-months skipped: planted risk aversion would require borrowing",
            households.skipped_leveraged
        );
    }
    Ok(SyntheticDataset {
        config: config.clone(),
        vix: generate_vix(config),
        market,
        funds,
        households,
    })
}

pub const FILES: [&str; 7] = [
    "factors.csv",
    "returns.csv",
    "positions.csv",
    "profiles.csv",
    "vix.csv",
    "theta_true.csv",
    "market_assets.csv",
];

/// Writes every dataset file into `dir`, which must exist.
pub fn write_dataset(data: &SyntheticDataset, dir: &Path) -> Result<(), SynthError> {
    fn put(dir: &Path, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), SynthError> {
        let path = dir.join(name);
        let mut w = ingest::create(&path)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| {
                SynthError::Ingest(IngestError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            })
    }
    put(dir, "factors.csv", |w| ingest::write_factors(w, &data.market.factors))?;
    put(dir, "returns.csv", |w| ingest::write_returns(w, &data.all_returns()))?;
    put(dir, "positions.csv", |w| ingest::write_positions(w, &data.households.positions))?;
    put(dir, "profiles.csv", |w| {
        ingest::write_household_profiles(w, &data.households.profiles)
    })?;
    put(dir, "vix.csv", |w| ingest::write_vix(w, &data.vix))?;
    put(dir, "theta_true.csv", |w| {
        writeln!(w, "household_id,theta_true")?;
        for (h, t) in &data.households.planted_theta {
            writeln!(w, "{h},{t}")?;
        }
        Ok(())
    })?;
    put(dir, "market_assets.csv", |w| {
        writeln!(w, "asset_id")?;
        for l in &data.market.loadings {
            writeln!(w, "{}", l.asset_id)?;
        }
        Ok(())
    })
}

/// Parses a `household_id,theta_true` file.
pub fn parse_theta_true(text: &str) -> Result<BTreeMap<String, f64>, SynthError> {
    let mut lines = text.lines();
    if lines.next() != Some("household_id,theta_true") {
        return Err(invalid("theta file lacks its header"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (h, t) = l.split_once(',').ok_or_else(|| invalid(format!("bad theta row `{l}`")))?;
            let t: f64 = t.parse().map_err(|_| invalid(format!("bad theta row `{l}`")))?;
            Ok((h.to_string(), t))
        })
        .collect()
}

/// First day of the first holding month.
pub fn first_holding_date(config: &SynthConfig) -> NaiveDate {
    config.start_month.add_months(config.window as i32).first_day()
}
