//! Built-in regression models, one per published table column.
//!
//! | id | effects | regressors |
//! |----|---------|------------|
//! | rv1 | time | demographics, account type, segment |
//! | rv2 | time | rv1 + stocks, Sharpe, mean, std. dev., segment x stocks |
//! | rv3 | entity | VIX |
//! | rv4 | entity | stocks, Sharpe, mean, std. dev., segment x stocks, VIX |
//! | eff1 | time | demographics |
//! | eff2 | time | eff1 + account type, segment |
//! | eff3 | time | eff2 + stocks, Sharpe, mean, std. dev. |
//! | eff4 | entity | VIX |
//! | eff5 | entity | stocks, Sharpe, mean, std. dev., VIX |
//! | eff_twoway1..4 | two-way | stocks, then + Sharpe, + mean, + std. dev. |
//!
//! `rv*` models explain implied risk aversion, the rest portfolio efficiency.

use cmlm::panel::{Effects, RegressionSpec};

use crate::labels::{self, ACTIVE, GENERAL, MEAN, SHARPE, STD_DEV, STOCKS, VIX};

pub const MODEL_IDS: [&str; 13] = [
    "rv1",
    "rv2",
    "rv3",
    "rv4",
    "eff1",
    "eff2",
    "eff3",
    "eff4",
    "eff5",
    "eff_twoway1",
    "eff_twoway2",
    "eff_twoway3",
    "eff_twoway4",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    RiskAversion,
    Efficiency,
}

impl Response {
    pub fn label(self) -> &'static str {
        match self {
            Response::RiskAversion => "Risk Aversion",
            Response::Efficiency => "Portfolio Efficiency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub id: &'static str,
    pub response: Response,
    pub spec: RegressionSpec,
}

impl Model {
    pub fn uses(&self, name: &str) -> bool {
        self.spec.regressors.iter().any(|r| r == name)
            || self.spec.interactions.iter().any(|(a, b)| a == name || b == name)
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn stock_interactions() -> Vec<(String, String)> {
    vec![
        (GENERAL.to_string(), STOCKS.to_string()),
        (ACTIVE.to_string(), STOCKS.to_string()),
    ]
}

pub fn lookup(id: &str) -> Option<Model> {
    let id = *MODEL_IDS.iter().find(|m| **m == id)?;
    let portfolio = names(&[STOCKS, SHARPE, MEAN, STD_DEV]);
    let demo = labels::demographic_names();
    let demo_account: Vec<String> = demo.iter().cloned().chain(labels::account_names()).collect();
    let (response, effects, regressors, interactions) = match id {
        "rv1" => (Response::RiskAversion, Effects::Time, demo_account, vec![]),
        "rv2" => (
            Response::RiskAversion,
            Effects::Time,
            [demo_account, portfolio].concat(),
            stock_interactions(),
        ),
        "rv3" => (Response::RiskAversion, Effects::Entity, names(&[VIX]), vec![]),
        "rv4" => (
            Response::RiskAversion,
            Effects::Entity,
            [portfolio, names(&[VIX])].concat(),
            stock_interactions(),
        ),
        "eff1" => (Response::Efficiency, Effects::Time, demo, vec![]),
        "eff2" => (Response::Efficiency, Effects::Time, demo_account, vec![]),
        "eff3" => (Response::Efficiency, Effects::Time, [demo_account, portfolio].concat(), vec![]),
        "eff4" => (Response::Efficiency, Effects::Entity, names(&[VIX]), vec![]),
        "eff5" => (Response::Efficiency, Effects::Entity, [portfolio, names(&[VIX])].concat(), vec![]),
        twoway => {
            let k: usize = twoway["eff_twoway".len()..].parse().expect("registered id");
            (Response::Efficiency, Effects::TwoWay, portfolio[..k].to_vec(), vec![])
        }
    };
    Some(Model {
        id,
        response,
        spec: RegressionSpec {
            effects,
            regressors,
            interactions,
        },
    })
}
