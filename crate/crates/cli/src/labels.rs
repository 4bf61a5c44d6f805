//! Regressor names and category labels shared by the regression tables and
//! the plot data.

use cmlm::ingest::{AccountType, HouseholdProfile, Knowledge, Marital, Segment};

pub const NET_WORTH_BANDS: [&str; 6] = [
    "0-24,999",
    "25,000-49,999",
    "50,000-74,999",
    "75,000-99,999",
    "100,000-249,999",
    ">250,000",
];
pub const INCOME_BANDS: [&str; 5] = ["0-24,999", "25,000-49,999", "50,000-74,999", "75,000-99,999", ">100,000"];
pub const AGE_BANDS: [&str; 7] = ["18-24", "25-34", "35-44", "45-54", "55-64", "65-74", ">75"];

pub const CHILDREN: &str = "Num. of Children";
pub const RESIDENCE: &str = "Length of Residence";
pub const CARS: &str = "Num. of Cars";
pub const CREDIT_CARDS: &str = "Num. of Credit Cards";
pub const STOCKS: &str = "Num. of Stocks";
pub const SHARPE: &str = "Portfolio Sharpe Ratio";
pub const MEAN: &str = "Portfolio Expected Return";
pub const STD_DEV: &str = "Portfolio Std. Deviation";
pub const VIX: &str = "VIX Index";
pub const GENERAL: &str = "General Brokerage";
pub const ACTIVE: &str = "Active Trader";

pub const REFERENCE_NOTE: &str = "Reference: ages 18-24, inferred married, affluent segment, cash account, \
net worth 0-24,999, income 0-24,999, extensive knowledge.";

pub fn net_worth(band: u8) -> String {
    format!("Net Worth {}", NET_WORTH_BANDS[band as usize - 1])
}

pub fn income(band: u8) -> String {
    format!("Income {}", INCOME_BANDS[band as usize - 1])
}

pub fn age(band: u8) -> String {
    format!("Ages {}", AGE_BANDS[band as usize - 1])
}

pub fn knowledge(k: Knowledge) -> Option<&'static str> {
    match k {
        Knowledge::Extensive => None,
        Knowledge::Good => Some("Good Knowledge"),
        Knowledge::Limited => Some("Limited Knowledge"),
        Knowledge::None => Some("None Knowledge"),
        Knowledge::Unknown => Some("Unknown Knowledge"),
    }
}

pub fn marital(m: Marital) -> Option<&'static str> {
    match m {
        Marital::InferredMarried => None,
        Marital::InferredSingle => Some("Inferred Single"),
        Marital::Married => Some("Married"),
        Marital::Single => Some("Single"),
        Marital::Unknown => Some("Unknown Marital"),
    }
}

pub fn account(a: AccountType) -> Option<&'static str> {
    match a {
        AccountType::Cash => None,
        AccountType::Ira => Some("IRA Account"),
        AccountType::Keogh => Some("Keogh Account"),
        AccountType::Margin => Some("Margin Account"),
        AccountType::SchwabOne => Some("Schwab Account"),
    }
}

pub fn segment(s: Segment) -> Option<&'static str> {
    match s {
        Segment::Affluent => None,
        Segment::General => Some(GENERAL),
        Segment::ActiveTrader => Some(ACTIVE),
    }
}

const MARITAL_ORDER: [Marital; 4] = [Marital::InferredSingle, Marital::Married, Marital::Single, Marital::Unknown];

/// The 27 demographic regressors in table order.
pub fn demographic_names() -> Vec<String> {
    let mut v: Vec<String> = (2..=6).map(net_worth).collect();
    v.extend((2..=5).map(income));
    v.extend(Knowledge::ALL.iter().filter_map(|k| knowledge(*k)).map(String::from));
    v.extend((2..=7).map(age));
    v.push(CHILDREN.into());
    v.extend(MARITAL_ORDER.iter().filter_map(|m| marital(*m)).map(String::from));
    v.extend([RESIDENCE, CARS, CREDIT_CARDS].map(String::from));
    v
}

/// Account-type then segment dummies, in table order.
pub fn account_names() -> Vec<String> {
    let mut v: Vec<String> = AccountType::ALL.iter().filter_map(|a| account(*a)).map(String::from).collect();
    v.extend([GENERAL, ACTIVE].map(String::from));
    v
}

/// Every household-level regressor and its value for `p`; dummies are 0/1.
pub fn household_covariates(p: &HouseholdProfile) -> Vec<(String, f64)> {
    let dummy = |on: bool| if on { 1.0 } else { 0.0 };
    let mut v = Vec::with_capacity(33);
    v.extend((2..=6).map(|b| (net_worth(b), dummy(p.net_worth_band == b))));
    v.extend((2..=5).map(|b| (income(b), dummy(p.income_band == b))));
    for k in Knowledge::ALL {
        if let Some(name) = knowledge(*k) {
            v.push((name.into(), dummy(p.knowledge == *k)));
        }
    }
    v.extend((2..=7).map(|b| (age(b), dummy(p.age_band == b))));
    v.push((CHILDREN.into(), p.n_children as f64));
    for m in MARITAL_ORDER {
        v.push((marital(m).expect("non-reference level").into(), dummy(p.marital == m)));
    }
    v.push((RESIDENCE.into(), p.residence_years as f64));
    v.push((CARS.into(), p.n_cars as f64));
    v.push((CREDIT_CARDS.into(), p.n_credit_cards as f64));
    for a in AccountType::ALL {
        if let Some(name) = account(*a) {
            v.push((name.into(), dummy(p.account_type == *a)));
        }
    }
    for s in [Segment::General, Segment::ActiveTrader] {
        v.push((segment(s).expect("non-reference level").into(), dummy(p.segment == s)));
    }
    v
}

/// Indicator columns of each categorical attribute; a household with all
/// of a group's indicators at zero is at the reference level.
pub fn dummy_groups() -> Vec<Vec<String>> {
    vec![
        (2..=6).map(net_worth).collect(),
        (2..=5).map(income).collect(),
        Knowledge::ALL.iter().filter_map(|k| knowledge(*k)).map(String::from).collect(),
        (2..=7).map(age).collect(),
        MARITAL_ORDER.iter().filter_map(|m| marital(*m)).map(String::from).collect(),
        AccountType::ALL.iter().filter_map(|a| account(*a)).map(String::from).collect(),
        vec![GENERAL.to_string(), ACTIVE.to_string()],
    ]
}

/// Whether `name` is a 0/1 category indicator rather than a count.
pub fn is_dummy(name: &str) -> bool {
    !matches!(
        name,
        CHILDREN | RESIDENCE | CARS | CREDIT_CARDS | STOCKS | SHARPE | MEAN | STD_DEV | VIX
    ) && !name.contains(" x ")
}
