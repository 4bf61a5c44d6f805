use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use cmlm::factor_model::{portfolio_moments, FactorError};
use cmlm::frontier::{CapitalMarketLine, Frontier, FrontierError};
use cmlm::ingest::{self, build_weights, format_float, group_positions, IngestError, PositionRecord};
use cmlm::inference::{iqr_filter, profile_portfolio, quartiles, InferenceError, PortfolioPoint};
use cmlm::Month;
use rayon::prelude::*;

use crate::artifact::{self, Snapshot};
use crate::{io_error, CliError, InferArgs};

pub const HEADER: [&str; 9] = [
    "account_id",
    "month",
    "mu_obs",
    "sigma_obs",
    "sharpe",
    "theta",
    "w_star",
    "efficiency",
    "status",
];

pub const STATUS_OK: &str = "ok";

/// Fence multiplier for the outlier count in the summary.
pub const IQR_K: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimates {
    pub mu_obs: f64,
    pub sigma_obs: f64,
    pub sharpe: f64,
    pub theta: f64,
    pub w_star: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub account_id: String,
    pub month: Month,
    pub status: String,
    /// Present exactly when `status` is `ok`.
    pub estimates: Option<Estimates>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RfSource {
    Factors,
    Fixed(f64),
}

impl std::str::FromStr for RfSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "factors" {
            return Ok(RfSource::Factors);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(RfSource::Fixed(v)),
            _ => Err(format!("--rf-source must be `factors` or a number, got `{s}`")),
        }
    }
}

fn frontier_status(e: &FrontierError) -> &'static str {
    match e {
        FrontierError::SingularCovariance => "singular_covariance",
        FrontierError::TangencyUndefined { .. } => "tangency_undefined",
        FrontierError::NegativeSharpeMarket { .. } => "negative_sharpe_market",
        FrontierError::DegenerateFrontier { .. } => "degenerate_frontier",
        FrontierError::InvalidMarketVolatility { .. } | FrontierError::NonFinite => "invalid_market",
    }
}

fn factor_status(e: &FactorError) -> &'static str {
    match e {
        FactorError::ZeroVolatility => "zero_volatility",
        _ => "invalid_moments",
    }
}

fn inference_status(e: &InferenceError) -> &'static str {
    match e {
        InferenceError::ProjectionOutOfDomain { .. } => "projection_out_of_domain",
        InferenceError::NonPositiveRiskAversion { .. } => "non_positive_risk_aversion",
        InferenceError::NonPositiveVolatility(_) => "zero_volatility",
        _ => "numeric_error",
    }
}

struct MonthContext<'a> {
    snapshot: &'a Snapshot,
    rf: f64,
    cml: Result<CapitalMarketLine, &'static str>,
}

fn month_context(snapshot: &Snapshot, rf_source: RfSource) -> MonthContext<'_> {
    let rf = match rf_source {
        RfSource::Factors => snapshot.moments.rf,
        RfSource::Fixed(v) => v,
    };
    let cml = match snapshot.moments.subset(&snapshot.market_ids()) {
        None => Err("missing_market_asset"),
        Some(Err(e)) => Err(factor_status(&e)),
        Some(Ok(m)) => Frontier::new(&m)
            .and_then(|f| f.tangency(rf))
            .map(|t| t.cml)
            .map_err(|e| frontier_status(&e)),
    };
    if let Err(status) = cml {
        log::warn!("{}: no capital market line ({status})", snapshot.month);
    }
    MonthContext { snapshot, rf, cml }
}

fn infer_one(positions: &[&PositionRecord], ctx: Option<&MonthContext>) -> Result<Estimates, &'static str> {
    let portfolio = build_weights(positions).map_err(|e| match e {
        IngestError::ZeroTotalValue { .. } => "zero_value",
        _ => "invalid_positions",
    })?;
    let ctx = ctx.ok_or("insufficient_history")?;
    let ids: Vec<&str> = portfolio.weights.keys().map(String::as_str).collect();
    let moments = ctx
        .snapshot
        .moments
        .subset(&ids)
        .ok_or("missing_asset")?
        .map_err(|e| factor_status(&e))?;
    let weights: Vec<f64> = portfolio.weights.values().copied().collect();
    let point = portfolio_moments(&weights, &moments).map_err(|e| factor_status(&e))?;
    let point = PortfolioPoint::new(point.mu_obs(), point.sigma_obs(), ctx.rf).map_err(|e| inference_status(&e))?;
    let cml = ctx.cml.as_ref().map_err(|s| *s)?;
    let profile = profile_portfolio(&point, cml).map_err(|e| inference_status(&e))?;
    Ok(Estimates {
        mu_obs: point.mu_obs(),
        sigma_obs: point.sigma_obs(),
        sharpe: point.lambda_obs(),
        theta: profile.theta,
        w_star: profile.w_star,
        efficiency: profile.efficiency,
    })
}

/// One row per account-month of `positions`, sorted by account then month.
pub fn infer_profiles(
    snapshots: &[Snapshot],
    positions: &[PositionRecord],
    rf_source: RfSource,
) -> Result<Vec<ProfileRow>, CliError> {
    let groups: Vec<((String, Month), Vec<&PositionRecord>)> = group_positions(positions).into_iter().collect();
    let wanted: std::collections::BTreeSet<Month> = groups.iter().map(|((_, m), _)| *m).collect();
    let contexts: BTreeMap<Month, MonthContext> = snapshots
        .par_iter()
        .filter(|s| wanted.contains(&s.month))
        .map(|s| (s.month, month_context(s, rf_source)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    if !groups.is_empty() && contexts.is_empty() {
        return Err(CliError::Data("moments and positions share no month".into()));
    }
    Ok(groups
        .par_iter()
        .map(|((account_id, month), recs)| {
            let (status, estimates) = match infer_one(recs, contexts.get(month)) {
                Ok(e) => (STATUS_OK.to_string(), Some(e)),
                Err(s) => (s.to_string(), None),
            };
            ProfileRow {
                account_id: account_id.clone(),
                month: *month,
                status,
                estimates,
            }
        })
        .collect())
}

pub fn write_profiles<W: Write>(writer: W, rows: &[ProfileRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in rows {
        let mut rec = vec![r.account_id.clone(), r.month.to_string()];
        match &r.estimates {
            Some(e) => rec.extend(
                [e.mu_obs, e.sigma_obs, e.sharpe, e.theta, e.w_star, e.efficiency]
                    .iter()
                    .map(|v| format_float(*v)),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        rec.push(r.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn parse_profiles<R: std::io::Read>(reader: R) -> Result<Vec<ProfileRow>, String> {
    let mut reader = csv::Reader::from_reader(reader);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(format!("expected header `{}`", HEADER.join(",")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        let month: Month = rec[1].parse().map_err(|_| format!("line {line}: bad month"))?;
        let status = rec[8].to_string();
        let estimates = if status == STATUS_OK {
            let v: Vec<f64> = (2..8)
                .map(|j| rec[j].parse::<f64>().map_err(|_| format!("line {line}: bad `{}`", HEADER[j])))
                .collect::<Result<_, _>>()?;
            Some(Estimates {
                mu_obs: v[0],
                sigma_obs: v[1],
                sharpe: v[2],
                theta: v[3],
                w_star: v[4],
                efficiency: v[5],
            })
        } else {
            None
        };
        rows.push(ProfileRow {
            account_id: rec[0].to_string(),
            month,
            status,
            estimates,
        });
    }
    Ok(rows)
}

pub fn load_profiles(path: &Path) -> Result<Vec<ProfileRow>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    parse_profiles(std::io::BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Quartile and outlier summary of the `ok` rows.
pub fn summary(rows: &[ProfileRow]) -> String {
    let ok: Vec<&Estimates> = rows.iter().filter_map(|r| r.estimates.as_ref()).collect();
    let mut out = format!("account-months: {}, ok: {}\n", rows.len(), ok.len());
    let mut by_status: BTreeMap<&str, usize> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.estimates.is_none()) {
        *by_status.entry(r.status.as_str()).or_default() += 1;
    }
    for (s, n) in by_status {
        out.push_str(&format!("  {s}: {n}\n"));
    }
    for (name, values) in [
        ("theta", ok.iter().map(|e| e.theta).collect::<Vec<_>>()),
        ("efficiency", ok.iter().map(|e| e.efficiency).collect()),
    ] {
        if let (Ok((q1, q2, q3)), Ok(keep)) = (quartiles(&values), iqr_filter(&values, IQR_K)) {
            let removed = keep.iter().filter(|k| !**k).count();
            out.push_str(&format!(
                "{name} quartiles: {} {} {}; iqr removed (k = {IQR_K}): {removed}\n",
                format_float(q1),
                format_float(q2),
                format_float(q3)
            ));
        }
    }
    out
}

pub fn run(args: &InferArgs) -> Result<(), CliError> {
    let rf_source: RfSource = args.rf_source.parse().map_err(CliError::Usage)?;
    let snapshots = artifact::load(&args.moments)?;
    let positions = ingest::load_positions(&args.positions)?;
    let rows = infer_profiles(&snapshots, &positions, rf_source)?;
    let file = ingest::create(&args.out)?;
    write_profiles(file, &rows).map_err(|e| io_error(&args.out, e))?;
    print!("{}", summary(&rows));
    Ok(())
}
