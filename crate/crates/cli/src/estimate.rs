use std::collections::BTreeSet;

use cmlm::factor_model::{fit_loadings, FactorMoments, FactorSeries, ReturnSeries};
use cmlm::ingest::{self, rolling_window, Dated};
use cmlm::Month;
use rayon::prelude::*;

use crate::artifact::{self, Snapshot};
use crate::{check_window, read_text, CliError, EstimateArgs};

/// Reads a one-column `asset_id` file.
pub fn load_market(path: &std::path::Path) -> Result<Vec<String>, CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("asset_id") {
        return Err(CliError::Data(format!("{}: expected header `asset_id`", path.display())));
    }
    Ok(lines.map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

enum MonthOutcome {
    Snapshot(Snapshot),
    NoAssets,
    NoMarket,
}

fn estimate_month(
    month: Month,
    window: &[cmlm::FactorObservation],
    returns: &[ReturnSeries],
    market: &[String],
) -> MonthOutcome {
    let factors = FactorSeries::new(window.to_vec()).expect("window of an ordered series");
    let (first, last) = (window[0].date, window[window.len() - 1].date);
    let mut loadings = Vec::new();
    let mut short = 0;
    for r in returns {
        let covered = r
            .points()
            .iter()
            .filter(|(d, _)| *d >= first && *d <= last && factors.get(*d).is_some())
            .count();
        if covered < window.len() {
            short += 1;
            continue;
        }
        match fit_loadings(r, &factors) {
            Ok(l) => loadings.push(l),
            Err(e) => log::warn!("{month}: asset {} skipped: {e}", r.asset_id()),
        }
    }
    if short > 0 {
        log::debug!("{month}: {short} assets lack a full window");
    }
    let moments = match FactorMoments::estimate(&loadings, &factors) {
        Ok(m) => m,
        Err(_) => return MonthOutcome::NoAssets,
    };
    let present: BTreeSet<&str> = loadings.iter().map(|l| l.asset_id.as_str()).collect();
    let members: Vec<String> = market.iter().filter(|id| present.contains(id.as_str())).cloned().collect();
    if !market.is_empty() && members.is_empty() {
        return MonthOutcome::NoMarket;
    }
    if !market.is_empty() && members.len() < market.len() {
        log::warn!("{month}: {} market assets lack a full window", market.len() - members.len());
    }
    MonthOutcome::Snapshot(Snapshot {
        month,
        moments,
        market: members,
    })
}

/// One snapshot per factor month that has `window` earlier months of data.
pub fn estimate_snapshots(
    factors: &FactorSeries,
    returns: &[ReturnSeries],
    window: usize,
    market: &[String],
) -> Vec<Snapshot> {
    let obs = factors.observations();
    let months: Vec<Month> = obs.iter().map(Dated::period).collect();
    months
        .par_iter()
        .filter_map(|&m| {
            let w = rolling_window(obs, m, window).ok()?;
            match estimate_month(m, w, returns, market) {
                MonthOutcome::Snapshot(s) => Some(s),
                MonthOutcome::NoAssets => {
                    log::warn!("{m}: no asset has a usable window");
                    None
                }
                MonthOutcome::NoMarket => {
                    log::warn!("{m}: no market asset has a usable window");
                    None
                }
            }
        })
        .collect()
}

pub fn run(args: &EstimateArgs) -> Result<(), CliError> {
    check_window(args.window)?;
    let factors = ingest::load_factors(&args.factors)?;
    let returns = ingest::load_returns(&args.returns)?;
    let market = match &args.market {
        Some(p) => load_market(p)?,
        None => Vec::new(),
    };
    let snapshots = estimate_snapshots(&factors, &returns, args.window, &market);
    if snapshots.is_empty() {
        return Err(CliError::Data(format!(
            "no month has {} months of prior factor and return data",
            args.window
        )));
    }
    artifact::save(&args.out, &snapshots)?;
    log::info!("wrote {} snapshots to {}", snapshots.len(), args.out.display());
    Ok(())
}
