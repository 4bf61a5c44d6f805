use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use cmlm::ingest::{self, build_weights, group_positions, HouseholdProfile, PositionRecord};
use cmlm::inference::iqr_filter;
use cmlm::panel::{fit_panel, PanelError, PanelObservation, RegressionResult};
use cmlm::Month;

use crate::infer::{load_profiles, Estimates, ProfileRow, IQR_K};
use crate::labels::{self, MEAN, SHARPE, STD_DEV, STOCKS, VIX};
use crate::models::{self, Model, Response, MODEL_IDS};
use crate::{write_text, CliError, RegressArgs};

/// Owner of each account according to the positions file.
pub fn account_owners(positions: &[PositionRecord]) -> HashMap<String, String> {
    positions
        .iter()
        .map(|p| (p.account_id.clone(), p.household_id.clone()))
        .collect()
}

/// Resolves the household of an account: the positions mapping when known,
/// else an exact household id, else the id before the last `-`.
pub fn household_of<'a>(
    account: &str,
    owners: &HashMap<String, String>,
    households: &'a HashMap<String, HouseholdProfile>,
) -> Option<&'a HouseholdProfile> {
    if let Some(h) = owners.get(account) {
        return households.get(h);
    }
    households
        .get(account)
        .or_else(|| account.rsplit_once('-').and_then(|(h, _)| households.get(h)))
}

pub fn response_value(e: &Estimates, r: Response) -> f64 {
    match r {
        Response::RiskAversion => e.theta,
        Response::Efficiency => e.efficiency,
    }
}

/// Inputs joined per account-month.
pub struct RegressionData<'a> {
    pub rows: &'a [ProfileRow],
    pub households: HashMap<String, HouseholdProfile>,
    pub owners: HashMap<String, String>,
    pub holdings: BTreeMap<(String, Month), usize>,
    pub vix: BTreeMap<Month, f64>,
}

pub fn holding_counts(positions: &[PositionRecord]) -> BTreeMap<(String, Month), usize> {
    group_positions(positions)
        .into_iter()
        .filter_map(|(k, recs)| build_weights(&recs).ok().map(|p| (k, p.n_holdings())))
        .collect()
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct JoinReport {
    pub iqr_removed: usize,
    pub no_household: usize,
    pub no_vix: usize,
    pub no_holdings: usize,
}

/// Panel observations for `model`: `ok` rows inside the IQR fences of the
/// response, joined with household attributes, holdings and the VIX.
pub fn observations(model: &Model, data: &RegressionData) -> (Vec<PanelObservation>, JoinReport) {
    let ok: Vec<(&ProfileRow, &Estimates)> = data
        .rows
        .iter()
        .filter_map(|r| r.estimates.as_ref().map(|e| (r, e)))
        .collect();
    let values: Vec<f64> = ok.iter().map(|(_, e)| response_value(e, model.response)).collect();
    let keep = iqr_filter(&values, IQR_K).unwrap_or_default();
    let needs_vix = model.uses(VIX);
    let needs_stocks = model.uses(STOCKS);
    let mut report = JoinReport::default();
    let mut out = Vec::with_capacity(ok.len());
    for ((row, e), keep) in ok.iter().zip(keep) {
        if !keep {
            report.iqr_removed += 1;
            continue;
        }
        let Some(profile) = household_of(&row.account_id, &data.owners, &data.households) else {
            report.no_household += 1;
            continue;
        };
        let mut covariates: BTreeMap<String, f64> = labels::household_covariates(profile).into_iter().collect();
        covariates.insert(SHARPE.into(), e.sharpe);
        covariates.insert(MEAN.into(), e.mu_obs);
        covariates.insert(STD_DEV.into(), e.sigma_obs);
        if needs_vix {
            match data.vix.get(&row.month) {
                Some(v) => {
                    covariates.insert(VIX.into(), *v);
                }
                None => {
                    report.no_vix += 1;
                    continue;
                }
            }
        }
        if needs_stocks {
            match data.holdings.get(&(row.account_id.clone(), row.month)) {
                Some(n) => {
                    covariates.insert(STOCKS.into(), *n as f64);
                }
                None => {
                    report.no_holdings += 1;
                    continue;
                }
            }
        }
        out.push(PanelObservation {
            entity_id: row.account_id.clone(),
            time_id: row.month.to_string(),
            response: response_value(e, model.response),
            covariates,
        });
    }
    (out, report)
}

/// Removes category indicators that never vary in the sample (levels absent
/// from the data) along with their interactions. When a group's reference
/// level is absent its first remaining level becomes the reference. Returns
/// the removed names.
pub fn drop_constant_dummies(model: &mut Model, obs: &[PanelObservation]) -> Vec<String> {
    let value = |o: &PanelObservation, name: &str| o.covariates.get(name).copied().unwrap_or(0.0);
    let constant = |name: &str| match obs.first() {
        None => true,
        Some(first) => obs.iter().all(|o| value(o, name) == value(first, name)),
    };
    let mut dropped: Vec<String> = model
        .spec
        .regressors
        .iter()
        .filter(|r| labels::is_dummy(r) && constant(r))
        .cloned()
        .collect();
    for group in labels::dummy_groups() {
        let present: Vec<&String> = group
            .iter()
            .filter(|g| model.spec.regressors.contains(g) && !dropped.contains(g))
            .collect();
        let reference_absent = !present.is_empty()
            && obs
                .iter()
                .all(|o| present.iter().any(|g| value(o, g) != 0.0));
        if reference_absent {
            dropped.push(present[0].clone());
        }
    }
    model.spec.regressors.retain(|r| !dropped.contains(r));
    model
        .spec
        .interactions
        .retain(|(a, b)| !dropped.contains(a) && !dropped.contains(b));
    dropped
}

pub fn fit_model(model: &Model, obs: &[PanelObservation]) -> Result<RegressionResult, CliError> {
    fit_panel(obs, &model.spec).map_err(|e| match e {
        PanelError::UnknownRegressor { .. } | PanelError::DuplicateObservation { .. } | PanelError::NonFinite { .. } => {
            CliError::Data(e.to_string())
        }
        _ => CliError::Numeric(e.to_string()),
    })
}

/// Table and CSV destinations: the table goes to `out` and the CSV next to
/// it with a `.csv` extension (or to `out` and `.txt` when `out` is a CSV).
pub fn output_paths(out: &Path) -> (PathBuf, PathBuf) {
    if out.extension().is_some_and(|e| e == "csv") {
        (out.with_extension("txt"), out.to_path_buf())
    } else {
        (out.to_path_buf(), out.with_extension("csv"))
    }
}

pub fn run(args: &RegressArgs) -> Result<(), CliError> {
    let mut model = models::lookup(&args.model).ok_or_else(|| {
        CliError::Usage(format!("unknown model `{}`; expected one of {}", args.model, MODEL_IDS.join(", ")))
    })?;
    if model.uses(STOCKS) && args.positions.is_none() {
        return Err(CliError::Usage(format!("model {} needs --positions for holding counts", model.id)));
    }
    let rows = load_profiles(&args.profiles)?;
    let households = ingest::load_household_profiles(&args.demographics)?
        .into_iter()
        .map(|p| (p.household_id.clone(), p))
        .collect();
    let vix = ingest::monthly_vix(&ingest::load_vix(&args.vix)?);
    let positions = match &args.positions {
        Some(p) => ingest::load_positions(p)?,
        None => Vec::new(),
    };
    let data = RegressionData {
        rows: &rows,
        households,
        owners: account_owners(&positions),
        holdings: holding_counts(&positions),
        vix,
    };
    let (obs, report) = observations(&model, &data);
    if report.no_household + report.no_vix + report.no_holdings > 0 {
        log::warn!(
            "dropped account-months: {} without household, {} without VIX, {} without holdings",
            report.no_household,
            report.no_vix,
            report.no_holdings
        );
    }
    if obs.is_empty() {
        return Err(CliError::Data("no observations left after joining inputs".into()));
    }
    let dropped = drop_constant_dummies(&mut model, &obs);
    let result = fit_model(&model, &obs)?;

    let mut notes = Vec::new();
    if model.spec.regressors.iter().any(|r| labels::is_dummy(r)) || !dropped.is_empty() {
        notes.push(labels::REFERENCE_NOTE.to_string());
    }
    notes.push(format!("{} observations outside 1.5 x IQR of the response removed.", report.iqr_removed));
    if !dropped.is_empty() {
        notes.push(format!("Dropped indicators (level or reference absent from the sample): {}.", dropped.join(", ")));
    }
    let table = result.to_table(model.response.label(), &format!("({})", model.id), &notes);
    let (table_path, csv_path) = output_paths(&args.out);
    write_text(&table_path, &table)?;
    write_text(&csv_path, &result.to_csv())?;
    print!("{table}");
    Ok(())
}
