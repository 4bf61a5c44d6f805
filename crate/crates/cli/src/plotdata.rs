use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use cmlm::ingest::{self, format_float, AccountType, HouseholdProfile, Knowledge, Segment, AGE_BANDS, CHILDREN, NET_WORTH_BANDS};
use cmlm::inference::iqr_filter;

use crate::infer::{load_profiles, Estimates, ProfileRow, IQR_K};
use crate::labels;
use crate::regress::{account_owners, household_of};
use crate::{io_error, svg, CliError, PlotdataArgs};

pub const DEFAULT_BINS: usize = 10;
pub const GROUPINGS: [&str; 8] = [
    "account_type",
    "net_worth",
    "knowledge",
    "segment",
    "age",
    "children",
    "sharpe",
    "stddev",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Theta,
    Efficiency,
}

impl Metric {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "theta" => Some(Metric::Theta),
            "efficiency" => Some(Metric::Efficiency),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Theta => "theta",
            Metric::Efficiency => "efficiency",
        }
    }

    pub fn of(self, e: &Estimates) -> f64 {
        match self {
            Metric::Theta => e.theta,
            Metric::Efficiency => e.efficiency,
        }
    }
}

/// Every level of a categorical grouping, in display order.
pub fn levels(by: &str) -> Option<Vec<String>> {
    Some(match by {
        "account_type" => AccountType::ALL.iter().map(|a| a.to_string()).collect(),
        "net_worth" => labels::NET_WORTH_BANDS.iter().map(|s| s.to_string()).collect(),
        "knowledge" => Knowledge::ALL.iter().map(|k| k.to_string()).collect(),
        "segment" => Segment::ALL.iter().map(|s| s.to_string()).collect(),
        "age" => labels::AGE_BANDS.iter().map(|s| s.to_string()).collect(),
        "children" => CHILDREN.map(|c| c.to_string()).collect(),
        _ => return None,
    })
}

fn level_of(by: &str, p: &HouseholdProfile) -> String {
    match by {
        "account_type" => p.account_type.to_string(),
        "net_worth" => labels::NET_WORTH_BANDS[(p.net_worth_band - NET_WORTH_BANDS.start()) as usize].to_string(),
        "knowledge" => p.knowledge.to_string(),
        "segment" => p.segment.to_string(),
        "age" => labels::AGE_BANDS[(p.age_band - AGE_BANDS.start()) as usize].to_string(),
        "children" => p.n_children.to_string(),
        other => unreachable!("not categorical: {other}"),
    }
}

/// Histogram counts of each group over shared equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub groups: Vec<(String, Vec<usize>)>,
}

pub fn histogram(values: &[(String, f64)], levels: &[String], n_bins: usize) -> Histogram {
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = match (lo.is_finite(), hi > lo) {
        (false, _) => (0.0, 1.0),
        (true, false) => (lo - 0.5, lo + 0.5),
        (true, true) => (lo, hi),
    };
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut groups: Vec<(String, Vec<usize>)> = levels.iter().map(|l| (l.clone(), vec![0; n_bins])).collect();
    for (level, v) in values {
        let bin = (((v - lo) / width) as usize).min(n_bins - 1);
        if let Some(g) = groups.iter_mut().find(|g| &g.0 == level) {
            g.1[bin] += 1;
        }
    }
    Histogram { edges, groups }
}

/// Time-averaged metric per account, after dropping rows outside the IQR
/// fences of the metric.
pub fn account_means(rows: &[ProfileRow], metric: Metric) -> BTreeMap<String, f64> {
    let ok: Vec<(&ProfileRow, f64)> = rows
        .iter()
        .filter_map(|r| r.estimates.as_ref().map(|e| (r, metric.of(e))))
        .collect();
    let values: Vec<f64> = ok.iter().map(|x| x.1).collect();
    let keep = iqr_filter(&values, IQR_K).unwrap_or_default();
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((r, v), k) in ok.iter().zip(keep) {
        if k {
            let s = sums.entry(r.account_id.clone()).or_default();
            s.0 += v;
            s.1 += 1;
        }
    }
    sums.into_iter().map(|(a, (s, n))| (a, s / n as f64)).collect()
}

pub fn write_histogram<W: Write>(writer: W, h: &Histogram) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "bin_lo", "bin_hi", "count"])?;
    for (level, counts) in &h.groups {
        for (i, c) in counts.iter().enumerate() {
            w.write_record([
                level.clone(),
                format_float(h.edges[i]),
                format_float(h.edges[i + 1]),
                c.to_string(),
            ])?;
        }
    }
    w.flush()
}

/// `(x, metric)` pairs of the `ok` rows, in input order.
pub fn scatter(rows: &[ProfileRow], by: &str, metric: Metric) -> Vec<(f64, f64)> {
    rows.iter()
        .filter_map(|r| r.estimates.as_ref())
        .map(|e| {
            let x = if by == "sharpe" { e.sharpe } else { e.sigma_obs };
            (x, metric.of(e))
        })
        .collect()
}

pub fn write_scatter<W: Write>(writer: W, metric: Metric, points: &[(f64, f64)]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", metric.name()])?;
    for (x, y) in points {
        w.write_record([format_float(*x), format_float(*y)])?;
    }
    w.flush()
}

pub fn run(args: &PlotdataArgs) -> Result<(), CliError> {
    if !GROUPINGS.contains(&args.by.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown grouping `{}`; expected one of {}",
            args.by,
            GROUPINGS.join(", ")
        )));
    }
    let metric = Metric::parse(&args.metric)
        .ok_or_else(|| CliError::Usage(format!("--metric must be theta or efficiency, got `{}`", args.metric)))?;
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let rows = load_profiles(&args.profiles)?;
    let out = ingest::create(&args.out)?;

    let picture = if let Some(levels) = levels(&args.by) {
        let demographics = args
            .demographics
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("--by {} needs --demographics", args.by)))?;
        let households: HashMap<String, HouseholdProfile> = ingest::load_household_profiles(demographics)?
            .into_iter()
            .map(|p| (p.household_id.clone(), p))
            .collect();
        let positions = match &args.positions {
            Some(p) => ingest::load_positions(p)?,
            None => Vec::new(),
        };
        let owners = account_owners(&positions);
        let mut unmatched = 0;
        let values: Vec<(String, f64)> = account_means(&rows, metric)
            .into_iter()
            .filter_map(|(account, v)| match household_of(&account, &owners, &households) {
                Some(p) => Some((level_of(&args.by, p), v)),
                None => {
                    unmatched += 1;
                    None
                }
            })
            .collect();
        if unmatched > 0 {
            log::warn!("{unmatched} accounts without a household profile");
        }
        let h = histogram(&values, &levels, args.bins);
        write_histogram(out, &h).map_err(|e| io_error(&args.out, e))?;
        svg::histograms(&h, metric.name())
    } else {
        let points = scatter(&rows, &args.by, metric);
        write_scatter(out, metric, &points).map_err(|e| io_error(&args.out, e))?;
        let x_label = if args.by == "sharpe" { "Sharpe ratio" } else { "standard deviation" };
        svg::scatter(&points, x_label, metric.name())
    };
    if let Some(path) = &args.svg {
        crate::write_text(path, &picture)?;
    }
    Ok(())
}
