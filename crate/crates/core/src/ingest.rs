//! CSV schemas for positions, household profiles, factors, asset returns and
//! the VIX, plus the account-month weights and rolling windows built on them.
//!
//! Parsing is strict: the header must match exactly and every malformed row
//! is an error carrying its line number (the header is line 1).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::factor_model::{FactorError, FactorObservation, FactorSeries, ReturnSeries};
use crate::month::Month;

pub const POSITIONS_HEADER: [&str; 5] = ["household_id", "account_id", "month", "asset_id", "market_value"];
pub const PROFILES_HEADER: [&str; 12] = [
    "household_id",
    "net_worth_band",
    "income_band",
    "knowledge",
    "age_band",
    "n_children",
    "marital",
    "residence_years",
    "n_cars",
    "n_credit_cards",
    "account_type",
    "segment",
];
pub const VIX_HEADER: [&str; 2] = ["date", "vix_close"];
pub const FACTORS_HEADER: [&str; 7] = ["date", "mkt_rf", "smb", "hml", "rmw", "cma", "rf"];
pub const RETURNS_HEADER: [&str; 3] = ["date", "asset_id", "ret"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("missing or unexpected header: expected `{expected}`, found `{found}`")]
    MissingHeader { expected: String, found: String },
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("duplicate key {key} on lines {first_line} and {second_line}")]
    DuplicateKey {
        key: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("line {line}: value of `{field}` outside its domain")]
    OutOfDomainValue { field: String, line: usize },
    #[error("account {account_id} has zero total value in {month}")]
    ZeroTotalValue { account_id: String, month: Month },
    #[error("positions span more than one account-month")]
    MixedAccountMonth,
    #[error("no positions given")]
    EmptyPortfolio,
    #[error("insufficient history: {required} periods required, {available} available")]
    InsufficientHistory { required: usize, available: usize },
    #[error("window length must be at least 1")]
    InvalidWindow,
    #[error("series is not in strictly increasing order")]
    UnorderedSeries,
    #[error(transparent)]
    Factor(#[from] FactorError),
}

fn io_error(path: &Path, err: impl fmt::Display) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| io_error(path, e))
}

/// Shortest text that parses back to exactly `v`, in scientific notation
/// outside `[1e-4, 1e15)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Creates `path` for writing, mapping failures to [`IngestError::Io`].
pub fn create(path: &Path) -> Result<io::BufWriter<File>, IngestError> {
    File::create(path).map(io::BufWriter::new).map_err(|e| io_error(path, e))
}

fn with_path<T>(path: &Path, r: Result<T, IngestError>) -> Result<T, IngestError> {
    r.map_err(|e| match e {
        IngestError::Io { message, .. } => io_error(path, message),
        other => other,
    })
}

struct Row {
    line: usize,
    fields: csv::StringRecord,
}

impl Row {
    fn get(&self, i: usize) -> &str {
        &self.fields[i]
    }

    fn bad(&self, reason: impl Into<String>) -> IngestError {
        IngestError::BadRow {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn text(&self, i: usize, name: &str) -> Result<String, IngestError> {
        let v = self.get(i);
        if v.is_empty() {
            Err(self.bad(format!("empty `{name}`")))
        } else {
            Ok(v.to_string())
        }
    }

    fn number(&self, i: usize, name: &str) -> Result<f64, IngestError> {
        let raw = self.get(i);
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.bad(format!("`{name}` is not a finite number: `{raw}`"))),
        }
    }

    fn date(&self, i: usize) -> Result<NaiveDate, IngestError> {
        parse_date(self.get(i)).ok_or_else(|| self.bad(format!("bad date `{}`", self.get(i))))
    }

    fn month(&self, i: usize) -> Result<Month, IngestError> {
        self.get(i).parse().map_err(|_| self.bad(format!("bad month `{}`", self.get(i))))
    }
}

/// Strict `YYYY-MM-DD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    if s.len() != 10 || s.as_bytes()[4] != b'-' || s.as_bytes()[7] != b'-' {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn read_rows<R: Read>(reader: R, expected: &[&str]) -> Result<Vec<Row>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => return Err(csv_error(e)),
        None => {
            return Err(IngestError::MissingHeader {
                expected: expected.join(","),
                found: String::new(),
            })
        }
    };
    if header.iter().ne(expected.iter().copied()) {
        return Err(IngestError::MissingHeader {
            expected: expected.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let fields = rec.map_err(csv_error)?;
        let line = fields.position().map_or(0, |p| p.line() as usize);
        if fields.len() != expected.len() {
            return Err(IngestError::BadRow {
                line,
                reason: format!("expected {} fields, found {}", expected.len(), fields.len()),
            });
        }
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::Io(io) => IngestError::Io {
            path: String::new(),
            message: io.to_string(),
        },
        _ => IngestError::BadRow {
            line,
            reason: e.to_string(),
        },
    }
}

fn write_rows<W: Write>(writer: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

// ---------------------------------------------------------------- positions

#[derive(Debug, Clone, PartialEq)]
pub struct PositionRecord {
    pub household_id: String,
    pub account_id: String,
    pub month: Month,
    pub asset_id: String,
    pub market_value: f64,
}

pub fn parse_positions<R: Read>(reader: R) -> Result<Vec<PositionRecord>, IngestError> {
    let rows = read_rows(reader, &POSITIONS_HEADER)?;
    let mut seen: HashMap<(String, Month, String), usize> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let rec = PositionRecord {
            household_id: row.text(0, "household_id")?,
            account_id: row.text(1, "account_id")?,
            month: row.month(2)?,
            asset_id: row.text(3, "asset_id")?,
            market_value: row.number(4, "market_value")?,
        };
        if rec.market_value < 0.0 {
            return Err(row.bad("negative market_value"));
        }
        let key = (rec.account_id.clone(), rec.month, rec.asset_id.clone());
        if let Some(&first) = seen.get(&key) {
            return Err(IngestError::DuplicateKey {
                key: format!("({}, {}, {})", key.0, key.1, key.2),
                first_line: first,
                second_line: row.line,
            });
        }
        seen.insert(key, row.line);
        out.push(rec);
    }
    Ok(out)
}

pub fn load_positions(path: &Path) -> Result<Vec<PositionRecord>, IngestError> {
    with_path(path, parse_positions(open(path)?))
}

pub fn write_positions<W: Write>(writer: W, records: &[PositionRecord]) -> io::Result<()> {
    write_rows(
        writer,
        &POSITIONS_HEADER,
        records.iter().map(|r| {
            vec![
                r.household_id.clone(),
                r.account_id.clone(),
                r.month.to_string(),
                r.asset_id.clone(),
                format_float(r.market_value),
            ]
        }),
    )
}

/// Value-weighted holdings of one account in one month.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountMonthPortfolio {
    pub account_id: String,
    pub month: Month,
    pub weights: BTreeMap<String, f64>,
}

impl AccountMonthPortfolio {
    /// Number of distinct assets held.
    pub fn n_holdings(&self) -> usize {
        self.weights.len()
    }
}

pub fn build_weights(positions: &[&PositionRecord]) -> Result<AccountMonthPortfolio, IngestError> {
    let first = positions.first().ok_or(IngestError::EmptyPortfolio)?;
    if positions
        .iter()
        .any(|p| p.account_id != first.account_id || p.month != first.month)
    {
        return Err(IngestError::MixedAccountMonth);
    }
    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    for p in positions.iter().filter(|p| p.market_value > 0.0) {
        *values.entry(p.asset_id.clone()).or_default() += p.market_value;
    }
    let total: f64 = values.values().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(IngestError::ZeroTotalValue {
            account_id: first.account_id.clone(),
            month: first.month,
        });
    }
    let weights = values.into_iter().map(|(k, v)| (k, v / total)).collect();
    Ok(AccountMonthPortfolio {
        account_id: first.account_id.clone(),
        month: first.month,
        weights,
    })
}

/// Groups positions by (account, month), in sorted key order.
pub fn group_positions(records: &[PositionRecord]) -> BTreeMap<(String, Month), Vec<&PositionRecord>> {
    let mut groups: BTreeMap<(String, Month), Vec<&PositionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.account_id.clone(), r.month)).or_default().push(r);
    }
    groups
}

// ---------------------------------------------------------------- windows

/// Records that fall in a calendar month.
pub trait Dated {
    fn period(&self) -> Month;
}

impl Dated for Month {
    fn period(&self) -> Month {
        *self
    }
}

impl Dated for NaiveDate {
    fn period(&self) -> Month {
        Month::of(*self)
    }
}

impl Dated for FactorObservation {
    fn period(&self) -> Month {
        Month::of(self.date)
    }
}

impl Dated for VixObservation {
    fn period(&self) -> Month {
        Month::of(self.date)
    }
}

impl<T> Dated for (NaiveDate, T) {
    fn period(&self) -> Month {
        Month::of(self.0)
    }
}

/// The last `length` records dated before `as_of`, oldest first. The series
/// must be strictly increasing by period.
pub fn rolling_window<T: Dated>(series: &[T], as_of: Month, length: usize) -> Result<&[T], IngestError> {
    if length == 0 {
        return Err(IngestError::InvalidWindow);
    }
    if series.windows(2).any(|w| w[0].period() >= w[1].period()) {
        return Err(IngestError::UnorderedSeries);
    }
    let end = series.partition_point(|r| r.period() < as_of);
    if end < length {
        return Err(IngestError::InsufficientHistory {
            required: length,
            available: end,
        });
    }
    Ok(&series[end - length..end])
}

// ---------------------------------------------------------------- profiles

macro_rules! category {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

category!(
    /// Self-reported investment knowledge.
    Knowledge {
        Extensive => "extensive",
        Good => "good",
        Limited => "limited",
        None => "none",
        Unknown => "unknown",
    }
);

category!(Marital {
    Married => "married",
    Single => "single",
    InferredMarried => "inferred_married",
    InferredSingle => "inferred_single",
    Unknown => "unknown",
});

category!(AccountType {
    Cash => "cash",
    Ira => "ira",
    Keogh => "keogh",
    Margin => "margin",
    SchwabOne => "schwab_one",
});

category!(Segment {
    ActiveTrader => "active_trader",
    Affluent => "affluent",
    General => "general",
});

pub const NET_WORTH_BANDS: std::ops::RangeInclusive<u8> = 1..=6;
pub const INCOME_BANDS: std::ops::RangeInclusive<u8> = 1..=5;
pub const AGE_BANDS: std::ops::RangeInclusive<u8> = 1..=7;
pub const CHILDREN: std::ops::RangeInclusive<u8> = 0..=6;
pub const RESIDENCE_YEARS: std::ops::RangeInclusive<u8> = 0..=15;
pub const CARS: std::ops::RangeInclusive<u8> = 0..=3;
pub const CREDIT_CARDS: std::ops::RangeInclusive<u8> = 0..=6;

/// Demographic and account attributes of a household, fixed over time.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HouseholdProfile {
    pub household_id: String,
    pub net_worth_band: u8,
    pub income_band: u8,
    pub knowledge: Knowledge,
    pub age_band: u8,
    pub n_children: u8,
    pub marital: Marital,
    pub residence_years: u8,
    pub n_cars: u8,
    pub n_credit_cards: u8,
    pub account_type: AccountType,
    pub segment: Segment,
}

impl HouseholdProfile {
    fn to_row(&self) -> Vec<String> {
        vec![
            self.household_id.clone(),
            self.net_worth_band.to_string(),
            self.income_band.to_string(),
            self.knowledge.to_string(),
            self.age_band.to_string(),
            self.n_children.to_string(),
            self.marital.to_string(),
            self.residence_years.to_string(),
            self.n_cars.to_string(),
            self.n_credit_cards.to_string(),
            self.account_type.to_string(),
            self.segment.to_string(),
        ]
    }
}

/// Profiles plus the number of rows dropped for missing fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub profiles: Vec<HouseholdProfile>,
    pub dropped: usize,
}

/// Rows with an empty field count as missing information and are dropped;
/// a present value outside its domain is an error.
pub fn parse_household_profiles<R: Read>(reader: R) -> Result<ProfileTable, IngestError> {
    let rows = read_rows(reader, &PROFILES_HEADER)?;
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut profiles = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for row in rows {
        if row.fields.iter().any(str::is_empty) {
            dropped += 1;
            continue;
        }
        let band = |i: usize, range: std::ops::RangeInclusive<u8>| -> Result<u8, IngestError> {
            row.get(i)
                .parse::<u8>()
                .ok()
                .filter(|v| range.contains(v))
                .ok_or_else(|| IngestError::OutOfDomainValue {
                    field: PROFILES_HEADER[i].to_string(),
                    line: row.line,
                })
        };
        fn cat<T: FromStr>(row: &Row, i: usize) -> Result<T, IngestError> {
            row.get(i).parse().map_err(|_| IngestError::OutOfDomainValue {
                field: PROFILES_HEADER[i].to_string(),
                line: row.line,
            })
        }
        let profile = HouseholdProfile {
            household_id: row.get(0).to_string(),
            net_worth_band: band(1, NET_WORTH_BANDS)?,
            income_band: band(2, INCOME_BANDS)?,
            knowledge: cat(&row, 3)?,
            age_band: band(4, AGE_BANDS)?,
            n_children: band(5, CHILDREN)?,
            marital: cat(&row, 6)?,
            residence_years: band(7, RESIDENCE_YEARS)?,
            n_cars: band(8, CARS)?,
            n_credit_cards: band(9, CREDIT_CARDS)?,
            account_type: cat(&row, 10)?,
            segment: cat(&row, 11)?,
        };
        if let Some(&first) = seen.get(&profile.household_id) {
            return Err(IngestError::DuplicateKey {
                key: profile.household_id,
                first_line: first,
                second_line: row.line,
            });
        }
        seen.insert(profile.household_id.clone(), row.line);
        profiles.push(profile);
    }
    Ok(ProfileTable { profiles, dropped })
}

pub fn load_household_profiles(path: &Path) -> Result<Vec<HouseholdProfile>, IngestError> {
    let table = with_path(path, parse_household_profiles(open(path)?))?;
    if table.dropped > 0 {
        log::info!(
            "{}: dropped {} households with missing information",
            path.display(),
            table.dropped
        );
    }
    Ok(table.profiles)
}

pub fn write_household_profiles<W: Write>(writer: W, profiles: &[HouseholdProfile]) -> io::Result<()> {
    write_rows(writer, &PROFILES_HEADER, profiles.iter().map(HouseholdProfile::to_row))
}

// ---------------------------------------------------------------- VIX

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VixObservation {
    pub date: NaiveDate,
    pub close: f64,
}

/// Sorted ascending by date; duplicate dates are rejected.
pub fn parse_vix<R: Read>(reader: R) -> Result<Vec<VixObservation>, IngestError> {
    let rows = read_rows(reader, &VIX_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let close = row.number(1, "vix_close")?;
        if close < 0.0 {
            return Err(row.bad("negative vix_close"));
        }
        out.push((row.line, VixObservation { date: row.date(0)?, close }));
    }
    out.sort_by_key(|(line, o)| (o.date, *line));
    for w in out.windows(2) {
        if w[0].1.date == w[1].1.date {
            return Err(IngestError::DuplicateKey {
                key: w[0].1.date.to_string(),
                first_line: w[0].0,
                second_line: w[1].0,
            });
        }
    }
    Ok(out.into_iter().map(|(_, o)| o).collect())
}

pub fn load_vix(path: &Path) -> Result<Vec<VixObservation>, IngestError> {
    with_path(path, parse_vix(open(path)?))
}

pub fn write_vix<W: Write>(writer: W, series: &[VixObservation]) -> io::Result<()> {
    write_rows(
        writer,
        &VIX_HEADER,
        series.iter().map(|o| vec![o.date.to_string(), format_float(o.close)]),
    )
}

/// Month-end level: the last close within each calendar month.
pub fn monthly_vix(series: &[VixObservation]) -> BTreeMap<Month, f64> {
    let mut out = BTreeMap::new();
    for o in series {
        out.insert(Month::of(o.date), o.close);
    }
    out
}

// ---------------------------------------------------------------- factors and returns

/// Rows may come in any order; they are sorted by date and duplicates rejected.
pub fn parse_factors<R: Read>(reader: R) -> Result<FactorSeries, IngestError> {
    let rows = read_rows(reader, &FACTORS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in &rows {
        let obs = FactorObservation {
            date: row.date(0)?,
            mkt_excess: row.number(1, "mkt_rf")?,
            smb: row.number(2, "smb")?,
            hml: row.number(3, "hml")?,
            rmw: row.number(4, "rmw")?,
            cma: row.number(5, "cma")?,
            rf: row.number(6, "rf")?,
        };
        out.push((row.line, obs));
    }
    out.sort_by_key(|(line, o)| (o.date, *line));
    for w in out.windows(2) {
        if w[0].1.date == w[1].1.date {
            return Err(IngestError::DuplicateKey {
                key: w[0].1.date.to_string(),
                first_line: w[0].0,
                second_line: w[1].0,
            });
        }
    }
    Ok(FactorSeries::new(out.into_iter().map(|(_, o)| o).collect())?)
}

pub fn load_factors(path: &Path) -> Result<FactorSeries, IngestError> {
    with_path(path, parse_factors(open(path)?))
}

pub fn write_factors<W: Write>(writer: W, series: &FactorSeries) -> io::Result<()> {
    write_rows(
        writer,
        &FACTORS_HEADER,
        series.observations().iter().map(|o| {
            vec![
                o.date.to_string(),
                format_float(o.mkt_excess),
                format_float(o.smb),
                format_float(o.hml),
                format_float(o.rmw),
                format_float(o.cma),
                format_float(o.rf),
            ]
        }),
    )
}

/// One series per asset, ordered by asset id, each sorted by date.
pub fn parse_returns<R: Read>(reader: R) -> Result<Vec<ReturnSeries>, IngestError> {
    let rows = read_rows(reader, &RETURNS_HEADER)?;
    let mut by_asset: BTreeMap<String, Vec<(NaiveDate, usize, f64)>> = BTreeMap::new();
    for row in &rows {
        let date = row.date(0)?;
        let asset = row.text(1, "asset_id")?;
        let ret = row.number(2, "ret")?;
        by_asset.entry(asset).or_default().push((date, row.line, ret));
    }
    let mut out = Vec::with_capacity(by_asset.len());
    for (asset, mut points) in by_asset {
        points.sort_by_key(|&(d, line, _)| (d, line));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(IngestError::DuplicateKey {
                    key: format!("({}, {})", w[0].0, asset),
                    first_line: w[0].1,
                    second_line: w[1].1,
                });
            }
        }
        out.push(ReturnSeries::new(asset, points.into_iter().map(|(d, _, r)| (d, r)).collect())?);
    }
    Ok(out)
}

pub fn load_returns(path: &Path) -> Result<Vec<ReturnSeries>, IngestError> {
    with_path(path, parse_returns(open(path)?))
}

/// Rows are written asset by asset.
pub fn write_returns<W: Write>(writer: W, series: &[ReturnSeries]) -> io::Result<()> {
    write_rows(
        writer,
        &RETURNS_HEADER,
        series.iter().flat_map(|s| {
            s.points()
                .iter()
                .map(move |(d, r)| vec![d.to_string(), s.asset_id().to_string(), format_float(*r)])
        }),
    )
}
