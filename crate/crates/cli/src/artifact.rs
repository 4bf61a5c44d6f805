//! The `cmlm1` moments file.
//!
//! A first line `cmlm1`, then CSV with header `month,kind,id,n_obs,v0..v6`.
//! Each month stores the factor form of its moments: the mean risk-free
//! rate (`rf`, in `v0`), the factor mean (`factor_mean`, `v0..v4`), one
//! `factor_cov` row per factor, one `asset` row per asset (`alpha`, five
//! betas, residual variance) and one `market` row per market member.
//! Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use cmlm::factor_model::{FactorCovariance, FactorLoadings, FactorMoments, FactorVector, FACTOR_NAMES, N_FACTORS};
use cmlm::ingest::format_float;
use cmlm::Month;

use crate::{io_error, read_text, CliError};

pub const MAGIC: &str = "cmlm1";
pub const HEADER: [&str; 11] = ["month", "kind", "id", "n_obs", "v0", "v1", "v2", "v3", "v4", "v5", "v6"];

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub month: Month,
    pub moments: FactorMoments,
    /// Market members; empty means every asset.
    pub market: Vec<String>,
}

impl Snapshot {
    pub fn market_ids(&self) -> Vec<&str> {
        if self.market.is_empty() {
            self.moments.loadings.iter().map(|l| l.asset_id.as_str()).collect()
        } else {
            self.market.iter().map(String::as_str).collect()
        }
    }
}

fn row(month: Month, kind: &str, id: &str, n_obs: Option<usize>, values: &[f64]) -> Vec<String> {
    let mut r = vec![
        month.to_string(),
        kind.to_string(),
        id.to_string(),
        n_obs.map(|n| n.to_string()).unwrap_or_default(),
    ];
    r.extend(values.iter().map(|v| format_float(*v)));
    r.resize(HEADER.len(), String::new());
    r
}

pub fn write<W: Write>(mut writer: W, snapshots: &[Snapshot]) -> std::io::Result<()> {
    writeln!(writer, "{MAGIC}")?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for s in snapshots {
        let m = &s.moments;
        w.write_record(row(s.month, "rf", "", None, &[m.rf]))?;
        w.write_record(row(s.month, "factor_mean", "", None, m.factor_mean.as_slice()))?;
        for (i, name) in FACTOR_NAMES.iter().enumerate() {
            let r: Vec<f64> = (0..N_FACTORS).map(|j| m.factor_cov[(i, j)]).collect();
            w.write_record(row(s.month, "factor_cov", name, None, &r))?;
        }
        for l in &m.loadings {
            let mut v = vec![l.alpha];
            v.extend(l.betas.iter());
            v.push(l.resid_variance);
            w.write_record(row(s.month, "asset", &l.asset_id, Some(l.n_obs), &v))?;
        }
        for id in &s.market {
            w.write_record(row(s.month, "market", id, None, &[]))?;
        }
    }
    w.flush()
}

pub fn save(path: &Path, snapshots: &[Snapshot]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    write(std::io::BufWriter::new(file), snapshots).map_err(|e| io_error(path, e))
}

#[derive(Default)]
struct Partial {
    rf: Option<f64>,
    factor_mean: Option<FactorVector>,
    factor_cov: FactorCovariance,
    cov_rows: usize,
    loadings: Vec<FactorLoadings>,
    market: Vec<String>,
}

pub fn parse(text: &str) -> Result<Vec<Snapshot>, String> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != MAGIC {
        return Err(format!("not a {MAGIC} file"));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(format!("expected header `{}`", HEADER.join(",")));
    }
    let mut months: BTreeMap<Month, Partial> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| format!("line {line}: {e}"))?;
        let bad = |what: &str| format!("line {line}: {what}");
        let month: Month = rec[0].parse().map_err(|_| bad("bad month"))?;
        let values = |n: usize| -> Result<Vec<f64>, String> {
            (0..n)
                .map(|j| {
                    rec[4 + j]
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(&format!("bad value v{j}")))
                })
                .collect()
        };
        let p = months.entry(month).or_default();
        match &rec[1] {
            "rf" => p.rf = Some(values(1)?[0]),
            "factor_mean" => p.factor_mean = Some(FactorVector::from_column_slice(&values(N_FACTORS)?)),
            "factor_cov" => {
                let i = FACTOR_NAMES
                    .iter()
                    .position(|n| *n == &rec[2])
                    .ok_or_else(|| bad("unknown factor"))?;
                for (j, v) in values(N_FACTORS)?.into_iter().enumerate() {
                    p.factor_cov[(i, j)] = v;
                }
                p.cov_rows += 1;
            }
            "asset" => {
                let v = values(N_FACTORS + 2)?;
                p.loadings.push(FactorLoadings {
                    asset_id: rec[2].to_string(),
                    alpha: v[0],
                    betas: FactorVector::from_column_slice(&v[1..=N_FACTORS]),
                    resid_variance: v[N_FACTORS + 1],
                    n_obs: rec[3].parse().map_err(|_| bad("bad n_obs"))?,
                });
            }
            "market" => p.market.push(rec[2].to_string()),
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        }
    }
    months
        .into_iter()
        .map(|(month, p)| {
            let incomplete = || format!("{month}: incomplete snapshot");
            if p.cov_rows != N_FACTORS {
                return Err(incomplete());
            }
            Ok(Snapshot {
                month,
                moments: FactorMoments {
                    rf: p.rf.ok_or_else(incomplete)?,
                    factor_mean: p.factor_mean.ok_or_else(incomplete)?,
                    factor_cov: p.factor_cov,
                    loadings: p.loadings,
                },
                market: p.market,
            })
        })
        .collect()
}

pub fn load(path: &Path) -> Result<Vec<Snapshot>, CliError> {
    parse(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
