//! Linear panel regressions with absorbed fixed effects.
//!
//! Fixed effects are removed by the within transformation: every column of
//! the design and the response is demeaned by time group, entity group, or
//! (for two-way effects) both, alternating until the group means vanish.
//! By Frisch–Waugh–Lovell the slopes equal those of the dummy-variable
//! regression. Degrees of freedom count each absorbed effect as an
//! estimated parameter; standard errors are the conventional homoskedastic
//! ones.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::ingest::format_float;
use crate::linalg;

pub const INTERCEPT: &str = "(Intercept)";
/// Convergence tolerance of the alternating two-way demeaning, relative to
/// the column's magnitude.
pub const DEMEAN_TOLERANCE: f64 = 1e-12;
pub const MAX_DEMEAN_ITERATIONS: usize = 100;
/// A demeaned column below this fraction of its original magnitude carries
/// no within variation.
const WITHIN_VARIATION_TOLERANCE: f64 = 1e-10;
/// Residual sum of squares below this fraction of the total counts as zero.
const EXACT_FIT_TOLERANCE: f64 = 1e-26;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanelError {
    #[error("regressor `{name}` missing for entity {entity_id}, time {time_id}")]
    UnknownRegressor {
        name: String,
        entity_id: String,
        time_id: String,
    },
    #[error("duplicate design column `{0}`")]
    DuplicateColumn(String),
    #[error("duplicate observation for entity {entity_id}, time {time_id}")]
    DuplicateObservation { entity_id: String, time_id: String },
    #[error("non-finite value in `{column}` for entity {entity_id}, time {time_id}")]
    NonFinite {
        column: String,
        entity_id: String,
        time_id: String,
    },
    #[error("design is rank deficient after absorbing effects")]
    RankDeficient,
    #[error("too few observations: {n_obs} for {parameters} parameters")]
    TooFewObservations { n_obs: usize, parameters: usize },
    #[error("regressor `{0}` has no variation within the absorbed groups")]
    NoWithinVariation(String),
    #[error("two-way demeaning did not converge in {0} iterations")]
    DemeaningNotConverged(usize),
    #[error("no slope coefficients to test")]
    NoSlopes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Effects {
    None,
    Time,
    Entity,
    TwoWay,
}

impl Effects {
    pub fn describe(self) -> &'static str {
        match self {
            Effects::None => "pooled OLS",
            Effects::Time => "time fixed effects",
            Effects::Entity => "entity fixed effects",
            Effects::TwoWay => "two-way fixed effects",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation {
    pub entity_id: String,
    pub time_id: String,
    pub response: f64,
    pub covariates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub effects: Effects,
    pub regressors: Vec<String>,
    /// Pairs whose elementwise product enters as an extra column.
    pub interactions: Vec<(String, String)>,
}

impl RegressionSpec {
    pub fn new(effects: Effects, regressors: &[&str], interactions: &[(&str, &str)]) -> Self {
        Self {
            effects,
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            interactions: interactions
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }
}

pub fn interaction_name(a: &str, b: &str) -> String {
    format!("{a} x {b}")
}

/// Design matrix and response, rows in observation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Builds the regressor columns: an intercept first when no effects are
/// absorbed, then the listed regressors, then interactions.
pub fn expand_design(observations: &[PanelObservation], spec: &RegressionSpec) -> Result<Design, PanelError> {
    let mut columns = Vec::new();
    if spec.effects == Effects::None {
        columns.push(INTERCEPT.to_string());
    }
    columns.extend(spec.regressors.iter().cloned());
    columns.extend(spec.interactions.iter().map(|(a, b)| interaction_name(a, b)));
    let mut seen = HashSet::new();
    for c in &columns {
        if !seen.insert(c.as_str()) {
            return Err(PanelError::DuplicateColumn(c.clone()));
        }
    }

    let n = observations.len();
    let k = columns.len();
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (row, obs) in observations.iter().enumerate() {
        let lookup = |name: &str| -> Result<f64, PanelError> {
            let v = *obs.covariates.get(name).ok_or_else(|| PanelError::UnknownRegressor {
                name: name.to_string(),
                entity_id: obs.entity_id.clone(),
                time_id: obs.time_id.clone(),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(PanelError::NonFinite {
                    column: name.to_string(),
                    entity_id: obs.entity_id.clone(),
                    time_id: obs.time_id.clone(),
                })
            }
        };
        if !obs.response.is_finite() {
            return Err(PanelError::NonFinite {
                column: "response".into(),
                entity_id: obs.entity_id.clone(),
                time_id: obs.time_id.clone(),
            });
        }
        y[row] = obs.response;
        let mut col = 0;
        if spec.effects == Effects::None {
            x[(row, 0)] = 1.0;
            col = 1;
        }
        for name in &spec.regressors {
            x[(row, col)] = lookup(name)?;
            col += 1;
        }
        for (a, b) in &spec.interactions {
            x[(row, col)] = lookup(a)? * lookup(b)?;
            col += 1;
        }
    }
    Ok(Design { columns, x, y })
}

/// Group structure of a panel, used to absorb fixed effects.
#[derive(Debug, Clone)]
pub struct Absorber {
    effects: Effects,
    entity: Vec<usize>,
    time: Vec<usize>,
    entity_counts: Vec<f64>,
    time_counts: Vec<f64>,
    components: usize,
}

impl Absorber {
    /// `entity[i]` and `time[i]` are dense group indices of row `i`.
    pub fn new(effects: Effects, entity: Vec<usize>, time: Vec<usize>) -> Self {
        assert_eq!(entity.len(), time.len());
        let counts = |idx: &[usize]| {
            let mut c = vec![0.0; idx.iter().max().map_or(0, |m| m + 1)];
            for &g in idx {
                c[g] += 1.0;
            }
            c
        };
        let entity_counts = counts(&entity);
        let time_counts = counts(&time);
        let components = connected_components(&entity, &time, entity_counts.len(), time_counts.len());
        Self {
            effects,
            entity,
            time,
            entity_counts,
            time_counts,
            components,
        }
    }

    /// Parameters absorbed by the transformation (the intercept included).
    pub fn absorbed_parameters(&self) -> usize {
        match self.effects {
            Effects::None => 0,
            Effects::Time => self.time_counts.len(),
            Effects::Entity => self.entity_counts.len(),
            Effects::TwoWay => self.entity_counts.len() + self.time_counts.len() - self.components,
        }
    }

    /// Demeans `column` in place; returns the number of sweeps used.
    pub fn demean(&self, column: &mut [f64]) -> Result<usize, PanelError> {
        match self.effects {
            Effects::None => Ok(0),
            Effects::Time => {
                demean_by(column, &self.time, &self.time_counts);
                Ok(1)
            }
            Effects::Entity => {
                demean_by(column, &self.entity, &self.entity_counts);
                Ok(1)
            }
            Effects::TwoWay => {
                let scale = column.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                for sweep in 1..=MAX_DEMEAN_ITERATIONS {
                    demean_by(column, &self.entity, &self.entity_counts);
                    demean_by(column, &self.time, &self.time_counts);
                    let worst = group_means(column, &self.entity, &self.entity_counts)
                        .iter()
                        .fold(0.0_f64, |m, v| m.max(v.abs()));
                    if worst <= DEMEAN_TOLERANCE * scale {
                        return Ok(sweep);
                    }
                }
                Err(PanelError::DemeaningNotConverged(MAX_DEMEAN_ITERATIONS))
            }
        }
    }

    pub fn entity_means(&self, column: &[f64]) -> Vec<f64> {
        group_means(column, &self.entity, &self.entity_counts)
    }

    pub fn time_means(&self, column: &[f64]) -> Vec<f64> {
        group_means(column, &self.time, &self.time_counts)
    }
}

fn group_means(column: &[f64], groups: &[usize], counts: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; counts.len()];
    for (v, &g) in column.iter().zip(groups) {
        sums[g] += v;
    }
    sums.iter().zip(counts).map(|(s, c)| s / c).collect()
}

fn demean_by(column: &mut [f64], groups: &[usize], counts: &[f64]) {
    let means = group_means(column, groups, counts);
    for (v, &g) in column.iter_mut().zip(groups) {
        *v -= means[g];
    }
}

fn connected_components(entity: &[usize], time: &[usize], n_entities: usize, n_times: usize) -> usize {
    let mut parent: Vec<usize> = (0..n_entities + n_times).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (&e, &t) in entity.iter().zip(time) {
        let a = find(&mut parent, e);
        let b = find(&mut parent, n_entities + t);
        if a != b {
            parent[a] = b;
        }
    }
    (0..parent.len()).filter(|&i| find(&mut parent, i) == i).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermEstimate {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FStatistic {
    /// `+inf` when the fit is exact.
    pub value: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub effects: Effects,
    pub terms: Vec<TermEstimate>,
    /// Within R² for fixed-effects models, ordinary R² for pooled OLS.
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: Option<FStatistic>,
    pub n_obs: usize,
    pub n_absorbed: usize,
    pub df_resid: usize,
    pub rss: f64,
    pub tss: f64,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&TermEstimate> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.term(name).map(|t| t.estimate)
    }

    /// Terms other than the intercept.
    pub fn slopes(&self) -> impl Iterator<Item = &TermEstimate> {
        self.terms.iter().filter(|t| t.name != INTERCEPT)
    }

    /// Machine-readable coefficient table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,estimate,std_error,p_value,stars\n");
        for t in &self.terms {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&t.name),
                format_float(t.estimate),
                format_float(t.std_error),
                format_float(t.p_value),
                t.stars
            );
        }
        out
    }

    /// Plain-text table: one row per coefficient with its standard error
    /// beneath, then the usual fit statistics.
    pub fn to_table(&self, dependent: &str, column_label: &str, notes: &[String]) -> String {
        let label_width = self
            .terms
            .iter()
            .map(|t| t.name.chars().count())
            .chain(["Observations".len(), "Adjusted R²".chars().count()])
            .max()
            .unwrap_or(12)
            + 2;
        let rule = "=".repeat(label_width + 36);
        let thin = "-".repeat(label_width + 36);
        let mut out = String::new();
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(out, "{:label_width$}Dependent variable: {dependent}", "");
        let _ = writeln!(out, "{:label_width$}{column_label}", "");
        let _ = writeln!(out, "{thin}");
        for t in &self.terms {
            let _ = writeln!(out, "{:<label_width$}{}{}", t.name, fmt_num(t.estimate), t.stars);
            let _ = writeln!(out, "{:label_width$}({})", "", fmt_num(t.std_error));
        }
        let _ = writeln!(out, "{thin}");
        let _ = writeln!(out, "{:<label_width$}{}", "Observations", self.n_obs);
        let _ = writeln!(out, "{:<w$}{}", "R²", fmt_num(self.r_squared), w = label_width);
        let _ = writeln!(
            out,
            "{:<w$}{}",
            "Adjusted R²",
            fmt_num(self.adj_r_squared),
            w = label_width
        );
        match &self.f_stat {
            Some(f) => {
                let _ = writeln!(
                    out,
                    "{:<label_width$}{}{} (df = {}; {})",
                    "F Statistic",
                    fmt_num(f.value),
                    stars(f.p_value),
                    f.df_num,
                    f.df_den
                );
            }
            None => {
                let _ = writeln!(out, "{:<label_width$}-", "F Statistic");
            }
        }
        let _ = writeln!(out, "{rule}");
        let _ = writeln!(out, "Note: *p<0.1; **p<0.05; ***p<0.01");
        for n in notes {
            let _ = writeln!(out, "{n}");
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if a == 0.0 || (1e-3..1e5).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.3e}")
    }
}

/// Significance marker: `***` for p < 0.01, `**` for p < 0.05, `*` for p < 0.1.
pub fn stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Joint test that all `n_slopes` slope coefficients vanish.
pub fn f_statistic(explained_ss: f64, rss: f64, n_slopes: usize, df_den: usize) -> Result<FStatistic, PanelError> {
    if n_slopes == 0 {
        return Err(PanelError::NoSlopes);
    }
    if df_den == 0 {
        return Err(PanelError::TooFewObservations {
            n_obs: n_slopes,
            parameters: n_slopes,
        });
    }
    let explained = explained_ss.max(0.0);
    if rss <= 0.0 {
        return Ok(FStatistic {
            value: f64::INFINITY,
            df_num: n_slopes,
            df_den,
            p_value: 0.0,
        });
    }
    let value = (explained / n_slopes as f64) / (rss / df_den as f64);
    let dist = FisherSnedecor::new(n_slopes as f64, df_den as f64).expect("positive degrees of freedom");
    Ok(FStatistic {
        value,
        df_num: n_slopes,
        df_den,
        p_value: dist.sf(value),
    })
}

pub fn fit_panel(observations: &[PanelObservation], spec: &RegressionSpec) -> Result<RegressionResult, PanelError> {
    // Canonical row order makes every output independent of input order.
    let mut sorted: Vec<&PanelObservation> = observations.iter().collect();
    sorted.sort_by(|a, b| (&a.entity_id, &a.time_id).cmp(&(&b.entity_id, &b.time_id)));
    for pair in sorted.windows(2) {
        if pair[0].entity_id == pair[1].entity_id && pair[0].time_id == pair[1].time_id {
            return Err(PanelError::DuplicateObservation {
                entity_id: pair[0].entity_id.clone(),
                time_id: pair[0].time_id.clone(),
            });
        }
    }
    let sorted: Vec<PanelObservation> = sorted.into_iter().cloned().collect();
    let design = expand_design(&sorted, spec)?;
    let n = sorted.len();
    let k = design.columns.len();

    let absorber = Absorber::new(
        spec.effects,
        dense_index(sorted.iter().map(|o| o.entity_id.as_str())),
        dense_index(sorted.iter().map(|o| o.time_id.as_str())),
    );
    let absorbed = absorber.absorbed_parameters();
    let parameters = absorbed + k;
    if n <= parameters {
        return Err(PanelError::TooFewObservations { n_obs: n, parameters });
    }
    let df_resid = n - parameters;

    let mut x = design.x;
    let mut y = design.y;
    absorber.demean(y.as_mut_slice())?;
    for (j, name) in design.columns.iter().enumerate() {
        let mut col: Vec<f64> = x.column(j).iter().cloned().collect();
        let scale = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        absorber.demean(&mut col)?;
        if spec.effects != Effects::None {
            let left = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if left <= WITHIN_VARIATION_TOLERANCE * scale || scale == 0.0 {
                return Err(PanelError::NoWithinVariation(name.clone()));
            }
        }
        x.set_column(j, &DVector::from_vec(col));
    }

    let fit = linalg::least_squares(&x, &y).map_err(|_| PanelError::RankDeficient)?;
    let tss = if spec.effects == Effects::None {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum()
    } else {
        y.norm_squared()
    };
    // Round-off left over from an exact fit.
    let rss = if fit.rss <= EXACT_FIT_TOLERANCE * tss { 0.0 } else { fit.rss };
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let n_slopes = design.columns.iter().filter(|c| *c != INTERCEPT).count();
    let intercept_params = usize::from(spec.effects == Effects::None);
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_resid as f64;
    let adj_r_squared = adj_r_squared.min(r_squared);
    let f_stat = if n_slopes > 0 {
        Some(f_statistic(tss - rss, rss, n_slopes, df_resid)?)
    } else {
        None
    };
    debug_assert_eq!(parameters, absorbed + intercept_params + n_slopes);

    let s2 = rss / df_resid as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df_resid as f64).expect("positive degrees of freedom");
    let terms = design
        .columns
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = fit.coefficients[j];
            let std_error = (s2 * fit.xtx_inverse[(j, j)]).max(0.0).sqrt();
            let t_stat = if std_error > 0.0 {
                estimate / std_error
            } else if estimate == 0.0 {
                0.0
            } else {
                estimate.signum() * f64::INFINITY
            };
            let p_value = if t_stat.is_infinite() {
                0.0
            } else {
                (2.0 * t_dist.sf(t_stat.abs())).min(1.0)
            };
            TermEstimate {
                name: name.clone(),
                estimate,
                std_error,
                t_stat,
                p_value,
                stars: stars(p_value),
            }
        })
        .collect();

    Ok(RegressionResult {
        effects: spec.effects,
        terms,
        r_squared,
        adj_r_squared,
        f_stat,
        n_obs: n,
        n_absorbed: absorbed,
        df_resid,
        rss,
        tss,
    })
}

/// Maps ids to `0..n` in sorted id order.
fn dense_index<'a>(ids: impl Iterator<Item = &'a str> + Clone) -> Vec<usize> {
    let mut unique: Vec<&str> = ids.clone().collect();
    unique.sort_unstable();
    unique.dedup();
    ids.map(|id| unique.binary_search(&id).expect("present")).collect()
}
