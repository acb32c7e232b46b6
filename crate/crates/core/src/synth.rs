//! Microdata reconstruction from published per-age summary statistics.
//!
//! A summary row gives the age, the number of subjects, the mean and either
//! the standard deviation or an upper 95% prediction limit. Rows are expanded
//! into `n` seeded draws from a normal or lognormal distribution with those
//! moments.

use std::io::Read;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// One-sided 95th percentile of the standard normal.
pub const Z_ONE_SIDED_95: f64 = 1.645;
/// Two-sided 95% multiplier.
pub const Z_TWO_SIDED_95: f64 = 1.96;

pub const SYNTHETIC_STUDY: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    LogNormal,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Family::Normal),
            "lognormal" => Ok(Family::LogNormal),
            other => Err(Error::invalid(format!("unknown family `{other}`"))),
        }
    }
}

/// Published descriptive statistics for one age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub x: f64,
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub upper_pl95: Option<f64>,
    pub family: Family,
}

impl SummaryRow {
    pub fn with_sd(x: f64, n: usize, mean: f64, sd: f64, family: Family) -> Self {
        SummaryRow {
            x,
            n,
            mean,
            sd: Some(sd),
            upper_pl95: None,
            family,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() {
            return Err(Error::invalid("row age must be finite"));
        }
        if !(self.mean.is_finite() && self.mean > 0.0) {
            return Err(Error::invalid(format!("mean {} must be positive", self.mean)));
        }
        match (self.sd, self.upper_pl95) {
            (None, None) => Err(Error::invalid("row needs sd or upper_pl95")),
            (Some(sd), _) if !(sd.is_finite() && sd > 0.0) => Err(Error::invalid(format!("sd {sd} must be positive"))),
            (_, Some(pl)) if !(pl.is_finite() && pl > self.mean) => Err(Error::invalid(format!(
                "upper_pl95 {pl} must exceed the mean {}",
                self.mean
            ))),
            _ => Ok(()),
        }
    }

    /// Standard deviation, falling back to the prediction limit.
    pub fn resolved_sd(&self, z: f64) -> Result<f64> {
        match (self.sd, self.upper_pl95) {
            (Some(sd), _) => Ok(sd),
            (None, Some(pl)) => sd_from_upper_pl(self.mean, pl, z),
            (None, None) => Err(Error::invalid("row needs sd or upper_pl95")),
        }
    }
}

/// Standard deviation implied by an upper prediction limit `mean + z·sd`.
pub fn sd_from_upper_pl(mean: f64, pl95: f64, z: f64) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid(format!("z multiplier {z} must be positive")));
    }
    if pl95 < mean {
        return Err(Error::invalid(format!(
            "prediction limit {pl95} lies below the mean {mean}"
        )));
    }
    Ok((pl95 - mean) / z)
}

/// Location and scale of the underlying normal of a lognormal variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub x_log: f64,
    pub y_log: f64,
}

impl LogNormalParams {
    /// Mean `e^{x + y²/2}` and variance `e^{2x + y²}(e^{y²} − 1)`.
    pub fn forward_moments(&self) -> (f64, f64) {
        let y2 = self.y_log * self.y_log;
        let mean = (self.x_log + 0.5 * y2).exp();
        let var = (2.0 * self.x_log + y2).exp() * y2.exp_m1();
        (mean, var)
    }
}

/// Moment matching: lognormal parameters with the given mean and sd.
pub fn solve_lognormal(mean: f64, sd: f64) -> Result<LogNormalParams> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::invalid(format!("mean {mean} must be positive")));
    }
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::invalid(format!("sd {sd} must be positive")));
    }
    let cv = sd / mean;
    let y2 = (cv * cv).ln_1p();
    Ok(LogNormalParams {
        x_log: mean.ln() - 0.5 * y2,
        y_log: y2.sqrt(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthOptions {
    /// Multiplier turning an upper prediction limit into a standard deviation.
    pub z: f64,
    /// Force each row's sample mean and sd (on the sampling scale) onto the targets.
    pub moment_correct: bool,
    pub allow_repeated_ages: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            z: Z_ONE_SIDED_95,
            moment_correct: false,
            allow_repeated_ages: false,
        }
    }
}

/// Sampling-scale targets: `(mean, sd)` of the normal that is drawn from.
fn sampling_targets(row: &SummaryRow, z: f64) -> Result<(f64, f64)> {
    row.validate()?;
    let sd = row.resolved_sd(z)?;
    match row.family {
        Family::Normal => Ok((row.mean, sd)),
        Family::LogNormal => {
            let p = solve_lognormal(row.mean, sd)?;
            Ok((p.x_log, p.y_log))
        }
    }
}

/// Draws `row.n` values for one summary row.
///
/// With `moment_correct`, the standard normal draws are shifted and rescaled
/// to sample mean 0 and sample sd 1 before being mapped onto the target, so
/// the normal-scale sample moments are exact.
pub fn reconstruct_row(row: &SummaryRow, seed: u64, opts: &SynthOptions) -> Result<Vec<f64>> {
    if row.n == 0 {
        return Err(Error::invalid("row has n = 0"));
    }
    if opts.moment_correct && row.n == 1 {
        return Err(Error::invalid("moment correction needs n >= 2"));
    }
    let (loc, scale) = sampling_targets(row, opts.z)?;
    let mut rng = rng::stream(seed, 0);
    let mut z: Vec<f64> = (0..row.n).map(|_| StandardNormal.sample(&mut rng)).collect();
    if opts.moment_correct {
        standardize(&mut z)?;
    }
    let values = z.into_iter().map(|v| loc + scale * v);
    Ok(match row.family {
        Family::Normal => values.collect(),
        Family::LogNormal => values.map(f64::exp).collect(),
    })
}

fn standardize(z: &mut [f64]) -> Result<()> {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let ss: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::invalid("degenerate draw: all values equal"));
    }
    for v in z.iter_mut() {
        *v = (*v - mean) / sd;
    }
    Ok(())
}

/// Expands every row and concatenates them into one dataset. Row `i` uses
/// seed `derive_seed(seed, i)`, so rows can be drawn in any order.
pub fn reconstruct_dataset(rows: &[SummaryRow], seed: u64, opts: &SynthOptions) -> Result<Dataset> {
    if !opts.allow_repeated_ages {
        let mut ages: Vec<f64> = rows.iter().map(|r| r.x).collect();
        ages.sort_by(f64::total_cmp);
        if let Some(w) = ages.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("age {} appears in more than one row", w[0])));
        }
    }
    let per_row: Vec<Vec<f64>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| reconstruct_row(row, rng::derive_seed(seed, i as u64), opts))
        .collect::<Result<_>>()?;
    let points = rows
        .iter()
        .zip(per_row)
        .flat_map(|(row, ys)| ys.into_iter().map(move |y| DataPoint::new(SYNTHETIC_STUDY, row.x, y)))
        .collect();
    Dataset::from_points(SYNTHETIC_STUDY, points)
}

/// `k` independent reconstructions; dataset `i` uses `derive_seed(master_seed, i)`.
pub fn replicate(rows: &[SummaryRow], master_seed: u64, k: usize, opts: &SynthOptions) -> Result<Vec<Dataset>> {
    if k == 0 {
        return Err(Error::invalid("replicate count must be at least 1"));
    }
    (0..k)
        .map(|i| {
            let d = reconstruct_dataset(rows, rng::derive_seed(master_seed, i as u64), opts)?;
            Ok(d.relabel(format!("{SYNTHETIC_STUDY}-{i}")))
        })
        .collect()
}

/// Reads `x,n,mean,sd,upper_pl95,family`; empty cells are absent optionals.
pub fn read_summary_csv<R: Read>(source: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let (c_x, c_n, c_mean, c_family) = (need("x")?, need("n")?, need("mean")?, need("family")?);
    let (c_sd, c_pl) = (col("sd"), col("upper_pl95"));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) as usize;
        let bad = |message: String| Error::BadRow { row: line, message };
        let get = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize, what: &str| {
            get(c)
                .parse::<f64>()
                .map_err(|_| bad(format!("{what} `{}` is not a number", get(c))))
        };
        let opt = |c: Option<usize>, what: &str| match c.map(get) {
            None | Some("") => Ok(None),
            Some(_) => num(c.unwrap(), what).map(Some),
        };
        let n = get(c_n)
            .parse::<usize>()
            .map_err(|_| bad(format!("n `{}` is not a count", get(c_n))))?;
        let row = SummaryRow {
            x: num(c_x, "x")?,
            n,
            mean: num(c_mean, "mean")?,
            sd: opt(c_sd, "sd")?,
            upper_pl95: opt(c_pl, "upper_pl95")?,
            family: get(c_family).parse().map_err(|e: Error| bad(e.to_string()))?,
        };
        row.validate().map_err(|e| bad(e.to_string()))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}
