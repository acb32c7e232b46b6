//! Hold-out validation and cohort similarity checks.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{describe, Axis, Dataset, Descriptives};
use crate::error::{Error, Result};
use crate::fit::r_squared;
use crate::models::Model;
use crate::rng;

/// How two r² values are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementMetric {
    /// `min/max`, defined only when both values are positive.
    #[default]
    Ratio,
    /// `1 − |a − b|`, clamped to `[0, 1]`.
    AbsoluteDifference,
}

pub fn agreement(r2_a: f64, r2_b: f64, metric: AgreementMetric) -> Option<f64> {
    match metric {
        AgreementMetric::Ratio => (r2_a > 0.0 && r2_b > 0.0).then(|| r2_a.min(r2_b) / r2_a.max(r2_b)),
        AgreementMetric::AbsoluteDifference => {
            let d = (r2_a - r2_b).abs();
            d.is_finite().then(|| (1.0 - d).clamp(0.0, 1.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub spec_name: String,
    pub params: Vec<f64>,
    pub r2_train: f64,
    pub r2_test: f64,
    pub metric: AgreementMetric,
    /// `None` when the metric is undefined (e.g. a non-positive r² under `Ratio`).
    pub agreement: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

impl ValidationReport {
    pub fn agreement_defined(&self) -> bool {
        self.agreement.is_some()
    }
}

/// Scores fixed (training) parameters on both sets. Nothing is refitted.
pub fn holdout_validate(
    spec: &dyn Model,
    params: &[f64],
    train: &Dataset,
    test: &Dataset,
    metric: AgreementMetric,
) -> Result<ValidationReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let r2_train = r_squared(spec, params, train)?;
    let r2_test = r_squared(spec, params, test)?;
    Ok(ValidationReport {
        spec_name: spec.name().to_string(),
        params: params.to_vec(),
        r2_train,
        r2_test,
        metric,
        agreement: agreement(r2_train, r2_test, metric),
        n_train: train.len(),
        n_test: test.len(),
    })
}

/// Random train/test partition. With `stratify_bins > 1` the points are
/// grouped into equal-width x bins and each bin contributes its share; the
/// per-bin quotas are apportioned by largest remainder so the total train
/// size is `round(fraction · n)`.
pub fn split(d: &Dataset, fraction: f64, seed: u64, stratify_bins: usize) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} outside (0, 1)")));
    }
    let n = d.len();
    if n < 4 {
        return Err(Error::invalid("split needs at least 4 points"));
    }
    let target = ((fraction * n as f64).round() as usize).clamp(1, n - 1);

    let bins: Vec<Vec<usize>> = if stratify_bins > 1 {
        let xs = d.xs();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / stratify_bins as f64;
        let mut bins = vec![Vec::new(); stratify_bins];
        for (i, &x) in xs.iter().enumerate() {
            let b = if width > 0.0 {
                (((x - lo) / width) as usize).min(stratify_bins - 1)
            } else {
                0
            };
            bins[b].push(i);
        }
        bins
    } else {
        vec![(0..n).collect()]
    };

    let exact: Vec<f64> = bins.iter().map(|b| b.len() as f64 * target as f64 / n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = target - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..bins.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &b in &order {
        if remaining == 0 {
            break;
        }
        if quota[b] < bins[b].len() {
            quota[b] += 1;
            remaining -= 1;
        }
    }

    let mut train_idx = Vec::with_capacity(target);
    let mut test_idx = Vec::with_capacity(n - target);
    for (b, members) in bins.into_iter().enumerate() {
        let mut shuffled = members;
        shuffled.shuffle(&mut rng::stream(seed, b as u64));
        let (tr, te) = shuffled.split_at(quota[b]);
        train_idx.extend_from_slice(tr);
        test_idx.extend_from_slice(te);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = d.subset(format!("{}:train", d.label()), &train_idx)?;
    let test = d.subset(format!("{}:test", d.label()), &test_idx)?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatDifference {
    pub statistic: String,
    pub a: f64,
    pub b: f64,
    /// `|b − a| / |a|` (0 when both are 0).
    pub relative: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub label_a: String,
    pub label_b: String,
    pub tolerance: f64,
    pub differences: Vec<StatDifference>,
    pub pass: bool,
}

impl SimilarityReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>14} {:>14} {:>10}  ok",
            "stat", self.label_a, self.label_b, "rel.diff"
        );
        for d in &self.differences {
            let _ = writeln!(
                s,
                "{:<8} {:>14.6} {:>14.6} {:>10.4}  {}",
                d.statistic,
                d.a,
                d.b,
                d.relative,
                if d.within { "yes" } else { "no" }
            );
        }
        let _ = writeln!(s, "tolerance {}  pass: {}", self.tolerance, self.pass);
        s
    }
}

fn relative_difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else if a == 0.0 {
        f64::INFINITY
    } else {
        (b - a).abs() / a.abs()
    }
}

/// Compares count, mean, median, min, max and sd of the y values.
pub fn compare_descriptives(a: &Dataset, b: &Dataset, tolerance: f64) -> Result<SimilarityReport> {
    let da = describe(a, Axis::Y)?;
    let db = describe(b, Axis::Y)?;
    let pick = |d: &Descriptives| {
        [
            ("count", d.count as f64),
            ("mean", d.mean),
            ("median", d.median),
            ("min", d.min),
            ("max", d.max),
            ("sd", d.sd),
        ]
    };
    let differences: Vec<StatDifference> = pick(&da)
        .into_iter()
        .zip(pick(&db))
        .map(|((name, va), (_, vb))| {
            let relative = relative_difference(va, vb);
            StatDifference {
                statistic: name.to_string(),
                a: va,
                b: vb,
                relative,
                within: relative <= tolerance,
            }
        })
        .collect();
    let pass = differences.iter().all(|d| d.within);
    Ok(SimilarityReport {
        label_a: a.label().to_string(),
        label_b: b.label().to_string(),
        tolerance,
        differences,
        pass,
    })
}
