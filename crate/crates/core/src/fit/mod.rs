//! Nonlinear least squares, goodness of fit and catalog ranking.

mod lm;
mod rank;

use std::collections::BTreeSet;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{self, Model};
use crate::rng;

pub use rank::{rank_all, RankEntry, RankOptions, RankedFits};

/// Levenberg–Marquardt settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the RSS by less than this fraction.
    pub rss_tolerance: f64,
    /// Stop when the accepted step is shorter than this (relative to |θ|).
    pub step_tolerance: f64,
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Give up raising the damping past this value.
    pub max_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            rss_tolerance: 1e-10,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            max_damping: 1e16,
        }
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ExactFit,
    RssTolerance,
    StepTolerance,
    /// No damped step lowers the RSS any further.
    Stalled,
    MaxIterations,
    NonFiniteStart,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations | Termination::NonFiniteStart)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec_name: String,
    pub params: Vec<f64>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    /// `1 − rss/tss`; `None` when the data have no variance.
    pub r2: Option<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// `y − ŷ` per point, in dataset order.
    pub residuals: Vec<f64>,
    /// RSS after the start and after every accepted step. Non-increasing
    /// except for roundoff-level (1e-12 relative) moves in the final polish.
    #[serde(skip)]
    pub rss_history: Vec<f64>,
}

/// Weighted sums `(rss, tss)` of predictions against data.
pub(crate) fn sums_of_squares(ys: &[f64], ws: &[f64], preds: &[f64]) -> (f64, f64) {
    let wsum: f64 = ws.iter().sum();
    let mean = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let mut rss = 0.0;
    let mut tss = 0.0;
    for ((y, w), p) in ys.iter().zip(ws).zip(preds) {
        rss += w * (y - p) * (y - p);
        tss += w * (y - mean) * (y - mean);
    }
    (rss, tss)
}

/// Coefficient of determination `1 − RSS/TSS` (weighted by point weights).
/// Negative for a model worse than the mean.
pub fn r_squared(spec: &dyn Model, params: &[f64], d: &Dataset) -> Result<f64> {
    if d.len() < 2 {
        return Err(Error::invalid("r² needs at least two points"));
    }
    let preds = d
        .points()
        .iter()
        .map(|p| models::evaluate(spec, params, p.x))
        .collect::<Result<Vec<_>>>()?;
    let (rss, tss) = sums_of_squares(&d.ys(), &d.weights(), &preds);
    if tss == 0.0 {
        return Err(Error::ZeroTotalVariance);
    }
    Ok(1.0 - rss / tss)
}

fn check_identifiable(spec: &dyn Model, d: &Dataset) -> Result<()> {
    let n = spec.n_params();
    if d.len() < n {
        return Err(Error::Underdetermined {
            points: d.len(),
            params: n,
        });
    }
    let distinct: BTreeSet<u64> = d.points().iter().map(|p| p.x.to_bits()).collect();
    if distinct.len() < n {
        return Err(Error::Singular(format!(
            "{} distinct x values cannot identify {} parameters of {}",
            distinct.len(),
            n,
            spec.name()
        )));
    }
    Ok(())
}

/// Bounded Levenberg–Marquardt minimization of `Σ wᵢ (yᵢ − f(θ, xᵢ))²`
/// starting from `start` (projected into bounds first).
pub fn fit_least_squares(spec: &dyn Model, d: &Dataset, start: &[f64], opts: &FitOptions) -> Result<FitResult> {
    if start.len() != spec.n_params() {
        return Err(Error::invalid(format!(
            "{} takes {} parameters, start has {}",
            spec.name(),
            spec.n_params(),
            start.len()
        )));
    }
    check_identifiable(spec, d)?;
    Ok(lm::minimize(spec, d, start, opts))
}

/// Randomized restarts around the heuristic guess. Start 0 is the guess
/// itself; start `k` perturbs each parameter by `N(0, (max(|θⱼ|, 1)/2)²)`
/// using stream `k` of `seed`.
pub fn multi_start(spec: &dyn Model, d: &Dataset, n_starts: usize, seed: u64, opts: &FitOptions) -> Result<FitResult> {
    if n_starts == 0 {
        return Err(Error::invalid("n_starts must be at least 1"));
    }
    let guess = models::initial_guess(spec, d)?;
    check_identifiable(spec, d)?;
    let mut best: Option<FitResult> = None;
    for k in 0..n_starts {
        let start = if k == 0 {
            guess.clone()
        } else {
            let mut g = rng::stream(seed, k as u64);
            let mut p: Vec<f64> = guess
                .iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(&mut g);
                    v + 0.5 * v.abs().max(1.0) * z
                })
                .collect();
            models::project(spec, &mut p);
            p
        };
        let fit = lm::minimize(spec, d, &start, opts);
        if better(&fit, best.as_ref()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Converged beats unconverged; then lower RSS; ties keep the incumbent.
fn better(candidate: &FitResult, incumbent: Option<&FitResult>) -> bool {
    let Some(inc) = incumbent else {
        return true;
    };
    match (candidate.converged, inc.converged) {
        (true, false) => true,
        (false, true) => false,
        _ => candidate.rss < inc.rss || (inc.rss.is_nan() && !candidate.rss.is_nan()),
    }
}
