use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 512;

/// Grid-scan constraints a fitted curve must satisfy to be accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityConfig {
    pub domain: (f64, f64),
    pub require_nonnegative: bool,
    pub require_finite: bool,
    /// Upper limit on sign changes of the slope across the domain.
    pub max_sign_changes_of_derivative: Option<usize>,
    pub grid: usize,
}

impl PlausibilityConfig {
    pub fn new(domain: (f64, f64)) -> Self {
        PlausibilityConfig {
            domain,
            require_nonnegative: false,
            require_finite: true,
            max_sign_changes_of_derivative: None,
            grid: DEFAULT_GRID,
        }
    }

    pub fn nonnegative(mut self, on: bool) -> Self {
        self.require_nonnegative = on;
        self
    }

    pub fn max_sign_changes(mut self, k: Option<usize>) -> Self {
        self.max_sign_changes_of_derivative = k;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plausibility {
    pub plausible: bool,
    pub reason: String,
}

impl Plausibility {
    fn pass() -> Self {
        Plausibility {
            plausible: true,
            reason: "ok".into(),
        }
    }

    fn fail(reason: String) -> Self {
        Plausibility {
            plausible: false,
            reason,
        }
    }
}

/// Evaluates the model on `cfg.grid` evenly spaced points over the domain
/// (endpoints included) and checks each constraint in turn.
pub fn check_plausibility(spec: &dyn Model, params: &[f64], cfg: &PlausibilityConfig) -> Result<Plausibility> {
    let (lo, hi) = cfg.domain;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("empty plausibility domain [{lo}, {hi}]")));
    }
    if cfg.grid < 2 {
        return Err(Error::invalid("plausibility grid needs at least 2 points"));
    }
    let step = (hi - lo) / (cfg.grid - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..cfg.grid)
        .map(|i| {
            let x = if i + 1 == cfg.grid { hi } else { lo + step * i as f64 };
            (x, spec.eval(params, x))
        })
        .collect();

    if cfg.require_finite {
        if let Some((x, _)) = grid.iter().find(|(_, y)| !y.is_finite()) {
            return Ok(Plausibility::fail(format!("non-finite at x = {x:.4}")));
        }
        if let Some(x) = pole_between_nodes(spec, params, &grid) {
            return Ok(Plausibility::fail(format!("non-finite: pole near x = {x:.4}")));
        }
    }
    if cfg.require_nonnegative {
        if let Some((x, y)) = grid.iter().find(|(_, y)| *y < 0.0) {
            return Ok(Plausibility::fail(format!("negative value {y:.4e} at x = {x:.4}")));
        }
    }
    if let Some(limit) = cfg.max_sign_changes_of_derivative {
        let changes = slope_sign_changes(&grid);
        if changes > limit {
            return Ok(Plausibility::fail(format!(
                "{changes} slope sign changes (limit {limit})"
            )));
        }
    }
    Ok(Plausibility::pass())
}

/// Looks for a pole hiding between two grid nodes: a sign flip across
/// which bisection drives |y| up instead of down.
fn pole_between_nodes(spec: &dyn Model, params: &[f64], grid: &[(f64, f64)]) -> Option<f64> {
    for w in grid.windows(2) {
        let ((mut a, mut ya), (mut b, yb)) = (w[0], w[1]);
        if !(ya * yb < 0.0) {
            continue;
        }
        let start = ya.abs().max(yb.abs());
        let mut yb = yb;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let ym = spec.eval(params, m);
            if !ym.is_finite() {
                return Some(m);
            }
            if ym == 0.0 {
                break;
            }
            if ya * ym < 0.0 {
                b = m;
                yb = ym;
            } else {
                a = m;
                ya = ym;
            }
        }
        if ya.abs().min(yb.abs()) > start {
            return Some(0.5 * (a + b));
        }
    }
    None
}

/// Sign changes of successive differences over finite stretches of the grid.
/// Differences below 1e-9 of the largest magnitude count as flat.
fn slope_sign_changes(grid: &[(f64, f64)]) -> usize {
    let scale = grid
        .iter()
        .map(|(_, y)| y.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let mut changes = 0;
    let mut last_sign = 0.0;
    for w in grid.windows(2) {
        let dy = w[1].1 - w[0].1;
        if !dy.is_finite() {
            last_sign = 0.0;
            continue;
        }
        if dy.abs() <= tol {
            continue;
        }
        let s = dy.signum();
        if last_sign != 0.0 && s != last_sign {
            changes += 1;
        }
        last_sign = s;
    }
    changes
}
