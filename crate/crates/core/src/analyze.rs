//! Quantities derived from fitted models.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::models::Model;

pub const MONTHS_PER_YEAR: f64 = 12.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeMethod {
    /// The family's closed form, falling back to central differences.
    #[default]
    Analytic,
    Central,
}

fn central_difference(spec: &dyn Model, params: &[f64], x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (spec.eval(params, x + h) - spec.eval(params, x - h)) / (2.0 * h)
}

/// `dy/dx` of the model at `x`.
pub fn derivative(spec: &dyn Model, params: &[f64], x: f64, method: DerivativeMethod) -> Result<f64> {
    if !spec.eval(params, x).is_finite() {
        return Err(Error::NonFinite(x));
    }
    let v = match method {
        DerivativeMethod::Analytic => spec
            .dydx(params, x)
            .unwrap_or_else(|| central_difference(spec, params, x)),
        DerivativeMethod::Central => central_difference(spec, params, x),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(x))
    }
}

/// Loss per month at `age` (years): `−(dN/dage)/12`. Growth shows up negative.
pub fn monthly_loss(spec: &dyn Model, params: &[f64], age: f64) -> Result<f64> {
    Ok(-derivative(spec, params, age, DerivativeMethod::Analytic)? / MONTHS_PER_YEAR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub age: f64,
    pub value: f64,
    /// Objective was constant on the grid; `age` is the range midpoint.
    pub plateau: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximum of `objective` over `range`: grid scan with `grid` cells, then
/// golden-section refinement inside the neighbouring cells of the best node,
/// to a resolution of `width/grid/100`.
pub fn peak_age(objective: impl Fn(f64) -> f64, range: (f64, f64), grid: usize) -> Result<Peak> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("empty range [{lo}, {hi}]")));
    }
    if grid < 16 {
        return Err(Error::invalid("peak search grid must have at least 16 cells"));
    }
    let step = (hi - lo) / grid as f64;
    let node = |i: usize| if i == grid { hi } else { lo + step * i as f64 };
    let values: Vec<f64> = (0..=grid).map(|i| objective(node(i))).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(node(i)));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(Peak {
            age: 0.5 * (lo + hi),
            value: values[0],
            plateau: true,
        });
    }
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    let a = node(best.saturating_sub(1));
    let b = node((best + 1).min(grid));
    let f = |x: f64| objective(x);
    let (x, fx) = golden_max(&f, a, b, step / 100.0);
    let (age, value) = if fx.is_finite() && fx > values[best] {
        (x, fx)
    } else {
        (node(best), values[best])
    };
    Ok(Peak {
        age,
        value,
        plateau: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Model maximum over the given age interval.
    Peak { domain: (f64, f64) },
    /// Model value at a fixed age.
    Age(f64),
}

/// `100 · N(age) / N(reference)`.
pub fn percent_remaining(spec: &dyn Model, params: &[f64], age: f64, reference: Reference) -> Result<f64> {
    let eval = |x: f64| {
        let v = spec.eval(params, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(x))
        }
    };
    let base = match reference {
        Reference::Age(a) => eval(a)?,
        Reference::Peak { domain } => {
            let grid = ((domain.1 - domain.0) * MONTHS_PER_YEAR).ceil().max(512.0) as usize;
            peak_age(|x| spec.eval(params, x), domain, grid)?.value
        }
    };
    if !(base > 0.0) {
        return Err(Error::invalid(format!("reference value {base} is not positive")));
    }
    Ok(100.0 * eval(age)? / base)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Value,
    Derivative,
    NegatedDerivative,
}

impl std::str::FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value" => Ok(Transform::Value),
            "derivative" => Ok(Transform::Derivative),
            "negated_derivative" => Ok(Transform::NegatedDerivative),
            other => Err(Error::invalid(format!("unknown transform `{other}`"))),
        }
    }
}

fn transformed(spec: &dyn Model, params: &[f64], x: f64, t: Transform) -> Result<f64> {
    match t {
        Transform::Value => {
            let v = spec.eval(params, x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite(x))
            }
        }
        Transform::Derivative => derivative(spec, params, x, DerivativeMethod::Analytic),
        Transform::NegatedDerivative => Ok(-derivative(spec, params, x, DerivativeMethod::Analytic)?),
    }
}

/// Pearson correlation of two equally long series.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid("pearson needs two equal series of length >= 2"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub model_a: String,
    pub model_b: String,
    pub r: f64,
    pub age_range: (f64, f64),
    pub grid_size: usize,
    pub transform_a: Transform,
    pub transform_b: Transform,
}

/// Grid size for monthly sampling of `range` (at least 3 points).
pub fn monthly_grid(range: (f64, f64)) -> usize {
    (((range.1 - range.0) * MONTHS_PER_YEAR).round() as usize + 1).max(3)
}

/// Pearson r of two transformed model curves sampled on the same uniform grid.
pub fn cross_correlation(
    a: (&dyn Model, &[f64]),
    b: (&dyn Model, &[f64]),
    transform_a: Transform,
    transform_b: Transform,
    range: (f64, f64),
    grid: usize,
) -> Result<CorrelationReport> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("empty range [{lo}, {hi}]")));
    }
    if grid < 3 {
        return Err(Error::invalid("correlation grid needs at least 3 points"));
    }
    let xs: Vec<f64> = (0..grid)
        .map(|i| {
            if i + 1 == grid {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (grid - 1) as f64
            }
        })
        .collect();
    let sa = xs
        .iter()
        .map(|&x| transformed(a.0, a.1, x, transform_a))
        .collect::<Result<Vec<_>>>()?;
    let sb = xs
        .iter()
        .map(|&x| transformed(b.0, b.1, x, transform_b))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport {
        model_a: a.0.name().to_string(),
        model_b: b.0.name().to_string(),
        r: pearson(&sa, &sb)?,
        age_range: range,
        grid_size: grid,
        transform_a,
        transform_b,
    })
}

/// Constant-width band `ŷ ± z·s` assuming homoscedastic normal residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBand {
    pub level: f64,
    pub z: f64,
    pub residual_sd: f64,
    pub half_width: f64,
    pub x: Vec<f64>,
    pub lower: Vec<f64>,
    pub fit: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalBand {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,lower,fit,upper\n");
        for i in 0..self.x.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.x[i], self.lower[i], self.fit[i], self.upper[i]
            ));
        }
        s
    }

    pub fn contains(&self, spec: &dyn Model, params: &[f64], x: f64, y: f64) -> bool {
        let f = spec.eval(params, x);
        (y - f).abs() <= self.half_width
    }
}

/// Two-sided standard normal quantile for a central `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level {level} outside (0, 1)")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 * (1.0 + level)))
}

/// Prediction band sampled on `grid` points across the data's x range.
pub fn prediction_band(
    spec: &dyn Model,
    fit: &FitResult,
    d: &Dataset,
    level: f64,
    grid: usize,
) -> Result<IntervalBand> {
    let dof = d.len() as i64 - spec.n_params() as i64;
    if dof <= 0 {
        return Err(Error::invalid(format!("non-positive degrees of freedom ({dof})")));
    }
    if grid < 2 {
        return Err(Error::invalid("band grid needs at least 2 points"));
    }
    let z = normal_quantile(level)?;
    let residual_sd = (fit.rss / dof as f64).sqrt();
    let half_width = z * residual_sd;
    let xs = d.xs();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x: Vec<f64> = (0..grid)
        .map(|i| {
            if i + 1 == grid {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (grid - 1) as f64
            }
        })
        .collect();
    let fitted: Vec<f64> = x.iter().map(|&v| spec.eval(&fit.params, v)).collect();
    Ok(IntervalBand {
        level,
        z,
        residual_sd,
        half_width,
        lower: fitted.iter().map(|f| f - half_width).collect(),
        upper: fitted.iter().map(|f| f + half_width).collect(),
        fit: fitted,
        x,
    })
}
