//! Data summaries used by starting-guess heuristics.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;

/// Weighted linear least squares over `(basis row, y, weight)` triples.
/// Returns `None` when there are fewer rows than columns or the solve fails.
pub fn linear_least_squares<I>(rows: I, n_cols: usize) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = (Vec<f64>, f64, f64)>,
{
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut m = 0;
    for (basis, y, w) in rows {
        debug_assert_eq!(basis.len(), n_cols);
        if !(basis.iter().all(|v| v.is_finite()) && y.is_finite()) {
            continue;
        }
        let sw = w.sqrt();
        a.extend(basis.iter().map(|v| v * sw));
        b.push(y * sw);
        m += 1;
    }
    if m < n_cols || n_cols == 0 {
        return None;
    }
    let a = DMatrix::from_row_slice(m, n_cols, &a);
    let b = DVector::from_vec(b);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-13 * svd.singular_values.max()).ok()?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// Points plus the descriptive features guess heuristics rely on.
#[derive(Debug, Clone)]
pub struct Shape {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ws: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub y_mean: f64,
    /// x of the largest y.
    pub x_at_max: f64,
    /// Sign of the least-squares slope (+1, −1, or 0).
    pub trend: f64,
}

impl Shape {
    pub fn of(d: &Dataset) -> Self {
        Self::from_xy(d.xs(), d.ys(), d.weights())
    }

    pub fn from_xy(xs: Vec<f64>, ys: Vec<f64>, ws: Vec<f64>) -> Self {
        let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
        let x_min = fold(&xs, f64::min, f64::INFINITY);
        let x_max = fold(&xs, f64::max, f64::NEG_INFINITY);
        let y_min = fold(&ys, f64::min, f64::INFINITY);
        let y_max = fold(&ys, f64::max, f64::NEG_INFINITY);
        let y_mean = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
        let imax = ys
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        let x_at_max = xs.get(imax).copied().unwrap_or(0.0);
        let mut s = Shape {
            xs,
            ys,
            ws,
            x_min,
            x_max,
            y_min,
            y_max,
            y_mean,
            x_at_max,
            trend: 0.0,
        };
        s.trend = s.fit_basis(|x| vec![1.0, x]).map_or(0.0, |c| {
            if c[1] > 0.0 {
                1.0
            } else if c[1] < 0.0 {
                -1.0
            } else {
                0.0
            }
        });
        s
    }

    pub fn x_span(&self) -> f64 {
        let s = self.x_max - self.x_min;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn y_range(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Least squares `y ≈ Σ cⱼ φⱼ(x)`, skipping points where the basis is non-finite.
    pub fn fit_basis(&self, basis: impl Fn(f64) -> Vec<f64>) -> Option<Vec<f64>> {
        let n = basis(self.xs.first().copied().unwrap_or(1.0)).len();
        self.fit_rows(|x, y| Some((basis(x), y)), n)
    }

    /// Least squares on transformed rows; `None` rows are skipped.
    pub fn fit_rows(&self, row: impl Fn(f64, f64) -> Option<(Vec<f64>, f64)>, n_cols: usize) -> Option<Vec<f64>> {
        let rows = self
            .xs
            .iter()
            .zip(&self.ys)
            .zip(&self.ws)
            .filter_map(|((&x, &y), &w)| row(x, y).map(|(b, t)| (b, t, w)));
        linear_least_squares(rows, n_cols)
    }

    /// Width of the region where y exceeds `base + frac·(peak − base)`, around the maximum.
    pub fn width_above(&self, frac: f64, base: f64) -> f64 {
        let level = base + frac * (self.y_max - base);
        let above: Vec<f64> = self
            .xs
            .iter()
            .zip(&self.ys)
            .filter(|(_, &y)| y >= level)
            .map(|(&x, _)| x)
            .collect();
        let lo = above.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = above.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = hi - lo;
        if w.is_finite() && w > 0.0 {
            w
        } else {
            self.x_span() / 4.0
        }
    }

    /// x where the data first crosses the midpoint between min and max
    /// (in x order).
    pub fn x_at_half(&self) -> f64 {
        let mid = 0.5 * (self.y_min + self.y_max);
        let mut idx: Vec<usize> = (0..self.xs.len()).collect();
        idx.sort_by(|&a, &b| self.xs[a].total_cmp(&self.xs[b]));
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (self.ys[a] - mid) * (self.ys[b] - mid) <= 0.0 {
                return 0.5 * (self.xs[a] + self.xs[b]);
            }
        }
        0.5 * (self.x_min + self.x_max)
    }
}
