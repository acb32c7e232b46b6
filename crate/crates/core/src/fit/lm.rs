//! Projected Levenberg–Marquardt with Marquardt diagonal scaling.
//!
//! Each iteration factors the weighted Jacobian once, `√W·J = Q·R`, and
//! solves the damped subproblem
//!
//! ```text
//! min ‖R·δ − Qᵀb‖² + λ‖D^{1/2}·δ‖²,   D = diag(JᵀWJ)
//! ```
//!
//! as a small stacked least-squares system. A step is accepted only if the
//! projected candidate has a finite and strictly lower RSS; otherwise λ
//! grows by the damping factor. Accepted steps shrink λ by the same factor.
//! When the relative RSS drop falls below tolerance, up to three undamped
//! Gauss–Newton steps polish directions that heavy damping left unconverged.

use nalgebra::{DMatrix, DVector};

use super::{sums_of_squares, FitOptions, FitResult, Termination};
use crate::dataset::Dataset;
use crate::models::{self, Model};

const MIN_DAMPING: f64 = 1e-15;
const POLISH_STEPS: usize = 3;
const ROUNDOFF_SLACK: f64 = 1e-12;

struct Problem<'a> {
    spec: &'a dyn Model,
    xs: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
}

impl Problem<'_> {
    /// Residuals `y − f` and weighted RSS; RSS is +∞ if any prediction is non-finite.
    fn residuals(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let mut r = Vec::with_capacity(self.xs.len());
        let mut rss = 0.0;
        for ((&x, &y), &w) in self.xs.iter().zip(&self.ys).zip(&self.ws) {
            let f = self.spec.eval(p, x);
            if !f.is_finite() {
                return (r, f64::INFINITY);
            }
            let e = y - f;
            rss += w * e * e;
            r.push(e);
        }
        (r, rss)
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let n = p.len();
        let mut j = DMatrix::zeros(self.xs.len(), n);
        let mut g = vec![0.0; n];
        for (i, (&x, &w)) in self.xs.iter().zip(&self.ws).enumerate() {
            self.spec.grad(p, x, &mut g);
            let sw = w.sqrt();
            for (k, v) in g.iter().enumerate() {
                j[(i, k)] = if v.is_finite() { sw * v } else { 0.0 };
            }
        }
        j
    }
}

/// Solves the damped subproblem for the step δ.
fn damped_step(r: &DMatrix<f64>, qtb: &DVector<f64>, scale: &[f64], lambda: f64) -> Option<DVector<f64>> {
    let n = r.ncols();
    let mut a = DMatrix::zeros(2 * n, n);
    a.view_mut((0, 0), (n, n)).copy_from(r);
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(qtb);
    for k in 0..n {
        a[(n + k, k)] = (lambda * scale[k]).sqrt();
    }
    let qr = a.qr();
    qr.q_tr_mul(&mut rhs);
    let step = qr.r().solve_upper_triangular(&rhs.rows(0, n).into_owned())?;
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// One undamped step from `theta`, projected into bounds.
fn gauss_newton(
    prob: &Problem<'_>,
    theta: &[f64],
    resid: &[f64],
    spec: &dyn Model,
) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let n = theta.len();
    let jac = prob.jacobian(theta);
    let mut b = DVector::from_iterator(resid.len(), resid.iter().zip(&prob.ws).map(|(e, w)| w.sqrt() * e));
    let qr = jac.qr();
    qr.q_tr_mul(&mut b);
    let step = qr.r().solve_upper_triangular(&b.rows(0, n).into_owned())?;
    if !step.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
    models::project(spec, &mut cand);
    let (cr, crss) = prob.residuals(&cand);
    crss.is_finite().then_some((cand, cr, crss))
}

pub(super) fn minimize(spec: &dyn Model, d: &Dataset, start: &[f64], opts: &FitOptions) -> FitResult {
    let prob = Problem {
        spec,
        xs: d.xs(),
        ys: d.ys(),
        ws: d.weights(),
    };
    let n = spec.n_params();
    let mut theta = start.to_vec();
    models::project(spec, &mut theta);
    let (mut resid, mut rss) = prob.residuals(&theta);
    let mut history = vec![rss];

    let finish = |theta: Vec<f64>, resid: Vec<f64>, rss: f64, iterations, termination: Termination, history| {
        let r2 = if rss.is_finite() {
            let preds: Vec<f64> = prob.ys.iter().zip(&resid).map(|(y, e)| y - e).collect();
            let (_, tss) = sums_of_squares(&prob.ys, &prob.ws, &preds);
            (tss > 0.0).then(|| 1.0 - rss / tss)
        } else {
            None
        };
        FitResult {
            spec_name: spec.name().to_string(),
            params: theta,
            rss,
            r2,
            converged: termination.converged(),
            termination,
            iterations,
            residuals: resid,
            rss_history: history,
        }
    };

    if !rss.is_finite() {
        return finish(theta, resid, rss, 0, Termination::NonFiniteStart, history);
    }

    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    while iterations < opts.max_iterations {
        if rss == 0.0 {
            termination = Termination::ExactFit;
            break;
        }
        iterations += 1;

        let jac = prob.jacobian(&theta);
        let b = DVector::from_iterator(resid.len(), resid.iter().zip(&prob.ws).map(|(e, w)| w.sqrt() * e));
        let mut scale: Vec<f64> = (0..n).map(|k| jac.column(k).norm_squared()).collect();
        let floor = 1e-12 * scale.iter().copied().fold(0.0, f64::max);
        for s in scale.iter_mut() {
            *s = s.max(floor).max(f64::MIN_POSITIVE);
        }
        let qr = jac.qr();
        let mut qtb = b;
        qr.q_tr_mul(&mut qtb);
        let qtb = qtb.rows(0, n.min(qtb.len())).into_owned();
        let r = qr.r();

        let accepted = loop {
            if lambda > opts.max_damping {
                break None;
            }
            if let Some(step) = damped_step(&r, &qtb, &scale, lambda) {
                let mut cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
                models::project(spec, &mut cand);
                let (cr, crss) = prob.residuals(&cand);
                if crss.is_finite() && crss < rss {
                    lambda = (lambda / opts.damping_factor).max(MIN_DAMPING);
                    break Some((cand, cr, crss));
                }
            }
            lambda *= opts.damping_factor;
        };

        let Some((cand, cr, crss)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let step_norm = theta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let theta_norm = cand.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_drop = (rss - crss) / rss;
        theta = cand;
        resid = cr;
        rss = crss;
        history.push(rss);

        if rss == 0.0 {
            termination = Termination::ExactFit;
            break;
        }
        if rel_drop < opts.rss_tolerance {
            // heavy damping can leave weak directions short of the optimum
            // even though the RSS has flattened; finish with plain Gauss–Newton
            for _ in 0..POLISH_STEPS {
                let Some((cand, cr, crss)) = gauss_newton(&prob, &theta, &resid, spec) else {
                    break;
                };
                // near the optimum the RSS cannot resolve the improvement, so
                // allow roundoff-level increases
                if !(crss <= rss * (1.0 + ROUNDOFF_SLACK)) {
                    break;
                }
                let moved = theta.iter().zip(&cand).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let size = cand.iter().map(|v| v.abs()).fold(0.0, f64::max);
                let done = moved <= f64::EPSILON * size.max(1.0);
                theta = cand;
                resid = cr;
                rss = crss;
                history.push(rss);
                if done {
                    break;
                }
            }
            termination = Termination::RssTolerance;
            break;
        }
        if step_norm < opts.step_tolerance * (theta_norm + opts.step_tolerance) {
            termination = Termination::StepTolerance;
            break;
        }
    }
    finish(theta, resid, rss, iterations, termination, history)
}
