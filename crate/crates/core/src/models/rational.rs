use super::{Builtin, FamilyClass, ParamSpec, Shape};

/// True when `den` stays positive across the data's x range.
fn pole_free(s: &Shape, den: impl Fn(f64) -> f64) -> bool {
    (0..=64).all(|i| {
        let x = s.x_min + (s.x_max - s.x_min) * i as f64 / 64.0;
        den(x) > 0.0
    })
}

fn numerator_only(s: &Shape, degree: usize) -> Vec<f64> {
    s.fit_basis(|x| (0..=degree).map(|j| x.powi(j as i32)).collect())
        .unwrap_or_else(|| {
            let mut v = vec![0.0; degree + 1];
            v[0] = s.y_mean;
            v
        })
}

// rational_linear: (a + bx) / (1 + cx)

fn rl(p: &[f64], x: f64) -> f64 {
    (p[0] + p[1] * x) / (1.0 + p[2] * x)
}

fn rl_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let d = 1.0 + p[2] * x;
    g[0] = 1.0 / d;
    g[1] = x / d;
    g[2] = -(p[0] + p[1] * x) * x / (d * d);
}

fn rl_dydx(p: &[f64], x: f64) -> f64 {
    let d = 1.0 + p[2] * x;
    (p[1] - p[0] * p[2]) / (d * d)
}

fn rl_guess(s: &Shape) -> Vec<f64> {
    // y(1 + cx) = a + bx  ⇒  y = a + bx − c·xy
    if let Some(c) = s.fit_rows(|x, y| Some((vec![1.0, x, -x * y], y)), 3) {
        if pole_free(s, |x| 1.0 + c[2] * x) {
            return c;
        }
    }
    let mut v = numerator_only(s, 1);
    v.push(0.0);
    v
}

// rational_quadratic_den: (a + bx) / (1 + cx + dx²)

fn rq(p: &[f64], x: f64) -> f64 {
    (p[0] + p[1] * x) / (1.0 + p[2] * x + p[3] * x * x)
}

fn rq_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let d = 1.0 + p[2] * x + p[3] * x * x;
    let n = p[0] + p[1] * x;
    g[0] = 1.0 / d;
    g[1] = x / d;
    g[2] = -n * x / (d * d);
    g[3] = -n * x * x / (d * d);
}

fn rq_dydx(p: &[f64], x: f64) -> f64 {
    let d = 1.0 + p[2] * x + p[3] * x * x;
    let n = p[0] + p[1] * x;
    (p[1] * d - n * (p[2] + 2.0 * p[3] * x)) / (d * d)
}

fn rq_guess(s: &Shape) -> Vec<f64> {
    if let Some(c) = s.fit_rows(|x, y| Some((vec![1.0, x, -x * y, -x * x * y], y)), 4) {
        if pole_free(s, |x| 1.0 + c[2] * x + c[3] * x * x) {
            return c;
        }
    }
    let mut v = numerator_only(s, 1);
    v.extend([0.0, 0.0]);
    v
}

// rational_quadratic_linear: (a + bx + cx²) / (1 + dx)

fn rql(p: &[f64], x: f64) -> f64 {
    (p[0] + p[1] * x + p[2] * x * x) / (1.0 + p[3] * x)
}

fn rql_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let d = 1.0 + p[3] * x;
    let n = p[0] + p[1] * x + p[2] * x * x;
    g[0] = 1.0 / d;
    g[1] = x / d;
    g[2] = x * x / d;
    g[3] = -n * x / (d * d);
}

fn rql_dydx(p: &[f64], x: f64) -> f64 {
    let d = 1.0 + p[3] * x;
    let n = p[0] + p[1] * x + p[2] * x * x;
    ((p[1] + 2.0 * p[2] * x) * d - n * p[3]) / (d * d)
}

fn rql_guess(s: &Shape) -> Vec<f64> {
    if let Some(c) = s.fit_rows(|x, y| Some((vec![1.0, x, x * x, -x * y], y)), 4) {
        if pole_free(s, |x| 1.0 + c[3] * x) {
            return c;
        }
    }
    let mut v = numerator_only(s, 2);
    v.push(0.0);
    v
}

// hyperbolic_decay: a / (1 + bx)

fn hyp(p: &[f64], x: f64) -> f64 {
    p[0] / (1.0 + p[1] * x)
}

fn hyp_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let d = 1.0 + p[1] * x;
    g[0] = 1.0 / d;
    g[1] = -p[0] * x / (d * d);
}

fn hyp_dydx(p: &[f64], x: f64) -> f64 {
    let d = 1.0 + p[1] * x;
    -p[0] * p[1] / (d * d)
}

fn hyp_guess(s: &Shape) -> Vec<f64> {
    // y = a − b·xy
    if let Some(c) = s.fit_rows(|x, y| Some((vec![1.0, -x * y], y)), 2) {
        if pole_free(s, |x| 1.0 + c[1] * x) {
            return c;
        }
    }
    vec![s.y_mean, 0.0]
}

// reciprocal: a + b/x

fn recip(p: &[f64], x: f64) -> f64 {
    p[0] + p[1] / x
}

fn recip_grad(_p: &[f64], x: f64, g: &mut [f64]) {
    g[0] = 1.0;
    g[1] = 1.0 / x;
}

fn recip_dydx(p: &[f64], x: f64) -> f64 {
    -p[1] / (x * x)
}

fn recip_guess(s: &Shape) -> Vec<f64> {
    s.fit_rows(|x, y| (x != 0.0).then(|| (vec![1.0, 1.0 / x], y)), 2)
        .unwrap_or_else(|| vec![s.y_mean, 0.0])
}

pub(super) fn families() -> Vec<Builtin> {
    use ParamSpec as P;
    let free = |names: &[&str]| names.iter().map(|n| P::free(n)).collect::<Vec<_>>();
    vec![
        Builtin {
            name: "rational_linear",
            class: FamilyClass::Rational,
            params: free(&["a", "b", "c"]),
            eval: rl,
            grad: rl_grad,
            dydx: Some(rl_dydx),
            guess: rl_guess,
        },
        Builtin {
            name: "rational_quadratic_den",
            class: FamilyClass::Rational,
            params: free(&["a", "b", "c", "d"]),
            eval: rq,
            grad: rq_grad,
            dydx: Some(rq_dydx),
            guess: rq_guess,
        },
        Builtin {
            name: "rational_quadratic_linear",
            class: FamilyClass::Rational,
            params: free(&["a", "b", "c", "d"]),
            eval: rql,
            grad: rql_grad,
            dydx: Some(rql_dydx),
            guess: rql_guess,
        },
        Builtin {
            name: "hyperbolic_decay",
            class: FamilyClass::Rational,
            params: free(&["a", "b"]),
            eval: hyp,
            grad: hyp_grad,
            dydx: Some(hyp_dydx),
            guess: hyp_guess,
        },
        Builtin {
            name: "reciprocal",
            class: FamilyClass::Rational,
            params: free(&["a", "b"]),
            eval: recip,
            grad: recip_grad,
            dydx: Some(recip_dydx),
            guess: recip_guess,
        },
    ]
}
