use super::{Builtin, FamilyClass, ParamSpec, Shape};

/// `(A, k)` from a log-linear fit of positive y: `ln y = ln A + b·x`.
fn log_linear(s: &Shape, offset: f64) -> Option<(f64, f64)> {
    let c = s.fit_rows(
        |x, y| {
            let v = y - offset;
            (v > 0.0).then(|| (vec![1.0, x], v.ln()))
        },
        2,
    )?;
    Some((c[0].exp(), c[1]))
}

fn decay_guess(s: &Shape) -> Vec<f64> {
    let (a, b) = log_linear(s, 0.0).unwrap_or((s.y_max, -1.0 / s.x_span()));
    vec![a, (-b).max(1e-3 / s.x_span())]
}

fn exp_decay(p: &[f64], x: f64) -> f64 {
    p[0] * (-p[1] * x).exp()
}

fn exp_decay_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let e = (-p[1] * x).exp();
    g[0] = e;
    g[1] = -p[0] * x * e;
}

fn exp_decay_dydx(p: &[f64], x: f64) -> f64 {
    -p[1] * p[0] * (-p[1] * x).exp()
}

fn exp_decay_offset(p: &[f64], x: f64) -> f64 {
    p[0] * (-p[1] * x).exp() + p[2]
}

fn exp_decay_offset_grad(p: &[f64], x: f64, g: &mut [f64]) {
    exp_decay_grad(p, x, g);
    g[2] = 1.0;
}

fn exp_decay_offset_guess(s: &Shape) -> Vec<f64> {
    let c = s.y_min - 0.05 * s.y_range().max(1e-12);
    let (a, b) = log_linear(s, c).unwrap_or((s.y_range(), -1.0 / s.x_span()));
    vec![a, (-b).max(1e-3 / s.x_span()), c]
}

fn double_exp(p: &[f64], x: f64) -> f64 {
    p[0] * (-p[1] * x).exp() + p[2] * (-p[3] * x).exp()
}

fn double_exp_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let e1 = (-p[1] * x).exp();
    let e2 = (-p[3] * x).exp();
    g[0] = e1;
    g[1] = -p[0] * x * e1;
    g[2] = e2;
    g[3] = -p[2] * x * e2;
}

fn double_exp_dydx(p: &[f64], x: f64) -> f64 {
    -p[1] * p[0] * (-p[1] * x).exp() - p[3] * p[2] * (-p[3] * x).exp()
}

fn double_exp_guess(s: &Shape) -> Vec<f64> {
    let g = decay_guess(s);
    vec![0.5 * g[0], 2.0 * g[1], 0.5 * g[0], 0.5 * g[1]]
}

fn exp_growth(p: &[f64], x: f64) -> f64 {
    p[0] * (p[1] * x).exp()
}

fn exp_growth_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let e = (p[1] * x).exp();
    g[0] = e;
    g[1] = p[0] * x * e;
}

fn exp_growth_dydx(p: &[f64], x: f64) -> f64 {
    p[1] * p[0] * (p[1] * x).exp()
}

fn exp_growth_guess(s: &Shape) -> Vec<f64> {
    let (a, b) = log_linear(s, 0.0).unwrap_or((s.y_mean, 1.0 / s.x_span()));
    vec![a, b.max(1e-3 / s.x_span())]
}

fn rise(p: &[f64], x: f64) -> f64 {
    -p[0] * (-p[1] * x).exp_m1()
}

fn rise_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let e = (-p[1] * x).exp();
    g[0] = -(-p[1] * x).exp_m1();
    g[1] = p[0] * x * e;
}

fn rise_dydx(p: &[f64], x: f64) -> f64 {
    p[0] * p[1] * (-p[1] * x).exp()
}

fn rise_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_max, 3.0 / s.x_span()]
}

pub(super) fn families() -> Vec<Builtin> {
    use ParamSpec as P;
    vec![
        Builtin {
            name: "exp_decay",
            class: FamilyClass::Exponential,
            params: vec![P::at_least("amplitude", 0.0), P::at_least("rate", 0.0)],
            eval: exp_decay,
            grad: exp_decay_grad,
            dydx: Some(exp_decay_dydx),
            guess: decay_guess,
        },
        Builtin {
            name: "exp_decay_offset",
            class: FamilyClass::Exponential,
            params: vec![P::free("amplitude"), P::at_least("rate", 0.0), P::free("offset")],
            eval: exp_decay_offset,
            grad: exp_decay_offset_grad,
            dydx: Some(exp_decay_dydx),
            guess: exp_decay_offset_guess,
        },
        Builtin {
            name: "double_exp_decay",
            class: FamilyClass::Exponential,
            params: vec![
                P::at_least("amplitude1", 0.0),
                P::at_least("rate1", 0.0),
                P::at_least("amplitude2", 0.0),
                P::at_least("rate2", 0.0),
            ],
            eval: double_exp,
            grad: double_exp_grad,
            dydx: Some(double_exp_dydx),
            guess: double_exp_guess,
        },
        Builtin {
            name: "exp_growth",
            class: FamilyClass::Exponential,
            params: vec![P::at_least("amplitude", 0.0), P::at_least("rate", 0.0)],
            eval: exp_growth,
            grad: exp_growth_grad,
            dydx: Some(exp_growth_dydx),
            guess: exp_growth_guess,
        },
        Builtin {
            name: "exp_rise_to_max",
            class: FamilyClass::Exponential,
            params: vec![P::free("plateau"), P::at_least("rate", 0.0)],
            eval: rise,
            grad: rise_grad,
            dydx: Some(rise_dydx),
            guess: rise_guess,
        },
    ]
}
