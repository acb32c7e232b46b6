use super::{Builtin, FamilyClass, ParamSpec, Shape};

/// `x^b · ln x`, taking the limit 0 at x = 0 for b > 0.
fn pow_log(x: f64, b: f64) -> f64 {
    if x == 0.0 && b > 0.0 {
        0.0
    } else {
        x.powf(b) * x.ln()
    }
}

// power_law: a·x^b

fn power_law(p: &[f64], x: f64) -> f64 {
    p[0] * x.powf(p[1])
}

fn power_law_grad(p: &[f64], x: f64, g: &mut [f64]) {
    g[0] = x.powf(p[1]);
    g[1] = p[0] * pow_log(x, p[1]);
}

fn power_law_dydx(p: &[f64], x: f64) -> f64 {
    p[0] * p[1] * x.powf(p[1] - 1.0)
}

fn power_law_guess(s: &Shape) -> Vec<f64> {
    s.fit_rows(|x, y| (x > 0.0 && y > 0.0).then(|| (vec![1.0, x.ln()], y.ln())), 2)
        .map(|c| vec![c[0].exp(), c[1]])
        .unwrap_or_else(|| vec![s.y_mean, 0.0])
}

// power_offset: a + b·x^c

fn power_offset(p: &[f64], x: f64) -> f64 {
    p[0] + p[1] * x.powf(p[2])
}

fn power_offset_grad(p: &[f64], x: f64, g: &mut [f64]) {
    g[0] = 1.0;
    g[1] = x.powf(p[2]);
    g[2] = p[1] * pow_log(x, p[2]);
}

fn power_offset_dydx(p: &[f64], x: f64) -> f64 {
    p[1] * p[2] * x.powf(p[2] - 1.0)
}

fn power_offset_guess(s: &Shape) -> Vec<f64> {
    let c = s
        .fit_rows(|x, y| (x >= 0.0).then(|| (vec![1.0, x.sqrt()], y)), 2)
        .unwrap_or_else(|| vec![s.y_mean, 0.0]);
    vec![c[0], c[1], 0.5]
}

// logarithmic: a + b·ln x

fn logarithmic(p: &[f64], x: f64) -> f64 {
    p[0] + p[1] * x.ln()
}

fn logarithmic_grad(_p: &[f64], x: f64, g: &mut [f64]) {
    g[0] = 1.0;
    g[1] = x.ln();
}

fn logarithmic_dydx(p: &[f64], x: f64) -> f64 {
    p[1] / x
}

fn logarithmic_guess(s: &Shape) -> Vec<f64> {
    s.fit_rows(|x, y| (x > 0.0).then(|| (vec![1.0, x.ln()], y)), 2)
        .unwrap_or_else(|| vec![s.y_mean, 0.0])
}

// sqrt: a + b·√x

fn sqrt_model(p: &[f64], x: f64) -> f64 {
    p[0] + p[1] * x.sqrt()
}

fn sqrt_grad(_p: &[f64], x: f64, g: &mut [f64]) {
    g[0] = 1.0;
    g[1] = x.sqrt();
}

fn sqrt_dydx(p: &[f64], x: f64) -> f64 {
    0.5 * p[1] / x.sqrt()
}

fn sqrt_guess(s: &Shape) -> Vec<f64> {
    s.fit_rows(|x, y| (x >= 0.0).then(|| (vec![1.0, x.sqrt()], y)), 2)
        .unwrap_or_else(|| vec![s.y_mean, 0.0])
}

// log_quadratic: a + b·ln x + c·ln² x

fn log_quadratic(p: &[f64], x: f64) -> f64 {
    let l = x.ln();
    p[0] + p[1] * l + p[2] * l * l
}

fn log_quadratic_grad(_p: &[f64], x: f64, g: &mut [f64]) {
    let l = x.ln();
    g[0] = 1.0;
    g[1] = l;
    g[2] = l * l;
}

fn log_quadratic_dydx(p: &[f64], x: f64) -> f64 {
    (p[1] + 2.0 * p[2] * x.ln()) / x
}

fn log_quadratic_guess(s: &Shape) -> Vec<f64> {
    s.fit_rows(
        |x, y| {
            (x > 0.0).then(|| {
                let l = x.ln();
                (vec![1.0, l, l * l], y)
            })
        },
        3,
    )
    .unwrap_or_else(|| vec![s.y_mean, 0.0, 0.0])
}

pub(super) fn families() -> Vec<Builtin> {
    use ParamSpec as P;
    vec![
        Builtin {
            name: "power_law",
            class: FamilyClass::Power,
            params: vec![P::free("scale"), P::bounded("exponent", -20.0, 20.0)],
            eval: power_law,
            grad: power_law_grad,
            dydx: Some(power_law_dydx),
            guess: power_law_guess,
        },
        Builtin {
            name: "power_offset",
            class: FamilyClass::Power,
            params: vec![P::free("offset"), P::free("scale"), P::bounded("exponent", -20.0, 20.0)],
            eval: power_offset,
            grad: power_offset_grad,
            dydx: Some(power_offset_dydx),
            guess: power_offset_guess,
        },
        Builtin {
            name: "logarithmic",
            class: FamilyClass::Power,
            params: vec![P::free("a"), P::free("b")],
            eval: logarithmic,
            grad: logarithmic_grad,
            dydx: Some(logarithmic_dydx),
            guess: logarithmic_guess,
        },
        Builtin {
            name: "sqrt",
            class: FamilyClass::Power,
            params: vec![P::free("a"), P::free("b")],
            eval: sqrt_model,
            grad: sqrt_grad,
            dydx: Some(sqrt_dydx),
            guess: sqrt_guess,
        },
        Builtin {
            name: "log_quadratic",
            class: FamilyClass::Power,
            params: vec![P::free("a"), P::free("b"), P::free("c")],
            eval: log_quadratic,
            grad: log_quadratic_grad,
            dydx: Some(log_quadratic_dydx),
            guess: log_quadratic_guess,
        },
    ]
}
