use super::{Builtin, FamilyClass, ParamSpec, Shape};

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn direction(s: &Shape) -> f64 {
    if s.trend < 0.0 {
        -1.0
    } else {
        1.0
    }
}

// logistic: L / (1 + e^{-k(x - x0)})

fn logistic(p: &[f64], x: f64) -> f64 {
    p[0] * sigmoid(p[1] * (x - p[2]))
}

fn logistic_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let s = sigmoid(p[1] * (x - p[2]));
    let ds = s * (1.0 - s);
    g[0] = s;
    g[1] = p[0] * ds * (x - p[2]);
    g[2] = -p[0] * ds * p[1];
}

fn logistic_dydx(p: &[f64], x: f64) -> f64 {
    let s = sigmoid(p[1] * (x - p[2]));
    p[0] * p[1] * s * (1.0 - s)
}

fn logistic_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_max, direction(s) * 4.0 / s.x_span(), s.x_at_half()]
}

fn logistic_offset(p: &[f64], x: f64) -> f64 {
    logistic(p, x) + p[3]
}

fn logistic_offset_grad(p: &[f64], x: f64, g: &mut [f64]) {
    logistic_grad(p, x, g);
    g[3] = 1.0;
}

fn logistic_offset_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_range(), direction(s) * 4.0 / s.x_span(), s.x_at_half(), s.y_min]
}

// gompertz: A · exp(−b · e^{−kx})

fn gompertz(p: &[f64], x: f64) -> f64 {
    p[0] * (-p[1] * (-p[2] * x).exp()).exp()
}

fn gompertz_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let u = (-p[2] * x).exp();
    let e = (-p[1] * u).exp();
    g[0] = e;
    g[1] = -p[0] * u * e;
    g[2] = p[0] * e * p[1] * x * u;
}

fn gompertz_dydx(p: &[f64], x: f64) -> f64 {
    let u = (-p[2] * x).exp();
    p[0] * (-p[1] * u).exp() * p[1] * p[2] * u
}

fn gompertz_guess(s: &Shape) -> Vec<f64> {
    let k = direction(s) * 4.0 / s.x_span();
    // inflection at ln(b)/k
    let b = (k * s.x_at_half()).exp();
    vec![1.05 * s.y_max, b, k]
}

// hill: A · q / (1 + q), q = (x/K)^n

fn hill_q(p: &[f64], x: f64) -> f64 {
    (x / p[1]).powf(p[2])
}

fn hill(p: &[f64], x: f64) -> f64 {
    let q = hill_q(p, x);
    p[0] * q / (1.0 + q)
}

fn hill_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let q = hill_q(p, x);
    let d = (1.0 + q) * (1.0 + q);
    g[0] = q / (1.0 + q);
    if q == 0.0 {
        g[1] = 0.0;
        g[2] = 0.0;
    } else {
        g[1] = -p[0] * p[2] * q / (p[1] * d);
        g[2] = p[0] * q * (x / p[1]).ln() / d;
    }
}

fn hill_dydx(p: &[f64], x: f64) -> f64 {
    let q = hill_q(p, x);
    p[0] * p[2] * q / (x * (1.0 + q) * (1.0 + q))
}

fn hill_guess(s: &Shape) -> Vec<f64> {
    let k = if s.x_at_half() > 0.0 {
        s.x_at_half()
    } else {
        0.5 * s.x_max.max(1.0)
    };
    vec![1.05 * s.y_max, k, 2.0]
}

// hill_decline: A / (1 + q)

fn hill_decline(p: &[f64], x: f64) -> f64 {
    p[0] / (1.0 + hill_q(p, x))
}

fn hill_decline_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let q = hill_q(p, x);
    let d = (1.0 + q) * (1.0 + q);
    g[0] = 1.0 / (1.0 + q);
    if q == 0.0 {
        g[1] = 0.0;
        g[2] = 0.0;
    } else {
        g[1] = p[0] * p[2] * q / (p[1] * d);
        g[2] = -p[0] * q * (x / p[1]).ln() / d;
    }
}

fn hill_decline_dydx(p: &[f64], x: f64) -> f64 {
    -hill_dydx(p, x)
}

fn hill_decline_guess(s: &Shape) -> Vec<f64> {
    let k = if s.x_at_half() > 0.0 {
        s.x_at_half()
    } else {
        0.5 * s.x_max.max(1.0)
    };
    vec![s.y_max, k, 2.0]
}

pub(super) fn families() -> Vec<Builtin> {
    use ParamSpec as P;
    let hill_params = || {
        vec![
            P::free("amplitude"),
            P::at_least("half_point", 1e-9),
            P::bounded("exponent", 0.05, 50.0),
        ]
    };
    vec![
        Builtin {
            name: "logistic",
            class: FamilyClass::Sigmoidal,
            params: vec![P::free("amplitude"), P::free("rate"), P::free("midpoint")],
            eval: logistic,
            grad: logistic_grad,
            dydx: Some(logistic_dydx),
            guess: logistic_guess,
        },
        Builtin {
            name: "logistic_offset",
            class: FamilyClass::Sigmoidal,
            params: vec![
                P::free("amplitude"),
                P::free("rate"),
                P::free("midpoint"),
                P::free("offset"),
            ],
            eval: logistic_offset,
            grad: logistic_offset_grad,
            dydx: Some(logistic_dydx),
            guess: logistic_offset_guess,
        },
        Builtin {
            name: "gompertz",
            class: FamilyClass::Sigmoidal,
            params: vec![P::free("amplitude"), P::at_least("displacement", 0.0), P::free("rate")],
            eval: gompertz,
            grad: gompertz_grad,
            dydx: Some(gompertz_dydx),
            guess: gompertz_guess,
        },
        Builtin {
            name: "hill",
            class: FamilyClass::Sigmoidal,
            params: hill_params(),
            eval: hill,
            grad: hill_grad,
            dydx: Some(hill_dydx),
            guess: hill_guess,
        },
        Builtin {
            name: "hill_decline",
            class: FamilyClass::Sigmoidal,
            params: hill_params(),
            eval: hill_decline,
            grad: hill_decline_grad,
            dydx: Some(hill_decline_dydx),
            guess: hill_decline_guess,
        },
    ]
}
