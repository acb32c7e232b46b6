use super::{Builtin, FamilyClass, ParamSpec, Shape};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

fn width_guess(s: &Shape, base: f64) -> f64 {
    (s.width_above(0.5, base) / FWHM_PER_SIGMA).max(1e-3 * s.x_span())
}

// gaussian: A · exp(−(x − c)² / 2w²)

fn gaussian(p: &[f64], x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    p[0] * (-0.5 * u * u).exp()
}

fn gaussian_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let u = (x - p[1]) / p[2];
    let e = (-0.5 * u * u).exp();
    g[0] = e;
    g[1] = p[0] * e * u / p[2];
    g[2] = p[0] * e * u * u / p[2];
}

fn gaussian_dydx(p: &[f64], x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    -p[0] * (-0.5 * u * u).exp() * u / p[2]
}

fn gaussian_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_max, s.x_at_max, width_guess(s, 0.0)]
}

fn gaussian_offset(p: &[f64], x: f64) -> f64 {
    gaussian(p, x) + p[3]
}

fn gaussian_offset_grad(p: &[f64], x: f64, g: &mut [f64]) {
    gaussian_grad(p, x, g);
    g[3] = 1.0;
}

fn gaussian_offset_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_range(), s.x_at_max, width_guess(s, s.y_min), s.y_min]
}

// lorentzian: A / (1 + ((x − c)/w)²)

fn lorentzian(p: &[f64], x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    p[0] / (1.0 + u * u)
}

fn lorentzian_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let u = (x - p[1]) / p[2];
    let d = 1.0 + u * u;
    g[0] = 1.0 / d;
    g[1] = p[0] * 2.0 * u / (p[2] * d * d);
    g[2] = p[0] * 2.0 * u * u / (p[2] * d * d);
}

fn lorentzian_dydx(p: &[f64], x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    let d = 1.0 + u * u;
    -p[0] * 2.0 * u / (p[2] * d * d)
}

fn lorentzian_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_max, s.x_at_max, 0.5 * s.width_above(0.5, 0.0)]
}

// lognormal_peak: A · exp(−ln²(x/c) / 2w²), x > 0

fn lognormal_peak(p: &[f64], x: f64) -> f64 {
    let v = (x / p[1]).ln();
    p[0] * (-0.5 * v * v / (p[2] * p[2])).exp()
}

fn lognormal_peak_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let v = (x / p[1]).ln();
    let w2 = p[2] * p[2];
    let e = (-0.5 * v * v / w2).exp();
    g[0] = e;
    g[1] = p[0] * e * v / (w2 * p[1]);
    g[2] = p[0] * e * v * v / (w2 * p[2]);
}

fn lognormal_peak_dydx(p: &[f64], x: f64) -> f64 {
    let v = (x / p[1]).ln();
    let w2 = p[2] * p[2];
    -p[0] * (-0.5 * v * v / w2).exp() * v / (w2 * x)
}

fn lognormal_peak_guess(s: &Shape) -> Vec<f64> {
    let c = if s.x_at_max > 0.0 {
        s.x_at_max
    } else {
        0.5 * s.x_max.max(1.0)
    };
    vec![s.y_max, c, 1.0]
}

// gamma_peak: A · (x/c)^k · e^{k(1 − x/c)}, peak A at x = c

fn gamma_log_shape(p: &[f64], x: f64) -> f64 {
    let r = x / p[1];
    r.ln() + 1.0 - r
}

fn gamma_peak(p: &[f64], x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    p[0] * (p[2] * gamma_log_shape(p, x)).exp()
}

fn gamma_peak_grad(p: &[f64], x: f64, g: &mut [f64]) {
    if x == 0.0 {
        g.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let t = gamma_log_shape(p, x);
    let e = (p[2] * t).exp();
    g[0] = e;
    g[1] = p[0] * e * p[2] * (x - p[1]) / (p[1] * p[1]);
    g[2] = if e == 0.0 { 0.0 } else { p[0] * e * t };
}

fn gamma_peak_dydx(p: &[f64], x: f64) -> f64 {
    gamma_peak(p, x) * p[2] * (1.0 / x - 1.0 / p[1])
}

fn gamma_peak_guess(s: &Shape) -> Vec<f64> {
    let c = if s.x_at_max > 0.0 {
        s.x_at_max
    } else {
        0.5 * s.x_max.max(1.0)
    };
    vec![s.y_max, c, 2.0]
}

// gumbel_peak: A · exp(1 − z − e^{−z}), z = (x − c)/w

fn gumbel_peak(p: &[f64], x: f64) -> f64 {
    let z = (x - p[1]) / p[2];
    p[0] * (1.0 - z - (-z).exp()).exp()
}

fn gumbel_peak_grad(p: &[f64], x: f64, g: &mut [f64]) {
    let z = (x - p[1]) / p[2];
    let ez = (-z).exp();
    let e = (1.0 - z - ez).exp();
    let slope = if e == 0.0 { 0.0 } else { p[0] * e * (1.0 - ez) / p[2] };
    g[0] = e;
    g[1] = slope;
    g[2] = slope * z;
}

fn gumbel_peak_dydx(p: &[f64], x: f64) -> f64 {
    let z = (x - p[1]) / p[2];
    let ez = (-z).exp();
    let e = (1.0 - z - ez).exp();
    if e == 0.0 {
        0.0
    } else {
        p[0] * e * (ez - 1.0) / p[2]
    }
}

fn gumbel_peak_guess(s: &Shape) -> Vec<f64> {
    vec![s.y_max, s.x_at_max, width_guess(s, 0.0)]
}

pub(super) fn families() -> Vec<Builtin> {
    use ParamSpec as P;
    let peak = || {
        vec![
            P::at_least("amplitude", 0.0),
            P::free("center"),
            P::at_least("width", 1e-6),
        ]
    };
    let positive_peak = |shape: &str| {
        vec![
            P::at_least("amplitude", 0.0),
            P::at_least("center", 1e-9),
            P::at_least(shape, 1e-6),
        ]
    };
    vec![
        Builtin {
            name: "gaussian",
            class: FamilyClass::Peaked,
            params: peak(),
            eval: gaussian,
            grad: gaussian_grad,
            dydx: Some(gaussian_dydx),
            guess: gaussian_guess,
        },
        Builtin {
            name: "gaussian_offset",
            class: FamilyClass::Peaked,
            params: {
                let mut p = peak();
                p[0] = P::free("amplitude");
                p.push(P::free("offset"));
                p
            },
            eval: gaussian_offset,
            grad: gaussian_offset_grad,
            dydx: Some(gaussian_dydx),
            guess: gaussian_offset_guess,
        },
        Builtin {
            name: "lorentzian",
            class: FamilyClass::Peaked,
            params: peak(),
            eval: lorentzian,
            grad: lorentzian_grad,
            dydx: Some(lorentzian_dydx),
            guess: lorentzian_guess,
        },
        Builtin {
            name: "lognormal_peak",
            class: FamilyClass::Peaked,
            params: positive_peak("width"),
            eval: lognormal_peak,
            grad: lognormal_peak_grad,
            dydx: Some(lognormal_peak_dydx),
            guess: lognormal_peak_guess,
        },
        Builtin {
            name: "gamma_peak",
            class: FamilyClass::Peaked,
            params: {
                let mut p = positive_peak("shape");
                p[2] = P::bounded("shape", 1e-3, 500.0);
                p
            },
            eval: gamma_peak,
            grad: gamma_peak_grad,
            dydx: Some(gamma_peak_dydx),
            guess: gamma_peak_guess,
        },
        Builtin {
            name: "gumbel_peak",
            class: FamilyClass::Peaked,
            params: peak(),
            eval: gumbel_peak,
            grad: gumbel_peak_grad,
            dydx: Some(gumbel_peak_dydx),
            guess: gumbel_peak_guess,
        },
    ]
}
