//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::time::{Duration, Instant};

use minefit::analyze::{self, cross_correlation, peak_age, prediction_band, Transform};
use minefit::dataset::{DataPoint, Dataset, Descriptives};
use minefit::fit::{fit_least_squares, multi_start, rank_all, FitOptions, RankOptions};
use minefit::models::{Catalog, FamilyClass, Model, ModelSpec, ParamSpec, PlausibilityConfig, Shape};
use minefit::plot::{render_svg, Curve, PlotOptions};
use minefit::rng;
use minefit::synth::{self, Family, SummaryRow, SynthOptions};
use minefit::validate::{agreement, holdout_validate, split, AgreementMetric};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed <= budget, || format!("took {elapsed:?}, budget {budget:?}"))
}

fn points(pts: impl IntoIterator<Item = (f64, f64)>) -> Vec<DataPoint> {
    pts.into_iter().map(|(x, y)| DataPoint::new("s", x, y)).collect()
}

// 1 -------------------------------------------------------------------------

fn lognormal_round_trip() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for mu in [0.1, 1.0, 5.0, 50.0] {
        for sigma in [0.01, 0.5, 2.0, 10.0] {
            let p = synth::solve_lognormal(mu, sigma).map_err(|e| e.to_string())?;
            let y2 = p.y_log * p.y_log;
            // mean e^{x + y²/2}, variance e^{2x + y²}(e^{y²} − 1)
            let mean = (p.x_log + 0.5 * y2).exp();
            let var = (2.0 * p.x_log + y2).exp() * (y2.exp() - 1.0);
            let var_stable = (2.0 * p.x_log + y2).exp() * y2.exp_m1();
            worst = worst.max(rel(mean, mu)).max(rel(var_stable, sigma * sigma));
            ensure(rel(var, sigma * sigma) < 1e-6, || {
                format!("naive variance off at ({mu}, {sigma})")
            })?;
        }
    }
    ensure(worst <= 1e-10, || format!("max relative error {worst:e}"))?;
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("16 grid points, max relative error {worst:.1e}"))
}

// 2 -------------------------------------------------------------------------

fn moment_corrected_reconstruction() -> Check {
    let start = Instant::now();
    let opts = SynthOptions {
        moment_correct: true,
        ..SynthOptions::default()
    };
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    for (i, n) in [2usize, 10, 100, 10_000].into_iter().enumerate() {
        for (mean, sd) in [(10.0, 2.0), (0.3, 0.05), (2500.0, 900.0)] {
            for family in [Family::Normal, Family::LogNormal] {
                let row = SummaryRow::with_sd(20.0, n, mean, sd, family);
                let seed = 1000 + i as u64;
                let v = synth::reconstruct_row(&row, seed, &opts).map_err(|e| e.to_string())?;
                ensure(v.len() == n, || format!("{} values for n = {n}", v.len()))?;
                // targets live on the sampling scale
                let (sample, target) = match family {
                    Family::Normal => (v.clone(), (mean, sd)),
                    Family::LogNormal => {
                        let p = synth::solve_lognormal(mean, sd).map_err(|e| e.to_string())?;
                        (v.iter().map(|y| y.ln()).collect(), (p.x_log, p.y_log))
                    }
                };
                let d = Descriptives::of(&sample).map_err(|e| e.to_string())?;
                worst = worst.max(rel(d.mean, target.0)).max(rel(d.sd, target.1));
                rows += 1;
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max relative error {worst:e}"))?;
    within_budget(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{rows} fixtures, max relative error {worst:.1e}"))
}

// 3 -------------------------------------------------------------------------

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Normal equations in the centred and scaled variable `u = (x − m)/s`,
/// solved by Cramer's rule and mapped back to powers of `x`.
fn closed_form(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    let us: Vec<f64> = xs.iter().map(|x| (x - m) / s).collect();
    let k = degree + 1;
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for (u, y) in us.iter().zip(ys) {
        for (r, row) in a.iter_mut().enumerate().take(k) {
            b[r] += u.powi(r as i32) * y;
            for (c, cell) in row.iter_mut().enumerate().take(k) {
                *cell += u.powi((r + c) as i32);
            }
        }
    }
    let c = if degree == 1 {
        let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        vec![
            (b[0] * a[1][1] - a[0][1] * b[1]) / d,
            (a[0][0] * b[1] - b[0] * a[1][0]) / d,
        ]
    } else {
        let d = det3(a);
        (0..3)
            .map(|col| {
                let mut mm = a;
                for r in 0..3 {
                    mm[r][col] = b[r];
                }
                det3(mm) / d
            })
            .collect()
    };
    // c0 + c1 (x−m)/s + c2 (x−m)²/s²
    if degree == 1 {
        vec![c[0] - c[1] * m / s, c[1] / s]
    } else {
        let (s2, m2) = (s * s, m * m);
        vec![
            c[0] - c[1] * m / s + c[2] * m2 / s2,
            c[1] / s - 2.0 * c[2] * m / s2,
            c[2] / s2,
        ]
    }
}

fn two_pass_r2(spec: &dyn Model, p: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let tss: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let rss: f64 = xs.iter().zip(ys).map(|(&x, y)| (y - spec.eval(p, x)).powi(2)).sum();
    1.0 - rss / tss
}

fn fitter_oracle() -> Check {
    let start = Instant::now();
    let catalog = Catalog::builtin();
    let mut g = rng::stream(2024, 3);
    let (mut worst_p, mut worst_r2): (f64, f64) = (0.0, 0.0);
    for trial in 0..100 {
        let degree = 1 + trial % 2;
        let spec = catalog.get(if degree == 1 { "linear" } else { "quadratic" }).unwrap();
        let n = g.random_range(10..200);
        // intercept large enough that y stays positive over x in [0, 60]
        let mut truth = vec![g.random_range(150.0..250.0), g.random_range(-1.0..1.0)];
        if degree == 2 {
            truth.push(g.random_range(-0.02..0.02));
        }
        let noise = Normal::new(0.0, g.random_range(0.1..3.0)).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| g.random_range(0.0..60.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| spec.eval(&truth, x) + noise.sample(&mut g))
            .collect();
        let d = Dataset::from_points("oracle", points(xs.iter().copied().zip(ys.iter().copied())))
            .map_err(|e| e.to_string())?;
        let fit = fit_least_squares(spec.as_ref(), &d, &vec![0.0; degree + 1], &FitOptions::default())
            .map_err(|e| e.to_string())?;
        ensure(fit.converged, || format!("trial {trial} did not converge"))?;
        let oracle = closed_form(&xs, &ys, degree);
        for (a, b) in fit.params.iter().zip(&oracle) {
            worst_p = worst_p.max(rel(*a, *b));
        }
        let r2 = fit.r2.ok_or("missing r²")?;
        worst_r2 = worst_r2.max((r2 - two_pass_r2(spec.as_ref(), &oracle, &xs, &ys)).abs());
    }
    ensure(worst_p <= 1e-8, || format!("parameter relative error {worst_p:e}"))?;
    ensure(worst_r2 <= 1e-12, || format!("r² error {worst_r2:e}"))?;
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("100 datasets, params {worst_p:.1e} rel, r² {worst_r2:.1e} abs"))
}

// 4 -------------------------------------------------------------------------

fn ground_truth_recovery() -> Check {
    let start = Instant::now();
    // N(t) = A·exp(−t²/2w²); loss −N′ peaks at the inflection t = w
    let (amp, width) = (300_000.0, 14.5);
    let truth = |t: f64| amp * (-0.5 * (t / width).powi(2)).exp();
    let mut g = rng::stream(77, 0);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let pts = (0..300).map(|i| {
        let t = 50.0 * i as f64 / 299.0;
        (t, (truth(t) * (1.0 + noise.sample(&mut g))).max(0.0))
    });
    let d = Dataset::from_points("gaussian-decline", points(pts)).map_err(|e| e.to_string())?;
    let catalog = Catalog::builtin();
    let plaus = PlausibilityConfig::new((0.0, 50.0))
        .nonnegative(true)
        .max_sign_changes(Some(1));
    let opts = RankOptions {
        seed: 11,
        ..RankOptions::default()
    };
    let ranked = rank_all(catalog.specs(), &d, &plaus, &opts).map_err(|e| e.to_string())?;
    let best = ranked.best().ok_or("no plausible fit")?;
    let fit = best.fit.as_ref().unwrap();
    let r2 = fit.r2.unwrap();
    let spec = catalog.get(&best.spec_name).unwrap();
    let peak = peak_age(
        |t| analyze::monthly_loss(spec.as_ref(), &fit.params, t).unwrap_or(f64::NAN),
        (0.0, 50.0),
        600,
    )
    .map_err(|e| e.to_string())?;
    ensure(r2 >= 0.95, || format!("{} r² = {r2}", best.spec_name))?;
    ensure((peak.age - width).abs() <= 0.2, || {
        format!("{}: loss peak at {:.3}, truth {width}", best.spec_name, peak.age)
    })?;
    within_budget(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{} models, winner {} (r² {r2:.4}), loss peak {:.3} vs {width}",
        catalog.len(),
        best.spec_name,
        peak.age
    ))
}

// 5 -------------------------------------------------------------------------

fn validation_semantics() -> Check {
    let catalog = Catalog::builtin();
    let lin = catalog.get("linear").unwrap();
    let d = Dataset::from_points(
        "v",
        points((0..40).map(|i| (i as f64, 3.0 + 0.5 * i as f64 + (i % 5) as f64))),
    )
    .map_err(|e| e.to_string())?;
    let fit = fit_least_squares(lin.as_ref(), &d, &[0.0, 0.0], &FitOptions::default()).map_err(|e| e.to_string())?;
    let same =
        holdout_validate(lin.as_ref(), &fit.params, &d, &d, AgreementMetric::Ratio).map_err(|e| e.to_string())?;
    ensure(same.agreement == Some(1.0), || {
        format!("self agreement {:?}", same.agreement)
    })?;
    let paper = agreement(0.45, 0.43, AgreementMetric::Ratio).ok_or("undefined")?;
    ensure((paper - 43.0 / 45.0).abs() < 1e-15 && paper > 0.95, || {
        format!("paper pair {paper}")
    })?;
    Ok(format!("self agreement 1, (0.45, 0.43) -> {paper:.4}"))
}

// 6 -------------------------------------------------------------------------

fn gradient_correctness() -> Check {
    let start = Instant::now();
    let catalog = Catalog::builtin();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for spec in catalog.specs() {
        let mut g = rng::stream(rng::derive_seed_for(5, spec.name()), 0);
        let mut analytic = vec![0.0; spec.n_params()];
        for _ in 0..25 {
            let mut p: Vec<f64> = (0..spec.n_params()).map(|_| g.random_range(0.5..2.0)).collect();
            minefit::models::project(spec.as_ref(), &mut p);
            let x = g.random_range(0.5..5.0);
            spec.grad(&p, x, &mut analytic);
            for j in 0..p.len() {
                let h = 1e-6 * p[j].abs().max(1.0);
                let (mut hi, mut lo) = (p.clone(), p.clone());
                hi[j] += h;
                lo[j] -= h;
                let fd = (spec.eval(&hi, x) - spec.eval(&lo, x)) / (2.0 * h);
                let scale = analytic[j].abs().max(fd.abs()).max(1e-8);
                let err = (analytic[j] - fd).abs() / scale;
                worst = worst.max(err);
                ensure(err <= 1e-4, || {
                    format!(
                        "{} param {j} at x = {x}: analytic {} vs fd {fd}",
                        spec.name(),
                        analytic[j]
                    )
                })?;
            }
            checked += 1;
        }
    }
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "{} families x 25 points ({checked}), worst {worst:.1e}",
        catalog.len()
    ))
}

// 7 -------------------------------------------------------------------------

fn band_coverage() -> Check {
    let start = Instant::now();
    let catalog = Catalog::builtin();
    let spec = catalog.get("exp_decay_offset").unwrap();
    let truth = [40.0, 0.08, 5.0];
    let noise = Normal::new(0.0, 1.5).unwrap();
    // separate streams so the fresh sample does not depend on the training size
    let draw = |stream: u64, n: usize| -> Vec<(f64, f64)> {
        let mut g = rng::stream(909, stream);
        (0..n)
            .map(|_| {
                let x = g.random_range(0.0..50.0);
                (x, spec.eval(&truth, x) + noise.sample(&mut g))
            })
            .collect()
    };
    // a large training set keeps the estimate of s from adding much spread
    // beyond the binomial noise of the coverage count
    let train = Dataset::from_points("train", points(draw(0, 20_000))).map_err(|e| e.to_string())?;
    let fit = multi_start(spec.as_ref(), &train, 4, 3, &FitOptions::default()).map_err(|e| e.to_string())?;
    let band = prediction_band(spec.as_ref(), &fit, &train, 0.95, 101).map_err(|e| e.to_string())?;
    let fresh = draw(1, 10_000);
    let inside = fresh
        .iter()
        .filter(|&&(x, y)| band.contains(spec.as_ref(), &fit.params, x, y))
        .count();
    let coverage = inside as f64 / fresh.len() as f64;
    let se = (0.95 * 0.05 / fresh.len() as f64).sqrt();
    ensure((coverage - 0.95).abs() <= 3.0 * se, || {
        format!("coverage {coverage}, 3 SE = {}", 3.0 * se)
    })?;
    within_budget(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("coverage {coverage:.4} (0.95 ± {:.4})", 3.0 * se))
}

// 8 -------------------------------------------------------------------------

fn determinism() -> Check {
    let rows = vec![
        SummaryRow::with_sd(1.0, 40, 200.0, 30.0, Family::LogNormal),
        SummaryRow::with_sd(10.0, 60, 150.0, 20.0, Family::LogNormal),
        SummaryRow::with_sd(20.0, 50, 90.0, 15.0, Family::Normal),
        SummaryRow::with_sd(35.0, 50, 30.0, 6.0, Family::Normal),
    ];
    let run = || -> Result<(String, String, String, String, String), String> {
        let e = |e: minefit::Error| e.to_string();
        let reps = synth::replicate(&rows, 8, 3, &SynthOptions::default()).map_err(e)?;
        let mut synth_csv = Vec::new();
        for r in &reps {
            minefit::dataset::write_csv(r, &mut synth_csv).map_err(e)?;
        }
        let d = &reps[0];
        let (tr, te) = split(d, 0.5, 4, 5).map_err(e)?;
        let split_key = format!("{:?}|{:?}", tr.points(), te.points());
        let catalog = Catalog::builtin();
        let gauss = catalog.get("exp_decay").unwrap();
        let ms = multi_start(gauss.as_ref(), d, 6, 12, &FitOptions::default()).map_err(e)?;
        let ms_key = serde_json::to_string(&ms).unwrap();
        let plaus = PlausibilityConfig::new((0.0, 40.0)).nonnegative(true);
        let ranked = rank_all(
            catalog.specs(),
            d,
            &plaus,
            &RankOptions {
                seed: 7,
                ..RankOptions::default()
            },
        )
        .map_err(e)?;
        let best = catalog
            .get(ranked.gold_standard.as_deref().unwrap_or("constant"))
            .unwrap();
        let params = ranked
            .best()
            .and_then(|b| b.fit.as_ref())
            .map(|f| f.params.clone())
            .unwrap_or_default();
        let curve = (!params.is_empty()).then(|| Curve {
            spec: best.as_ref(),
            params: &params,
        });
        let svg = render_svg(d, curve, None, &PlotOptions::default()).map_err(e)?;
        Ok((
            String::from_utf8(synth_csv).unwrap(),
            split_key,
            ms_key,
            ranked.to_json(),
            svg,
        ))
    };
    let a = run()?;
    let b = run()?;
    ensure(a.0 == b.0, || "synth differs".into())?;
    ensure(a.1 == b.1, || "split differs".into())?;
    ensure(a.2 == b.2, || "multi_start differs".into())?;
    ensure(a.3 == b.3, || "rank differs".into())?;
    ensure(a.4 == b.4, || "plot differs".into())?;
    Ok("synth, split, multi_start, rank, plot identical across two runs".into())
}

// 9 -------------------------------------------------------------------------

/// `scale·f + shift`, a positive (or negative) affine image of another model.
struct Affine {
    inner: ModelSpec,
    scale: f64,
    shift: f64,
}

impl Model for Affine {
    fn name(&self) -> &str {
        "affine"
    }
    fn family(&self) -> FamilyClass {
        self.inner.family()
    }
    fn params(&self) -> &[ParamSpec] {
        self.inner.params()
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        self.scale * self.inner.eval(p, x) + self.shift
    }
    fn grad(&self, p: &[f64], x: f64, out: &mut [f64]) {
        self.inner.grad(p, x, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn guess(&self, data: &Shape) -> Vec<f64> {
        self.inner.guess(data)
    }
}

fn correlation_identities() -> Check {
    let catalog = Catalog::builtin();
    let specs: Vec<&ModelSpec> = catalog.specs().iter().filter(|s| s.n_params() > 1).collect();
    let mut g = rng::stream(31, 0);
    let range = (0.5, 5.0);
    let grid = analyze::monthly_grid(range);
    let mut models = Vec::new();
    let mut attempts = 0;
    while models.len() < 20 {
        attempts += 1;
        ensure(attempts < 1000, || "could not draw 20 usable models".into())?;
        let spec = specs[g.random_range(0..specs.len())];
        let mut p: Vec<f64> = (0..spec.n_params()).map(|_| g.random_range(0.5..2.0)).collect();
        minefit::models::project(spec.as_ref(), &mut p);
        let ok = cross_correlation(
            (spec.as_ref(), &p),
            (spec.as_ref(), &p),
            Transform::Value,
            Transform::Value,
            range,
            grid,
        );
        if ok.is_ok() {
            models.push((spec.clone(), p));
        }
    }
    let mut worst: f64 = 0.0;
    for (i, (spec, p)) in models.iter().enumerate() {
        let a = (spec.as_ref(), p.as_slice());
        let r = |x, y, tx, ty| {
            cross_correlation(x, y, tx, ty, range, grid)
                .map(|c| c.r)
                .map_err(|e| e.to_string())
        };
        let self_r = r(a, a, Transform::Value, Transform::Value)?;
        worst = worst.max((self_r - 1.0).abs());
        let neg = Affine {
            inner: spec.clone(),
            scale: -1.0,
            shift: 0.0,
        };
        let neg_r = r(a, (&neg, p.as_slice()), Transform::Value, Transform::Value)?;
        worst = worst.max((neg_r + 1.0).abs());
        let (other, q) = &models[(i + 1) % models.len()];
        let b = (other.as_ref(), q.as_slice());
        let base = match r(a, b, Transform::Value, Transform::Value) {
            Ok(v) => v,
            Err(e) => return Err(format!("{} vs {}: {e}", spec.name(), other.name())),
        };
        let affine = Affine {
            inner: spec.clone(),
            scale: 3.7,
            shift: -12.5,
        };
        let moved = r((&affine, p.as_slice()), b, Transform::Value, Transform::Value)?;
        worst = worst.max((moved - base).abs());
    }
    ensure(worst <= 1e-12, || format!("worst deviation {worst:e}"))?;
    Ok(format!("20 models, worst deviation {worst:.1e}"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 lognormal round-trip", lognormal_round_trip),
        ("2 moment-corrected reconstruction", moment_corrected_reconstruction),
        ("3 fitter matches closed-form least squares", fitter_oracle),
        ("4 ground-truth recovery pipeline", ground_truth_recovery),
        ("5 validation semantics", validation_semantics),
        ("6 gradient correctness", gradient_correctness),
        ("7 prediction-band coverage", band_coverage),
        ("8 determinism", determinism),
        ("9 correlation identities", correlation_identities),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let t = Instant::now();
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{:.2?}]", t.elapsed()),
            Err(why) => {
                println!("FAIL criterion {name}: {why} [{:.2?}]", t.elapsed());
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
