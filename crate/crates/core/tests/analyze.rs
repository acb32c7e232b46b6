use minefit::analyze::{
    cross_correlation, monthly_loss, peak_age, percent_remaining, prediction_band, Reference, Transform,
};
use minefit::dataset::{DataPoint, Dataset};
use minefit::fit::{multi_start, FitOptions};
use minefit::models::Catalog;
use minefit::rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn two_bumps(x: f64) -> f64 {
    3.0 * (-0.5 * ((x - 12.0) / 2.0f64).powi(2)).exp() + 4.2 * (-0.5 * ((x - 37.3) / 5.0f64).powi(2)).exp()
}

#[test]
fn taller_bump_found_like_a_dense_grid() {
    let n = 1_000_000;
    let (arg, _) = (0..=n)
        .map(|i| {
            let x = 60.0 * i as f64 / n as f64;
            (x, two_bumps(x))
        })
        .fold(
            (0.0, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    let p = peak_age(two_bumps, (0.0, 60.0), 64).unwrap();
    assert!(
        (p.age - arg).abs() <= 60.0 / n as f64 + 60.0 / 64.0 / 100.0,
        "{} vs {arg}",
        p.age
    );
}

#[test]
fn loss_peak_of_gaussian_decline_sits_at_the_inflection() {
    let c = Catalog::builtin();
    let g = c.get("gaussian").unwrap();
    let params = [250_000.0, 0.0, 14.5];
    // dense grid oracle on −dN/dt
    let (arg, _) = (0..=200_000)
        .map(|i| {
            let t = 50.0 * i as f64 / 200_000.0;
            (t, monthly_loss(g.as_ref(), &params, t).unwrap())
        })
        .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let p = peak_age(|t| monthly_loss(g.as_ref(), &params, t).unwrap(), (0.0, 50.0), 100).unwrap();
    assert!((arg - 14.5).abs() < 1e-3);
    assert!((p.age - arg).abs() < 1e-3, "{} vs {arg}", p.age);
}

#[test]
fn percent_remaining_matches_closed_form() {
    let c = Catalog::builtin();
    let e = c.get("exp_decay").unwrap();
    let (amp, rate) = (400_000.0, 0.07);
    for age in [30.0f64, 40.0] {
        let want = 100.0 * (-rate * age).exp();
        let got = percent_remaining(e.as_ref(), &[amp, rate], age, Reference::Age(0.0)).unwrap();
        assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
        let got = percent_remaining(e.as_ref(), &[amp, rate], age, Reference::Peak { domain: (0.0, 60.0) }).unwrap();
        assert!((got - want).abs() <= 1e-9 * want);
    }
}

#[test]
fn band_coverage_on_fresh_points() {
    let c = Catalog::builtin();
    let spec = c.get("quadratic").unwrap();
    let truth = [20.0, 1.5, -0.02];
    let noise = Normal::new(0.0, 2.0).unwrap();
    let draw = |stream: u64, n: usize| -> Vec<(f64, f64)> {
        let mut g = rng::stream(4, stream);
        (0..n)
            .map(|_| {
                let x = g.random_range(0.0..60.0);
                (x, spec.eval(&truth, x) + noise.sample(&mut g))
            })
            .collect()
    };
    let train = Dataset::from_points(
        "train",
        draw(0, 20_000)
            .into_iter()
            .map(|(x, y)| DataPoint::new("s", x, y))
            .collect(),
    )
    .unwrap();
    let fit = multi_start(spec.as_ref(), &train, 1, 0, &FitOptions::default()).unwrap();
    let band = prediction_band(spec.as_ref(), &fit, &train, 0.95, 50).unwrap();
    assert!((band.half_width - 1.959_964 * band.residual_sd).abs() < 1e-6 * band.residual_sd);
    let fresh = draw(1, 10_000);
    let inside = fresh
        .iter()
        .filter(|&&(x, y)| band.contains(spec.as_ref(), &fit.params, x, y))
        .count();
    let coverage = inside as f64 / 1e4;
    assert!(
        (coverage - 0.95).abs() <= 3.0 * (0.95 * 0.05 / 1e4f64).sqrt(),
        "{coverage}"
    );

    let wider = prediction_band(spec.as_ref(), &fit, &train, 0.99, 50).unwrap();
    let narrower = prediction_band(spec.as_ref(), &fit, &train, 0.8, 50).unwrap();
    assert!(narrower.half_width < band.half_width && band.half_width < wider.half_width);
    let json: serde_json::Value = serde_json::to_value(&band).unwrap();
    assert_eq!(json["x"].as_array().unwrap().len(), 50);
}

proptest! {
    #[test]
    fn correlation_symmetry_and_sign(a in prop::collection::vec(0.5f64..2.0, 3), b in prop::collection::vec(0.5f64..2.0, 3)) {
        let c = Catalog::builtin();
        let g = c.get("gaussian").unwrap();
        let l = c.get("logistic").unwrap();
        let range = (0.0, 6.0);
        let ab = cross_correlation((g.as_ref(), &a), (l.as_ref(), &b), Transform::Value, Transform::Derivative, range, 73);
        let ba = cross_correlation((l.as_ref(), &b), (g.as_ref(), &a), Transform::Derivative, Transform::Value, range, 73);
        if let (Ok(ab), Ok(ba)) = (ab, ba) {
            prop_assert!((ab.r - ba.r).abs() < 1e-12);
            prop_assert!(ab.r.abs() <= 1.0);
            let neg = cross_correlation((g.as_ref(), &a), (l.as_ref(), &b), Transform::Value, Transform::NegatedDerivative, range, 73).unwrap();
            prop_assert!((neg.r + ab.r).abs() < 1e-12);
        }
    }

    #[test]
    fn peak_is_invariant_under_rescaling(center in 1.0f64..59.0, width in 0.5f64..10.0, k in 1e-3f64..1e3) {
        let f = |x: f64| (-0.5 * ((x - center) / width).powi(2)).exp();
        let p = peak_age(f, (0.0, 60.0), 64).unwrap();
        let q = peak_age(|x| k * f(x), (0.0, 60.0), 64).unwrap();
        prop_assert!((p.age - center).abs() < 60.0 / 64.0 / 100.0);
        prop_assert!((p.age - q.age).abs() < 60.0 / 64.0 / 100.0);
    }
}
