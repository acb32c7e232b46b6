use minefit::dataset::{describe, Axis, Descriptives};
use minefit::rng;
use minefit::synth::{
    reconstruct_dataset, reconstruct_row, replicate, sd_from_upper_pl, Family, SummaryRow, SynthOptions,
};
use proptest::prelude::*;

#[test]
fn lognormal_sample_mean_over_seeds() {
    let row = SummaryRow::with_sd(10.0, 10_000, 2.0, 1.0, Family::LogNormal);
    let bound = 3.0 * 1.0 / (10_000f64).sqrt();
    for seed in 0..10 {
        let v = reconstruct_row(&row, seed, &SynthOptions::default()).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 2.0).abs() < bound, "seed {seed}: mean {mean}");
        assert!(v.iter().all(|&y| y > 0.0));
    }
}

/// 60 ages with alternating families and n summing to 10,000.
fn grid_rows() -> Vec<SummaryRow> {
    (0..60)
        .map(|i| {
            let n = 10_000 / 60 + usize::from(i < 10_000 % 60);
            let mean = 50.0 + 3.0 * i as f64;
            let family = if i % 2 == 0 { Family::Normal } else { Family::LogNormal };
            SummaryRow::with_sd(i as f64 * 0.75, n, mean, 0.1 * mean, family)
        })
        .collect()
}

fn pooled(rows: &[SummaryRow]) -> (f64, f64) {
    let total: usize = rows.iter().map(|r| r.n).sum();
    let mean = rows.iter().map(|r| r.n as f64 * r.mean).sum::<f64>() / total as f64;
    let var_of_mean = rows.iter().map(|r| r.n as f64 * r.sd.unwrap().powi(2)).sum::<f64>() / (total as f64).powi(2);
    (mean, var_of_mean.sqrt())
}

#[test]
fn pooled_mean_of_sixty_row_grid() {
    let rows = grid_rows();
    assert_eq!(rows.iter().map(|r| r.n).sum::<usize>(), 10_000);
    let d = reconstruct_dataset(&rows, 4242, &SynthOptions::default()).unwrap();
    assert_eq!(d.len(), 10_000);
    let (mean, se) = pooled(&rows);
    let got = describe(&d, Axis::Y).unwrap().mean;
    assert!((got - mean).abs() < 3.0 * se, "{got} vs {mean} (se {se})");
}

#[test]
fn replicate_spread_matches_standard_error() {
    let rows = grid_rows();
    let reps = replicate(&rows, 7, 20, &SynthOptions::default()).unwrap();
    let means: Vec<f64> = reps.iter().map(|d| describe(d, Axis::Y).unwrap().mean).collect();
    let spread = Descriptives::of(&means).unwrap().sd;
    let (_, se) = pooled(&rows);
    assert!(spread < 3.0 * se && spread > se / 3.0, "spread {spread}, se {se}");
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            assert_ne!(reps[i].ys(), reps[j].ys());
        }
    }
}

#[test]
fn replicate_index_depends_only_on_master_seed() {
    let rows = grid_rows();
    let five = replicate(&rows, 3, 5, &SynthOptions::default()).unwrap();
    let three = replicate(&rows, 3, 3, &SynthOptions::default()).unwrap();
    assert_eq!(five[2], three[2]);
}

#[test]
fn parallel_dataset_equals_sequential_rows() {
    let rows = grid_rows();
    let opts = SynthOptions::default();
    let d = reconstruct_dataset(&rows, 55, &opts).unwrap();
    let sequential: Vec<f64> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| reconstruct_row(r, rng::derive_seed(55, i as u64), &opts).unwrap())
        .collect();
    assert_eq!(d.ys(), sequential);
}

#[test]
fn prediction_limit_rows_use_configured_z() {
    let mut row = SummaryRow::with_sd(30.0, 500, 10.0, 1.0, Family::Normal);
    row.sd = None;
    row.upper_pl95 = Some(13.92);
    for z in [1.645, 1.96] {
        let opts = SynthOptions {
            z,
            moment_correct: true,
            ..SynthOptions::default()
        };
        let v = reconstruct_row(&row, 1, &opts).unwrap();
        let sd = Descriptives::of(&v).unwrap().sd;
        assert!((sd - 3.92 / z).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn sd_from_limit_is_linear_and_homogeneous(mean in 0.1f64..100.0, gap in 0.0f64..50.0, z in 0.5f64..3.0, k in 0.1f64..10.0) {
        let base = sd_from_upper_pl(mean, mean + gap, z).unwrap();
        let scaled_gap = sd_from_upper_pl(mean, mean + k * gap, z).unwrap();
        let scaled_z = sd_from_upper_pl(mean, mean + gap, k * z).unwrap();
        prop_assert!((scaled_gap - k * base).abs() <= 1e-9 * (1.0 + base * k));
        prop_assert!((scaled_z - base / k).abs() <= 1e-9 * (1.0 + base / k));
    }

    #[test]
    fn moment_correction_holds_for_any_n(n in 2usize..400, mean in 0.5f64..500.0, cv in 0.01f64..2.0, seed in any::<u64>()) {
        let row = SummaryRow::with_sd(1.0, n, mean, cv * mean, Family::Normal);
        let opts = SynthOptions { moment_correct: true, ..SynthOptions::default() };
        let v = reconstruct_row(&row, seed, &opts).unwrap();
        let d = Descriptives::of(&v).unwrap();
        prop_assert!(((d.mean - mean) / mean).abs() < 1e-9);
        prop_assert!(((d.sd - cv * mean) / (cv * mean)).abs() < 1e-9);
    }
}
