use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use minefit::dataset::{ingest_csv, CsvSchema, IngestOptions};
use minefit::fit::{multi_start, rank_all, FitOptions, RankOptions};
use minefit::models::{Catalog, PlausibilityConfig};
use minefit::rng::derive_seed_for;
use minefit::validate::{holdout_validate, AgreementMetric};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn minefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minefit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = minefit(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Gaussian decline from 300000 at birth, width 14.5 years, with a fixed
/// ±5% deterministic wobble; `phase` shifts the age grid.
fn decline_csv(dir: &Path, name: &str, n: usize, studies: usize, phase: f64) -> PathBuf {
    let mut s = String::from("study_id,x,y\n");
    for i in 0..n {
        let x = 50.0 * (i as f64 + phase) / n as f64;
        let truth = 300_000.0 * (-0.5 * (x / 14.5f64).powi(2)).exp();
        let y = truth * (1.0 + 0.05 * (12.9898 * i as f64).sin());
        s.push_str(&format!("S{},{x},{y}\n", i % studies));
    }
    let p = dir.join(name);
    fs::write(&p, s).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn rank_reports_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 120, 3, 0.5);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&[
            "rank",
            "--data",
            path_str(&data),
            "--nonnegative",
            "--domain",
            "0:60",
            "--seed",
            "7",
            "--starts",
            "2",
            "--out-dir",
            path_str(dir),
        ]);
    }
    let (ja, jb) = (
        fs::read(a.join("rank.json")).unwrap(),
        fs::read(b.join("rank.json")).unwrap(),
    );
    assert_eq!(ja, jb);
    assert_eq!(
        fs::read(a.join("rank.txt")).unwrap(),
        fs::read(b.join("rank.txt")).unwrap()
    );

    let report: Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    let digest = hex::encode(Sha256::digest(fs::read(&data).unwrap()));
    assert_eq!(report["inputs"][0]["sha256"], digest.as_str());
}

#[test]
fn rank_result_equals_library_ranking() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 80, 2, 0.0);
    let out = ok(&[
        "rank",
        "--data",
        path_str(&data),
        "--models",
        "gaussian,exp_decay,linear,logistic",
        "--nonnegative",
        "--domain",
        "0:60",
        "--seed",
        "3",
        "--starts",
        "3",
        "--json",
    ]);
    let cli: Value = serde_json::from_str(&out).unwrap();

    let d = ingest_csv(
        fs::File::open(&data).unwrap(),
        &CsvSchema::default(),
        &IngestOptions {
            label: "d".into(),
            skip_bad_rows: false,
        },
    )
    .unwrap()
    .dataset;
    let names: Vec<String> = ["gaussian", "exp_decay", "linear", "logistic"]
        .map(String::from)
        .to_vec();
    let catalog = Catalog::builtin().select(&names).unwrap();
    let plaus = PlausibilityConfig::new((0.0, 60.0)).nonnegative(true);
    let opts = RankOptions {
        n_starts: 3,
        seed: 3,
        ..RankOptions::default()
    };
    let lib: Value = serde_json::from_str(&rank_all(catalog.specs(), &d, &plaus, &opts).unwrap().to_json()).unwrap();
    assert_eq!(cli["result"], lib);
}

#[test]
fn fit_reproduces_its_leaderboard_row() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 80, 2, 0.0);
    let d = path_str(&data);
    let rank: Value = serde_json::from_str(&ok(&[
        "rank", "--data", d, "--models", "gaussian", "--seed", "9", "--json",
    ]))
    .unwrap();
    let fit: Value = serde_json::from_str(&ok(&[
        "fit", "--data", d, "--model", "gaussian", "--seed", "9", "--json",
    ]))
    .unwrap();
    assert_eq!(rank["result"]["entries"][0]["fit"], fit["result"]["fit"]);
}

#[test]
fn synth_replicates_carry_all_rows() {
    let tmp = TempDir::new().unwrap();
    let rows = tmp.path().join("rows.csv");
    fs::write(
        &rows,
        "x,n,mean,sd,upper_pl95,family\n1,12,5,1,,normal\n2,40,6,,9,lognormal\n5,7,3,0.5,,lognormal\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "synth",
        "--summary",
        path_str(&rows),
        "--seed",
        "1",
        "--replicates",
        "3",
        "--out-dir",
        path_str(&out),
    ]);
    let mut bodies = Vec::new();
    for i in 0..3 {
        let body = fs::read_to_string(out.join(format!("synthetic-{i}.csv"))).unwrap();
        assert_eq!(body.lines().count() - 1, 12 + 40 + 7);
        bodies.push(body);
    }
    assert_ne!(bodies[0], bodies[1]);
    let report = read_json(&out.join("synth.json"));
    assert_eq!(report["result"]["replicates"].as_array().unwrap().len(), 3);
}

#[test]
fn synth_without_output_directory_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let rows = tmp.path().join("rows.csv");
    fs::write(&rows, "x,n,mean,sd,upper_pl95,family\n1,12,5,1,,normal\n").unwrap();
    assert_eq!(minefit(&["synth", "--summary", path_str(&rows)]).status.code(), Some(1));
}

#[test]
fn validate_agreement_matches_library_call() {
    let tmp = TempDir::new().unwrap();
    let train = decline_csv(tmp.path(), "train.csv", 150, 3, 0.0);
    let test = decline_csv(tmp.path(), "test.csv", 150, 3, 0.5);
    let out = ok(&[
        "validate",
        "--train",
        path_str(&train),
        "--test",
        path_str(&test),
        "--model",
        "gaussian",
        "--seed",
        "11",
        "--json",
    ]);
    let cli: Value = serde_json::from_str(&out).unwrap();
    let v = &cli["result"]["validation"];

    let load = |p: &Path| {
        ingest_csv(
            fs::File::open(p).unwrap(),
            &CsvSchema::default(),
            &IngestOptions::default(),
        )
        .unwrap()
        .dataset
    };
    let (tr, te) = (load(&train), load(&test));
    let catalog = Catalog::builtin();
    let spec = catalog.get("gaussian").unwrap();
    let fit = multi_start(
        spec.as_ref(),
        &tr,
        8,
        derive_seed_for(11, "gaussian"),
        &FitOptions::default(),
    )
    .unwrap();
    let lib = holdout_validate(spec.as_ref(), &fit.params, &tr, &te, AgreementMetric::Ratio).unwrap();
    assert_eq!(v["agreement"].as_f64().unwrap(), lib.agreement.unwrap());
    assert_eq!(v["r2_train"].as_f64().unwrap(), lib.r2_train);
    assert_eq!(v["r2_test"].as_f64().unwrap(), lib.r2_test);
    assert!(lib.agreement.unwrap() > 0.95);
}

#[test]
fn split_validation_with_similarity_table() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 200, 4, 0.0);
    let out = ok(&[
        "validate",
        "--data",
        path_str(&data),
        "--fraction",
        "0.5",
        "--stratify",
        "5",
        "--model",
        "gaussian",
        "--similarity-tolerance",
        "0.5",
        "--json",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["validation"]["n_train"], 100);
    assert_eq!(v["result"]["split"]["stratify_bins"], 5);
    assert!(v["result"]["similarity"]["differences"].is_array());
}

fn count_tags(svg: &str, tag: &str) -> usize {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    doc.descendants().filter(|n| n.tag_name().name() == tag).count()
}

#[test]
fn plot_has_one_marker_per_point_and_one_curve() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "fixture.csv", 325, 5, 0.0);
    let svg_path = tmp.path().join("fig.svg");
    ok(&[
        "plot",
        "--data",
        path_str(&data),
        "--model",
        "gaussian",
        "--band",
        "0.95",
        "--output",
        path_str(&svg_path),
    ]);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(count_tags(&svg, "circle"), 325);
    assert_eq!(count_tags(&svg, "path"), 1);
    assert_eq!(count_tags(&svg, "polygon"), 1);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.root_element().attribute("version"), Some("1.1"));
}

#[test]
fn plot_without_fit_is_scatter_only() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 40, 2, 0.0);
    let svg_path = tmp.path().join("scatter.svg");
    ok(&[
        "plot",
        "--data",
        path_str(&data),
        "--output",
        path_str(&svg_path),
        "--title",
        "a < b & c",
    ]);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(count_tags(&svg, "circle"), 40);
    assert_eq!(count_tags(&svg, "path"), 0);
    assert_eq!(count_tags(&svg, "polygon"), 0);
}

#[test]
fn plot_bytes_repeat() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 60, 3, 0.0);
    let (a, b) = (tmp.path().join("a.svg"), tmp.path().join("b.svg"));
    for p in [&a, &b] {
        ok(&[
            "plot",
            "--data",
            path_str(&data),
            "--model",
            "exp_decay",
            "--band",
            "0.9",
            "--output",
            path_str(p),
        ]);
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(minefit(&["rank", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(minefit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(minefit(&[]).status.code(), Some(2));
    let out = minefit(&["fit", "--data", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
}

#[test]
fn data_errors_exit_one_with_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "study_id,x,y\nA,1,2\nA,oops,3\n").unwrap();
    let out = minefit(&["describe", "--data", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // the same file passes once bad rows may be skipped
    let text = ok(&["ingest", "--data", path_str(&bad), "--skip-bad-rows"]);
    assert!(text.contains("line 3"), "{text}");

    let missing = tmp.path().join("missing.csv");
    assert_eq!(
        minefit(&["describe", "--data", path_str(&missing)]).status.code(),
        Some(1)
    );

    let data = decline_csv(tmp.path(), "d.csv", 20, 1, 0.0);
    let unwritable = tmp.path().join("no/such/dir/p.svg");
    assert_eq!(
        minefit(&["plot", "--data", path_str(&data), "--output", path_str(&unwritable)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        minefit(&["fit", "--data", path_str(&data), "--model", "no_such_model"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 50, 2, 0.0);
    let cfg = tmp.path().join("run.conf");
    fs::write(
        &cfg,
        "# shared run settings\nseed = 3\nstarts = 2\nnonnegative = true\nfraction = 0.3  # validate only\n",
    )
    .unwrap();
    let c = path_str(&cfg);
    let d = path_str(&data);
    let from_config: Value = serde_json::from_str(&ok(&[
        "--config", c, "fit", "--data", d, "--model", "gaussian", "--json",
    ]))
    .unwrap();
    assert_eq!(from_config["seed"], 3);
    assert_eq!(from_config["result"]["plausibility"]["require_nonnegative"], true);
    let overridden: Value = serde_json::from_str(&ok(&[
        "--config", c, "fit", "--data", d, "--model", "gaussian", "--seed", "5", "--json",
    ]))
    .unwrap();
    assert_eq!(overridden["seed"], 5);
    // the config file is an input too
    assert_eq!(from_config["inputs"].as_array().unwrap().len(), 2);

    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    assert_eq!(
        minefit(&["--config", c, "describe", "--data", d]).status.code(),
        Some(1)
    );
}

#[test]
fn analyze_reports_loss_peak_and_band() {
    let tmp = TempDir::new().unwrap();
    let data = decline_csv(tmp.path(), "d.csv", 300, 3, 0.0);
    let out_dir = tmp.path().join("out");
    ok(&[
        "analyze",
        "--data",
        path_str(&data),
        "--model",
        "gaussian",
        "--domain",
        "0:50",
        "--ages",
        "30,40",
        "--with-model",
        "exp_decay",
        "--transform",
        "negated_derivative",
        "--out-dir",
        path_str(&out_dir),
    ]);
    let r = read_json(&out_dir.join("analyze.json"));
    let peak = r["result"]["loss_peak"]["age"].as_f64().unwrap();
    assert!((peak - 14.5).abs() < 0.3, "{peak}");
    assert_eq!(r["result"]["percent_remaining"].as_array().unwrap().len(), 2);
    let corr = r["result"]["correlation"]["r"].as_f64().unwrap();
    assert!(corr.abs() <= 1.0);
    let band = fs::read_to_string(out_dir.join("band.csv")).unwrap();
    assert_eq!(band.lines().next(), Some("x,lower,fit,upper"));
    assert_eq!(band.lines().count(), 201);
}
