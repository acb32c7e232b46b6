//! `minefit`: ingest mined datapoints, reconstruct microdata, fit and rank
//! model catalogs, validate, analyze and plot.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use minefit::analyze::{
    cross_correlation, monthly_grid, monthly_loss, peak_age, percent_remaining, prediction_band, CorrelationReport,
    IntervalBand, Peak, Reference, Transform,
};
use minefit::dataset::{
    self, describe, ingest_csv, merge, normalize_assays, normalize_units, read_study_info, split_by_assay, Axis,
    CsvSchema, Dataset, Descriptives, IngestOptions, StudyMeta, UnitTable,
};
use minefit::fit::{multi_start, rank_all, FitOptions, FitResult, RankOptions, RankedFits};
use minefit::models::{check_plausibility, Catalog, Model, PlausibilityConfig};
use minefit::plot::{render_svg, Curve, PlotOptions};
use minefit::rng::derive_seed_for;
use minefit::synth::{read_summary_csv, replicate, SynthOptions, Z_ONE_SIDED_95};
use minefit::validate::{
    compare_descriptives, holdout_validate, split, AgreementMetric, SimilarityReport, ValidationReport,
};

use report::{Inputs, Output};

#[derive(Parser)]
#[command(
    name = "minefit",
    version,
    about = "Fit and rank parametric models on mined datapoints"
)]
struct Cli {
    /// `key = value` defaults for the subcommand's flags; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed, echoed in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write `<command>.json`, `<command>.txt` and artifacts here.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load, normalize and merge point CSVs.
    Ingest(IngestArgs),
    /// Descriptive statistics and the study table.
    Describe(DataOnly),
    /// Reconstruct microdata from summary rows.
    Synth(SynthArgs),
    /// Fit one model.
    Fit(FitArgs),
    /// Fit the catalog and rank by r², plausible models first.
    Rank(RankArgs),
    /// Hold-out validation of a fitted model.
    Validate(ValidateArgs),
    /// Peak loss, percent remaining, prediction band and correlation.
    Analyze(AnalyzeArgs),
    /// Scatter plot with optional fitted curve and band, as SVG.
    Plot(PlotArgs),
}

/// Options shared by every command that reads point CSVs.
#[derive(Args, Clone)]
struct Prep {
    /// Unit table (`alias = canonical,factor`).
    #[arg(long, value_name = "FILE")]
    units: Option<PathBuf>,
    /// Assay synonym table, same format as the unit table.
    #[arg(long, value_name = "FILE")]
    assays: Option<PathBuf>,
    /// Study metadata CSV (`study_id,first_author,year`).
    #[arg(long, value_name = "FILE")]
    studies: Option<PathBuf>,
    /// Keep only points of this assay (after synonym normalization).
    #[arg(long)]
    assay: Option<String>,
    /// Drop malformed rows and report them instead of failing.
    #[arg(long)]
    skip_bad_rows: bool,
}

#[derive(Args)]
struct DataOnly {
    /// Point CSV; repeat or comma-separate to merge several.
    #[arg(long, required = true, value_delimiter = ',', value_name = "FILE")]
    data: Vec<PathBuf>,
    #[command(flatten)]
    prep: Prep,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: DataOnly,
    /// Also write the merged dataset as CSV.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Summary CSV (`x,n,mean,sd,upper_pl95,family`).
    #[arg(long, value_name = "FILE")]
    summary: PathBuf,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Multiplier turning an upper prediction limit into an sd.
    #[arg(long, default_value_t = Z_ONE_SIDED_95)]
    z: f64,
    /// Force sample moments of every row onto the targets.
    #[arg(long)]
    moment_correct: bool,
    #[arg(long)]
    allow_repeated_ages: bool,
}

#[derive(Args, Clone)]
struct Fitting {
    /// Random restarts per model (start 0 is the heuristic guess).
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = FitOptions::default().max_iterations)]
    max_iterations: usize,
}

impl Fitting {
    fn options(&self) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            ..FitOptions::default()
        }
    }
}

#[derive(Args, Clone)]
struct Plaus {
    /// Age interval `lo:hi` checked for plausibility (default: data range).
    #[arg(long, value_parser = parse_range, value_name = "LO:HI")]
    domain: Option<(f64, f64)>,
    /// Reject curves that dip below zero on the domain.
    #[arg(long)]
    nonnegative: bool,
    /// Upper limit on slope sign changes across the domain.
    #[arg(long)]
    max_sign_changes: Option<usize>,
    #[arg(long, default_value_t = PlausibilityConfig::new((0.0, 1.0)).grid)]
    grid: usize,
}

impl Plaus {
    fn config(&self, d: &Dataset) -> Result<PlausibilityConfig> {
        let domain = match self.domain {
            Some(r) => r,
            None => data_range(d)?,
        };
        let mut cfg = PlausibilityConfig::new(domain)
            .nonnegative(self.nonnegative)
            .max_sign_changes(self.max_sign_changes);
        cfg.grid = self.grid;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: DataOnly,
    #[arg(long)]
    model: String,
    #[command(flatten)]
    fitting: Fitting,
    #[command(flatten)]
    plaus: Plaus,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    input: DataOnly,
    /// Model names or family classes, comma-separated (default: all).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[command(flatten)]
    fitting: Fitting,
    #[command(flatten)]
    plaus: Plaus,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Ratio,
    AbsoluteDifference,
}

impl From<Metric> for AgreementMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Ratio => AgreementMetric::Ratio,
            Metric::AbsoluteDifference => AgreementMetric::AbsoluteDifference,
        }
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(
        long,
        value_delimiter = ',',
        requires = "test",
        conflicts_with = "data",
        value_name = "FILE"
    )]
    train: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', requires = "train", value_name = "FILE")]
    test: Vec<PathBuf>,
    /// Single dataset to split instead of `--train`/`--test`.
    #[arg(long, value_delimiter = ',', required_unless_present = "train", value_name = "FILE")]
    data: Vec<PathBuf>,
    /// Training share when splitting `--data`.
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Equal-width age bins for a stratified split (0 = plain random).
    #[arg(long, default_value_t = 0)]
    stratify: usize,
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value_t = Metric::Ratio)]
    metric: Metric,
    /// Also compare train and test descriptives at this relative tolerance.
    #[arg(long)]
    similarity_tolerance: Option<f64>,
    #[command(flatten)]
    fitting: Fitting,
    #[command(flatten)]
    prep: Prep,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: DataOnly,
    /// Model to analyze (default: the gold standard of a full ranking).
    #[arg(long)]
    model: Option<String>,
    #[command(flatten)]
    fitting: Fitting,
    #[command(flatten)]
    plaus: Plaus,
    /// Ages at which to report percent remaining.
    #[arg(long, value_delimiter = ',')]
    ages: Vec<f64>,
    /// Baseline for percent remaining: `peak` or an age.
    #[arg(long, default_value = "peak")]
    reference: String,
    /// Prediction band level.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 200)]
    band_points: usize,
    /// Second dataset to correlate against.
    #[arg(long, value_delimiter = ',', requires = "with_model", value_name = "FILE")]
    with_data: Vec<PathBuf>,
    #[arg(long)]
    with_model: Option<String>,
    /// Transform of this model: value, derivative or negated_derivative.
    #[arg(long, default_value = "value")]
    transform: String,
    #[arg(long, default_value = "value")]
    with_transform: String,
    /// Age range for the correlation (default: the plausibility domain).
    #[arg(long, value_parser = parse_range, value_name = "LO:HI")]
    correlation_range: Option<(f64, f64)>,
    /// Correlation grid size (default: monthly).
    #[arg(long)]
    correlation_grid: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    input: DataOnly,
    /// Fit and draw this model; omit for a scatter-only plot.
    #[arg(long)]
    model: Option<String>,
    /// Draw a prediction band at this level (needs `--model`).
    #[arg(long, requires = "model")]
    band: Option<f64>,
    #[command(flatten)]
    fitting: Fitting,
    /// SVG destination.
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    #[arg(long, default_value = "")]
    title: String,
    #[arg(long, default_value = "y")]
    y_label: String,
    #[arg(long, default_value_t = 800.0)]
    width: f64,
    #[arg(long, default_value_t = 500.0)]
    height: f64,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("need finite LO < HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn data_range(d: &Dataset) -> Result<(f64, f64)> {
    let x = describe(d, Axis::X)?;
    if x.min == x.max {
        bail!("data span a single age; pass --domain");
    }
    Ok((x.min, x.max))
}

#[derive(Serialize)]
struct RejectedInFile {
    file: String,
    line: u64,
    message: String,
}

fn load(paths: &[PathBuf], prep: &Prep, inputs: &mut Inputs) -> Result<(Dataset, Vec<RejectedInFile>)> {
    let mut sets = Vec::new();
    let mut rejected = Vec::new();
    for path in paths {
        let bytes = inputs.read(path)?;
        let label = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let opts = IngestOptions {
            label,
            skip_bad_rows: prep.skip_bad_rows,
        };
        let ing =
            ingest_csv(&bytes[..], &CsvSchema::default(), &opts).with_context(|| format!("in {}", path.display()))?;
        rejected.extend(ing.rejected.into_iter().map(|r| RejectedInFile {
            file: path.display().to_string(),
            line: r.line,
            message: r.message,
        }));
        sets.push(ing.dataset);
    }
    let mut d = match sets.len() {
        0 => bail!("no data files given"),
        1 => sets.pop().expect("one set"),
        _ => {
            let label = sets.iter().map(|s| s.label()).collect::<Vec<_>>().join("+");
            merge(&sets, label)?
        }
    };
    if let Some(p) = &prep.studies {
        let info = read_study_info(&inputs.read(p)?[..]).with_context(|| format!("in {}", p.display()))?;
        d = d.with_study_info(&info)?;
    }
    if let Some(p) = &prep.units {
        let t = UnitTable::parse(&inputs.read_string(p)?).with_context(|| format!("in {}", p.display()))?;
        d = normalize_units(&d, &t)?;
    }
    if let Some(p) = &prep.assays {
        let t = UnitTable::parse(&inputs.read_string(p)?).with_context(|| format!("in {}", p.display()))?;
        d = normalize_assays(&d, &t)?;
    }
    if let Some(name) = &prep.assay {
        let mut by = split_by_assay(&d)?;
        let known = by.keys().cloned().collect::<Vec<_>>().join(", ");
        d = by
            .remove(name)
            .ok_or_else(|| anyhow!("no assay `{name}` in data (have: {known})"))?;
    }
    Ok((d, rejected))
}

fn lookup<'c>(catalog: &'c Catalog, name: &str) -> Result<&'c dyn Model> {
    Ok(catalog.get(name)?.as_ref())
}

/// Multi-start fit seeded per model exactly as `rank` seeds it, so a single
/// fit reproduces the corresponding leaderboard row.
fn fit_one(spec: &dyn Model, d: &Dataset, fitting: &Fitting, seed: u64) -> Result<FitResult> {
    Ok(multi_start(
        spec,
        d,
        fitting.starts,
        derive_seed_for(seed, spec.name()),
        &fitting.options(),
    )?)
}

fn params_text(spec: &dyn Model, params: &[f64]) -> String {
    spec.params()
        .iter()
        .zip(params)
        .map(|(p, v)| format!("  {} = {v:.6}\n", p.name))
        .collect()
}

fn study_table(studies: &BTreeMap<String, StudyMeta>) -> String {
    let mut s = format!(
        "{:<16} {:<20} {:>6} {:>6} {:>8} {:>8} {:>8}\n",
        "study", "author", "year", "n", "min", "max", "median"
    );
    for m in studies.values() {
        let year = m.year.map_or_else(|| "-".to_string(), |y| y.to_string());
        let _ = writeln!(
            s,
            "{:<16} {:<20} {:>6} {:>6} {:>8.2} {:>8.2} {:>8.2}",
            m.study_id, m.first_author, year, m.n_observations, m.min_age, m.max_age, m.median_age
        );
    }
    s
}

fn descriptives_line(name: &str, d: &Descriptives) -> String {
    format!(
        "{name}: n {} min {:.4} max {:.4} median {:.4} mean {:.4} sd {:.4}\n",
        d.count, d.min, d.max, d.median, d.mean, d.sd
    )
}

#[derive(Serialize)]
struct IngestResult<'a> {
    label: &'a str,
    n_points: usize,
    studies: Vec<&'a StudyMeta>,
    rejected: &'a [RejectedInFile],
}

fn ingest(a: &IngestArgs, seed: u64, inputs: &mut Inputs) -> Result<Output> {
    let (d, rejected) = load(&a.input.data, &a.input.prep, inputs)?;
    let result = IngestResult {
        label: d.label(),
        n_points: d.len(),
        studies: d.studies().values().collect(),
        rejected: &rejected,
    };
    let mut text = format!("{}: {} points from {} studies\n", d.label(), d.len(), d.studies().len());
    text.push_str(&study_table(d.studies()));
    for r in &rejected {
        let _ = writeln!(text, "skipped {} line {}: {}", r.file, r.line, r.message);
    }
    let mut csv = Vec::new();
    dataset::write_csv(&d, &mut csv)?;
    let mut out = report::render("ingest", seed, inputs, &result, text)?;
    if let Some(p) = &a.output {
        write_file(p, &csv)?;
    }
    out.artifacts.push(("dataset.csv".into(), csv));
    Ok(out)
}

#[derive(Serialize)]
struct DescribeResult<'a> {
    label: &'a str,
    x: Descriptives,
    y: Descriptives,
    studies: Vec<&'a StudyMeta>,
}

fn describe_cmd(a: &DataOnly, seed: u64, inputs: &mut Inputs) -> Result<Output> {
    let (d, _) = load(&a.data, &a.prep, inputs)?;
    let result = DescribeResult {
        label: d.label(),
        x: describe(&d, Axis::X)?,
        y: describe(&d, Axis::Y)?,
        studies: d.studies().values().collect(),
    };
    let mut text = format!("{}\n", d.label());
    text.push_str(&descriptives_line("age", &result.x));
    text.push_str(&descriptives_line("y", &result.y));
    text.push_str(&study_table(d.studies()));
    report::render("describe", seed, inputs, &result, text)
}

#[derive(Serialize)]
struct SynthReplicate {
    file: String,
    n_points: usize,
    y: Descriptives,
}

#[derive(Serialize)]
struct SynthResult {
    options: SynthOptions,
    n_rows: usize,
    replicates: Vec<SynthReplicate>,
}

fn synth(a: &SynthArgs, seed: u64, out_dir: Option<&Path>, inputs: &mut Inputs) -> Result<Output> {
    if out_dir.is_none() {
        bail!("synth writes one CSV per replicate; pass --out-dir");
    }
    let rows =
        read_summary_csv(&inputs.read(&a.summary)?[..]).with_context(|| format!("in {}", a.summary.display()))?;
    let opts = SynthOptions {
        z: a.z,
        moment_correct: a.moment_correct,
        allow_repeated_ages: a.allow_repeated_ages,
    };
    let sets = replicate(&rows, seed, a.replicates, &opts)?;
    let mut artifacts = Vec::new();
    let mut reps = Vec::new();
    let mut text = String::new();
    for (i, d) in sets.iter().enumerate() {
        let file = format!("synthetic-{i}.csv");
        let mut csv = Vec::new();
        dataset::write_csv(d, &mut csv)?;
        let y = describe(d, Axis::Y)?;
        text.push_str(&descriptives_line(&file, &y));
        reps.push(SynthReplicate {
            file: file.clone(),
            n_points: d.len(),
            y,
        });
        artifacts.push((PathBuf::from(file), csv));
    }
    let result = SynthResult {
        options: opts,
        n_rows: rows.len(),
        replicates: reps,
    };
    let mut out = report::render("synth", seed, inputs, &result, text)?;
    out.artifacts = artifacts;
    Ok(out)
}

#[derive(Serialize)]
struct FitReport<'a> {
    dataset: &'a str,
    fit: &'a FitResult,
    plausible: bool,
    reason: String,
    plausibility: PlausibilityConfig,
}

fn fit_cmd(a: &FitArgs, seed: u64, inputs: &mut Inputs) -> Result<Output> {
    let (d, _) = load(&a.input.data, &a.input.prep, inputs)?;
    let catalog = Catalog::builtin();
    let spec = lookup(&catalog, &a.model)?;
    let fit = fit_one(spec, &d, &a.fitting, seed)?;
    let cfg = a.plaus.config(&d)?;
    let verdict = check_plausibility(spec, &fit.params, &cfg)?;
    let mut text = format!("{} on {} ({} points)\n", spec.name(), d.label(), d.len());
    text.push_str(&params_text(spec, &fit.params));
    let r2 = fit.r2.map_or_else(|| "undefined".to_string(), |r| format!("{r:.6}"));
    let _ = writeln!(
        text,
        "r2 {r2}  rss {:.6}  {:?} after {} iterations",
        fit.rss, fit.termination, fit.iterations
    );
    let _ = writeln!(text, "plausible: {} ({})", verdict.plausible, verdict.reason);
    let result = FitReport {
        dataset: d.label(),
        fit: &fit,
        plausible: verdict.plausible,
        reason: verdict.reason,
        plausibility: cfg,
    };
    report::render("fit", seed, inputs, &result, text)
}

fn rank_data(d: &Dataset, models: &[String], fitting: &Fitting, plaus: &Plaus, seed: u64) -> Result<RankedFits> {
    let catalog = Catalog::builtin();
    let catalog = if models.is_empty() {
        catalog
    } else {
        catalog.select(models)?
    };
    let opts = RankOptions {
        fit: fitting.options(),
        n_starts: fitting.starts,
        seed,
    };
    Ok(rank_all(catalog.specs(), d, &plaus.config(d)?, &opts)?)
}

fn rank_cmd(a: &RankArgs, seed: u64, inputs: &mut Inputs) -> Result<Output> {
    let (d, _) = load(&a.input.data, &a.input.prep, inputs)?;
    let ranked = rank_data(&d, &a.models, &a.fitting, &a.plaus, seed)?;
    report::render("rank", seed, inputs, &ranked, ranked.leaderboard())
}

#[derive(Serialize)]
struct ValidateResult {
    split: Option<SplitInfo>,
    validation: ValidationReport,
    similarity: Option<SimilarityReport>,
}

#[derive(Serialize)]
struct SplitInfo {
    fraction: f64,
    stratify_bins: usize,
}

fn validate_cmd(a: &ValidateArgs, seed: u64, inputs: &mut Inputs) -> Result<Output> {
    let (train, test, split_info) = if a.train.is_empty() {
        let (d, _) = load(&a.data, &a.prep, inputs)?;
        let (train, test) = split(&d, a.fraction, seed, a.stratify)?;
        let info = SplitInfo {
            fraction: a.fraction,
            stratify_bins: a.stratify,
        };
        (train, test, Some(info))
    } else {
        let (train, _) = load(&a.train, &a.prep, inputs)?;
        let (test, _) = load(&a.test, &a.prep, inputs)?;
        (train, test, None)
    };
    let catalog = Catalog::builtin();
    let spec = lookup(&catalog, &a.model)?;
    let fit = fit_one(spec, &train, &a.fitting, seed)?;
    let validation = holdout_validate(spec, &fit.params, &train, &test, a.metric.into())?;
    let similarity = match a.similarity_tolerance {
        Some(tol) => Some(compare_descriptives(&train, &test, tol)?),
        None => None,
    };
    let mut text = format!(
        "{} trained on {} ({}), tested on {} ({})\n",
        spec.name(),
        train.label(),
        train.len(),
        test.label(),
        test.len()
    );
    text.push_str(&params_text(spec, &fit.params));
    let agreement = validation
        .agreement
        .map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
    let _ = writeln!(
        text,
        "r2 train {:.6}  r2 test {:.6}  agreement ({:?}) {agreement}",
        validation.r2_train, validation.r2_test, validation.metric
    );
    if let Some(s) = &similarity {
        text.push_str(&s.to_table());
    }
    let result = ValidateResult {
        split: split_info,
        validation,
        similarity,
    };
    report::render("validate", seed, inputs, &result, text)
}

#[derive(Serialize)]
struct Remaining {
    age: f64,
    percent: f64,
}

#[derive(Serialize)]
struct AnalyzeResult {
    dataset: String,
    fit: FitResult,
    chosen_by_rank: bool,
    domain: (f64, f64),
    curve_peak: Peak,
    loss_peak: Peak,
    reference: Reference,
    percent_remaining: Vec<Remaining>,
    band: IntervalBand,
    correlation: Option<CorrelationReport>,
}

fn parse_reference(s: &str, domain: (f64, f64)) -> Result<Reference> {
    if s == "peak" {
        return Ok(Reference::Peak { domain });
    }
    let age: f64 = s
        .parse()
        .map_err(|_| anyhow!("--reference expects `peak` or an age, got `{s}`"))?;
    Ok(Reference::Age(age))
}

/// Uses `--model` when given, otherwise the ranking's gold standard.
fn choose_fit(
    d: &Dataset,
    model: Option<&str>,
    fitting: &Fitting,
    plaus: &Plaus,
    seed: u64,
) -> Result<(FitResult, bool)> {
    match model {
        Some(name) => {
            let catalog = Catalog::builtin();
            Ok((fit_one(lookup(&catalog, name)?, d, fitting, seed)?, false))
        }
        None => {
            let ranked = rank_data(d, &[], fitting, plaus, seed)?;
            let best = ranked
                .best()
                .ok_or_else(|| anyhow!("no plausible model; pass --model"))?;
            Ok((best.fit.clone().expect("gold standard has a fit"), true))
        }
    }
}

fn analyze_cmd(a: &AnalyzeArgs, seed: u64, inputs: &mut Inputs) -> Result<Output> {
    let (d, _) = load(&a.input.data, &a.input.prep, inputs)?;
    let (fit, chosen_by_rank) = choose_fit(&d, a.model.as_deref(), &a.fitting, &a.plaus, seed)?;
    let catalog = Catalog::builtin();
    let spec = lookup(&catalog, &fit.spec_name)?;
    let domain = a.plaus.config(&d)?.domain;
    let p = &fit.params;
    let grid = 512.max((12.0 * (domain.1 - domain.0)).ceil() as usize);
    let curve_peak = peak_age(|t| spec.eval(p, t), domain, grid)?;
    let loss_peak = peak_age(|t| monthly_loss(spec, p, t).unwrap_or(f64::NAN), domain, grid)?;
    let reference = parse_reference(&a.reference, domain)?;
    let percent = a
        .ages
        .iter()
        .map(|&age| {
            Ok(Remaining {
                age,
                percent: percent_remaining(spec, p, age, reference)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let band = prediction_band(spec, &fit, &d, a.level, a.band_points)?;

    let correlation = match &a.with_model {
        Some(other) => {
            let with_paths = if a.with_data.is_empty() {
                &a.input.data
            } else {
                &a.with_data
            };
            let (d2, _) = load(with_paths, &a.input.prep, inputs)?;
            let spec2 = lookup(&catalog, other)?;
            let fit2 = fit_one(spec2, &d2, &a.fitting, seed)?;
            let range = a.correlation_range.unwrap_or(domain);
            let n = a.correlation_grid.unwrap_or_else(|| monthly_grid(range));
            let ta: Transform = a.transform.parse()?;
            let tb: Transform = a.with_transform.parse()?;
            Some(cross_correlation((spec, p), (spec2, &fit2.params), ta, tb, range, n)?)
        }
        None => None,
    };

    let mut text = format!(
        "{} on {} ({} points){}\n",
        spec.name(),
        d.label(),
        d.len(),
        if chosen_by_rank { ", gold standard" } else { "" }
    );
    text.push_str(&params_text(spec, p));
    if let Some(r2) = fit.r2 {
        let _ = writeln!(text, "r2 {r2:.6}");
    }
    let _ = writeln!(
        text,
        "curve peak at age {:.3} (value {:.6})",
        curve_peak.age, curve_peak.value
    );
    let _ = writeln!(
        text,
        "peak monthly loss at age {:.3} ({:.6} per month)",
        loss_peak.age, loss_peak.value
    );
    for r in &percent {
        let _ = writeln!(text, "remaining at age {}: {:.4}%", r.age, r.percent);
    }
    let _ = writeln!(
        text,
        "{:.0}% band: fit ± {:.6} (residual sd {:.6}, z {:.4})",
        100.0 * band.level,
        band.half_width,
        band.residual_sd,
        band.z
    );
    if let Some(c) = &correlation {
        let _ = writeln!(
            text,
            "correlation {} ({:?}) vs {} ({:?}) over {:?}: r = {:.6} on {} points",
            c.model_a, c.transform_a, c.model_b, c.transform_b, c.age_range, c.r, c.grid_size
        );
    }
    let band_csv = band.to_csv().into_bytes();
    let result = AnalyzeResult {
        dataset: d.label().to_string(),
        fit,
        chosen_by_rank,
        domain,
        curve_peak,
        loss_peak,
        reference,
        percent_remaining: percent,
        band,
        correlation,
    };
    let mut out = report::render("analyze", seed, inputs, &result, text)?;
    out.artifacts.push(("band.csv".into(), band_csv));
    Ok(out)
}

#[derive(Serialize)]
struct PlotResult<'a> {
    output: String,
    n_points: usize,
    fit: Option<&'a FitResult>,
    band_level: Option<f64>,
}

fn plot_cmd(a: &PlotArgs, seed: u64, inputs: &mut Inputs) -> Result<(Output, Vec<u8>)> {
    let (d, _) = load(&a.input.data, &a.input.prep, inputs)?;
    let catalog = Catalog::builtin();
    let fitted = match &a.model {
        Some(name) => {
            let spec = lookup(&catalog, name)?;
            Some((spec, fit_one(spec, &d, &a.fitting, seed)?))
        }
        None => None,
    };
    let band = match (a.band, &fitted) {
        (Some(level), Some((spec, fit))) => Some(prediction_band(*spec, fit, &d, level, 200)?),
        _ => None,
    };
    let opts = PlotOptions {
        width: a.width,
        height: a.height,
        title: a.title.clone(),
        y_label: a.y_label.clone(),
        ..PlotOptions::default()
    };
    let curve = fitted.as_ref().map(|(spec, fit)| Curve {
        spec: *spec,
        params: &fit.params,
    });
    let svg = render_svg(&d, curve, band.as_ref(), &opts)?;
    let text = format!(
        "wrote {} ({} points{})\n",
        a.output.display(),
        d.len(),
        fitted
            .as_ref()
            .map_or(String::new(), |(s, _)| format!(", {}", s.name()))
    );
    let result = PlotResult {
        output: a.output.display().to_string(),
        n_points: d.len(),
        fit: fitted.as_ref().map(|(_, f)| f),
        band_level: band.as_ref().map(|b| b.level),
    };
    Ok((report::render("plot", seed, inputs, &result, text)?, svg.into_bytes()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let mut inputs = Inputs::default();
    if let Some(p) = &cli.config {
        inputs.read(p)?;
    }
    let seed = cli.seed;
    let (name, out) = match &cli.command {
        Cmd::Ingest(a) => ("ingest", ingest(a, seed, &mut inputs)?),
        Cmd::Describe(a) => ("describe", describe_cmd(a, seed, &mut inputs)?),
        Cmd::Synth(a) => ("synth", synth(a, seed, cli.out_dir.as_deref(), &mut inputs)?),
        Cmd::Fit(a) => ("fit", fit_cmd(a, seed, &mut inputs)?),
        Cmd::Rank(a) => ("rank", rank_cmd(a, seed, &mut inputs)?),
        Cmd::Validate(a) => ("validate", validate_cmd(a, seed, &mut inputs)?),
        Cmd::Analyze(a) => ("analyze", analyze_cmd(a, seed, &mut inputs)?),
        Cmd::Plot(a) => {
            let (out, svg) = plot_cmd(a, seed, &mut inputs)?;
            write_file(&a.output, &svg)?;
            ("plot", out)
        }
    };
    if let Some(dir) = &cli.out_dir {
        report::write_all(dir, name, &out)?;
    }
    print!("{}", if cli.json { &out.json } else { &out.text });
    Ok(())
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args_os().collect(), &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
