//! Per-study datapoints with provenance, unit normalization and merging.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Earliest admissible age in years. Negative ages are pre-birth.
pub const MIN_AGE: f64 = -1.0;

/// One observation: a value `y` measured at age `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub unit: String,
    pub study_id: String,
    pub assay_id: Option<String>,
    pub weight: Option<f64>,
}

impl DataPoint {
    pub fn new(study_id: impl Into<String>, x: f64, y: f64) -> Self {
        DataPoint {
            x,
            y,
            unit: String::new(),
            study_id: study_id.into(),
            assay_id: None,
            weight: None,
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_assay(mut self, assay: impl Into<String>) -> Self {
        self.assay_id = Some(assay.into());
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.weight = Some(w);
        self
    }

    /// Effective weight, 1.0 unless set.
    pub fn weight(&self) -> f64 {
        self.weight.unwrap_or(1.0)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.x.is_finite() {
            return Err(format!("age {} is not finite", self.x));
        }
        if self.x < MIN_AGE {
            return Err(format!("age {} precedes conception (< {MIN_AGE})", self.x));
        }
        if !self.y.is_finite() || self.y < 0.0 {
            return Err(format!("value {} must be finite and nonnegative", self.y));
        }
        if let Some(w) = self.weight {
            if !(w.is_finite() && w > 0.0) {
                return Err(format!("weight {w} must be positive"));
            }
        }
        if self.study_id.is_empty() {
            return Err("empty study id".into());
        }
        Ok(())
    }
}

/// Identifying metadata supplied by the user (not derived from points).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyInfo {
    pub first_author: String,
    pub year: Option<i32>,
}

impl StudyInfo {
    /// Two infos conflict when both set a field to different values.
    fn conflicts_with(&self, other: &StudyInfo) -> bool {
        let author =
            !self.first_author.is_empty() && !other.first_author.is_empty() && self.first_author != other.first_author;
        let year = matches!((self.year, other.year), (Some(a), Some(b)) if a != b);
        author || year
    }

    fn fill_from(&mut self, other: &StudyInfo) {
        if self.first_author.is_empty() {
            self.first_author = other.first_author.clone();
        }
        if self.year.is_none() {
            self.year = other.year;
        }
    }
}

/// Table-1 style study descriptor. Counts and ages are always computed
/// from the points currently in the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMeta {
    pub study_id: String,
    pub first_author: String,
    pub year: Option<i32>,
    pub n_observations: usize,
    pub min_age: f64,
    pub max_age: f64,
    pub median_age: f64,
}

/// Immutable collection of points plus the studies they come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    label: String,
    points: Vec<DataPoint>,
    studies: BTreeMap<String, StudyMeta>,
}

impl Dataset {
    pub fn empty(label: impl Into<String>) -> Self {
        Dataset {
            label: label.into(),
            points: Vec::new(),
            studies: BTreeMap::new(),
        }
    }

    /// Builds a dataset, validating every point and synthesizing study metadata.
    pub fn from_points(label: impl Into<String>, points: Vec<DataPoint>) -> Result<Self> {
        Self::build(label.into(), points, &BTreeMap::new())
    }

    fn build(label: String, points: Vec<DataPoint>, info: &BTreeMap<String, StudyInfo>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            p.validate().map_err(|message| Error::BadRow { row: i + 1, message })?;
        }
        let mut ages: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for p in &points {
            ages.entry(p.study_id.as_str()).or_default().push(p.x);
        }
        let studies = ages
            .into_iter()
            .map(|(id, xs)| {
                let d = Descriptives::of(&xs).expect("study has at least one point");
                let inf = info.get(id).cloned().unwrap_or_default();
                let meta = StudyMeta {
                    study_id: id.to_string(),
                    first_author: inf.first_author,
                    year: inf.year,
                    n_observations: d.count,
                    min_age: d.min,
                    max_age: d.max,
                    median_age: d.median,
                };
                (id.to_string(), meta)
            })
            .collect();
        Ok(Dataset { label, points, studies })
    }

    fn info(&self) -> BTreeMap<String, StudyInfo> {
        self.studies
            .iter()
            .map(|(id, m)| {
                let inf = StudyInfo {
                    first_author: m.first_author.clone(),
                    year: m.year,
                };
                (id.clone(), inf)
            })
            .collect()
    }

    /// Attaches author/year metadata. Every key must name a study present in the dataset.
    pub fn with_study_info(&self, info: &BTreeMap<String, StudyInfo>) -> Result<Self> {
        if let Some(unknown) = info.keys().find(|k| !self.studies.contains_key(*k)) {
            return Err(Error::UnknownStudy(unknown.clone()));
        }
        let mut merged = self.info();
        for (id, inf) in info {
            merged.insert(id.clone(), inf.clone());
        }
        Self::build(self.label.clone(), self.points.clone(), &merged)
    }

    pub fn relabel(&self, label: impl Into<String>) -> Self {
        Dataset {
            label: label.into(),
            ..self.clone()
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn studies(&self) -> &BTreeMap<String, StudyMeta> {
        &self.studies
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.points.iter().map(DataPoint::weight).collect()
    }

    /// Keeps the points at `indices`, in that order.
    pub fn subset(&self, label: impl Into<String>, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i].clone()).collect();
        Self::build(label.into(), points, &self.info())
    }

    /// Same points with every `y` transformed by `f`.
    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| DataPoint { y: f(p.y), ..p.clone() })
            .collect();
        Self::build(self.label.clone(), points, &self.info())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            other => Err(Error::invalid(format!("axis must be x or y, got `{other}`"))),
        }
    }
}

/// Order and moment statistics of one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub sd: f64,
}

impl Descriptives {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Ok(Descriptives {
            count: n,
            min: sorted[0],
            max: sorted[n - 1],
            median,
            mean,
            sd,
        })
    }
}

pub fn describe(d: &Dataset, axis: Axis) -> Result<Descriptives> {
    match axis {
        Axis::X => Descriptives::of(&d.xs()),
        Axis::Y => Descriptives::of(&d.ys()),
    }
}

/// Header names for the point CSV columns.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub study_id: String,
    pub x: String,
    pub y: String,
    pub unit: String,
    pub assay_id: String,
    pub weight: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            study_id: "study_id".into(),
            x: "x".into(),
            y: "y".into(),
            unit: "unit".into(),
            assay_id: "assay_id".into(),
            weight: "weight".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub label: String,
    /// Drop invalid rows and report them instead of failing.
    pub skip_bad_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RejectedRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rejected: Vec<RejectedRow>,
}

/// Reads a point CSV. Rows keep their source order.
pub fn ingest_csv<R: Read>(source: R, schema: &CsvSchema, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| col(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let c_study = required(&schema.study_id)?;
    let c_x = required(&schema.x)?;
    let c_y = required(&schema.y)?;
    let c_unit = col(&schema.unit);
    let c_assay = col(&schema.assay_id);
    let c_weight = col(&schema.weight);

    let mut points = Vec::new();
    let mut rejected = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |c: Option<usize>| c.and_then(|i| rec.get(i)).filter(|s| !s.is_empty());
        let number = |c: usize, what: &str| -> std::result::Result<f64, String> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| format!("{what} `{raw}` is not a number"))
        };
        let parsed = (|| {
            let mut p = DataPoint::new(rec.get(c_study).unwrap_or(""), number(c_x, "x")?, number(c_y, "y")?);
            if let Some(u) = cell(c_unit) {
                p.unit = u.to_string();
            }
            p.assay_id = cell(c_assay).map(str::to_string);
            if let Some(w) = c_weight.filter(|_| cell(c_weight).is_some()) {
                p.weight = Some(number(w, "weight")?);
            }
            p.validate()?;
            Ok::<_, String>(p)
        })();
        match parsed {
            Ok(p) => points.push(p),
            Err(message) if opts.skip_bad_rows => rejected.push(RejectedRow { line, message }),
            Err(message) => {
                return Err(Error::BadRow {
                    row: line as usize,
                    message,
                })
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(Ingested {
        dataset: Dataset::from_points(opts.label.clone(), points)?,
        rejected,
    })
}

/// Writes the canonical point CSV (all six columns).
pub fn write_csv<W: Write>(d: &Dataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["study_id", "x", "y", "unit", "assay_id", "weight"])?;
    for p in d.points() {
        w.write_record([
            p.study_id.clone(),
            p.x.to_string(),
            p.y.to_string(),
            p.unit.clone(),
            p.assay_id.clone().unwrap_or_default(),
            p.weight.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `study_id,first_author,year`.
pub fn read_study_info<R: Read>(source: R) -> Result<BTreeMap<String, StudyInfo>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (c_id, c_author, c_year) = (col("study_id")?, col("first_author")?, col("year")?);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) as usize;
        let year = match rec.get(c_year).unwrap_or("") {
            "" => None,
            raw => Some(raw.parse::<i32>().map_err(|_| Error::BadRow {
                row: line,
                message: format!("year `{raw}` is not an integer"),
            })?),
        };
        out.insert(
            rec.get(c_id).unwrap_or("").to_string(),
            StudyInfo {
                first_author: rec.get(c_author).unwrap_or("").to_string(),
                year,
            },
        );
    }
    Ok(out)
}

/// Alias table: label → (canonical label, multiplicative factor).
///
/// Used both for units (`ng/ml = µg/l,1`) and for plain synonyms such as
/// assay or analyte names, where the factor is ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct UnitTable {
    entries: BTreeMap<String, (String, f64)>,
}

impl UnitTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: &str, canonical: &str, factor: f64) -> Result<()> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!("factor for `{alias}` must be positive")));
        }
        if alias == canonical && factor != 1.0 {
            return Err(Error::invalid(format!(
                "canonical `{alias}` must map to itself with factor 1"
            )));
        }
        if let Some((c, _)) = self.entries.get(canonical) {
            if c != canonical {
                return Err(Error::invalid(format!("`{canonical}` is already an alias of `{c}`")));
            }
        }
        if self.entries.get(alias).is_some_and(|(c, _)| c == alias) && alias != canonical {
            return Err(Error::invalid(format!("`{alias}` is already canonical")));
        }
        self.entries.insert(alias.to_string(), (canonical.to_string(), factor));
        self.entries
            .entry(canonical.to_string())
            .or_insert_with(|| (canonical.to_string(), 1.0));
        Ok(())
    }

    /// Parses `alias = canonical,factor` lines; `#` starts a comment and a
    /// missing factor means 1.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = UnitTable::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::AliasTable { line: i + 1, message };
            let (alias, rhs) = line
                .split_once('=')
                .ok_or_else(|| err("expected `alias = canonical,factor`".into()))?;
            let (canonical, factor) = match rhs.split_once(',') {
                Some((c, f)) => {
                    let f = f.trim();
                    let f = f.parse::<f64>().map_err(|_| err(format!("bad factor `{f}`")))?;
                    (c.trim(), f)
                }
                None => (rhs.trim(), 1.0),
            };
            let alias = alias.trim();
            if alias.is_empty() || canonical.is_empty() {
                return Err(err("empty label".into()));
            }
            t.insert(alias, canonical, factor).map_err(|e| err(e.to_string()))?;
        }
        Ok(t)
    }

    pub fn resolve(&self, label: &str) -> Result<(&str, f64)> {
        self.entries
            .get(label)
            .map(|(c, f)| (c.as_str(), *f))
            .ok_or_else(|| Error::UnknownUnit(label.to_string()))
    }

    /// Canonical form of a synonym, or the label itself when unlisted.
    pub fn canonical<'a>(&'a self, label: &'a str) -> &'a str {
        self.entries.get(label).map_or(label, |(c, _)| c.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.entries.iter().map(|(a, (c, f))| (a.as_str(), c.as_str(), *f))
    }
}

/// Rewrites every unit label to its canonical form and rescales `y`.
pub fn normalize_units(d: &Dataset, t: &UnitTable) -> Result<Dataset> {
    let points = d
        .points()
        .iter()
        .map(|p| {
            let (canonical, factor) = t.resolve(&p.unit)?;
            Ok(DataPoint {
                y: p.y * factor,
                unit: canonical.to_string(),
                ..p.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::build(d.label.clone(), points, &d.info())
}

/// Maps assay labels through a synonym table. Unlisted labels pass through.
pub fn normalize_assays(d: &Dataset, t: &UnitTable) -> Result<Dataset> {
    let points = d
        .points()
        .iter()
        .map(|p| DataPoint {
            assay_id: p.assay_id.as_deref().map(|a| t.canonical(a).to_string()),
            ..p.clone()
        })
        .collect();
    Dataset::build(d.label.clone(), points, &d.info())
}

/// Concatenates datasets in order. Study metadata is recomputed from the
/// union of points; author/year must agree wherever both sides set them.
pub fn merge(ds: &[Dataset], label: impl Into<String>) -> Result<Dataset> {
    let mut info: BTreeMap<String, StudyInfo> = BTreeMap::new();
    let mut points = Vec::with_capacity(ds.iter().map(Dataset::len).sum());
    for d in ds {
        for (id, inf) in d.info() {
            match info.get_mut(&id) {
                Some(existing) if existing.conflicts_with(&inf) => {
                    return Err(Error::StudyConflict(id));
                }
                Some(existing) => existing.fill_from(&inf),
                None => {
                    info.insert(id, inf);
                }
            }
        }
        points.extend_from_slice(d.points());
    }
    Dataset::build(label.into(), points, &info)
}

/// Partitions points by assay id.
pub fn split_by_assay(d: &Dataset) -> Result<BTreeMap<String, Dataset>> {
    let missing: BTreeSet<&str> = d
        .points()
        .iter()
        .filter(|p| p.assay_id.is_none())
        .map(|p| p.study_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingAssay(missing.into_iter().collect::<Vec<_>>().join(", ")));
    }
    let mut groups: BTreeMap<String, Vec<DataPoint>> = BTreeMap::new();
    for p in d.points() {
        groups
            .entry(p.assay_id.clone().unwrap_or_default())
            .or_default()
            .push(p.clone());
    }
    let info = d.info();
    groups
        .into_iter()
        .map(|(assay, pts)| {
            let label = format!("{}[{}]", d.label, assay);
            Ok((assay, Dataset::build(label, pts, &info)?))
        })
        .collect()
}
