//! Parametric model families and the registry that holds them.
//!
//! Every family implements [`Model`]: evaluation, analytic parameter
//! gradients, an optional analytic x-derivative, parameter bounds and a
//! data-driven starting guess. Families are shared as [`ModelSpec`]
//! (`Arc<dyn Model>`) and looked up by name in a [`Catalog`].

mod exponential;
mod guess;
mod peaked;
mod plausibility;
mod polynomial;
mod power;
mod rational;
mod sigmoidal;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub use guess::{linear_least_squares, Shape};
pub use plausibility::{check_plausibility, Plausibility, PlausibilityConfig};
pub use polynomial::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyClass {
    Polynomial,
    Exponential,
    Sigmoidal,
    Peaked,
    Rational,
    Power,
}

impl FamilyClass {
    pub const ALL: [FamilyClass; 6] = [
        FamilyClass::Polynomial,
        FamilyClass::Exponential,
        FamilyClass::Sigmoidal,
        FamilyClass::Peaked,
        FamilyClass::Rational,
        FamilyClass::Power,
    ];
}

impl fmt::Display for FamilyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyClass::Polynomial => "polynomial",
            FamilyClass::Exponential => "exponential",
            FamilyClass::Sigmoidal => "sigmoidal",
            FamilyClass::Peaked => "peaked",
            FamilyClass::Rational => "rational",
            FamilyClass::Power => "power",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for FamilyClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FamilyClass::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown family class `{s}`")))
    }
}

/// A named parameter with a closed interval (infinite ends allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ParamSpec {
    pub fn free(name: &str) -> Self {
        ParamSpec::bounded(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn bounded(name: &str, lower: f64, upper: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            lower,
            upper,
        }
    }

    pub fn at_least(name: &str, lower: f64) -> Self {
        ParamSpec::bounded(name, lower, f64::INFINITY)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    /// Nearest admissible value; NaN maps to the finite point closest to 1.
    pub fn project(&self, v: f64) -> f64 {
        if v.is_nan() {
            return 1.0f64.clamp(self.lower, self.upper);
        }
        v.clamp(self.lower, self.upper)
    }
}

/// A parametric model family `y = f(θ, x)`.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn family(&self) -> FamilyClass;

    fn params(&self) -> &[ParamSpec];

    fn n_params(&self) -> usize {
        self.params().len()
    }

    /// May return a non-finite value (pole, overflow, log of a negative).
    fn eval(&self, p: &[f64], x: f64) -> f64;

    /// Writes `∂f/∂θⱼ` into `out` (length `n_params`).
    fn grad(&self, p: &[f64], x: f64, out: &mut [f64]);

    /// Analytic `∂f/∂x`, when the family provides one.
    fn dydx(&self, _p: &[f64], _x: f64) -> Option<f64> {
        None
    }

    /// Heuristic start; callers project it into bounds.
    fn guess(&self, data: &Shape) -> Vec<f64>;
}

pub type ModelSpec = Arc<dyn Model>;

impl fmt::Debug for dyn Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name())
            .field("family", &self.family())
            .field("n_params", &self.n_params())
            .finish()
    }
}

/// Built-in family defined by plain functions.
pub(crate) struct Builtin {
    pub name: &'static str,
    pub class: FamilyClass,
    pub params: Vec<ParamSpec>,
    pub eval: fn(&[f64], f64) -> f64,
    pub grad: fn(&[f64], f64, &mut [f64]),
    pub dydx: Option<fn(&[f64], f64) -> f64>,
    pub guess: fn(&Shape) -> Vec<f64>,
}

impl Model for Builtin {
    fn name(&self) -> &str {
        self.name
    }
    fn family(&self) -> FamilyClass {
        self.class
    }
    fn params(&self) -> &[ParamSpec] {
        &self.params
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        (self.eval)(p, x)
    }
    fn grad(&self, p: &[f64], x: f64, out: &mut [f64]) {
        (self.grad)(p, x, out)
    }
    fn dydx(&self, p: &[f64], x: f64) -> Option<f64> {
        self.dydx.map(|f| f(p, x))
    }
    fn guess(&self, data: &Shape) -> Vec<f64> {
        (self.guess)(data)
    }
}

/// The built-in families, in catalog order.
pub fn catalog() -> Vec<ModelSpec> {
    let mut out: Vec<ModelSpec> = (0..=5).map(|d| Arc::new(Polynomial::new(d)) as ModelSpec).collect();
    for b in exponential::families()
        .into_iter()
        .chain(sigmoidal::families())
        .chain(peaked::families())
        .chain(rational::families())
        .chain(power::families())
    {
        out.push(Arc::new(b));
    }
    out
}

/// Name-indexed registry of model families. Iteration follows registration order.
#[derive(Clone, Default)]
pub struct Catalog {
    specs: Vec<ModelSpec>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut c = Catalog::new();
        for spec in catalog() {
            c.register(spec).expect("built-in names are unique");
        }
        c
    }

    pub fn register(&mut self, spec: ModelSpec) -> Result<()> {
        let name = spec.name().to_string();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateModel(name));
        }
        self.index.insert(name, self.specs.len());
        self.specs.push(spec);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&ModelSpec> {
        self.index
            .get(name)
            .map(|&i| &self.specs[i])
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn specs(&self) -> &[ModelSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Sub-catalog selected by model names or family-class names.
    pub fn select(&self, selectors: &[String]) -> Result<Catalog> {
        let mut out = Catalog::new();
        for spec in &self.specs {
            let hit = selectors
                .iter()
                .any(|s| s == spec.name() || s.parse::<FamilyClass>().is_ok_and(|c| c == spec.family()));
            if hit {
                out.register(spec.clone())?;
            }
        }
        for s in selectors {
            if s.parse::<FamilyClass>().is_err() && !self.index.contains_key(s) {
                return Err(Error::UnknownModel(s.clone()));
            }
        }
        Ok(out)
    }

    pub fn listing(&self) -> Vec<CatalogEntry> {
        self.specs.iter().map(|s| CatalogEntry::of(s.as_ref())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub name: String,
    /// `None` for an unbounded end.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// JSON-friendly description of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub n_params: usize,
    pub family_class: FamilyClass,
    pub bounds: Vec<ParamBound>,
}

impl CatalogEntry {
    pub fn of(m: &dyn Model) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        CatalogEntry {
            name: m.name().to_string(),
            n_params: m.n_params(),
            family_class: m.family(),
            bounds: m
                .params()
                .iter()
                .map(|p| ParamBound {
                    name: p.name.clone(),
                    lower: finite(p.lower),
                    upper: finite(p.upper),
                })
                .collect(),
        }
    }
}

fn check_arity(spec: &dyn Model, params: &[f64]) -> Result<()> {
    if params.len() != spec.n_params() {
        return Err(Error::invalid(format!(
            "{} takes {} parameters, got {}",
            spec.name(),
            spec.n_params(),
            params.len()
        )));
    }
    Ok(())
}

/// Model value at `x`; a non-finite value is reported as an error.
pub fn evaluate(spec: &dyn Model, params: &[f64], x: f64) -> Result<f64> {
    check_arity(spec, params)?;
    let y = spec.eval(params, x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite(x))
    }
}

pub fn gradient(spec: &dyn Model, params: &[f64], x: f64) -> Result<Vec<f64>> {
    check_arity(spec, params)?;
    let mut g = vec![0.0; spec.n_params()];
    spec.grad(params, x, &mut g);
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(Error::NonFinite(x))
    }
}

/// Projects `params` into the family's bounds.
pub fn project(spec: &dyn Model, params: &mut [f64]) {
    for (v, b) in params.iter_mut().zip(spec.params()) {
        *v = b.project(*v);
    }
}

/// Data-driven starting parameters, always finite and within bounds.
pub fn initial_guess(spec: &dyn Model, d: &Dataset) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if d.len() < spec.n_params() {
        return Err(Error::Underdetermined {
            points: d.len(),
            params: spec.n_params(),
        });
    }
    let shape = Shape::of(d);
    let mut p = spec.guess(&shape);
    p.resize(spec.n_params(), 1.0);
    for (v, b) in p.iter_mut().zip(spec.params()) {
        if !v.is_finite() {
            *v = f64::NAN;
        }
        *v = b.project(*v);
    }
    Ok(p)
}
