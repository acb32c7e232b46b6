use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{multi_start, FitOptions, FitResult};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{check_plausibility, FamilyClass, ModelSpec, PlausibilityConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOptions {
    pub fit: FitOptions,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            fit: FitOptions::default(),
            n_starts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub spec_name: String,
    pub family_class: FamilyClass,
    pub n_params: usize,
    /// `None` when the family could not be fitted at all.
    pub fit: Option<FitResult>,
    pub plausible: bool,
    pub reason: String,
}

impl RankEntry {
    pub fn r2(&self) -> Option<f64> {
        self.fit.as_ref().and_then(|f| f.r2)
    }

    fn usable(&self) -> bool {
        self.fit.as_ref().is_some_and(|f| f.converged) && self.r2().is_some()
    }
}

/// Catalog leaderboard for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFits {
    pub dataset_label: String,
    pub n_points: usize,
    pub seed: u64,
    pub plausibility: PlausibilityConfig,
    /// Plausible fits first (r² descending), then implausible, then failures.
    pub entries: Vec<RankEntry>,
    /// Name of the best plausible fit; `None` when nothing qualifies.
    pub gold_standard: Option<String>,
}

impl RankedFits {
    pub fn best(&self) -> Option<&RankEntry> {
        let name = self.gold_standard.as_ref()?;
        self.entries.iter().find(|e| &e.spec_name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("leaderboard serializes")
    }

    pub fn leaderboard(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "dataset: {}  points: {}  seed: {}",
            self.dataset_label, self.n_points, self.seed
        );
        let _ = writeln!(
            s,
            "gold standard: {}",
            self.gold_standard
                .as_deref()
                .unwrap_or("none (no plausible converged fit)")
        );
        let _ = writeln!(
            s,
            "{:>4}  {:<26} {:>3} {:>12}  {:<5}  reason",
            "rank", "model", "k", "r2", "ok"
        );
        for (i, e) in self.entries.iter().enumerate() {
            let r2 = e.r2().map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
            let ok = if e.plausible { "yes" } else { "no" };
            let _ = writeln!(
                s,
                "{:>4}  {:<26} {:>3} {:>12}  {:<5}  {}",
                i + 1,
                e.spec_name,
                e.n_params,
                r2,
                ok,
                e.reason
            );
        }
        s
    }
}

/// r² rounded to 12 decimals so near-identical fits tie and fall through
/// to the parameter-count rule.
fn r2_key(e: &RankEntry) -> i64 {
    e.r2().map_or(i64::MIN, |v| (v * 1e12).round() as i64)
}

fn tier(e: &RankEntry) -> u8 {
    match (e.plausible, e.usable()) {
        (true, _) => 0,
        (false, true) => 1,
        (false, false) => 2,
    }
}

fn order(a: &RankEntry, b: &RankEntry) -> Ordering {
    tier(a)
        .cmp(&tier(b))
        .then_with(|| r2_key(b).cmp(&r2_key(a)))
        .then_with(|| a.n_params.cmp(&b.n_params))
        .then_with(|| a.spec_name.cmp(&b.spec_name))
}

fn evaluate_spec(spec: &ModelSpec, d: &Dataset, plaus: &PlausibilityConfig, opts: &RankOptions) -> Result<RankEntry> {
    let seed = rng::derive_seed_for(opts.seed, spec.name());
    let mut entry = RankEntry {
        spec_name: spec.name().to_string(),
        family_class: spec.family(),
        n_params: spec.n_params(),
        fit: None,
        plausible: false,
        reason: String::new(),
    };
    let fit = match multi_start(spec.as_ref(), d, opts.n_starts, seed, &opts.fit) {
        Ok(f) => f,
        Err(e) => {
            entry.reason = format!("not fitted: {e}");
            return Ok(entry);
        }
    };
    if !fit.converged {
        entry.reason = format!("did not converge ({:?})", fit.termination);
    } else if fit.r2.is_none() {
        entry.reason = "r² undefined".into();
    } else {
        let p = check_plausibility(spec.as_ref(), &fit.params, plaus)?;
        entry.plausible = p.plausible;
        entry.reason = p.reason;
    }
    entry.fit = Some(fit);
    Ok(entry)
}

/// Fits every spec (multi-start), tags plausibility and sorts: plausible
/// fits by r² descending, ties by fewer parameters then name. The head of
/// the plausible block is the gold standard.
pub fn rank_all(
    specs: &[ModelSpec],
    d: &Dataset,
    plaus: &PlausibilityConfig,
    opts: &RankOptions,
) -> Result<RankedFits> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut entries = specs
        .par_iter()
        .map(|s| evaluate_spec(s, d, plaus, opts))
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(order);
    let gold_standard = entries.first().filter(|e| e.plausible).map(|e| e.spec_name.clone());
    Ok(RankedFits {
        dataset_label: d.label().to_string(),
        n_points: d.len(),
        seed: opts.seed,
        plausibility: plaus.clone(),
        entries,
        gold_standard,
    })
}
