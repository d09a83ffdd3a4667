//! Coherence metrics over [`TupleRecord`]s.
//!
//! - BCC: Pearson correlation of Δ_expected and Δ_observed
//! - BCE: mean squared difference of the two
//! - update gradient: OLS slope of Δ_observed on Δ_expected, with intercept
//! - direction agreement: share of tuples whose deltas have the same sign
//!
//! Records with a non-finite delta are excluded and counted.

mod bins;
mod sweep;

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{AssemblyError, TupleRecord};
use crate::stats::{self, StatsError};
use crate::{Correlation, LinearFit, Scalar};

pub use bins::{binned_analysis, Bin, BinReport, Covariate, DEFAULT_BIN_COUNT};
pub use sweep::{scaling_correlation, temperature_sweep, ScalingPoint, SweepPoint};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("insufficient data: need at least {need} usable records, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

impl MetricsError {
    pub fn is_insufficient_data(&self) -> bool {
        matches!(
            self,
            MetricsError::InsufficientData { .. }
                | MetricsError::Stats(StatsError::InsufficientData { .. })
        )
    }
}

/// Finite (Δ_expected, Δ_observed) pairs and the number of records dropped.
pub struct Deltas {
    pub expected: Vec<Scalar>,
    pub observed: Vec<Scalar>,
    pub excluded: usize,
}

pub fn finite_deltas(records: &[TupleRecord]) -> Deltas {
    let mut expected = Vec::with_capacity(records.len());
    let mut observed = Vec::with_capacity(records.len());
    for r in records {
        if r.delta_expected.is_finite() && r.delta_observed.is_finite() {
            expected.push(r.delta_expected);
            observed.push(r.delta_observed);
        }
    }
    let excluded = records.len() - expected.len();
    Deltas {
        expected,
        observed,
        excluded,
    }
}

pub fn bcc(records: &[TupleRecord]) -> Result<Correlation, MetricsError> {
    let d = finite_deltas(records);
    Ok(stats::pearson(&d.expected, &d.observed)?)
}

pub fn bce(records: &[TupleRecord]) -> Result<Scalar, MetricsError> {
    let d = finite_deltas(records);
    bce_of(&d.expected, &d.observed)
}

fn bce_of(expected: &[Scalar], observed: &[Scalar]) -> Result<Scalar, MetricsError> {
    if expected.is_empty() {
        return Err(MetricsError::InsufficientData { need: 1, got: 0 });
    }
    let sum: Scalar = expected
        .iter()
        .zip(observed)
        .map(|(e, o)| (e - o) * (e - o))
        .sum();
    Ok(sum / expected.len() as Scalar)
}

pub fn update_gradient(records: &[TupleRecord]) -> Result<LinearFit, MetricsError> {
    let d = finite_deltas(records);
    Ok(stats::ols(&d.expected, &d.observed)?)
}

pub fn direction_agreement(records: &[TupleRecord]) -> Result<Scalar, MetricsError> {
    let d = finite_deltas(records);
    agreement_of(&d.expected, &d.observed)
}

fn agreement_of(expected: &[Scalar], observed: &[Scalar]) -> Result<Scalar, MetricsError> {
    if expected.is_empty() {
        return Err(MetricsError::InsufficientData { need: 1, got: 0 });
    }
    let sign = |v: Scalar| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let agree = expected
        .iter()
        .zip(observed)
        .filter(|(e, o)| sign(**e) == sign(**o))
        .count();
    Ok(agree as Scalar / expected.len() as Scalar)
}

/// Metrics for one category. `None` means unavailable; the reason is in the
/// report's `notes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub n: usize,
    pub bcc: Option<Scalar>,
    pub bcc_p_value: Option<Scalar>,
    pub update_gradient: Option<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Records used, after exclusions.
    pub n: usize,
    pub excluded: usize,
    pub bcc: Option<Scalar>,
    pub bcc_p_value: Option<Scalar>,
    pub bce: Option<Scalar>,
    pub update_gradient: Option<Scalar>,
    pub update_intercept: Option<Scalar>,
    pub update_gradient_se: Option<Scalar>,
    pub direction_agreement: Option<Scalar>,
    pub per_category: IndexMap<String, CategoryMetrics>,
    /// Metric name → why it is unavailable.
    pub unavailable: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

/// Global and per-category metrics. Fails only when fewer than 3 records
/// remain after exclusions; any other failure marks the metric unavailable
/// and adds a note.
pub fn compute_report(records: &[TupleRecord]) -> Result<MetricsReport, MetricsError> {
    let d = finite_deltas(records);
    let n = d.expected.len();
    if n < 3 {
        return Err(MetricsError::InsufficientData { need: 3, got: n });
    }
    let mut notes = Vec::new();
    let mut unavailable = BTreeMap::new();
    if d.excluded > 0 {
        notes.push(format!(
            "excluded {} record(s) with non-finite deltas",
            d.excluded
        ));
    }

    let corr = stats::pearson(&d.expected, &d.observed);
    if let Err(e) = &corr {
        notes.push(format!("bcc: {e}"));
        unavailable.insert("bcc".to_string(), e.to_string());
    }
    let fit = stats::ols(&d.expected, &d.observed);
    if let Err(e) = &fit {
        notes.push(format!("update_gradient: {e}"));
        unavailable.insert("update_gradient".to_string(), e.to_string());
    }
    let corr = corr.ok();
    let fit = fit.ok();

    let mut grouped: IndexMap<&str, Vec<&TupleRecord>> = IndexMap::new();
    for r in records {
        grouped.entry(r.category.as_str()).or_default().push(r);
    }
    let mut per_category = IndexMap::new();
    for (name, recs) in grouped {
        let owned: Vec<TupleRecord> = recs.into_iter().cloned().collect();
        let cd = finite_deltas(&owned);
        let c = stats::pearson(&cd.expected, &cd.observed);
        let g = stats::ols(&cd.expected, &cd.observed);
        if let Err(e) = &c {
            notes.push(format!("category {name:?}: bcc: {e}"));
        }
        if let Err(e) = &g {
            notes.push(format!("category {name:?}: update_gradient: {e}"));
        }
        per_category.insert(
            name.to_string(),
            CategoryMetrics {
                n: cd.expected.len(),
                bcc: c.as_ref().ok().map(|c| c.r),
                bcc_p_value: c.as_ref().ok().map(|c| c.p),
                update_gradient: g.ok().map(|g| g.slope),
            },
        );
    }

    Ok(MetricsReport {
        n,
        excluded: d.excluded,
        bcc: corr.map(|c| c.r),
        bcc_p_value: corr.map(|c| c.p),
        bce: Some(bce_of(&d.expected, &d.observed)?),
        update_gradient: fit.map(|f| f.slope),
        update_intercept: fit.map(|f| f.intercept),
        update_gradient_se: fit.map(|f| f.slope_se),
        direction_agreement: Some(agreement_of(&d.expected, &d.observed)?),
        per_category,
        unavailable,
        notes,
    })
}

/// Fixed-decimal rendering; `-` for unavailable values.
pub fn fmt_fixed(v: Option<Scalar>, decimals: usize) -> String {
    match v {
        Some(v) => format!("{v:.decimals$}"),
        None => "-".to_string(),
    }
}

impl MetricsReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text summary with the global row first, then one row per
    /// category.
    pub fn render_table(&self) -> String {
        let mut rows: Vec<[String; 5]> = vec![[
            "scope".into(),
            "n".into(),
            "BCC".into(),
            "Update Gradient".into(),
            "Direction Agreement%".into(),
        ]];
        rows.push([
            "all".into(),
            self.n.to_string(),
            fmt_fixed(self.bcc, 3),
            fmt_fixed(self.update_gradient, 3),
            fmt_fixed(self.direction_agreement.map(|a| a * 100.0), 1),
        ]);
        for (name, c) in &self.per_category {
            rows.push([
                name.clone(),
                c.n.to_string(),
                fmt_fixed(c.bcc, 3),
                fmt_fixed(c.update_gradient, 3),
                String::new(),
            ]);
        }
        let mut out = align(&rows);
        out.push_str(&format!("\nBCE: {}\n", fmt_fixed(self.bce, 6)));
        if let Some(p) = self.bcc_p_value {
            out.push_str(&format!("BCC p-value: {p:e}\n"));
        }
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }
}

/// Left-align the first column and right-align the rest.
pub(crate) fn align<const N: usize>(rows: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(widths).enumerate() {
            if i == 0 {
                line.push_str(&format!("{cell:<w$}"));
            } else {
                line.push_str(&format!("  {cell:>w$}"));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::assembly::TupleCoords;

    /// Record whose deltas are exactly (e, o): likelihoods (e, 0), posteriors
    /// (o, 0), priors zero.
    pub(crate) fn rec(category: &str, e: f64, o: f64) -> TupleRecord {
        TupleRecord::from_scores(
            TupleCoords {
                category: category.into(),
                c1: "a".into(),
                c2: "b".into(),
                evidence: "x".into(),
                history: 0,
            },
            [0.0, 0.0],
            [e, 0.0],
            [o, 0.0],
        )
    }

    fn recs(pairs: &[(f64, f64)]) -> Vec<TupleRecord> {
        pairs.iter().map(|&(e, o)| rec("k", e, o)).collect()
    }

    #[test]
    fn bce_of_unit_disagreements() {
        assert_eq!(bce(&recs(&[(1.0, 0.0), (0.0, 1.0)])).unwrap(), 1.0);
        assert!(bce(&[]).is_err());
    }

    #[test]
    fn agreement_tie_rule() {
        let r = recs(&[(1.0, -1.0), (-1.0, -1.0), (2.0, 3.0), (0.0, 0.0)]);
        assert_eq!(direction_agreement(&r).unwrap(), 0.75);
        assert_eq!(
            direction_agreement(&recs(&[(0.0, 1.0), (1.0, 0.0)])).unwrap(),
            0.0
        );
    }

    #[test]
    fn gradient_of_half_line() {
        let r = recs(&[(-2.0, -1.0), (-1.0, -0.5), (1.0, 0.5), (2.0, 1.0)]);
        let fit = update_gradient(&r).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-15);
        assert!(fit.intercept.abs() < 1e-15);
    }

    #[test]
    fn bcc_is_affine_invariant_and_bce_is_not() {
        let pairs = [
            (0.3, 0.1),
            (-1.2, -0.4),
            (2.0, 1.1),
            (0.7, 0.9),
            (-0.4, 0.2),
        ];
        let base = bcc(&recs(&pairs)).unwrap().r;
        let moved: Vec<_> = pairs
            .iter()
            .map(|&(e, o)| (2.5 * e + 1.0, 2.5 * o - 3.0))
            .collect();
        assert!((bcc(&recs(&moved)).unwrap().r - base).abs() < 1e-12);
        let half: Vec<_> = pairs.iter().map(|&(e, o)| (0.5 * e, 0.5 * o)).collect();
        assert_eq!(
            bce(&recs(&half)).unwrap(),
            0.25 * bce(&recs(&pairs)).unwrap()
        );
    }

    #[test]
    fn non_finite_records_are_excluded_and_noted() {
        let mut r = recs(&[(1.0, 0.9), (2.0, 2.1), (3.0, 2.9), (4.0, 4.2)]);
        r.push(rec("k", f64::NEG_INFINITY, 0.0));
        let rep = compute_report(&r).unwrap();
        assert_eq!(rep.n, 4);
        assert_eq!(rep.excluded, 1);
        assert!(rep.notes[0].contains("excluded 1"));
    }

    #[test]
    fn degenerate_bcc_degrades_to_note() {
        let r = recs(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let rep = compute_report(&r).unwrap();
        assert_eq!(rep.bcc, None);
        assert_eq!(rep.bce, Some(0.0));
        assert_eq!(rep.direction_agreement, Some(1.0));
        assert!(rep.unavailable["bcc"].contains("both inputs are constant"));
    }

    #[test]
    fn small_category_is_unavailable_but_global_survives() {
        let mut r = recs(&[(1.0, 0.9), (2.0, 2.1), (3.0, 2.9)]);
        r.push(rec("tiny", 1.0, 1.0));
        let rep = compute_report(&r).unwrap();
        assert_eq!(rep.per_category.len(), 2);
        assert_eq!(rep.per_category["tiny"].bcc, None);
        assert_eq!(rep.per_category["tiny"].n, 1);
        assert!(rep.bcc.is_some());
    }

    #[test]
    fn single_category_matches_global() {
        let r = recs(&[(1.0, 0.9), (2.0, 2.1), (3.0, 2.9), (-1.0, -0.5)]);
        let rep = compute_report(&r).unwrap();
        assert_eq!(rep.per_category.len(), 1);
        assert_eq!(rep.per_category["k"].bcc, rep.bcc);
        assert_eq!(rep.per_category["k"].update_gradient, rep.update_gradient);
    }

    #[test]
    fn too_few_records_is_insufficient() {
        let err = compute_report(&recs(&[(1.0, 1.0), (2.0, 2.0)])).unwrap_err();
        assert!(err.is_insufficient_data());
    }

    #[test]
    fn table_renders_three_decimals() {
        let r = recs(&[(1.0, 0.5), (2.0, 0.9), (3.0, 1.6), (-1.0, 0.1)]);
        let rep = compute_report(&r).unwrap();
        let t = rep.render_table();
        assert!(t.contains(&format!("{:.3}", rep.bcc.unwrap())));
        assert!(t.lines().next().unwrap().starts_with("scope"));
    }
}
