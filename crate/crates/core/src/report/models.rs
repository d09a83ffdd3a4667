//! Cross-model comparison tables.
//!
//! Rows come from a user-supplied file:
//!
//! - JSON: an array of [`ModelComparisonRow`] objects
//! - CSV: columns `label,params_billions,bcc,update_gradient,direction_agreement`,
//!   with every further column read as a benchmark score (empty = missing)
//!
//! `direction_agreement` is a fraction in [0, 1]; tables show it as a
//! percentage.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{csv_string, fmt_num, write_atomic, ReportError};
use crate::metrics::{align, fmt_fixed, scaling_correlation, ScalingPoint};
use crate::{stats, Correlation, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparisonRow {
    pub label: String,
    pub params_billions: Scalar,
    pub bcc: Scalar,
    pub update_gradient: Scalar,
    pub direction_agreement: Scalar,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub benchmark_scores: IndexMap<String, Scalar>,
}

impl ModelComparisonRow {
    fn check(&self, row: usize) -> Result<(), ReportError> {
        let range = |message: String| ReportError::Range {
            row,
            label: self.label.clone(),
            message,
        };
        if !(self.params_billions > 0.0 && self.params_billions.is_finite()) {
            return Err(range(format!(
                "params_billions must be positive, got {}",
                self.params_billions
            )));
        }
        if !(-1.0..=1.0).contains(&self.bcc) {
            return Err(range(format!("bcc must be in [-1, 1], got {}", self.bcc)));
        }
        if !self.update_gradient.is_finite() {
            return Err(range(format!(
                "update_gradient must be finite, got {}",
                self.update_gradient
            )));
        }
        if !(0.0..=1.0).contains(&self.direction_agreement) {
            return Err(range(format!(
                "direction_agreement must be a fraction in [0, 1], got {} ({}%)",
                self.direction_agreement,
                self.direction_agreement * 100.0
            )));
        }
        for (name, score) in &self.benchmark_scores {
            if !(0.0..=100.0).contains(score) {
                return Err(range(format!(
                    "benchmark {name:?} score must be in [0, 100], got {score}"
                )));
            }
        }
        Ok(())
    }
}

fn check_rows(rows: &[ModelComparisonRow]) -> Result<(), ReportError> {
    if rows.is_empty() {
        return Err(ReportError::InsufficientData("no model rows".into()));
    }
    rows.iter()
        .enumerate()
        .try_for_each(|(i, r)| r.check(i + 1))
}

const CSV_FIXED: [&str; 5] = [
    "label",
    "params_billions",
    "bcc",
    "update_gradient",
    "direction_agreement",
];

/// Read rows from a `.json` or `.csv` file and check their ranges.
pub fn read_model_rows(path: &Path) -> Result<Vec<ModelComparisonRow>, ReportError> {
    let source = |message: String| ReportError::Source {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| source(e.to_string()))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let rows = if is_json {
        serde_json::from_str::<Vec<ModelComparisonRow>>(&text).map_err(|e| source(e.to_string()))?
    } else {
        parse_rows_csv(&text).map_err(source)?
    };
    check_rows(&rows)?;
    Ok(rows)
}

fn parse_rows_csv(text: &str) -> Result<Vec<ModelComparisonRow>, String> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("missing column {name:?}"))
    };
    let fixed: Vec<usize> = CSV_FIXED.iter().map(|n| col(n)).collect::<Result<_, _>>()?;
    let extra: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !fixed.contains(i))
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| -> Result<Scalar, String> {
            rec.get(i)
                .unwrap_or("")
                .parse::<Scalar>()
                .map_err(|e| format!("row {}: column {:?}: {e}", line + 1, &headers[i]))
        };
        let mut benchmark_scores = IndexMap::new();
        for (i, name) in &extra {
            if !rec.get(*i).unwrap_or("").is_empty() {
                benchmark_scores.insert(name.clone(), num(*i)?);
            }
        }
        rows.push(ModelComparisonRow {
            label: rec.get(fixed[0]).unwrap_or("").to_string(),
            params_billions: num(fixed[1])?,
            bcc: num(fixed[2])?,
            update_gradient: num(fixed[3])?,
            direction_agreement: num(fixed[4])?,
            benchmark_scores,
        });
    }
    Ok(rows)
}

/// Text table with params to 2 decimals, BCC and gradient to 3, agreement
/// as a percentage to 1.
pub fn render_model_table(rows: &[ModelComparisonRow]) -> Result<String, ReportError> {
    check_rows(rows)?;
    let mut table: Vec<[String; 5]> = vec![[
        "Model".into(),
        "Params (B)".into(),
        "BCC".into(),
        "Update Gradient".into(),
        "Direction Agreement%".into(),
    ]];
    for r in rows {
        table.push([
            r.label.clone(),
            format!("{:.2}", r.params_billions),
            fmt_fixed(Some(r.bcc), 3),
            fmt_fixed(Some(r.update_gradient), 3),
            fmt_fixed(Some(r.direction_agreement * 100.0), 1),
        ]);
    }
    Ok(align(&table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTableSummary {
    pub rows: usize,
    pub text: String,
    /// (label, log10 params, bcc)
    pub scaling_pairs: Vec<(String, Scalar, Scalar)>,
    /// benchmark → (label, score, bcc)
    pub benchmark_pairs: IndexMap<String, Vec<(String, Scalar, Scalar)>>,
}

fn benchmark_pairs(rows: &[ModelComparisonRow]) -> IndexMap<String, Vec<(String, Scalar, Scalar)>> {
    let mut out: IndexMap<String, Vec<(String, Scalar, Scalar)>> = IndexMap::new();
    for r in rows {
        for (name, score) in &r.benchmark_scores {
            out.entry(name.clone())
                .or_default()
                .push((r.label.clone(), *score, r.bcc));
        }
    }
    out
}

/// Write `table.txt`, `models.csv`, `scaling_pairs.csv`, and (when any row
/// has benchmark scores) `benchmark_pairs.csv` into `dir`.
pub fn emit_model_table(
    rows: &[ModelComparisonRow],
    dir: &Path,
) -> Result<ModelTableSummary, ReportError> {
    let text = render_model_table(rows)?;
    let scaling_pairs: Vec<_> = rows
        .iter()
        .map(|r| (r.label.clone(), r.params_billions.log10(), r.bcc))
        .collect();
    let benchmark_pairs = benchmark_pairs(rows);

    write_atomic(&dir.join("table.txt"), text.as_bytes())?;
    let benches: Vec<&String> = benchmark_pairs.keys().collect();
    let mut header: Vec<&str> = CSV_FIXED.to_vec();
    header.extend(benches.iter().map(|b| b.as_str()));
    let models = csv_string(
        &header,
        rows.iter().map(|r| {
            let mut row = vec![
                r.label.clone(),
                fmt_num(r.params_billions),
                fmt_num(r.bcc),
                fmt_num(r.update_gradient),
                fmt_num(r.direction_agreement),
            ];
            row.extend(benches.iter().map(|b| {
                r.benchmark_scores
                    .get(*b)
                    .map(|v| fmt_num(*v))
                    .unwrap_or_default()
            }));
            row
        }),
    );
    write_atomic(&dir.join("models.csv"), models.as_bytes())?;
    let scaling = csv_string(
        &["label", "log10_params_billions", "bcc"],
        scaling_pairs
            .iter()
            .map(|(l, x, y)| vec![l.clone(), fmt_num(*x), fmt_num(*y)]),
    );
    write_atomic(&dir.join("scaling_pairs.csv"), scaling.as_bytes())?;
    if !benchmark_pairs.is_empty() {
        let bench = csv_string(
            &["benchmark", "label", "score", "bcc"],
            benchmark_pairs.iter().flat_map(|(b, pts)| {
                pts.iter()
                    .map(move |(l, x, y)| vec![b.clone(), l.clone(), fmt_num(*x), fmt_num(*y)])
            }),
        );
        write_atomic(&dir.join("benchmark_pairs.csv"), bench.as_bytes())?;
    }
    Ok(ModelTableSummary {
        rows: rows.len(),
        text,
        scaling_pairs,
        benchmark_pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCorrelation {
    pub benchmark: String,
    pub n: usize,
    pub r: Option<Scalar>,
    pub p: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaCorrelations {
    /// log10(params) against BCC.
    pub scaling: Correlation,
    /// Benchmark score against BCC; failures are kept with a note.
    pub benchmarks: Vec<BenchmarkCorrelation>,
}

pub fn meta_correlations(rows: &[ModelComparisonRow]) -> Result<MetaCorrelations, ReportError> {
    check_rows(rows)?;
    let points: Vec<ScalingPoint> = rows
        .iter()
        .map(|r| ScalingPoint {
            label: r.label.clone(),
            params_billions: r.params_billions,
            bcc: r.bcc,
        })
        .collect();
    let scaling = scaling_correlation(&points)?;
    let benchmarks = benchmark_pairs(rows)
        .into_iter()
        .map(|(benchmark, pts)| {
            let xs: Vec<Scalar> = pts.iter().map(|p| p.1).collect();
            let ys: Vec<Scalar> = pts.iter().map(|p| p.2).collect();
            match stats::pearson(&xs, &ys) {
                Ok(c) => BenchmarkCorrelation {
                    benchmark,
                    n: c.n,
                    r: Some(c.r),
                    p: Some(c.p),
                    note: None,
                },
                Err(e) => BenchmarkCorrelation {
                    benchmark,
                    n: xs.len(),
                    r: None,
                    p: None,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(MetaCorrelations {
        scaling,
        benchmarks,
    })
}
