//! Output artifacts: scatter data, bin curves, sweep curves, and model
//! comparison tables.
//!
//! CSV and JSON are written atomically (temp file in the target directory,
//! then rename). CSV numbers use shortest round-trip decimals; unavailable
//! values are empty fields.

mod models;
mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::TupleRecord;
use crate::metrics::{self, BinReport, MetricsError, SweepPoint};
use crate::Scalar;

pub use models::{
    emit_model_table, meta_correlations, read_model_rows, render_model_table, BenchmarkCorrelation,
    MetaCorrelations, ModelComparisonRow, ModelTableSummary,
};
pub use svg::scatter_svg;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {message}")]
    Sink { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Source { path: String, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("row {row} ({label}): {message}")]
    Range {
        row: usize,
        label: String,
        message: String,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ReportError {
    pub fn is_insufficient_data(&self) -> bool {
        match self {
            ReportError::InsufficientData(_) => true,
            ReportError::Metrics(e) => e.is_insufficient_data(),
            _ => false,
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(v: Scalar) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<Scalar>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Write `bytes` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    use std::io::Write;
    let sink = |e: &dyn std::fmt::Display| ReportError::Sink {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| sink(&e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| sink(&e))?;
    tmp.write_all(bytes).map_err(|e| sink(&e))?;
    tmp.as_file().sync_all().map_err(|e| sink(&e))?;
    tmp.persist(path).map_err(|e| sink(&e.error))?;
    Ok(())
}

pub(crate) fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is UTF-8")
}

pub const SCATTER_HEADER: [&str; 7] = [
    "delta_expected",
    "delta_observed",
    "category",
    "c1",
    "c2",
    "evidence",
    "history",
];

/// Scatter CSV, one row per record (non-finite deltas included as-is).
pub fn scatter_csv(records: &[TupleRecord]) -> String {
    csv_string(
        &SCATTER_HEADER,
        records.iter().map(|r| {
            vec![
                fmt_num(r.delta_expected),
                fmt_num(r.delta_observed),
                r.category.clone(),
                r.c1.clone(),
                r.c2.clone(),
                r.evidence.clone(),
                r.history.to_string(),
            ]
        }),
    )
}

/// Sidecar for a scatter CSV. Fit values come from the metrics module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSummary {
    pub label: String,
    pub rows: usize,
    pub n: usize,
    pub r: Option<Scalar>,
    pub slope: Option<Scalar>,
    pub intercept: Option<Scalar>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl ScatterSummary {
    pub fn of(records: &[TupleRecord], label: &str) -> Result<Self, ReportError> {
        if records.is_empty() {
            return Err(ReportError::InsufficientData("no records to plot".into()));
        }
        let d = metrics::finite_deltas(records);
        let mut notes = Vec::new();
        let r = metrics::bcc(records)
            .map_err(|e| notes.push(format!("r: {e}")))
            .ok()
            .map(|c| c.r);
        let fit = metrics::update_gradient(records)
            .map_err(|e| notes.push(format!("fit: {e}")))
            .ok();
        Ok(Self {
            label: label.to_string(),
            rows: records.len(),
            n: d.expected.len(),
            r,
            slope: fit.map(|f| f.slope),
            intercept: fit.map(|f| f.intercept),
            notes,
        })
    }
}

/// Output paths for [`emit_scatter`].
#[derive(Debug, Clone)]
pub struct ScatterSink {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: Option<PathBuf>,
}

impl ScatterSink {
    /// `<dir>/<stem>.csv`, `<dir>/<stem>.json`, and optionally `<dir>/<stem>.svg`.
    pub fn in_dir(dir: &Path, stem: &str, with_svg: bool) -> Self {
        Self {
            csv: dir.join(format!("{stem}.csv")),
            json: dir.join(format!("{stem}.json")),
            svg: with_svg.then(|| dir.join(format!("{stem}.svg"))),
        }
    }
}

pub fn emit_scatter(
    records: &[TupleRecord],
    sink: &ScatterSink,
    label: &str,
) -> Result<ScatterSummary, ReportError> {
    let summary = ScatterSummary::of(records, label)?;
    write_atomic(&sink.csv, scatter_csv(records).as_bytes())?;
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_atomic(&sink.json, json.as_bytes())?;
    if let Some(path) = &sink.svg {
        write_atomic(path, scatter_svg(records, &summary).as_bytes())?;
    }
    Ok(summary)
}

pub const BINS_HEADER: [&str; 5] = ["bin_index", "covariate_mean", "n", "bcc", "update_gradient"];

pub fn bins_csv(report: &BinReport) -> String {
    csv_string(
        &BINS_HEADER,
        report.bins.iter().map(|b| {
            vec![
                b.bin_index.to_string(),
                fmt_num(b.covariate_mean),
                b.n.to_string(),
                fmt_opt(b.bcc),
                fmt_opt(b.update_gradient),
            ]
        }),
    )
}

pub fn emit_bins(report: &BinReport, path: &Path) -> Result<usize, ReportError> {
    write_atomic(path, bins_csv(report).as_bytes())?;
    Ok(report.bins.len())
}

pub const SWEEP_HEADER: [&str; 8] = [
    "temperature",
    "n",
    "bcc",
    "bcc_p_value",
    "bce",
    "update_gradient",
    "update_intercept",
    "direction_agreement",
];

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    csv_string(
        &SWEEP_HEADER,
        points.iter().map(|p| {
            let r = &p.report;
            vec![
                fmt_num(p.temperature),
                r.n.to_string(),
                fmt_opt(r.bcc),
                fmt_opt(r.bcc_p_value),
                fmt_opt(r.bce),
                fmt_opt(r.update_gradient),
                fmt_opt(r.update_intercept),
                fmt_opt(r.direction_agreement),
            ]
        }),
    )
}

pub fn emit_sweep(points: &[SweepPoint], path: &Path) -> Result<usize, ReportError> {
    write_atomic(path, sweep_csv(points).as_bytes())?;
    Ok(points.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tests::rec;
    use crate::metrics::{binned_analysis, Covariate};

    #[test]
    fn numbers_round_trip() {
        for v in [
            0.1 + 0.2,
            -1e-300,
            1.0,
            123_456_789.123_456_79,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(1.0), "1.0");
    }

    #[test]
    fn scatter_rows_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let records: Vec<_> = (0..5)
            .map(|i| rec("k, q", i as f64, 0.5 * i as f64 + 1.0))
            .collect();
        let sink = ScatterSink::in_dir(dir.path(), "scatter", true);
        let s = emit_scatter(&records, &sink, "test").unwrap();
        assert_eq!(s.r, Some(1.0));
        assert_eq!(
            s.slope,
            Some(metrics::update_gradient(&records).unwrap().slope)
        );
        let text = std::fs::read_to_string(&sink.csv).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(
            rd.headers().unwrap().iter().collect::<Vec<_>>(),
            SCATTER_HEADER
        );
        let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(&rows[3][2], "k, q");
        assert_eq!(rows[3][1].parse::<f64>().unwrap(), 2.5);
        assert!(std::fs::read_to_string(sink.svg.unwrap())
            .unwrap()
            .starts_with("<svg"));
    }

    #[test]
    fn empty_scatter_is_insufficient() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_scatter(&[], &ScatterSink::in_dir(dir.path(), "s", false), "x").unwrap_err();
        assert!(err.is_insufficient_data());
    }

    #[test]
    fn bins_keep_order_and_blank_unavailable() {
        let mut r: Vec<_> = (0..27)
            .map(|i| rec("k", (i as f64).sin(), (i as f64).cos()))
            .collect();
        r.extend((0..3).map(|_| rec("k", -50.0, -50.0)));
        let rep = binned_analysis(&r, Covariate::AvgEvidenceLoglik, 10).unwrap();
        let text = bins_csv(&rep);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert!(lines[10].ends_with(",3,,"));
        assert!(lines[1].starts_with("0,"));
    }
}
