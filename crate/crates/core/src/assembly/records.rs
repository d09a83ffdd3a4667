//! [`TupleRecord`] and its JSONL / CSV forms.
//!
//! Numbers are written as shortest round-trip decimals. JSON has no
//! non-finite numbers, so NaN and ±∞ become `null` in JSONL and read back
//! as NaN.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{AssemblyError, TupleCoords};

mod lossy_float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One scored tuple. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleRecord {
    pub category: String,
    pub c1: String,
    pub c2: String,
    pub evidence: String,
    pub history: usize,
    #[serde(with = "lossy_float")]
    pub log_prior_1: f64,
    #[serde(with = "lossy_float")]
    pub log_prior_2: f64,
    #[serde(with = "lossy_float")]
    pub log_post_1: f64,
    #[serde(with = "lossy_float")]
    pub log_post_2: f64,
    #[serde(with = "lossy_float")]
    pub log_lik_1: f64,
    #[serde(with = "lossy_float")]
    pub log_lik_2: f64,
    #[serde(with = "lossy_float")]
    pub delta_expected: f64,
    #[serde(with = "lossy_float")]
    pub delta_observed: f64,
    #[serde(with = "lossy_float")]
    pub avg_evidence_loglik: f64,
    #[serde(with = "lossy_float")]
    pub avg_class_logprob: f64,
}

impl TupleRecord {
    /// Build a record from raw log-probabilities, each pair ordered (c1, c2).
    pub fn from_scores(
        coords: TupleCoords,
        prior: [f64; 2],
        likelihood: [f64; 2],
        posterior: [f64; 2],
    ) -> Self {
        let [log_prior_1, log_prior_2] = prior;
        let [log_lik_1, log_lik_2] = likelihood;
        let [log_post_1, log_post_2] = posterior;
        Self {
            category: coords.category,
            c1: coords.c1,
            c2: coords.c2,
            evidence: coords.evidence,
            history: coords.history,
            log_prior_1,
            log_prior_2,
            log_post_1,
            log_post_2,
            log_lik_1,
            log_lik_2,
            delta_expected: log_lik_1 - log_lik_2,
            delta_observed: (log_post_1 - log_post_2) - (log_prior_1 - log_prior_2),
            avg_evidence_loglik: (log_lik_1 + log_lik_2) / 2.0,
            avg_class_logprob: (log_prior_1 + log_prior_2 + log_post_1 + log_post_2) / 4.0,
        }
    }

    pub fn coords(&self) -> TupleCoords {
        TupleCoords {
            category: self.category.clone(),
            c1: self.c1.clone(),
            c2: self.c2.clone(),
            evidence: self.evidence.clone(),
            history: self.history,
        }
    }

    /// Whether the derived fields equal their recomputation from the raw
    /// log-probabilities bit for bit (NaN matches NaN).
    pub fn invariants_hold(&self) -> bool {
        let again = Self::from_scores(
            self.coords(),
            [self.log_prior_1, self.log_prior_2],
            [self.log_lik_1, self.log_lik_2],
            [self.log_post_1, self.log_post_2],
        );
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan());
        same(again.delta_expected, self.delta_expected)
            && same(again.delta_observed, self.delta_observed)
            && same(again.avg_evidence_loglik, self.avg_evidence_loglik)
            && same(again.avg_class_logprob, self.avg_class_logprob)
    }
}

/// One JSON object per line, each line terminated by `\n`.
pub fn to_jsonl(records: &[TupleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<W: Write>(records: &[TupleRecord], mut w: W) -> std::io::Result<()> {
    w.write_all(to_jsonl(records).as_bytes())?;
    w.flush()
}

fn records_err(path: &Path, message: impl std::fmt::Display) -> AssemblyError {
    AssemblyError::Records {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

/// Read a JSONL file written by [`write_jsonl`]. Blank lines are ignored.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<TupleRecord>, AssemblyError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| records_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| records_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TupleRecord = serde_json::from_str(&line)
            .map_err(|e| records_err(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[TupleRecord], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TupleRecord>, AssemblyError> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path).map_err(|e| records_err(path, e))?;
    rd.deserialize()
        .map(|r| r.map_err(|e| records_err(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(history: usize, lp: f64) -> TupleRecord {
        TupleRecord::from_scores(
            TupleCoords {
                category: "c, with comma".into(),
                c1: " \"A\"".into(),
                c2: " B".into(),
                evidence: " e".into(),
                history,
            },
            [-0.1, -0.7],
            [lp, -2.5],
            [-0.3 - 0.2, -1e-17],
        )
    }

    #[test]
    fn derived_fields() {
        let r = rec(0, -1.25);
        assert_eq!(r.delta_expected, -1.25 - -2.5);
        assert_eq!(r.delta_observed, ((-0.3 - 0.2) - -1e-17) - (-0.1 - -0.7));
        assert_eq!(r.avg_evidence_loglik, (-1.25 + -2.5) / 2.0);
        assert!(r.invariants_hold());
    }

    #[test]
    fn jsonl_round_trip_is_exact_and_key_ordered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let records = vec![rec(0, -0.123_456_789_012_345_67), rec(1, -1e-300)];
        write_jsonl(&records, std::fs::File::create(&path).unwrap()).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), records);
        let first = to_jsonl(&records).lines().next().unwrap().to_string();
        assert!(first.starts_with(r#"{"category":"c, with comma","c1":" \"A\"","c2":" B","evidence":" e","history":0,"log_prior_1":-0.1,"#));
    }

    #[test]
    fn non_finite_survives_as_nan() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let records = vec![rec(0, f64::NEG_INFINITY)];
        std::fs::write(&path, to_jsonl(&records)).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert!(back[0].log_lik_1.is_nan());
        assert!(back[0].delta_expected.is_nan());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let records = vec![rec(0, -0.1 - 0.2), rec(2, -7.0)];
        write_csv(&records, std::fs::File::create(&path).unwrap()).unwrap();
        assert_eq!(read_csv(&path).unwrap(), records);
    }
}
