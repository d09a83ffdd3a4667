use serde::{Deserialize, Serialize};

use super::{finite_deltas, MetricsError};
use crate::assembly::TupleRecord;
use crate::stats;
use crate::Scalar;

pub const DEFAULT_BIN_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    AvgEvidenceLoglik,
    AvgClassLogprob,
}

impl Covariate {
    pub fn name(self) -> &'static str {
        match self {
            Covariate::AvgEvidenceLoglik => "avg_evidence_loglik",
            Covariate::AvgClassLogprob => "avg_class_logprob",
        }
    }

    pub fn of(self, r: &TupleRecord) -> Scalar {
        match self {
            Covariate::AvgEvidenceLoglik => r.avg_evidence_loglik,
            Covariate::AvgClassLogprob => r.avg_class_logprob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub bin_index: usize,
    pub covariate_mean: Scalar,
    pub n: usize,
    pub bcc: Option<Scalar>,
    pub update_gradient: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub covariate: Covariate,
    pub bin_count: usize,
    pub excluded: usize,
    pub bins: Vec<Bin>,
}

/// Sort records by `covariate` (descending), cut them into `bin_count`
/// contiguous bins whose sizes differ by at most one (larger bins first),
/// and compute BCC and update gradient per bin.
///
/// Records with a non-finite delta or covariate are excluded. Needs at least
/// three records per bin.
pub fn binned_analysis(
    records: &[TupleRecord],
    covariate: Covariate,
    bin_count: usize,
) -> Result<BinReport, MetricsError> {
    if bin_count == 0 {
        return Err(MetricsError::InvalidArgument(
            "bin_count must be at least 1".into(),
        ));
    }
    let mut usable: Vec<&TupleRecord> = records
        .iter()
        .filter(|r| {
            r.delta_expected.is_finite()
                && r.delta_observed.is_finite()
                && covariate.of(r).is_finite()
        })
        .collect();
    let excluded = records.len() - usable.len();
    let need = bin_count * 3;
    if usable.len() < need {
        return Err(MetricsError::InsufficientData {
            need,
            got: usable.len(),
        });
    }
    // stable: ties keep enumeration order
    usable.sort_by(|a, b| covariate.of(b).total_cmp(&covariate.of(a)));

    let base = usable.len() / bin_count;
    let extra = usable.len() % bin_count;
    let mut bins = Vec::with_capacity(bin_count);
    let mut start = 0;
    for bin_index in 0..bin_count {
        let size = base + usize::from(bin_index < extra);
        let slice: Vec<TupleRecord> = usable[start..start + size]
            .iter()
            .map(|r| (*r).clone())
            .collect();
        start += size;
        let d = finite_deltas(&slice);
        let covariate_mean = slice.iter().map(|r| covariate.of(r)).sum::<Scalar>() / size as Scalar;
        let corr = stats::pearson(&d.expected, &d.observed);
        let fit = stats::ols(&d.expected, &d.observed);
        let note = match (&corr, &fit) {
            (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
            _ => None,
        };
        bins.push(Bin {
            bin_index,
            covariate_mean,
            n: size,
            bcc: corr.ok().map(|c| c.r),
            update_gradient: fit.ok().map(|f| f.slope),
            note,
        });
    }
    Ok(BinReport {
        covariate,
        bin_count,
        excluded,
        bins,
    })
}

impl BinReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("bin report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tests::rec;

    fn records(n: usize) -> Vec<TupleRecord> {
        (0..n)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 3.0;
                rec("k", x, 0.5 * x + 0.01 * (i as f64).cos())
            })
            .collect()
    }

    #[test]
    fn hundred_records_ten_bins() {
        let rep = binned_analysis(&records(100), Covariate::AvgEvidenceLoglik, 10).unwrap();
        assert_eq!(rep.bins.len(), 10);
        assert!(rep.bins.iter().all(|b| b.n == 10));
    }

    #[test]
    fn remainder_goes_to_earliest_bins() {
        let rep = binned_analysis(&records(103), Covariate::AvgEvidenceLoglik, 10).unwrap();
        let sizes: Vec<usize> = rep.bins.iter().map(|b| b.n).collect();
        assert_eq!(sizes, vec![11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
        assert_eq!(sizes.iter().sum::<usize>(), 103);
    }

    #[test]
    fn covariate_means_descend() {
        for cov in [Covariate::AvgEvidenceLoglik, Covariate::AvgClassLogprob] {
            let rep = binned_analysis(&records(90), cov, 10).unwrap();
            assert!(rep
                .bins
                .windows(2)
                .all(|w| w[0].covariate_mean >= w[1].covariate_mean));
        }
    }

    #[test]
    fn degenerate_bin_is_unavailable() {
        let mut r = records(27);
        r.extend((0..3).map(|_| rec("k", -50.0, -50.0)));
        let rep = binned_analysis(&r, Covariate::AvgEvidenceLoglik, 10).unwrap();
        let last = rep.bins.last().unwrap();
        assert_eq!(last.bcc, None);
        assert!(last.note.is_some());
    }

    #[test]
    fn too_few_records() {
        let err = binned_analysis(&records(29), Covariate::AvgEvidenceLoglik, 10).unwrap_err();
        assert!(err.is_insufficient_data());
    }
}
