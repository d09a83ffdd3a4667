use serde::{Deserialize, Serialize};

use super::{compute_report, MetricsError, MetricsReport};
use crate::assembly::{score_tuples, AssemblyError, ScoreOptions};
use crate::backend::{BackendError, ModelBackend};
use crate::dataset::Dataset;
use crate::{stats, Correlation, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub temperature: Scalar,
    pub report: MetricsReport,
}

/// Score and summarize `dataset` once per temperature, in input order.
///
/// Every temperature is checked against the backend before any scoring.
pub fn temperature_sweep<B: ModelBackend + ?Sized>(
    dataset: &Dataset,
    backend: &B,
    temperatures: &[Scalar],
    options: &ScoreOptions,
) -> Result<Vec<SweepPoint>, MetricsError> {
    if temperatures.is_empty() {
        return Err(MetricsError::InvalidArgument(
            "no temperatures given".into(),
        ));
    }
    for &t in temperatures {
        if !(t > 0.0 && t.is_finite()) {
            return Err(MetricsError::InvalidArgument(format!(
                "temperature must be positive, got {t}"
            )));
        }
        if !backend.supports_temperature(t) {
            return Err(
                AssemblyError::Backend(BackendError::UnsupportedTemperature {
                    backend: backend.id().to_string(),
                    temperature: t,
                })
                .into(),
            );
        }
    }
    temperatures
        .iter()
        .map(|&temperature| {
            let opts = ScoreOptions {
                temperature,
                ..options.clone()
            };
            let run = score_tuples(dataset, backend, &opts)?;
            Ok(SweepPoint {
                temperature,
                report: compute_report(&run.records)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub label: String,
    /// Abscissa before the log transform: parameter count in billions, or a
    /// benchmark score.
    pub params_billions: Scalar,
    pub bcc: Scalar,
}

/// Pearson correlation of log10(params) against BCC.
pub fn scaling_correlation(points: &[ScalingPoint]) -> Result<Correlation, MetricsError> {
    if let Some(p) = points
        .iter()
        .find(|p| !(p.params_billions > 0.0 && p.params_billions.is_finite()))
    {
        return Err(MetricsError::InvalidArgument(format!(
            "{}: parameter count must be positive, got {}",
            p.label, p.params_billions
        )));
    }
    let xs: Vec<Scalar> = points.iter().map(|p| p.params_billions.log10()).collect();
    let ys: Vec<Scalar> = points.iter().map(|p| p.bcc).collect();
    Ok(stats::pearson(&xs, &ys)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::StatsError;

    fn pt(params: f64, bcc: f64) -> ScalingPoint {
        ScalingPoint {
            label: format!("{params}B"),
            params_billions: params,
            bcc,
        }
    }

    #[test]
    fn collinear_in_log_space() {
        let c = scaling_correlation(&[pt(1.0, 0.5), pt(10.0, 0.6), pt(100.0, 0.7)]).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_bcc_is_degenerate() {
        let err = scaling_correlation(&[pt(1.0, 0.5), pt(2.0, 0.5), pt(3.0, 0.5)]).unwrap_err();
        assert!(matches!(
            err,
            MetricsError::Stats(StatsError::DegenerateVariance(_))
        ));
    }

    #[test]
    fn rejects_non_positive_params() {
        assert!(scaling_correlation(&[pt(0.0, 0.5), pt(2.0, 0.6), pt(3.0, 0.7)]).is_err());
    }

    #[test]
    fn two_points_is_insufficient() {
        let err = scaling_correlation(&[pt(1.0, 0.5), pt(2.0, 0.6)]).unwrap_err();
        assert!(err.is_insufficient_data());
    }
}
