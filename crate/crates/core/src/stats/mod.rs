//! Numeric kernels: Pearson correlation with Student-t significance, simple
//! OLS with slope confidence intervals, and the special functions behind them.
//!
//! Everything here is generic over [`Real`], so the same code runs in `f32`
//! and `f64`.

pub mod special;
pub mod students_t;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Which input of a bivariate computation was constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degenerate {
    X,
    Y,
    Both,
}

impl std::fmt::Display for Degenerate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Degenerate::X => "first input is constant",
            Degenerate::Y => "second input is constant",
            Degenerate::Both => "both inputs are constant",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate variance: {0}")]
    DegenerateVariance(Degenerate),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("insufficient data: need at least {need} points, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("argument outside the function's domain")]
    Domain,
    #[error("continued fraction failed to converge")]
    NoConvergence,
}

/// Sample Pearson correlation with its two-sided significance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation<T> {
    pub r: T,
    pub p: T,
    pub n: usize,
}

fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, &v| acc + v) / T::from_usize_lossy(xs.len())
}

struct Moments<T> {
    sxx: T,
    syy: T,
    sxy: T,
    mean_x: T,
    mean_y: T,
}

fn centered_moments<T: Real>(xs: &[T], ys: &[T]) -> Moments<T> {
    let mean_x = mean(xs);
    let mean_y = mean(ys);
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    Moments {
        sxx,
        syy,
        sxy,
        mean_x,
        mean_y,
    }
}

fn check_pair<T>(xs: &[T], ys: &[T], need: usize) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < need {
        return Err(StatsError::InsufficientData {
            need,
            got: xs.len(),
        });
    }
    Ok(())
}

fn degenerate<T: Real>(sxx: T, syy: T) -> Option<Degenerate> {
    match (sxx > T::zero(), syy > T::zero()) {
        (true, true) => None,
        (false, true) => Some(Degenerate::X),
        (true, false) => Some(Degenerate::Y),
        (false, false) => Some(Degenerate::Both),
    }
}

/// Pearson r and the two-sided p-value of t = r·sqrt((n−2)/(1−r²)) on n−2
/// degrees of freedom.
pub fn pearson<T: Real>(xs: &[T], ys: &[T]) -> Result<Correlation<T>, StatsError> {
    check_pair(xs, ys, 3)?;
    let m = centered_moments(xs, ys);
    if let Some(which) = degenerate(m.sxx, m.syy) {
        return Err(StatsError::DegenerateVariance(which));
    }
    let one = T::one();
    let r = (m.sxy / (m.sxx * m.syy).sqrt()).max(-one).min(one);
    let df = T::from_usize_lossy(xs.len() - 2);
    // df / (df + t²) simplifies to 1 − r²
    let x = (one - r * r).max(T::zero());
    let p = special::betainc(df / T::lit(2.0), T::lit(0.5), x)?;
    Ok(Correlation { r, p, n: xs.len() })
}

/// Ordinary least squares fit of `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub n: usize,
    /// Standard error of the slope under iid homoscedastic errors.
    pub slope_se: T,
}

impl<T: Real> LinearFit<T> {
    /// Two-sided confidence interval for the slope at `level` (e.g. 0.99).
    pub fn slope_interval(&self, level: T) -> Result<(T, T), StatsError> {
        let df = T::from_usize_lossy(self.n - 2);
        let q = students_t::quantile((T::one() + level) / T::lit(2.0), df)?;
        let half = q * self.slope_se;
        Ok((self.slope - half, self.slope + half))
    }
}

pub fn ols<T: Real>(xs: &[T], ys: &[T]) -> Result<LinearFit<T>, StatsError> {
    check_pair(xs, ys, 3)?;
    let m = centered_moments(xs, ys);
    if !(m.sxx > T::zero()) {
        return Err(StatsError::DegenerateVariance(Degenerate::X));
    }
    let slope = m.sxy / m.sxx;
    let intercept = m.mean_y - slope * m.mean_x;
    let rss = xs.iter().zip(ys).fold(T::zero(), |acc, (&x, &y)| {
        let e = y - intercept - slope * x;
        acc + e * e
    });
    let df = T::from_usize_lossy(xs.len() - 2);
    let slope_se = (rss / df / m.sxx).sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        n: xs.len(),
        slope_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linearity() {
        let c = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(c.r, 1.0);
        assert_eq!(c.p, 0.0);
        let c = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(c.r, -1.0);
    }

    // scipy.stats.pearsonr([1,2,3,4,5], [1,3,2,5,4])
    #[test]
    fn five_point_reference() {
        let c = pearson::<f64>(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert!((c.r - 0.8).abs() < 1e-12);
        assert!((c.p - 0.104_088_038_661_827_99).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        assert_eq!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateVariance(Degenerate::X))
        );
        assert_eq!(
            pearson(&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]),
            Err(StatsError::DegenerateVariance(Degenerate::Both))
        );
        assert_eq!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::InsufficientData { need: 3, got: 2 })
        );
        assert_eq!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch(3, 2))
        );
    }

    #[test]
    fn ols_half_slope() {
        let xs = [-2.0, -1.0, 1.0, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x).collect();
        let fit = ols(&xs, &ys).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-15);
        assert!(fit.intercept.abs() < 1e-15);
        assert_eq!(fit.slope_se, 0.0);
    }

    #[test]
    fn ols_runs_in_f32() {
        let fit = ols(&[0.0_f32, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-6);
        assert!((fit.intercept - 1.0).abs() < 1e-6);
    }

    #[test]
    fn slope_interval_uses_t_quantile() {
        // y = x + e with residuals ±1 alternating
        let xs = [0.0_f64, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 0.0, 3.0, 2.0, 5.0, 4.0];
        let fit = ols(&xs, &ys).unwrap();
        let (lo, hi) = fit.slope_interval(0.95).unwrap();
        let q = students_t::quantile(0.975, 4.0).unwrap();
        assert!((hi - lo - 2.0 * q * fit.slope_se).abs() < 1e-12);
        assert!(lo < fit.slope && fit.slope < hi);
    }

    proptest::proptest! {
        #[test]
        fn pearson_symmetric_and_bounded(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60)
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let (Ok(a), Ok(b)) = (pearson(&xs, &ys), pearson(&ys, &xs)) {
                proptest::prop_assert!((a.r - b.r).abs() < 1e-12);
                proptest::prop_assert!((a.p - b.p).abs() < 1e-12);
                proptest::prop_assert!(a.r.abs() <= 1.0);
                proptest::prop_assert!((0.0..=1.0).contains(&a.p));
            }
        }
    }
}
