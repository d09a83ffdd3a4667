//! Student-t tail probabilities and quantiles via the incomplete beta function.

use super::special::betainc;
use super::StatsError;
use crate::scalar::Real;

/// Two-sided p-value P(|T| ≥ |t|) for T ~ t(df).
pub fn two_sided_p<T: Real>(t: T, df: T) -> Result<T, StatsError> {
    if !(df > T::zero()) || t.is_nan() {
        return Err(StatsError::Domain);
    }
    if t.is_infinite() {
        return Ok(T::zero());
    }
    let x = df / (df + t * t);
    betainc(df / T::lit(2.0), T::lit(0.5), x)
}

/// CDF of the t distribution.
pub fn cdf<T: Real>(t: T, df: T) -> Result<T, StatsError> {
    let tail = two_sided_p(t, df)? / T::lit(2.0);
    Ok(if t >= T::zero() {
        T::one() - tail
    } else {
        tail
    })
}

/// Quantile function: the t with P(T ≤ t) = prob, for prob in (0, 1).
pub fn quantile<T: Real>(prob: T, df: T) -> Result<T, StatsError> {
    let half = T::lit(0.5);
    if !(prob > T::zero() && prob < T::one()) || !(df > T::zero()) {
        return Err(StatsError::Domain);
    }
    if prob == half {
        return Ok(T::zero());
    }
    // solve two_sided_p(t) = 2·(upper tail) for t ≥ 0 by bisection
    let upper = if prob > half { T::one() - prob } else { prob };
    let target = upper + upper;
    let mut lo = T::zero();
    let mut hi = T::one();
    while two_sided_p(hi, df)? > target {
        hi = hi + hi;
        if hi.is_infinite() {
            return Err(StatsError::NoConvergence);
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid == lo || mid == hi {
            break;
        }
        if two_sided_p(mid, df)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (lo + hi) * half;
    Ok(if prob > half { t } else { -t })
}
