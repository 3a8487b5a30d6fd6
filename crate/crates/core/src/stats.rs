//! Order statistics and summation helpers shared by every estimator.

use crate::error::{Error, Result};

/// Normal-consistency factor for the median absolute deviation.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median with the midpoint convention for even lengths. NaN-free input assumed.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("median of an empty vector".into()));
    }
    let mut buf = values.to_vec();
    Ok(median_in_place(&mut buf))
}

/// Median that reorders `buf`. Panics on empty input.
pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// Normalized MAD: `1.4826 * median(|x - median(x)|)`.
pub fn mad(values: &[f64]) -> Result<f64> {
    let center = median(values)?;
    Ok(mad_about(values, center))
}

pub(crate) fn mad_about(values: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    MAD_CONSISTENCY * median_in_place(&mut dev)
}

/// Neumaier-compensated sum, so aggregated reports do not depend on
/// accumulation drift.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn mad_uses_normal_consistency() {
        // |dev| from median 3 = [2,1,0,1,97] -> median 1
        let m = mad(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert!((m - 1.4826).abs() < 1e-15);
        assert_eq!(mad(&[5.0; 4]).unwrap(), 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(values), 2.0);
    }
}
