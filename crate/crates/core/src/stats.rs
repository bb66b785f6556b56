//! Small robust-statistics helpers shared by the estimator and the benchmarks.

/// Consistency constant that makes the MAD estimate the standard deviation
/// of a Gaussian sample.
pub const MAD_SCALE: f64 = 1.483;

/// Median of a slice; the mean of the two middle order statistics for even
/// lengths. Returns NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Scaled median absolute deviation, `1.483 * Med(|y_i - Med(y)|)`.
pub fn mad(values: &[f64]) -> f64 {
    let center = median(values);
    let deviations: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    MAD_SCALE * median(&deviations)
}

/// Population variance (divides by `n`).
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn mad_of_small_sample() {
        // deviations from 3 are [2, 1, 0, 1, 97]
        let m = mad(&[1.0, 2.0, 3.0, 4.0, 100.0]);
        assert!((m - 1.483).abs() < 1e-15);
        assert_eq!(mad(&[5.0; 4]), 0.0);
    }

    #[test]
    fn variance_is_population() {
        assert!((variance(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
