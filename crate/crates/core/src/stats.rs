//! Deterministic reductions and confidence intervals.
//!
//! All sums go through a fixed pairwise tree so that the result depends only
//! on the order of the inputs, never on how the work was scheduled.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{LabError, Result};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Minimum number of batches behind any Monte Carlo confidence interval.
pub const MIN_BATCHES: usize = 30;

const LEAF: usize = 16;

/// Sum with a fixed pairwise tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean with a fixed pairwise tree.
///
/// Partial means are merged as `mA + (mB − mA)·nB/n`, so a constant input
/// returns that constant exactly.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    fn rec(values: &[f64]) -> f64 {
        match values.len() {
            1 => values[0],
            len => {
                let mid = len / 2;
                let a = rec(&values[..mid]);
                let b = rec(&values[mid..]);
                let nb = (len - mid) as f64;
                a + (b - a) * (nb / len as f64)
            }
        }
    }
    if values.is_empty() {
        return f64::NAN;
    }
    rec(values)
}

/// A point estimate with the half-width of its 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

impl MeanCi {
    pub fn exact(value: f64) -> Self {
        MeanCi {
            mean: value,
            half_width: 0.0,
        }
    }
}

/// Sample variance (unbiased) around a given mean, summed pairwise.
fn variance_about(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    pairwise_sum(&sq) / (values.len() - 1) as f64
}

/// Confidence interval from per-batch statistics of equal weight.
///
/// The estimate is the pairwise mean of the batch values and the half-width
/// is `z·s/√B` with `s` the standard deviation across batches.
pub fn batch_ci(batch_values: &[f64]) -> MeanCi {
    let mean = pairwise_mean(batch_values);
    let b = batch_values.len() as f64;
    let half_width = Z95 * (variance_about(batch_values, mean) / b).sqrt();
    MeanCi { mean, half_width }
}

/// Batch-means confidence interval for the mean of `values`.
///
/// The values are cut into `batches` consecutive blocks of equal length
/// (the length must be a multiple of `batches`).
pub fn batch_means(values: &[f64], batches: usize) -> Result<MeanCi> {
    if batches == 0 || !values.len().is_multiple_of(batches) || values.is_empty() {
        return Err(LabError::invalid(
            "batches",
            format!(
                "{} values cannot be split into {} equal batches",
                values.len(),
                batches
            ),
        ));
    }
    let size = values.len() / batches;
    let means: Vec<f64> = values.chunks(size).map(pairwise_mean).collect();
    Ok(batch_ci(&means))
}

/// Self-normalised weighted mean with a batch-means interval.
///
/// Each batch contributes its ratio `Σ w f / Σ w`; batches whose weights sum
/// to zero are skipped.
pub fn weighted_batch_means(values: &[f64], weights: &[f64], batches: usize) -> Result<MeanCi> {
    if values.len() != weights.len() {
        return Err(LabError::DimensionMismatch {
            expected: values.len(),
            got: weights.len(),
        });
    }
    if batches == 0 || values.is_empty() || !values.len().is_multiple_of(batches) {
        return Err(LabError::invalid(
            "batches",
            "sample count must be a positive multiple of the batch count",
        ));
    }
    let size = values.len() / batches;
    let mut ratios = Vec::with_capacity(batches);
    for (v, w) in values.chunks(size).zip(weights.chunks(size)) {
        let wf: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
        let den = pairwise_sum(w);
        if den > 0.0 {
            ratios.push(pairwise_sum(&wf) / den);
        }
    }
    if ratios.is_empty() {
        return Err(LabError::invalid("weights", "all weights are zero"));
    }
    Ok(batch_ci(&ratios))
}

/// Kish effective sample size `(Σw)²/Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = pairwise_sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let s2 = pairwise_sum(&sq);
    if s2 <= 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Ordinary least-squares line with a Student-t interval on the slope.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval for the slope.
    pub slope_half_width: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(LabError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(LabError::FitInsufficientPoints(format!(
            "{} points, need at least 3",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = pairwise_mean(x);
    let my = pairwise_mean(y);
    let sxx = pairwise_sum(&x.iter().map(|v| (v - mx) * (v - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(
        &x.iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .collect::<Vec<_>>(),
    );
    if sxx <= 0.0 {
        return Err(LabError::FitInsufficientPoints(
            "abscissae are all equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - (intercept + slope * a))
        .collect();
    let sse = pairwise_sum(&residuals.iter().map(|r| r * r).collect::<Vec<_>>());
    let syy = pairwise_sum(&y.iter().map(|v| (v - my) * (v - my)).collect::<Vec<_>>());
    let dof = n - 2.0;
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| LabError::invalid("dof", e.to_string()))?
        .inverse_cdf(0.975);
    let slope_half_width = t * (sse / dof / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_half_width,
        residuals,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_mean_is_exact() {
        let v = vec![0.1; 1003];
        assert_eq!(pairwise_mean(&v), 0.1);
        let ci = batch_means(&vec![0.3; 40 * 25], 40).unwrap();
        assert_eq!(ci.mean, 0.3);
        assert_eq!(ci.half_width, 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!(fit.slope_half_width < 1e-10);
    }

    #[test]
    fn ess_of_uniform_weights() {
        assert!((effective_sample_size(&[2.0; 50]) - 50.0).abs() < 1e-9);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pairwise_mean_matches_naive(v in proptest::collection::vec(-1e3f64..1e3, 1..300)) {
            let naive = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((pairwise_mean(&v) - naive).abs() < 1e-9);
            prop_assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-8);
        }
    }
}
