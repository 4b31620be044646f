//! Rate fits of decay and smoothing experiments.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::stats::{linear_fit, LinearFit};

/// Required sampling density of a fit, in points per decade of the time axis.
pub const POINTS_PER_DECADE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScale {
    /// `log y` against `log t`: power laws.
    LogLog,
    /// `log y` against `t`: exponential rates.
    SemiLog,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub name: String,
    pub scale: FitScale,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_half_width: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

impl RateFit {
    pub fn new(name: &str, scale: FitScale, times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(LabError::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times.iter().any(|t| !(*t > 0.0)) || values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(LabError::FitInsufficientPoints(format!(
                "{name}: times and values must be positive for a logarithmic fit"
            )));
        }
        let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = times.iter().cloned().fold(0.0, f64::max);
        let decades = (hi / lo).log10();
        let needed = ((POINTS_PER_DECADE * decades).ceil() as usize).max(3);
        if times.len() < needed {
            return Err(LabError::FitInsufficientPoints(format!(
                "{name}: {} points over {decades:.2} decades, need {needed}",
                times.len()
            )));
        }
        let x: Vec<f64> = match scale {
            FitScale::LogLog => times.iter().map(|t| t.ln()).collect(),
            FitScale::SemiLog => times.to_vec(),
        };
        let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let LinearFit {
            slope,
            intercept,
            slope_half_width,
            residuals,
            r_squared,
        } = linear_fit(&x, &y)?;
        Ok(RateFit {
            name: name.to_string(),
            scale,
            times: times.to_vec(),
            values: values.to_vec(),
            slope,
            intercept,
            slope_half_width,
            residuals,
            r_squared,
        })
    }

    /// Fitted value at time `t`.
    pub fn predict(&self, t: f64) -> f64 {
        let x = match self.scale {
            FitScale::LogLog => t.ln(),
            FitScale::SemiLog => t,
        };
        (self.intercept + self.slope * x).exp()
    }
}

/// `count` geometrically spaced times on `[lo, hi]`, with at least
/// [`POINTS_PER_DECADE`] per decade.
pub fn geometric_times(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) {
        return Err(LabError::invalid("times", "need 0 < lo < hi"));
    }
    let needed = ((POINTS_PER_DECADE * (hi / lo).log10()).ceil() as usize).max(3);
    let count = count.max(needed);
    let r = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count).map(|k| lo * (r * k as f64).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_and_exponential_rates() {
        let t = geometric_times(1e-3, 1e-1, 11).unwrap();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let f = RateFit::new("p", FitScale::LogLog, &t, &v).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.predict(0.01) - 30.0).abs() < 1e-9);
        let t = [1.0, 2.0, 3.0, 4.0];
        let v: Vec<f64> = t.iter().map(|t: &f64| (-t).exp()).collect();
        assert!((RateFit::new("e", FitScale::SemiLog, &t, &v).unwrap().slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_sparse_fit_is_rejected() {
        let t = [1e-3, 1e-2, 1e-1];
        assert!(matches!(
            RateFit::new("s", FitScale::LogLog, &t, &[1.0, 2.0, 3.0]),
            Err(LabError::FitInsufficientPoints(_))
        ));
        assert_eq!(geometric_times(1e-3, 1e-1, 3).unwrap().len(), 10);
    }
}
