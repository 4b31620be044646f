//! Covariance spectrum, the truncated Gaussian reference measure and sampling.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LabError, Result};
use crate::rng::stream_rng;
use crate::stats::{batch_means, MeanCi, MIN_BATCHES};

/// Points drawn per random stream when sampling the reference Gaussian.
pub const SAMPLE_CHUNK: usize = 4096;

/// Non-increasing list of strictly positive covariance eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// The largest eigenvalue.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Reciprocal of the largest eigenvalue.
    pub fn beta(&self) -> f64 {
        1.0 / self.eigenvalues[0]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = LabError;
    fn try_from(raw: Vec<f64>) -> Result<Self> {
        validate_spectrum(&raw)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.eigenvalues
    }
}

/// Checks positivity and sorts into non-increasing order.
pub fn validate_spectrum(raw: &[f64]) -> Result<Spectrum> {
    if raw.is_empty() {
        return Err(LabError::EmptySpectrum);
    }
    for (index, &value) in raw.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(LabError::NonPositiveEigenvalue { index, value });
        }
    }
    let mut eigenvalues = raw.to_vec();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(Spectrum { eigenvalues })
}

/// The Gaussian `⊗ N(0, λᵢ)` on the first `dim` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    spectrum: Spectrum,
    dim: usize,
}

impl GaussianModel {
    pub fn new(spectrum: Spectrum, dim: usize) -> Result<Self> {
        if dim == 0 || dim > spectrum.len() {
            return Err(LabError::invalid(
                "dim",
                format!("must lie in 1..={}, got {dim}", spectrum.len()),
            ));
        }
        Ok(GaussianModel { spectrum, dim })
    }

    /// Model using every eigenvalue of the spectrum.
    pub fn full(spectrum: Spectrum) -> Self {
        let dim = spectrum.len();
        GaussianModel { spectrum, dim }
    }

    pub fn from_eigenvalues(raw: &[f64]) -> Result<Self> {
        Ok(Self::full(validate_spectrum(raw)?))
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Variances of the retained coordinates.
    pub fn variances(&self) -> &[f64] {
        &self.spectrum.eigenvalues[..self.dim]
    }

    pub fn lambda1(&self) -> f64 {
        self.spectrum.lambda1()
    }

    pub fn beta(&self) -> f64 {
        self.spectrum.beta()
    }

    /// `(1/2) Σ log(2πλᵢ)`.
    pub fn log_normalizer(&self) -> f64 {
        self.variances()
            .iter()
            .map(|l| 0.5 * (2.0 * std::f64::consts::PI * l).ln())
            .sum()
    }

    /// Restriction to the first `dim` coordinates.
    pub fn truncate(&self, dim: usize) -> Result<Self> {
        GaussianModel::new(self.spectrum.clone(), dim)
    }

    /// Linear part `Bξ` of the drift, `B = diag(−1/λᵢ)`.
    pub fn linear_drift(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), l) in out.iter_mut().zip(x).zip(self.variances()) {
            *o = -xi / l;
        }
    }
}

/// A set of `count` points in `ℝⁿ`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub dim: usize,
    pub points: Vec<f64>,
    pub seed: u64,
    /// Optional non-negative importance weights, one per point.
    pub weights: Option<Vec<f64>>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.points.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.dim)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// Draws `count` independent points from the model's Gaussian.
///
/// Points are generated in chunks of [`SAMPLE_CHUNK`]; chunk `k` uses its own
/// stream derived from `(seed, k)`, so the batch is identical for any thread
/// count.
pub fn sample_gaussian(model: &GaussianModel, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(LabError::invalid("count", "must be at least 1"));
    }
    let n = model.dim();
    let sd: Vec<f64> = model.variances().iter().map(|l| l.sqrt()).collect();
    let mut points = vec![0.0; count * n];
    points
        .par_chunks_mut(SAMPLE_CHUNK * n)
        .enumerate()
        .for_each(|(k, chunk)| {
            let mut rng = stream_rng(seed, k as u64);
            for row in chunk.chunks_mut(n) {
                for (x, s) in row.iter_mut().zip(&sd) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = s * z;
                }
            }
        });
    Ok(SampleBatch {
        dim: n,
        points,
        seed,
        weights: None,
    })
}

/// Log-density of the model's Gaussian at `x`.
pub fn log_density_gaussian(model: &GaussianModel, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let quad: f64 = x
        .iter()
        .zip(model.variances())
        .map(|(xi, l)| xi * xi / (2.0 * l))
        .sum();
    Ok(-quad - model.log_normalizer())
}

/// Monte Carlo estimate of the conditional expectation that freezes the
/// first `kept` coordinates at `x` and integrates the remaining ones against
/// their Gaussian marginals.
///
/// When `kept` equals the model dimension the integrand does not depend on
/// the draws and `f(x)` is returned with a zero-width interval.
pub fn conditional_expectation<F>(
    f: F,
    model: &GaussianModel,
    kept: usize,
    x: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<MeanCi>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = model.dim();
    check_dim(n, x.len())?;
    if kept > n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: kept,
        });
    }
    if kept == n {
        return Ok(MeanCi::exact(f(x)));
    }
    let batches = MIN_BATCHES.max(40);
    let count = mc_samples.max(batches).div_ceil(batches) * batches;
    let tail_model = TailModel {
        variances: model.variances()[kept..].to_vec(),
    };
    let draws = tail_model.sample(count, seed);
    let tail_dim = n - kept;
    let values: Vec<f64> = draws
        .par_chunks(tail_dim * 256)
        .flat_map_iter(|block| {
            let mut point = x.to_vec();
            block
                .chunks(tail_dim)
                .map(|tail| {
                    point[kept..].copy_from_slice(tail);
                    f(&point)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    batch_means(&values, batches)
}

/// Independent centred Gaussians with given variances (used for tails).
pub(crate) struct TailModel {
    pub variances: Vec<f64>,
}

impl TailModel {
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let n = self.variances.len();
        let sd: Vec<f64> = self.variances.iter().map(|l| l.sqrt()).collect();
        let mut points = vec![0.0; count * n];
        points
            .par_chunks_mut(SAMPLE_CHUNK * n.max(1))
            .enumerate()
            .for_each(|(k, chunk)| {
                let mut rng = stream_rng(seed, k as u64);
                for row in chunk.chunks_mut(n) {
                    for (x, s) in row.iter_mut().zip(&sd) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *x = s * z;
                    }
                }
            });
        points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation_sorts_and_rejects() {
        let s = validate_spectrum(&[0.5, 1.0]).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 0.5]);
        assert_eq!(s.beta(), 1.0);
        assert!(matches!(
            validate_spectrum(&[1.0, 0.0]),
            Err(LabError::NonPositiveEigenvalue { index: 1, .. })
        ));
        assert_eq!(validate_spectrum(&[]), Err(LabError::EmptySpectrum));
    }

    #[test]
    fn log_density_values() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let c = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((log_density_gaussian(&m, &[0.0]).unwrap() + c).abs() < 1e-15);
        assert!((log_density_gaussian(&m, &[1.0]).unwrap() + 0.5 + c).abs() < 1e-15);
        let m2 = GaussianModel::from_eigenvalues(&[2.0, 2.0]).unwrap();
        let v = log_density_gaussian(&m2, &[0.0, 0.0]).unwrap();
        assert!((v + (4.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        assert!(matches!(
            log_density_gaussian(&m2, &[0.0]),
            Err(LabError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = GaussianModel::from_eigenvalues(&[1.0, 0.3]).unwrap();
        let a = sample_gaussian(&m, 1, 9).unwrap();
        let b = sample_gaussian(&m, 1, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_expectation_cases() {
        let m = GaussianModel::from_eigenvalues(&[1.0, 0.5]).unwrap();
        let e = conditional_expectation(|x| x[0], &m, 1, &[2.0, 7.0], 4000, 1).unwrap();
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.half_width, 0.0);
        let e = conditional_expectation(|x| x[1], &m, 1, &[2.0, 7.0], 40_000, 2).unwrap();
        assert!(e.mean.abs() <= e.half_width * 1.5);
        let e = conditional_expectation(|x| x[1] * x[1], &m, 1, &[2.0, 7.0], 40_000, 3).unwrap();
        assert!((e.mean - 0.5).abs() <= e.half_width * 1.5);
        let tower = conditional_expectation(|x| x[0] * x[1], &m, 2, &[2.0, 3.0], 10, 3).unwrap();
        assert_eq!(tower, MeanCi::exact(6.0));
    }

    proptest! {
        #[test]
        fn sorted_output(raw in proptest::collection::vec(1e-3f64..10.0, 1..8)) {
            let s = validate_spectrum(&raw).unwrap();
            for w in s.eigenvalues().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!((s.trace() - raw.iter().sum::<f64>()).abs() < 1e-12);
        }
    }
}
