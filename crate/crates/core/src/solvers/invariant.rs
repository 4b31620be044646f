//! Samples from the invariant measures `ν = e^{−U}γ` (restricted to `Ω`) and
//! `ν_ε = e^{−Φ_ε}γ`.
//!
//! Importance sampling draws from the Gaussian and carries the unnormalised
//! weights `e^{−U}1_Ω` (or `e^{−Φ_ε}`), so the mean weight estimates the total
//! mass `ν(Ω)`. Long-run sampling follows independent chains of the
//! dynamics past a burn-in and records them at a fixed spacing, all with
//! weight one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mc::{simulate_coupled, Dynamics, McSettings, Member, DEFAULT_BATCHES};
use crate::convex::Potential;
use crate::error::{LabError, Result};
use crate::spectral::{sample_gaussian, SampleBatch};
use crate::stats::{batch_means, effective_sample_size, pairwise_mean, weighted_batch_means, MeanCi};

/// Smallest accepted effective sample size, relative to the sample count.
pub const MIN_ESS_FRACTION: f64 = 0.05;
/// Burn-in of the long-run chains in units of `λ₁`.
pub const BURN_IN: f64 = 10.0;
/// Recording interval of the long-run chains in units of `λ₁`.
pub const THINNING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    #[default]
    Importance,
    LongRun,
}

/// Weighted sample of an invariant measure.
#[derive(Debug, Clone)]
pub struct InvariantSample {
    /// Points and weights; the count is a multiple of `batches`, and for the
    /// long-run method batch `c` holds exactly the records of chain `c`.
    pub batch: SampleBatch,
    pub batches: usize,
    pub method: SamplingMethod,
    pub ess: f64,
}

impl InvariantSample {
    pub fn weights(&self) -> Vec<f64> {
        (0..self.batch.len()).map(|i| self.batch.weight(i)).collect()
    }

    pub fn values<G: Fn(&[f64]) -> f64 + Sync>(&self, g: &G) -> Vec<f64> {
        self.batch.points.par_chunks(self.batch.dim).map(g).collect()
    }

    /// Normalised mean `∫g dν / ν(Ω)`.
    pub fn mean<G: Fn(&[f64]) -> f64 + Sync>(&self, g: &G) -> Result<MeanCi> {
        self.mean_of(&self.values(g))
    }

    /// Normalised mean of precomputed per-point values.
    pub fn mean_of(&self, values: &[f64]) -> Result<MeanCi> {
        weighted_batch_means(values, &self.weights(), self.batches)
    }

    /// Estimate of the total mass `ν(Ω)` (importance sampling only).
    pub fn mass(&self) -> Option<MeanCi> {
        match self.method {
            SamplingMethod::Importance => batch_means(&self.weights(), self.batches).ok(),
            SamplingMethod::LongRun => None,
        }
    }
}

fn round_up(count: usize, batches: usize) -> usize {
    count.div_ceil(batches).max(1) * batches
}

fn importance(dynamics: Dynamics, count: usize, seed: u64) -> Result<InvariantSample> {
    let count = round_up(count, DEFAULT_BATCHES);
    let batch = sample_gaussian(dynamics.model(), count, seed)?;
    let weights: Vec<f64> = batch
        .points
        .par_chunks(batch.dim)
        .map(|x| -> Result<f64> {
            Ok(match dynamics {
                Dynamics::Penalized(scene) => (-scene.value(x)?).exp(),
                Dynamics::Reflected { potential, domain, .. } => {
                    if domain.contains(x)? {
                        (-potential.value(x)?).exp()
                    } else {
                        0.0
                    }
                }
            })
        })
        .collect::<Result<_>>()?;
    let ess = effective_sample_size(&weights);
    let required = MIN_ESS_FRACTION * count as f64;
    if !(ess >= required) {
        return Err(LabError::EffectiveSampleSizeTooLow { ess, required });
    }
    Ok(InvariantSample {
        batch: SampleBatch {
            weights: Some(weights),
            ..batch
        },
        batches: DEFAULT_BATCHES,
        method: SamplingMethod::Importance,
        ess,
    })
}

/// Default Euler step of the long-run chains. Penalized chains use a
/// hundredth of the smallest variance (at most a quarter of the stability
/// limit); projected chains, whose bias is of order `√step`, a thousandth.
pub fn default_long_run_step(dynamics: &Dynamics) -> f64 {
    let min_var = dynamics.model().variances().iter().cloned().fold(f64::INFINITY, f64::min);
    match dynamics {
        Dynamics::Penalized(scene) => {
            let stiffness = 1.0 / min_var + scene.gradient_lipschitz_bound();
            (0.01 * min_var).min(0.5 / stiffness)
        }
        Dynamics::Reflected { .. } => 1e-3 * min_var,
    }
}

fn long_run(dynamics: Dynamics, count: usize, seed: u64, step: f64) -> Result<InvariantSample> {
    let chains = DEFAULT_BATCHES;
    let per_chain = count.div_ceil(chains).max(1);
    let n = dynamics.dim();
    let lambda1 = dynamics.model().lambda1();
    let times: Vec<f64> = (0..per_chain)
        .map(|k| (BURN_IN + THINNING * k as f64) * lambda1)
        .collect();
    let start = match dynamics {
        Dynamics::Penalized(_) => vec![0.0; n],
        Dynamics::Reflected { domain, .. } => domain.projected(&vec![0.0; n])?,
    };
    let settings = McSettings {
        paths: chains,
        step,
        seed,
        batches: chains,
    };
    let states = simulate_coupled(&[Member { dynamics, start }], &times, &settings)?;
    let mut points = Vec::with_capacity(per_chain * chains * n);
    for c in 0..chains {
        for at_time in &states {
            points.extend_from_slice(&at_time[0][c * n..(c + 1) * n]);
        }
    }
    let total = per_chain * chains;
    let mut ess = total as f64;
    for i in 0..n {
        let coord: Vec<f64> = points.iter().skip(i).step_by(n).cloned().collect();
        let mean = pairwise_mean(&coord);
        let var = coord.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (total - 1).max(1) as f64;
        let chain_means: Vec<f64> = coord.chunks(per_chain).map(pairwise_mean).collect();
        let between = chain_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (chains - 1) as f64;
        if between > 0.0 {
            ess = ess.min(chains as f64 * var / between);
        }
    }
    let ess = ess.min(total as f64);
    let required = MIN_ESS_FRACTION * total as f64;
    if !(ess >= required) {
        return Err(LabError::EffectiveSampleSizeTooLow { ess, required });
    }
    Ok(InvariantSample {
        batch: SampleBatch {
            dim: n,
            points,
            seed,
            weights: Some(vec![1.0; total]),
        },
        batches: chains,
        method: SamplingMethod::LongRun,
        ess,
    })
}

/// Samples the invariant measure of `dynamics`: `ν_ε` for penalized
/// dynamics and `ν` restricted to `Ω` for reflected dynamics. The count is
/// rounded up to a multiple of the batch count.
pub fn sample_invariant(dynamics: Dynamics, count: usize, seed: u64, method: SamplingMethod) -> Result<InvariantSample> {
    if count == 0 {
        return Err(LabError::invalid("count", "must be at least 1"));
    }
    match method {
        SamplingMethod::Importance => importance(dynamics, count, seed),
        SamplingMethod::LongRun => long_run(dynamics, count, seed, default_long_run_step(&dynamics)),
    }
}

/// Long-run sampling with an explicit Euler step.
pub fn sample_invariant_long_run(dynamics: Dynamics, count: usize, seed: u64, step: f64) -> Result<InvariantSample> {
    if count == 0 {
        return Err(LabError::invalid("count", "must be at least 1"));
    }
    long_run(dynamics, count, seed, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{ConvexDomain, ConvexPotential, PenalizedScene};
    use crate::oracle::closed_forms::halfnormal_mean;
    use crate::spectral::GaussianModel;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn reflected<'a>(m: &'a GaussianModel, u: &'a ConvexPotential, d: &'a ConvexDomain) -> Dynamics<'a> {
        Dynamics::Reflected {
            model: m,
            potential: u,
            domain: d,
        }
    }

    #[test]
    fn free_gaussian_has_uniform_weights() {
        let m = GaussianModel::from_eigenvalues(&[1.0, 0.5]).unwrap();
        let u = ConvexPotential::Zero;
        let s = sample_invariant(reflected(&m, &u, &ConvexDomain::FullSpace), 1000, 5, SamplingMethod::Importance).unwrap();
        assert_eq!(s.batch.len(), 1000);
        assert!(s.weights().iter().all(|w| *w == 1.0));
        assert_eq!(s.mass().unwrap().mean, 1.0);
    }

    #[test]
    fn half_space_mean_is_negative_half_normal() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let u = ConvexPotential::Zero;
        let d = ConvexDomain::axis_half_space(1, 0, 0.0, true);
        for (method, count) in [(SamplingMethod::Importance, 40_000), (SamplingMethod::LongRun, 4000)] {
            let s = sample_invariant(reflected(&m, &u, &d), count, 11, method).unwrap();
            let est = s.mean(&|x: &[f64]| x[0]).unwrap();
            let bias = if method == SamplingMethod::LongRun { 0.03 } else { 0.0 };
            assert!((est.mean + halfnormal_mean(1.0)).abs() <= est.half_width + bias, "{method:?} {est:?}");
        }
    }

    #[test]
    fn ball_mass_matches_normal_cdf() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let u = ConvexPotential::Zero;
        let d = ConvexDomain::Ball {
            center: vec![0.0],
            radius: 1.0,
        };
        let s = sample_invariant(reflected(&m, &u, &d), 40_000, 2, SamplingMethod::Importance).unwrap();
        let mass = s.mass().unwrap();
        let exact = 2.0 * Normal::standard().cdf(1.0) - 1.0;
        assert!((mass.mean - exact).abs() <= mass.half_width, "{mass:?}");
    }

    #[test]
    fn far_domain_is_rejected_and_penalized_weights_are_positive() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let u = ConvexPotential::Zero;
        let d = ConvexDomain::Ball {
            center: vec![5.0],
            radius: 0.5,
        };
        assert!(matches!(
            sample_invariant(reflected(&m, &u, &d), 4000, 2, SamplingMethod::Importance),
            Err(LabError::EffectiveSampleSizeTooLow { .. })
        ));
        let scene = PenalizedScene::new(m.clone(), u, ConvexDomain::axis_half_space(1, 0, 0.0, true), 0.1).unwrap();
        let s = sample_invariant(Dynamics::Penalized(&scene), 4000, 2, SamplingMethod::Importance).unwrap();
        assert!(s.weights().iter().all(|w| *w > 0.0));
    }
}
