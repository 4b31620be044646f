//! Euler-Maruyama simulation of the penalized dynamics
//! `dξ = (Bξ − ∇Φ_ε(ξ))dt + √2 dW` and of the projected (reflected) scheme
//! `ξ ← P_Ω(ξ + (Bξ − ∇U(ξ))h + √(2h) Z)`.
//!
//! Paths are grouped in equal batches; batch `b` draws its noise from the
//! stream `(seed, b)`, so estimates do not depend on the number of worker
//! threads. Several dynamics can be driven by the same noise (common random
//! numbers), which is how differences and finite-difference gradients are
//! estimated with small variance.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::convex::{ConvexDomain, PenalizedScene, Potential};
use crate::error::{check_dim, LabError, Result};
use crate::rng::stream_rng;
use crate::spectral::GaussianModel;
use crate::stats::{batch_means, MIN_BATCHES};

/// Coordinates beyond this magnitude count as a blown-up path.
pub const BLOWUP_LEVEL: f64 = 1e6;
/// Default number of batches behind a confidence interval.
pub const DEFAULT_BATCHES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    /// Requested number of paths; rounded up to a multiple of `batches`.
    pub paths: usize,
    pub step: f64,
    pub seed: u64,
    pub batches: usize,
}

impl McSettings {
    pub fn new(paths: usize, step: f64, seed: u64) -> Self {
        McSettings {
            paths,
            step,
            seed,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batches < MIN_BATCHES {
            return Err(LabError::invalid("batches", format!("need at least {MIN_BATCHES}")));
        }
        if self.paths == 0 {
            return Err(LabError::invalid("paths", "must be positive"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(LabError::invalid("step", "must be positive"));
        }
        Ok(())
    }

    pub fn paths_per_batch(&self) -> usize {
        self.paths.div_ceil(self.batches)
    }

    pub fn total_paths(&self) -> usize {
        self.paths_per_batch() * self.batches
    }

    pub fn with_step(&self, step: f64) -> Self {
        McSettings { step, ..*self }
    }
}

/// A Monte Carlo estimate with the half-width of its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub ci_half_width: f64,
    pub paths: usize,
    pub step: f64,
    pub seed: u64,
}

impl McEstimate {
    /// Batch-means estimate from per-path values ordered by path index.
    pub fn from_values(values: &[f64], settings: &McSettings) -> Result<Self> {
        let ci = batch_means(values, settings.batches)?;
        Ok(McEstimate {
            value: ci.mean,
            ci_half_width: ci.half_width,
            paths: values.len(),
            step: settings.step,
            seed: settings.seed,
        })
    }
}

/// Stochastic dynamics that can be simulated.
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    /// Penalized potential `Φ_ε` on the whole space.
    Penalized(&'a PenalizedScene),
    /// Potential `U` with projection onto `Ω` after every step.
    Reflected {
        model: &'a GaussianModel,
        potential: &'a dyn Potential,
        domain: &'a ConvexDomain,
    },
}

impl<'a> Dynamics<'a> {
    pub fn model(&self) -> &'a GaussianModel {
        match self {
            Dynamics::Penalized(s) => &s.model,
            Dynamics::Reflected { model, .. } => model,
        }
    }

    pub fn dim(&self) -> usize {
        self.model().dim()
    }

    /// Whether this is the projected scheme (strong bias `O(√h)`).
    pub fn is_reflected(&self) -> bool {
        matches!(self, Dynamics::Reflected { .. })
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if let Dynamics::Penalized(s) = self {
            let min_var = s.model.variances().iter().cloned().fold(f64::INFINITY, f64::min);
            let stiffness = 1.0 / min_var + s.gradient_lipschitz_bound();
            if dt * stiffness > 2.0 {
                return Err(LabError::UnstableStep(format!(
                    "Euler step {dt} exceeds the stability limit {} of the penalized drift",
                    2.0 / stiffness
                )));
            }
        }
        Ok(())
    }

    fn advance(&self, x: &mut [f64], dt: f64, z: &[f64], drift: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        let model = self.model();
        let noise = (2.0 * dt).sqrt();
        match self {
            Dynamics::Penalized(scene) => scene.gradient(x, drift)?,
            Dynamics::Reflected { potential, .. } => potential.gradient(x, drift)?,
        }
        let vars = model.variances();
        for i in 0..x.len() {
            scratch[i] = x[i] + (-x[i] / vars[i] - drift[i]) * dt + noise * z[i];
        }
        match self {
            Dynamics::Penalized(_) => x.copy_from_slice(scratch),
            Dynamics::Reflected { domain, .. } => domain.project(scratch, x)?,
        }
        Ok(())
    }
}

/// One participant of a coupled simulation.
#[derive(Clone)]
pub struct Member<'a> {
    pub dynamics: Dynamics<'a>,
    pub start: Vec<f64>,
}

/// States at each observation time, for each member, as a row-major array
/// of `paths × dim` values: `states[time][member]`.
pub type CoupledStates = Vec<Vec<Vec<f64>>>;

/// Simulates all members with shared Gaussian increments and records their
/// states at the requested (increasing, positive) times. Each inter-time gap
/// is cut into the smallest number of equal steps not exceeding `step`.
pub fn simulate_coupled(members: &[Member], times: &[f64], settings: &McSettings) -> Result<CoupledStates> {
    settings.validate()?;
    if members.is_empty() {
        return Err(LabError::invalid("members", "need at least one dynamics"));
    }
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::invalid("times", "must be positive and strictly increasing"));
    }
    let n = members[0].dynamics.dim();
    for m in members {
        check_dim(n, m.dynamics.dim())?;
        check_dim(n, m.start.len())?;
    }
    let mut plan = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for &t in times {
        let span = t - prev;
        let steps = ((span / settings.step) - 1e-9).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        for m in members {
            m.dynamics.check_step(dt)?;
        }
        plan.push((steps, dt));
        prev = t;
    }
    let per_batch = settings.paths_per_batch();
    let batch_results: Vec<CoupledStates> = (0..settings.batches)
        .into_par_iter()
        .map(|b| -> Result<CoupledStates> {
            let mut rng = stream_rng(settings.seed, b as u64);
            let mut out = vec![vec![Vec::with_capacity(per_batch * n); members.len()]; times.len()];
            let mut states: Vec<Vec<f64>> = members.iter().map(|m| m.start.clone()).collect();
            let mut z = vec![0.0; n];
            let mut drift = vec![0.0; n];
            let mut scratch = vec![0.0; n];
            for _ in 0..per_batch {
                for (s, m) in states.iter_mut().zip(members) {
                    s.copy_from_slice(&m.start);
                }
                let mut step_index = 0usize;
                for (ti, &(steps, dt)) in plan.iter().enumerate() {
                    for _ in 0..steps {
                        for zi in z.iter_mut() {
                            *zi = StandardNormal.sample(&mut rng);
                        }
                        for (s, m) in states.iter_mut().zip(members) {
                            m.dynamics.advance(s, dt, &z, &mut drift, &mut scratch)?;
                            if s.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LEVEL) {
                                return Err(LabError::PathBlowup { step: step_index });
                            }
                        }
                        step_index += 1;
                    }
                    for (mi, s) in states.iter().enumerate() {
                        out[ti][mi].extend_from_slice(s);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut merged = vec![vec![Vec::with_capacity(settings.total_paths() * n); members.len()]; times.len()];
    for batch in batch_results {
        for (ti, per_member) in batch.into_iter().enumerate() {
            for (mi, vals) in per_member.into_iter().enumerate() {
                merged[ti][mi].extend(vals);
            }
        }
    }
    Ok(merged)
}

/// Applies `f` to every path state of a row-major state array.
pub fn observe<F: Fn(&[f64]) -> f64 + Sync>(states: &[f64], dim: usize, f: &F) -> Vec<f64> {
    states.par_chunks(dim).map(f).collect()
}

/// Estimate of `T(t)f(x)` for a single dynamics.
pub fn semigroup_mc<F: Fn(&[f64]) -> f64 + Sync>(
    dynamics: Dynamics,
    f: &F,
    t: f64,
    x: &[f64],
    settings: &McSettings,
) -> Result<McEstimate> {
    let member = Member {
        dynamics,
        start: x.to_vec(),
    };
    let states = simulate_coupled(&[member], &[t], settings)?;
    McEstimate::from_values(&observe(&states[0][0], x.len(), f), settings)
}

/// Estimate of the penalized semigroup `T_ε(t)f(x)`.
pub fn semigroup_mc_penalized<F: Fn(&[f64]) -> f64 + Sync>(
    scene: &PenalizedScene,
    f: &F,
    t: f64,
    x: &[f64],
    settings: &McSettings,
) -> Result<McEstimate> {
    semigroup_mc(Dynamics::Penalized(scene), f, t, x, settings)
}

/// Estimate of the reflected semigroup `T_Ω(t)f(x)` by projected Euler.
pub fn semigroup_mc_reflected<F: Fn(&[f64]) -> f64 + Sync>(
    model: &GaussianModel,
    potential: &dyn Potential,
    domain: &ConvexDomain,
    f: &F,
    t: f64,
    x: &[f64],
    settings: &McSettings,
) -> Result<McEstimate> {
    check_dim(model.dim(), x.len())?;
    if !domain.contains(x)? {
        return Err(LabError::invalid("x", "starting point must lie in the closed domain"));
    }
    semigroup_mc(
        Dynamics::Reflected {
            model,
            potential,
            domain,
        },
        f,
        t,
        x,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ConvexPotential;

    fn ou() -> GaussianModel {
        GaussianModel::from_eigenvalues(&[1.0]).unwrap()
    }

    #[test]
    fn ou_mean_matches_mehler() {
        let m = ou();
        let scene = PenalizedScene::new(m, ConvexPotential::Zero, ConvexDomain::FullSpace, 0.5).unwrap();
        let s = McSettings::new(20_000, 1e-2, 11);
        let e = semigroup_mc_penalized(&scene, &|x: &[f64]| x[0], 1.0, &[1.0], &s).unwrap();
        assert!((e.value - (-1.0f64).exp()).abs() < e.ci_half_width + 5e-3, "{e:?}");
        let again = semigroup_mc_penalized(&scene, &|x: &[f64]| x[0], 1.0, &[1.0], &s).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn constants_are_exact() {
        let m = ou();
        let h = ConvexDomain::axis_half_space(1, 0, 0.0, false);
        let s = McSettings::new(400, 1e-2, 1);
        let e = semigroup_mc_reflected(&m, &ConvexPotential::Zero, &h, &|_: &[f64]| 2.5, 0.5, &[1.0], &s).unwrap();
        assert_eq!(e.value, 2.5);
        assert_eq!(e.ci_half_width, 0.0);
    }

    #[test]
    fn free_reflection_equals_penalized_without_boundary() {
        let m = ou();
        let scene = PenalizedScene::new(m.clone(), ConvexPotential::quadratic(1.0), ConvexDomain::FullSpace, 1e-9).unwrap();
        let s = McSettings::new(2_000, 1e-2, 4);
        let f = |x: &[f64]| x[0].sin();
        let a = semigroup_mc_penalized(&scene, &f, 0.5, &[0.3], &s).unwrap();
        let b = semigroup_mc_reflected(&m, &ConvexPotential::quadratic(1.0), &ConvexDomain::FullSpace, &f, 0.5, &[0.3], &s).unwrap();
        assert!((a.value - b.value).abs() < 1e-6, "{a:?} {b:?}");
    }

    #[test]
    fn rejects_outside_start_and_stiff_steps() {
        let m = ou();
        let h = ConvexDomain::axis_half_space(1, 0, 0.0, false);
        let s = McSettings::new(400, 1e-2, 1);
        assert!(semigroup_mc_reflected(&m, &ConvexPotential::Zero, &h, &|x: &[f64]| x[0], 0.5, &[-1.0], &s).is_err());
        let scene = PenalizedScene::new(m, ConvexPotential::Zero, h, 1e-3).unwrap();
        assert!(matches!(
            semigroup_mc_penalized(&scene, &|x: &[f64]| x[0], 0.5, &[1.0], &s),
            Err(LabError::UnstableStep(_))
        ));
    }
}
