use super::domain::ConvexDomain;
use super::moreau::moreau_envelope;
use super::potential::{ConvexPotential, Potential};
use crate::error::{check_dim, LabError, Result};
use crate::spectral::GaussianModel;

/// A convex potential `U` on a convex domain `Ω`, penalized at level `ε`:
/// `Φ_ε = U_ε + d_Ω²/(2ε)` with `U_ε` the Moreau envelope of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedScene {
    pub model: GaussianModel,
    pub potential: ConvexPotential,
    pub domain: ConvexDomain,
    epsilon: f64,
    eta_schedule: Vec<f64>,
}

impl PenalizedScene {
    pub fn new(
        model: GaussianModel,
        potential: ConvexPotential,
        domain: ConvexDomain,
        epsilon: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(LabError::invalid("epsilon", "must be positive"));
        }
        potential.validate(model.dim())?;
        domain.validate(model.dim())?;
        Ok(PenalizedScene {
            model,
            potential,
            domain,
            epsilon,
            eta_schedule: Vec::new(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut s = PenalizedScene::new(
            self.model.clone(),
            self.potential.clone(),
            self.domain.clone(),
            epsilon,
        )?;
        s.eta_schedule = self.eta_schedule.clone();
        Ok(s)
    }

    pub fn eta_schedule(&self) -> &[f64] {
        &self.eta_schedule
    }

    /// Attaches a mollification schedule; it must be positive and strictly
    /// decreasing.
    pub fn set_eta_schedule(&mut self, etas: Vec<f64>) -> Result<()> {
        if etas.iter().any(|e| !(*e > 0.0)) || etas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::invalid(
                "eta_schedule",
                "entries must be positive and strictly decreasing",
            ));
        }
        self.eta_schedule = etas;
        Ok(())
    }

    /// Upper bound on the Lipschitz constant of `∇Φ_ε`: `1/ε` for the
    /// distance term (absent on the whole space) plus `min(L_U, 1/ε)` for
    /// the envelope.
    pub fn gradient_lipschitz_bound(&self) -> f64 {
        let inv = 1.0 / self.epsilon;
        let envelope = self.potential.gradient_lipschitz().map_or(inv, |l| l.min(inv));
        if matches!(self.domain, ConvexDomain::FullSpace) {
            envelope
        } else {
            inv + envelope
        }
    }

    /// `Φ_ε(x)` and `∇Φ_ε(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.model.dim(), x.len())?;
        let env = moreau_envelope(&self.potential, self.epsilon, x)?;
        let mut value = env.value;
        let mut grad = env.gradient;
        if !matches!(self.domain, ConvexDomain::FullSpace) {
            let p = self.domain.projected(x)?;
            let mut d2 = 0.0;
            for i in 0..x.len() {
                let r = x[i] - p[i];
                d2 += r * r;
                grad[i] += r / self.epsilon;
            }
            value += d2 / (2.0 * self.epsilon);
        }
        Ok((value, grad))
    }
}

/// `Φ_ε(ξ)` and its gradient for a scene.
pub fn penalized_potential(scene: &PenalizedScene, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    scene.evaluate(x)
}

impl Potential for PenalizedScene {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate(x)?.0)
    }

    /// Same gradient as [`PenalizedScene::evaluate`], without allocating
    /// when the potential has a closed-form prox and `n ≤ 8`. This is the
    /// inner loop of the Euler schemes.
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.model.dim(), x.len())?;
        if self.potential.prox(x, self.epsilon, out)? {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = -(*o - xi) / self.epsilon;
            }
        } else {
            out.copy_from_slice(&moreau_envelope(&self.potential, self.epsilon, x)?.gradient);
        }
        if !matches!(self.domain, ConvexDomain::FullSpace) {
            let mut stack = [0.0; 8];
            let mut heap = Vec::new();
            let p: &mut [f64] = if x.len() <= stack.len() {
                &mut stack[..x.len()]
            } else {
                heap.resize(x.len(), 0.0);
                &mut heap
            };
            self.domain.project(x, p)?;
            for i in 0..x.len() {
                out[i] += (x[i] - p[i]) / self.epsilon;
            }
        }
        Ok(())
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        Some(self.gradient_lipschitz_bound())
    }

    fn label(&self) -> String {
        format!(
            "penalized({}, {}, eps={})",
            self.potential.label(),
            self.domain.label(),
            self.epsilon
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(raw: &[f64]) -> GaussianModel {
        GaussianModel::from_eigenvalues(raw).unwrap()
    }

    #[test]
    fn examples() {
        let s = PenalizedScene::new(model(&[1.0]), ConvexPotential::Zero, ConvexDomain::FullSpace, 0.3).unwrap();
        assert_eq!(s.evaluate(&[1.7]).unwrap(), (0.0, vec![0.0]));

        let h = ConvexDomain::axis_half_space(1, 0, 0.0, true);
        let s = PenalizedScene::new(model(&[1.0]), ConvexPotential::Zero, h, 0.1).unwrap();
        let (v, g) = s.evaluate(&[1.0]).unwrap();
        assert!((v - 5.0).abs() < 1e-12 && (g[0] - 10.0).abs() < 1e-12);

        let s = PenalizedScene::new(model(&[1.0]), ConvexPotential::quadratic(1.0), ConvexDomain::FullSpace, 1.0).unwrap();
        let (v, g) = s.evaluate(&[2.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12 && (g[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(PenalizedScene::new(model(&[1.0]), ConvexPotential::Zero, ConvexDomain::FullSpace, 0.0).is_err());
        let mut s = PenalizedScene::new(model(&[1.0]), ConvexPotential::Zero, ConvexDomain::FullSpace, 0.1).unwrap();
        assert!(s.set_eta_schedule(vec![0.5, 0.5]).is_err());
        assert!(s.set_eta_schedule(vec![0.5, 0.25]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn envelope_bound_and_lipschitz(a in proptest::array::uniform2(-4f64..4.0), b in proptest::array::uniform2(-4f64..4.0), eps in 0.01f64..1.0) {
            let domains = [
                ConvexDomain::Ball { center: vec![0.0, 0.0], radius: 1.0 },
                ConvexDomain::HalfSpace { normal: vec![1.0, 1.0], offset: 0.2 },
            ];
            for d in domains {
                let u = ConvexPotential::Quadratic { curvature: vec![1.0, 2.0], center: vec![] };
                let s = PenalizedScene::new(model(&[1.0, 0.5]), u.clone(), d.clone(), eps).unwrap();
                let (va, ga) = s.evaluate(&a).unwrap();
                let (_, gb) = s.evaluate(&b).unwrap();
                let dist = d.distance(&a).unwrap();
                prop_assert!(va <= u.value(&a).unwrap() + dist * dist / (2.0 * eps) + 1e-10);
                let dg = ((ga[0] - gb[0]).powi(2) + (ga[1] - gb[1]).powi(2)).sqrt();
                let dx = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                prop_assert!(dg <= s.gradient_lipschitz_bound() * dx + 1e-8);
            }
        }

        #[test]
        fn fast_gradient_matches_evaluate(a in proptest::array::uniform2(-4f64..4.0), eps in 0.01f64..1.0) {
            let potentials = [
                ConvexPotential::Zero,
                ConvexPotential::quadratic(1.5),
                ConvexPotential::AbsSum { weight: 0.5 },
                ConvexPotential::LogCosh { weights: vec![1.0, 0.5], scale: 0.3 },
            ];
            for u in potentials {
                let s = PenalizedScene::new(model(&[1.0, 0.5]), u, ConvexDomain::Ball { center: vec![0.0, 0.0], radius: 1.0 }, eps).unwrap();
                let (_, expected) = s.evaluate(&a).unwrap();
                let mut g = [0.0; 2];
                s.gradient(&a, &mut g).unwrap();
                for i in 0..2 {
                    prop_assert!((g[i] - expected[i]).abs() <= 1e-12 * (1.0 + expected[i].abs()));
                }
            }
        }
    }
}
