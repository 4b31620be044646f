use serde::{Deserialize, Serialize};

use super::domain::ConvexDomain;
use crate::error::{LabError, Result};

/// A convex function on `ℝⁿ` with its gradient.
///
/// Evaluation is fallible because some potentials are defined through an
/// iterative projection.
pub trait Potential: Send + Sync {
    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Writes a gradient (a subgradient at kinks) into `out`.
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Hessian-vector product, if available. Returns `Ok(false)` when the
    /// potential does not provide second derivatives.
    fn hessian_vec(&self, _x: &[f64], _w: &[f64], _out: &mut [f64]) -> Result<bool> {
        Ok(false)
    }

    /// Exact proximal point `argmin_y U(y) + |y − x|²/(2·step)`, if known in
    /// closed form. Returns `Ok(false)` otherwise.
    fn prox(&self, _x: &[f64], _step: f64, _out: &mut [f64]) -> Result<bool> {
        Ok(false)
    }

    /// Global Lipschitz constant of the gradient, when finite and known.
    fn gradient_lipschitz(&self) -> Option<f64>;

    fn label(&self) -> String;
}

/// Potentials that can be declared in an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexPotential {
    Zero,
    /// `½ Σ cᵢ (ξᵢ − aᵢ)²`. A single curvature is broadcast to all axes and a
    /// missing center means the origin.
    Quadratic {
        curvature: Vec<f64>,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `⟨a, ξ⟩`.
    Linear { coefficients: Vec<f64> },
    /// `Σ wᵢ s log cosh(ξᵢ / s)`: smooth, convex, asymptotically linear.
    LogCosh { weights: Vec<f64>, scale: f64 },
    /// `w Σ |ξᵢ|`.
    AbsSum { weight: f64 },
    /// `½ d_Ω(ξ)²`.
    HalfSquaredDistance { domain: Box<ConvexDomain> },
}

fn coef(v: &[f64], i: usize, broadcast: bool, fill: f64) -> f64 {
    match v.get(i) {
        Some(c) => *c,
        None if broadcast && v.len() == 1 => v[0],
        None => fill,
    }
}

impl ConvexPotential {
    pub fn quadratic(curvature: f64) -> Self {
        ConvexPotential::Quadratic {
            curvature: vec![curvature],
            center: Vec::new(),
        }
    }

    /// Checks parameter ranges against the ambient dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ConvexPotential::Zero => Ok(()),
            ConvexPotential::Quadratic { curvature, center } => {
                if curvature.is_empty() || (curvature.len() != 1 && curvature.len() != dim) {
                    return Err(LabError::invalid(
                        "curvature",
                        format!("needs 1 or {dim} entries"),
                    ));
                }
                if curvature.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
                    return Err(LabError::invalid("curvature", "entries must be >= 0"));
                }
                if !center.is_empty() && center.len() != dim {
                    return Err(LabError::DimensionMismatch {
                        expected: dim,
                        got: center.len(),
                    });
                }
                Ok(())
            }
            ConvexPotential::Linear { coefficients } => {
                if coefficients.len() > dim {
                    return Err(LabError::DimensionMismatch {
                        expected: dim,
                        got: coefficients.len(),
                    });
                }
                Ok(())
            }
            ConvexPotential::LogCosh { weights, scale } => {
                if !(*scale > 0.0) {
                    return Err(LabError::invalid("scale", "must be positive"));
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.len() > dim {
                    return Err(LabError::invalid(
                        "weights",
                        format!("at most {dim} non-negative entries"),
                    ));
                }
                Ok(())
            }
            ConvexPotential::AbsSum { weight } => {
                if !(*weight >= 0.0) {
                    return Err(LabError::invalid("weight", "must be >= 0"));
                }
                Ok(())
            }
            ConvexPotential::HalfSquaredDistance { domain } => domain.validate(dim),
        }
    }

    fn quad_params(&self, i: usize) -> (f64, f64) {
        match self {
            ConvexPotential::Quadratic { curvature, center } => {
                (coef(curvature, i, true, 0.0), coef(center, i, false, 0.0))
            }
            _ => unreachable!(),
        }
    }
}

impl Potential for ConvexPotential {
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            ConvexPotential::Zero => 0.0,
            ConvexPotential::Quadratic { .. } => (0..x.len())
                .map(|i| {
                    let (c, a) = self.quad_params(i);
                    0.5 * c * (x[i] - a) * (x[i] - a)
                })
                .sum(),
            ConvexPotential::Linear { coefficients } => {
                coefficients.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            ConvexPotential::LogCosh { weights, scale } => weights
                .iter()
                .zip(x)
                .map(|(w, xi)| w * scale * log_cosh(xi / scale))
                .sum(),
            ConvexPotential::AbsSum { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            ConvexPotential::HalfSquaredDistance { domain } => {
                let d = domain.distance(x)?;
                0.5 * d * d
            }
        })
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ConvexPotential::Zero => out.fill(0.0),
            ConvexPotential::Quadratic { .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let (c, a) = self.quad_params(i);
                    *o = c * (x[i] - a);
                }
            }
            ConvexPotential::Linear { coefficients } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = coef(coefficients, i, false, 0.0);
                }
            }
            ConvexPotential::LogCosh { weights, scale } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = coef(weights, i, false, 0.0) * (x[i] / scale).tanh();
                }
            }
            ConvexPotential::AbsSum { weight } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = if *xi > 0.0 {
                        *weight
                    } else if *xi < 0.0 {
                        -*weight
                    } else {
                        0.0
                    };
                }
            }
            ConvexPotential::HalfSquaredDistance { domain } => {
                domain.project(x, out)?;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi - *o;
                }
            }
        }
        Ok(())
    }

    fn hessian_vec(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<bool> {
        match self {
            ConvexPotential::Zero | ConvexPotential::Linear { .. } => out.fill(0.0),
            ConvexPotential::Quadratic { .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = self.quad_params(i).0 * w[i];
                }
            }
            ConvexPotential::LogCosh { weights, scale } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let th = (x[i] / scale).tanh();
                    *o = coef(weights, i, false, 0.0) / scale * (1.0 - th * th) * w[i];
                }
            }
            ConvexPotential::AbsSum { .. } | ConvexPotential::HalfSquaredDistance { .. } => {
                return Ok(false)
            }
        }
        Ok(true)
    }

    fn prox(&self, x: &[f64], step: f64, out: &mut [f64]) -> Result<bool> {
        match self {
            ConvexPotential::Zero => out.copy_from_slice(x),
            ConvexPotential::Quadratic { .. } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let (c, a) = self.quad_params(i);
                    *o = (x[i] + step * c * a) / (1.0 + step * c);
                }
            }
            ConvexPotential::Linear { coefficients } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = x[i] - step * coef(coefficients, i, false, 0.0);
                }
            }
            ConvexPotential::AbsSum { weight } => {
                let thr = step * weight;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi.signum() * (xi.abs() - thr).max(0.0);
                }
            }
            ConvexPotential::HalfSquaredDistance { domain } => {
                domain.project(x, out)?;
                let s = step / (1.0 + step);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi + s * (*o - xi);
                }
            }
            ConvexPotential::LogCosh { .. } => return Ok(false),
        }
        Ok(true)
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        match self {
            ConvexPotential::Zero | ConvexPotential::Linear { .. } => Some(0.0),
            ConvexPotential::Quadratic { curvature, .. } => {
                Some(curvature.iter().cloned().fold(0.0, f64::max))
            }
            ConvexPotential::LogCosh { weights, scale } => {
                Some(weights.iter().cloned().fold(0.0, f64::max) / scale)
            }
            ConvexPotential::AbsSum { weight } => (*weight == 0.0).then_some(0.0),
            ConvexPotential::HalfSquaredDistance { .. } => Some(1.0),
        }
    }

    fn label(&self) -> String {
        match self {
            ConvexPotential::Zero => "zero".into(),
            ConvexPotential::Quadratic { curvature, .. } => format!("quadratic{curvature:?}"),
            ConvexPotential::Linear { coefficients } => format!("linear{coefficients:?}"),
            ConvexPotential::LogCosh { weights, scale } => {
                format!("log_cosh{weights:?}/{scale}")
            }
            ConvexPotential::AbsSum { weight } => format!("abs_sum({weight})"),
            ConvexPotential::HalfSquaredDistance { domain } => {
                format!("half_sq_dist({})", domain.label())
            }
        }
    }
}

/// `log cosh(u)` without overflow.
fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn battery() -> Vec<ConvexPotential> {
        vec![
            ConvexPotential::Zero,
            ConvexPotential::Quadratic {
                curvature: vec![1.0, 3.0],
                center: vec![0.5, -1.0],
            },
            ConvexPotential::Linear {
                coefficients: vec![1.0, -2.0],
            },
            ConvexPotential::LogCosh {
                weights: vec![1.0, 0.5],
                scale: 0.7,
            },
            ConvexPotential::AbsSum { weight: 0.8 },
            ConvexPotential::HalfSquaredDistance {
                domain: Box::new(ConvexDomain::Ball {
                    center: vec![0.0, 0.0],
                    radius: 1.0,
                }),
            },
        ]
    }

    proptest! {
        #[test]
        fn midpoint_convexity(a in proptest::array::uniform2(-5f64..5.0), b in proptest::array::uniform2(-5f64..5.0)) {
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            for u in battery() {
                let ua = u.value(&a).unwrap();
                let ub = u.value(&b).unwrap();
                let um = u.value(&mid).unwrap();
                prop_assert!(um <= (ua + ub) / 2.0 + 1e-10 * (1.0 + ua.abs() + ub.abs()), "{}", u.label());
            }
        }

        #[test]
        fn gradient_matches_finite_differences(x in proptest::array::uniform2(-3f64..3.0)) {
            let h = 1e-5;
            for u in battery() {
                if matches!(u, ConvexPotential::AbsSum { .. }) && x.iter().any(|v| v.abs() < 1e-3) {
                    continue;
                }
                let mut g = [0.0; 2];
                u.gradient(&x, &mut g).unwrap();
                for i in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (u.value(&xp).unwrap() - u.value(&xm).unwrap()) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "{} axis {}", u.label(), i);
                }
            }
        }
    }

    #[test]
    fn log_cosh_is_stable() {
        assert!((log_cosh(0.3) - 0.3f64.cosh().ln()).abs() < 1e-15);
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-9);
    }

    #[test]
    fn config_round_trip() {
        for u in battery() {
            let s = toml::to_string(&Wrapper { potential: u.clone() }).unwrap();
            let back: Wrapper = toml::from_str(&s).unwrap();
            assert_eq!(back.potential, u);
        }
    }

    #[derive(Serialize, Deserialize)]
    struct Wrapper {
        potential: ConvexPotential,
    }
}
