use nalgebra::{DMatrix, DVector};

use super::potential::Potential;
use crate::error::{LabError, Result};

/// Gradient-norm tolerance of the proximal subproblem, relative to the size
/// of its data.
pub const PROX_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
const GRADIENT_MAX_ITER: usize = 100_000;

/// Value, gradient and proximal data of a Moreau envelope at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauEnvelope {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// The proximal point `x + h*`.
    pub minimizer: Vec<f64>,
    /// The optimal displacement `h*`; the envelope gradient is `−h*/ε`.
    pub displacement: Vec<f64>,
}

/// `argmin_y f(y) + |y − x|²/(2ε)`.
///
/// Uses the potential's closed-form prox when it has one, damped Newton when
/// Hessian-vector products are available, and accelerated gradient descent
/// with backtracking otherwise.
pub fn proximal_point<P: Potential + ?Sized>(f: &P, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::invalid("epsilon", "must be positive"));
    }
    let mut out = vec![0.0; x.len()];
    if f.prox(x, eps, &mut out)? {
        return Ok(out);
    }
    let mut probe = vec![0.0; x.len()];
    if f.hessian_vec(x, &vec![0.0; x.len()], &mut probe)? {
        newton_prox(f, eps, x)
    } else {
        accelerated_prox(f, eps, x)
    }
}

fn objective<P: Potential + ?Sized>(f: &P, eps: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let q: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(f.value(y)? + q / (2.0 * eps))
}

fn objective_gradient<P: Potential + ?Sized>(
    f: &P,
    eps: f64,
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
) -> Result<()> {
    f.gradient(y, out)?;
    for ((o, a), b) in out.iter_mut().zip(y).zip(x) {
        *o += (a - b) / eps;
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn tolerance<P: Potential + ?Sized>(f: &P, eps: f64, x: &[f64]) -> Result<f64> {
    let mut g = vec![0.0; x.len()];
    f.gradient(x, &mut g)?;
    Ok(PROX_TOL * (1.0 + norm(&g) + norm(x) / eps))
}

fn newton_prox<P: Potential + ?Sized>(f: &P, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let tol = tolerance(f, eps, x)?;
    let mut y = x.to_vec();
    let mut g = vec![0.0; n];
    let mut hv = vec![0.0; n];
    let mut basis = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        objective_gradient(f, eps, x, &y, &mut g)?;
        residual = norm(&g);
        if residual < tol {
            return Ok(y);
        }
        let mut h = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            basis.fill(0.0);
            basis[j] = 1.0;
            f.hessian_vec(&y, &basis, &mut hv)?;
            for i in 0..n {
                h[(i, j)] = hv[i];
            }
            h[(j, j)] += 1.0 / eps;
        }
        let h = (&h + h.transpose()) * 0.5;
        let rhs = DVector::from_column_slice(&g);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => rhs * eps,
        };
        let f0 = objective(f, eps, x, &y)?;
        let slope: f64 = -step.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let mut t = 1.0;
        loop {
            for i in 0..n {
                trial[i] = y[i] - t * step[i];
            }
            let ft = objective(f, eps, x, &trial)?;
            if ft <= f0 + 1e-4 * t * slope || t < 1e-12 {
                break;
            }
            // Near the optimum the objective decrease drowns in rounding;
            // fall back to the residual as the merit function.
            objective_gradient(f, eps, x, &trial, &mut hv)?;
            if norm(&hv) < 0.5 * residual {
                break;
            }
            t *= 0.5;
        }
        y.copy_from_slice(&trial);
    }
    objective_gradient(f, eps, x, &y, &mut g)?;
    let last = norm(&g);
    if last < tol {
        return Ok(y);
    }
    Err(LabError::ProxDidNotConverge {
        residual: last.min(residual),
        iterations: NEWTON_MAX_ITER,
    })
}

fn accelerated_prox<P: Potential + ?Sized>(f: &P, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let tol = tolerance(f, eps, x)?;
    let mut lip = f.gradient_lipschitz().unwrap_or(1.0 / eps) + 1.0 / eps;
    let mut y = x.to_vec();
    let mut z = x.to_vec();
    let mut y_prev = x.to_vec();
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut momentum = 1.0_f64;
    let mut residual = f64::INFINITY;
    for _ in 0..GRADIENT_MAX_ITER {
        objective_gradient(f, eps, x, &z, &mut g)?;
        let fz = objective(f, eps, x, &z)?;
        let gg: f64 = g.iter().map(|a| a * a).sum();
        loop {
            for i in 0..n {
                trial[i] = z[i] - g[i] / lip;
            }
            let ft = objective(f, eps, x, &trial)?;
            if ft <= fz - 0.5 * gg / lip + 1e-14 * fz.abs() || lip > 1e16 {
                break;
            }
            lip *= 2.0;
        }
        y_prev.copy_from_slice(&y);
        y.copy_from_slice(&trial);
        objective_gradient(f, eps, x, &y, &mut g)?;
        residual = norm(&g);
        if residual < tol {
            return Ok(y);
        }
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next;
        // Restart the momentum when it stops decreasing the objective.
        if objective(f, eps, x, &y)? > objective(f, eps, x, &y_prev)? {
            momentum = 1.0;
            z.copy_from_slice(&y);
        } else {
            momentum = next;
            for i in 0..n {
                z[i] = y[i] + beta * (y[i] - y_prev[i]);
            }
        }
    }
    Err(LabError::ProxDidNotConverge {
        residual,
        iterations: GRADIENT_MAX_ITER,
    })
}

/// Moreau envelope `f_ε(x) = min_h f(x + h) + |h|²/(2ε)` with its gradient.
pub fn moreau_envelope<P: Potential + ?Sized>(f: &P, eps: f64, x: &[f64]) -> Result<MoreauEnvelope> {
    let minimizer = proximal_point(f, eps, x)?;
    let displacement: Vec<f64> = minimizer.iter().zip(x).map(|(y, a)| y - a).collect();
    let q: f64 = displacement.iter().map(|h| h * h).sum();
    let mut value = f.value(&minimizer)? + q / (2.0 * eps);
    // The envelope never exceeds the function itself; clip rounding noise.
    let fx = f.value(x)?;
    if value > fx {
        value = fx;
    }
    let gradient = displacement.iter().map(|h| -h / eps).collect();
    Ok(MoreauEnvelope {
        value,
        gradient,
        minimizer,
        displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{ConvexDomain, ConvexPotential};
    use crate::oracle::closed_forms;
    use proptest::prelude::*;

    /// Wraps a potential and hides its closed-form prox so the iterative
    /// solvers are exercised.
    struct Opaque<'a>(&'a ConvexPotential, bool);

    impl Potential for Opaque<'_> {
        fn value(&self, x: &[f64]) -> Result<f64> {
            self.0.value(x)
        }
        fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
            self.0.gradient(x, out)
        }
        fn hessian_vec(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<bool> {
            if self.1 {
                self.0.hessian_vec(x, w, out)
            } else {
                Ok(false)
            }
        }
        fn gradient_lipschitz(&self) -> Option<f64> {
            self.0.gradient_lipschitz()
        }
        fn label(&self) -> String {
            self.0.label()
        }
    }

    #[test]
    fn quadratic_and_huber_closed_forms() {
        let q = ConvexPotential::quadratic(1.0);
        let a = ConvexPotential::AbsSum { weight: 1.0 };
        for &eps in &[0.01, 0.1, 1.0, 3.0] {
            for &x in &[-2.0, -0.05, 0.0, 0.003, 0.7, 4.0] {
                let exact = closed_forms::quadratic_moreau(1.0, eps, x);
                for solver in [true, false] {
                    let m = moreau_envelope(&Opaque(&q, solver), eps, &[x]).unwrap();
                    assert!((m.value - exact).abs() < 1e-10, "quadratic eps={eps} x={x}");
                }
                let m = moreau_envelope(&q, eps, &[x]).unwrap();
                assert!((m.value - exact).abs() < 1e-12);
                let h = moreau_envelope(&a, eps, &[x]).unwrap();
                assert!((h.value - closed_forms::huber(eps, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_cosh_solvers_agree() {
        let u = ConvexPotential::LogCosh {
            weights: vec![1.0, 2.0],
            scale: 0.3,
        };
        let x = [1.3, -0.4];
        let a = proximal_point(&Opaque(&u, true), 0.5, &x).unwrap();
        let b = proximal_point(&Opaque(&u, false), 0.5, &x).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-8 && (a[1] - b[1]).abs() < 1e-8);
    }

    fn envelope_battery() -> Vec<ConvexPotential> {
        vec![
            ConvexPotential::quadratic(2.0),
            ConvexPotential::AbsSum { weight: 1.0 },
            ConvexPotential::LogCosh {
                weights: vec![1.0, 1.0],
                scale: 0.5,
            },
            ConvexPotential::HalfSquaredDistance {
                domain: Box::new(ConvexDomain::Ball {
                    center: vec![0.0, 0.0],
                    radius: 1.0,
                }),
            },
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn envelope_monotone_in_epsilon(x in proptest::array::uniform2(-3f64..3.0), e in 0.01f64..2.0, ratio in 0.05f64..0.95) {
            for f in envelope_battery() {
                let fx = f.value(&x).unwrap();
                let big = moreau_envelope(&f, e, &x).unwrap().value;
                let small = moreau_envelope(&f, e * ratio, &x).unwrap().value;
                prop_assert!(big <= fx && small <= fx);
                prop_assert!(small >= big - 1e-8, "{}", f.label());
            }
        }
    }

    #[test]
    fn gradient_converges_for_smooth_potentials() {
        let f = ConvexPotential::Quadratic {
            curvature: vec![1.0, 3.0],
            center: vec![0.2, -0.1],
        };
        let x = [0.7, 0.4];
        let mut g = [0.0; 2];
        f.gradient(&x, &mut g).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            let eps = 0.5f64.powi(k);
            let m = moreau_envelope(&Opaque(&f, false), eps, &x).unwrap();
            let gap = ((m.gradient[0] - g[0]).powi(2) + (m.gradient[1] - g[1]).powi(2)).sqrt();
            assert!(gap <= prev + 1e-9);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }
}
