//! Closed-form ground truths: the one-dimensional Mehler semigroup and a few
//! convex-analysis and Gaussian formulas.

use crate::error::{LabError, Result};
use crate::quadrature::{integrate, Integral};

/// Half-width of the standard-normal integration window.
pub const NORMAL_WINDOW: f64 = 8.0;
const QUAD_TOL: f64 = 1e-10;

/// One-dimensional Ornstein-Uhlenbeck semigroup with stationary variance
/// `lambda1`: `T(t)f(ξ) = E f(e^{−t/λ}ξ + √(λ(1 − e^{−2t/λ})) Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MehlerOU {
    lambda1: f64,
}

impl MehlerOU {
    pub fn new(lambda1: f64) -> Result<Self> {
        if !(lambda1 > 0.0) || !lambda1.is_finite() {
            return Err(LabError::NonPositiveEigenvalue {
                index: 0,
                value: lambda1,
            });
        }
        Ok(MehlerOU { lambda1 })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Mean contraction factor `e^{−t/λ}`.
    pub fn contraction(&self, t: f64) -> f64 {
        (-t / self.lambda1).exp()
    }

    /// Standard deviation of the noise term at time `t`.
    pub fn noise_sd(&self, t: f64) -> f64 {
        (self.lambda1 * -(-2.0 * t / self.lambda1).exp_m1()).sqrt()
    }

    /// `T(t)f(x)` by adaptive Gauss-Kronrod over the standard-normal variable
    /// on `(−8, 8)`. The returned error adds the quadrature estimate and the
    /// neglected Gaussian tail mass times the larger endpoint value.
    pub fn apply_with_error<F: Fn(f64) -> f64>(&self, f: F, t: f64, x: f64) -> Result<Integral> {
        if t < 0.0 || !t.is_finite() {
            return Err(LabError::invalid("t", "must be a finite non-negative time"));
        }
        if t == 0.0 {
            return Ok(Integral {
                value: f(x),
                error: 0.0,
            });
        }
        let c = self.contraction(t) * x;
        let s = self.noise_sd(t);
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let integrand = |z: f64| f(c + s * z) * norm * (-0.5 * z * z).exp();
        let body = integrate(integrand, -NORMAL_WINDOW, NORMAL_WINDOW, QUAD_TOL, QUAD_TOL, 4000)?;
        let tail_mass = statrs::function::erf::erfc(NORMAL_WINDOW / std::f64::consts::SQRT_2);
        let edge = f(c - s * NORMAL_WINDOW).abs().max(f(c + s * NORMAL_WINDOW).abs());
        Ok(Integral {
            value: body.value,
            error: body.error + tail_mass * edge,
        })
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, t: f64, x: f64) -> Result<f64> {
        Ok(self.apply_with_error(f, t, x)?.value)
    }

    /// Coefficients (lowest degree first) of `T(t)p` for a polynomial `p`.
    /// Exact for every degree via Gaussian moments.
    pub fn polynomial_image(&self, coeffs: &[f64], t: f64) -> Vec<f64> {
        let a = self.contraction(t);
        let s = self.noise_sd(t);
        let mut out = vec![0.0; coeffs.len()];
        for (k, &ck) in coeffs.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate().take(k + 1) {
                let m = k - j;
                if m % 2 == 1 {
                    continue;
                }
                *o += ck * binomial(k, j) * a.powi(j as i32) * s.powi(m as i32) * double_factorial(m);
            }
        }
        out
    }

    pub fn apply_polynomial(&self, coeffs: &[f64], t: f64, x: f64) -> f64 {
        horner(&self.polynomial_image(coeffs, t), x)
    }

    /// `T(t)e^{a·}(x) = exp(a e^{−t/λ} x + a² s²/2)`.
    pub fn apply_exponential(&self, a: f64, t: f64, x: f64) -> f64 {
        let s = self.noise_sd(t);
        (a * self.contraction(t) * x + 0.5 * a * a * s * s).exp()
    }
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(m − 1)!!`, the `m`-th moment of a standard normal for even `m`.
fn double_factorial(m: usize) -> f64 {
    let mut acc = 1.0;
    let mut k = m as i64 - 1;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Closed forms used as test fixtures.
pub mod closed_forms {
    use crate::error::{LabError, Result};

    /// Moreau envelope of `|x|` (the Huber function).
    pub fn huber(eps: f64, x: f64) -> f64 {
        if x.abs() <= eps {
            x * x / (2.0 * eps)
        } else {
            x.abs() - eps / 2.0
        }
    }

    /// Moreau envelope of `c x²/2`: `c x²/(2(1 + cε))`.
    pub fn quadratic_moreau(curvature: f64, eps: f64, x: f64) -> f64 {
        curvature * x * x / (2.0 * (1.0 + curvature * eps))
    }

    /// Distance from `x` to `{⟨a, ξ⟩ ≤ b}`.
    pub fn halfspace_distance(normal: &[f64], offset: f64, x: &[f64]) -> f64 {
        let dot: f64 = normal.iter().zip(x).map(|(a, b)| a * b).sum();
        let n: f64 = normal.iter().map(|a| a * a).sum::<f64>().sqrt();
        (dot - offset).max(0.0) / n
    }

    /// Projection of `x` on the closed ball of given center and radius.
    pub fn ball_projection(center: &[f64], radius: f64, x: &[f64]) -> Vec<f64> {
        let d: f64 = x
            .iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        if d <= radius {
            return x.to_vec();
        }
        x.iter()
            .zip(center)
            .map(|(a, c)| c + radius / d * (a - c))
            .collect()
    }

    /// `E|ξ|` for `ξ ~ N(0, λ)`, equal to the mean of the half-normal.
    pub fn halfnormal_mean(lambda: f64) -> f64 {
        (2.0 * lambda / std::f64::consts::PI).sqrt()
    }

    /// `E e^{aξ}` for `ξ ~ N(0, λ)`.
    pub fn gaussian_exp_moment(a: f64, lambda: f64) -> f64 {
        (0.5 * a * a * lambda).exp()
    }

    /// Scalar closed forms addressed by name with positional parameters:
    ///
    /// * `huber`: `[eps, x]`
    /// * `quadratic_moreau`: `[curvature, eps, x]`
    /// * `halfspace_distance`: `[a, b, x]` (one-dimensional)
    /// * `halfnormal_mean`: `[lambda]`
    /// * `gaussian_exp_moment`: `[a, lambda]`
    pub fn evaluate(name: &str, params: &[f64]) -> Result<f64> {
        let need = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(LabError::invalid(
                    "params",
                    format!("`{name}` takes {k} parameters, got {}", params.len()),
                ))
            }
        };
        match name {
            "huber" => {
                need(2)?;
                Ok(huber(params[0], params[1]))
            }
            "quadratic_moreau" => {
                need(3)?;
                Ok(quadratic_moreau(params[0], params[1], params[2]))
            }
            "halfspace_distance" => {
                need(3)?;
                Ok(halfspace_distance(&params[..1], params[1], &params[2..]))
            }
            "halfnormal_mean" => {
                need(1)?;
                Ok(halfnormal_mean(params[0]))
            }
            "gaussian_exp_moment" => {
                need(2)?;
                Ok(gaussian_exp_moment(params[0], params[1]))
            }
            other => Err(LabError::UnknownForm(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mehler_examples() {
        let o = MehlerOU::new(1.0).unwrap();
        assert!((o.apply(|x| x, 1.0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert!((o.apply_polynomial(&[0.0, 1.0], 1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let o2 = MehlerOU::new(2.0).unwrap();
        assert!((o2.apply_polynomial(&[0.0, 0.0, 1.0], 200.0, 1.3) - 2.0).abs() < 1e-12);
        assert_eq!(o.apply(|x| x.sin(), 0.0, 0.4).unwrap(), 0.4f64.sin());
    }

    #[test]
    fn quadrature_matches_exact_forms() {
        let o = MehlerOU::new(0.7).unwrap();
        let p = [0.3, -1.0, 0.5, 0.2, -0.1, 0.05];
        for &t in &[0.05, 0.4, 2.0] {
            for &x in &[-2.0, 0.0, 1.5] {
                let q = o.apply(|y| horner(&p, y), t, x).unwrap();
                assert!((q - o.apply_polynomial(&p, t, x)).abs() < 1e-9);
                let e = o.apply(|y| (0.8 * y).exp(), t, x).unwrap();
                assert!((e / o.apply_exponential(0.8, t, x) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_values() {
        use closed_forms::*;
        assert!((huber(0.1, 0.05) - 0.0125).abs() < 1e-16);
        assert!((gaussian_exp_moment(1.0, 1.0) - 0.5f64.exp()).abs() < 1e-15);
        assert!((halfnormal_mean(1.0) - 0.797_884_560_802_865_4).abs() < 1e-15);
        assert!((evaluate("huber", &[0.1, 0.05]).unwrap() - 0.0125).abs() < 1e-16);
        assert_eq!(evaluate("halfspace_distance", &[2.0, 1.0, 3.0]).unwrap(), 2.5);
        assert!(matches!(evaluate("nope", &[]), Err(LabError::UnknownForm(_))));
    }

    proptest! {
        #[test]
        fn semigroup_law(t in 0.01f64..2.0, s in 0.01f64..2.0, lam in 0.2f64..3.0,
                         c in proptest::collection::vec(-2f64..2.0, 1..6)) {
            let o = MehlerOU::new(lam).unwrap();
            let composed = o.polynomial_image(&o.polynomial_image(&c, s), t);
            let direct = o.polynomial_image(&c, t + s);
            for (a, b) in composed.iter().zip(&direct) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn gradient_commutation(t in 0.01f64..2.0, lam in 0.2f64..3.0, x in -2f64..2.0,
                                c in proptest::collection::vec(-2f64..2.0, 2..6)) {
            let o = MehlerOU::new(lam).unwrap();
            let h = 1e-5;
            let fd = (o.apply_polynomial(&c, t, x + h) - o.apply_polynomial(&c, t, x - h)) / (2.0 * h);
            let deriv: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
            let rhs = o.contraction(t) * o.apply_polynomial(&deriv, t, x);
            prop_assert!((fd - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));

            let g = |y: f64| (1.3 * y).sin();
            let fq = (o.apply(g, t, x + h).unwrap() - o.apply(g, t, x - h).unwrap()) / (2.0 * h);
            let rq = o.contraction(t) * o.apply(|y| 1.3 * (1.3 * y).cos(), t, x).unwrap();
            prop_assert!((fq - rq).abs() < 2e-5);
        }
    }
}
