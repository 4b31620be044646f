//! Lyapunov constant for the test function `g(ξ) = 1 + |ξ|²`.
//!
//! For convex `φ`, `L_φ g(ξ) = 2n + 2⟨Bξ − ∇φ(ξ), ξ⟩ ≤ 2n − 2β|ξ|² + 2|∇φ(0)||ξ|`,
//! so `L_φ g ≤ λ g` holds everywhere once `λ` dominates the radial ratio
//! `(2n − 2βr² + 2|∇φ(0)|r)/(1 + r²)`.

use crate::convex::Potential;
use crate::error::{check_dim, Result};
use crate::spectral::GaussianModel;

const RADIAL_NODES: usize = 20_000;

fn ratio(n: f64, beta: f64, slope: f64, r: f64) -> f64 {
    (2.0 * n - 2.0 * beta * r * r + 2.0 * slope * r) / (1.0 + r * r)
}

/// Smallest `λ` on a radial grid (refined by golden section) with
/// `2n − 2β r² + 2|∇φ(0)| r ≤ λ(1 + r²)` for all `r ≥ 0`.
pub fn lyapunov_lambda(model: &GaussianModel, phi: &dyn Potential) -> Result<f64> {
    let n = model.dim();
    let mut g0 = vec![0.0; n];
    phi.gradient(&vec![0.0; n], &mut g0)?;
    let slope = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let beta = model.beta();
    let nf = n as f64;
    let r_max = 10.0 * (1.0 + slope / beta + (nf / beta).sqrt());
    let h = r_max / RADIAL_NODES as f64;
    let (mut best_r, mut best) = (0.0, ratio(nf, beta, slope, 0.0));
    for i in 1..=RADIAL_NODES {
        let r = i as f64 * h;
        let v = ratio(nf, beta, slope, r);
        if v > best {
            best = v;
            best_r = r;
        }
    }
    let (mut a, mut b) = ((best_r - h).max(0.0), best_r + h);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if ratio(nf, beta, slope, c) > ratio(nf, beta, slope, d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(best.max(ratio(nf, beta, slope, 0.5 * (a + b))))
}

/// `L_φ g(ξ) − λ g(ξ)` for `g = 1 + |ξ|²`.
pub fn lyapunov_residual(model: &GaussianModel, phi: &dyn Potential, lambda: f64, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let mut grad = vec![0.0; x.len()];
    phi.gradient(x, &mut grad)?;
    let mut lin = vec![0.0; x.len()];
    model.linear_drift(x, &mut lin);
    let drift: f64 = (0..x.len()).map(|i| (lin[i] - grad[i]) * x[i]).sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    Ok(2.0 * x.len() as f64 + 2.0 * drift - lambda * (1.0 + sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::ConvexPotential;
    use proptest::prelude::*;

    #[test]
    fn unperturbed_values() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        assert!((lyapunov_lambda(&m, &ConvexPotential::Zero).unwrap() - 2.0).abs() < 1e-12);
        let m3 = GaussianModel::from_eigenvalues(&[2.0, 1.0, 0.5]).unwrap();
        assert!(lyapunov_lambda(&m3, &ConvexPotential::quadratic(1.0)).unwrap() <= 6.0 + 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_in_slope_and_certifies(s in 0f64..5.0, k in 1f64..3.0, lam in 0.3f64..3.0,
                                           x in proptest::array::uniform2(-10f64..10.0)) {
            let m = GaussianModel::from_eigenvalues(&[lam, 0.5 * lam]).unwrap();
            let small = ConvexPotential::Linear { coefficients: vec![s, 0.0] };
            let large = ConvexPotential::Linear { coefficients: vec![k * s, 0.0] };
            let a = lyapunov_lambda(&m, &small).unwrap();
            let b = lyapunov_lambda(&m, &large).unwrap();
            prop_assert!(b >= a - 1e-12);
            prop_assert!(lyapunov_residual(&m, &small, a, &x).unwrap() <= 1e-9);
        }
    }
}
