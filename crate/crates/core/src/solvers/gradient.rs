//! Gradients of computed semigroups.

use super::grid::GridField;
use super::mc::{observe, simulate_coupled, Dynamics, McSettings, Member};
use crate::error::{check_dim, Result};
use crate::stats::batch_means;

/// Relative displacement (in units of `√λᵢ`) of the Monte Carlo
/// finite-difference gradient.
pub const MC_DISPLACEMENT: f64 = 1e-3;

/// Grid gradient: one array of partial derivatives per axis.
pub fn grid_gradient(field: &GridField) -> Vec<Vec<f64>> {
    (0..field.grid.dim()).map(|a| field.derivative(a)).collect()
}

/// A Monte Carlo gradient estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McGradient {
    pub value: Vec<f64>,
    /// 95% half-width of each partial derivative.
    pub ci_half_width: Vec<f64>,
    /// Displacement used on each axis.
    pub displacement: Vec<f64>,
}

/// Displaced starting points `x ± δᵢeᵢ` for every axis, in the order
/// `(+e₀, −e₀, +e₁, −e₁, …)`. For reflected dynamics the points are
/// projected onto the domain.
pub fn displaced_starts(dynamics: &Dynamics, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let model = dynamics.model();
    let mut starts = Vec::with_capacity(2 * x.len());
    let mut deltas = Vec::with_capacity(x.len());
    for (i, l) in model.variances().iter().enumerate() {
        let d = MC_DISPLACEMENT * l.sqrt();
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[i] += d;
        minus[i] -= d;
        if let Dynamics::Reflected { domain, .. } = dynamics {
            plus = domain.projected(&plus)?;
            minus = domain.projected(&minus)?;
        }
        deltas.push(plus[i] - minus[i]);
        starts.push(plus);
        starts.push(minus);
    }
    Ok((starts, deltas))
}

/// Central finite differences of `T(t)f` at `x` with common random numbers:
/// both displaced starts of every axis are driven by the same noise.
pub fn mc_gradient<F: Fn(&[f64]) -> f64 + Sync>(
    dynamics: Dynamics,
    f: &F,
    t: f64,
    x: &[f64],
    settings: &McSettings,
) -> Result<McGradient> {
    let n = dynamics.dim();
    check_dim(n, x.len())?;
    let (starts, deltas) = displaced_starts(&dynamics, x)?;
    let members: Vec<Member> = starts
        .into_iter()
        .map(|start| Member { dynamics, start })
        .collect();
    let states = simulate_coupled(&members, &[t], settings)?;
    let mut value = Vec::with_capacity(n);
    let mut ci = Vec::with_capacity(n);
    for i in 0..n {
        let plus = observe(&states[0][2 * i], n, f);
        let minus = observe(&states[0][2 * i + 1], n, f);
        let diff: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / deltas[i]).collect();
        let est = batch_means(&diff, settings.batches)?;
        value.push(est.mean);
        ci.push(est.half_width);
    }
    Ok(McGradient {
        value,
        ci_half_width: ci,
        displacement: deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{ConvexDomain, ConvexPotential, PenalizedScene};
    use crate::solvers::grid::{solve_parabolic_grid, GridSpec, Scheme};
    use crate::spectral::GaussianModel;

    #[test]
    fn linear_datum_gradient_is_contraction_factor() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let scene = PenalizedScene::new(m.clone(), ConvexPotential::Zero, ConvexDomain::FullSpace, 1.0).unwrap();
        let g = mc_gradient(Dynamics::Penalized(&scene), &|x: &[f64]| x[0], 0.7, &[0.4], &McSettings::new(4000, 1e-2, 3)).unwrap();
        let expected = (1.0f64 - 1e-2).powi(70);
        assert!((g.value[0] - expected).abs() < 1e-9, "{g:?}");
        let c = mc_gradient(Dynamics::Penalized(&scene), &|_: &[f64]| 3.0, 0.7, &[0.4], &McSettings::new(400, 1e-2, 3)).unwrap();
        assert_eq!(c.value[0], 0.0);
    }

    #[test]
    fn even_datum_has_zero_gradient_at_origin() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let grid = GridSpec::covering(&m, &ConvexDomain::FullSpace, 401, 1e-3, Scheme::CrankNicolson, 8.0).unwrap();
        let sol = solve_parabolic_grid(&m, &ConvexPotential::Zero, |x| x[0] * x[0], &[0.5], &grid).unwrap();
        let d = grid_gradient(&sol.field(0));
        assert!(d[0][200].abs() < 1e-10);
        let o = crate::oracle::MehlerOU::new(1.0).unwrap();
        let k = 260;
        let x = grid.point(k)[0];
        assert!((d[0][k] - 2.0 * o.contraction(0.5).powi(2) * x).abs() < 1e-4);
    }
}
