//! Elliptic resolvent `v = ∫₀^∞ e^{−λt} T(t)f dt` by Laplace quadrature of
//! streamed grid solutions.
//!
//! Between consecutive snapshots the semigroup is replaced by its linear
//! interpolant and multiplied by `e^{−λt}` exactly. The quadrature error is
//! estimated by repeating the sum on every other snapshot, and the integral
//! is cut where `e^{−λt}·sup|f|` falls below [`TAIL_LEVEL`].

use super::grid::{stream_parabolic_grid, GridField, GridSpec, Scheme};
use crate::convex::Potential;
use crate::error::{LabError, Result};
use crate::spectral::GaussianModel;

/// Truncation level of the Laplace integral.
pub const TAIL_LEVEL: f64 = 1e-10;
/// Largest number of snapshots one resolvent may use.
pub const MAX_SNAPSHOTS: usize = 10_000;
const FIRST_SNAPSHOT: f64 = 1e-3;
const GROWTH: f64 = 1.2;
/// Cap on the snapshot spacing in units of `λ₁`.
const SPACING_CAP: f64 = 0.05;

/// A computed resolvent together with its error budget and a-priori bounds.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub field: GridField,
    pub lambda: f64,
    /// Sup over nodes of the gradient norm of `v`.
    pub gradient_sup: f64,
    /// Sup norm of the datum on the grid.
    pub datum_sup: f64,
    /// Interpolation error of the Laplace quadrature plus the truncated tail.
    pub quadrature_error: f64,
    /// Sup of the gradient of the same quadrature difference, plus the
    /// gradient bound applied to the truncated tail.
    pub quadrature_gradient_error: f64,
    /// Difference against the half-resolution solve, for values and for the
    /// gradient sup.
    pub value_discretization: f64,
    pub gradient_discretization: f64,
    pub snapshots: usize,
    pub horizon: f64,
    pub scheme_used: Scheme,
}

impl ResolventSolution {
    /// `‖f‖∞/λ`.
    pub fn value_bound(&self) -> f64 {
        self.datum_sup / self.lambda
    }

    /// `√(π/(βλ))·‖f‖∞`.
    pub fn gradient_bound(&self, beta: f64) -> f64 {
        (std::f64::consts::PI / (beta * self.lambda)).sqrt() * self.datum_sup
    }
}

/// Snapshot times `0 = t₀ < t₁ < … ≤ horizon`: geometric growth from the
/// first step with the spacing capped at `SPACING_CAP·λ₁`.
pub fn snapshot_times(dt: f64, lambda1: f64, horizon: f64) -> Result<Vec<f64>> {
    let mut times = vec![0.0];
    let mut t = dt.max(FIRST_SNAPSHOT);
    let cap = SPACING_CAP * lambda1;
    loop {
        times.push(t.min(horizon));
        if t >= horizon {
            break;
        }
        if times.len() > MAX_SNAPSHOTS {
            return Err(LabError::QuadratureBudgetExceeded(format!(
                "more than {MAX_SNAPSHOTS} snapshots needed to reach t = {horizon}"
            )));
        }
        t += (t * (GROWTH - 1.0)).min(cap);
    }
    Ok(times)
}

/// Weights `(wa, wb)` with `∫_a^b e^{−λs} ℓ(s) ds = wa·ℓ(a) + wb·ℓ(b)` for
/// linear `ℓ`.
fn segment_weights(lambda: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let ea = (-lambda * a).exp();
    let x = lambda * h;
    // Integrals of e^{−λ(a+s)} times s/h and (1 − s/h) over s ∈ [0, h].
    let wb = if x < 1e-3 {
        ea * h * (0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0)
    } else {
        let eb = (-lambda * b).exp();
        (ea - eb * (1.0 + x)) / (lambda * lambda * h)
    };
    let total = if x < 1e-3 {
        ea * h * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        (ea - (-lambda * b).exp()) / lambda
    };
    (total - wb, wb)
}

struct Accumulator {
    lambda: f64,
    fine: Vec<f64>,
    coarse: Vec<f64>,
    prev: Option<(f64, Vec<f64>)>,
    /// Start of the pending coarse interval and its values.
    anchor: Option<(f64, Vec<f64>)>,
    pending_odd: bool,
    sup: f64,
}

impl Accumulator {
    fn new(lambda: f64, len: usize) -> Self {
        Accumulator {
            lambda,
            fine: vec![0.0; len],
            coarse: vec![0.0; len],
            prev: None,
            anchor: None,
            pending_odd: false,
            sup: 0.0,
        }
    }

    fn add(target: &mut [f64], wa: f64, va: &[f64], wb: f64, vb: &[f64]) {
        for ((t, a), b) in target.iter_mut().zip(va).zip(vb) {
            *t += wa * a + wb * b;
        }
    }

    fn push(&mut self, t: f64, v: &[f64]) {
        self.sup = self.sup.max(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        if let Some((ta, va)) = &self.prev {
            let (wa, wb) = segment_weights(self.lambda, *ta, t);
            Self::add(&mut self.fine, wa, va, wb, v);
        }
        match (&self.anchor, self.pending_odd) {
            (None, _) => {
                self.anchor = Some((t, v.to_vec()));
                self.pending_odd = false;
            }
            (Some(_), false) => self.pending_odd = true,
            (Some((ta, va)), true) => {
                let (wa, wb) = segment_weights(self.lambda, *ta, t);
                Self::add(&mut self.coarse, wa, va, wb, v);
                self.anchor = Some((t, v.to_vec()));
                self.pending_odd = false;
            }
        }
        self.prev = Some((t, v.to_vec()));
    }

    /// Closes a dangling odd interval with the fine rule so it does not
    /// contribute to the error estimate.
    fn finish(mut self) -> (Vec<f64>, Vec<f64>, f64) {
        if self.pending_odd {
            if let (Some((ta, va)), Some((tb, vb))) = (&self.anchor, &self.prev) {
                let (wa, wb) = segment_weights(self.lambda, *ta, *tb);
                Self::add(&mut self.coarse, wa, va, wb, vb);
            }
        }
        (self.fine, self.coarse, self.sup)
    }
}

struct Pass {
    field: GridField,
    quadrature_error: f64,
    quadrature_gradient_error: f64,
    gradient_sup: f64,
    snapshots: usize,
    horizon: f64,
    scheme: Scheme,
    datum_sup: f64,
}

fn single_pass<F>(model: &GaussianModel, phi: &dyn Potential, f: &F, lambda: f64, grid: &GridSpec) -> Result<Pass>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let datum = GridField::sample(grid, f);
    let datum_sup = datum.sup_norm();
    let horizon = if datum_sup > TAIL_LEVEL {
        (datum_sup / TAIL_LEVEL).ln() / lambda
    } else {
        grid.dt
    };
    let times = snapshot_times(grid.dt, model.lambda1(), horizon)?;
    let mut acc = Accumulator::new(lambda, grid.len());
    let scheme = stream_parabolic_grid(model, phi, f, &times, grid, |k, v| {
        if k == 0 {
            acc = Accumulator::new(lambda, grid.len());
        }
        acc.push(times[k], v);
        true
    })?;
    let (fine, coarse, sup) = acc.finish();
    let interp = fine
        .iter()
        .zip(&coarse)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let tail = (-lambda * horizon).exp() * sup / lambda;
    let difference = GridField {
        grid: grid.clone(),
        values: fine.iter().zip(&coarse).map(|(a, b)| a - b).collect(),
    };
    let grad_interp = difference.gradient_norm().iter().fold(0.0f64, |m, g| m.max(*g));
    let tail_gradient = (std::f64::consts::PI * model.lambda1() / lambda).sqrt() * (-lambda * horizon).exp() * sup;
    let field = GridField {
        grid: grid.clone(),
        values: fine,
    };
    let gradient_sup = field.gradient_norm().iter().fold(0.0f64, |m, g| m.max(*g));
    Ok(Pass {
        field,
        quadrature_error: interp + tail,
        quadrature_gradient_error: grad_interp + tail_gradient,
        gradient_sup,
        snapshots: times.len(),
        horizon,
        scheme,
        datum_sup,
    })
}

/// Resolvent of the grid problem at `λ > 0`. With `grid.richardson` a
/// half-resolution solve supplies the discretization estimates.
pub fn resolvent_elliptic<F>(
    model: &GaussianModel,
    phi: &dyn Potential,
    f: F,
    lambda: f64,
    grid: &GridSpec,
) -> Result<ResolventSolution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(LabError::invalid("lambda", "resolvent parameter must be positive"));
    }
    let fine = single_pass(model, phi, &f, lambda, grid)?;
    let (value_disc, grad_disc, quad_extra, grad_quad_extra) = if grid.richardson {
        let cg = grid.coarsened()?;
        let coarse = single_pass(model, phi, &f, lambda, &cg)?;
        let on_fine = coarse.field.resampled(grid);
        let vd = fine
            .field
            .values
            .iter()
            .zip(&on_fine.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        (
            vd,
            (fine.gradient_sup - coarse.gradient_sup).abs(),
            coarse.quadrature_error,
            coarse.quadrature_gradient_error,
        )
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    Ok(ResolventSolution {
        field: fine.field,
        lambda,
        gradient_sup: fine.gradient_sup,
        datum_sup: fine.datum_sup,
        quadrature_error: fine.quadrature_error.max(quad_extra),
        quadrature_gradient_error: fine.quadrature_gradient_error.max(grad_quad_extra),
        value_discretization: value_disc,
        gradient_discretization: grad_disc,
        snapshots: fine.snapshots,
        horizon: fine.horizon,
        scheme_used: fine.scheme,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{ConvexDomain, ConvexPotential};

    #[test]
    fn segment_weights_integrate_linear_functions() {
        for &(l, a, b) in &[(1.0, 0.0, 1e-5), (0.5, 1.0, 3.0), (2.0, 0.3, 0.31)] {
            let (wa, wb) = segment_weights(l, a, b);
            let e = |t: f64| (-l * t).exp();
            let exact_const = (e(a) - e(b)) / l;
            assert!((wa + wb - exact_const).abs() < 1e-14 * (1.0 + exact_const));
            // ∫ e^{-λs} s ds
            let prim = |t: f64| -e(t) * (t / l + 1.0 / (l * l));
            let exact_lin = prim(b) - prim(a);
            assert!((wa * a + wb * b - exact_lin).abs() < 1e-12 * (1.0 + exact_lin.abs()));
        }
    }

    #[test]
    fn snapshot_budget_is_enforced() {
        assert!(matches!(
            snapshot_times(1e-3, 1e-6, 1e3),
            Err(LabError::QuadratureBudgetExceeded(_))
        ));
        let t = snapshot_times(1e-3, 1.0, 10.0).unwrap();
        assert_eq!(*t.last().unwrap(), 10.0);
        assert!(t.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.05 + 1e-12));
    }

    #[test]
    fn constants_and_linear_datum() {
        let m = GaussianModel::from_eigenvalues(&[1.0]).unwrap();
        let g = GridSpec::covering(&m, &ConvexDomain::FullSpace, 201, 1e-2, Scheme::CrankNicolson, 8.0).unwrap();
        let r = resolvent_elliptic(&m, &ConvexPotential::Zero, |_| 1.0, 2.0, &g).unwrap();
        assert!(r.field.values.iter().all(|v| (v - 0.5).abs() < 1e-9));
        let r = resolvent_elliptic(&m, &ConvexPotential::Zero, |x| x[0], 1.0, &g).unwrap();
        for k in 0..g.len() {
            let x = g.point(k)[0];
            if x.abs() <= 3.0 {
                let err = (r.field.values[k] - x / 2.0).abs();
                assert!(err < 1e-3 && err <= r.quadrature_error + r.value_discretization + 1e-4, "{x} {err}");
            }
        }
    }
}
