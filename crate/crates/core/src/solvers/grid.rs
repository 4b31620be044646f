//! Finite-difference solver for `∂ₜv = Δv + ⟨Bξ − ∇φ, ∇v⟩` on a box with
//! homogeneous Neumann conditions, in one or two dimensions.
//!
//! Space: second differences for diffusion, central differences for
//! convection where the cell Péclet number `|b|h/2` is at most one and upwind
//! differences elsewhere. At boundary nodes the Neumann condition is imposed
//! through a mirrored ghost node, which removes the convection term.
//!
//! Time: Crank-Nicolson (with two implicit-Euler start-up steps taken as four
//! half steps) or implicit Euler; in two dimensions the axes are combined by
//! Strang splitting. A maximum-principle monitor falls back to implicit Euler
//! when Crank-Nicolson overshoots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{ConvexDomain, Potential};
use crate::error::{check_dim, LabError, Result};
use crate::spectral::{log_density_gaussian, GaussianModel};

/// Minimum box half-width in units of `√λᵢ`.
pub const MIN_HALF_WIDTH: f64 = 4.0;
/// Default box half-width in units of `√λᵢ`.
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
/// Slack of the maximum-principle monitor, relative to the data range.
const MONITOR_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    #[default]
    CrankNicolson,
}

/// A tensor grid on a box `[lower, upper]` with time step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nodes per axis; odd so that a half-resolution grid is nested.
    pub nodes: Vec<usize>,
    pub dt: f64,
    pub scheme: Scheme,
    /// Whether to also solve on the half-resolution grid for error estimates.
    pub richardson: bool,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nodes: Vec<usize>, dt: f64, scheme: Scheme) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || dim > 2 {
            return Err(LabError::invalid("grid", "the grid solver supports 1 or 2 dimensions"));
        }
        check_dim(dim, upper.len())?;
        check_dim(dim, nodes.len())?;
        for a in 0..dim {
            if !(lower[a] < upper[a]) || !lower[a].is_finite() || !upper[a].is_finite() {
                return Err(LabError::invalid("grid", "box bounds must be finite with lower < upper"));
            }
            if nodes[a] < 9 || nodes[a].is_multiple_of(2) {
                return Err(LabError::invalid("nodes", "need an odd node count of at least 9 per axis"));
            }
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(LabError::UnstableStep(format!("time step {dt} must be positive and finite")));
        }
        Ok(GridSpec {
            lower,
            upper,
            nodes,
            dt,
            scheme,
            richardson: true,
        })
    }

    /// Box centred at the origin with half-width `factor·√λᵢ` per axis
    /// (never below [`MIN_HALF_WIDTH`]), widened by the bounding box of the
    /// domain where that is finite.
    pub fn covering(
        model: &GaussianModel,
        domain: &ConvexDomain,
        nodes: usize,
        dt: f64,
        scheme: Scheme,
        factor: f64,
    ) -> Result<Self> {
        let dim = model.dim();
        let factor = factor.max(MIN_HALF_WIDTH);
        let (blo, bhi) = domain.bounding_box(dim);
        let mut lower = Vec::with_capacity(dim);
        let mut upper = Vec::with_capacity(dim);
        for (a, l) in model.variances().iter().enumerate() {
            let r = factor * l.sqrt();
            let lo_extra = if blo[a].is_finite() { blo[a].min(0.0) } else { 0.0 };
            let hi_extra = if bhi[a].is_finite() { bhi[a].max(0.0) } else { 0.0 };
            lower.push(-r + lo_extra);
            upper.push(r + hi_extra);
        }
        GridSpec::new(lower, upper, vec![nodes; dim], dt, scheme)
    }

    /// Intersects the box with per-axis bounds (infinite bounds are ignored).
    pub fn clipped(&self, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        for a in 0..self.dim() {
            if lo[a].is_finite() {
                out.lower[a] = out.lower[a].max(lo[a]);
            }
            if hi[a].is_finite() {
                out.upper[a] = out.upper[a].min(hi[a]);
            }
            if !(out.lower[a] < out.upper[a]) {
                return Err(LabError::invalid("grid", "domain does not meet the computational box"));
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.nodes[axis] - 1) as f64
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.nodes[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.spacing(axis)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat node index (axis 0 varies fastest).
    pub fn index(&self, k: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [k, 0]
        } else {
            [k % self.nodes[0], k / self.nodes[0]]
        }
    }

    pub fn flat(&self, i: [usize; 2]) -> usize {
        if self.dim() == 1 {
            i[0]
        } else {
            i[0] + self.nodes[0] * i[1]
        }
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        let idx = self.index(k);
        (0..self.dim()).map(|a| self.coordinate(a, idx[a])).collect()
    }

    /// Whether a node lies at least `layers` nodes away from every face.
    pub fn is_interior(&self, k: usize, layers: usize) -> bool {
        let idx = self.index(k);
        (0..self.dim()).all(|a| idx[a] >= layers && idx[a] + layers < self.nodes[a])
    }

    /// The nested grid with half the resolution and twice the time step.
    pub fn coarsened(&self) -> Result<Self> {
        let nodes: Vec<usize> = self.nodes.iter().map(|n| n.div_ceil(2)).collect();
        if nodes.iter().any(|n| *n < 5) {
            return Err(LabError::invalid("nodes", "grid too small to coarsen"));
        }
        Ok(GridSpec {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            nodes,
            dt: 2.0 * self.dt,
            scheme: self.scheme,
            richardson: false,
        })
    }

    /// Trapezoidal cell volume attached to each node.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let idx = self.index(k);
                (0..self.dim())
                    .map(|a| {
                        let h = self.spacing(a);
                        if idx[a] == 0 || idx[a] + 1 == self.nodes[a] {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect()
    }
}

/// Values of a function on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn sample<F: Fn(&[f64]) -> f64 + Sync>(grid: &GridSpec, f: F) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|k| f(&grid.point(k))).collect();
        GridField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation; points outside the box are clamped to it.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let mut base = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..g.dim() {
            let s = ((x[a] - g.lower[a]) / g.spacing(a)).clamp(0.0, (g.nodes[a] - 1) as f64);
            let i = (s.floor() as usize).min(g.nodes[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        if g.dim() == 1 {
            let v0 = self.values[base[0]];
            let v1 = self.values[base[0] + 1];
            return v0 + frac[0] * (v1 - v0);
        }
        let at = |i: usize, j: usize| self.values[g.flat([base[0] + i, base[1] + j])];
        let (fx, fy) = (frac[0], frac[1]);
        (1.0 - fx) * (1.0 - fy) * at(0, 0)
            + fx * (1.0 - fy) * at(1, 0)
            + (1.0 - fx) * fy * at(0, 1)
            + fx * fy * at(1, 1)
    }

    /// Interpolates onto another grid covering the same box.
    pub fn resampled(&self, target: &GridSpec) -> GridField {
        GridField::sample(target, |x| self.interpolate(x))
    }

    /// Partial derivative along `axis`: fourth-order central differences,
    /// second order one node from the faces and one-sided second order on them.
    pub fn derivative(&self, axis: usize) -> Vec<f64> {
        self.derivative_with(axis, true)
    }

    /// Same as [`derivative`](Self::derivative) with second-order central
    /// differences everywhere in the interior.
    pub fn derivative_second_order(&self, axis: usize) -> Vec<f64> {
        self.derivative_with(axis, false)
    }

    fn derivative_with(&self, axis: usize, fourth: bool) -> Vec<f64> {
        let g = &self.grid;
        let h = g.spacing(axis);
        let n = g.nodes[axis];
        let stride = if axis == 0 { 1 } else { g.nodes[0] };
        (0..g.len())
            .map(|k| {
                let i = g.index(k)[axis];
                let v = |off: isize| self.values[(k as isize + off * stride as isize) as usize];
                if i == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                } else if i + 1 == n {
                    (3.0 * v(0) - 4.0 * v(-1) + v(-2)) / (2.0 * h)
                } else if !fourth || i == 1 || i + 2 == n {
                    (v(1) - v(-1)) / (2.0 * h)
                } else {
                    (-v(2) + 8.0 * v(1) - 8.0 * v(-1) + v(-2)) / (12.0 * h)
                }
            })
            .collect()
    }

    /// Euclidean norm of the gradient at every node.
    pub fn gradient_norm(&self) -> Vec<f64> {
        let parts: Vec<Vec<f64>> = (0..self.grid.dim()).map(|a| self.derivative(a)).collect();
        (0..self.grid.len())
            .map(|k| parts.iter().map(|p| p[k] * p[k]).sum::<f64>().sqrt())
            .collect()
    }

    pub fn gradient_norm_second_order(&self) -> Vec<f64> {
        let parts: Vec<Vec<f64>> = (0..self.grid.dim())
            .map(|a| self.derivative_second_order(a))
            .collect();
        (0..self.grid.len())
            .map(|k| parts.iter().map(|p| p[k] * p[k]).sum::<f64>().sqrt())
            .collect()
    }
}

/// Grid solution of the parabolic problem at the requested times.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Scheme actually used (Crank-Nicolson may fall back to implicit Euler).
    pub scheme_used: Scheme,
    /// Largest cell Péclet number `|b|h/2` over nodes and axes.
    pub max_peclet: f64,
    /// Fraction of (node, axis) pairs that use upwind convection.
    pub upwind_fraction: f64,
    /// Half-resolution solution used for error estimates.
    pub coarse: Option<Box<PdeSolution>>,
}

impl PdeSolution {
    pub fn field(&self, k: usize) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values[k].clone(),
        }
    }

    /// Coarse solution at time index `k`, interpolated to the fine nodes.
    pub fn coarse_on_fine(&self, k: usize) -> Option<GridField> {
        self.coarse.as_ref().map(|c| c.field(k).resampled(&self.grid))
    }

    /// Node-wise discretization error estimate `|v_h − v_{2h}|`.
    pub fn error_field(&self, k: usize) -> Option<Vec<f64>> {
        let c = self.coarse_on_fine(k)?;
        Some(self.values[k].iter().zip(&c.values).map(|(a, b)| (a - b).abs()).collect())
    }

    /// Sup of the discretization error over nodes shared by both grids.
    pub fn error_estimate(&self, k: usize) -> Option<f64> {
        let c = self.coarse.as_ref()?;
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for kc in 0..c.grid.len() {
            let ic = c.grid.index(kc);
            let kf = g.flat([2 * ic[0], 2 * ic[1]]);
            worst = worst.max((c.values[k][kc] - self.values[k][kf]).abs());
        }
        Some(worst)
    }
}

struct Operator {
    /// Per axis: (sub, diag, super) coefficients for every node.
    coeffs: Vec<[Vec<f64>; 3]>,
    max_peclet: f64,
    upwind_fraction: f64,
}

fn build_operator(grid: &GridSpec, model: &GaussianModel, phi: &dyn Potential) -> Result<Operator> {
    let dim = grid.dim();
    check_dim(model.dim(), dim)?;
    let drift: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| -> Result<Vec<f64>> {
            let x = grid.point(k);
            let mut lin = vec![0.0; dim];
            model.linear_drift(&x, &mut lin);
            let mut g = vec![0.0; dim];
            phi.gradient(&x, &mut g)?;
            Ok(lin.iter().zip(&g).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;
    let mut coeffs = Vec::with_capacity(dim);
    let mut max_peclet: f64 = 0.0;
    let mut upwind = 0usize;
    for a in 0..dim {
        let h = grid.spacing(a);
        let n = grid.nodes[a];
        let mut lo = vec![0.0; grid.len()];
        let mut di = vec![0.0; grid.len()];
        let mut up = vec![0.0; grid.len()];
        for k in 0..grid.len() {
            let i = grid.index(k)[a];
            let b = drift[k][a];
            if !b.is_finite() {
                return Err(LabError::UnstableStep("non-finite drift on the grid".into()));
            }
            let pe = b.abs() * h / 2.0;
            max_peclet = max_peclet.max(pe);
            if i == 0 {
                di[k] = -2.0 / (h * h);
                up[k] = 2.0 / (h * h);
            } else if i + 1 == n {
                di[k] = -2.0 / (h * h);
                lo[k] = 2.0 / (h * h);
            } else if pe <= 1.0 {
                lo[k] = 1.0 / (h * h) - b / (2.0 * h);
                di[k] = -2.0 / (h * h);
                up[k] = 1.0 / (h * h) + b / (2.0 * h);
            } else {
                upwind += 1;
                lo[k] = 1.0 / (h * h) + (-b).max(0.0) / h;
                up[k] = 1.0 / (h * h) + b.max(0.0) / h;
                di[k] = -lo[k] - up[k];
            }
        }
        coeffs.push([lo, di, up]);
    }
    Ok(Operator {
        coeffs,
        max_peclet,
        upwind_fraction: upwind as f64 / (grid.len() * dim) as f64,
    })
}

/// Solves a tridiagonal system in place (Thomas algorithm).
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    scratch[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * scratch[i - 1];
        scratch[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// One θ-step of length `tau` along `axis`.
fn axis_step(grid: &GridSpec, op: &Operator, axis: usize, tau: f64, theta: f64, v: &mut [f64]) {
    let n = grid.nodes[axis];
    let [lo, di, up] = &op.coeffs[axis];
    let lines = grid.len() / n;
    let stride = if axis == 0 { 1 } else { grid.nodes[0] };
    let line_start = |l: usize| if axis == 0 { l * n } else { l };
    let explicit = 1.0 - theta;
    let src: &[f64] = v;
    let solved: Vec<Vec<f64>> = (0..lines)
        .into_par_iter()
        .map(|l| {
            let s = line_start(l);
            let node = |i: usize| s + i * stride;
            let mut rhs = vec![0.0; n];
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            let mut c = vec![0.0; n];
            for i in 0..n {
                let k = node(i);
                let mut lv = di[k] * src[k];
                if i > 0 {
                    lv += lo[k] * src[node(i - 1)];
                }
                if i + 1 < n {
                    lv += up[k] * src[node(i + 1)];
                }
                rhs[i] = src[k] + explicit * tau * lv;
                a[i] = -theta * tau * lo[k];
                b[i] = 1.0 - theta * tau * di[k];
                c[i] = -theta * tau * up[k];
            }
            let mut scratch = vec![0.0; n];
            thomas(&a, &b, &c, &mut rhs, &mut scratch);
            rhs
        })
        .collect();
    for (l, line) in solved.into_iter().enumerate() {
        let s = line_start(l);
        for (i, val) in line.into_iter().enumerate() {
            v[s + i * stride] = val;
        }
    }
}

fn full_step(grid: &GridSpec, op: &Operator, tau: f64, theta: f64, v: &mut [f64]) {
    if grid.dim() == 1 {
        axis_step(grid, op, 0, tau, theta, v);
    } else {
        axis_step(grid, op, 0, 0.5 * tau, theta, v);
        axis_step(grid, op, 1, tau, theta, v);
        axis_step(grid, op, 0, 0.5 * tau, theta, v);
    }
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Steps the initial data through the requested times, handing each
/// snapshot to `sink` (which may stop the march by returning `false`).
/// Returns `false` when the maximum-principle monitor detects an overshoot.
fn march<S>(grid: &GridSpec, op: &Operator, initial: &[f64], times: &[f64], scheme: Scheme, sink: &mut S) -> bool
where
    S: FnMut(usize, &[f64]) -> bool,
{
    let mut v = initial.to_vec();
    let mut now = 0.0;
    let mut steps_taken = 0usize;
    let theta_main = match scheme {
        Scheme::CrankNicolson => 0.5,
        Scheme::ImplicitEuler => 1.0,
    };
    for (k, &t) in times.iter().enumerate() {
        let span = t - now;
        if span > 0.0 {
            let steps = ((span / grid.dt) - 1e-9).ceil().max(1.0) as usize;
            let tau = span / steps as f64;
            for _ in 0..steps {
                let (lo, hi) = range(&v);
                let slack = MONITOR_SLACK * (1.0 + hi.abs().max(lo.abs()));
                if scheme == Scheme::CrankNicolson && steps_taken < 2 {
                    full_step(grid, op, 0.5 * tau, 1.0, &mut v);
                    full_step(grid, op, 0.5 * tau, 1.0, &mut v);
                } else {
                    full_step(grid, op, tau, theta_main, &mut v);
                }
                steps_taken += 1;
                let (nlo, nhi) = range(&v);
                if nhi > hi + slack || nlo < lo - slack || !nhi.is_finite() || !nlo.is_finite() {
                    return false;
                }
            }
        }
        now = t;
        if !sink(k, &v) {
            break;
        }
    }
    true
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(LabError::invalid("times", "must be finite, non-negative and non-decreasing"));
    }
    Ok(())
}

/// Marches the grid problem and streams each snapshot to `sink` instead of
/// storing it. Returns the scheme that was finally used. When Crank-Nicolson
/// is abandoned for implicit Euler, `sink` sees the snapshots again from
/// index 0, which it must treat as a restart.
pub fn stream_parabolic_grid<F, S>(
    model: &GaussianModel,
    phi: &dyn Potential,
    f: F,
    times: &[f64],
    grid: &GridSpec,
    mut sink: S,
) -> Result<Scheme>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: FnMut(usize, &[f64]) -> bool,
{
    validate_times(times)?;
    let initial = GridField::sample(grid, &f);
    if initial.values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::invalid("f", "initial datum is not finite on the grid"));
    }
    let op = build_operator(grid, model, phi)?;
    if march(grid, &op, &initial.values, times, grid.scheme, &mut sink) {
        return Ok(grid.scheme);
    }
    if grid.scheme == Scheme::CrankNicolson {
        if march(grid, &op, &initial.values, times, Scheme::ImplicitEuler, &mut sink) {
            return Ok(Scheme::ImplicitEuler);
        }
    }
    Err(LabError::UnstableStep("maximum principle violated by implicit Euler".into()))
}

fn solve_single(
    model: &GaussianModel,
    phi: &dyn Potential,
    initial: &[f64],
    times: &[f64],
    grid: &GridSpec,
) -> Result<PdeSolution> {
    let op = build_operator(grid, model, phi)?;
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    let mut scheme_used = grid.scheme;
    let mut ok = march(grid, &op, initial, times, grid.scheme, &mut |_, v: &[f64]| {
        values.push(v.to_vec());
        true
    });
    if !ok && grid.scheme == Scheme::CrankNicolson {
        values.clear();
        scheme_used = Scheme::ImplicitEuler;
        ok = march(grid, &op, initial, times, Scheme::ImplicitEuler, &mut |_, v: &[f64]| {
            values.push(v.to_vec());
            true
        });
    }
    if !ok {
        return Err(LabError::UnstableStep("maximum principle violated by implicit Euler".into()));
    }
    Ok(PdeSolution {
        grid: grid.clone(),
        times: times.to_vec(),
        values,
        scheme_used,
        max_peclet: op.max_peclet,
        upwind_fraction: op.upwind_fraction,
        coarse: None,
    })
}

/// Solves `∂ₜv = Δv + ⟨Bξ − ∇φ, ∇v⟩`, `v(0) = f`, on the grid's box with
/// Neumann faces and returns `v` at each requested time (non-decreasing,
/// non-negative). With `grid.richardson` the problem is also solved on the
/// nested half-resolution grid for error estimates.
pub fn solve_parabolic_grid<F>(
    model: &GaussianModel,
    phi: &dyn Potential,
    f: F,
    times: &[f64],
    grid: &GridSpec,
) -> Result<PdeSolution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    validate_times(times)?;
    let initial = GridField::sample(grid, &f);
    if initial.values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::invalid("f", "initial datum is not finite on the grid"));
    }
    let mut sol = solve_single(model, phi, &initial.values, times, grid)?;
    if grid.richardson {
        let coarse_grid = grid.coarsened()?;
        let coarse_init = GridField::sample(&coarse_grid, &f);
        sol.coarse = Some(Box::new(solve_single(model, phi, &coarse_init.values, times, &coarse_grid)?));
    }
    Ok(sol)
}

/// Quadrature weights of `ν_φ = e^{−φ}γ` on the grid nodes: the density
/// `exp(log γ − φ)` times the trapezoidal cell volume.
pub fn grid_measure_weights(grid: &GridSpec, model: &GaussianModel, phi: &dyn Potential) -> Result<Vec<f64>> {
    let cells = grid.trapezoid_weights();
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            Ok((log_density_gaussian(model, &x)? - phi.value(&x)?).exp() * cells[k])
        })
        .collect()
}
