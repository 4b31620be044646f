use serde::{Deserialize, Serialize};

use super::moreau::proximal_point;
use super::potential::{ConvexPotential, Potential};
use crate::error::{check_dim, LabError, Result};

/// Sweep budget for Dykstra's algorithm.
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;
/// Dykstra stops once successive sweeps move the iterate by less than this.
pub const DYKSTRA_TOL: f64 = 1e-12;

const ROOT_MAX_ITER: usize = 200;

/// Closed convex sets with a computable Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexDomain {
    FullSpace,
    /// `{ξ : ⟨normal, ξ⟩ ≤ offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ξ : Σ ((ξᵢ − cᵢ)/aᵢ)² ≤ 1}` with semi-axes `aᵢ > 0`.
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    /// `{ξ : G(ξ) ≤ level}` for a convex `G`.
    Sublevel {
        function: Box<ConvexPotential>,
        level: f64,
    },
    Intersection { parts: Vec<ConvexDomain> },
}

/// An axis-aligned half-space `{±ξ_axis ≤ bound}` written as an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisInterval {
    pub axis: usize,
    pub lower: f64,
    pub upper: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConvexDomain {
    /// Half-space `{ξ_axis ≤ bound}` (or `≥` when `upper` is false) in `dim` dimensions.
    pub fn axis_half_space(dim: usize, axis: usize, bound: f64, upper: bool) -> Self {
        let mut normal = vec![0.0; dim];
        normal[axis] = if upper { 1.0 } else { -1.0 };
        ConvexDomain::HalfSpace {
            normal,
            offset: if upper { bound } else { -bound },
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ConvexDomain::FullSpace => Ok(()),
            ConvexDomain::HalfSpace { normal, offset } => {
                check_dim(dim, normal.len())?;
                if !(norm(normal) > 0.0) || !offset.is_finite() {
                    return Err(LabError::invalid("normal", "must be a non-zero finite vector"));
                }
                Ok(())
            }
            ConvexDomain::Ball { center, radius } => {
                check_dim(dim, center.len())?;
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(LabError::invalid("radius", "must be positive"));
                }
                Ok(())
            }
            ConvexDomain::Ellipsoid { center, semi_axes } => {
                check_dim(dim, center.len())?;
                check_dim(dim, semi_axes.len())?;
                if semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                    return Err(LabError::invalid("semi_axes", "must be positive"));
                }
                Ok(())
            }
            ConvexDomain::Sublevel { function, level } => {
                function.validate(dim)?;
                if !level.is_finite() {
                    return Err(LabError::invalid("level", "must be finite"));
                }
                Ok(())
            }
            ConvexDomain::Intersection { parts } => {
                if parts.is_empty() {
                    return Err(LabError::invalid("parts", "intersection needs at least one set"));
                }
                parts.iter().try_for_each(|p| p.validate(dim))
            }
        }
    }

    /// Membership test, with a relative slack of `1e-12` on the constraint.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(match self {
            ConvexDomain::FullSpace => true,
            ConvexDomain::HalfSpace { normal, offset } => {
                dot(normal, x) - offset <= 1e-12 * (1.0 + offset.abs())
            }
            ConvexDomain::Ball { center, radius } => {
                let d: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                d.sqrt() <= radius * (1.0 + 1e-12)
            }
            ConvexDomain::Ellipsoid { center, semi_axes } => {
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((a, c), s)| ((a - c) / s).powi(2))
                    .sum();
                s <= 1.0 + 1e-12
            }
            ConvexDomain::Sublevel { function, level } => {
                function.value(x)? <= level + 1e-12 * (1.0 + level.abs())
            }
            ConvexDomain::Intersection { parts } => {
                for p in parts {
                    if !p.contains(x)? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }

    /// Euclidean projection onto the closure of the set.
    pub fn project(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ConvexDomain::FullSpace => out.copy_from_slice(x),
            ConvexDomain::HalfSpace { normal, offset } => {
                let excess = dot(normal, x) - offset;
                out.copy_from_slice(x);
                if excess > 0.0 {
                    let nn = dot(normal, normal);
                    for (o, a) in out.iter_mut().zip(normal) {
                        *o -= excess / nn * a;
                    }
                }
            }
            ConvexDomain::Ball { center, radius } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d <= *radius {
                    out.copy_from_slice(x);
                } else {
                    let s = radius / d;
                    for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
                        *o = c + s * (a - c);
                    }
                }
            }
            ConvexDomain::Ellipsoid { center, semi_axes } => {
                project_ellipsoid(center, semi_axes, x, out)?
            }
            ConvexDomain::Sublevel { function, level } => {
                project_sublevel(function.as_ref(), *level, x, out)?
            }
            ConvexDomain::Intersection { parts } => dykstra(parts, x, out)?,
        }
        Ok(())
    }

    pub fn projected(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.project(x, &mut out)?;
        Ok(out)
    }

    /// Euclidean distance to the set; zero on its closure.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        match self {
            ConvexDomain::FullSpace => Ok(0.0),
            ConvexDomain::HalfSpace { normal, offset } => {
                Ok((dot(normal, x) - offset).max(0.0) / norm(normal))
            }
            _ => {
                let p = self.projected(x)?;
                Ok(x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            }
        }
    }

    /// Componentwise bounds of the set (infinite where unbounded).
    pub fn bounding_box(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let inf = f64::INFINITY;
        match self {
            ConvexDomain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ConvexDomain::Ellipsoid { center, semi_axes } => (
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            ),
            ConvexDomain::HalfSpace { .. } => match self.axis_interval() {
                Some(iv) => {
                    let mut lo = vec![-inf; dim];
                    let mut hi = vec![inf; dim];
                    lo[iv.axis] = iv.lower;
                    hi[iv.axis] = iv.upper;
                    (lo, hi)
                }
                None => (vec![-inf; dim], vec![inf; dim]),
            },
            ConvexDomain::Intersection { parts } => {
                let mut lo = vec![-inf; dim];
                let mut hi = vec![inf; dim];
                for p in parts {
                    let (l, h) = p.bounding_box(dim);
                    for i in 0..dim {
                        lo[i] = lo[i].max(l[i]);
                        hi[i] = hi[i].min(h[i]);
                    }
                }
                (lo, hi)
            }
            _ => (vec![-inf; dim], vec![inf; dim]),
        }
    }

    /// Returns the interval form of a half-space whose normal is a coordinate axis.
    pub fn axis_interval(&self) -> Option<AxisInterval> {
        let ConvexDomain::HalfSpace { normal, offset } = self else {
            return None;
        };
        let nz: Vec<usize> = (0..normal.len()).filter(|&i| normal[i] != 0.0).collect();
        if nz.len() != 1 {
            return None;
        }
        let axis = nz[0];
        let a = normal[axis];
        let bound = offset / a;
        Some(if a > 0.0 {
            AxisInterval {
                axis,
                lower: f64::NEG_INFINITY,
                upper: bound,
            }
        } else {
            AxisInterval {
                axis,
                lower: bound,
                upper: f64::INFINITY,
            }
        })
    }

    /// When the set is a coordinate box (whole space, axis-aligned half-spaces
    /// or intersections thereof), returns its per-axis bounds.
    pub fn as_box(&self, dim: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexDomain::FullSpace => Some((vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim])),
            ConvexDomain::HalfSpace { .. } => self.axis_interval().map(|_| self.bounding_box(dim)),
            ConvexDomain::Intersection { parts } => {
                let mut lo = vec![f64::NEG_INFINITY; dim];
                let mut hi = vec![f64::INFINITY; dim];
                for p in parts {
                    let (l, h) = p.as_box(dim)?;
                    for i in 0..dim {
                        lo[i] = lo[i].max(l[i]);
                        hi[i] = hi[i].min(h[i]);
                    }
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConvexDomain::FullSpace => "full_space".into(),
            ConvexDomain::HalfSpace { normal, offset } => format!("half_space({normal:?}, {offset})"),
            ConvexDomain::Ball { center, radius } => format!("ball({center:?}, {radius})"),
            ConvexDomain::Ellipsoid { center, semi_axes } => {
                format!("ellipsoid({center:?}, {semi_axes:?})")
            }
            ConvexDomain::Sublevel { function, level } => {
                format!("sublevel({} <= {level})", function.label())
            }
            ConvexDomain::Intersection { parts } => {
                let inner: Vec<String> = parts.iter().map(|p| p.label()).collect();
                format!("intersection[{}]", inner.join(", "))
            }
        }
    }
}

/// Projection onto an axis-aligned ellipsoid.
///
/// With `d = x − c`, the projection is `yᵢ = cᵢ + aᵢ² dᵢ/(aᵢ² + μ)` where the
/// multiplier `μ ≥ 0` solves `g(μ) = Σ (aᵢdᵢ/(aᵢ² + μ))² − 1 = 0`. `g` is
/// decreasing and convex, positive at 0 for outside points and non-positive
/// at `a_max·|d|`; Newton steps are kept inside that bracket.
fn project_ellipsoid(center: &[f64], axes: &[f64], x: &[f64], out: &mut [f64]) -> Result<()> {
    let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
    let inside: f64 = d.iter().zip(axes).map(|(di, a)| (di / a).powi(2)).sum();
    if inside <= 1.0 {
        out.copy_from_slice(x);
        return Ok(());
    }
    let g = |mu: f64| -> (f64, f64) {
        let mut val = -1.0;
        let mut der = 0.0;
        for (di, a) in d.iter().zip(axes) {
            let a2 = a * a;
            let r = a * di / (a2 + mu);
            val += r * r;
            der += -2.0 * r * r / (a2 + mu);
        }
        (val, der)
    };
    let amax = axes.iter().cloned().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = amax * norm(&d);
    let mut mu = 0.0;
    let mut converged = false;
    for _ in 0..ROOT_MAX_ITER {
        let (val, der) = g(mu);
        if val > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if val.abs() < 1e-15 || hi - lo <= 1e-15 * hi.max(1e-300) {
            converged = true;
            break;
        }
        let newton = mu - val / der;
        mu = if der < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if !converged {
        return Err(LabError::ProjectionDidNotConverge {
            iterations: ROOT_MAX_ITER,
        });
    }
    for i in 0..d.len() {
        let a2 = axes[i] * axes[i];
        out[i] = center[i] + a2 * d[i] / (a2 + mu);
    }
    Ok(())
}

/// Projection onto `{G ≤ level}`: outside the set the projection is
/// `prox_{μG}(x)` where `μ > 0` solves `G(prox_{μG}(x)) = level`. The map
/// `μ ↦ G(prox_{μG}(x))` is non-increasing; it is bracketed by doubling and
/// solved by safeguarded regula falsi.
fn project_sublevel(g: &ConvexPotential, level: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
    let gx = g.value(x)?;
    if gx <= level {
        out.copy_from_slice(x);
        return Ok(());
    }
    let eval = |mu: f64, buf: &mut Vec<f64>| -> Result<f64> {
        *buf = proximal_point(g, mu, x)?;
        Ok(g.value(buf)? - level)
    };
    let mut buf = x.to_vec();
    let (mut lo, mut flo) = (0.0, gx - level);
    let mut hi = 1.0;
    let mut fhi = eval(hi, &mut buf)?;
    let mut grow = 0;
    while fhi > 0.0 {
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = eval(hi, &mut buf)?;
        grow += 1;
        if grow > 200 {
            return Err(LabError::ProjectionDidNotConverge { iterations: grow });
        }
    }
    let tol = 1e-12 * (1.0 + level.abs());
    let mut best = buf.clone();
    if fhi.abs() <= tol {
        out.copy_from_slice(&best);
        return Ok(());
    }
    let mut side = 0i8;
    for _ in 0..ROOT_MAX_ITER {
        let mut mu = (lo * fhi - hi * flo) / (fhi - flo);
        if !(mu > lo && mu < hi) {
            mu = 0.5 * (lo + hi);
        }
        let fm = eval(mu, &mut buf)?;
        if fm.abs() <= tol || (hi - lo) <= 1e-14 * hi {
            best.copy_from_slice(&buf);
            out.copy_from_slice(&best);
            return Ok(());
        }
        if fm > 0.0 {
            lo = mu;
            flo = fm;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = mu;
            fhi = fm;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    Err(LabError::ProjectionDidNotConverge {
        iterations: ROOT_MAX_ITER,
    })
}

/// Dykstra's alternating projections for an intersection.
fn dykstra(parts: &[ConvexDomain], x: &[f64], out: &mut [f64]) -> Result<()> {
    let n = x.len();
    if parts.len() == 1 {
        return parts[0].project(x, out);
    }
    let mut y = x.to_vec();
    let mut increments = vec![vec![0.0; n]; parts.len()];
    let mut buf = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let start = y.clone();
        for (part, inc) in parts.iter().zip(increments.iter_mut()) {
            for i in 0..n {
                shifted[i] = y[i] + inc[i];
            }
            part.project(&shifted, &mut buf)?;
            for i in 0..n {
                inc[i] = shifted[i] - buf[i];
                y[i] = buf[i];
            }
        }
        let moved: f64 = y
            .iter()
            .zip(&start)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if moved < DYKSTRA_TOL {
            out.copy_from_slice(&y);
            return Ok(());
        }
    }
    Err(LabError::ProjectionDidNotConverge {
        iterations: DYKSTRA_MAX_SWEEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scenes() -> Vec<ConvexDomain> {
        vec![
            ConvexDomain::FullSpace,
            ConvexDomain::HalfSpace {
                normal: vec![1.0, 2.0],
                offset: 0.5,
            },
            ConvexDomain::Ball {
                center: vec![0.5, 0.0],
                radius: 1.5,
            },
            ConvexDomain::Ellipsoid {
                center: vec![0.0, 0.3],
                semi_axes: vec![2.0, 0.5],
            },
            ConvexDomain::Sublevel {
                function: Box::new(ConvexPotential::LogCosh {
                    weights: vec![1.0, 2.0],
                    scale: 1.0,
                }),
                level: 1.0,
            },
            ConvexDomain::Intersection {
                parts: vec![
                    ConvexDomain::Ball {
                        center: vec![0.0, 0.0],
                        radius: 2.0,
                    },
                    ConvexDomain::HalfSpace {
                        normal: vec![-1.0, 1.0],
                        offset: 0.0,
                    },
                ],
            },
        ]
    }

    #[test]
    fn closed_form_examples() {
        let h = ConvexDomain::HalfSpace {
            normal: vec![1.0, 0.0],
            offset: 0.0,
        };
        assert_eq!(h.projected(&[2.0, 3.0]).unwrap(), vec![0.0, 3.0]);
        let b = ConvexDomain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let p = b.projected(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        assert!((b.distance(&[3.0, 4.0]).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(b.distance(&[0.1, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn quadrant_intersection_matches_grid_argmin() {
        let q = ConvexDomain::Intersection {
            parts: vec![
                ConvexDomain::axis_half_space(2, 0, 0.0, true),
                ConvexDomain::axis_half_space(2, 1, 0.0, true),
            ],
        };
        let p = q.projected(&[1.0, 1.0]).unwrap();
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=400 {
            for j in 0..=400 {
                let y = [-2.0 + i as f64 * 0.005, -2.0 + j as f64 * 0.005];
                if y[0] <= 0.0 && y[1] <= 0.0 {
                    let d = (y[0] - 1.0).powi(2) + (y[1] - 1.0).powi(2);
                    if d < best.0 {
                        best = (d, y);
                    }
                }
            }
        }
        assert!((p[0] - best.1[0]).abs() < 1e-12 && (p[1] - best.1[1]).abs() < 1e-12);
    }

    #[test]
    fn sublevel_of_quadratic_is_ball() {
        let s = ConvexDomain::Sublevel {
            function: Box::new(ConvexPotential::quadratic(1.0)),
            level: 0.5,
        };
        let p = s.projected(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-10 && (p[1] - 0.8).abs() < 1e-10, "{p:?}");
    }

    #[test]
    fn axis_interval_detection() {
        let h = ConvexDomain::axis_half_space(2, 1, 0.5, false);
        let iv = h.axis_interval().unwrap();
        assert_eq!((iv.axis, iv.lower, iv.upper), (1, 0.5, f64::INFINITY));
        let (lo, hi) = h.as_box(2).unwrap();
        assert_eq!(lo, vec![f64::NEG_INFINITY, 0.5]);
        assert_eq!(hi, vec![f64::INFINITY; 2]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_properties(a in proptest::array::uniform2(-4f64..4.0), b in proptest::array::uniform2(-4f64..4.0)) {
            for dom in scenes() {
                dom.validate(2).unwrap();
                let pa = dom.projected(&a).unwrap();
                let pb = dom.projected(&b).unwrap();
                // Projected points belong to the set and are fixed points.
                prop_assert!(dom.contains(&pa).unwrap(), "{}", dom.label());
                let ppa = dom.projected(&pa).unwrap();
                prop_assert!((ppa[0] - pa[0]).abs() < 1e-9 && (ppa[1] - pa[1]).abs() < 1e-9);
                // Membership agrees with being a fixed point.
                let fixed = (pa[0] - a[0]).abs() < 1e-12 && (pa[1] - a[1]).abs() < 1e-12;
                if dom.contains(&a).unwrap() {
                    prop_assert!((pa[0] - a[0]).abs() < 1e-9 && (pa[1] - a[1]).abs() < 1e-9);
                } else {
                    prop_assert!(!fixed);
                }
                // Firm nonexpansiveness.
                let dp = [pa[0] - pb[0], pa[1] - pb[1]];
                let dx = [a[0] - b[0], a[1] - b[1]];
                let lhs = dp[0] * dp[0] + dp[1] * dp[1];
                let rhs = dp[0] * dx[0] + dp[1] * dx[1];
                prop_assert!(lhs <= rhs + 1e-8, "{}: {} > {}", dom.label(), lhs, rhs);
                // Gradient of d² is 2-Lipschitz.
                let ga = [2.0 * (a[0] - pa[0]), 2.0 * (a[1] - pa[1])];
                let gb = [2.0 * (b[0] - pb[0]), 2.0 * (b[1] - pb[1])];
                let lg = ((ga[0] - gb[0]).powi(2) + (ga[1] - gb[1]).powi(2)).sqrt();
                prop_assert!(lg <= 2.0 * (dx[0] * dx[0] + dx[1] * dx[1]).sqrt() + 1e-8);
            }
        }

        #[test]
        fn half_space_distance_formula(x in proptest::array::uniform2(-5f64..5.0), a in proptest::array::uniform2(0.1f64..3.0), b in -2f64..2.0) {
            let h = ConvexDomain::HalfSpace { normal: a.to_vec(), offset: b };
            let expected = (a[0] * x[0] + a[1] * x[1] - b).max(0.0) / (a[0] * a[0] + a[1] * a[1]).sqrt();
            let p = h.projected(&x).unwrap();
            let via_projection = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
            prop_assert!((h.distance(&x).unwrap() - expected).abs() < 1e-12);
            prop_assert!((via_projection - expected).abs() < 1e-12);
        }
    }
}
