//! Order properties, invariance and resolvent bounds on the grid.

use super::{discretization, fine_and_coarse, interior_nodes, roundoff, wmean};
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::context::{Lab, Target};
use crate::lab::report::{CheckReport, NodeComparison, ToleranceComponent, ToleranceSource};
use crate::solvers::grid::{grid_measure_weights, GridField, PdeSolution};
use crate::solvers::resolvent::resolvent_elliptic;

fn node_check<L, R>(sol_l: &PdeSolution, sol_r: &PdeSolution, lhs_map: L, rhs_map: R) -> NodeComparison
where
    L: Fn(&GridField) -> Vec<f64>,
    R: Fn(&[&GridField]) -> Vec<f64>,
{
    let (lhs, lhs_c) = fine_and_coarse(sol_l, 0, lhs_map);
    let (rhs, rhs_c) = fine_and_coarse(sol_r, 0, |g| rhs_map(&[g]));
    let mut nodes = NodeComparison::default();
    for k in interior_nodes(&sol_l.grid) {
        nodes.push(
            lhs[k],
            rhs[k],
            vec![
                discretization(lhs[k], lhs_c.as_ref().map(|c| c[k])),
                discretization(rhs[k], rhs_c.as_ref().map(|c| c[k])),
                roundoff(rhs[k]),
            ],
        );
    }
    nodes
}

/// Jensen for `s²` and `|s|`, `φ(T(t)f) ≤ T(t)(φ∘f)`, and the Hölder
/// inequality `T(t)(fg) ≤ (T(t)|f|^p)^{1/p}(T(t)|g|^{p'})^{1/p'}`, at every
/// interior node.
pub fn check_order_properties(
    lab: &Lab,
    target: Target,
    f: &TestFunction,
    g: &TestFunction,
    t: f64,
    p: f64,
) -> Result<Vec<CheckReport>> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(LabError::invalid("p", "the Hölder check needs p in (1, ∞)"));
    }
    let q = p / (p - 1.0);
    let times = [t];
    let tf = lab.solve(target, |x| f.value(x), &times)?;
    let tf2 = lab.solve(target, |x| f.value(x).powi(2), &times)?;
    let tabs = lab.solve(target, |x| f.value(x).abs(), &times)?;
    let tfg = lab.solve(target, |x| f.value(x) * g.value(x), &times)?;
    let tfp = lab.solve(target, |x| f.value(x).abs().powf(p), &times)?;
    let tgq = lab.solve(target, |x| g.value(x).abs().powf(q), &times)?;

    let square = node_check(&tf, &tf2, |v| v.values.iter().map(|a| a * a).collect(), |v| v[0].values.clone());
    let absolute = node_check(&tf, &tabs, |v| v.values.iter().map(|a| a.abs()).collect(), |v| v[0].values.clone());

    let (lhs, lhs_c) = fine_and_coarse(&tfg, 0, |v| v.values.clone());
    let (fp, fp_c) = fine_and_coarse(&tfp, 0, |v| v.values.clone());
    let (gq, gq_c) = fine_and_coarse(&tgq, 0, |v| v.values.clone());
    let combine = |a: f64, b: f64| a.max(0.0).powf(1.0 / p) * b.max(0.0).powf(1.0 / q);
    let mut holder = NodeComparison::default();
    for k in interior_nodes(&tfg.grid) {
        let rhs = combine(fp[k], gq[k]);
        let rhs_coarse = match (&fp_c, &gq_c) {
            (Some(a), Some(b)) => Some(combine(a[k], b[k])),
            _ => None,
        };
        holder.push(
            lhs[k],
            rhs,
            vec![
                discretization(lhs[k], lhs_c.as_ref().map(|c| c[k])),
                discretization(rhs, rhs_coarse),
                roundoff(rhs),
            ],
        );
    }
    let scene = &lab.scene.label;
    Ok(vec![
        square.into_report("order_properties", false).named("jensen_square").param("t", t).scene(scene),
        absolute.into_report("order_properties", false).named("jensen_abs").param("t", t).scene(scene),
        holder
            .into_report("order_properties", false)
            .named("holder")
            .param("t", t)
            .param("p", p)
            .scene(scene),
    ])
}

/// `|∫T(t)f dν − ∫f dν| ≤ tolerance`, by grid quadrature with the invariant
/// density of the grid problem.
pub fn check_invariance(lab: &Lab, target: Target, f: &TestFunction, t: f64) -> Result<CheckReport> {
    let sol = lab.solve(target, |x| f.value(x), &[t])?;
    let problem = lab.grid_problem(target)?;
    let drift = |s: &PdeSolution| -> Result<f64> {
        let w = grid_measure_weights(&s.grid, lab.scene.model(), problem.potential)?;
        let datum = GridField::sample(&s.grid, |x| f.value(x)).values;
        Ok((wmean(&s.values[0], &w) - wmean(&datum, &w)).abs())
    };
    let lhs = drift(&sol)?;
    let coarse = match &sol.coarse {
        Some(c) => Some(drift(c)?),
        None => None,
    };
    Ok(CheckReport::new("invariance", lhs, 0.0, vec![discretization(lhs, coarse), roundoff(1.0)])
        .param("t", t)
        .scene(&lab.scene.label))
}

/// `‖v‖∞ ≤ ‖f‖∞/λ` and `‖∇v‖∞ ≤ √(π/(βλ))‖f‖∞` for the resolvent
/// `v = ∫e^{−λt}T(t)f dt`, over all functions and values of `λ`.
pub fn check_resolvent_bounds(
    lab: &Lab,
    target: Target,
    functions: &[(String, TestFunction)],
    lambdas: &[f64],
) -> Result<Vec<CheckReport>> {
    let problem = lab.grid_problem(target)?;
    let model = lab.scene.model();
    let beta = model.beta();
    let mut values = NodeComparison::default();
    let mut gradients = NodeComparison::default();
    for (_, f) in functions {
        for &lambda in lambdas {
            let r = resolvent_elliptic(model, problem.potential, |x| f.value(x), lambda, &problem.spec)?;
            values.push(
                r.field.sup_norm(),
                r.value_bound(),
                vec![
                    ToleranceComponent::new(ToleranceSource::Quadrature, r.quadrature_error),
                    ToleranceComponent::new(ToleranceSource::Discretization, r.value_discretization),
                ],
            );
            let second = r.field.gradient_norm_second_order().iter().fold(0.0f64, |m, v| m.max(*v));
            gradients.push(
                r.gradient_sup,
                r.gradient_bound(beta),
                vec![
                    ToleranceComponent::new(ToleranceSource::Quadrature, r.quadrature_gradient_error),
                    ToleranceComponent::new(ToleranceSource::Discretization, r.gradient_discretization),
                    ToleranceComponent::new(ToleranceSource::FiniteDifference, r.gradient_sup - second),
                ],
            );
        }
    }
    let scene = &lab.scene.label;
    Ok(vec![
        values.into_report("resolvent", false).named("resolvent_sup").scene(scene),
        gradients.into_report("resolvent", false).named("resolvent_gradient").scene(scene),
    ])
}
