//! Pointwise gradient, smoothing and uniform gradient bounds.

use serde::{Deserialize, Serialize};

use super::{ci, discretization, family_factor, fine_and_coarse, grid_norm, interior_nodes, roundoff};
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::constants::smoothing_constant;
use crate::lab::context::{Lab, Target};
use crate::lab::fit::{FitScale, RateFit};
use crate::lab::report::{CheckReport, NodeComparison, ToleranceComponent, ToleranceSource};
use crate::solvers::gradient::mc_gradient;
use crate::solvers::grid::{grid_measure_weights, GridField};
use crate::solvers::mc::semigroup_mc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    #[default]
    Grid,
    Mc,
}

fn pow_field(values: &[f64], p: f64) -> Vec<f64> {
    values.iter().map(|v| v.abs().powf(p)).collect()
}

fn fd_bias(field: &GridField, p: f64) -> Vec<f64> {
    let a = pow_field(&field.gradient_norm(), p);
    let b = pow_field(&field.gradient_norm_second_order(), p);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect()
}

/// `|∇T(t)f|^p ≤ e^{−pt/λ₁}·T(t)|∇f|^p`, node-wise on the grid or at sample
/// points by Monte Carlo.
pub fn check_pointwise_gradient(
    lab: &Lab,
    target: Target,
    f: &TestFunction,
    t: f64,
    p: f64,
    mode: GradientMode,
    points: &[Vec<f64>],
) -> Result<CheckReport> {
    if !(p >= 1.0) || !(t > 0.0) {
        return Err(LabError::invalid("p, t", "need p ≥ 1 and t > 0"));
    }
    let lambda1 = lab.scene.model().lambda1();
    let factor = (-p * t / lambda1).exp();
    let gp = |x: &[f64]| f.gradient_norm(x).powf(p);
    let mut nodes = NodeComparison::default();
    match mode {
        GradientMode::Grid => {
            let sol_f = lab.solve(target, |x| f.value(x), &[t])?;
            let sol_g = lab.solve(target, gp, &[t])?;
            let (lhs, lhs_c) = fine_and_coarse(&sol_f, 0, |g| pow_field(&g.gradient_norm(), p));
            let (rhs, rhs_c) = fine_and_coarse(&sol_g, 0, |g| g.values.iter().map(|v| factor * v).collect());
            let bias = fd_bias(&sol_f.field(0), p);
            for k in interior_nodes(&sol_f.grid) {
                nodes.push(
                    lhs[k],
                    rhs[k],
                    vec![
                        discretization(lhs[k], lhs_c.as_ref().map(|c| c[k])),
                        discretization(rhs[k], rhs_c.as_ref().map(|c| c[k])),
                        ToleranceComponent::new(ToleranceSource::FiniteDifference, bias[k]),
                        roundoff(rhs[k]),
                    ],
                );
            }
        }
        GradientMode::Mc => {
            let dynamics = lab.scene.dynamics(target);
            let settings = lab.mc_settings(1);
            let widen = family_factor(points.len());
            for x in points {
                let grad = mc_gradient(dynamics, &|y: &[f64]| f.value(y), t, x, &settings)?;
                let norm = grad.value.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ci_norm = grad.ci_half_width.iter().map(|v| v * v).sum::<f64>().sqrt();
                let lhs = norm.powf(p);
                let lhs_ci = if p == 1.0 { ci_norm } else { p * norm.powf(p - 1.0) * ci_norm };
                let rhs_est = semigroup_mc(dynamics, &gp, t, x, &lab.mc_settings(2))?;
                nodes.push(
                    lhs,
                    factor * rhs_est.value,
                    vec![ci(widen * lhs_ci), ci(widen * factor * rhs_est.ci_half_width)],
                );
            }
        }
    }
    Ok(nodes
        .into_report("pointwise_gradient", false)
        .param("t", t)
        .param("p", p)
        .scene(&lab.scene.label))
}

/// Reports and rate fit of the smoothing experiment.
pub struct SmoothingOutcome {
    pub reports: Vec<CheckReport>,
    pub fit: RateFit,
}

/// `|∇T(t)f|^p ≤ K_p t^{−p/2} T(t)|f|^p` at all interior nodes and times, and
/// the log-log slope of `∫|∇T(t)f|^p dν`, which must not fall below
/// `−(p/2)(1 + 5%)`.
pub fn check_smoothing(lab: &Lab, target: Target, f: &TestFunction, p: f64, times: &[f64]) -> Result<SmoothingOutcome> {
    let kp = smoothing_constant(p)?;
    let sol_f = lab.solve(target, |x| f.value(x), times)?;
    let sol_g = lab.solve(target, |x| f.value(x).abs().powf(p), times)?;
    let problem = lab.grid_problem(target)?;
    let weights = grid_measure_weights(&problem.spec, lab.scene.model(), problem.potential)?;
    let interior = interior_nodes(&sol_f.grid);
    let mut nodes = NodeComparison::default();
    let mut integrals = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let scale = kp * t.powf(-p / 2.0);
        let (lhs, lhs_c) = fine_and_coarse(&sol_f, k, |g| pow_field(&g.gradient_norm(), p));
        let (rhs, rhs_c) = fine_and_coarse(&sol_g, k, |g| g.values.iter().map(|v| scale * v).collect());
        let bias = fd_bias(&sol_f.field(k), p);
        for &i in &interior {
            nodes.push(
                lhs[i],
                rhs[i],
                vec![
                    discretization(lhs[i], lhs_c.as_ref().map(|c| c[i])),
                    discretization(rhs[i], rhs_c.as_ref().map(|c| c[i])),
                    ToleranceComponent::new(ToleranceSource::FiniteDifference, bias[i]),
                    roundoff(rhs[i]),
                ],
            );
        }
        integrals.push(grid_norm(&sol_f.field(k).gradient_norm(), &weights, p).powf(p));
    }
    let fit = RateFit::new("smoothing", FitScale::LogLog, times, &integrals)?;
    let bound = nodes
        .into_report("smoothing", false)
        .named("smoothing_bound")
        .param("p", p)
        .param("k_p", kp)
        .scene(&lab.scene.label);
    let rate = CheckReport::new(
        "smoothing",
        -fit.slope,
        1.05 * p / 2.0,
        vec![ci(fit.slope_half_width)],
    )
    .named("smoothing_rate")
    .param("p", p)
    .param("slope", fit.slope)
    .param("r_squared", fit.r_squared)
    .scene(&lab.scene.label);
    Ok(SmoothingOutcome {
        reports: vec![bound, rate],
        fit,
    })
}

/// `sup|∇T(t)f| ≤ ‖f‖∞/√(βt)` over interior nodes, for every `t`.
pub fn check_uniform_gradient(lab: &Lab, target: Target, f: &TestFunction, times: &[f64]) -> Result<CheckReport> {
    let beta = lab.scene.model().beta();
    let sol = lab.solve(target, |x| f.value(x), times)?;
    let interior = interior_nodes(&sol.grid);
    let sup_f = match f.sup_norm() {
        Some(s) => s,
        None => sol.field(0).sup_norm().max(GridField::sample(&sol.grid, |x| f.value(x)).sup_norm()),
    };
    let sup_over = |v: &[f64], idx: &[usize]| idx.iter().fold(0.0f64, |m, &k| m.max(v[k]));
    let mut nodes = NodeComparison::default();
    for (k, &t) in times.iter().enumerate() {
        let field = sol.field(k);
        let lhs = sup_over(&field.gradient_norm(), &interior);
        let second = sup_over(&field.gradient_norm_second_order(), &interior);
        let coarse = sol.coarse.as_ref().map(|c| {
            let cf = c.field(k);
            let ci = interior_nodes(&cf.grid);
            sup_over(&cf.gradient_norm(), &ci)
        });
        nodes.push(
            lhs,
            sup_f / (beta * t).sqrt(),
            vec![
                discretization(lhs, coarse),
                ToleranceComponent::new(ToleranceSource::FiniteDifference, lhs - second),
                roundoff(lhs),
            ],
        );
    }
    Ok(nodes
        .into_report("uniform_gradient", false)
        .param("t_min", times.iter().cloned().fold(f64::INFINITY, f64::min))
        .param("sup_f", sup_f)
        .scene(&lab.scene.label))
}
