//! Exponential decay towards the mean.

use super::{ci, discretization, grid_norm, wmean, ToleranceComponent, ToleranceSource};
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::constants::gradient_decay_constant;
use crate::lab::context::{Lab, Target};
use crate::lab::fit::{FitScale, RateFit};
use crate::lab::report::{CheckReport, NodeComparison};
use crate::solvers::grid::{grid_measure_weights, GridField, PdeSolution};
use crate::solvers::mc::semigroup_mc;

/// Allowed excess of the fitted decay slope over `−1/λ₁`, relative to `1/λ₁`.
pub const RATE_SLACK: f64 = 0.05;
const MEAN_STREAM: u64 = 20;
const PATH_STREAM: u64 = 21;

pub struct DecayOutcome {
    pub reports: Vec<CheckReport>,
    pub fits: Vec<RateFit>,
}

/// Norms of one grid level: the datum, its mean, and per time the deviation
/// field `T(t)f − m`.
struct Level {
    weights: Vec<f64>,
    datum: Vec<f64>,
    mean: f64,
}

fn level(lab: &Lab, target: Target, sol: &PdeSolution, f: &TestFunction) -> Result<Level> {
    let problem = lab.grid_problem(target)?;
    let weights = grid_measure_weights(&sol.grid, lab.scene.model(), problem.potential)?;
    let datum = GridField::sample(&sol.grid, |x| f.value(x)).values;
    let mean = wmean(&datum, &weights);
    Ok(Level { weights, datum, mean })
}

fn deviation_norm(level: &Level, values: &[f64], p: f64) -> f64 {
    let d: Vec<f64> = values.iter().map(|v| v - level.mean).collect();
    grid_norm(&d, &level.weights, p)
}

/// (a) `‖T(t)f − m(f)‖₂ ≤ e^{−t/λ₁}‖f‖₂` at every time; (b) for `t ≥ 1`,
/// `‖∇T(t)f‖_p ≤ C_p e^{−t/λ₁}‖f‖_p` for each `p` of `gradient_p`; (c) for
/// each `p` of `fit_p`, the fitted exponential rate of `‖T(t)f − m(f)‖_p`
/// is at least `(1 − 5%)/λ₁`. Integrals use grid quadrature.
pub fn check_decay(
    lab: &Lab,
    target: Target,
    f: &TestFunction,
    times: &[f64],
    gradient_p: &[f64],
    fit_p: &[f64],
    equality: bool,
) -> Result<DecayOutcome> {
    let lambda1 = lab.scene.model().lambda1();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    if t_max < 3.0 * lambda1 {
        return Err(LabError::invalid("times", "the largest time must be at least 3·λ₁"));
    }
    let sol = lab.solve(target, |x| f.value(x), times)?;
    let fine = level(lab, target, &sol, f)?;
    let coarse = match &sol.coarse {
        Some(c) => Some((level(lab, target, c, f)?, c.as_ref())),
        None => None,
    };
    let mut reports = Vec::new();

    let mut l2 = NodeComparison::default();
    for (k, &t) in times.iter().enumerate() {
        let decay = (-t / lambda1).exp();
        let lhs = deviation_norm(&fine, &sol.values[k], 2.0);
        let rhs = decay * grid_norm(&fine.datum, &fine.weights, 2.0);
        let (lc, rc) = match &coarse {
            Some((lv, cs)) => (
                Some(deviation_norm(lv, &cs.values[k], 2.0)),
                Some(decay * grid_norm(&lv.datum, &lv.weights, 2.0)),
            ),
            None => (None, None),
        };
        l2.push(lhs, rhs, vec![discretization(lhs, lc), discretization(rhs, rc)]);
    }
    reports.push(
        l2.into_report("decay", equality)
            .named("decay_l2")
            .param("t_max", t_max)
            .scene(&lab.scene.label),
    );

    let late: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= 1.0).collect();
    if !late.is_empty() && !gradient_p.is_empty() {
        let mut grad = NodeComparison::default();
        for &p in gradient_p {
            let c = gradient_decay_constant(p, lambda1)?;
            for &k in &late {
                let decay = (-times[k] / lambda1).exp();
                let field = sol.field(k);
                let lhs = grid_norm(&field.gradient_norm(), &fine.weights, p);
                let second = grid_norm(&field.gradient_norm_second_order(), &fine.weights, p);
                let rhs = c * decay * grid_norm(&fine.datum, &fine.weights, p);
                let (lc, rc) = match &coarse {
                    Some((lv, cs)) => (
                        Some(grid_norm(&cs.field(k).gradient_norm(), &lv.weights, p)),
                        Some(c * decay * grid_norm(&lv.datum, &lv.weights, p)),
                    ),
                    None => (None, None),
                };
                grad.push(
                    lhs,
                    rhs,
                    vec![
                        discretization(lhs, lc),
                        discretization(rhs, rc),
                        ToleranceComponent::new(ToleranceSource::FiniteDifference, lhs - second),
                    ],
                );
            }
        }
        reports.push(
            grad.into_report("decay", false)
                .named("decay_gradient")
                .scene(&lab.scene.label),
        );
    }

    let mut fits = Vec::new();
    let positive: Vec<usize> = (0..times.len()).filter(|&k| times[k] > 0.0).collect();
    let fit_times: Vec<f64> = positive.iter().map(|&k| times[k]).collect();
    for &p in fit_p {
        let values: Vec<f64> = positive.iter().map(|&k| deviation_norm(&fine, &sol.values[k], p)).collect();
        let fit = RateFit::new(&format!("decay_p{p}"), FitScale::SemiLog, &fit_times, &values)?;
        reports.push(
            CheckReport::new(
                "decay",
                fit.slope,
                -(1.0 - RATE_SLACK) / lambda1,
                vec![ci(fit.slope_half_width)],
            )
            .named(format!("decay_rate[p={p}]"))
            .param("p", p)
            .param("r_squared", fit.r_squared)
            .scene(&lab.scene.label),
        );
        fits.push(fit);
    }
    Ok(DecayOutcome { reports, fits })
}

/// `|T(t)f(x) − m(f)| ≤ max(2·CI, e^{−t/λ₁}‖f‖₂)` at the given points for
/// each target, with `m(f)` the mean under that target's invariant measure.
/// The semigroup is estimated at half the configured step; the change from
/// the full step gives the scheme bias (scaled by `1/(√2 − 1)` for the
/// projected scheme, whose bias is of order `√step`).
pub fn check_asymptotic_mean(
    lab: &Lab,
    targets: &[Target],
    f: &TestFunction,
    t: f64,
    points: &[Vec<f64>],
) -> Result<Vec<CheckReport>> {
    let lambda1 = lab.scene.model().lambda1();
    if t < 5.0 * lambda1 {
        return Err(LabError::invalid("t", "must be at least 5·λ₁"));
    }
    let fv = |x: &[f64]| f.value(x);
    let mut reports = Vec::new();
    for &target in targets {
        let sample = lab.invariant(target, MEAN_STREAM)?;
        let mean = sample.mean(&fv)?;
        let norm = sample.mean(&|x: &[f64]| f.value(x).powi(2))?.mean.sqrt();
        let dynamics = lab.scene.dynamics(target);
        let settings = lab.mc_settings(PATH_STREAM);
        let fine_settings = settings.with_step(settings.step / 2.0);
        let mut nodes = NodeComparison::default();
        for x in points {
            let coarse = semigroup_mc(dynamics, &fv, t, x, &settings)?;
            let fine = semigroup_mc(dynamics, &fv, t, x, &fine_settings)?;
            let change = (coarse.value - fine.value).abs();
            let bias = if dynamics.is_reflected() {
                change / (2f64.sqrt() - 1.0)
            } else {
                change
            };
            let combined = fine.ci_half_width + mean.half_width;
            nodes.push(
                (fine.value - mean.mean).abs(),
                (2.0 * combined).max((-t / lambda1).exp() * norm),
                vec![ci(combined), ToleranceComponent::new(ToleranceSource::SchemeBias, bias)],
            );
        }
        reports.push(
            nodes
                .into_report("asymptotic_mean", false)
                .named(format!("asymptotic_mean[{}]", target.as_str()))
                .param("t", t)
                .param("mean", mean.mean)
                .scene(&lab.scene.label),
        );
    }
    Ok(reports)
}
