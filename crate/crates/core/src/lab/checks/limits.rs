//! Convergence of the penalized problem to the domain problem as `ε → 0`.

use rayon::prelude::*;

use crate::convex::{PenalizedScene, Potential};
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::context::{Lab, Target};
use crate::lab::report::CheckReport;
use crate::solvers::mc::{observe, simulate_coupled, Dynamics, Member};
use crate::spectral::sample_gaussian;
use crate::stats::{batch_ci, batch_means, pairwise_mean};

const PATH_STREAM: u64 = 30;
const SAMPLE_STREAM: u64 = 31;
/// Multiple of `√step` allowed for the bias of the projected scheme.
pub const BIAS_BUDGET: f64 = 3.0;

/// Means of `values` over consecutive batches.
fn batch_averages(values: &[f64], batches: usize) -> Vec<f64> {
    values.chunks(values.len() / batches).map(pairwise_mean).collect()
}

/// Trend report `|a_{k+1}| + CI ≤ |a_k|` from per-batch statistics; the
/// interval of the decrease is folded into the left side.
fn trend(name: String, current: &[f64], next: &[f64]) -> CheckReport {
    let a = pairwise_mean(current).abs();
    let b = pairwise_mean(next).abs();
    let decrease: Vec<f64> = current.iter().zip(next).map(|(x, y)| x.abs() - y.abs()).collect();
    let spread = batch_ci(&decrease).half_width;
    CheckReport::new("penalization_limit", b + spread, a, Vec::new())
        .named(name)
        .param("decrease_ci", spread)
}

/// Weighted mean per batch.
fn weighted_batches(values: &[f64], weights: &[f64], batches: usize) -> Vec<f64> {
    let size = values.len() / batches;
    values
        .chunks(size)
        .zip(weights.chunks(size))
        .map(|(v, w)| {
            let num: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            let den: f64 = w.iter().sum();
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect()
}

/// Along a decreasing list of `ε`: (a) the gap `T_ε(t)f(x) − T_Ω(t)f(x)`
/// between the penalized and the projected dynamics (driven by common
/// noise) shrinks strictly at every step, and the final gap is within its
/// interval plus `3√step`; (b) the largest discrepancy of normalised means
/// `|m_ε(g) − m_Ω(g)|` over the bounded functions `g`, and the mass of
/// `ν_ε` outside `Ω`, shrink strictly as well.
pub fn check_penalization_limit(
    lab: &Lab,
    f: &TestFunction,
    t: f64,
    x: &[f64],
    eps_list: &[f64],
    measure_functions: &[(String, TestFunction)],
) -> Result<Vec<CheckReport>> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LabError::invalid("eps", "need a strictly decreasing list"));
    }
    let scene = &lab.scene;
    if !scene.domain().contains(x)? {
        return Err(LabError::invalid("x", "must lie in the closed domain"));
    }
    let penalized: Vec<PenalizedScene> = eps_list
        .iter()
        .map(|&e| scene.penalized().with_epsilon(e))
        .collect::<Result<_>>()?;
    let mut members: Vec<Member> = penalized
        .iter()
        .map(|s| Member {
            dynamics: Dynamics::Penalized(s),
            start: x.to_vec(),
        })
        .collect();
    members.push(Member {
        dynamics: scene.dynamics(Target::Domain),
        start: x.to_vec(),
    });
    let settings = lab.mc_settings(PATH_STREAM);
    let states = simulate_coupled(&members, &[t], &settings)?;
    let n = x.len();
    let fv = |y: &[f64]| f.value(y);
    let reflected = observe(&states[0][eps_list.len()], n, &fv);
    let mut gaps = Vec::with_capacity(eps_list.len());
    let mut batch_gaps = Vec::with_capacity(eps_list.len());
    for k in 0..eps_list.len() {
        let values = observe(&states[0][k], n, &fv);
        let gap: Vec<f64> = values.iter().zip(&reflected).map(|(a, b)| a - b).collect();
        gaps.push(batch_means(&gap, settings.batches)?);
        batch_gaps.push(batch_averages(&gap, settings.batches));
    }
    let label = |e: f64| format!("{e}");
    let mut reports = Vec::new();
    for k in 0..eps_list.len().saturating_sub(1) {
        reports.push(
            trend(
                format!("semigroup_gap[{}->{}]", label(eps_list[k]), label(eps_list[k + 1])),
                &batch_gaps[k],
                &batch_gaps[k + 1],
            )
            .param("t", t)
            .param("gap", gaps[k + 1].mean),
        );
    }
    let last = gaps[gaps.len() - 1];
    let budget = BIAS_BUDGET * settings.step.sqrt();
    reports.push(
        CheckReport::new("penalization_limit", last.mean.abs(), last.half_width + budget, Vec::new())
            .named("semigroup_final_gap")
            .param("eps", eps_list[eps_list.len() - 1])
            .param("ci", last.half_width)
            .param("bias_budget", budget),
    );

    let sample = sample_gaussian(scene.model(), lab.samples.count.div_ceil(settings.batches) * settings.batches, lab.stream(SAMPLE_STREAM))?;
    let points: Vec<&[f64]> = sample.points.chunks(n).collect();
    let domain_weights: Vec<f64> = points
        .par_iter()
        .map(|y| -> Result<f64> {
            Ok(if scene.domain().contains(y)? {
                (-scene.potential().value(y)?).exp()
            } else {
                0.0
            })
        })
        .collect::<Result<_>>()?;
    let outside: Vec<f64> = points
        .par_iter()
        .map(|y| scene.domain().contains(y).map(|inside| if inside { 0.0 } else { 1.0 }))
        .collect::<Result<_>>()?;
    let columns: Vec<Vec<f64>> = measure_functions
        .iter()
        .map(|(_, g)| points.par_iter().map(|y| g.value(y)).collect())
        .collect();
    let domain_means: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| weighted_batches(c, &domain_weights, settings.batches))
        .collect();
    let mut discrepancy = Vec::with_capacity(eps_list.len());
    let mut outside_mass = Vec::with_capacity(eps_list.len());
    for s in &penalized {
        let w: Vec<f64> = points
            .par_iter()
            .map(|y| s.value(y).map(|v| (-v).exp()))
            .collect::<Result<_>>()?;
        let per_batch: Vec<f64> = (0..settings.batches)
            .map(|b| {
                columns
                    .iter()
                    .zip(&domain_means)
                    .map(|(c, dm)| {
                        let size = c.len() / settings.batches;
                        let r = b * size..(b + 1) * size;
                        let pen = weighted_batches(&c[r.clone()], &w[r], 1)[0];
                        (pen - dm[b]).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        discrepancy.push(per_batch);
        outside_mass.push(weighted_batches(&outside, &w, settings.batches));
    }
    if !measure_functions.is_empty() {
        for k in 0..eps_list.len().saturating_sub(1) {
            reports.push(trend(
                format!("measure_gap[{}->{}]", label(eps_list[k]), label(eps_list[k + 1])),
                &discrepancy[k],
                &discrepancy[k + 1],
            ));
        }
    }
    for k in 0..eps_list.len().saturating_sub(1) {
        reports.push(trend(
            format!("outside_mass[{}->{}]", label(eps_list[k]), label(eps_list[k + 1])),
            &outside_mass[k],
            &outside_mass[k + 1],
        ));
    }
    Ok(reports.into_iter().map(|r| r.scene(&scene.label)).collect())
}
