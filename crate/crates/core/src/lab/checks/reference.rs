//! Agreement of the solvers with the Mehler formula on the free
//! one-dimensional scene.

use super::{ci, family_factor};
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::context::{Lab, Target};
use crate::lab::report::{CheckReport, NodeComparison, ToleranceComponent, ToleranceSource};
use crate::oracle::MehlerOU;
use crate::solvers::mc::{observe, simulate_coupled, Member};
use crate::stats::batch_means;

/// Half-width of the comparison window in units of `√λ₁`.
pub const WINDOW: f64 = 3.0;
const PATH_STREAM: u64 = 40;

fn oracle(lab: &Lab) -> Result<MehlerOU> {
    if lab.scene.model().dim() != 1 || !lab.scene.is_free() {
        return Err(LabError::ConfigInvalid(
            "Mehler comparisons need the free one-dimensional scene".into(),
        ));
    }
    MehlerOU::new(lab.scene.model().lambda1())
}

fn exact(o: &MehlerOU, f: &TestFunction, t: f64, x: f64) -> Result<(f64, f64)> {
    if let TestFunction::Polynomial { coefficients, .. } = f {
        return Ok((o.apply_polynomial(coefficients, t, x), 0.0));
    }
    let r = o.apply_with_error(|y| f.value(&[y]), t, x)?;
    Ok((r.value, r.error))
}

/// Largest grid error against the oracle on `|ξ| ≤ 3√λ₁` over all times,
/// against the accuracy target.
pub fn check_mehler_grid(lab: &Lab, f: &TestFunction, times: &[f64], target_error: f64) -> Result<CheckReport> {
    let o = oracle(lab)?;
    let sol = lab.solve(Target::Domain, |x| f.value(x), times)?;
    let window = WINDOW * o.lambda1().sqrt();
    let mut worst = 0.0f64;
    let mut oracle_error = 0.0f64;
    for (k, &t) in times.iter().enumerate() {
        for i in 0..sol.grid.len() {
            let x = sol.grid.point(i)[0];
            if x.abs() <= window {
                let (v, e) = exact(&o, f, t, x)?;
                worst = worst.max((sol.values[k][i] - v).abs());
                oracle_error = oracle_error.max(e);
            }
        }
    }
    Ok(CheckReport::new(
        "mehler_grid",
        worst,
        target_error,
        vec![ToleranceComponent::new(ToleranceSource::Quadrature, oracle_error)],
    )
    .param("target", target_error)
    .scene(&lab.scene.label))
}

/// `|T(t)f(x) − oracle| ≤ CI` for the Euler–Maruyama estimate at every
/// point and time, with intervals widened to a family-wise 95% level.
pub fn check_mehler_mc(lab: &Lab, f: &TestFunction, times: &[f64], points: &[f64]) -> Result<CheckReport> {
    let o = oracle(lab)?;
    let settings = lab.mc_settings(PATH_STREAM);
    let dynamics = lab.scene.dynamics(Target::Penalized);
    let members: Vec<Member> = points
        .iter()
        .map(|&x| Member {
            dynamics,
            start: vec![x],
        })
        .collect();
    let states = simulate_coupled(&members, times, &settings)?;
    let widen = family_factor(times.len() * points.len());
    let fv = |y: &[f64]| f.value(y);
    let mut nodes = NodeComparison::default();
    for (k, &t) in times.iter().enumerate() {
        for (m, &x) in points.iter().enumerate() {
            let est = batch_means(&observe(&states[k][m], 1, &fv), settings.batches)?;
            let (v, e) = exact(&o, f, t, x)?;
            nodes.push(
                (est.mean - v).abs(),
                0.0,
                vec![
                    ci(widen * est.half_width),
                    ToleranceComponent::new(ToleranceSource::Quadrature, e),
                ],
            );
        }
    }
    Ok(nodes
        .into_report("mehler_mc", false)
        .param("paths", settings.total_paths() as f64)
        .param("step", settings.step)
        .scene(&lab.scene.label))
}
