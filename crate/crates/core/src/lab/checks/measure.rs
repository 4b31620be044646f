//! Log-Sobolev, Poincaré and hypercontractivity checks on samples of the
//! invariant measure. All norms and means are taken with respect to the
//! normalised measure; the powers of the total mass in the unnormalised
//! statements cancel.

use rayon::prelude::*;

use super::{batched_statistic, ci, roundoff, wmean, ToleranceComponent, ToleranceSource};
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::constants::{hyper_exponent, logsob_coefficient, poincare_constant};
use crate::lab::context::{Lab, Target};
use crate::lab::report::CheckReport;
use crate::solvers::invariant::InvariantSample;

/// `|f|` below this counts as zero in the log-Sobolev integrands.
pub const ZERO_LEVEL: f64 = 1e-12;

const LOGSOB_STREAM: u64 = 10;
const POINCARE_STREAM: u64 = 11;
const HYPER_STREAM: u64 = 12;

fn column<G: Fn(&[f64]) -> f64 + Sync>(sample: &InvariantSample, g: G) -> Vec<f64> {
    sample.values(&g)
}

/// `∫|f|^p log|f|^p − m log m ≤ (p²λ₁/2)∫|f|^{p−2}|∇f|²1_{f≠0}` with
/// `m = ∫|f|^p`, for every function of the battery.
pub fn check_logsob(
    lab: &Lab,
    target: Target,
    functions: &[(String, TestFunction)],
    p: f64,
    equality: bool,
) -> Result<Vec<CheckReport>> {
    if !(p >= 1.0) {
        return Err(LabError::invalid("p", "must be at least 1"));
    }
    let sample = lab.invariant(target, LOGSOB_STREAM)?;
    let coefficient = logsob_coefficient(p, lab.scene.model().lambda1());
    let weights = sample.weights();
    let mut reports = Vec::with_capacity(functions.len());
    for (name, f) in functions {
        let power = column(&sample, |x| f.value(x).abs().powf(p));
        let entropy_density = column(&sample, |x| {
            let a = f.value(x).abs();
            if a > ZERO_LEVEL {
                let g = a.powf(p);
                g * g.ln()
            } else {
                0.0
            }
        });
        let energy = column(&sample, |x| {
            let a = f.value(x).abs();
            if a > ZERO_LEVEL {
                a.powf(p - 2.0) * f.gradient_norm(x).powi(2)
            } else {
                0.0
            }
        });
        let entropy = |c: &[&[f64]], w: &[f64]| {
            let m = wmean(c[0], w);
            let mlogm = if m > 0.0 { m * m.ln() } else { 0.0 };
            wmean(c[1], w) - mlogm
        };
        let mass = wmean(&power, &weights);
        let scale = wmean(&entropy_density, &weights).abs() + (mass * mass.ln()).abs();
        let cols = vec![power, entropy_density, energy];
        let lhs = batched_statistic(&sample, &cols, entropy)?;
        let rhs = batched_statistic(&sample, &cols, |c, w| coefficient * wmean(c[2], w))?;
        let margin = batched_statistic(&sample, &cols, |c, w| coefficient * wmean(c[2], w) - entropy(c, w))?;
        reports.push(
            CheckReport::new("logsob", lhs.mean, rhs.mean, vec![ci(margin.half_width), roundoff(scale)])
                .named(format!("logsob[{name}]"))
                .equality(equality)
                .param("p", p)
                .param("lhs_ci", lhs.half_width)
                .param("rhs_ci", rhs.half_width)
                .param("ess", sample.ess)
                .scene(&lab.scene.label),
        );
    }
    Ok(reports)
}

/// `‖f − m(f)‖_p ≤ K‖∇f‖_p` for every function of the battery, with
/// `K = √λ₁` at `p = 2`.
pub fn check_poincare(
    lab: &Lab,
    target: Target,
    functions: &[(String, TestFunction)],
    p: f64,
    equality: bool,
) -> Result<Vec<CheckReport>> {
    let k = poincare_constant(p, lab.scene.model().lambda1())?;
    let sample = lab.invariant(target, POINCARE_STREAM)?;
    let weights = sample.weights();
    let mut reports = Vec::with_capacity(functions.len());
    for (name, f) in functions {
        let values = column(&sample, |x| f.value(x));
        let grads = column(&sample, |x| f.gradient_norm(x).powf(p));
        let deviation = |c: &[&[f64]], w: &[f64]| {
            let m = wmean(c[0], w);
            let d: Vec<f64> = c[0].iter().map(|v| (v - m).abs().powf(p)).collect();
            wmean(&d, w).powf(1.0 / p)
        };
        let energy = |c: &[&[f64]], w: &[f64]| k * wmean(c[1], w).powf(1.0 / p);
        let scale = wmean(&values, &weights).abs();
        let cols = vec![values, grads];
        let lhs = batched_statistic(&sample, &cols, deviation)?;
        let rhs = batched_statistic(&sample, &cols, energy)?;
        let margin = batched_statistic(&sample, &cols, |c, w| energy(c, w) - deviation(c, w))?;
        reports.push(
            CheckReport::new("poincare", lhs.mean, rhs.mean, vec![ci(margin.half_width), roundoff(scale)])
                .named(format!("poincare[{name}]"))
                .equality(equality)
                .param("p", p)
                .param("constant", k)
                .param("lhs_ci", lhs.half_width)
                .param("rhs_ci", rhs.half_width)
                .param("ess", sample.ess)
                .scene(&lab.scene.label),
        );
    }
    Ok(reports)
}

/// `‖T(t)f‖_p ≤ ‖f‖_q` at `p = (q−1)e^{2t/λ₁} + 1`, with `T(t)f` from the
/// grid solver evaluated at invariant samples. With `probe`, the same check
/// at `1.2·p`, where it is expected to fail for the exponential family.
pub fn check_hyper(
    lab: &Lab,
    target: Target,
    f: &TestFunction,
    q: f64,
    t: f64,
    probe: bool,
    equality: bool,
) -> Result<Vec<CheckReport>> {
    if !(q > 1.0) || !(t > 0.0) {
        return Err(LabError::invalid("q, t", "need q > 1 and t > 0"));
    }
    let p = hyper_exponent(q, t, lab.scene.model().lambda1());
    let sample = lab.invariant(target, HYPER_STREAM)?;
    let sol = lab.solve(target, |x| f.value(x), &[t])?;
    let fine = sol.field(0);
    let evolved: Vec<f64> = sample.batch.points.par_chunks(sample.batch.dim).map(|x| fine.interpolate(x)).collect();
    let evolved_coarse: Option<Vec<f64>> = sol.coarse.as_ref().map(|c| {
        let field = c.field(0);
        sample.batch.points.par_chunks(sample.batch.dim).map(|x| field.interpolate(x)).collect()
    });
    let datum = column(&sample, |x| f.value(x));
    let norm = |v: &[f64], w: &[f64], r: f64| {
        let powered: Vec<f64> = v.iter().map(|x| x.abs().powf(r)).collect();
        wmean(&powered, w).powf(1.0 / r)
    };
    let weights = sample.weights();
    let mut exponents = vec![(p, false)];
    if probe {
        exponents.push((1.2 * p, true));
    }
    let mut reports = Vec::new();
    for (r, expect_fail) in exponents {
        let cols = vec![evolved.clone(), datum.clone()];
        let lhs = batched_statistic(&sample, &cols, |c, w| norm(c[0], w, r))?;
        let rhs = batched_statistic(&sample, &cols, |c, w| norm(c[1], w, q))?;
        let margin = batched_statistic(&sample, &cols, |c, w| norm(c[1], w, q) - norm(c[0], w, r))?;
        let disc = evolved_coarse.as_ref().map(|ec| norm(ec, &weights, r));
        let components = vec![
            ci(margin.half_width),
            ToleranceComponent::new(ToleranceSource::Discretization, disc.map_or(0.0, |d| lhs.mean - d)),
        ];
        let name = if expect_fail { "hyper_probe" } else { "hyper" };
        reports.push(
            CheckReport::new("hyper", lhs.mean, rhs.mean, components)
                .named(name)
                .equality(equality && !expect_fail)
                .expecting_fail(expect_fail)
                .param("p", r)
                .param("q", q)
                .param("t", t)
                .param("ess", sample.ess)
                .scene(&lab.scene.label),
        );
    }
    Ok(reports)
}
