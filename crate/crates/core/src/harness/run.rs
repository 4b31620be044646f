//! Dispatch of configured checks.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{CheckEntry, CheckKind, ExperimentConfig};
use super::HarnessError;
use crate::convex::eta_schedule;
use crate::error::{LabError, Result};
use crate::lab::battery::TestFunction;
use crate::lab::checks::{
    check_asymptotic_mean, check_decay, check_hyper, check_invariance, check_logsob, check_mehler_grid,
    check_mehler_mc, check_order_properties, check_penalization_limit, check_poincare, check_pointwise_gradient,
    check_resolvent_bounds, check_smoothing, check_uniform_gradient,
};
use crate::lab::context::Lab;
use crate::lab::fit::RateFit;
use crate::lab::report::{CheckReport, Verdict};

/// Seed stream reserved for the mollification schedule.
const ETA_STREAM: u64 = u64::MAX;

/// Command-line overrides of an experiment.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub strict: bool,
}

impl RunOptions {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
    }
}

/// Results of one experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hash: String,
    pub reports: Vec<CheckReport>,
    pub fits: Vec<RateFit>,
    pub eta_schedule: Option<Vec<f64>>,
}

impl Experiment {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.reports.iter().filter(|r| r.verdict == verdict).count()
    }

    pub fn failures(&self) -> usize {
        self.reports.iter().filter(|r| r.is_failure()).count()
    }

    /// 0 when nothing failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures() == 0 {
            0
        } else {
            1
        }
    }
}

struct Outcome {
    reports: Vec<CheckReport>,
    fits: Vec<RateFit>,
}

impl Outcome {
    fn reports(reports: Vec<CheckReport>) -> Self {
        Outcome { reports, fits: Vec::new() }
    }
}

fn classify(err: LabError) -> HarnessError {
    match err {
        LabError::ConfigInvalid(_)
        | LabError::InvalidParameter { .. }
        | LabError::DimensionMismatch { .. }
        | LabError::NonPositiveEigenvalue { .. }
        | LabError::EmptySpectrum => HarnessError::Config(err),
        other => HarnessError::Solver(other),
    }
}

struct Functions<'a> {
    all: &'a BTreeMap<String, TestFunction>,
    dim: usize,
}

impl Functions<'_> {
    fn get(&self, name: &str) -> Result<&TestFunction> {
        self.all
            .get(name)
            .ok_or_else(|| LabError::ConfigInvalid(format!("unknown function `{name}`")))
    }

    /// Named functions, or the standard battery when `names` is empty.
    fn list(&self, names: &[String], bounded_only: bool) -> Result<Vec<(String, TestFunction)>> {
        if names.is_empty() {
            return Ok(crate::lab::battery::standard_battery(self.dim)
                .into_iter()
                .filter(|(_, f)| !bounded_only || f.sup_norm().is_some())
                .collect());
        }
        names.iter().map(|n| Ok((n.clone(), self.get(n)?.clone()))).collect()
    }
}

fn run_check(lab: &Lab, fns: &Functions, entry: &CheckEntry) -> Result<Outcome> {
    let eq = entry.equality;
    let outcome = match &entry.check {
        CheckKind::MehlerGrid { f, times, target_error } => Outcome::reports(vec![check_mehler_grid(
            lab,
            fns.get(f)?,
            &times.values()?,
            *target_error,
        )?]),
        CheckKind::MehlerMc { f, times, points } => {
            Outcome::reports(vec![check_mehler_mc(lab, fns.get(f)?, &times.values()?, points)?])
        }
        CheckKind::PointwiseGradient {
            target,
            f,
            t,
            p,
            mode,
            points,
        } => Outcome::reports(vec![check_pointwise_gradient(
            lab,
            *target,
            fns.get(f)?,
            *t,
            *p,
            *mode,
            points,
        )?]),
        CheckKind::Smoothing { target, f, p, times } => {
            let out = check_smoothing(lab, *target, fns.get(f)?, *p, &times.values()?)?;
            Outcome {
                reports: out.reports,
                fits: vec![out.fit],
            }
        }
        CheckKind::UniformGradient { target, f, times } => Outcome::reports(vec![check_uniform_gradient(
            lab,
            *target,
            fns.get(f)?,
            &times.values()?,
        )?]),
        CheckKind::Logsob { target, functions, p } => {
            Outcome::reports(check_logsob(lab, *target, &fns.list(functions, false)?, *p, eq)?)
        }
        CheckKind::Poincare { target, functions, p } => {
            Outcome::reports(check_poincare(lab, *target, &fns.list(functions, false)?, *p, eq)?)
        }
        CheckKind::Hyper {
            target,
            f,
            q,
            t,
            probe,
        } => Outcome::reports(check_hyper(lab, *target, fns.get(f)?, *q, *t, *probe, eq)?),
        CheckKind::Decay {
            target,
            f,
            times,
            gradient_p,
            fit_p,
        } => {
            let out = check_decay(lab, *target, fns.get(f)?, &times.values()?, gradient_p, fit_p, eq)?;
            Outcome {
                reports: out.reports,
                fits: out.fits,
            }
        }
        CheckKind::AsymptoticMean { targets, f, t, points } => {
            Outcome::reports(check_asymptotic_mean(lab, targets, fns.get(f)?, *t, points)?)
        }
        CheckKind::PenalizationLimit {
            f,
            t,
            x,
            epsilons,
            functions,
        } => Outcome::reports(check_penalization_limit(
            lab,
            fns.get(f)?,
            *t,
            x,
            epsilons,
            &fns.list(functions, true)?,
        )?),
        CheckKind::OrderProperties { target, f, g, t, p } => Outcome::reports(check_order_properties(
            lab,
            *target,
            fns.get(f)?,
            fns.get(g)?,
            *t,
            *p,
        )?),
        CheckKind::Invariance { target, f, t } => {
            Outcome::reports(vec![check_invariance(lab, *target, fns.get(f)?, *t)?])
        }
        CheckKind::Resolvent {
            target,
            functions,
            lambdas,
        } => Outcome::reports(check_resolvent_bounds(lab, *target, &fns.list(functions, false)?, lambdas)?),
    };
    Ok(outcome)
}

fn rename(entry: &CheckEntry, outcome: &mut Outcome) {
    let single = outcome.reports.len() == 1;
    for r in &mut outcome.reports {
        if let Some(name) = &entry.name {
            r.name = if single {
                name.clone()
            } else {
                format!("{name}/{}", r.name)
            };
        }
        if entry.equality && !r.expect_fail && !r.equality {
            *r = r.clone().equality(true);
        }
    }
    for fit in &mut outcome.fits {
        if let Some(name) = &entry.name {
            fit.name = format!("{name}/{}", fit.name);
        }
    }
}

/// Makes report and fit names unique by appending `#k` to repeats.
fn deduplicate<'a>(names: impl Iterator<Item = &'a mut String>) {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for name in names {
        let count = seen.entry(name.clone()).or_insert(0);
        *count += 1;
        if *count > 1 {
            *name = format!("{name}#{count}");
        }
    }
}

/// Runs every configured check on a pool of `config.workers` threads.
///
/// Check `k` runs with seed stream `k` of the base seed, and results are
/// merged in configuration order, so the output does not depend on the
/// number of workers.
pub fn run_experiment(config: &ExperimentConfig, strict: bool) -> std::result::Result<Experiment, HarnessError> {
    let config = config.clone().resolved().map_err(classify)?;
    let hash = config.hash().map_err(classify)?;
    let lab = config.build_lab().map_err(classify)?;
    let all = config.functions(lab.scene.model().dim());
    let fns = Functions {
        all: &all,
        dim: lab.scene.model().dim(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(LabError::ConfigInvalid(format!("worker pool: {e}"))))?;

    let (outcomes, eta) = pool.install(|| {
        let outcomes: Vec<Result<Outcome>> = config
            .checks
            .par_iter()
            .enumerate()
            .map(|(k, entry)| {
                let job = lab.with_seed(lab.stream(k as u64));
                let mut out = run_check(&job, &fns, entry)?;
                rename(entry, &mut out);
                Ok(out)
            })
            .collect();
        let eta = if config.scene.eta_levels.is_empty() {
            None
        } else {
            Some(eta_schedule(
                lab.scene.penalized(),
                &config.scene.eta_levels,
                config.scene.eta_samples,
                lab.stream(ETA_STREAM),
            ))
        };
        (outcomes, eta)
    });

    let mut reports = Vec::new();
    let mut fits = Vec::new();
    for outcome in outcomes {
        let outcome = outcome.map_err(classify)?;
        reports.extend(outcome.reports);
        fits.extend(outcome.fits);
    }
    deduplicate(reports.iter_mut().map(|r| &mut r.name));
    deduplicate(fits.iter_mut().map(|f| &mut f.name));
    if strict {
        reports.iter_mut().for_each(CheckReport::promote_inconclusive);
    }
    let eta_schedule = eta.transpose().map_err(classify)?;
    Ok(Experiment {
        config,
        hash,
        reports,
        fits,
        eta_schedule,
    })
}
