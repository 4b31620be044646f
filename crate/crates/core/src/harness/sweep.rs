//! Parameter sweeps.
//!
//! A sweep runs one sub-experiment per value of the swept parameter and
//! collects every report into `trend.csv`. Checks that already consume the
//! whole axis (the penalization limit for `epsilon`, time-series checks for
//! `t`) instead run once, with the sweep values as their list.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::config::{CheckKind, ExperimentConfig, Times};
use super::output::{file_stem, write_csv, write_experiment};
use super::run::{run_experiment, Experiment};
use super::HarnessError;
use crate::error::LabError;

pub const TREND_FILE: &str = "trend.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    T,
    P,
    Dim,
}

impl FromStr for SweepAxis {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, LabError> {
        match s {
            "epsilon" => Ok(SweepAxis::Epsilon),
            "t" => Ok(SweepAxis::T),
            "p" => Ok(SweepAxis::P),
            "dim" => Ok(SweepAxis::Dim),
            other => Err(LabError::ConfigInvalid(format!(
                "unknown sweep axis `{other}` (expected epsilon, t, p or dim)"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::T => "t",
            SweepAxis::P => "p",
            SweepAxis::Dim => "dim",
        })
    }
}

impl SweepAxis {
    fn consumes(&self, check: &CheckKind) -> bool {
        match self {
            SweepAxis::Epsilon => matches!(check, CheckKind::PenalizationLimit { .. }),
            SweepAxis::T => matches!(
                check,
                CheckKind::Decay { .. }
                    | CheckKind::Smoothing { .. }
                    | CheckKind::UniformGradient { .. }
                    | CheckKind::MehlerGrid { .. }
                    | CheckKind::MehlerMc { .. }
            ),
            SweepAxis::P | SweepAxis::Dim => false,
        }
    }

    fn consume(&self, check: &mut CheckKind, values: &[f64]) {
        if let CheckKind::PenalizationLimit { epsilons, .. } = check {
            *epsilons = values.to_vec();
        } else if let Some(times) = check.times_mut() {
            *times = Times::List(values.to_vec());
        }
    }

    fn set(&self, config: &mut ExperimentConfig, value: f64) -> Result<(), LabError> {
        match self {
            SweepAxis::Epsilon => config.scene.epsilon = value,
            SweepAxis::Dim => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(LabError::ConfigInvalid(format!("dimension {value} is not a positive integer")));
                }
                config.scene.dim = Some(value as usize);
            }
            SweepAxis::T => {
                for entry in &mut config.checks {
                    if let Some(t) = entry.check.time_mut() {
                        *t = value;
                    }
                }
            }
            SweepAxis::P => {
                for entry in &mut config.checks {
                    if let Some(p) = entry.check.exponent_mut() {
                        *p = value;
                    }
                }
            }
        }
        Ok(())
    }
}

/// One sub-experiment of a sweep; `value` is `None` for the run of the
/// axis-consuming checks.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: Option<f64>,
    pub dir: PathBuf,
    pub experiment: Experiment,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub hash: String,
    pub runs: Vec<SweepRun>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.runs.iter().map(|r| r.experiment.failures()).sum()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures() == 0 {
            0
        } else {
            1
        }
    }
}

const TREND_HEADER: [&str; 11] = [
    "axis",
    "value",
    "check",
    "kind",
    "lhs",
    "rhs",
    "margin",
    "tolerance",
    "verdict",
    "slope",
    "slope_half_width",
];

fn trend_rows(axis: SweepAxis, run: &SweepRun) -> Vec<Vec<String>> {
    let value = run.value.map(|v| v.to_string()).unwrap_or_else(|| "all".into());
    let mut rows: Vec<Vec<String>> = run
        .experiment
        .reports
        .iter()
        .map(|r| {
            vec![
                axis.to_string(),
                value.clone(),
                r.name.clone(),
                r.kind.clone(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.margin.to_string(),
                r.tolerance.to_string(),
                r.verdict.to_string(),
                String::new(),
                String::new(),
            ]
        })
        .collect();
    rows.extend(run.experiment.fits.iter().map(|f| {
        vec![
            axis.to_string(),
            value.clone(),
            f.name.clone(),
            "rate_fit".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            f.slope.to_string(),
            f.slope_half_width.to_string(),
        ]
    }));
    rows
}

/// Runs the sweep and writes each sub-experiment into its own directory
/// below `out`, plus the aggregated `trend.csv`.
pub fn run_sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out: &Path,
    strict: bool,
) -> Result<SweepOutcome, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config(LabError::ConfigInvalid(
            "sweep needs at least one value".into(),
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::Config(LabError::ConfigInvalid(
            "sweep values must be finite".into(),
        )));
    }
    let hash = config.hash().map_err(HarnessError::Config)?;
    let (consuming, per_value): (Vec<_>, Vec<_>) =
        config.checks.iter().cloned().partition(|e| axis.consumes(&e.check));

    let mut runs = Vec::new();
    if !per_value.is_empty() {
        for &value in values {
            let mut sub = config.clone();
            sub.checks = per_value.clone();
            axis.set(&mut sub, value).map_err(HarnessError::Config)?;
            let experiment = run_experiment(&sub, strict)?;
            let dir = out.join(file_stem(&format!("{axis}={value}")));
            write_experiment(&dir, &experiment).map_err(HarnessError::Io)?;
            runs.push(SweepRun {
                value: Some(value),
                dir,
                experiment,
            });
        }
    }
    if !consuming.is_empty() {
        let mut sub = config.clone();
        sub.checks = consuming;
        for entry in &mut sub.checks {
            axis.consume(&mut entry.check, values);
        }
        let experiment = run_experiment(&sub, strict)?;
        let dir = out.join(format!("{axis}_all"));
        write_experiment(&dir, &experiment).map_err(HarnessError::Io)?;
        runs.push(SweepRun {
            value: None,
            dir,
            experiment,
        });
    }

    fs::create_dir_all(out).map_err(|e| HarnessError::Io(e.into()))?;
    let rows: Vec<Vec<String>> = runs.iter().flat_map(|r| trend_rows(axis, r)).collect();
    write_csv(&out.join(TREND_FILE), &hash, &TREND_HEADER, &rows).map_err(HarnessError::Io)?;
    Ok(SweepOutcome {
        axis,
        values: values.to_vec(),
        hash,
        runs,
    })
}
