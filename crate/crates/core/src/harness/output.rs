//! Result files of an experiment.
//!
//! Every file starts with (or, for JSON, contains) the hash of the resolved
//! configuration. Numbers are written in Rust's shortest round-trip form, so
//! identical results give identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::run::Experiment;
use crate::error::{LabError, Result};
use crate::lab::fit::{FitScale, RateFit};
use crate::lab::report::{CheckReport, Verdict};

pub const SUMMARY_SCHEMA: u32 = 1;
pub const CHECKS_FILE: &str = "checks.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_FILE: &str = "resolved_config.toml";

fn csv_error(e: csv::Error) -> LabError {
    LabError::Io(e.to_string())
}

/// Writes CSV rows below a `# config_hash=...` line.
pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut out);
        w.write_record(header).map_err(csv_error)?;
        for row in rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// File-name-safe form of a report or fit name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn join_params(report: &CheckReport) -> String {
    report
        .params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn join_components(report: &CheckReport) -> String {
    report
        .components
        .iter()
        .map(|c| format!("{}={}", c.source.as_str(), c.value))
        .collect::<Vec<_>>()
        .join(";")
}

pub const CHECK_HEADER: [&str; 15] = [
    "name",
    "kind",
    "scene",
    "params",
    "lhs",
    "rhs",
    "margin",
    "tolerance",
    "tolerance_components",
    "verdict",
    "equality",
    "expect_fail",
    "nodes_evaluated",
    "nodes_passing",
    "note",
];

pub fn check_row(r: &CheckReport) -> Vec<String> {
    let (evaluated, passing) = match r.nodes {
        Some(n) => (n.evaluated.to_string(), n.passing.to_string()),
        None => (String::new(), String::new()),
    };
    vec![
        r.name.clone(),
        r.kind.clone(),
        r.scene.clone(),
        join_params(r),
        r.lhs.to_string(),
        r.rhs.to_string(),
        r.margin.to_string(),
        r.tolerance.to_string(),
        join_components(r),
        r.verdict.to_string(),
        r.equality.to_string(),
        r.expect_fail.to_string(),
        evaluated,
        passing,
        r.note.clone(),
    ]
}

fn fit_rows(fit: &RateFit) -> Vec<Vec<String>> {
    fit.times
        .iter()
        .zip(&fit.values)
        .zip(&fit.residuals)
        .map(|((t, v), res)| vec![t.to_string(), v.to_string(), fit.predict(*t).to_string(), res.to_string()])
        .collect()
}

#[derive(Serialize)]
struct Counts {
    pass: usize,
    fail: usize,
    inconclusive: usize,
    failures: usize,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    name: &'a str,
    scale: FitScale,
    slope: f64,
    slope_half_width: f64,
    intercept: f64,
    r_squared: f64,
    points: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: u32,
    config_hash: &'a str,
    seed: u64,
    exit_code: i32,
    counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_schedule: Option<&'a [f64]>,
    checks: &'a [CheckReport],
    fits: Vec<FitSummary<'a>>,
}

pub fn summary_json(exp: &Experiment) -> Result<String> {
    let summary = Summary {
        schema: SUMMARY_SCHEMA,
        config_hash: &exp.hash,
        seed: exp.config.seed,
        exit_code: exp.exit_code(),
        counts: Counts {
            pass: exp.count(Verdict::Pass),
            fail: exp.count(Verdict::Fail),
            inconclusive: exp.count(Verdict::Inconclusive),
            failures: exp.failures(),
        },
        eta_schedule: exp.eta_schedule.as_deref(),
        checks: &exp.reports,
        fits: exp
            .fits
            .iter()
            .map(|f| FitSummary {
                name: &f.name,
                scale: f.scale,
                slope: f.slope,
                slope_half_width: f.slope_half_width,
                intercept: f.intercept,
                r_squared: f.r_squared,
                points: f.times.len(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| LabError::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes the resolved configuration, `checks.csv`, `summary.json` and one
/// `fit_<name>.csv` per rate fit into `dir`.
pub fn write_experiment(dir: &Path, exp: &Experiment) -> Result<()> {
    fs::create_dir_all(dir)?;
    let resolved = format!("# config_hash={}\n{}", exp.hash, exp.config.canonical().to_toml()?);
    fs::write(dir.join(RESOLVED_FILE), resolved)?;
    let rows: Vec<Vec<String>> = exp.reports.iter().map(check_row).collect();
    write_csv(&dir.join(CHECKS_FILE), &exp.hash, &CHECK_HEADER, &rows)?;
    for fit in &exp.fits {
        write_csv(
            &dir.join(format!("fit_{}.csv", file_stem(&fit.name))),
            &exp.hash,
            &["t", "value", "fitted", "residual"],
            &fit_rows(fit),
        )?;
    }
    fs::write(dir.join(SUMMARY_FILE), summary_json(exp)?)?;
    Ok(())
}
