//! Plain-text rendering of a `summary.json`.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use super::output::{SUMMARY_FILE, SUMMARY_SCHEMA};
use crate::error::{LabError, Result};

fn number(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.4e}"),
        None => "nan".into(),
    }
}

/// Loads a summary from a file, or from `summary.json` inside a directory.
pub fn load_summary(path: &Path) -> Result<Value> {
    let file = if path.is_dir() { path.join(SUMMARY_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| LabError::ConfigInvalid(format!("cannot read {}: {e}", file.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| LabError::ConfigInvalid(format!("{} is not valid JSON: {e}", file.display())))?;
    match value.get("schema").and_then(Value::as_u64) {
        Some(s) if s == SUMMARY_SCHEMA as u64 => Ok(value),
        other => Err(LabError::ConfigInvalid(format!(
            "unsupported summary schema {other:?} (expected {SUMMARY_SCHEMA})"
        ))),
    }
}

pub fn render_summary(summary: &Value) -> String {
    let mut out = String::new();
    let hash = summary["config_hash"].as_str().unwrap_or("?");
    let _ = writeln!(out, "config {} seed {}", &hash[..hash.len().min(12)], summary["seed"]);
    let checks = summary["checks"].as_array().cloned().unwrap_or_default();
    let width = checks
        .iter()
        .filter_map(|c| c["name"].as_str())
        .map(str::len)
        .max()
        .unwrap_or(4)
        .max(4);
    let _ = writeln!(
        out,
        "{:<width$}  {:<12}  {:>11}  {:>11}  {:>11}  {:>11}",
        "name", "verdict", "lhs", "rhs", "margin", "tolerance"
    );
    for c in &checks {
        let mut verdict = c["verdict"].as_str().unwrap_or("?").to_string();
        if c["equality"].as_bool() == Some(true) {
            verdict.push('=');
        }
        if c["expect_fail"].as_bool() == Some(true) {
            verdict.push('!');
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:<12}  {:>11}  {:>11}  {:>11}  {:>11}",
            c["name"].as_str().unwrap_or("?"),
            verdict,
            number(&c["lhs"]),
            number(&c["rhs"]),
            number(&c["margin"]),
            number(&c["tolerance"]),
        );
    }
    if let Some(fits) = summary["fits"].as_array() {
        for f in fits {
            let _ = writeln!(
                out,
                "fit {}: slope {} ± {} (r² {})",
                f["name"].as_str().unwrap_or("?"),
                number(&f["slope"]),
                number(&f["slope_half_width"]),
                number(&f["r_squared"]),
            );
        }
    }
    let counts = &summary["counts"];
    let _ = writeln!(
        out,
        "{} PASS, {} FAIL, {} INCONCLUSIVE (= equality case, ! expected to fail)",
        counts["pass"], counts["fail"], counts["inconclusive"]
    );
    out
}
