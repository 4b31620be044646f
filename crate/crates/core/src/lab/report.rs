//! Check reports and verdicts.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

/// Numerical floor added to node-wise tolerances.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Guard factor separating FAIL from INCONCLUSIVE.
pub const FAIL_GUARD: f64 = 3.0;
/// Fraction of grid nodes that must pass in node-wise checks.
pub const NODE_PASS_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Where a piece of tolerance comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceSource {
    /// 95% confidence half-width of Monte Carlo estimates.
    ConfidenceInterval,
    /// Difference between the fine and the half-resolution grid solutions.
    Discretization,
    /// Difference between fourth- and second-order finite differences.
    FiniteDifference,
    /// Change under halving of the Euler step (or its `√step` budget).
    SchemeBias,
    /// Laplace-quadrature and truncation error.
    Quadrature,
    /// Floating-point floor.
    Roundoff,
}

impl ToleranceSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ToleranceSource::ConfidenceInterval => "ci",
            ToleranceSource::Discretization => "discretization",
            ToleranceSource::FiniteDifference => "fd_bias",
            ToleranceSource::SchemeBias => "scheme_bias",
            ToleranceSource::Quadrature => "quadrature",
            ToleranceSource::Roundoff => "roundoff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceComponent {
    pub source: ToleranceSource,
    pub value: f64,
}

impl ToleranceComponent {
    pub fn new(source: ToleranceSource, value: f64) -> Self {
        ToleranceComponent {
            source,
            value: value.abs(),
        }
    }
}

/// Node statistics of a check evaluated at many grid nodes or points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeSummary {
    pub evaluated: usize,
    pub passing: usize,
    /// Nodes with `margin < −3·tolerance`.
    pub below_guard: usize,
}

impl NodeSummary {
    pub fn pass_fraction(&self) -> f64 {
        if self.evaluated == 0 {
            1.0
        } else {
            self.passing as f64 / self.evaluated as f64
        }
    }
}

/// One verification of `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub kind: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub components: Vec<ToleranceComponent>,
    pub verdict: Verdict,
    /// The claim is attained with equality for this input.
    pub equality: bool,
    /// The check probes beyond the valid range and is meant to FAIL.
    pub expect_fail: bool,
    pub params: BTreeMap<String, f64>,
    pub scene: String,
    pub nodes: Option<NodeSummary>,
    pub note: String,
}

impl CheckReport {
    pub fn new(kind: &str, lhs: f64, rhs: f64, components: Vec<ToleranceComponent>) -> Self {
        let mut r = CheckReport {
            name: kind.to_string(),
            kind: kind.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            tolerance: 0.0,
            components,
            verdict: Verdict::Inconclusive,
            equality: false,
            expect_fail: false,
            params: BTreeMap::new(),
            scene: String::new(),
            nodes: None,
            note: String::new(),
        };
        r.judge();
        r
    }

    fn judge(&mut self) {
        self.margin = self.rhs - self.lhs;
        self.tolerance = self.components.iter().map(|c| c.value).sum::<f64>() + 0.0;
        let tol = self.tolerance;
        let finite = self.lhs.is_finite() && self.rhs.is_finite() && tol.is_finite();
        self.verdict = if !finite {
            Verdict::Fail
        } else if self.equality && self.margin.abs() < tol.max(ROUNDOFF_FLOOR) {
            Verdict::Inconclusive
        } else if self.margin >= -tol
            || self.nodes.is_some_and(|n| n.below_guard == 0 && n.pass_fraction() >= NODE_PASS_FRACTION)
        {
            Verdict::Pass
        } else if self.margin < -FAIL_GUARD * tol {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn equality(mut self, equality: bool) -> Self {
        self.equality = equality;
        self.judge();
        self
    }

    pub fn expecting_fail(mut self, expect: bool) -> Self {
        self.expect_fail = expect;
        self
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn scene(mut self, label: impl Into<String>) -> Self {
        self.scene = label.into();
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn with_nodes(mut self, nodes: NodeSummary) -> Self {
        self.nodes = Some(nodes);
        self.judge();
        self
    }

    /// Whether the outcome counts against the run: a FAIL, or anything but a
    /// FAIL for an expected-failure probe.
    pub fn is_failure(&self) -> bool {
        if self.expect_fail {
            self.verdict != Verdict::Fail
        } else {
            self.verdict == Verdict::Fail
        }
    }

    /// Turns INCONCLUSIVE into FAIL.
    pub fn promote_inconclusive(&mut self) {
        if self.verdict == Verdict::Inconclusive {
            self.verdict = Verdict::Fail;
        }
    }

    /// Tolerance contributed by one source.
    pub fn component(&self, source: ToleranceSource) -> f64 {
        self.components.iter().filter(|c| c.source == source).map(|c| c.value).sum()
    }
}

/// Per-node comparison `lhs[k] ≤ rhs[k]` with node-wise tolerances.
#[derive(Debug, Clone, Default)]
pub struct NodeComparison {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Per node, the tolerance contributions.
    pub tolerances: Vec<Vec<ToleranceComponent>>,
}

impl NodeComparison {
    pub fn push(&mut self, lhs: f64, rhs: f64, tolerance: Vec<ToleranceComponent>) {
        self.lhs.push(lhs);
        self.rhs.push(rhs);
        self.tolerances.push(tolerance);
    }

    pub fn len(&self) -> usize {
        self.lhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lhs.is_empty()
    }

    /// Summarises the nodes into one report built at the worst node, the one
    /// with the smallest `margin + tolerance`.
    pub fn into_report(self, kind: &str, equality: bool) -> CheckReport {
        if self.is_empty() {
            return CheckReport::new(kind, 0.0, 0.0, Vec::new())
                .equality(equality)
                .note("no nodes evaluated");
        }
        let mut worst = 0;
        let mut worst_slack = f64::INFINITY;
        let mut passing = 0;
        let mut below_guard = 0;
        for k in 0..self.len() {
            let tol: f64 = self.tolerances[k].iter().map(|c| c.value).sum();
            let margin = self.rhs[k] - self.lhs[k];
            if margin >= -tol {
                passing += 1;
            }
            if margin < -FAIL_GUARD * tol {
                below_guard += 1;
            }
            let slack = margin + tol;
            if slack < worst_slack || slack.is_nan() {
                worst_slack = slack;
                worst = k;
            }
        }
        let summary = NodeSummary {
            evaluated: self.len(),
            passing,
            below_guard,
        };
        CheckReport::new(kind, self.lhs[worst], self.rhs[worst], self.tolerances[worst].clone())
            .equality(equality)
            .with_nodes(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ci(v: f64) -> Vec<ToleranceComponent> {
        vec![ToleranceComponent::new(ToleranceSource::ConfidenceInterval, v)]
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(CheckReport::new("x", 1.0, 2.0, ci(0.1)).verdict, Verdict::Pass);
        assert_eq!(CheckReport::new("x", 1.0, 0.95, ci(0.1)).verdict, Verdict::Pass);
        assert_eq!(CheckReport::new("x", 1.0, 0.8, ci(0.1)).verdict, Verdict::Inconclusive);
        assert_eq!(CheckReport::new("x", 1.0, 0.5, ci(0.1)).verdict, Verdict::Fail);
        let eq = CheckReport::new("x", 1.0, 1.01, ci(0.1)).equality(true);
        assert_eq!(eq.verdict, Verdict::Inconclusive);
        let eq = CheckReport::new("x", 1.0, 1.5, ci(0.1)).equality(true);
        assert_eq!(eq.verdict, Verdict::Pass);
        let probe = CheckReport::new("x", 1.0, 0.5, ci(0.1)).expecting_fail(true);
        assert!(!probe.is_failure());
        let mut r = CheckReport::new("x", 1.0, 0.8, ci(0.1));
        r.promote_inconclusive();
        assert!(r.is_failure());
    }

    #[test]
    fn node_fraction_rule() {
        let mut nodes = NodeComparison::default();
        for _ in 0..199 {
            nodes.push(0.0, 1.0, ci(0.1));
        }
        nodes.push(1.0, 0.85, ci(0.1));
        let r = nodes.clone().into_report("n", false);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.lhs, 1.0);
        nodes.push(1.0, 0.5, ci(0.1));
        assert_eq!(nodes.into_report("n", false).verdict, Verdict::Fail);
    }
}
