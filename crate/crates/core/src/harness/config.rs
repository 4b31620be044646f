//! Experiment files.
//!
//! An experiment is a TOML document:
//!
//! ```toml
//! seed = 7
//!
//! [scene]
//! eigenvalues = [1.0, 0.5]
//! epsilon = 0.01
//! potential = { kind = "quadratic", curvature = [1.0] }
//! domain = { kind = "half_space", normal = [1.0, 0.0], offset = 0.0 }
//!
//! [solver.grid]
//! nodes = 201
//!
//! [battery.wave]
//! kind = "sine"
//! coefficients = [1.0, 2.0]
//!
//! [[checks]]
//! kind = "pointwise_gradient"
//! f = "wave"
//! t = 0.25
//! p = 2.0
//! ```
//!
//! Test functions are referenced by name, first in `[battery]` and then in
//! the standard battery. Unknown keys are rejected everywhere. The resolved
//! form, with every default filled in, is what gets hashed and written next to
//! the results.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::convex::{ConvexDomain, ConvexPotential};
use crate::error::{LabError, Result};
use crate::lab::battery::{standard_battery, TestFunction};
use crate::lab::checks::GradientMode;
use crate::lab::context::{GridSettings, Lab, McConfig, SampleSettings, Scene, Target};
use crate::lab::fit::geometric_times;
use crate::spectral::{validate_spectrum, GaussianModel};

fn default_epsilon() -> f64 {
    0.01
}

fn default_eta_samples() -> usize {
    2000
}

fn zero_potential() -> ConvexPotential {
    ConvexPotential::Zero
}

fn full_space() -> ConvexDomain {
    ConvexDomain::FullSpace
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub eigenvalues: Vec<f64>,
    /// Number of leading eigenvalues kept; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "zero_potential")]
    pub potential: ConvexPotential,
    #[serde(default = "full_space")]
    pub domain: ConvexDomain,
    /// Truncation levels at which to select mollification widths. No
    /// schedule is computed when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta_levels: Vec<usize>,
    #[serde(default = "default_eta_samples")]
    pub eta_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub grid: GridSettings,
    pub mc: McConfig,
}

/// A list of times, either explicit or geometrically spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Times {
    List(Vec<f64>),
    Geometric { from: f64, to: f64, count: usize },
}

impl Times {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            Times::List(v) => Ok(v.clone()),
            Times::Geometric { from, to, count } => geometric_times(*from, *to, *count),
        }
    }
}

fn default_target_error() -> f64 {
    1e-3
}

fn default_gradient_p() -> Vec<f64> {
    vec![2.0]
}

fn default_fit_p() -> Vec<f64> {
    vec![1.5, 2.0, 4.0]
}

fn both_targets() -> Vec<Target> {
    vec![Target::Domain, Target::Penalized]
}

/// The check to run and its parameters. Function fields hold battery names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    MehlerGrid {
        f: String,
        times: Times,
        #[serde(default = "default_target_error")]
        target_error: f64,
    },
    MehlerMc {
        f: String,
        times: Times,
        points: Vec<f64>,
    },
    PointwiseGradient {
        #[serde(default)]
        target: Target,
        f: String,
        t: f64,
        p: f64,
        #[serde(default)]
        mode: GradientMode,
        #[serde(default)]
        points: Vec<Vec<f64>>,
    },
    Smoothing {
        #[serde(default)]
        target: Target,
        f: String,
        p: f64,
        times: Times,
    },
    UniformGradient {
        #[serde(default)]
        target: Target,
        f: String,
        times: Times,
    },
    /// An empty `functions` list means the standard battery.
    Logsob {
        #[serde(default)]
        target: Target,
        #[serde(default)]
        functions: Vec<String>,
        p: f64,
    },
    Poincare {
        #[serde(default)]
        target: Target,
        #[serde(default)]
        functions: Vec<String>,
        p: f64,
    },
    Hyper {
        #[serde(default)]
        target: Target,
        f: String,
        q: f64,
        t: f64,
        #[serde(default)]
        probe: bool,
    },
    Decay {
        #[serde(default)]
        target: Target,
        f: String,
        times: Times,
        #[serde(default = "default_gradient_p")]
        gradient_p: Vec<f64>,
        #[serde(default = "default_fit_p")]
        fit_p: Vec<f64>,
    },
    AsymptoticMean {
        #[serde(default = "both_targets")]
        targets: Vec<Target>,
        f: String,
        t: f64,
        points: Vec<Vec<f64>>,
    },
    /// An empty `functions` list means the bounded part of the standard
    /// battery.
    PenalizationLimit {
        f: String,
        t: f64,
        x: Vec<f64>,
        epsilons: Vec<f64>,
        #[serde(default)]
        functions: Vec<String>,
    },
    OrderProperties {
        #[serde(default)]
        target: Target,
        f: String,
        g: String,
        t: f64,
        p: f64,
    },
    Invariance {
        #[serde(default)]
        target: Target,
        f: String,
        t: f64,
    },
    Resolvent {
        #[serde(default)]
        target: Target,
        #[serde(default)]
        functions: Vec<String>,
        lambdas: Vec<f64>,
    },
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::MehlerGrid { .. } => "mehler_grid",
            CheckKind::MehlerMc { .. } => "mehler_mc",
            CheckKind::PointwiseGradient { .. } => "pointwise_gradient",
            CheckKind::Smoothing { .. } => "smoothing",
            CheckKind::UniformGradient { .. } => "uniform_gradient",
            CheckKind::Logsob { .. } => "logsob",
            CheckKind::Poincare { .. } => "poincare",
            CheckKind::Hyper { .. } => "hyper",
            CheckKind::Decay { .. } => "decay",
            CheckKind::AsymptoticMean { .. } => "asymptotic_mean",
            CheckKind::PenalizationLimit { .. } => "penalization_limit",
            CheckKind::OrderProperties { .. } => "order_properties",
            CheckKind::Invariance { .. } => "invariance",
            CheckKind::Resolvent { .. } => "resolvent",
        }
    }

    /// Single functions referenced by the check.
    pub fn function_refs(&self) -> Vec<&str> {
        match self {
            CheckKind::MehlerGrid { f, .. }
            | CheckKind::MehlerMc { f, .. }
            | CheckKind::PointwiseGradient { f, .. }
            | CheckKind::Smoothing { f, .. }
            | CheckKind::UniformGradient { f, .. }
            | CheckKind::Hyper { f, .. }
            | CheckKind::Decay { f, .. }
            | CheckKind::AsymptoticMean { f, .. }
            | CheckKind::Invariance { f, .. } => vec![f.as_str()],
            CheckKind::OrderProperties { f, g, .. } => vec![f.as_str(), g.as_str()],
            CheckKind::PenalizationLimit { f, functions, .. } => {
                let mut v = vec![f.as_str()];
                v.extend(functions.iter().map(String::as_str));
                v
            }
            CheckKind::Logsob { functions, .. }
            | CheckKind::Poincare { functions, .. }
            | CheckKind::Resolvent { functions, .. } => functions.iter().map(String::as_str).collect(),
        }
    }

    /// The single time parameter, for checks that have one.
    pub fn time_mut(&mut self) -> Option<&mut f64> {
        match self {
            CheckKind::PointwiseGradient { t, .. }
            | CheckKind::Hyper { t, .. }
            | CheckKind::AsymptoticMean { t, .. }
            | CheckKind::PenalizationLimit { t, .. }
            | CheckKind::OrderProperties { t, .. }
            | CheckKind::Invariance { t, .. } => Some(t),
            _ => None,
        }
    }

    /// The time list, for checks evaluated along a time axis.
    pub fn times_mut(&mut self) -> Option<&mut Times> {
        match self {
            CheckKind::MehlerGrid { times, .. }
            | CheckKind::MehlerMc { times, .. }
            | CheckKind::Smoothing { times, .. }
            | CheckKind::UniformGradient { times, .. }
            | CheckKind::Decay { times, .. } => Some(times),
            _ => None,
        }
    }

    /// The integrability exponent, for checks that have one.
    pub fn exponent_mut(&mut self) -> Option<&mut f64> {
        match self {
            CheckKind::PointwiseGradient { p, .. }
            | CheckKind::Smoothing { p, .. }
            | CheckKind::Logsob { p, .. }
            | CheckKind::Poincare { p, .. }
            | CheckKind::OrderProperties { p, .. } => Some(p),
            _ => None,
        }
    }
}

/// One entry of `[[checks]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    /// Report name; the check's own names are used when absent.
    pub name: Option<String>,
    /// The inputs attain the inequality with equality, so a margin within
    /// tolerance of zero is INCONCLUSIVE rather than PASS.
    pub equality: bool,
    pub check: CheckKind,
}

impl<'de> Deserialize<'de> for CheckEntry {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mut table = toml::Table::deserialize(deserializer)?;
        let name = match table.remove("name") {
            None => None,
            Some(toml::Value::String(s)) => Some(s),
            Some(other) => return Err(D::Error::custom(format!("check name must be a string, got {other}"))),
        };
        let equality = match table.remove("equality") {
            None => false,
            Some(toml::Value::Boolean(b)) => b,
            Some(other) => return Err(D::Error::custom(format!("`equality` must be a boolean, got {other}"))),
        };
        let check = toml::Value::Table(table).try_into::<CheckKind>().map_err(D::Error::custom)?;
        Ok(CheckEntry { name, equality, check })
    }
}

impl Serialize for CheckEntry {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut table = match toml::Value::try_from(&self.check).map_err(S::Error::custom)? {
            toml::Value::Table(t) => t,
            _ => return Err(S::Error::custom("check did not serialize to a table")),
        };
        if let Some(name) = &self.name {
            table.insert("name".into(), toml::Value::String(name.clone()));
        }
        table.insert("equality".into(), toml::Value::Boolean(self.equality));
        table.serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub scene: SceneConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub samples: SampleSettings,
    #[serde(default)]
    pub battery: BTreeMap<String, TestFunction>,
    pub checks: Vec<CheckEntry>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| LabError::ConfigInvalid(e.message().to_string()))?;
        config.resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Validates the configuration and fills in derived defaults.
    pub fn resolved(mut self) -> Result<Self> {
        let spectrum = validate_spectrum(&self.scene.eigenvalues)?;
        self.scene.eigenvalues = spectrum.eigenvalues().to_vec();
        let dim = self.scene.dim.unwrap_or(spectrum.len());
        self.scene.dim = Some(dim);
        if self.checks.is_empty() {
            return Err(LabError::ConfigInvalid("no checks requested".into()));
        }
        let scene = self.build_scene()?;
        let dim = scene.model().dim();
        for (name, f) in &self.battery {
            f.validate(dim)
                .map_err(|e| LabError::ConfigInvalid(format!("battery function `{name}`: {e}")))?;
        }
        let known = self.functions(dim);
        for entry in &self.checks {
            for name in entry.check.function_refs() {
                if !known.contains_key(name) {
                    return Err(LabError::ConfigInvalid(format!(
                        "check `{}` refers to unknown function `{name}`",
                        entry.check.name()
                    )));
                }
            }
            if let Some(times) = match &entry.check {
                CheckKind::MehlerGrid { times, .. }
                | CheckKind::MehlerMc { times, .. }
                | CheckKind::Smoothing { times, .. }
                | CheckKind::UniformGradient { times, .. }
                | CheckKind::Decay { times, .. } => Some(times),
                _ => None,
            } {
                times.values()?;
            }
        }
        Ok(self)
    }

    pub fn build_scene(&self) -> Result<Scene> {
        let spectrum = validate_spectrum(&self.scene.eigenvalues)?;
        let dim = self.scene.dim.unwrap_or(spectrum.len());
        let model = GaussianModel::new(spectrum, dim)?;
        Scene::new(model, self.scene.potential.clone(), self.scene.domain.clone(), self.scene.epsilon)
    }

    pub fn build_lab(&self) -> Result<Lab> {
        let mut lab = Lab::new(self.build_scene()?, self.seed);
        lab.grid = self.solver.grid.clone();
        lab.mc = self.solver.mc.clone();
        lab.samples = self.samples.clone();
        Ok(lab)
    }

    /// All functions available to the checks: the standard battery,
    /// overridden by `[battery]` entries of the same name.
    pub fn functions(&self, dim: usize) -> BTreeMap<String, TestFunction> {
        let mut all: BTreeMap<String, TestFunction> = standard_battery(dim).into_iter().collect();
        all.extend(self.battery.iter().map(|(k, v)| (k.clone(), v.clone())));
        all
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::ConfigInvalid(e.to_string()))
    }

    /// The configuration without the output directory and worker count,
    /// which do not affect results.
    pub fn canonical(&self) -> ExperimentConfig {
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.workers = 0;
        canonical
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let text = self.canonical().to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3

[scene]
eigenvalues = [0.5, 1.0]

[battery.lin]
kind = "affine"
coefficients = [1.0, 0.0]

[[checks]]
kind = "invariance"
f = "lin"
t = 0.5
"#;

    #[test]
    fn parses_and_sorts_the_spectrum() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.scene.eigenvalues, vec![1.0, 0.5]);
        assert_eq!(c.scene.dim, Some(2));
        assert_eq!(c.checks.len(), 1);
        assert!(!c.checks[0].equality);
    }

    #[test]
    fn resolved_form_round_trips() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("t = 0.5", "t = 0.5\ntime = 1.0");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(LabError::ConfigInvalid(_))));
        let bad = MINIMAL.replace("seed = 3", "seed = 3\nsed = 4");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn negative_eigenvalue_is_reported() {
        let bad = MINIMAL.replace("[0.5, 1.0]", "[1.0, -0.5]");
        assert!(matches!(
            ExperimentConfig::parse(&bad),
            Err(LabError::NonPositiveEigenvalue { .. })
        ));
    }

    #[test]
    fn unknown_function_is_rejected() {
        let bad = MINIMAL.replace("f = \"lin\"", "f = \"nope\"");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(LabError::ConfigInvalid(_))));
    }

    #[test]
    fn hash_ignores_output_and_workers() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        b.workers = 8;
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 4;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }
}
