//! Scenes and the solver settings shared by all checks.

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexDomain, ConvexPotential, PenalizedScene, Potential};
use crate::error::{LabError, Result};
use crate::rng::derive_seed;
use crate::solvers::grid::{solve_parabolic_grid, GridSpec, PdeSolution, Scheme, DEFAULT_HALF_WIDTH};
use crate::solvers::invariant::{sample_invariant, InvariantSample, SamplingMethod};
use crate::solvers::mc::{Dynamics, McSettings, DEFAULT_BATCHES};
use crate::spectral::GaussianModel;

/// Which semigroup a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// The semigroup on `Ω` with Neumann (reflecting) boundary, invariant
    /// measure `e^{−U}γ` restricted to `Ω`.
    #[default]
    Domain,
    /// The penalized semigroup on the whole space, invariant measure
    /// `e^{−Φ_ε}γ`.
    Penalized,
}

impl Target {
    pub fn as_str(&self) -> &'static str {
        match self {
            Target::Domain => "domain",
            Target::Penalized => "penalized",
        }
    }
}

/// How the grid solver realises the domain semigroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Clip the box to `Ω` when `Ω` is a coordinate box, otherwise penalize.
    #[default]
    Auto,
    /// Clip the box to `Ω` (coordinate boxes only) and use `U` as potential.
    Domain,
    /// Use `Φ_ε` on the full box.
    Penalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Nodes per axis (odd).
    pub nodes: usize,
    pub dt: f64,
    /// Box half-width in units of `√λᵢ`.
    pub half_width: f64,
    pub scheme: Scheme,
    pub richardson: bool,
    pub kind: GridKind,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            nodes: 401,
            dt: 1e-3,
            half_width: DEFAULT_HALF_WIDTH,
            scheme: Scheme::CrankNicolson,
            richardson: true,
            kind: GridKind::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub step: f64,
    pub batches: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 20_000,
            step: 1e-3,
            batches: DEFAULT_BATCHES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    pub count: usize,
    pub method: SamplingMethod,
}

impl Default for SampleSettings {
    fn default() -> Self {
        SampleSettings {
            count: 200_000,
            method: SamplingMethod::Importance,
        }
    }
}

/// A convex scene: Gaussian model, potential `U`, domain `Ω` and the
/// penalization level `ε`.
#[derive(Debug, Clone)]
pub struct Scene {
    penalized: PenalizedScene,
    pub label: String,
}

impl Scene {
    pub fn new(model: GaussianModel, potential: ConvexPotential, domain: ConvexDomain, epsilon: f64) -> Result<Self> {
        let label = format!(
            "n={} lambda1={} U={} domain={} eps={}",
            model.dim(),
            model.lambda1(),
            potential.label(),
            domain.label(),
            epsilon
        );
        Ok(Scene {
            penalized: PenalizedScene::new(model, potential, domain, epsilon)?,
            label,
        })
    }

    /// The one-dimensional Ornstein-Uhlenbeck scene with variance `lambda1`.
    pub fn ornstein_uhlenbeck(lambda1: f64) -> Result<Self> {
        Scene::new(
            GaussianModel::from_eigenvalues(&[lambda1])?,
            ConvexPotential::Zero,
            ConvexDomain::FullSpace,
            1.0,
        )
    }

    pub fn model(&self) -> &GaussianModel {
        &self.penalized.model
    }

    pub fn potential(&self) -> &ConvexPotential {
        &self.penalized.potential
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.penalized.domain
    }

    pub fn epsilon(&self) -> f64 {
        self.penalized.epsilon()
    }

    pub fn penalized(&self) -> &PenalizedScene {
        &self.penalized
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Scene::new(self.model().clone(), self.potential().clone(), self.domain().clone(), epsilon)
    }

    /// Unperturbed Gaussian on the whole space.
    pub fn is_free(&self) -> bool {
        matches!(self.potential(), ConvexPotential::Zero) && matches!(self.domain(), ConvexDomain::FullSpace)
    }

    pub fn dynamics(&self, target: Target) -> Dynamics<'_> {
        match target {
            Target::Penalized => Dynamics::Penalized(&self.penalized),
            Target::Domain => Dynamics::Reflected {
                model: self.model(),
                potential: self.potential(),
                domain: self.domain(),
            },
        }
    }
}

/// A scene together with solver settings and a base seed.
#[derive(Debug, Clone)]
pub struct Lab {
    pub scene: Scene,
    pub grid: GridSettings,
    pub mc: McConfig,
    pub samples: SampleSettings,
    pub seed: u64,
}

/// The grid realisation of a semigroup: box and potential.
pub struct GridProblem<'a> {
    pub spec: GridSpec,
    pub potential: &'a dyn Potential,
}

impl Lab {
    pub fn new(scene: Scene, seed: u64) -> Self {
        Lab {
            scene,
            grid: GridSettings::default(),
            mc: McConfig::default(),
            samples: SampleSettings::default(),
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Lab { seed, ..self.clone() }
    }

    /// Seed of a named sub-stream of this lab.
    pub fn stream(&self, index: u64) -> u64 {
        derive_seed(self.seed, index)
    }

    pub fn mc_settings(&self, stream: u64) -> McSettings {
        McSettings {
            paths: self.mc.paths,
            step: self.mc.step,
            seed: self.stream(stream),
            batches: self.mc.batches,
        }
    }

    /// Box and potential realising `target` on the grid.
    pub fn grid_problem(&self, target: Target) -> Result<GridProblem<'_>> {
        let model = self.scene.model();
        let domain = self.scene.domain();
        let g = &self.grid;
        let mut spec = GridSpec::covering(model, domain, g.nodes, g.dt, g.scheme, g.half_width)?;
        spec.richardson = g.richardson;
        let boxed = domain.as_box(model.dim());
        let clip = match (target, g.kind) {
            (Target::Penalized, _) | (Target::Domain, GridKind::Penalized) => false,
            (Target::Domain, GridKind::Domain) => {
                if boxed.is_none() {
                    return Err(LabError::ConfigInvalid(format!(
                        "the grid can only clip to coordinate boxes, not {}",
                        domain.label()
                    )));
                }
                true
            }
            (Target::Domain, GridKind::Auto) => boxed.is_some(),
        };
        if clip {
            let (lo, hi) = boxed.unwrap_or_default();
            spec = spec.clipped(&lo, &hi)?;
            Ok(GridProblem {
                spec,
                potential: self.scene.potential(),
            })
        } else {
            Ok(GridProblem {
                spec,
                potential: self.scene.penalized(),
            })
        }
    }

    /// Solves the grid problem of `target` for datum `f`.
    pub fn solve<F: Fn(&[f64]) -> f64 + Sync>(&self, target: Target, f: F, times: &[f64]) -> Result<PdeSolution> {
        let problem = self.grid_problem(target)?;
        solve_parabolic_grid(self.scene.model(), problem.potential, f, times, &problem.spec)
    }

    /// Samples the invariant measure of `target`.
    pub fn invariant(&self, target: Target, stream: u64) -> Result<InvariantSample> {
        sample_invariant(
            self.scene.dynamics(target),
            self.samples.count,
            self.stream(stream),
            self.samples.method,
        )
    }
}
