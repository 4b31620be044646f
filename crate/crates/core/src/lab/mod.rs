//! Verification of the functional inequalities against the solvers.

pub mod battery;
pub mod checks;
pub mod constants;
pub mod context;
pub mod fit;
pub mod report;

pub use battery::{standard_battery, TestFunction};
pub use context::{GridKind, GridSettings, Lab, McConfig, SampleSettings, Scene, Target};
pub use fit::{FitScale, RateFit};
pub use report::{CheckReport, NodeComparison, ToleranceComponent, ToleranceSource, Verdict};
