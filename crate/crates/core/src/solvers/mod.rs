//! Semigroup solvers: finite differences, Euler-Maruyama Monte Carlo,
//! gradients, resolvents, Lyapunov constants and invariant sampling.

pub mod grid;

pub use grid::{grid_measure_weights, solve_parabolic_grid, GridField, GridSpec, PdeSolution, Scheme};
pub mod mc;
pub use mc::{
    semigroup_mc_penalized, semigroup_mc_reflected, simulate_coupled, Dynamics, McEstimate, McSettings, Member,
};
pub mod gradient;
pub use gradient::{grid_gradient, mc_gradient, McGradient};
pub mod lyapunov;
pub use lyapunov::{lyapunov_lambda, lyapunov_residual};
pub mod resolvent;
pub use resolvent::{resolvent_elliptic, ResolventSolution};
pub mod invariant;
pub use invariant::{sample_invariant, InvariantSample, SamplingMethod};
