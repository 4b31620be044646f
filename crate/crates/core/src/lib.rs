//! Numerical laboratory for perturbed Ornstein-Uhlenbeck semigroups.
//!
//! The model lives in coordinates `ξ ∈ ℝⁿ` with reference Gaussian
//! `γ = ⊗ N(0, λᵢ)` and generator `Δ + ⟨Bξ, ∇⟩ − ⟨∇φ, ∇⟩`, where
//! `B = diag(−1/λᵢ)` and `φ` is a convex potential. On top of that model the
//! crate provides convex geometry (projections, Moreau envelopes, the
//! penalized potential), semigroup solvers (finite differences for `n ≤ 2`,
//! Euler-Maruyama for penalized and reflected dynamics), closed-form oracles,
//! inequality checks and a declarative experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod error;
pub mod harness;
pub mod lab;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod solvers;
pub mod spectral;
pub mod stats;

pub use error::{LabError, Result};
