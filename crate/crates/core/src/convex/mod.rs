//! Convex potentials and domains, projections, Moreau envelopes, the
//! penalized potential, mollification and the mollification-width schedule.

pub mod domain;
pub mod mollify;
pub mod moreau;
pub mod penalized;
pub mod potential;
pub mod schedule;

pub use domain::ConvexDomain;
pub use mollify::{mollify_potential, Mollified};
pub use moreau::{moreau_envelope, proximal_point, MoreauEnvelope};
pub use penalized::{penalized_potential, PenalizedScene};
pub use potential::{ConvexPotential, Potential};
pub use schedule::eta_schedule;
