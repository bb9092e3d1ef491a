//! Lilypad models for a branching random walk in a Pareto potential, with a
//! Gillespie simulator and a numerical parabolic Anderson model solver for
//! comparison.

// Negated float comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod brw;
pub mod environment;
pub mod error;
pub mod lattice;
pub mod lilypad;
pub mod pam;

pub use environment::{Environment, ScalingConstants};
pub use error::{LilypadError, Result};
pub use lattice::{SiteId, Window};
pub use lilypad::{
    pam_lambda, pam_tau, solve_hitting_times, EnvelopeMode, FieldKind, LilypadField, MassField,
    MassKind, SupportSet, SupportSource,
};
