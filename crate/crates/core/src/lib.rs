//! Locality certificates for localized model predictive control.
//!
//! Builds the closed-loop (system level synthesis) parametrization of
//! finite-horizon MPC for networked LTI systems, decides whether a locality
//! (communication) pattern preserves the globally optimal MPC cost, searches
//! for the smallest d-hop locality that does, and checks the result by
//! solving global and localized MPC in closed loop.

pub mod analysis;
pub mod error;
pub mod gridgen;
pub mod io;
pub mod model;
pub mod mpc;
pub mod numerics;
pub mod selection;
pub mod sls;

pub use error::{Error, Result};
