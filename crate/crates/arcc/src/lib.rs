//! Simulation, identification, and benchmarking toolkit for an active remote
//! center of compliance: a force-controlled fine-positioning axis carried by
//! a slower robot, with a passive flexure stage in between.
//!
//! The crate is organized around six concerns:
//!
//! * [`lti`]: transfer functions, state-space models, discretization, and
//!   frequency-domain queries.
//! * [`plant`]: nonlinear time-domain simulation of the coupled
//!   robot / actuator / flexure / environment system.
//! * [`control`]: the stiffness force controller, position compensation, and
//!   discrete stability-margin search.
//! * [`sysid`]: instrumental-variable estimation of low-order models from
//!   sampled data.
//! * [`bench`]: contact-establishment and contour-following benchmark
//!   scenarios with aggregated statistics.
//! * [`presets`]: the calibrated parameter sets the binaries expose by name.

pub mod bench;
pub mod control;
pub mod error;
pub mod lti;
pub mod plant;
pub mod presets;
pub mod sysid;

pub use error::{Error, Result};
