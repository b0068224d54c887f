//! Minimal sensor/actuator selection for Lipschitz nonlinear networks.
//!
//! The crate provides the observability/controllability matrix-inequality
//! machinery, an exact branch-and-bound over sensor subsets with a
//! structure-exploiting relaxation, a dual certifier for inadmissible
//! configurations, a reweighted group-l1 heuristic baseline, and a seeded
//! benchmark generator with observer/controller simulation.

pub mod bench_gen;
pub mod bnb;
pub mod builders;
pub mod certify;
pub mod l1;
pub mod error;
pub mod model;
pub mod sdp;
pub mod sim;
pub mod sym;

pub use error::CoreError;
