//! Deterministic simulator of trust-based delegated consensus under
//! adversarial attack, with reinforcement-learning defense agents.

pub mod abac;
pub mod agents;
pub mod attacks;
pub mod consensus;
pub mod env;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod trust;

pub use error::{Result, SimError};
