//! Deterministic coordination of several chat-completion providers over a
//! bug report and a codebase: independent audits, cross-critique and a
//! single arbitration, with every artifact persisted to a numbered run
//! directory. The [`metrics`] module turns arbitration documents into
//! acceptance and contribution statistics.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod providers;
pub mod tokens;
pub mod workflow;

pub use error::{Error, Result};
