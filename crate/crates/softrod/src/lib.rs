//! Vectorized soft-rod manipulation environments on top of `softrod-core`:
//! parallel stepping, run configuration, trajectory export, benchmarks and
//! the scheme comparison behind the `softrod` CLI.

pub mod bench;
pub mod cli;
pub mod compare;
pub mod config;
pub mod golden;
pub mod policy;
pub mod rollout;
pub mod trajectory;
pub mod vector;

pub use softrod_core as core;
