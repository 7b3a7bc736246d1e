//! Reproducible benchmarking of probabilistic computer-model emulators.
//!
//! The crate covers the whole pipeline: a registry of deterministic test
//! functions, seeded space-filling designs, scenario seeding, built-in and
//! external emulators, proper-scoring evaluation, a study harness with
//! fallback handling, and analysis products (rank curves, heatmaps, Pareto
//! frontiers, performance clustering).

pub mod analysis;
pub mod config;
pub mod design;
pub mod emulators;
pub mod error;
pub mod functions;
pub mod harness;
pub mod metrics;
pub mod optimize;
pub mod registry;
pub mod rng;
pub mod seeding;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
