//! Numerical laboratory for studying how classifiers trade off background
//! invariance against object disambiguation on synthetic Gaussian
//! environments.
//!
//! The pipeline: generate environments ([`synthenv`]), train small MLPs
//! ([`mlp`]), score them with factorization and feature-weighting metrics
//! ([`metrics`]), manipulate their representations ([`interventions`]), and
//! orchestrate population-level studies ([`population`]). All randomness is
//! seeded; every artifact is reproducible byte for byte.

pub mod config;
pub mod error;
pub mod interventions;
pub mod metrics;
pub mod mlp;
pub mod numerics;
pub mod plots;
pub mod population;
pub mod scalar;
pub mod synthenv;
pub mod textio;

pub use error::{CtxError, Result};
pub use scalar::Scalar;

/// Concrete aliases for the default double-precision pipeline.
pub type Matrix64 = numerics::Matrix<f64>;
pub type Dataset64 = synthenv::Dataset<f64>;
pub type MlpModel64 = mlp::MlpModel<f64>;
pub type PcaResult64 = numerics::PcaResult<f64>;

/// Single-precision aliases for callers that prefer f32 storage.
pub type Matrix32 = numerics::Matrix<f32>;
pub type Dataset32 = synthenv::Dataset<f32>;
pub type MlpModel32 = mlp::MlpModel<f32>;
