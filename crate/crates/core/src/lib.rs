//! Finite-truncation numerics for the Itô integral against Hilbert-space-valued
//! Lévy processes, built as a series over the spectral modes of the covariance.
//!
//! The crate is layered like the construction itself:
//! [`space`] holds the coordinate Hilbert spaces and the isometries between
//! them, [`process`] simulates standard Lévy sequences and assembles U-valued
//! paths, [`integrator`] computes the integrals, and [`verify`] turns the
//! identities they satisfy into seeded pass/fail reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod linalg;
pub mod process;
pub mod rng;
pub mod space;
pub mod stats;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use integrator::{ito_general, ito_h, ito_l2lambda, ito_seq, IntegralPath};
pub use process::{assemble_levy, simulate_paths, LevyPath, SamplePath, StandardLevySpec, TimeGrid};
pub use space::{make_covariance, CovarianceSpec, HSOperator, HVector, SeqH};
pub use verify::{run_check, run_suite, CheckKind, CheckSpec, Report};
