//! Surrogate-assisted design of heaving-cylinder wave energy farms.
//!
//! The crate is organised as a pipeline:
//!
//! * [`climate`] turns sea-state samples into per-year probability masses on a
//!   Gauss-Legendre grid and evaluates JONSWAP spectra.
//! * [`hydro`] provides ground-truth hydrodynamic coefficients for isolated
//!   cylinders and cylinder pairs (an eigenfunction-matching reference solver
//!   and a closed-form toy fixture).
//! * [`surrogate`] trains committees of small feed-forward networks on those
//!   coefficients with pool-based query-by-committee active learning.
//! * [`mbe`] composes farm-level added mass, damping, and excitation from one-
//!   and two-body outputs with a second-order many-body expansion.
//! * [`farm`] solves the frequency-domain response and integrates power over
//!   the wave climate.
//! * [`optimizer`] searches plant, control, and layout variables with a genetic
//!   algorithm, a finite-difference gradient refiner, and their hybrid.
//! * [`report`] holds configuration parsing, validation studies, and file
//!   emission used by the command-line tool.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod climate;
pub mod error;
pub mod farm;
pub mod hydro;
pub mod mbe;
pub mod optimizer;
pub mod par;
pub mod report;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Version string embedded in every emitted artifact.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
