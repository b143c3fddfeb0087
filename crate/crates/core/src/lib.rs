//! Simulation of faithful polarization-qubit transmission over a collective
//! noise channel, using a reference photon tagged by a second frequency.
//!
//! The crate is layered bottom-up:
//!
//! - [`state`]: sparse two-photon amplitude maps over labeled basis states;
//! - [`elements`]: PBS, HWP, frequency beam splitter, frequency shifter,
//!   temporal eraser and X-basis measurement;
//! - [`noise`]: collective-noise families, including seeded Haar sampling;
//! - [`protocol`]: the end-to-end pipeline, post-selection and correction;
//! - [`oracle`]: an independent dense evolution for cross-checking;
//! - [`harness`]: Monte Carlo runs, sweeps and JSON reports;
//! - [`config`] and [`cli`]: the `qtransmit` command-line front end;
//! - [`validate`]: the built-in invariant suite.

pub mod cli;
pub mod config;
pub mod elements;
pub mod error;
pub mod harness;
pub mod noise;
pub mod oracle;
pub mod protocol;
pub mod serde_complex;
pub mod state;
pub mod validate;

pub use error::{Error, Result};
