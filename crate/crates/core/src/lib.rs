//! Simulation and reconstruction toolkit for RFID backscatter sensing.
//!
//! The crate models reader-to-tag link budgets, synthesizes per-link RSSI
//! time series for quiet and walking scenarios, ingests RSSI logs, and
//! reconstructs radio tomographic images to detect and track a moving person.
//!
//! Pipeline, bottom-up:
//!
//! - [`geometry`]: scene, planar grid, reader-to-tag links
//! - [`link_budget`]: backscatter power, path loss, substrates, fading, PIE
//! - [`weight`]: ellipsoid weight matrix
//! - [`solver`]: covariance prior, regularized projection, reconstruction
//! - [`sim`]: baseline and walking-target RSS generators
//! - [`ingest`]: log parsing, frame assembly, baselines, RSS changes
//! - [`detect`]: peaks, presence, trajectories
//! - [`pipeline`]: the `simulate`, `reconstruct` and `material-sweep` commands
//!
//! Runnable examples live in `examples/`; `cargo run --example` lists them.

pub mod config;
pub mod detect;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod link_budget;
pub mod pipeline;
pub mod render;
pub mod sim;
pub mod solver;
pub mod weight;

pub use error::{Error, Result};
