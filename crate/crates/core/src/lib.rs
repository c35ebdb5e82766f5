//! Serverless collaborative training of dense autoencoders over
//! device-to-device contacts, with distributed threshold consensus for
//! global-anomaly detection.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`nn`] — minimal dense-autoencoder engine (forward, backprop, momentum
//!   SGD, parameter flattening, checkpoints).
//! - [`data`] — IDX ingestion, Non-IID partitioning, train/validation
//!   splits, anomaly-set generators, and dirty-case injection.
//! - [`mobility`] — random-waypoint contact generation, static topologies,
//!   and a replayable trace file format.
//! - [`protocol`] — model aggregation, anomaly scoring, local and
//!   distributed threshold computation, and the per-epoch device loop.
//! - [`sim`] — the epoch-synchronous simulation driver and metrics stream.
//! - [`eval`] — detection rates (TPR/FPR), report tables, reconstruction
//!   dumps, and rate-vs-epoch curves.
//!
//! Everything is deterministic given the configured seeds: rerunning a
//! simulation with identical inputs reproduces the metrics byte for byte.

pub mod data;
pub mod error;
pub mod eval;
pub mod mobility;
pub mod nn;
pub mod protocol;
pub mod seeds;
pub mod sim;

pub use error::{Error, Result};
