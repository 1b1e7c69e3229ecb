//! Offline analytics over Level 3 limit-order-book event streams.
//!
//! The crate replays full-channel captures through an event-sourced book,
//! samples the stream onto a regular grid, and computes kinetic measures
//! (active depth, order velocity, energy, momentum) next to standard
//! microstructure baselines (VPIN, OFI, local volatility, Roll, Kyle's
//! lambda, Amihud). An evaluation layer runs OLS with full diagnostics,
//! Granger causality sweeps and directional-accuracy scoring, and a seeded
//! zero-intelligence generator provides ground-truth fixtures for all of it.

pub mod baselines;
pub mod book;
pub mod error;
pub mod frames;
pub mod ingest;
pub mod physics;
pub mod series;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
