//! Robotability scoring engine.
//!
//! Feature-importance weights are derived from pairwise expert votes
//! ([`ahp`]), environmental indicators are extracted at evenly spaced points
//! along a sidewalk network ([`graph`], [`extract`]), and the per-point
//! polarity-weighted sums are aggregated over zones and ranked
//! ([`scoring`]). [`pipeline`] wires the stages into reproducible batch runs
//! and [`synth`] generates synthetic cities for tests and demos.

pub mod ahp;
pub mod catalog;
pub mod error;
pub mod extract;
pub mod fixtures;
pub mod geo;
pub mod graph;
pub mod numfmt;
pub mod par;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
