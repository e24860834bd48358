//! Pipeline orchestration for the `dogm` binary.
//!
//! [`engine::Engine`] advances the grid and particle filter one scan at a
//! time. [`run`] drives simulated scenarios through it and writes artifacts,
//! [`report`] compares a baseline run with a corrected run, and [`render`]
//! draws frames.
// Parameter checks use negated comparisons on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod render;
pub mod report;
pub mod run;
