//! Radar-based dynamic occupancy grid mapping.
//!
//! The crate is organised around the per-frame processing chain:
//!
//! - [`ism`] turns a [`RadarScan`] into a [`MeasurementGrid`] of four-state
//!   evidence (unknown, free, static, dynamic).
//! - [`update`] folds the measurement into the running [`DogmFrame`] with a
//!   per-cell Bayesian product, applies the state-transition decay and keeps
//!   the grid ego-centred.
//! - [`corrector`] produces per-cell state corrections (ground-truth labels,
//!   a noisy oracle, or files written by an external model) and [`fusion`]
//!   merges them back under the safety rule table.
//! - [`particles`] estimates cell dynamics with a range-rate weighted
//!   particle filter.
//! - [`eval`] and [`cluster`] implement the grid and object-level metrics.
// Parameter checks use negated comparisons on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod cluster;
pub mod codec;
pub mod corrector;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod grid;
pub mod ism;
pub mod particles;
pub mod radar;
pub mod rng;
pub mod update;

pub use belief::{CellBelief, State, PROB_FLOOR};
pub use corrector::{CorrectionGrid, GtBox, GtFrame, ObjectClass};
pub use error::{DogmError, Result};
pub use fusion::{CorrectionCell, FusionParams};
pub use geometry::{Pose2, Vec2};
pub use grid::{Grid, GridSpec};
pub use ism::{IsmParams, MeasurementGrid};
pub use particles::{FilterParams, Particle};
pub use radar::{RadarDetection, RadarScan};
pub use update::{DogmFrame, TransitionMatrix};
