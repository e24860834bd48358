//! Synthetic radar world.
//!
//! A scenario describes an ego trajectory, moving box-shaped actors, static
//! wall segments and a single radar. [`simulate`] turns it into per-frame
//! radar scans and ground-truth boxes.

pub mod scenario;
pub mod sim;
pub mod suite;

pub use scenario::{load_scenario, parse_scenario, ActorConfig, ScenarioConfig, SensorConfig, SimError, Trajectory, Wall};
pub use sim::{simulate, SimFrame};
pub use suite::benchmark_suite;
