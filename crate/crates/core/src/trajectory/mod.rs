//! Monte Carlo sampling of jump trajectories on the protocol's time grid.

pub mod engine;
pub mod record;
pub mod rng;

pub use engine::{
    apply_measurement_event, map_batch, run_batch, run_trajectory, sample_final, sample_initial, step_continuous, step_discrete,
    BatchOptions, StepEvent, TrajectoryState,
};
pub use record::{write_jsonl, JumpRecord, TrajectoryRecord};
pub use rng::RngStream;
