//! Shared domain types: speeds, the seeded random source, the tick clock
//! and the vehicle record.

pub mod clock;
pub mod rng;
pub mod units;
pub mod vehicle;

pub use clock::SimClock;
pub use rng::{SeededRng, DEFAULT_SEED};
pub use units::{mph_to_fps, mph_to_fps_rounded, mph_to_fps_truncated, FpsConversion, SpeedFps, SpeedMph};
pub use vehicle::{LaneGroup, LaneId, TurnFeatures, TurnLabel, Vehicle, VehicleState};

/// Length of one grid cell or container, in feet (8 m).
pub const CELL_FT: f64 = 26.2467;
