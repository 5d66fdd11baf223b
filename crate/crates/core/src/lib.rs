//! Simulation of two intersection control schemes: a reservation-based
//! baseline on a cell grid, and a production-line scheme in which every
//! lane is a conveyor of fixed containers that open on alternate seconds.
//!
//! All randomness flows through [`base::SeededRng`], so a seed fixes every
//! output.

pub mod base;
pub mod baseline_aim;
pub mod cli;
pub mod error;
pub mod flow_patterns;
pub mod metrics_report;
pub mod prodline;
pub mod turn_knn;

pub use error::{Result, SimError};
