//! Traffic-flow experiments: average, worst-case and random arrivals, and
//! the arranged-queue model that turns an arrival list into waiting times.
//!
//! Gates alternate every slot, so a lane can serve one vehicle every two
//! slots. The arranged queue serves the `i`-th arrival at slot `2i`; any
//! vehicle that arrived earlier than its service slot waits the difference.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base::SeededRng;
use crate::error::{Result, SimError};

/// Seconds of waiting per slot of queue delay.
pub const QUEUE_SLOT_SECONDS: f64 = 5.5880;

pub const DEFAULT_HORIZON_SLOTS: u32 = 720;
pub const DEFAULT_TAKE_FIRST: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    /// One request per open slot: demand equals capacity.
    Average,
    /// A request in every slot: two per open slot, twice the capacity.
    Worst,
    /// Each slot carries a request with a fixed probability.
    Random,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [PatternKind::Average, PatternKind::Worst, PatternKind::Random];
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternKind::Average => "average",
            PatternKind::Worst => "worst",
            PatternKind::Random => "random",
        })
    }
}

impl FromStr for PatternKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(PatternKind::Average),
            "worst" => Ok(PatternKind::Worst),
            "random" => Ok(PatternKind::Random),
            other => Err(SimError::invalid(format!(
                "unknown pattern {other:?} (expected average, worst or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub horizon_slots: u32,
    pub take_first: usize,
    pub arrival_probability: f64,
    pub slot_seconds: f64,
    /// Slot parity on which the gate is open (0 = even slots).
    pub phase_parity: u32,
}

impl PatternSpec {
    pub fn new(kind: PatternKind) -> Self {
        PatternSpec {
            kind,
            horizon_slots: DEFAULT_HORIZON_SLOTS,
            take_first: DEFAULT_TAKE_FIRST,
            arrival_probability: 0.5,
            slot_seconds: QUEUE_SLOT_SECONDS,
            phase_parity: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.take_first == 0 {
            return Err(SimError::invalid("take_first must be positive"));
        }
        if !(0.0..=1.0).contains(&self.arrival_probability) {
            return Err(SimError::invalid(format!(
                "arrival probability {} outside [0, 1]",
                self.arrival_probability
            )));
        }
        if !(self.slot_seconds.is_finite() && self.slot_seconds >= 0.0) {
            return Err(SimError::invalid("slot_seconds must be non-negative"));
        }
        if self.phase_parity > 1 {
            return Err(SimError::invalid("phase parity must be 0 or 1"));
        }
        Ok(())
    }

    /// Open slots in the horizon: the number of vehicles the lane can take.
    pub fn capacity(&self) -> u32 {
        (0..self.horizon_slots).filter(|s| s % 2 == self.phase_parity).count() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueResult {
    pub arrivals: Vec<u32>,
    pub arranged_positions: Vec<u32>,
    pub per_vehicle_wait_s: Vec<f64>,
    pub avg_wait_s: f64,
}

/// Arrival slots for one lane over the spec's horizon, ascending.
pub fn generate_arrivals(spec: &PatternSpec, rng: &mut SeededRng) -> Result<Vec<u32>> {
    spec.validate()?;
    let slots = 0..spec.horizon_slots;
    Ok(match spec.kind {
        PatternKind::Average => slots.filter(|s| s % 2 == spec.phase_parity).collect(),
        PatternKind::Worst => slots.collect(),
        PatternKind::Random => slots.filter(|_| rng.chance(spec.arrival_probability)).collect(),
    })
}

/// Interleaves each arrival with an empty slot: `[a0, 0, a1, 0, ...]`.
pub fn arranged_array(arrivals: &[u32]) -> Vec<u32> {
    arrivals.iter().flat_map(|&a| [a, 0]).collect()
}

/// Waiting of the first `take_first` vehicles under the arranged queue:
/// vehicle `i` is served at slot `2i` and waits `max(0, 2i - arrival)`
/// slots.
pub fn arranged_wait(arrivals: &[u32], take_first: usize, slot_seconds: f64) -> Result<QueueResult> {
    if arrivals.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::invalid("arrival slots must be strictly increasing"));
    }
    if take_first == 0 || take_first > arrivals.len() {
        return Err(SimError::invalid(format!(
            "take_first = {take_first} outside 1..={}",
            arrivals.len()
        )));
    }
    if !(slot_seconds.is_finite() && slot_seconds >= 0.0) {
        return Err(SimError::invalid("slot_seconds must be non-negative"));
    }
    let arranged_positions: Vec<u32> = (0..arrivals.len() as u32).map(|i| 2 * i).collect();
    let per_vehicle_wait_s: Vec<f64> = arrivals
        .iter()
        .zip(&arranged_positions)
        .take(take_first)
        .map(|(&arrived, &served)| served.saturating_sub(arrived) as f64 * slot_seconds)
        .collect();
    let avg_wait_s = per_vehicle_wait_s.iter().sum::<f64>() / take_first as f64;
    Ok(QueueResult {
        arrivals: arrivals.to_vec(),
        arranged_positions,
        per_vehicle_wait_s,
        avg_wait_s,
    })
}

/// Percentage of requests beyond capacity: 0 up to `capacity`, then
/// `(n - capacity) / capacity * 100`.
pub fn waiting_pct(n_requests: u32, capacity: u32) -> Result<f64> {
    if capacity == 0 {
        return Err(SimError::invalid("capacity must be positive"));
    }
    if n_requests <= capacity {
        return Ok(0.0);
    }
    Ok((n_requests - capacity) as f64 / capacity as f64 * 100.0)
}

/// Extra lane space (and time) the pattern needs beyond its capacity.
/// `arrivals` is the realized request list; only the random pattern
/// depends on it.
pub fn extra_space_pct(spec: &PatternSpec, arrivals: &[u32]) -> Result<f64> {
    match spec.kind {
        PatternKind::Average => Ok(0.0),
        PatternKind::Worst => Ok(100.0),
        PatternKind::Random => waiting_pct(arrivals.len() as u32, spec.capacity()),
    }
}

/// Everything the `flow` experiment reports for one pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    pub pattern: PatternKind,
    pub seed: u64,
    pub horizon_slots: u32,
    pub take_first: usize,
    pub requests: usize,
    pub capacity: u32,
    pub arrivals: Vec<u32>,
    pub per_vehicle_wait_s: Vec<f64>,
    pub avg_wait_s: f64,
    pub extra_space_pct: f64,
}

/// Generates arrivals and measures the first `take_first` vehicles. When
/// fewer vehicles arrive than `take_first`, all of them are measured.
pub fn run_flow(spec: &PatternSpec, seed: u64) -> Result<FlowReport> {
    let mut rng = SeededRng::new(seed);
    let arrivals = generate_arrivals(spec, &mut rng)?;
    let take = spec.take_first.min(arrivals.len());
    let (per_vehicle_wait_s, avg_wait_s) = if take == 0 {
        (Vec::new(), 0.0)
    } else {
        let q = arranged_wait(&arrivals, take, spec.slot_seconds)?;
        (q.per_vehicle_wait_s, q.avg_wait_s)
    };
    Ok(FlowReport {
        pattern: spec.kind,
        seed,
        horizon_slots: spec.horizon_slots,
        take_first: take,
        requests: arrivals.len(),
        capacity: spec.capacity(),
        extra_space_pct: extra_space_pct(spec, &arrivals)?,
        arrivals,
        per_vehicle_wait_s,
        avg_wait_s,
    })
}
