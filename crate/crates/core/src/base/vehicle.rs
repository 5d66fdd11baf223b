use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base::units::SpeedMph;
use crate::error::{Result, SimError};

/// Approach lanes of the production-line intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LaneId {
    A1,
    A2,
    B1,
    B2,
}

impl LaneId {
    /// Processing order inside one tick.
    pub const ALL: [LaneId; 4] = [LaneId::A1, LaneId::A2, LaneId::B1, LaneId::B2];

    pub fn group(self) -> LaneGroup {
        match self {
            LaneId::A1 | LaneId::A2 => LaneGroup::A,
            LaneId::B1 | LaneId::B2 => LaneGroup::B,
        }
    }

    /// The first lane of each pair owns turn prediction; its partner copies.
    pub fn is_leader(self) -> bool {
        matches!(self, LaneId::A1 | LaneId::B1)
    }

    /// First vehicle id of the lane's id block (A1: 100, A2: 200, ...).
    pub fn id_base(self) -> u32 {
        match self {
            LaneId::A1 => 100,
            LaneId::A2 => 200,
            LaneId::B1 => 300,
            LaneId::B2 => 400,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LaneId::A1 => "A1",
            LaneId::A2 => "A2",
            LaneId::B1 => "B1",
            LaneId::B2 => "B2",
        };
        f.write_str(s)
    }
}

impl FromStr for LaneId {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A1" => Ok(LaneId::A1),
            "A2" => Ok(LaneId::A2),
            "B1" => Ok(LaneId::B1),
            "B2" => Ok(LaneId::B2),
            other => Err(SimError::invalid(format!("unknown lane {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LaneGroup {
    A,
    B,
}

/// Right turn (`+`) or straight through (`-`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnLabel {
    RightTurn,
    Straight,
}

impl TurnLabel {
    pub fn symbol(self) -> &'static str {
        match self {
            TurnLabel::RightTurn => "+",
            TurnLabel::Straight => "-",
        }
    }

    pub fn is_right_turn(self) -> bool {
        self == TurnLabel::RightTurn
    }
}

impl fmt::Display for TurnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for TurnLabel {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" => Ok(TurnLabel::RightTurn),
            "-" => Ok(TurnLabel::Straight),
            other => Err(SimError::invalid(format!(
                "turn label must be \"+\" or \"-\", got {other:?}"
            ))),
        }
    }
}

/// The (day, hour, event) triple the turn classifier works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TurnFeatures {
    day: u8,
    hour: u8,
    event: u8,
}

impl TurnFeatures {
    /// `day` in 1..=5, `hour` in 0..=23, `event` in 0..=1.
    pub fn new(day: u8, hour: u8, event: u8) -> Result<Self> {
        if !(1..=5).contains(&day) {
            return Err(SimError::invalid(format!("day {day} outside 1..=5")));
        }
        if hour > 23 {
            return Err(SimError::invalid(format!("hour {hour} outside 0..=23")));
        }
        if event > 1 {
            return Err(SimError::invalid(format!("event {event} outside 0..=1")));
        }
        Ok(TurnFeatures { day, hour, event })
    }

    pub fn day(&self) -> u8 {
        self.day
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }

    pub fn event(&self) -> u8 {
        self.event
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.day as f64, self.hour as f64, self.event as f64]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleState {
    Pending,
    Entered,
    Exited,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u32,
    pub lane: LaneId,
    pub speed: SpeedMph,
    pub arrival_s: f64,
    pub features: TurnFeatures,
    pub predicted_turn: Option<TurnLabel>,
    state: VehicleState,
    waiting_s: f64,
}

impl Vehicle {
    pub fn new(id: u32, lane: LaneId, speed: SpeedMph, arrival_s: f64, features: TurnFeatures) -> Result<Self> {
        if !arrival_s.is_finite() || arrival_s < 0.0 {
            return Err(SimError::invalid(format!(
                "vehicle {id}: arrival time {arrival_s} must be finite and non-negative"
            )));
        }
        Ok(Vehicle {
            id,
            lane,
            speed,
            arrival_s,
            features,
            predicted_turn: None,
            state: VehicleState::Pending,
            waiting_s: 0.0,
        })
    }

    pub fn state(&self) -> VehicleState {
        self.state
    }

    pub fn waiting_s(&self) -> f64 {
        self.waiting_s
    }

    pub fn add_waiting(&mut self, seconds: f64) -> Result<()> {
        if !(seconds.is_finite() && seconds >= 0.0) {
            return Err(SimError::invalid(format!(
                "waiting increment {seconds} must be non-negative"
            )));
        }
        self.waiting_s += seconds;
        Ok(())
    }

    /// Pending -> Entered; the vehicle now travels at `assigned`.
    pub fn enter(&mut self, assigned: SpeedMph) -> Result<()> {
        self.transition(VehicleState::Pending, VehicleState::Entered)?;
        self.speed = assigned;
        Ok(())
    }

    pub fn reject(&mut self) -> Result<()> {
        self.transition(VehicleState::Pending, VehicleState::Rejected)
    }

    pub fn exit(&mut self) -> Result<()> {
        self.transition(VehicleState::Entered, VehicleState::Exited)
    }

    fn transition(&mut self, from: VehicleState, to: VehicleState) -> Result<()> {
        if self.state != from {
            return Err(SimError::InvalidState(format!(
                "vehicle {} cannot go {:?} -> {:?} from {:?}",
                self.id, from, to, self.state
            )));
        }
        self.state = to;
        Ok(())
    }
}
