use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const FEET_PER_MILE: f64 = 5280.0;
const SECONDS_PER_HOUR: f64 = 3600.0;

/// A speed in miles per hour. Always finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SpeedMph(f64);

impl SpeedMph {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(SpeedMph(value))
        } else {
            Err(SimError::invalid(format!(
                "speed must be finite and positive, got {value} mph"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SpeedMph {
    type Error = SimError;

    fn try_from(value: f64) -> Result<Self> {
        SpeedMph::new(value)
    }
}

impl From<SpeedMph> for f64 {
    fn from(s: SpeedMph) -> f64 {
        s.0
    }
}

impl fmt::Display for SpeedMph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A speed in feet per second. Always finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SpeedFps(f64);

impl SpeedFps {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(SpeedFps(value))
        } else {
            Err(SimError::invalid(format!(
                "speed must be finite and positive, got {value} ft/s"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SpeedFps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How miles per hour become feet per second.
///
/// The original experiments used two different conversions: integer
/// arithmetic in the reservation test harness, and a hard-coded
/// `91.66667` (five decimals) in the production-line scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FpsConversion {
    /// `s * 5280 / 3600` in floating point.
    #[default]
    Exact,
    /// Exact conversion rounded to five decimal places.
    Rounded5,
    /// `floor(floor(s * 5280 / 60) / 60)`, as integer Java code computes it.
    TruncatedInt,
}

impl FpsConversion {
    pub fn convert(self, s: SpeedMph) -> Result<SpeedFps> {
        match self {
            FpsConversion::Exact => Ok(mph_to_fps(s)),
            FpsConversion::Rounded5 => mph_to_fps_rounded(s),
            FpsConversion::TruncatedInt => mph_to_fps_truncated(s),
        }
    }
}

pub fn mph_to_fps(s: SpeedMph) -> SpeedFps {
    SpeedFps(s.value() * FEET_PER_MILE / SECONDS_PER_HOUR)
}

/// Double-truncating conversion. Speeds below 60/88 mph truncate to zero
/// feet per second and are rejected.
pub fn mph_to_fps_truncated(s: SpeedMph) -> Result<SpeedFps> {
    let per_minute = (s.value() * FEET_PER_MILE / 60.0).floor();
    SpeedFps::new((per_minute / 60.0).floor())
}

/// `62.5 mph` maps to exactly the literal `91.66667`.
pub fn mph_to_fps_rounded(s: SpeedMph) -> Result<SpeedFps> {
    let scaled = (mph_to_fps(s).value() * 1e5).round();
    SpeedFps::new(scaled / 1e5)
}
