//! Reservation-style baseline: vehicles placed on a square grid approach a
//! shared crossing zone from two directions, and every pair whose
//! conflict-point occupancy intervals overlap counts as a potential
//! collision. Each collision stops the blocked vehicle and everything
//! queued behind it in its lane.

use serde::{Deserialize, Serialize};

use crate::base::{FpsConversion, SeededRng, SpeedFps, SpeedMph, CELL_FT};
use crate::error::{Result, SimError};

/// Waiting charged per collision, in seconds.
pub const COLLISION_PENALTY_S: f64 = 5.58;

/// Every baseline vehicle drives at this speed.
pub const BASELINE_SPEED_MPH: f64 = 100.0;

/// Inclusive range of grid cells along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRange {
    pub lo: u32,
    pub hi: u32,
}

impl CellRange {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo > hi {
            return Err(SimError::invalid(format!("cell range {lo}..={hi} is empty")));
        }
        Ok(CellRange { lo, hi })
    }

    pub fn len(&self) -> u32 {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, cell: u32) -> bool {
        (self.lo..=self.hi).contains(&cell)
    }

    pub fn cells(&self) -> impl Iterator<Item = u32> {
        self.lo..=self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    pub cell_ft: f64,
    /// Conflict zone on each axis; also the set of lanes per direction.
    pub band: CellRange,
    /// Cells where queued vehicles start, upstream of the band.
    pub feeder: CellRange,
    pub speed: SpeedMph,
    pub conversion: FpsConversion,
    pub penalty_s: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: 100,
            height: 100,
            cell_ft: CELL_FT,
            band: CellRange { lo: 40, hi: 58 },
            feeder: CellRange { lo: 1, hi: 38 },
            speed: SpeedMph::new(BASELINE_SPEED_MPH).expect("positive constant"),
            conversion: FpsConversion::Exact,
            penalty_s: COLLISION_PENALTY_S,
        }
    }
}

impl GridConfig {
    pub fn lanes_per_direction(&self) -> u32 {
        self.band.len()
    }

    /// Vehicles one direction can hold: one per feeder cell in every lane.
    pub fn capacity_per_side(&self) -> u32 {
        self.band.len() * self.feeder.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_ft.is_finite() && self.cell_ft > 0.0) {
            return Err(SimError::invalid("cell_ft must be positive"));
        }
        if !(self.penalty_s.is_finite() && self.penalty_s >= 0.0) {
            return Err(SimError::invalid("penalty_s must be non-negative"));
        }
        if self.band.is_empty() || self.feeder.is_empty() {
            return Err(SimError::invalid("band and feeder ranges must be non-empty"));
        }
        if self.feeder.hi >= self.band.lo {
            return Err(SimError::invalid(format!(
                "feeder {}..={} must lie strictly before band {}..={}",
                self.feeder.lo, self.feeder.hi, self.band.lo, self.band.hi
            )));
        }
        if self.band.hi >= self.width.min(self.height) {
            return Err(SimError::invalid("band exceeds grid dimensions"));
        }
        Ok(())
    }

    pub fn fps(&self) -> Result<SpeedFps> {
        self.conversion.convert(self.speed)
    }
}

/// Eastbound vehicles move along +x inside a band row; southbound vehicles
/// move along +y inside a band column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heading {
    East,
    South,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacedVehicle {
    pub id: u32,
    pub heading: Heading,
    pub x: u32,
    pub y: u32,
    pub speed: SpeedMph,
    pub waiting_s: f64,
}

impl PlacedVehicle {
    /// Coordinate that identifies the lane.
    fn lane(&self) -> u32 {
        match self.heading {
            Heading::East => self.y,
            Heading::South => self.x,
        }
    }

    /// Position along the direction of travel.
    fn progress(&self) -> u32 {
        match self.heading {
            Heading::East => self.x,
            Heading::South => self.y,
        }
    }
}

/// Closed occupancy interval `[arrive, leave]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub arrive: f64,
    pub leave: f64,
}

impl Interval {
    pub fn new(arrive: f64, leave: f64) -> Result<Self> {
        if !(arrive.is_finite() && leave.is_finite()) || arrive > leave {
            return Err(SimError::invalid(format!("malformed interval [{arrive}, {leave}]")));
        }
        Ok(Interval { arrive, leave })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingEvent {
    pub car_a: u32,
    pub car_b: u32,
    pub point: (u32, u32),
    pub a: Interval,
    pub b: Interval,
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub n_vehicles: u32,
    pub collisions_per_vehicle: f64,
    pub avg_waiting_s: f64,
    pub runs: u32,
    pub seed: u64,
}

/// Time to cover `distance_ft` at `speed`.
pub fn travel_time(distance_ft: f64, speed: SpeedFps) -> f64 {
    distance_ft / speed.value()
}

/// Seconds to travel from `current_cell` forward to `target_cell`.
pub fn time_to_arrive(target_cell: u32, current_cell: u32, cell_ft: f64, speed: SpeedFps) -> Result<f64> {
    if target_cell < current_cell {
        return Err(SimError::invalid(format!(
            "target cell {target_cell} is behind current cell {current_cell}"
        )));
    }
    Ok(travel_time((target_cell - current_cell) as f64 * cell_ft, speed))
}

/// How long a vehicle sits on one cell.
pub fn point_occupation_time(cell_ft: f64, speed: SpeedFps) -> Result<f64> {
    if !(cell_ft.is_finite() && cell_ft > 0.0) {
        return Err(SimError::invalid("cell length must be positive"));
    }
    Ok(cell_ft / speed.value())
}

/// Closed-interval overlap: touching endpoints count as a conflict.
pub fn detect_conflict(a: Interval, b: Interval) -> Result<bool> {
    let a = Interval::new(a.arrive, a.leave)?;
    let b = Interval::new(b.arrive, b.leave)?;
    Ok(!(a.arrive > b.leave || a.leave < b.arrive))
}

/// Fills `n / 2` eastbound vehicles row by row (feeder cells in order,
/// rows in shuffled order), then `n / 2` southbound vehicles column by
/// column the same way.
pub fn place_vehicles(cfg: &GridConfig, n: u32, rng: &mut SeededRng) -> Result<Vec<PlacedVehicle>> {
    cfg.validate()?;
    if !n.is_multiple_of(2) {
        return Err(SimError::invalid(format!("vehicle count {n} must be even")));
    }
    if n > 2 * cfg.capacity_per_side() {
        return Err(SimError::invalid(format!(
            "vehicle count {n} exceeds capacity {}",
            2 * cfg.capacity_per_side()
        )));
    }

    let feeder: Vec<u32> = cfg.feeder.cells().collect();
    let mut east_rows: Vec<u32> = cfg.band.cells().collect();
    rng.shuffle(&mut east_rows);
    let mut south_cols: Vec<u32> = cfg.band.cells().collect();
    rng.shuffle(&mut south_cols);

    let half = n / 2;
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..half {
        let slot = i as usize;
        out.push(PlacedVehicle {
            id: i,
            heading: Heading::East,
            x: feeder[slot % feeder.len()],
            y: east_rows[slot / feeder.len()],
            speed: cfg.speed,
            waiting_s: 0.0,
        });
    }
    for i in 0..half {
        let slot = i as usize;
        out.push(PlacedVehicle {
            id: half + i,
            heading: Heading::South,
            x: south_cols[slot / feeder.len()],
            y: feeder[slot % feeder.len()],
            speed: cfg.speed,
            waiting_s: 0.0,
        });
    }
    Ok(out)
}

/// Crossing cell plus the eastbound and southbound occupancy intervals.
type Crossing = ((u32, u32), Interval, Interval);

/// Occupancy intervals of an eastbound/southbound pair at their shared
/// crossing cell, or `None` when their paths never cross inside the band.
fn crossing(cfg: &GridConfig, east: &PlacedVehicle, south: &PlacedVehicle) -> Result<Option<Crossing>> {
    let point = (south.x, east.y);
    let meets = east.x < south.x && south.y < east.y && cfg.band.contains(south.x) && cfg.band.contains(east.y);
    if !meets {
        return Ok(None);
    }
    let fps_e = cfg.conversion.convert(east.speed)?;
    let fps_s = cfg.conversion.convert(south.speed)?;
    let arrive_e = time_to_arrive(south.x, east.x, cfg.cell_ft, fps_e)?;
    let arrive_s = time_to_arrive(east.y, south.y, cfg.cell_ft, fps_s)?;
    let e = Interval::new(arrive_e, arrive_e + point_occupation_time(cfg.cell_ft, fps_e)?)?;
    let s = Interval::new(arrive_s, arrive_s + point_occupation_time(cfg.cell_ft, fps_s)?)?;
    Ok(Some((point, e, s)))
}

/// Every crossing between an eastbound and a southbound vehicle, one event
/// per unordered pair. `car_a` is always the eastbound vehicle.
pub fn meeting_events(cfg: &GridConfig, vehicles: &[PlacedVehicle]) -> Result<Vec<MeetingEvent>> {
    let mut events = Vec::new();
    for east in vehicles.iter().filter(|v| v.heading == Heading::East) {
        for south in vehicles.iter().filter(|v| v.heading == Heading::South) {
            if let Some((point, a, b)) = crossing(cfg, east, south)? {
                events.push(MeetingEvent {
                    car_a: east.id,
                    car_b: south.id,
                    point,
                    a,
                    b,
                    conflict: detect_conflict(a, b)?,
                });
            }
        }
    }
    Ok(events)
}

/// Adds `penalty_s` to the blocked vehicle and to every vehicle queued
/// behind it in the same lane. Single pass: penalised followers do not
/// re-penalise their own followers.
pub fn propagate_waiting(vehicles: &mut [PlacedVehicle], blocked: u32, penalty_s: f64) -> Result<()> {
    if !(penalty_s.is_finite() && penalty_s >= 0.0) {
        return Err(SimError::invalid(format!("penalty {penalty_s} must be non-negative")));
    }
    let anchor = vehicles
        .iter()
        .find(|v| v.id == blocked)
        .ok_or_else(|| SimError::NotFound(format!("vehicle {blocked}")))?;
    let (heading, lane, progress) = (anchor.heading, anchor.lane(), anchor.progress());
    for v in vehicles
        .iter_mut()
        .filter(|v| v.heading == heading && v.lane() == lane && v.progress() <= progress)
    {
        v.waiting_s += penalty_s;
    }
    Ok(())
}

/// Outcome of one placement evaluated against itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Conflicts counted from both vehicles' side, so always even.
    pub raw_errors: u64,
    pub meetings: u64,
    pub vehicles: Vec<PlacedVehicle>,
}

impl RunOutcome {
    pub fn collisions_per_vehicle(&self) -> f64 {
        (self.raw_errors as f64 / 2.0) / self.vehicles.len() as f64
    }

    /// Waiting is accrued from both sides of every collision; only one side
    /// is kept.
    pub fn avg_waiting_s(&self) -> f64 {
        let total: f64 = self.vehicles.iter().map(|v| v.waiting_s).sum();
        (total / 2.0) / self.vehicles.len() as f64
    }
}

/// Checks every ordered (vehicle, crossing vehicle) pair. On a conflict
/// the first vehicle of the pair is charged the penalty directly and then
/// again, with its followers, by [`propagate_waiting`].
pub fn evaluate_placement(cfg: &GridConfig, mut vehicles: Vec<PlacedVehicle>) -> Result<RunOutcome> {
    let mut raw_errors = 0u64;
    let mut meetings = 0u64;
    for i in 0..vehicles.len() {
        for j in 0..vehicles.len() {
            let (first, other) = (&vehicles[i], &vehicles[j]);
            let pair = match (first.heading, other.heading) {
                (Heading::East, Heading::South) => crossing(cfg, first, other)?,
                (Heading::South, Heading::East) => crossing(cfg, other, first)?,
                _ => None,
            };
            let Some((_, a, b)) = pair else { continue };
            meetings += 1;
            if detect_conflict(a, b)? {
                raw_errors += 1;
                let blocked = first.id;
                vehicles[i].waiting_s += cfg.penalty_s;
                propagate_waiting(&mut vehicles, blocked, cfg.penalty_s)?;
            }
        }
    }
    Ok(RunOutcome {
        raw_errors,
        meetings,
        vehicles,
    })
}

/// One seeded run: placement followed by evaluation.
pub fn run_once(cfg: &GridConfig, n_vehicles: u32, rng: &mut SeededRng) -> Result<RunOutcome> {
    let vehicles = place_vehicles(cfg, n_vehicles, rng)?;
    evaluate_placement(cfg, vehicles)
}

/// Mean collisions and waiting per vehicle over `runs` independent runs.
/// Run `i` draws from stream `i` of `seed`.
pub fn run_baseline(cfg: &GridConfig, n_vehicles: u32, runs: u32, seed: u64) -> Result<BaselineReport> {
    if runs == 0 {
        return Err(SimError::invalid("runs must be at least 1"));
    }
    if n_vehicles == 0 {
        return Err(SimError::invalid("vehicle count must be positive"));
    }
    let mut collisions = 0.0;
    let mut waiting = 0.0;
    for run in 0..runs {
        let mut rng = SeededRng::for_run(seed, run as u64);
        let outcome = run_once(cfg, n_vehicles, &mut rng)?;
        collisions += outcome.collisions_per_vehicle();
        waiting += outcome.avg_waiting_s();
    }
    Ok(BaselineReport {
        n_vehicles,
        collisions_per_vehicle: collisions / runs as f64,
        avg_waiting_s: waiting / runs as f64,
        runs,
        seed,
    })
}
