//! Production-line scheduler.
//!
//! Each lane is a conveyor of fixed-length containers. Lane pairs open on
//! alternate seconds (A1/A2 on even, B1/B2 on odd), and a lane admits at
//! most one vehicle per open second. An admitted vehicle is reset to the
//! midpoint of the lane's speed band, so every vehicle in a lane moves at
//! the same speed and keeps its container until it exits.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::base::{
    FpsConversion, LaneGroup, LaneId, SeededRng, SimClock, SpeedMph, TurnFeatures, TurnLabel, Vehicle, VehicleState,
    CELL_FT,
};
use crate::error::{Result, SimError};
use crate::flow_patterns::{generate_arrivals, PatternKind, PatternSpec};
use crate::metrics_report::{summarize, Observation, RunReport, SummaryContext};
use crate::turn_knn::TurnPredictor;

pub const DEFAULT_NUM_SPOTS: u32 = 60;
pub const DEFAULT_RUN_SECONDS: u32 = 60;
pub const DEFAULT_MIN_SPEED_MPH: f64 = 60.0;
pub const DEFAULT_MAX_SPEED_MPH: f64 = 65.0;

fn mph(v: f64) -> SpeedMph {
    SpeedMph::new(v).expect("positive constant")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneConfig {
    pub id: LaneId,
    pub min_speed: SpeedMph,
    pub max_speed: SpeedMph,
    /// The gate is open on seconds `t` with `t % 2 == phase_parity`.
    pub phase_parity: u32,
    pub num_spots: u32,
    pub spot_length_ft: f64,
}

impl LaneConfig {
    pub fn default_for(id: LaneId) -> Self {
        LaneConfig {
            id,
            min_speed: mph(DEFAULT_MIN_SPEED_MPH),
            max_speed: mph(DEFAULT_MAX_SPEED_MPH),
            phase_parity: match id.group() {
                LaneGroup::A => 0,
                LaneGroup::B => 1,
            },
            num_spots: DEFAULT_NUM_SPOTS,
            spot_length_ft: CELL_FT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_speed > self.max_speed {
            return Err(SimError::invalid(format!(
                "lane {}: min speed {} above max speed {}",
                self.id, self.min_speed, self.max_speed
            )));
        }
        if self.phase_parity > 1 {
            return Err(SimError::invalid(format!(
                "lane {}: phase parity must be 0 or 1",
                self.id
            )));
        }
        if self.num_spots == 0 {
            return Err(SimError::invalid(format!("lane {}: needs at least one spot", self.id)));
        }
        if !(self.spot_length_ft.is_finite() && self.spot_length_ft > 0.0) {
            return Err(SimError::invalid(format!(
                "lane {}: spot length must be positive",
                self.id
            )));
        }
        Ok(())
    }

    pub fn average_speed(&self) -> SpeedMph {
        average_speed(self.min_speed, self.max_speed).expect("validated band")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionConfig {
    /// Indexed by [`LaneId::index`].
    pub lanes: [LaneConfig; 4],
    pub run_seconds: u32,
    pub exit_speed: SpeedMph,
    /// Entry band of the next intersection downstream, if any.
    pub next_entry_band: Option<(SpeedMph, SpeedMph)>,
    pub conversion: FpsConversion,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        IntersectionConfig {
            lanes: LaneId::ALL.map(LaneConfig::default_for),
            run_seconds: DEFAULT_RUN_SECONDS,
            exit_speed: mph((DEFAULT_MIN_SPEED_MPH + DEFAULT_MAX_SPEED_MPH) / 2.0),
            next_entry_band: None,
            conversion: FpsConversion::Rounded5,
        }
    }
}

impl IntersectionConfig {
    pub fn lane(&self, id: LaneId) -> &LaneConfig {
        &self.lanes[id.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_seconds == 0 {
            return Err(SimError::invalid("run_seconds must be positive"));
        }
        for (slot, lane) in self.lanes.iter().enumerate() {
            lane.validate()?;
            if lane.id.index() != slot {
                return Err(SimError::invalid(format!("lane {} stored in slot {slot}", lane.id)));
            }
        }
        let parity = |id| self.lane(id).phase_parity;
        if parity(LaneId::A1) != parity(LaneId::A2) || parity(LaneId::B1) != parity(LaneId::B2) {
            return Err(SimError::invalid("paired lanes must open together"));
        }
        if parity(LaneId::A1) == parity(LaneId::B1) {
            return Err(SimError::invalid("A and B lanes must open on alternate seconds"));
        }
        if let Some((lo, hi)) = self.next_entry_band {
            average_speed(lo, hi)?;
        }
        Ok(())
    }

    /// Open seconds of `id` within the run.
    pub fn lane_capacity(&self, id: LaneId) -> u32 {
        let lane = self.lane(id);
        (0..self.run_seconds).filter(|t| t % 2 == lane.phase_parity).count() as u32
    }

    /// Parses the key-value config text; every missing key keeps its default.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| SimError::invalid(format!("config: {e}")))?;
        file.into_config()
    }
}

/// On-disk config layout. Top-level keys apply to every lane; `[lanes.X]`
/// sections override them per lane.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    run_seconds: Option<u32>,
    num_spots: Option<u32>,
    spot_length_ft: Option<f64>,
    min_speed: Option<f64>,
    max_speed: Option<f64>,
    exit_speed: Option<f64>,
    conversion: Option<FpsConversion>,
    next_entry_band: Option<BandFile>,
    #[serde(default)]
    lanes: BTreeMap<LaneId, LaneFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandFile {
    min: f64,
    max: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LaneFile {
    min_speed: Option<f64>,
    max_speed: Option<f64>,
    phase_parity: Option<u32>,
    num_spots: Option<u32>,
    spot_length_ft: Option<f64>,
}

impl ConfigFile {
    fn into_config(self) -> Result<IntersectionConfig> {
        let mut cfg = IntersectionConfig::default();
        if let Some(v) = self.run_seconds {
            cfg.run_seconds = v;
        }
        if let Some(v) = self.conversion {
            cfg.conversion = v;
        }
        for lane in cfg.lanes.iter_mut() {
            let over = self.lanes.get(&lane.id);
            let pick = |l: Option<f64>, g: Option<f64>| l.or(g);
            if let Some(v) = pick(over.and_then(|o| o.min_speed), self.min_speed) {
                lane.min_speed = SpeedMph::new(v)?;
            }
            if let Some(v) = pick(over.and_then(|o| o.max_speed), self.max_speed) {
                lane.max_speed = SpeedMph::new(v)?;
            }
            if let Some(v) = over.and_then(|o| o.num_spots).or(self.num_spots) {
                lane.num_spots = v;
            }
            if let Some(v) = pick(over.and_then(|o| o.spot_length_ft), self.spot_length_ft) {
                lane.spot_length_ft = v;
            }
            if let Some(v) = over.and_then(|o| o.phase_parity) {
                lane.phase_parity = v;
            }
        }
        for lane in &cfg.lanes {
            lane.validate()?;
        }
        cfg.exit_speed = match self.exit_speed {
            Some(v) => SpeedMph::new(v)?,
            None => cfg.lane(LaneId::A1).average_speed(),
        };
        if let Some(band) = self.next_entry_band {
            cfg.next_entry_band = Some((SpeedMph::new(band.min)?, SpeedMph::new(band.max)?));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Midpoint of a speed band.
pub fn average_speed(min: SpeedMph, max: SpeedMph) -> Result<SpeedMph> {
    if min > max {
        return Err(SimError::invalid(format!("speed band {min}..{max} is inverted")));
    }
    SpeedMph::new((min.value() + max.value()) / 2.0)
}

/// Seconds to traverse the whole lane at `avg_speed`.
pub fn staying_time(
    num_spots: u32,
    spot_length_ft: f64,
    avg_speed: SpeedMph,
    conversion: FpsConversion,
) -> Result<f64> {
    if num_spots == 0 {
        return Err(SimError::invalid("lane needs at least one spot"));
    }
    if !(spot_length_ft.is_finite() && spot_length_ft > 0.0) {
        return Err(SimError::invalid("spot length must be positive"));
    }
    let fps = conversion.convert(avg_speed)?;
    Ok((spot_length_ft * num_spots as f64) / fps.value())
}

pub fn gate_open(lane: &LaneConfig, t: u32) -> bool {
    t % 2 == lane.phase_parity
}

/// Set-point for the stretch between two intersections: the exit speed
/// adjusted by the difference to the next entry speed.
pub fn transition_speed(exit_speed: SpeedMph, target_entry: SpeedMph) -> Result<SpeedMph> {
    let e = exit_speed.value();
    SpeedMph::new(e + (target_entry.value() - e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    SpeedOutOfBand,
    /// The lane is closed at this second, or the vehicle is not due now.
    GateClosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Admission {
    Admitted(SpeedMph),
    Rejected(RejectReason),
}

/// Admission decision for `v` at second `t`. Does not touch the vehicle.
pub fn decide_admission(v: &Vehicle, lane: &LaneConfig, t: u32) -> Result<Admission> {
    if v.state() != VehicleState::Pending {
        return Err(SimError::InvalidState(format!(
            "vehicle {} is {:?}, not pending",
            v.id,
            v.state()
        )));
    }
    if v.speed < lane.min_speed || v.speed > lane.max_speed {
        return Ok(Admission::Rejected(RejectReason::SpeedOutOfBand));
    }
    if !gate_open(lane, t) || v.arrival_s != t as f64 {
        return Ok(Admission::Rejected(RejectReason::GateClosed));
    }
    Ok(Admission::Admitted(average_speed(lane.min_speed, lane.max_speed)?))
}

/// Decides and applies: admitted vehicles enter at the band average,
/// rejected ones are marked rejected.
pub fn admit(v: &mut Vehicle, lane: &LaneConfig, t: u32) -> Result<Admission> {
    let decision = decide_admission(v, lane, t)?;
    match decision {
        Admission::Admitted(speed) => v.enter(speed)?,
        Admission::Rejected(_) => v.reject()?,
    }
    Ok(decision)
}

/// Time each vehicle needs at a shared point versus the time allotted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityWindow {
    processing_times_s: Vec<f64>,
    window_s: f64,
}

impl CapacityWindow {
    pub fn new(processing_times_s: Vec<f64>, window_s: f64) -> Result<Self> {
        if processing_times_s.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(SimError::invalid("processing times must be positive"));
        }
        if !(window_s.is_finite() && window_s > 0.0) {
            return Err(SimError::invalid("window must be positive"));
        }
        Ok(CapacityWindow {
            processing_times_s,
            window_s,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Feasibility {
    Feasible,
    Infeasible { overflow_s: f64 },
}

/// A set whose total crossing time exceeds its window forces the next set
/// to wait inside the intersection.
pub fn check_window_feasibility(w: &CapacityWindow) -> Feasibility {
    let total: f64 = w.processing_times_s.iter().sum();
    if total > w.window_s {
        Feasibility::Infeasible {
            overflow_s: total - w.window_s,
        }
    } else {
        Feasibility::Feasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRecord {
    pub vehicle_id: u32,
    pub lane: LaneId,
    pub arrive_s: f64,
    pub right_turn: bool,
    pub assigned_speed: Option<SpeedMph>,
    pub exit_s: Option<f64>,
    pub admitted: bool,
    pub reject_reason: Option<RejectReason>,
    pub waiting_s: f64,
    /// Speed set-point toward the next intersection, when one is configured.
    pub handoff_speed: Option<SpeedMph>,
}

/// Second at which an admitted vehicle leaves its lane.
pub fn exit_second(record: &ScheduleRecord) -> Result<u32> {
    match (record.admitted, record.exit_s) {
        (true, Some(exit)) => Ok(exit.ceil() as u32),
        _ => Err(SimError::InvalidState(format!(
            "vehicle {} was not admitted",
            record.vehicle_id
        ))),
    }
}

/// Vehicles due at each lane, keyed by arrival second.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArrivalSchedule {
    lanes: [BTreeMap<u32, Vehicle>; 4],
}

impl ArrivalSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a vehicle; its arrival must be a whole second not already taken
    /// in its lane, and its id must be unused.
    pub fn push(&mut self, v: Vehicle) -> Result<()> {
        if v.arrival_s.fract() != 0.0 {
            return Err(SimError::invalid(format!(
                "vehicle {}: arrival {} is not a whole second",
                v.id, v.arrival_s
            )));
        }
        if self.vehicles().any(|other| other.id == v.id) {
            return Err(SimError::invalid(format!("duplicate vehicle id {}", v.id)));
        }
        let second = v.arrival_s as u32;
        let lane = &mut self.lanes[v.lane.index()];
        if lane.contains_key(&second) {
            return Err(SimError::invalid(format!(
                "lane {} already has a vehicle at second {second}",
                v.lane
            )));
        }
        lane.insert(second, v);
        Ok(())
    }

    pub fn lane(&self, id: LaneId) -> impl Iterator<Item = &Vehicle> {
        self.lanes[id.index()].values()
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flat_map(|l| l.values())
    }

    pub fn len(&self) -> usize {
        self.lanes.iter().map(|l| l.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_horizon(&self, run_seconds: u32) -> Result<()> {
        if let Some(v) = self.vehicles().find(|v| v.arrival_s >= run_seconds as f64) {
            return Err(SimError::invalid(format!(
                "vehicle {} arrives at {} after the {run_seconds} s run",
                v.id, v.arrival_s
            )));
        }
        Ok(())
    }
}

/// Builds a symmetric schedule for `pattern`: the first lane of each pair
/// draws arrivals, ids, speeds and features; its partner gets the same
/// arrival seconds and features with its own ids and speeds.
pub fn build_schedule(cfg: &IntersectionConfig, pattern: PatternKind, rng: &mut SeededRng) -> Result<ArrivalSchedule> {
    cfg.validate()?;
    let mut schedule = ArrivalSchedule::new();
    for (leader, follower) in [(LaneId::A1, LaneId::A2), (LaneId::B1, LaneId::B2)] {
        let spec = PatternSpec {
            horizon_slots: cfg.run_seconds,
            phase_parity: cfg.lane(leader).phase_parity,
            ..PatternSpec::new(pattern)
        };
        let seconds = generate_arrivals(&spec, rng)?;
        let features = seconds
            .iter()
            .map(|_| {
                TurnFeatures::new(
                    rng.rand_int(1, 5)? as u8,
                    rng.rand_int(0, 23)? as u8,
                    rng.rand_int(0, 1)? as u8,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for lane_id in [leader, follower] {
            if seconds.len() > 100 {
                return Err(SimError::invalid(format!(
                    "lane {lane_id}: {} vehicles overflow its id block",
                    seconds.len()
                )));
            }
            let mut ids: Vec<u32> = (0..seconds.len() as u32).map(|i| lane_id.id_base() + i).collect();
            rng.shuffle(&mut ids);
            let lane = cfg.lane(lane_id);
            let lo = lane.min_speed.value().ceil() as i64;
            let hi = (lane.max_speed.value().floor() as i64).max(lo);
            for ((&second, &feat), id) in seconds.iter().zip(&features).zip(ids) {
                let speed = SpeedMph::new(rng.rand_int(lo, hi)? as f64)?;
                schedule.push(Vehicle::new(id, lane_id, speed, second as f64, feat)?)?;
            }
        }
    }
    Ok(schedule)
}

/// Container a vehicle occupies after `elapsed_s` seconds in its lane.
pub fn container_index(elapsed_s: f64, fps: f64, spot_length_ft: f64) -> u64 {
    ((elapsed_s * fps) / spot_length_ft).floor() as u64
}

/// Counts breaches of the two safety invariants: paired phases (exactly
/// one lane pair open per second) and one vehicle per container.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SafetyMonitor {
    pub ticks_checked: u64,
    pub phase_violations: u64,
    pub occupancy_violations: u64,
}

impl SafetyMonitor {
    pub fn check_phase(&mut self, cfg: &IntersectionConfig, t: u32) {
        let open = LaneId::ALL.map(|id| gate_open(cfg.lane(id), t));
        let a_open = open[0] && open[1];
        let b_open = open[2] && open[3];
        let split = open[0] != open[1] || open[2] != open[3];
        if split || a_open == b_open {
            self.phase_violations += 1;
        }
    }

    /// `occupants` are `(elapsed seconds, ft/s)` of every vehicle inside
    /// one lane at the same tick.
    pub fn check_lane(&mut self, lane: &LaneConfig, occupants: &[(f64, f64)]) {
        let mut seen = HashSet::new();
        for &(elapsed, fps) in occupants {
            let idx = container_index(elapsed, fps, lane.spot_length_ft);
            if idx >= lane.num_spots as u64 {
                continue;
            }
            if !seen.insert(idx) {
                self.occupancy_violations += 1;
            }
        }
    }

    pub fn is_clean(&self) -> bool {
        self.phase_violations == 0 && self.occupancy_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProdlineRun {
    pub records: Vec<ScheduleRecord>,
    pub report: RunReport,
    pub safety: SafetyMonitor,
}

/// Runs the tick loop over `[0, run_seconds)`. Within a tick, exits are
/// processed before admissions and lanes go A1, A2, B1, B2. Each due
/// vehicle gets a turn prediction, then an admission decision; the
/// second lane of a pair reuses the first lane's features and prediction
/// for the same second. Admitted leader-lane vehicles are fed back to
/// the predictor.
pub fn run_prodline(
    cfg: &IntersectionConfig,
    schedule: &ArrivalSchedule,
    predictor: &mut dyn TurnPredictor,
    rng: &mut SeededRng,
    pattern: Option<PatternKind>,
) -> Result<ProdlineRun> {
    cfg.validate()?;
    schedule.check_horizon(cfg.run_seconds)?;

    let staying: [f64; 4] = LaneId::ALL
        .map(|id| {
            let lane = cfg.lane(id);
            staying_time(
                lane.num_spots,
                lane.spot_length_ft,
                lane.average_speed(),
                cfg.conversion,
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .try_into()
        .expect("four lanes");
    let handoff = match cfg.next_entry_band {
        Some((lo, hi)) => Some(transition_speed(cfg.exit_speed, average_speed(lo, hi)?)?),
        None => None,
    };

    let mut lanes: [BTreeMap<u32, Vehicle>; 4] = schedule.lanes.clone();
    let mut records: Vec<ScheduleRecord> = Vec::with_capacity(schedule.len());
    let mut record_of: HashMap<u32, usize> = HashMap::new();
    let mut safety = SafetyMonitor::default();
    let clock = SimClock::new(cfg.run_seconds)?;

    for t in clock.seconds() {
        for id in LaneId::ALL {
            for v in lanes[id.index()].values_mut() {
                if v.state() != VehicleState::Entered {
                    continue;
                }
                if exit_second(&records[record_of[&v.id]])? == t {
                    v.exit()?;
                    log::debug!("Vehicle {} has left the intersection's lane [{}]", v.id, id);
                }
            }
        }

        safety.check_phase(cfg, t);

        let mut leader_choice: HashMap<LaneGroup, (TurnFeatures, TurnLabel)> = HashMap::new();
        for id in LaneId::ALL {
            let lane = cfg.lane(id);
            let Some(v) = lanes[id.index()].get_mut(&t) else {
                continue;
            };
            let copied = if id.is_leader() {
                None
            } else {
                leader_choice.get(&id.group()).copied()
            };
            let label = match copied {
                Some((features, label)) => {
                    v.features = features;
                    label
                }
                None => predictor.predict(id.group(), &v.features, rng)?,
            };
            v.predicted_turn = Some(label);
            if id.is_leader() {
                leader_choice.insert(id.group(), (v.features, label));
            }

            let decision = admit(v, lane, t)?;
            let record = match decision {
                Admission::Admitted(speed) => {
                    if copied.is_none() {
                        predictor.observe(id.group(), v.features, label)?;
                    }
                    let prefix = if label.is_right_turn() {
                        "Right turn vehicle"
                    } else {
                        "Vehicle"
                    };
                    log::debug!(
                        "{prefix} {} has entered the intersection through lane [{id}] with speed of {speed}",
                        v.id
                    );
                    ScheduleRecord {
                        vehicle_id: v.id,
                        lane: id,
                        arrive_s: v.arrival_s,
                        right_turn: label.is_right_turn(),
                        assigned_speed: Some(speed),
                        exit_s: Some(v.arrival_s + staying[id.index()]),
                        admitted: true,
                        reject_reason: None,
                        waiting_s: v.waiting_s(),
                        handoff_speed: handoff,
                    }
                }
                Admission::Rejected(reason) => {
                    log::debug!("Vehicle {} rejected at lane [{id}]: {reason:?}", v.id);
                    ScheduleRecord {
                        vehicle_id: v.id,
                        lane: id,
                        arrive_s: v.arrival_s,
                        right_turn: label.is_right_turn(),
                        assigned_speed: None,
                        exit_s: None,
                        admitted: false,
                        reject_reason: Some(reason),
                        waiting_s: v.waiting_s(),
                        handoff_speed: None,
                    }
                }
            };
            record_of.insert(record.vehicle_id, records.len());
            records.push(record);
        }

        for id in LaneId::ALL {
            let lane = cfg.lane(id);
            let occupants = lanes[id.index()]
                .values()
                .filter(|v| v.state() == VehicleState::Entered)
                .map(|v| Ok((t as f64 - v.arrival_s, cfg.conversion.convert(v.speed)?.value())))
                .collect::<Result<Vec<_>>>()?;
            safety.check_lane(lane, &occupants);
        }
        safety.ticks_checked += 1;
    }

    let observations: Vec<Observation> = records.iter().cloned().map(Observation::Schedule).collect();
    let capacity = cfg.lane_capacity(LaneId::A1).min(cfg.lane_capacity(LaneId::B1));
    let mut report = summarize(
        &observations,
        &SummaryContext {
            seed: rng.seed(),
            pattern,
            lane_capacity: Some(capacity),
        },
    )?;
    if report.n_vehicles > 0 {
        report.collisions_per_vehicle = safety.occupancy_violations as f64 / report.n_vehicles as f64;
    }
    Ok(ProdlineRun {
        records,
        report,
        safety,
    })
}
