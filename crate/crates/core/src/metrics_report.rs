//! Run summaries, the baseline versus production-line comparison and
//! CSV/JSON export.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::base::LaneId;
use crate::baseline_aim::BaselineReport;
use crate::error::{Result, SimError};
use crate::flow_patterns::{waiting_pct, PatternKind};
use crate::prodline::ScheduleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Baseline,
    ProdLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: Model,
    pub pattern: Option<PatternKind>,
    pub n_vehicles: u32,
    pub admitted: u32,
    pub rejected: u32,
    pub avg_waiting_s: f64,
    pub collisions_per_vehicle: f64,
    pub extra_space_pct: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Baseline(BaselineReport),
    Schedule(ScheduleRecord),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryContext {
    pub seed: u64,
    pub pattern: Option<PatternKind>,
    /// Open seconds per lane; used for the extra-space percentage.
    pub lane_capacity: Option<u32>,
}

/// Folds observations of one model into a report. Empty input gives an
/// all-zero production-line report.
pub fn summarize(observations: &[Observation], ctx: &SummaryContext) -> Result<RunReport> {
    let baselines: Vec<&BaselineReport> = observations
        .iter()
        .filter_map(|o| match o {
            Observation::Baseline(b) => Some(b),
            Observation::Schedule(_) => None,
        })
        .collect();
    if !baselines.is_empty() {
        if baselines.len() != observations.len() {
            return Err(SimError::invalid(
                "cannot summarize baseline and production-line data together",
            ));
        }
        let [b] = baselines.as_slice() else {
            return Err(SimError::invalid("expected a single baseline report"));
        };
        return Ok(RunReport {
            model: Model::Baseline,
            pattern: None,
            n_vehicles: b.n_vehicles,
            admitted: b.n_vehicles,
            rejected: 0,
            avg_waiting_s: b.avg_waiting_s,
            collisions_per_vehicle: b.collisions_per_vehicle,
            extra_space_pct: 0.0,
            seed: b.seed,
        });
    }

    let records: Vec<&ScheduleRecord> = observations
        .iter()
        .filter_map(|o| match o {
            Observation::Schedule(r) => Some(r),
            Observation::Baseline(_) => None,
        })
        .collect();
    let admitted: Vec<&&ScheduleRecord> = records.iter().filter(|r| r.admitted).collect();
    let avg_waiting_s = if admitted.is_empty() {
        0.0
    } else {
        admitted.iter().map(|r| r.waiting_s).sum::<f64>() / admitted.len() as f64
    };
    let extra_space_pct = match ctx.lane_capacity {
        Some(cap) if !records.is_empty() => {
            let mut pcts = Vec::new();
            for id in LaneId::ALL {
                let n = records.iter().filter(|r| r.lane == id).count() as u32;
                if n > 0 {
                    pcts.push(waiting_pct(n, cap)?);
                }
            }
            pcts.iter().sum::<f64>() / pcts.len() as f64
        }
        _ => 0.0,
    };
    Ok(RunReport {
        model: Model::ProdLine,
        pattern: ctx.pattern,
        n_vehicles: records.len() as u32,
        admitted: admitted.len() as u32,
        rejected: (records.len() - admitted.len()) as u32,
        avg_waiting_s,
        collisions_per_vehicle: 0.0,
        extra_space_pct,
        seed: ctx.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaitingDelta {
    pub n_vehicles: u32,
    pub baseline_waiting_s: f64,
    pub prodline_waiting_s: f64,
    pub reduction_pct: f64,
}

/// Reports ordered by model, then vehicle count.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComparisonTable {
    rows: Vec<RunReport>,
}

impl ComparisonTable {
    pub fn new(mut rows: Vec<RunReport>) -> Self {
        rows.sort_by_key(|r| (r.model, r.n_vehicles));
        ComparisonTable { rows }
    }

    pub fn rows(&self) -> &[RunReport] {
        &self.rows
    }

    /// Waiting-time reduction at every vehicle count both models report.
    pub fn deltas(&self) -> Vec<WaitingDelta> {
        let mut out = Vec::new();
        for b in self.rows.iter().filter(|r| r.model == Model::Baseline) {
            let Some(p) = self
                .rows
                .iter()
                .find(|r| r.model == Model::ProdLine && r.n_vehicles == b.n_vehicles)
            else {
                continue;
            };
            let reduction_pct = if b.avg_waiting_s > 0.0 {
                (b.avg_waiting_s - p.avg_waiting_s) / b.avg_waiting_s * 100.0
            } else {
                0.0
            };
            out.push(WaitingDelta {
                n_vehicles: b.n_vehicles,
                baseline_waiting_s: b.avg_waiting_s,
                prodline_waiting_s: p.avg_waiting_s,
                reduction_pct,
            });
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CsvRow {
    model: Model,
    pattern: Option<PatternKind>,
    n_vehicles: u32,
    admitted: u32,
    rejected: u32,
    avg_waiting_s: f64,
    collisions_per_vehicle: f64,
    extra_space_pct: f64,
    seed: u64,
}

impl From<&RunReport> for CsvRow {
    fn from(r: &RunReport) -> Self {
        CsvRow {
            model: r.model,
            pattern: r.pattern,
            n_vehicles: r.n_vehicles,
            admitted: r.admitted,
            rejected: r.rejected,
            avg_waiting_s: r.avg_waiting_s,
            collisions_per_vehicle: r.collisions_per_vehicle,
            extra_space_pct: r.extra_space_pct,
            seed: r.seed,
        }
    }
}

impl From<CsvRow> for RunReport {
    fn from(r: CsvRow) -> Self {
        RunReport {
            model: r.model,
            pattern: r.pattern,
            n_vehicles: r.n_vehicles,
            admitted: r.admitted,
            rejected: r.rejected,
            avg_waiting_s: r.avg_waiting_s,
            collisions_per_vehicle: r.collisions_per_vehicle,
            extra_space_pct: r.extra_space_pct,
            seed: r.seed,
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    SimError::Parse {
        path: path.to_path_buf(),
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

/// Writes the report rows as CSV. Floats use the shortest form that
/// parses back to the same value.
pub fn write_csv<W: Write>(rows: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow::from(r))
            .map_err(|e| SimError::Consistency(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| SimError::Consistency(format!("csv: {e}")))?;
    Ok(())
}

pub fn emit_csv(table: &ComparisonTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    write_csv(table.rows(), file)
}

pub fn read_csv(path: &Path) -> Result<Vec<RunReport>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize::<CsvRow>()
        .map(|row| row.map(RunReport::from).map_err(|e| csv_err(path, e)))
        .collect()
}

/// Per-vehicle export: `vehicle_id,lane,arrive_s,right_turn,exit_s`.
/// Rejected vehicles have an empty exit time.
pub fn write_schedule_csv<W: Write>(records: &[ScheduleRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| SimError::Consistency(format!("csv: {e}"));
    w.write_record(["vehicle_id", "lane", "arrive_s", "right_turn", "exit_s"])
        .map_err(err)?;
    for r in records {
        w.write_record([
            r.vehicle_id.to_string(),
            r.lane.to_string(),
            format!("{:?}", r.arrive_s),
            if r.right_turn { "Yes" } else { "No" }.to_string(),
            r.exit_s.map(|e| format!("{e:?}")).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| SimError::Consistency(format!("csv: {e}")))?;
    Ok(())
}

pub fn emit_schedule_csv(records: &[ScheduleRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    write_schedule_csv(records, file)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| SimError::Consistency(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| SimError::io(path, e))
}
