//! Command-line front end and the `reproduce` harness.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::base::{FpsConversion, LaneGroup, SeededRng, TurnFeatures, TurnLabel, DEFAULT_SEED};
use crate::baseline_aim::{run_baseline, BaselineReport, GridConfig};
use crate::error::{Result, SimError};
use crate::flow_patterns::{run_flow, PatternKind, PatternSpec, DEFAULT_HORIZON_SLOTS, DEFAULT_TAKE_FIRST};
use crate::metrics_report::{
    emit_csv, emit_json, emit_schedule_csv, summarize, to_json, write_schedule_csv, ComparisonTable, Observation,
    RunReport, SummaryContext,
};
use crate::prodline::{build_schedule, run_prodline, IntersectionConfig, ProdlineRun};
use crate::turn_knn::{
    knn_predict, open_or_seed, prediction_grid, remove_store_files, seed_instances, InstanceStore, KnnTurnPredictor,
    StorePaths, DEFAULT_K,
};

/// Vehicle counts swept by `reproduce`.
pub const BASELINE_SWEEP: [u32; 6] = [50, 100, 150, 200, 250, 300];
pub const BASELINE_RUNS: u32 = 100;
pub const OUT_DIR_ENV: &str = "INTERSIM_OUT_DIR";

const CONSTANTS_HELP: &str = "\
Defaults:
  cell / container length     26.2467 ft (8 m)
  containers per lane         60
  lane speed band             60-65 mph, admitted at 62.5 mph
  62.5 mph in ft/s            91.66667 (rounded to 5 decimals)
  baseline collision penalty  5.58 s
  queue slot spacing          5.5880 s
  default seed                42";

#[derive(Debug, Parser)]
#[command(name = "intersim", version, about = "Intersection control simulator", after_help = CONSTANTS_HELP)]
pub struct Cli {
    /// Log admission and exit events to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reservation baseline on the cell grid; prints one CSV row.
    Baseline(BaselineArgs),
    /// Production-line run; prints the per-vehicle CSV and a JSON summary.
    Prodline(ProdlineArgs),
    /// Arrival pattern and arranged-queue waits as JSON.
    Flow(FlowArgs),
    /// Turn prediction store commands.
    #[command(subcommand)]
    Knn(KnnCommand),
    /// Runs every experiment and writes the artifacts to a directory.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, default_value_t = 50)]
    pub vehicles: u32,
    #[arg(long, default_value_t = BASELINE_RUNS)]
    pub runs: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Convert mph to ft/s with integer truncation.
    #[arg(long)]
    pub compat_int_fps: bool,
}

#[derive(Debug, Args)]
pub struct ProdlineArgs {
    #[arg(long, default_value_t = PatternKind::Average)]
    pub pattern: PatternKind,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Intersection config (TOML); missing keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write `prodline.csv` and `summary.json` here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    #[arg(long, default_value_t = PatternKind::Average)]
    pub pattern: PatternKind,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_HORIZON_SLOTS)]
    pub slots: u32,
    #[arg(long, default_value_t = DEFAULT_TAKE_FIRST)]
    pub take: usize,
}

#[derive(Debug, Subcommand)]
pub enum KnnCommand {
    /// Predicts a turn from the store in a directory (seeded if empty).
    Predict(KnnPredictArgs),
    /// Writes the seed rows to a fresh store.
    Seed(KnnSeedArgs),
}

#[derive(Debug, Args)]
pub struct KnnPredictArgs {
    #[arg(long)]
    pub day: u8,
    #[arg(long)]
    pub hour: u8,
    #[arg(long)]
    pub event: u8,
    /// Directory holding `instances.txt` and `turns.txt`.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct KnnSeedArgs {
    #[arg(long)]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Run every experiment (the only mode).
    #[arg(long, required = true)]
    pub all: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Baseline(a) => {
            let report = baseline_point(a.vehicles, a.runs, a.seed, a.compat_int_fps)?;
            write_out(
                &mut out,
                &format!(
                    "n_vehicles,collisions_per_vehicle,avg_waiting_s\n{}\n",
                    baseline_row(&report)
                ),
            )
        }
        Command::Prodline(a) => {
            let cfg = match &a.config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| SimError::io(p, e))?;
                    IntersectionConfig::from_toml(&text)?
                }
                None => IntersectionConfig::default(),
            };
            let mut predictor = KnnTurnPredictor::seeded(DEFAULT_K);
            let run = prodline_run(&cfg, a.pattern, a.seed, &mut predictor)?;
            match &a.out {
                Some(dir) => {
                    create_dir(dir)?;
                    emit_schedule_csv(&run.records, &dir.join("prodline.csv"))?;
                    emit_json(&run.report, &dir.join("summary.json"))
                }
                None => {
                    let mut buf = Vec::new();
                    write_schedule_csv(&run.records, &mut buf)?;
                    buf.push(b'\n');
                    buf.extend(to_json(&run.report)?.into_bytes());
                    out.write_all(&buf).map_err(|e| SimError::io("<stdout>", e))
                }
            }
        }
        Command::Flow(a) => {
            let spec = PatternSpec {
                horizon_slots: a.slots,
                take_first: a.take,
                ..PatternSpec::new(a.pattern)
            };
            let report = run_flow(&spec, a.seed)?;
            write_out(&mut out, &to_json(&report)?)
        }
        Command::Knn(KnnCommand::Predict(a)) => {
            let features = TurnFeatures::new(a.day, a.hour, a.event)?;
            create_dir(&a.store)?;
            let store = open_or_seed(StorePaths::in_dir(&a.store, LaneGroup::A))?;
            let mut rng = SeededRng::new(a.seed);
            let label = knn_predict(&features, &store, a.k, &mut rng)?;
            write_out(&mut out, &format!("{}\n", label.symbol()))
        }
        Command::Knn(KnnCommand::Seed(a)) => {
            create_dir(&a.store)?;
            let paths = StorePaths::in_dir(&a.store, LaneGroup::A);
            remove_store_files(&paths)?;
            InstanceStore::create(paths, seed_instances())?;
            Ok(())
        }
        Command::Reproduce(a) => {
            let written = reproduce_all(a.seed, &a.out)?;
            let listing: String = written.iter().map(|p| format!("{}\n", p.display())).collect();
            write_out(&mut out, &listing)
        }
    }
}

fn write_out(out: &mut impl Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| SimError::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

pub fn baseline_point(vehicles: u32, runs: u32, seed: u64, compat_int_fps: bool) -> Result<BaselineReport> {
    let cfg = GridConfig {
        conversion: if compat_int_fps {
            FpsConversion::TruncatedInt
        } else {
            FpsConversion::Exact
        },
        ..GridConfig::default()
    };
    run_baseline(&cfg, vehicles, runs, seed)
}

fn baseline_row(r: &BaselineReport) -> String {
    format!("{},{:?},{:?}", r.n_vehicles, r.collisions_per_vehicle, r.avg_waiting_s)
}

/// Builds and runs one production-line schedule from `seed`.
pub fn prodline_run(
    cfg: &IntersectionConfig,
    pattern: PatternKind,
    seed: u64,
    predictor: &mut KnnTurnPredictor,
) -> Result<ProdlineRun> {
    let mut rng = SeededRng::new(seed);
    let schedule = build_schedule(cfg, pattern, &mut rng)?;
    run_prodline(cfg, &schedule, predictor, &mut rng, Some(pattern))
}

/// Writes every artifact under `out` and returns the paths, in order:
/// baseline sweeps (exact and integer ft/s), the per-vehicle schedule
/// and persisted turn stores of the average-pattern run, prediction
/// grids, pattern summaries, flow reports and the comparison table.
pub fn reproduce_all(seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let mut written = Vec::new();

    let mut comparison: Vec<RunReport> = Vec::new();
    for (name, compat) in [("baseline.csv", false), ("baseline_int_fps.csv", true)] {
        let mut text = String::from("n_vehicles,collisions_per_vehicle,avg_waiting_s\n");
        for n in BASELINE_SWEEP {
            let report = baseline_point(n, BASELINE_RUNS, seed, compat)?;
            text.push_str(&baseline_row(&report));
            text.push('\n');
            if !compat {
                comparison.push(summarize(&[Observation::Baseline(report)], &SummaryContext::default())?);
            }
        }
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| SimError::io(&path, e))?;
        written.push(path);
    }

    let cfg = IntersectionConfig::default();
    let knn_dir = out.join("knn");
    create_dir(&knn_dir)?;
    let mut stores = Vec::new();
    for group in [LaneGroup::A, LaneGroup::B] {
        let paths = StorePaths::in_dir(&knn_dir, group);
        remove_store_files(&paths)?;
        stores.push(InstanceStore::create(paths, seed_instances())?);
    }
    let b = stores.pop().expect("two stores");
    let a = stores.pop().expect("two stores");
    let mut predictor = KnnTurnPredictor { a, b, k: DEFAULT_K };
    let average = prodline_run(&cfg, PatternKind::Average, seed, &mut predictor)?;

    let schedule_csv = out.join("prodline_average.csv");
    emit_schedule_csv(&average.records, &schedule_csv)?;
    written.push(schedule_csv);
    for group in [LaneGroup::A, LaneGroup::B] {
        let paths = StorePaths::in_dir(&knn_dir, group);
        written.push(paths.features);
        written.push(paths.labels);
    }

    for (group, name) in [(LaneGroup::A, "knn_grid_a.txt"), (LaneGroup::B, "knn_grid_b.txt")] {
        let labels: Vec<_> = average
            .records
            .iter()
            .filter(|r| r.lane.group() == group && r.lane.is_leader())
            .map(|r| {
                if r.right_turn {
                    TurnLabel::RightTurn
                } else {
                    TurnLabel::Straight
                }
            })
            .collect();
        let path = out.join(name);
        fs::write(&path, prediction_grid(&labels, 10)).map_err(|e| SimError::io(&path, e))?;
        written.push(path);
    }

    let mut pattern_reports = vec![average.report.clone()];
    for pattern in [PatternKind::Worst, PatternKind::Random] {
        let mut predictor = KnnTurnPredictor::seeded(DEFAULT_K);
        pattern_reports.push(prodline_run(&cfg, pattern, seed, &mut predictor)?.report);
    }
    let patterns = out.join("prodline_patterns.csv");
    let file = fs::File::create(&patterns).map_err(|e| SimError::io(&patterns, e))?;
    crate::metrics_report::write_csv(&pattern_reports, file)?;
    written.push(patterns);

    let mut flow_rows = String::from("pattern,requests,capacity,avg_wait_s,extra_space_pct\n");
    for pattern in PatternKind::ALL {
        let report = run_flow(&PatternSpec::new(pattern), seed)?;
        flow_rows.push_str(&format!(
            "{},{},{},{:?},{:?}\n",
            pattern, report.requests, report.capacity, report.avg_wait_s, report.extra_space_pct
        ));
        let path = out.join(format!("flow_{pattern}.json"));
        emit_json(&report, &path)?;
        written.push(path);
    }
    let flow = out.join("flow.csv");
    fs::write(&flow, flow_rows).map_err(|e| SimError::io(&flow, e))?;
    written.push(flow);

    let n_prodline = average.report.n_vehicles;
    let matched = baseline_point(n_prodline, BASELINE_RUNS, seed, false)?;
    comparison.push(summarize(
        &[Observation::Baseline(matched)],
        &SummaryContext::default(),
    )?);
    comparison.push(average.report);
    let table = ComparisonTable::new(comparison);
    let path = out.join("comparison.csv");
    emit_csv(&table, &path)?;
    written.push(path);
    let path = out.join("waiting_reduction.json");
    emit_json(&table.deltas(), &path)?;
    written.push(path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prodline() {
        let cli = Cli::try_parse_from(["intersim", "prodline", "--pattern", "average", "--seed", "42"]).unwrap();
        match cli.command {
            Command::Prodline(a) => {
                assert_eq!(a.pattern, PatternKind::Average);
                assert_eq!(a.seed, 42);
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn bad_seed_is_usage_error() {
        let err = Cli::try_parse_from(["intersim", "baseline", "--seed", "notanumber"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--seed"));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let err = Cli::try_parse_from(["intersim", "flow", "--bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn defaults_are_fixed() {
        let cli = Cli::try_parse_from(["intersim", "baseline"]).unwrap();
        match cli.command {
            Command::Baseline(a) => {
                assert_eq!(a.seed, DEFAULT_SEED);
                assert!(!a.compat_int_fps);
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn help_lists_constants() {
        use clap::CommandFactory;
        let help = Cli::command().render_long_help().to_string();
        for c in ["26.2467", "60", "62.5", "5.58", "5.5880", "91.66667"] {
            assert!(help.contains(c), "help lacks {c}");
        }
    }
}
