//! Right-turn prediction with a k-nearest-neighbours vote over
//! (day, hour, event) features.
//!
//! Instances live in an [`InstanceStore`], optionally backed by a pair of
//! text files: one `"<day> <hour> <event>"` line per instance and one
//! `+`/`-` line per label, in the same order. Every vehicle admitted by
//! the scheduler is appended with its predicted label, so later
//! predictions see earlier traffic.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::base::{LaneGroup, SeededRng, TurnFeatures, TurnLabel};
use crate::error::{Result, SimError};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnInstance {
    pub features: TurnFeatures,
    pub label: TurnLabel,
}

impl KnnInstance {
    pub fn new(day: u8, hour: u8, event: u8, label: TurnLabel) -> Result<Self> {
        Ok(KnnInstance {
            features: TurnFeatures::new(day, hour, event)?,
            label,
        })
    }
}

/// The nine hand-made rows the classifier starts from.
pub fn seed_instances() -> Vec<KnnInstance> {
    use TurnLabel::{RightTurn as R, Straight as S};
    [
        (1, 9, 0, R),
        (3, 10, 0, R),
        (4, 8, 0, R),
        (3, 8, 0, R),
        (4, 10, 0, R),
        (2, 20, 1, S),
        (5, 19, 1, S),
        (1, 4, 1, S),
        (2, 7, 1, S),
    ]
    .into_iter()
    .map(|(d, h, e, l)| KnnInstance::new(d, h, e, l).expect("seed rows are in range"))
    .collect()
}

/// Locations of a store's feature and label files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorePaths {
    pub features: PathBuf,
    pub labels: PathBuf,
}

impl StorePaths {
    pub fn new(features: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        StorePaths {
            features: features.into(),
            labels: labels.into(),
        }
    }

    /// Conventional file names inside `dir` for one lane group.
    pub fn in_dir(dir: &Path, group: LaneGroup) -> Self {
        let suffix = match group {
            LaneGroup::A => "",
            LaneGroup::B => "_b",
        };
        StorePaths::new(
            dir.join(format!("instances{suffix}.txt")),
            dir.join(format!("turns{suffix}.txt")),
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct InstanceStore {
    instances: Vec<KnnInstance>,
    backing: Option<StorePaths>,
}

impl InstanceStore {
    pub fn in_memory(instances: Vec<KnnInstance>) -> Self {
        InstanceStore {
            instances,
            backing: None,
        }
    }

    /// Writes `instances` to fresh files at `paths`, replacing any content.
    pub fn create(paths: StorePaths, instances: Vec<KnnInstance>) -> Result<Self> {
        write_file(&paths.features, &instances, |i| format_features(&i.features))?;
        write_file(&paths.labels, &instances, |i| i.label.symbol().to_string())?;
        Ok(InstanceStore {
            instances,
            backing: Some(paths),
        })
    }

    pub fn instances(&self) -> &[KnnInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn backing(&self) -> Option<&StorePaths> {
        self.backing.as_ref()
    }

    /// Adds `inst` at the end, appending one line to each backing file.
    pub fn append(&mut self, inst: KnnInstance) -> Result<()> {
        if let Some(paths) = &self.backing {
            append_line(&paths.features, &format_features(&inst.features))?;
            append_line(&paths.labels, inst.label.symbol())?;
        }
        self.instances.push(inst);
        Ok(())
    }
}

fn format_features(f: &TurnFeatures) -> String {
    format!("{} {} {}", f.day(), f.hour(), f.event())
}

fn write_file(path: &Path, items: &[KnnInstance], line: impl Fn(&KnnInstance) -> String) -> Result<()> {
    let mut body = String::new();
    for item in items {
        body.push_str(&line(item));
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| SimError::io(path, e))
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| SimError::io(path, e))?;
    writeln!(file, "{line}").map_err(|e| SimError::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => SimError::NotFound(path.display().to_string()),
        _ => SimError::io(path, e),
    })?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect())
}

fn parse_features(path: &Path, line_no: usize, line: &str) -> Result<TurnFeatures> {
    let parse_err = |message: String| SimError::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
    }
    let mut values = [0u8; 3];
    for (slot, field) in values.iter_mut().zip(&fields) {
        *slot = field
            .parse()
            .map_err(|_| parse_err(format!("not a small integer: {field:?}")))?;
    }
    TurnFeatures::new(values[0], values[1], values[2]).map_err(|e| parse_err(e.to_string()))
}

/// Reads a store back from its two files, skipping blank lines.
pub fn load_store(features_path: &Path, labels_path: &Path) -> Result<InstanceStore> {
    let feature_lines = read_lines(features_path)?;
    let label_lines = read_lines(labels_path)?;
    if feature_lines.len() != label_lines.len() {
        return Err(SimError::Consistency(format!(
            "{} has {} instances but {} has {} labels",
            features_path.display(),
            feature_lines.len(),
            labels_path.display(),
            label_lines.len()
        )));
    }
    let mut instances = Vec::with_capacity(feature_lines.len());
    for ((fl, fline), (ll, lline)) in feature_lines.iter().zip(&label_lines) {
        let features = parse_features(features_path, *fl, fline)?;
        let label = lline.parse().map_err(|_| SimError::Parse {
            path: labels_path.to_path_buf(),
            line: *ll,
            message: format!("expected \"+\" or \"-\", found {lline:?}"),
        })?;
        instances.push(KnnInstance { features, label });
    }
    Ok(InstanceStore {
        instances,
        backing: Some(StorePaths::new(features_path, labels_path)),
    })
}

/// Opens the store at `paths`, seeding it with [`seed_instances`] when
/// neither file exists yet.
pub fn open_or_seed(paths: StorePaths) -> Result<InstanceStore> {
    if !paths.features.exists() && !paths.labels.exists() {
        return InstanceStore::create(paths, seed_instances());
    }
    load_store(&paths.features, &paths.labels)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SimError::invalid(format!(
            "feature arity mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt())
}

/// Most frequent label. When several labels tie, one is drawn uniformly
/// from them in the fixed order (right turn, straight).
pub fn majority_label(labels: &[TurnLabel], rng: &mut SeededRng) -> Result<TurnLabel> {
    if labels.is_empty() {
        return Err(SimError::invalid("no labels to vote on"));
    }
    let order = [TurnLabel::RightTurn, TurnLabel::Straight];
    let counts = order.map(|l| labels.iter().filter(|&&x| x == l).count());
    let top = *counts.iter().max().expect("two classes");
    let modes: Vec<TurnLabel> = order
        .iter()
        .zip(counts)
        .filter(|&(_, c)| c == top)
        .map(|(&l, _)| l)
        .collect();
    if modes.len() == 1 {
        Ok(modes[0])
    } else {
        Ok(modes[rng.index(modes.len())])
    }
}

/// Majority label among the `k` stored instances nearest to `query`.
/// Equal distances keep store order; the cut at `k` is a plain truncation.
pub fn knn_predict(query: &TurnFeatures, store: &InstanceStore, k: usize, rng: &mut SeededRng) -> Result<TurnLabel> {
    if store.is_empty() {
        return Err(SimError::invalid("cannot predict from an empty instance store"));
    }
    if k == 0 || k > store.len() {
        return Err(SimError::invalid(format!("k = {k} outside 1..={}", store.len())));
    }
    let q = query.as_array();
    let mut ranked = store
        .instances()
        .iter()
        .map(|inst| Ok((euclidean_distance(&inst.features.as_array(), &q)?, inst.label)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nearest: Vec<TurnLabel> = ranked.iter().take(k).map(|&(_, l)| l).collect();
    majority_label(&nearest, rng)
}

/// Source of turn predictions for the scheduler.
pub trait TurnPredictor {
    fn predict(&mut self, group: LaneGroup, features: &TurnFeatures, rng: &mut SeededRng) -> Result<TurnLabel>;

    /// Feeds an admitted vehicle back into the model.
    fn observe(&mut self, group: LaneGroup, features: TurnFeatures, label: TurnLabel) -> Result<()>;
}

/// One instance store per lane group.
#[derive(Debug, Clone)]
pub struct KnnTurnPredictor {
    pub a: InstanceStore,
    pub b: InstanceStore,
    pub k: usize,
}

impl KnnTurnPredictor {
    /// Both groups start from the seed rows, held in memory.
    pub fn seeded(k: usize) -> Self {
        KnnTurnPredictor {
            a: InstanceStore::in_memory(seed_instances()),
            b: InstanceStore::in_memory(seed_instances()),
            k,
        }
    }

    pub fn store(&self, group: LaneGroup) -> &InstanceStore {
        match group {
            LaneGroup::A => &self.a,
            LaneGroup::B => &self.b,
        }
    }

    fn store_mut(&mut self, group: LaneGroup) -> &mut InstanceStore {
        match group {
            LaneGroup::A => &mut self.a,
            LaneGroup::B => &mut self.b,
        }
    }
}

impl TurnPredictor for KnnTurnPredictor {
    fn predict(&mut self, group: LaneGroup, features: &TurnFeatures, rng: &mut SeededRng) -> Result<TurnLabel> {
        knn_predict(features, self.store(group), self.k, rng)
    }

    fn observe(&mut self, group: LaneGroup, features: TurnFeatures, label: TurnLabel) -> Result<()> {
        self.store_mut(group).append(KnnInstance { features, label })
    }
}

/// Writes labels as a grid of `+`/`-` cells, `width` per row, each row
/// preceded by a header of 1-based cell numbers (tab separated).
pub fn prediction_grid(labels: &[TurnLabel], width: usize) -> String {
    let mut out = String::new();
    for (row, chunk) in labels.chunks(width.max(1)).enumerate() {
        let start = row * width.max(1);
        let header: Vec<String> = (0..chunk.len()).map(|i| (start + i + 1).to_string()).collect();
        let cells: Vec<&str> = chunk.iter().map(|l| l.symbol()).collect();
        out.push_str(&header.join("\t"));
        out.push('\n');
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

/// Removes both backing files. Missing files are ignored.
pub fn remove_store_files(paths: &StorePaths) -> Result<()> {
    for p in [&paths.features, &paths.labels] {
        match fs::remove_file(p) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(SimError::io(p, e)),
        }
    }
    Ok(())
}

/// Creates an empty file pair, for stores that start with no rows.
pub fn create_empty(paths: StorePaths) -> Result<InstanceStore> {
    for p in [&paths.features, &paths.labels] {
        File::create(p).map_err(|e| SimError::io(p, e))?;
    }
    Ok(InstanceStore {
        instances: Vec::new(),
        backing: Some(paths),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(d: u8, h: u8, e: u8) -> TurnFeatures {
        TurnFeatures::new(d, h, e).unwrap()
    }

    #[test]
    fn distances() {
        let d = |a: TurnFeatures, b: TurnFeatures| euclidean_distance(&a.as_array(), &b.as_array()).unwrap();
        assert_eq!(d(f(1, 9, 0), f(1, 9, 0)), 0.0);
        assert!((d(f(1, 9, 0), f(1, 4, 1)) - 26f64.sqrt()).abs() < 1e-12);
        assert_eq!(d(f(3, 10, 0), f(3, 8, 0)), 2.0);
        assert!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn seed_rows() {
        let rows = seed_instances();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows.iter().filter(|r| r.label.is_right_turn()).count(), 5);
    }

    #[test]
    fn predicts_on_seed_rows() {
        let store = InstanceStore::in_memory(seed_instances());
        let mut rng = SeededRng::new(0);
        // nearest three: (1,9,0) d=0, (3,10,0) d=sqrt5, (3,8,0) d=sqrt5, all "+"
        assert_eq!(
            knn_predict(&f(1, 9, 0), &store, 3, &mut rng).unwrap(),
            TurnLabel::RightTurn
        );
        assert_eq!(
            knn_predict(&f(1, 4, 1), &store, 1, &mut rng).unwrap(),
            TurnLabel::Straight
        );
    }

    #[test]
    fn unanimous_store() {
        let store = InstanceStore::in_memory(seed_instances().into_iter().take(5).collect());
        let mut rng = SeededRng::new(0);
        assert_eq!(
            knn_predict(&f(5, 23, 1), &store, 5, &mut rng).unwrap(),
            TurnLabel::RightTurn
        );
    }

    #[test]
    fn predict_argument_errors() {
        let mut rng = SeededRng::new(0);
        let empty = InstanceStore::default();
        assert!(knn_predict(&f(1, 1, 1), &empty, 1, &mut rng).is_err());
        let store = InstanceStore::in_memory(seed_instances());
        assert!(knn_predict(&f(1, 1, 1), &store, 0, &mut rng).is_err());
        assert!(knn_predict(&f(1, 1, 1), &store, 10, &mut rng).is_err());
    }

    #[test]
    fn tie_break_uses_rng() {
        let labels = [TurnLabel::RightTurn, TurnLabel::Straight];
        let mut rng = SeededRng::new(11);
        let picks: Vec<TurnLabel> = (0..200).map(|_| majority_label(&labels, &mut rng).unwrap()).collect();
        assert!(picks.contains(&TurnLabel::RightTurn));
        assert!(picks.contains(&TurnLabel::Straight));
    }

    #[test]
    fn exact_match_wins_at_k1() {
        let store = InstanceStore::in_memory(seed_instances());
        let mut rng = SeededRng::new(0);
        for inst in store.instances() {
            assert_eq!(knn_predict(&inst.features, &store, 1, &mut rng).unwrap(), inst.label);
        }
    }

    #[test]
    fn grid_format() {
        let labels = vec![TurnLabel::RightTurn, TurnLabel::Straight, TurnLabel::RightTurn];
        assert_eq!(prediction_grid(&labels, 2), "1\t2\n+\t-\n3\n+\n");
    }
}
