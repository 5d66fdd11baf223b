//! File-backed instance stores.

use std::fs;

use intersim::base::{LaneGroup, SeededRng, TurnFeatures, TurnLabel};
use intersim::turn_knn::{
    knn_predict, load_store, open_or_seed, seed_instances, InstanceStore, KnnInstance, StorePaths,
};
use intersim::SimError;

#[test]
fn seeding_writes_exact_files() {
    let dir = tempfile::tempdir().unwrap();
    let paths = StorePaths::in_dir(dir.path(), LaneGroup::A);
    let store = open_or_seed(paths.clone()).unwrap();
    assert_eq!(store.len(), 9);
    assert_eq!(
        fs::read_to_string(&paths.features).unwrap(),
        "1 9 0\n3 10 0\n4 8 0\n3 8 0\n4 10 0\n2 20 1\n5 19 1\n1 4 1\n2 7 1\n"
    );
    assert_eq!(
        fs::read_to_string(&paths.labels).unwrap(),
        "+\n+\n+\n+\n+\n-\n-\n-\n-\n"
    );
}

#[test]
fn group_b_uses_its_own_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = StorePaths::in_dir(dir.path(), LaneGroup::A);
    let b = StorePaths::in_dir(dir.path(), LaneGroup::B);
    assert_ne!(a, b);
    open_or_seed(b.clone()).unwrap();
    assert!(b.features.exists() && !a.features.exists());
}

#[test]
fn appends_survive_reload() {
    let dir = tempfile::tempdir().unwrap();
    let paths = StorePaths::in_dir(dir.path(), LaneGroup::A);
    let mut store = open_or_seed(paths.clone()).unwrap();
    store
        .append(KnnInstance::new(5, 23, 1, TurnLabel::Straight).unwrap())
        .unwrap();
    let reopened = open_or_seed(paths.clone()).unwrap();
    assert_eq!(reopened.len(), 10);
    assert_eq!(reopened.instances(), store.instances());
    assert!(fs::read_to_string(&paths.features)
        .unwrap()
        .ends_with("2 7 1\n5 23 1\n"));
}

#[test]
fn missing_file_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_store(&dir.path().join("nope.txt"), &dir.path().join("nope2.txt")).unwrap_err();
    assert!(matches!(err, SimError::NotFound(_)), "{err:?}");
}

#[test]
fn count_mismatch_is_consistency_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.txt");
    let l = dir.path().join("l.txt");
    fs::write(&f, "1 9 0\n3 10 0\n").unwrap();
    fs::write(&l, "+\n").unwrap();
    assert!(matches!(load_store(&f, &l), Err(SimError::Consistency(_))));
}

#[test]
fn malformed_line_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.txt");
    let l = dir.path().join("l.txt");
    fs::write(&f, "1 9 0\n3 x 0\n").unwrap();
    fs::write(&l, "+\n-\n").unwrap();
    match load_store(&f, &l) {
        Err(SimError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn predictions_are_reproducible_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let paths = StorePaths::in_dir(dir.path(), LaneGroup::A);
    let mut store = InstanceStore::create(paths.clone(), seed_instances()).unwrap();
    let mut rng = SeededRng::new(11);
    for _ in 0..30 {
        let f = TurnFeatures::new(
            rng.rand_int(1, 5).unwrap() as u8,
            rng.rand_int(0, 23).unwrap() as u8,
            rng.rand_int(0, 1).unwrap() as u8,
        )
        .unwrap();
        let label = knn_predict(&f, &store, 3, &mut rng).unwrap();
        store.append(KnnInstance { features: f, label }).unwrap();
    }
    let reloaded = load_store(&paths.features, &paths.labels).unwrap();
    let q = TurnFeatures::new(3, 12, 0).unwrap();
    let a = knn_predict(&q, &store, 3, &mut SeededRng::new(1)).unwrap();
    let b = knn_predict(&q, &reloaded, 3, &mut SeededRng::new(1)).unwrap();
    assert_eq!(a, b);
}
