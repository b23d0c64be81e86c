use std::path::Path;

use softrod::golden::{replay_snapshot, replay_tight, Snapshot, SNAPSHOT_SEEDS, SNAPSHOT_STEPS};
use softrod::policy::ActionFile;
use softrod_core::geometry::RodParams;

fn golden_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn tight_gap_golden_succeeds() {
    let file = ActionFile::load(&golden_dir().join("obstacles2d_tight.json")).unwrap();
    let last = replay_tight(&file).unwrap();
    assert!(last.info.success && last.terminated);
    assert!(last.info.max_penetration <= 0.005);
}

#[test]
fn follow_target_snapshots_reach_the_target() {
    let text = std::fs::read_to_string(golden_dir().join("follow_target_snapshots.json")).unwrap();
    let snapshots: Vec<Snapshot> = serde_json::from_str(&text).unwrap();
    assert_eq!(snapshots.len(), SNAPSHOT_SEEDS.len() * SNAPSHOT_STEPS.len());
    let length = RodParams::default().length;
    for s in &snapshots {
        let (last, best) = replay_snapshot(s).unwrap();
        assert!(best <= 0.02 * length, "seed {} step {}: {best}", s.seed, s.step);
        assert!(last.info.success, "seed {} step {}", s.seed, s.step);
    }
}
