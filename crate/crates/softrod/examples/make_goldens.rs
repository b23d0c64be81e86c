//! Regenerates the scripted trajectories in `tests/golden`.
//!
//!     cargo run --release -p softrod --example make_goldens

use std::path::Path;
use std::time::Instant;

use softrod::golden::{make_snapshot, make_tight, replay_snapshot, SNAPSHOT_SEEDS, SNAPSHOT_STEPS};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    std::fs::create_dir_all(&dir)?;

    let tight = make_tight()?;
    println!("obstacles2d_tight: {} actions", tight.actions.len());
    tight.save(&dir.join("obstacles2d_tight.json"))?;

    let mut snapshots = Vec::new();
    for seed in SNAPSHOT_SEEDS {
        for step in SNAPSHOT_STEPS {
            let start = Instant::now();
            let s = make_snapshot(seed, step)?;
            let (last, best) = replay_snapshot(&s)?;
            println!(
                "follow_target seed {seed} step {step}: {} actions, success {}, closest {best:.4} m ({:.1} s)",
                s.actions.len(),
                last.info.success,
                start.elapsed().as_secs_f64()
            );
            snapshots.push(s);
        }
    }
    std::fs::write(dir.join("follow_target_snapshots.json"), serde_json::to_string_pretty(&snapshots)? + "\n")?;
    Ok(())
}
