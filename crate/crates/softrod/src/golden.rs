//! Scripted feasibility trajectories checked into `tests/golden`.
//!
//! follow_target snapshots freeze the moving target where it is at a given
//! control step and ask the rod to reach it from rest.

use serde::{Deserialize, Serialize};
use softrod_core::dynamics::Scheme;
use softrod_core::envs::policy::scripted_episode;
use softrod_core::envs::{make_env, Environment, StepResult, TaskKind, TaskSpec};
use softrod_core::Vec3;

use crate::policy::{default_planner, ActionFile};

pub const SNAPSHOT_SEEDS: [u64; 3] = [0, 1, 2];
pub const SNAPSHOT_STEPS: [usize; 7] = [30, 40, 50, 60, 70, 80, 90];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub seed: u64,
    pub step: usize,
    pub target: [f64; 3],
    pub actions: Vec<Vec<f64>>,
}

fn follow_env() -> anyhow::Result<Environment> {
    Ok(make_env(TaskSpec::new(TaskKind::FollowTarget, Scheme::Implicit))?)
}

/// Env reset with `seed` whose target is frozen at control step `step`.
pub fn snapshot_env(seed: u64, step: usize) -> anyhow::Result<Environment> {
    let mut env = follow_env()?;
    env.reset(seed);
    let target = env.target_at(step as f64 * env.spec().control_dt());
    env.set_static_target(target, 0.0);
    Ok(env)
}

pub fn make_snapshot(seed: u64, step: usize) -> anyhow::Result<Snapshot> {
    let mut env = snapshot_env(seed, step)?;
    let target = env.target_position().to_array();
    let (actions, _) = scripted_episode(&mut env, &default_planner(TaskKind::FollowTarget))?;
    Ok(Snapshot { seed, step, target, actions })
}

/// Replays a snapshot; returns the last step and the closest tip distance (m).
pub fn replay_snapshot(s: &Snapshot) -> anyhow::Result<(StepResult, f64)> {
    let mut env = snapshot_env(s.seed, s.step)?;
    let target = Vec3::from(s.target);
    anyhow::ensure!((env.target_position() - target).norm() < 1e-12, "snapshot target does not match the task");
    let mut best = f64::INFINITY;
    let mut last = None;
    for a in &s.actions {
        let r = env.step(a)?;
        best = best.min(r.info.distance);
        let end = r.terminated || r.truncated;
        last = Some(r);
        if end {
            break;
        }
    }
    Ok((last.ok_or_else(|| anyhow::anyhow!("empty snapshot"))?, best))
}

pub fn make_tight() -> anyhow::Result<ActionFile> {
    let mut env = make_env(TaskSpec::new(TaskKind::Obstacles2dTight, Scheme::Implicit))?;
    env.reset(0);
    let (actions, last) = scripted_episode(&mut env, &default_planner(TaskKind::Obstacles2dTight))?;
    anyhow::ensure!(last.info.success, "planner did not thread the gap");
    Ok(ActionFile { task: TaskKind::Obstacles2dTight, actions })
}

/// Replays a tight-gap action file from seed 0.
pub fn replay_tight(file: &ActionFile) -> anyhow::Result<StepResult> {
    let mut env = make_env(TaskSpec::new(TaskKind::Obstacles2dTight, Scheme::Implicit))?;
    env.reset(0);
    let mut last = None;
    for a in &file.actions {
        let r = env.step(a)?;
        let end = r.terminated || r.truncated;
        last = Some(r);
        if end {
            break;
        }
    }
    last.ok_or_else(|| anyhow::anyhow!("empty action file"))
}
