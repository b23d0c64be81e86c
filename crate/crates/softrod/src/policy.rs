//! Action sources for rollouts.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use softrod_core::envs::policy::{action_toward, Planner};
use softrod_core::envs::{Environment, TaskKind};

/// `--policy` value: `zero`, `random`, `planner`, or a path to an action file.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Zero,
    Random,
    Planner,
    File(PathBuf),
}

impl std::str::FromStr for PolicySpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "zero" => PolicySpec::Zero,
            "random" => PolicySpec::Random,
            "planner" => PolicySpec::Planner,
            path => PolicySpec::File(PathBuf::from(path)),
        })
    }
}

/// Scripted action file: `{"task": "...", "actions": [[...], ...]}`.
/// Steps past the end of the list get zero actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFile {
    pub task: TaskKind,
    pub actions: Vec<Vec<f64>>,
}

impl ActionFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing action file {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Planner mask that keeps the part of the rod inside the tight opening straight.
pub fn default_planner(task: TaskKind) -> Planner {
    match task {
        TaskKind::Obstacles2dTight => Planner::with_mask(vec![false, false, true, true, true]),
        _ => Planner::default(),
    }
}

/// Per-episode action generator.
pub enum EpisodePolicy {
    Zero,
    Random(Box<ChaCha8Rng>),
    Planner { goal: Vec<f64> },
    Script { actions: Vec<Vec<f64>>, next: usize },
}

/// Random-policy stream for an episode seed, independent of the env's own
/// reset stream.
pub fn random_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

impl EpisodePolicy {
    /// Prepares the policy for an episode whose env was just reset with `seed`.
    pub fn start(spec: &PolicySpec, file: Option<&ActionFile>, env: &Environment, seed: u64) -> anyhow::Result<Self> {
        Ok(match spec {
            PolicySpec::Zero => EpisodePolicy::Zero,
            PolicySpec::Random => EpisodePolicy::Random(Box::new(random_stream(seed))),
            PolicySpec::Planner => {
                let (goal, _) = default_planner(env.spec().task).plan(env)?;
                EpisodePolicy::Planner { goal }
            }
            PolicySpec::File(path) => {
                let file = file.context("action file not loaded")?;
                anyhow::ensure!(
                    file.task == env.spec().task,
                    "{} holds actions for {}, not {}",
                    path.display(),
                    file.task,
                    env.spec().task
                );
                if let Some(bad) = file.actions.iter().find(|a| a.len() != env.action_dim()) {
                    anyhow::bail!(
                        "action of length {} in {}; expected {}",
                        bad.len(),
                        path.display(),
                        env.action_dim()
                    );
                }
                EpisodePolicy::Script { actions: file.actions.clone(), next: 0 }
            }
        })
    }

    pub fn act(&mut self, env: &Environment) -> Vec<f64> {
        let dim = env.action_dim();
        match self {
            EpisodePolicy::Zero => vec![0.0; dim],
            EpisodePolicy::Random(rng) => (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            EpisodePolicy::Planner { goal } => action_toward(env, goal),
            EpisodePolicy::Script { actions, next } => {
                let a = actions.get(*next).cloned().unwrap_or_else(|| vec![0.0; dim]);
                *next += 1;
                a
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_parse() {
        assert_eq!("zero".parse::<PolicySpec>().unwrap(), PolicySpec::Zero);
        assert_eq!("random".parse::<PolicySpec>().unwrap(), PolicySpec::Random);
        assert_eq!("planner".parse::<PolicySpec>().unwrap(), PolicySpec::Planner);
        assert_eq!("a.json".parse::<PolicySpec>().unwrap(), PolicySpec::File("a.json".into()));
    }

    #[test]
    fn action_file_rejects_unknown_fields() {
        assert!(serde_json::from_str::<ActionFile>(r#"{"task":"ik4d","actions":[],"x":1}"#).is_err());
        let f: ActionFile = serde_json::from_str(r#"{"task":"ik4d","actions":[[0.5]]}"#).unwrap();
        assert_eq!(f.task, TaskKind::Ik4d);
    }
}
