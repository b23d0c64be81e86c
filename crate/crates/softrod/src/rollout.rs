//! Episode rollouts on a vector env.

use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use softrod_core::envs::discounted_return;

use crate::config::RunConfig;
use crate::policy::{ActionFile, EpisodePolicy, PolicySpec};
use crate::trajectory::{write_jsonl, Record};
use crate::vector::VectorEnv;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub seed: u64,
    pub steps: usize,
    #[serde(rename = "return")]
    pub total_return: f64,
    pub discounted_return: f64,
    pub success: bool,
    pub solver_failure: bool,
    pub max_penetration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub summary: EpisodeSummary,
    pub records: Vec<Record>,
}

/// Seed of episode `k`.
pub fn episode_seed(cfg: &RunConfig, k: usize) -> u64 {
    cfg.seed.wrapping_add(k as u64)
}

/// Runs `cfg.episodes` episodes, `cfg.envs` at a time.
pub fn rollout(cfg: &RunConfig, policy: &PolicySpec) -> anyhow::Result<Vec<Episode>> {
    let spec = cfg.task_spec()?;
    let file = match policy {
        PolicySpec::File(path) => Some(ActionFile::load(path)?),
        _ => None,
    };
    let batch = cfg.envs.max(1).min(cfg.episodes.max(1));
    let mut venv = VectorEnv::new(spec, batch, cfg.workers)?;
    let mut episodes = Vec::with_capacity(cfg.episodes);
    let mut first = 0;
    while first < cfg.episodes {
        let count = batch.min(cfg.episodes - first);
        let seeds: Vec<u64> = (0..batch).map(|i| episode_seed(cfg, first + i.min(count - 1))).collect();
        venv.reset(&seeds)?;
        let mut policies = Vec::with_capacity(count);
        for (i, &seed) in seeds.iter().enumerate().take(count) {
            policies.push(EpisodePolicy::start(policy, file.as_ref(), &venv.envs()[i], seed)?);
        }
        let mut records: Vec<Vec<Record>> = vec![Vec::new(); count];
        let mut active: Vec<bool> = (0..batch).map(|i| i < count).collect();
        while active.iter().any(|&a| a) {
            let actions: Vec<Option<Vec<f64>>> =
                (0..batch).map(|i| active[i].then(|| policies[i].act(&venv.envs()[i]))).collect();
            let rows: Vec<Option<&[f64]>> = actions.iter().map(|a| a.as_deref()).collect();
            let outcomes = venv.step_some(&rows)?;
            for (i, out) in outcomes.into_iter().enumerate() {
                let Some(out) = out else { continue };
                let res = out.map_err(anyhow::Error::msg).with_context(|| format!("episode {}", first + i))?;
                records[i].push(Record::capture(&venv.envs()[i], actions[i].as_deref().unwrap_or_default(), &res));
                if res.terminated || res.truncated {
                    active[i] = false;
                }
            }
        }
        for (i, recs) in records.into_iter().enumerate() {
            let rewards: Vec<f64> = recs.iter().map(|r| r.reward).collect();
            let last = recs.last().context("episode produced no steps")?;
            episodes.push(Episode {
                summary: EpisodeSummary {
                    episode: first + i,
                    seed: seeds[i],
                    steps: recs.len(),
                    total_return: rewards.iter().sum(),
                    discounted_return: discounted_return(&rewards, cfg.gamma),
                    success: last.info.step.success,
                    solver_failure: last.info.step.solver_failure.is_some(),
                    max_penetration: recs.iter().map(|r| r.info.step.max_penetration).fold(0.0, f64::max),
                },
                records: recs,
            });
        }
        first += count;
    }
    Ok(episodes)
}

/// Trajectory file name of episode `k` inside the output directory.
pub fn episode_file(k: usize) -> String {
    format!("episode_{k:04}.jsonl")
}

pub fn write_episodes(dir: &Path, episodes: &[Episode]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for ep in episodes {
        let path = dir.join(episode_file(ep.summary.episode));
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_jsonl(std::io::BufWriter::new(file), &ep.records)?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "episode,seed,steps,return,discounted_return,success,solver_failure,max_penetration";

pub fn summary_line(s: &EpisodeSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        s.episode, s.seed, s.steps, s.total_return, s.discounted_return, s.success, s.solver_failure, s.max_penetration
    )
}
