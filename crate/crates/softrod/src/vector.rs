//! Parallel stepping of independent environments.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use softrod_core::envs::{make_env, Environment, StepResult, TaskSpec};

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "SOFTROD_THREADS";

/// Requested worker count, capped by `SOFTROD_THREADS` when set.
pub fn effective_workers(requested: usize) -> usize {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&c| c > 0);
    let n = requested.max(1);
    cap.map_or(n, |c| n.min(c))
}

/// Outcome of one environment in a vector step. A failed environment keeps
/// its error; the others are unaffected.
pub type EnvOutcome = Result<StepResult, String>;

pub struct VectorEnv {
    envs: Vec<Environment>,
    pool: ThreadPool,
    workers: usize,
}

impl VectorEnv {
    /// `count` copies of the environment built from `spec`, stepped on
    /// `workers` threads.
    pub fn new(spec: TaskSpec, count: usize, workers: usize) -> anyhow::Result<Self> {
        anyhow::ensure!(count > 0, "need at least one environment");
        let base = make_env(spec)?;
        Self::from_envs(vec![base; count], workers)
    }

    pub fn from_envs(envs: Vec<Environment>, workers: usize) -> anyhow::Result<Self> {
        let workers = effective_workers(workers);
        let pool = ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(VectorEnv { envs, pool, workers })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn envs(&self) -> &[Environment] {
        &self.envs
    }

    pub fn env_mut(&mut self, i: usize) -> &mut Environment {
        &mut self.envs[i]
    }

    /// Resets env `i` with `seeds[i]`; returns the observations in order.
    pub fn reset(&mut self, seeds: &[u64]) -> anyhow::Result<Vec<Vec<f64>>> {
        anyhow::ensure!(seeds.len() == self.envs.len(), "expected {} seeds, got {}", self.envs.len(), seeds.len());
        let envs = &mut self.envs;
        Ok(self.pool.install(|| envs.par_iter_mut().zip(seeds).map(|(e, &s)| e.reset(s)).collect()))
    }

    /// Steps every environment with its action row.
    pub fn step(&mut self, actions: &[Vec<f64>]) -> anyhow::Result<Vec<EnvOutcome>> {
        anyhow::ensure!(
            actions.len() == self.envs.len(),
            "expected {} action rows, got {}",
            self.envs.len(),
            actions.len()
        );
        let rows: Vec<Option<&[f64]>> = actions.iter().map(|a| Some(a.as_slice())).collect();
        Ok(self.step_some(&rows)?.into_iter().map(|r| r.expect("every env stepped")).collect())
    }

    /// Steps the environments whose row is `Some`; the rest are left alone
    /// (e.g. finished episodes waiting for the batch).
    pub fn step_some(&mut self, actions: &[Option<&[f64]>]) -> anyhow::Result<Vec<Option<EnvOutcome>>> {
        anyhow::ensure!(
            actions.len() == self.envs.len(),
            "expected {} action rows, got {}",
            self.envs.len(),
            actions.len()
        );
        let envs = &mut self.envs;
        Ok(self.pool.install(|| {
            envs.par_iter_mut()
                .zip(actions)
                .map(|(e, a)| {
                    a.map(|a| {
                        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| e.step(a)))
                            .map_err(|_| "environment panicked".to_string())
                            .and_then(|r| r.map_err(|err| err.to_string()))
                    })
                })
                .collect()
        }))
    }
}
