//! Wall-clock throughput of vector stepping, implicit vs explicit.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use softrod_core::dynamics::Scheme;
use softrod_core::envs::TaskKind;

use crate::config::RunConfig;
use crate::policy::random_stream;
use crate::vector::VectorEnv;

/// The benchmarked tasks: one without contact, one with.
pub const BENCH_TASKS: [TaskKind; 2] = [TaskKind::FollowTarget, TaskKind::Obstacles3dRandom];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub task: TaskKind,
    pub envs: usize,
    pub workers: usize,
    /// Mean wall-clock of one vector step (one control step of every env).
    pub ms_per_vector_step: f64,
    /// Explicit wall time over this row's, for the same task and env count.
    /// Both schemes advance the same simulated time per control step.
    pub speedup_vs_explicit: f64,
    pub substeps_per_control_step: usize,
    pub sim_seconds_per_wall_second: f64,
    pub vector_steps: usize,
}

pub const CSV_HEADER: &str = "scheme,task,envs,ms_per_vector_step,speedup_vs_explicit";

impl BenchRow {
    pub fn csv(&self) -> String {
        let scheme = match self.scheme {
            Scheme::Implicit => "implicit",
            Scheme::Explicit => "explicit",
        };
        format!("{scheme},{},{},{:.3},{:.2}", self.task, self.envs, self.ms_per_vector_step, self.speedup_vs_explicit)
    }
}

/// Times `cfg.bench_steps` vector steps of `cfg.envs` environments under
/// random actions. Finished episodes are reset outside the timed region.
pub fn measure(cfg: &RunConfig) -> anyhow::Result<BenchRow> {
    let spec = cfg.task_spec()?;
    let substeps = spec.control.control_period;
    let control_dt = spec.control_dt();
    let envs = cfg.envs.max(1);
    let mut venv = VectorEnv::new(spec, envs, cfg.workers)?;
    let mut next_seed = cfg.seed;
    let mut seeds = Vec::with_capacity(envs);
    for _ in 0..envs {
        seeds.push(next_seed);
        next_seed += 1;
    }
    venv.reset(&seeds)?;
    let mut rngs: Vec<_> = seeds.iter().map(|&s| random_stream(s)).collect();
    let dim = venv.envs()[0].action_dim();
    let steps = cfg.bench_steps.max(1);
    let mut elapsed = 0.0;
    // Step 0 warms caches and the pool and is not timed.
    for k in 0..=steps {
        let actions: Vec<Vec<f64>> =
            rngs.iter_mut().map(|r| (0..dim).map(|_| r.random_range(-1.0..=1.0)).collect()).collect();
        let start = Instant::now();
        let outcomes = venv.step(&actions)?;
        if k > 0 {
            elapsed += start.elapsed().as_secs_f64();
        }
        for (i, out) in outcomes.iter().enumerate() {
            let done = out.as_ref().map_or(true, |r| r.terminated || r.truncated);
            if done {
                venv.env_mut(i).reset(next_seed);
                rngs[i] = random_stream(next_seed);
                next_seed += 1;
            }
        }
    }
    let per_step = elapsed / steps as f64;
    Ok(BenchRow {
        scheme: cfg.scheme,
        task: cfg.task,
        envs,
        workers: venv.workers(),
        ms_per_vector_step: per_step * 1e3,
        speedup_vs_explicit: 1.0,
        substeps_per_control_step: substeps,
        sim_seconds_per_wall_second: envs as f64 * control_dt / per_step,
        vector_steps: steps,
    })
}

/// Explicit and implicit rows for every benchmarked task.
pub fn bench(cfg: &RunConfig) -> anyhow::Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for task in BENCH_TASKS {
        let explicit = measure(&cfg.with_task(task).with_scheme(Scheme::Explicit))?;
        let mut implicit = measure(&cfg.with_task(task).with_scheme(Scheme::Implicit))?;
        // Both advance one control step per vector step, so the ratio of
        // simulated seconds per wall second is the ratio of step times.
        implicit.speedup_vs_explicit = implicit.sim_seconds_per_wall_second / explicit.sim_seconds_per_wall_second;
        rows.push(explicit);
        rows.push(implicit);
    }
    Ok(rows)
}
