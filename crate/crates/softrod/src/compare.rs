//! Implicit vs explicit on identical inputs.

use rand::Rng;
use serde::Serialize;
use softrod_core::dynamics::{ClampSpec, Scheme, Stepper, StepperConfig};
use softrod_core::envs::{discounted_return, make_env, TaskKind};
use softrod_core::geometry::build_rod;

use crate::config::RunConfig;
use crate::policy::{random_stream, EpisodePolicy, PolicySpec};

/// Damping used for the cantilever settling runs (kg/s per kg).
pub const SETTLE_DAMPING: f64 = 1.0;
/// Simulated settling time (s).
pub const SETTLE_SECONDS: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CantileverComparison {
    pub implicit_tip: [f64; 3],
    pub explicit_tip: [f64; 3],
    pub tip_distance: f64,
    /// `tip_distance / L`.
    pub relative: f64,
}

/// Straight cantilever released under gravity and left to settle with each
/// scheme at its default dt.
pub fn cantilever(cfg: &RunConfig) -> anyhow::Result<CantileverComparison> {
    let spec = cfg.task_spec()?;
    let mut tips = Vec::new();
    for scheme in [Scheme::Implicit, Scheme::Explicit] {
        let (mut state, rest, mut frames) = build_rod(&spec.rod)?;
        let stepper_cfg = StepperConfig { damping_coeff: SETTLE_DAMPING, ..StepperConfig::for_scheme(scheme) };
        let mut stepper = Stepper::new(stepper_cfg, ClampSpec::cantilever(&state), &rest)?;
        let steps = (SETTLE_SECONDS / stepper_cfg.dt).round() as usize;
        for _ in 0..steps {
            stepper.step(&mut state, &mut frames, &rest, &[])?;
        }
        tips.push(state.tip());
    }
    let d = (tips[0] - tips[1]).norm();
    Ok(CantileverComparison {
        implicit_tip: tips[0].to_array(),
        explicit_tip: tips[1].to_array(),
        tip_distance: d,
        relative: d / spec.rod.length,
    })
}

/// One scheme's pass over a fixed action sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Replay {
    pub scheme: Scheme,
    #[serde(skip)]
    pub rewards: Vec<f64>,
    pub steps: usize,
    #[serde(skip)]
    pub tips: Vec<[f64; 3]>,
    pub total_return: f64,
    pub discounted_return: f64,
    pub success: bool,
    pub max_penetration: f64,
    /// Set when the scheme went unstable; the replay stops there.
    pub failure: Option<String>,
}

/// Feeds `actions` to a fresh `task` env reset with `seed`, stopping at the
/// end of the episode or of the sequence.
pub fn replay(
    cfg: &RunConfig,
    task: TaskKind,
    scheme: Scheme,
    seed: u64,
    actions: &[Vec<f64>],
) -> anyhow::Result<Replay> {
    let spec = cfg.with_task(task).with_scheme(scheme).task_spec()?;
    let mut env = make_env(spec)?;
    env.reset(seed);
    let mut out = Replay {
        scheme,
        rewards: Vec::new(),
        steps: 0,
        tips: Vec::new(),
        total_return: 0.0,
        discounted_return: 0.0,
        success: false,
        max_penetration: 0.0,
        failure: None,
    };
    for a in actions {
        let r = env.step(a)?;
        out.rewards.push(r.reward);
        out.tips.push(env.state().tip().to_array());
        out.max_penetration = out.max_penetration.max(r.info.max_penetration);
        out.success |= r.info.success;
        if r.info.solver_failure.is_some() {
            out.failure = r.info.solver_failure;
        }
        if r.terminated || r.truncated {
            break;
        }
    }
    out.steps = out.rewards.len();
    out.total_return = out.rewards.iter().sum();
    out.discounted_return = discounted_return(&out.rewards, cfg.gamma);
    Ok(out)
}

/// Planner actions for one `task` episode, recorded under the implicit scheme.
pub fn scripted_actions(cfg: &RunConfig, task: TaskKind, seed: u64) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut env = make_env(cfg.with_task(task).with_scheme(Scheme::Implicit).task_spec()?)?;
    env.reset(seed);
    let mut policy = EpisodePolicy::start(&PolicySpec::Planner, None, &env, seed)?;
    let mut actions = Vec::new();
    loop {
        let a = policy.act(&env);
        let r = env.step(&a)?;
        actions.push(a);
        if r.terminated || r.truncated {
            return Ok(actions);
        }
    }
}

/// Uniform random actions in [-1, 1] for a whole `task` episode.
pub fn random_actions(cfg: &RunConfig, task: TaskKind, seed: u64) -> anyhow::Result<Vec<Vec<f64>>> {
    let spec = cfg.with_task(task).task_spec()?;
    let dim = spec.control.action_dim();
    let mut rng = random_stream(seed);
    Ok((0..spec.episode_length).map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceComparison {
    pub task: TaskKind,
    pub seed: u64,
    pub implicit: Replay,
    pub explicit: Replay,
    /// RMS over control steps of the tip distance between the schemes (m).
    pub tip_rms_divergence: f64,
    /// `|R_explicit - R_implicit| / |R_implicit|` on undiscounted returns.
    pub relative_return_difference: f64,
    pub relative_discounted_difference: f64,
}

pub fn compare_sequence(
    cfg: &RunConfig,
    task: TaskKind,
    seed: u64,
    actions: &[Vec<f64>],
) -> anyhow::Result<SequenceComparison> {
    let implicit = replay(cfg, task, Scheme::Implicit, seed, actions)?;
    let explicit = replay(cfg, task, Scheme::Explicit, seed, actions)?;
    let n = implicit.tips.len().min(explicit.tips.len()).max(1);
    let sq: f64 =
        implicit.tips.iter().zip(&explicit.tips).map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>()).sum();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-12);
    Ok(SequenceComparison {
        task,
        seed,
        tip_rms_divergence: (sq / n as f64).sqrt(),
        relative_return_difference: rel(implicit.total_return, explicit.total_return),
        relative_discounted_difference: rel(implicit.discounted_return, explicit.discounted_return),
        implicit,
        explicit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenetrationStats {
    pub scheme: Scheme,
    /// Largest penetration over all episodes (m).
    pub max: f64,
    /// Mean over episodes of the per-episode maximum (m).
    pub mean_episode_max: f64,
    pub episodes_over_delta: usize,
    pub solver_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContactComparison {
    pub task: TaskKind,
    pub episodes: usize,
    pub delta: f64,
    pub implicit: PenetrationStats,
    pub explicit: PenetrationStats,
    /// Episodes where the explicit scheme penetrated deeper than the implicit one.
    pub explicit_deeper: usize,
}

/// Random-policy episodes with seeds `seed..seed + episodes`, each action
/// sequence fed to both schemes.
pub fn compare_contact(cfg: &RunConfig, task: TaskKind, episodes: usize) -> anyhow::Result<ContactComparison> {
    anyhow::ensure!(task.has_contact(), "{task} has no obstacles");
    let delta = cfg.contact_delta;
    let mut per = [Vec::new(), Vec::new()];
    let mut failures = [0, 0];
    for e in 0..episodes {
        let seed = cfg.seed.wrapping_add(e as u64);
        let actions = random_actions(cfg, task, seed)?;
        for (k, scheme) in [Scheme::Implicit, Scheme::Explicit].into_iter().enumerate() {
            let r = replay(cfg, task, scheme, seed, &actions)?;
            per[k].push(r.max_penetration);
            failures[k] += usize::from(r.failure.is_some());
        }
    }
    let stats = |k: usize, scheme| PenetrationStats {
        scheme,
        max: per[k].iter().copied().fold(0.0, f64::max),
        mean_episode_max: per[k].iter().sum::<f64>() / episodes.max(1) as f64,
        episodes_over_delta: per[k].iter().filter(|&&p| p > delta).count(),
        solver_failures: failures[k],
    };
    Ok(ContactComparison {
        task,
        episodes,
        delta,
        implicit: stats(0, Scheme::Implicit),
        explicit: stats(1, Scheme::Explicit),
        explicit_deeper: per[0].iter().zip(&per[1]).filter(|(i, e)| e > i).count(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub cantilever: CantileverComparison,
    pub scripted: SequenceComparison,
    pub contact: ContactComparison,
}

/// Full report. The scripted sequence runs on the configured task when it
/// has no obstacles (ik4d otherwise); the contact statistics on the
/// configured task when it has obstacles (obstacles3d_random otherwise).
pub fn compare(cfg: &RunConfig) -> anyhow::Result<CompareReport> {
    let free_task = if cfg.task.has_contact() { TaskKind::Ik4d } else { cfg.task };
    let contact_task = if cfg.task.has_contact() { cfg.task } else { TaskKind::Obstacles3dRandom };
    let actions = scripted_actions(cfg, free_task, cfg.seed)?;
    Ok(CompareReport {
        cantilever: cantilever(cfg)?,
        scripted: compare_sequence(cfg, free_task, cfg.seed, &actions)?,
        contact: compare_contact(cfg, contact_task, cfg.episodes.max(1))?,
    })
}
