//! The four manipulation tasks.
//!
//! The manipulator is a cantilever clamped at the origin, pointing along +x,
//! with gravity along -z. Each episode starts from the gravity-settled pose at
//! rest. One `step` applies an action and runs one control period of
//! simulation substeps.
//!
//! Observation layout (all entries normalized):
//! 1. positions / L of the control-point nodes and the tip (3 each)
//! 2. velocities / (L per second) of the same nodes (3 each)
//! 3. actuation targets / kappa_bound, in action order
//! 4. target position / L; then target velocity / 0.5 m/s (follow_target) or
//!    target yaw / π and tip yaw / π (ik4d)

pub mod path;
pub mod policy;
pub mod scene;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact::Obstacle;
use crate::control::{ActuationState, ControlConfig, ControlMode};
use crate::dynamics::{relax, ClampSpec, Scheme, StepStats, Stepper, StepperConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_rod, signed_angle, FrameSet, RestConfig, RodParams, RodState};
use crate::math::{abs, round, wrap_angle, Vec3, PI};

use self::path::TargetPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FollowTarget,
    Ik4d,
    Obstacles2dTight,
    Obstacles3dRandom,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] =
        [TaskKind::FollowTarget, TaskKind::Ik4d, TaskKind::Obstacles2dTight, TaskKind::Obstacles3dRandom];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::FollowTarget => "follow_target",
            TaskKind::Ik4d => "ik4d",
            TaskKind::Obstacles2dTight => "obstacles2d_tight",
            TaskKind::Obstacles3dRandom => "obstacles3d_random",
        }
    }

    pub fn has_contact(self) -> bool {
        matches!(self, TaskKind::Obstacles2dTight | TaskKind::Obstacles3dRandom)
    }

    pub fn control_mode(self) -> ControlMode {
        match self {
            TaskKind::FollowTarget | TaskKind::Obstacles3dRandom => ControlMode::Bend3d,
            TaskKind::Ik4d => ControlMode::Bend3dTwist,
            TaskKind::Obstacles2dTight => ControlMode::Bend2d,
        }
    }

    /// Policy frequency (Hz).
    pub fn control_frequency(self) -> f64 {
        if self.has_contact() {
            2.0
        } else {
            10.0
        }
    }

    pub fn default_episode_length(self) -> usize {
        if self.has_contact() {
            40
        } else {
            100
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidSpec(alloc::format!("unknown task `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskKind,
    pub rod: RodParams,
    pub stepper: StepperConfig,
    pub control: ControlConfig,
    /// Control steps per episode.
    pub episode_length: usize,
    /// Success radius as a fraction of the rod length.
    pub success_radius: f64,
    /// ik4d yaw tolerance (rad).
    pub yaw_tolerance: f64,
    /// Consecutive successful control steps needed for the bonus.
    pub hold_steps: usize,
    pub success_bonus: f64,
    pub failure_reward: f64,
    /// follow_target speed (m/s).
    pub target_speed: f64,
}

impl TaskSpec {
    /// Defaults for `task` integrated with `scheme`.
    pub fn new(task: TaskKind, scheme: Scheme) -> Self {
        let mut stepper = StepperConfig::for_scheme(scheme);
        // Without backtracking, capped Newton leaves deep IMC penetrations
        // after fast approaches; the iteration cap itself is unchanged.
        stepper.line_search = task.has_contact() && scheme == Scheme::Implicit;
        let period = round(1.0 / (task.control_frequency() * stepper.dt)) as usize;
        TaskSpec {
            task,
            rod: RodParams::default(),
            stepper,
            control: ControlConfig::new(task.control_mode(), period),
            episode_length: task.default_episode_length(),
            success_radius: 0.02,
            yaw_tolerance: 0.1,
            hold_steps: if task.has_contact() { 3 } else { 5 },
            success_bonus: 10.0,
            failure_reward: -10.0,
            target_speed: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stepper.validate()?;
        self.control.validate(self.rod.n_nodes)?;
        if self.control.mode != self.task.control_mode() {
            return Err(Error::InvalidSpec(alloc::format!(
                "task {} uses control mode {:?}",
                self.task,
                self.task.control_mode()
            )));
        }
        if self.episode_length == 0 {
            return Err(Error::InvalidSpec("episode_length must be positive".into()));
        }
        if self.hold_steps == 0 {
            return Err(Error::InvalidSpec("hold_steps must be positive".into()));
        }
        if !(self.success_radius > 0.0 && self.yaw_tolerance > 0.0 && self.target_speed >= 0.0) {
            return Err(Error::InvalidSpec("tolerances and speed must be positive".into()));
        }
        Ok(())
    }

    /// Simulated seconds per control step.
    pub fn control_dt(&self) -> f64 {
        self.stepper.dt * self.control.control_period as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Target {
    Moving(TargetPath),
    Static(Vec3),
    Pose { position: Vec3, yaw: f64 },
}

/// Diagnostics of one control step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub newton_iters: usize,
    /// Largest end-of-substep residual ‖r‖∞ (N); 0 for the explicit scheme.
    pub max_residual: f64,
    pub unconverged_substeps: usize,
    pub projections: usize,
    pub max_penetration: f64,
    /// Tip-target distance (m).
    pub distance: f64,
    /// ik4d only (rad).
    pub yaw_error: Option<f64>,
    pub success: bool,
    pub action_clamped: bool,
    pub solver_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// One episodic environment.
#[derive(Clone, Debug)]
pub struct Environment {
    spec: TaskSpec,
    rest: RestConfig,
    start_state: RodState,
    start_frames: FrameSet,
    state: RodState,
    frames: FrameSet,
    stepper: Stepper,
    actuation: ActuationState,
    obstacles: Vec<Obstacle>,
    target: Target,
    observed: Vec<usize>,
    steps: usize,
    hold: usize,
    done: bool,
}

/// Gravity-loaded static equilibrium of the straight cantilever.
pub fn settled_pose(rod: &RodParams, gravity: Vec3) -> Result<(RodState, RestConfig, FrameSet)> {
    let (mut state, rest, mut frames) = build_rod(rod)?;
    let cfg = StepperConfig { gravity, ..StepperConfig::implicit() };
    let clamp = ClampSpec::cantilever(&state);
    relax(&mut state, &mut frames, &rest, &[], &cfg, &clamp, 1e-12, 5000)?;
    Ok((state, rest, frames))
}

/// Yaw of the tip cross-section: angle about the tip tangent from the
/// projected +z axis (or +x when the tangent is vertical) to `m1`.
pub fn tip_yaw(frames: &FrameSet) -> f64 {
    let e = frames.n_edges() - 1;
    let t = frames.tangents[e];
    let mut r = Vec3::Z - t * t.z;
    if r.norm() < 1e-6 {
        r = Vec3::X - t * t.x;
    }
    signed_angle(r, frames.mat_m1[e], t)
}

pub fn make_env(spec: TaskSpec) -> Result<Environment> {
    spec.validate()?;
    let (state, rest, frames) = settled_pose(&spec.rod, spec.stepper.gravity)?;
    let stepper = Stepper::new(spec.stepper, ClampSpec::cantilever(&state), &rest)?;
    let actuation = ActuationState::new(spec.control, spec.rod.n_nodes)?;
    let mut observed = actuation.points().to_vec();
    observed.push(spec.rod.n_nodes - 1);
    let obstacles = match spec.task {
        TaskKind::Obstacles2dTight => scene::tight_obstacles(&state.positions),
        _ => Vec::new(),
    };
    let target = match spec.task {
        TaskKind::Obstacles2dTight => Target::Static(scene::tight_target(&state.positions)),
        TaskKind::Obstacles3dRandom => Target::Static(scene::RANDOM_TARGET),
        _ => Target::Static(Vec3::ZERO),
    };
    let mut env = Environment {
        spec,
        rest,
        start_state: state.clone(),
        start_frames: frames.clone(),
        state,
        frames,
        stepper,
        actuation,
        obstacles,
        target,
        observed,
        steps: 0,
        hold: 0,
        done: false,
    };
    env.reset(0);
    Ok(env)
}

impl Environment {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn state(&self) -> &RodState {
        &self.state
    }

    pub fn frames(&self) -> &FrameSet {
        &self.frames
    }

    pub fn rest(&self) -> &RestConfig {
        &self.rest
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn actuation(&self) -> &ActuationState {
        &self.actuation
    }

    pub fn action_dim(&self) -> usize {
        self.spec.control.action_dim()
    }

    pub fn observation_dim(&self) -> usize {
        let extra = match self.spec.task {
            TaskKind::FollowTarget => 6,
            TaskKind::Ik4d => 5,
            _ => 3,
        };
        6 * self.observed.len() + self.action_dim() + extra
    }

    /// Control steps taken in the current episode.
    pub fn elapsed_steps(&self) -> usize {
        self.steps
    }

    /// Simulated time since reset (s).
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.spec.control_dt()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn target_position(&self) -> Vec3 {
        self.target_at(self.time())
    }

    /// Target position `t` seconds after reset.
    pub fn target_at(&self, t: f64) -> Vec3 {
        match &self.target {
            Target::Moving(p) => p.position(t),
            Target::Static(p) => *p,
            Target::Pose { position, .. } => *position,
        }
    }

    /// Target yaw for ik4d.
    pub fn target_yaw(&self) -> Option<f64> {
        match self.target {
            Target::Pose { yaw, .. } => Some(yaw),
            _ => None,
        }
    }

    /// Replaces the target with a fixed point (and yaw for ik4d).
    pub fn set_static_target(&mut self, position: Vec3, yaw: f64) {
        self.target = match self.spec.task {
            TaskKind::Ik4d => Target::Pose { position, yaw },
            _ => Target::Static(position),
        };
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.state.clone_from(&self.start_state);
        self.frames.clone_from(&self.start_frames);
        self.rest.straighten();
        self.actuation.reset();
        self.steps = 0;
        self.hold = 0;
        self.done = false;
        let length = self.spec.rod.length;
        match self.spec.task {
            TaskKind::FollowTarget => {
                let horizon = self.spec.target_speed * self.spec.control_dt() * self.spec.episode_length as f64;
                let mut waypoints = vec![scene::shell_point(&mut rng, length)];
                let mut travelled = 0.0;
                while travelled < horizon + 0.5 || waypoints.len() < 4 {
                    let p = scene::shell_point(&mut rng, length);
                    travelled += (p - *waypoints.last().expect("non-empty")).norm();
                    waypoints.push(p);
                }
                self.target = Target::Moving(TargetPath::new(&waypoints, self.spec.target_speed, 0.95 * length));
            }
            TaskKind::Ik4d => {
                let position = scene::shell_point(&mut rng, length);
                let yaw = rng.random_range(-PI..PI);
                self.target = Target::Pose { position, yaw };
            }
            TaskKind::Obstacles2dTight => {}
            TaskKind::Obstacles3dRandom => {
                self.obstacles = scene::random_obstacles(&mut rng, &self.start_state.positions, self.rest.radius)
                    .expect("sampling box leaves room for the obstacles");
            }
        }
        self.observation()
    }

    pub fn observation(&self) -> Vec<f64> {
        let length = self.spec.rod.length;
        let mut obs = Vec::with_capacity(self.observation_dim());
        for &i in &self.observed {
            obs.extend(self.state.positions[i].to_array().map(|v| v / length));
        }
        for &i in &self.observed {
            obs.extend(self.state.velocities[i].to_array().map(|v| v / length));
        }
        self.actuation.observe(&mut obs);
        obs.extend(self.target_position().to_array().map(|v| v / length));
        match &self.target {
            Target::Moving(p) => {
                let speed = self.spec.target_speed.max(1e-12);
                obs.extend(p.velocity(self.time()).to_array().map(|v| v / speed));
            }
            Target::Pose { yaw, .. } => {
                obs.push(yaw / PI);
                obs.push(tip_yaw(&self.frames) / PI);
            }
            Target::Static(_) => {}
        }
        obs
    }

    /// Applies one action and advances one control period.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::InvalidSpec("episode is over; call reset".to_string()));
        }
        let report = self.actuation.apply_action(action)?;
        let mut info = StepInfo { action_clamped: report.clamped, ..StepInfo::default() };
        let mut failure = None;
        for s in 0..self.spec.control.control_period {
            self.actuation.apply_to_rest(s, &mut self.rest)?;
            match self.stepper.step(&mut self.state, &mut self.frames, &self.rest, &self.obstacles) {
                Ok(stats) => accumulate_stats(&mut info, &stats),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        self.steps += 1;
        let length = self.spec.rod.length;
        let target = self.target_position();
        info.distance = (self.state.tip() - target).norm();
        let mut reward = -info.distance / length;
        let mut within = info.distance <= self.spec.success_radius * length;
        if let Some(yaw) = self.target_yaw() {
            let err = wrap_angle(tip_yaw(&self.frames) - yaw);
            info.yaw_error = Some(err);
            reward -= abs(err) / PI;
            within &= abs(err) <= self.spec.yaw_tolerance;
        }
        let mut terminated = false;
        if let Some(e) = failure {
            info.solver_failure = Some(e.to_string());
            reward = self.spec.failure_reward;
            terminated = true;
            self.hold = 0;
        } else {
            self.hold = if within { self.hold + 1 } else { 0 };
            if self.hold >= self.spec.hold_steps {
                info.success = true;
                reward += self.spec.success_bonus;
                terminated = true;
            }
        }
        let truncated = !terminated && self.steps >= self.spec.episode_length;
        self.done = terminated || truncated;
        Ok(StepResult { observation: self.observation(), reward, terminated, truncated, info })
    }
}

fn accumulate_stats(info: &mut StepInfo, stats: &StepStats) {
    info.newton_iters += stats.newton_iters;
    info.max_residual = info.max_residual.max(stats.residual);
    info.projections += stats.projections;
    info.max_penetration = info.max_penetration.max(stats.max_penetration);
    if !stats.converged {
        info.unconverged_substeps += 1;
    }
}

/// `Σ γᵗ rₜ`, accumulated from the end.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}
