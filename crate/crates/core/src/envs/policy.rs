//! Scripted policies.
//!
//! The planner works quasi-statically: it searches control-point targets whose
//! gravity-loaded equilibrium puts the tip on the target (damped Gauss-Newton
//! on a finite-difference Jacobian of the equilibrium), then walks the
//! actuation toward them at the rate limit and waits for the rod to settle.

use alloc::vec;
use alloc::vec::Vec;

use super::{tip_yaw, Environment, StepResult, Target};
use crate::dynamics::{relax, ClampSpec};
use crate::error::Result;
use crate::geometry::{FrameSet, RestConfig, RodState};
use crate::math::{wrap_angle, PI};

#[derive(Clone, Debug, PartialEq)]
pub struct Planner {
    /// Action components the planner may use; `None` means all.
    pub mask: Option<Vec<bool>>,
    pub max_iters: usize,
    /// Stop once the predicted tip error (m) is below this.
    pub tolerance: f64,
    /// Finite-difference step on control-point amounts.
    pub fd_step: f64,
}

impl Default for Planner {
    fn default() -> Self {
        Planner { mask: None, max_iters: 30, tolerance: 1e-3, fd_step: 1e-4 }
    }
}

/// Control-point amounts currently commanded: for each action component, the
/// sum of node targets over its region.
pub fn current_amounts(env: &Environment) -> Vec<f64> {
    let act = &env.actuation;
    let c = act.config().n_control_points;
    (0..env.action_dim())
        .map(|idx| {
            let (block, k) = (idx / c, idx % c);
            act.weights()[k]
                .iter()
                .map(|&(i, _)| match block {
                    0 => act.kappa[i][0],
                    1 => act.kappa[i][1],
                    _ => act.twist[i],
                })
                .sum()
        })
        .collect()
}

/// Action that moves the commanded amounts toward `goal` as fast as allowed.
pub fn action_toward(env: &Environment, goal: &[f64]) -> Vec<f64> {
    let limit = env.spec.control.delta_limit;
    current_amounts(env).iter().zip(goal).map(|(cur, g)| ((g - cur) / limit).clamp(-1.0, 1.0)).collect()
}

fn rest_for(env: &Environment, amounts: &[f64]) -> RestConfig {
    let mut rest = env.rest.clone();
    rest.straighten();
    let cfg = env.spec.control;
    let c = cfg.n_control_points;
    for (idx, &u) in amounts.iter().enumerate() {
        let (block, k) = (idx / c, idx % c);
        for &(i, w) in &env.actuation.weights()[k] {
            let v = (w * u).clamp(-cfg.kappa_bound, cfg.kappa_bound);
            match block {
                0 => rest.nat_curvature[i][0] = v,
                1 => rest.nat_curvature[i][1] = v,
                _ => rest.nat_twist[i] = v,
            }
        }
    }
    rest
}

/// Equilibrium reached from the episode start pose under `amounts`.
pub fn equilibrium(env: &Environment, amounts: &[f64]) -> Result<(RodState, FrameSet)> {
    let rest = rest_for(env, amounts);
    let mut state = env.start_state.clone();
    let mut frames = env.start_frames.clone();
    let clamp = ClampSpec::cantilever(&state);
    relax(&mut state, &mut frames, &rest, &env.obstacles, &env.spec.stepper, &clamp, 1e-9, 3000)?;
    Ok((state, frames))
}

/// Task error of an equilibrium: tip offset / L, plus yaw error / π for ik4d.
fn task_error(env: &Environment, state: &RodState, frames: &FrameSet) -> Vec<f64> {
    let length = env.spec.rod.length;
    let d = state.tip() - env.target_position();
    let mut r = vec![d.x / length, d.y / length, d.z / length];
    if let Target::Pose { yaw, .. } = env.target {
        r.push(wrap_angle(tip_yaw(frames) - yaw) / PI);
    }
    r
}

fn norm(v: &[f64]) -> f64 {
    crate::math::sqrt(v.iter().map(|x| x * x).sum())
}

/// Solves the small dense system `a x = b` (a is n×n, row-major) by Gaussian
/// elimination with partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            crate::math::abs(a[i * n + col]).partial_cmp(&crate::math::abs(a[j * n + col])).expect("finite")
        })?;
        if crate::math::abs(a[piv * n + col]) < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(b)
}

impl Planner {
    pub fn with_mask(mask: Vec<bool>) -> Self {
        Planner { mask: Some(mask), ..Planner::default() }
    }

    /// Control-point amounts whose equilibrium best reaches the target.
    /// Returns the amounts and the predicted tip distance (m).
    pub fn plan(&self, env: &Environment) -> Result<(Vec<f64>, f64)> {
        let dim = env.action_dim();
        let free: Vec<usize> = (0..dim).filter(|&i| self.mask.as_ref().is_none_or(|m| m[i])).collect();
        let bound = env.spec.control.kappa_bound;
        let length = env.spec.rod.length;
        let mut u = current_amounts(env);
        let (s, f) = equilibrium(env, &u)?;
        let mut r = task_error(env, &s, &f);
        let mut lambda = 1e-3;
        for _ in 0..self.max_iters {
            if norm(&r[..3]) * length < self.tolerance && r.get(3).is_none_or(|y| crate::math::abs(*y) * PI < 0.02) {
                break;
            }
            let m = r.len();
            let n = free.len();
            let mut jac = vec![0.0; m * n];
            for (col, &i) in free.iter().enumerate() {
                let mut up = u.clone();
                up[i] += self.fd_step;
                let (s, f) = equilibrium(env, &up)?;
                let rp = task_error(env, &s, &f);
                for row in 0..m {
                    jac[row * n + col] = (rp[row] - r[row]) / self.fd_step;
                }
            }
            let mut jtj = vec![0.0; n * n];
            let mut jtr = vec![0.0; n];
            for a in 0..n {
                for b in 0..n {
                    jtj[a * n + b] = (0..m).map(|row| jac[row * n + a] * jac[row * n + b]).sum();
                }
                jtr[a] = -(0..m).map(|row| jac[row * n + a] * r[row]).sum::<f64>();
            }
            let mut improved = false;
            for _ in 0..8 {
                let mut sys = jtj.clone();
                for a in 0..n {
                    sys[a * n + a] += lambda * (1.0 + jtj[a * n + a]);
                }
                let Some(step) = solve_dense(sys, jtr.clone()) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut trial = u.clone();
                for (col, &i) in free.iter().enumerate() {
                    trial[i] = (trial[i] + step[col]).clamp(-bound, bound);
                }
                let Ok((s, f)) = equilibrium(env, &trial) else {
                    lambda *= 10.0;
                    continue;
                };
                let rt = task_error(env, &s, &f);
                if norm(&rt) < norm(&r) {
                    u = trial;
                    r = rt;
                    lambda = (lambda * 0.3).max(1e-9);
                    improved = true;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        Ok((u, norm(&r[..3]) * length))
    }
}

/// Plans once from the current state, then drives the actuation toward the
/// plan until the episode ends. Returns the actions taken and the last result.
pub fn scripted_episode(env: &mut Environment, planner: &Planner) -> Result<(Vec<Vec<f64>>, StepResult)> {
    let (goal, _) = planner.plan(env)?;
    let mut actions = Vec::new();
    loop {
        let a = action_toward(env, &goal);
        let res = env.step(&a)?;
        actions.push(a);
        if res.terminated || res.truncated {
            return Ok((actions, res));
        }
    }
}
