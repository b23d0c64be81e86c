//! Time integration.
//!
//! The implicit stepper solves the backward-Euler force balance
//!
//! ```text
//! r(x) = M (x - x_t - dt v_t) / dt² + ∇E(x) + ∇E_c(x) - F_g + c_d M (x - x_t) / dt = 0
//! ```
//!
//! with a capped number of Newton iterations on the banded Jacobian. The
//! explicit stepper is semi-implicit (symplectic) Euler on the same energies,
//! with penalty contact.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::banded::{BandCholesky, SymBandMatrix};
use crate::contact::{self, ContactConfig, ContactPair, Obstacle};
use crate::elasticity::{self, Terms};
use crate::error::{Error, Result};
use crate::geometry::{
    node_dof, tangents_into, theta_dof, time_parallel_transport_into, unpack_into, FrameSet, RestConfig, RodState,
};
use crate::math::{abs, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Implicit,
    Explicit,
}

/// When stencil Hessians are clamped to positive semi-definite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianProjection {
    Never,
    /// Only when the assembled Jacobian fails a Cholesky factorization.
    OnIndefinite,
    Always,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub scheme: Scheme,
    /// s
    pub dt: f64,
    /// Newton iteration cap without obstacles.
    pub max_newton_iters: usize,
    /// Newton iteration cap when the scene has obstacles.
    pub max_newton_iters_contact: usize,
    /// ‖r‖∞ threshold (N).
    pub newton_tol: f64,
    /// c_d in `C = c_d M` (1/s).
    pub damping_coeff: f64,
    /// m/s²
    pub gravity: Vec3,
    pub line_search: bool,
    pub projection: HessianProjection,
    pub contact: ContactConfig,
    /// Explicit scheme: speed (m/s or rad/s) treated as divergence.
    pub divergence_speed: f64,
}

impl StepperConfig {
    pub fn implicit() -> Self {
        StepperConfig {
            scheme: Scheme::Implicit,
            dt: 0.05,
            max_newton_iters: 2,
            max_newton_iters_contact: 5,
            newton_tol: 1e-3,
            damping_coeff: 0.1,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            line_search: false,
            projection: HessianProjection::OnIndefinite,
            contact: ContactConfig::imc(),
            divergence_speed: 1e3,
        }
    }

    pub fn explicit() -> Self {
        StepperConfig { scheme: Scheme::Explicit, dt: 2e-4, contact: ContactConfig::penalty(), ..Self::implicit() }
    }

    pub fn for_scheme(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Implicit => Self::implicit(),
            Scheme::Explicit => Self::explicit(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.max_newton_iters == 0 || self.max_newton_iters_contact == 0 {
            return Err(Error::param("max_newton_iters", "must be at least 1"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::param("newton_tol", "must be positive"));
        }
        if !(self.damping_coeff >= 0.0) {
            return Err(Error::param("damping_coeff", "must be non-negative"));
        }
        if !self.gravity.is_finite() {
            return Err(Error::param("gravity", "must be finite"));
        }
        if !(self.divergence_speed > 0.0) {
            return Err(Error::param("divergence_speed", "must be positive"));
        }
        self.contact.validate()
    }
}

/// Fixed degrees of freedom and the values they are held at.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampSpec {
    pub nodes: Vec<(usize, Vec3)>,
    pub thetas: Vec<(usize, f64)>,
}

impl ClampSpec {
    /// Clamps the first two nodes and the first edge angle at their current values.
    pub fn cantilever(state: &RodState) -> Self {
        ClampSpec { nodes: vec![(0, state.positions[0]), (1, state.positions[1])], thetas: vec![(0, state.thetas[0])] }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        for &(i, _) in &self.nodes {
            if i >= n_nodes {
                return Err(Error::IndexOutOfRange { index: i, len: n_nodes });
            }
        }
        for &(i, _) in &self.thetas {
            if i + 1 >= n_nodes {
                return Err(Error::IndexOutOfRange { index: i, len: n_nodes - 1 });
            }
        }
        Ok(())
    }

    fn dofs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes
            .iter()
            .flat_map(|&(i, p)| (0..3).map(move |k| (node_dof(i) + k, p[k])))
            .chain(self.thetas.iter().map(|&(i, t)| (theta_dof(i), t)))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub newton_iters: usize,
    /// ‖r‖∞ at the accepted state (implicit only).
    pub residual: f64,
    pub converged: bool,
    /// Jacobians that needed PSD projection.
    pub projections: usize,
    pub n_contacts: usize,
    pub max_penetration: f64,
}

/// Integrator state and reusable workspace for one rod.
///
/// Not reentrant: one stepper per environment.
#[derive(Clone, Debug)]
pub struct Stepper {
    config: StepperConfig,
    clamp: ClampSpec,
    free: Vec<bool>,
    mass: Vec<f64>,
    x: Vec<f64>,
    x_t: Vec<f64>,
    v_t: Vec<f64>,
    res: Vec<f64>,
    dx: Vec<f64>,
    x_trial: Vec<f64>,
    positions: Vec<Vec3>,
    thetas: Vec<f64>,
    tangents: Vec<Vec3>,
    frames: FrameSet,
    pairs: Vec<ContactPair>,
    node_forces: Vec<Vec3>,
    hess: SymBandMatrix,
    chol: BandCholesky,
}

impl Stepper {
    pub fn new(config: StepperConfig, clamp: ClampSpec, rest: &RestConfig) -> Result<Self> {
        config.validate()?;
        rest.validate()?;
        let n = rest.n_nodes();
        clamp.validate(n)?;
        let ndof = 4 * n - 1;
        let mut free = vec![true; ndof];
        for (d, _) in clamp.dofs() {
            free[d] = false;
        }
        Ok(Stepper {
            config,
            clamp,
            free,
            mass: rest.mass_diagonal(),
            x: vec![0.0; ndof],
            x_t: vec![0.0; ndof],
            v_t: vec![0.0; ndof],
            res: vec![0.0; ndof],
            dx: vec![0.0; ndof],
            x_trial: vec![0.0; ndof],
            positions: vec![Vec3::ZERO; n],
            thetas: vec![0.0; n - 1],
            tangents: Vec::with_capacity(n - 1),
            frames: FrameSet {
                ref_d1: Vec::new(),
                ref_d2: Vec::new(),
                tangents: Vec::new(),
                mat_m1: Vec::new(),
                mat_m2: Vec::new(),
                ref_twists: Vec::new(),
            },
            pairs: Vec::new(),
            node_forces: vec![Vec3::ZERO; n],
            hess: SymBandMatrix::for_rod(n),
            chol: BandCholesky::new(),
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn clamp(&self) -> &ClampSpec {
        &self.clamp
    }

    /// Refreshes masses after the rest configuration changed.
    pub fn set_rest(&mut self, rest: &RestConfig) {
        self.mass = rest.mass_diagonal();
    }

    /// Advances `state` and `frames` by one time step of the configured scheme.
    pub fn step(
        &mut self,
        state: &mut RodState,
        frames: &mut FrameSet,
        rest: &RestConfig,
        obstacles: &[Obstacle],
    ) -> Result<StepStats> {
        match self.config.scheme {
            Scheme::Implicit => self.implicit_step(state, frames, rest, obstacles),
            Scheme::Explicit => self.explicit_step(state, frames, rest, obstacles),
        }
    }

    /// Loads iterate `x` into positions/thetas and frames transported from `start`.
    fn load_iterate(&mut self, start: &FrameSet, use_trial: bool) -> Result<()> {
        let x = if use_trial { &self.x_trial } else { &self.x };
        unpack_into(x, &mut self.positions, &mut self.thetas);
        tangents_into(&self.positions, &mut self.tangents)?;
        time_parallel_transport_into(start, &self.tangents, &self.thetas, &mut self.frames)
    }

    /// Residual at the loaded iterate, into `self.res`; returns ‖r‖∞ over free dofs.
    fn residual(&mut self, rest: &RestConfig, obstacles: &[Obstacle], use_trial: bool) -> Result<f64> {
        let dt = self.config.dt;
        let cd = self.config.damping_coeff;
        let g = self.config.gravity;
        self.res.iter_mut().for_each(|r| *r = 0.0);
        elasticity::accumulate(
            &self.positions,
            &self.thetas,
            &self.frames,
            rest,
            Terms::ALL,
            Some(&mut self.res),
            None,
            false,
        )?;
        if !obstacles.is_empty() {
            let c = &self.config.contact;
            contact::detect_into(&self.positions, rest.radius, obstacles, c.cutoff, &mut self.pairs);
            contact::imc_accumulate(&self.pairs, &self.positions, c, Some(&mut self.res), None, false);
        } else {
            self.pairs.clear();
        }
        let x = if use_trial { &self.x_trial } else { &self.x };
        let inv_dt2 = 1.0 / (dt * dt);
        let mut norm: f64 = 0.0;
        for d in 0..self.res.len() {
            if !self.free[d] {
                self.res[d] = 0.0;
                continue;
            }
            let m = self.mass[d];
            let inertia = m * (x[d] - self.x_t[d] - dt * self.v_t[d]) * inv_dt2;
            let damping = cd * m * (x[d] - self.x_t[d]) / dt;
            let gravity = if d % 4 == 3 { 0.0 } else { m * g[d % 4] };
            let r = self.res[d] + inertia + damping - gravity;
            self.res[d] = r;
            norm = norm.max(abs(r));
        }
        if !norm.is_finite() {
            return Err(Error::StepFailure { reason: "non-finite residual", residual: norm });
        }
        Ok(norm)
    }

    fn assemble_jacobian(&mut self, rest: &RestConfig, obstacles: &[Obstacle], project: bool) -> Result<()> {
        let dt = self.config.dt;
        self.hess.clear();
        elasticity::accumulate(
            &self.positions,
            &self.thetas,
            &self.frames,
            rest,
            Terms::ALL,
            None,
            Some(&mut self.hess),
            project,
        )?;
        if !obstacles.is_empty() {
            contact::imc_accumulate(
                &self.pairs,
                &self.positions,
                &self.config.contact,
                None,
                Some(&mut self.hess),
                project,
            );
        }
        let diag = 1.0 / (dt * dt) + self.config.damping_coeff / dt;
        for d in 0..self.mass.len() {
            if self.free[d] {
                self.hess.add_diag(d, self.mass[d] * diag);
            } else {
                self.hess.pin(d);
            }
        }
        Ok(())
    }

    /// Solves `J dx = -r` into `self.dx`; returns whether projection was needed.
    fn newton_direction(&mut self, rest: &RestConfig, obstacles: &[Obstacle], residual: f64) -> Result<bool> {
        let mode = self.config.projection;
        self.assemble_jacobian(rest, obstacles, mode == HessianProjection::Always)?;
        let mut projected = mode == HessianProjection::Always;
        let mut factored = self.hess.cholesky_into(&mut self.chol).is_ok();
        if !factored && mode == HessianProjection::OnIndefinite {
            self.assemble_jacobian(rest, obstacles, true)?;
            projected = true;
            factored = self.hess.cholesky_into(&mut self.chol).is_ok();
        }
        for (d, r) in self.dx.iter_mut().zip(&self.res) {
            *d = -r;
        }
        if factored {
            self.chol.solve_in_place(&mut self.dx);
        } else {
            let lu = self.hess.lu().map_err(|_| Error::StepFailure { reason: "singular Jacobian", residual })?;
            lu.solve_in_place(&mut self.dx);
        }
        if self.dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure { reason: "non-finite Newton update", residual });
        }
        Ok(projected)
    }

    pub fn implicit_step(
        &mut self,
        state: &mut RodState,
        frames: &mut FrameSet,
        rest: &RestConfig,
        obstacles: &[Obstacle],
    ) -> Result<StepStats> {
        let dt = self.config.dt;
        self.x_t.clear();
        self.x_t.extend(state.dofs());
        self.v_t.clear();
        self.v_t.extend(state.velocity_dofs());
        for d in 0..self.x.len() {
            self.x[d] = self.x_t[d] + dt * self.v_t[d];
        }
        for (d, v) in self.clamp.dofs() {
            self.x[d] = v;
        }
        let cap =
            if obstacles.is_empty() { self.config.max_newton_iters } else { self.config.max_newton_iters_contact };
        let mut stats = StepStats::default();
        self.load_iterate(frames, false)?;
        let mut residual = self.residual(rest, obstacles, false)?;
        loop {
            if residual < self.config.newton_tol {
                stats.converged = true;
                break;
            }
            if stats.newton_iters == cap {
                break;
            }
            if self.newton_direction(rest, obstacles, residual)? {
                stats.projections += 1;
            }
            stats.newton_iters += 1;
            residual = if self.config.line_search {
                self.line_search(frames, rest, obstacles, residual)?
            } else {
                for (x, d) in self.x.iter_mut().zip(&self.dx) {
                    *x += d;
                }
                self.load_iterate(frames, false)
                    .map_err(|_| Error::StepFailure { reason: "degenerate iterate", residual })?;
                self.residual(rest, obstacles, false)?
            };
        }
        stats.residual = residual;
        stats.n_contacts = self.pairs.len();
        stats.max_penetration = contact::max_penetration(&self.pairs);

        unpack_into(&self.x, &mut state.positions, &mut state.thetas);
        for d in 0..self.x.len() {
            self.dx[d] = if self.free[d] { (self.x[d] - self.x_t[d]) / dt } else { 0.0 };
        }
        unpack_into(&self.dx, &mut state.velocities, &mut state.theta_rates);
        core::mem::swap(frames, &mut self.frames);
        Ok(stats)
    }

    /// Backtracking on ‖r‖∞ (factor 0.5, at most 8 halvings). Leaves the
    /// accepted iterate loaded and returns its residual.
    fn line_search(&mut self, start: &FrameSet, rest: &RestConfig, obstacles: &[Obstacle], r0: f64) -> Result<f64> {
        let mut alpha = 1.0;
        let mut best = f64::INFINITY;
        for _ in 0..=8 {
            for d in 0..self.x.len() {
                self.x_trial[d] = self.x[d] + alpha * self.dx[d];
            }
            if self.load_iterate(start, true).is_ok() {
                if let Ok(r) = self.residual(rest, obstacles, true) {
                    best = r;
                    if r < r0 {
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !best.is_finite() {
            return Err(Error::StepFailure { reason: "line search found no valid iterate", residual: r0 });
        }
        core::mem::swap(&mut self.x, &mut self.x_trial);
        Ok(best)
    }

    pub fn explicit_step(
        &mut self,
        state: &mut RodState,
        frames: &mut FrameSet,
        rest: &RestConfig,
        obstacles: &[Obstacle],
    ) -> Result<StepStats> {
        let dt = self.config.dt;
        let cd = self.config.damping_coeff;
        let g = self.config.gravity;
        let n = state.n_nodes();
        self.res.iter_mut().for_each(|r| *r = 0.0);
        elasticity::accumulate(
            &state.positions,
            &state.thetas,
            frames,
            rest,
            Terms::ALL,
            Some(&mut self.res),
            None,
            false,
        )?;
        let mut stats = StepStats::default();
        for i in 0..n {
            let m = rest.lumped_masses[i];
            let d = node_dof(i);
            let elastic = Vec3::new(self.res[d], self.res[d + 1], self.res[d + 2]);
            self.node_forces[i] = g * m - elastic - state.velocities[i] * (cd * m);
        }
        if !obstacles.is_empty() {
            let c = &self.config.contact;
            contact::detect_into(&state.positions, rest.radius, obstacles, c.cutoff, &mut self.pairs);
            contact::penalty_force(&self.pairs, c, &state.velocities, &mut self.node_forces);
            stats.n_contacts = self.pairs.len();
            stats.max_penetration = contact::max_penetration(&self.pairs);
        }
        for i in 0..n {
            if !self.free[node_dof(i)] {
                continue;
            }
            let v = state.velocities[i] + self.node_forces[i] * (dt / rest.lumped_masses[i]);
            state.velocities[i] = v;
            state.positions[i] += v * dt;
        }
        for e in 0..n - 1 {
            if !self.free[theta_dof(e)] {
                continue;
            }
            let j = rest.theta_inertias[e];
            let torque = -self.res[theta_dof(e)] - cd * j * state.theta_rates[e];
            state.theta_rates[e] += dt * torque / j;
            state.thetas[e] += dt * state.theta_rates[e];
        }
        for &(i, p) in &self.clamp.nodes {
            state.positions[i] = p;
            state.velocities[i] = Vec3::ZERO;
        }
        for &(i, t) in &self.clamp.thetas {
            state.thetas[i] = t;
            state.theta_rates[i] = 0.0;
        }
        self.check_divergence(state)?;
        tangents_into(&state.positions, &mut self.tangents)?;
        time_parallel_transport_into(frames, &self.tangents, &state.thetas, &mut self.frames)?;
        core::mem::swap(frames, &mut self.frames);
        Ok(stats)
    }

    fn check_divergence(&self, state: &RodState) -> Result<()> {
        let limit = self.config.divergence_speed;
        for (i, v) in state.velocities.iter().enumerate() {
            for k in 0..3 {
                let val = v[k];
                if !val.is_finite() || abs(val) > limit || !state.positions[i][k].is_finite() {
                    return Err(Error::Instability { dof: node_dof(i) + k, value: val });
                }
            }
        }
        for (e, w) in state.theta_rates.iter().enumerate() {
            // Angular rates are scaled to a surface speed for the threshold.
            if !w.is_finite() || abs(*w) > limit / 0.01 {
                return Err(Error::Instability { dof: theta_dof(e), value: *w });
            }
        }
        Ok(())
    }
}

/// One implicit step from copies of the inputs.
pub fn implicit_step(
    state: &RodState,
    rest: &RestConfig,
    frames: &FrameSet,
    obstacles: &[Obstacle],
    config: &StepperConfig,
    clamp: &ClampSpec,
) -> Result<(RodState, FrameSet, StepStats)> {
    let cfg = StepperConfig { scheme: Scheme::Implicit, ..*config };
    let mut stepper = Stepper::new(cfg, clamp.clone(), rest)?;
    let (mut s, mut f) = (state.clone(), frames.clone());
    let stats = stepper.implicit_step(&mut s, &mut f, rest, obstacles)?;
    Ok((s, f, stats))
}

/// One explicit step from copies of the inputs.
pub fn explicit_step(
    state: &RodState,
    rest: &RestConfig,
    frames: &FrameSet,
    obstacles: &[Obstacle],
    config: &StepperConfig,
    clamp: &ClampSpec,
) -> Result<(RodState, FrameSet)> {
    let cfg = StepperConfig { scheme: Scheme::Explicit, ..*config };
    let mut stepper = Stepper::new(cfg, clamp.clone(), rest)?;
    let (mut s, mut f) = (state.clone(), frames.clone());
    stepper.explicit_step(&mut s, &mut f, rest, obstacles)?;
    Ok((s, f))
}

/// Kinetic + elastic + gravitational potential energy.
pub fn total_energy(state: &RodState, frames: &FrameSet, rest: &RestConfig, gravity: Vec3) -> Result<f64> {
    let elastic = elasticity::energy(state, frames, rest, Terms::ALL)?;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for (i, v) in state.velocities.iter().enumerate() {
        let m = rest.lumped_masses[i];
        kinetic += 0.5 * m * v.norm_squared();
        potential -= m * gravity.dot(state.positions[i]);
    }
    for (e, w) in state.theta_rates.iter().enumerate() {
        kinetic += 0.5 * rest.theta_inertias[e] * w * w;
    }
    Ok(kinetic + elastic + potential)
}

/// Largest node speed.
pub fn max_speed(state: &RodState) -> f64 {
    state.velocities.iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Steps until the largest node speed drops below `speed_tol` or `max_steps`
/// is reached. Returns the number of steps taken.
pub fn settle(
    stepper: &mut Stepper,
    state: &mut RodState,
    frames: &mut FrameSet,
    rest: &RestConfig,
    obstacles: &[Obstacle],
    max_steps: usize,
    speed_tol: f64,
) -> Result<usize> {
    for k in 0..max_steps {
        stepper.step(state, frames, rest, obstacles)?;
        if max_speed(state) < speed_tol {
            return Ok(k + 1);
        }
    }
    Ok(max_steps)
}

/// Static equilibrium by heavily damped implicit steps, velocities zeroed
/// between steps. Stops once a step converges in at most one Newton
/// iteration and moves no dof by more than `tol`. Returns the steps taken.
#[allow(clippy::too_many_arguments)]
pub fn relax(
    state: &mut RodState,
    frames: &mut FrameSet,
    rest: &RestConfig,
    obstacles: &[Obstacle],
    base: &StepperConfig,
    clamp: &ClampSpec,
    tol: f64,
    max_steps: usize,
) -> Result<usize> {
    let cfg = StepperConfig {
        scheme: Scheme::Implicit,
        dt: 0.05,
        max_newton_iters: 30,
        max_newton_iters_contact: 30,
        newton_tol: 1e-9,
        damping_coeff: 20.0,
        line_search: true,
        ..*base
    };
    let mut stepper = Stepper::new(cfg, clamp.clone(), rest)?;
    for k in 0..max_steps {
        state.velocities.iter_mut().for_each(|v| *v = Vec3::ZERO);
        state.theta_rates.iter_mut().for_each(|w| *w = 0.0);
        let stats = stepper.implicit_step(state, frames, rest, obstacles)?;
        let linear = state.velocities.iter().fold(0.0, |m: f64, v| m.max(v.max_abs()));
        let angular = state.theta_rates.iter().fold(0.0, |m: f64, w| m.max(abs(*w)));
        // Angles are weighed at a 1 cm lever arm.
        let moved = linear.max(0.01 * angular) * cfg.dt;
        if stats.converged && stats.newton_iters <= 1 && moved < tol {
            state.velocities.iter_mut().for_each(|v| *v = Vec3::ZERO);
            state.theta_rates.iter_mut().for_each(|w| *w = 0.0);
            return Ok(k + 1);
        }
    }
    state.velocities.iter_mut().for_each(|v| *v = Vec3::ZERO);
    state.theta_rates.iter_mut().for_each(|w| *w = 0.0);
    Ok(max_steps)
}
