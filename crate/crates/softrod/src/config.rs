//! Run configuration file (TOML).
//!
//! Every key is optional; missing keys take the simulator defaults. Timing
//! keys left unset follow the scheme: dt 0.05 s (implicit) or 2e-4 s
//! (explicit), and a control period that keeps 10 Hz / 2 Hz control.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use softrod_core::contact::ContactConfig;
use softrod_core::dynamics::{Scheme, StepperConfig};
use softrod_core::envs::{TaskKind, TaskSpec};
use softrod_core::geometry::RodParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: TaskKind,
    pub scheme: Scheme,
    pub seed: u64,
    pub episodes: usize,
    pub envs: usize,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub gamma: f64,
    /// Overrides the task's episode length (control steps).
    pub episode_length: Option<usize>,

    pub n_nodes: usize,
    pub n_control_points: usize,
    pub length: f64,
    pub radius: f64,
    pub density: f64,
    pub youngs: f64,
    pub poisson: f64,

    pub dt: Option<f64>,
    pub control_period: Option<usize>,
    pub max_newton_iters: usize,
    pub max_newton_iters_contact: usize,
    pub newton_tol: f64,
    pub damping_coeff: f64,
    pub line_search: Option<bool>,
    pub delta_limit: f64,
    pub kappa_bound: f64,

    /// IMC stiffness (implicit scheme).
    pub contact_k: f64,
    /// IMC distance tolerance δ (m).
    pub contact_delta: f64,
    /// Penalty stiffness (explicit scheme, N/m).
    pub penalty_k: f64,
    /// Penalty damping (N·s/m).
    pub penalty_damping: f64,

    /// Control steps timed per bench measurement.
    pub bench_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rod = RodParams::default();
        let imp = StepperConfig::implicit();
        let imc = ContactConfig::imc();
        let pen = ContactConfig::penalty();
        RunConfig {
            task: TaskKind::FollowTarget,
            scheme: Scheme::Implicit,
            seed: 0,
            episodes: 1,
            envs: 8,
            workers: 8,
            out: None,
            gamma: 0.99,
            episode_length: None,
            n_nodes: rod.n_nodes,
            n_control_points: 5,
            length: rod.length,
            radius: rod.radius,
            density: rod.density,
            youngs: rod.youngs,
            poisson: rod.poisson,
            dt: None,
            control_period: None,
            max_newton_iters: imp.max_newton_iters,
            max_newton_iters_contact: imp.max_newton_iters_contact,
            newton_tol: imp.newton_tol,
            damping_coeff: imp.damping_coeff,
            line_search: None,
            delta_limit: 0.1,
            kappa_bound: 2.0,
            contact_k: imc.stiffness,
            contact_delta: imc.delta,
            penalty_k: pen.stiffness,
            penalty_damping: pen.damping,
            bench_steps: 10,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Same run with every scheme-dependent default written out.
    pub fn effective(&self) -> anyhow::Result<Self> {
        let spec = self.task_spec()?;
        Ok(RunConfig {
            dt: Some(spec.stepper.dt),
            control_period: Some(spec.control.control_period),
            line_search: Some(spec.stepper.line_search),
            episode_length: Some(spec.episode_length),
            ..self.clone()
        })
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn with_task(&self, task: TaskKind) -> Self {
        RunConfig { task, ..self.clone() }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        RunConfig { scheme, ..self.clone() }
    }

    /// Environment spec for `self.task` under `self.scheme`.
    pub fn task_spec(&self) -> anyhow::Result<TaskSpec> {
        let mut spec = TaskSpec::new(self.task, self.scheme);
        spec.rod = RodParams {
            length: self.length,
            radius: self.radius,
            density: self.density,
            youngs: self.youngs,
            poisson: self.poisson,
            n_nodes: self.n_nodes,
        };
        let st = &mut spec.stepper;
        let default_dt = st.dt;
        st.dt = self.dt.unwrap_or(default_dt);
        st.max_newton_iters = self.max_newton_iters;
        st.max_newton_iters_contact = self.max_newton_iters_contact;
        st.newton_tol = self.newton_tol;
        st.damping_coeff = self.damping_coeff;
        if let Some(ls) = self.line_search {
            st.line_search = ls;
        }
        st.contact = match self.scheme {
            Scheme::Implicit => ContactConfig { stiffness: self.contact_k, delta: self.contact_delta, ..st.contact },
            Scheme::Explicit => {
                ContactConfig { stiffness: self.penalty_k, damping: self.penalty_damping, ..st.contact }
            }
        };
        // Keep the control frequency when only dt changes.
        let period = (1.0 / (self.task.control_frequency() * st.dt)).round().max(1.0) as usize;
        spec.control.control_period = self.control_period.unwrap_or(period);
        spec.control.n_control_points = self.n_control_points;
        spec.control.delta_limit = self.delta_limit;
        spec.control.kappa_bound = self.kappa_bound;
        if let Some(len) = self.episode_length {
            spec.episode_length = len;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let spec = cfg.task_spec().unwrap();
        assert_eq!(spec.control.control_period, 2);
        assert_eq!(spec.stepper.dt, 0.05);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("n_nodez = 21").is_err());
    }

    #[test]
    fn explicit_scheme_defaults() {
        let cfg = RunConfig::parse("scheme = \"explicit\"\ntask = \"obstacles2d_tight\"").unwrap();
        let spec = cfg.task_spec().unwrap();
        assert_eq!(spec.stepper.dt, 2e-4);
        assert_eq!(spec.control.control_period, 2500);
        assert_eq!(spec.stepper.contact.stiffness, 1.6e5);
    }

    #[test]
    fn effective_config_round_trips() {
        let cfg = RunConfig::parse("task = \"ik4d\"\nseed = 4\ncontact_delta = 0.004").unwrap();
        let eff = cfg.effective().unwrap();
        let again = RunConfig::parse(&eff.to_toml().unwrap()).unwrap();
        assert_eq!(again, eff);
        assert_eq!(again.task_spec().unwrap(), cfg.task_spec().unwrap());
    }
}
