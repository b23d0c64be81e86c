//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use softrod_core::dynamics::Scheme;
use softrod_core::envs::TaskKind;
use softrod_core::validation::{validate, Tolerances, ValidateOptions};

use crate::config::RunConfig;
use crate::policy::PolicySpec;
use crate::{bench, compare, rollout};

#[derive(Debug, Parser)]
#[command(name = "softrod", version, about = "Soft-rod simulator: validation, rollouts, benchmarks, scheme comparison")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Implicit,
    Explicit,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Implicit => Scheme::Implicit,
            SchemeArg::Explicit => Scheme::Explicit,
        }
    }
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Clone, Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// follow_target, ik4d, obstacles2d_tight or obstacles3d_random.
    #[arg(long, global = true)]
    pub task: Option<TaskKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub envs: Option<usize>,
    /// Worker threads (capped by SOFTROD_THREADS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.task {
            cfg.task = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.envs {
            cfg.envs = e;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.scheme {
            cfg.scheme = s.into();
        }
        if let Some(e) = self.episodes {
            cfg.episodes = e;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.task_spec()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-difference, frame, solver and contact checks.
    Validate {
        /// Override a tolerance, e.g. `--tol elastic_gradient=1e-7`.
        #[arg(long = "tol", value_name = "NAME=VALUE")]
        tol: Vec<String>,
        /// Random states per derivative check.
        #[arg(long)]
        states: Option<usize>,
    },
    /// Per-episode trajectories (JSONL, one file per episode under --out) and returns.
    Rollout {
        /// zero, random, planner, or a JSON action file.
        #[arg(long, default_value = "zero")]
        policy: PolicySpec,
    },
    /// Vector-step wall time, implicit vs explicit, with and without contact (CSV).
    Bench {
        /// Vector steps timed per row.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Implicit vs explicit on identical inputs (JSON report).
    Compare,
    /// Print the effective configuration as TOML.
    Config,
}

/// Applies `NAME=VALUE` overrides to `base`.
pub fn tolerances_with(base: &Tolerances, overrides: &[String]) -> anyhow::Result<Tolerances> {
    let mut table = toml::Table::try_from(base)?;
    for o in overrides {
        let (name, value) = o.split_once('=').with_context(|| format!("expected NAME=VALUE, got `{o}`"))?;
        let value: f64 = value.trim().parse().with_context(|| format!("bad tolerance value in `{o}`"))?;
        let name = name.trim();
        anyhow::ensure!(table.contains_key(name), "unknown tolerance `{name}`");
        table.insert(name.to_string(), toml::Value::Float(value));
    }
    Ok(table.try_into()?)
}

/// Runs the command, writing its report to `out`. Returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Validate { tol, states } => {
            let mut opts = ValidateOptions::default();
            opts.tolerances = tolerances_with(&opts.tolerances, tol)?;
            if let Some(s) = states {
                opts.states = *s;
            }
            let report = validate(&opts)?;
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                writeln!(out, "{status} {:<28} max_error={:.3e} tol={:.1e}", c.name, c.max_error, c.tolerance)?;
            }
            let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                writeln!(out, "all {} checks passed", report.checks.len())?;
                Ok(0)
            } else {
                writeln!(out, "failed: {}", failed.join(", "))?;
                Ok(1)
            }
        }
        Command::Rollout { policy } => {
            let cfg = cli.run.resolve()?;
            let episodes = rollout::rollout(&cfg, policy)?;
            if let Some(dir) = &cfg.out {
                rollout::write_episodes(dir, &episodes)?;
                std::fs::write(dir.join("config.toml"), cfg.effective()?.to_toml()?)?;
            }
            writeln!(out, "{}", rollout::SUMMARY_HEADER)?;
            for ep in &episodes {
                writeln!(out, "{}", rollout::summary_line(&ep.summary))?;
            }
            Ok(0)
        }
        Command::Bench { steps } => {
            let mut cfg = cli.run.resolve()?;
            if let Some(s) = steps {
                cfg.bench_steps = *s;
            }
            let rows = bench::bench(&cfg)?;
            writeln!(out, "{}", bench::CSV_HEADER)?;
            for r in &rows {
                writeln!(out, "{}", r.csv())?;
                eprintln!(
                    "{:?} {}: {} substeps/control step, {:.3} sim s per wall s, {} workers, {} vector steps",
                    r.scheme,
                    r.task,
                    r.substeps_per_control_step,
                    r.sim_seconds_per_wall_second,
                    r.workers,
                    r.vector_steps
                );
            }
            Ok(0)
        }
        Command::Compare => {
            let cfg = cli.run.resolve()?;
            let report = compare::compare(&cfg)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
        Command::Config => {
            let cfg = cli.run.resolve()?;
            write!(out, "{}", cfg.effective()?.to_toml()?)?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides() {
        let base = Tolerances::default();
        let t = tolerances_with(&base, &["elastic_gradient=1e-7".into()]).unwrap();
        assert_eq!(t.elastic_gradient, 1e-7);
        assert_eq!(t.contact_hessian, base.contact_hessian);
        assert!(tolerances_with(&base, &["nope=1".into()]).is_err());
        assert!(tolerances_with(&base, &["elastic_gradient".into()]).is_err());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::parse_from(["softrod", "--task", "ik4d", "--seed", "9", "--scheme", "explicit", "config"]);
        let cfg = cli.run.resolve().unwrap();
        assert_eq!(cfg.task, TaskKind::Ik4d);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scheme, Scheme::Explicit);
    }
}
