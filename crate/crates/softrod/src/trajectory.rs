//! Line-delimited JSON trajectory records, one per control step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use softrod_core::envs::{Environment, StepInfo, StepResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordInfo {
    #[serde(flatten)]
    pub step: StepInfo,
    pub terminated: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Simulated time at the end of the control step (s).
    pub t: f64,
    /// Node positions (m), base to tip.
    pub node_positions: Vec<[f64; 3]>,
    /// Per interior node: [κ̄1, κ̄2, ψ̄] in force at the end of the step.
    pub kappa_bar: Vec<[f64; 3]>,
    /// Action as given (before clamping).
    pub action: Vec<f64>,
    pub reward: f64,
    pub info: RecordInfo,
}

impl Record {
    /// Record of the step `env` just took.
    pub fn capture(env: &Environment, action: &[f64], result: &StepResult) -> Self {
        let rest = env.rest();
        Record {
            t: env.time(),
            node_positions: env.state().positions.iter().map(|p| p.to_array()).collect(),
            kappa_bar: rest.nat_curvature.iter().zip(&rest.nat_twist).map(|(k, &psi)| [k[0], k[1], psi]).collect(),
            action: action.to_vec(),
            reward: result.reward,
            info: RecordInfo { step: result.info.clone(), terminated: result.terminated, truncated: result.truncated },
        }
    }
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[Record]) -> anyhow::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> anyhow::Result<Vec<Record>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(records)
}
