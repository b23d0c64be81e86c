//! Delta natural curvature and twist actuation.
//!
//! A policy action moves a few control points; each control point spreads its
//! increment over the interior nodes of its Voronoi region with a triangular
//! weight, and the accumulated targets are ramped linearly across the
//! simulation substeps of a control period.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RestConfig;
use crate::math::{abs, round};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// κ̄1 only (bending in the x–z plane).
    Bend2d,
    /// κ̄1 and κ̄2.
    Bend3d,
    /// κ̄1, κ̄2 and ψ̄.
    Bend3dTwist,
}

impl ControlMode {
    pub fn blocks(self) -> usize {
        match self {
            ControlMode::Bend2d => 1,
            ControlMode::Bend3d => 2,
            ControlMode::Bend3dTwist => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub n_control_points: usize,
    pub mode: ControlMode,
    /// Largest per-step increment of one control point.
    pub delta_limit: f64,
    /// Component-wise bound on accumulated κ̄ and ψ̄.
    pub kappa_bound: f64,
    /// Simulation substeps per control step.
    pub control_period: usize,
}

impl ControlConfig {
    pub fn new(mode: ControlMode, control_period: usize) -> Self {
        ControlConfig { n_control_points: 5, mode, delta_limit: 0.1, kappa_bound: 2.0, control_period }
    }

    /// Action layout: `[κ̄1 × C, κ̄2 × C, ψ̄ × C]`, truncated to the mode.
    pub fn action_dim(&self) -> usize {
        self.n_control_points * self.mode.blocks()
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if self.n_control_points == 0 || self.n_control_points > n_nodes.saturating_sub(2) {
            return Err(Error::param("n_control_points", "must lie in 1 ..= number of interior nodes"));
        }
        if self.control_period == 0 {
            return Err(Error::param("control_period", "must be at least 1"));
        }
        if !(self.delta_limit > 0.0 && self.kappa_bound > 0.0) {
            return Err(Error::param("delta_limit", "limits must be positive"));
        }
        Ok(())
    }
}

/// Node indices of `c` roughly equidistant control points: the rounded centres
/// of `c` equal bins over the interior nodes `1 ..= n_nodes - 2`.
pub fn control_points(n_nodes: usize, c: usize) -> Vec<usize> {
    let m = (n_nodes - 2) as f64;
    (0..c).map(|k| round(0.5 + (k as f64 + 0.5) * m / c as f64) as usize).collect()
}

/// Per control point, the `(interior index, weight)` pairs of its region.
/// Interior index `i` refers to node `i + 1`. Weights in a region sum to 1.
pub fn region_weights(n_nodes: usize, points: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let mut regions: Vec<Vec<usize>> = vec![Vec::new(); points.len()];
    for node in 1..n_nodes - 1 {
        // Nearest control point; ties go to the one nearer the base.
        let k = (0..points.len()).min_by_key(|&k| (points[k].abs_diff(node), k)).expect("at least one control point");
        regions[k].push(node);
    }
    regions
        .iter()
        .zip(points)
        .map(|(nodes, &p)| {
            let reach = nodes.iter().map(|n| n.abs_diff(p)).max().unwrap_or(0) as f64 + 1.0;
            let raw: Vec<f64> = nodes.iter().map(|n| 1.0 - n.abs_diff(p) as f64 / reach).collect();
            let total: f64 = raw.iter().sum();
            nodes.iter().zip(raw).map(|(n, w)| (n - 1, w / total)).collect()
        })
        .collect()
}

/// Accumulated natural curvature / twist targets for one rod.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuationState {
    pub kappa: Vec<[f64; 2]>,
    pub twist: Vec<f64>,
    pub prev_kappa: Vec<[f64; 2]>,
    pub prev_twist: Vec<f64>,
    pub substep: usize,
    config: ControlConfig,
    points: Vec<usize>,
    weights: Vec<Vec<(usize, f64)>>,
}

/// Outcome of applying one action.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionReport {
    /// Some component lay outside [-1, 1] and was clamped.
    pub clamped: bool,
}

impl ActuationState {
    /// Zero targets for a rod with `n_nodes` nodes.
    pub fn new(config: ControlConfig, n_nodes: usize) -> Result<Self> {
        config.validate(n_nodes)?;
        let points = control_points(n_nodes, config.n_control_points);
        let weights = region_weights(n_nodes, &points);
        let m = n_nodes - 2;
        Ok(ActuationState {
            kappa: vec![[0.0; 2]; m],
            twist: vec![0.0; m],
            prev_kappa: vec![[0.0; 2]; m],
            prev_twist: vec![0.0; m],
            substep: 0,
            config,
            points,
            weights,
        })
    }

    pub fn config(&self) -> &ControlConfig {
        &self.config
    }

    /// Control point node indices.
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    pub fn reset(&mut self) {
        self.kappa.iter_mut().for_each(|k| *k = [0.0; 2]);
        self.twist.iter_mut().for_each(|t| *t = 0.0);
        self.prev_kappa.clone_from(&self.kappa);
        self.prev_twist.clone_from(&self.twist);
        self.substep = 0;
    }

    pub fn apply_action(&mut self, action: &[f64]) -> Result<ActionReport> {
        let dim = self.config.action_dim();
        if action.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: action.len() });
        }
        if action.iter().any(|a| a.is_nan()) {
            return Err(Error::param("action", "NaN component"));
        }
        self.prev_kappa.clone_from(&self.kappa);
        self.prev_twist.clone_from(&self.twist);
        self.substep = 0;
        let mut report = ActionReport::default();
        let c = self.config.n_control_points;
        let bound = self.config.kappa_bound;
        for (idx, &raw) in action.iter().enumerate() {
            let a = raw.clamp(-1.0, 1.0);
            report.clamped |= a != raw;
            if a == 0.0 {
                continue;
            }
            let (block, k) = (idx / c, idx % c);
            let delta = a * self.config.delta_limit;
            for &(i, w) in &self.weights[k] {
                let target = match block {
                    0 => &mut self.kappa[i][0],
                    1 => &mut self.kappa[i][1],
                    _ => &mut self.twist[i],
                };
                *target = (*target + w * delta).clamp(-bound, bound);
            }
        }
        Ok(report)
    }

    /// Targets for substep `s`: `prev + (s + 1) / period · (new - prev)`.
    pub fn interp_targets(&self, substep: usize) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
        let mut k = self.kappa.clone();
        let mut t = self.twist.clone();
        self.interp_into(substep, &mut k, &mut t)?;
        Ok((k, t))
    }

    pub fn interp_into(&self, substep: usize, kappa: &mut [[f64; 2]], twist: &mut [f64]) -> Result<()> {
        let period = self.config.control_period;
        if substep >= period {
            return Err(Error::IndexOutOfRange { index: substep, len: period });
        }
        if substep + 1 == period {
            kappa.copy_from_slice(&self.kappa);
            twist.copy_from_slice(&self.twist);
            return Ok(());
        }
        let f = (substep + 1) as f64 / period as f64;
        for i in 0..self.kappa.len() {
            for c in 0..2 {
                let p = self.prev_kappa[i][c];
                kappa[i][c] = p + f * (self.kappa[i][c] - p);
            }
            let p = self.prev_twist[i];
            twist[i] = p + f * (self.twist[i] - p);
        }
        Ok(())
    }

    /// Writes the interpolated targets for `substep` into `rest`.
    pub fn apply_to_rest(&self, substep: usize, rest: &mut RestConfig) -> Result<()> {
        self.interp_into(substep, &mut rest.nat_curvature, &mut rest.nat_twist)
    }

    /// Targets normalized by the bound, in action-block order per control point.
    pub fn observe(&self, out: &mut Vec<f64>) {
        let bound = self.config.kappa_bound;
        for block in 0..self.config.mode.blocks() {
            for &p in &self.points {
                let v = match block {
                    0 => self.kappa[p - 1][0],
                    1 => self.kappa[p - 1][1],
                    _ => self.twist[p - 1],
                };
                out.push(v / bound);
            }
        }
    }

    /// Largest accumulated component magnitude.
    pub fn max_abs(&self) -> f64 {
        self.kappa.iter().flat_map(|k| k.iter()).chain(&self.twist).fold(0.0, |m, v| m.max(abs(*v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_points_for_21_nodes() {
        assert_eq!(control_points(21, 5), vec![2, 6, 10, 14, 18]);
    }

    #[test]
    fn regions_cover_interior_once() {
        let pts = control_points(21, 5);
        let w = region_weights(21, &pts);
        let mut seen: Vec<usize> = w.iter().flatten().map(|(i, _)| *i).collect();
        seen.sort();
        assert_eq!(seen, (0..19).collect::<Vec<_>>());
        for r in &w {
            let s: f64 = r.iter().map(|(_, x)| x).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn action_dimensions_follow_mode() {
        let n = 21;
        for (mode, dim) in [(ControlMode::Bend2d, 5), (ControlMode::Bend3d, 10), (ControlMode::Bend3dTwist, 15)] {
            let mut a = ActuationState::new(ControlConfig::new(mode, 2), n).unwrap();
            assert!(a.apply_action(&vec![0.0; dim]).is_ok());
            assert!(matches!(a.apply_action(&vec![0.0; dim + 1]), Err(Error::DimensionMismatch { .. })));
        }
    }

    #[test]
    fn zero_action_keeps_targets() {
        let mut a = ActuationState::new(ControlConfig::new(ControlMode::Bend3d, 2), 21).unwrap();
        a.apply_action(&[0.3; 10]).unwrap();
        let before = a.kappa.clone();
        a.apply_action(&[0.0; 10]).unwrap();
        assert_eq!(a.kappa, before);
    }

    #[test]
    fn single_point_increment_sums_to_delta() {
        let cfg = ControlConfig { n_control_points: 1, ..ControlConfig::new(ControlMode::Bend2d, 2) };
        let mut a = ActuationState::new(cfg, 21).unwrap();
        a.apply_action(&[1.0]).unwrap();
        let s: f64 = a.kappa.iter().map(|k| k[0]).sum();
        assert!((s - 0.1).abs() < 1e-15);
        assert!(a.kappa.iter().all(|k| k[1] == 0.0));
    }

    #[test]
    fn out_of_range_action_is_clamped_and_flagged() {
        let mut a = ActuationState::new(ControlConfig::new(ControlMode::Bend2d, 2), 21).unwrap();
        assert!(a.apply_action(&[3.0, 0.0, 0.0, 0.0, 0.0]).unwrap().clamped);
        let s: f64 = a.kappa.iter().map(|k| k[0]).sum();
        assert!((s - 0.1).abs() < 1e-15);
    }

    #[test]
    fn interpolation_endpoints() {
        let cfg = ControlConfig { n_control_points: 1, ..ControlConfig::new(ControlMode::Bend2d, 10) };
        let mut a = ActuationState::new(cfg, 3).unwrap();
        a.apply_action(&[1.0]).unwrap();
        a.apply_action(&[1.0]).unwrap();
        // prev = 0.1, new = 0.2 at the single interior node
        let (k, _) = a.interp_targets(4).unwrap();
        assert!((k[0][0] - 0.15).abs() < 1e-15);
        let (k, _) = a.interp_targets(9).unwrap();
        assert_eq!(k[0][0], a.kappa[0][0]);
        assert!(a.interp_targets(10).is_err());
    }
}
