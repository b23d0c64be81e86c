//! Discrete centerline representation: degrees of freedom, tangents,
//! reference/material frames and discrete curvature.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{atan2, cos, round, sin, Vec3, PI};

/// Edges shorter than this are treated as degenerate.
pub const MIN_EDGE_LENGTH: f64 = 1e-12;
/// `1 + a·b` below this threshold means `a` and `b` are antiparallel.
pub const ANTIPARALLEL_TOL: f64 = 1e-9;

#[inline]
pub const fn node_dof(i: usize) -> usize {
    4 * i
}

#[inline]
pub const fn theta_dof(edge: usize) -> usize {
    4 * edge + 3
}

#[inline]
pub const fn dof_count(n_nodes: usize) -> usize {
    4 * n_nodes - 1
}

/// Full configuration and velocity of one rod.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodState {
    pub positions: Vec<Vec3>,
    pub thetas: Vec<f64>,
    pub velocities: Vec<Vec3>,
    pub theta_rates: Vec<f64>,
}

impl RodState {
    pub fn at_rest(positions: Vec<Vec3>) -> Self {
        let n = positions.len();
        RodState {
            positions,
            thetas: vec![0.0; n.saturating_sub(1)],
            velocities: vec![Vec3::ZERO; n],
            theta_rates: vec![0.0; n.saturating_sub(1)],
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn n_dofs(&self) -> usize {
        dof_count(self.n_nodes())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if n < 3 {
            return Err(Error::param("positions", format!("need at least 3 nodes, got {n}")));
        }
        if self.velocities.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.velocities.len() });
        }
        for len in [self.thetas.len(), self.theta_rates.len()] {
            if len != n - 1 {
                return Err(Error::DimensionMismatch { expected: n - 1, got: len });
            }
        }
        let finite = self.positions.iter().chain(&self.velocities).all(|v| v.is_finite())
            && self.thetas.iter().chain(&self.theta_rates).all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("state", "non-finite entry"));
        }
        Ok(())
    }

    /// Interleaved generalized coordinates `[q0, θ0, q1, ..., θ(N-2), q(N-1)]`.
    pub fn dofs(&self) -> Vec<f64> {
        pack(&self.positions, &self.thetas)
    }

    /// Interleaved generalized velocities.
    pub fn velocity_dofs(&self) -> Vec<f64> {
        pack(&self.velocities, &self.theta_rates)
    }

    pub fn set_dofs(&mut self, q: &[f64]) {
        unpack_into(q, &mut self.positions, &mut self.thetas);
    }

    pub fn set_velocity_dofs(&mut self, v: &[f64]) {
        unpack_into(v, &mut self.velocities, &mut self.theta_rates);
    }

    pub fn tip(&self) -> Vec3 {
        *self.positions.last().expect("rod has nodes")
    }
}

pub fn pack(nodes: &[Vec3], edges: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut q = vec![0.0; dof_count(n)];
    for (i, p) in nodes.iter().enumerate() {
        q[4 * i] = p.x;
        q[4 * i + 1] = p.y;
        q[4 * i + 2] = p.z;
    }
    for (i, t) in edges.iter().enumerate() {
        q[4 * i + 3] = *t;
    }
    q
}

pub fn unpack(q: &[f64]) -> (Vec<Vec3>, Vec<f64>) {
    let n = (q.len() + 1) / 4;
    let mut nodes = vec![Vec3::ZERO; n];
    let mut edges = vec![0.0; n - 1];
    unpack_into(q, &mut nodes, &mut edges);
    (nodes, edges)
}

pub fn unpack_into(q: &[f64], nodes: &mut [Vec3], edges: &mut [f64]) {
    for (i, p) in nodes.iter_mut().enumerate() {
        *p = Vec3::new(q[4 * i], q[4 * i + 1], q[4 * i + 2]);
    }
    for (i, t) in edges.iter_mut().enumerate() {
        *t = q[4 * i + 3];
    }
}

/// Geometric and material parameters of a uniform circular rod.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RodParams {
    /// m
    pub length: f64,
    /// m
    pub radius: f64,
    /// kg/m³
    pub density: f64,
    /// Pa
    pub youngs: f64,
    pub poisson: f64,
    pub n_nodes: usize,
}

impl Default for RodParams {
    fn default() -> Self {
        RodParams { length: 1.0, radius: 0.05, density: 1000.0, youngs: 1.0e7, poisson: 0.5, n_nodes: 21 }
    }
}

/// Rest-state quantities and stiffnesses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestConfig {
    pub rest_lengths: Vec<f64>,
    /// One entry per interior node `1 ..= N-2`.
    pub voronoi_lengths: Vec<f64>,
    /// Natural integrated curvature `[κ̄1, κ̄2]` per interior node.
    pub nat_curvature: Vec<[f64; 2]>,
    /// Natural twist per interior node.
    pub nat_twist: Vec<f64>,
    /// N
    pub stretch_stiffness: f64,
    /// N·m²
    pub bend_stiffness: f64,
    /// N·m²
    pub twist_stiffness: f64,
    pub lumped_masses: Vec<f64>,
    pub theta_inertias: Vec<f64>,
    /// Cross-section radius, used by contact.
    pub radius: f64,
}

impl RestConfig {
    pub fn n_nodes(&self) -> usize {
        self.lumped_masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.lumped_masses.iter().sum()
    }

    /// Diagonal of the lumped mass matrix in dof order.
    pub fn mass_diagonal(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let mut m = vec![0.0; dof_count(n)];
        for (i, mi) in self.lumped_masses.iter().enumerate() {
            m[4 * i] = *mi;
            m[4 * i + 1] = *mi;
            m[4 * i + 2] = *mi;
        }
        for (i, ji) in self.theta_inertias.iter().enumerate() {
            m[4 * i + 3] = *ji;
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if n < 3 {
            return Err(Error::param("n_nodes", "need at least 3 nodes"));
        }
        let sizes = [
            (self.rest_lengths.len(), n - 1),
            (self.theta_inertias.len(), n - 1),
            (self.voronoi_lengths.len(), n - 2),
            (self.nat_curvature.len(), n - 2),
            (self.nat_twist.len(), n - 2),
        ];
        for (got, expected) in sizes {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        let positive = self
            .rest_lengths
            .iter()
            .chain(&self.voronoi_lengths)
            .chain(&self.lumped_masses)
            .chain(&self.theta_inertias)
            .chain([&self.stretch_stiffness, &self.bend_stiffness, &self.twist_stiffness])
            .all(|v| *v > 0.0 && v.is_finite());
        if !positive {
            return Err(Error::param("rest", "lengths, stiffnesses and masses must be positive"));
        }
        Ok(())
    }

    /// Resets natural curvature and twist to a straight, untwisted rod.
    pub fn straighten(&mut self) {
        self.nat_curvature.iter_mut().for_each(|k| *k = [0.0; 2]);
        self.nat_twist.iter_mut().for_each(|t| *t = 0.0);
    }
}

/// Per-edge reference and material frames plus reference twists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSet {
    pub ref_d1: Vec<Vec3>,
    pub ref_d2: Vec<Vec3>,
    pub tangents: Vec<Vec3>,
    pub mat_m1: Vec<Vec3>,
    pub mat_m2: Vec<Vec3>,
    /// Reference twist `β` per interior node.
    pub ref_twists: Vec<f64>,
}

impl FrameSet {
    pub fn n_edges(&self) -> usize {
        self.tangents.len()
    }

    /// Frames obtained by space-parallel transport along the rod, starting from
    /// a deterministic first reference direction.
    pub fn from_tangents(tangents: &[Vec3], thetas: &[f64]) -> Result<Self> {
        let ne = tangents.len();
        let mut d1 = Vec::with_capacity(ne);
        d1.push(initial_director(tangents[0]));
        for i in 1..ne {
            let d = parallel_transport(d1[i - 1], tangents[i - 1], tangents[i])
                .ok_or(Error::AntiparallelTangents { edge: i })?;
            d1.push(orthonormalize(d, tangents[i]));
        }
        let d2 = tangents.iter().zip(&d1).map(|(t, d)| t.cross(*d)).collect();
        let mut frames = FrameSet {
            ref_d1: d1,
            ref_d2: d2,
            tangents: tangents.to_vec(),
            mat_m1: vec![Vec3::ZERO; ne],
            mat_m2: vec![Vec3::ZERO; ne],
            ref_twists: vec![0.0; ne.saturating_sub(1)],
        };
        frames.update_reference_twists(None)?;
        frames.update_material(thetas);
        Ok(frames)
    }

    /// Recomputes `m1 = d1 cos θ + d2 sin θ`, `m2 = -d1 sin θ + d2 cos θ`.
    pub fn update_material(&mut self, thetas: &[f64]) {
        for i in 0..self.n_edges() {
            let (s, c) = (sin(thetas[i]), cos(thetas[i]));
            let (d1, d2) = (self.ref_d1[i], self.ref_d2[i]);
            self.mat_m1[i] = d1 * c + d2 * s;
            self.mat_m2[i] = d2 * c - d1 * s;
        }
    }

    /// Recomputes `β` from the reference frames. With `previous`, each value is
    /// unwrapped by multiples of 2π to stay closest to its previous value.
    fn update_reference_twists(&mut self, previous: Option<&[f64]>) -> Result<()> {
        for i in 1..self.n_edges() {
            let (ta, tb) = (self.tangents[i - 1], self.tangents[i]);
            let u = parallel_transport(self.ref_d1[i - 1], ta, tb).ok_or(Error::AntiparallelTangents { edge: i })?;
            let mut beta = signed_angle(u, self.ref_d1[i], tb);
            if let Some(prev) = previous {
                let p = prev[i - 1];
                beta += 2.0 * PI * round((p - beta) / (2.0 * PI));
            }
            self.ref_twists[i - 1] = beta;
        }
        Ok(())
    }
}

/// First reference director: `t × ĵ` normalized, or `t × k̂` when `t ∥ ĵ`.
pub fn initial_director(t: Vec3) -> Vec3 {
    let c = t.cross(Vec3::Y);
    if c.norm() > 1e-6 {
        c.normalized()
    } else {
        t.cross(Vec3::Z).normalized()
    }
}

fn orthonormalize(d: Vec3, t: Vec3) -> Vec3 {
    (d - t * d.dot(t)).normalized()
}

/// Minimal-rotation transport of `d` (orthogonal to unit `from`) onto unit `to`.
/// `None` when `from` and `to` are antiparallel.
#[inline]
pub fn parallel_transport(d: Vec3, from: Vec3, to: Vec3) -> Option<Vec3> {
    let denom = 1.0 + from.dot(to);
    if denom < ANTIPARALLEL_TOL {
        return None;
    }
    Some(d - (from + to) * (d.dot(to) / denom))
}

/// Angle from `u` to `v` measured about `axis`, in `(-π, π]`.
#[inline]
pub fn signed_angle(u: Vec3, v: Vec3, axis: Vec3) -> f64 {
    atan2(u.cross(v).dot(axis), u.dot(v))
}

/// Builds a straight rod along +x from the origin.
pub fn build_rod(params: &RodParams) -> Result<(RodState, RestConfig, FrameSet)> {
    let RodParams { length, radius, density, youngs, poisson, n_nodes } = *params;
    if n_nodes < 3 {
        return Err(Error::param("n_nodes", format!("need at least 3 nodes, got {n_nodes}")));
    }
    for (name, v) in [("length", length), ("radius", radius), ("density", density), ("youngs", youngs)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive and finite, got {v}")));
        }
    }
    if !(0.0..0.5 + 1e-9).contains(&poisson) {
        return Err(Error::param("poisson", format!("must lie in [0, 0.5], got {poisson}")));
    }
    let n_edges = n_nodes - 1;
    let seg = length / n_edges as f64;
    let area = PI * radius * radius;
    let inertia = PI * (radius * radius) * (radius * radius) / 4.0;
    let polar = PI * (radius * radius) * (radius * radius) / 2.0;
    let shear = youngs / (2.0 * (1.0 + poisson));

    let positions: Vec<Vec3> = (0..n_nodes).map(|i| Vec3::new(i as f64 * seg, 0.0, 0.0)).collect();
    let rest_lengths = vec![seg; n_edges];
    let voronoi_lengths = (1..n_nodes - 1).map(|i| 0.5 * (rest_lengths[i - 1] + rest_lengths[i])).collect();
    let lumped_masses = (0..n_nodes)
        .map(|i| {
            let left = if i > 0 { rest_lengths[i - 1] } else { 0.0 };
            let right = if i < n_edges { rest_lengths[i] } else { 0.0 };
            density * area * 0.5 * (left + right)
        })
        .collect();
    let theta_inertias = rest_lengths.iter().map(|l| density * polar * l).collect();

    let rest = RestConfig {
        rest_lengths,
        voronoi_lengths,
        nat_curvature: vec![[0.0; 2]; n_nodes - 2],
        nat_twist: vec![0.0; n_nodes - 2],
        stretch_stiffness: youngs * area,
        bend_stiffness: youngs * inertia,
        twist_stiffness: shear * polar,
        lumped_masses,
        theta_inertias,
        radius,
    };
    let state = RodState::at_rest(positions);
    let tangents = compute_tangents(&state)?;
    let frames = FrameSet::from_tangents(&tangents, &state.thetas)?;
    Ok((state, rest, frames))
}

pub fn compute_tangents(state: &RodState) -> Result<Vec<Vec3>> {
    let mut out = Vec::with_capacity(state.n_nodes().saturating_sub(1));
    tangents_into(&state.positions, &mut out)?;
    Ok(out)
}

pub(crate) fn tangents_into(positions: &[Vec3], out: &mut Vec<Vec3>) -> Result<()> {
    out.clear();
    for (i, w) in positions.windows(2).enumerate() {
        let e = w[1] - w[0];
        let len = e.norm();
        if !(len > MIN_EDGE_LENGTH) {
            return Err(Error::DegenerateEdge { edge: i, length: len });
        }
        out.push(e * (1.0 / len));
    }
    Ok(())
}

/// Transports each reference frame in time from its old tangent to the new one,
/// then refreshes material frames and the reference twists.
pub fn time_parallel_transport(prev: &FrameSet, new_tangents: &[Vec3], thetas: &[f64]) -> Result<FrameSet> {
    let mut out = prev.clone();
    time_parallel_transport_into(prev, new_tangents, thetas, &mut out)?;
    Ok(out)
}

pub(crate) fn time_parallel_transport_into(
    prev: &FrameSet,
    new_tangents: &[Vec3],
    thetas: &[f64],
    out: &mut FrameSet,
) -> Result<()> {
    let ne = prev.n_edges();
    if new_tangents.len() != ne {
        return Err(Error::DimensionMismatch { expected: ne, got: new_tangents.len() });
    }
    out.tangents.clear();
    out.tangents.extend_from_slice(new_tangents);
    out.ref_d1.resize(ne, Vec3::ZERO);
    out.ref_d2.resize(ne, Vec3::ZERO);
    out.mat_m1.resize(ne, Vec3::ZERO);
    out.mat_m2.resize(ne, Vec3::ZERO);
    out.ref_twists.resize(ne - 1, 0.0);
    for i in 0..ne {
        let t = new_tangents[i];
        let d =
            parallel_transport(prev.ref_d1[i], prev.tangents[i], t).ok_or(Error::AntiparallelTangents { edge: i })?;
        let d1 = orthonormalize(d, t);
        out.ref_d1[i] = d1;
        out.ref_d2[i] = t.cross(d1);
    }
    out.update_reference_twists(Some(&prev.ref_twists))?;
    out.update_material(thetas);
    Ok(())
}

/// Curvature binormal `2 t0 × t1 / (1 + t0·t1)`.
#[inline]
pub fn curvature_binormal(t0: Vec3, t1: Vec3, edge: usize) -> Result<Vec3> {
    let chi = 1.0 + t0.dot(t1);
    if chi < ANTIPARALLEL_TOL {
        return Err(Error::AntiparallelTangents { edge });
    }
    Ok(t0.cross(t1) * (2.0 / chi))
}

/// Integrated material curvatures `[κ1, κ2]` at each interior node, with
/// `κ1 = ½ κb·(m2ᵉ + m2ᶠ)` and `κ2 = ½ κb·(m1ᵉ + m1ᶠ)`.
pub fn material_curvatures(frames: &FrameSet) -> Result<Vec<[f64; 2]>> {
    (1..frames.n_edges())
        .map(|i| {
            let kb = curvature_binormal(frames.tangents[i - 1], frames.tangents[i], i)?;
            Ok([
                0.5 * kb.dot(frames.mat_m2[i - 1] + frames.mat_m2[i]),
                0.5 * kb.dot(frames.mat_m1[i - 1] + frames.mat_m1[i]),
            ])
        })
        .collect()
}

/// Integrated twist `θⁱ - θⁱ⁻¹ + βⁱ` at each interior node.
pub fn twists(thetas: &[f64], frames: &FrameSet) -> Vec<f64> {
    (1..thetas.len()).map(|i| thetas[i] - thetas[i - 1] + frames.ref_twists[i - 1]).collect()
}
