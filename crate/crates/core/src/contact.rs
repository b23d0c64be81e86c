//! Rod vs. rigid obstacle contact.
//!
//! `gap` is the surface distance, positive when separated and negative when
//! penetrating. The implicit model uses the smooth energy
//! `k (softplus(-K gap) / K)²` with `K = 15 / δ`; the explicit baseline uses a
//! Heaviside-gated penalty spring with damping and a normal-force balance
//! term.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::banded::SymBandMatrix;
use crate::eigen::project_psd;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus, Vec3};

/// Static rigid obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Obstacle {
    Sphere { center: Vec3, radius: f64 },
    Capsule { a: Vec3, b: Vec3, radius: f64 },
}

impl Obstacle {
    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        let o = Obstacle::Sphere { center, radius };
        o.validate()?;
        Ok(o)
    }

    pub fn capsule(a: Vec3, b: Vec3, radius: f64) -> Result<Self> {
        let o = Obstacle::Capsule { a, b, radius };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius() > 0.0 && self.radius().is_finite()) {
            return Err(Error::param("obstacle.radius", "must be positive"));
        }
        if let Obstacle::Capsule { a, b, .. } = self {
            if !((*b - *a).norm() > 0.0) {
                return Err(Error::param("obstacle", "capsule endpoints must be distinct"));
            }
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        match *self {
            Obstacle::Sphere { radius, .. } | Obstacle::Capsule { radius, .. } => radius,
        }
    }

    /// Core segment; degenerate (both ends equal) for a sphere.
    pub fn segment(&self) -> (Vec3, Vec3) {
        match *self {
            Obstacle::Sphere { center, .. } => (center, center),
            Obstacle::Capsule { a, b, .. } => (a, b),
        }
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        let (a, b) = self.segment();
        let r = Vec3::new(self.radius(), self.radius(), self.radius());
        (a.component_min(b) - r, a.component_max(b) + r)
    }

    /// Signed surface distance from a point.
    pub fn point_gap(&self, p: Vec3) -> f64 {
        let (a, b) = self.segment();
        let w = b - a;
        let ww = w.norm_squared();
        let u = if ww > 0.0 { ((p - a).dot(w) / ww).clamp(0.0, 1.0) } else { 0.0 };
        (p - (a + w * u)).norm() - self.radius()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactModel {
    /// Smooth energy, used by the implicit stepper.
    Imc,
    /// Heaviside-gated spring, used by the explicit stepper.
    Penalty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactConfig {
    /// Energy scale for IMC, N/m for the penalty spring.
    pub stiffness: f64,
    /// Contact distance tolerance δ (m).
    pub delta: f64,
    /// Penalty normal damping (N·s/m).
    pub damping: f64,
    /// Detection distance (m); pairs with a larger gap are ignored.
    pub cutoff: f64,
}

impl ContactConfig {
    pub fn imc() -> Self {
        ContactConfig { stiffness: 1e6, delta: 0.005, damping: 0.0, cutoff: 0.025 }
    }

    pub fn penalty() -> Self {
        ContactConfig { stiffness: 1.6e5, delta: 0.005, damping: 10.0, cutoff: 0.025 }
    }

    /// `K = 15 / δ`.
    pub fn sharpness(&self) -> f64 {
        15.0 / self.delta
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return Err(Error::param("contact.stiffness", "must be positive"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::param("contact.delta", "must be positive"));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::param("contact.damping", "must be non-negative"));
        }
        if !(self.cutoff >= self.delta) {
            return Err(Error::param("contact.cutoff", "must be at least delta"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub edge_index: usize,
    pub obstacle_index: usize,
    /// Closest-point parameters on the rod edge and on the obstacle core segment.
    pub params: [f64; 2],
    pub gap: f64,
    /// Unit normal pointing from the obstacle towards the rod.
    pub normal: Vec3,
    pub rod_point: Vec3,
    pub obstacle_point: Vec3,
    /// Obstacle core segment direction `b - a` (zero for spheres).
    pub obstacle_axis: Vec3,
    pub rod_radius: f64,
    pub obstacle_radius: f64,
}

impl ContactPair {
    pub fn penetration(&self) -> f64 {
        (-self.gap).max(0.0)
    }
}

/// Closest points between segments `p1 + s (q1 - p1)` and `p2 + u (q2 - p2)`.
pub fn closest_segment_params(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> (f64, f64) {
    const EPS: f64 = 1e-18;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(r);
    if a <= EPS && e <= EPS {
        return (0.0, 0.0);
    }
    if a <= EPS {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(r);
    if e <= EPS {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut u = (b * s + f) / e;
    if u < 0.0 {
        u = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if u > 1.0 {
        u = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, u)
}

fn boxes_overlap(lo1: Vec3, hi1: Vec3, lo2: Vec3, hi2: Vec3) -> bool {
    lo1.x <= hi2.x && lo2.x <= hi1.x && lo1.y <= hi2.y && lo2.y <= hi1.y && lo1.z <= hi2.z && lo2.z <= hi1.z
}

/// All edge/obstacle pairs with surface gap below `cutoff`.
pub fn detect(positions: &[Vec3], rod_radius: f64, obstacles: &[Obstacle], cutoff: f64) -> Vec<ContactPair> {
    let mut out = Vec::new();
    detect_into(positions, rod_radius, obstacles, cutoff, &mut out);
    out
}

pub fn detect_into(
    positions: &[Vec3],
    rod_radius: f64,
    obstacles: &[Obstacle],
    cutoff: f64,
    out: &mut Vec<ContactPair>,
) {
    out.clear();
    if obstacles.is_empty() {
        return;
    }
    let pad = rod_radius + cutoff;
    let pad = Vec3::new(pad, pad, pad);
    for (j, w) in positions.windows(2).enumerate() {
        let (x0, x1) = (w[0], w[1]);
        let lo = x0.component_min(x1) - pad;
        let hi = x0.component_max(x1) + pad;
        for (k, obs) in obstacles.iter().enumerate() {
            let (olo, ohi) = obs.aabb();
            if !boxes_overlap(lo, hi, olo, ohi) {
                continue;
            }
            let (a, b) = obs.segment();
            let (s, u) = closest_segment_params(x0, x1, a, b);
            let p = x0 + (x1 - x0) * s;
            let q = a + (b - a) * u;
            let diff = p - q;
            let dist = diff.norm();
            let gap = dist - rod_radius - obs.radius();
            if gap >= cutoff {
                continue;
            }
            let normal = if dist > 1e-14 { diff * (1.0 / dist) } else { fallback_normal(x1 - x0, b - a) };
            out.push(ContactPair {
                edge_index: j,
                obstacle_index: k,
                params: [s, u],
                gap,
                normal,
                rod_point: p,
                obstacle_point: q,
                obstacle_axis: b - a,
                rod_radius,
                obstacle_radius: obs.radius(),
            });
        }
    }
}

fn fallback_normal(edge: Vec3, axis: Vec3) -> Vec3 {
    let c = edge.cross(axis);
    if c.norm() > 1e-12 {
        return c.normalized();
    }
    let c = edge.cross(Vec3::Z);
    if c.norm() > 1e-12 {
        c.normalized()
    } else {
        Vec3::X
    }
}

/// Largest penetration depth over all pairs (0 when none penetrate).
pub fn max_penetration(pairs: &[ContactPair]) -> f64 {
    pairs.iter().fold(0.0, |m, p| m.max(p.penetration()))
}

/// IMC pair energy and its first two derivatives with respect to the gap.
#[inline]
pub fn imc_energy_and_derivs(gap: f64, config: &ContactConfig) -> (f64, f64, f64) {
    let kk = config.sharpness();
    let z = -kk * gap;
    let sp = softplus(z) / kk;
    let sg = sigmoid(z);
    let k = config.stiffness;
    let e = k * sp * sp;
    let de = -2.0 * k * sp * sg;
    let d2e = 2.0 * k * (sg * sg + sp * sg * (1.0 - sg) * kk);
    (e, de, d2e)
}

/// Gap value, gradient and Hessian with respect to the 6 edge-node coordinates
/// `[x_j, x_{j+1}]`, for fixed obstacle geometry.
fn gap_derivatives(x0: Vec3, x1: Vec3, pair: &ContactPair, want_hess: bool) -> (f64, [f64; 6], [[f64; 6]; 6]) {
    let [s, u] = pair.params;
    let e = x1 - x0;
    let w = pair.obstacle_axis;
    let r = pair.rod_point - pair.obstacle_point;
    let d = r.norm().max(1e-14);
    let gap = d - pair.rod_radius - pair.obstacle_radius;

    // φ = ½|r|², r = x0 + s e - (a + u w), minimized over the free parameters.
    let mut gphi = [0.0; 6];
    for k in 0..3 {
        gphi[k] = (1.0 - s) * r[k];
        gphi[3 + k] = s * r[k];
    }
    let mut grad = [0.0; 6];
    for k in 0..6 {
        grad[k] = gphi[k] / d;
    }
    let mut hess = [[0.0; 6]; 6];
    if !want_hess {
        return (gap, grad, hess);
    }

    let coef = [(1.0 - s) * (1.0 - s), (1.0 - s) * s, s * s];
    for k in 0..3 {
        hess[k][k] = coef[0];
        hess[k][3 + k] = coef[1];
        hess[3 + k][k] = coef[1];
        hess[3 + k][3 + k] = coef[2];
    }
    const INTERIOR: f64 = 1e-12;
    let s_free = s > INTERIOR && s < 1.0 - INTERIOR && e.norm_squared() > 0.0;
    let u_free = u > INTERIOR && u < 1.0 - INTERIOR && w.norm_squared() > 0.0;
    let mut b_s = [0.0; 6];
    let mut b_u = [0.0; 6];
    for k in 0..3 {
        b_s[k] = (1.0 - s) * e[k] - r[k];
        b_s[3 + k] = s * e[k] + r[k];
        b_u[k] = -(1.0 - s) * w[k];
        b_u[3 + k] = -s * w[k];
    }
    let a_ss = e.norm_squared();
    let a_uu = w.norm_squared();
    let a_su = -e.dot(w);
    // Schur complement over the free closest-point parameters.
    let mut sub = |b1: &[f64; 6], b2: &[f64; 6], c: f64| {
        for p in 0..6 {
            for q in 0..6 {
                hess[p][q] -= c * b1[p] * b2[q];
            }
        }
    };
    match (s_free, u_free) {
        (true, true) => {
            let det = a_ss * a_uu - a_su * a_su;
            if det > 1e-10 * a_ss * a_uu {
                let (i_ss, i_uu, i_su) = (a_uu / det, a_ss / det, -a_su / det);
                sub(&b_s, &b_s, i_ss);
                sub(&b_u, &b_u, i_uu);
                sub(&b_s, &b_u, i_su);
                sub(&b_u, &b_s, i_su);
            } else {
                // Parallel segments: the sliding parameter is undetermined.
                sub(&b_s, &b_s, 1.0 / a_ss);
            }
        }
        (true, false) => sub(&b_s, &b_s, 1.0 / a_ss),
        (false, true) => sub(&b_u, &b_u, 1.0 / a_uu),
        (false, false) => {}
    }
    // ∇²d = ∇²φ / d - ∇φ ∇φᵀ / d³
    let d3 = d * d * d;
    for p in 0..6 {
        for q in 0..6 {
            hess[p][q] = hess[p][q] / d - gphi[p] * gphi[q] / d3;
        }
    }
    (gap, grad, hess)
}

/// Accumulates IMC energy, gradient and Hessian over detected pairs.
///
/// `pairs` must have been detected at `positions`. With `project`, each pair's
/// 6×6 Hessian is clamped to positive semi-definite.
pub fn imc_accumulate(
    pairs: &[ContactPair],
    positions: &[Vec3],
    config: &ContactConfig,
    mut grad: Option<&mut [f64]>,
    mut hess: Option<&mut SymBandMatrix>,
    project: bool,
) -> f64 {
    let mut energy = 0.0;
    for pair in pairs {
        let j = pair.edge_index;
        let (gap, dg, h) = gap_derivatives(positions[j], positions[j + 1], pair, hess.is_some());
        let (e, de, d2e) = imc_energy_and_derivs(gap, config);
        energy += e;
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..3 {
                g[4 * j + k] += de * dg[k];
                g[4 * j + 4 + k] += de * dg[3 + k];
            }
        }
        if let Some(hm) = hess.as_deref_mut() {
            let mut block = [[0.0; 6]; 6];
            for p in 0..6 {
                for q in 0..6 {
                    block[p][q] = d2e * dg[p] * dg[q] + de * h[p][q];
                }
            }
            if project {
                project_psd(&mut block);
            }
            let dofs = [4 * j, 4 * j + 1, 4 * j + 2, 4 * j + 4, 4 * j + 5, 4 * j + 6];
            hm.add_block(&dofs, &block);
        }
    }
    energy
}

/// IMC energy, gradient and Hessian as a standalone evaluation.
pub fn imc_force(pairs: &[ContactPair], positions: &[Vec3], config: &ContactConfig) -> (f64, Vec<f64>, SymBandMatrix) {
    let n = positions.len();
    let mut g = alloc::vec![0.0; 4 * n - 1];
    let mut h = SymBandMatrix::for_rod(n);
    let e = imc_accumulate(pairs, positions, config, Some(&mut g), Some(&mut h), false);
    (e, g, h)
}

/// Penalty contact forces added to `node_forces`.
///
/// `node_forces` holds all non-contact forces per node on entry; the part of
/// them pressing each edge into its obstacle is cancelled by the normal-force
/// balance term. The total normal force is clamped to be repulsive.
pub fn penalty_force(pairs: &[ContactPair], config: &ContactConfig, velocities: &[Vec3], node_forces: &mut [Vec3]) {
    // Pressing forces are read before any contact force is added.
    let mut contact: Vec<(usize, Vec3, f64)> = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let p = pair.penetration();
        if p <= 0.0 {
            continue;
        }
        let j = pair.edge_index;
        let s = pair.params[0];
        let n = pair.normal;
        let pressing = (node_forces[j] + node_forces[j + 1]) * 0.5;
        let f_perp = (-pressing.dot(n)).max(0.0);
        let v = velocities[j] * (1.0 - s) + velocities[j + 1] * s;
        let mag = (f_perp + config.stiffness * p - config.damping * v.dot(n)).max(0.0);
        contact.push((j, n * mag, s));
    }
    for (j, f, s) in contact {
        node_forces[j] += f * (1.0 - s);
        node_forces[j + 1] += f * s;
    }
}
