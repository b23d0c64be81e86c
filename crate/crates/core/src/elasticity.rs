//! Stretching, bending and twisting energies with analytic gradients and
//! banded Hessians.
//!
//! Bending and twisting depend on the reference frames, which follow the
//! centerline by time-parallel transport. Gradients and Hessians here are exact
//! derivatives of the energy under that convention: perturbing the node
//! positions transports each edge's reference frame from its current tangent
//! to the perturbed one, and the reference twist is recomputed from the
//! transported frames.

use alloc::vec;
use alloc::vec::Vec;

use crate::banded::SymBandMatrix;
use crate::eigen::project_psd;
use crate::error::{Error, Result};
use crate::geometry::{dof_count, FrameSet, RestConfig, RodState, ANTIPARALLEL_TOL, MIN_EDGE_LENGTH};
use crate::math::{Mat3, Vec3};

/// Energy, gradient and banded Hessian over the `4N - 1` rod dofs.
#[derive(Clone, Debug)]
pub struct ElasticResult {
    /// J
    pub energy: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymBandMatrix,
}

/// Selects which energy terms to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub stretch: bool,
    pub bend: bool,
    pub twist: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { stretch: true, bend: true, twist: true };
    pub const STRETCH: Terms = Terms { stretch: true, bend: false, twist: false };
    pub const BEND: Terms = Terms { stretch: false, bend: true, twist: false };
    pub const TWIST: Terms = Terms { stretch: false, bend: false, twist: true };
}

pub fn stretch_energy(state: &RodState, rest: &RestConfig) -> Result<ElasticResult> {
    // Stretching never reads the frames.
    evaluate_with(state, None, rest, Terms::STRETCH)
}

pub fn bend_energy(state: &RodState, frames: &FrameSet, rest: &RestConfig) -> Result<ElasticResult> {
    evaluate_with(state, Some(frames), rest, Terms::BEND)
}

pub fn twist_energy(state: &RodState, frames: &FrameSet, rest: &RestConfig) -> Result<ElasticResult> {
    evaluate_with(state, Some(frames), rest, Terms::TWIST)
}

/// `E_s + E_b + E_t` with its gradient and assembled banded Hessian.
pub fn total_elastic(state: &RodState, frames: &FrameSet, rest: &RestConfig) -> Result<ElasticResult> {
    evaluate_with(state, Some(frames), rest, Terms::ALL)
}

/// Evaluates the selected terms.
pub fn evaluate(state: &RodState, frames: &FrameSet, rest: &RestConfig, terms: Terms) -> Result<ElasticResult> {
    evaluate_with(state, Some(frames), rest, terms)
}

fn evaluate_with(
    state: &RodState,
    frames: Option<&FrameSet>,
    rest: &RestConfig,
    terms: Terms,
) -> Result<ElasticResult> {
    let n = state.n_nodes();
    let mut gradient = vec![0.0; dof_count(n)];
    let mut hessian = SymBandMatrix::for_rod(n);
    let energy = match frames {
        Some(f) => {
            accumulate(&state.positions, &state.thetas, f, rest, terms, Some(&mut gradient), Some(&mut hessian), false)?
        }
        None => accumulate_stretch(&state.positions, rest, Some(&mut gradient), Some(&mut hessian), false)?,
    };
    Ok(ElasticResult { energy, gradient, hessian })
}

/// Energy of the selected terms without derivatives.
pub fn energy(state: &RodState, frames: &FrameSet, rest: &RestConfig, terms: Terms) -> Result<f64> {
    accumulate(&state.positions, &state.thetas, frames, rest, terms, None, None, false)
}

/// Adds energy derivatives into caller-owned buffers and returns the energy.
///
/// `frames` must describe `positions` (tangents and material frames current).
/// With `project`, each stencil Hessian is clamped to positive semi-definite
/// before assembly.
#[allow(clippy::too_many_arguments)]
pub fn accumulate(
    positions: &[Vec3],
    thetas: &[f64],
    frames: &FrameSet,
    rest: &RestConfig,
    terms: Terms,
    mut grad: Option<&mut [f64]>,
    mut hess: Option<&mut SymBandMatrix>,
    project: bool,
) -> Result<f64> {
    let mut energy = 0.0;
    if terms.stretch {
        energy += accumulate_stretch(positions, rest, grad.as_deref_mut(), hess.as_deref_mut(), project)?;
    }
    if terms.bend || terms.twist {
        let want_hess = hess.is_some();
        for i in 1..positions.len() - 1 {
            let input = StencilInput {
                x0: positions[i - 1],
                x1: positions[i],
                x2: positions[i + 1],
                m1e: frames.mat_m1[i - 1],
                m2e: frames.mat_m2[i - 1],
                m1f: frames.mat_m1[i],
                m2f: frames.mat_m2[i],
                twist: thetas[i] - thetas[i - 1] + frames.ref_twists[i - 1],
                nat_curvature: rest.nat_curvature[i - 1],
                nat_twist: rest.nat_twist[i - 1],
                bend_coeff: if terms.bend { rest.bend_stiffness / rest.voronoi_lengths[i - 1] } else { 0.0 },
                twist_coeff: if terms.twist { rest.twist_stiffness / rest.voronoi_lengths[i - 1] } else { 0.0 },
            };
            let mut st = bend_twist_stencil(&input, want_hess, i)?;
            energy += st.energy;
            let start = 4 * (i - 1);
            if let Some(g) = grad.as_deref_mut() {
                for (k, v) in st.grad.iter().enumerate() {
                    g[start + k] += v;
                }
            }
            if let Some(h) = hess.as_deref_mut() {
                if project {
                    project_psd(&mut st.hess);
                }
                h.add_contiguous_block(start, &st.hess);
            }
        }
    }
    Ok(energy)
}

fn accumulate_stretch(
    positions: &[Vec3],
    rest: &RestConfig,
    mut grad: Option<&mut [f64]>,
    mut hess: Option<&mut SymBandMatrix>,
    project: bool,
) -> Result<f64> {
    let ks = rest.stretch_stiffness;
    let mut energy = 0.0;
    for (j, w) in positions.windows(2).enumerate() {
        let e = w[1] - w[0];
        let len = e.norm();
        if !(len > MIN_EDGE_LENGTH) {
            return Err(Error::DegenerateEdge { edge: j, length: len });
        }
        let l0 = rest.rest_lengths[j];
        let strain = len / l0 - 1.0;
        energy += 0.5 * ks * strain * strain * l0;
        let t = e * (1.0 / len);
        let f = t * (ks * strain);
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..3 {
                g[4 * j + k] -= f[k];
                g[4 * j + 4 + k] += f[k];
            }
        }
        if let Some(h) = hess.as_deref_mut() {
            // d²E/de² = Ks [ t tᵀ / λ̄ + ε (I - t tᵀ) / |e| ]
            let tt = Mat3::outer(t, t);
            let mut he = tt.scaled(ks / l0) + (Mat3::IDENTITY - tt).scaled(ks * strain / len);
            if project {
                project_psd(&mut he.0);
            }
            let mut block = [[0.0; 7]; 7];
            for a in 0..3 {
                for b in 0..3 {
                    block[a][b] = he.0[a][b];
                    block[4 + a][4 + b] = he.0[a][b];
                    block[4 + a][b] = -he.0[a][b];
                    block[a][4 + b] = -he.0[a][b];
                }
            }
            h.add_contiguous_block(4 * j, &block);
        }
    }
    Ok(energy)
}

/// Inputs of the 11-dof stencil centred on one interior node.
struct StencilInput {
    x0: Vec3,
    x1: Vec3,
    x2: Vec3,
    m1e: Vec3,
    m2e: Vec3,
    m1f: Vec3,
    m2f: Vec3,
    twist: f64,
    nat_curvature: [f64; 2],
    nat_twist: f64,
    /// K_b / V (zero disables bending)
    bend_coeff: f64,
    /// K_t / V (zero disables twisting)
    twist_coeff: f64,
}

struct Stencil {
    energy: f64,
    grad: [f64; 11],
    hess: [[f64; 11]; 11],
}

// Local edge-space ordering: e (0..3), θe (3), f (4..7), θf (7).
type Vec8 = [f64; 8];
type Mat8 = [[f64; 8]; 8];
type Mat6 = [[f64; 6]; 6];

#[inline]
fn put_vec(dst: &mut [f64], at: usize, v: Vec3) {
    dst[at] = v.x;
    dst[at + 1] = v.y;
    dst[at + 2] = v.z;
}

#[inline]
fn add_block6(m: &mut Mat6, r: usize, c: usize, b: &Mat3) {
    for i in 0..3 {
        for j in 0..3 {
            m[r + i][c + j] += b.0[i][j];
        }
    }
}

/// Position indices of the local 8-vector, in 6-vector order.
const POS8: [usize; 6] = [0, 1, 2, 4, 5, 6];

fn bend_twist_stencil(inp: &StencilInput, want_hess: bool, node: usize) -> Result<Stencil> {
    let e = inp.x1 - inp.x0;
    let f = inp.x2 - inp.x1;
    let ne = e.norm();
    let nf = f.norm();
    if !(ne > MIN_EDGE_LENGTH) {
        return Err(Error::DegenerateEdge { edge: node - 1, length: ne });
    }
    if !(nf > MIN_EDGE_LENGTH) {
        return Err(Error::DegenerateEdge { edge: node, length: nf });
    }
    let te = e * (1.0 / ne);
    let tf = f * (1.0 / nf);
    let chi = 1.0 + te.dot(tf);
    if chi < ANTIPARALLEL_TOL {
        return Err(Error::AntiparallelTangents { edge: node });
    }
    let tt = (te + tf) * (1.0 / chi);
    let kb = te.cross(tf) * (2.0 / chi);
    // Jacobians of κb with respect to the two edge vectors.
    let jke = (Mat3::skew(tf).scaled(2.0 / chi) + Mat3::outer(kb, tt)).scaled(-1.0 / ne);
    let jkf = (Mat3::skew(te).scaled(2.0 / chi) - Mat3::outer(kb, tt)).scaled(1.0 / nf);

    let mut g8: Vec8 = [0.0; 8];
    let mut h8: Mat8 = [[0.0; 8]; 8];
    let mut energy = 0.0;

    if inp.bend_coeff != 0.0 {
        let kc = inp.bend_coeff;
        let (m1e, m2e, m1f, m2f) = (inp.m1e, inp.m2e, inp.m1f, inp.m2f);
        // (u, ∂u/∂θ) for κ1 (u = m2) and κ2 (u = m1).
        let comps = [(m2e, m2f, -m1e, -m1f), (m1e, m1f, m2e, m2f)];
        let mut grads = [[0.0; 8]; 2];
        let mut res = [0.0; 2];
        for (a, &(ue, uf, we, wf)) in comps.iter().enumerate() {
            let c = ue + uf;
            let kappa = 0.5 * kb.dot(c);
            let r = kappa - inp.nat_curvature[a];
            res[a] = r;
            energy += 0.5 * kc * r * r;
            let g = &mut grads[a];
            put_vec(g, 0, jke.tmul_vec(c) * 0.5);
            g[3] = 0.5 * kb.dot(we);
            put_vec(g, 4, jkf.tmul_vec(c) * 0.5);
            g[7] = 0.5 * kb.dot(wf);
            for k in 0..8 {
                g8[k] += kc * r * g[k];
            }
        }
        if want_hess {
            for g in &grads {
                for p in 0..8 {
                    for q in 0..8 {
                        h8[p][q] += kc * g[p] * g[q];
                    }
                }
            }
            // Curvature Hessians are linear in (u, w): combine both components
            // weighted by their residuals.
            let ue = m2e * res[0] + m1e * res[1];
            let uf = m2f * res[0] + m1f * res[1];
            let we = m1e * (-res[0]) + m2e * res[1];
            let wf = m1f * (-res[0]) + m2f * res[1];
            let hk = curvature_hessian(e, f, ne, nf, te, tf, chi, kb, &jke, &jkf, ue, uf, we, wf);
            for p in 0..8 {
                for q in 0..8 {
                    h8[p][q] += kc * hk[p][q];
                }
            }
        }
    }

    if inp.twist_coeff != 0.0 {
        let kc = inp.twist_coeff;
        let r = inp.twist - inp.nat_twist;
        energy += 0.5 * kc * r * r;
        let mut gb: Vec8 = [0.0; 8];
        put_vec(&mut gb, 0, kb * (0.5 / ne));
        gb[3] = -1.0;
        put_vec(&mut gb, 4, kb * (0.5 / nf));
        gb[7] = 1.0;
        for k in 0..8 {
            g8[k] += kc * r * gb[k];
        }
        if want_hess {
            for p in 0..8 {
                for q in 0..8 {
                    h8[p][q] += kc * gb[p] * gb[q];
                }
            }
            // Symmetrized Jacobian of (κb / 2|e|, κb / 2|f|).
            let jee = jke.scaled(0.5 / ne) - Mat3::outer(kb, te).scaled(0.5 / (ne * ne));
            let jef = jkf.scaled(0.5 / ne);
            let jfe = jke.scaled(0.5 / nf);
            let jff = jkf.scaled(0.5 / nf) - Mat3::outer(kb, tf).scaled(0.5 / (nf * nf));
            let mut j6: Mat6 = [[0.0; 6]; 6];
            add_block6(&mut j6, 0, 0, &jee);
            add_block6(&mut j6, 0, 3, &jef);
            add_block6(&mut j6, 3, 0, &jfe);
            add_block6(&mut j6, 3, 3, &jff);
            for p in 0..6 {
                for q in 0..6 {
                    h8[POS8[p]][POS8[q]] += kc * r * 0.5 * (j6[p][q] + j6[q][p]);
                }
            }
        }
    }

    let (grad, hess) = to_node_space(&g8, if want_hess { Some(&h8) } else { None });
    Ok(Stencil { energy, grad, hess })
}

/// Hessian of `½ κb·(ue + uf)` in edge space, with `ue`, `uf` material
/// directors (orthogonal to their tangents) and `we`, `wf` their θ-derivatives.
#[allow(clippy::too_many_arguments)]
fn curvature_hessian(
    e: Vec3,
    f: Vec3,
    ne: f64,
    nf: f64,
    te: Vec3,
    tf: Vec3,
    chi: f64,
    kb: Vec3,
    jke: &Mat3,
    jkf: &Mat3,
    ue: Vec3,
    uf: Vec3,
    we: Vec3,
    wf: Vec3,
) -> Mat8 {
    let c = ue + uf;
    let sum_t = te + tf;
    // c·κb = N / D with N = 2 c·(e×f), D = |e||f| + e·f.
    let d = ne * nf * chi;
    let nn = 2.0 * c.dot(e.cross(f));
    let mut dn = [0.0; 6];
    put_vec(&mut dn, 0, f.cross(c) * 2.0);
    put_vec(&mut dn, 3, c.cross(e) * 2.0);
    let mut dd = [0.0; 6];
    put_vec(&mut dd, 0, sum_t * nf);
    put_vec(&mut dd, 3, sum_t * ne);

    let mut h: Mat6 = [[0.0; 6]; 6];
    let inv_d = 1.0 / d;
    let inv_d2 = inv_d * inv_d;
    // ∇²N / D
    let sc = Mat3::skew(c);
    add_block6(&mut h, 0, 3, &sc.scaled(-2.0 * inv_d));
    add_block6(&mut h, 3, 0, &sc.scaled(2.0 * inv_d));
    // - N ∇²D / D²
    let s = -nn * inv_d2;
    add_block6(&mut h, 0, 0, &(Mat3::IDENTITY - Mat3::outer(te, te)).scaled(s * nf / ne));
    add_block6(&mut h, 3, 3, &(Mat3::IDENTITY - Mat3::outer(tf, tf)).scaled(s * ne / nf));
    add_block6(&mut h, 0, 3, &(Mat3::outer(te, tf) + Mat3::IDENTITY).scaled(s));
    add_block6(&mut h, 3, 0, &(Mat3::outer(tf, te) + Mat3::IDENTITY).scaled(s));
    // - (∇N ∇Dᵀ + ∇D ∇Nᵀ) / D² + 2 N ∇D ∇Dᵀ / D³
    let s3 = 2.0 * nn * inv_d2 * inv_d;
    for p in 0..6 {
        for q in 0..6 {
            h[p][q] += -(dn[p] * dd[q] + dd[p] * dn[q]) * inv_d2 + s3 * dd[p] * dd[q];
        }
    }

    // Everything so far is ∇²(c·κb); the curvature takes half of it.
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v *= 0.5;
        }
    }

    // First-order transport of the directors: sym(Jκbᵀ T) with
    // T = [-te ueᵀ/|e|, -tf ufᵀ/|f|].
    let a_e = [jke.tmul_vec(te), jkf.tmul_vec(te)];
    let a_f = [jke.tmul_vec(tf), jkf.tmul_vec(tf)];
    let mut a6: Mat6 = [[0.0; 6]; 6];
    for (blk, (ve, vf)) in a_e.iter().zip(&a_f).enumerate() {
        add_block6(&mut a6, 3 * blk, 0, &Mat3::outer(*ve, ue).scaled(-1.0 / ne));
        add_block6(&mut a6, 3 * blk, 3, &Mat3::outer(*vf, uf).scaled(-1.0 / nf));
    }
    for p in 0..6 {
        for q in 0..6 {
            h[p][q] += 0.5 * (a6[p][q] + a6[q][p]);
        }
    }
    // Second-order transport of the directors.
    add_block6(&mut h, 0, 0, &Mat3::outer(ue, kb).sym().scaled(-0.5 / (ne * ne)));
    add_block6(&mut h, 3, 3, &Mat3::outer(uf, kb).sym().scaled(-0.5 / (nf * nf)));

    let mut out: Mat8 = [[0.0; 8]; 8];
    for p in 0..6 {
        for q in 0..6 {
            out[POS8[p]][POS8[q]] = h[p][q];
        }
    }
    let ce = jke.tmul_vec(we) * 0.5;
    let cf = jkf.tmul_vec(we) * 0.5;
    let de = jke.tmul_vec(wf) * 0.5;
    let df = jkf.tmul_vec(wf) * 0.5;
    for k in 0..3 {
        out[k][3] = ce[k];
        out[3][k] = ce[k];
        out[4 + k][3] = cf[k];
        out[3][4 + k] = cf[k];
        out[k][7] = de[k];
        out[7][k] = de[k];
        out[4 + k][7] = df[k];
        out[7][4 + k] = df[k];
    }
    out[3][3] = -0.5 * kb.dot(ue);
    out[7][7] = -0.5 * kb.dot(uf);
    out
}

/// Maps edge-space derivatives (e = x1 - x0, f = x2 - x1) to the 11 node dofs
/// `[x0, θe, x1, θf, x2]`.
fn to_node_space(g8: &Vec8, h8: Option<&Mat8>) -> ([f64; 11], [[f64; 11]; 11]) {
    // Each node dof is a signed combination of at most two edge-space dofs.
    const MAP: [[(usize, f64); 2]; 11] = [
        [(0, -1.0), (0, 0.0)],
        [(1, -1.0), (1, 0.0)],
        [(2, -1.0), (2, 0.0)],
        [(3, 1.0), (3, 0.0)],
        [(0, 1.0), (4, -1.0)],
        [(1, 1.0), (5, -1.0)],
        [(2, 1.0), (6, -1.0)],
        [(7, 1.0), (7, 0.0)],
        [(4, 1.0), (4, 0.0)],
        [(5, 1.0), (5, 0.0)],
        [(6, 1.0), (6, 0.0)],
    ];
    let mut g = [0.0; 11];
    for (a, m) in MAP.iter().enumerate() {
        g[a] = m[0].1 * g8[m[0].0] + m[1].1 * g8[m[1].0];
    }
    let mut h = [[0.0; 11]; 11];
    if let Some(h8) = h8 {
        for (a, ma) in MAP.iter().enumerate() {
            for (b, mb) in MAP.iter().enumerate().take(a + 1) {
                let mut s = 0.0;
                for &(p, sp) in ma {
                    if sp == 0.0 {
                        continue;
                    }
                    for &(q, sq) in mb {
                        if sq != 0.0 {
                            s += sp * sq * h8[p][q];
                        }
                    }
                }
                h[a][b] = s;
                h[b][a] = s;
            }
        }
    }
    (g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_rod, RodParams};

    #[test]
    fn rest_configuration_is_stress_free() {
        let (state, rest, frames) = build_rod(&RodParams::default()).unwrap();
        let r = total_elastic(&state, &frames, &rest).unwrap();
        // Rest lengths are rounded, so only float noise remains.
        assert!(r.energy < 1e-20);
        assert!(r.gradient.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn stretch_single_edge_value() {
        let (mut state, mut rest, _) = build_rod(&RodParams { n_nodes: 3, ..Default::default() }).unwrap();
        // Rest length 0.05 on edge 0, stretched by 10%; edge 1 at rest.
        rest.rest_lengths = vec![0.05, 0.05];
        rest.stretch_stiffness = 7.854e4;
        state.positions = vec![Vec3::ZERO, Vec3::new(0.055, 0.0, 0.0), Vec3::new(0.105, 0.0, 0.0)];
        let r = stretch_energy(&state, &rest).unwrap();
        assert!((r.energy - 0.5 * 7.854e4 * 0.01 * 0.05).abs() < 1e-9);
        assert!((r.energy - 19.635).abs() < 1e-3);
        assert!(r.gradient.iter().skip(3).step_by(4).all(|g| *g == 0.0));
    }

    #[test]
    fn natural_curvature_on_straight_rod() {
        let (state, mut rest, frames) = build_rod(&RodParams::default()).unwrap();
        let c = 0.3;
        rest.nat_curvature[4] = [c, 0.0];
        let r = bend_energy(&state, &frames, &rest).unwrap();
        let expected = 0.5 * rest.bend_stiffness * c * c / rest.voronoi_lengths[4];
        assert!((r.energy - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn untwisted_rod_has_no_twist_energy() {
        let (state, rest, frames) = build_rod(&RodParams::default()).unwrap();
        assert_eq!(twist_energy(&state, &frames, &rest).unwrap().energy, 0.0);
    }
}
