//! Self checks: derivatives against finite differences, frame transport,
//! banded solves and contact smoothness.
//!
//! Elastic terms are passed in as plain functions so a deliberately broken
//! term can be checked the same way as the real ones.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::{solve_banded, SymBandMatrix};
use crate::contact::{detect, imc_accumulate, ContactConfig, Obstacle};
use crate::elasticity::{self, ElasticResult};
use crate::error::Result;
use crate::geometry::{
    build_rod, compute_tangents, curvature_binormal, time_parallel_transport, FrameSet, RestConfig, RodParams, RodState,
};
use crate::math::{abs, sqrt, tan, Vec3};

pub type TermFn = fn(&RodState, &FrameSet, &RestConfig) -> Result<ElasticResult>;

/// A named elastic energy with its analytic derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ElasticTerm {
    pub name: &'static str,
    pub eval: TermFn,
}

fn stretch_term(state: &RodState, _frames: &FrameSet, rest: &RestConfig) -> Result<ElasticResult> {
    elasticity::stretch_energy(state, rest)
}

/// The three elastic energies of the simulator.
pub fn elastic_terms() -> Vec<ElasticTerm> {
    vec![
        ElasticTerm { name: "stretch_energy", eval: stretch_term },
        ElasticTerm { name: "bend_energy", eval: elasticity::bend_energy },
        ElasticTerm { name: "twist_energy", eval: elasticity::twist_energy },
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub elastic_gradient: f64,
    pub elastic_hessian: f64,
    pub contact_gradient: f64,
    pub contact_hessian: f64,
    pub frame_orthonormality: f64,
    pub banded_solve: f64,
    pub curvature: f64,
    pub contact_smoothness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            elastic_gradient: 1e-6,
            elastic_hessian: 1e-5,
            contact_gradient: 1e-5,
            contact_hessian: 1e-5,
            frame_orthonormality: 1e-12,
            banded_solve: 1e-9,
            curvature: 1e-9,
            contact_smoothness: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub tolerances: Tolerances,
    /// Random states per derivative check.
    pub states: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { tolerances: Tolerances::default(), states: 100, seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, max_error: f64, tolerance: f64) -> Self {
        CheckResult { name: name.into(), max_error, tolerance, passed: max_error <= tolerance }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let scale: f64 = b.iter().map(|x| x * x).sum();
    sqrt(diff) / sqrt(scale).max(1e-8)
}

fn random_rod(rng: &mut ChaCha8Rng) -> Result<(RodState, RestConfig, FrameSet)> {
    let n = rng.random_range(4..12);
    let (mut state, mut rest, _) = build_rod(&RodParams { n_nodes: n, ..RodParams::default() })?;
    let mut dir = Vec3::X;
    let mut p = Vec3::ZERO;
    for i in 1..n {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if axis.norm() > 1e-3 {
            dir = dir.rotated(axis.normalized(), rng.random_range(-0.7..0.7));
        }
        p += dir * (rest.rest_lengths[i - 1] * rng.random_range(0.9..1.1));
        state.positions[i] = p;
    }
    for t in state.thetas.iter_mut() {
        *t = rng.random_range(-1.0..1.0);
    }
    for k in rest.nat_curvature.iter_mut() {
        *k = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
    }
    for t in rest.nat_twist.iter_mut() {
        *t = rng.random_range(-0.3..0.3);
    }
    let frames = FrameSet::from_tangents(&compute_tangents(&state)?, &state.thetas)?;
    Ok((state, rest, frames))
}

fn perturbed(state: &RodState, base: &FrameSet, dof: usize, h: f64) -> Result<(RodState, FrameSet)> {
    let mut q = state.dofs();
    q[dof] += h;
    let mut s = state.clone();
    s.set_dofs(&q);
    let f = time_parallel_transport(base, &compute_tangents(&s)?, &s.thetas)?;
    Ok((s, f))
}

/// Max gradient and Hessian relative errors of `term` over random rods.
pub fn check_elastic_term(term: &ElasticTerm, states: usize, seed: u64) -> Result<(f64, f64)> {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for _ in 0..states {
        let (state, rest, frames) = random_rod(&mut rng)?;
        let r = (term.eval)(&state, &frames, &rest)?;
        let n = state.n_dofs();
        let mut fd_grad = vec![0.0; n];
        let mut fd_hess = vec![0.0; n * n];
        for k in 0..n {
            let (sp, fp) = perturbed(&state, &frames, k, h)?;
            let (sm, fm) = perturbed(&state, &frames, k, -h)?;
            let rp = (term.eval)(&sp, &fp, &rest)?;
            let rm = (term.eval)(&sm, &fm, &rest)?;
            fd_grad[k] = (rp.energy - rm.energy) / (2.0 * h);
            for j in 0..n {
                fd_hess[j * n + k] = (rp.gradient[j] - rm.gradient[j]) / (2.0 * h);
            }
        }
        let dense = r.hessian.to_dense();
        let mut analytic = Vec::with_capacity(n * n);
        let mut oracle = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                analytic.push(dense[i][j]);
                oracle.push(0.5 * (fd_hess[i * n + j] + fd_hess[j * n + i]));
            }
        }
        worst_g = worst_g.max(rel_err(&r.gradient, &fd_grad));
        worst_h = worst_h.max(rel_err(&analytic, &oracle));
    }
    Ok((worst_g, worst_h))
}

const CONTACT_ROD_RADIUS: f64 = 0.05;

fn imc_eval(x: &[Vec3], obs: &[Obstacle], cfg: &ContactConfig, hess: Option<&mut SymBandMatrix>) -> (f64, Vec<f64>) {
    let pairs = detect(x, CONTACT_ROD_RADIUS, obs, cfg.cutoff);
    let mut g = vec![0.0; 4 * x.len() - 1];
    let e = imc_accumulate(&pairs, x, cfg, Some(&mut g), hess, false);
    (e, g)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// Max IMC gradient and Hessian relative errors over random near-contact
/// configurations. Configurations whose closest points sit near a segment
/// end are skipped: there the distance is only piecewise smooth.
pub fn check_contact(states: usize, seed: u64) -> (f64, f64) {
    let cfg = ContactConfig::imc();
    let h = 1e-7;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    let mut checked = 0;
    while checked < states {
        let rod: Vec<Vec3> = (0..4)
            .map(|i| Vec3::new(0.05 * i as f64, 0.0, 0.0) + random_unit(&mut rng) * rng.random_range(0.0..0.01))
            .collect();
        let gap = rng.random_range(-cfg.delta..2.0 * cfg.delta);
        let r_obs = rng.random_range(0.03..0.08);
        let edge = rng.random_range(0..3);
        let p = rod[edge] + (rod[edge + 1] - rod[edge]) * rng.random_range(0.3..0.7);
        let dir = random_unit(&mut rng);
        let centre = p + dir * (CONTACT_ROD_RADIUS + r_obs + gap);
        let obs = [Obstacle::Sphere { center: centre, radius: r_obs }];
        let pairs = detect(&rod, CONTACT_ROD_RADIUS, &obs, cfg.cutoff);
        if pairs.is_empty() || pairs.iter().any(|p| p.params[0] < 0.05 || p.params[0] > 0.95) {
            continue;
        }
        let n = 4 * rod.len() - 1;
        let mut hm = SymBandMatrix::for_rod(rod.len());
        let (_, g) = imc_eval(&rod, &obs, &cfg, Some(&mut hm));
        let mut fd = vec![0.0; n];
        let mut fdh = vec![0.0; n * n];
        for k in (0..n).filter(|k| k % 4 != 3) {
            let mut xp = rod.clone();
            let mut xm = rod.clone();
            xp[k / 4][k % 4] += h;
            xm[k / 4][k % 4] -= h;
            let (ep, gp) = imc_eval(&xp, &obs, &cfg, None);
            let (em, gm) = imc_eval(&xm, &obs, &cfg, None);
            fd[k] = (ep - em) / (2.0 * h);
            for j in 0..n {
                fdh[j * n + k] = (gp[j] - gm[j]) / (2.0 * h);
            }
        }
        let dense = hm.to_dense();
        let analytic: Vec<f64> = dense.iter().flatten().copied().collect();
        let oracle: Vec<f64> = (0..n * n).map(|idx| 0.5 * (fdh[idx] + fdh[(idx % n) * n + idx / n])).collect();
        worst_g = worst_g.max(rel_err(&g, &fd));
        worst_h = worst_h.max(rel_err(&analytic, &oracle));
        checked += 1;
    }
    (worst_g, worst_h)
}

/// Largest deviation from orthonormality of frames transported along random
/// smooth tangent sequences.
pub fn check_frames(steps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut state, _, mut frames) = build_rod(&RodParams { n_nodes: 6, ..RodParams::default() })?;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        for i in 1..state.positions.len() {
            state.positions[i] += random_unit(&mut rng) * 0.003;
        }
        for t in state.thetas.iter_mut() {
            *t += rng.random_range(-0.05..0.05);
        }
        frames = time_parallel_transport(&frames, &compute_tangents(&state)?, &state.thetas)?;
        for e in 0..frames.n_edges() {
            let basis = [
                [frames.ref_d1[e], frames.ref_d2[e], frames.tangents[e]],
                [frames.mat_m1[e], frames.mat_m2[e], frames.tangents[e]],
            ];
            for b in basis {
                for a in 0..3 {
                    for c in 0..3 {
                        let want = if a == c { 1.0 } else { 0.0 };
                        worst = worst.max(abs(b[a].dot(b[c]) - want));
                    }
                }
            }
        }
    }
    Ok(worst)
}

fn dense_lu_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| abs(m[i][col]).partial_cmp(&abs(m[j][col])).expect("finite")).expect("non-empty");
        m.swap(col, piv);
        x.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| m[col][k] * x[k]).sum();
        x[col] = (x[col] - s) / m[col][col];
    }
    x
}

/// Banded Cholesky on a random SPD rod-shaped system vs a dense LU solve.
pub fn check_banded(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = SymBandMatrix::for_rod(21);
    let n = a.dim();
    let hb = a.half_bandwidth();
    for i in 0..n {
        for j in i + 1..(i + hb + 1).min(n) {
            a.set(i, j, rng.random_range(-1.0..1.0));
        }
    }
    for i in 0..n {
        // Diagonal dominance makes the matrix SPD.
        let row: f64 = (0..n).filter(|&j| j != i && a.in_band(i, j)).map(|j| abs(a.get(i, j))).sum();
        a.set(i, i, row + rng.random_range(1.0..2.0));
    }
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = solve_banded(&a, &b)?;
    let oracle = dense_lu_solve(&a.to_dense(), &b);
    Ok(rel_err(&x, &oracle))
}

/// Curvature binormal magnitude on arcs vs `2 tan(φ/2)`.
pub fn check_curvature() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for deg in [5.0, 30.0, 90.0] {
        let phi = deg * crate::math::PI / 180.0;
        let t0 = Vec3::X;
        let t1 = Vec3::new(crate::math::cos(phi), crate::math::sin(phi), 0.0);
        let kb = curvature_binormal(t0, t1, 1)?;
        let want = 2.0 * tan(0.5 * phi);
        worst = worst.max(abs(kb.norm() - want) / want);
    }
    Ok(worst)
}

/// Sweeps the gap through zero: the IMC energy must be monotone and its
/// analytic slope must match finite differences everywhere.
pub fn check_contact_smoothness() -> f64 {
    let cfg = ContactConfig::imc();
    let obs = [Obstacle::Sphere { center: Vec3::new(0.05, 0.0, 0.0), radius: 0.05 }];
    let eval = |z: f64| {
        let x = [Vec3::new(0.0, 0.0, z), Vec3::new(0.1, 0.0, z)];
        imc_eval(&x, &obs, &cfg, None)
    };
    let mut worst: f64 = 0.0;
    let mut prev = 0.0;
    for i in 0..=400 {
        let gap = 3.0 * cfg.delta - i as f64 * 1e-4;
        let z = 0.1 + gap;
        let (e, g) = eval(z);
        if e < prev {
            return f64::INFINITY;
        }
        prev = e;
        let h = 1e-8;
        let fd = (eval(z + h).0 - eval(z - h).0) / (2.0 * h);
        let an = g[2] + g[6];
        worst = worst.max(abs(an - fd) / abs(an).max(1e-3));
    }
    worst
}

/// Runs every check with the given elastic terms.
pub fn validate_with(options: &ValidateOptions, terms: &[ElasticTerm]) -> Result<Report> {
    let tol = &options.tolerances;
    let mut report = Report::default();
    for (k, term) in terms.iter().enumerate() {
        let (g, h) = check_elastic_term(term, options.states, options.seed + k as u64)?;
        report.checks.push(CheckResult::new(&alloc::format!("{}: gradient", term.name), g, tol.elastic_gradient));
        report.checks.push(CheckResult::new(&alloc::format!("{}: hessian", term.name), h, tol.elastic_hessian));
    }
    let (g, h) = check_contact(options.states, options.seed + 100);
    report.checks.push(CheckResult::new("imc_contact: gradient", g, tol.contact_gradient));
    report.checks.push(CheckResult::new("imc_contact: hessian", h, tol.contact_hessian));
    report.checks.push(CheckResult::new("contact_smoothness", check_contact_smoothness(), tol.contact_smoothness));
    report.checks.push(CheckResult::new(
        "frame_orthonormality",
        check_frames(10_000, options.seed)?,
        tol.frame_orthonormality,
    ));
    report.checks.push(CheckResult::new("banded_solver", check_banded(options.seed)?, tol.banded_solve));
    report.checks.push(CheckResult::new("arc_curvature", check_curvature()?, tol.curvature));
    Ok(report)
}

pub fn validate(options: &ValidateOptions) -> Result<Report> {
    validate_with(options, &elastic_terms())
}
