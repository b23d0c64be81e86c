#![allow(clippy::needless_range_loop)]

//! Finite-difference oracles for the elastic energies.
//!
//! The oracle energy at perturbed coordinates transports the base frames in
//! time to the perturbed tangents, exactly as the simulator does between
//! iterates. Hessians are checked against the symmetrized finite difference of
//! the analytic gradient: reference frames are path dependent, so the raw
//! difference quotient carries an antisymmetric part that vanishes from the
//! second derivative of the energy itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrod_core::elasticity::{self, Terms};
use softrod_core::geometry::{
    build_rod, compute_tangents, time_parallel_transport, FrameSet, RestConfig, RodParams, RodState,
};
use softrod_core::Vec3;

const H: f64 = 1e-6;

fn random_rod(rng: &mut ChaCha8Rng) -> (RodState, RestConfig, FrameSet) {
    let n = rng.random_range(4..12);
    let (mut state, mut rest, _) = build_rod(&RodParams { n_nodes: n, ..Default::default() }).unwrap();
    let mut dir = Vec3::X;
    let mut p = Vec3::ZERO;
    state.positions[0] = p;
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
    let tangents = compute_tangents(&state).unwrap();
    let frames = FrameSet::from_tangents(&tangents, &state.thetas).unwrap();
    (state, rest, frames)
}

fn perturbed(state: &RodState, base: &FrameSet, dof: usize, h: f64) -> (RodState, FrameSet) {
    let mut q = state.dofs();
    q[dof] += h;
    let mut s = state.clone();
    s.set_dofs(&q);
    let t = compute_tangents(&s).unwrap();
    let f = time_parallel_transport(base, &t, &s.thetas).unwrap();
    (s, f)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-8)
}

fn check_state(state: &RodState, rest: &RestConfig, frames: &FrameSet, terms: Terms) -> (f64, f64) {
    let r = elasticity::evaluate(state, frames, rest, terms).unwrap();
    let n = state.n_dofs();
    let mut fd_grad = vec![0.0; n];
    let mut fd_hess = vec![vec![0.0; n]; n];
    for k in 0..n {
        let (sp, fp) = perturbed(state, frames, k, H);
        let (sm, fm) = perturbed(state, frames, k, -H);
        let ep = elasticity::energy(&sp, &fp, rest, terms).unwrap();
        let em = elasticity::energy(&sm, &fm, rest, terms).unwrap();
        fd_grad[k] = (ep - em) / (2.0 * H);
        let gp = elasticity::evaluate(&sp, &fp, rest, terms).unwrap().gradient;
        let gm = elasticity::evaluate(&sm, &fm, rest, terms).unwrap().gradient;
        for j in 0..n {
            fd_hess[j][k] = (gp[j] - gm[j]) / (2.0 * H);
        }
    }
    let mut analytic = Vec::with_capacity(n * n);
    let mut oracle = Vec::with_capacity(n * n);
    let dense = r.hessian.to_dense();
    for i in 0..n {
        for j in 0..n {
            analytic.push(dense[i][j]);
            oracle.push(0.5 * (fd_hess[i][j] + fd_hess[j][i]));
        }
    }
    (rel_err(&r.gradient, &fd_grad), rel_err(&analytic, &oracle))
}

fn run(terms: Terms, seed: u64, states: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..states {
        let (state, rest, frames) = random_rod(&mut rng);
        let (g, h) = check_state(&state, &rest, &frames, terms);
        assert!(g < 1e-6, "state {s}: gradient rel err {g:e}");
        assert!(h < 1e-5, "state {s}: hessian rel err {h:e}");
    }
}

#[test]
fn stretch_derivatives_match_finite_differences() {
    run(Terms::STRETCH, 1, 40);
}

#[test]
fn bend_derivatives_match_finite_differences() {
    run(Terms::BEND, 2, 40);
}

#[test]
fn twist_derivatives_match_finite_differences() {
    run(Terms::TWIST, 3, 40);
}

#[test]
fn total_hessian_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (state, rest, frames) = random_rod(&mut rng);
    let h = elasticity::total_elastic(&state, &frames, &rest).unwrap().hessian.to_dense();
    let scale = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..h.len() {
        for j in 0..h.len() {
            assert!((h[i][j] - h[j][i]).abs() <= 1e-14 * scale);
        }
    }
}
