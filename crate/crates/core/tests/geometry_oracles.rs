use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrod_core::elasticity::{self, Terms};
use softrod_core::geometry::{
    build_rod, compute_tangents, material_curvatures, pack, time_parallel_transport, unpack, FrameSet, RodParams,
    RodState,
};
use softrod_core::Vec3;

/// Rodrigues rotation written out independently of the crate.
fn rodrigues(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let k = axis.normalized();
    v * angle.cos() + k.cross(v) * angle.sin() + k * (k.dot(v) * (1.0 - angle.cos()))
}

/// Minimal rotation of `d` taking unit `a` onto unit `b`.
fn min_rotate(d: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let axis = a.cross(b);
    if axis.norm() < 1e-15 {
        return d;
    }
    rodrigues(d, axis, a.dot(b).clamp(-1.0, 1.0).acos())
}

fn angle_about(u: Vec3, v: Vec3, axis: Vec3) -> f64 {
    u.cross(v).dot(axis).atan2(u.dot(v))
}

fn arc_rod(n: usize, phi: f64) -> RodState {
    // Edges of length 0.05 turning by phi in the x-y plane.
    let mut pos = vec![Vec3::ZERO];
    for i in 0..n - 1 {
        let a = phi * i as f64;
        let last = *pos.last().unwrap();
        pos.push(last + Vec3::new(a.cos(), a.sin(), 0.0) * 0.05);
    }
    RodState::at_rest(pos)
}

#[test]
fn arc_curvature_matches_closed_form() {
    for deg in [5.0f64, 30.0, 90.0] {
        let phi = deg.to_radians();
        let state = arc_rod(8, phi);
        let t = compute_tangents(&state).unwrap();
        let frames = FrameSet::from_tangents(&t, &state.thetas).unwrap();
        let kappa = material_curvatures(&frames).unwrap();
        // Oracle: exact arc tangents, |2 t0×t1/(1+t0·t1)| = 2 sin φ/(1+cos φ).
        let want = 2.0 * phi.sin() / (1.0 + phi.cos());
        assert!((want - 2.0 * (phi / 2.0).tan()).abs() < 1e-12);
        for k in kappa {
            let norm = (k[0] * k[0] + k[1] * k[1]).sqrt();
            assert!((norm - want).abs() < 1e-9, "φ = {deg}°: {norm} vs {want}");
        }
    }
}

#[test]
fn tangent_rotated_about_d1() {
    let (state, _, frames) = build_rod(&RodParams { n_nodes: 3, ..Default::default() }).unwrap();
    let d1 = frames.ref_d1[0];
    let t_old = frames.tangents[0];
    let t_new = rodrigues(t_old, d1, std::f64::consts::FRAC_PI_2);
    let moved = time_parallel_transport(&frames, &[t_new, frames.tangents[1]], &state.thetas).unwrap();
    let want_d2 = rodrigues(frames.ref_d2[0], d1, std::f64::consts::FRAC_PI_2);
    for k in 0..3 {
        assert!((moved.ref_d1[0][k] - d1[k]).abs() < 1e-12);
        assert!((moved.ref_d2[0][k] - want_d2[k]).abs() < 1e-12);
    }
    // d2 takes the place of the old tangent, up to orientation.
    assert!((moved.ref_d2[0].dot(t_old).abs() - 1.0).abs() < 1e-12);
}

#[test]
fn reference_twist_matches_frame_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let (mut state, _, mut frames) = build_rod(&RodParams { n_nodes: 7, ..Default::default() }).unwrap();
        let mut oracle = [0.0; 5];
        for _ in 0..200 {
            for p in state.positions.iter_mut().skip(1) {
                *p += Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    * 0.004;
            }
            let t = compute_tangents(&state).unwrap();
            frames = time_parallel_transport(&frames, &t, &state.thetas).unwrap();
            for i in 1..t.len() {
                let moved = min_rotate(frames.ref_d1[i - 1], t[i - 1], t[i]);
                let mut beta = angle_about(moved, frames.ref_d1[i], t[i]);
                let prev: f64 = oracle[i - 1];
                beta += 2.0 * std::f64::consts::PI * ((prev - beta) / (2.0 * std::f64::consts::PI)).round();
                oracle[i - 1] = beta;
                assert!((frames.ref_twists[i - 1] - beta).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn frames_stay_orthonormal_over_many_transports() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut state, _, mut frames) = build_rod(&RodParams { n_nodes: 5, ..Default::default() }).unwrap();
    for _ in 0..10_000 {
        for p in state.positions.iter_mut().skip(1) {
            *p += Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                * 0.003;
        }
        for th in state.thetas.iter_mut() {
            *th += rng.random_range(-0.1..0.1);
        }
        frames = time_parallel_transport(&frames, &compute_tangents(&state).unwrap(), &state.thetas).unwrap();
    }
    for e in 0..frames.n_edges() {
        let b = [frames.mat_m1[e], frames.mat_m2[e], frames.tangents[e]];
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((b[i].dot(b[j]) - want).abs() < 1e-10);
            }
        }
    }
}

fn bent_state(seed: u64, n: usize) -> RodState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = vec![Vec3::ZERO];
    let mut dir = Vec3::X;
    for _ in 1..n {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        dir = rodrigues(dir, axis, rng.random_range(-0.5..0.5));
        let last = *pos.last().unwrap();
        pos.push(last + dir * 0.05 * rng.random_range(0.95..1.05));
    }
    let mut s = RodState::at_rest(pos);
    for t in s.thetas.iter_mut() {
        *t = rng.random_range(-1.0..1.0);
    }
    s
}

proptest! {
    #[test]
    fn pack_unpack_round_trip(v in prop::collection::vec(-1e3f64..1e3, 1..20)) {
        let n = v.len() + 1;
        let q: Vec<f64> = (0..4 * n - 1).map(|k| v[k % v.len()] + k as f64).collect();
        let (nodes, edges) = unpack(&q);
        prop_assert_eq!(pack(&nodes, &edges), q);
    }

    #[test]
    fn elastic_energy_is_rigid_motion_invariant(
        seed in 0u64..1000,
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -3.0f64..3.0,
        shift in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let axis = Vec3::new(axis[0], axis[1], axis[2]);
        prop_assume!(axis.norm() > 0.1);
        let state = bent_state(seed, 8);
        let (_, mut rest, _) = build_rod(&RodParams { n_nodes: 8, ..Default::default() }).unwrap();
        rest.nat_curvature.iter_mut().for_each(|k| *k = [0.2, -0.1]);
        let t = compute_tangents(&state).unwrap();
        let frames = FrameSet::from_tangents(&t, &state.thetas).unwrap();
        let e0 = elasticity::energy(&state, &frames, &rest, Terms::ALL).unwrap();
        let mut moved = state.clone();
        for p in moved.positions.iter_mut() {
            *p = rodrigues(*p, axis, angle) + Vec3::new(shift[0], shift[1], shift[2]);
        }
        // Carry the frames with the body so the gauge is unchanged.
        let mut f = frames.clone();
        for e in 0..f.n_edges() {
            f.ref_d1[e] = rodrigues(f.ref_d1[e], axis, angle);
            f.ref_d2[e] = rodrigues(f.ref_d2[e], axis, angle);
            f.tangents[e] = rodrigues(f.tangents[e], axis, angle);
        }
        f.update_material(&moved.thetas);
        let e1 = elasticity::energy(&moved, &f, &rest, Terms::ALL).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-9 * e0.abs().max(1.0));
    }

    #[test]
    fn bending_energy_ignores_uniform_material_rotation(seed in 0u64..1000, shift in -3.0f64..3.0) {
        let state = bent_state(seed, 9);
        let (_, rest, _) = build_rod(&RodParams { n_nodes: 9, ..Default::default() }).unwrap();
        let t = compute_tangents(&state).unwrap();
        let frames = FrameSet::from_tangents(&t, &state.thetas).unwrap();
        let e0 = elasticity::energy(&state, &frames, &rest, Terms::BEND).unwrap();
        let mut s = state.clone();
        s.thetas.iter_mut().for_each(|th| *th += shift);
        let f = FrameSet::from_tangents(&t, &s.thetas).unwrap();
        let e1 = elasticity::energy(&s, &f, &rest, Terms::BEND).unwrap();
        prop_assert!((e0 - e1).abs() <= 1e-9 * e0.max(1e-12));
    }
}

#[test]
fn lumped_mass_matches_density_times_volume() {
    let p = RodParams { n_nodes: 3, ..Default::default() };
    let (_, rest, _) = build_rod(&p).unwrap();
    let total = p.density * std::f64::consts::PI * p.radius * p.radius * p.length;
    assert!((rest.total_mass() - total).abs() < 1e-12 * total);
    assert!((total - 7.854).abs() < 1e-3);
    for (m, frac) in rest.lumped_masses.iter().zip([0.25, 0.5, 0.25]) {
        assert!((m - frac * total).abs() < 1e-12);
    }
}
