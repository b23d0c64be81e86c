use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softrod_core::contact::{detect, imc_accumulate, ContactConfig, ContactPair, Obstacle};
use softrod_core::Vec3;

const ROD_RADIUS: f64 = 0.05;
const CUTOFF: f64 = 0.025;

fn rand_vec(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
    Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let w = b - a;
    let ww = w.norm_squared();
    let u = if ww > 0.0 { ((p - a).dot(w) / ww).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + w * u)).norm()
}

/// Dense sampling along the first segment, refined by ternary search (the
/// distance from a moving point to a convex set is convex in the parameter).
fn sampled_segment_distance(p1: Vec3, q1: Vec3, a: Vec3, b: Vec3) -> f64 {
    let f = |s: f64| point_segment_distance(p1 + (q1 - p1) * s, a, b);
    let n = 10_000;
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for i in 0..=n {
        let d = f(i as f64 / n as f64);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let mut lo = (best.saturating_sub(1)) as f64 / n as f64;
    let mut hi = ((best + 1).min(n)) as f64 / n as f64;
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    best_d.min(f(0.5 * (lo + hi)))
}

#[test]
fn detection_matches_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..200 {
        let a = rand_vec(&mut rng, 0.3);
        let b = a + rand_vec(&mut rng, 0.3);
        let r_obs = rng.random_range(0.02..0.1);
        let x0 = rand_vec(&mut rng, 0.3);
        let x1 = x0 + rand_vec(&mut rng, 0.1);
        let obs = [Obstacle::capsule(a, b, r_obs).unwrap()];
        let oracle = sampled_segment_distance(x0, x1, a, b) - ROD_RADIUS - r_obs;
        let pairs = detect(&[x0, x1], ROD_RADIUS, &obs, 1.0);
        if oracle < 1.0 {
            assert_eq!(pairs.len(), 1);
            assert!((pairs[0].gap - oracle).abs() < 1e-6, "{} vs {}", pairs[0].gap, oracle);
            assert!((pairs[0].normal.norm() - 1.0).abs() < 1e-10);
            assert!(pairs[0].params.iter().all(|p| (0.0..=1.0).contains(p)));
            checked += 1;
        }
        // No false negatives within a small cutoff either.
        let near = detect(&[x0, x1], ROD_RADIUS, &obs, CUTOFF);
        assert_eq!(near.len(), usize::from(oracle < CUTOFF));
    }
    assert!(checked > 150);
}

#[test]
fn detection_is_rigid_motion_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let rod: Vec<Vec3> = (0..5).map(|i| Vec3::new(0.05 * i as f64, 0.0, 0.0) + rand_vec(&mut rng, 0.01)).collect();
        let obs = [
            Obstacle::capsule(Vec3::new(0.1, -0.1, 0.09), Vec3::new(0.12, 0.1, 0.1), 0.04).unwrap(),
            Obstacle::sphere(Vec3::new(0.15, 0.0, -0.11), 0.06).unwrap(),
        ];
        let axis = rand_vec(&mut rng, 1.0).normalized();
        let angle = rng.random_range(-3.0..3.0);
        let shift = rand_vec(&mut rng, 2.0);
        let tf = |p: Vec3| p.rotated(axis, angle) + shift;
        let rod2: Vec<Vec3> = rod.iter().map(|p| tf(*p)).collect();
        let obs2: Vec<Obstacle> = obs
            .iter()
            .map(|o| match *o {
                Obstacle::Sphere { center, radius } => Obstacle::Sphere { center: tf(center), radius },
                Obstacle::Capsule { a, b, radius } => Obstacle::Capsule { a: tf(a), b: tf(b), radius },
            })
            .collect();
        let p1 = detect(&rod, ROD_RADIUS, &obs, 0.1);
        let p2 = detect(&rod2, ROD_RADIUS, &obs2, 0.1);
        assert_eq!(p1.len(), p2.len());
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!((a.edge_index, a.obstacle_index), (b.edge_index, b.obstacle_index));
            assert!((a.gap - b.gap).abs() < 1e-9);
        }
    }
}

fn imc_energy(x: &[Vec3], obs: &[Obstacle], cfg: &ContactConfig) -> f64 {
    let pairs = detect(x, ROD_RADIUS, obs, cfg.cutoff);
    imc_accumulate(&pairs, x, cfg, None, None, false)
}

fn imc_gradient(x: &[Vec3], obs: &[Obstacle], cfg: &ContactConfig) -> Vec<f64> {
    let pairs = detect(x, ROD_RADIUS, obs, cfg.cutoff);
    let mut g = vec![0.0; 4 * x.len() - 1];
    imc_accumulate(&pairs, x, cfg, Some(&mut g), None, false);
    g
}

fn shifted(x: &[Vec3], dof: usize, h: f64) -> Vec<Vec3> {
    let mut y = x.to_vec();
    y[dof / 4][dof % 4] += h;
    y
}

/// Unconstrained optimum of each closest-point parameter lies clearly on the
/// same side of its bound as the clamped one, so small perturbations do not
/// switch which constraints are active.
fn params_are_stable(x: &[Vec3], pair: &ContactPair) -> bool {
    let (x0, x1) = (x[pair.edge_index], x[pair.edge_index + 1]);
    let e = x1 - x0;
    let s_star = (pair.obstacle_point - x0).dot(e) / e.norm_squared();
    let w = pair.obstacle_axis;
    let margin = 0.02;
    let ok = |p: f64, star: f64| {
        if p <= 0.0 {
            star < -margin
        } else if p >= 1.0 {
            star > 1.0 + margin
        } else {
            p > margin && p < 1.0 - margin
        }
    };
    let s_ok = ok(pair.params[0], s_star);
    if w.norm_squared() == 0.0 {
        return s_ok;
    }
    let u_star = (pair.rod_point - (pair.obstacle_point - w * pair.params[1])).dot(w) / w.norm_squared();
    s_ok && ok(pair.params[1], u_star)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

#[test]
fn imc_derivatives_match_finite_differences() {
    let cfg = ContactConfig::imc();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let h = 1e-7;
    let mut checked = 0;
    while checked < 100 {
        let rod: Vec<Vec3> = (0..4).map(|i| Vec3::new(0.05 * i as f64, 0.0, 0.0) + rand_vec(&mut rng, 0.01)).collect();
        let target_gap = rng.random_range(-cfg.delta..2.0 * cfg.delta);
        let r_obs = rng.random_range(0.03..0.08);
        let s = rng.random_range(0.1..0.9);
        let edge = rng.random_range(0..3);
        let p = rod[edge] + (rod[edge + 1] - rod[edge]) * s;
        let dir = rand_vec(&mut rng, 1.0).normalized();
        let centre = p + dir * (ROD_RADIUS + r_obs + target_gap);
        let obs = if rng.random_bool(0.5) {
            vec![Obstacle::sphere(centre, r_obs).unwrap()]
        } else {
            let axis = dir.cross(rand_vec(&mut rng, 1.0)).normalized() * 0.1;
            vec![Obstacle::capsule(centre - axis, centre + axis, r_obs).unwrap()]
        };
        let pairs = detect(&rod, ROD_RADIUS, &obs, cfg.cutoff);
        if pairs.is_empty() || !pairs.iter().all(|p| params_are_stable(&rod, p)) {
            continue;
        }
        let n = 4 * rod.len() - 1;
        let g = imc_gradient(&rod, &obs, &cfg);
        let mut fd = vec![0.0; n];
        let mut fdh = vec![vec![0.0; n]; n];
        for k in (0..n).filter(|k| k % 4 != 3) {
            let (xp, xm) = (shifted(&rod, k, h), shifted(&rod, k, -h));
            fd[k] = (imc_energy(&xp, &obs, &cfg) - imc_energy(&xm, &obs, &cfg)) / (2.0 * h);
            let (gp, gm) = (imc_gradient(&xp, &obs, &cfg), imc_gradient(&xm, &obs, &cfg));
            for j in 0..n {
                fdh[j][k] = (gp[j] - gm[j]) / (2.0 * h);
            }
        }
        assert!(g.iter().skip(3).step_by(4).all(|v| *v == 0.0));
        let ge = rel_err(&g, &fd);
        assert!(ge < 1e-5, "gradient rel err {ge:e}");

        let mut hm = softrod_core::banded::SymBandMatrix::for_rod(rod.len());
        imc_accumulate(&pairs, &rod, &cfg, None, Some(&mut hm), false);
        let dense = hm.to_dense();
        let analytic: Vec<f64> = dense.iter().flatten().copied().collect();
        let oracle: Vec<f64> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| 0.5 * (fdh[i][j] + fdh[j][i])).collect();
        let he = rel_err(&analytic, &oracle);
        assert!(he < 1e-5, "hessian rel err {he:e}");
        checked += 1;
    }
}

#[test]
fn imc_is_smooth_across_contact() {
    let cfg = ContactConfig::imc();
    let obs = [Obstacle::sphere(Vec3::new(0.05, 0.0, 0.0), 0.05).unwrap()];
    let energy_at = |z: f64| {
        let x = [Vec3::new(0.0, 0.0, z), Vec3::new(0.1, 0.0, z)];
        imc_energy(&x, &obs, &cfg)
    };
    // Sweep the gap from +3δ to -δ; the energy must rise monotonically and its
    // finite-difference slope must follow the analytic gradient throughout.
    let mut prev = 0.0;
    for i in 0..=400 {
        let gap = 3.0 * cfg.delta - i as f64 * 1e-4;
        let z = 0.1 + gap;
        let e = energy_at(z);
        assert!(e > prev || (e == 0.0 && prev == 0.0));
        prev = e;
        let h = 1e-8;
        let fd = (energy_at(z + h) - energy_at(z - h)) / (2.0 * h);
        let x = [Vec3::new(0.0, 0.0, z), Vec3::new(0.1, 0.0, z)];
        let g = imc_gradient(&x, &obs, &cfg);
        let an = g[2] + g[6];
        assert!((an - fd).abs() <= 1e-5 * an.abs().max(1e-3), "gap {gap}: {an} vs {fd}");
    }
}
