//! Obstacle scenes and target sampling.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::contact::{closest_segment_params, Obstacle};
use crate::error::{Error, Result};
use crate::math::{Vec3, PI};

/// Surface-to-surface opening between the two tight obstacles (m).
pub const TIGHT_GAP: f64 = 0.12;
/// Distance of the tight obstacle pair from the base along x (m).
pub const TIGHT_X: f64 = 0.35;
pub const TIGHT_RADIUS: f64 = 0.05;
pub const TIGHT_HALF_WIDTH: f64 = 0.5;

pub const RANDOM_OBSTACLES: usize = 8;
/// Sampling box for the random obstacle centres.
pub const RANDOM_BOX: (Vec3, Vec3) = (Vec3::new(0.3, -0.35, -0.05), Vec3::new(0.75, 0.35, 0.45));
pub const RANDOM_TARGET: Vec3 = Vec3::new(0.5, 0.0, 0.6);
/// Minimum clearance of sampled obstacles from each other and from the rod.
pub const RANDOM_CLEARANCE: f64 = 0.02;

/// Height of the polyline `nodes` where it crosses `x`.
pub fn height_at(nodes: &[Vec3], x: f64) -> f64 {
    for w in nodes.windows(2) {
        if (w[0].x - x) * (w[1].x - x) <= 0.0 && w[0].x != w[1].x {
            let f = (x - w[0].x) / (w[1].x - w[0].x);
            return w[0].z + f * (w[1].z - w[0].z);
        }
    }
    nodes.last().map(|p| p.z).unwrap_or(0.0)
}

/// Two capsules with axes along y, one above and one below the rod at
/// `x = TIGHT_X`, leaving a `TIGHT_GAP` opening centred on the rod.
pub fn tight_obstacles(start: &[Vec3]) -> Vec<Obstacle> {
    let zc = height_at(start, TIGHT_X);
    let offset = 0.5 * TIGHT_GAP + TIGHT_RADIUS;
    [zc - offset, zc + offset]
        .iter()
        .map(|&z| Obstacle::Capsule {
            a: Vec3::new(TIGHT_X, -TIGHT_HALF_WIDTH, z),
            b: Vec3::new(TIGHT_X, TIGHT_HALF_WIDTH, z),
            radius: TIGHT_RADIUS,
        })
        .collect()
}

/// Target of the tight-gap task: above the straight continuation of the rod
/// past the opening, so the rod has to bend once it is through.
pub fn tight_target(start: &[Vec3]) -> Vec3 {
    let zc = height_at(start, TIGHT_X);
    Vec3::new(0.75, 0.0, zc + 0.25)
}

fn capsule_distance(a: &Obstacle, b: &Obstacle) -> f64 {
    let (a0, a1) = a.segment();
    let (b0, b1) = b.segment();
    let (s, u) = closest_segment_params(a0, a1, b0, b1);
    ((a0 + (a1 - a0) * s) - (b0 + (b1 - b0) * u)).norm() - a.radius() - b.radius()
}

fn rod_gap(o: &Obstacle, nodes: &[Vec3], rod_radius: f64) -> f64 {
    let (a, b) = o.segment();
    nodes
        .windows(2)
        .map(|w| {
            let (s, u) = closest_segment_params(w[0], w[1], a, b);
            ((w[0] + (w[1] - w[0]) * s) - (a + (b - a) * u)).norm() - rod_radius - o.radius()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Rejection-samples `RANDOM_OBSTACLES` capsules in `RANDOM_BOX`, pairwise
/// separated and clear of the rod's start pose.
pub fn random_obstacles(rng: &mut ChaCha8Rng, start: &[Vec3], rod_radius: f64) -> Result<Vec<Obstacle>> {
    let (lo, hi) = RANDOM_BOX;
    let mut out: Vec<Obstacle> = Vec::with_capacity(RANDOM_OBSTACLES);
    let mut attempts = 0;
    while out.len() < RANDOM_OBSTACLES {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::InvalidSpec("could not place random obstacles".into()));
        }
        let c = Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
        let dir = random_unit(rng);
        let half = rng.random_range(0.04..0.12);
        let radius = rng.random_range(0.03..0.06);
        let o = Obstacle::Capsule { a: c - dir * half, b: c + dir * half, radius };
        if rod_gap(&o, start, rod_radius) < RANDOM_CLEARANCE {
            continue;
        }
        if (RANDOM_TARGET - c).norm() < radius + half + 0.1 {
            continue;
        }
        if out.iter().any(|p| capsule_distance(p, &o) < RANDOM_CLEARANCE) {
            continue;
        }
        out.push(o);
    }
    Ok(out)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi = rng.random_range(0.0..2.0 * PI);
    let r = crate::math::sqrt(1.0 - z * z);
    Vec3::new(r * crate::math::cos(phi), r * crate::math::sin(phi), z)
}

/// Point in the reachable shell: distance from the base in
/// `[0.4, 0.85]·length`, at least `0.2·length` forward of the base.
pub fn shell_point(rng: &mut ChaCha8Rng, length: f64) -> Vec3 {
    loop {
        let p = random_unit(rng) * (length * rng.random_range(0.4..0.85));
        if p.x >= 0.2 * length {
            return p;
        }
    }
}

/// Smallest surface gap between any pair of obstacles.
pub fn min_pairwise_gap(obstacles: &[Obstacle]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..obstacles.len() {
        for j in i + 1..obstacles.len() {
            m = m.min(capsule_distance(&obstacles[i], &obstacles[j]));
        }
    }
    m
}

/// Smallest surface gap between the rod and any obstacle.
pub fn min_rod_gap(obstacles: &[Obstacle], nodes: &[Vec3], rod_radius: f64) -> f64 {
    obstacles.iter().map(|o| rod_gap(o, nodes, rod_radius)).fold(f64::INFINITY, f64::min)
}
