//! Moving-target path: a Catmull-Rom spline through random waypoints,
//! traversed at constant speed.

use alloc::vec::Vec;

use crate::math::Vec3;

const SAMPLES_PER_SEGMENT: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct TargetPath {
    samples: Vec<Vec3>,
    /// Cumulative arc length at each sample.
    arc: Vec<f64>,
    speed: f64,
    max_radius: f64,
}

fn catmull_rom(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3, t: f64) -> Vec3 {
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3) * 0.5
}

impl TargetPath {
    /// Spline through `waypoints` (at least two); positions farther than
    /// `max_radius` from the origin are pulled back onto that sphere.
    pub fn new(waypoints: &[Vec3], speed: f64, max_radius: f64) -> Self {
        assert!(waypoints.len() >= 2, "path needs two waypoints");
        let n = waypoints.len();
        let at = |i: isize| waypoints[i.clamp(0, n as isize - 1) as usize];
        let mut samples = Vec::with_capacity((n - 1) * SAMPLES_PER_SEGMENT + 1);
        for seg in 0..n - 1 {
            let i = seg as isize;
            for k in 0..SAMPLES_PER_SEGMENT {
                let t = k as f64 / SAMPLES_PER_SEGMENT as f64;
                samples.push(catmull_rom(at(i - 1), at(i), at(i + 1), at(i + 2), t));
            }
        }
        samples.push(waypoints[n - 1]);
        let mut arc = Vec::with_capacity(samples.len());
        let mut s = 0.0;
        arc.push(0.0);
        for w in samples.windows(2) {
            s += (w[1] - w[0]).norm();
            arc.push(s);
        }
        TargetPath { samples, arc, speed, max_radius }
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().expect("non-empty")
    }

    /// Target position after `t` seconds; holds the final point past the end.
    pub fn position(&self, t: f64) -> Vec3 {
        let s = (self.speed * t).clamp(0.0, self.length());
        let k = match self.arc.binary_search_by(|a| a.partial_cmp(&s).expect("finite arc length")) {
            Ok(k) => k.min(self.samples.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.samples.len() - 2),
        };
        let span = self.arc[k + 1] - self.arc[k];
        let f = if span > 0.0 { (s - self.arc[k]) / span } else { 0.0 };
        let p = self.samples[k] + (self.samples[k + 1] - self.samples[k]) * f;
        let r = p.norm();
        if r > self.max_radius {
            p * (self.max_radius / r)
        } else {
            p
        }
    }

    /// Central-difference velocity of [`position`](Self::position).
    pub fn velocity(&self, t: f64) -> Vec3 {
        let h = 1e-3;
        let lo = (t - h).max(0.0);
        (self.position(t + h) - self.position(lo)) * (1.0 / (t + h - lo))
    }
}
