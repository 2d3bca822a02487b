//! Small 3D vector type shared by the world, agent and planner.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// A point or displacement in the local world frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn horizontal_distance(self, other: Vec3) -> f64 {
        (self - other).horizontal_norm()
    }

    pub fn with_z(self, z: f64) -> Self {
        Self { z, ..self }
    }

    pub fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl std::fmt::Display for Vec3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Distance from `point` to the closed segment `a`–`b`.
pub fn point_segment_distance(point: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return point.distance(a);
    }
    let t = ((point - a).dot(ab) / len2).clamp(0.0, 1.0);
    point.distance(a + ab * t)
}

/// Exact Euclidean distance between the closed segment `a`–`b` and the
/// axis-aligned box `[lo, hi]`. Zero when they touch or overlap.
///
/// The squared distance is a convex piecewise quadratic in the segment
/// parameter; breakpoints are where a coordinate crosses a slab face, and the
/// minimum inside each piece is found in closed form.
pub fn segment_box_distance(a: Vec3, b: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let p0 = [a.x, a.y, a.z];
    let d = [b.x - a.x, b.y - a.y, b.z - a.z];
    let lo = [lo.x, lo.y, lo.z];
    let hi = [hi.x, hi.y, hi.z];

    let mut breaks = vec![0.0, 1.0];
    for i in 0..3 {
        if d[i] != 0.0 {
            for bound in [lo[i], hi[i]] {
                let t = (bound - p0[i]) / d[i];
                if t > 0.0 && t < 1.0 {
                    breaks.push(t);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);

    let sq_dist_at = |t: f64| -> f64 {
        (0..3)
            .map(|i| {
                let v = p0[i] + d[i] * t;
                let e = if v < lo[i] {
                    lo[i] - v
                } else if v > hi[i] {
                    v - hi[i]
                } else {
                    0.0
                };
                e * e
            })
            .sum()
    };

    let mut best = f64::INFINITY;
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        best = best.min(sq_dist_at(t0)).min(sq_dist_at(t1));
        if t1 <= t0 {
            continue;
        }
        // Inside the piece each axis is either inside its slab or on a fixed
        // side of it, so the squared distance is a single quadratic.
        let mid = 0.5 * (t0 + t1);
        let (mut qa, mut qb) = (0.0, 0.0);
        for i in 0..3 {
            let v = p0[i] + d[i] * mid;
            let bound = if v < lo[i] {
                lo[i]
            } else if v > hi[i] {
                hi[i]
            } else {
                continue;
            };
            let off = p0[i] - bound;
            qa += d[i] * d[i];
            qb += 2.0 * d[i] * off;
        }
        if qa > 0.0 {
            let t = (-qb / (2.0 * qa)).clamp(t0, t1);
            best = best.min(sq_dist_at(t));
        }
    }
    best.max(0.0).sqrt()
}

/// Normalizes an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}
