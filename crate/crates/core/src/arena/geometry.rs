//! Planar geometry on the ground plane. `x` points east, `z` points north and
//! `y` is elevation. Angles are degrees measured clockwise from north, so a
//! heading of 90 faces east.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
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

    pub fn flat(self) -> Vec2 {
        Vec2::new(self.x, self.z)
    }

    pub fn length(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// A point or direction on the ground plane (`x`, `z`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub z: f64,
}

impl Vec2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        if l == 0.0 {
            self
        } else {
            self * (1.0 / l)
        }
    }

    /// Unit vector for a compass heading in degrees.
    pub fn from_heading(degrees: f64) -> Vec2 {
        let (s, c) = heading_sin_cos(degrees);
        Vec2::new(s, c)
    }

    /// Unit vector pointing to the right of `from_heading(degrees)`.
    pub fn right_of_heading(degrees: f64) -> Vec2 {
        let (s, c) = heading_sin_cos(degrees);
        Vec2::new(c, -s)
    }

    /// Compass bearing of this direction in degrees, in `(-180, 180]`.
    pub fn heading(self) -> f64 {
        self.x.atan2(self.z).to_degrees()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.z + o.z)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.z - o.z)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.z * k)
    }
}

/// `(sin, cos)` of a heading, exact on the compass axes.
pub fn heading_sin_cos(degrees: f64) -> (f64, f64) {
    let d = degrees.rem_euclid(360.0);
    if d == 0.0 {
        (0.0, 1.0)
    } else if d == 90.0 {
        (1.0, 0.0)
    } else if d == 180.0 {
        (0.0, -1.0)
    } else if d == 270.0 {
        (-1.0, 0.0)
    } else {
        d.to_radians().sin_cos()
    }
}

/// Signed smallest difference `to - from` in degrees, in `(-180, 180]`.
pub fn angle_diff(from: f64, to: f64) -> f64 {
    let mut d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Oriented rectangle on the ground plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub half_x: f64,
    pub half_z: f64,
    /// Local `+x` axis in world coordinates.
    pub axis_x: Vec2,
    /// Local `+z` axis in world coordinates.
    pub axis_z: Vec2,
}

impl Obb {
    pub fn new(center: Vec2, half_x: f64, half_z: f64, rotation_deg: f64) -> Self {
        Self {
            center,
            half_x,
            half_z,
            axis_x: Vec2::right_of_heading(rotation_deg),
            axis_z: Vec2::from_heading(rotation_deg),
        }
    }

    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let d = p - self.center;
        Vec2::new(d.dot(self.axis_x), d.dot(self.axis_z))
    }

    pub fn to_world(&self, local: Vec2) -> Vec2 {
        self.center + self.axis_x * local.x + self.axis_z * local.z
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_x && l.z.abs() <= self.half_z
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.to_world(Vec2::new(-self.half_x, -self.half_z)),
            self.to_world(Vec2::new(self.half_x, -self.half_z)),
            self.to_world(Vec2::new(self.half_x, self.half_z)),
            self.to_world(Vec2::new(-self.half_x, self.half_z)),
        ]
    }

    pub fn translated(&self, d: Vec2) -> Obb {
        Obb {
            center: self.center + d,
            ..*self
        }
    }

    /// Distance from `p` to the rectangle (zero inside).
    pub fn distance(&self, p: Vec2) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half_x).max(0.0);
        let dz = (l.z.abs() - self.half_z).max(0.0);
        (dx * dx + dz * dz).sqrt()
    }

    /// Minimal translation that moves a circle out of the rectangle, if the two
    /// overlap.
    pub fn circle_push_out(&self, p: Vec2, radius: f64) -> Option<Vec2> {
        let l = self.to_local(p);
        let inside = l.x.abs() <= self.half_x && l.z.abs() <= self.half_z;
        if inside {
            // Leave through the nearest face.
            let pen_x = self.half_x - l.x.abs() + radius;
            let pen_z = self.half_z - l.z.abs() + radius;
            let local = if pen_x <= pen_z {
                Vec2::new(pen_x * l.x.signum_or_one(), 0.0)
            } else {
                Vec2::new(0.0, pen_z * l.z.signum_or_one())
            };
            return Some(self.axis_x * local.x + self.axis_z * local.z);
        }
        let closest = Vec2::new(
            l.x.clamp(-self.half_x, self.half_x),
            l.z.clamp(-self.half_z, self.half_z),
        );
        let delta = l - closest;
        let dist = delta.length();
        if dist >= radius {
            return None;
        }
        let n = delta * (1.0 / dist);
        let push = n * (radius - dist);
        Some(self.axis_x * push.x + self.axis_z * push.z)
    }

    /// Separating-axis overlap test; touching rectangles do not overlap.
    pub fn overlaps(&self, other: &Obb) -> bool {
        const EPS: f64 = 1e-9;
        let axes = [self.axis_x, self.axis_z, other.axis_x, other.axis_z];
        let a = self.corners();
        let b = other.corners();
        for axis in axes {
            let (amin, amax) = project(&a, axis);
            let (bmin, bmax) = project(&b, axis);
            if amax <= bmin + EPS || bmax <= amin + EPS {
                return false;
            }
        }
        true
    }

    /// Parametric entry/exit of the ray `origin + t * dir` through the
    /// rectangle, with `t_exit > max(t_entry, 0)`.
    pub fn ray_interval(&self, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
        let o = self.to_local(origin);
        let d = Vec2::new(dir.dot(self.axis_x), dir.dot(self.axis_z));
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for (oc, dc, h) in [(o.x, d.x, self.half_x), (o.z, d.z, self.half_z)] {
            if dc.abs() < 1e-12 {
                if oc.abs() > h {
                    return None;
                }
            } else {
                let a = (-h - oc) / dc;
                let b = (h - oc) / dc;
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                t0 = t0.max(lo);
                t1 = t1.min(hi);
            }
        }
        if t1 <= t0.max(0.0) {
            None
        } else {
            Some((t0, t1))
        }
    }
}

fn project(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let v = p.dot(axis);
        (lo.min(v), hi.max(v))
    })
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}
