//! Planar geometry primitives: vectors, obstacle shapes, and the exact
//! ray intersections the depth sensor is built on.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// 2D vector in world coordinates (meters).
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at the given heading angle.
    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Angle of this vector measured from the +x axis, in (-pi, pi].
    pub fn angle(self) -> f64 {
        wrap_angle(self.y.atan2(self.x))
    }

    /// Rotate counter-clockwise by `theta` radians.
    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Cosine of the angle between two vectors; 0 when either has zero norm.
    pub fn cosine(self, other: Vec2) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (self.dot(other) / denom).clamp(-1.0, 1.0)
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Circular obstacle.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Circle { center, radius }
    }

    /// Strict interior test: points exactly on the boundary do not collide.
    pub fn contains(&self, p: Vec2) -> bool {
        p.distance(self.center) < self.radius
    }
}

/// Axis-aligned rectangle given by min/max corners.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Aabb { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Strict interior test (boundary excluded).
    pub fn contains(&self, p: Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    /// Closed containment, used for world-bounds checks.
    pub fn contains_closed(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_aabb(&self, other: &Aabb) -> bool {
        self.contains_closed(other.min) && self.contains_closed(other.max)
    }

    pub fn contains_circle(&self, c: &Circle) -> bool {
        let r = c.radius;
        self.contains_closed(Vec2::new(c.center.x - r, c.center.y - r))
            && self.contains_closed(Vec2::new(c.center.x + r, c.center.y + r))
    }
}

const RAY_EPS: f64 = 1e-12;

/// Distance along a unit-direction ray to the first boundary crossing of a
/// circle, if any. Intersections at or behind the origin are ignored.
pub fn ray_circle(origin: Vec2, dir: Vec2, circle: &Circle) -> Option<f64> {
    let m = origin - circle.center;
    let b = m.dot(dir);
    let c = m.dot(m) - circle.radius * circle.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > RAY_EPS {
        return Some(t0);
    }
    let t1 = -b + sq;
    if t1 > RAY_EPS {
        return Some(t1);
    }
    None
}

/// Distance along a unit-direction ray to the first boundary crossing of an
/// axis-aligned box, if any (slab method).
pub fn ray_aabb(origin: Vec2, dir: Vec2, rect: &Aabb) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;

    for (o, d, lo, hi) in [
        (origin.x, dir.x, rect.min.x, rect.max.x),
        (origin.y, dir.y, rect.min.y, rect.max.y),
    ] {
        if d.abs() < RAY_EPS {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let inv = 1.0 / d;
            let (t0, t1) = ((lo - o) * inv, (hi - o) * inv);
            let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return None;
            }
        }
    }

    if t_enter > RAY_EPS {
        Some(t_enter)
    } else if t_exit > RAY_EPS {
        Some(t_exit)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_stays_in_half_open_interval() {
        for k in -20..=20 {
            let a = 0.37 * k as f64;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "wrap({a}) = {w}");
            assert_relative_eq!(w.sin(), a.sin(), epsilon = 1e-12);
            assert_relative_eq!(w.cos(), a.cos(), epsilon = 1e-12);
        }
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn ray_hits_circle_head_on() {
        let c = Circle::new(Vec2::new(100.0, 0.0), 10.0);
        let t = ray_circle(Vec2::ZERO, Vec2::new(1.0, 0.0), &c).unwrap();
        assert_relative_eq!(t, 90.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_misses_circle_behind() {
        let c = Circle::new(Vec2::new(-100.0, 0.0), 10.0);
        assert!(ray_circle(Vec2::ZERO, Vec2::new(1.0, 0.0), &c).is_none());
    }

    #[test]
    fn ray_from_inside_circle_hits_far_side() {
        let c = Circle::new(Vec2::ZERO, 5.0);
        let t = ray_circle(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0), &c).unwrap();
        assert_relative_eq!(t, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_aabb_front_face() {
        let r = Aabb::new(Vec2::new(10.0, -5.0), Vec2::new(20.0, 5.0));
        let t = ray_aabb(Vec2::ZERO, Vec2::new(1.0, 0.0), &r).unwrap();
        assert_relative_eq!(t, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn ray_aabb_parallel_outside_misses() {
        let r = Aabb::new(Vec2::new(10.0, 10.0), Vec2::new(20.0, 20.0));
        assert!(ray_aabb(Vec2::ZERO, Vec2::new(1.0, 0.0), &r).is_none());
    }

    #[test]
    fn strict_interior_rules() {
        let c = Circle::new(Vec2::ZERO, 10.0);
        assert!(!c.contains(Vec2::new(10.0, 0.0)));
        assert!(!c.contains(Vec2::new(10.1, 0.0)));
        assert!(c.contains(Vec2::new(9.9, 0.0)));

        let b = Aabb::new(Vec2::ZERO, Vec2::new(1.0, 1.0));
        assert!(!b.contains(Vec2::new(0.0, 0.5)));
        assert!(b.contains(Vec2::new(0.5, 0.5)));
    }
}
