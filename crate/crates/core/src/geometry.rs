//! Planar vector math and shortest paths around a circular obstacle.
//!
//! The end-effector is modelled as a point in the table plane. The obstacle
//! is a sphere; its cross-section in that plane is a disc, and the shortest
//! collision-free path around a disc is two tangent segments joined by an
//! arc on the boundary.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// A point or velocity in the plane, in meters (or meters per second).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector in the same direction; the zero vector maps to zero.
    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            Vec2::ZERO
        }
    }

    /// Scales the vector down so its norm does not exceed `max_norm`.
    pub fn clamp_norm(self, max_norm: f64) -> Vec2 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self * (max_norm / n)
        } else {
            self
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

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Planar cross-section of a spherical obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec2,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec2, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(GeometryError::InvalidSphere { radius });
        }
        Ok(Self { center, radius })
    }

    /// Signed distance from the surface; negative inside.
    pub fn clearance(&self, p: Vec2) -> f64 {
        p.distance(self.center) - self.radius
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.distance(self.center) < self.radius
    }

    /// Moves a point inside the sphere radially onto its surface.
    pub fn project_outside(&self, p: Vec2) -> Vec2 {
        let offset = p - self.center;
        let d = offset.norm();
        if d >= self.radius {
            return p;
        }
        let dir = if d > 0.0 { offset / d } else { Vec2::new(0.0, 1.0) };
        self.center + dir * self.radius
    }

    fn check_outside(&self, p: Vec2) -> Result<f64, GeometryError> {
        let d = p.distance(self.center);
        if d < self.radius {
            Err(GeometryError::InsideObstacle {
                x: p.x,
                y: p.y,
                clearance: d - self.radius,
            })
        } else {
            Ok(d)
        }
    }
}

/// Whether the closed segment `pq` enters the open disc of `s`.
pub fn segment_intersects_sphere(p: Vec2, q: Vec2, s: Sphere) -> bool {
    let pq = q - p;
    let len2 = pq.norm_squared();
    let t = if len2 > 0.0 {
        ((s.center - p).dot(pq) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let closest = p + pq * t;
    closest.distance(s.center) < s.radius
}

/// One way around the obstacle: tangent from `from`, arc, tangent into `to`.
#[derive(Clone, Copy, Debug)]
struct Wrap {
    tangent_from: f64,
    tangent_to: f64,
    /// Angle of the first tangent point, measured at the center.
    start_angle: f64,
    arc_angle: f64,
    /// +1 counter-clockwise, -1 clockwise.
    turn: f64,
}

impl Wrap {
    fn length(&self, radius: f64) -> f64 {
        self.tangent_from + radius * self.arc_angle + self.tangent_to
    }
}

fn compute_wrap(from: Vec2, to: Vec2, s: Sphere, d_from: f64, d_to: f64) -> Wrap {
    let a_from = (from - s.center).angle();
    let a_to = (to - s.center).angle();
    let mut delta = a_to - a_from;
    while delta <= -PI {
        delta += 2.0 * PI;
    }
    while delta > PI {
        delta -= 2.0 * PI;
    }
    // Exactly opposite endpoints tie; go counter-clockwise.
    let turn = if delta >= 0.0 { 1.0 } else { -1.0 };
    let half_from = (s.radius / d_from).min(1.0).acos();
    let half_to = (s.radius / d_to).min(1.0).acos();
    let arc_angle = (delta.abs() - half_from - half_to).max(0.0);
    Wrap {
        tangent_from: (d_from * d_from - s.radius * s.radius).max(0.0).sqrt(),
        tangent_to: (d_to * d_to - s.radius * s.radius).max(0.0).sqrt(),
        start_angle: a_from + turn * half_from,
        arc_angle,
        turn,
    }
}

/// Length of the shortest path from `x` to `g` that stays outside `s`.
pub fn wrap_path_length(x: Vec2, g: Vec2, s: Sphere) -> Result<f64, GeometryError> {
    let dx = s.check_outside(x)?;
    let dg = s.check_outside(g)?;
    if !segment_intersects_sphere(x, g, s) {
        return Ok(x.distance(g));
    }
    Ok(compute_wrap(x, g, s, dx, dg).length(s.radius))
}

/// Path length with an optional obstacle.
pub fn path_length(x: Vec2, g: Vec2, obstacle: Option<Sphere>) -> Result<f64, GeometryError> {
    match obstacle {
        Some(s) => wrap_path_length(x, g, s),
        None => Ok(x.distance(g)),
    }
}

/// Unit tangent of the shortest path at arc-length `s_along` from the start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    pub point: Vec2,
    pub direction: Vec2,
}

/// `m` points at arc-length fractions `1/(m+1) .. m/(m+1)` of the shortest
/// collision-free path, with the path's direction of travel at each.
pub fn wrap_path_samples(
    x: Vec2,
    g: Vec2,
    obstacle: Option<Sphere>,
    m: usize,
) -> Result<Vec<PathSample>, GeometryError> {
    let straight = |x: Vec2, g: Vec2| -> Vec<PathSample> {
        let dir = (g - x).unit();
        (1..=m)
            .map(|k| {
                let frac = k as f64 / (m + 1) as f64;
                PathSample {
                    point: x + (g - x) * frac,
                    direction: dir,
                }
            })
            .collect()
    };
    let s = match obstacle {
        None => return Ok(straight(x, g)),
        Some(s) => s,
    };
    let dx = s.check_outside(x)?;
    let dg = s.check_outside(g)?;
    if !segment_intersects_sphere(x, g, s) {
        return Ok(straight(x, g));
    }
    let wrap = compute_wrap(x, g, s, dx, dg);
    let total = wrap.length(s.radius);
    let arc_len = s.radius * wrap.arc_angle;
    let t1 = s.center + Vec2::from_angle(wrap.start_angle) * s.radius;
    let end_angle = wrap.start_angle + wrap.turn * wrap.arc_angle;
    let t2 = s.center + Vec2::from_angle(end_angle) * s.radius;

    let samples = (1..=m)
        .map(|k| {
            let along = total * k as f64 / (m + 1) as f64;
            if along <= wrap.tangent_from {
                let dir = (t1 - x).unit();
                PathSample {
                    point: x + dir * along,
                    direction: dir,
                }
            } else if along <= wrap.tangent_from + arc_len {
                let phi = wrap.start_angle + wrap.turn * (along - wrap.tangent_from) / s.radius;
                let radial = Vec2::from_angle(phi);
                PathSample {
                    point: s.center + radial * s.radius,
                    direction: Vec2::new(-radial.y, radial.x) * wrap.turn,
                }
            } else {
                let dir = (g - t2).unit();
                let rest = along - wrap.tangent_from - arc_len;
                PathSample {
                    point: t2 + dir * rest,
                    direction: dir,
                }
            }
        })
        .collect();
    Ok(samples)
}

/// Intermediate points of the shortest collision-free path from `x` to `g`.
pub fn wrap_path_waypoints(
    x: Vec2,
    g: Vec2,
    obstacle: Option<Sphere>,
    m: usize,
) -> Result<Vec<Vec2>, GeometryError> {
    Ok(wrap_path_samples(x, g, obstacle, m)?
        .into_iter()
        .map(|s| s.point)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sphere(cx: f64, cy: f64, r: f64) -> Sphere {
        Sphere::new(Vec2::new(cx, cy), r).unwrap()
    }

    #[test]
    fn segment_through_center_intersects() {
        let s = sphere(1.0, 0.0, 0.5);
        assert!(segment_intersects_sphere(Vec2::ZERO, Vec2::new(2.0, 0.0), s));
    }

    #[test]
    fn segment_with_clearance_misses() {
        let s = sphere(1.0, 1.0, 0.5);
        assert!(!segment_intersects_sphere(Vec2::ZERO, Vec2::new(2.0, 0.0), s));
    }

    #[test]
    fn degenerate_segment_outside_misses() {
        let s = sphere(1.0, 0.0, 0.5);
        assert!(!segment_intersects_sphere(Vec2::ZERO, Vec2::ZERO, s));
    }

    #[test]
    fn wrap_length_through_center() {
        // tangents 2*sqrt(0.75), arc 0.5 * (pi - 2*acos(0.5))
        let s = sphere(1.0, 0.0, 0.5);
        let len = wrap_path_length(Vec2::ZERO, Vec2::new(2.0, 0.0), s).unwrap();
        assert_abs_diff_eq!(len, 2.2556, epsilon = 1e-3);
    }

    #[test]
    fn wrap_length_without_intersection_is_straight() {
        let s = sphere(1.0, 1.0, 0.5);
        let len = wrap_path_length(Vec2::ZERO, Vec2::new(2.0, 0.0), s).unwrap();
        assert_eq!(len, 2.0);
        assert_eq!(wrap_path_length(Vec2::ZERO, Vec2::ZERO, s).unwrap(), 0.0);
    }

    #[test]
    fn endpoint_inside_sphere_is_domain_error() {
        let s = sphere(1.0, 0.0, 0.5);
        let err = wrap_path_length(Vec2::new(1.1, 0.0), Vec2::new(3.0, 0.0), s);
        assert!(matches!(err, Err(GeometryError::InsideObstacle { .. })));
        let err = wrap_path_waypoints(Vec2::ZERO, Vec2::new(1.0, 0.2), Some(s), 3);
        assert!(err.is_err());
    }

    #[test]
    fn straight_waypoints_are_equidistant() {
        let pts = wrap_path_waypoints(Vec2::ZERO, Vec2::new(0.0, 0.6), None, 5).unwrap();
        let expected = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(pts.len(), 5);
        for (p, e) in pts.iter().zip(expected) {
            assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.y, e, epsilon = 1e-12);
        }
        assert!(wrap_path_waypoints(Vec2::ZERO, Vec2::new(0.0, 0.6), None, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn wrapped_midpoint_lies_on_arc() {
        let s = sphere(1.0, 0.0, 0.5);
        let pts = wrap_path_waypoints(Vec2::ZERO, Vec2::new(2.0, 0.0), Some(s), 1).unwrap();
        assert_eq!(pts.len(), 1);
        // Symmetric wrap: the midpoint is the top of the arc.
        assert_abs_diff_eq!(pts[0].distance(s.center), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(pts[0].x, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn clamp_norm_saturates() {
        let v = Vec2::new(3.0, 4.0).clamp_norm(1.0);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(Vec2::new(0.1, 0.0).clamp_norm(1.0), Vec2::new(0.1, 0.0));
        assert_eq!(Vec2::ZERO.unit(), Vec2::ZERO);
    }
}
