//! Minimal 2D point/vector arithmetic used throughout the crate.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product (signed parallelogram area).
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Complex-style multiplication: treats both points as x + iy.
    pub fn cmul(self, o: Point2) -> Point2 {
        Point2::new(self.x * o.x - self.y * o.y, self.x * o.y + self.y * o.x)
    }

    /// Rotation by `angle` radians about the origin.
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counterclockwise perpendicular (left normal of the vector).
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    fn div(self, s: f64) -> Point2 {
        Point2::new(self.x / s, self.y / s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Signed area of triangle (a, b, c); positive when counterclockwise.
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Squared distance from `p` to the closed segment [a, b].
pub fn dist_sq_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return (p - a).norm_sq();
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm_sq()
}

/// Proper or touching intersection test for segments [a,b] and [c,d].
///
/// Shared endpoints (within `tol`) do not count as intersections; this is the
/// notion needed for simplicity checks of closed polylines.
pub fn segments_collide(a: Point2, b: Point2, c: Point2, d: Point2, tol: f64) -> bool {
    let share = |u: Point2, v: Point2| u.dist(v) <= tol;
    if share(a, c) || share(a, d) || share(b, c) || share(b, d) {
        // Adjacent segments: still reject genuine overlap beyond the shared point.
        let o1 = (b - a).cross(c - a);
        let o2 = (b - a).cross(d - a);
        let o3 = (d - c).cross(a - c);
        let o4 = (d - c).cross(b - c);
        let scale = (b - a).norm() * (d - c).norm();
        if o1.abs() <= tol * scale
            && o2.abs() <= tol * scale
            && o3.abs() <= tol * scale
            && o4.abs() <= tol * scale
        {
            // Collinear: overlap iff projections overlap in more than a point.
            let dir = b - a;
            let t = |p: Point2| (p - a).dot(dir);
            let (s0, s1) = (t(a).min(t(b)), t(a).max(t(b)));
            let (r0, r1) = (t(c).min(t(d)), t(c).max(t(d)));
            let lo = s0.max(r0);
            let hi = s1.min(r1);
            return hi - lo > tol * dir.norm();
        }
        return false;
    }
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Touching cases (endpoint on the other segment's interior).
    let on = |p: Point2, u: Point2, v: Point2| dist_sq_to_segment(p, u, v) <= tol * tol;
    (d1.abs() <= f64::EPSILON * 16.0 * (b - a).norm() * (c - a).norm() && on(c, a, b))
        || (d2.abs() <= f64::EPSILON * 16.0 * (b - a).norm() * (d - a).norm() && on(d, a, b))
        || (d3.abs() <= f64::EPSILON * 16.0 * (d - c).norm() * (a - c).norm() && on(a, c, d))
        || (d4.abs() <= f64::EPSILON * 16.0 * (d - c).norm() * (b - c).norm() && on(b, c, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_and_area() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(1.0, 0.0);
        let c = Point2::new(0.0, 1.0);
        assert_eq!(signed_area(a, b, c), 0.5);
        assert_eq!(signed_area(a, c, b), -0.5);
    }

    #[test]
    fn segment_collision() {
        let o = Point2::new(0.0, 0.0);
        let e = Point2::new(1.0, 0.0);
        assert!(segments_collide(
            o,
            e,
            Point2::new(0.5, -0.5),
            Point2::new(0.5, 0.5),
            1e-12
        ));
        // Chained segments sharing an endpoint do not collide.
        assert!(!segments_collide(o, e, e, Point2::new(2.0, 1.0), 1e-12));
        // Collinear overlap does.
        assert!(segments_collide(
            o,
            e,
            Point2::new(0.5, 0.0),
            Point2::new(1.5, 0.0),
            1e-12
        ));
    }
}
