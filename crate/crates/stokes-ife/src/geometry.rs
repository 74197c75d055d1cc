//! Small fixed-size vector and matrix types for 2D geometry.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product, positive when `other` is
    /// counterclockwise from `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Rotation by +90 degrees (counterclockwise).
    pub fn perp_ccw(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rotation by -90 degrees (clockwise).
    pub fn perp_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn normalized(self) -> Vec2 {
        self / self.norm()
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A 2x2 matrix stored row-major; used for velocity gradients, where row `r`
/// holds the gradient of velocity component `r`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 { m: [[0.0; 2]; 2] };

    pub fn new(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Mat2 { m: [[m00, m01], [m10, m11]] }
    }

    /// Matrix with the given rows.
    pub fn from_rows(r0: Vec2, r1: Vec2) -> Self {
        Mat2::new(r0.x, r0.y, r1.x, r1.y)
    }

    /// Outer product `a b^T`.
    pub fn outer(a: Vec2, b: Vec2) -> Self {
        Mat2::new(a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y)
    }

    pub fn row(self, r: usize) -> Vec2 {
        Vec2::new(self.m[r][0], self.m[r][1])
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    /// Symmetric part `(A + A^T) / 2`; the strain tensor of a velocity gradient.
    pub fn sym(self) -> Mat2 {
        let off = 0.5 * (self.m[0][1] + self.m[1][0]);
        Mat2::new(self.m[0][0], off, off, self.m[1][1])
    }

    pub fn trace(self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.row(0).dot(v), self.row(1).dot(v))
    }

    /// Frobenius inner product `A : B`.
    pub fn ddot(self, o: Mat2) -> f64 {
        self.m[0][0] * o.m[0][0]
            + self.m[0][1] * o.m[0][1]
            + self.m[1][0] * o.m[1][0]
            + self.m[1][1] * o.m[1][1]
    }

    pub fn frobenius_sq(self) -> f64 {
        self.ddot(self)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.m[0][0] * s, self.m[0][1] * s, self.m[1][0] * s, self.m[1][1] * s)
    }
}

/// Signed area of the triangle `(a, b, c)`, positive for counterclockwise order.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Signed area of a simple polygon (shoelace), positive for counterclockwise
/// order. Anchored at the first vertex so rounding scales with the polygon
/// extent, not with its distance from the origin.
pub fn polygon_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += (pts[i] - pts[0]).cross(pts[i + 1] - pts[0]);
    }
    0.5 * s
}

/// Centroid of a simple polygon, anchored at the first vertex like
/// [`polygon_area`] for the same rounding reason.
pub fn polygon_centroid(pts: &[Vec2]) -> Vec2 {
    let n = pts.len();
    let mut c = Vec2::ZERO;
    let mut a = 0.0;
    for i in 1..n - 1 {
        let p = pts[i] - pts[0];
        let q = pts[i + 1] - pts[0];
        let w = p.cross(q);
        c = c + (p + q) * w;
        a += w;
    }
    if a.abs() < f64::MIN_POSITIVE {
        // fall back to the vertex average for degenerate polygons
        let mut m = Vec2::ZERO;
        for p in pts {
            m = m + *p;
        }
        return m / n as f64;
    }
    pts[0] + c / (3.0 * a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_and_perp_orientation() {
        let e1 = Vec2::new(1.0, 0.0);
        let e2 = Vec2::new(0.0, 1.0);
        assert_eq!(e1.cross(e2), 1.0);
        assert_eq!(e1.perp_ccw(), e2);
        assert_eq!(e2.perp_cw(), e1);
    }

    #[test]
    fn sym_and_ddot() {
        let g = Mat2::new(1.0, 2.0, 3.0, 4.0);
        let s = g.sym();
        assert_eq!(s.m[0][1], 2.5);
        assert_eq!(s.m[1][0], 2.5);
        assert_eq!(g.ddot(g), 1.0 + 4.0 + 9.0 + 16.0);
        assert_eq!(g.trace(), 5.0);
    }

    #[test]
    fn polygon_area_matches_triangle() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 0.0);
        let c = Vec2::new(0.0, 1.0);
        assert!((signed_area(a, b, c) - 0.5).abs() < 1e-15);
        assert!((polygon_area(&[a, b, c]) - 0.5).abs() < 1e-15);
        // clockwise order flips the sign
        assert!((polygon_area(&[a, c, b]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn centroid_of_unit_square() {
        let sq = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let c = polygon_centroid(&sq);
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
    }
}
