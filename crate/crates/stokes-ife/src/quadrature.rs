//! Quadrature on segments, triangles, cut-element sub-polygons and cut-edge
//! sub-segments.
//!
//! All integration is performed relative to the straight chords of the
//! discrete interface, never the curved interface itself, so sub-region rules
//! are exact for piecewise polynomials and the only geometry error is the one
//! the method itself commits through its approximate coefficient.

use crate::geometry::{polygon_area, signed_area, Vec2};
use crate::interface::{Classification, CutElement, Side};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Highest polynomial degree the rule builders accept.
pub const MAX_DEGREE: usize = 30;

/// Quadrature points in physical coordinates with weights summing to the
/// measure of the integration region.
#[derive(Debug, Clone, Default)]
pub struct QuadRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn empty() -> Self {
        QuadRule::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn append(&mut self, other: QuadRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence; accurate to machine precision for the orders
/// used here.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_m
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 {
                let (p2, d2) = legendre_with_derivative(m, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.reverse(); // ascending nodes
    out
}

/// Value and derivative of the Legendre polynomial P_m at x.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_unit(m: usize) -> Vec<(f64, f64)> {
    gauss_legendre(m)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

fn point_count_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss rule on the segment [p0, p1], exact for polynomials (restricted to
/// the segment) of total degree <= `degree`. Weights sum to the length.
pub fn segment_rule(p0: Vec2, p1: Vec2, degree: usize) -> Result<QuadRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree, MAX_DEGREE));
    }
    let len = (p1 - p0).norm();
    if len == 0.0 {
        return Err(Error::InvalidParams("zero-length quadrature segment".into()));
    }
    let mut rule = QuadRule::default();
    for (t, w) in gauss_unit(point_count_for(degree)) {
        rule.points.push(p0.lerp(p1, t));
        rule.weights.push(w * len);
    }
    Ok(rule)
}

/// Tensor rule on a triangle via the Duffy map x=u, y=v(1-u) from the unit
/// square; exact for total degree <= `degree`. Weights sum to the area.
pub fn triangle_rule(coords: [Vec2; 3], degree: usize) -> Result<QuadRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree, MAX_DEGREE));
    }
    let area = signed_area(coords[0], coords[1], coords[2]);
    let scale = (coords[1] - coords[0])
        .norm()
        .max((coords[2] - coords[0]).norm());
    if area.abs() <= 1e-14 * scale * scale {
        return Err(Error::DegenerateTriangle(area));
    }
    // The Duffy factor (1-u) raises the u-degree of a total-degree-d monomial
    // to d+1, while the v-degree stays <= d.
    let gu = gauss_unit(point_count_for(degree + 1));
    let gv = gauss_unit(point_count_for(degree));
    let jac = 2.0 * area.abs();
    let mut rule = QuadRule::default();
    for &(u, wu) in &gu {
        for &(v, wv) in &gv {
            let (xi, eta) = (u, v * (1.0 - u));
            rule.points.push(
                coords[0] + (coords[1] - coords[0]) * xi + (coords[2] - coords[0]) * eta,
            );
            rule.weights.push(wu * wv * (1.0 - u) * jac);
        }
    }
    Ok(rule)
}

/// Rule over one sub-polygon of a cut element, fan-triangulated from its
/// first vertex. Exact for total degree <= `degree` on the sub-polygon.
pub fn cut_element_rule(cut: &CutElement, side: Side, degree: usize) -> Result<QuadRule> {
    let poly = cut.polygon(side);
    let mut rule = QuadRule::default();
    let scale_sq = {
        let a = polygon_area(poly).abs();
        a.max(1e-300)
    };
    for i in 1..poly.len().saturating_sub(1) {
        let tri = [poly[0], poly[i], poly[i + 1]];
        // snapped cuts can leave a zero-area sliver in the fan; skip it
        if signed_area(tri[0], tri[1], tri[2]).abs() <= 1e-15 * scale_sq {
            continue;
        }
        rule.append(triangle_rule(tri, degree)?);
    }
    Ok(rule)
}

/// Splits the segment rule of [p0, p1] at an interior point `x`, returning
/// the rule of the part containing p0 first. A part of zero length yields an
/// empty rule.
pub fn split_segment_rule(
    p0: Vec2,
    p1: Vec2,
    x: Vec2,
    degree: usize,
) -> Result<(QuadRule, QuadRule)> {
    let first = if (x - p0).norm() == 0.0 {
        QuadRule::empty()
    } else {
        segment_rule(p0, x, degree)?
    };
    let second = if (p1 - x).norm() == 0.0 {
        QuadRule::empty()
    } else {
        segment_rule(x, p1, degree)?
    };
    Ok((first, second))
}

/// Per-side rules for an interface edge, split at its stored crossing point.
/// Returns the rule of the plus-side sub-segment first; sub-rule weights sum
/// to the edge length.
pub fn cut_edge_rule(
    mesh: &Mesh,
    cls: &Classification,
    edge: usize,
    degree: usize,
) -> Result<(QuadRule, QuadRule)> {
    let crossing = cls
        .edge_crossing
        .get(edge)
        .ok_or_else(|| Error::IndexOutOfRange(format!("edge {edge}")))?
        .ok_or_else(|| Error::InvalidParams(format!("edge {edge} is not an interface edge")))?;
    let e = &mesh.edges[edge];
    let (p0, p1) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
    let (r0, r1) = split_segment_rule(p0, p1, crossing, degree)?;
    // order the sub-rules (plus, minus) by the sign of the endpoint they touch
    if cls.vertex_signs[e.vertices[0]] > 0 {
        Ok((r0, r1))
    } else {
        Ok((r1, r0))
    }
}
