//! Local shape functions: the standard CR-P0 basis on ordinary elements, the
//! immersed CR-P0 basis on cut elements, local interpolation, and the dense
//! 14x14 oracle that re-derives the immersed basis from the interface
//! conditions for cross-checking.
//!
//! The immersed basis is stored structurally as (CR part, correction scalars,
//! shared chord data) rather than as raw per-side polynomial coefficients:
//! velocity_i = phi_i + c2[i] * (w_side - pi_w) * t_h and
//! pressure_i = c1[i] * (z_side - pi0_z), where w is the one-sided distance
//! to the chord, pi_w its CR interpolant, z the one-sided indicator and
//! pi0_z its element mean. This keeps the unisolvence quantity
//! theta = grad(pi_w) . n_h exposed, which equals the plus-side area
//! fraction and bounds the construction away from singularity.

use crate::geometry::{Mat2, Vec2};
use crate::interface::{CutElement, Side};
use crate::quadrature::{cut_element_rule, segment_rule, triangle_rule};
use crate::{Error, Result};

/// The three scalar CR shape functions of a triangle: affine, with unit
/// average on their own edge and zero average on the others.
#[derive(Debug, Clone)]
pub struct CrBasis {
    pub coords: [Vec2; 3],
    pub area: f64,
    pub h_t: f64,
    /// lambda_k(x) = consts[k] + grads[k] . x
    pub consts: [f64; 3],
    pub grads: [Vec2; 3],
}

pub fn build_cr_basis(coords: [Vec2; 3]) -> Result<CrBasis> {
    let area = crate::geometry::signed_area(coords[0], coords[1], coords[2]);
    let h_t = (0..3)
        .map(|k| (coords[(k + 1) % 3] - coords[k]).norm())
        .fold(0.0, f64::max);
    if area.abs() <= 1e-14 * h_t * h_t {
        return Err(Error::DegenerateTriangle(area));
    }
    let mut consts = [0.0; 3];
    let mut grads = [Vec2::ZERO; 3];
    for k in 0..3 {
        // barycentric coordinate of vertex k, then lambda_k = 1 - 2 b_k
        let opposite = coords[(k + 2) % 3] - coords[(k + 1) % 3];
        let gb = opposite.perp_ccw() / (2.0 * area);
        let cb = 1.0 - gb.dot(coords[k]);
        grads[k] = -gb * 2.0;
        consts[k] = 1.0 - 2.0 * cb;
    }
    Ok(CrBasis { coords, area, h_t, consts, grads })
}

impl CrBasis {
    pub fn scalar_value(&self, k: usize, x: Vec2) -> f64 {
        self.consts[k] + self.grads[k].dot(x)
    }

    /// Vector velocity basis: i in 0..3 is (lambda_i, 0), i in 3..6 is
    /// (0, lambda_{i-3}).
    pub fn velocity_value(&self, i: usize, x: Vec2) -> Vec2 {
        let l = self.scalar_value(i % 3, x);
        if i < 3 {
            Vec2::new(l, 0.0)
        } else {
            Vec2::new(0.0, l)
        }
    }

    pub fn velocity_grad(&self, i: usize) -> Mat2 {
        let g = self.grads[i % 3];
        if i < 3 {
            Mat2::from_rows(g, Vec2::ZERO)
        } else {
            Mat2::from_rows(Vec2::ZERO, g)
        }
    }
}

/// Evaluation of one local basis pair: velocity, its gradient, and the
/// pressure component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval {
    pub velocity: Vec2,
    pub grad: Mat2,
    pub pressure: f64,
}

impl BasisEval {
    pub const ZERO: BasisEval =
        BasisEval { velocity: Vec2::ZERO, grad: Mat2::ZERO, pressure: 0.0 };
}

/// Immersed CR-P0 basis of one cut element.
#[derive(Debug, Clone)]
pub struct IfeBasis {
    pub cut: CutElement,
    pub cr: CrBasis,
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// CR interpolant of w as an affine function.
    pub pi_w_const: f64,
    pub pi_w_grad: Vec2,
    /// grad(pi_w) . n_h; equals frac_plus up to rounding.
    pub theta: f64,
    /// 1 + (mu_minus/mu_plus - 1) * theta; bounded below by
    /// min(1, mu_minus/mu_plus), so the construction never degenerates.
    pub denom: f64,
    pub frac_plus: f64,
    /// Pressure correction scalars, 2 (mu- - mu+) (eps(phi_i) n_h) . n_h.
    pub c1: [f64; 6],
    /// Velocity correction scalars,
    /// 2 (mu-/mu+ - 1) (eps(phi_i) n_h) . t_h / denom.
    pub c2: [f64; 6],
}

/// Average of w = max(chord coordinate, 0) over the segment [p, q], using
/// that w is piecewise linear along it. Closed form because this feeds theta
/// and hence the unisolvence denominator.
fn w_segment_average(cut: &CutElement, p: Vec2, q: Vec2) -> f64 {
    let (sp, sq) = (cut.chord_coordinate(p), cut.chord_coordinate(q));
    if sp >= 0.0 && sq >= 0.0 {
        0.5 * (sp + sq)
    } else if sp <= 0.0 && sq <= 0.0 {
        0.0
    } else if sp > 0.0 {
        sp * sp / (2.0 * (sp - sq))
    } else {
        sq * sq / (2.0 * (sq - sp))
    }
}

pub fn build_ife_basis(cut: &CutElement, mu_plus: f64, mu_minus: f64) -> Result<IfeBasis> {
    if !(mu_plus > 0.0) || !(mu_minus > 0.0) {
        return Err(Error::InvalidParams(format!(
            "viscosities must be positive, got {mu_plus} and {mu_minus}"
        )));
    }
    let cr = build_cr_basis(cut.coords)?;

    let mut pi_w_const = 0.0;
    let mut pi_w_grad = Vec2::ZERO;
    for k in 0..3 {
        let avg = w_segment_average(cut, cut.coords[(k + 1) % 3], cut.coords[(k + 2) % 3]);
        pi_w_const += avg * cr.consts[k];
        pi_w_grad = pi_w_grad + cr.grads[k] * avg;
    }
    let theta = pi_w_grad.dot(cut.n_h);
    let ratio = mu_minus / mu_plus;
    let denom = 1.0 + (ratio - 1.0) * theta;

    let mut c1 = [0.0; 6];
    let mut c2 = [0.0; 6];
    for i in 0..6 {
        let strain_n = cr.velocity_grad(i).sym().mul_vec(cut.n_h);
        c1[i] = 2.0 * (mu_minus - mu_plus) * strain_n.dot(cut.n_h);
        c2[i] = 2.0 * (ratio - 1.0) * strain_n.dot(cut.t_h) / denom;
    }

    Ok(IfeBasis {
        cut: cut.clone(),
        cr,
        mu_plus,
        mu_minus,
        pi_w_const,
        pi_w_grad,
        theta,
        denom,
        frac_plus: cut.frac_plus,
        c1,
        c2,
    })
}

impl IfeBasis {
    pub fn eval(&self, i: usize, x: Vec2, side: Side) -> BasisEval {
        assert!(i < 7, "basis index {i} out of range");
        if i == 6 {
            return BasisEval { velocity: Vec2::ZERO, grad: Mat2::ZERO, pressure: 1.0 };
        }
        let (w_val, w_grad) = match side {
            Side::Plus => (self.cut.chord_coordinate(x), self.cut.n_h),
            Side::Minus => (0.0, Vec2::ZERO),
        };
        let bump = w_val - (self.pi_w_const + self.pi_w_grad.dot(x));
        let velocity = self.cr.velocity_value(i, x) + self.cut.t_h * (self.c2[i] * bump);
        let grad = self.cr.velocity_grad(i)
            + Mat2::outer(self.cut.t_h, w_grad - self.pi_w_grad) * self.c2[i];
        // z_plus = -1, z_minus = 0, element mean -frac_plus
        let z_fluct = match side {
            Side::Plus => self.frac_plus - 1.0,
            Side::Minus => self.frac_plus,
        };
        BasisEval { velocity, grad, pressure: self.c1[i] * z_fluct }
    }
}

/// The local basis of any element, immersed or not.
#[derive(Debug, Clone)]
pub enum LocalBasis {
    Standard(CrBasis),
    Immersed(Box<IfeBasis>),
}

impl LocalBasis {
    pub fn eval(&self, i: usize, x: Vec2, side: Side) -> BasisEval {
        assert!(i < 7, "basis index {i} out of range");
        match self {
            LocalBasis::Standard(cr) => {
                if i == 6 {
                    BasisEval { velocity: Vec2::ZERO, grad: Mat2::ZERO, pressure: 1.0 }
                } else {
                    BasisEval {
                        velocity: cr.velocity_value(i, x),
                        grad: cr.velocity_grad(i),
                        pressure: 0.0,
                    }
                }
            }
            LocalBasis::Immersed(ife) => ife.eval(i, x, side),
        }
    }

    pub fn cut(&self) -> Option<&CutElement> {
        match self {
            LocalBasis::Standard(_) => None,
            LocalBasis::Immersed(ife) => Some(&ife.cut),
        }
    }

    pub fn cr(&self) -> &CrBasis {
        match self {
            LocalBasis::Standard(cr) => cr,
            LocalBasis::Immersed(ife) => &ife.cr,
        }
    }
}

/// Local degrees of freedom of a pair (v, q) given as a point evaluator:
/// per-component edge averages (split at the chord on crossed edges, since
/// integrands may kink or jump there) and the element pressure mean.
pub fn local_dofs_of(
    coords: [Vec2; 3],
    cut: Option<&CutElement>,
    f: &dyn Fn(Vec2, Side) -> (Vec2, f64),
    degree: usize,
) -> Result<[f64; 7]> {
    let mut dofs = [0.0; 7];
    let h_t = (0..3)
        .map(|k| (coords[(k + 1) % 3] - coords[k]).norm())
        .fold(0.0, f64::max);
    for k in 0..3 {
        let (p, q) = (coords[(k + 1) % 3], coords[(k + 2) % 3]);
        let len = (q - p).norm();
        let mut acc = Vec2::ZERO;
        for (rule, side) in edge_parts(cut, p, q, h_t, degree)? {
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                acc = acc + f(x, side).0 * w;
            }
        }
        dofs[k] = acc.x / len;
        dofs[3 + k] = acc.y / len;
    }

    let area = crate::geometry::signed_area(coords[0], coords[1], coords[2]);
    let mean = match cut {
        Some(cut) => {
            let plus = cut_element_rule(cut, Side::Plus, degree)?;
            let minus = cut_element_rule(cut, Side::Minus, degree)?;
            (plus.integrate(|x| f(x, Side::Plus).1) + minus.integrate(|x| f(x, Side::Minus).1))
                / area
        }
        None => triangle_rule(coords, degree)?.integrate(|x| f(x, Side::Plus).1) / area,
    };
    dofs[6] = mean;
    Ok(dofs)
}

/// Splits the segment [p, q] at the chord of `cut` (if it crosses) and
/// returns sub-rules tagged with the chord side they lie on. Without cut
/// data the single rule is tagged Plus, which one-sided callers ignore.
pub fn edge_parts(
    cut: Option<&CutElement>,
    p: Vec2,
    q: Vec2,
    h_t: f64,
    degree: usize,
) -> Result<Vec<(crate::quadrature::QuadRule, Side)>> {
    let Some(cut) = cut else {
        return Ok(vec![(segment_rule(p, q, degree)?, Side::Plus)]);
    };
    let snap = 1e-14 * h_t;
    let mut sp = cut.chord_coordinate(p);
    let mut sq = cut.chord_coordinate(q);
    if sp.abs() <= snap {
        sp = 0.0;
    }
    if sq.abs() <= snap {
        sq = 0.0;
    }
    if sp * sq < 0.0 {
        let x = p.lerp(q, sp / (sp - sq));
        let side_p = if sp > 0.0 { Side::Plus } else { Side::Minus };
        let side_q = if sq > 0.0 { Side::Plus } else { Side::Minus };
        let (rp, rq) = crate::quadrature::split_segment_rule(p, q, x, degree)?;
        let mut out = Vec::with_capacity(2);
        if !rp.is_empty() {
            out.push((rp, side_p));
        }
        if !rq.is_empty() {
            out.push((rq, side_q));
        }
        Ok(out)
    } else {
        let side = if sp + sq >= 0.0 { Side::Plus } else { Side::Minus };
        Ok(vec![(segment_rule(p, q, degree)?, side)])
    }
}

/// Local interpolation: DOFs of a single-valued field (v, q). The evaluators
/// decide their own side internally (for fields defined relative to the true
/// interface); edge and element integrals are still split at the chord so
/// kinks near it cost no quadrature order.
pub fn interpolate(
    coords: [Vec2; 3],
    cut: Option<&CutElement>,
    v: &dyn Fn(Vec2) -> Vec2,
    q: &dyn Fn(Vec2) -> f64,
    degree: usize,
) -> Result<[f64; 7]> {
    local_dofs_of(coords, cut, &|x, _| (v(x), q(x)), degree)
}

/// Piecewise (linear velocity, constant pressure) pair on the two sides of a
/// cut element, as produced by the dense oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleSolution {
    /// Constant velocity term per side, [plus, minus].
    pub a: [Vec2; 2],
    /// Velocity gradient per side.
    pub b: [Mat2; 2],
    /// Pressure per side.
    pub q: [f64; 2],
}

impl OracleSolution {
    pub fn eval(&self, x: Vec2, side: Side) -> BasisEval {
        let s = match side {
            Side::Plus => 0,
            Side::Minus => 1,
        };
        BasisEval {
            velocity: self.a[s] + self.b[s].mul_vec(x),
            grad: self.b[s],
            pressure: self.q[s],
        }
    }
}

/// Re-derives the immersed shape function with the given DOF values by
/// solving the full 14x14 system of interface conditions directly: 7 DOF
/// rows, 2 stress-continuity rows, 2 value-continuity rows at the chord
/// point D, 2 tangential-derivative rows, 1 divergence row. Kept completely
/// independent of the explicit construction (own quadrature, own dense
/// solver) so the two can cross-check each other.
pub fn oracle_solve_14x14(
    cut: &CutElement,
    mu_plus: f64,
    mu_minus: f64,
    dofs: &[f64; 7],
) -> Result<OracleSolution> {
    if !(mu_plus > 0.0) || !(mu_minus > 0.0) {
        return Err(Error::InvalidParams(format!(
            "viscosities must be positive, got {mu_plus} and {mu_minus}"
        )));
    }
    // unknown layout per side s: a_x, a_y, B00, B01, B10, B11, q  (7 each,
    // plus side first)
    let mut m = [[0.0f64; 14]; 14];
    let mut rhs = [0.0f64; 14];

    // DOF rows: edge averages of each velocity component, split at the chord
    let g = 0.5 / 3.0f64.sqrt();
    let gauss2 = [(0.5 - g, 0.5), (0.5 + g, 0.5)];
    for k in 0..3 {
        let (p, q) = (cut.coords[(k + 1) % 3], cut.coords[(k + 2) % 3]);
        let (sp, sq) = (cut.chord_coordinate(p), cut.chord_coordinate(q));
        // sub-intervals of [0,1] with their side block offset
        let mut parts: Vec<(f64, f64, usize)> = Vec::with_capacity(2);
        if sp * sq < 0.0 {
            let t0 = sp / (sp - sq);
            let (off_p, off_q) = if sp > 0.0 { (0, 7) } else { (7, 0) };
            parts.push((0.0, t0, off_p));
            parts.push((t0, 1.0, off_q));
        } else {
            let off = if sp + sq >= 0.0 { 0 } else { 7 };
            parts.push((0.0, 1.0, off));
        }
        for (ta, tb, off) in parts {
            if tb - ta <= 0.0 {
                continue;
            }
            for (t_ref, w_ref) in gauss2 {
                let t = ta + (tb - ta) * t_ref;
                let w = (tb - ta) * w_ref;
                let x = p.lerp(q, t);
                for (row, comp) in [(k, 0), (3 + k, 1)] {
                    m[row][off + comp] += w;
                    m[row][off + 2 * comp + 2] += w * x.x;
                    m[row][off + 2 * comp + 3] += w * x.y;
                }
            }
        }
    }
    // pressure mean row
    m[6][6] = cut.frac_plus;
    m[6][13] = 1.0 - cut.frac_plus;
    rhs[..7].copy_from_slice(dofs);

    let (n, t) = (cut.n_h, cut.t_h);
    // stress continuity: [2 mu eps(v) n - q n] = 0, componentwise
    for (row, r) in [(7, 0), (8, 1)] {
        for (off, mu, sgn) in [(0, mu_plus, 1.0), (7, mu_minus, -1.0)] {
            // (mu (B + B^T) n)_r = mu (2 B_rr n_r + (B_rc + B_cr) n_c)
            let c = 1 - r;
            let nv = [n.x, n.y];
            m[row][off + 2 * r + 2 + r] += sgn * mu * 2.0 * nv[r];
            m[row][off + 2 * r + 2 + c] += sgn * mu * nv[c];
            m[row][off + 2 * c + 2 + r] += sgn * mu * nv[c];
            m[row][off + 6] -= sgn * nv[r];
        }
    }
    // velocity continuity at the chord point D
    for (row, r) in [(9, 0), (10, 1)] {
        for (off, sgn) in [(0, 1.0), (7, -1.0)] {
            m[row][off + r] += sgn;
            m[row][off + 2 * r + 2] += sgn * cut.d.x;
            m[row][off + 2 * r + 3] += sgn * cut.d.y;
        }
    }
    // tangential derivative continuity: [B t] = 0 componentwise
    for (row, r) in [(11, 0), (12, 1)] {
        for (off, sgn) in [(0, 1.0), (7, -1.0)] {
            m[row][off + 2 * r + 2] += sgn * t.x;
            m[row][off + 2 * r + 3] += sgn * t.y;
        }
    }
    // divergence continuity: [B00 + B11] = 0
    for (off, sgn) in [(0, 1.0), (7, -1.0)] {
        m[13][off + 2] += sgn;
        m[13][off + 5] += sgn;
    }

    let x = solve_dense_refined(&m, &rhs)?;
    Ok(OracleSolution {
        a: [Vec2::new(x[0], x[1]), Vec2::new(x[7], x[8])],
        b: [Mat2::new(x[2], x[3], x[4], x[5]), Mat2::new(x[9], x[10], x[11], x[12])],
        q: [x[6], x[13]],
    })
}

/// Dense solve followed by two steps of iterative refinement: badly
/// conditioned cuts (tiny area fractions combined with extreme viscosity
/// ratios) otherwise leave forward errors near the cross-check tolerance.
fn solve_dense_refined(m: &[[f64; 14]; 14], rhs: &[f64; 14]) -> Result<[f64; 14]> {
    let mut x = solve_dense_14(&mut m.clone(), &mut rhs.clone())?;
    for _ in 0..2 {
        let mut r = [0.0f64; 14];
        for i in 0..14 {
            let mut s = rhs[i];
            for (j, xj) in x.iter().enumerate() {
                s -= m[i][j] * xj;
            }
            r[i] = s;
        }
        let dx = solve_dense_14(&mut m.clone(), &mut r)?;
        for (xj, d) in x.iter_mut().zip(&dx) {
            *xj += d;
        }
    }
    Ok(x)
}

/// Gaussian elimination with partial pivoting on the fixed 14x14 system.
fn solve_dense_14(m: &mut [[f64; 14]; 14], rhs: &mut [f64; 14]) -> Result<[f64; 14]> {
    let scale = m
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    for col in 0..14 {
        let pivot_row = (col..14)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() <= 1e-16 * scale {
            return Err(Error::SingularSystem(format!("pivot {col} vanished")));
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..14 {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..14 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0f64; 14];
    for col in (0..14).rev() {
        let mut v = rhs[col];
        for k in col + 1..14 {
            v -= m[col][k] * x[k];
        }
        x[col] = v / m[col][col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::cut_from_crossings;

    fn unit_tri() -> [Vec2; 3] {
        [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]
    }

    /// Corner cut of the unit right triangle with the corner on the minus
    /// side: chord from (0, s) to (s, 0).
    fn corner_cut(s: f64) -> CutElement {
        cut_from_crossings(
            0,
            unit_tri(),
            [(1, Vec2::new(0.0, s)), (2, Vec2::new(s, 0.0))],
            [-1, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn cr_kronecker_and_partition_of_unity() {
        for coords in [
            unit_tri(),
            [Vec2::new(0.2, -0.3), Vec2::new(1.1, 0.4), Vec2::new(-0.5, 1.3)],
        ] {
            let cr = build_cr_basis(coords).unwrap();
            for k in 0..3 {
                for j in 0..3 {
                    let mid = (coords[(j + 1) % 3] + coords[(j + 2) % 3]) * 0.5;
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((cr.scalar_value(k, mid) - want).abs() < 1e-13);
                    // affine functions: midpoint value equals edge average
                    let rule =
                        segment_rule(coords[(j + 1) % 3], coords[(j + 2) % 3], 2).unwrap();
                    let avg = rule.integrate(|x| cr.scalar_value(k, x))
                        / (coords[(j + 2) % 3] - coords[(j + 1) % 3]).norm();
                    assert!((avg - want).abs() < 1e-13);
                }
            }
            for s in 0..20 {
                let t = s as f64 / 19.0;
                let x = coords[0].lerp(coords[1], t).lerp(coords[2], t * 0.5);
                let sum: f64 = (0..3).map(|k| cr.scalar_value(k, x)).sum();
                assert!((sum - 1.0).abs() < 1e-13);
            }
        }
        assert!(build_cr_basis([Vec2::ZERO, Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)]).is_err());
    }

    #[test]
    fn equal_viscosities_degenerate_to_standard_cr() {
        let cut = corner_cut(0.5);
        let ife = build_ife_basis(&cut, 3.0, 3.0).unwrap();
        assert_eq!(ife.c1, [0.0; 6]);
        assert_eq!(ife.c2, [0.0; 6]);
        let cr = build_cr_basis(unit_tri()).unwrap();
        for i in 0..7 {
            for side in [Side::Plus, Side::Minus] {
                let x = Vec2::new(0.21, 0.34);
                let got = ife.eval(i, x, side);
                if i < 6 {
                    assert_eq!(got.velocity, cr.velocity_value(i, x));
                    assert_eq!(got.grad, cr.velocity_grad(i));
                    assert_eq!(got.pressure, 0.0);
                } else {
                    assert_eq!(got.velocity, Vec2::ZERO);
                    assert_eq!(got.pressure, 1.0);
                }
            }
        }
        assert!(build_ife_basis(&cut, -1.0, 1.0).is_err());
    }

    #[test]
    fn theta_matches_area_fraction_and_denominator() {
        // corner cut at s = 0.5: minus corner has fraction 0.25, so
        // frac_plus = 0.75
        let cut = corner_cut(0.5);
        assert!((cut.frac_plus - 0.75).abs() < 1e-14);
        let ife = build_ife_basis(&cut, 1.0, 0.2).unwrap();
        assert!((ife.theta - cut.frac_plus).abs() < 1e-12);
        assert!((ife.denom - (1.0 + (0.2 - 1.0) * 0.75)).abs() < 1e-12);
        assert!(ife.denom >= 0.2_f64.min(1.0) - 1e-12);

        // flipped variant with frac_plus = 0.25 gives the arithmetic of the
        // denominator bound directly: 1 + (0.2 - 1) * 0.25 = 0.8
        let flipped = cut_from_crossings(
            0,
            unit_tri(),
            [(1, Vec2::new(0.0, 0.5)), (2, Vec2::new(0.5, 0.0))],
            [1, -1, -1],
        )
        .unwrap();
        assert!((flipped.frac_plus - 0.25).abs() < 1e-14);
        let ife = build_ife_basis(&flipped, 1.0, 0.2).unwrap();
        assert!((ife.theta - 0.25).abs() < 1e-12);
        assert!((ife.denom - 0.8).abs() < 1e-12);
    }

    #[test]
    fn basis_seven_is_pure_pressure() {
        let cut = corner_cut(0.3);
        let ife = build_ife_basis(&cut, 1000.0, 1.0).unwrap();
        for side in [Side::Plus, Side::Minus] {
            let e = ife.eval(6, Vec2::new(0.1, 0.2), side);
            assert_eq!(e.velocity, Vec2::ZERO);
            assert_eq!(e.grad, Mat2::ZERO);
            assert_eq!(e.pressure, 1.0);
        }
    }

    #[test]
    fn velocity_is_continuous_across_chord() {
        let cut = corner_cut(0.37);
        let ife = build_ife_basis(&cut, 1000.0, 1.0).unwrap();
        for i in 0..6 {
            for s in 0..10 {
                let x = cut.d.lerp(cut.e, s as f64 / 9.0);
                let plus = ife.eval(i, x, Side::Plus);
                let minus = ife.eval(i, x, Side::Minus);
                assert!(
                    (plus.velocity - minus.velocity).norm() <= 1e-12,
                    "basis {i}, point {s}"
                );
            }
        }
    }

    #[test]
    fn jump_conditions_hold() {
        for (mp, mm) in [(5.0, 1.0), (1.0, 5.0), (1000.0, 1.0), (1.0, 1000.0)] {
            let cut = corner_cut(0.42);
            let ife = build_ife_basis(&cut, mp, mm).unwrap();
            for i in 0..7 {
                let x = cut.chord_midpoint();
                let p = ife.eval(i, x, Side::Plus);
                let m = ife.eval(i, x, Side::Minus);
                // stress: (2 mu eps(v) - q I) n continuous
                let stress = |mu: f64, e: &BasisEval| {
                    (e.grad.sym() * (2.0 * mu)).mul_vec(cut.n_h) - cut.n_h * e.pressure
                };
                let sj = (stress(mp, &p) - stress(mm, &m)).norm();
                assert!(sj <= 1e-10 * (mp + mm) / cut.h_t, "stress jump {sj} basis {i}");
                // divergence continuous
                let dj = (p.grad.trace() - m.grad.trace()).abs();
                assert!(dj <= 1e-11 / cut.h_t, "divergence jump {dj} basis {i}");
                // tangential derivative continuous
                let tj = (p.grad - m.grad).mul_vec(cut.t_h).norm();
                assert!(tj <= 1e-11 / cut.h_t, "tangential jump {tj} basis {i}");
            }
        }
    }

    #[test]
    fn dof_kronecker_identity() {
        let cut = corner_cut(0.61);
        let ife = build_ife_basis(&cut, 1000.0, 1.0).unwrap();
        for i in 0..7 {
            let dofs = local_dofs_of(
                cut.coords,
                Some(&cut),
                &|x, side| {
                    let e = ife.eval(i, x, side);
                    (e.velocity, e.pressure)
                },
                4,
            )
            .unwrap();
            for j in 0..7 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (dofs[j] - want).abs() < 1e-11,
                    "N_{j}(basis {i}) = {} off by {:.2e}",
                    dofs[j],
                    (dofs[j] - want).abs()
                );
            }
        }
    }

    #[test]
    fn interpolation_reproduces_constants() {
        let cut = corner_cut(0.5);
        let coeff = interpolate(
            cut.coords,
            Some(&cut),
            &|_| Vec2::new(1.0, 0.0),
            &|_| 0.0,
            4,
        )
        .unwrap();
        let want = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in coeff.iter().zip(&want) {
            assert!((got - want).abs() < 1e-13);
        }
        // the IFE interpolant with these coefficients is exactly (1,0), 0:
        // corrections cancel because the c's are linear in the CR part
        let ife = build_ife_basis(&cut, 7.0, 0.3).unwrap();
        for side in [Side::Plus, Side::Minus] {
            let x = Vec2::new(0.15, 0.55);
            let mut v = Vec2::ZERO;
            let mut p = 0.0;
            for i in 0..7 {
                let e = ife.eval(i, x, side);
                v = v + e.velocity * coeff[i];
                p += e.pressure * coeff[i];
            }
            assert!((v - Vec2::new(1.0, 0.0)).norm() < 1e-13);
            assert!(p.abs() < 1e-13);
        }

        let coeff =
            interpolate(cut.coords, Some(&cut), &|_| Vec2::ZERO, &|_| 5.0, 4).unwrap();
        for (k, c) in coeff.iter().enumerate() {
            let want = if k == 6 { 5.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-13);
        }
    }

    #[test]
    fn oracle_matches_explicit_basis() {
        let cut = corner_cut(0.44);
        for (mp, mm) in [(5.0, 1.0), (1.0, 5.0), (1000.0, 1.0), (2.0, 2.0)] {
            let ife = build_ife_basis(&cut, mp, mm).unwrap();
            // zero DOFs give the zero function
            let zero = oracle_solve_14x14(&cut, mp, mm, &[0.0; 7]).unwrap();
            for s in 0..2 {
                assert!(zero.a[s].norm() < 1e-12);
                assert!(zero.b[s].frobenius_sq() < 1e-24);
                assert!(zero.q[s].abs() < 1e-12);
            }
            for i in 0..7 {
                let mut dofs = [0.0; 7];
                dofs[i] = 1.0;
                let oracle = oracle_solve_14x14(&cut, mp, mm, &dofs).unwrap();
                for side in [Side::Plus, Side::Minus] {
                    for s in 0..20 {
                        // deterministic scatter of sample points in the triangle
                        let (u, v) = (
                            0.05 + 0.9 * (s as f64 * 0.618034).fract(),
                            0.05 + 0.9 * (s as f64 * 0.381966).fract(),
                        );
                        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
                        let x = cut.coords[0]
                            + (cut.coords[1] - cut.coords[0]) * u
                            + (cut.coords[2] - cut.coords[0]) * v;
                        let got = oracle.eval(x, side);
                        let want = ife.eval(i, x, side);
                        let vel_scale = want.velocity.norm().max(1.0);
                        assert!(
                            (got.velocity - want.velocity).norm() <= 1e-9 * vel_scale,
                            "basis {i} velocity mismatch at mu=({mp},{mm})"
                        );
                        let g_scale = want.grad.frobenius_sq().sqrt().max(1.0);
                        assert!(
                            (got.grad - want.grad).frobenius_sq().sqrt() <= 1e-9 * g_scale
                        );
                        let p_scale = want.pressure.abs().max(1.0);
                        assert!((got.pressure - want.pressure).abs() <= 1e-9 * p_scale);
                    }
                }
            }
        }
    }

    #[test]
    fn small_cut_corrections_stay_bounded() {
        // the bound on the corrections depends on the viscosity ratio and
        // the CR strains only, never on how small the cut is
        for frac in [0.3_f64, 1e-4, 1e-6, 1e-8] {
            let s = (2.0 * frac).sqrt(); // corner legs giving area fraction `frac`
            let cut = corner_cut(s);
            for (mp, mm) in [(1e-3, 1.0), (1.0, 1e-3), (1e3, 1.0), (1.0, 1e3)] {
                let ife = build_ife_basis(&cut, mp, mm).unwrap();
                let ratio = mm / mp;
                assert!(ife.denom >= ratio.min(1.0) * (1.0 - 1e-12), "denom degenerated");
                for i in 0..6 {
                    let strain_n = ife.cr.velocity_grad(i).sym().mul_vec(cut.n_h);
                    let c1_bound = 2.0 * (mm - mp).abs() * strain_n.dot(cut.n_h).abs();
                    let c2_bound = 2.0 * (ratio - 1.0).abs() * strain_n.dot(cut.t_h).abs()
                        / ratio.min(1.0);
                    assert!(ife.c1[i].abs() <= c1_bound * (1.0 + 1e-12));
                    assert!(ife.c2[i].abs() <= c2_bound * (1.0 + 1e-12));
                }
            }
        }
    }
}
