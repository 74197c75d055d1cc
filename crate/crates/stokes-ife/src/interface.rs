//! Level-set interface representation, element/edge classification, and
//! per-element cut construction.
//!
//! Sign convention: phi < 0 inside (the minus region), phi > 0 outside, and
//! points with |phi| below the snap band belong to the closed plus region.
//! All classification decisions downstream use snapped signs only, so a
//! vertex lying exactly on the interface (which happens for the reference
//! circle on even meshes) resolves deterministically.

use crate::geometry::{polygon_area, signed_area, Vec2};
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Which side of the interface a point or sub-region belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn from_snapped(sign: i8) -> Side {
        if sign > 0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }
}

/// Implicit interface description.
#[derive(Debug, Clone, Copy)]
pub enum LevelSet {
    /// phi(x) = |x - center|^2 - radius^2.
    Circle { center: Vec2, radius: f64 },
    /// phi(x) = normal . x + offset; for tests and synthetic geometry.
    HalfPlane { normal: Vec2, offset: f64 },
}

impl LevelSet {
    pub fn circle(center: Vec2, radius: f64) -> Self {
        LevelSet::Circle { center, radius }
    }

    pub fn half_plane(normal: Vec2, offset: f64) -> Self {
        LevelSet::HalfPlane { normal, offset }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        match *self {
            LevelSet::Circle { center, radius } => (x - center).norm_sq() - radius * radius,
            LevelSet::HalfPlane { normal, offset } => normal.dot(x) + offset,
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match *self {
            LevelSet::Circle { center, .. } => (x - center) * 2.0,
            LevelSet::HalfPlane { normal, .. } => normal,
        }
    }
}

/// Local position of a chord endpoint on the triangle boundary: interior of a
/// local edge, or (after snapping) a local vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutLocus {
    Edge(usize),
    Vertex(usize),
}

/// Geometry of one element cut by the interface chord DE.
#[derive(Debug, Clone)]
pub struct CutElement {
    pub tri: usize,
    pub coords: [Vec2; 3],
    /// Chord endpoint on the first cut local edge (in local edge order).
    pub d: Vec2,
    /// Chord endpoint on the second cut local edge.
    pub e: Vec2,
    pub d_locus: CutLocus,
    pub e_locus: CutLocus,
    /// Unit chord normal pointing into the plus sub-polygon.
    pub n_h: Vec2,
    /// Unit chord tangent, the exact -90 degree rotation of `n_h`.
    pub t_h: Vec2,
    /// Plus-side sub-polygon, counterclockwise.
    pub poly_plus: Vec<Vec2>,
    /// Minus-side sub-polygon, counterclockwise.
    pub poly_minus: Vec<Vec2>,
    /// Plus-side area fraction |T+| / |T|.
    pub frac_plus: f64,
    /// Full triangle area |T|.
    pub area: f64,
    /// Triangle diameter (longest edge).
    pub h_t: f64,
}

impl CutElement {
    pub fn polygon(&self, side: Side) -> &[Vec2] {
        match side {
            Side::Plus => &self.poly_plus,
            Side::Minus => &self.poly_minus,
        }
    }

    pub fn chord_midpoint(&self) -> Vec2 {
        (self.d + self.e) * 0.5
    }

    /// Signed distance factor of `x` to the chord line, positive on the plus
    /// side: n_h . (x - D).
    pub fn chord_coordinate(&self, x: Vec2) -> f64 {
        self.n_h.dot(x - self.d)
    }
}

/// Classification of a whole mesh against a level set. Produced by
/// [`classify`]; [`build_cuts`] may later demote elements whose cut
/// degenerates under snapping.
#[derive(Debug, Clone)]
pub struct Classification {
    /// Snapped sign (+1/-1) per vertex.
    pub vertex_signs: Vec<i8>,
    pub is_interface_element: Vec<bool>,
    /// Sorted indices of interface elements.
    pub interface_elements: Vec<usize>,
    pub is_interface_edge: Vec<bool>,
    /// Sorted indices of interface edges.
    pub interface_edges: Vec<usize>,
    /// +1/-1 side label for non-interface elements, 0 for interface elements.
    pub element_side: Vec<i8>,
    /// Interface crossing point per edge (`None` off the interface).
    pub edge_crossing: Vec<Option<Vec2>>,
    /// Snap half-band used for all sign decisions: 1e-12 * h_max.
    pub eps_snap: f64,
}

impl Classification {
    /// Snapped sign of an arbitrary point under this classification's band.
    pub fn snapped_sign(&self, ls: &LevelSet, x: Vec2) -> i8 {
        if ls.eval(x) >= -self.eps_snap {
            1
        } else {
            -1
        }
    }

    /// Reclassifies an interface element as a plain one-sided element.
    fn demote(&mut self, tri: usize, side: i8) {
        self.is_interface_element[tri] = false;
        self.element_side[tri] = side;
        self.interface_elements.retain(|&t| t != tri);
    }
}

/// Snapped vertex signs: +1 when phi(v) >= -eps_snap with eps_snap =
/// 1e-12 * h_max, else -1.
pub fn snap_signs(ls: &LevelSet, mesh: &Mesh) -> Vec<i8> {
    let eps = 1e-12 * mesh.h_max();
    mesh.vertices
        .iter()
        .map(|&v| if ls.eval(v) >= -eps { 1 } else { -1 })
        .collect()
}

/// Classifies elements and edges against the level set and checks the
/// interface-resolution assumption (at most one crossing per edge, at most
/// two per element boundary, no component of the interface hidden inside an
/// element).
pub fn classify(mesh: &Mesh, ls: &LevelSet) -> Result<Classification> {
    let eps_snap = 1e-12 * mesh.h_max();
    let vertex_signs = snap_signs(ls, mesh);

    let mut is_interface_edge = vec![false; mesh.n_edges()];
    let mut interface_edges = Vec::new();
    let mut edge_crossing = vec![None; mesh.n_edges()];
    for (i, e) in mesh.edges.iter().enumerate() {
        let (s0, s1) = (vertex_signs[e.vertices[0]], vertex_signs[e.vertices[1]]);
        let (p0, p1) = (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
        if s0 != s1 {
            is_interface_edge[i] = true;
            interface_edges.push(i);
            edge_crossing[i] = Some(intersect_edge(ls, p0, p1)?);
        } else if s0 > 0 {
            // a circle may dip into an edge whose endpoints are both outside;
            // that is two crossings on one edge and cannot be resolved
            if let LevelSet::Circle { center, .. } = *ls {
                let d = p1 - p0;
                let t = ((center - p0).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
                if ls.eval(p0.lerp(p1, t)) < -eps_snap {
                    return Err(Error::AssumptionViolated(format!(
                        "interface crosses edge {i} twice; refine the mesh"
                    )));
                }
            }
        }
    }

    let mut is_interface_element = vec![false; mesh.n_triangles()];
    let mut interface_elements = Vec::new();
    let mut element_side = vec![0i8; mesh.n_triangles()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles[t];
        let signs = [vertex_signs[tri[0]], vertex_signs[tri[1]], vertex_signs[tri[2]]];
        if signs[0] == signs[1] && signs[1] == signs[2] {
            element_side[t] = signs[0];
            if signs[0] > 0 {
                // no edge of this triangle is crossed, so a circle center
                // strictly inside means the whole interface is hidden here
                if let LevelSet::Circle { center, radius } = *ls {
                    if radius > 0.0 && point_strictly_inside(mesh.tri_coords(t), center) {
                        return Err(Error::AssumptionViolated(format!(
                            "interface lies entirely inside element {t}; refine the mesh"
                        )));
                    }
                }
            }
        } else {
            is_interface_element[t] = true;
            interface_elements.push(t);
        }
    }

    Ok(Classification {
        vertex_signs,
        is_interface_element,
        interface_elements,
        is_interface_edge,
        interface_edges,
        element_side,
        edge_crossing,
        eps_snap,
    })
}

fn point_strictly_inside(tri: [Vec2; 3], p: Vec2) -> bool {
    (0..3).all(|k| signed_area(tri[k], tri[(k + 1) % 3], p) > 0.0)
}

/// Crossing point of the interface with the segment [p0, p1]. Requires a
/// (snapped) sign change; closed-form for the supported level sets with a
/// bisection polish as a safety net. Crossings within 1e-12 of an endpoint
/// are snapped onto it exactly.
pub fn intersect_edge(ls: &LevelSet, p0: Vec2, p1: Vec2) -> Result<Vec2> {
    let d = p1 - p0;
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::NoRoot("zero-length segment".into()));
    }
    // parameter slack: a root may sit just outside [0,1] when an endpoint
    // sign was snapped across zero
    const T_SLACK: f64 = 1e-9;
    const T_SNAP: f64 = 1e-12;

    let t = match *ls {
        LevelSet::HalfPlane { .. } => {
            let (f0, f1) = (ls.eval(p0), ls.eval(p1));
            if f0 == f1 {
                return Err(Error::NoRoot("level set constant along segment".into()));
            }
            f0 / (f0 - f1)
        }
        LevelSet::Circle { center, .. } => {
            let a = d.norm_sq();
            let b = 2.0 * (p0 - center).dot(d);
            let c = ls.eval(p0);
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return Err(Error::NoRoot("no real crossing on segment".into()));
            }
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            let roots = if q == 0.0 {
                let r = (sq / (2.0 * a)).abs();
                [r, -r]
            } else {
                [q / a, c / q]
            };
            let mut picked: Option<f64> = None;
            for r in roots {
                if (-T_SLACK..=1.0 + T_SLACK).contains(&r) {
                    match picked {
                        None => picked = Some(r),
                        // duplicate root from the q==0 branch is fine
                        Some(p) if (p - r).abs() <= 1e-9 => {}
                        Some(_) => {
                            return Err(Error::AssumptionViolated(
                                "two crossings on one segment".into(),
                            ))
                        }
                    }
                }
            }
            picked.ok_or_else(|| Error::NoRoot("crossing outside segment".into()))?
        }
    };

    if !(-T_SLACK..=1.0 + T_SLACK).contains(&t) {
        return Err(Error::NoRoot(format!("crossing parameter {t} outside segment")));
    }
    let t = t.clamp(0.0, 1.0);
    if t <= T_SNAP {
        return Ok(p0);
    }
    if t >= 1.0 - T_SNAP {
        return Ok(p1);
    }
    let mut x = p0.lerp(p1, t);

    // polish if the closed form lost accuracy (defensive; the quadratic is
    // solved in its stable form)
    let tol = 1e-13 * len * (ls.gradient(x).norm() + 1.0);
    if ls.eval(x).abs() > tol {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let f_lo = ls.eval(p0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = ls.eval(p0.lerp(p1, mid));
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (fm < 0.0) == (f_lo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        x = p0.lerp(p1, 0.5 * (lo + hi));
    }
    Ok(x)
}

/// Tolerance below which two boundary points are considered the same point,
/// relative to the triangle diameter.
const POINT_MERGE_REL: f64 = 1e-12;
/// Minimum area fraction of the smaller sub-polygon; below this the cut is
/// degenerate and the element is demoted to a one-sided element.
const MIN_AREA_FRACTION: f64 = 1e-10;

/// Builds a cut element from explicit crossing points on two distinct local
/// edges plus the vertex signs. This is the shared core of [`build_cut`] and
/// the synthetic constructor used by property tests.
pub fn cut_from_crossings(
    tri: usize,
    coords: [Vec2; 3],
    crossings: [(usize, Vec2); 2],
    vertex_signs: [i8; 3],
) -> Result<CutElement> {
    let area = signed_area(coords[0], coords[1], coords[2]);
    if area <= 0.0 {
        return Err(Error::InvalidMesh(format!("triangle {tri} not counterclockwise")));
    }
    let h_t = (0..3)
        .map(|k| (coords[(k + 1) % 3] - coords[k]).norm())
        .fold(0.0, f64::max);
    let mut crossings = crossings;
    crossings.sort_by_key(|&(k, _)| k);
    let [(dk, d), (ek, e)] = crossings;
    if dk == ek || dk > 2 || ek > 2 {
        return Err(Error::InvalidParams(format!(
            "crossings must lie on two distinct local edges, got {dk} and {ek}"
        )));
    }
    let merge_tol = POINT_MERGE_REL * h_t;
    if (e - d).norm() <= merge_tol {
        return Err(Error::DegenerateCut {
            element: tri,
            reason: "chord endpoints coincide".into(),
        });
    }

    // boundary walk: vertex k, then the crossing (if any) on the path edge
    // from vertex k to vertex k+1, which is local edge (k+2)%3
    let mut poly_plus: Vec<Vec2> = Vec::with_capacity(4);
    let mut poly_minus: Vec<Vec2> = Vec::with_capacity(4);
    for k in 0..3 {
        if vertex_signs[k] > 0 {
            poly_plus.push(coords[k]);
        } else {
            poly_minus.push(coords[k]);
        }
        let path_edge = (k + 2) % 3;
        for &(ck, cx) in &[(dk, d), (ek, e)] {
            if ck == path_edge {
                poly_plus.push(cx);
                poly_minus.push(cx);
            }
        }
    }
    let poly_plus = dedupe_ring(poly_plus, merge_tol);
    let poly_minus = dedupe_ring(poly_minus, merge_tol);

    let area_plus = if poly_plus.len() >= 3 { polygon_area(&poly_plus) } else { 0.0 };
    let area_minus = if poly_minus.len() >= 3 { polygon_area(&poly_minus) } else { 0.0 };
    if area_plus.min(area_minus) < MIN_AREA_FRACTION * area {
        return Err(Error::DegenerateCut {
            element: tri,
            reason: format!(
                "smaller side has area fraction {:.3e}",
                area_plus.min(area_minus) / area
            ),
        });
    }

    let chord_dir = (e - d).normalized();
    let mut n_h = chord_dir.perp_ccw();
    // orient toward the positive region, judged by the vertex farthest from
    // the chord line: robust even when one sub-polygon is a microscopic
    // sliver whose centroid rounding could flip the sign
    let (mut far, mut far_abs) = (0.0f64, -1.0f64);
    for k in 0..3 {
        let s = n_h.dot(coords[k] - d);
        if s.abs() > far_abs {
            far_abs = s.abs();
            far = s * f64::from(vertex_signs[k]);
        }
    }
    if far < 0.0 {
        n_h = -n_h;
    }
    let t_h = n_h.perp_cw();

    let locus_of = |x: Vec2, k: usize| {
        for j in 0..3 {
            if (x - coords[j]).norm() <= merge_tol {
                return CutLocus::Vertex(j);
            }
        }
        CutLocus::Edge(k)
    };

    Ok(CutElement {
        tri,
        coords,
        d,
        e,
        d_locus: locus_of(d, dk),
        e_locus: locus_of(e, ek),
        n_h,
        t_h,
        poly_plus,
        poly_minus,
        frac_plus: (area_plus / area).clamp(0.0, 1.0),
        area,
        h_t,
    })
}

fn dedupe_ring(pts: Vec<Vec2>, tol: f64) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().map_or(true, |&q| (p - q).norm() > tol) {
            out.push(p);
        }
    }
    while out.len() > 1 && (out[0] - *out.last().unwrap()).norm() <= tol {
        out.pop();
    }
    out
}

/// Builds the cut geometry of one classified interface element.
pub fn build_cut(mesh: &Mesh, cls: &Classification, tri: usize) -> Result<CutElement> {
    if !cls
        .is_interface_element
        .get(tri)
        .copied()
        .unwrap_or(false)
    {
        return Err(Error::InvalidParams(format!("element {tri} is not an interface element")));
    }
    let coords = mesh.tri_coords(tri);
    let tri_vs = mesh.triangles[tri];
    let signs = [
        cls.vertex_signs[tri_vs[0]],
        cls.vertex_signs[tri_vs[1]],
        cls.vertex_signs[tri_vs[2]],
    ];
    let mut crossings: Vec<(usize, Vec2)> = Vec::with_capacity(2);
    for k in 0..3 {
        let edge = mesh.tri_edges[tri][k];
        if cls.is_interface_edge[edge] {
            let x = cls.edge_crossing[edge].ok_or(Error::MissingCutData(tri))?;
            crossings.push((k, x));
        }
    }
    if crossings.len() != 2 {
        return Err(Error::AssumptionViolated(format!(
            "element {tri} has {} crossed edges",
            crossings.len()
        )));
    }
    cut_from_crossings(tri, coords, [crossings[0], crossings[1]], signs)
}

/// Builds cuts for all interface elements, demoting those whose cut
/// degenerates under snapping (the element is then labeled by the snapped
/// sign at its centroid). Returns one entry per mesh element.
pub fn build_cuts(
    mesh: &Mesh,
    ls: &LevelSet,
    cls: &mut Classification,
) -> Result<Vec<Option<CutElement>>> {
    let mut cuts: Vec<Option<CutElement>> = vec![None; mesh.n_triangles()];
    for tri in cls.interface_elements.clone() {
        match build_cut(mesh, cls, tri) {
            Ok(cut) => cuts[tri] = Some(cut),
            Err(Error::DegenerateCut { .. }) => {
                let side = cls.snapped_sign(ls, mesh.tri_centroid(tri));
                cls.demote(tri, side);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(cuts)
}
