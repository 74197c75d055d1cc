//! Conforming triangulations with the edge data structure carrying the
//! velocity degrees of freedom.
//!
//! The only built-in generator is the uniform criss-cross mesh: N x N
//! congruent rectangles, each cut along the lower-left to upper-right
//! diagonal. The data model accepts arbitrary conforming triangulations via
//! [`Mesh::from_triangles`] so tests can work with hand-built geometry.

use crate::geometry::{signed_area, Vec2};
use crate::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy)]
pub struct Domain {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Domain {
    pub fn new(lo: Vec2, hi: Vec2) -> Self {
        Domain { lo, hi }
    }

    /// The square (-1,1)^2 used by the reference problem.
    pub fn unit_symmetric() -> Self {
        Domain::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0))
    }

    pub fn extent(&self) -> Vec2 {
        self.hi - self.lo
    }

    pub fn area(&self) -> f64 {
        let e = self.extent();
        e.x * e.y
    }

    pub fn is_degenerate(&self) -> bool {
        let e = self.extent();
        !(e.x > 0.0 && e.y > 0.0)
    }
}

/// An undirected mesh edge. Interior edges have two incident triangles and the
/// stored normal points from the lower-indexed one toward the higher-indexed
/// one; boundary edges have one incident triangle and an outward normal.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex indices, lower index first.
    pub vertices: [usize; 2],
    /// Lower-indexed incident triangle.
    pub tri_lo: usize,
    /// Higher-indexed incident triangle; `None` on the boundary.
    pub tri_hi: Option<usize>,
    /// Unit normal with the orientation convention above.
    pub normal: Vec2,
    pub boundary: bool,
}

/// Per-triangle geometry bundle returned by [`Mesh::triangle_local_frame`].
#[derive(Debug, Clone, Copy)]
pub struct TriFrame {
    pub coords: [Vec2; 3],
    /// Length of local edge k (the edge opposite local vertex k).
    pub edge_lengths: [f64; 3],
    pub area: f64,
    /// Triangle diameter, the longest edge.
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub vertices: Vec<Vec2>,
    /// Vertex indices per triangle, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Per triangle, its 3 edge indices ordered so edge k is opposite local
    /// vertex k.
    pub tri_edges: Vec<[usize; 3]>,
    h_max: f64,
}

/// Relative tolerance on the triangle area used to reject collinear input.
const DEGENERATE_AREA_REL: f64 = 1e-14;

impl Mesh {
    /// Uniform criss-cross triangulation: n x n congruent rectangles, each cut
    /// along the lower-left to upper-right diagonal.
    pub fn uniform(n: usize, domain: Domain) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidMesh("subdivision count must be >= 1".into()));
        }
        if domain.is_degenerate() {
            return Err(Error::InvalidMesh("degenerate domain rectangle".into()));
        }
        let ext = domain.extent();
        let (dx, dy) = (ext.x / n as f64, ext.y / n as f64);
        let vid = |ix: usize, iy: usize| iy * (n + 1) + ix;

        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for iy in 0..=n {
            for ix in 0..=n {
                vertices.push(Vec2::new(
                    domain.lo.x + ix as f64 * dx,
                    domain.lo.y + iy as f64 * dy,
                ));
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for iy in 0..n {
            for ix in 0..n {
                let (v00, v10) = (vid(ix, iy), vid(ix + 1, iy));
                let (v01, v11) = (vid(ix, iy + 1), vid(ix + 1, iy + 1));
                // both counterclockwise, sharing the v00-v11 diagonal
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        Mesh::from_triangles(domain, vertices, triangles)
    }

    /// Builds the edge structure for an arbitrary conforming triangulation.
    /// Clockwise triangles are reoriented; collinear ones are rejected.
    pub fn from_triangles(
        domain: Domain,
        vertices: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Mesh> {
        if domain.is_degenerate() {
            return Err(Error::InvalidMesh("degenerate domain rectangle".into()));
        }
        let mut h_max: f64 = 0.0;
        for tri in triangles.iter_mut() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!("vertex index {v} out of range")));
                }
            }
            let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let area = signed_area(a, b, c);
            let scale = (b - a).norm().max((c - a).norm()).max((c - b).norm());
            if area.abs() <= DEGENERATE_AREA_REL * scale * scale {
                return Err(Error::DegenerateTriangle(area));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
            h_max = h_max.max(scale);
        }

        // Edge ids are assigned in first-encounter order over (triangle, local
        // edge) pairs, which makes the numbering deterministic.
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_vertices: Vec<[usize; 2]> = Vec::new();
        let mut edge_tris: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];

        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edge_vertices.push([key.0, key.1]);
                    edge_tris.push(Vec::new());
                    edge_vertices.len() - 1
                });
                edge_tris[id].push(t);
                tri_edges[t][k] = id;
            }
        }

        let mut edges = Vec::with_capacity(edge_vertices.len());
        for (id, vs) in edge_vertices.iter().enumerate() {
            let tris = &edge_tris[id];
            if tris.is_empty() || tris.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge {id} has {} incident triangles",
                    tris.len()
                )));
            }
            let (tri_lo, tri_hi) = (tris[0], tris.get(1).copied());
            if let Some(hi) = tri_hi {
                if hi == tri_lo {
                    return Err(Error::InvalidMesh(format!(
                        "edge {id} listed twice in triangle {tri_lo}"
                    )));
                }
            }
            let (p0, p1) = (vertices[vs[0]], vertices[vs[1]]);
            let mid = (p0 + p1) * 0.5;
            let mut normal = (p1 - p0).perp_cw().normalized();
            let centroid = |t: usize| {
                let tri = triangles[t];
                (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0
            };
            let outward = match tri_hi {
                Some(hi) => centroid(hi) - centroid(tri_lo),
                None => mid - centroid(tri_lo),
            };
            if normal.dot(outward) < 0.0 {
                normal = -normal;
            }
            edges.push(Edge {
                vertices: *vs,
                tri_lo,
                tri_hi,
                normal,
                boundary: tri_hi.is_none(),
            });
        }

        Ok(Mesh { domain, vertices, triangles, edges, tri_edges, h_max })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Longest edge over the whole mesh.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn tri_coords(&self, tri: usize) -> [Vec2; 3] {
        let t = self.triangles[tri];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn tri_centroid(&self, tri: usize) -> Vec2 {
        let [a, b, c] = self.tri_coords(tri);
        (a + b + c) / 3.0
    }

    pub fn tri_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.tri_coords(tri);
        signed_area(a, b, c)
    }

    /// Midpoint, length and oriented unit normal of an edge.
    pub fn edge_geometry(&self, edge: usize) -> Result<(Vec2, f64, Vec2)> {
        let e = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::IndexOutOfRange(format!("edge {edge}")))?;
        let (p0, p1) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
        Ok(((p0 + p1) * 0.5, (p1 - p0).norm(), e.normal))
    }

    pub fn edge_endpoints(&self, edge: usize) -> (Vec2, Vec2) {
        let e = &self.edges[edge];
        (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]])
    }

    /// Vertex coordinates, local edge lengths, area and diameter of a triangle.
    pub fn triangle_local_frame(&self, tri: usize) -> Result<TriFrame> {
        if tri >= self.triangles.len() {
            return Err(Error::IndexOutOfRange(format!("triangle {tri}")));
        }
        let coords = self.tri_coords(tri);
        let mut edge_lengths = [0.0; 3];
        for k in 0..3 {
            edge_lengths[k] = (coords[(k + 2) % 3] - coords[(k + 1) % 3]).norm();
        }
        let area = signed_area(coords[0], coords[1], coords[2]);
        let diameter = edge_lengths.iter().cloned().fold(0.0, f64::max);
        Ok(TriFrame { coords, edge_lengths, area, diameter })
    }

    /// Plain-text dump with one section each for vertices, triangles and
    /// edges, for debugging and golden tests.
    pub fn dump_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.n_vertices());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {}", v.x, v.y);
        }
        let _ = writeln!(s, "triangles {}", self.n_triangles());
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "edges {}", self.n_edges());
        for (i, e) in self.edges.iter().enumerate() {
            let hi = e.tri_hi.map(|t| t as i64).unwrap_or(-1);
            let _ = writeln!(
                s,
                "{i} {} {} {} {hi} {}",
                e.vertices[0],
                e.vertices[1],
                e.tri_lo,
                u8::from(e.boundary)
            );
        }
        s
    }
}
