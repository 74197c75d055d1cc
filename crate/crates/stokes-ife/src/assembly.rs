//! Assembly of the discrete Stokes interface system.
//!
//! The full bilinear form is A((u,p); (v,q)) = a(u,v) + b(v,p) - b(u,q)
//! + j(p,q) with
//!   a(u,v) = sum_T int 2 mu eps(u):eps(v)
//!          + sum_e (1 + eta 1_Gamma(e)) / |e| int_e [u].[v]
//!          - sum_{e in Gamma} int_e ({2 mu eps(u) n}.[v] + delta {2 mu eps(v) n}.[u])
//!   b(v,q) = - sum_T int q div v + sum_{e in Gamma} int_e {q} [v.n]
//!   j(p,q) = sum_{e in Gamma} |e| int_e [p][q]
//! where jumps and averages use the lower-indexed incident element first and
//! boundary traces count as their own jump and average.
//!
//! The three blocks are kept separate until `finalize` so the structure
//! (symmetry of `a` for delta = +1, skew pressure coupling, stabilization
//! positivity) stays observable; the final matrix is a + b1 - b1^T + jh plus
//! a single Lagrange multiplier row/column enforcing sum_T |T| p_T = 0 and
//! strong elimination of boundary velocity DOFs.

use crate::geometry::Vec2;
use crate::ife::{build_cr_basis, build_ife_basis, BasisEval, LocalBasis};
use crate::interface::{build_cuts, classify, Classification, CutElement, LevelSet, Side};
use crate::mesh::Mesh;
use crate::quadrature::{cut_edge_rule, cut_element_rule, segment_rule, triangle_rule};
use crate::solver::SaddlePointSystem;
use crate::{Error, Result};

/// Quadrature degree for element integrals; integrands are piecewise
/// polynomial of degree <= 2 plus the smooth body force.
pub const VOLUME_DEGREE: usize = 4;
/// Quadrature degree for edge integrals (products of piecewise-affine
/// traces).
pub const EDGE_DEGREE: usize = 4;
/// Quadrature degree for boundary-data edge averages.
pub const DIRICHLET_DEGREE: usize = 6;

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SchemeParams {
    pub mu_plus: f64,
    pub mu_minus: f64,
    /// Sign of the symmetrizing consistency term, +1 or -1.
    pub delta: f64,
    /// Additional interface-edge velocity penalty weight, >= 0.
    pub eta: f64,
    /// Evaluate the body-force functional against the lowest-order
    /// Raviart-Thomas lift of the test function (flux-preserving, so it
    /// depends only on the edge-mean DOFs). This removes the pressure
    /// component of the consistency error that otherwise pollutes the
    /// velocity, and is the default; disable for the plain pointwise
    /// integral int f . v_h.
    pub load_lift: bool,
}

impl SchemeParams {
    pub fn new(mu_plus: f64, mu_minus: f64, delta: f64, eta: f64) -> Result<Self> {
        if !(mu_plus > 0.0 && mu_plus.is_finite()) || !(mu_minus > 0.0 && mu_minus.is_finite())
        {
            return Err(Error::InvalidParams(format!(
                "viscosities must be positive and finite, got {mu_plus} and {mu_minus}"
            )));
        }
        if delta != 1.0 && delta != -1.0 {
            return Err(Error::InvalidParams(format!("delta must be +1 or -1, got {delta}")));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParams(format!("eta must be >= 0, got {eta}")));
        }
        Ok(SchemeParams { mu_plus, mu_minus, delta, eta, load_lift: false })
    }

    pub fn with_load_lift(mut self, on: bool) -> Self {
        self.load_lift = on;
        self
    }

    pub fn mu(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.mu_plus,
            Side::Minus => self.mu_minus,
        }
    }
}

/// Global DOF layout: x-velocity 2e, y-velocity 2e+1 per edge e, then one
/// pressure per element, then the mean-pressure multiplier.
#[derive(Debug, Clone, Copy)]
pub struct DofMap {
    pub n_edges: usize,
    pub n_triangles: usize,
}

impl DofMap {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        DofMap { n_edges: mesh.n_edges(), n_triangles: mesh.n_triangles() }
    }

    pub fn velocity(&self, edge: usize, comp: usize) -> usize {
        2 * edge + comp
    }

    pub fn pressure(&self, tri: usize) -> usize {
        2 * self.n_edges + tri
    }

    pub fn multiplier(&self) -> usize {
        2 * self.n_edges + self.n_triangles
    }

    pub fn n_field(&self) -> usize {
        2 * self.n_edges + self.n_triangles
    }

    pub fn n_total(&self) -> usize {
        self.n_field() + 1
    }
}

/// Mesh, interface geometry, and local bases, ready for assembly.
pub struct Discretization {
    pub mesh: Mesh,
    pub level_set: LevelSet,
    pub classification: Classification,
    pub cuts: Vec<Option<CutElement>>,
    pub bases: Vec<LocalBasis>,
    pub params: SchemeParams,
    pub dofs: DofMap,
}

pub fn discretize(mesh: Mesh, level_set: LevelSet, params: SchemeParams) -> Result<Discretization> {
    let mut classification = classify(&mesh, &level_set)?;
    let cuts = build_cuts(&mesh, &level_set, &mut classification)?;
    let mut bases = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let basis = match &cuts[t] {
            Some(cut) => LocalBasis::Immersed(Box::new(build_ife_basis(
                cut,
                params.mu_plus,
                params.mu_minus,
            )?)),
            None => LocalBasis::Standard(build_cr_basis(mesh.tri_coords(t))?),
        };
        bases.push(basis);
    }
    let dofs = DofMap::from_mesh(&mesh);
    Ok(Discretization { mesh, level_set, classification, cuts, bases, params, dofs })
}

impl Discretization {
    /// Global DOFs of element t in local basis order: x-averages of the
    /// three edges, y-averages, element pressure.
    pub fn element_dofs(&self, t: usize) -> [usize; 7] {
        let e = &self.mesh.tri_edges[t];
        [
            self.dofs.velocity(e[0], 0),
            self.dofs.velocity(e[1], 0),
            self.dofs.velocity(e[2], 0),
            self.dofs.velocity(e[0], 1),
            self.dofs.velocity(e[1], 1),
            self.dofs.velocity(e[2], 1),
            self.dofs.pressure(t),
        ]
    }

    /// Viscosity seen by element t at a point on the given chord side: cut
    /// elements are two-phase, uncut ones use their element label.
    fn mu_at(&self, t: usize, side: Side) -> f64 {
        match &self.bases[t] {
            LocalBasis::Immersed(_) => self.params.mu(side),
            LocalBasis::Standard(_) => self
                .params
                .mu(Side::from_snapped(self.classification.element_side[t])),
        }
    }
}

/// Assembled bilinear-form blocks and right-hand side, before boundary
/// elimination and the mean-pressure constraint.
pub struct AssembledBlocks {
    pub dofs: DofMap,
    /// a(u_col, v_row): viscous volume terms, edge penalties, interface
    /// consistency terms.
    pub a: Vec<(usize, usize, f64)>,
    /// b1[row][col] = b(v_row, q_col); the full matrix uses b1 - b1^T.
    pub b1: Vec<(usize, usize, f64)>,
    /// Interface pressure-jump stabilization j(p_col, q_row).
    pub jh: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    /// Boundary velocity DOFs with their boundary-data edge averages.
    pub dirichlet: Vec<(usize, f64)>,
    pub tri_areas: Vec<f64>,
}

fn eval7(basis: &LocalBasis, x: Vec2, side: Side) -> [BasisEval; 7] {
    std::array::from_fn(|i| basis.eval(i, x, side))
}

pub fn assemble(
    disc: &Discretization,
    f: &dyn Fn(Vec2) -> Vec2,
    g: &dyn Fn(Vec2) -> Vec2,
) -> Result<AssembledBlocks> {
    let mesh = &disc.mesh;
    let params = disc.params;
    let dofs = disc.dofs;
    let mut a: Vec<(usize, usize, f64)> = Vec::new();
    let mut b1: Vec<(usize, usize, f64)> = Vec::new();
    let mut jh: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; dofs.n_field()];
    let mut tri_areas = Vec::with_capacity(mesh.n_triangles());

    // element integrals
    for t in 0..mesh.n_triangles() {
        let basis = &disc.bases[t];
        let gd = disc.element_dofs(t);
        tri_areas.push(mesh.tri_area(t));

        let mut parts: Vec<(crate::quadrature::QuadRule, Side)> = Vec::with_capacity(2);
        match &disc.cuts[t] {
            Some(cut) => {
                for side in [Side::Plus, Side::Minus] {
                    let rule = cut_element_rule(cut, side, VOLUME_DEGREE)?;
                    if !rule.is_empty() {
                        parts.push((rule, side));
                    }
                }
            }
            None => {
                let side = Side::from_snapped(disc.classification.element_side[t]);
                parts.push((triangle_rule(mesh.tri_coords(t), VOLUME_DEGREE)?, side));
            }
        }

        let mut loc_a = [[0.0f64; 7]; 7];
        let mut loc_b = [[0.0f64; 7]; 7];
        let mut loc_rhs = [0.0f64; 7];
        let mut f_int = Vec2::ZERO; // int_T f
        let mut fx_int = 0.0f64; // int_T f . x
        for (rule, side) in &parts {
            let mu2 = 2.0 * disc.mu_at(t, *side);
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let ev = eval7(basis, x, *side);
                let fx = f(x);
                if params.load_lift {
                    f_int = f_int + fx * w;
                    fx_int += w * fx.dot(x);
                }
                for i in 0..7 {
                    let strain_i = ev[i].grad.sym();
                    let div_i = ev[i].grad.trace();
                    if !params.load_lift {
                        loc_rhs[i] += w * fx.dot(ev[i].velocity);
                    }
                    for j in 0..7 {
                        loc_a[i][j] += w * mu2 * ev[j].grad.sym().ddot(strain_i);
                        loc_b[i][j] -= w * ev[j].pressure * div_i;
                    }
                }
            }
        }
        if params.load_lift {
            // int_T f . R(v) with R the flux-preserving Raviart-Thomas lift:
            // R(v) = sum_k (|e_k| mean_k(v) . n_k) psi_k, psi_k(x) =
            // |e_k|/(2|T|) (x - P_k) with P_k the vertex opposite edge k, so
            // the load of the (edge k, component c) DOF is
            // |e_k|/(2|T|) n_k[c] int_T f.(x - P_k).
            let coords = mesh.tri_coords(t);
            let area = mesh.tri_area(t);
            for k in 0..3 {
                let (pa, pb) = (coords[(k + 1) % 3], coords[(k + 2) % 3]);
                let ek = (pb - pa).norm();
                let mut n_out = Vec2::new(pb.y - pa.y, pa.x - pb.x) * (1.0 / ek);
                if n_out.dot(pa - coords[k]) < 0.0 {
                    n_out = n_out * -1.0;
                }
                let moment = fx_int - f_int.dot(coords[k]);
                let c = ek / (2.0 * area) * moment;
                loc_rhs[k] += c * n_out.x;
                loc_rhs[k + 3] += c * n_out.y;
            }
        }
        for i in 0..7 {
            rhs[gd[i]] += loc_rhs[i];
            for j in 0..7 {
                if loc_a[i][j] != 0.0 {
                    a.push((gd[i], gd[j], loc_a[i][j]));
                }
                if loc_b[i][j] != 0.0 {
                    b1.push((gd[i], gd[j], loc_b[i][j]));
                }
            }
        }
    }

    // edge integrals
    let mut dirichlet = Vec::new();
    for e in 0..mesh.n_edges() {
        let edge = &mesh.edges[e];
        let (_, len, normal) = mesh.edge_geometry(e)?;
        let is_if = disc.classification.is_interface_edge[e];
        let mut incident: Vec<(usize, f64)> = vec![(edge.tri_lo, 1.0)];
        if let Some(hi) = edge.tri_hi {
            incident.push((hi, -1.0));
        }
        let avg_w = if incident.len() == 2 { 0.5 } else { 1.0 };
        // the jump penalty carries the local viscosity so the scheme stays
        // equivariant under rescaling u -> u/mu, p -> p
        let pen_base = (1.0 + if is_if { params.eta } else { 0.0 }) / len;

        let (p0, p1) = mesh.edge_endpoints(e);
        let mut parts: Vec<(crate::quadrature::QuadRule, Side)> = Vec::with_capacity(2);
        if is_if {
            let (plus, minus) = cut_edge_rule(mesh, &disc.classification, e, EDGE_DEGREE)?;
            if !plus.is_empty() {
                parts.push((plus, Side::Plus));
            }
            if !minus.is_empty() {
                parts.push((minus, Side::Minus));
            }
        } else {
            let side = Side::from_snapped(
                disc.classification.vertex_signs[edge.vertices[0]],
            );
            parts.push((segment_rule(p0, p1, EDGE_DEGREE)?, side));
        }

        let ni = incident.len();
        let mut loc_a = vec![[[0.0f64; 7]; 7]; ni * ni];
        let mut loc_b = vec![[[0.0f64; 7]; 7]; ni * ni];
        let mut loc_j = vec![[[0.0f64; 7]; 7]; ni * ni];
        for (rule, side) in &parts {
            let mus: Vec<f64> =
                incident.iter().map(|&(t, _)| disc.mu_at(t, *side)).collect();
            let pen_w = pen_base * mus.iter().sum::<f64>() / ni as f64;
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                // per incident element: traces and averaged viscous fluxes
                let evals: Vec<[BasisEval; 7]> = incident
                    .iter()
                    .map(|&(t, _)| eval7(&disc.bases[t], x, *side))
                    .collect();
                let fluxes: Vec<[Vec2; 7]> = evals
                    .iter()
                    .zip(&mus)
                    .map(|(ev, &mu)| {
                        std::array::from_fn(|i| {
                            (ev[i].grad.sym() * (2.0 * mu)).mul_vec(normal) * avg_w
                        })
                    })
                    .collect();
                for (ai, &(_, ja)) in incident.iter().enumerate() {
                    for (bi, &(_, jb)) in incident.iter().enumerate() {
                        let acc_a = &mut loc_a[ai * ni + bi];
                        let acc_b = &mut loc_b[ai * ni + bi];
                        let acc_j = &mut loc_j[ai * ni + bi];
                        for i in 0..7 {
                            let v = &evals[ai][i];
                            for j in 0..7 {
                                let u = &evals[bi][j];
                                let mut s =
                                    pen_w * ja * jb * v.velocity.dot(u.velocity);
                                if is_if {
                                    s -= fluxes[bi][j].dot(v.velocity) * ja
                                        + params.delta * fluxes[ai][i].dot(u.velocity) * jb;
                                    acc_b[i][j] += w
                                        * (avg_w * u.pressure)
                                        * (ja * v.velocity.dot(normal));
                                    acc_j[i][j] +=
                                        len * w * (ja * v.pressure) * (jb * u.pressure);
                                }
                                acc_a[i][j] += w * s;
                            }
                        }
                    }
                }
            }
        }
        for (ai, &(ta, _)) in incident.iter().enumerate() {
            let gda = disc.element_dofs(ta);
            for (bi, &(tb, _)) in incident.iter().enumerate() {
                let gdb = disc.element_dofs(tb);
                for i in 0..7 {
                    for j in 0..7 {
                        let (va, vb, vj) = (
                            loc_a[ai * ni + bi][i][j],
                            loc_b[ai * ni + bi][i][j],
                            loc_j[ai * ni + bi][i][j],
                        );
                        if va != 0.0 {
                            a.push((gda[i], gdb[j], va));
                        }
                        if vb != 0.0 {
                            b1.push((gda[i], gdb[j], vb));
                        }
                        if vj != 0.0 {
                            jh.push((gda[i], gdb[j], vj));
                        }
                    }
                }
            }
        }

        if edge.boundary {
            // boundary jumps penalize u - g, so the data side of the
            // penalty goes to the right-hand side; without it only the edge
            // mean of g would be enforced and consistency would drop to
            // first order
            let gd = disc.element_dofs(edge.tri_lo);
            let basis = &disc.bases[edge.tri_lo];
            let side = Side::from_snapped(
                disc.classification.vertex_signs[edge.vertices[0]],
            );
            let pen_w = pen_base * disc.mu_at(edge.tri_lo, side);
            let rule = segment_rule(p0, p1, EDGE_DEGREE)?;
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                let gx = g(x);
                for i in 0..7 {
                    let v = basis.eval(i, x, side).velocity;
                    rhs[gd[i]] += pen_w * w * gx.dot(v);
                }
            }

            let rule = segment_rule(p0, p1, DIRICHLET_DEGREE)?;
            let mut avg = Vec2::ZERO;
            for (&x, &w) in rule.points.iter().zip(&rule.weights) {
                avg = avg + g(x) * w;
            }
            avg = avg / len;
            dirichlet.push((dofs.velocity(e, 0), avg.x));
            dirichlet.push((dofs.velocity(e, 1), avg.y));
        }
    }

    Ok(AssembledBlocks { dofs, a, b1, jh, rhs, dirichlet, tri_areas })
}

/// Combines the blocks into the final linear system: full = a + b1 - b1^T
/// + jh, a symmetric multiplier row/column carrying sum_T |T| p_T = 0, and
/// strong elimination of boundary velocity DOFs (their rows become identity
/// rows, their columns move to the right-hand side).
pub fn finalize(blocks: &AssembledBlocks) -> SaddlePointSystem {
    let n = blocks.dofs.n_total();
    let mult = blocks.dofs.multiplier();
    let mut rhs = blocks.rhs.clone();
    rhs.push(0.0);

    let mut constrained: Vec<Option<f64>> = vec![None; n];
    for &(d, v) in &blocks.dirichlet {
        constrained[d] = Some(v);
    }

    let raw = blocks
        .a
        .iter()
        .chain(blocks.jh.iter())
        .copied()
        .chain(blocks.b1.iter().copied())
        .chain(blocks.b1.iter().map(|&(r, c, v)| (c, r, -v)))
        .chain(
            blocks
                .tri_areas
                .iter()
                .enumerate()
                .flat_map(|(t, &area)| {
                    let p = blocks.dofs.pressure(t);
                    [(mult, p, area), (p, mult, area)]
                }),
        );

    let mut triplets = Vec::with_capacity(
        blocks.a.len() + 2 * blocks.b1.len() + blocks.jh.len() + 2 * blocks.tri_areas.len(),
    );
    for (r, c, v) in raw {
        if v == 0.0 || constrained[r].is_some() {
            continue;
        }
        if let Some(g) = constrained[c] {
            rhs[r] -= v * g;
            continue;
        }
        triplets.push((r, c, v));
    }
    for &(d, v) in &blocks.dirichlet {
        triplets.push((d, d, 1.0));
        rhs[d] = v;
    }

    SaddlePointSystem {
        n,
        triplets,
        rhs,
        n_velocity: 2 * blocks.dofs.n_edges,
        n_pressure: blocks.dofs.n_triangles,
    }
}

/// Textbook single-phase CR-P0 assembly of the same scheme, written from
/// closed forms only (no shared quadrature or basis code) as an independent
/// cross-check. Requires a mesh the interface does not touch.
pub fn reference_cr_p0(
    mesh: &Mesh,
    mu: f64,
    load_lift: bool,
    f: &dyn Fn(Vec2) -> Vec2,
    g: &dyn Fn(Vec2) -> Vec2,
) -> Result<AssembledBlocks> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParams(format!("viscosity must be positive, got {mu}")));
    }
    let dofs = DofMap::from_mesh(mesh);
    let mut a = Vec::new();
    let mut b1 = Vec::new();
    let mut rhs = vec![0.0; dofs.n_field()];
    let mut tri_areas = Vec::with_capacity(mesh.n_triangles());

    // per-element CR gradients: grad lambda_k = -2 grad b_k with
    // grad b_k = (y_{k+1} - y_{k+2}, x_{k+2} - x_{k+1}) / (2 |T|)
    let cr_grads = |coords: [Vec2; 3], area: f64| -> [Vec2; 3] {
        std::array::from_fn(|k| {
            let (p, q) = (coords[(k + 1) % 3], coords[(k + 2) % 3]);
            Vec2::new(p.y - q.y, q.x - p.x) * (-1.0 / area)
        })
    };

    for t in 0..mesh.n_triangles() {
        let coords = mesh.tri_coords(t);
        let area = mesh.tri_area(t);
        tri_areas.push(area);
        let grads = cr_grads(coords, area);
        let gd = [
            dofs.velocity(mesh.tri_edges[t][0], 0),
            dofs.velocity(mesh.tri_edges[t][1], 0),
            dofs.velocity(mesh.tri_edges[t][2], 0),
            dofs.velocity(mesh.tri_edges[t][0], 1),
            dofs.velocity(mesh.tri_edges[t][1], 1),
            dofs.velocity(mesh.tri_edges[t][2], 1),
            dofs.pressure(t),
        ];
        // eps_i : eps_j in closed form; basis i < 3 is (lambda_i, 0),
        // i >= 3 is (0, lambda_{i-3})
        let strain = |i: usize| -> [[f64; 2]; 2] {
            let grad = grads[i % 3];
            if i < 3 {
                [[grad.x, 0.5 * grad.y], [0.5 * grad.y, 0.0]]
            } else {
                [[0.0, 0.5 * grad.x], [0.5 * grad.x, grad.y]]
            }
        };
        for i in 0..6 {
            let si = strain(i);
            for j in 0..6 {
                let sj = strain(j);
                let dd: f64 = (0..2)
                    .flat_map(|r| (0..2).map(move |c| (r, c)))
                    .map(|(r, c)| si[r][c] * sj[r][c])
                    .sum();
                let v = 2.0 * mu * area * dd;
                if v != 0.0 {
                    a.push((gd[i], gd[j], v));
                }
            }
            let div_i = if i < 3 { grads[i % 3].x } else { grads[i % 3].y };
            if div_i != 0.0 {
                b1.push((gd[i], gd[6], -area * div_i));
            }
            if !load_lift {
                // int_T f . phi_i = |T|/3 f(mid_i)_comp since lambda_i
                // vanishes at the other two midpoints
                let mid = (coords[(i % 3 + 1) % 3] + coords[(i % 3 + 2) % 3]) * 0.5;
                rhs[gd[i]] += area / 3.0 * if i < 3 { f(mid).x } else { f(mid).y };
            }
        }
        if load_lift {
            // Raviart-Thomas load: per edge k the DOF (k, comp) receives
            // |e_k|/(2|T|) n_k[comp] int_T f.(x - P_k); the midpoint rule
            // is exact for the quadratic integrand when f is affine
            let mids: [Vec2; 3] =
                std::array::from_fn(|k| (coords[(k + 1) % 3] + coords[(k + 2) % 3]) * 0.5);
            for k in 0..3 {
                let (pa, pb) = (coords[(k + 1) % 3], coords[(k + 2) % 3]);
                let ek = (pb - pa).norm();
                let mut n_out = Vec2::new(pb.y - pa.y, pa.x - pb.x) * (1.0 / ek);
                if n_out.dot(pa - coords[k]) < 0.0 {
                    n_out = n_out * -1.0;
                }
                let moment: f64 =
                    mids.iter().map(|&m| area / 3.0 * f(m).dot(m - coords[k])).sum();
                let c = ek / (2.0 * area) * moment;
                rhs[gd[k]] += c * n_out.x;
                rhs[gd[k + 3]] += c * n_out.y;
            }
        }
    }

    let mut dirichlet = Vec::new();
    for e in 0..mesh.n_edges() {
        let edge = &mesh.edges[e];
        let (p0, p1) = mesh.edge_endpoints(e);
        let mid = (p0 + p1) * 0.5;
        let mut incident: Vec<(usize, f64)> = vec![(edge.tri_lo, 1.0)];
        if let Some(hi) = edge.tri_hi {
            incident.push((hi, -1.0));
        }
        // (1/|e|) int_e [u][v] with affine traces; Simpson is exact for
        // their quadratic products. lambda_k is reconstructed from its
        // gradient and its unit value at the midpoint of edge k.
        let lam = |grads: &[Vec2; 3], coords: &[Vec2; 3], k: usize, x: Vec2| {
            let m = (coords[(k + 1) % 3] + coords[(k + 2) % 3]) * 0.5;
            1.0 + grads[k].dot(x - m)
        };
        for &(ta, ja) in &incident {
            let ca = mesh.tri_coords(ta);
            let ga = cr_grads(ca, mesh.tri_area(ta));
            for &(tb, jb) in &incident {
                let cb = mesh.tri_coords(tb);
                let gb = cr_grads(cb, mesh.tri_area(tb));
                for i in 0..6 {
                    for j in 0..6 {
                        if (i < 3) != (j < 3) {
                            continue; // components do not couple here
                        }
                        let f0 = lam(&ga, &ca, i % 3, p0) * lam(&gb, &cb, j % 3, p0);
                        let fm = lam(&ga, &ca, i % 3, mid) * lam(&gb, &cb, j % 3, mid);
                        let f1 = lam(&ga, &ca, i % 3, p1) * lam(&gb, &cb, j % 3, p1);
                        let comp = usize::from(i >= 3);
                        let gi = dofs.velocity(mesh.tri_edges[ta][i % 3], comp);
                        let gj = dofs.velocity(mesh.tri_edges[tb][j % 3], comp);
                        let v = mu * ja * jb * (f0 + 4.0 * fm + f1) / 6.0;
                        if v != 0.0 {
                            a.push((gi, gj, v));
                        }
                    }
                }
            }
        }
        if edge.boundary {
            // data side of the boundary penalty; 3-point Gauss handles the
            // product of cubic data with affine traces exactly
            let ca = mesh.tri_coords(edge.tri_lo);
            let ga = cr_grads(ca, mesh.tri_area(edge.tri_lo));
            let off = 0.5 * 0.6f64.sqrt();
            let gauss = [
                (0.5 - off, 5.0 / 18.0),
                (0.5, 8.0 / 18.0),
                (0.5 + off, 5.0 / 18.0),
            ];
            for (t, w) in gauss {
                let x = p0 + (p1 - p0) * t;
                let gx = g(x);
                for i in 0..6 {
                    let li = lam(&ga, &ca, i % 3, x);
                    let gi =
                        dofs.velocity(mesh.tri_edges[edge.tri_lo][i % 3], usize::from(i >= 3));
                    rhs[gi] += mu * w * li * if i < 3 { gx.x } else { gx.y };
                }
            }
            let avg = (g(p0) + g(mid) * 4.0 + g(p1)) / 6.0;
            dirichlet.push((dofs.velocity(e, 0), avg.x));
            dirichlet.push((dofs.velocity(e, 1), avg.y));
        }
    }

    Ok(AssembledBlocks { dofs, a, b1, jh: Vec::new(), rhs, dirichlet, tri_areas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use std::collections::HashMap;

    fn summed(triplets: &[(usize, usize, f64)]) -> HashMap<(usize, usize), f64> {
        let mut m = HashMap::new();
        for &(r, c, v) in triplets {
            *m.entry((r, c)).or_insert(0.0) += v;
        }
        m.retain(|_, v| v.abs() > 0.0);
        m
    }

    fn body(x: Vec2) -> Vec2 {
        Vec2::new(-8.0 * x.y - 2.0 * x.x, 8.0 * x.x + 2.0 * x.y)
    }

    fn bdata(x: Vec2) -> Vec2 {
        Vec2::new(x.y * 0.25 - x.x, x.x * x.y)
    }

    #[test]
    fn params_are_validated() {
        assert!(SchemeParams::new(1.0, 1.0, -1.0, 0.0).is_ok());
        assert!(SchemeParams::new(0.0, 1.0, -1.0, 0.0).is_err());
        assert!(SchemeParams::new(1.0, -2.0, -1.0, 0.0).is_err());
        assert!(SchemeParams::new(1.0, 1.0, 0.5, 0.0).is_err());
        assert!(SchemeParams::new(1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn dof_layout() {
        let mesh = Mesh::uniform(2, Domain::unit_symmetric()).unwrap();
        let d = DofMap::from_mesh(&mesh);
        assert_eq!(d.n_edges, 16);
        assert_eq!(d.n_triangles, 8);
        assert_eq!(d.velocity(3, 1), 7);
        assert_eq!(d.pressure(0), 32);
        assert_eq!(d.multiplier(), 40);
        assert_eq!(d.n_total(), 41);
    }

    /// With the interface outside the domain and equal viscosities, the
    /// immersed assembly must agree coefficient-wise with the independent
    /// textbook path.
    #[test]
    fn matches_reference_assembly_without_interface() {
        let mesh = Mesh::uniform(4, Domain::unit_symmetric()).unwrap();
        let far = LevelSet::circle(Vec2::ZERO, 10.0);
        let params = SchemeParams::new(3.0, 3.0, -1.0, 0.0).unwrap();
        let disc = discretize(mesh, far, params).unwrap();
        assert!(disc.classification.interface_elements.is_empty());
        let blocks = assemble(&disc, &body, &bdata).unwrap();
        let mesh2 = Mesh::uniform(4, Domain::unit_symmetric()).unwrap();
        let reference = reference_cr_p0(&mesh2, 3.0, false, &body, &bdata).unwrap();

        let sys = finalize(&blocks);
        let rsys = finalize(&reference);
        let (m, rm) = (summed(&sys.triplets), summed(&rsys.triplets));
        let scale = m.values().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (k, v) in &m {
            let rv = rm.get(k).copied().unwrap_or(0.0);
            assert!(
                (v - rv).abs() <= 1e-10 * scale,
                "entry {k:?}: {v} vs {rv}"
            );
        }
        for (k, rv) in &rm {
            assert!(m.contains_key(k) || rv.abs() <= 1e-10 * scale, "missing {k:?}");
        }
        for (x, y) in sys.rhs.iter().zip(&rsys.rhs) {
            assert!((x - y).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn symmetrized_velocity_block_is_symmetric() {
        let mesh = Mesh::uniform(8, Domain::unit_symmetric()).unwrap();
        let circle = LevelSet::circle(Vec2::ZERO, 0.5);
        let params = SchemeParams::new(5.0, 1.0, 1.0, 0.0).unwrap();
        let disc = discretize(mesh, circle, params).unwrap();
        assert!(!disc.classification.interface_elements.is_empty());
        let blocks = assemble(&disc, &body, &bdata).unwrap();
        let m = summed(&blocks.a);
        let scale = m.values().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (&(r, c), v) in &m {
            let vt = m.get(&(c, r)).copied().unwrap_or(0.0);
            assert!((v - vt).abs() <= 1e-12 * scale, "({r},{c}): {v} vs {vt}");
        }
    }

    #[test]
    fn velocity_form_is_nonnegative_for_default_scheme() {
        let mesh = Mesh::uniform(8, Domain::unit_symmetric()).unwrap();
        let circle = LevelSet::circle(Vec2::ZERO, 0.5);
        let params = SchemeParams::new(1000.0, 1.0, -1.0, 0.0).unwrap();
        let disc = discretize(mesh, circle, params).unwrap();
        let blocks = assemble(&disc, &body, &bdata).unwrap();
        let m = summed(&blocks.a);
        let scale = m.values().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let nv = 2 * blocks.dofs.n_edges;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..nv).map(|_| rng()).collect();
            let mut quad = 0.0;
            for (&(r, c), v) in &m {
                if r < nv && c < nv {
                    quad += x[r] * v * x[c];
                }
            }
            let xs: f64 = x.iter().map(|v| v * v).sum();
            assert!(quad >= -1e-12 * scale * xs, "a(v,v) = {quad}");
        }
    }

    #[test]
    fn finalize_eliminates_boundary_rows() {
        let mesh = Mesh::uniform(2, Domain::unit_symmetric()).unwrap();
        let far = LevelSet::circle(Vec2::ZERO, 10.0);
        let params = SchemeParams::new(1.0, 1.0, -1.0, 0.0).unwrap();
        let disc = discretize(mesh, far, params).unwrap();
        let blocks = assemble(&disc, &body, &bdata).unwrap();
        let sys = finalize(&blocks);
        let m = summed(&sys.triplets);
        for &(d, g) in &blocks.dirichlet {
            for (&(r, c), v) in &m {
                if r == d {
                    assert!(c == d && (v - 1.0).abs() < 1e-15, "row {d} not identity");
                }
                if c == d {
                    assert_eq!(r, d, "column {d} not eliminated");
                }
            }
            assert!((sys.rhs[d] - g).abs() < 1e-15);
        }
        // multiplier row carries the element areas
        let mult = blocks.dofs.multiplier();
        for t in 0..blocks.dofs.n_triangles {
            let p = blocks.dofs.pressure(t);
            assert!((m[&(mult, p)] - blocks.tri_areas[t]).abs() < 1e-15);
            assert!((m[&(p, mult)] - blocks.tri_areas[t]).abs() < 1e-15);
        }
    }
}
