//! Error measurement, convergence orders and adapted-mesh extraction.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{ElementGeometry, GeometryTables};
use crate::hdg::{Discretization, FieldState};
use crate::mesh::{BoundaryTag, Mesh};
use crate::problems::{ExactSolution, OTProblem, TargetDomain};

/// Broken L2 errors of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub p: usize,
    pub n: usize,
    /// Mesh size `1/n`.
    pub h: f64,
    pub err_u: f64,
    pub err_q: f64,
    pub err_h: f64,
}

/// Values of the nodal field with coefficients `coef` at the element quadrature points.
fn at_quad(disc: &Discretization, coef: &[f64]) -> DVector<f64> {
    &disc.re.phi * DVector::from_column_slice(coef)
}

/// Broken L2 errors of `state` against `exact`; `n` is the resolution used for `h`.
pub fn l2_error(state: &FieldState, exact: &ExactSolution, disc: &Discretization, n: usize) -> ErrorReport {
    let (mut eu, mut eq, mut eh) = (0.0, 0.0, 0.0);
    for (e, ed) in disc.elems.iter().enumerate() {
        let u = at_quad(disc, state.u(e));
        let q = [at_quad(disc, state.q(e, 0)), at_quad(disc, state.q(e, 1))];
        let h: Vec<_> = (0..4).map(|c| at_quad(disc, state.h(e, c))).collect();
        for (k, (&x, &w)) in ed.geom.points.iter().zip(&ed.geom.wdet).enumerate() {
            eu += w * ((exact.u)(x) - u[k]).powi(2);
            let g = (exact.grad)(x);
            eq += w * ((g[0] - q[0][k]).powi(2) + (g[1] - q[1][k]).powi(2));
            let hx = (exact.hess)(x);
            eh += w * (0..4).map(|c| (hx[c] - h[c][k]).powi(2)).sum::<f64>();
        }
    }
    ErrorReport {
        p: disc.degree(),
        n,
        h: 1.0 / n as f64,
        err_u: eu.sqrt(),
        err_q: eq.sqrt(),
        err_h: eh.sqrt(),
    }
}

/// Observed order `log2(e_coarse / e_fine)` between resolutions `n` and `2n`; `None` when either
/// error is zero or not finite.
pub fn convergence_order(e_coarse: f64, e_fine: f64) -> Option<f64> {
    if e_coarse > 0.0 && e_fine > 0.0 && e_coarse.is_finite() && e_fine.is_finite() {
        Some((e_coarse / e_fine).log2())
    } else {
        None
    }
}

/// Orders of a series of reports at successive resolutions; the first entry has none.
pub fn series_orders(reports: &[ErrorReport]) -> Vec<[Option<f64>; 3]> {
    let mut out = vec![[None; 3]];
    for w in reports.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.n == 2 * a.n {
            out.push([
                convergence_order(a.err_u, b.err_u),
                convergence_order(a.err_q, b.err_q),
                convergence_order(a.err_h, b.err_h),
            ]);
        } else {
            out.push([None; 3]);
        }
    }
    out.truncate(reports.len());
    out
}

/// Mesh obtained by moving the background high-order nodes through `q_h`.
#[derive(Debug, Clone)]
pub struct AdaptedMesh {
    /// Background mesh at geometric degree `p`.
    pub background: Mesh,
    /// Same connectivity with node coordinates `q_h`.
    pub mesh: Mesh,
    /// Whether the node was shared by several elements and averaged.
    pub averaged: Vec<bool>,
    /// Largest disagreement of the per-element values at a shared node.
    pub max_disagreement: f64,
    /// Largest `|g(q_h)|` at boundary nodes and boundary face quadrature points, before projection.
    pub raw_boundary_residual: f64,
    /// Largest `|g|` at the adapted boundary nodes.
    pub boundary_residual: f64,
    /// Smallest Jacobian determinant of the adapted elements at quadrature points.
    pub min_jacobian: f64,
    pub element_areas: Vec<f64>,
}

impl AdaptedMesh {
    pub fn area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    pub fn min_element_area(&self) -> f64 {
        self.element_areas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest node displacement from the background mesh.
    pub fn max_displacement(&self) -> f64 {
        self.mesh
            .node_coords
            .iter()
            .zip(&self.background.node_coords)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
    }
}

/// Closest-point style projection of `q` onto the target boundary component `tag`.
fn project_to_boundary(target: &TargetDomain, tag: BoundaryTag, q: [f64; 2]) -> Result<[f64; 2]> {
    use BoundaryTag::*;
    Ok(match (target, tag) {
        (TargetDomain::Box(b), Bottom) => [q[0], b.y0],
        (TargetDomain::Box(b), Right) => [b.x1, q[1]],
        (TargetDomain::Box(b), Top) => [q[0], b.y1],
        (TargetDomain::Box(b), Left) => [b.x0, q[1]],
        (TargetDomain::HalfCylinder, Circle) => {
            let r = q[0].hypot(q[1]);
            [q[0] / r, q[1] / r]
        }
        (TargetDomain::HalfCylinder, Ellipse) => {
            let r = (q[0] * q[0] / 4.0 + q[1] * q[1] / 16.0).sqrt();
            [q[0] / r, q[1] / r]
        }
        (TargetDomain::HalfCylinder, Cut) => [0.0, q[1]],
        _ => return Err(Error::UnknownTag(tag.id())),
    })
}

/// Builds the adapted mesh from a converged optimal-transport state.
///
/// Element-local nodal values of `q_h` are averaged at shared nodes, boundary nodes are projected
/// onto their target boundary component, and the result is checked for positive Jacobians.
pub fn extract_adapted_mesh(state: &FieldState, disc: &Discretization, problem: &OTProblem) -> Result<AdaptedMesh> {
    let p = disc.degree();
    let background = disc.mesh.elevate(p)?;
    let nn = background.node_coords.len();
    let mut sum = vec![[0.0; 2]; nn];
    let mut count = vec![0usize; nn];
    let mut first: Vec<Option<[f64; 2]>> = vec![None; nn];
    let mut max_disagreement: f64 = 0.0;
    for (e, nodes) in background.elem_nodes.iter().enumerate() {
        let (q0, q1) = (state.q(e, 0), state.q(e, 1));
        for (l, &n) in nodes.iter().enumerate() {
            let v = [q0[l], q1[l]];
            sum[n][0] += v[0];
            sum[n][1] += v[1];
            count[n] += 1;
            match first[n] {
                Some(f) => max_disagreement = max_disagreement.max((f[0] - v[0]).hypot(f[1] - v[1])),
                None => first[n] = Some(v),
            }
        }
    }
    let mut coords: Vec<[f64; 2]> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64])
        .collect();
    let averaged = count.iter().map(|&c| c > 1).collect();

    // raw boundary residual of q_h: element-local nodal values and face quadrature points
    let mut raw: f64 = 0.0;
    for f in background.boundary_faces() {
        let face = &background.faces[f];
        let tag = face.boundary_tag.expect("boundary face carries a tag");
        let e = face.owner;
        let lf = face.owner_local;
        for &l in &disc.re.face_nodes[lf] {
            let v = [state.q(e, 0)[l], state.q(e, 1)[l]];
            raw = raw.max(problem.boundary_g(tag, v)?.0.abs());
        }
        let fphi = &disc.re.face_phi[lf];
        let qa = fphi * DVector::from_column_slice(state.q(e, 0));
        let qb = fphi * DVector::from_column_slice(state.q(e, 1));
        for k in 0..qa.len() {
            raw = raw.max(problem.boundary_g(tag, [qa[k], qb[k]])?.0.abs());
        }
    }

    // corner nodes carry two tags; projecting onto both lands on the corner
    for f in background.boundary_faces() {
        let face = &background.faces[f];
        let tag = face.boundary_tag.expect("boundary face carries a tag");
        for &n in &face.nodes {
            coords[n] = project_to_boundary(&problem.target, tag, coords[n])?;
        }
    }
    let mut boundary_residual: f64 = 0.0;
    for f in background.boundary_faces() {
        let face = &background.faces[f];
        let tag = face.boundary_tag.expect("boundary face carries a tag");
        for &n in &face.nodes {
            boundary_residual = boundary_residual.max(problem.boundary_g(tag, coords[n])?.0.abs());
        }
    }

    let mut mesh = background.clone();
    mesh.node_coords = coords;
    let tables = GeometryTables::new(&mesh, &disc.re)?;
    let mut bad = Vec::new();
    let mut min_jacobian = f64::INFINITY;
    let mut element_areas = Vec::with_capacity(mesh.num_elements());
    for e in 0..mesh.num_elements() {
        match ElementGeometry::from_coords(&mesh.elem_coords(e), &disc.re, &tables) {
            Ok(g) => {
                min_jacobian = g.det.iter().copied().fold(min_jacobian, f64::min);
                element_areas.push(g.area());
            }
            Err(_) => bad.push(e),
        }
    }
    if !bad.is_empty() {
        return Err(Error::TangledMesh { elements: bad });
    }
    Ok(AdaptedMesh {
        background,
        mesh,
        averaged,
        max_disagreement,
        raw_boundary_residual: raw,
        boundary_residual,
        min_jacobian,
        element_areas,
    })
}

/// Broken L2 norm of `rho'(q_h) det(H_h) - theta`.
pub fn equidistribution_residual(state: &FieldState, problem: &OTProblem, disc: &Discretization) -> f64 {
    let mut acc = 0.0;
    for (e, ed) in disc.elems.iter().enumerate() {
        let q = [at_quad(disc, state.q(e, 0)), at_quad(disc, state.q(e, 1))];
        let h: Vec<_> = (0..4).map(|c| at_quad(disc, state.h(e, c))).collect();
        for (k, &w) in ed.geom.wdet.iter().enumerate() {
            let det = h[0][k] * h[3][k] - h[1][k] * h[2][k];
            let r = problem.density.eval([q[0][k], q[1][k]]) * det - problem.theta;
            acc += w * r * r;
        }
    }
    acc.sqrt()
}
