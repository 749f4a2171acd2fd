//! Nodal reference elements: Lagrange bases on equispaced nodes, element and face quadrature.
//!
//! Reference triangle: vertices (0,0), (1,0), (0,1); faces 0: v0->v1, 1: v1->v2, 2: v2->v0.
//! Reference square: vertices (0,0), (1,0), (1,1), (0,1); face k runs from v_k to v_{k+1}.
//! Nodes are the equispaced lattice `(i/p, j/p)`, ordered with `j` outer and `i` inner.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::ElemKind;
use crate::polynomial::{dimension, modal_basis, modal_basis_1d};
use crate::quadrature::{element_rule, face_rule};

pub const MAX_DEGREE: usize = 8;

/// Topological entity a reference node sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeEntity {
    Vertex(usize),
    /// Local face and position `1..p` along the face in its local direction.
    Edge(usize, usize),
    Interior,
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub kind: ElemKind,
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    pub node_entity: Vec<NodeEntity>,
    /// Inverse modal Vandermonde: nodal values = modal values * `inv_vandermonde`.
    inv_vandermonde: DMatrix<f64>,

    pub quad_points: Vec<[f64; 2]>,
    pub quad_weights: Vec<f64>,
    /// Basis values at element quadrature points, `nq x nb`.
    pub phi: DMatrix<f64>,
    pub dphi_dxi: DMatrix<f64>,
    pub dphi_deta: DMatrix<f64>,

    /// Face quadrature on `[0, 1]`.
    pub face_points: Vec<f64>,
    pub face_weights: Vec<f64>,
    /// Per face, basis values / reference gradients at the face quadrature points.
    pub face_phi: Vec<DMatrix<f64>>,
    pub face_dphi_dxi: Vec<DMatrix<f64>>,
    pub face_dphi_deta: Vec<DMatrix<f64>>,
    /// Trace basis at the face quadrature points, `nqf x (p+1)`, forward and reversed.
    pub trace_phi: DMatrix<f64>,
    pub trace_phi_rev: DMatrix<f64>,
    /// Element-local node indices lying on each face, in local face direction.
    pub face_nodes: Vec<Vec<usize>>,
}

impl ElemKind {
    pub fn num_faces(self) -> usize {
        match self {
            ElemKind::Triangle => 3,
            ElemKind::Quadrilateral => 4,
        }
    }

    pub fn ref_vertices(self) -> &'static [[f64; 2]] {
        match self {
            ElemKind::Triangle => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            ElemKind::Quadrilateral => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    /// Reference point on local face `face` at parameter `t` in the face's local direction.
    pub fn face_point(self, face: usize, t: f64) -> [f64; 2] {
        let v = self.ref_vertices();
        let a = v[face];
        let b = v[(face + 1) % v.len()];
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn ref_area(self) -> f64 {
        match self {
            ElemKind::Triangle => 0.5,
            ElemKind::Quadrilateral => 1.0,
        }
    }
}

/// Equispaced nodes and their entity classification.
fn lattice(kind: ElemKind, p: usize) -> (Vec<[f64; 2]>, Vec<NodeEntity>) {
    let mut nodes = Vec::new();
    let mut ent = Vec::new();
    let pf = p as f64;
    for j in 0..=p {
        let imax = match kind {
            ElemKind::Triangle => p - j,
            ElemKind::Quadrilateral => p,
        };
        for i in 0..=imax {
            nodes.push([i as f64 / pf, j as f64 / pf]);
            let e = match kind {
                ElemKind::Triangle => match (i, j) {
                    (0, 0) => NodeEntity::Vertex(0),
                    (i, 0) if i == p => NodeEntity::Vertex(1),
                    (0, j) if j == p => NodeEntity::Vertex(2),
                    (i, 0) => NodeEntity::Edge(0, i),
                    (0, j) => NodeEntity::Edge(2, p - j),
                    (i, j) if i + j == p => NodeEntity::Edge(1, j),
                    _ => NodeEntity::Interior,
                },
                ElemKind::Quadrilateral => {
                    let (lo_i, hi_i, lo_j, hi_j) = (i == 0, i == p, j == 0, j == p);
                    match (lo_i, hi_i, lo_j, hi_j) {
                        (true, _, true, _) => NodeEntity::Vertex(0),
                        (_, true, true, _) => NodeEntity::Vertex(1),
                        (_, true, _, true) => NodeEntity::Vertex(2),
                        (true, _, _, true) => NodeEntity::Vertex(3),
                        (_, _, true, _) => NodeEntity::Edge(0, i),
                        (_, true, _, _) => NodeEntity::Edge(1, j),
                        (_, _, _, true) => NodeEntity::Edge(2, p - i),
                        (true, _, _, _) => NodeEntity::Edge(3, p - j),
                        _ => NodeEntity::Interior,
                    }
                }
            };
            ent.push(e);
        }
    }
    (nodes, ent)
}

impl ReferenceElement {
    /// Degree-`p` element with quadrature strength `2p + 1`.
    pub fn new(kind: ElemKind, p: usize) -> Result<Self> {
        Self::with_strength(kind, p, 2 * p + 1)
    }

    pub fn with_strength(kind: ElemKind, p: usize, strength: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {p} outside supported range 1..={MAX_DEGREE}"
            )));
        }
        let (nodes, node_entity) = lattice(kind, p);
        let nb = dimension(kind, p);
        let vand = DMatrix::from_fn(nb, nb, |i, j| modal_basis(kind, p, nodes[i]).0[j]);
        let inv_vandermonde = vand
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular Vandermonde matrix".into()))?;

        let (quad_points, quad_weights) = element_rule(kind, strength);
        let (face_points, face_weights) = face_rule(strength);

        let mut re = ReferenceElement {
            kind,
            degree: p,
            nodes,
            node_entity,
            inv_vandermonde,
            quad_points: Vec::new(),
            quad_weights,
            phi: DMatrix::zeros(0, 0),
            dphi_dxi: DMatrix::zeros(0, 0),
            dphi_deta: DMatrix::zeros(0, 0),
            face_points: face_points.clone(),
            face_weights,
            face_phi: Vec::new(),
            face_dphi_dxi: Vec::new(),
            face_dphi_deta: Vec::new(),
            trace_phi: DMatrix::zeros(0, 0),
            trace_phi_rev: DMatrix::zeros(0, 0),
            face_nodes: Vec::new(),
        };
        let (phi, dx, dy) = re.tabulate(&quad_points);
        re.phi = phi;
        re.dphi_dxi = dx;
        re.dphi_deta = dy;
        re.quad_points = quad_points;

        for f in 0..kind.num_faces() {
            let pts: Vec<_> = face_points.iter().map(|&t| kind.face_point(f, t)).collect();
            let (phi, dx, dy) = re.tabulate(&pts);
            re.face_phi.push(phi);
            re.face_dphi_dxi.push(dx);
            re.face_dphi_deta.push(dy);
        }
        let rev: Vec<f64> = face_points.iter().map(|t| 1.0 - t).collect();
        re.trace_phi = trace_basis(p, &face_points);
        re.trace_phi_rev = trace_basis(p, &rev);

        re.face_nodes = (0..kind.num_faces())
            .map(|f| {
                let mut on_face: Vec<(usize, usize)> = re
                    .node_entity
                    .iter()
                    .enumerate()
                    .filter_map(|(n, e)| match *e {
                        NodeEntity::Vertex(v) if v == f => Some((0, n)),
                        NodeEntity::Vertex(v) if v == (f + 1) % kind.num_faces() => Some((p, n)),
                        NodeEntity::Edge(ff, m) if ff == f => Some((m, n)),
                        _ => None,
                    })
                    .collect();
                on_face.sort();
                on_face.into_iter().map(|(_, n)| n).collect()
            })
            .collect();
        Ok(re)
    }

    pub fn num_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_quad(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn num_face_quad(&self) -> usize {
        self.face_weights.len()
    }

    pub fn num_trace(&self) -> usize {
        self.degree + 1
    }

    pub fn num_faces(&self) -> usize {
        self.kind.num_faces()
    }

    /// Nodal basis values and reference gradients at arbitrary reference points, each `npts x nb`.
    pub fn tabulate(&self, pts: &[[f64; 2]]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let nb = self.num_basis();
        let mut mv = DMatrix::zeros(pts.len(), nb);
        let mut mx = DMatrix::zeros(pts.len(), nb);
        let mut my = DMatrix::zeros(pts.len(), nb);
        for (r, &x) in pts.iter().enumerate() {
            let (v, g) = modal_basis(self.kind, self.degree, x);
            for j in 0..nb {
                mv[(r, j)] = v[j];
                mx[(r, j)] = g[j][0];
                my[(r, j)] = g[j][1];
            }
        }
        (
            mv * &self.inv_vandermonde,
            mx * &self.inv_vandermonde,
            my * &self.inv_vandermonde,
        )
    }
}

/// Nodal Lagrange basis of degree `p` on equispaced points of [0, 1], tabulated at `ts`.
pub fn trace_basis(p: usize, ts: &[f64]) -> DMatrix<f64> {
    let nodes: Vec<f64> = (0..=p).map(|m| m as f64 / p as f64).collect();
    let vand = DMatrix::from_fn(p + 1, p + 1, |i, j| modal_basis_1d(p, nodes[i])[j]);
    let inv = vand.try_inverse().expect("1D Vandermonde is nonsingular");
    DMatrix::from_fn(ts.len(), p + 1, |r, j| {
        let m = modal_basis_1d(p, ts[r]);
        (0..=p).map(|k| m[k] * inv[(k, j)]).sum()
    })
}
