//! Per-element geometric factors of the (possibly curved) isoparametric map.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{FaceKind, Mesh};
use crate::reference::ReferenceElement;

/// Geometric basis (degree of the mesh) tabulated at the quadrature points of a solution element.
#[derive(Debug, Clone)]
pub struct GeometryTables {
    pub phi: DMatrix<f64>,
    pub dxi: DMatrix<f64>,
    pub deta: DMatrix<f64>,
    pub face_phi: Vec<DMatrix<f64>>,
    pub face_dxi: Vec<DMatrix<f64>>,
    pub face_deta: Vec<DMatrix<f64>>,
}

impl GeometryTables {
    pub fn new(mesh: &Mesh, re: &ReferenceElement) -> Result<Self> {
        if mesh.kind != re.kind {
            return Err(Error::InvalidArgument("mesh and reference element kinds differ".into()));
        }
        let geo = ReferenceElement::new(mesh.kind, mesh.geometric_degree)?;
        let (phi, dxi, deta) = geo.tabulate(&re.quad_points);
        let mut t = GeometryTables {
            phi,
            dxi,
            deta,
            face_phi: Vec::new(),
            face_dxi: Vec::new(),
            face_deta: Vec::new(),
        };
        for f in 0..re.num_faces() {
            let pts: Vec<_> = re.face_points.iter().map(|&s| re.kind.face_point(f, s)).collect();
            let (a, b, c) = geo.tabulate(&pts);
            t.face_phi.push(a);
            t.face_dxi.push(b);
            t.face_deta.push(c);
        }
        Ok(t)
    }
}

#[derive(Debug, Clone)]
pub struct FaceGeometry {
    pub points: Vec<[f64; 2]>,
    /// Outward unit normals.
    pub normals: Vec<[f64; 2]>,
    /// Surface Jacobians |dx/dt| for the face parameter t in [0, 1].
    pub surface_jac: Vec<f64>,
    /// Quadrature weight times surface Jacobian.
    pub wsj: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub points: Vec<[f64; 2]>,
    pub jac: Vec<[[f64; 2]; 2]>,
    pub det: Vec<f64>,
    /// Inverse-transpose of the Jacobian, maps reference to physical gradients.
    pub jinv_t: Vec<[[f64; 2]; 2]>,
    /// Quadrature weight times Jacobian determinant.
    pub wdet: Vec<f64>,
    pub faces: Vec<FaceGeometry>,
}

fn map_point(
    coords: &[[f64; 2]],
    phi: &DMatrix<f64>,
    dxi: &DMatrix<f64>,
    deta: &DMatrix<f64>,
    q: usize,
) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut x = [0.0; 2];
    let mut j = [[0.0; 2]; 2];
    for (k, c) in coords.iter().enumerate() {
        let (v, a, b) = (phi[(q, k)], dxi[(q, k)], deta[(q, k)]);
        x[0] += v * c[0];
        x[1] += v * c[1];
        j[0][0] += a * c[0];
        j[0][1] += b * c[0];
        j[1][0] += a * c[1];
        j[1][1] += b * c[1];
    }
    (x, j)
}

impl ElementGeometry {
    /// Geometric factors of element `e`; fails on a nonpositive Jacobian determinant.
    pub fn new(mesh: &Mesh, re: &ReferenceElement, tables: &GeometryTables, e: usize) -> Result<Self> {
        Self::from_coords(&mesh.elem_coords(e), re, tables).map_err(|msg| Error::Geometry { elem: e, msg })
    }

    /// Geometric factors of an element given its geometric node coordinates.
    pub fn from_coords(
        coords: &[[f64; 2]],
        re: &ReferenceElement,
        tables: &GeometryTables,
    ) -> std::result::Result<Self, String> {
        let nq = re.num_quad();
        let mut g = ElementGeometry {
            points: Vec::with_capacity(nq),
            jac: Vec::with_capacity(nq),
            det: Vec::with_capacity(nq),
            jinv_t: Vec::with_capacity(nq),
            wdet: Vec::with_capacity(nq),
            faces: Vec::with_capacity(re.num_faces()),
        };
        for q in 0..nq {
            let (x, j) = map_point(coords, &tables.phi, &tables.dxi, &tables.deta, q);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(format!("nonpositive Jacobian determinant {det:.3e} at quadrature point {q}"));
            }
            g.points.push(x);
            g.jac.push(j);
            g.det.push(det);
            g.jinv_t.push([[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]]);
            g.wdet.push(re.quad_weights[q] * det);
        }
        let verts = re.kind.ref_vertices();
        for f in 0..re.num_faces() {
            let (a, b) = (verts[f], verts[(f + 1) % verts.len()]);
            let dref = [b[0] - a[0], b[1] - a[1]];
            let mut fg = FaceGeometry {
                points: Vec::new(),
                normals: Vec::new(),
                surface_jac: Vec::new(),
                wsj: Vec::new(),
            };
            for q in 0..re.num_face_quad() {
                let (x, j) = map_point(
                    coords,
                    &tables.face_phi[f],
                    &tables.face_dxi[f],
                    &tables.face_deta[f],
                    q,
                );
                let t = [
                    j[0][0] * dref[0] + j[0][1] * dref[1],
                    j[1][0] * dref[0] + j[1][1] * dref[1],
                ];
                let sj = (t[0] * t[0] + t[1] * t[1]).sqrt();
                if !(sj > 0.0) {
                    return Err(format!("degenerate face {f}"));
                }
                fg.points.push(x);
                // counter-clockwise traversal: outward normal is the tangent rotated clockwise
                fg.normals.push([t[1] / sj, -t[0] / sj]);
                fg.surface_jac.push(sj);
                fg.wsj.push(re.face_weights[q] * sj);
            }
            g.faces.push(fg);
        }
        Ok(g)
    }

    /// Integral of 1 over the element.
    pub fn area(&self) -> f64 {
        self.wdet.iter().sum()
    }
}

/// Physical gradients of the basis at the element quadrature points, `(d/dx, d/dy)` each `nq x nb`.
pub fn physical_gradients(re: &ReferenceElement, geom: &ElementGeometry) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nq, nb) = (re.num_quad(), re.num_basis());
    let mut gx = DMatrix::zeros(nq, nb);
    let mut gy = DMatrix::zeros(nq, nb);
    for q in 0..nq {
        let m = geom.jinv_t[q];
        for k in 0..nb {
            let (a, b) = (re.dphi_dxi[(q, k)], re.dphi_deta[(q, k)]);
            gx[(q, k)] = m[0][0] * a + m[0][1] * b;
            gy[(q, k)] = m[1][0] * a + m[1][1] * b;
        }
    }
    (gx, gy)
}

/// Which element of a face the geometry is requested from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceSide {
    Owner,
    Neighbor,
}

/// Face quadrature points, outward normals and surface Jacobians from one side of a face, listed
/// in face direction so both sides of an interior face line up pointwise.
pub fn face_geometry(
    mesh: &Mesh,
    re: &ReferenceElement,
    tables: &GeometryTables,
    face: usize,
    side: FaceSide,
) -> Result<FaceGeometry> {
    let fc = mesh
        .faces
        .get(face)
        .ok_or_else(|| Error::InvalidArgument(format!("face {face} out of range")))?;
    let (e, local, flipped) = match side {
        FaceSide::Owner => (fc.owner, fc.owner_local, false),
        FaceSide::Neighbor => {
            if fc.kind == FaceKind::Boundary {
                return Err(Error::InvalidArgument(format!(
                    "boundary face {face} has no neighbor side"
                )));
            }
            (fc.neighbor.unwrap(), fc.neighbor_local.unwrap(), true)
        }
    };
    let g = ElementGeometry::new(mesh, re, tables, e)?;
    let mut fg = g.faces[local].clone();
    if flipped {
        fg.points.reverse();
        fg.normals.reverse();
        fg.surface_jac.reverse();
        fg.wsj.reverse();
    }
    Ok(fg)
}
