//! Structured high-order meshes with full face connectivity.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::reference::{NodeEntity, ReferenceElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Triangle,
    Quadrilateral,
}

/// Boundary component a boundary face belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u32)]
pub enum BoundaryTag {
    Bottom = 0,
    Right = 1,
    Top = 2,
    Left = 3,
    Circle = 4,
    Ellipse = 5,
    Cut = 6,
}

impl BoundaryTag {
    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn from_id(id: u32) -> Result<Self> {
        use BoundaryTag::*;
        Ok(match id {
            0 => Bottom,
            1 => Right,
            2 => Top,
            3 => Left,
            4 => Circle,
            5 => Ellipse,
            6 => Cut,
            _ => return Err(Error::UnknownTag(id)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary,
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Geometric nodes along the face, in face direction (the owner's local direction).
    pub nodes: Vec<usize>,
    pub kind: FaceKind,
    pub owner: usize,
    pub owner_local: usize,
    pub neighbor: Option<usize>,
    pub neighbor_local: Option<usize>,
    pub boundary_tag: Option<BoundaryTag>,
}

/// A face as seen from one of its elements. `flipped` is set when the element traverses the face
/// against the face direction (always the case for the neighbor side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElemFace {
    pub face: usize,
    pub flipped: bool,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub kind: ElemKind,
    pub geometric_degree: usize,
    pub node_coords: Vec<[f64; 2]>,
    /// Per element, node indices in reference-node order of the geometric degree.
    pub elem_nodes: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    pub elem_faces: Vec<Vec<ElemFace>>,
    /// Vertices are numbered first: node ids `0..num_vertices`.
    pub num_vertices: usize,
}

/// Axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BoxDomain {
    pub const UNIT: BoxDomain = BoxDomain {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };
    pub const CENTERED: BoxDomain = BoxDomain {
        x0: -0.5,
        x1: 0.5,
        y0: -0.5,
        y1: 0.5,
    };

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

impl Mesh {
    pub fn num_elements(&self) -> usize {
        self.elem_nodes.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].kind == FaceKind::Interior)
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].kind == FaceKind::Boundary)
    }

    /// Corner vertex ids of an element, counter-clockwise.
    pub fn elem_vertices(&self, e: usize) -> Vec<usize> {
        let re = vertex_positions(self.kind, self.geometric_degree);
        re.iter().map(|&n| self.elem_nodes[e][n]).collect()
    }

    pub fn elem_coords(&self, e: usize) -> Vec<[f64; 2]> {
        self.elem_nodes[e].iter().map(|&n| self.node_coords[n]).collect()
    }

    /// Rebuild the mesh with geometric nodes of another degree, placed through the current
    /// geometric map (exact for affine elements, interpolatory otherwise).
    pub fn elevate(&self, degree: usize) -> Result<Mesh> {
        if degree == self.geometric_degree {
            return Ok(self.clone());
        }
        let geo = ReferenceElement::new(self.kind, self.geometric_degree)?;
        let elem_vertices: Vec<Vec<usize>> =
            (0..self.num_elements()).map(|e| self.elem_vertices(e)).collect();
        let tags: HashMap<(usize, usize), BoundaryTag> = self
            .boundary_faces()
            .map(|f| {
                let face = &self.faces[f];
                let (a, b) = (face.nodes[0], *face.nodes.last().unwrap());
                ((a.min(b), a.max(b)), face.boundary_tag.unwrap())
            })
            .collect();
        from_structure(
            self.kind,
            degree,
            self.num_vertices,
            elem_vertices,
            |e, xi| {
                let (v, _, _) = geo.tabulate(&[xi]);
                let mut x = [0.0; 2];
                for (k, &n) in self.elem_nodes[e].iter().enumerate() {
                    x[0] += v[(0, k)] * self.node_coords[n][0];
                    x[1] += v[(0, k)] * self.node_coords[n][1];
                }
                x
            },
            |a, b| tags[&(a.min(b), a.max(b))],
        )
        .map(|mut m| {
            m.node_coords[..self.num_vertices].copy_from_slice(&self.node_coords[..self.num_vertices]);
            m
        })
    }
}

fn vertex_positions(kind: ElemKind, degree: usize) -> Vec<usize> {
    let p = degree;
    match kind {
        ElemKind::Triangle => vec![0, p, (p + 1) * (p + 2) / 2 - 1],
        ElemKind::Quadrilateral => vec![0, p, (p + 1) * (p + 1) - 1, p * (p + 1)],
    }
}

/// Builds connectivity and high-order nodes from element vertex lists.
///
/// `place(e, xi)` maps a reference point of element `e` to physical space; `tag(a, b)` classifies
/// the boundary face between vertices `a` and `b`.
pub(crate) fn from_structure(
    kind: ElemKind,
    degree: usize,
    num_vertices: usize,
    elem_vertices: Vec<Vec<usize>>,
    place: impl Fn(usize, [f64; 2]) -> [f64; 2],
    tag: impl Fn(usize, usize) -> BoundaryTag,
) -> Result<Mesh> {
    if degree == 0 {
        return Err(Error::InvalidArgument("geometric degree must be >= 1".into()));
    }
    let nfe = kind.num_faces();
    let ne = elem_vertices.len();

    let mut faces: Vec<Face> = Vec::new();
    let mut elem_faces: Vec<Vec<ElemFace>> = Vec::with_capacity(ne);
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, ev) in elem_vertices.iter().enumerate() {
        let mut ef = Vec::with_capacity(nfe);
        for k in 0..nfe {
            let (a, b) = (ev[k], ev[(k + 1) % nfe]);
            let key = (a.min(b), a.max(b));
            match lookup.get(&key) {
                Some(&f) => {
                    let face = &mut faces[f];
                    if face.neighbor.is_some() {
                        return Err(Error::InvalidArgument(format!(
                            "face ({a}, {b}) shared by more than two elements"
                        )));
                    }
                    face.neighbor = Some(e);
                    face.neighbor_local = Some(k);
                    face.kind = FaceKind::Interior;
                    ef.push(ElemFace { face: f, flipped: true });
                }
                None => {
                    lookup.insert(key, faces.len());
                    ef.push(ElemFace {
                        face: faces.len(),
                        flipped: false,
                    });
                    faces.push(Face {
                        nodes: vec![a, b],
                        kind: FaceKind::Boundary,
                        owner: e,
                        owner_local: k,
                        neighbor: None,
                        neighbor_local: None,
                        boundary_tag: None,
                    });
                }
            }
        }
        elem_faces.push(ef);
    }

    let re = ReferenceElement::new(kind, degree)?;
    let p = degree;
    let edge_base = num_vertices;
    let mut next = num_vertices + faces.len() * (p - 1);
    let mut node_coords = vec![[f64::NAN; 2]; next];
    let mut elem_nodes = Vec::with_capacity(ne);
    for e in 0..ne {
        let mut en = Vec::with_capacity(re.num_basis());
        for (n, ent) in re.node_entity.iter().enumerate() {
            let id = match *ent {
                NodeEntity::Vertex(k) => elem_vertices[e][k],
                NodeEntity::Edge(k, m) => {
                    let ef = elem_faces[e][k];
                    let mg = if ef.flipped { p - m } else { m };
                    edge_base + ef.face * (p - 1) + mg - 1
                }
                NodeEntity::Interior => {
                    node_coords.push([f64::NAN; 2]);
                    next += 1;
                    next - 1
                }
            };
            if node_coords[id][0].is_nan() {
                node_coords[id] = place(e, re.nodes[n]);
            }
            en.push(id);
        }
        elem_nodes.push(en);
    }

    for face in faces.iter_mut() {
        let (a, b) = (face.nodes[0], face.nodes[1]);
        face.nodes = re.face_nodes[face.owner_local]
            .iter()
            .map(|&n| elem_nodes[face.owner][n])
            .collect();
        if face.kind == FaceKind::Boundary {
            face.boundary_tag = Some(tag(a, b));
        }
    }

    Ok(Mesh {
        kind,
        geometric_degree: degree,
        node_coords,
        elem_nodes,
        faces,
        elem_faces,
        num_vertices,
    })
}

/// Uniform `n x n` grid of the box; triangles split each cell along the lower-left to
/// upper-right diagonal.
pub fn build_square_mesh(n: usize, kind: ElemKind, domain: BoxDomain) -> Result<Mesh> {
    build_square_mesh_with_degree(n, kind, domain, 1)
}

pub fn build_square_mesh_with_degree(
    n: usize,
    kind: ElemKind,
    domain: BoxDomain,
    degree: usize,
) -> Result<Mesh> {
    build_grid_mesh(n, n, kind, domain, degree)
}

/// Uniform `nx x ny` grid of the box at geometric degree `degree`.
pub fn build_grid_mesh(nx: usize, ny: usize, kind: ElemKind, domain: BoxDomain, degree: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("mesh resolution must be >= 1".into()));
    }
    if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
        return Err(Error::InvalidArgument("box must have positive area".into()));
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let hx = (domain.x1 - domain.x0) / nx as f64;
    let hy = (domain.y1 - domain.y0) / ny as f64;
    let vcoord = |v: usize| {
        let (i, j) = (v % (nx + 1), v / (nx + 1));
        // pin the outer edges exactly
        let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
        let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
        [x, y]
    };
    let mut ev = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            match kind {
                ElemKind::Quadrilateral => ev.push(vec![a, b, c, d]),
                ElemKind::Triangle => {
                    ev.push(vec![a, b, c]);
                    ev.push(vec![a, c, d]);
                }
            }
        }
    }
    let ev_ref = ev.clone();
    from_structure(
        kind,
        degree,
        (nx + 1) * (ny + 1),
        ev,
        |e, xi| {
            let v: Vec<[f64; 2]> = ev_ref[e].iter().map(|&v| vcoord(v)).collect();
            affine_place(kind, &v, xi)
        },
        |a, b| {
            let (pa, pb) = (vcoord(a), vcoord(b));
            if pa[1] == domain.y0 && pb[1] == domain.y0 {
                BoundaryTag::Bottom
            } else if pa[0] == domain.x1 && pb[0] == domain.x1 {
                BoundaryTag::Right
            } else if pa[1] == domain.y1 && pb[1] == domain.y1 {
                BoundaryTag::Top
            } else {
                BoundaryTag::Left
            }
        },
    )
}

/// Linear (triangle) or bilinear (quadrilateral) vertex interpolation.
pub fn affine_place(kind: ElemKind, v: &[[f64; 2]], xi: [f64; 2]) -> [f64; 2] {
    let (s, t) = (xi[0], xi[1]);
    let w: Vec<f64> = match kind {
        ElemKind::Triangle => vec![1.0 - s - t, s, t],
        ElemKind::Quadrilateral => vec![(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t],
    };
    let mut x = [0.0; 2];
    for (wk, vk) in w.iter().zip(v) {
        x[0] += wk * vk[0];
        x[1] += wk * vk[1];
    }
    x
}

/// Inner boundary: the unit circle.
pub fn cylinder_inner(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Outer boundary: the ellipse x^2/2^2 + y^2/4^2 = 1.
pub fn cylinder_outer(theta: f64) -> [f64; 2] {
    [2.0 * theta.cos(), 4.0 * theta.sin()]
}

/// Transfinite blend between the circle (s = 0) and the ellipse (s = 1) at angle parameter theta.
pub fn cylinder_map(s: f64, theta: f64) -> [f64; 2] {
    let (a, b) = (cylinder_inner(theta), cylinder_outer(theta));
    [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]]
}

/// Area of the half annulus between the circle and the ellipse.
pub const CYLINDER_AREA: f64 = PI * (2.0 * 4.0 - 1.0) / 2.0;

/// Curved quadrilateral grid of the upstream half (theta in [pi/2, 3pi/2]) of the region between the
/// unit circle and the ellipse, `n_r` cells radially and `n_t` along the angle.
pub fn build_cylinder_mesh(n_r: usize, n_t: usize, geometric_degree: usize) -> Result<Mesh> {
    if n_r == 0 || n_t == 0 {
        return Err(Error::InvalidArgument("cylinder grid sizes must be >= 1".into()));
    }
    let vid = |i: usize, j: usize| j * (n_r + 1) + i;
    let mut ev = Vec::with_capacity(n_r * n_t);
    let mut cell = Vec::with_capacity(n_r * n_t);
    for j in 0..n_t {
        for i in 0..n_r {
            ev.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            cell.push((i, j));
        }
    }
    from_structure(
        ElemKind::Quadrilateral,
        geometric_degree,
        (n_r + 1) * (n_t + 1),
        ev,
        |e, xi| {
            let (i, j) = cell[e];
            let s = (i as f64 + xi[0]) / n_r as f64;
            let t = (j as f64 + xi[1]) / n_t as f64;
            cylinder_map(s, PI / 2.0 + PI * t)
        },
        |a, b| {
            let (ia, ja) = (a % (n_r + 1), a / (n_r + 1));
            let (ib, jb) = (b % (n_r + 1), b / (n_r + 1));
            if ia == 0 && ib == 0 {
                BoundaryTag::Circle
            } else if ia == n_r && ib == n_r {
                BoundaryTag::Ellipse
            } else {
                debug_assert!(ja == jb && (ja == 0 || ja == n_t));
                BoundaryTag::Cut
            }
        },
    )
}
