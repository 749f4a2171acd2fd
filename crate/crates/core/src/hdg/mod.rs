//! HDG discretization of the first-order Monge-Ampere system
//! `H = grad q`, `q = grad u`, `div q = s(H, f)`, with static condensation onto face traces.
//!
//! Element unknowns are stored per element as seven nodal blocks `[H11, H12, H21, H22, q1, q2, u]`;
//! traces are nodal on each face in face direction.

mod condense;
mod continuation;
mod fixed_point;
mod local;
mod newton;
pub mod verify;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{physical_gradients, ElementGeometry, GeometryTables};
use crate::mesh::Mesh;
use crate::problems::MAProblem;
use crate::reference::ReferenceElement;

pub use condense::{condense, recover_local, solve_condensed, CondensedElement, CondensedSystem, TraceSolution};
pub use continuation::{continuation_coefficients, continuation_solve, ContinuationStage};
pub use fixed_point::fixed_point_solve;
pub use local::{assemble_local_blocks, global_residual_norm, LocalBlocks};
pub use newton::newton_solve;

/// Number of scalar fields per element.
pub const NUM_FIELDS: usize = 7;
/// Block offset of `H_ij` (`c = 2 i + j`).
pub const H_BLOCK: usize = 0;
/// Block offset of `q_d`.
pub const Q_BLOCK: usize = 4;
pub const U_BLOCK: usize = 6;

/// Norm of the Hessian increment used to stop the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementNorm {
    /// Broken L2 norm.
    L2,
    /// Euclidean norm of the nodal coefficient vector (grows with the number of unknowns).
    Coefficient,
}

impl IncrementNorm {
    pub fn name(self) -> &'static str {
        match self {
            IncrementNorm::L2 => "l2",
            IncrementNorm::Coefficient => "coefficient",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(IncrementNorm::L2),
            "coefficient" => Ok(IncrementNorm::Coefficient),
            _ => Err(Error::InvalidArgument(format!("unknown increment norm '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub newton_tol: f64,
    pub fp_tol: f64,
    pub fp_norm: IncrementNorm,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Trial step accepted when `|F(x + a dx)| < (1 - c a) |F(x)|`.
    pub sufficient_decrease: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 1.0,
            newton_tol: 1e-8,
            fp_tol: 1e-6,
            fp_norm: IncrementNorm::L2,
            max_iter: 200,
            max_halvings: 20,
            sufficient_decrease: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_tau()?;
        if !(self.newton_tol > 0.0 && self.fp_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sufficient_decrease) {
            return Err(Error::InvalidArgument("sufficient_decrease must lie in [0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Rejects a nonpositive stabilization parameter.
    pub fn validate_tau(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Precomputed per-element data that does not change across iterations.
#[derive(Debug, Clone)]
pub struct ElementData {
    pub geom: ElementGeometry,
    /// Physical basis gradients at quadrature points, `nq x nb`.
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    /// `(phi_k, phi_l)`.
    pub mass: DMatrix<f64>,
    /// `(d phi_k / dx_j, phi_l)` for `j = 0, 1`.
    pub grad: [DMatrix<f64>; 2],
    /// `(phi_k, 1)`.
    pub integral: Vec<f64>,
    /// Physical coordinates of the element's solution nodes.
    pub nodes: Vec<[f64; 2]>,
}

/// Mesh plus reference element plus precomputed geometry for a given polynomial degree.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub re: ReferenceElement,
    pub elems: Vec<ElementData>,
}

impl Discretization {
    pub fn new(mesh: &Mesh, p: usize) -> Result<Self> {
        let re = ReferenceElement::new(mesh.kind, p)?;
        let tables = GeometryTables::new(mesh, &re)?;
        let geo = ReferenceElement::new(mesh.kind, mesh.geometric_degree)?;
        let (node_phi, _, _) = geo.tabulate(&re.nodes);
        let mut elems = Vec::with_capacity(mesh.num_elements());
        let mut bad = Vec::new();
        for e in 0..mesh.num_elements() {
            let geom = match ElementGeometry::new(mesh, &re, &tables, e) {
                Ok(g) => g,
                Err(Error::Geometry { .. }) => {
                    bad.push(e);
                    continue;
                }
                Err(err) => return Err(err),
            };
            let (dx, dy) = physical_gradients(&re, &geom);
            let mut wphi = re.phi.clone();
            for (q, w) in geom.wdet.iter().enumerate() {
                wphi.row_mut(q).scale_mut(*w);
            }
            let mass = re.phi.tr_mul(&wphi);
            let grad = [dx.tr_mul(&wphi), dy.tr_mul(&wphi)];
            let integral = wphi.row_sum().iter().copied().collect();
            let coords = mesh.elem_coords(e);
            let nodes = (0..re.num_basis())
                .map(|i| {
                    let mut x = [0.0; 2];
                    for (k, c) in coords.iter().enumerate() {
                        x[0] += node_phi[(i, k)] * c[0];
                        x[1] += node_phi[(i, k)] * c[1];
                    }
                    x
                })
                .collect();
            elems.push(ElementData {
                geom,
                dx,
                dy,
                mass,
                grad,
                integral,
                nodes,
            });
        }
        if !bad.is_empty() {
            return Err(Error::TangledMesh { elements: bad });
        }
        Ok(Discretization {
            mesh: mesh.clone(),
            re,
            elems,
        })
    }

    pub fn degree(&self) -> usize {
        self.re.degree
    }

    pub fn num_basis(&self) -> usize {
        self.re.num_basis()
    }

    pub fn num_trace(&self) -> usize {
        self.re.num_trace()
    }

    /// Element-interior unknowns per element.
    pub fn num_interior(&self) -> usize {
        NUM_FIELDS * self.num_basis()
    }

    /// Trace unknowns coupled to one element.
    pub fn num_local_trace(&self) -> usize {
        self.re.num_faces() * self.num_trace()
    }

    pub fn num_global_trace(&self) -> usize {
        self.mesh.num_faces() * self.num_trace()
    }

    /// Global trace dofs of element `e` in local face order.
    pub fn trace_dofs(&self, e: usize) -> Vec<usize> {
        let nt = self.num_trace();
        self.mesh.elem_faces[e]
            .iter()
            .flat_map(|ef| (0..nt).map(move |m| ef.face * nt + m))
            .collect()
    }

    /// Physical points of the trace nodes of `face`, in face direction.
    pub fn trace_points(&self, face: usize) -> Vec<[f64; 2]> {
        let f = &self.mesh.faces[face];
        let geo = ReferenceElement::new(self.mesh.kind, self.mesh.geometric_degree)
            .expect("mesh degree was validated on construction");
        let p = self.degree();
        let pts: Vec<_> = (0..=p)
            .map(|m| self.mesh.kind.face_point(f.owner_local, m as f64 / p as f64))
            .collect();
        let (phi, _, _) = geo.tabulate(&pts);
        let coords = self.mesh.elem_coords(f.owner);
        (0..pts.len())
            .map(|r| {
                let mut x = [0.0; 2];
                for (k, c) in coords.iter().enumerate() {
                    x[0] += phi[(r, k)] * c[0];
                    x[1] += phi[(r, k)] * c[1];
                }
                x
            })
            .collect()
    }

    /// Trace basis at the face quadrature points as seen from element `e`'s local face `f`.
    pub(crate) fn trace_table(&self, e: usize, f: usize) -> &DMatrix<f64> {
        if self.mesh.elem_faces[e][f].flipped {
            &self.re.trace_phi_rev
        } else {
            &self.re.trace_phi
        }
    }
}

/// Coefficients of `(H_h, q_h, u_h)` per element and of the trace `u_hat` per face.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub nb: usize,
    pub nt: usize,
    /// `num_elements * 7 * nb` values, element-major.
    pub elem: Vec<f64>,
    /// `num_faces * nt` values, face-major.
    pub u_hat: Vec<f64>,
    /// Multiplier of the mean-zero constraint (optimal-transport mode only).
    pub lambda: f64,
}

impl FieldState {
    pub fn zeros(disc: &Discretization) -> Self {
        FieldState {
            nb: disc.num_basis(),
            nt: disc.num_trace(),
            elem: vec![0.0; disc.mesh.num_elements() * disc.num_interior()],
            u_hat: vec![0.0; disc.num_global_trace()],
            lambda: 0.0,
        }
    }

    /// Nodal interpolation of a potential, its gradient and Hessian.
    pub fn interpolate(
        disc: &Discretization,
        u: impl Fn([f64; 2]) -> f64,
        grad: impl Fn([f64; 2]) -> [f64; 2],
        hess: impl Fn([f64; 2]) -> [f64; 4],
    ) -> Self {
        let mut s = Self::zeros(disc);
        let nb = s.nb;
        for (e, ed) in disc.elems.iter().enumerate() {
            let blk = s.elem_mut(e);
            for (l, &x) in ed.nodes.iter().enumerate() {
                let h = hess(x);
                let g = grad(x);
                for c in 0..4 {
                    blk[(H_BLOCK + c) * nb + l] = h[c];
                }
                blk[Q_BLOCK * nb + l] = g[0];
                blk[(Q_BLOCK + 1) * nb + l] = g[1];
                blk[U_BLOCK * nb + l] = u(x);
            }
        }
        let nt = s.nt;
        for f in 0..disc.mesh.num_faces() {
            for (m, x) in disc.trace_points(f).into_iter().enumerate() {
                s.u_hat[f * nt + m] = u(x);
            }
        }
        s
    }

    /// Default initial guess `u = |x|^2 / 2`, `q = x`, `H = I`.
    pub fn initial_guess(disc: &Discretization) -> Self {
        Self::interpolate(
            disc,
            |x| 0.5 * (x[0] * x[0] + x[1] * x[1]),
            |x| x,
            |_| [1.0, 0.0, 0.0, 1.0],
        )
    }

    pub fn num_elements(&self) -> usize {
        self.elem.len() / (NUM_FIELDS * self.nb)
    }

    pub fn elem(&self, e: usize) -> &[f64] {
        let n = NUM_FIELDS * self.nb;
        &self.elem[e * n..(e + 1) * n]
    }

    pub fn elem_mut(&mut self, e: usize) -> &mut [f64] {
        let n = NUM_FIELDS * self.nb;
        &mut self.elem[e * n..(e + 1) * n]
    }

    /// Coefficients of field block `c` on element `e`.
    pub fn field(&self, e: usize, c: usize) -> &[f64] {
        &self.elem(e)[c * self.nb..(c + 1) * self.nb]
    }

    pub fn h(&self, e: usize, c: usize) -> &[f64] {
        self.field(e, H_BLOCK + c)
    }

    pub fn q(&self, e: usize, d: usize) -> &[f64] {
        self.field(e, Q_BLOCK + d)
    }

    pub fn u(&self, e: usize) -> &[f64] {
        self.field(e, U_BLOCK)
    }

    pub fn face_trace(&self, face: usize) -> &[f64] {
        &self.u_hat[face * self.nt..(face + 1) * self.nt]
    }

    pub fn is_finite(&self) -> bool {
        self.elem.iter().chain(&self.u_hat).all(|v| v.is_finite()) && self.lambda.is_finite()
    }

    /// `self + alpha * delta`.
    pub fn axpy(&self, alpha: f64, delta: &FieldState) -> FieldState {
        let mut s = self.clone();
        for (a, b) in s.elem.iter_mut().zip(&delta.elem) {
            *a += alpha * b;
        }
        for (a, b) in s.u_hat.iter_mut().zip(&delta.u_hat) {
            *a += alpha * b;
        }
        s.lambda += alpha * delta.lambda;
        s
    }

    pub(crate) fn check_layout(&self, disc: &Discretization) -> Result<()> {
        if self.nb != disc.num_basis()
            || self.nt != disc.num_trace()
            || self.elem.len() != disc.mesh.num_elements() * disc.num_interior()
            || self.u_hat.len() != disc.num_global_trace()
        {
            return Err(Error::InvalidArgument("field state does not match the discretization".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    FixedPoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::FixedPoint => "fixed_point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Newton: residual norm after the step. Fixed point: not computed.
    pub residual_norm: Option<f64>,
    /// Newton: accepted step length.
    pub alpha: Option<f64>,
    /// Fixed point: broken L2 norm of the Hessian increment.
    pub hessian_increment_norm: Option<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub method: Method,
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    /// Number of linear solves performed.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.iteration > 0).count()
    }

    pub fn final_lambda(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.lambda)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6e}"));
        match self.method {
            Method::Newton => {
                out.push_str("iteration,residual_norm,alpha,lambda\n");
                for r in &self.records {
                    out.push_str(&format!(
                        "{},{},{},{:.6e}\n",
                        r.iteration,
                        fmt(r.residual_norm),
                        fmt(r.alpha),
                        r.lambda
                    ));
                }
            }
            Method::FixedPoint => {
                out.push_str("iteration,hessian_increment_norm,lambda\n");
                for r in &self.records {
                    out.push_str(&format!(
                        "{},{},{:.6e}\n",
                        r.iteration,
                        fmt(r.hessian_increment_norm),
                        r.lambda
                    ));
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Solves `problem` with the requested method from the default initial guess.
pub fn solve(
    problem: &MAProblem,
    disc: &Discretization,
    config: &SolverConfig,
    method: Method,
) -> Result<(FieldState, IterationLog)> {
    let init = FieldState::initial_guess(disc);
    match method {
        Method::Newton => newton_solve(problem, disc, config, init),
        Method::FixedPoint => fixed_point_solve(problem, disc, config, init),
    }
}
