use std::ops::{AddAssign, SubAssign};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Discretization, FieldState, H_BLOCK, Q_BLOCK, U_BLOCK};
use crate::error::{Error, Result};
use crate::mesh::FaceKind;
use crate::problems::{source_s, MAProblem};

/// Linearized local HDG system of one element, `R = -F`.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    /// Interior rows, interior columns.
    pub a: DMatrix<f64>,
    /// Interior rows, local trace columns.
    pub b: DMatrix<f64>,
    /// Local trace rows, interior columns.
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Derivative of `int u_h` with respect to the interior unknowns; the multiplier column is its
    /// transpose. Present in optimal-transport mode only.
    pub e: Option<DVector<f64>>,
    pub r123: DVector<f64>,
    pub r4: DVector<f64>,
    /// Minus this element's contribution to `int u_h`.
    pub r5: f64,
}

/// Residual `F` of one element (interior rows then local trace rows), optionally with its Jacobian.
pub(crate) struct LocalSystem {
    pub jac: Option<DMatrix<f64>>,
    pub f: DVector<f64>,
    pub f5: f64,
}

fn eval_at(phi: &DMatrix<f64>, coef: &[f64]) -> DVector<f64> {
    phi * DVector::from_column_slice(coef)
}

fn with_elem(e: usize, err: Error) -> Error {
    match err {
        Error::Evaluation { msg, .. } => Error::Evaluation { elem: e, msg },
        other => other,
    }
}

/// Adds `phi^T diag(w) psi` into `m` at `(r0, c0)`.
fn add_weighted(
    m: &mut DMatrix<f64>,
    r0: usize,
    c0: usize,
    phi: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    w: &[f64],
) {
    let (nr, nc) = (phi.ncols(), psi.ncols());
    for (q, &wq) in w.iter().enumerate() {
        if wq == 0.0 {
            continue;
        }
        for l in 0..nc {
            let b = wq * psi[(q, l)];
            if b == 0.0 {
                continue;
            }
            for k in 0..nr {
                m[(r0 + k, c0 + l)] += phi[(q, k)] * b;
            }
        }
    }
}

fn add_block(m: &mut DMatrix<f64>, r0: usize, c0: usize, b: &DMatrix<f64>, scale: f64) {
    for l in 0..b.ncols() {
        for k in 0..b.nrows() {
            m[(r0 + k, c0 + l)] += scale * b[(k, l)];
        }
    }
}

pub(crate) fn local_system(
    disc: &Discretization,
    problem: &MAProblem,
    state: &FieldState,
    e: usize,
    tau: f64,
    want_jac: bool,
) -> Result<LocalSystem> {
    let re = &disc.re;
    let ed = &disc.elems[e];
    let nb = disc.num_basis();
    let nt = disc.num_trace();
    let ni = disc.num_interior();
    let n = ni + disc.num_local_trace();
    let ot = problem.is_ot();
    let iu = |c: usize| c * nb;

    let mut f = DVector::zeros(n);
    let mut jac = want_jac.then(|| DMatrix::zeros(n, n));

    let coef = |c: usize| state.field(e, c);
    let vec = |c: usize| DVector::from_column_slice(coef(c));

    // linear volume terms
    for c in 0..4 {
        let (i, j) = (c / 2, c % 2);
        let r = &ed.mass * vec(H_BLOCK + c) + &ed.grad[j] * vec(Q_BLOCK + i);
        f.rows_mut(iu(H_BLOCK + c), nb).add_assign(&r);
    }
    for i in 0..2 {
        let r = &ed.mass * vec(Q_BLOCK + i) + &ed.grad[i] * vec(U_BLOCK);
        f.rows_mut(iu(Q_BLOCK + i), nb).add_assign(&r);
    }
    {
        let r = &ed.grad[0] * vec(Q_BLOCK) + &ed.grad[1] * vec(Q_BLOCK + 1);
        f.rows_mut(iu(U_BLOCK), nb).add_assign(&r);
    }
    if ot {
        for k in 0..nb {
            f[iu(U_BLOCK) + k] += state.lambda * ed.integral[k];
        }
    }
    if let Some(j) = jac.as_mut() {
        for c in 0..4 {
            let (i, jj) = (c / 2, c % 2);
            add_block(j, iu(H_BLOCK + c), iu(H_BLOCK + c), &ed.mass, 1.0);
            add_block(j, iu(H_BLOCK + c), iu(Q_BLOCK + i), &ed.grad[jj], 1.0);
        }
        for i in 0..2 {
            add_block(j, iu(Q_BLOCK + i), iu(Q_BLOCK + i), &ed.mass, 1.0);
            add_block(j, iu(Q_BLOCK + i), iu(U_BLOCK), &ed.grad[i], 1.0);
            add_block(j, iu(U_BLOCK), iu(Q_BLOCK + i), &ed.grad[i], 1.0);
        }
    }

    // nonlinear source s(H, f)
    let hq: Vec<DVector<f64>> = (0..4).map(|c| eval_at(&re.phi, coef(H_BLOCK + c))).collect();
    let qq: Vec<DVector<f64>> = (0..2).map(|d| eval_at(&re.phi, coef(Q_BLOCK + d))).collect();
    let nq = re.num_quad();
    let mut ws = vec![0.0; nq];
    let mut wdh = vec![[0.0; 4]; nq];
    let mut wdq = vec![[0.0; 2]; nq];
    for q in 0..nq {
        let x = ed.geom.points[q];
        let qv = [qq[0][q], qq[1][q]];
        let h = [hq[0][q], hq[1][q], hq[2][q], hq[3][q]];
        let (fv, dfdq) = problem.source(x, qv).map_err(|err| with_elem(e, err))?;
        let s = source_s(h, fv).map_err(|err| with_elem(e, err))?;
        if !(s > 0.0) {
            return Err(Error::Evaluation {
                elem: e,
                msg: "s(H, f) vanishes".into(),
            });
        }
        let w = ed.geom.wdet[q];
        ws[q] = w * s;
        for c in 0..4 {
            wdh[q][c] = w * h[c] / s;
        }
        for d in 0..2 {
            wdq[q][d] = w * dfdq[d] / s;
        }
    }
    let fs = re.phi.tr_mul(&DVector::from_vec(ws));
    f.rows_mut(iu(U_BLOCK), nb).add_assign(&fs);
    if let Some(j) = jac.as_mut() {
        for c in 0..4 {
            let w: Vec<f64> = wdh.iter().map(|v| v[c]).collect();
            add_weighted(j, iu(U_BLOCK), iu(H_BLOCK + c), &re.phi, &re.phi, &w);
        }
        if ot {
            for d in 0..2 {
                let w: Vec<f64> = wdq.iter().map(|v| v[d]).collect();
                add_weighted(j, iu(U_BLOCK), iu(Q_BLOCK + d), &re.phi, &re.phi, &w);
            }
        }
    }

    // face terms
    let nqf = re.num_face_quad();
    for (lf, ef) in disc.mesh.elem_faces[e].iter().enumerate() {
        let face = &disc.mesh.faces[ef.face];
        let fg = &ed.geom.faces[lf];
        let phi = &re.face_phi[lf];
        let psi = disc.trace_table(e, lf);
        let t0 = ni + lf * nt;
        let uq = eval_at(phi, coef(U_BLOCK));
        let q0 = eval_at(phi, coef(Q_BLOCK));
        let q1 = eval_at(phi, coef(Q_BLOCK + 1));
        let uh = psi * DVector::from_column_slice(state.face_trace(ef.face));

        let mut wv = vec![0.0; nqf];
        // F1: -<q_hat_i n_j, phi>, q_hat = q - tau (u - u_hat) n
        for c in 0..4 {
            let (i, jj) = (c / 2, c % 2);
            let qi = if i == 0 { &q0 } else { &q1 };
            for q in 0..nqf {
                let nrm = fg.normals[q];
                wv[q] = fg.wsj[q] * nrm[jj] * (qi[q] - tau * (uq[q] - uh[q]) * nrm[i]);
            }
            let r = phi.tr_mul(&DVector::from_column_slice(&wv));
            f.rows_mut(iu(H_BLOCK + c), nb).sub_assign(&r);
        }
        // F2: -<u_hat n_i, phi>
        for i in 0..2 {
            for q in 0..nqf {
                wv[q] = fg.wsj[q] * fg.normals[q][i] * uh[q];
            }
            let r = phi.tr_mul(&DVector::from_column_slice(&wv));
            f.rows_mut(iu(Q_BLOCK + i), nb).sub_assign(&r);
        }
        // F3: -<q_hat . n, phi>
        let mut flux = vec![0.0; nqf];
        for q in 0..nqf {
            let nrm = fg.normals[q];
            flux[q] = q0[q] * nrm[0] + q1[q] * nrm[1] - tau * (uq[q] - uh[q]);
            wv[q] = fg.wsj[q] * flux[q];
        }
        let r = phi.tr_mul(&DVector::from_column_slice(&wv));
        f.rows_mut(iu(U_BLOCK), nb).sub_assign(&r);

        // F4 on this face
        let mut gd = vec![[0.0; 2]; nqf];
        match face.kind {
            FaceKind::Interior => {
                let r = psi.tr_mul(&DVector::from_column_slice(&wv));
                f.rows_mut(t0, nt).add_assign(&r);
            }
            FaceKind::Boundary => match problem {
                MAProblem::Dirichlet(d) => {
                    for q in 0..nqf {
                        wv[q] = fg.wsj[q] * (uh[q] - (d.g)(fg.points[q]));
                    }
                    let r = psi.tr_mul(&DVector::from_column_slice(&wv));
                    f.rows_mut(t0, nt).add_assign(&r);
                }
                MAProblem::Ot(o) => {
                    let tag = face.boundary_tag.expect("boundary faces carry a tag");
                    for q in 0..nqf {
                        let (g, dg) = o.boundary_g(tag, [q0[q], q1[q]])?;
                        gd[q] = dg;
                        wv[q] = fg.wsj[q] * (g + tau * (uh[q] - uq[q]));
                    }
                    let r = psi.tr_mul(&DVector::from_column_slice(&wv));
                    f.rows_mut(t0, nt).add_assign(&r);
                }
            },
        }

        let Some(j) = jac.as_mut() else { continue };
        let w: Vec<f64> = fg.wsj.clone();
        let wn = |a: usize| -> Vec<f64> { (0..nqf).map(|q| w[q] * fg.normals[q][a]).collect() };
        let wnn = |a: usize, b: usize| -> Vec<f64> {
            (0..nqf)
                .map(|q| w[q] * fg.normals[q][a] * fg.normals[q][b])
                .collect()
        };
        for c in 0..4 {
            let (i, jj) = (c / 2, c % 2);
            let neg_wn: Vec<f64> = wn(jj).iter().map(|v| -v).collect();
            add_weighted(j, iu(H_BLOCK + c), iu(Q_BLOCK + i), phi, phi, &neg_wn);
            let tnn: Vec<f64> = wnn(i, jj).iter().map(|v| tau * v).collect();
            add_weighted(j, iu(H_BLOCK + c), iu(U_BLOCK), phi, phi, &tnn);
            let neg_tnn: Vec<f64> = tnn.iter().map(|v| -v).collect();
            add_weighted(j, iu(H_BLOCK + c), t0, phi, psi, &neg_tnn);
        }
        for i in 0..2 {
            let neg_wn: Vec<f64> = wn(i).iter().map(|v| -v).collect();
            add_weighted(j, iu(Q_BLOCK + i), t0, phi, psi, &neg_wn);
        }
        let tw: Vec<f64> = w.iter().map(|v| tau * v).collect();
        let neg_tw: Vec<f64> = tw.iter().map(|v| -v).collect();
        for d in 0..2 {
            let neg_wn: Vec<f64> = wn(d).iter().map(|v| -v).collect();
            add_weighted(j, iu(U_BLOCK), iu(Q_BLOCK + d), phi, phi, &neg_wn);
        }
        add_weighted(j, iu(U_BLOCK), iu(U_BLOCK), phi, phi, &tw);
        add_weighted(j, iu(U_BLOCK), t0, phi, psi, &neg_tw);

        match (face.kind, problem) {
            (FaceKind::Interior, _) => {
                for d in 0..2 {
                    add_weighted(j, t0, iu(Q_BLOCK + d), psi, phi, &wn(d));
                }
                add_weighted(j, t0, iu(U_BLOCK), psi, phi, &neg_tw);
                add_weighted(j, t0, t0, psi, psi, &tw);
            }
            (FaceKind::Boundary, MAProblem::Dirichlet(_)) => {
                add_weighted(j, t0, t0, psi, psi, &w);
            }
            (FaceKind::Boundary, MAProblem::Ot(_)) => {
                for d in 0..2 {
                    let wg: Vec<f64> = (0..nqf).map(|q| w[q] * gd[q][d]).collect();
                    add_weighted(j, t0, iu(Q_BLOCK + d), psi, phi, &wg);
                }
                add_weighted(j, t0, iu(U_BLOCK), psi, phi, &neg_tw);
                add_weighted(j, t0, t0, psi, psi, &tw);
            }
        }
    }

    let f5 = if ot {
        coef(U_BLOCK).iter().zip(&ed.integral).map(|(a, b)| a * b).sum()
    } else {
        0.0
    };
    Ok(LocalSystem { jac, f, f5 })
}

/// Linearized local blocks of element `e` at `state`.
pub fn assemble_local_blocks(
    disc: &Discretization,
    problem: &MAProblem,
    state: &FieldState,
    e: usize,
    tau: f64,
) -> Result<LocalBlocks> {
    state.check_layout(disc)?;
    if e >= disc.mesh.num_elements() {
        return Err(Error::InvalidArgument(format!("element {e} out of range")));
    }
    let ls = local_system(disc, problem, state, e, tau, true)?;
    Ok(split_blocks(disc, ls, problem.is_ot().then(|| u_integral_row(disc, e))))
}

/// Row of `d(int u_h)/dU` over the element's interior unknowns.
pub(crate) fn u_integral_row(disc: &Discretization, e: usize) -> DVector<f64> {
    let nb = disc.num_basis();
    let mut v = DVector::zeros(disc.num_interior());
    for k in 0..nb {
        v[U_BLOCK * nb + k] = disc.elems[e].integral[k];
    }
    v
}

pub(crate) fn split_blocks(disc: &Discretization, ls: LocalSystem, e: Option<DVector<f64>>) -> LocalBlocks {
    let ni = disc.num_interior();
    let nt = disc.num_local_trace();
    let j = ls.jac.expect("jacobian requested");
    LocalBlocks {
        a: j.view((0, 0), (ni, ni)).into_owned(),
        b: j.view((0, ni), (ni, nt)).into_owned(),
        c: j.view((ni, 0), (nt, ni)).into_owned(),
        d: j.view((ni, ni), (nt, nt)).into_owned(),
        e,
        r123: -ls.f.rows(0, ni),
        r4: -ls.f.rows(ni, nt),
        r5: -ls.f5,
    }
}

/// Euclidean norm of the stacked residual `(F1, F2, F3, F4[, F5])`, accumulated in element order.
pub fn global_residual_norm(
    problem: &MAProblem,
    disc: &Discretization,
    state: &FieldState,
    tau: f64,
) -> Result<f64> {
    state.check_layout(disc)?;
    let ni = disc.num_interior();
    let locals: Vec<Result<LocalSystem>> = (0..disc.mesh.num_elements())
        .into_par_iter()
        .map(|e| local_system(disc, problem, state, e, tau, false))
        .collect();
    let mut sum = 0.0;
    let mut f4 = vec![0.0; disc.num_global_trace()];
    let mut f5 = 0.0;
    for (e, ls) in locals.into_iter().enumerate() {
        let ls = ls?;
        sum += ls.f.rows(0, ni).norm_squared();
        for (k, g) in disc.trace_dofs(e).into_iter().enumerate() {
            f4[g] += ls.f[ni + k];
        }
        f5 += ls.f5;
    }
    sum += f4.iter().map(|v| v * v).sum::<f64>();
    if problem.is_ot() {
        sum += f5 * f5;
    }
    Ok(sum.sqrt())
}
