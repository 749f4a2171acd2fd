use std::ops::{AddAssign, SubAssign};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use super::condense::{condense, recover_local, solve_with, CondensedElement, CondensedSystem};
use super::local::LocalBlocks;
use super::{Discretization, FieldState, IncrementNorm, IterationLog, IterationRecord, Method, SolverConfig, H_BLOCK, Q_BLOCK, U_BLOCK};
use crate::error::{Error, Result};
use crate::mesh::FaceKind;
use crate::problems::{source_s, MAProblem};

fn add_weighted(m: &mut DMatrix<f64>, r0: usize, c0: usize, phi: &DMatrix<f64>, psi: &DMatrix<f64>, w: &[f64]) {
    for (q, &wq) in w.iter().enumerate() {
        for l in 0..psi.ncols() {
            let b = wq * psi[(q, l)];
            for k in 0..phi.ncols() {
                m[(r0 + k, c0 + l)] += phi[(q, k)] * b;
            }
        }
    }
}

/// Local blocks of the Poisson-type problem for `(q, u, u_hat)` with the volume source left out.
/// In optimal-transport mode the boundary condition is linearized about `prev`.
fn poisson_local(
    disc: &Discretization,
    problem: &MAProblem,
    prev: &FieldState,
    e: usize,
    tau: f64,
) -> Result<LocalBlocks> {
    let re = &disc.re;
    let ed = &disc.elems[e];
    let nb = disc.num_basis();
    let nt = disc.num_trace();
    let ni = 3 * nb;
    let n = ni + disc.num_local_trace();
    let (q0b, ub) = (0, 2 * nb);
    let mut j = DMatrix::zeros(n, n);
    let mut f0 = DVector::zeros(n);
    for i in 0..2 {
        j.view_mut((q0b + i * nb, q0b + i * nb), (nb, nb)).add_assign(&ed.mass);
        j.view_mut((q0b + i * nb, ub), (nb, nb)).add_assign(&ed.grad[i]);
        j.view_mut((ub, q0b + i * nb), (nb, nb)).add_assign(&ed.grad[i]);
    }
    let nqf = re.num_face_quad();
    for (lf, ef) in disc.mesh.elem_faces[e].iter().enumerate() {
        let face = &disc.mesh.faces[ef.face];
        let fg = &ed.geom.faces[lf];
        let phi = &re.face_phi[lf];
        let psi = disc.trace_table(e, lf);
        let t0 = ni + lf * nt;
        let w = &fg.wsj;
        let wn = |a: usize| -> Vec<f64> { (0..nqf).map(|q| w[q] * fg.normals[q][a]).collect() };
        let neg = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| -x).collect() };
        let tw: Vec<f64> = w.iter().map(|v| tau * v).collect();
        let ntw = neg(tw.clone());
        for i in 0..2 {
            add_weighted(&mut j, q0b + i * nb, t0, phi, psi, &neg(wn(i)));
            add_weighted(&mut j, ub, q0b + i * nb, phi, phi, &neg(wn(i)));
        }
        add_weighted(&mut j, ub, ub, phi, phi, &tw);
        add_weighted(&mut j, ub, t0, phi, psi, &ntw);
        match (face.kind, problem) {
            (FaceKind::Interior, _) => {
                for d in 0..2 {
                    add_weighted(&mut j, t0, q0b + d * nb, psi, phi, &wn(d));
                }
                add_weighted(&mut j, t0, ub, psi, phi, &ntw);
                add_weighted(&mut j, t0, t0, psi, psi, &tw);
            }
            (FaceKind::Boundary, MAProblem::Dirichlet(d)) => {
                add_weighted(&mut j, t0, t0, psi, psi, w);
                let wg: Vec<f64> = (0..nqf).map(|q| -w[q] * (d.g)(fg.points[q])).collect();
                f0.rows_mut(t0, nt).add_assign(&psi.tr_mul(&DVector::from_vec(wg)));
            }
            (FaceKind::Boundary, MAProblem::Ot(o)) => {
                let tag = face.boundary_tag.expect("boundary faces carry a tag");
                let qp0 = phi * DVector::from_column_slice(prev.q(e, 0));
                let qp1 = phi * DVector::from_column_slice(prev.q(e, 1));
                let mut wb = vec![0.0; nqf];
                let mut wg = [vec![0.0; nqf], vec![0.0; nqf]];
                for q in 0..nqf {
                    let qv = [qp0[q], qp1[q]];
                    let (g, dg) = o.boundary_g(tag, qv)?;
                    wb[q] = w[q] * (g - dg[0] * qv[0] - dg[1] * qv[1]);
                    wg[0][q] = w[q] * dg[0];
                    wg[1][q] = w[q] * dg[1];
                }
                for d in 0..2 {
                    add_weighted(&mut j, t0, q0b + d * nb, psi, phi, &wg[d]);
                }
                add_weighted(&mut j, t0, ub, psi, phi, &ntw);
                add_weighted(&mut j, t0, t0, psi, psi, &tw);
                f0.rows_mut(t0, nt).add_assign(&psi.tr_mul(&DVector::from_vec(wb)));
            }
        }
    }
    let nl = disc.num_local_trace();
    let e_row = problem.is_ot().then(|| {
        let mut v = DVector::zeros(ni);
        for k in 0..nb {
            v[ub + k] = ed.integral[k];
        }
        v
    });
    Ok(LocalBlocks {
        a: j.view((0, 0), (ni, ni)).into_owned(),
        b: j.view((0, ni), (ni, nl)).into_owned(),
        c: j.view((ni, 0), (nl, ni)).into_owned(),
        d: j.view((ni, ni), (nl, nl)).into_owned(),
        e: e_row,
        r123: -f0.rows(0, ni),
        r4: -f0.rows(ni, nl),
        r5: 0.0,
    })
}

/// `(s(H, f), phi_k)` at the previous iterate.
fn source_vector(disc: &Discretization, problem: &MAProblem, prev: &FieldState, e: usize) -> Result<DVector<f64>> {
    let re = &disc.re;
    let ed = &disc.elems[e];
    let vals = |c: usize| &re.phi * DVector::from_column_slice(prev.field(e, c));
    let h: Vec<_> = (0..4).map(|c| vals(H_BLOCK + c)).collect();
    let qv: Vec<_> = (0..2).map(|d| vals(Q_BLOCK + d)).collect();
    let mut ws = DVector::zeros(re.num_quad());
    for q in 0..re.num_quad() {
        let (f, _) = problem.source(ed.geom.points[q], [qv[0][q], qv[1][q]]).map_err(|err| at(e, err))?;
        let s = source_s([h[0][q], h[1][q], h[2][q], h[3][q]], f).map_err(|err| at(e, err))?;
        ws[q] = ed.geom.wdet[q] * s;
    }
    Ok(re.phi.tr_mul(&ws))
}

fn at(e: usize, err: Error) -> Error {
    match err {
        Error::Evaluation { msg, .. } => Error::Evaluation { elem: e, msg },
        other => other,
    }
}

/// `M H_ij = -(q_i, d_j phi) + <q_hat_i n_j, phi>`.
pub(crate) fn recover_hessian(disc: &Discretization, state: &mut FieldState, e: usize, tau: f64) -> Result<()> {
    let re = &disc.re;
    let ed = &disc.elems[e];
    let nb = disc.num_basis();
    let q: Vec<DVector<f64>> = (0..2).map(|d| DVector::from_column_slice(state.q(e, d))).collect();
    let u = DVector::from_column_slice(state.u(e));
    let mut rhs = DMatrix::zeros(nb, 4);
    for c in 0..4 {
        let (i, jj) = (c / 2, c % 2);
        rhs.column_mut(c).sub_assign(&(&ed.grad[jj] * &q[i]));
    }
    for (lf, ef) in disc.mesh.elem_faces[e].iter().enumerate() {
        let fg = &ed.geom.faces[lf];
        let phi = &re.face_phi[lf];
        let psi = disc.trace_table(e, lf);
        let uq = phi * &u;
        let qq: Vec<_> = (0..2).map(|d| phi * &q[d]).collect();
        let uh = psi * DVector::from_column_slice(state.face_trace(ef.face));
        for c in 0..4 {
            let (i, jj) = (c / 2, c % 2);
            let wv = DVector::from_iterator(
                re.num_face_quad(),
                (0..re.num_face_quad()).map(|k| {
                    let n = fg.normals[k];
                    fg.wsj[k] * n[jj] * (qq[i][k] - tau * (uq[k] - uh[k]) * n[i])
                }),
            );
            rhs.column_mut(c).add_assign(&phi.tr_mul(&wv));
        }
    }
    let h = ed
        .mass
        .clone()
        .cholesky()
        .ok_or(Error::Condensation { elem: e, cond: f64::INFINITY })?
        .solve(&rhs);
    let blk = state.elem_mut(e);
    for c in 0..4 {
        blk[(H_BLOCK + c) * nb..(H_BLOCK + c + 1) * nb].copy_from_slice(h.column(c).as_slice());
    }
    Ok(())
}

/// Norm of the difference of the Hessian fields of two states.
pub(crate) fn hessian_difference(disc: &Discretization, a: &FieldState, b: &FieldState, norm: IncrementNorm) -> f64 {
    let mut sum = 0.0;
    for (e, ed) in disc.elems.iter().enumerate() {
        for c in 0..4 {
            let d = DVector::from_iterator(disc.num_basis(), a.h(e, c).iter().zip(b.h(e, c)).map(|(x, y)| x - y));
            sum += match norm {
                IncrementNorm::L2 => d.dot(&(&ed.mass * &d)),
                IncrementNorm::Coefficient => d.dot(&d),
            };
        }
    }
    sum.sqrt()
}

struct DirichletFactor {
    lu: Vec<LU<f64, Dyn, Dyn>>,
    blocks: Vec<LocalBlocks>,
    xb: Vec<DMatrix<f64>>,
    system: CondensedSystem,
    factor: super::condense::TraceFactor,
}

fn factor_dirichlet(problem: &MAProblem, disc: &Discretization, state: &FieldState, tau: f64) -> Result<DirichletFactor> {
    let parts: Vec<Result<(LU<f64, Dyn, Dyn>, LocalBlocks, CondensedElement)>> = (0..disc.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let blocks = poisson_local(disc, problem, state, e, tau)?;
            let ce = condense(&blocks, disc.trace_dofs(e), e)?;
            Ok((blocks.a.clone().lu(), blocks, ce))
        })
        .collect();
    let mut lu = Vec::new();
    let mut blocks = Vec::new();
    let mut elems = Vec::new();
    for p in parts {
        let (l, b, c) = p?;
        lu.push(l);
        blocks.push(b);
        elems.push(c);
    }
    let system = CondensedSystem::assemble(disc.num_global_trace(), &elems);
    let factor = system.factorize()?;
    let xb = elems.into_iter().map(|c| c.xb).collect();
    Ok(DirichletFactor { lu, blocks, xb, system, factor })
}

/// Writes `(q, u)` from the stacked local vector and the traces into `state`.
fn store(disc: &Discretization, state: &mut FieldState, e: usize, v: &DVector<f64>) {
    let nb = disc.num_basis();
    let blk = state.elem_mut(e);
    blk[Q_BLOCK * nb..(U_BLOCK + 1) * nb].copy_from_slice(v.as_slice());
}

/// Fixed-point iteration: a Poisson-type HDG solve per step with the source frozen at the previous
/// Hessian, followed by element-wise Hessian recovery.
pub fn fixed_point_solve(
    problem: &MAProblem,
    disc: &Discretization,
    config: &SolverConfig,
    initial: FieldState,
) -> Result<(FieldState, IterationLog)> {
    config.validate()?;
    initial.check_layout(disc)?;
    if !initial.is_finite() {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    let tau = config.tau;
    let ne = disc.mesh.num_elements();
    let nb = disc.num_basis();
    let mut log = IterationLog {
        method: Method::FixedPoint,
        records: Vec::new(),
    };
    let dirichlet = match problem {
        MAProblem::Dirichlet(_) => Some(factor_dirichlet(problem, disc, &initial, tau)?),
        MAProblem::Ot(_) => None,
    };
    let mut prev = initial;
    for it in 1..=config.max_iter {
        let mut next = prev.clone();
        let sources: Vec<Result<DVector<f64>>> =
            (0..ne).into_par_iter().map(|e| source_vector(disc, problem, &prev, e)).collect();
        match &dirichlet {
            Some(df) => {
                let mut rhs = vec![0.0; disc.num_global_trace()];
                let mut xr = Vec::with_capacity(ne);
                for (e, src) in sources.into_iter().enumerate() {
                    let mut r123 = df.blocks[e].r123.clone();
                    r123.rows_mut(2 * nb, nb).sub_assign(&src?);
                    let x = df.lu[e].solve(&r123).ok_or(Error::Condensation { elem: e, cond: f64::INFINITY })?;
                    let re = &df.blocks[e].r4 - &df.blocks[e].c * &x;
                    for (k, g) in disc.trace_dofs(e).into_iter().enumerate() {
                        rhs[g] += re[k];
                    }
                    xr.push(x);
                }
                let sol = solve_with(&df.system, &df.factor, &rhs)?;
                for e in 0..ne {
                    let t = DVector::from_iterator(disc.num_local_trace(), disc.trace_dofs(e).into_iter().map(|g| sol.du_hat[g]));
                    let v = &xr[e] - &df.xb[e] * t;
                    store(disc, &mut next, e, &v);
                }
                next.u_hat = sol.du_hat;
            }
            None => {
                let parts: Vec<Result<CondensedElement>> = sources
                    .into_par_iter()
                    .enumerate()
                    .map(|(e, src)| {
                        let mut blocks = poisson_local(disc, problem, &prev, e, tau)?;
                        blocks.r123.rows_mut(2 * nb, nb).sub_assign(&src?);
                        condense(&blocks, disc.trace_dofs(e), e)
                    })
                    .collect();
                let elems = parts.into_iter().collect::<Result<Vec<_>>>()?;
                let system = CondensedSystem::assemble(disc.num_global_trace(), &elems);
                let factor = system.factorize()?;
                let sol = solve_with(&system, &factor, &system.rhs())?;
                for (e, ce) in elems.iter().enumerate() {
                    let v = recover_local(ce, &sol.du_hat, sol.lambda);
                    store(disc, &mut next, e, &v);
                }
                next.u_hat = sol.du_hat;
                next.lambda = sol.lambda;
            }
        }
        for e in 0..ne {
            recover_hessian(disc, &mut next, e, tau)?;
        }
        if !next.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual: f64::NAN });
        }
        let dh = hessian_difference(disc, &next, &prev, config.fp_norm);
        log.records.push(IterationRecord {
            iteration: it,
            residual_norm: None,
            alpha: None,
            hessian_increment_norm: Some(dh),
            lambda: next.lambda,
        });
        prev = next;
        if dh <= config.fp_tol {
            return Ok((prev, log));
        }
    }
    let last = log.records.last().and_then(|r| r.hessian_increment_norm).unwrap_or(f64::NAN);
    Err(Error::NonConvergence { iterations: config.max_iter, residual: last })
}
