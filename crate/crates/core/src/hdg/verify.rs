//! Consistency checks of the linearization and the condensed solve against brute-force oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::local::{local_system, u_integral_row};
use super::newton::{increment, linearize};
use super::{Discretization, FieldState};
use crate::error::{Error, Result};
use crate::problems::MAProblem;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// Initial guess plus a seeded uniform perturbation of amplitude `amp` in every coefficient.
pub fn random_state(disc: &Discretization, seed: u64, amp: f64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FieldState::initial_guess(disc);
    for v in s.elem.iter_mut().chain(s.u_hat.iter_mut()) {
        *v += amp * rng.gen_range(-1.0..1.0);
    }
    s.lambda = amp * rng.gen_range(-1.0..1.0);
    s
}

/// Element residual as a function of the element's interior and local trace unknowns.
fn local_f(
    disc: &Discretization,
    problem: &MAProblem,
    base: &FieldState,
    e: usize,
    tau: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let ni = disc.num_interior();
    let mut s = base.clone();
    s.elem_mut(e).copy_from_slice(x.rows(0, ni).as_slice());
    for (k, g) in disc.trace_dofs(e).into_iter().enumerate() {
        s.u_hat[g] = x[ni + k];
    }
    Ok(local_system(disc, problem, &s, e, tau, false)?.f)
}

/// Largest relative difference between the analytic element Jacobians and central differences
/// (step `1e-6`) in three random directions per element.
pub fn jacobian_fd_error(disc: &Discretization, problem: &MAProblem, state: &FieldState, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let ni = disc.num_interior();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-6;
    for e in 0..disc.mesh.num_elements() {
        let ls = local_system(disc, problem, state, e, tau, true)?;
        let j = ls.jac.expect("jacobian requested");
        let mut x = DVector::zeros(j.ncols());
        x.rows_mut(0, ni).copy_from_slice(state.elem(e));
        for (k, g) in disc.trace_dofs(e).into_iter().enumerate() {
            x[ni + k] = state.u_hat[g];
        }
        for _ in 0..3 {
            let v = DVector::from_fn(j.ncols(), |_, _| rng.gen_range(-1.0..1.0));
            let fp = local_f(disc, problem, state, e, tau, &(&x + h * &v))?;
            let fm = local_f(disc, problem, state, e, tau, &(&x - h * &v))?;
            let fd = (fp - fm) / (2.0 * h);
            let an = &j * &v;
            worst = worst.max((fd - &an).norm() / an.norm().max(1e-12));
        }
    }
    Ok(worst)
}

/// Newton step from the dense monolithic system over all interior and trace unknowns (and the
/// multiplier in optimal-transport mode).
pub fn dense_newton_step(disc: &Discretization, problem: &MAProblem, state: &FieldState, tau: f64) -> Result<DVector<f64>> {
    check_tau(tau)?;
    let ne = disc.mesh.num_elements();
    let ni = disc.num_interior();
    let nt = disc.num_global_trace();
    let ot = problem.is_ot();
    let n = ne * ni + nt + usize::from(ot);
    let mut a = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for e in 0..ne {
        let ls = local_system(disc, problem, state, e, tau, true)?;
        let j = ls.jac.expect("jacobian requested");
        let dofs: Vec<usize> = (0..ni)
            .map(|k| e * ni + k)
            .chain(disc.trace_dofs(e).into_iter().map(|g| ne * ni + g))
            .collect();
        for (li, &gi) in dofs.iter().enumerate() {
            r[gi] -= ls.f[li];
            for (lj, &gj) in dofs.iter().enumerate() {
                a[(gi, gj)] += j[(li, lj)];
            }
        }
        if ot {
            let row = u_integral_row(disc, e);
            for k in 0..ni {
                a[(n - 1, e * ni + k)] += row[k];
                a[(e * ni + k, n - 1)] += row[k];
            }
            r[n - 1] -= ls.f5;
        }
    }
    a.lu()
        .solve(&r)
        .ok_or_else(|| Error::SingularSystem("dense monolithic system".into()))
}

/// Largest difference between the condensed-plus-recovered Newton step and the dense one,
/// relative to the largest dense entry (at least one).
pub fn schur_dense_error(disc: &Discretization, problem: &MAProblem, state: &FieldState, tau: f64) -> Result<f64> {
    let dense = dense_newton_step(disc, problem, state, tau)?;
    let (elems, _) = linearize(problem, disc, state, tau)?;
    let (delta, _) = increment(disc, &elems)?;
    let mut x: Vec<f64> = delta.elem.clone();
    x.extend_from_slice(&delta.u_hat);
    if problem.is_ot() {
        x.push(delta.lambda);
    }
    let scale = dense.amax().max(1.0);
    Ok(x.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
}
