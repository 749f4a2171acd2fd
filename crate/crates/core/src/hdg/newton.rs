use rayon::prelude::*;

use super::condense::{condense, recover_local, solve_condensed, CondensedElement, CondensedSystem};
use super::local::{global_residual_norm, local_system, split_blocks, u_integral_row};
use super::{Discretization, FieldState, IterationLog, IterationRecord, Method, SolverConfig};
use crate::error::{Error, Result};
use crate::problems::MAProblem;

/// Condensed Newton system at `state` together with the residual norm at `state` (accumulated
/// exactly as in [`global_residual_norm`]).
pub(crate) fn linearize(
    problem: &MAProblem,
    disc: &Discretization,
    state: &FieldState,
    tau: f64,
) -> Result<(Vec<CondensedElement>, f64)> {
    let ni = disc.num_interior();
    let parts: Vec<Result<(CondensedElement, f64, Vec<f64>, f64)>> = (0..disc.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let ls = local_system(disc, problem, state, e, tau, true)?;
            let sq = ls.f.rows(0, ni).norm_squared();
            let f4: Vec<f64> = ls.f.rows(ni, ls.f.len() - ni).iter().copied().collect();
            let f5 = ls.f5;
            let blocks = split_blocks(disc, ls, problem.is_ot().then(|| u_integral_row(disc, e)));
            Ok((condense(&blocks, disc.trace_dofs(e), e)?, sq, f4, f5))
        })
        .collect();
    let mut elems = Vec::with_capacity(parts.len());
    let mut sum = 0.0;
    let mut f4 = vec![0.0; disc.num_global_trace()];
    let mut f5 = 0.0;
    for part in parts {
        let (ce, sq, f4e, f5e) = part?;
        sum += sq;
        for (k, &g) in ce.dofs.iter().enumerate() {
            f4[g] += f4e[k];
        }
        f5 += f5e;
        elems.push(ce);
    }
    sum += f4.iter().map(|v| v * v).sum::<f64>();
    if problem.is_ot() {
        sum += f5 * f5;
    }
    Ok((elems, sum.sqrt()))
}

/// Full Newton increment from a condensed linearization.
pub(crate) fn increment(
    disc: &Discretization,
    elems: &[CondensedElement],
) -> Result<(FieldState, f64)> {
    let system = CondensedSystem::assemble(disc.num_global_trace(), elems);
    let sol = solve_condensed(&system)?;
    let mut delta = FieldState::zeros(disc);
    for (e, ce) in elems.iter().enumerate() {
        let du = recover_local(ce, &sol.du_hat, sol.lambda);
        delta.elem_mut(e).copy_from_slice(du.as_slice());
    }
    delta.u_hat = sol.du_hat;
    delta.lambda = sol.lambda;
    Ok((delta, sol.residual))
}

/// Damped Newton iteration on the full HDG residual with backtracking line search.
pub fn newton_solve(
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
    let mut state = initial;
    let mut log = IterationLog {
        method: Method::Newton,
        records: Vec::new(),
    };
    for it in 0.. {
        let (elems, norm) = linearize(problem, disc, &state, tau)?;
        if it == 0 {
            log.records.push(IterationRecord {
                iteration: 0,
                residual_norm: Some(norm),
                alpha: None,
                hessian_increment_norm: None,
                lambda: state.lambda,
            });
        }
        if norm <= config.newton_tol {
            return Ok((state, log));
        }
        if it == config.max_iter {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: norm,
            });
        }
        let (delta, _) = increment(disc, &elems)?;
        drop(elems);
        // Backtrack to the first sufficient decrease, then keep halving while the residual
        // still improves and take the best trial.
        let mut best: Option<(FieldState, f64, f64)> = None;
        let mut alpha = 1.0;
        for _ in 0..=config.max_halvings {
            let trial = state.axpy(alpha, &delta);
            let n = global_residual_norm(problem, disc, &trial, tau)
                .ok()
                .filter(|n| n.is_finite());
            match (n, &best) {
                (Some(n), None) if n < (1.0 - config.sufficient_decrease * alpha) * norm => {
                    best = Some((trial, n, alpha));
                }
                (Some(n), Some((_, b, _))) if n < *b => best = Some((trial, n, alpha)),
                (_, Some(_)) => break,
                _ => {}
            }
            alpha *= 0.5;
        }
        let accepted = best.map(|(s, n, a)| {
            alpha = a;
            (s, n)
        });
        let Some((next, n)) = accepted else {
            return Err(Error::Stagnation {
                iteration: it + 1,
                residual: norm,
            });
        };
        state = next;
        log.records.push(IterationRecord {
            iteration: it + 1,
            residual_norm: Some(n),
            alpha: Some(alpha),
            hessian_increment_norm: None,
            lambda: state.lambda,
        });
    }
    unreachable!()
}
