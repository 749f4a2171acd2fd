use super::{newton_solve, Discretization, FieldState, IterationLog, SolverConfig};
use crate::error::{Error, Result};
use crate::problems::{DensityFamily, DensityParams, MAProblem, OTProblem};

/// One converged stage of a density continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationStage {
    /// Homotopy parameter in `(0, 1]`.
    pub s: f64,
    pub coef: [f64; 3],
    pub iterations: usize,
}

/// Density coefficients at homotopy parameter `s`: the amplitude ramps from zero and the
/// sharpness from `min(a2, 1)` up to the target.
pub fn continuation_coefficients(target: &DensityParams, s: f64) -> [f64; 3] {
    let [a, b, c] = target.coef;
    let b0 = b.min(1.0);
    [s * a, b0 + s * (b - b0), c]
}

/// Newton iteration on a sequence of densities that sharpen towards `target`, each stage started
/// from the previous solution. The step in `s` grows after a success and is halved after a failure.
///
/// Returns the final state, the Newton log of the last stage and the accepted stages.
pub fn continuation_solve(
    target: &OTProblem,
    disc: &Discretization,
    config: &SolverConfig,
    stage_iter: usize,
) -> Result<(FieldState, IterationLog, Vec<ContinuationStage>)> {
    if target.density.family == DensityFamily::Uniform {
        return Err(Error::InvalidArgument("continuation needs a non-uniform density".into()));
    }
    let p = disc.degree();
    let stage_config = SolverConfig {
        max_iter: stage_iter.min(config.max_iter),
        ..*config
    };
    let mut state = FieldState::initial_guess(disc);
    let mut stages = Vec::new();
    let (mut s, mut ds) = (0.0_f64, 0.25_f64);
    let mut last_err = None;
    while s < 1.0 {
        if ds < MIN_STEP {
            return Err(last_err.unwrap_or(Error::NonConvergence {
                iterations: 0,
                residual: f64::NAN,
            }));
        }
        let sn = (s + ds).min(1.0);
        let coef = continuation_coefficients(&target.density, sn);
        let density = DensityParams {
            coef,
            ..target.density
        };
        let problem = MAProblem::Ot(OTProblem::new(density, target.target, &disc.mesh, p)?);
        match newton_solve(&problem, disc, &stage_config, state.clone()) {
            Ok((next, log)) => {
                stages.push(ContinuationStage {
                    s: sn,
                    coef,
                    iterations: log.iterations(),
                });
                state = next;
                s = sn;
                ds *= 1.5;
                if s >= 1.0 {
                    return Ok((state, log, stages));
                }
            }
            Err(e @ (Error::NonConvergence { .. } | Error::Stagnation { .. })) => {
                last_err = Some(e);
                ds *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

const MIN_STEP: f64 = 1e-2;
