use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use super::local::LocalBlocks;
use crate::error::{Error, Result};

/// One element's contribution to the trace system, plus what local recovery needs.
#[derive(Debug, Clone)]
pub struct CondensedElement {
    pub dofs: Vec<usize>,
    /// `D - C A^-1 B`.
    pub k: DMatrix<f64>,
    /// `R4 - C A^-1 R123`.
    pub r: DVector<f64>,
    /// `A^-1 B`.
    pub xb: DMatrix<f64>,
    /// `A^-1 R123`.
    pub xr: DVector<f64>,
    /// `A^-1 E^T`, bordering column `-C A^-1 E^T`, constraint row `-E A^-1 B`,
    /// constraint right-hand side `r5 - E A^-1 R123` and corner entry `-E A^-1 E^T`.
    pub border: Option<Border>,
}

#[derive(Debug, Clone)]
pub struct Border {
    pub xe: DVector<f64>,
    pub col: DVector<f64>,
    pub row: DVector<f64>,
    pub r5: f64,
    pub corner: f64,
}

/// Eliminates the interior unknowns of one element.
pub fn condense(blocks: &LocalBlocks, dofs: Vec<usize>, elem: usize) -> Result<CondensedElement> {
    let ni = blocks.a.nrows();
    let nt = blocks.d.nrows();
    if blocks.b.shape() != (ni, nt) || blocks.c.shape() != (nt, ni) || dofs.len() != nt {
        return Err(Error::InvalidArgument("inconsistent local block shapes".into()));
    }
    let ncol = nt + 1 + usize::from(blocks.e.is_some());
    let mut rhs = DMatrix::zeros(ni, ncol);
    rhs.view_mut((0, 0), (ni, nt)).copy_from(&blocks.b);
    rhs.set_column(nt, &blocks.r123);
    if let Some(e) = &blocks.e {
        rhs.set_column(nt + 1, e);
    }
    let lu = blocks.a.clone().lu();
    let diag = lu.u().diagonal().abs();
    let (dmax, dmin) = (diag.max(), diag.min());
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    let x = lu
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()) && cond < 1e15)
        .ok_or(Error::Condensation { elem, cond })?;
    let xb = x.view((0, 0), (ni, nt)).into_owned();
    let xr = x.column(nt).into_owned();
    let k = &blocks.d - &blocks.c * &xb;
    let r = &blocks.r4 - &blocks.c * &xr;
    let border = blocks.e.as_ref().map(|e| {
        let xe = x.column(nt + 1).into_owned();
        Border {
            col: -(&blocks.c * &xe),
            row: -(xb.tr_mul(e)),
            r5: blocks.r5 - e.dot(&xr),
            corner: -e.dot(&xe),
            xe,
        }
    });
    Ok(CondensedElement {
        dofs,
        k,
        r,
        xb,
        xr,
        border,
    })
}

/// Interior increment `A^-1 (R123 - B dU_hat - E^T dlambda)`.
pub fn recover_local(ce: &CondensedElement, du_hat: &[f64], dlambda: f64) -> DVector<f64> {
    let t = DVector::from_iterator(ce.dofs.len(), ce.dofs.iter().map(|&g| du_hat[g]));
    let mut x = &ce.xr - &ce.xb * t;
    if let Some(b) = &ce.border {
        x.axpy(-dlambda, &b.xe, 1.0);
    }
    x
}

/// Global trace system `K dU_hat = R`, bordered by the mean-zero constraint in optimal-transport mode.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub n: usize,
    /// Entries of `K` (duplicates summed).
    pub triplets: Vec<(usize, usize, f64)>,
    pub r: Vec<f64>,
    pub border: Option<GlobalBorder>,
}

#[derive(Debug, Clone)]
pub struct GlobalBorder {
    pub col: Vec<f64>,
    pub row: Vec<f64>,
    pub r5: f64,
    pub corner: f64,
}

impl CondensedSystem {
    /// Sums element contributions in the given order.
    pub fn assemble(n: usize, elems: &[CondensedElement]) -> Self {
        let mut triplets = Vec::with_capacity(elems.iter().map(|e| e.k.len()).sum());
        let mut r = vec![0.0; n];
        let bordered = elems.first().is_some_and(|e| e.border.is_some());
        let mut border = bordered.then(|| GlobalBorder {
            col: vec![0.0; n],
            row: vec![0.0; n],
            r5: 0.0,
            corner: 0.0,
        });
        for ce in elems {
            for (j, &gj) in ce.dofs.iter().enumerate() {
                for (i, &gi) in ce.dofs.iter().enumerate() {
                    triplets.push((gi, gj, ce.k[(i, j)]));
                }
                r[gj] += ce.r[j];
            }
            if let (Some(gb), Some(b)) = (border.as_mut(), &ce.border) {
                for (i, &g) in ce.dofs.iter().enumerate() {
                    gb.col[g] += b.col[i];
                    gb.row[g] += b.row[i];
                }
                gb.r5 += b.r5;
                gb.corner += b.corner;
            }
        }
        CondensedSystem {
            n,
            triplets,
            r,
            border,
        }
    }

    /// Dimension of the square system actually solved.
    pub fn size(&self) -> usize {
        self.n + usize::from(self.border.is_some())
    }

    /// Right-hand side of the square system.
    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.r.clone();
        if let Some(b) = &self.border {
            r.push(b.r5);
        }
        r
    }

    /// `y = S x` for the full (bordered) square matrix.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size()];
        for &(i, j, v) in &self.triplets {
            y[i] += v * x[j];
        }
        if let Some(b) = &self.border {
            let n = self.n;
            for g in 0..n {
                y[g] += b.col[g] * x[n];
            }
            y[n] = dot(&b.row, &x[..n]) + b.corner * x[n];
        }
        y
    }

    /// Sparse LU factorization of the trace matrix.
    ///
    /// A bordered system is never factorized with its dense row and column. `K` alone is singular
    /// (constants span its kernel), so the factor is of `K + s e_j e_j^T` for a pinned dof `j`, and
    /// the border is eliminated exactly through a 2x2 system per solve.
    pub fn factorize(&self) -> Result<TraceFactor> {
        let n = self.n;
        let mut t: Vec<_> = self.triplets.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let pin = self.border.as_ref().map(|_| {
            let mut diag = vec![0.0; n];
            for &(i, j, v) in &self.triplets {
                if i == j {
                    diag[i] += v;
                }
            }
            let s = diag.iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-300);
            t.push(Triplet::new(0, 0, s));
            s
        });
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::SingularSystem(format!("cannot build sparse matrix: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))?;
        let border = match (&self.border, pin) {
            (Some(b), Some(s)) => {
                let yc = solve_lu(&lu, &b.col)?;
                let mut ej = vec![0.0; n];
                ej[0] = 1.0;
                let ye = solve_lu(&lu, &ej)?;
                Some(BorderSolve {
                    s,
                    row: b.row.clone(),
                    corner: b.corner,
                    yc,
                    ye,
                })
            }
            _ => None,
        };
        Ok(TraceFactor { lu, n, border })
    }
}

fn solve_lu(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(x.as_mut());
    let out: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite trace solution".into()));
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pinned dof 0 with shift `s`, and `K~^-1 col`, `K~^-1 e_0`.
struct BorderSolve {
    s: f64,
    row: Vec<f64>,
    corner: f64,
    yc: Vec<f64>,
    ye: Vec<f64>,
}

pub struct TraceFactor {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
    border: Option<BorderSolve>,
}

impl TraceFactor {
    /// Solves the square (bordered) system; `rhs` has the constraint entry last when bordered.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let Some(b) = &self.border else {
            return solve_lu(&self.lu, rhs);
        };
        // K~ x = r - col lam + s e_0 mu, mu = x_0, row x + corner lam = r5
        let yr = solve_lu(&self.lu, &rhs[..n])?;
        let a = [
            [1.0 - b.s * b.ye[0], b.yc[0]],
            [b.s * dot(&b.row, &b.ye), b.corner - dot(&b.row, &b.yc)],
        ];
        let f = [yr[0], rhs[n] - dot(&b.row, &yr)];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let scale = a.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::SingularSystem("bordered trace system is singular".into()));
        }
        let mu = (f[0] * a[1][1] - a[0][1] * f[1]) / det;
        let lam = (a[0][0] * f[1] - a[1][0] * f[0]) / det;
        let mut x: Vec<f64> = (0..n).map(|i| yr[i] - lam * b.yc[i] + b.s * mu * b.ye[i]).collect();
        x.push(lam);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite trace solution".into()));
        }
        Ok(x)
    }
}

impl std::fmt::Debug for TraceFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TraceFactor({}, bordered: {})", self.n, self.border.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSolution {
    pub du_hat: Vec<f64>,
    pub lambda: f64,
    /// `|S x - b|` of the solved square system.
    pub residual: f64,
}

/// Factorizes and solves the condensed system.
pub fn solve_condensed(system: &CondensedSystem) -> Result<TraceSolution> {
    let factor = system.factorize()?;
    solve_with(system, &factor, &system.rhs())
}

pub(crate) fn solve_with(system: &CondensedSystem, factor: &TraceFactor, rhs: &[f64]) -> Result<TraceSolution> {
    let mut x = factor.solve(rhs)?;
    let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let resid = |x: &[f64]| -> (Vec<f64>, f64) {
        let ax = system.apply(x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        (r, n)
    };
    let (mut r, mut rn) = resid(&x);
    // Iterative refinement for badly scaled bordered systems.
    for _ in 0..2 {
        if rn <= 1e-12 * (1.0 + norm_b) {
            break;
        }
        let dx = factor.solve(&r)?;
        for (a, b) in x.iter_mut().zip(&dx) {
            *a += b;
        }
        (r, rn) = resid(&x);
    }
    if !(rn <= 1e-8 * (1.0 + norm_b)) {
        return Err(Error::SingularSystem(format!(
            "trace solve residual {rn:.3e} for right-hand side norm {norm_b:.3e}"
        )));
    }
    let lambda = if system.border.is_some() { x.pop().unwrap() } else { 0.0 };
    Ok(TraceSolution {
        du_hat: x,
        lambda,
        residual: rn,
    })
}
