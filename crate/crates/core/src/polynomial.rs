//! Orthonormal modal bases used to build well-conditioned nodal Vandermonde matrices.

use crate::mesh::ElemKind;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Orthonormal Jacobi polynomial P_n^{(a,b)} on [-1, 1].
pub fn jacobi(x: f64, a: usize, b: usize, n: usize) -> f64 {
    let (af, bf) = (a as f64, b as f64);
    let gamma0 = 2f64.powi((a + b + 1) as i32) / (af + bf + 1.0) * factorial(a) * factorial(b)
        / factorial(a + b);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (af + 1.0) * (bf + 1.0) / (af + bf + 3.0) * gamma0;
    let p1 = ((af + bf + 2.0) * x / 2.0 + (af - bf) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }
    let mut aold = 2.0 / (2.0 + af + bf) * ((af + 1.0) * (bf + 1.0) / (af + bf + 3.0)).sqrt();
    let (mut pm, mut pc) = (p0, p1);
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + af + bf;
        let anew = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + af + bf) * (i + 1.0 + af) * (i + 1.0 + bf)
                / (h1 + 1.0)
                / (h1 + 3.0))
                .sqrt();
        let bnew = -(af * af - bf * bf) / h1 / (h1 + 2.0);
        let pn = (-aold * pm + (x - bnew) * pc) / anew;
        pm = pc;
        pc = pn;
        aold = anew;
    }
    pc
}

/// Derivative of [`jacobi`].
pub fn jacobi_derivative(x: f64, a: usize, b: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ((n * (n + a + b + 1)) as f64).sqrt() * jacobi(x, a + 1, b + 1, n - 1)
}

/// Number of modes of the degree-`p` space on `kind`.
pub fn dimension(kind: ElemKind, p: usize) -> usize {
    match kind {
        ElemKind::Triangle => (p + 1) * (p + 2) / 2,
        ElemKind::Quadrilateral => (p + 1) * (p + 1),
    }
}

/// Values and reference gradients of all modes at a point of the unit reference element.
pub fn modal_basis(kind: ElemKind, p: usize, pt: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = dimension(kind, p);
    let mut val = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    match kind {
        ElemKind::Quadrilateral => {
            let (r, s) = (2.0 * pt[0] - 1.0, 2.0 * pt[1] - 1.0);
            for j in 0..=p {
                for i in 0..=p {
                    let (fi, gj) = (jacobi(r, 0, 0, i), jacobi(s, 0, 0, j));
                    let (dfi, dgj) = (jacobi_derivative(r, 0, 0, i), jacobi_derivative(s, 0, 0, j));
                    val.push(fi * gj);
                    grad.push([2.0 * dfi * gj, 2.0 * fi * dgj]);
                }
            }
        }
        ElemKind::Triangle => {
            // Dubiner basis on the biunit triangle, collapsed coordinates (a, b).
            let (r, s) = (2.0 * pt[0] - 1.0, 2.0 * pt[1] - 1.0);
            let a = if (1.0 - s).abs() > 1e-14 {
                2.0 * (1.0 + r) / (1.0 - s) - 1.0
            } else {
                -1.0
            };
            let b = s;
            for i in 0..=p {
                for j in 0..=(p - i) {
                    let fa = jacobi(a, 0, 0, i);
                    let dfa = jacobi_derivative(a, 0, 0, i);
                    let gb = jacobi(b, 2 * i + 1, 0, j);
                    let dgb = jacobi_derivative(b, 2 * i + 1, 0, j);
                    let half = 0.5 * (1.0 - b);
                    val.push(std::f64::consts::SQRT_2 * fa * gb * (1.0 - b).powi(i as i32));

                    let mut dr = dfa * gb;
                    let mut ds = dfa * gb * 0.5 * (1.0 + a);
                    if i > 0 {
                        let c = half.powi(i as i32 - 1);
                        dr *= c;
                        ds *= c;
                    }
                    let mut tmp = dgb * half.powi(i as i32);
                    if i > 0 {
                        tmp -= 0.5 * i as f64 * gb * half.powi(i as i32 - 1);
                    }
                    ds += fa * tmp;
                    let scale = 2f64.powf(i as f64 + 0.5);
                    // d/dx = 2 d/dr on the unit triangle
                    grad.push([2.0 * scale * dr, 2.0 * scale * ds]);
                }
            }
        }
    }
    (val, grad)
}

/// Orthonormal Legendre modes on [0, 1] (used for face traces).
pub fn modal_basis_1d(p: usize, t: f64) -> Vec<f64> {
    let r = 2.0 * t - 1.0;
    (0..=p).map(|i| jacobi(r, 0, 0, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::element_rule;

    #[test]
    fn triangle_modes_are_orthogonal() {
        let p = 4;
        let (pts, wts) = element_rule(ElemKind::Triangle, 2 * p);
        let n = dimension(ElemKind::Triangle, p);
        let tab: Vec<_> = pts.iter().map(|&x| modal_basis(ElemKind::Triangle, p, x).0).collect();
        for i in 0..n {
            for j in 0..n {
                let g: f64 = tab.iter().zip(&wts).map(|(v, w)| w * v[i] * v[j]).sum();
                // unit triangle has 1/4 the area of the biunit one
                let expect = if i == j { 0.25 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12, "{i} {j} {g}");
            }
        }
    }

    #[test]
    fn modal_gradients_match_finite_differences() {
        let h = 1e-6;
        for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
            let x = [0.23, 0.41];
            let (_, g) = modal_basis(kind, 5, x);
            let (vpx, _) = modal_basis(kind, 5, [x[0] + h, x[1]]);
            let (vmx, _) = modal_basis(kind, 5, [x[0] - h, x[1]]);
            let (vpy, _) = modal_basis(kind, 5, [x[0], x[1] + h]);
            let (vmy, _) = modal_basis(kind, 5, [x[0], x[1] - h]);
            for k in 0..g.len() {
                let fx = (vpx[k] - vmx[k]) / (2.0 * h);
                let fy = (vpy[k] - vmy[k]) / (2.0 * h);
                assert!((fx - g[k][0]).abs() < 1e-6 * (1.0 + fx.abs()));
                assert!((fy - g[k][1]).abs() < 1e-6 * (1.0 + fy.abs()));
            }
        }
    }
}
