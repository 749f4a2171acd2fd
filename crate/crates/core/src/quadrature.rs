//! Gauss rules on the unit interval, the unit right triangle and the unit square.

use crate::mesh::ElemKind;

/// Gauss-Legendre nodes and weights on `[0, 1]` with `n` points (exact to degree `2n - 1`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1], ascending order
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let d = n * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Element rule exact for polynomials of total degree `strength` (triangles) or of
/// degree `strength` in each variable (quadrilaterals).
pub fn element_rule(kind: ElemKind, strength: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    match kind {
        ElemKind::Quadrilateral => {
            let n = strength / 2 + 1;
            let (x, w) = gauss_legendre(n);
            let mut pts = Vec::with_capacity(n * n);
            let mut wts = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    pts.push([x[i], x[j]]);
                    wts.push(w[i] * w[j]);
                }
            }
            (pts, wts)
        }
        ElemKind::Triangle => {
            // Collapsed (Duffy) product rule; the extra (1 - b) factor raises the degree in b by one.
            let na = strength / 2 + 1;
            let nb = (strength + 1) / 2 + 1;
            let (a, wa) = gauss_legendre(na);
            let (b, wb) = gauss_legendre(nb);
            let mut pts = Vec::with_capacity(na * nb);
            let mut wts = Vec::with_capacity(na * nb);
            for j in 0..nb {
                for i in 0..na {
                    pts.push([a[i] * (1.0 - b[j]), b[j]]);
                    wts.push(wa[i] * wb[j] * (1.0 - b[j]));
                }
            }
            (pts, wts)
        }
    }
}

/// Face rule on `[0, 1]` exact to degree `strength`.
pub fn face_rule(strength: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(strength / 2 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rule_exact_to_strength() {
        for strength in 1..=17 {
            let (pts, wts) = element_rule(ElemKind::Triangle, strength);
            for i in 0..=strength as u32 {
                for j in 0..=(strength as u32 - i) {
                    let q: f64 = pts
                        .iter()
                        .zip(&wts)
                        .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32))
                        .sum();
                    // int_T x^i y^j = i! j! / (i + j + 2)!
                    let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                    assert!((q - exact).abs() < 1e-14, "s={strength} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn reference_triangle_x2y() {
        let (pts, wts) = element_rule(ElemKind::Triangle, 3);
        let q: f64 = pts.iter().zip(&wts).map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
        assert!((q - 1.0 / 60.0).abs() < 1e-15);
    }
}
