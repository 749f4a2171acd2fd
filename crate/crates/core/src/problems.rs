//! Problem data: the Monge-Ampere source `s`, Dirichlet benchmarks, target densities and
//! boundary shape functions for the optimal-transport problem.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{ElementGeometry, GeometryTables};
use crate::mesh::{BoundaryTag, BoxDomain, Mesh};
use crate::reference::ReferenceElement;

/// Row-major 2x2 tensor `[H11, H12, H21, H22]`.
pub type Tensor2 = [f64; 4];

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn([f64; 2]) -> Tensor2 + Send + Sync>;

/// `s(H, f) = sqrt(|H|_F^2 + 2 f)`.
pub fn source_s(h: Tensor2, f: f64) -> Result<f64> {
    let r = h.iter().map(|v| v * v).sum::<f64>() + 2.0 * f;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Evaluation {
            elem: usize::MAX,
            msg: format!("negative radicand {r:.3e} in s(H, f)"),
        });
    }
    Ok(r.sqrt())
}

/// Partial derivatives of [`source_s`] with respect to the entries of `H`.
pub fn ds_dh(h: Tensor2, f: f64) -> Result<Tensor2> {
    let s = source_s(h, f)?;
    if s == 0.0 {
        return Err(Error::Evaluation {
            elem: usize::MAX,
            msg: "s(H, f) = 0".into(),
        });
    }
    Ok([h[0] / s, h[1] / s, h[2] / s, h[3] / s])
}

/// Exact solution and derivatives, for error studies.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub grad: VectorFn,
    pub hess: TensorFn,
}

/// `det(D^2 u) = f` in the domain, `u = g` on its boundary.
#[derive(Clone)]
pub struct DirichletMAProblem {
    pub name: String,
    pub domain: BoxDomain,
    pub f: ScalarFn,
    pub g: ScalarFn,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for DirichletMAProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletMAProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Built-in Dirichlet benchmarks on the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Example {
    /// `u = exp((x^2 + y^2) / 2)`.
    Ex1,
    /// `u = -sqrt(R^2 - x^2 - y^2)`, requires `R > sqrt(2)`.
    Ex2 { r: f64 },
    /// `u = (x^2 + y^2) / 2`, `f = 1`; lies in every space with `p >= 2`.
    Quadratic,
}

pub fn builtin_example(ex: Example) -> Result<DirichletMAProblem> {
    let exact = match ex {
        Example::Ex1 => ExactSolution {
            u: Arc::new(|x| (0.5 * (x[0] * x[0] + x[1] * x[1])).exp()),
            grad: Arc::new(|x| {
                let e = (0.5 * (x[0] * x[0] + x[1] * x[1])).exp();
                [x[0] * e, x[1] * e]
            }),
            hess: Arc::new(|x| {
                let e = (0.5 * (x[0] * x[0] + x[1] * x[1])).exp();
                let xy = x[0] * x[1] * e;
                [(1.0 + x[0] * x[0]) * e, xy, xy, (1.0 + x[1] * x[1]) * e]
            }),
        },
        Example::Ex2 { r } => {
            if !(r > std::f64::consts::SQRT_2) {
                return Err(Error::InvalidArgument(format!(
                    "example 2 needs R > sqrt(2), got {r}"
                )));
            }
            let r2 = r * r;
            ExactSolution {
                u: Arc::new(move |x| -(r2 - x[0] * x[0] - x[1] * x[1]).sqrt()),
                grad: Arc::new(move |x| {
                    let w = (r2 - x[0] * x[0] - x[1] * x[1]).sqrt();
                    [x[0] / w, x[1] / w]
                }),
                hess: Arc::new(move |x| {
                    let d = r2 - x[0] * x[0] - x[1] * x[1];
                    let w3 = d * d.sqrt();
                    let xy = x[0] * x[1] / w3;
                    [(r2 - x[1] * x[1]) / w3, xy, xy, (r2 - x[0] * x[0]) / w3]
                }),
            }
        }
        Example::Quadratic => ExactSolution {
            u: Arc::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1])),
            grad: Arc::new(|x| x),
            hess: Arc::new(|_| [1.0, 0.0, 0.0, 1.0]),
        },
    };
    let (name, f): (String, ScalarFn) = match ex {
        Example::Ex1 => (
            "ex1".into(),
            Arc::new(|x| {
                let r = x[0] * x[0] + x[1] * x[1];
                (1.0 + r) * r.exp()
            }),
        ),
        Example::Ex2 { r } => {
            let r2 = r * r;
            (
                format!("ex2(R={r})"),
                Arc::new(move |x| {
                    let d = r2 - x[0] * x[0] - x[1] * x[1];
                    r2 / (d * d)
                }),
            )
        }
        Example::Quadratic => ("quadratic".into(), Arc::new(|_| 1.0)),
    };
    Ok(DirichletMAProblem {
        name,
        domain: BoxDomain::UNIT,
        f,
        g: exact.u.clone(),
        exact: Some(exact),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityFamily {
    Uniform,
    /// `1 + a1 sech^2(a2 (x^2 + y^2 - a3^2))`.
    RingBell,
    /// `1 + b1 sech^2(b2 ((x - 1.5)^2 + y^2 - b3^2))`.
    Shock,
}

impl DensityFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "ring" | "bell" | "ring_bell" => Ok(Self::RingBell),
            "shock" => Ok(Self::Shock),
            _ => Err(Error::InvalidArgument(format!("unknown density family '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::RingBell => "ring_bell",
            Self::Shock => "shock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub family: DensityFamily,
    pub coef: [f64; 3],
}

impl DensityParams {
    pub fn uniform() -> Self {
        DensityParams {
            family: DensityFamily::Uniform,
            coef: [0.0; 3],
        }
    }

    pub fn new(family: DensityFamily, coef: &[f64]) -> Result<Self> {
        if family == DensityFamily::Uniform {
            if !coef.is_empty() {
                return Err(Error::InvalidArgument("uniform density takes no coefficients".into()));
            }
            return Ok(Self::uniform());
        }
        let c: [f64; 3] = coef.try_into().map_err(|_| {
            Error::InvalidArgument(format!("{} density needs 3 coefficients", family.name()))
        })?;
        if !(c[1] > 0.0) || !(c[0] >= 0.0) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid density coefficients {c:?}")));
        }
        Ok(DensityParams { family, coef: c })
    }

    fn shifted(&self, x: [f64; 2]) -> [f64; 2] {
        match self.family {
            DensityFamily::Shock => [x[0] - 1.5, x[1]],
            _ => x,
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.eval_with_gradient(x).0
    }

    /// Density value and gradient.
    pub fn eval_with_gradient(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        if self.family == DensityFamily::Uniform {
            return (1.0, [0.0, 0.0]);
        }
        let [a, b, c] = self.coef;
        let y = self.shifted(x);
        let z = b * (y[0] * y[0] + y[1] * y[1] - c * c);
        let sech2 = 1.0 / z.cosh().powi(2);
        let k = -4.0 * a * b * sech2 * z.tanh();
        (1.0 + a * sech2, [k * y[0], k * y[1]])
    }
}

/// Target domain of the transport map (equal to the background domain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetDomain {
    Box(BoxDomain),
    /// Region between the unit half circle and the half ellipse `x^2/4 + y^2/16 = 1`, `x <= 0`.
    HalfCylinder,
}

impl TargetDomain {
    pub fn area(&self) -> f64 {
        match self {
            TargetDomain::Box(b) => b.area(),
            TargetDomain::HalfCylinder => crate::mesh::CYLINDER_AREA,
        }
    }
}

/// Implicit boundary function of `tag`, negative inside the target domain, with its gradient.
pub fn boundary_g(target: &TargetDomain, tag: BoundaryTag, q: [f64; 2]) -> Result<(f64, [f64; 2])> {
    use BoundaryTag::*;
    match (target, tag) {
        (TargetDomain::Box(b), Bottom) => Ok((b.y0 - q[1], [0.0, -1.0])),
        (TargetDomain::Box(b), Right) => Ok((q[0] - b.x1, [1.0, 0.0])),
        (TargetDomain::Box(b), Top) => Ok((q[1] - b.y1, [0.0, 1.0])),
        (TargetDomain::Box(b), Left) => Ok((b.x0 - q[0], [-1.0, 0.0])),
        (TargetDomain::HalfCylinder, Circle) => {
            Ok((1.0 - q[0] * q[0] - q[1] * q[1], [-2.0 * q[0], -2.0 * q[1]]))
        }
        (TargetDomain::HalfCylinder, Ellipse) => Ok((
            q[0] * q[0] / 4.0 + q[1] * q[1] / 16.0 - 1.0,
            [q[0] / 2.0, q[1] / 8.0],
        )),
        (TargetDomain::HalfCylinder, Cut) => Ok((q[0], [1.0, 0.0])),
        _ => Err(Error::UnknownTag(tag.id())),
    }
}

/// Second boundary value problem: `det(D^2 u) = theta / rho'(grad u)`, `g(grad u) = 0`, mean-zero `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OTProblem {
    pub density: DensityParams,
    pub theta: f64,
    pub target: TargetDomain,
}

impl OTProblem {
    /// Builds the problem with `theta` integrated on `mesh` at degree-`p` quadrature.
    pub fn new(density: DensityParams, target: TargetDomain, mesh: &Mesh, p: usize) -> Result<Self> {
        let theta = compute_theta(&density, mesh, p)?;
        Ok(OTProblem {
            density,
            theta,
            target,
        })
    }

    pub fn boundary_g(&self, tag: BoundaryTag, q: [f64; 2]) -> Result<(f64, [f64; 2])> {
        boundary_g(&self.target, tag, q)
    }
}

/// `f = theta / rho'(q)` and its gradient in `q`.
pub fn ot_source_f(q: [f64; 2], problem: &OTProblem) -> Result<(f64, [f64; 2])> {
    let (r, dr) = problem.density.eval_with_gradient(q);
    if !(r > 0.0) {
        return Err(Error::Evaluation {
            elem: usize::MAX,
            msg: format!("nonpositive density {r:.3e} at {q:?}"),
        });
    }
    let f = problem.theta / r;
    let k = -problem.theta / (r * r);
    Ok((f, [k * dr[0], k * dr[1]]))
}

/// `theta = int rho' / |Omega|`, both integrals taken on the mesh with an oversampled rule
/// (sharp densities are under-resolved by the solution quadrature).
pub fn compute_theta(density: &DensityParams, mesh: &Mesh, p: usize) -> Result<f64> {
    let p = p.max(mesh.geometric_degree);
    let re = ReferenceElement::with_strength(mesh.kind, p, (2 * p + 1).max(THETA_STRENGTH))?;
    let tables = GeometryTables::new(mesh, &re)?;
    let (mut num, mut den) = (0.0, 0.0);
    for e in 0..mesh.num_elements() {
        let g = ElementGeometry::new(mesh, &re, &tables, e)?;
        for (x, w) in g.points.iter().zip(&g.wdet) {
            num += w * density.eval(*x);
            den += w;
        }
    }
    Ok(num / den)
}

const THETA_STRENGTH: usize = 20;

/// Either kind of Monge-Ampere problem, as consumed by the solvers.
#[derive(Debug, Clone)]
pub enum MAProblem {
    Dirichlet(DirichletMAProblem),
    Ot(OTProblem),
}

impl MAProblem {
    pub fn is_ot(&self) -> bool {
        matches!(self, MAProblem::Ot(_))
    }

    /// Source value and its gradient with respect to `q` at a point.
    pub fn source(&self, x: [f64; 2], q: [f64; 2]) -> Result<(f64, [f64; 2])> {
        match self {
            MAProblem::Dirichlet(d) => Ok(((d.f)(x), [0.0, 0.0])),
            MAProblem::Ot(o) => ot_source_f(q, o),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_square_mesh, ElemKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn s_examples() {
        assert_eq!(source_s([1.0, 0.0, 0.0, 1.0], 1.0).unwrap(), 2.0);
        assert_eq!(source_s([0.0; 4], 2.0).unwrap(), 2.0);
        assert_eq!(source_s([2.0, 1.0, 1.0, 3.0], 0.5).unwrap(), 4.0);
        assert!(source_s([0.0; 4], -1.0).is_err());
        assert_eq!(ds_dh([1.0, 0.0, 0.0, 1.0], 1.0).unwrap(), [0.5, 0.0, 0.0, 0.5]);
        assert_eq!(ds_dh([0.0; 4], 1.0).unwrap(), [0.0; 4]);
    }

    #[test]
    fn ds_dh_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let h: Tensor2 = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
            let f = rng.gen_range(0.1..3.0);
            let d = ds_dh(h, f).unwrap();
            for c in 0..4 {
                let (mut hp, mut hm) = (h, h);
                hp[c] += 1e-6;
                hm[c] -= 1e-6;
                let fd = (source_s(hp, f).unwrap() - source_s(hm, f).unwrap()) / 2e-6;
                assert!((fd - d[c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn densities() {
        let ring = DensityParams::new(DensityFamily::RingBell, &[5.0, 200.0, 0.25]).unwrap();
        assert!((ring.eval([0.25, 0.0]) - 6.0).abs() < 1e-14);
        let bell = DensityParams::new(DensityFamily::RingBell, &[20.0, 200.0, 0.0]).unwrap();
        assert!((bell.eval([0.0, 0.0]) - 21.0).abs() < 1e-14);
        let shock = DensityParams::new(DensityFamily::Shock, &[15.0, 15.0, 3.0]).unwrap();
        assert!((shock.eval([4.5, 0.0]) - 16.0).abs() < 1e-12);
        assert!(DensityParams::new(DensityFamily::Shock, &[15.0, 0.0, 3.0]).is_err());
        assert!(DensityParams::new(DensityFamily::RingBell, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ot_source_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for family in [DensityFamily::RingBell, DensityFamily::Shock] {
            let p = OTProblem {
                density: DensityParams::new(family, &[5.0, 20.0, 0.25]).unwrap(),
                theta: 1.7,
                target: TargetDomain::Box(BoxDomain::CENTERED),
            };
            for _ in 0..20 {
                let q = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
                let (_, d) = ot_source_f(q, &p).unwrap();
                for c in 0..2 {
                    let (mut qp, mut qm) = (q, q);
                    qp[c] += 1e-6;
                    qm[c] -= 1e-6;
                    let fd = (ot_source_f(qp, &p).unwrap().0 - ot_source_f(qm, &p).unwrap().0) / 2e-6;
                    assert!((fd - d[c]).abs() < 1e-7 * (1.0 + fd.abs()), "{fd} {}", d[c]);
                }
            }
        }
        let ring = OTProblem {
            density: DensityParams::new(DensityFamily::RingBell, &[5.0, 200.0, 0.25]).unwrap(),
            theta: 1.2,
            target: TargetDomain::Box(BoxDomain::CENTERED),
        };
        assert!((ot_source_f([0.25, 0.0], &ring).unwrap().0 - 0.2).abs() < 1e-14);
    }

    #[test]
    fn boundary_shapes() {
        let sq = TargetDomain::Box(BoxDomain::CENTERED);
        assert_eq!(boundary_g(&sq, BoundaryTag::Left, [-0.5, 0.3]).unwrap().0, 0.0);
        let cyl = TargetDomain::HalfCylinder;
        assert!(boundary_g(&cyl, BoundaryTag::Circle, [0.6, 0.8]).unwrap().0.abs() < 1e-15);
        assert!(boundary_g(&cyl, BoundaryTag::Left, [0.6, 0.8]).is_err());
        assert!(boundary_g(&sq, BoundaryTag::Ellipse, [0.6, 0.8]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cases = [
            (sq, BoundaryTag::Bottom),
            (sq, BoundaryTag::Right),
            (sq, BoundaryTag::Top),
            (sq, BoundaryTag::Left),
            (cyl, BoundaryTag::Circle),
            (cyl, BoundaryTag::Ellipse),
            (cyl, BoundaryTag::Cut),
        ];
        for (t, tag) in cases {
            for _ in 0..10 {
                let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let (_, d) = boundary_g(&t, tag, q).unwrap();
                for c in 0..2 {
                    let (mut qp, mut qm) = (q, q);
                    qp[c] += 1e-6;
                    qm[c] -= 1e-6;
                    let fd = (boundary_g(&t, tag, qp).unwrap().0 - boundary_g(&t, tag, qm).unwrap().0) / 2e-6;
                    assert!((fd - d[c]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn boundary_gradients_point_outward() {
        // interior points give g < 0
        let sq = TargetDomain::Box(BoxDomain::CENTERED);
        for tag in [BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Top, BoundaryTag::Left] {
            assert!(boundary_g(&sq, tag, [0.1, -0.2]).unwrap().0 < 0.0);
        }
        let cyl = TargetDomain::HalfCylinder;
        for tag in [BoundaryTag::Circle, BoundaryTag::Ellipse, BoundaryTag::Cut] {
            assert!(boundary_g(&cyl, tag, [-1.5, 0.3]).unwrap().0 < 0.0);
        }
    }

    #[test]
    fn examples_satisfy_the_equation() {
        assert!(builtin_example(Example::Ex2 { r: 1.4 }).is_err());
        let e1 = builtin_example(Example::Ex1).unwrap();
        assert_eq!((e1.exact.as_ref().unwrap().u)([0.0, 0.0]), 1.0);
        assert_eq!((e1.f)([0.0, 0.0]), 1.0);
        let e2 = builtin_example(Example::Ex2 { r: 2.0 }).unwrap();
        assert_eq!((e2.exact.as_ref().unwrap().u)([0.0, 0.0]), -2.0);
        assert_eq!((e2.f)([0.0, 0.0]), 0.25);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ex in [
            Example::Ex1,
            Example::Ex2 { r: 2.0 },
            Example::Ex2 { r: std::f64::consts::SQRT_2 + 0.01 },
            Example::Quadratic,
        ] {
            let p = builtin_example(ex).unwrap();
            let ex = p.exact.as_ref().unwrap();
            for _ in 0..20 {
                let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let h = (ex.hess)(x);
                let det = h[0] * h[3] - h[1] * h[2];
                let f = (p.f)(x);
                assert!((det - f).abs() < 1e-9 * f.max(1.0), "{det} {f}");
                // derivatives against finite differences of u and grad u
                let d = 1e-5;
                let g = (ex.grad)(x);
                for c in 0..2 {
                    let (mut xp, mut xm) = (x, x);
                    xp[c] += d;
                    xm[c] -= d;
                    let fd = ((ex.u)(xp) - (ex.u)(xm)) / (2.0 * d);
                    assert!((fd - g[c]).abs() < 1e-6 * (1.0 + g[c].abs()));
                    let (gp, gm) = ((ex.grad)(xp), (ex.grad)(xm));
                    for r in 0..2 {
                        let fd = (gp[r] - gm[r]) / (2.0 * d);
                        let an = h[2 * r + c];
                        assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn theta_values() {
        let m = build_square_mesh(4, ElemKind::Quadrilateral, BoxDomain::CENTERED).unwrap();
        assert!((compute_theta(&DensityParams::uniform(), &m, 2).unwrap() - 1.0).abs() < 1e-14);
        // reference values from adaptive quadrature of the analytic densities
        let m = build_square_mesh(50, ElemKind::Triangle, BoxDomain::CENTERED).unwrap();
        for (c, expect) in [([5.0, 200.0, 0.25], 1.1570796326773083), ([10.0, 200.0, 0.0], 1.1570796326794897)] {
            let d = DensityParams::new(DensityFamily::RingBell, &c).unwrap();
            let t = compute_theta(&d, &m, 3).unwrap();
            assert!((t / expect - 1.0).abs() < 1e-6, "{t}");
        }
        let m = crate::mesh::build_cylinder_mesh(40, 60, 4).unwrap();
        let d = DensityParams::new(DensityFamily::Shock, &[15.0, 15.0, 3.0]).unwrap();
        let t = compute_theta(&d, &m, 4).unwrap();
        assert!((t / 1.1904742154761265 - 1.0).abs() < 1e-6, "{t}");
    }
}
