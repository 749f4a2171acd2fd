//! Acceptance suite: one PASS/FAIL line per criterion, followed by the offending cells.
//!
//! Exits nonzero on failure only when `ACCEPTANCE_STRICT` is set, so that the workspace test run
//! reports the outcome without aborting.

use std::collections::BTreeMap;
use std::time::Instant;

use ma_hdg::analysis::{convergence_order, extract_adapted_mesh, l2_error, ErrorReport};
use ma_hdg::config::{Command, DensityChoice, DomainChoice, RunConfig};
use ma_hdg::hdg::verify::{jacobian_fd_error, random_state, schur_dense_error};
use ma_hdg::hdg::{solve, Discretization, IncrementNorm, Method, SolverConfig};
use ma_hdg::mesh::{build_cylinder_mesh, build_grid_mesh, build_square_mesh, BoxDomain, ElemKind};
use ma_hdg::problems::{builtin_example, DensityFamily, DensityParams, Example, MAProblem, OTProblem, TargetDomain};
use ma_hdg::runner::{adapt_solve, converge_case};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Example 1, triangles, Newton: `[err_u, ord_u, err_q, ord_q, err_H, ord_H]` at n = 4, 8, 16, 32.
const REF_EX1_TRI: [[[f64; 6]; 4]; 3] = [
    [
        [1.37e-3, f64::NAN, 1.12e-2, f64::NAN, 5.75e-1, f64::NAN],
        [1.13e-4, 1.96, 2.73e-3, 2.04, 2.95e-1, 0.97],
        [1.75e-4, 1.80, 1.16e-3, 1.23, 1.49e-1, 0.98],
        [1.37e-4, 1.25, 7.30e-4, 0.67, 7.49e-2, 0.99],
    ],
    [
        [1.29e-4, f64::NAN, 1.01e-3, f64::NAN, 5.82e-2, f64::NAN],
        [4.28e-5, 2.51, 2.44e-4, 2.05, 1.49e-2, 1.96],
        [1.17e-5, 2.21, 6.26e-5, 1.96, 3.78e-3, 1.98],
        [3.03e-6, 2.05, 1.60e-5, 1.97, 9.49e-4, 1.99],
    ],
    [
        [1.62e-6, f64::NAN, 4.22e-5, f64::NAN, 4.37e-3, f64::NAN],
        [3.13e-7, 3.82, 3.23e-6, 3.71, 5.60e-4, 2.96],
        [5.35e-8, 3.60, 3.34e-7, 3.27, 7.04e-5, 2.99],
        [7.59e-9, 3.23, 4.17e-8, 3.00, 8.80e-6, 3.00],
    ],
];

/// Fixed-point iteration counts of Example 1 at n = 4..64: `[p][tri, quad][n]`.
const REF_FP_ITERATIONS: [[[usize; 5]; 2]; 3] = [
    [[30, 36, 40, 42, 44], [37, 40, 43, 44, 44]],
    [[38, 41, 42, 43, 45], [38, 41, 43, 44, 45]],
    [[40, 41, 42, 44, 45], [42, 43, 44, 45, 46]],
];

/// Example 2, Newton: `[err_u, err_q, err_H]` per degree and resolution.
const REF_EX2_R2: [[[f64; 3]; 5]; 3] = [
    [[1.23e-4, 2.30e-3, 9.93e-2], [1.96e-5, 6.25e-4, 5.05e-2], [1.99e-5, 1.92e-4, 2.54e-2], [1.43e-5, 8.47e-5, 1.28e-2], [8.35e-6, 4.43e-5, 6.40e-3]],
    [[8.31e-6, 9.82e-5, 8.54e-3], [2.57e-6, 1.91e-5, 2.24e-3], [7.00e-7, 4.43e-6, 5.69e-4], [1.81e-7, 1.10e-6, 1.43e-4], [4.57e-8, 2.75e-7, 3.60e-5]],
    [[3.16e-7, 5.56e-6, 9.39e-4], [1.01e-8, 3.95e-7, 1.28e-4], [1.57e-9, 2.72e-8, 1.65e-5], [3.19e-10, 2.46e-9, 2.07e-6], [5.28e-11, 3.24e-10, 2.60e-7]],
];
const REF_EX2_R1514: [[[f64; 3]; 5]; 3] = [
    [[1.79e-3, 1.14e-2, 5.27e-1], [4.49e-4, 4.01e-3, 3.46e-1], [6.87e-5, 1.13e-3, 2.01e-1], [3.31e-5, 3.13e-4, 1.09e-1], [2.70e-5, 1.51e-4, 5.64e-2]],
    [[1.35e-4, 1.76e-3, 2.10e-1], [6.99e-5, 6.67e-4, 8.49e-2], [2.04e-5, 2.13e-4, 2.77e-2], [5.23e-6, 5.75e-5, 7.88e-3], [1.32e-6, 1.47e-5, 2.09e-3]],
    [[8.68e-5, 6.98e-4, 8.27e-2], [8.09e-6, 1.12e-4, 2.28e-2], [5.52e-7, 1.23e-5, 4.37e-3], [3.02e-8, 9.56e-7, 6.53e-4], [1.33e-9, 5.98e-8, 8.66e-5]],
];
/// Resolutions 16..128 only.
const REF_EX2_R1424: [[[f64; 3]; 4]; 3] = [
    [[9.17e-4, 1.62e-2, 1.8], [2.41e-4, 7.71e-3, 1.61], [6.28e-5, 3.01e-3, 1.18], [2.45e-5, 9.79e-4, 7.35e-1]],
    [[9.57e-5, 3.19e-3, 1.21], [3.60e-5, 1.33e-3, 7.23e-1], [9.89e-6, 5.37e-4, 3.35e-1], [2.44e-6, 1.56e-4, 1.21e-1]],
    [[1.04e-4, 3.95e-3, 6.84e-1], [1.05e-5, 9.06e-4, 3.28e-1], [8.19e-7, 1.39e-4, 1.06e-1], [5.29e-8, 1.40e-5, 2.29e-2]],
];

const N_T1: [usize; 4] = [4, 8, 16, 32];
const N_T3: [usize; 5] = [4, 8, 16, 32, 64];
const N_T6: [usize; 4] = [16, 32, 64, 128];

type Key = (ElemKind, usize, usize, Method);

struct Suite {
    lines: Vec<(bool, String, Vec<String>)>,
    runs: BTreeMap<(u8, usize, usize, u8), Result<(ErrorReport, usize), String>>,
}

fn kind_id(k: ElemKind) -> u8 {
    match k {
        ElemKind::Triangle => 0,
        ElemKind::Quadrilateral => 1,
    }
}

fn kind_name(k: ElemKind) -> &'static str {
    match k {
        ElemKind::Triangle => "tri",
        ElemKind::Quadrilateral => "quad",
    }
}

fn fp_config() -> SolverConfig {
    SolverConfig {
        fp_norm: IncrementNorm::Coefficient,
        ..SolverConfig::default()
    }
}

fn ratio_ok(ours: f64, reference: f64, factor: f64) -> bool {
    ours > 0.0 && ours <= reference * factor && ours >= reference / factor
}

fn sig3(v: f64) -> String {
    format!("{v:.2e}")
}

impl Suite {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String, notes: Vec<String>) {
        let line = format!("{} {id:>2}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        for n in &notes {
            println!("        {n}");
        }
        self.lines.push((pass, line, notes));
    }

    /// Example 1 run, cached.
    fn ex1(&mut self, (kind, p, n, method): Key) -> Result<(ErrorReport, usize), String> {
        let key = (kind_id(kind), p, n, u8::from(method == Method::FixedPoint));
        self.runs
            .entry(key)
            .or_insert_with(|| {
                let cfg = if method == Method::Newton { SolverConfig::default() } else { fp_config() };
                converge_case(Example::Ex1, kind, p, n, method, &cfg)
                    .map(|(r, log)| (r, log.iterations()))
                    .map_err(|e| e.to_string())
            })
            .clone()
    }
}

fn criterion_1(s: &mut Suite) {
    let t = Instant::now();
    let mut notes = Vec::new();
    let (mut cells, mut bad) = (0, 0);
    for p in 1..=3 {
        let mut prev: Option<ErrorReport> = None;
        for (i, &n) in N_T1.iter().enumerate() {
            let reference = REF_EX1_TRI[p - 1][i];
            match s.ex1((ElemKind::Triangle, p, n, Method::Newton)) {
                Ok((r, _)) => {
                    let errs = [r.err_u, r.err_q, r.err_h];
                    for (c, name) in ["u", "q", "H"].iter().enumerate() {
                        cells += 1;
                        if !ratio_ok(errs[c], reference[2 * c], 1.25) {
                            bad += 1;
                            notes.push(format!("p={p} n={n} err_{name} {:.3e} vs {:.2e} (x{:.2})", errs[c], reference[2 * c], errs[c] / reference[2 * c]));
                        }
                        if n >= 16 {
                            let pe = prev.as_ref().map(|q| [q.err_u, q.err_q, q.err_h][c]).unwrap_or(f64::NAN);
                            let ord = convergence_order(pe, errs[c]).unwrap_or(f64::NAN);
                            cells += 1;
                            if !((ord - reference[2 * c + 1]).abs() <= 0.2) {
                                bad += 1;
                                notes.push(format!("p={p} n={n} ord_{name} {ord:.2} vs {:.2}", reference[2 * c + 1]));
                            }
                        }
                    }
                    prev = Some(r);
                }
                Err(e) => {
                    bad += 1;
                    notes.push(format!("p={p} n={n} solve failed: {e}"));
                }
            }
        }
    }
    let dt = t.elapsed().as_secs_f64();
    s.record(
        1,
        "reference errors (ex1 tri newton)",
        bad == 0 && dt < 120.0,
        format!("{}/{cells} cells within x1.25 / +-0.2, {dt:.1}s", cells - bad),
        notes,
    );
}

fn criterion_2(s: &mut Suite) {
    let mut notes = Vec::new();
    let (mut cells, mut bad) = (0, 0);
    for p in 1..=3 {
        for &n in &N_T1 {
            let a = s.ex1((ElemKind::Triangle, p, n, Method::Newton));
            let b = s.ex1((ElemKind::Triangle, p, n, Method::FixedPoint));
            match (a, b) {
                (Ok((a, _)), Ok((b, _))) => {
                    for (name, x, y) in [("u", a.err_u, b.err_u), ("q", a.err_q, b.err_q), ("H", a.err_h, b.err_h)] {
                        cells += 1;
                        if sig3(x) != sig3(y) {
                            bad += 1;
                            notes.push(format!("p={p} n={n} err_{name} newton {x:.4e} fixed-point {y:.4e}"));
                        }
                    }
                }
                (a, b) => {
                    bad += 1;
                    notes.push(format!("p={p} n={n} solve failed: {:?} {:?}", a.err(), b.err()));
                }
            }
        }
    }
    s.record(
        2,
        "fixed-point errors equal Newton errors to 3 digits",
        bad == 0,
        format!("{}/{cells} cells agree (fixed point stopped on the coefficient norm)", cells - bad),
        notes,
    );
}

fn criterion_3(s: &mut Suite) {
    let mut notes = Vec::new();
    let (mut cells, mut bad) = (0, 0);
    let mut newton_counts = Vec::new();
    for (ki, kind) in [ElemKind::Triangle, ElemKind::Quadrilateral].into_iter().enumerate() {
        for p in 1..=3 {
            let mut row_n = Vec::new();
            let mut row_f = Vec::new();
            for (i, &n) in N_T3.iter().enumerate() {
                cells += 2;
                match s.ex1((kind, p, n, Method::Newton)) {
                    Ok((_, it)) => {
                        newton_counts.push(it);
                        row_n.push(it.to_string());
                        if !(6..=7).contains(&it) {
                            bad += 1;
                        }
                    }
                    Err(e) => {
                        bad += 1;
                        row_n.push(format!("fail({e})"));
                    }
                }
                let reference = REF_FP_ITERATIONS[p - 1][ki][i];
                match s.ex1((kind, p, n, Method::FixedPoint)) {
                    Ok((_, it)) => {
                        let ok = (it as f64 - reference as f64).abs() <= 0.15 * reference as f64;
                        row_f.push(format!("{it}/{reference}{}", if ok { "" } else { "!" }));
                        if !ok {
                            bad += 1;
                        }
                    }
                    Err(e) => {
                        bad += 1;
                        row_f.push(format!("fail/{reference}! ({e})"));
                    }
                }
            }
            notes.push(format!("{} p={p}: newton [{}], fixed-point ours/reference [{}]", kind_name(kind), row_n.join(" "), row_f.join(" ")));
        }
    }
    s.record(
        3,
        "iteration counts",
        bad == 0,
        format!(
            "{}/{cells} cells; newton counts {}..{}",
            cells - bad,
            newton_counts.iter().min().unwrap_or(&0),
            newton_counts.iter().max().unwrap_or(&0)
        ),
        notes,
    );
}

fn criterion_4(s: &mut Suite) {
    let mut notes = Vec::new();
    let (mut cells, mut bad) = (0, 0);
    let mut table: BTreeMap<(usize, usize, usize), [f64; 3]> = BTreeMap::new();
    let cases: [(usize, f64, &[usize], f64); 3] = [(0, 2.0, &N_T3, 1.5), (1, SQRT2 + 0.1, &N_T3, 1.5), (2, SQRT2 + 0.01, &N_T6, 2.0)];
    for (ci, r, ns, factor) in cases {
        for p in 1..=3 {
            for (i, &n) in ns.iter().enumerate() {
                let reference = match ci {
                    0 => REF_EX2_R2[p - 1][i],
                    1 => REF_EX2_R1514[p - 1][i],
                    _ => REF_EX2_R1424[p - 1][i],
                };
                match converge_case(Example::Ex2 { r }, ElemKind::Triangle, p, n, Method::Newton, &SolverConfig::default()) {
                    Ok((rep, _)) => {
                        let errs = [rep.err_u, rep.err_q, rep.err_h];
                        table.insert((ci, p, n), errs);
                        for (c, name) in ["u", "q", "H"].iter().enumerate() {
                            cells += 1;
                            if !ratio_ok(errs[c], reference[c], factor) {
                                bad += 1;
                                notes.push(format!("R#{ci} p={p} n={n} err_{name} {:.3e} vs {:.2e} (x{:.2})", errs[c], reference[c], errs[c] / reference[c]));
                            }
                        }
                    }
                    Err(e) => {
                        bad += 1;
                        notes.push(format!("R#{ci} p={p} n={n} solve failed: {e}"));
                    }
                }
            }
        }
    }
    let mut trend_bad = 0;
    for p in 1..=3 {
        for n in [16, 32, 64] {
            if let (Some(a), Some(b), Some(c)) = (table.get(&(0, p, n)), table.get(&(1, p, n)), table.get(&(2, p, n))) {
                for k in 0..3 {
                    if !(a[k] < b[k] && b[k] < c[k]) {
                        trend_bad += 1;
                        notes.push(format!("trend p={p} n={n} component {k}: {:.2e} {:.2e} {:.2e}", a[k], b[k], c[k]));
                    }
                }
            }
        }
    }
    s.record(
        4,
        "example 2 regularity study",
        bad == 0 && trend_bad == 0,
        format!("{}/{cells} cells within tolerance; {trend_bad} trend violations (R#0=2, R#1=sqrt2+0.1, R#2=sqrt2+0.01)", cells - bad),
        notes,
    );
}

fn criterion_5(s: &mut Suite) {
    let mut notes = Vec::new();
    let mut ok = true;
    for p in 1..=3 {
        let a = s.ex1((ElemKind::Triangle, p, 16, Method::Newton));
        let b = s.ex1((ElemKind::Triangle, p, 32, Method::Newton));
        let ord = match (a, b) {
            (Ok((a, _)), Ok((b, _))) => convergence_order(a.err_h, b.err_h).unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        let pass = (ord - p as f64).abs() <= 0.2;
        ok &= pass;
        notes.push(format!("p={p}: H order {ord:.3}"));
    }
    s.record(5, "Hessian order at n=32 within 0.2 of p", ok, notes.join(", "), Vec::new());
}

fn criterion_6(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
        for p in [2, 3] {
            for n in [2, 4] {
                let problem = builtin_example(Example::Quadratic).unwrap();
                let exact = problem.exact.clone().unwrap();
                let disc = Discretization::new(&build_square_mesh(n, kind, BoxDomain::UNIT).unwrap(), p).unwrap();
                for method in [Method::Newton, Method::FixedPoint] {
                    match solve(&MAProblem::Dirichlet(problem.clone()), &disc, &SolverConfig::default(), method) {
                        Ok((st, _)) => {
                            let r = l2_error(&st, &exact, &disc, n);
                            worst = worst.max(r.err_u).max(r.err_q).max(r.err_h);
                        }
                        Err(e) => notes.push(format!("{} p={p} n={n} {}: {e}", kind_name(kind), method.name())),
                    }
                }
            }
        }
    }
    s.record(6, "quadratic exactness", notes.is_empty() && worst <= 1e-8, format!("max L2 error {worst:.2e} (<= 1e-8)"), notes);
}

fn ring_density() -> DensityParams {
    DensityParams::new(DensityFamily::RingBell, &[5.0, 10.0, 0.25]).unwrap()
}

fn box_ot(kind: ElemKind, p: usize, density: DensityParams) -> (Discretization, MAProblem) {
    let mesh = build_square_mesh(2, kind, BoxDomain::CENTERED).unwrap();
    let problem = OTProblem::new(density, TargetDomain::Box(BoxDomain::CENTERED), &mesh, p).unwrap();
    (Discretization::new(&mesh, p).unwrap(), MAProblem::Ot(problem))
}

fn criterion_7(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
        for p in 1..=3 {
            let disc = Discretization::new(&build_square_mesh(2, kind, BoxDomain::UNIT).unwrap(), p).unwrap();
            let dir = MAProblem::Dirichlet(builtin_example(Example::Ex1).unwrap());
            let (odisc, ot) = box_ot(kind, p, ring_density());
            for (mode, d, prob, seed) in [("dirichlet", &disc, &dir, 10 + p as u64), ("ot", &odisc, &ot, 20 + p as u64)] {
                match jacobian_fd_error(d, prob, &random_state(d, seed, 0.05), 1.0) {
                    Ok(e) => worst = worst.max(e),
                    Err(e) => notes.push(format!("{mode} {} p={p}: {e}", kind_name(kind))),
                }
            }
        }
    }
    s.record(7, "Jacobian vs central differences", notes.is_empty() && worst <= 1e-5, format!("max relative error {worst:.2e} (<= 1e-5)"), notes);
}

fn criterion_8(s: &mut Suite) {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
        for p in 1..=3 {
            let disc = Discretization::new(&build_square_mesh(2, kind, BoxDomain::UNIT).unwrap(), p).unwrap();
            let dir = MAProblem::Dirichlet(builtin_example(Example::Ex1).unwrap());
            let (odisc, ot) = box_ot(kind, p, ring_density());
            for (mode, d, prob, seed) in [("dirichlet", &disc, &dir, 30 + p as u64), ("ot", &odisc, &ot, 40 + p as u64)] {
                match schur_dense_error(d, prob, &random_state(d, seed, 0.05), 1.0) {
                    Ok(e) => worst = worst.max(e),
                    Err(e) => notes.push(format!("{mode} {} p={p}: {e}", kind_name(kind))),
                }
            }
        }
    }
    let mesh = build_cylinder_mesh(2, 2, 2).unwrap();
    let density = DensityParams::new(DensityFamily::Shock, &[5.0, 5.0, 3.0]).unwrap();
    let cyl = MAProblem::Ot(OTProblem::new(density, TargetDomain::HalfCylinder, &mesh, 2).unwrap());
    let disc = Discretization::new(&mesh, 2).unwrap();
    match schur_dense_error(&disc, &cyl, &random_state(&disc, 50, 0.05), 1.0) {
        Ok(e) => worst = worst.max(e),
        Err(e) => notes.push(format!("cylinder: {e}")),
    }
    s.record(8, "condensed solve vs dense monolithic solve", notes.is_empty() && worst <= 1e-9, format!("max relative difference {worst:.2e} (<= 1e-9)"), notes);
}

fn criterion_9(s: &mut Suite) {
    let (mut disp, mut mean, mut lambda): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut notes = Vec::new();
    let mut ok_all = true;
    for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
        for p in [1, 2, 3] {
            let mesh = build_grid_mesh(4, 4, kind, BoxDomain::CENTERED, 1).unwrap();
            let problem = OTProblem::new(DensityParams::uniform(), TargetDomain::Box(BoxDomain::CENTERED), &mesh, p).unwrap();
            let disc = Discretization::new(&mesh, p).unwrap();
            for method in [Method::Newton, Method::FixedPoint] {
                let res = solve(&MAProblem::Ot(problem), &disc, &SolverConfig::default(), method);
                match res.map_err(|e| e.to_string()).and_then(|(st, log)| {
                    extract_adapted_mesh(&st, &disc, &problem).map(|am| (st, log, am)).map_err(|e| e.to_string())
                }) {
                    Ok((st, log, am)) => {
                        let m: f64 = (0..mesh.num_elements())
                            .map(|e| st.u(e).iter().zip(&disc.elems[e].integral).map(|(a, b)| a * b).sum::<f64>())
                            .sum();
                        if p == 1 {
                            // |x|^2/2 is outside the degree-1 space, so p=1 is reported only
                            notes.push(format!(
                                "{} p=1 {} (not gated): displacement {:.1e}, |lambda| {:.1e}",
                                kind_name(kind),
                                method.name(),
                                am.max_displacement(),
                                log.final_lambda().abs()
                            ));
                            continue;
                        }
                        disp = disp.max(am.max_displacement());
                        lambda = lambda.max(log.final_lambda().abs());
                        mean = mean.max(m.abs());
                    }
                    Err(e) => {
                        ok_all = false;
                        notes.push(format!("{} p={p} {}: {e}", kind_name(kind), method.name()))
                    }
                }
            }
        }
    }
    s.record(
        9,
        "uniform density gives the identity map (p >= 2)",
        ok_all && disp <= 1e-6 && mean <= 1e-10 && lambda <= 1e-8,
        format!("node displacement {disp:.1e} (<= 1e-6), |int u| {mean:.1e} (<= 1e-10), |lambda| {lambda:.1e} (<= 1e-8)"),
        notes,
    );
}

/// Equidistribution residuals of the ring runs keyed by grid size.
fn criteria_10_11(s: &mut Suite) {
    let mut eq = BTreeMap::new();
    let mut notes = Vec::new();
    let mut ok = true;
    let cases = [
        ("ring 50x50x2 tri p=3", DomainChoice::Square, DensityChoice::Ring, vec![5.0, 200.0, 0.25], [50, 50], ElemKind::Triangle, 3),
        ("shock 40x60 cylinder p=4", DomainChoice::Cylinder, DensityChoice::Shock, vec![15.0, 15.0, 3.0], [40, 60], ElemKind::Quadrilateral, 4),
        ("ring 25x25x2 tri p=3", DomainChoice::Square, DensityChoice::Ring, vec![5.0, 200.0, 0.25], [25, 25], ElemKind::Triangle, 3),
    ];
    for (label, domain, density, coef, grid, elem, p) in cases {
        let cfg = RunConfig {
            domain,
            density,
            coef,
            grid,
            elem,
            degrees: vec![p],
            ..RunConfig::for_command(Command::Adapt)
        };
        let t = Instant::now();
        let solved = adapt_solve(&cfg);
        let dt = t.elapsed().as_secs_f64();
        let res = solved.map_err(|e| e.to_string()).and_then(|sv| {
            let am = extract_adapted_mesh(&sv.state, &sv.disc, &sv.problem).map_err(|e| e.to_string())?;
            let r = ma_hdg::analysis::equidistribution_residual(&sv.state, &sv.problem, &sv.disc);
            Ok((sv, am, r))
        });
        let counted = grid != [25, 25];
        match res {
            Ok((sv, am, r)) => {
                eq.insert(grid[0], r);
                let iters = sv.log.iterations();
                let total: usize = sv.stages.iter().map(|st| st.iterations).sum();
                let pass = am.min_jacobian > 0.0 && am.raw_boundary_residual <= 1e-6 && iters <= 20 && dt < 300.0;
                if counted {
                    ok &= pass;
                }
                notes.push(format!(
                    "{label}: {} min J {:.2e}, max |g(q_h)| {:.2e}, newton {iters}{}, {dt:.1}s, equidistribution {r:.3e}",
                    if pass { "ok" } else { "FAILED" },
                    am.min_jacobian,
                    am.raw_boundary_residual,
                    if sv.stages.is_empty() {
                        String::new()
                    } else {
                        format!(" in final stage ({} continuation stages, {total} total)", sv.stages.len())
                    }
                ));
            }
            Err(e) => {
                if counted {
                    ok = false;
                }
                notes.push(format!("{label}: FAILED {e} ({dt:.1}s)"));
            }
        }
    }
    let (ten, tail) = notes.split_at(2);
    s.record(10, "adapted mesh validity (ring, shock)", ok, "valid mesh, |g| <= 1e-6, <= 20 newton steps, < 5 min".into(), ten.to_vec());
    let (coarse, fine) = (eq.get(&25), eq.get(&50));
    let pass = matches!((coarse, fine), (Some(c), Some(f)) if f < c);
    s.record(
        11,
        "equidistribution residual decreases 25x25 -> 50x50",
        pass,
        format!("{:.3e} -> {:.3e}", coarse.copied().unwrap_or(f64::NAN), fine.copied().unwrap_or(f64::NAN)),
        tail.to_vec(),
    );
}

fn main() {
    let t = Instant::now();
    let mut s = Suite {
        lines: Vec::new(),
        runs: BTreeMap::new(),
    };
    criterion_6(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    criterion_1(&mut s);
    criterion_2(&mut s);
    criterion_5(&mut s);
    criterion_3(&mut s);
    criterion_4(&mut s);
    criteria_10_11(&mut s);

    let mut lines: Vec<_> = s.lines.iter().map(|l| l.1.clone()).collect();
    lines.sort_by_key(|l| l[5..7].trim().parse::<usize>().unwrap_or(0));
    println!("\nsummary ({:.0}s):", t.elapsed().as_secs_f64());
    for l in &lines {
        println!("{l}");
    }
    let failed = s.lines.iter().filter(|l| !l.0).count();
    println!("{} passed, {failed} failed", s.lines.len() - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
