//! Convergence studies, mesh adaptation runs and the self-test suite behind the command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{equidistribution_residual, extract_adapted_mesh, l2_error, ErrorReport};
use crate::config::{elem_name, Command, ContinuationChoice, DensityChoice, DomainChoice, ExampleId, MethodChoice, RunConfig};
use crate::error::{Error, Result};
use crate::hdg::verify::{jacobian_fd_error, random_state, schur_dense_error};
use crate::hdg::{
    continuation_solve, fixed_point_solve, newton_solve, solve, ContinuationStage, Discretization, FieldState,
    IterationLog, Method, SolverConfig, Q_BLOCK, U_BLOCK,
};
use crate::mesh::{build_cylinder_mesh, build_grid_mesh, build_square_mesh, BoxDomain, ElemKind, Mesh};
use crate::output::{average_to_nodes, error_table_csv, write_text, write_vtk, PointField};
use crate::problems::{builtin_example, DensityFamily, DensityParams, Example, MAProblem, OTProblem, TargetDomain};
use crate::quadrature::element_rule;

/// Environment variable overriding the output root directory.
pub const OUT_ENV: &str = "MA_HDG_OUT";

/// Files written by a run plus the failures it encountered.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
    /// Human-readable summary for the terminal.
    pub summary: String,
}

impl RunOutcome {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_text(&path, contents)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn write_vtk(&mut self, name: &str, mesh: &Mesh, title: &str, fields: &[PointField]) -> Result<()> {
        write_vtk(mesh, title, fields, &self.dir.join(name))?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        let mut m = String::new();
        for f in &self.files {
            let _ = writeln!(m, "{}", f.display());
        }
        m.push_str("manifest.txt\n");
        write_text(&self.dir.join("manifest.txt"), &m)?;
        self.files.push(PathBuf::from("manifest.txt"));
        Ok(())
    }
}

/// Output root: `MA_HDG_OUT` when set, otherwise the configured directory.
pub fn output_root(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => config.out_dir.clone(),
    }
}

/// Validates `config` and runs its command under `root/<run name>`.
pub fn run(config: &RunConfig, root: &Path) -> Result<RunOutcome> {
    let mut config = config.clone();
    config.normalize();
    config.validate()?;
    let config = &config;
    let mut out = RunOutcome {
        dir: root.join(config.run_name()),
        ..Default::default()
    };
    std::fs::create_dir_all(&out.dir).map_err(|e| Error::io(&out.dir, e))?;
    out.write("config.txt", &config.to_text())?;
    match config.command {
        Command::Converge => converge(config, &mut out)?,
        Command::Adapt => adapt(config, &mut out)?,
        Command::Selftest => {
            let report = selftest(config.tau);
            out.write("selftest.txt", &report.to_text())?;
            out.summary = report.to_text();
            out.failures = report.failed().map(|c| c.name.clone()).collect();
        }
    }
    out.finish()?;
    Ok(out)
}

fn example_of(config: &RunConfig) -> Example {
    match config.example {
        ExampleId::Ex1 => Example::Ex1,
        ExampleId::Ex2 => Example::Ex2 { r: config.radius },
    }
}

fn methods_of(choice: MethodChoice) -> Vec<Method> {
    match choice {
        MethodChoice::Newton => vec![Method::Newton],
        MethodChoice::FixedPoint => vec![Method::FixedPoint],
        MethodChoice::Both => vec![Method::Newton, Method::FixedPoint],
    }
}

/// One Dirichlet solve of a convergence study.
pub fn converge_case(
    example: Example,
    kind: ElemKind,
    p: usize,
    n: usize,
    method: Method,
    config: &SolverConfig,
) -> Result<(ErrorReport, IterationLog)> {
    let problem = builtin_example(example)?;
    let exact = problem.exact.clone().expect("built-in examples carry their exact solution");
    let mesh = build_square_mesh(n, kind, problem.domain)?;
    let disc = Discretization::new(&mesh, p)?;
    let (state, log) = solve(&MAProblem::Dirichlet(problem), &disc, config, method)?;
    Ok((l2_error(&state, &exact, &disc, n), log))
}

/// Iteration-count table: one row per resolution, one column per
/// method and degree. Failed runs are left empty.
pub fn iteration_table_csv(
    methods: &[Method],
    degrees: &[usize],
    resolutions: &[usize],
    count: impl Fn(Method, usize, usize) -> Option<usize>,
) -> String {
    let mut s = String::from("n");
    for m in methods {
        for p in degrees {
            let _ = write!(s, ",{}_p{p}", m.name());
        }
    }
    s.push('\n');
    for &n in resolutions {
        let _ = write!(s, "{n}");
        for &m in methods {
            for &p in degrees {
                let _ = write!(s, ",{}", count(m, p, n).map_or(String::new(), |c| c.to_string()));
            }
        }
        s.push('\n');
    }
    s
}

fn converge(config: &RunConfig, out: &mut RunOutcome) -> Result<()> {
    let example = example_of(config);
    let solver = config.solver_config();
    let methods = methods_of(config.method);
    let jobs: Vec<(Method, usize, usize)> = methods
        .iter()
        .flat_map(|&m| config.degrees.iter().flat_map(move |&p| config.resolutions.iter().map(move |&n| (m, p, n))))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(m, p, n)| {
            let t = Instant::now();
            (converge_case(example, config.elem, p, n, m, &solver), t.elapsed())
        })
        .collect();

    let mut summary = String::new();
    for (&(m, p, n), (res, dt)) in jobs.iter().zip(&results) {
        match res {
            Ok((r, log)) => {
                let _ = writeln!(
                    summary,
                    "{:<11} p={p} n={n:<4} iters={:<4} err_u={:.3e} err_q={:.3e} err_H={:.3e} ({:.2}s)",
                    m.name(),
                    log.iterations(),
                    r.err_u,
                    r.err_q,
                    r.err_h,
                    dt.as_secs_f64()
                );
                out.write(&format!("log_{}_p{p}_n{n}.csv", m.name()), &log.to_csv())?;
            }
            Err(e) => {
                let _ = writeln!(summary, "{:<11} p={p} n={n:<4} FAILED: {e}", m.name());
                out.failures.push(format!("{} p={p} n={n}: {e}", m.name()));
            }
        }
    }
    for &m in &methods {
        let reports: Vec<ErrorReport> = jobs
            .iter()
            .zip(&results)
            .filter(|(j, _)| j.0 == m)
            .filter_map(|(_, (r, _))| r.as_ref().ok().map(|(rep, _)| *rep))
            .collect();
        out.write(&format!("errors_{}.csv", m.name()), &error_table_csv(&reports))?;
    }
    let table = iteration_table_csv(&methods, &config.degrees, &config.resolutions, |m, p, n| {
        let k = jobs.iter().position(|j| *j == (m, p, n))?;
        results[k].0.as_ref().ok().map(|(_, log)| log.iterations())
    });
    out.write("iterations.csv", &table)?;
    out.summary = summary;
    Ok(())
}

/// Density parameters for a configured family and coefficients.
pub fn density_of(choice: DensityChoice, coef: &[f64]) -> Result<DensityParams> {
    let family = match choice {
        DensityChoice::Uniform => DensityFamily::Uniform,
        DensityChoice::Ring | DensityChoice::Bell => DensityFamily::RingBell,
        DensityChoice::Shock => DensityFamily::Shock,
    };
    DensityParams::new(family, coef)
}

/// Background mesh and target domain of an adaptation run. The square is `(-1/2, 1/2)^2` with an
/// `nx x ny` grid; the cylinder grid has `nx` cells radially and `ny` along the angle.
pub fn adapt_domain(domain: DomainChoice, grid: [usize; 2], kind: ElemKind, p: usize) -> Result<(Mesh, TargetDomain)> {
    match domain {
        DomainChoice::Square => Ok((
            build_grid_mesh(grid[0], grid[1], kind, BoxDomain::CENTERED, 1)?,
            TargetDomain::Box(BoxDomain::CENTERED),
        )),
        DomainChoice::Cylinder => Ok((build_cylinder_mesh(grid[0], grid[1], p)?, TargetDomain::HalfCylinder)),
    }
}

/// Result of an optimal-transport solve used for mesh adaptation.
#[derive(Debug, Clone)]
pub struct AdaptSolve {
    pub problem: OTProblem,
    pub disc: Discretization,
    pub state: FieldState,
    /// Log of the final solve (the last continuation stage when continuation was used).
    pub log: IterationLog,
    pub stages: Vec<ContinuationStage>,
}

/// Iterations allowed per intermediate continuation stage.
pub const CONTINUATION_STAGE_ITER: usize = 8;

/// Solves the optimal-transport problem of an adaptation run.
pub fn adapt_solve(config: &RunConfig) -> Result<AdaptSolve> {
    let p = config.degrees[0];
    let (mesh, target) = adapt_domain(config.domain, config.grid, config.elem, p)?;
    let density = density_of(config.density, &config.coef)?;
    let problem = OTProblem::new(density, target, &mesh, p)?;
    let disc = Discretization::new(&mesh, p)?;
    let solver = config.solver_config();
    let continuation = match config.continuation {
        ContinuationChoice::On => density.family != DensityFamily::Uniform,
        ContinuationChoice::Off => false,
        ContinuationChoice::Auto => density.family == DensityFamily::Shock,
    };
    let (state, log, stages) = if continuation {
        if config.method != MethodChoice::Newton {
            return Err(Error::InvalidArgument("continuation runs the Newton method".into()));
        }
        continuation_solve(&problem, &disc, &solver, CONTINUATION_STAGE_ITER)?
    } else {
        let init = FieldState::initial_guess(&disc);
        let ma = MAProblem::Ot(problem);
        let (s, l) = match config.method {
            MethodChoice::Newton => newton_solve(&ma, &disc, &solver, init)?,
            MethodChoice::FixedPoint => fixed_point_solve(&ma, &disc, &solver, init)?,
            MethodChoice::Both => return Err(Error::InvalidArgument("adapt runs a single method".into())),
        };
        (s, l, Vec::new())
    };
    Ok(AdaptSolve {
        problem,
        disc,
        state,
        log,
        stages,
    })
}

fn adapt(config: &RunConfig, out: &mut RunOutcome) -> Result<()> {
    let t = Instant::now();
    let solved = match adapt_solve(config) {
        Ok(s) => s,
        Err(e @ Error::InvalidArgument(_)) => return Err(e),
        Err(e) => {
            out.failures.push(format!("solve: {e}"));
            out.summary = format!("solve failed: {e}\n");
            return Ok(());
        }
    };
    let elapsed = t.elapsed();
    let AdaptSolve {
        problem,
        disc,
        state,
        log,
        stages,
    } = &solved;
    out.write("log.csv", &log.to_csv())?;
    if !stages.is_empty() {
        let mut s = String::from("stage,s,c1,c2,c3,iterations\n");
        for (i, st) in stages.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:.6},{:?},{:?},{:?},{}",
                i + 1,
                st.s,
                st.coef[0],
                st.coef[1],
                st.coef[2],
                st.iterations
            );
        }
        out.write("continuation.csv", &s)?;
    }

    let background = disc.mesh.elevate(disc.degree())?;
    let u = average_to_nodes(&background, state, U_BLOCK);
    let q0 = average_to_nodes(&background, state, Q_BLOCK);
    let q1 = average_to_nodes(&background, state, Q_BLOCK + 1);
    let q: Vec<[f64; 2]> = q0.iter().zip(&q1).map(|(a, b)| [*a, *b]).collect();
    let fields = [PointField::Scalar("u".into(), u), PointField::Vector("q".into(), q)];
    out.write_vtk("background.vtk", &background, "background mesh with potential and gradient", &fields)?;

    let eq = equidistribution_residual(state, problem, disc);
    let mut report = String::new();
    let _ = writeln!(report, "theta = {:.12e}", problem.theta);
    let _ = writeln!(report, "iterations = {}", log.iterations());
    let _ = writeln!(
        report,
        "total_iterations = {}",
        if stages.is_empty() { log.iterations() } else { stages.iter().map(|s| s.iterations).sum() }
    );
    let _ = writeln!(report, "continuation_stages = {}", stages.len());
    let _ = writeln!(report, "lambda = {:.6e}", log.final_lambda());
    let _ = writeln!(report, "equidistribution_residual = {eq:.6e}");
    match extract_adapted_mesh(state, disc, problem) {
        Ok(am) => {
            let _ = writeln!(report, "valid = true");
            let _ = writeln!(report, "min_jacobian = {:.6e}", am.min_jacobian);
            let _ = writeln!(report, "raw_boundary_residual = {:.6e}", am.raw_boundary_residual);
            let _ = writeln!(report, "boundary_residual = {:.6e}", am.boundary_residual);
            let _ = writeln!(report, "area = {:.12e}", am.area());
            let _ = writeln!(report, "target_area = {:.12e}", problem.target.area());
            let _ = writeln!(report, "min_element_area = {:.6e}", am.min_element_area());
            let _ = writeln!(report, "max_disagreement = {:.6e}", am.max_disagreement);
            let _ = writeln!(report, "max_displacement = {:.6e}", am.max_displacement());
            let averaged: Vec<f64> = am.averaged.iter().map(|&a| f64::from(u8::from(a))).collect();
            out.write_vtk(
                "adapted.vtk",
                &am.mesh,
                "adapted mesh",
                &[PointField::Scalar("averaged".into(), averaged)],
            )?;
        }
        Err(e) => {
            let _ = writeln!(report, "valid = false");
            let _ = writeln!(report, "error = {e}");
            out.failures.push(format!("adapted mesh: {e}"));
        }
    }
    out.write("report.txt", &report)?;
    out.summary = format!("{report}solve_seconds = {:.2}\n", elapsed.as_secs_f64());
    Ok(())
}

/// One self-test check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

fn within(v: f64, tol: f64) -> (bool, String) {
    (v <= tol, format!("{v:.3e} <= {tol:.0e}"))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn quadrature_exactness() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for strength in 1..=17usize {
        for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
            let (pts, wts) = element_rule(kind, strength);
            for i in 0..=strength as u32 {
                for j in 0..=(strength as u32 - i) {
                    let q: f64 = pts
                        .iter()
                        .zip(&wts)
                        .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32))
                        .sum();
                    let exact = match kind {
                        ElemKind::Triangle => factorial(i) * factorial(j) / factorial(i + j + 2),
                        ElemKind::Quadrilateral => 1.0 / f64::from((i + 1) * (j + 1)),
                    };
                    worst = worst.max((q - exact).abs());
                }
            }
        }
    }
    Ok(within(worst, 1e-13))
}

fn box_ot(kind: ElemKind, p: usize, density: DensityParams) -> Result<(Discretization, MAProblem)> {
    let mesh = build_square_mesh(2, kind, BoxDomain::CENTERED)?;
    let problem = OTProblem::new(density, TargetDomain::Box(BoxDomain::CENTERED), &mesh, p)?;
    Ok((Discretization::new(&mesh, p)?, MAProblem::Ot(problem)))
}

fn ring() -> DensityParams {
    DensityParams {
        family: DensityFamily::RingBell,
        coef: [5.0, 10.0, 0.25],
    }
}

/// Runs the fast invariant suite with stabilization `tau`.
pub fn selftest(tau: f64) -> SelftestReport {
    let solver = SolverConfig {
        tau,
        newton_tol: 1e-12,
        ..SolverConfig::default()
    };
    let mut checks = vec![check("quadrature exactness (strength 1..17)", quadrature_exactness)];
    checks.push(check("jacobian vs finite differences, dirichlet tri p=2", || {
        let disc = Discretization::new(&build_square_mesh(2, ElemKind::Triangle, BoxDomain::UNIT)?, 2)?;
        let p = MAProblem::Dirichlet(builtin_example(Example::Ex1)?);
        Ok(within(jacobian_fd_error(&disc, &p, &random_state(&disc, 1, 0.1), tau)?, 1e-6))
    }));
    checks.push(check("jacobian vs finite differences, transport quad p=2", || {
        let (disc, p) = box_ot(ElemKind::Quadrilateral, 2, ring())?;
        Ok(within(jacobian_fd_error(&disc, &p, &random_state(&disc, 2, 0.05), tau)?, 1e-6))
    }));
    checks.push(check("jacobian vs finite differences, curved cylinder p=2", || {
        let mesh = build_cylinder_mesh(2, 2, 2)?;
        let density = DensityParams::new(DensityFamily::Shock, &[5.0, 5.0, 3.0])?;
        let p = MAProblem::Ot(OTProblem::new(density, TargetDomain::HalfCylinder, &mesh, 2)?);
        let disc = Discretization::new(&mesh, 2)?;
        Ok(within(jacobian_fd_error(&disc, &p, &random_state(&disc, 3, 0.05), tau)?, 1e-6))
    }));
    for kind in [ElemKind::Triangle, ElemKind::Quadrilateral] {
        checks.push(check(&format!("condensed vs dense solve, dirichlet {}", elem_name(kind)), || {
            let disc = Discretization::new(&build_square_mesh(2, kind, BoxDomain::UNIT)?, 2)?;
            let p = MAProblem::Dirichlet(builtin_example(Example::Ex1)?);
            Ok(within(schur_dense_error(&disc, &p, &random_state(&disc, 3, 0.1), tau)?, 1e-9))
        }));
        checks.push(check(&format!("condensed vs dense solve, bordered transport {}", elem_name(kind)), || {
            let (disc, p) = box_ot(kind, 2, ring())?;
            Ok(within(schur_dense_error(&disc, &p, &random_state(&disc, 4, 0.05), tau)?, 1e-9))
        }));
        checks.push(check(&format!("quadratic reproduction, newton {} p=2", elem_name(kind)), || {
            let disc = Discretization::new(&build_square_mesh(3, kind, BoxDomain::UNIT)?, 2)?;
            let p = MAProblem::Dirichlet(builtin_example(Example::Quadratic)?);
            let init = FieldState::interpolate(&disc, |x| x[0] + 0.3, |_| [1.0, 0.0], |_| [0.5, 0.0, 0.0, 0.5]);
            let (s, _) = newton_solve(&p, &disc, &solver, init)?;
            let mut worst: f64 = 0.0;
            for (e, ed) in disc.elems.iter().enumerate() {
                for (l, x) in ed.nodes.iter().enumerate() {
                    worst = worst
                        .max((s.u(e)[l] - 0.5 * (x[0] * x[0] + x[1] * x[1])).abs())
                        .max((s.q(e, 0)[l] - x[0]).abs())
                        .max((s.q(e, 1)[l] - x[1]).abs())
                        .max((s.h(e, 0)[l] - 1.0).abs())
                        .max(s.h(e, 1)[l].abs())
                        .max(s.h(e, 2)[l].abs())
                        .max((s.h(e, 3)[l] - 1.0).abs());
                }
            }
            Ok(within(worst, 1e-8))
        }));
        checks.push(check(&format!("uniform density identity map, {}", elem_name(kind)), || {
            let (disc, p) = box_ot(kind, 2, DensityParams::uniform())?;
            let (s, log) = newton_solve(&p, &disc, &solver, FieldState::initial_guess(&disc))?;
            let mut worst = log.final_lambda().abs();
            for (e, ed) in disc.elems.iter().enumerate() {
                for (l, x) in ed.nodes.iter().enumerate() {
                    worst = worst.max((s.q(e, 0)[l] - x[0]).abs()).max((s.q(e, 1)[l] - x[1]).abs());
                }
            }
            Ok(within(worst, 1e-8))
        }));
    }
    SelftestReport { checks }
}
