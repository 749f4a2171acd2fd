use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ma_hdg::analysis::{convergence_order, equidistribution_residual, extract_adapted_mesh};
use ma_hdg::config::{parse_elem, Command, RunConfig};
use ma_hdg::hdg::Method;
use ma_hdg::mesh::{build_cylinder_mesh, build_grid_mesh, BoxDomain};
use ma_hdg::problems::Example;
use ma_hdg::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::UnknownTag(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn method_of(name: &str) -> PyResult<Method> {
    match name {
        "newton" => Ok(Method::Newton),
        "fixed-point" | "fixed_point" => Ok(Method::FixedPoint),
        _ => Err(PyValueError::new_err(format!("unknown method '{name}'"))),
    }
}

/// Straight-sided or curved high-order mesh.
#[pyclass(module = "ma_hdg", frozen)]
struct Mesh {
    inner: ma_hdg::mesh::Mesh,
}

#[pymethods]
impl Mesh {
    /// `nx` x `ny` grid of the unit square (`centered=False`) or of (-1/2, 1/2)^2.
    #[staticmethod]
    #[pyo3(signature = (nx, ny, elem = "tri", centered = false, degree = 1))]
    fn grid(nx: usize, ny: usize, elem: &str, centered: bool, degree: usize) -> PyResult<Self> {
        let domain = if centered { BoxDomain::CENTERED } else { BoxDomain::UNIT };
        let inner = build_grid_mesh(nx, ny, parse_elem(elem).map_err(to_py)?, domain, degree).map_err(to_py)?;
        Ok(Mesh { inner })
    }

    /// Half-cylinder annulus with `n_r` radial and `n_t` angular cells.
    #[staticmethod]
    #[pyo3(signature = (n_r, n_t, degree = 1))]
    fn cylinder(n_r: usize, n_t: usize, degree: usize) -> PyResult<Self> {
        Ok(Mesh {
            inner: build_cylinder_mesh(n_r, n_t, degree).map_err(to_py)?,
        })
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements()
    }

    #[getter]
    fn num_faces(&self) -> usize {
        self.inner.num_faces()
    }

    #[getter]
    fn num_boundary_faces(&self) -> usize {
        self.inner.boundary_faces().count()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.geometric_degree
    }

    #[getter]
    fn nodes(&self) -> Vec<(f64, f64)> {
        self.inner.node_coords.iter().map(|x| (x[0], x[1])).collect()
    }

    #[getter]
    fn elements(&self) -> Vec<Vec<usize>> {
        self.inner.elem_nodes.clone()
    }

    /// Legacy VTK text of the mesh.
    fn to_vtk(&self) -> PyResult<String> {
        ma_hdg::output::vtk_string(&self.inner, "mesh", &[]).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh({:?}, elements={}, degree={})",
            self.inner.kind,
            self.inner.num_elements(),
            self.inner.geometric_degree
        )
    }
}

/// Errors and iteration count of one Dirichlet solve.
#[pyclass(module = "ma_hdg", frozen, get_all)]
struct ConvergeResult {
    p: usize,
    n: usize,
    err_u: f64,
    err_q: f64,
    err_h: f64,
    iterations: usize,
}

#[pymethods]
impl ConvergeResult {
    fn __repr__(&self) -> String {
        format!(
            "ConvergeResult(p={}, n={}, err_u={:.3e}, err_q={:.3e}, err_h={:.3e}, iterations={})",
            self.p, self.n, self.err_u, self.err_q, self.err_h, self.iterations
        )
    }
}

/// Solves a built-in Dirichlet example on an `n` x `n` grid and measures the L2 errors.
#[pyfunction]
#[pyo3(signature = (example = "ex1", p = 2, n = 4, elem = "tri", method = "newton", radius = 2.0, tau = 1.0))]
#[allow(clippy::too_many_arguments)]
fn converge_case(
    py: Python<'_>,
    example: &str,
    p: usize,
    n: usize,
    elem: &str,
    method: &str,
    radius: f64,
    tau: f64,
) -> PyResult<ConvergeResult> {
    let ex = match example {
        "ex1" => Example::Ex1,
        "ex2" => Example::Ex2 { r: radius },
        _ => return Err(PyValueError::new_err(format!("unknown example '{example}'"))),
    };
    let kind = parse_elem(elem).map_err(to_py)?;
    let method = method_of(method)?;
    let config = ma_hdg::hdg::SolverConfig {
        tau,
        ..Default::default()
    };
    config.validate().map_err(to_py)?;
    let (r, log) = py
        .detach(|| ma_hdg::runner::converge_case(ex, kind, p, n, method, &config))
        .map_err(to_py)?;
    Ok(ConvergeResult {
        p,
        n,
        err_u: r.err_u,
        err_q: r.err_q,
        err_h: r.err_h,
        iterations: log.iterations(),
    })
}

/// Outcome of an optimal-transport mesh adaptation.
#[pyclass(module = "ma_hdg", frozen, get_all)]
struct Adaptation {
    theta: f64,
    iterations: usize,
    continuation_stages: usize,
    equidistribution_residual: f64,
    min_jacobian: f64,
    raw_boundary_residual: f64,
    area: f64,
    min_element_area: f64,
    max_displacement: f64,
    nodes: Vec<(f64, f64)>,
    background_nodes: Vec<(f64, f64)>,
    elements: Vec<Vec<usize>>,
}

#[pymethods]
impl Adaptation {
    fn __repr__(&self) -> String {
        format!(
            "Adaptation(iterations={}, min_jacobian={:.3e}, equidistribution_residual={:.3e})",
            self.iterations, self.min_jacobian, self.equidistribution_residual
        )
    }
}

/// Solves the optimal-transport problem for `density` and extracts the adapted mesh.
#[pyfunction]
#[pyo3(signature = (density = "uniform", coef = Vec::new(), grid = (10, 10), elem = "tri", p = 3, domain = "square", method = "newton", continuation = "auto"))]
#[allow(clippy::too_many_arguments)]
fn adapt(
    py: Python<'_>,
    density: &str,
    coef: Vec<f64>,
    grid: (usize, usize),
    elem: &str,
    p: usize,
    domain: &str,
    method: &str,
    continuation: &str,
) -> PyResult<Adaptation> {
    let mut cfg = RunConfig::for_command(Command::Adapt);
    let coef_text = coef.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(",");
    let grid_text = format!("{}x{}", grid.0, grid.1);
    let p_text = p.to_string();
    for (k, v) in [
        ("density", density),
        ("coef", &coef_text),
        ("grid", &grid_text),
        ("mesh", elem),
        ("p", &p_text),
        ("domain", domain),
        ("method", method),
        ("continuation", continuation),
    ] {
        cfg.set(k, v).map_err(to_py)?;
    }
    cfg.normalize();
    cfg.validate().map_err(to_py)?;
    py.detach(|| {
        let s = ma_hdg::runner::adapt_solve(&cfg)?;
        let am = extract_adapted_mesh(&s.state, &s.disc, &s.problem)?;
        let pts = |m: &ma_hdg::mesh::Mesh| m.node_coords.iter().map(|x| (x[0], x[1])).collect();
        Ok(Adaptation {
            theta: s.problem.theta,
            iterations: s.log.iterations(),
            continuation_stages: s.stages.len(),
            equidistribution_residual: equidistribution_residual(&s.state, &s.problem, &s.disc),
            min_jacobian: am.min_jacobian,
            raw_boundary_residual: am.raw_boundary_residual,
            area: am.area(),
            min_element_area: am.min_element_area(),
            max_displacement: am.max_displacement(),
            nodes: pts(&am.mesh),
            background_nodes: pts(&am.background),
            elements: am.mesh.elem_nodes.clone(),
        })
    })
    .map_err(to_py)
}

/// Runs the fast invariant checks; returns `(name, passed, detail)` per check.
#[pyfunction]
#[pyo3(signature = (tau = 1.0))]
fn selftest(py: Python<'_>, tau: f64) -> Vec<(String, bool, String)> {
    py.detach(|| ma_hdg::runner::selftest(tau))
        .checks
        .into_iter()
        .map(|c| (c.name, c.passed, c.detail))
        .collect()
}

/// Runs a `key = value` configuration under `out`; returns the run directory, files and failures.
#[pyfunction]
fn run(py: Python<'_>, config: &str, out: PathBuf) -> PyResult<(PathBuf, Vec<PathBuf>, Vec<String>)> {
    let cfg = RunConfig::parse(config).map_err(to_py)?;
    let r = py.detach(|| ma_hdg::runner::run(&cfg, &out)).map_err(to_py)?;
    Ok((r.dir, r.files, r.failures))
}

/// `log2(e_coarse / e_fine)`, or `None` when either error is not positive.
#[pyfunction]
fn order(e_coarse: f64, e_fine: f64) -> Option<f64> {
    convergence_order(e_coarse, e_fine)
}

#[pymodule]
#[pyo3(name = "ma_hdg")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<ConvergeResult>()?;
    m.add_class::<Adaptation>()?;
    m.add_function(wrap_pyfunction!(converge_case, m)?)?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(order, m)?)?;
    Ok(())
}
