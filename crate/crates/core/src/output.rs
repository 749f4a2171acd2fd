//! Legacy VTK and CSV export.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{series_orders, ErrorReport};
use crate::error::{Error, Result};
use crate::hdg::FieldState;
use crate::mesh::{ElemKind, Mesh};

const VTK_TRIANGLE: u8 = 5;
const VTK_QUAD: u8 = 9;

/// Values attached to the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum PointField {
    Scalar(String, Vec<f64>),
    Vector(String, Vec<[f64; 2]>),
}

impl PointField {
    fn name(&self) -> &str {
        match self {
            PointField::Scalar(n, _) | PointField::Vector(n, _) => n,
        }
    }

    fn len(&self) -> usize {
        match self {
            PointField::Scalar(_, v) => v.len(),
            PointField::Vector(_, v) => v.len(),
        }
    }
}

/// Lattice position `(i, j)` of each local node of a degree-`k` element, in node order.
fn lattice_positions(kind: ElemKind, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for j in 0..=k {
        let imax = match kind {
            ElemKind::Triangle => k - j,
            ElemKind::Quadrilateral => k,
        };
        for i in 0..=imax {
            out.push((i, j));
        }
    }
    out
}

/// Linear sub-cells of every element of `mesh`, as `(vtk cell type, global node ids)`.
///
/// A degree-`k` triangle yields `k^2` triangles, a degree-`k` quadrilateral `k^2` quadrilaterals.
pub fn subdivide(mesh: &Mesh) -> Vec<(u8, Vec<usize>)> {
    let k = mesh.geometric_degree;
    let pos = lattice_positions(mesh.kind, k);
    let mut local = std::collections::HashMap::new();
    for (l, &ij) in pos.iter().enumerate() {
        local.insert(ij, l);
    }
    let at = |i: usize, j: usize| local[&(i, j)];
    let mut cells = Vec::new();
    for nodes in &mesh.elem_nodes {
        match mesh.kind {
            ElemKind::Triangle => {
                for j in 0..k {
                    for i in 0..k - j {
                        cells.push((VTK_TRIANGLE, vec![nodes[at(i, j)], nodes[at(i + 1, j)], nodes[at(i, j + 1)]]));
                        if i + j + 1 < k {
                            cells.push((
                                VTK_TRIANGLE,
                                vec![nodes[at(i + 1, j)], nodes[at(i + 1, j + 1)], nodes[at(i, j + 1)]],
                            ));
                        }
                    }
                }
            }
            ElemKind::Quadrilateral => {
                for j in 0..k {
                    for i in 0..k {
                        cells.push((
                            VTK_QUAD,
                            vec![
                                nodes[at(i, j)],
                                nodes[at(i + 1, j)],
                                nodes[at(i + 1, j + 1)],
                                nodes[at(i, j + 1)],
                            ],
                        ));
                    }
                }
            }
        }
    }
    cells
}

/// Legacy VTK ASCII unstructured grid of `mesh` with optional point data.
pub fn vtk_string(mesh: &Mesh, title: &str, fields: &[PointField]) -> Result<String> {
    let np = mesh.node_coords.len();
    for f in fields {
        if f.len() != np {
            return Err(Error::InvalidArgument(format!(
                "field '{}' has {} values for {np} points",
                f.name(),
                f.len()
            )));
        }
        if f.name().is_empty() || f.name().contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid field name '{}'", f.name())));
        }
    }
    let cells = subdivide(mesh);
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&title);
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {np} double");
    for x in &mesh.node_coords {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", x[0], x[1]);
    }
    let size: usize = cells.iter().map(|c| c.1.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {size}", cells.len());
    for (_, ids) in &cells {
        let _ = write!(s, "{}", ids.len());
        for id in ids {
            let _ = write!(s, " {id}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for (t, _) in &cells {
        let _ = writeln!(s, "{t}");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {np}");
        for f in fields {
            match f {
                PointField::Scalar(name, v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                    for x in v {
                        let _ = writeln!(s, "{x:.16e}");
                    }
                }
                PointField::Vector(name, v) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for x in v {
                        let _ = writeln!(s, "{:.16e} {:.16e} 0", x[0], x[1]);
                    }
                }
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, title: &str, fields: &[PointField], path: &Path) -> Result<()> {
    write_text(path, &vtk_string(mesh, title, fields)?)
}

/// Averages an element-local nodal block of `state` onto the nodes of `mesh`, whose elements
/// carry the same nodes as the state's basis.
pub fn average_to_nodes(mesh: &Mesh, state: &FieldState, block: usize) -> Vec<f64> {
    let mut sum = vec![0.0; mesh.node_coords.len()];
    let mut count = vec![0usize; mesh.node_coords.len()];
    for (e, nodes) in mesh.elem_nodes.iter().enumerate() {
        let v = state.field(e, block);
        for (l, &n) in nodes.iter().enumerate() {
            sum[n] += v[l];
            count[n] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
}

fn fmt_err(v: f64) -> String {
    format!("{v:.6e}")
}

fn fmt_order(v: Option<f64>) -> String {
    v.map_or(String::new(), |o| format!("{o:.4}"))
}

/// Error/order table with header `p,n,err_u,ord_u,err_q,ord_q,err_H,ord_H`. Orders are computed
/// between consecutive rows of equal degree whose resolution doubles.
pub fn error_table_csv(reports: &[ErrorReport]) -> String {
    let mut s = String::from("p,n,err_u,ord_u,err_q,ord_q,err_H,ord_H\n");
    let mut start = 0;
    while start < reports.len() {
        let p = reports[start].p;
        let end = start + reports[start..].iter().take_while(|r| r.p == p).count();
        let run = &reports[start..end];
        for (r, o) in run.iter().zip(series_orders(run)) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.p,
                r.n,
                fmt_err(r.err_u),
                fmt_order(o[0]),
                fmt_err(r.err_q),
                fmt_order(o[1]),
                fmt_err(r.err_h),
                fmt_order(o[2])
            );
        }
        start = end;
    }
    s
}

pub fn write_error_table(reports: &[ErrorReport], path: &Path) -> Result<()> {
    write_text(path, &error_table_csv(reports))
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cylinder_mesh, build_square_mesh, BoxDomain};

    fn report(p: usize, n: usize, e: f64) -> ErrorReport {
        ErrorReport {
            p,
            n,
            h: 1.0 / n as f64,
            err_u: e,
            err_q: 2.0 * e,
            err_h: 4.0 * e,
        }
    }

    #[test]
    fn subdivision_counts_and_area() {
        for (kind, k) in [(ElemKind::Triangle, 3), (ElemKind::Quadrilateral, 2)] {
            let mesh = build_square_mesh(2, kind, BoxDomain::UNIT).unwrap().elevate(k).unwrap();
            let cells = subdivide(&mesh);
            assert_eq!(cells.len(), mesh.num_elements() * k * k);
            let area: f64 = cells
                .iter()
                .map(|(_, ids)| {
                    let x: Vec<_> = ids.iter().map(|&i| mesh.node_coords[i]).collect();
                    (0..x.len())
                        .map(|a| {
                            let b = (a + 1) % x.len();
                            x[a][0] * x[b][1] - x[b][0] * x[a][1]
                        })
                        .sum::<f64>()
                        / 2.0
                })
                .inspect(|a| assert!(*a > 0.0))
                .sum();
            assert!((area - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vtk_layout() {
        let mesh = build_cylinder_mesh(1, 1, 2).unwrap();
        let field = PointField::Scalar("x".into(), mesh.node_coords.iter().map(|x| x[0]).collect());
        let s = vtk_string(&mesh, "t", &[field]).unwrap();
        assert!(s.starts_with("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 9 double\n"));
        assert!(s.contains("CELLS 4 20\n"));
        assert!(s.contains("POINT_DATA 9\nSCALARS x double 1\nLOOKUP_TABLE default\n"));
        let bad = PointField::Vector("v".into(), vec![[0.0; 2]; 3]);
        assert!(vtk_string(&mesh, "t", &[bad]).is_err());
    }

    #[test]
    fn error_table_orders_restart_per_degree() {
        let rows = [report(1, 4, 1e-2), report(1, 8, 2.5e-3), report(2, 4, 1e-3), report(2, 8, 1.25e-4)];
        let csv = error_table_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "p,n,err_u,ord_u,err_q,ord_q,err_H,ord_H");
        assert_eq!(lines[1], "1,4,1.000000e-2,,2.000000e-2,,4.000000e-2,");
        assert_eq!(lines[2], "1,8,2.500000e-3,2.0000,5.000000e-3,2.0000,1.000000e-2,2.0000");
        assert_eq!(lines[3], "2,4,1.000000e-3,,2.000000e-3,,4.000000e-3,");
        assert_eq!(lines[4], "2,8,1.250000e-4,3.0000,2.500000e-4,3.0000,5.000000e-4,3.0000");
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let target = blocker.join("sub").join("table.csv");
        let err = write_error_table(&[report(1, 4, 1.0)], &target).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
