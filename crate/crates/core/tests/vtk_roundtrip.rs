use ma_hdg::mesh::{build_square_mesh, build_square_mesh_with_degree, BoxDomain, ElemKind, Mesh};
use ma_hdg::output::{vtk_string, write_vtk, PointField};
use tempfile::TempDir;

/// Minimal legacy-VTK reader for unstructured grids with point data.
#[derive(Debug, Default)]
struct Vtk {
    points: Vec<[f64; 3]>,
    cells: Vec<Vec<usize>>,
    cell_types: Vec<u8>,
    scalars: Vec<(String, Vec<f64>)>,
    vectors: Vec<(String, Vec<[f64; 3]>)>,
}

fn parse_vtk(text: &str) -> Vtk {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# vtk DataFile Version 3.0"));
    lines.next().unwrap();
    assert_eq!(lines.next().unwrap().trim(), "ASCII");
    assert_eq!(lines.next().unwrap().trim(), "DATASET UNSTRUCTURED_GRID");
    let mut tokens = lines.flat_map(str::split_whitespace);
    let mut vtk = Vtk::default();
    let mut npoints = 0;
    while let Some(t) = tokens.next() {
        match t {
            "POINTS" => {
                npoints = tokens.next().unwrap().parse().unwrap();
                tokens.next().unwrap();
                for _ in 0..npoints {
                    let mut p = [0.0; 3];
                    for v in &mut p {
                        *v = tokens.next().unwrap().parse().unwrap();
                    }
                    vtk.points.push(p);
                }
            }
            "CELLS" => {
                let n: usize = tokens.next().unwrap().parse().unwrap();
                let size: usize = tokens.next().unwrap().parse().unwrap();
                let mut read = 0;
                for _ in 0..n {
                    let k: usize = tokens.next().unwrap().parse().unwrap();
                    vtk.cells.push((0..k).map(|_| tokens.next().unwrap().parse().unwrap()).collect());
                    read += k + 1;
                }
                assert_eq!(read, size);
            }
            "CELL_TYPES" => {
                let n: usize = tokens.next().unwrap().parse().unwrap();
                vtk.cell_types = (0..n).map(|_| tokens.next().unwrap().parse().unwrap()).collect();
            }
            "POINT_DATA" => {
                assert_eq!(tokens.next().unwrap().parse::<usize>().unwrap(), npoints);
            }
            "SCALARS" => {
                let name = tokens.next().unwrap().to_string();
                tokens.next().unwrap();
                assert_eq!(tokens.next(), Some("1"));
                assert_eq!(tokens.next(), Some("LOOKUP_TABLE"));
                tokens.next().unwrap();
                let v = (0..npoints).map(|_| tokens.next().unwrap().parse().unwrap()).collect();
                vtk.scalars.push((name, v));
            }
            "VECTORS" => {
                let name = tokens.next().unwrap().to_string();
                tokens.next().unwrap();
                let mut v = Vec::new();
                for _ in 0..npoints {
                    let mut p = [0.0; 3];
                    for c in &mut p {
                        *c = tokens.next().unwrap().parse().unwrap();
                    }
                    v.push(p);
                }
                vtk.vectors.push((name, v));
            }
            other => panic!("unexpected token {other}"),
        }
    }
    vtk
}

fn signed_area(points: &[[f64; 3]], cell: &[usize]) -> f64 {
    let n = cell.len();
    (0..n)
        .map(|i| {
            let a = points[cell[i]];
            let b = points[cell[(i + 1) % n]];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn one_element(kind: ElemKind, degree: usize) -> Mesh {
    let mesh = build_square_mesh_with_degree(1, kind, BoxDomain::UNIT, degree).unwrap();
    match kind {
        ElemKind::Quadrilateral => assert_eq!(mesh.num_elements(), 1),
        ElemKind::Triangle => assert_eq!(mesh.num_elements(), 2),
    }
    mesh
}

#[test]
fn single_quad_round_trips() {
    for degree in [1, 3] {
        let mesh = one_element(ElemKind::Quadrilateral, degree);
        let u: Vec<f64> = mesh.node_coords.iter().map(|x| x[0] - 2.0 * x[1]).collect();
        let q: Vec<[f64; 2]> = mesh.node_coords.iter().map(|x| [x[1], -x[0]]).collect();
        let fields = [PointField::Scalar("u".into(), u.clone()), PointField::Vector("q".into(), q.clone())];
        let vtk = parse_vtk(&vtk_string(&mesh, "one quad", &fields).unwrap());

        assert_eq!(vtk.points.len(), mesh.node_coords.len());
        for (p, x) in vtk.points.iter().zip(&mesh.node_coords) {
            assert_eq!([p[0], p[1], p[2]], [x[0], x[1], 0.0]);
        }
        assert_eq!(vtk.cells.len(), degree * degree);
        assert!(vtk.cell_types.iter().all(|&t| t == 9));
        let area: f64 = vtk.cells.iter().map(|c| signed_area(&vtk.points, c)).sum();
        assert!((area - 1.0).abs() < 1e-14);
        assert!(vtk.cells.iter().all(|c| signed_area(&vtk.points, c) > 0.0));

        assert_eq!(vtk.scalars, vec![("u".to_string(), u)]);
        assert_eq!(vtk.vectors.len(), 1);
        for (a, b) in vtk.vectors[0].1.iter().zip(&q) {
            assert_eq!(*a, [b[0], b[1], 0.0]);
        }
    }
}

#[test]
fn triangle_cells_cover_the_square() {
    let mesh = one_element(ElemKind::Triangle, 2);
    let vtk = parse_vtk(&vtk_string(&mesh, "two triangles", &[]).unwrap());
    assert_eq!(vtk.cells.len(), 2 * 4);
    assert!(vtk.cell_types.iter().all(|&t| t == 5));
    assert!(vtk.cells.iter().all(|c| c.len() == 3 && signed_area(&vtk.points, c) > 0.0));
    let area: f64 = vtk.cells.iter().map(|c| signed_area(&vtk.points, c)).sum();
    assert!((area - 1.0).abs() < 1e-14);
}

#[test]
fn written_files_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let mesh = build_square_mesh(3, ElemKind::Triangle, BoxDomain::CENTERED).unwrap();
    let u: Vec<f64> = mesh.node_coords.iter().map(|x| (x[0] * 7.1).sin() / 3.0).collect();
    let fields = [PointField::Scalar("u".into(), u)];
    let a = tmp.path().join("a/mesh.vtk");
    let b = tmp.path().join("b/mesh.vtk");
    write_vtk(&mesh, "mesh", &fields, &a).unwrap();
    write_vtk(&mesh, "mesh", &fields, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let vtk = parse_vtk(&std::fs::read_to_string(&a).unwrap());
    assert_eq!(vtk.scalars[0].1, match &fields[0] {
        PointField::Scalar(_, v) => v.clone(),
        PointField::Vector(..) => unreachable!(),
    });
}
