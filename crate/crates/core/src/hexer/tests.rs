use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;

use super::*;
use crate::fixtures::{axis_plane, plane_stack, two_cell_planes};

const L: f64 = 8.0;

fn cube(h: f64) -> [Vec3; 8] {
    CORNER_SIGNS.map(|s| Vec3::from(s) * (0.5 * h))
}

fn transform(p: &[Vec3; 8], f: impl Fn(&Vec3) -> Vec3) -> [Vec3; 8] {
    std::array::from_fn(|i| f(&p[i]))
}

fn rigid(s: &StreamSurface, rot: &Rotation3<f64>, t: Vec3) -> StreamSurface {
    StreamSurface {
        points: s.points.iter().map(|p| rot * p + t).collect(),
        normals: s.normals.iter().map(|n| rot * n).collect(),
        ..s.clone()
    }
}

#[test]
fn parallel_planes_stay_apart() {
    let lo = Vec3::zeros();
    let hi = Vec3::repeat(20.0);
    let s = [axis_plane(0, 2, 0.0, lo, hi, 1.0), axis_plane(1, 2, 10.0, lo, hi, 1.0)];
    let g = build_proximity_graph(&s, 1.0).unwrap();
    for i in 0..g.len() {
        assert!(g.neighbors(i).iter().all(|&j| g.surface[j as usize] == g.surface[i]));
    }
    assert!(classify_vertices(&g).iter().all(|&c| c == PointClass::Surface));
    assert!(matches!(build_stc(g.clone(), classify_vertices(&g)), Err(HexError::NoTripleIntersections)));
}

#[test]
fn crossing_planes_link_along_band() {
    let lo = Vec3::repeat(-10.0);
    let hi = Vec3::repeat(10.0);
    let s = [axis_plane(0, 0, 0.0, lo, hi, 1.0), axis_plane(1, 1, 0.0, lo, hi, 1.0)];
    let r = 1.0;
    let g = build_proximity_graph(&s, r).unwrap();
    // brute force over all pairs
    let mut expected = 0;
    for i in 0..g.len() {
        for j in 0..g.len() {
            if i != j && (g.points[i] - g.points[j]).norm() < 2.0 * r {
                expected += 1;
                assert!(g.neighbors(i).contains(&(j as u32)));
            }
        }
    }
    assert_eq!(expected, 2 * g.edge_count());
    // the nearest point of the other plane is as far as the intersection line
    let classes = classify_vertices(&g);
    for (i, p) in g.points.iter().enumerate() {
        let to_line = (p.x * p.x + p.y * p.y).sqrt();
        let crosses = g.neighbors(i).iter().any(|&j| g.surface[j as usize] != g.surface[i]);
        assert_eq!(crosses, to_line < 2.0 * r, "{p:?}");
        assert_eq!(classes[i] == PointClass::Intersection, to_line < 2.0 * r);
    }
}

#[test]
fn orthogonal_triple_is_one_vertex() {
    let lo = Vec3::repeat(-6.0);
    let hi = Vec3::repeat(6.0);
    let s: Vec<_> = (0..3).map(|a| axis_plane(a as u32, a, 0.0, lo, hi, 1.0)).collect();
    let g = build_proximity_graph(&s, 1.0).unwrap();
    let classes = classify_vertices(&g);
    assert!(classes.contains(&PointClass::Triple));
    let stc = build_stc(g, classes).unwrap();
    assert_eq!(stc.vertices.len(), 1);
    assert!(stc.edges.is_empty());
    assert!(stc.vertices[0].position.norm() < 1e-12);
    let mesh = dualize(&stc).unwrap();
    assert_eq!(mesh.cells.len(), 1);
    assert!((scaled_jacobian(&mesh.cell_points(0)).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn close_parallel_planes_violate_separation() {
    let lo = Vec3::repeat(-6.0);
    let hi = Vec3::repeat(6.0);
    let mut s: Vec<_> = (0..3).map(|a| axis_plane(a as u32, a, 0.0, lo, hi, 1.0)).collect();
    s.push(axis_plane(3, 2, 1.0, lo, hi, 1.0));
    match build_proximity_graph(&s, 1.0) {
        Err(HexError::SeparationViolation { surfaces, .. }) => assert_eq!(surfaces, vec![0, 1, 2, 3]),
        other => panic!("expected a separation violation, got {other:?}"),
    }
}

#[test]
fn two_cells_share_one_face() {
    let (stc, mesh) = hex_mesh(&two_cell_planes(L, 1.0), 1.0).unwrap();
    assert_eq!(stc.vertices.len(), 2);
    assert_eq!(stc.edges, vec![(0, 1)]);
    assert_eq!(mesh.cells.len(), 2);
    assert_eq!(mesh.vertices.len(), 12);
    let shared: Vec<u32> = mesh.cells[0].iter().copied().filter(|v| mesh.cells[1].contains(v)).collect();
    assert_eq!(shared.len(), 4);
    assert!(mesh.diagnostics.is_empty());
    let q = mesh_quality_report(&mesh);
    assert_eq!(q.nonconforming_faces, 0);
    assert!((q.min_scaled_jacobian - 1.0).abs() < 1e-9);
    // both cells are cubes of the edge length
    for c in 0..2 {
        let p = mesh.cell_points(c);
        for (i, nb) in CORNER_NEIGHBORS.iter().enumerate() {
            for &j in nb {
                assert!(((p[j] - p[i]).norm() - L).abs() < 1e-9);
            }
        }
    }
}

/// Closed-form counts for a structured `n^3` cell block.
fn grid_counts(n: usize) -> (usize, usize, usize) {
    let cells = n * n * n;
    let vertices = (n + 1).pow(3);
    let interior_faces = 3 * (n - 1) * n * n;
    (cells, vertices, interior_faces)
}

#[test]
fn plane_stacks_give_structured_grids() {
    for k in 1..=3 {
        let (stc, mesh) = hex_mesh(&plane_stack(k, L, 1.0, Vec3::zeros()), 1.0).unwrap();
        assert_eq!(stc.vertices.len(), (k + 1).pow(3));
        assert_eq!(stc.edges.len(), 3 * k * (k + 1) * (k + 1));
        let (cells, vertices, interior) = grid_counts(k + 1);
        assert_eq!(mesh.cells.len(), cells);
        assert_eq!(mesh.vertices.len(), vertices);
        assert_eq!(stc.edges.len(), interior);
        assert!(mesh.diagnostics.is_empty(), "{:?}", mesh.diagnostics);
        for c in 0..mesh.cells.len() {
            assert!((scaled_jacobian(&mesh.cell_points(c)).unwrap() - 1.0).abs() < 1e-6);
        }
        let q = mesh_quality_report(&mesh);
        assert_eq!(q.nonconforming_faces, 0);
        assert_eq!(q.degenerate_cells, 0);
    }
}

#[test]
fn center_cell_matches_edge_length() {
    let (stc, mesh) = hex_mesh(&plane_stack(2, L, 1.0, Vec3::zeros()), 1.0).unwrap();
    let center = stc
        .vertices
        .iter()
        .position(|v| (v.position - Vec3::repeat(L)).norm() < 1e-9)
        .unwrap();
    assert_eq!(stc.incident()[center].len(), 6);
    let p = mesh.cell_points(center);
    let mid = p.iter().sum::<Vec3>() / 8.0;
    assert!((mid - Vec3::repeat(L)).norm() < 1e-9);
    assert!(((p[6] - p[0]).norm() - L * 3f64.sqrt()).abs() < 1e-9);
}

#[test]
fn removing_a_plane_removes_a_layer() {
    let full = plane_stack(2, L, 1.0, Vec3::zeros());
    let base = hex_mesh(&full, 1.0).unwrap().1.cells.len();
    for drop in [6, 7, 8] {
        let s: Vec<_> = full.iter().filter(|s| s.id != drop).cloned().collect();
        let (_, mesh) = hex_mesh(&s, 1.0).unwrap();
        assert_eq!(base - mesh.cells.len(), 9, "dropping plane {drop}");
    }
}

#[test]
fn rotated_stack_keeps_quality() {
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(1.0, 2.0, 0.5)), 0.7);
    let t = Vec3::new(3.0, -1.0, 2.5);
    let s: Vec<_> = plane_stack(2, L, 1.0, Vec3::zeros()).iter().map(|s| rigid(s, &rot, t)).collect();
    // lattice neighbours sit exactly 2h apart; keep them clear of the cutoff
    // so rounding after the rotation cannot break the symmetry
    let (_, mesh) = hex_mesh(&s, 1.05).unwrap();
    assert_eq!(mesh.cells.len(), 27);
    assert_eq!(mesh.vertices.len(), 64);
    let q = mesh_quality_report(&mesh);
    assert!((q.min_scaled_jacobian - 1.0).abs() < 1e-6);
    assert_eq!(q.nonconforming_faces, 0);
}

#[test]
fn pruning_leaves_clean_input_alone() {
    let s = plane_stack(2, L, 1.0, Vec3::zeros());
    let (_, strict) = hex_mesh(&s, 1.0).unwrap();
    let (_, pruned, dropped) = hex_mesh_pruned(&s, 1.0).unwrap();
    assert_eq!(dropped, 0);
    assert_eq!(pruned, strict);
}

#[test]
fn pruning_cuts_converging_planes() {
    // two planes through the z axis at 20 degrees, so a point at distance rho
    // from the axis is rho sin 20 from the other plane
    let (h, r) = (0.5, 1.0);
    let angle = 20f64.to_radians();
    let lo = Vec3::new(0.0, -12.0, -4.0);
    let hi = Vec3::new(0.0, 12.0, 4.0);
    let a = axis_plane(0, 0, 0.0, lo, hi, h);
    let b = rigid(&axis_plane(1, 0, 0.0, lo, hi, h), &Rotation3::from_axis_angle(&Vec3::z_axis(), angle), Vec3::zeros());
    let s = [a, b];
    assert!(build_proximity_graph(&s, r).is_ok(), "two surfaces never trip the strict check");
    let (g, dropped) = build_proximity_graph_pruned(&s, r).unwrap();
    let rho = |p: &Vec3| p.xy().norm();
    let close = |p: &Vec3| rho(p) * angle.sin() < 2.0 * r - 1e-9;
    let expected = s.iter().flat_map(|s| &s.points).filter(|p| close(p)).count();
    assert!(expected > 0);
    assert_eq!(dropped, expected);
    assert!(g.points.iter().all(|p| !close(p)));
    assert!((0..g.len()).all(|i| g.surfaces_near(i).len() == 1));
}

#[test]
fn scaled_jacobian_examples() {
    assert!((scaled_jacobian(&cube(1.0)).unwrap() - 1.0).abs() < 1e-15);
    // y edges tilted to 60 degrees from x
    let (s, c) = (60f64.to_radians().sin(), 60f64.to_radians().cos());
    let sheared = transform(&cube(1.0), |p| Vec3::new(p.x + c * p.y, s * p.y, p.z));
    assert!((scaled_jacobian(&sheared).unwrap() - s).abs() < 1e-12);
    let mut inverted = cube(1.0);
    inverted.swap(0, 1);
    assert!(scaled_jacobian(&inverted).unwrap() < 0.0);
    let mut collapsed = cube(1.0);
    collapsed[1] = collapsed[0];
    assert!(matches!(scaled_jacobian(&collapsed), Err(HexError::DegenerateCell)));
}

#[test]
fn empty_mesh_report() {
    let q = mesh_quality_report(&HexMesh::default());
    assert_eq!((q.cell_count, q.vertex_count, q.nonconforming_faces), (0, 0, 0));
}

#[test]
fn nonconforming_pairs_are_counted() {
    // second cell shifted half a cell along x shares only two top corners
    let a = cube(1.0);
    let mut vertices = a.to_vec();
    vertices.extend(transform(&a, |p| p + Vec3::new(0.5, 0.0, 1.0)));
    let mut mesh = HexMesh {
        vertices,
        cells: vec![[0, 1, 2, 3, 4, 5, 6, 7], [8, 9, 10, 11, 12, 13, 14, 15]],
        dual_of: vec![0, 1],
        diagnostics: Vec::new(),
    };
    assert_eq!(nonconforming_faces(&mesh), 0);
    // glue three corners only
    mesh.cells[1][0] = 4;
    mesh.cells[1][3] = 7;
    mesh.cells[1][2] = 6;
    assert_eq!(nonconforming_faces(&mesh), 1);
    // a quad used by three cells
    let mesh = HexMesh {
        vertices: (0..20).map(|i| Vec3::repeat(i as f64)).collect(),
        cells: vec![[0, 1, 2, 3, 4, 5, 6, 7], [4, 5, 6, 7, 8, 9, 10, 11], [12, 13, 14, 15, 4, 5, 6, 7]],
        dual_of: vec![0, 1, 2],
        diagnostics: Vec::new(),
    };
    assert_eq!(nonconforming_faces(&mesh), 1);
}

#[test]
fn fit_recovers_rotation() {
    let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
    let dirs: Vec<Vec3> = [Vec3::x(), -Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::z()]
        .iter()
        .map(|d| rot * d)
        .collect();
    let r = fit_rotation(&dirs);
    assert!((r.determinant() - 1.0).abs() < 1e-12);
    for d in &dirs {
        let local = r.transpose() * d;
        assert!((local.amax() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn writers() {
    let (_, mesh) = hex_mesh(&two_cell_planes(L, 1.0), 1.0).unwrap();
    let vtk = mesh.to_vtk();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(vtk.contains("POINTS 12 double"));
    assert!(vtk.contains("CELLS 2 18"));
    assert_eq!(vtk.lines().filter(|l| *l == "12").count(), 2);
    let medit = mesh.to_medit();
    assert!(medit.contains("Hexahedra\n2\n"));
    assert!(medit.trim_end().ends_with("End"));
    let min_index: u32 = medit
        .lines()
        .skip_while(|l| *l != "Hexahedra")
        .skip(2)
        .take(2)
        .flat_map(|l| l.split_whitespace().take(8).map(|x| x.parse::<u32>().unwrap()))
        .min()
        .unwrap();
    assert_eq!(min_index, 1);
    let dir = tempfile::tempdir().unwrap();
    let q = mesh_quality_report(&mesh);
    q.write_json(dir.path().join("q.json")).unwrap();
    let back: QualityReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("q.json")).unwrap()).unwrap();
    assert_eq!(back, q);
}

proptest! {
    #[test]
    fn jacobian_invariant_under_similarity(
        axis in (-1.0..1.0f64, -1.0..1.0f64, 0.1..1.0f64),
        angle in -3.0..3.0f64,
        scale in 0.1..10.0f64,
        t in (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
        jitter in proptest::collection::vec(-0.15..0.15f64, 24),
    ) {
        let base: [Vec3; 8] = std::array::from_fn(|i| {
            Vec3::from(CORNER_SIGNS[i]) * 0.5 + Vec3::new(jitter[3 * i], jitter[3 * i + 1], jitter[3 * i + 2])
        });
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(axis.0, axis.1, axis.2)), angle);
        let moved = transform(&base, |p| rot * p * scale + Vec3::new(t.0, t.1, t.2));
        let a = scaled_jacobian(&base).unwrap();
        let b = scaled_jacobian(&moved).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&a));
    }
}
