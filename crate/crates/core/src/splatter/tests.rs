use super::*;
use crate::field::Frame;
use crate::fixtures::{axis_plane, constant_field};

fn single_point(p: Vec3, n: Vec3) -> StreamSurface {
    StreamSurface {
        id: 0,
        points: vec![p],
        normals: vec![n],
        r: 1.0,
    }
}

fn cube_spec(n: usize) -> GridSpec {
    GridSpec::new([n; 3], 1.0, Vec3::zeros())
}

#[test]
fn smoothstep_examples() {
    assert_eq!(smoothstep(0.0, 1.0, 0.0).unwrap(), 0.0);
    assert_eq!(smoothstep(0.0, 1.0, 1.0).unwrap(), 1.0);
    assert_eq!(smoothstep(0.0, 1.0, 0.5).unwrap(), 0.5);
    assert_eq!(smoothstep(-2.0, 0.0, -1.0).unwrap(), 0.5);
    assert!(matches!(smoothstep(1.0, 1.0, 0.0), Err(SplatError::InvalidRange { .. })));
}

#[test]
fn single_point_profile() {
    let spec = cube_spec(9);
    let s = single_point(Vec3::new(4.0, 4.0, 4.0), Vec3::z());
    let v = splat_surface(&s, &[3.0], &spec, 2.0).unwrap();
    assert_eq!(v.get([4, 4, 4]), 1.0);
    // axial offset tau: support boundary
    assert_eq!(v.get([4, 4, 7]), 0.0);
    // a single point normalizes its own weight away: phi only
    let expect = ss(-3.0, 0.0, -1.0);
    assert!((v.get([5, 4, 5]) - expect).abs() < 1e-15);
    // outside the lateral radius nothing is written
    assert_eq!(v.get([6, 4, 4]), 0.0);
    assert!(v.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
}

fn dense_plane(z: f64, n: usize) -> StreamSurface {
    let hi = Vec3::repeat((n - 1) as f64);
    axis_plane(0, 2, z, Vec3::zeros(), hi, 0.25)
}

#[test]
fn plane_gives_analytic_slab() {
    let spec = cube_spec(21);
    let s = dense_plane(10.0, 21);
    let tau = vec![3.0; s.len()];
    let v = splat_surface(&s, &tau, &spec, 1.0).unwrap();
    for k in 0..21 {
        let z = k as f64 - 10.0;
        let analytic = ss(-3.0, 0.0, -z.abs());
        for (i, j) in [(0, 0), (10, 10), (20, 3)] {
            let got = v.get([i, j, k]);
            assert!((got - analytic).abs() < 1e-12, "{got} vs {analytic} at z {z}");
            assert_eq!(got >= 0.5, z.abs() <= 1.5);
        }
    }
}

#[test]
fn union_properties() {
    let spec = cube_spec(15);
    let a = splat_surface(&dense_plane(7.0, 15), &vec![3.0; 3249], &spec, 1.0).unwrap();
    let hi = Vec3::repeat(14.0);
    let xs = axis_plane(1, 0, 5.0, Vec3::zeros(), hi, 0.25);
    let b = splat_surface(&xs, &vec![2.0; xs.len()], &spec, 1.0).unwrap();
    let zero = VoxelVolume::zeros(spec);
    assert_eq!(union_volumes(&[a.clone(), zero]).unwrap(), a);
    assert_eq!(union_volumes(&[a.clone(), a.clone()]).unwrap(), a);
    let ab = union_volumes(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(ab, union_volumes(&[b.clone(), a.clone()]).unwrap());
    for i in 0..spec.len() {
        assert_eq!(ab.values[i], a.values[i].max(b.values[i]));
    }
    let other = VoxelVolume::zeros(cube_spec(4));
    assert!(matches!(union_volumes(&[a.clone(), other]), Err(SplatError::GridMismatch)));
    // the in-place splat matches union of separate splats bit for bit
    let all = splat_all(&[dense_plane(7.0, 15), xs.clone()], &[vec![3.0; 3249], vec![2.0; xs.len()]], &spec, 1.0).unwrap();
    assert_eq!(all, ab);
}

#[test]
fn translation_equivariance() {
    let s = StreamSurface {
        id: 0,
        points: vec![Vec3::new(3.2, 4.1, 5.3), Vec3::new(4.0, 4.4, 5.0)],
        normals: vec![Vec3::new(0.0, 0.6, 0.8), Vec3::new(0.0, 0.0, 1.0)],
        r: 1.0,
    };
    let spec = cube_spec(10);
    let a = splat_surface(&s, &[2.5, 2.0], &spec, 1.5).unwrap();
    let shift = Vec3::new(0.5, -3.0, 2.0);
    let moved = StreamSurface {
        points: s.points.iter().map(|p| p + shift).collect(),
        ..s.clone()
    };
    let spec2 = GridSpec::new([10; 3], 1.0, shift);
    let b = splat_surface(&moved, &[2.5, 2.0], &spec2, 1.5).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn thickness_rule() {
    let g = constant_field([5, 5, 5], 1.0, [0.5, 0.2, 0.0]);
    let p = Vec3::repeat(2.0);
    assert_eq!(thickness_from_field(&g, &p, &Vec3::x(), 10.0).unwrap(), 5.0);
    assert_eq!(thickness_from_field(&g, &p, &Vec3::z(), 10.0).unwrap(), 0.0);
    assert!(thickness_from_field(&g, &Vec3::repeat(9.0), &Vec3::x(), 10.0).is_err());
    // constant thickness gives a uniform wall
    let s = dense_plane(10.0, 21);
    let g = constant_field([21, 21, 21], 1.0, [0.5, 0.5, 0.4]);
    let tau = surface_thickness(&g, &s, 10.0, 1.0, 10.0).unwrap();
    assert!(tau.iter().all(|&t| (t - 4.0).abs() < 1e-12));
}

#[test]
fn solid_fill() {
    let spec = cube_spec(6);
    let mut frames = vec![Frame::axes([0.5; 3]); spec.len()];
    let g = crate::field::FrameGrid::new(spec, frames.clone()).unwrap();
    let v = VoxelVolume::zeros(spec);
    assert_eq!(fill_solid_regions(&v, &g).unwrap(), v);
    frames[spec.index(2, 3, 4)] = Frame::axes([1.0; 3]);
    let g = crate::field::FrameGrid::new(spec, frames).unwrap();
    let f = fill_solid_regions(&v, &g).unwrap();
    assert_eq!(f.values.iter().filter(|&&x| x == 1.0).count(), 1);
    assert_eq!(f.get([2, 3, 4]), 1.0);
    let outside = VoxelVolume::zeros(GridSpec::new([6; 3], 1.0, Vec3::repeat(1.0)));
    assert!(matches!(fill_solid_regions(&outside, &g), Err(SplatError::GridMismatch)));
}

#[test]
fn solid_block_is_watertight() {
    let spec = cube_spec(12);
    let mut frames = vec![Frame::axes([0.5; 3]); spec.len()];
    for k in 4..8 {
        for j in 3..9 {
            for i in 4..7 {
                frames[spec.index(i, j, k)] = Frame::axes([1.0; 3]);
            }
        }
    }
    let g = crate::field::FrameGrid::new(spec, frames).unwrap();
    let v = fill_solid_regions(&VoxelVolume::zeros(spec), &g).unwrap();
    let mesh = extract_isosurface(&v, 0.5).unwrap();
    assert!(mesh.is_closed());
    assert_eq!(mesh.euler_characteristic(), 2);
}

#[test]
fn empty_volume_has_no_surface() {
    let v = VoxelVolume::zeros(cube_spec(4));
    assert!(matches!(extract_isosurface(&v, 0.5), Err(SplatError::EmptySurface)));
}

#[test]
fn sphere_vertices_lie_near_radius() {
    let spec = cube_spec(32);
    let c = Vec3::repeat(15.5);
    let radius = 10.0;
    let mut v = VoxelVolume::zeros(spec);
    for i in 0..spec.len() {
        let d = (spec.position(spec.coords(i)) - c).norm();
        v.values[i] = ss(-1.5, 1.5, radius - d);
    }
    let mesh = extract_isosurface(&v, 0.5).unwrap();
    for p in &mesh.vertices {
        assert!(((p - c).norm() - radius).abs() <= 1.0);
    }
    assert!(mesh.is_closed());
    assert_eq!(mesh.euler_characteristic(), 2);
    assert!(mesh.triangles.iter().all(|t| mesh.area(t) > 1e-12));
}

#[test]
fn slab_extracts_as_closed_sheet_pair() {
    let spec = GridSpec::new([8, 8, 12], 1.0, Vec3::zeros());
    let s = axis_plane(0, 2, 6.0, Vec3::zeros(), Vec3::new(7.0, 7.0, 11.0), 0.25);
    let v = splat_surface(&s, &vec![3.0; s.len()], &spec, 1.0).unwrap();
    let mesh = extract_isosurface(&v, 0.5).unwrap();
    assert!(mesh.is_closed());
    assert_eq!(mesh.euler_characteristic(), 2);
    // top and bottom sheets sit at z = 6 +- 1.5
    let sheet = |z: f64| mesh.vertices.iter().filter(|p| (p.z - z).abs() < 1e-9).count();
    assert!(sheet(4.5) > 0 && sheet(7.5) > 0);
    assert_eq!(sheet(4.5), sheet(7.5));
}

#[test]
fn vvol_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = VoxelVolume::zeros(cube_spec(3));
    v.values[5] = 0.25;
    v.values[26] = 1.0;
    let path = dir.path().join("v.vvol");
    v.write_vvol(&path).unwrap();
    assert_eq!(VoxelVolume::read_vvol(&path).unwrap(), v);
}
