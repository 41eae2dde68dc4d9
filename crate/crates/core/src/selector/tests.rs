use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::{axis_plane, constant_field, random_planes};

fn exhaustive(rows: &CompressedRows) -> u64 {
    (0u64..1 << rows.n)
        .map(|mask| {
            let w: Vec<bool> = (0..rows.n).map(|j| mask >> j & 1 == 1).collect();
            rows.objective(&w)
        })
        .min()
        .unwrap()
}

#[test]
fn cardinality_examples() {
    assert_eq!(cardinalities(&[100.0, 100.0], 10.0, 0.1).unwrap(), (20, 200, 10_000));
    let (_, s1, p1) = cardinalities(&[30.0, 40.0, 50.0], 5.0, 0.2).unwrap();
    let (_, s2, _) = cardinalities(&[60.0, 80.0, 100.0], 5.0, 0.2).unwrap();
    assert_eq!(s2, 2 * s1);
    let (_, a, pa) = cardinalities(&[100.0, 100.0], 10.0, 0.2).unwrap();
    let (_, b, pb) = cardinalities(&[100.0, 100.0], 10.0, 0.1).unwrap();
    assert_eq!((b, pb), (2 * a, 4 * pa));
    assert!(p1 > 0);
    assert!(cardinalities(&[10.0, 10.0], 0.0, 0.1).is_err());
    assert!(cardinalities(&[10.0, 10.0], 1.0, 1.0).is_err());
}

#[test]
fn single_plane_activates_band_on_one_channel() {
    let g = constant_field([11, 11, 21], 1.0, [0.5; 3]);
    let probes = ProbeGrid::new(&g, None, 10.0, 0.1, 3).unwrap();
    let plane = axis_plane(0, 2, 10.0, Vec3::zeros(), g.spec().max_corner(), 0.5);
    let a = compute_activation(&[plane], &probes, &g, 5.0).unwrap();
    let expect: Vec<u32> = (0..probes.len() as u32)
        .filter(|&p| (probes.positions[p as usize].z - 10.0).abs() <= 5.0)
        .collect();
    let got: Vec<u32> = a.rows.iter().map(|r| r.0).collect();
    assert_eq!(got, expect);
    for (p, c, s) in &a.rows {
        assert_eq!(*c, probes.labels[*p as usize][2]);
        assert_eq!(s, &vec![0]);
    }
}

#[test]
fn orthogonal_planes_use_distinct_channels() {
    let g = constant_field([11, 11, 11], 1.0, [0.5; 3]);
    let probes = ProbeGrid::new(&g, None, 4.0, 0.25, 9).unwrap();
    let hi = g.spec().max_corner();
    let planes = [
        axis_plane(0, 0, 5.0, Vec3::zeros(), hi, 0.5),
        axis_plane(1, 2, 5.0, Vec3::zeros(), hi, 0.5),
    ];
    let a = compute_activation(&planes, &probes, &g, 2.0).unwrap();
    let center = probes
        .positions
        .iter()
        .position(|p| (p - Vec3::repeat(5.0)).norm() < 1e-9)
        .unwrap() as u32;
    let rows: Vec<_> = a.rows.iter().filter(|r| r.0 == center).collect();
    assert_eq!(rows.len(), 2);
    assert_ne!(rows[0].1, rows[1].1);
    // disjoint union: a surface never activates two channels at one probe
    let dense = a.dense();
    for p in 0..a.n_probes {
        for s in 0..a.n_surfaces {
            let hits: u8 = (0..CHANNELS).map(|c| dense[p * CHANNELS + c][s]).sum();
            assert!(hits <= 1);
        }
    }
}

#[test]
fn activation_matches_brute_force() {
    let g = constant_field([16, 16, 16], 1.0, [0.5; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let surfaces: Vec<StreamSurface> = (0..5)
        .map(|id| {
            let pts: Vec<Vec3> = (0..300)
                .map(|_| Vec3::new(rng.gen_range(0.0..15.0), rng.gen_range(0.0..15.0), rng.gen_range(0.0..15.0)))
                .collect();
            let normals = (0..pts.len())
                .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0).normalize())
                .collect();
            StreamSurface { id, points: pts, normals, r: 0.5 }
        })
        .collect();
    let probes = ProbeGrid {
        spacing: 0.0,
        positions: (0..1000)
            .map(|_| Vec3::new(rng.gen_range(0.0..15.0), rng.gen_range(0.0..15.0), rng.gen_range(0.0..15.0)))
            .collect(),
        labels: vec![[0, 1, 2]; 1000],
    };
    let band = 1.3;
    let a = compute_activation(&surfaces, &probes, &g, band).unwrap();
    let mut expect = Vec::new();
    for (p, x) in probes.positions.iter().enumerate() {
        let mut by_channel: [Vec<u32>; 3] = Default::default();
        for (sid, s) in surfaces.iter().enumerate() {
            let (best, d) = s
                .points
                .iter()
                .enumerate()
                .map(|(i, q)| (i, (q - x).norm()))
                .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            if d <= band {
                let n = s.normals[best];
                // constant axis frame: channel = dominant component of the normal
                let k = (0..3).max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()).then(j.cmp(&i))).unwrap();
                by_channel[k].push(sid as u32);
            }
        }
        for (c, s) in by_channel.into_iter().enumerate() {
            if !s.is_empty() {
                expect.push((p as u32, c as u8, s));
            }
        }
    }
    assert_eq!(a.rows, expect);
}

#[test]
fn relabelling_channels_keeps_objective() {
    let g = constant_field([13, 13, 13], 1.0, [0.5; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let planes = random_planes(&g, 8, &[0, 1, 2], 0.5, &mut rng);
    let p1 = ProbeGrid::new(&g, None, 4.0, 0.5, 1).unwrap();
    let p2 = ProbeGrid::new(&g, None, 4.0, 0.5, 2).unwrap();
    assert_ne!(p1.labels, p2.labels);
    let a1 = compute_activation(&planes, &p1, &g, 2.0).unwrap();
    let a2 = compute_activation(&planes, &p2, &g, 2.0).unwrap();
    assert_eq!(a1.rows.len(), a2.rows.len());
    assert_eq!(exhaustive(&a1.compress()), exhaustive(&a2.compress()));
    let l1 = solve_relaxed(&a1).unwrap().objective;
    let l2 = solve_relaxed(&a2).unwrap().objective;
    assert!((l1 - l2).abs() < 1e-6);
}

#[test]
fn scaling_geometry_keeps_matrix() {
    let g1 = constant_field([13, 13, 13], 1.0, [0.5; 3]);
    let g2 = constant_field([13, 13, 13], 2.0, [0.5; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let planes = random_planes(&g1, 6, &[0, 2], 0.5, &mut rng);
    let scaled: Vec<StreamSurface> = planes
        .iter()
        .map(|s| StreamSurface {
            points: s.points.iter().map(|p| p * 2.0).collect(),
            r: s.r * 2.0,
            ..s.clone()
        })
        .collect();
    let a1 = compute_activation(&planes, &ProbeGrid::new(&g1, None, 4.0, 0.25, 0).unwrap(), &g1, 2.0).unwrap();
    let a2 = compute_activation(&scaled, &ProbeGrid::new(&g2, None, 8.0, 0.25, 0).unwrap(), &g2, 4.0).unwrap();
    assert_eq!(a1, a2);
}

#[test]
fn relaxed_examples() {
    // identity: one probe row per surface
    let a = ActivationMatrix {
        n_surfaces: 4,
        n_probes: 4,
        rows: (0..4).map(|j| (j, 0, vec![j])).collect(),
    };
    let s = solve_relaxed(&a).unwrap();
    // the other two channels of each probe stay uncovered
    assert!((s.objective - 8.0).abs() < 1e-9);
    assert!(s.w.iter().all(|&w| (w - 1.0).abs() < 1e-9));
}

/// Exact 1D optimum for parallel planes whose bands cover contiguous runs of
/// probe layers. Consecutive chosen planes either overlap (each shared layer
/// costs 1 per extra cover) or leave a gap (each missed layer costs 1); with
/// equal-width intervals these pairwise terms add up to the exact L1 cost.
fn interval_dp(intervals: &[(i64, i64)], n_layers: i64) -> i64 {
    let k = intervals.len();
    let between = |a: (i64, i64), b: (i64, i64)| -> i64 {
        if a.1 < b.0 {
            b.0 - a.1 - 1
        } else {
            a.1 - b.0 + 1
        }
    };
    let mut f = vec![i64::MAX; k];
    for j in 0..k {
        f[j] = intervals[j].0;
        for i in 0..j {
            f[j] = f[j].min(f[i] + between(intervals[i], intervals[j]));
        }
    }
    (0..k)
        .map(|j| f[j] + (n_layers - 1 - intervals[j].1))
        .chain([n_layers])
        .min()
        .unwrap()
}

#[test]
fn parallel_planes_match_interval_dp() {
    let gamma = 6.0;
    let g = constant_field([5, 5, 40], 1.0, [0.5; 3]);
    let hi = g.spec().max_corner();
    let planes: Vec<StreamSurface> = (0..40)
        .map(|z| axis_plane(z, 2, z as f64, Vec3::zeros(), hi, 0.5))
        .collect();
    let params = SelectParams::new(gamma, 1.0 / 6.0, 5);
    let sel = select(&planes, &g, None, &params).unwrap();
    let per_layer = 25;
    let intervals: Vec<(i64, i64)> = (0..40).map(|z: i64| ((z - 3).max(0), (z + 3).min(39))).collect();
    // two unused channels per probe are constant
    let constant = 2 * per_layer * 40;
    let dp = interval_dp(&intervals, 40) * per_layer + constant;
    assert_eq!(sel.result.objective as i64, dp);
    assert!(sel.result.objective >= sel.report.relaxed_objective - 1e-6);
}

#[test]
fn small_selection_is_exact() {
    let g = constant_field([21, 21, 3], 1.0, [0.5; 3]);
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes = random_planes(&g, 10, &[0, 1], 0.5, &mut rng);
        let sel = select(&planes, &g, None, &SelectParams::new(5.0, 0.2, seed)).unwrap();
        assert_eq!(sel.result.objective as u64, exhaustive(&sel.matrix.compress()));
    }
}

/// Least-squares counterpart: projected gradient on `|A w - 1|^2` over the
/// box, then rounding at one half.
fn l2_select(rows: &CompressedRows) -> Vec<bool> {
    let mut w = vec![0.5; rows.n];
    let lip: f64 = rows.counts.iter().zip(&rows.supports).map(|(c, s)| *c as f64 * s.len() as f64).sum();
    for _ in 0..20_000 {
        let mut grad = vec![0.0; rows.n];
        for (s, &c) in rows.supports.iter().zip(&rows.counts) {
            let res: f64 = s.iter().map(|&j| w[j as usize]).sum::<f64>() - 1.0;
            for &j in s {
                grad[j as usize] += 2.0 * c as f64 * res;
            }
        }
        for j in 0..rows.n {
            w[j] = (w[j] - grad[j] / (2.0 * lip)).clamp(0.0, 1.0);
        }
    }
    w.iter().map(|&v| v > 0.5).collect()
}

fn covered_fraction(a: &ActivationMatrix, w: &[bool]) -> f64 {
    let hit = a.rows.iter().filter(|(_, _, s)| s.iter().any(|&j| w[j as usize])).count();
    hit as f64 / a.rows.len() as f64
}

#[test]
fn l1_covers_where_least_squares_drops() {
    // candidates at random layers, overlapping and leaving uneven gaps
    let g = constant_field([5, 5, 60], 1.0, [0.5; 3]);
    let hi = g.spec().max_corner();
    let (mut sum1, mut sum2) = (0.0, 0.0);
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes: Vec<StreamSurface> = (0..30)
            .map(|i| axis_plane(i, 2, rng.gen_range(0..60) as f64, Vec3::zeros(), hi, 0.5))
            .collect();
        let sel = select(&planes, &g, None, &SelectParams::new(5.0, 0.2, 1)).unwrap();
        let w2 = l2_select(&sel.matrix.compress());
        let l1 = covered_fraction(&sel.matrix, &sel.result.weights);
        let l2 = covered_fraction(&sel.matrix, &w2);
        if seed == 0 {
            assert!(l1 >= 0.95, "{l1}");
            assert!(w2.iter().filter(|&&b| b).count() < sel.result.selected().len());
        }
        assert!(l2 <= l1 + 1e-12, "seed {seed}: {l2} vs {l1}");
        sum1 += l1;
        sum2 += l2;
    }
    assert!(sum2 < 0.85 * sum1, "{sum2} vs {sum1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_cleanup_and_bound(
        n in 2usize..9,
        rows in prop::collection::vec((prop::collection::vec(0u32..8, 1..4), 1u64..4), 1..25),
    ) {
        let mut supports: Vec<Vec<u32>> = Vec::new();
        let mut counts = Vec::new();
        for (mut s, c) in rows {
            s.iter_mut().for_each(|j| *j %= n as u32);
            s.sort_unstable();
            s.dedup();
            supports.push(s);
            counts.push(c);
        }
        let rows = CompressedRows { n, supports, counts, empty: 3 };
        let relaxed = solve_l1(&rows.problem()).unwrap();
        let lb = relaxed.lower_bound + 3.0;
        let exact = finalize_binary(&rows, &relaxed.w, lb, -1.0, 40).unwrap();
        prop_assert_eq!(exact.objective as u64, exhaustive(&rows));
        prop_assert!(exact.objective >= lb - 1e-6);
        let fixed = finalize_binary(&rows, &relaxed.w, lb, 1e-3, 40).unwrap();
        prop_assert!(fixed.objective >= lb - 1e-6);
    }
}
