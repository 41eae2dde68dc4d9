use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::Vec3;

/// Multiplicative hasher for integer cell keys. Deterministic across runs.
#[derive(Default)]
pub(crate) struct CellHasher(u64);

impl Hasher for CellHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 ^ b as u64).wrapping_mul(0x100_0000_01b3);
        }
    }

    fn write_i64(&mut self, v: i64) {
        self.0 = (self.0.rotate_left(21) ^ v as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }

    fn write_usize(&mut self, v: usize) {
        self.write_i64(v as i64);
    }
}

pub(crate) type CellMap<V> = HashMap<[i64; 3], V, BuildHasherDefault<CellHasher>>;

/// Uniform hash grid over points in 3D.
///
/// Queries return exactly the stored points within the query radius,
/// independent of the cell size; the cell size only trades lookups against
/// distance checks.
#[derive(Clone, Debug)]
pub struct PointIndex {
    cell: f64,
    cells: CellMap<Vec<u32>>,
    points: Vec<Vec3>,
}

impl PointIndex {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        Self {
            cell,
            cells: CellMap::default(),
            points: Vec::new(),
        }
    }

    /// Index used while growing a surface with sampling radius `r`. Cells are
    /// `2r` wide so that the largest query (`3r`) touches at most 4 cells per axis.
    pub fn for_radius(r: f64) -> Self {
        Self::new(2.0 * r)
    }

    pub fn from_points(cell: f64, points: &[Vec3]) -> Self {
        let mut idx = Self::new(cell);
        for p in points {
            idx.insert(*p);
        }
        idx
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    #[inline]
    fn key(&self, p: &Vec3) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    /// Store a point and return its index.
    pub fn insert(&mut self, p: Vec3) -> u32 {
        let id = self.points.len() as u32;
        let key = self.key(&p);
        self.cells.entry(key).or_default().push(id);
        self.points.push(p);
        id
    }

    /// Visit every stored point with `|q - p| <= radius` as `(id, distance)`.
    /// Visiting order is deterministic but unspecified.
    #[inline]
    pub fn for_each_within(&self, p: &Vec3, radius: f64, mut f: impl FnMut(u32, f64)) {
        let lo = self.key(&(p - Vec3::repeat(radius)));
        let hi = self.key(&(p + Vec3::repeat(radius)));
        let r2 = radius * radius;
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if let Some(ids) = self.cells.get(&[x, y, z]) {
                        for &id in ids {
                            let d2 = (self.points[id as usize] - p).norm_squared();
                            if d2 <= r2 {
                                f(id, d2.sqrt());
                            }
                        }
                    }
                }
            }
        }
    }

    /// Ids of all points within `radius`, ascending.
    pub fn query(&self, p: &Vec3, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_within(p, radius, |id, _| out.push(id));
        out.sort_unstable();
        out
    }

    /// `true` if some point lies strictly closer than `radius`.
    pub fn any_closer(&self, p: &Vec3, radius: f64) -> bool {
        let mut hit = false;
        self.for_each_within(p, radius, |_, d| hit |= d < radius);
        hit
    }

    /// Nearest point within `radius`; ties go to the lowest id.
    pub fn nearest_within(&self, p: &Vec3, radius: f64) -> Option<(u32, f64)> {
        let mut best: Option<(u32, f64)> = None;
        self.for_each_within(p, radius, |id, d| {
            if best.map_or(true, |(bi, bd)| d < bd || (d == bd && id < bi)) {
                best = Some((id, d));
            }
        });
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn query_matches_brute_force(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..80),
            q in (-6.0f64..6.0, -6.0f64..6.0, -6.0f64..6.0),
            radius in 0.1f64..4.0,
            cell in 0.2f64..3.0,
        ) {
            let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
            let q = Vec3::new(q.0, q.1, q.2);
            let idx = PointIndex::from_points(cell, &pts);
            let expect: Vec<u32> = (0..pts.len() as u32)
                .filter(|&i| (pts[i as usize] - q).norm() <= radius)
                .collect();
            prop_assert_eq!(idx.query(&q, radius), expect.clone());
            let brute_nearest = expect
                .iter()
                .map(|&i| (i, (pts[i as usize] - q).norm()))
                .fold(None, |acc: Option<(u32, f64)>, (i, d)| match acc {
                    Some((_, bd)) if bd <= d => acc,
                    _ => Some((i, d)),
                });
            prop_assert_eq!(idx.nearest_within(&q, radius), brute_nearest);
        }
    }

    #[test]
    fn stored_points_are_retrievable() {
        let pts = [Vec3::new(0.1, 0.2, 0.3), Vec3::new(-4.0, 2.0, 9.5)];
        let idx = PointIndex::for_radius(0.5);
        let mut idx = idx;
        for p in pts {
            idx.insert(p);
        }
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(idx.query(p, 0.0), vec![i as u32]);
        }
        assert!(!idx.any_closer(&Vec3::new(0.1, 0.2, 0.8), 0.5));
        assert!(idx.any_closer(&Vec3::new(0.1, 0.2, 0.79), 0.5));
    }
}
