use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rayon::prelude::*;

use super::HexError;
use crate::tracer::{PointIndex, StreamSurface};
use crate::Vec3;

/// All surface points with an edge between points closer than `2r`.
#[derive(Clone, Debug)]
pub struct ProximityGraph {
    pub r: f64,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    /// Id of the surface each point belongs to.
    pub surface: Vec<u32>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl ProximityGraph {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Distinct surfaces among a point and its neighbours, ascending.
    pub fn surfaces_near(&self, i: usize) -> Vec<u32> {
        let mut s: Vec<u32> = self.neighbors(i).iter().map(|&j| self.surface[j as usize]).collect();
        s.push(self.surface[i]);
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Proximity graph over every point of every surface. Fails when a point sees
/// four or more surfaces, which means parallel surfaces came closer than `4r`.
pub fn build_proximity_graph(surfaces: &[StreamSurface], r: f64) -> Result<ProximityGraph, HexError> {
    if !(r > 0.0) {
        return Err(HexError::InvalidParam(format!("r = {r}")));
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut surface = Vec::new();
    for s in surfaces {
        points.extend_from_slice(&s.points);
        normals.extend_from_slice(&s.normals);
        surface.extend(std::iter::repeat(s.id).take(s.len()));
    }
    let g = link(r, points, normals, surface);
    if let Some(i) = (0..g.len()).find(|&i| g.surfaces_near(i).len() >= 4) {
        return Err(HexError::SeparationViolation {
            point: g.points[i].into(),
            surfaces: g.surfaces_near(i),
        });
    }
    Ok(g)
}

/// Like [`build_proximity_graph`], but points that break the separation
/// precondition are dropped instead of failing:
///
/// * points that see four or more surfaces;
/// * points that see two surfaces with nearly parallel normals
///   (`|n . n'| > cos 45deg`), which are then closer than `4r`;
/// * points with a point of their own surface within `2r` but more than `r`
///   off their tangent plane, where a surface folds back onto itself;
/// * points near two sheets of one surface, told apart by an offset of more
///   than `2r` along the normal.
///
/// Converging surfaces, such as planes through a singular axis, and surfaces
/// traced through a non-integrable field then leave gaps in the mesh. Returns
/// the graph and the number of dropped points.
pub fn build_proximity_graph_pruned(
    surfaces: &[StreamSurface],
    r: f64,
) -> Result<(ProximityGraph, usize), HexError> {
    if !(r > 0.0) {
        return Err(HexError::InvalidParam(format!("r = {r}")));
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut surface = Vec::new();
    for s in surfaces {
        points.extend_from_slice(&s.points);
        normals.extend_from_slice(&s.normals);
        surface.extend(std::iter::repeat(s.id).take(s.len()));
    }
    let full = link(r, points, normals, surface);
    let parallel = std::f64::consts::FRAC_1_SQRT_2;
    let keep: Vec<usize> = (0..full.len())
        .into_par_iter()
        .filter(|&i| {
            if full.surfaces_near(i).len() >= 4 {
                return false;
            }
            // another sheet of the same surface, where it folds back on itself
            let (p, n) = (full.points[i], full.normals[i]);
            let folded = full.neighbors(i).iter().any(|&j| {
                let j = j as usize;
                full.surface[j] == full.surface[i] && (full.points[j] - p).dot(&n).abs() > r
            });
            if folded {
                return false;
            }
            // two sheets of one surface within reach: the point cannot tell
            // which one it is near
            let mut nearest: Vec<(u32, usize, f64)> = Vec::new();
            for &j in full.neighbors(i) {
                let j = j as usize;
                let d = (full.points[j] - p).norm_squared();
                match nearest.iter_mut().find(|x| x.0 == full.surface[j]) {
                    Some(x) if d < x.2 => *x = (x.0, j, d),
                    Some(_) => {}
                    None => nearest.push((full.surface[j], j, d)),
                }
            }
            let two_sheets = full.neighbors(i).iter().any(|&j| {
                let j = j as usize;
                let &(_, a, _) = nearest.iter().find(|x| x.0 == full.surface[j]).unwrap();
                (full.points[j] - full.points[a]).dot(&full.normals[a]).abs() > 2.0 * r
            });
            if two_sheets {
                return false;
            }
            // one representative normal per surface in the neighbourhood
            let mut seen: Vec<(u32, Vec3)> = vec![(full.surface[i], full.normals[i])];
            for &j in full.neighbors(i) {
                let j = j as usize;
                if !seen.iter().any(|s| s.0 == full.surface[j]) {
                    seen.push((full.surface[j], full.normals[j]));
                }
            }
            seen.iter().enumerate().all(|(a, x)| seen[a + 1..].iter().all(|y| x.1.dot(&y.1).abs() <= parallel))
        })
        .collect();
    let dropped = full.len() - keep.len();
    if dropped == 0 {
        return Ok((full, 0));
    }
    // removing points never adds neighbours, so one pass suffices
    let g = link(
        r,
        keep.iter().map(|&i| full.points[i]).collect(),
        keep.iter().map(|&i| full.normals[i]).collect(),
        keep.iter().map(|&i| full.surface[i]).collect(),
    );
    Ok((g, dropped))
}

fn link(r: f64, points: Vec<Vec3>, normals: Vec<Vec3>, surface: Vec<u32>) -> ProximityGraph {
    let index = PointIndex::from_points(2.0 * r, &points);
    let lists: Vec<Vec<u32>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut out = Vec::new();
            index.for_each_within(p, 2.0 * r, |j, d| {
                if j as usize != i && d < 2.0 * r {
                    out.push(j);
                }
            });
            out.sort_unstable();
            out
        })
        .collect();
    let mut offsets = Vec::with_capacity(points.len() + 1);
    offsets.push(0);
    let mut neighbors = Vec::with_capacity(lists.iter().map(Vec::len).sum());
    for l in &lists {
        neighbors.extend_from_slice(l);
        offsets.push(neighbors.len());
    }
    ProximityGraph {
        r,
        points,
        normals,
        surface,
        offsets,
        neighbors,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PointClass {
    Surface = 1,
    Intersection = 2,
    Triple = 3,
}

/// Class of each point by the number of surfaces in its neighbourhood.
pub fn classify_vertices(g: &ProximityGraph) -> Vec<PointClass> {
    (0..g.len())
        .into_par_iter()
        .map(|i| match g.surfaces_near(i).len() {
            1 => PointClass::Surface,
            2 => PointClass::Intersection,
            _ => PointClass::Triple,
        })
        .collect()
}

/// One dual vertex: a connected cluster of triple-intersection points.
#[derive(Clone, Debug, PartialEq)]
pub struct StcVertex {
    pub position: Vec3,
    pub members: Vec<u32>,
    /// Surfaces meeting at the cluster, most frequent first.
    pub surfaces: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct StcGraph {
    pub vertices: Vec<StcVertex>,
    /// `(a, b)` with `a < b`, sorted, no duplicates.
    pub edges: Vec<(u32, u32)>,
    pub classes: Vec<PointClass>,
    /// Cluster whose Dijkstra region reached each point, if any.
    pub origin: Vec<Option<u32>>,
    pub graph: ProximityGraph,
}

impl StcGraph {
    pub fn incident(&self) -> Vec<Vec<u32>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            inc[a as usize].push(b);
            inc[b as usize].push(a);
        }
        inc
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Item {
    dist: f64,
    vertex: u32,
}

impl Eq for Item {}

impl Ord for Item {
    // min-heap on distance, ties by vertex id
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `true` if one point's surface set contains the other's. Keeps clusters and
/// Dijkstra fronts on one intersection curve: bands of two different curves
/// on the same surface may touch where the curves nearly meet.
fn compatible(a: &[u32], b: &[u32]) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().all(|s| large.contains(s))
}

/// Cluster triple points that see the same three surfaces near the same
/// sheets of them (a surface may pass by several times), grow clusters
/// along intersection curves by multi-source Dijkstra and connect clusters
/// whose regions touch.
pub fn build_stc(g: ProximityGraph, classes: Vec<PointClass>) -> Result<StcGraph, HexError> {
    let n = g.len();
    let near: Vec<Vec<u32>> = (0..n).into_par_iter().map(|i| g.surfaces_near(i)).collect();
    const UNSET: u32 = u32::MAX;
    // nearest point of each nearby surface, to tell sheets of one surface apart
    let anchors: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if classes[i] == PointClass::Surface {
                return Vec::new();
            }
            near[i]
                .iter()
                .map(|&s| {
                    let a = std::iter::once(i as u32)
                        .chain(g.neighbors(i).iter().copied())
                        .filter(|&j| g.surface[j as usize] == s)
                        .min_by(|&a, &b| {
                            let da = (g.points[a as usize] - g.points[i]).norm_squared();
                            let db = (g.points[b as usize] - g.points[i]).norm_squared();
                            da.total_cmp(&db).then(a.cmp(&b))
                        })
                        .unwrap();
                    (s, a)
                })
                .collect()
        })
        .collect();
    // Same surfaces up to containment, and near the same sheet of each shared
    // surface. Sheets lie at least 4r apart along their normal.
    let linked = |i: usize, j: usize| {
        compatible(&near[i], &near[j])
            && anchors[i].iter().all(|&(s, a)| {
                anchors[j].iter().filter(|x| x.0 == s).all(|&(_, b)| {
                    let (a, b) = (a as usize, b as usize);
                    (g.points[b] - g.points[a]).dot(&g.normals[a]).abs() < 2.0 * g.r
                })
            })
    };
    let mut cluster = vec![UNSET; n];
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for seed in 0..n {
        if classes[seed] != PointClass::Triple || cluster[seed] != UNSET {
            continue;
        }
        let id = groups.len() as u32;
        let mut members = vec![seed as u32];
        cluster[seed] = id;
        let mut head = 0;
        while head < members.len() {
            let i = members[head] as usize;
            head += 1;
            for &j in g.neighbors(i) {
                let ju = j as usize;
                if classes[ju] == PointClass::Triple && cluster[ju] == UNSET && near[ju] == near[i] && linked(i, ju) {
                    cluster[j as usize] = id;
                    members.push(j);
                }
            }
        }
        groups.push(members);
    }
    let centre = |m: &[u32]| m.iter().map(|&k| g.points[k as usize]).sum::<Vec3>() / m.len() as f64;
    let mut vertices = Vec::with_capacity(groups.len());
    for mut members in groups {
        members.sort_unstable();
        let position = centre(&members);
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for &m in &members {
            for &s in &near[m as usize] {
                match counts.iter_mut().find(|c| c.0 == s) {
                    Some(c) => c.1 += 1,
                    None => counts.push((s, 1)),
                }
            }
        }
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        vertices.push(StcVertex {
            position,
            members,
            surfaces: counts.into_iter().map(|c| c.0).collect(),
        });
    }
    if vertices.is_empty() {
        return Err(HexError::NoTripleIntersections);
    }
    // Dijkstra from all clusters at once over intersection and triple points
    let mut dist = vec![f64::INFINITY; n];
    let mut origin = cluster.clone();
    let mut heap = BinaryHeap::new();
    for i in 0..n {
        if cluster[i] != UNSET {
            dist[i] = 0.0;
            heap.push(Item { dist: 0.0, vertex: i as u32 });
        }
    }
    while let Some(Item { dist: d, vertex }) = heap.pop() {
        let i = vertex as usize;
        if d > dist[i] {
            continue;
        }
        for &j in g.neighbors(i) {
            let j = j as usize;
            if classes[j] == PointClass::Surface || !linked(i, j) {
                continue;
            }
            let nd = d + (g.points[j] - g.points[i]).norm();
            if nd < dist[j] || (nd == dist[j] && origin[i] < origin[j]) {
                dist[j] = nd;
                origin[j] = origin[i];
                heap.push(Item { dist: nd, vertex: j as u32 });
            }
        }
    }
    let mut edges = BTreeSet::new();
    for i in 0..n {
        if origin[i] == UNSET {
            continue;
        }
        for &j in g.neighbors(i) {
            let oj = origin[j as usize];
            if oj != UNSET && oj != origin[i] && linked(i, j as usize) {
                edges.insert((origin[i].min(oj), origin[i].max(oj)));
            }
        }
    }
    Ok(StcGraph {
        vertices,
        edges: edges.into_iter().collect(),
        classes,
        origin: origin.iter().map(|&o| (o != UNSET).then_some(o)).collect(),
        graph: g,
    })
}
