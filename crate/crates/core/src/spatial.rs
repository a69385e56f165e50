//! Static kd-tree over a point set.
//!
//! Answers k-nearest-neighbor, radius and axis-aligned cube queries. Results
//! are exact: ties are broken by point index, so the output is identical to a
//! sorted linear scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

const LEAF_SIZE: usize = 12;
const NO_CHILD: u32 = u32::MAX;

/// A query hit: index into the indexed point slice and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist_sq.sqrt()
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

enum CubeHit {
    Node(std::ops::Range<usize>),
    Slot(usize),
}

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == NO_CHILD
    }

    fn min_dist_sq(&self, q: &[f64; 3]) -> f64 {
        let mut acc = 0.0;
        for k in 0..3 {
            let d = if q[k] < self.lo[k] {
                self.lo[k] - q[k]
            } else if q[k] > self.hi[k] {
                q[k] - self.hi[k]
            } else {
                0.0
            };
            acc += d * d;
        }
        acc
    }
}

/// Read-only kd-tree; safe to share across threads.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    pts: Vec<[f64; 3]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn in_cube(p: &[f64; 3], c: &[f64; 3], half: f64) -> bool {
    (p[0] - c[0]).abs() <= half && (p[1] - c[1]).abs() <= half && (p[2] - c[2]).abs() <= half
}

impl SpatialIndex {
    pub fn new(points: &[Point3]) -> Self {
        let mut idx = Self {
            pts: Vec::with_capacity(points.len()),
            ids: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if points.is_empty() {
            return idx;
        }
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        idx.build(&raw, 0, points.len());
        idx.pts = idx.ids.iter().map(|&i| raw[i]).collect();
        idx
    }

    pub fn from_cloud(cloud: &PointCloud) -> Self {
        Self::new(cloud.points())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn build(&mut self, raw: &[[f64; 3]], start: usize, end: usize) -> u32 {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.ids[start..end] {
            for k in 0..3 {
                lo[k] = lo[k].min(raw[i][k]);
                hi[k] = hi[k].max(raw[i][k]);
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        if end - start > LEAF_SIZE {
            let axis = (0..3)
                .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
                .unwrap_or(0);
            let mid = (start + end) / 2;
            self.ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                raw[a][axis].total_cmp(&raw[b][axis]).then(a.cmp(&b))
            });
            let left = self.build(raw, start, mid);
            let right = self.build(raw, mid, end);
            let node = &mut self.nodes[id as usize];
            node.left = left;
            node.right = right;
        }
        id
    }

    /// The `k` nearest points to `q`, sorted by `(distance, index)`.
    pub fn nearest(&self, q: &Point3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if heap.len() == k {
                let worst = heap.peek().map(|w| w.dist_sq).unwrap_or(f64::INFINITY);
                if node.min_dist_sq(&q) > worst {
                    continue;
                }
            }
            if node.is_leaf() {
                for slot in node.start as usize..node.end as usize {
                    let cand = Neighbor {
                        index: self.ids[slot],
                        dist_sq: dist_sq(&self.pts[slot], &q),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if let Some(worst) = heap.peek() {
                        if cand.key_cmp(worst) == Ordering::Less {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
            } else {
                let l = &self.nodes[node.left as usize];
                let r = &self.nodes[node.right as usize];
                // Push the farther child first so the nearer one is explored first.
                if l.min_dist_sq(&q) <= r.min_dist_sq(&q) {
                    stack.push(node.right);
                    stack.push(node.left);
                } else {
                    stack.push(node.left);
                    stack.push(node.right);
                }
            }
        }
        heap.into_sorted_vec()
    }

    pub fn nearest_one(&self, q: &Point3) -> Option<Neighbor> {
        self.nearest(q, 1).into_iter().next()
    }

    /// All points with `|p - q| <= radius`, sorted by `(distance, index)`.
    pub fn within_radius(&self, q: &Point3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if self.nodes.is_empty() || radius.is_nan() || radius < 0.0 {
            return out;
        }
        let r2 = radius * radius;
        let q = [q.x, q.y, q.z];
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.min_dist_sq(&q) > r2 {
                continue;
            }
            if node.is_leaf() {
                for slot in node.start as usize..node.end as usize {
                    let d2 = dist_sq(&self.pts[slot], &q);
                    if d2 <= r2 {
                        out.push(Neighbor {
                            index: self.ids[slot],
                            dist_sq: d2,
                        });
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        out.sort_unstable();
        out
    }

    /// Number of points inside the closed axis-aligned cube of side `side`
    /// centered at `center`.
    pub fn count_in_cube(&self, center: &Point3, side: f64) -> usize {
        let mut count = 0;
        self.visit_cube(center, side, |hit| match hit {
            CubeHit::Node(range) => count += range.len(),
            CubeHit::Slot(_) => count += 1,
        });
        count
    }

    /// Indices of points inside the cube, ascending.
    pub fn collect_in_cube(&self, center: &Point3, side: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let ids = &self.ids;
        self.visit_cube(center, side, |hit| match hit {
            CubeHit::Node(range) => out.extend_from_slice(&ids[range]),
            CubeHit::Slot(slot) => out.push(ids[slot]),
        });
        out.sort_unstable();
        out
    }

    fn visit_cube(
        &self,
        center: &Point3,
        side: f64,
        mut on_hit: impl FnMut(CubeHit),
    ) {
        if self.nodes.is_empty() || side.is_nan() || side < 0.0 {
            return;
        }
        let c = [center.x, center.y, center.z];
        let half = side / 2.0;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            let mut disjoint = false;
            let mut inside = true;
            for k in 0..3 {
                let dlo = node.lo[k] - c[k];
                let dhi = node.hi[k] - c[k];
                if dhi < -half || dlo > half {
                    disjoint = true;
                    break;
                }
                if dlo.abs() > half || dhi.abs() > half {
                    inside = false;
                }
            }
            if disjoint {
                continue;
            }
            if inside {
                on_hit(CubeHit::Node(node.start as usize..node.end as usize));
            } else if node.is_leaf() {
                for slot in node.start as usize..node.end as usize {
                    if in_cube(&self.pts[slot], &c, half) {
                        on_hit(CubeHit::Slot(slot));
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
    }
}

/// Mean distance from each point to its nearest other point.
pub fn average_nn_distance(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: cloud.len(),
        });
    }
    let index = SpatialIndex::from_cloud(cloud);
    Ok(average_nn_distance_with(cloud.points(), &index))
}

pub(crate) fn average_nn_distance_with(points: &[Point3], index: &SpatialIndex) -> f64 {
    let dists: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .nearest(p, 2)
                .into_iter()
                .find(|n| n.index != i)
                .map(|n| n.distance())
                .unwrap_or(0.0)
        })
        .collect();
    dists.iter().sum::<f64>() / points.len() as f64
}
