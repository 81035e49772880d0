//! Static KD-tree over a point cloud providing exact nearest-neighbor
//! distances. Every metric in this crate bottoms out in these queries.
//!
//! The tree median-splits on the widest-extent axis and prunes with per-node
//! bounding boxes. Queries return the true minimum Euclidean distance; ties
//! are broken toward the lowest original point index so downstream exports
//! are reproducible. Squared distances are minimized and rooted once at the
//! end.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

const BUCKET_SIZE: usize = 16;
const LEAF: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Entry {
    p: [f64; 3],
    index: u32,
}

#[derive(Clone, Copy)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// `LEAF` marks a leaf; otherwise index of the left child.
    left: u32,
    right: u32,
    start: u32,
    end: u32,
}

/// Immutable exact nearest-neighbor index over a fixed point cloud.
pub struct SpatialIndex {
    nodes: Vec<Node>,
    entries: Vec<Entry>,
    root: u32,
    len: usize,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn box_dist2(q: &[f64; 3], min: &[f64; 3], max: &[f64; 3]) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let v = q[a];
        if v < min[a] {
            let g = min[a] - v;
            d += g * g;
        } else if v > max[a] {
            let g = v - max[a];
            d += g * g;
        }
    }
    d
}

impl SpatialIndex {
    /// Builds the index. Deterministic for a given input order.
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud("cannot index an empty cloud".into()));
        }
        let mut entries: Vec<Entry> = cloud
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| Entry {
                p: [p.x, p.y, p.z],
                index: i as u32,
            })
            .collect();
        let n = entries.len();
        let mut nodes = Vec::with_capacity(2 * n / BUCKET_SIZE + 2);
        let root = build_node(&mut entries, 0, n, &mut nodes);
        Ok(SpatialIndex {
            nodes,
            entries,
            root,
            len: n,
        })
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Exact nearest neighbor of `q`: `(distance, original point index)`.
    /// Distance ties resolve to the lowest index.
    pub fn nearest(&self, q: &Point3) -> (f64, usize) {
        debug_assert!(q.is_finite());
        let qa = [q.x, q.y, q.z];
        let mut best_d2 = f64::INFINITY;
        let mut best_idx = u32::MAX;
        self.search(self.root, &qa, &mut best_d2, &mut best_idx);
        (best_d2.sqrt(), best_idx as usize)
    }

    /// Nearest-neighbor distance for each query point, in query order.
    /// Parallelized internally; results are identical to a sequential
    /// [`SpatialIndex::nearest`] loop.
    pub fn nearest_batch(&self, queries: &PointCloud) -> Vec<f64> {
        queries
            .points
            .par_iter()
            .with_min_len(1024)
            .map(|q| self.nearest(q).0)
            .collect()
    }

    fn search(&self, node_id: u32, q: &[f64; 3], best_d2: &mut f64, best_idx: &mut u32) {
        let node = &self.nodes[node_id as usize];
        if node.left == LEAF {
            for e in &self.entries[node.start as usize..node.end as usize] {
                let d2 = dist2(q, &e.p);
                if d2 < *best_d2 || (d2 == *best_d2 && e.index < *best_idx) {
                    *best_d2 = d2;
                    *best_idx = e.index;
                }
            }
            return;
        }
        let ln = &self.nodes[node.left as usize];
        let rn = &self.nodes[node.right as usize];
        let ld = box_dist2(q, &ln.min, &ln.max);
        let rd = box_dist2(q, &rn.min, &rn.max);
        let (first, fd, second, sd) = if ld <= rd {
            (node.left, ld, node.right, rd)
        } else {
            (node.right, rd, node.left, ld)
        };
        // Strict > keeps equal-distance candidates reachable for the
        // lowest-index tie rule.
        if fd <= *best_d2 {
            self.search(first, q, best_d2, best_idx);
        }
        if sd <= *best_d2 {
            self.search(second, q, best_d2, best_idx);
        }
    }
}

fn build_node(entries: &mut [Entry], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for e in &entries[start..end] {
        for a in 0..3 {
            min[a] = min[a].min(e.p[a]);
            max[a] = max[a].max(e.p[a]);
        }
    }
    if end - start <= BUCKET_SIZE {
        nodes.push(Node {
            min,
            max,
            left: LEAF,
            right: LEAF,
            start: start as u32,
            end: end as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    let ext = [max[0] - min[0], max[1] - min[1], max[2] - min[2]];
    let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
        0
    } else if ext[1] >= ext[2] {
        1
    } else {
        2
    };
    let mid = (end - start) / 2;
    entries[start..end].select_nth_unstable_by(mid, |a, b| {
        a.p[axis]
            .partial_cmp(&b.p[axis])
            .expect("finite coordinates")
    });
    let left = build_node(entries, start, start + mid, nodes);
    let right = build_node(entries, start + mid, end, nodes);
    nodes.push(Node {
        min,
        max,
        left,
        right,
        start: 0,
        end: 0,
    });
    (nodes.len() - 1) as u32
}

/// Exhaustive scan used as the exactness oracle: same distance expression,
/// same tie rule, no pruning.
pub fn brute_force_nearest(cloud: &PointCloud, q: &Point3) -> (f64, usize) {
    let qa = [q.x, q.y, q.z];
    let mut best_d2 = f64::INFINITY;
    let mut best_idx = usize::MAX;
    for (i, p) in cloud.points.iter().enumerate() {
        let d2 = dist2(&qa, &[p.x, p.y, p.z]);
        if d2 < best_d2 {
            best_d2 = d2;
            best_idx = i;
        }
    }
    (best_d2.sqrt(), best_idx)
}
