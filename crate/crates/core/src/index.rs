//! Radius-search spatial index over point positions.
//!
//! A kd-tree with median splits on the widest axis. Radius queries return
//! exactly the brute-force result set; `ball_query` additionally excludes
//! the center point and caps the result at the `K_max` nearest neighbors
//! with deterministic tie-breaks.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Neighbor cap for ball queries; bounds worst-case cost on dense scans.
pub const DEFAULT_K_MAX: usize = 1024;

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Immutable acceleration structure over a cloud's positions.
#[derive(Debug)]
pub struct SpatialIndex {
    positions: Vec<[f64; 3]>,
    /// Point ids in tree order; leaves reference ranges of this array.
    ids: Vec<u32>,
    root: Node,
    k_max: usize,
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        Self::build_with_cap(cloud, DEFAULT_K_MAX)
    }

    pub fn build_with_cap(cloud: &PointCloud, k_max: usize) -> Self {
        let positions = cloud.positions.clone();
        let mut ids: Vec<u32> = (0..positions.len() as u32).collect();
        let root = build_node(&positions, &mut ids, 0);
        SpatialIndex {
            positions,
            ids,
            root,
            k_max,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// All point ids within `r` of `center` (inclusive boundary), in
    /// ascending id order. Does not exclude any point and does not cap.
    pub fn radius_search(&self, center: [f64; 3], r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if r >= 0.0 {
            collect(&self.root, &self.positions, &self.ids, center, r * r, &mut out);
            out.sort_unstable();
        }
        out
    }

    /// Neighbors of the point `center_id` within radius `r`, excluding the
    /// point itself. If more than `K_max` points qualify, the `K_max`
    /// nearest are kept (ties by lower id). Result is in ascending id order.
    pub fn ball_query(&self, center_id: usize, r: f64) -> Result<Vec<u32>> {
        if center_id >= self.positions.len() {
            return Err(Error::parameter(format!(
                "center_id {center_id} out of range for {} points",
                self.positions.len()
            )));
        }
        if !(r >= 0.0) {
            return Err(Error::parameter(format!("radius must be >= 0, got {r}")));
        }
        let center = self.positions[center_id];
        let mut ids = self.radius_search(center, r);
        ids.retain(|&j| j as usize != center_id);
        if ids.len() > self.k_max {
            let mut with_dist: Vec<(f64, u32)> = ids
                .iter()
                .map(|&j| (dist2(self.positions[j as usize], center), j))
                .collect();
            with_dist.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            with_dist.truncate(self.k_max);
            ids = with_dist.into_iter().map(|(_, j)| j).collect();
            ids.sort_unstable();
        }
        Ok(ids)
    }

    pub fn position(&self, id: usize) -> [f64; 3] {
        self.positions[id]
    }
}

fn build_node(positions: &[[f64; 3]], ids: &mut [u32], offset: u32) -> Node {
    if ids.len() <= LEAF_SIZE {
        return Node::Leaf {
            start: offset,
            end: offset + ids.len() as u32,
        };
    }
    // Split on the widest axis at the median.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &id in ids.iter() {
        let p = positions[id as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut axis = 0;
    for a in 1..3 {
        if hi[a] - lo[a] > hi[axis] - lo[axis] {
            axis = a;
        }
    }
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        positions[a as usize][axis]
            .partial_cmp(&positions[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let value = positions[ids[mid] as usize][axis];
    let (left_ids, right_ids) = ids.split_at_mut(mid);
    let left = build_node(positions, left_ids, offset);
    let right = build_node(positions, right_ids, offset + mid as u32);
    Node::Split {
        axis: axis as u8,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn collect(
    node: &Node,
    positions: &[[f64; 3]],
    ids: &[u32],
    center: [f64; 3],
    r2: f64,
    out: &mut Vec<u32>,
) {
    match node {
        Node::Leaf { start, end } => {
            for &id in &ids[*start as usize..*end as usize] {
                if dist2(positions[id as usize], center) <= r2 {
                    out.push(id);
                }
            }
        }
        Node::Split {
            axis,
            value,
            left,
            right,
        } => {
            let d = center[*axis as usize] - value;
            // The split point itself lives in the right child, so the right
            // subtree must be visited whenever d >= -r as well.
            if d <= 0.0 || d * d <= r2 {
                collect(left, positions, ids, center, r2, out);
            }
            if d >= 0.0 || d * d <= r2 {
                collect(right, positions, ids, center, r2, out);
            }
        }
    }
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
