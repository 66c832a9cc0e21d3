//! Exact k-NN and radius search over a fixed point cloud.
//!
//! A bucketed kd-tree with median splits. Results are exact and
//! deterministic: neighbors are ordered by distance with ties broken by the
//! lower point index, so every downstream feature is reproducible. The tree
//! is immutable after construction and safe to query concurrently.

use std::collections::BinaryHeap;

use nalgebra::Point3;

use super::PointCloud;

const LEAF_SIZE: usize = 16;

#[derive(Debug)]
enum Node {
    Split { dim: usize, value: f64, left: usize, right: usize },
    Leaf { start: usize, end: usize },
}

#[derive(Debug)]
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    // Permutation of original indices; leaves reference ranges of it.
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: usize,
}

/// f64 distances are always finite here; order them totally.
#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}
impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let points = cloud.points().to_vec();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        let root = build_node(&points, &mut order, 0, points.len(), &mut nodes);
        Self { points, order, nodes, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, ordered by `(distance, index)`.
    /// Requests larger than the cloud are clamped to the cloud size.
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        // Max-heap over (d², index): the lexicographically largest candidate
        // is evicted first, which keeps lower indices on distance ties.
        let mut heap: BinaryHeap<(Dist, usize)> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &mut heap);
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|(d, i)| (i, d.0.sqrt())).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// The `k` nearest neighbors of cloud point `center`, excluding itself.
    pub fn knn_excluding(&self, center: usize, k: usize) -> Vec<(usize, f64)> {
        let mut out = self.knn(&self.points[center], k + 1);
        out.retain(|&(i, _)| i != center);
        out.truncate(k);
        out
    }

    /// The single nearest point to `query` as `(index, distance)`.
    pub fn nearest(&self, query: &Point3<f64>) -> (usize, f64) {
        self.knn(query, 1)[0]
    }

    /// All points within `radius` (inclusive), ordered by `(distance, index)`.
    pub fn within_radius(&self, query: &Point3<f64>, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.collect_radius(self.root, query, radius * radius, &mut out);
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn search(&self, node: usize, query: &Point3<f64>, k: usize, heap: &mut BinaryHeap<(Dist, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let d2 = (self.points[idx] - query).norm_squared();
                    let candidate = (Dist(d2), idx);
                    if heap.len() < k {
                        heap.push(candidate);
                    } else if candidate < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(candidate);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // Visit the far side unless every point there is strictly
                // worse than the current worst candidate; on exact distance
                // ties an index tie-break may still apply.
                let plane_d2 = diff * diff;
                if heap.len() < k || plane_d2 <= heap.peek().unwrap().0 .0 {
                    self.search(far, query, k, heap);
                }
            }
        }
    }

    fn collect_radius(&self, node: usize, query: &Point3<f64>, r2: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start..end] {
                    let d2 = (self.points[idx] - query).norm_squared();
                    if d2 <= r2 {
                        out.push((idx, d2.sqrt()));
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = query[dim] - value;
                if diff <= 0.0 {
                    self.collect_radius(left, query, r2, out);
                    if diff * diff <= r2 {
                        self.collect_radius(right, query, r2, out);
                    }
                } else {
                    self.collect_radius(right, query, r2, out);
                    if diff * diff <= r2 {
                        self.collect_radius(left, query, r2, out);
                    }
                }
            }
        }
    }
}

fn build_node(
    points: &[Point3<f64>],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return nodes.len() - 1;
    }

    // Split along the widest dimension of this subset.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &idx in &order[start..end] {
        for d in 0..3 {
            lo[d] = lo[d].min(points[idx][d]);
            hi[d] = hi[d].max(points[idx][d]);
        }
    }
    let dim = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();

    let mid = len / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        points[a][dim].total_cmp(&points[b][dim]).then(a.cmp(&b))
    });
    let value = points[order[start + mid]][dim];

    let left = build_node(points, order, start, start + mid, nodes);
    let right = build_node(points, order, start + mid, end, nodes);
    nodes.push(Node::Split { dim, value, left, right });
    nodes.len() - 1
}
