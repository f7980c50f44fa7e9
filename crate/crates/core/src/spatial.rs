//! Static 3-d tree for nearest-neighbor queries.
//!
//! Distances are computed with `(a - b).norm_squared()` everywhere, so the
//! results are bit-identical to a brute-force scan using the same metric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::types::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = (start + end) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Index and squared distance of the closest point (smallest index on ties).
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(0, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` closest points as `(index, squared distance)`, ascending.
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.points.is_empty() {
            self.knn_rec(0, q, k, &mut heap);
        }
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|c| (c.1, c.0)).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn knn_rec(&self, node: usize, q: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate((self.points[i] - q).norm_squared(), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().0 {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive), ascending.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_rec(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_rec(&self, node: usize, q: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .filter(|&&i| (self.points[i] - q).norm_squared() <= r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.within_rec(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.within_rec(right, q, r2, out);
                }
            }
        }
    }
}
