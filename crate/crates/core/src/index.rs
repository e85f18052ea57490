//! Static k-d tree over a cloud. Queries reproduce a brute-force scan
//! exactly, including the ascending-index tie rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{dist2, Point3};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable acceleration structure; safe to share across threads.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points().to_vec()).expect("clouds are never empty")
    }

    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = SpatialIndex {
            perm: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        let n = index.points.len();
        index.build_node(0, n);
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.perm[start..end] {
            let p = &self.points[i];
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.perm[mid]][axis];
        self.nodes.push(Node::Leaf { start, end }); // placeholder
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// The `k` nearest points, ascending by distance then by index.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.points.len() {
            return Err(Error::TooManyNeighbours {
                requested: k,
                available: self.points.len(),
            });
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_node(0, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        Ok(out.into_iter().map(|c| c.index).collect())
    }

    /// Nearest point index and its squared distance.
    pub fn nearest(&self, query: &Point3) -> (usize, f64) {
        let mut heap = BinaryHeap::with_capacity(2);
        self.knn_node(0, query, 1, &mut heap);
        let c = heap.pop().expect("index is non-empty");
        (c.index, c.d2)
    }

    fn knn_node(&self, node: usize, q: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    let c = Candidate {
                        d2: dist2(q, &self.points[i]),
                        index: i,
                    };
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
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_node(near, q, k, heap);
                let bound = diff * diff;
                if heap.len() < k || bound <= heap.peek().unwrap().d2 {
                    self.knn_node(far, q, k, heap);
                }
            }
        }
    }

    /// Every point within distance `r` (inclusive), ascending by index.
    pub fn radius_query(&self, query: &Point3, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if r.is_nan() || r < 0.0 {
            return out;
        }
        self.radius_node(0, query, r * r, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_node(&self, node: usize, q: &Point3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.perm[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| dist2(q, &self.points[i]) <= r2),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.radius_node(near, q, r2, out);
                if diff * diff <= r2 {
                    self.radius_node(far, q, r2, out);
                }
            }
        }
    }
}
