//! Static 3-D kd-tree for k-nearest-neighbour queries. Built once over a
//! borrowed point slice; splits cycle through x, y, z at the median.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

pub(crate) struct KdTree<'a> {
    pts: &'a [[f64; 3]],
    // Permutation of point indices arranged as an implicit balanced tree.
    order: Vec<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl<'a> KdTree<'a> {
    pub fn build(pts: &'a [[f64; 3]]) -> Self {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        Self::build_range(pts, &mut order, 0);
        KdTree { pts, order }
    }

    fn build_range(pts: &[[f64; 3]], order: &mut [usize], depth: usize) {
        if order.len() <= LEAF_SIZE {
            return;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let (left, right) = order.split_at_mut(mid);
        Self::build_range(pts, left, depth + 1);
        Self::build_range(pts, &mut right[1..], depth + 1);
    }

    /// Squared distances to the `k` nearest points other than `exclude`,
    /// ascending.
    pub fn nearest_excluding(&self, q: &[f64; 3], k: usize, exclude: usize) -> Vec<f64> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.order, 0, q, k, exclude, &mut heap);
        let mut d: Vec<f64> = heap.into_iter().map(|c| c.dist2).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    fn offer(&self, heap: &mut BinaryHeap<Candidate>, k: usize, c: Candidate) {
        if heap.len() < k {
            heap.push(c);
        } else if let Some(top) = heap.peek() {
            if c < *top {
                heap.pop();
                heap.push(c);
            }
        }
    }

    fn search(
        &self,
        order: &[usize],
        depth: usize,
        q: &[f64; 3],
        k: usize,
        exclude: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if order.len() <= LEAF_SIZE {
            for &i in order {
                if i != exclude {
                    let c = Candidate {
                        dist2: dist2(q, &self.pts[i]),
                        index: i,
                    };
                    self.offer(heap, k, c);
                }
            }
            return;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        let pivot = order[mid];
        if pivot != exclude {
            let c = Candidate {
                dist2: dist2(q, &self.pts[pivot]),
                index: pivot,
            };
            self.offer(heap, k, c);
        }
        let diff = q[axis] - self.pts[pivot][axis];
        let (near, far) = if diff < 0.0 {
            (&order[..mid], &order[mid + 1..])
        } else {
            (&order[mid + 1..], &order[..mid])
        };
        self.search(near, depth + 1, q, k, exclude, heap);
        let worst = if heap.len() < k {
            f64::INFINITY
        } else {
            heap.peek().map_or(f64::INFINITY, |c| c.dist2)
        };
        if diff * diff <= worst {
            self.search(far, depth + 1, q, k, exclude, heap);
        }
    }
}
