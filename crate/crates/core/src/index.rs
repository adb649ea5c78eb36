//! Exact Euclidean k-d tree that returns the same tie-broken top-k as a
//! linear scan.
//!
//! Pruning compares a box lower bound against the current k-th distance
//! strictly, so boxes that could hold a point at exactly the k-th distance are
//! still visited and the full ranking key decides.

use std::ops::Range;

use crate::dataset::LabeledExample;
use crate::neighbors::{Neighbor, Query, RankKey, TopK};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    start: usize,
    end: usize,
    /// Children node ids; `usize::MAX` for leaves.
    left: usize,
    right: usize,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    tiebreaks: Vec<f64>,
    labels: Vec<u8>,
    positions: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node: `dim` minimums followed by `dim` maximums.
    boxes: Vec<f64>,
}

impl KdTree {
    /// Indexes `examples[range]`, remembering each example's position.
    pub fn build(examples: &[LabeledExample], range: Range<usize>) -> Self {
        let dim = examples.get(range.start).map_or(0, |e| e.input.len());
        let mut order: Vec<usize> = range.collect();
        let mut tree = KdTree {
            dim,
            coords: Vec::new(),
            tiebreaks: Vec::new(),
            labels: Vec::new(),
            positions: Vec::new(),
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        if !order.is_empty() {
            tree.split(examples, &mut order, 0);
        }
        tree.coords.reserve(order.len() * dim);
        for &p in &order {
            tree.coords.extend_from_slice(&examples[p].input);
            tree.tiebreaks.push(examples[p].tiebreak);
            tree.labels.push(examples[p].label);
            tree.positions.push(p);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn split(&mut self, examples: &[LabeledExample], order: &mut [usize], offset: usize) -> usize {
        let id = self.nodes.len();
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &p in order.iter() {
            for (d, &x) in examples[p].input.iter().enumerate() {
                lo[d] = lo[d].min(x);
                hi[d] = hi[d].max(x);
            }
        }
        self.boxes.extend_from_slice(&lo);
        self.boxes.extend_from_slice(&hi);
        self.nodes.push(Node { start: offset, end: offset + order.len(), left: usize::MAX, right: usize::MAX });
        if order.len() <= LEAF_SIZE {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            examples[a].input[axis].total_cmp(&examples[b].input[axis])
        });
        let (left, right) = order.split_at_mut(mid);
        let l = self.split(examples, left, offset);
        let r = self.split(examples, right, offset + mid);
        self.nodes[id].left = l;
        self.nodes[id].right = r;
        id
    }

    #[inline]
    fn box_lower_bound(&self, node: usize, q: &[f64]) -> f64 {
        let b = &self.boxes[node * 2 * self.dim..(node + 1) * 2 * self.dim];
        let (lo, hi) = b.split_at(self.dim);
        let mut sum = 0.0;
        for d in 0..self.dim {
            let gap = if q[d] < lo[d] {
                lo[d] - q[d]
            } else if q[d] > hi[d] {
                q[d] - hi[d]
            } else {
                0.0
            };
            sum += gap * gap;
        }
        sum.sqrt()
    }

    #[inline]
    fn key(&self, slot: usize, query: &Query) -> RankKey {
        let p = &self.coords[slot * self.dim..(slot + 1) * self.dim];
        let mut sum = 0.0;
        for d in 0..self.dim {
            let diff = query.input[d] - p[d];
            sum += diff * diff;
        }
        RankKey {
            distance: sum.sqrt(),
            gap: (self.tiebreaks[slot] - query.tiebreak).abs(),
            position: self.positions[slot],
        }
    }

    /// The `k` nearest indexed examples in ranking order (fewer if the tree is small).
    pub fn nearest(&self, query: &Query, k: usize) -> Vec<Neighbor> {
        let mut best = TopK::new(k);
        if !self.is_empty() && k > 0 {
            self.search(0, query, &mut best);
        }
        best.into_vec()
    }

    fn search(&self, node: usize, query: &Query, best: &mut TopK) {
        let n = &self.nodes[node];
        if n.left == usize::MAX {
            for slot in n.start..n.end {
                best.offer(Neighbor { key: self.key(slot, query), label: self.labels[slot] });
            }
            return;
        }
        let (dl, dr) = (self.box_lower_bound(n.left, &query.input), self.box_lower_bound(n.right, &query.input));
        let (first, second, d_second) = if dl <= dr { (n.left, n.right, dr) } else { (n.right, n.left, dl) };
        let d_first = dl.min(dr);
        if !self.prunable(best, d_first) {
            self.search(first, query, best);
        }
        if !self.prunable(best, d_second) {
            self.search(second, query, best);
        }
    }

    #[inline]
    fn prunable(&self, best: &TopK, lower_bound: f64) -> bool {
        best.is_full() && best.worst().is_some_and(|w| lower_bound > w.distance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_quadrant_dataset;
    use crate::neighbors::{rank_key, Euclidean};
    use crate::rng;
    use rand::Rng as _;

    #[test]
    fn matches_sorted_scan() {
        for (seed, dim) in [(1u64, 1usize), (2, 2), (3, 3), (4, 5)] {
            let data = generate_quadrant_dataset(700, dim, 0.1, seed).unwrap().into_examples();
            let tree = KdTree::build(&data, 50..650);
            assert_eq!(tree.len(), 600);
            let mut qrng = rng::stream(seed, rng::TAG_DOMAIN, 1);
            for _ in 0..100 {
                let q = Query::new((0..dim).map(|_| qrng.gen_range(-1.2..1.2)).collect(), qrng.gen());
                let mut all: Vec<RankKey> = (50..650).map(|p| rank_key(&data[p], p, &q, &Euclidean)).collect();
                all.sort();
                let got: Vec<RankKey> = tree.nearest(&q, 7).iter().map(|n| n.key).collect();
                assert_eq!(got, all[..7].to_vec());
            }
        }
    }

    #[test]
    fn duplicated_points_rank_by_tiebreak() {
        let data: Vec<LabeledExample> = (0..100)
            .map(|i| LabeledExample::new(vec![0.25, -0.25], (i % 2) as u8, (i as f64) / 100.0).unwrap())
            .collect();
        let tree = KdTree::build(&data, 0..100);
        let q = Query::new(vec![0.0, 0.0], 0.505);
        let mut all: Vec<RankKey> = (0..100).map(|p| rank_key(&data[p], p, &q, &Euclidean)).collect();
        all.sort();
        let got: Vec<RankKey> = tree.nearest(&q, 4).iter().map(|n| n.key).collect();
        assert_eq!(got, all[..4].to_vec());
        assert!(got.iter().all(|k| k.distance == got[0].distance));
        let mut near: Vec<usize> = got.iter().map(|k| k.position).collect();
        near.sort();
        assert_eq!(near, vec![49, 50, 51, 52]);
    }

    #[test]
    fn empty_and_small_trees() {
        let data = generate_quadrant_dataset(3, 2, 0.1, 1).unwrap().into_examples();
        let q = Query::new(vec![0.0, 0.0], 0.5);
        assert!(KdTree::build(&data, 1..1).nearest(&q, 3).is_empty());
        assert_eq!(KdTree::build(&data, 0..3).nearest(&q, 5).len(), 3);
    }
}
