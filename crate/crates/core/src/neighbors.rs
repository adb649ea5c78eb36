//! Tie-broken nearest-neighbor ranking and the per-query conditions that drive
//! the inclusion-exclusion bounds.
//!
//! Examples are ranked by distance to the query, then by the gap between their
//! tiebreak value and the query's, then by position in the in-sample sequence.
//! All comparisons against the radius `h(x)` use this full key, so two
//! examples at exactly the same distance are never both "at" the radius.

use std::cmp::Ordering;

use crate::dataset::{LabeledExample, PartitionedDataset, Region, MAX_SUBSETS};
use crate::error::{param, Error, Result};
use crate::index::KdTree;

/// Dissimilarity between a query and an example input. Need not be symmetric.
pub trait Distance: Sync + Send {
    fn distance(&self, query: &[f64], example: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Distance for Euclidean {
    #[inline]
    fn distance(&self, query: &[f64], example: &[f64]) -> f64 {
        query
            .iter()
            .zip(example)
            .map(|(q, e)| {
                let d = q - e;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

impl<F> Distance for F
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    fn distance(&self, query: &[f64], example: &[f64]) -> f64 {
        self(query, example)
    }
}

/// A point to classify, with its own tiebreak draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub input: Vec<f64>,
    pub tiebreak: f64,
}

impl Query {
    pub fn new(input: Vec<f64>, tiebreak: f64) -> Self {
        Query { input, tiebreak }
    }
}

impl From<&LabeledExample> for Query {
    fn from(e: &LabeledExample) -> Self {
        Query { input: e.input.clone(), tiebreak: e.tiebreak }
    }
}

/// Total-order ranking key of an in-sample example relative to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankKey {
    pub distance: f64,
    pub gap: f64,
    pub position: usize,
}

impl Eq for RankKey {}

impl Ord for RankKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.gap.total_cmp(&other.gap))
            .then(self.position.cmp(&other.position))
    }
}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn rank_key<D: Distance + ?Sized>(
    example: &LabeledExample,
    position: usize,
    query: &Query,
    distance: &D,
) -> RankKey {
    RankKey {
        distance: distance.distance(&query.input, &example.input),
        gap: (example.tiebreak - query.tiebreak).abs(),
        position,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Neighbor {
    pub key: RankKey,
    pub label: u8,
}

/// Bounded sorted collection of the `cap` best neighbors seen so far.
#[derive(Debug, Clone)]
pub(crate) struct TopK {
    cap: usize,
    items: Vec<Neighbor>,
}

impl TopK {
    pub(crate) fn new(cap: usize) -> Self {
        TopK { cap, items: Vec::with_capacity(cap + 1) }
    }

    #[inline]
    pub(crate) fn is_full(&self) -> bool {
        self.items.len() == self.cap
    }

    #[inline]
    pub(crate) fn worst(&self) -> Option<&RankKey> {
        self.items.last().map(|n| &n.key)
    }

    #[inline]
    pub(crate) fn offer(&mut self, n: Neighbor) {
        if self.cap == 0 {
            return;
        }
        if self.is_full() && n.key >= self.items[self.cap - 1].key {
            return;
        }
        let at = self.items.partition_point(|x| x.key < n.key);
        self.items.insert(at, n);
        self.items.truncate(self.cap);
    }

    pub(crate) fn into_vec(self) -> Vec<Neighbor> {
        self.items
    }
}

/// Set of validation subsets; bit `i` stands for `V_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// All of `R = {1..r}`.
    pub fn full(r: usize) -> Self {
        assert!(r <= MAX_SUBSETS);
        SubsetMask(((1u64 << r) - 1) as u32)
    }

    pub fn single(i: usize) -> Self {
        SubsetMask(1 << i)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        SubsetMask(indices.iter().fold(0, |m, &i| m | (1 << i)))
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn union(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    #[inline]
    pub fn minus(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 & !other.0)
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// Every submask of `self`, including the empty set and `self`.
    pub fn submasks(self) -> impl Iterator<Item = SubsetMask> {
        let full = self.0;
        let mut next = Some(full);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0 { None } else { Some((cur - 1) & full) };
            Some(SubsetMask(cur))
        })
    }
}

/// Everything needed to evaluate `c_S`, `b_S`, `c_R'` and `g_S` at one query.
#[derive(Debug, Clone)]
pub struct NeighborContext {
    k: usize,
    r: usize,
    /// The `k` nearest examples in `F - V`, in ranking order.
    base: Vec<Neighbor>,
    /// For each subset, its `min(k, |V_i|)` nearest examples in ranking order.
    candidates: Vec<Vec<Neighbor>>,
    /// Key of the `k`-th nearest example in `(F - V) - W`, when `w > 0`.
    reduced: Option<RankKey>,
    closer: SubsetMask,
}

impl NeighborContext {
    fn assemble(
        k: usize,
        rest: Vec<Neighbor>,
        holdout: Vec<Neighbor>,
        candidates: Vec<Vec<Neighbor>>,
        has_holdout: bool,
    ) -> Result<Self> {
        let reduced = if has_holdout {
            if rest.len() < k {
                return param("(F - V) - W has fewer than k examples");
            }
            Some(rest[k - 1].key)
        } else {
            None
        };
        let mut base = merge_top_k(k, &[&rest, &holdout]);
        if base.len() < k {
            return param("F - V has fewer than k examples");
        }
        base.truncate(k);
        let h = base[k - 1].key;
        let r = candidates.len();
        let closer = SubsetMask(
            candidates
                .iter()
                .enumerate()
                .filter(|(_, c)| c.first().is_some_and(|n| n.key < h))
                .fold(0, |m, (i, _)| m | (1 << i)),
        );
        Ok(NeighborContext { k, r, base, candidates, reduced, closer })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `h(x)`: distance to the `k`-th nearest neighbor in `F - V`.
    pub fn h(&self) -> f64 {
        self.base[self.k - 1].key.distance
    }

    pub fn h_key(&self) -> RankKey {
        self.base[self.k - 1].key
    }

    /// Distance to the `k`-th nearest neighbor in `(F - V) - W`.
    pub fn h_reduced(&self) -> Option<f64> {
        self.reduced.map(|k| k.distance)
    }

    pub fn base_neighbors(&self) -> &[Neighbor] {
        &self.base
    }

    pub fn subset_candidates(&self, i: usize) -> &[Neighbor] {
        &self.candidates[i]
    }

    /// `c_S(x)`: every `V_i` with `i` in `S` has an example strictly closer
    /// than the `k`-th neighbor in `F - V`.
    #[inline]
    pub fn condition_c(&self, s: SubsetMask) -> bool {
        s.is_subset_of(self.closer)
    }

    /// The unique `S` with `b_S(x)` true.
    #[inline]
    pub fn condition_b(&self) -> SubsetMask {
        self.closer
    }

    /// `c_R'(x)`: every subset beats the `k`-th neighbor in `(F - V) - W`.
    pub fn condition_c_prime(&self) -> Result<bool> {
        let reduced = self
            .reduced
            .ok_or_else(|| Error::State("c_R' needs a context built with w > 0".into()))?;
        Ok(self.candidates.iter().all(|c| c.first().is_some_and(|n| n.key < reduced)))
    }

    /// `g_S(x)`: majority label of the `k` nearest examples in `(F - V) ∪ V_S`.
    pub fn classify(&self, s: SubsetMask) -> Result<u8> {
        if self.k % 2 == 0 {
            return param(format!("k must be odd, got {}", self.k));
        }
        Ok(self.classify_unchecked(s))
    }

    /// Same as [`classify`](Self::classify) for a context whose `k` is known
    /// to be odd.
    pub(crate) fn classify_unchecked(&self, s: SubsetMask) -> u8 {
        // Subsets outside `closer` cannot contribute: their nearest example is
        // already beyond the k-th base neighbor.
        let active = s.0 & self.closer.0;
        if active == 0 {
            return majority(self.base.iter().map(|n| n.label), self.k);
        }
        let mut sources: Vec<&[Neighbor]> = Vec::with_capacity(1 + active.count_ones() as usize);
        sources.push(&self.base);
        for i in SubsetMask(active).indices() {
            sources.push(&self.candidates[i]);
        }
        let top = merge_top_k(self.k, &sources);
        majority(top.iter().map(|n| n.label), self.k)
    }
}

fn majority(labels: impl Iterator<Item = u8>, k: usize) -> u8 {
    let ones: usize = labels.map(usize::from).sum();
    u8::from(2 * ones > k)
}

/// Top `k` of several individually sorted lists.
fn merge_top_k(k: usize, sources: &[&[Neighbor]]) -> Vec<Neighbor> {
    let mut cursors = vec![0usize; sources.len()];
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mut best: Option<(usize, &Neighbor)> = None;
        for (s, list) in sources.iter().enumerate() {
            if let Some(n) = list.get(cursors[s]) {
                if best.map_or(true, |(_, b)| n.key < b.key) {
                    best = Some((s, n));
                }
            }
        }
        match best {
            Some((s, n)) => {
                out.push(*n);
                cursors[s] += 1;
            }
            None => break,
        }
    }
    out
}

/// Builds a context by a single linear scan over the in-sample sequence.
pub fn build_context<D: Distance + ?Sized>(
    partition: &PartitionedDataset<'_>,
    query: &Query,
    k: usize,
    distance: &D,
) -> Result<NeighborContext> {
    if k == 0 {
        return param("k must be at least 1");
    }
    let r = partition.r();
    let mut rest = TopK::new(k);
    let mut holdout = TopK::new(k);
    let mut candidates: Vec<TopK> = (0..r).map(|_| TopK::new(k)).collect();
    for (pos, e) in partition.examples().iter().enumerate() {
        let n = Neighbor { key: rank_key(e, pos, query, distance), label: e.label };
        match partition.region(pos) {
            Region::Subset(i) => candidates[i].offer(n),
            Region::Rest => rest.offer(n),
            Region::Holdout => holdout.offer(n),
        }
    }
    NeighborContext::assemble(
        k,
        rest.into_vec(),
        holdout.into_vec(),
        candidates.into_iter().map(TopK::into_vec).collect(),
        partition.w() > 0,
    )
}

/// Exact Euclidean spatial index over each region of a partition. Produces
/// contexts identical to [`build_context`] with [`Euclidean`].
pub struct PartitionIndex<'a> {
    partition: PartitionedDataset<'a>,
    k: usize,
    subsets: Vec<KdTree>,
    rest: KdTree,
    holdout: KdTree,
}

impl<'a> PartitionIndex<'a> {
    pub fn new(partition: PartitionedDataset<'a>, k: usize) -> Result<Self> {
        if k == 0 {
            return param("k must be at least 1");
        }
        let ex = partition.examples();
        let subsets = (0..partition.r()).map(|i| KdTree::build(ex, partition.subset(i))).collect();
        Ok(PartitionIndex {
            rest: KdTree::build(ex, partition.rest()),
            holdout: KdTree::build(ex, partition.holdout()),
            subsets,
            partition,
            k,
        })
    }

    pub fn partition(&self) -> &PartitionedDataset<'a> {
        &self.partition
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn context(&self, query: &Query) -> Result<NeighborContext> {
        let k = self.k;
        NeighborContext::assemble(
            k,
            self.rest.nearest(query, k),
            self.holdout.nearest(query, k),
            self.subsets.iter().map(|t| t.nearest(query, k)).collect(),
            self.partition.w() > 0,
        )
    }
}

/// The classifier on all in-sample examples (`g*`), backed by an exact index.
pub struct KnnClassifier {
    tree: KdTree,
    k: usize,
}

impl KnnClassifier {
    pub fn new(examples: &[LabeledExample], k: usize) -> Result<Self> {
        if k % 2 == 0 {
            return param(format!("k must be odd, got {k}"));
        }
        if examples.len() < k {
            return param("fewer in-sample examples than k");
        }
        Ok(KnnClassifier { tree: KdTree::build(examples, 0..examples.len()), k })
    }

    pub fn neighbors(&self, query: &Query) -> Vec<Neighbor> {
        self.tree.nearest(query, self.k)
    }

    pub fn predict(&self, query: &Query) -> u8 {
        majority(self.neighbors(query).iter().map(|n| n.label), self.k)
    }

    /// Fraction of `test` misclassified; each test example's own tiebreak is
    /// used as the query tiebreak.
    pub fn error_rate(&self, test: &[LabeledExample], exec: crate::exec::Execution) -> f64 {
        if test.is_empty() {
            return 0.0;
        }
        let wrong = exec.map(test.len(), |i| {
            let e = &test[i];
            u32::from(self.predict(&Query::from(e)) != e.label)
        });
        wrong.iter().map(|&w| w as f64).sum::<f64>() / test.len() as f64
    }
}

/// Majority label of the `k` tie-broken nearest examples among `positions`,
/// by exhaustive sort. Slow; intended for small instances and cross-checks.
pub fn classify_by_scan<D: Distance + ?Sized>(
    examples: &[LabeledExample],
    positions: impl IntoIterator<Item = usize>,
    query: &Query,
    k: usize,
    distance: &D,
) -> u8 {
    let mut all: Vec<Neighbor> = positions
        .into_iter()
        .map(|p| Neighbor { key: rank_key(&examples[p], p, query, distance), label: examples[p].label })
        .collect();
    all.sort();
    majority(all.iter().take(k).map(|n| n.label), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_quadrant_dataset;
    use crate::rng;
    use rand::Rng as _;

    fn ex(x: f64, y: f64, label: u8, z: f64) -> LabeledExample {
        LabeledExample::new(vec![x, y], label, z).unwrap()
    }

    #[test]
    fn rank_key_orders_by_distance_then_gap_then_position() {
        let q = Query::new(vec![0.0, 0.0], 0.5);
        let near = rank_key(&ex(1.0, 0.0, 0, 0.0), 9, &q, &Euclidean);
        let far = rank_key(&ex(2.0, 0.0, 0, 0.5), 0, &q, &Euclidean);
        assert!(near < far);

        let small_gap = rank_key(&ex(1.0, 0.0, 0, 0.6), 9, &q, &Euclidean);
        let big_gap = rank_key(&ex(0.0, 1.0, 0, 0.8), 0, &q, &Euclidean);
        assert!((small_gap.gap - 0.1).abs() < 1e-12);
        assert!(small_gap < big_gap);

        let a = rank_key(&ex(1.0, 0.0, 0, 0.75), 4, &q, &Euclidean);
        let b = rank_key(&ex(0.0, 1.0, 0, 0.25), 7, &q, &Euclidean);
        assert_eq!(a.gap, b.gap);
        assert!(a < b);
    }

    #[test]
    fn submask_enumeration() {
        let m = SubsetMask::from_indices(&[0, 2]);
        let mut subs: Vec<u32> = m.submasks().map(|s| s.0).collect();
        subs.sort();
        assert_eq!(subs, vec![0, 1, 4, 5]);
        assert_eq!(SubsetMask::EMPTY.submasks().count(), 1);
        assert_eq!(SubsetMask::full(4).submasks().count(), 16);
        assert_eq!(SubsetMask::full(16).0, 0xffff);
    }

    #[test]
    fn single_neighbor_radius() {
        // V_1 = {point at distance 1}, F - V = {point at distance 2}.
        let data = vec![ex(1.0, 0.0, 1, 0.5), ex(2.0, 0.0, 0, 0.5)];
        let p = PartitionedDataset::new(&data, 1, 1, 0, 1).unwrap();
        let ctx = build_context(&p, &Query::new(vec![0.0, 0.0], 0.5), 1, &Euclidean).unwrap();
        assert_eq!(ctx.h(), 2.0);
        assert!(ctx.condition_c(SubsetMask::single(0)));
        assert!(ctx.condition_c(SubsetMask::EMPTY));
        assert_eq!(ctx.classify(SubsetMask::EMPTY).unwrap(), 0);
        assert_eq!(ctx.classify(SubsetMask::single(0)).unwrap(), 1);
        assert!(matches!(ctx.condition_c_prime(), Err(Error::State(_))));
    }

    /// Query at the origin, k = 3, r = 4. The three base neighbors sit at
    /// radius 1.0, 1.5 and 2.0; `x_1` and `x_3` lie inside that radius and
    /// `x_2`, `x_4` outside. With `W` holding a base point at radius 1.5,
    /// the reduced radius grows to 3.0: `x_4` (2.5) falls inside, `x_2` (3.5)
    /// stays outside.
    fn circle_configuration() -> (Vec<LabeledExample>, Query) {
        let at = |d: f64, label| ex(d, 0.0, label, 0.5);
        let data = vec![
            at(0.5, 1),  // V_1
            at(3.5, 0),  // V_2
            at(1.2, 1),  // V_3
            at(2.5, 0),  // V_4
            at(1.0, 0),  // F - V - W
            at(2.0, 0),  // F - V - W
            at(3.0, 1),  // F - V - W
            at(1.5, 0),  // W
        ];
        (data, Query::new(vec![0.0, 0.0], 0.5))
    }

    #[test]
    fn circle_configuration_conditions() {
        let (data, q) = circle_configuration();
        let p = PartitionedDataset::new(&data, 4, 1, 1, 3).unwrap();
        let ctx = build_context(&p, &q, 3, &Euclidean).unwrap();
        assert_eq!(ctx.h(), 2.0);
        let s13 = SubsetMask::from_indices(&[0, 2]);
        assert_eq!(ctx.condition_b(), s13);
        for s in SubsetMask::full(4).submasks() {
            assert_eq!(ctx.condition_c(s), s.is_subset_of(s13), "S = {s:?}");
        }
        assert!(!ctx.condition_c(SubsetMask::single(1)));
        assert_eq!(ctx.h_reduced(), Some(3.0));
        assert!(!ctx.condition_c_prime().unwrap());
        // g_{1,3} agrees with g_R because V_2 and V_4 are outside h(x).
        assert_eq!(ctx.classify(s13).unwrap(), ctx.classify(SubsetMask::full(4)).unwrap());
        assert_eq!(ctx.classify(s13).unwrap(), 1);
        assert_eq!(ctx.classify(SubsetMask::EMPTY).unwrap(), 0);
    }

    #[test]
    fn even_k_is_rejected_by_classify() {
        let (data, q) = circle_configuration();
        let p = PartitionedDataset::new(&data, 4, 1, 1, 2).unwrap();
        let ctx = build_context(&p, &q, 2, &Euclidean).unwrap();
        assert!(ctx.classify(SubsetMask::EMPTY).is_err());
        assert!(KnnClassifier::new(&data, 2).is_err());
    }

    #[test]
    fn undersized_remainder_is_rejected() {
        let data: Vec<_> = (0..6).map(|i| ex(i as f64, 0.0, 0, 0.5)).collect();
        let p = PartitionedDataset::new(&data, 1, 1, 2, 3).unwrap();
        // (F - V) - W has 3 examples: fine for k = 3, not for k = 4.
        let q = Query::new(vec![0.0, 0.0], 0.1);
        assert!(build_context(&p, &q, 3, &Euclidean).is_ok());
        assert!(build_context(&p, &q, 4, &Euclidean).is_err());
    }

    #[test]
    fn exact_ties_resolved_by_tiebreak() {
        // Four points on the unit circle; ranking must follow |Z_i - Z|.
        let data = vec![
            ex(1.0, 0.0, 1, 0.9),
            ex(-1.0, 0.0, 1, 0.6),
            ex(0.0, 1.0, 0, 0.45),
            ex(0.0, -1.0, 0, 0.1),
        ];
        let q = Query::new(vec![0.0, 0.0], 0.5);
        let p = PartitionedDataset::new(&data, 1, 1, 0, 1).unwrap();
        let ctx = build_context(&p, &q, 1, &Euclidean).unwrap();
        // Closest in F - V is position 2 (gap 0.05); V_1's point has gap 0.4.
        assert_eq!(ctx.base_neighbors()[0].key.position, 2);
        assert!(!ctx.condition_c(SubsetMask::single(0)));
    }

    fn random_instance(n: usize, seed: u64, grid: bool) -> Vec<LabeledExample> {
        let mut d = generate_quadrant_dataset(n, 2, 0.2, seed).unwrap().into_examples();
        if grid {
            // Snap to a coarse grid so that distance ties are common.
            for e in &mut d {
                for x in &mut e.input {
                    *x = (*x * 3.0).round() / 3.0;
                }
            }
        }
        d
    }

    #[test]
    fn merge_classify_matches_brute_force() {
        let mut qrng = rng::stream(3, rng::TAG_DOMAIN, 0);
        for inst in 0..30u64 {
            let data = random_instance(30 + (inst as usize % 11), inst, inst % 2 == 0);
            let r = 1 + (inst as usize % 3);
            let p = PartitionedDataset::new(&data, r, 4, 3, 3).unwrap();
            for _ in 0..40 {
                let q = Query::new(
                    vec![qrng.gen_range(-1.0..1.0), qrng.gen_range(-1.0..1.0)],
                    qrng.gen(),
                );
                let ctx = build_context(&p, &q, 3, &Euclidean).unwrap();
                for s in SubsetMask::full(r).submasks() {
                    let positions = p
                        .rest()
                        .chain(p.holdout())
                        .chain(s.indices().flat_map(|i| p.subset(i)));
                    let brute = classify_by_scan(&data, positions, &q, 3, &Euclidean);
                    assert_eq!(ctx.classify(s).unwrap(), brute);
                }
                let b = ctx.condition_b();
                assert!(ctx.condition_c(b));
                assert_eq!(ctx.classify(b).unwrap(), ctx.classify(SubsetMask::full(r)).unwrap());
                assert!(ctx.condition_c_prime().unwrap() || !ctx.condition_c(SubsetMask::full(r)));
            }
        }
    }

    #[test]
    fn index_contexts_match_linear_scan() {
        let mut qrng = rng::stream(4, rng::TAG_DOMAIN, 0);
        for inst in 0..10u64 {
            let data = random_instance(400, 100 + inst, inst % 2 == 1);
            let p = PartitionedDataset::new(&data, 3, 40, 30, 5).unwrap();
            let index = PartitionIndex::new(p, 5).unwrap();
            for _ in 0..50 {
                let q = Query::new(
                    vec![qrng.gen_range(-1.0..1.0), qrng.gen_range(-1.0..1.0)],
                    qrng.gen(),
                );
                let a = build_context(&p, &q, 5, &Euclidean).unwrap();
                let b = index.context(&q).unwrap();
                assert_eq!(a.base, b.base);
                assert_eq!(a.candidates, b.candidates);
                assert_eq!(a.reduced, b.reduced);
                assert_eq!(a.closer, b.closer);
            }
        }
    }

    #[test]
    fn classifier_matches_scan() {
        let data = random_instance(300, 9, true);
        let clf = KnnClassifier::new(&data, 5).unwrap();
        let mut qrng = rng::stream(5, rng::TAG_DOMAIN, 0);
        for _ in 0..200 {
            let q = Query::new(vec![qrng.gen_range(-1.0..1.0), qrng.gen_range(-1.0..1.0)], qrng.gen());
            assert_eq!(clf.predict(&q), classify_by_scan(&data, 0..data.len(), &q, 5, &Euclidean));
        }
    }

    #[test]
    fn pluggable_distance() {
        let manhattan = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        let data = vec![ex(0.9, 0.9, 1, 0.5), ex(1.5, 0.0, 0, 0.5)];
        let q = Query::new(vec![0.0, 0.0], 0.5);
        // Euclidean: (0.9, 0.9) is nearer; Manhattan: (1.5, 0) is nearer.
        assert_eq!(classify_by_scan(&data, 0..2, &q, 1, &Euclidean), 1);
        assert_eq!(classify_by_scan(&data, 0..2, &q, 1, &manhattan), 0);
    }
}
