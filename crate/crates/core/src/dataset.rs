//! Labeled examples, the synthetic quadrant distribution, CSV I/O, permutations
//! and the positional partition of the in-sample sequence into validation
//! subsets, the holdout block `W` and the remainder.

use std::io::{BufRead, Write};
use std::ops::Range;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{self, Rng};

/// Largest number of validation subsets a partition may have. Subset masks
/// are stored in a `u32` and the inclusion-exclusion term count grows as `3^r`.
pub const MAX_SUBSETS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub input: Vec<f64>,
    pub label: u8,
    /// Uniform draw in `[0, 1]` used to break distance ties.
    pub tiebreak: f64,
}

impl LabeledExample {
    pub fn new(input: Vec<f64>, label: u8, tiebreak: f64) -> Result<Self> {
        if label > 1 {
            return param(format!("label must be 0 or 1, got {label}"));
        }
        if !(0.0..=1.0).contains(&tiebreak) {
            return param(format!("tiebreak must lie in [0, 1], got {tiebreak}"));
        }
        Ok(LabeledExample { input, label, tiebreak })
    }
}

/// An ordered in-sample sequence with a common input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        let dim = examples.first().map_or(0, |e| e.input.len());
        for (i, e) in examples.iter().enumerate() {
            if e.input.len() != dim {
                return param(format!(
                    "example {i} has dimension {}, expected {dim}",
                    e.input.len()
                ));
            }
            if e.label > 1 || !(0.0..=1.0).contains(&e.tiebreak) {
                return param(format!("example {i} has an invalid label or tiebreak"));
            }
        }
        Ok(Dataset { examples, dim })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reads one example per line: comma-separated reals followed by an
    /// integer label. Blank lines and lines starting with `#` are skipped.
    /// Tiebreak values are synthesized from `seed`, one per example in order.
    pub fn read_csv<R: BufRead>(reader: R, seed: u64) -> Result<Self> {
        let mut tiebreaks = rng::stream(seed, rng::TAG_TIEBREAK, 0);
        let mut examples = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "need at least one feature and a label".into(),
                });
            }
            let (features, label) = fields.split_at(fields.len() - 1);
            let input = features
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad feature {f:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let label = match label[0] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("label must be 0 or 1, got {other:?}"),
                    })
                }
            };
            examples.push(LabeledExample { input, label, tiebreak: tiebreaks.gen() });
        }
        Dataset::new(examples).map_err(|e| match e {
            Error::Parameter(m) => Error::Parse { line: 0, message: m },
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.examples {
            for x in &e.input {
                write!(out, "{x},")?;
            }
            writeln!(out, "{}", e.label)?;
        }
        Ok(())
    }
}

/// Inputs uniform on `[-1, 1]^dim`; the clean label is 1 when the number of
/// negative coordinates is even and 0 otherwise, then flipped with
/// probability `noise`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantDistribution {
    pub dim: usize,
    pub noise: f64,
}

impl QuadrantDistribution {
    pub fn new(dim: usize, noise: f64) -> Result<Self> {
        if dim == 0 {
            return param("dim must be at least 1");
        }
        if !(0.0..=1.0).contains(&noise) {
            return param(format!("noise must lie in [0, 1], got {noise}"));
        }
        Ok(QuadrantDistribution { dim, noise })
    }

    /// Parity label; a coordinate of exactly zero counts as non-negative.
    pub fn clean_label(input: &[f64]) -> u8 {
        let negatives = input.iter().filter(|&&x| x < 0.0).count();
        u8::from(negatives % 2 == 0)
    }

    pub fn sample_input(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    pub fn sample(&self, rng: &mut Rng) -> LabeledExample {
        let input = self.sample_input(rng);
        let clean = Self::clean_label(&input);
        let flip = rng.gen::<f64>() < self.noise;
        let tiebreak = rng.gen::<f64>();
        LabeledExample { input, label: if flip { 1 - clean } else { clean }, tiebreak }
    }

    pub fn sample_n(&self, n: usize, rng: &mut Rng) -> Vec<LabeledExample> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

pub fn generate_quadrant_dataset(n: usize, dim: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return param("n must be at least 1");
    }
    let dist = QuadrantDistribution::new(dim, noise)?;
    let mut rng = rng::stream(seed, rng::TAG_TRIAL, 0);
    Ok(Dataset { examples: dist.sample_n(n, &mut rng), dim })
}

/// A bijection on `0..n`. Applying it to a sequence places input position
/// `p[i]` at output position `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &p in &map {
            if p >= map.len() || seen[p] {
                return param(format!("not a permutation of 0..{}", map.len()));
            }
            seen[p] = true;
        }
        Ok(Permutation(map))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Uniform over all `n!` permutations (Fisher-Yates).
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            map.swap(i, j);
        }
        Permutation(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

pub fn shuffle_with_permutation<T: Clone>(items: &[T], permutation: &Permutation) -> Result<Vec<T>> {
    if items.len() != permutation.len() {
        return param(format!(
            "permutation has length {}, sequence has length {}",
            permutation.len(),
            items.len()
        ));
    }
    Ok(permutation.0.iter().map(|&p| items[p].clone()).collect())
}

/// Membership of an in-sample position in the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Validation subset `V_{i+1}` (zero-based index `i`).
    Subset(usize),
    /// The holdout block `W` at the end of the sequence.
    Holdout,
    /// `F - V - W`.
    Rest,
}

/// Positional view of the in-sample sequence: `V_1 .. V_r` occupy the first
/// positions in order, `W` the last `w` positions and everything between is
/// `F - V - W`.
#[derive(Debug, Clone, Copy)]
pub struct PartitionedDataset<'a> {
    examples: &'a [LabeledExample],
    offsets: [usize; MAX_SUBSETS + 1],
    r: usize,
    w: usize,
}

impl<'a> PartitionedDataset<'a> {
    /// Equal-size validation subsets of `m` examples each.
    pub fn new(examples: &'a [LabeledExample], r: usize, m: usize, w: usize, k: usize) -> Result<Self> {
        if r == 0 {
            return param("r must be at least 1");
        }
        if r > MAX_SUBSETS {
            return param(format!("r must be at most {MAX_SUBSETS}"));
        }
        Self::with_sizes(examples, &vec![m; r], w, k)
    }

    pub fn with_sizes(examples: &'a [LabeledExample], sizes: &[usize], w: usize, k: usize) -> Result<Self> {
        let r = sizes.len();
        if r == 0 || r > MAX_SUBSETS {
            return param(format!("need between 1 and {MAX_SUBSETS} validation subsets, got {r}"));
        }
        if sizes.iter().any(|&m| m == 0) {
            return param("validation subsets must be non-empty");
        }
        let n = examples.len();
        let used: usize = sizes.iter().sum::<usize>() + w;
        if used + k > n {
            return param(format!(
                "partition needs r*m + w + k <= n, got {used} + {k} > {n}"
            ));
        }
        let mut offsets = [0; MAX_SUBSETS + 1];
        for (i, &m) in sizes.iter().enumerate() {
            offsets[i + 1] = offsets[i] + m;
        }
        Ok(PartitionedDataset { examples, offsets, r, w })
    }

    pub fn examples(&self) -> &'a [LabeledExample] {
        self.examples
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// Positions of `V_{i+1}`.
    pub fn subset(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn subset_size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn subset_sizes(&self) -> Vec<usize> {
        (0..self.r).map(|i| self.subset_size(i)).collect()
    }

    /// Common subset size, if all subsets are equal.
    pub fn equal_subset_size(&self) -> Option<usize> {
        let m = self.subset_size(0);
        (1..self.r).all(|i| self.subset_size(i) == m).then_some(m)
    }

    pub fn validation(&self) -> Range<usize> {
        0..self.offsets[self.r]
    }

    pub fn holdout(&self) -> Range<usize> {
        self.n() - self.w..self.n()
    }

    /// `F - V - W`.
    pub fn rest(&self) -> Range<usize> {
        self.offsets[self.r]..self.n() - self.w
    }

    pub fn region(&self, position: usize) -> Region {
        if position >= self.n() - self.w {
            Region::Holdout
        } else if position >= self.offsets[self.r] {
            Region::Rest
        } else {
            let i = self.offsets[1..=self.r].partition_point(|&end| end <= position);
            Region::Subset(i)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample::new(vec![i as f64], (i % 2) as u8, 0.5).unwrap())
            .collect()
    }

    #[test]
    fn partition_positions() {
        let ex = toy(10);
        let p = PartitionedDataset::new(&ex, 2, 3, 2, 0).unwrap();
        assert_eq!(p.subset(0), 0..3);
        assert_eq!(p.subset(1), 3..6);
        assert_eq!(p.holdout(), 8..10);
        assert_eq!(p.rest(), 6..8);
        assert_eq!(p.region(4), Region::Subset(1));
        assert_eq!(p.region(7), Region::Rest);
        assert_eq!(p.region(9), Region::Holdout);
    }

    #[test]
    fn partition_rejects_overfull() {
        let ex = toy(10);
        assert!(PartitionedDataset::new(&ex, 3, 3, 2, 0).is_err());
        // k counts against the remainder too.
        assert!(PartitionedDataset::new(&ex, 2, 3, 2, 3).is_err());
        assert!(PartitionedDataset::new(&ex, 0, 3, 2, 0).is_err());
    }

    #[test]
    fn partition_remainder_size_at_full_scale() {
        let ex = toy(50_000);
        let p = PartitionedDataset::new(&ex, 3, 3125, 3125, 3).unwrap();
        assert_eq!(p.rest().len() + p.holdout().len(), 40_625);
        assert_eq!(p.rest().len() + p.holdout().len() + p.validation().len(), 50_000);
        assert_eq!(50_000 - 3 * 3125 - 3125, 37_500);
        assert_eq!(p.rest().len(), 37_500);
    }

    #[test]
    fn single_positive_quadrant_example_gets_label_one() {
        // Seeds until the lone input lands in the (+,+) quadrant.
        for seed in 0..100 {
            let d = generate_quadrant_dataset(1, 2, 0.0, seed).unwrap();
            let e = &d.examples()[0];
            if e.input.iter().all(|&x| x >= 0.0) {
                assert_eq!(e.label, 1);
                return;
            }
        }
        panic!("no seed produced a (+,+) input");
    }

    #[test]
    fn zero_coordinate_is_non_negative() {
        assert_eq!(QuadrantDistribution::clean_label(&[0.0, 0.5]), 1);
        assert_eq!(QuadrantDistribution::clean_label(&[-0.1, 0.5]), 0);
        assert_eq!(QuadrantDistribution::clean_label(&[-0.1, -0.5]), 1);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        assert!(generate_quadrant_dataset(0, 2, 0.1, 1).is_err());
        assert!(generate_quadrant_dataset(10, 0, 0.1, 1).is_err());
        assert!(generate_quadrant_dataset(10, 2, 1.5, 1).is_err());
    }

    #[test]
    fn noise_rate_matches_parameter() {
        let d = generate_quadrant_dataset(100_000, 2, 0.1, 7).unwrap();
        let flips = d
            .examples()
            .iter()
            .filter(|e| e.label != QuadrantDistribution::clean_label(&e.input))
            .count();
        let rate = flips as f64 / 100_000.0;
        assert!((rate - 0.1).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_quadrant_dataset(500, 3, 0.1, 42).unwrap();
        let b = generate_quadrant_dataset(500, 3, 0.1, 42).unwrap();
        let c = generate_quadrant_dataset(500, 3, 0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.examples().iter().all(|e| e.input.iter().all(|x| (-1.0..=1.0).contains(x))));
    }

    #[test]
    fn permutation_application() {
        let v = vec!['a', 'b'];
        assert_eq!(shuffle_with_permutation(&v, &Permutation::identity(2)).unwrap(), v);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(shuffle_with_permutation(&v, &swap).unwrap(), vec!['b', 'a']);
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(shuffle_with_permutation(&v, &Permutation::identity(3)).is_err());
    }

    #[test]
    fn random_permutations_are_uniform() {
        let mut rng = rng::stream(11, rng::TAG_PERMUTATION, 0);
        let trials = 10_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            *counts.entry(Permutation::random(4, &mut rng).0).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = trials as f64 / 24.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 23 degrees of freedom; the 0.999 quantile is 49.7.
        assert!(chi2 < 49.7, "chi2 {chi2}");
        let sigma = (trials as f64 * (1.0 / 24.0) * (23.0 / 24.0)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - expected).abs() <= 3.5 * sigma);
        }
    }

    #[test]
    fn csv_round_trip_keeps_inputs_and_labels() {
        let d = generate_quadrant_dataset(50, 3, 0.1, 5).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..], 9).unwrap();
        assert_eq!(back.len(), 50);
        for (a, b) in d.examples().iter().zip(back.examples()) {
            assert_eq!(a.input, b.input);
            assert_eq!(a.label, b.label);
        }
        let again = Dataset::read_csv(&buf[..], 9).unwrap();
        assert_eq!(back, again);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        assert!(Dataset::read_csv("0.5,2\n".as_bytes(), 0).is_err());
        assert!(Dataset::read_csv("0.5\n".as_bytes(), 0).is_err());
        assert!(Dataset::read_csv("0.5,0.1,1\n0.2,0\n".as_bytes(), 0).is_err());
        assert!(Dataset::read_csv("x,1\n".as_bytes(), 0).is_err());
        let ok = Dataset::read_csv("# comment\n\n0.5,-0.25,1\n".as_bytes(), 0).unwrap();
        assert_eq!(ok.dim(), 2);
    }
}
