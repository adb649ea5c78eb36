//! Data-dependent bounds from one partition of the in-sample data.
//!
//! Each validation example in `V_i` contributes
//!
//! ```text
//! f_i(x, y) = Σ_{S ⊆ R-{i}} Σ_{T ⊆ (R-{i})-S, |T| ≤ u(S)}
//!             |V_i| / |V_{R-(S∪T)}| · (-1)^{|T|} · I(c_{S∪T}(x) ∧ g_S(x) ≠ y)
//! ```
//!
//! and `s_V` is the sum over subsets of the mean of `f_i` over `V_i`. Without
//! truncation `s_V` equals the signed sum over all `(S, T)` with `S ∪ T ≠ R`
//! of the mean of `(-1)^{|T|} I(c_{S∪T} ∧ g_S ≠ y)` over `V_{R-(S∪T)}`.

use serde::{Deserialize, Serialize};

use crate::concentration::{
    bernstein_width, binomial_tail_upper, hoeffding_width, sample_variance, Direction,
};
use crate::dataset::{LabeledExample, PartitionedDataset, MAX_SUBSETS};
use crate::error::{param, Result};
use crate::exec::{mean, pairwise_sum, Execution};
use crate::neighbors::{build_context, Distance, NeighborContext, PartitionIndex, Query, SubsetMask};
use crate::report::{BoundMethod, BoundReport, SubsetTerm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    #[default]
    HoeffdingResultBound,
    BernsteinTestBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub k: usize,
    pub r: usize,
    /// Size of each validation subset.
    pub m: usize,
    pub w: usize,
    pub delta: f64,
    pub delta_w: f64,
    /// Truncation depth `d`; `d = r` keeps every term.
    pub depth: usize,
    pub variant: BoundVariant,
    pub direction: Direction,
    /// Overrides `m` with individual subset sizes.
    #[serde(default)]
    pub subset_sizes: Option<Vec<usize>>,
}

impl BoundConfig {
    /// Untruncated Hoeffding bound with an upper direction.
    pub fn result_bound(k: usize, r: usize, m: usize, w: usize, delta: f64, delta_w: f64) -> Self {
        BoundConfig {
            k,
            r,
            m,
            w,
            delta,
            delta_w,
            depth: r,
            variant: BoundVariant::HoeffdingResultBound,
            direction: Direction::Upper,
            subset_sizes: None,
        }
    }

    pub fn test_bound(k: usize, r: usize, m: usize, w: usize, depth: usize, delta: f64, delta_w: f64) -> Self {
        BoundConfig {
            depth,
            variant: BoundVariant::BernsteinTestBound,
            ..BoundConfig::result_bound(k, r, m, w, delta, delta_w)
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.subset_sizes.clone().unwrap_or_else(|| vec![self.m; self.r])
    }

    /// Checks the configuration against an in-sample size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k % 2 == 0 {
            return param(format!("k must be odd, got {}", self.k));
        }
        if self.r == 0 || self.r > MAX_SUBSETS {
            return param(format!("r must lie in 1..={MAX_SUBSETS}, got {}", self.r));
        }
        if self.depth > self.r {
            return param(format!("depth {} exceeds r = {}", self.depth, self.r));
        }
        let sizes = self.sizes();
        if sizes.len() != self.r {
            return param(format!("{} subset sizes given for r = {}", sizes.len(), self.r));
        }
        if sizes.iter().any(|&s| s == 0) {
            return param("validation subsets must be non-empty");
        }
        for (name, d) in [("delta", self.delta), ("delta_w", self.delta_w)] {
            if !(d > 0.0 && d < 1.0) {
                return param(format!("{name} must lie in (0, 1), got {d}"));
            }
        }
        let used = sizes.iter().sum::<usize>() + self.w;
        if used + self.k > n {
            return param(format!("r*m + w + k = {} exceeds n = {n}", used + self.k));
        }
        Ok(())
    }

    pub fn partition<'a>(&self, examples: &'a [LabeledExample]) -> Result<PartitionedDataset<'a>> {
        self.validate(examples.len())?;
        PartitionedDataset::with_sizes(examples, &self.sizes(), self.w, self.k)
    }
}

/// `u(S) = max(2 floor((d - |S|) / 2), 0)`.
pub fn truncation_width(s: SubsetMask, depth: usize) -> usize {
    let s = s.len();
    if depth <= s {
        0
    } else {
        2 * ((depth - s) / 2)
    }
}

/// One signed term of `f_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub s: SubsetMask,
    pub t: SubsetMask,
    pub coefficient: f64,
}

impl Term {
    pub fn union(&self) -> SubsetMask {
        self.s.union(self.t)
    }
}

/// Terms of `f_i` (0-based `i`) under the given subset sizes and depth.
pub fn subset_terms(i: usize, sizes: &[usize], depth: usize) -> Vec<Term> {
    let r = sizes.len();
    let all = SubsetMask::full(r);
    let others = all.minus(SubsetMask::single(i));
    let mut terms = Vec::new();
    for s in others.submasks() {
        let u = truncation_width(s, depth);
        for t in others.minus(s).submasks() {
            if t.len() > u {
                continue;
            }
            let remaining = all.minus(s.union(t));
            let size: usize = remaining.indices().map(|j| sizes[j]).sum();
            let sign = if t.len() % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(Term { s, t, coefficient: sign * sizes[i] as f64 / size as f64 });
        }
    }
    terms
}

/// Range length of `f_i`: the sum of coefficient magnitudes.
pub fn term_range(i: usize, sizes: &[usize], depth: usize) -> f64 {
    subset_terms(i, sizes, depth).iter().map(|t| t.coefficient.abs()).sum()
}

/// What one validation example contributes, independent of depth and
/// bound variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleEval {
    /// The unique `S` with `b_S(x)`.
    pub closer: SubsetMask,
    /// Bit `S` is set when `g_S(x) ≠ y`; filled for `S ⊆ closer - {own}`.
    errors: Vec<u64>,
}

impl ExampleEval {
    /// Evaluates `g_S` for every `S` that any term can reach.
    pub fn new(ctx: &NeighborContext, label: u8, own: usize) -> Result<Self> {
        if ctx.k() % 2 == 0 {
            return param(format!("k must be odd, got {}", ctx.k()));
        }
        let closer = ctx.condition_b();
        let reachable = closer.minus(SubsetMask::single(own));
        let mut errors = vec![0u64; ((1usize << ctx.r()) + 63) / 64];
        for s in reachable.submasks() {
            if ctx.classify_unchecked(s) != label {
                errors[s.0 as usize / 64] |= 1 << (s.0 % 64);
            }
        }
        Ok(ExampleEval { closer, errors })
    }

    /// `I(g_S(x) ≠ y)` for `S ⊆ closer - {own}`; false for any other `S`.
    #[inline]
    pub fn error(&self, s: SubsetMask) -> bool {
        self.errors[s.0 as usize / 64] >> (s.0 % 64) & 1 == 1
    }

    /// `I(c_A(x) ∧ g_S(x) ≠ y)`.
    #[inline]
    pub fn indicator(&self, a: SubsetMask, s: SubsetMask) -> bool {
        a.is_subset_of(self.closer) && self.error(s)
    }

    pub fn f_value(&self, terms: &[Term]) -> f64 {
        terms
            .iter()
            .filter(|t| self.indicator(t.union(), t.s))
            .map(|t| t.coefficient)
            .sum()
    }
}

/// `f_i(x, y)` for an example of `V_i` (0-based `i`).
pub fn f_i_value(ctx: &NeighborContext, label: u8, i: usize, cfg: &BoundConfig) -> Result<f64> {
    let eval = ExampleEval::new(ctx, label, i)?;
    Ok(eval.f_value(&subset_terms(i, &cfg.sizes(), cfg.depth)))
}

/// Per-example evaluations for a whole partition.
#[derive(Debug, Clone)]
pub struct Evaluations {
    sizes: Vec<usize>,
    subsets: Vec<Vec<ExampleEval>>,
    holdout_hits: usize,
    w: usize,
}

impl Evaluations {
    /// Euclidean distance through an exact spatial index.
    pub fn compute(partition: &PartitionedDataset<'_>, k: usize, exec: Execution) -> Result<Self> {
        let index = PartitionIndex::new(partition.clone(), k)?;
        Self::assemble(partition, exec, |q| index.context(q))
    }

    /// Arbitrary distance by linear scans.
    pub fn compute_with<D: Distance + ?Sized>(
        partition: &PartitionedDataset<'_>,
        k: usize,
        distance: &D,
        exec: Execution,
    ) -> Result<Self> {
        Self::assemble(partition, exec, |q| build_context(partition, q, k, distance))
    }

    fn assemble<C>(partition: &PartitionedDataset<'_>, exec: Execution, context: C) -> Result<Self>
    where
        C: Fn(&Query) -> Result<NeighborContext> + Sync + Send,
    {
        let ex = partition.examples();
        let mut subsets = Vec::with_capacity(partition.r());
        for i in 0..partition.r() {
            let range = partition.subset(i);
            let evals = exec.map(range.len(), |j| {
                let e = &ex[range.start + j];
                ExampleEval::new(&context(&Query::from(e))?, e.label, i)
            });
            subsets.push(evals.into_iter().collect::<Result<Vec<_>>>()?);
        }
        let holdout = partition.holdout();
        let hits = exec.map(holdout.len(), |j| context(&Query::from(&ex[holdout.start + j]))?.condition_c_prime());
        let holdout_hits = hits.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|&h| h).count();
        Ok(Evaluations { sizes: partition.subset_sizes(), subsets, holdout_hits, w: partition.w() })
    }

    pub fn r(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn subset(&self, i: usize) -> &[ExampleEval] {
        &self.subsets[i]
    }

    /// Number of `W` examples with `c_R'`.
    pub fn holdout_hits(&self) -> usize {
        self.holdout_hits
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// `f_i` over `V_i` for every subset at the given depth.
    pub fn f_values(&self, depth: usize) -> Vec<Vec<f64>> {
        (0..self.r())
            .map(|i| {
                let terms = subset_terms(i, &self.sizes, depth);
                self.subsets[i].iter().map(|e| e.f_value(&terms)).collect()
            })
            .collect()
    }

    pub fn s_v(&self, depth: usize) -> SvEstimate {
        let values = self.f_values(depth);
        let ranges = (0..self.r()).map(|i| term_range(i, &self.sizes, depth)).collect();
        let means: Vec<f64> = values.iter().map(|v| mean(v)).collect();
        SvEstimate { s_v: pairwise_sum(&means), values, ranges }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvEstimate {
    pub s_v: f64,
    /// `f_i` over `V_i`, per subset.
    pub values: Vec<Vec<f64>>,
    /// Range length of each `f_i`.
    pub ranges: Vec<f64>,
}

/// `s_V` at depth `cfg.depth` with Euclidean distance.
pub fn compute_s_v(examples: &[LabeledExample], cfg: &BoundConfig, exec: Execution) -> Result<SvEstimate> {
    let partition = cfg.partition(examples)?;
    Ok(Evaluations::compute(&partition, cfg.k, exec)?.s_v(cfg.depth))
}

fn check_matches(evals: &Evaluations, cfg: &BoundConfig) -> Result<()> {
    if evals.sizes() != cfg.sizes().as_slice() || evals.w() != cfg.w {
        return param("evaluations were computed for a different partition");
    }
    Ok(())
}

/// Hoeffding bound on every `f_i` plus a bound on the `c_R'` rate over `W`.
///
/// One-sided reports charge `2^{r-1}` times a one-sided bound on the `c_R'`
/// rate; two-sided reports use `r 3^{r-1} sqrt(ln(2r/δ)/(2m))` for the
/// validation terms and `2^r` times a two-sided bound for `W`.
pub fn result_bound_from(evals: &Evaluations, cfg: &BoundConfig) -> Result<BoundReport> {
    check_matches(evals, cfg)?;
    if cfg.depth != cfg.r {
        return param("result bound needs depth = r");
    }
    if cfg.w == 0 {
        return param("result bound needs w >= 1");
    }
    let r = cfg.r;
    let est = evals.s_v(r);
    let delta_i = cfg.delta / r as f64;
    let rate = evals.holdout_hits() as f64 / cfg.w as f64;
    let (per_subset, epsilon_w): (Vec<SubsetTerm>, f64) = match cfg.direction {
        Direction::TwoSided => {
            let range = 3f64.powi(r as i32 - 1);
            let terms = est
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| SubsetTerm {
                    index: i + 1,
                    mean: mean(v),
                    width: hoeffding_width(v.len(), range, delta_i, Direction::TwoSided),
                })
                .collect();
            let w_width = hoeffding_width(cfg.w, 1.0, cfg.delta_w, Direction::TwoSided);
            (terms, 2f64.powi(r as i32) * (rate + w_width))
        }
        _ => {
            let terms = est
                .values
                .iter()
                .zip(&est.ranges)
                .enumerate()
                .map(|(i, (v, &range))| SubsetTerm {
                    index: i + 1,
                    mean: mean(v),
                    width: hoeffding_width(v.len(), range, delta_i, Direction::Upper),
                })
                .collect();
            let w_width = hoeffding_width(cfg.w, 1.0, cfg.delta_w, Direction::Upper);
            (terms, 2f64.powi(r as i32 - 1) * (rate + w_width))
        }
    };
    let widths: Vec<f64> = per_subset.iter().map(|t| t.width).collect();
    Ok(BoundReport::assemble(
        BoundMethod::ResultBound,
        cfg.direction,
        est.s_v,
        pairwise_sum(&widths),
        epsilon_w,
        cfg.delta + cfg.delta_w,
        per_subset,
    ))
}

/// Empirical Bernstein bound on every truncated `f_i` plus an exact binomial
/// bound on the `c_R'` rate. Upper bounds only.
pub fn test_bound_from(evals: &Evaluations, cfg: &BoundConfig) -> Result<BoundReport> {
    check_matches(evals, cfg)?;
    if cfg.direction != Direction::Upper {
        return param("test bound is an upper bound only");
    }
    if cfg.w == 0 {
        return param("test bound needs w >= 1");
    }
    if cfg.sizes().iter().any(|&s| s < 2) {
        return param("test bound needs at least two examples per subset");
    }
    let r = cfg.r;
    let est = evals.s_v(cfg.depth);
    let delta_i = cfg.delta / r as f64;
    let per_subset: Vec<SubsetTerm> = est
        .values
        .iter()
        .zip(&est.ranges)
        .enumerate()
        .map(|(i, (v, &range))| SubsetTerm {
            index: i + 1,
            mean: mean(v),
            width: bernstein_width(sample_variance(v), v.len(), range, delta_i, Direction::Upper),
        })
        .collect();
    let coefficient = if cfg.depth < r { 1.0 } else { 2f64.powi(r as i32 - 1) };
    let tail = binomial_tail_upper(evals.holdout_hits() as u64, cfg.w as u64, cfg.delta_w)?;
    let widths: Vec<f64> = per_subset.iter().map(|t| t.width).collect();
    Ok(BoundReport::assemble(
        BoundMethod::TestBound,
        Direction::Upper,
        est.s_v,
        pairwise_sum(&widths),
        coefficient * tail,
        cfg.delta + cfg.delta_w,
        per_subset,
    ))
}

/// Bound of the configured variant from precomputed evaluations.
pub fn bound_from(evals: &Evaluations, cfg: &BoundConfig) -> Result<BoundReport> {
    match cfg.variant {
        BoundVariant::HoeffdingResultBound => result_bound_from(evals, cfg),
        BoundVariant::BernsteinTestBound => test_bound_from(evals, cfg),
    }
}

pub fn result_bound(examples: &[LabeledExample], cfg: &BoundConfig, exec: Execution) -> Result<BoundReport> {
    if cfg.variant != BoundVariant::HoeffdingResultBound {
        return param("result bound needs the hoeffding-result-bound variant");
    }
    let partition = cfg.partition(examples)?;
    result_bound_from(&Evaluations::compute(&partition, cfg.k, exec)?, cfg)
}

pub fn test_bound(examples: &[LabeledExample], cfg: &BoundConfig, exec: Execution) -> Result<BoundReport> {
    if cfg.variant != BoundVariant::BernsteinTestBound {
        return param("test bound needs the bernstein-test-bound variant");
    }
    let partition = cfg.partition(examples)?;
    test_bound_from(&Evaluations::compute(&partition, cfg.k, exec)?, cfg)
}

/// Fixed point of `m = (n - m)^{r/(r+1/2)} / ((k + r - 1) e)` and the
/// number of iterations taken.
pub fn solve_m(n: usize, k: usize, r: usize) -> (f64, usize) {
    let exponent = r as f64 / (r as f64 + 0.5);
    let scale = (k + r - 1) as f64 * std::f64::consts::E;
    let step = |m: f64| (n as f64 - m).max(0.0).powf(exponent) / scale;
    let mut m = step(0.0);
    for it in 1..=100 {
        let next = step(m);
        if (next - m).abs() < 1e-9 * m.max(1.0) {
            return (next, it);
        }
        m = next;
    }
    (m, 100)
}

/// Suggested `(m, w)` with `w = m`.
pub fn suggest_m(n: usize, k: usize, r: usize) -> Result<(usize, usize)> {
    if r == 0 || k == 0 {
        return param("k and r must be positive");
    }
    let m = solve_m(n, k, r).0.round() as usize;
    if m == 0 || (r + 1) * m + k > n {
        return param(format!("suggested m = {m} with w = m is infeasible for n = {n}, k = {k}, r = {r}"));
    }
    Ok((m, m))
}

/// `ceil(sqrt(ln n) / (2 sqrt(ln 3)))`, at least 1.
pub fn suggest_r(n: usize) -> usize {
    let x = (n.max(2) as f64).ln().sqrt() / (2.0 * 3f64.ln().sqrt());
    ((x - 1e-9).ceil() as usize).max(1)
}
