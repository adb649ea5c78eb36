//! Data-independent bounds: `s_V` averaged over sampled permutations of the
//! in-sample data, with the residual handled combinatorially instead of by a
//! holdout set.

use serde::{Deserialize, Serialize};

use crate::concentration::{hoeffding_width, ln_choose, Direction};
use crate::dataset::{shuffle_with_permutation, LabeledExample, Permutation};
use crate::dependent_bounds::{BoundConfig, Evaluations};
use crate::error::{param, Result};
use crate::exec::{mean, pairwise_sum, Execution};
use crate::report::{BoundMethod, BoundReport, SubsetTerm};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub q: usize,
    pub seed: u64,
    pub delta_q: f64,
}

impl PermutationPlan {
    pub fn new(q: usize, seed: u64, delta_q: f64) -> Result<Self> {
        if q == 0 {
            return param("q must be at least 1");
        }
        if !(delta_q > 0.0 && delta_q < 1.0) {
            return param(format!("delta_q must lie in (0, 1), got {delta_q}"));
        }
        Ok(PermutationPlan { q, seed, delta_q })
    }

    /// The `index`-th sampled permutation of `0..n`.
    pub fn permutation(&self, n: usize, index: usize) -> Permutation {
        Permutation::random(n, &mut rng::stream(self.seed, rng::TAG_PERMUTATION, index as u64))
    }
}

/// Per-permutation `s_V` and per-subset means.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationSample {
    pub s_v: Vec<f64>,
    pub subset_means: Vec<Vec<f64>>,
}

impl PermutationSample {
    pub fn mean(&self) -> f64 {
        mean(&self.s_v)
    }
}

fn check_config(cfg: &BoundConfig) -> Result<()> {
    if cfg.w != 0 {
        return param("permutation bounds use no W set; set w = 0");
    }
    if cfg.depth != cfg.r {
        return param("permutation bounds need depth = r");
    }
    if cfg.subset_sizes.as_ref().is_some_and(|s| s.iter().any(|&x| x != cfg.m)) {
        return param("permutation bounds need equal subset sizes");
    }
    Ok(())
}

/// `s_V(σ)` for each given permutation.
pub fn permutation_s_v_with(
    examples: &[LabeledExample],
    cfg: &BoundConfig,
    permutations: &[Permutation],
    exec: Execution,
) -> Result<PermutationSample> {
    check_config(cfg)?;
    cfg.validate(examples.len())?;
    if permutations.is_empty() {
        return param("at least one permutation is needed");
    }
    let per = exec.map(permutations.len(), |j| -> Result<(f64, Vec<f64>)> {
        let shuffled = shuffle_with_permutation(examples, &permutations[j])?;
        let partition = cfg.partition(&shuffled)?;
        let est = Evaluations::compute(&partition, cfg.k, exec)?.s_v(cfg.r);
        Ok((est.s_v, est.values.iter().map(|v| mean(v)).collect()))
    });
    let mut s_v = Vec::with_capacity(permutations.len());
    let mut subset_means = Vec::with_capacity(permutations.len());
    for p in per {
        let (s, means) = p?;
        s_v.push(s);
        subset_means.push(means);
    }
    Ok(PermutationSample { s_v, subset_means })
}

/// `s_V(σ)` over the plan's `q` sampled permutations.
pub fn permutation_s_v(
    examples: &[LabeledExample],
    cfg: &BoundConfig,
    plan: &PermutationPlan,
    exec: Execution,
) -> Result<PermutationSample> {
    let perms: Vec<Permutation> = (0..plan.q).map(|j| plan.permutation(examples.len(), j)).collect();
    permutation_s_v_with(examples, cfg, &perms, exec)
}

/// `mean_Q(s_V(σ))`.
pub fn permutation_mean_s_v(
    examples: &[LabeledExample],
    cfg: &BoundConfig,
    plan: &PermutationPlan,
    exec: Execution,
) -> Result<f64> {
    Ok(permutation_s_v(examples, cfg, plan, exec)?.mean())
}

/// `r 3^{r-1} sqrt(ln(2rq/δ)/(2m)) + 2^r [sqrt(ln(2/δ_q)/(2q)) + ((k+r-1)m/n)^r e^r]`.
pub fn epsilon_q_chvatal(n: usize, k: usize, r: usize, m: f64, q: usize, delta: f64, delta_q: f64) -> f64 {
    let (rf, q) = (r as f64, q as f64);
    rf * 3f64.powi(r as i32 - 1) * ((2.0 * rf * q / delta).ln() / (2.0 * m)).sqrt()
        + 2f64.powi(r as i32)
            * (((2.0 / delta_q).ln() / (2.0 * q)).sqrt()
                + ((k + r - 1) as f64 * m / n as f64 * std::f64::consts::E).powi(r as i32))
}

/// Same as [`epsilon_q_chvatal`] with `u(n, k, r)` in place of the closed-form tail.
pub fn epsilon_q_exact(n: usize, k: usize, r: usize, m: usize, q: usize, delta: f64, delta_q: f64) -> Result<f64> {
    let (rf, qf) = (r as f64, q as f64);
    Ok(rf * 3f64.powi(r as i32 - 1) * ((2.0 * rf * qf / delta).ln() / (2.0 * m as f64)).sqrt()
        + 2f64.powi(r as i32) * (((2.0 / delta_q).ln() / (2.0 * qf)).sqrt() + u_value(n, k, r, m)?))
}

fn check_u_params(n: usize, k: usize, r: usize, m: usize) -> Result<()> {
    if k == 0 || r == 0 || m == 0 {
        return param("k, r and m must be positive");
    }
    if r * m + k > n {
        return param(format!("r*m + k = {} exceeds n = {n}", r * m + k));
    }
    Ok(())
}

/// `ln C((r-j)m, i) - ln C(rm, i)` terms with signs, `j = 0..=r`.
fn inner_terms(r: usize, m: usize, i: usize) -> Vec<f64> {
    let base = ln_choose((r * m) as u64, i as u64);
    (0..=r)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let ln = ln_choose(r as u64, j as u64) + ln_choose(((r - j) * m) as u64, i as u64) - base;
            sign * ln.exp()
        })
        .collect()
}

/// Probability that the `i` nearest validation examples cover every subset.
/// Terms are paired `(j, j+1)` before accumulation.
pub fn coverage_probability(r: usize, m: usize, i: usize) -> f64 {
    let terms = inner_terms(r, m, i);
    let pairs: Vec<f64> = terms.chunks(2).map(|c| c.iter().sum()).collect();
    pairs.iter().sum::<f64>().clamp(0.0, 1.0)
}

fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

fn u_with(n: usize, k: usize, r: usize, m: usize, inner: impl Fn(usize) -> f64, sum: impl Fn(Vec<f64>) -> f64) -> f64 {
    let rm = r * m;
    let ln_rest = ln_choose((n - rm) as u64, k as u64);
    let top = (n - k).min(rm);
    let terms: Vec<f64> = (r..=top)
        .map(|i| {
            let ln_w = ln_rest + ln_choose(rm as u64, i as u64) - ln_choose(n as u64, (k + i) as u64);
            ln_w.exp() * (k as f64 / (k + i) as f64) * inner(i)
        })
        .collect();
    sum(terms).clamp(0.0, 1.0)
}

/// `u(n, k, r)`: the probability over uniform permutations that every
/// validation subset of size `m` beats the `k`-th nearest non-validation
/// example.
pub fn u_value(n: usize, k: usize, r: usize, m: usize) -> Result<f64> {
    check_u_params(n, k, r, m)?;
    Ok(u_with(n, k, r, m, |i| coverage_probability(r, m, i), |t| pairwise_sum(&t)))
}

/// [`u_value`] with compensated summation at both levels, for checking
/// cancellation loss.
pub fn u_value_compensated(n: usize, k: usize, r: usize, m: usize) -> Result<f64> {
    check_u_params(n, k, r, m)?;
    Ok(u_with(n, k, r, m, |i| neumaier(inner_terms(r, m, i)).clamp(0.0, 1.0), neumaier))
}

/// Two-sided permutation bound. `tight` uses `u(n, k, r)` for the residual,
/// otherwise the closed-form tail.
pub fn independent_bound(
    examples: &[LabeledExample],
    cfg: &BoundConfig,
    plan: &PermutationPlan,
    tight: bool,
    exec: Execution,
) -> Result<BoundReport> {
    let sample = permutation_s_v(examples, cfg, plan, exec)?;
    independent_bound_from(&sample, examples.len(), cfg, plan, tight)
}

pub fn independent_bound_from(
    sample: &PermutationSample,
    n: usize,
    cfg: &BoundConfig,
    plan: &PermutationPlan,
    tight: bool,
) -> Result<BoundReport> {
    check_config(cfg)?;
    let (r, m, q) = (cfg.r, cfg.m, sample.s_v.len());
    if q != plan.q {
        return param("sample size differs from the plan's q");
    }
    let width = 3f64.powi(r as i32 - 1) * hoeffding_width(m, 1.0, cfg.delta / (r * q) as f64, Direction::TwoSided);
    let residual = if tight {
        u_value(n, cfg.k, r, m)?
    } else {
        ((cfg.k + r - 1) as f64 * m as f64 / n as f64 * std::f64::consts::E).powi(r as i32)
    };
    let epsilon_w =
        2f64.powi(r as i32) * (hoeffding_width(q, 1.0, plan.delta_q, Direction::TwoSided) + residual);
    let per_subset = (0..r)
        .map(|i| {
            let means: Vec<f64> = sample.subset_means.iter().map(|s| s[i]).collect();
            SubsetTerm { index: i + 1, mean: mean(&means), width }
        })
        .collect();
    Ok(BoundReport::assemble(
        if tight { BoundMethod::IndependentTight } else { BoundMethod::Independent },
        Direction::TwoSided,
        sample.mean(),
        r as f64 * width,
        epsilon_w,
        cfg.delta + plan.delta_q,
        per_subset,
    ))
}

/// Unrounded `n^{r/(r+1/2)} / ((k+r-1) e)`.
pub fn independent_m(n: usize, k: usize, r: usize) -> f64 {
    (n as f64).powf(r as f64 / (r as f64 + 0.5)) / ((k + r - 1) as f64 * std::f64::consts::E)
}

/// Suggested `(m, q)` with `q = n`.
pub fn suggest_m_independent(n: usize, k: usize, r: usize) -> Result<(usize, usize)> {
    if k == 0 || r == 0 {
        return param("k and r must be positive");
    }
    let m = independent_m(n, k, r).round() as usize;
    if m == 0 || r * m + k > n {
        return param(format!("suggested m = {m} is infeasible for n = {n}, k = {k}, r = {r}"));
    }
    Ok((m, n))
}
