//! One validation per combination `A = S ∪ T` of subsets.
//!
//! `f_A(x, y) = Σ_{S ⊆ A} (-1)^{|A-S|} I(c_A(x) ∧ g_S(x) ≠ y)` does not depend
//! on the examples of `V_{R-A}`, so its mean over `V_{R-A}` gets its own
//! Hoeffding bound. Failure probability is spread over levels `j = |A|`.

use serde::{Deserialize, Serialize};

use crate::concentration::{hoeffding_width, ln_choose, Direction};
use crate::dataset::LabeledExample;
use crate::dependent_bounds::{BoundConfig, Evaluations, ExampleEval};
use crate::error::{param, Result};
use crate::exec::{mean, pairwise_sum, Execution};
use crate::neighbors::{NeighborContext, SubsetMask};
use crate::report::{BoundMethod, BoundReport, SubsetTerm};

/// `(δ/2) / ln(1 + δ/2)`.
pub fn alpha(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return param(format!("delta must be positive, got {delta}"));
    }
    let z = delta / 2.0;
    Ok(z / z.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `δ_j = 2 (δ / (2 r α(δ)))^{r-j}`.
    #[default]
    ClosedForm,
    /// The same `δ_A` for every `A`.
    Uniform,
    /// Numerically minimizes the levelwise width.
    Optimized,
}

/// Failure probability for each combination of size `j`, `j = 0..r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub delta: f64,
    pub per_level: Vec<f64>,
}

fn binomial(r: usize, j: usize) -> f64 {
    ln_choose(r as u64, j as u64).exp().round()
}

fn check(r: usize, delta: f64) -> Result<()> {
    if r == 0 {
        return param("r must be at least 1");
    }
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

impl DeltaSchedule {
    pub fn new(kind: ScheduleKind, r: usize, m: usize, delta: f64) -> Result<Self> {
        match kind {
            ScheduleKind::ClosedForm => Self::closed_form(r, delta),
            ScheduleKind::Uniform => Self::uniform(r, delta),
            ScheduleKind::Optimized => Self::optimized(r, m, delta),
        }
    }

    pub fn closed_form(r: usize, delta: f64) -> Result<Self> {
        check(r, delta)?;
        let base = delta / (2.0 * r as f64 * alpha(delta)?);
        Ok(DeltaSchedule { delta, per_level: (0..r).map(|j| 2.0 * base.powi((r - j) as i32)).collect() })
    }

    pub fn uniform(r: usize, delta: f64) -> Result<Self> {
        check(r, delta)?;
        let count = 2f64.powi(r as i32) - 1.0;
        Ok(DeltaSchedule { delta, per_level: vec![delta / count; r] })
    }

    /// Equalizes the marginal width gain per unit of failure probability
    /// across levels, then rescales onto the budget.
    pub fn optimized(r: usize, m: usize, delta: f64) -> Result<Self> {
        check(r, delta)?;
        if m == 0 {
            return param("m must be at least 1");
        }
        // At the optimum δ_j sqrt(ln(2/δ_j)) = b_j / λ with
        // b_j = 2^{j-1} / sqrt((r-j) m); φ(δ) = δ sqrt(ln(2/δ)) increases on
        // (0, 2 e^{-1/2}).
        let phi = |d: f64| d * (2.0 / d).ln().sqrt();
        let top = 2.0 * (-0.5f64).exp();
        let invert = |target: f64| {
            if target >= phi(top) {
                return top;
            }
            let (mut lo, mut hi) = (0.0f64, top);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if phi(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let b: Vec<f64> = (0..r).map(|j| 2f64.powi(j as i32 - 1) / (((r - j) * m) as f64).sqrt()).collect();
        let levels = |inv_lambda: f64| -> Vec<f64> { b.iter().map(|&bj| invert(bj * inv_lambda)).collect() };
        let total = |d: &[f64]| -> f64 { d.iter().enumerate().map(|(j, &x)| binomial(r, j) * x).sum() };
        // Bisect on 1/λ in log space; the total increases with 1/λ.
        let (mut lo, mut hi) = (-200.0f64, 50.0f64);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if total(&levels(mid.exp())) <= delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(DeltaSchedule { delta, per_level: levels(lo.exp()) })
    }

    pub fn r(&self) -> usize {
        self.per_level.len()
    }

    /// `Σ_j C(r, j) δ_j`.
    pub fn total(&self) -> f64 {
        let r = self.r();
        self.per_level.iter().enumerate().map(|(j, &d)| binomial(r, j) * d).sum()
    }

    /// `Σ_j C(r, j) 2^j sqrt(ln(2/δ_j) / ((r-j) m))`.
    pub fn epsilon_v(&self, m: usize) -> f64 {
        let r = self.r();
        let terms: Vec<f64> = self
            .per_level
            .iter()
            .enumerate()
            .map(|(j, &d)| binomial(r, j) * 2f64.powi(j as i32) * ((2.0 / d).ln() / ((r - j) * m) as f64).sqrt())
            .collect();
        pairwise_sum(&terms)
    }
}

/// `(3^r - 2^r) sqrt(ln(2 r α(δ) / δ) / m)`.
pub fn epsilon_v_closed_form(r: usize, m: usize, delta: f64) -> Result<f64> {
    check(r, delta)?;
    let a = alpha(delta)?;
    Ok((3f64.powi(r as i32) - 2f64.powi(r as i32)) * ((2.0 * r as f64 * a / delta).ln() / m as f64).sqrt())
}

/// Levelwise width under the closed-form schedule.
pub fn epsilon_v_levelwise(r: usize, m: usize, delta: f64) -> Result<f64> {
    Ok(DeltaSchedule::closed_form(r, delta)?.epsilon_v(m))
}

/// `f_A(x, y)` for an example outside every subset of `A`.
pub fn f_a_value(ctx: &NeighborContext, label: u8, a: SubsetMask) -> Result<f64> {
    if !ctx.condition_c(a) {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in a.submasks() {
        if ctx.classify(s)? != label {
            total += if a.minus(s).len() % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    Ok(total)
}

/// `f_A` from a precomputed evaluation of an example outside `A`.
pub fn f_a_from_eval(eval: &ExampleEval, a: SubsetMask) -> f64 {
    if !a.is_subset_of(eval.closer) {
        return 0.0;
    }
    a.submasks()
        .filter(|&s| eval.error(s))
        .map(|s| if a.minus(s).len() % 2 == 0 { 1.0 } else { -1.0 })
        .sum()
}

/// Mean of `f_A` over `V_{R-A}` for every proper subset `A`, keyed by mask.
pub fn combination_means(evals: &Evaluations) -> Vec<(SubsetMask, f64)> {
    let r = evals.r();
    let all = SubsetMask::full(r);
    let mut out: Vec<(SubsetMask, f64)> = all
        .submasks()
        .filter(|&a| a != all)
        .map(|a| {
            let values: Vec<f64> = all
                .minus(a)
                .indices()
                .flat_map(|j| evals.subset(j).iter().map(move |e| f_a_from_eval(e, a)))
                .collect();
            (a, mean(&values))
        })
        .collect();
    out.sort_by_key(|(a, _)| a.0);
    out
}

/// `Σ_{A ⊊ R}` of the mean of `f_A` over `V_{R-A}`.
pub fn combination_estimate(evals: &Evaluations) -> f64 {
    let means: Vec<f64> = combination_means(evals).into_iter().map(|(_, v)| v).collect();
    pairwise_sum(&means)
}

/// Estimate from per-combination means, `ε_V` from the schedule, and the
/// same `W` term as the result bound.
pub fn combination_bound_from(evals: &Evaluations, cfg: &BoundConfig, kind: ScheduleKind) -> Result<BoundReport> {
    if cfg.depth != cfg.r {
        return param("combination bound needs depth = r");
    }
    if cfg.subset_sizes.as_ref().is_some_and(|s| s.iter().any(|&x| x != cfg.m)) {
        return param("combination bound needs equal subset sizes");
    }
    if evals.sizes() != vec![cfg.m; cfg.r].as_slice() || evals.w() != cfg.w {
        return param("evaluations were computed for a different partition");
    }
    if cfg.w == 0 {
        return param("combination bound needs w >= 1");
    }
    let r = cfg.r;
    let schedule = DeltaSchedule::new(kind, r, cfg.m, cfg.delta)?;
    let epsilon_v = schedule.epsilon_v(cfg.m);
    let rate = evals.holdout_hits() as f64 / cfg.w as f64;
    let epsilon_w = match cfg.direction {
        Direction::TwoSided => {
            2f64.powi(r as i32) * (rate + hoeffding_width(cfg.w, 1.0, cfg.delta_w, Direction::TwoSided))
        }
        _ => 2f64.powi(r as i32 - 1) * (rate + hoeffding_width(cfg.w, 1.0, cfg.delta_w, Direction::Upper)),
    };
    let per_subset = combination_means(evals)
        .into_iter()
        .map(|(a, v)| {
            let j = a.len();
            let width = 2f64.powi(j as i32) * ((2.0 / schedule.per_level[j]).ln() / ((r - j) * cfg.m) as f64).sqrt();
            SubsetTerm { index: a.0 as usize, mean: v, width }
        })
        .collect();
    Ok(BoundReport::assemble(
        BoundMethod::Combination,
        cfg.direction,
        combination_estimate(evals),
        epsilon_v,
        epsilon_w,
        cfg.delta + cfg.delta_w,
        per_subset,
    ))
}

pub fn combination_bound(
    examples: &[LabeledExample],
    cfg: &BoundConfig,
    kind: ScheduleKind,
    exec: Execution,
) -> Result<BoundReport> {
    let partition = cfg.partition(examples)?;
    combination_bound_from(&Evaluations::compute(&partition, cfg.k, exec)?, cfg, kind)
}
