//! Concentration bounds on empirical means and exact discrete tails.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{param, Result};
use crate::exec::{mean, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    Upper,
    Lower,
    /// Symmetric interval; bound functions return the half-width.
    TwoSided,
}

impl Direction {
    pub fn is_one_sided(self) -> bool {
        !matches!(self, Direction::TwoSided)
    }

    /// `+1` for upper, `-1` for lower and `0` for two-sided.
    pub(crate) fn sign(self) -> f64 {
        match self {
            Direction::Upper => 1.0,
            Direction::Lower => -1.0,
            Direction::TwoSided => 0.0,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "upper" => Ok(Direction::Upper),
            "lower" => Ok(Direction::Lower),
            "two-sided" => Ok(Direction::TwoSided),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

fn check_delta(delta: f64, max: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= max) {
        return param(format!("delta must lie in (0, {max}], got {delta}"));
    }
    Ok(())
}

fn check_range(range_len: f64) -> Result<()> {
    if !(range_len > 0.0 && range_len.is_finite()) {
        return param(format!("range length must be positive, got {range_len}"));
    }
    Ok(())
}

/// Hoeffding deviation `range * sqrt(ln(c/delta) / (2 count))` with `c = 1`
/// one-sided and `c = 2` two-sided.
pub fn hoeffding_width(count: usize, range_len: f64, delta: f64, direction: Direction) -> f64 {
    let c = if direction.is_one_sided() { 1.0 } else { 2.0 };
    range_len * ((c / delta).ln() / (2.0 * count as f64)).sqrt()
}

/// `mean ± width` for one-sided directions, the half-width for two-sided.
pub fn hoeffding_bound(values: &[f64], range_len: f64, delta: f64, direction: Direction) -> Result<f64> {
    if values.is_empty() {
        return param("hoeffding bound needs at least one value");
    }
    check_range(range_len)?;
    // delta up to 2 keeps ln(2/delta) >= 0 for two-sided use.
    check_delta(delta, 2.0)?;
    let width = hoeffding_width(values.len(), range_len, delta, direction);
    Ok(match direction {
        Direction::TwoSided => width,
        d => mean(values) + d.sign() * width,
    })
}

/// Unbiased sample variance (divisor `n - 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mu) * (v - mu)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Empirical Bernstein deviation
/// `sqrt(2 Var ln(c/delta) / n) + range * 7 ln(c/delta) / (3 (n - 1))`
/// with `c = 2` one-sided and `c = 4` two-sided.
pub fn bernstein_width(variance: f64, count: usize, range_len: f64, delta: f64, direction: Direction) -> f64 {
    let c = if direction.is_one_sided() { 2.0 } else { 4.0 };
    let log_term = (c / delta).ln();
    let n = count as f64;
    (2.0 * variance * log_term / n).sqrt() + range_len * 7.0 * log_term / (3.0 * (n - 1.0))
}

pub fn empirical_bernstein_bound(values: &[f64], range_len: f64, delta: f64, direction: Direction) -> Result<f64> {
    if values.len() < 2 {
        return param("empirical Bernstein bound needs at least two values");
    }
    check_range(range_len)?;
    check_delta(delta, 2.0)?;
    let width = bernstein_width(sample_variance(values), values.len(), range_len, delta, direction);
    Ok(match direction {
        Direction::TwoSided => width,
        d => mean(values) + d.sign() * width,
    })
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        ln_binomial(n, k)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let scaled: Vec<f64> = terms.iter().map(|t| (t - max).exp()).collect();
    max + pairwise_sum(&scaled).ln()
}

/// `P(Binomial(trials, p) <= successes)`.
pub fn binomial_cdf(successes: u64, trials: u64, p: f64) -> f64 {
    if successes >= trials {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (0..=successes)
        .map(|i| ln_choose(trials, i) + i as f64 * lp + (trials - i) as f64 * lq)
        .collect();
    log_sum_exp(&terms).exp().min(1.0)
}

/// Exact binomial tail inversion: the largest `p` with
/// `P(Binomial(trials, p) <= successes) >= delta`, to within `1e-12`.
pub fn binomial_tail_upper(successes: u64, trials: u64, delta: f64) -> Result<f64> {
    if trials == 0 {
        return param("trials must be at least 1");
    }
    if successes > trials {
        return param(format!("successes {successes} exceed trials {trials}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("delta must lie in (0, 1), got {delta}"));
    }
    if successes == trials {
        return Ok(1.0);
    }
    let mut lo = successes as f64 / trials as f64;
    if binomial_cdf(successes, trials, lo) < delta {
        // Only possible for large delta; the answer then lies below the mean.
        lo = 0.0;
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if binomial_cdf(successes, trials, mid) >= delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Upper tail of a hypergeometric count: among `draws` items taken without
/// replacement from `population` of which `marked` are marked, the
/// probability that at least `min_marked` are marked.
pub fn hypergeometric_tail_exact(population: u64, marked: u64, draws: u64, min_marked: u64) -> Result<f64> {
    if marked > population || draws > population {
        return param(format!(
            "need marked <= population and draws <= population, got {marked}, {draws}, {population}"
        ));
    }
    if min_marked == 0 {
        return Ok(1.0);
    }
    let denom = ln_choose(population, marked);
    let hi = draws.min(marked);
    let terms: Vec<f64> = (min_marked..=hi)
        .filter(|&i| marked - i <= population - draws)
        .map(|i| (ln_choose(draws, i) + ln_choose(population - draws, marked - i) - denom).exp())
        .collect();
    Ok(pairwise_sum(&terms).min(1.0))
}

/// `((k + r - 1) m / n_eff)^r e^r`.
pub fn chvatal_tail_bound(n_eff: u64, k: u64, r: u64, m: u64) -> Result<f64> {
    if n_eff == 0 || k == 0 || r == 0 || m == 0 {
        return param("Chvatal bound needs positive n_eff, k, r and m");
    }
    let base = (k + r - 1) as f64 * m as f64 / n_eff as f64 * std::f64::consts::E;
    Ok(base.powi(r as i32))
}
