//! Bound reports and their flat `key=value` text form.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::concentration::Direction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    /// Hoeffding bounds on each `f_i` plus a Hoeffding bound on the `c_R'` rate.
    ResultBound,
    /// Empirical Bernstein on truncated `f_i` plus an exact binomial `c_R'` bound.
    TestBound,
    /// Mean over sampled permutations with the closed-form `c_R` bound.
    Independent,
    /// Mean over sampled permutations with the exact permutation probability of `c_R`.
    IndependentTight,
    /// One validation per combination `A = S ∪ T`.
    Combination,
}

impl BoundMethod {
    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::ResultBound => "result-bound",
            BoundMethod::TestBound => "test-bound",
            BoundMethod::Independent => "independent",
            BoundMethod::IndependentTight => "independent-tight",
            BoundMethod::Combination => "combination",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            BoundMethod::ResultBound,
            BoundMethod::TestBound,
            BoundMethod::Independent,
            BoundMethod::IndependentTight,
            BoundMethod::Combination,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Upper => "upper",
        Direction::Lower => "lower",
        Direction::TwoSided => "two-sided",
    }
}

/// Diagnostic for one validation subset: empirical mean of `f_i` and the
/// concentration width charged for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetTerm {
    pub index: usize,
    pub mean: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: BoundMethod,
    pub direction: Direction,
    /// `s_V`, or its mean over sampled permutations.
    pub estimate: f64,
    /// Width charged for the validation terms.
    pub epsilon_v: f64,
    /// Bound on the residual `S ∪ T = R` terms.
    pub epsilon_w: f64,
    /// `estimate + eps` (upper and two-sided) or `estimate - eps` (lower).
    pub final_bound: f64,
    pub failure_prob: f64,
    pub per_subset: Vec<SubsetTerm>,
}

impl BoundReport {
    pub(crate) fn assemble(
        method: BoundMethod,
        direction: Direction,
        estimate: f64,
        epsilon_v: f64,
        epsilon_w: f64,
        failure_prob: f64,
        per_subset: Vec<SubsetTerm>,
    ) -> Self {
        let eps = epsilon_v + epsilon_w;
        let final_bound = match direction {
            Direction::Lower => estimate - eps,
            _ => estimate + eps,
        };
        BoundReport { method, direction, estimate, epsilon_v, epsilon_w, final_bound, failure_prob, per_subset }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon_v + self.epsilon_w
    }

    /// `[estimate - eps, estimate + eps]` for two-sided reports; one-sided
    /// reports leave the other end open.
    pub fn interval(&self) -> (f64, f64) {
        let eps = self.epsilon();
        match self.direction {
            Direction::Upper => (f64::NEG_INFINITY, self.estimate + eps),
            Direction::Lower => (self.estimate - eps, f64::INFINITY),
            Direction::TwoSided => (self.estimate - eps, self.estimate + eps),
        }
    }

    /// Whether `error` lies outside the certified range.
    pub fn violated_by(&self, error: f64) -> bool {
        let (lo, hi) = self.interval();
        error < lo || error > hi
    }

    /// `final_bound` clipped to `[0, 1]`, for display and experiment output.
    pub fn clamped(&self) -> f64 {
        self.final_bound.clamp(0.0, 1.0)
    }

    pub fn to_record(&self) -> String {
        self.to_string()
    }

    pub fn parse_record(line: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse { line: 1, message: m };
        let mut kv = BTreeMap::new();
        for pair in line.split_whitespace() {
            let (k, v) = pair.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {pair:?}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse::<f64>().map_err(|e| bad(format!("{k}: {e}"))) };
        let method = BoundMethod::parse(get("method")?).ok_or_else(|| bad("unknown method".into()))?;
        let direction: Direction = get("direction")?.parse().map_err(bad)?;
        let subsets: usize = get("subsets")?.parse().map_err(|e| bad(format!("subsets: {e}")))?;
        let per_subset = (0..subsets)
            .map(|i| {
                Ok(SubsetTerm {
                    index: i + 1,
                    mean: num(&format!("subset{}_mean", i + 1))?,
                    width: num(&format!("subset{}_width", i + 1))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundReport {
            method,
            direction,
            estimate: num("estimate")?,
            epsilon_v: num("epsilon_v")?,
            epsilon_w: num("epsilon_w")?,
            final_bound: num("final_bound")?,
            failure_prob: num("failure_prob")?,
            per_subset,
        })
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "method={} direction={} estimate={} epsilon_v={} epsilon_w={} final_bound={} failure_prob={} subsets={}",
            self.method.name(),
            direction_name(self.direction),
            self.estimate,
            self.epsilon_v,
            self.epsilon_w,
            self.final_bound,
            self.failure_prob,
            self.per_subset.len()
        )?;
        for t in &self.per_subset {
            write!(f, " subset{0}_mean={1} subset{0}_width={2}", t.index, t.mean, t.width)?;
        }
        Ok(())
    }
}
