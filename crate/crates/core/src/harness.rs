//! Experiment grids, exact identity checks on finite domains, and Monte Carlo
//! coverage suites.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::combination_validation::{combination_bound_from, ScheduleKind};
use crate::concentration::{
    binomial_tail_upper, empirical_bernstein_bound, hoeffding_bound, Direction,
};
use crate::dataset::{
    generate_quadrant_dataset, shuffle_with_permutation, LabeledExample, PartitionedDataset, Permutation,
    QuadrantDistribution,
};
use crate::dependent_bounds::{
    bound_from, suggest_m, truncation_width, BoundConfig, BoundVariant, Evaluations,
};
use crate::error::{param, Result};
use crate::exec::{mean, Execution};
use crate::independent_bounds::{independent_bound_from, permutation_s_v, suggest_m_independent, u_value, PermutationPlan};
use crate::neighbors::{build_context, Euclidean, KnnClassifier, Query, SubsetMask};
use crate::report::BoundReport;
use crate::rng;

pub const CSV_HEADER: &str = "trial,n,k,r,d,m,w,variant,bound,test_error,gap,seed,runtime_s";
pub const SUMMARY_HEADER: &str = "n,k,r,d,m,w,variant,trials,mean_bound,mean_test_error,mean_gap,std_gap,std_mean";

fn variant_name(v: BoundVariant) -> &'static str {
    match v {
        BoundVariant::HoeffdingResultBound => "hoeffding-result-bound",
        BoundVariant::BernsteinTestBound => "bernstein-test-bound",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub noise: f64,
    pub trials: usize,
    pub m_fractions: Vec<f64>,
    pub r_values: Vec<usize>,
    /// Depths to try for each `r`; `None` means every `d < r`.
    pub d_values: Option<Vec<usize>>,
    pub delta: f64,
    pub delta_w: f64,
    pub test_size: usize,
    pub seed: u64,
    pub variant: BoundVariant,
    pub output: Option<PathBuf>,
    /// Record wall-clock seconds per cell; off gives reproducible files.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 50_000,
            k: 3,
            dim: DEFAULT_DIM,
            noise: 0.1,
            trials: 100,
            m_fractions: vec![0.00625, 0.0125, 0.025, 0.0375, 0.05, 0.0625, 0.075, 0.0875, 0.1],
            r_values: vec![1, 2, 3, 4, 5],
            d_values: None,
            delta: 0.025,
            delta_w: 0.025,
            test_size: 100_000,
            seed: 1,
            variant: BoundVariant::BernsteinTestBound,
            output: None,
            timing: true,
        }
    }
}

/// Input dimension used when none is given.
pub const DEFAULT_DIM: usize = 3;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if self.k % 2 == 0 {
            return param(format!("k must be odd, got {}", self.k));
        }
        if self.m_fractions.is_empty() || self.m_fractions.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
            return param("m fractions must be a non-empty list inside (0, 1)");
        }
        if self.r_values.is_empty() || self.r_values.iter().any(|&r| r == 0) {
            return param("r values must be a non-empty list of positive counts");
        }
        if self.test_size == 0 {
            return param("test size must be positive");
        }
        QuadrantDistribution::new(self.dim, self.noise)?;
        Ok(())
    }

    fn depths(&self, r: usize) -> Vec<usize> {
        match self.variant {
            BoundVariant::HoeffdingResultBound => vec![r],
            BoundVariant::BernsteinTestBound => match &self.d_values {
                Some(ds) => ds.iter().copied().filter(|&d| d <= r).collect(),
                None => (0..r).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub d: usize,
    pub m: usize,
    pub w: usize,
    pub variant: BoundVariant,
    /// `None` for skipped cells.
    pub bound: Option<f64>,
    pub test_error: f64,
    pub seed: u64,
    pub runtime_s: f64,
}

impl TrialRecord {
    pub fn gap(&self) -> Option<f64> {
        self.bound.map(|b| b - self.test_error)
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.n,
            self.k,
            self.r,
            self.d,
            self.m,
            self.w,
            variant_name(self.variant),
            opt(self.bound),
            self.test_error,
            opt(self.gap()),
            self.seed,
            self.runtime_s
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub d: usize,
    pub m: usize,
    pub w: usize,
    pub variant: BoundVariant,
    pub trials: usize,
    pub mean_bound: f64,
    pub mean_test_error: f64,
    pub mean_gap: f64,
    /// Sample standard deviation of per-trial gaps.
    pub std_gap: f64,
    /// Bootstrap standard deviation of the mean gap.
    pub std_mean: f64,
}

impl CellSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.k,
            self.r,
            self.d,
            self.m,
            self.w,
            variant_name(self.variant),
            self.trials,
            self.mean_bound,
            self.mean_test_error,
            self.mean_gap,
            self.std_gap,
            self.std_mean
        )
    }

    /// Whether the bootstrap spread of the mean is within 20% of `std / sqrt(trials)`.
    pub fn std_mean_consistent(&self) -> bool {
        let expected = self.std_gap / (self.trials as f64).sqrt();
        expected == 0.0 && self.std_mean == 0.0 || (self.std_mean - expected).abs() <= 0.2 * expected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<CellSummary>,
}

impl ExperimentResult {
    pub fn records_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for c in &self.summary {
            let _ = writeln!(s, "{}", c.csv_row());
        }
        s
    }

    /// Summary of the cell with the smallest mean gap.
    pub fn tightest(&self) -> Option<&CellSummary> {
        self.summary.iter().min_by(|a, b| a.mean_gap.total_cmp(&b.mean_gap))
    }

    pub fn cell(&self, r: usize, d: usize, m: usize) -> Option<&CellSummary> {
        self.summary.iter().find(|c| c.r == r && c.d == d && c.m == m)
    }
}

/// The configured trial's in-sample data, shuffled, and its fresh test set.
pub fn trial_data(cfg: &ExperimentConfig, trial: usize) -> Result<(u64, Vec<LabeledExample>, Vec<LabeledExample>)> {
    let seed = rng::derive_seed(cfg.seed, rng::TAG_TRIAL, trial as u64);
    let data = generate_quadrant_dataset(cfg.n, cfg.dim, cfg.noise, seed)?.into_examples();
    let perm = Permutation::random(cfg.n, &mut rng::stream(cfg.seed, rng::TAG_SHUFFLE, trial as u64));
    let shuffled = shuffle_with_permutation(&data, &perm)?;
    let dist = QuadrantDistribution::new(cfg.dim, cfg.noise)?;
    let test = dist.sample_n(cfg.test_size, &mut rng::stream(cfg.seed, rng::TAG_TEST_SET, trial as u64));
    Ok((seed, shuffled, test))
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, exec: Execution) -> Result<Vec<TrialRecord>> {
    let (seed, data, test) = trial_data(cfg, trial)?;
    let test_error = KnnClassifier::new(&data, cfg.k)?.error_rate(&test, exec);
    let mut out = Vec::new();
    for &c in &cfg.m_fractions {
        let m = (c * cfg.n as f64).round() as usize;
        let w = m;
        for &r in &cfg.r_values {
            let depths = cfg.depths(r);
            let record = |d: usize, bound: Option<f64>, runtime_s: f64| TrialRecord {
                trial,
                n: cfg.n,
                k: cfg.k,
                r,
                d,
                m,
                w,
                variant: cfg.variant,
                bound,
                test_error,
                seed,
                runtime_s,
            };
            let base = BoundConfig {
                variant: cfg.variant,
                depth: r,
                ..BoundConfig::result_bound(cfg.k, r, m, w, cfg.delta, cfg.delta_w)
            };
            let feasible = m >= 2 && base.validate(cfg.n).is_ok();
            if !feasible {
                out.extend(depths.iter().map(|&d| record(d, None, 0.0)));
                continue;
            }
            let started = Instant::now();
            let partition = base.partition(&data)?;
            let evals = Evaluations::compute(&partition, cfg.k, exec)?;
            let eval_time = started.elapsed().as_secs_f64();
            for &d in &depths {
                let started = Instant::now();
                let report = bound_from(&evals, &BoundConfig { depth: d, ..base.clone() })?;
                let runtime = if cfg.timing { eval_time + started.elapsed().as_secs_f64() } else { 0.0 };
                out.push(record(d, Some(report.clamped()), runtime));
            }
        }
    }
    Ok(out)
}

fn std_dev(values: &[f64]) -> f64 {
    crate::concentration::sample_variance(values).sqrt()
}

fn bootstrap_std_mean(values: &[f64], seed: u64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut g = rng::stream(seed, rng::TAG_DOMAIN, 0xb007);
    let means: Vec<f64> = (0..2000)
        .map(|_| {
            let s: f64 = (0..values.len()).map(|_| values[g.gen_range(0..values.len())]).sum();
            s / values.len() as f64
        })
        .collect();
    // Population spread of the bootstrap means, rescaled to the
    // unbiased sample variance of the values.
    let mu = mean(&means);
    let var = means.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / means.len() as f64;
    let n = values.len() as f64;
    (var * n / (n - 1.0)).sqrt()
}

fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<(usize, usize, usize, usize)> = Vec::new();
    for r in records {
        let key = (r.m, r.r, r.d, r.w);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    cells
        .into_iter()
        .filter_map(|(m, r, d, w)| {
            let rows: Vec<&TrialRecord> =
                records.iter().filter(|x| x.m == m && x.r == r && x.d == d && x.bound.is_some()).collect();
            if rows.is_empty() {
                return None;
            }
            let gaps: Vec<f64> = rows.iter().filter_map(|x| x.gap()).collect();
            let bounds: Vec<f64> = rows.iter().filter_map(|x| x.bound).collect();
            let errors: Vec<f64> = rows.iter().map(|x| x.test_error).collect();
            Some(CellSummary {
                n: cfg.n,
                k: cfg.k,
                r,
                d,
                m,
                w,
                variant: cfg.variant,
                trials: rows.len(),
                mean_bound: mean(&bounds),
                mean_test_error: mean(&errors),
                mean_gap: mean(&gaps),
                std_gap: std_dev(&gaps),
                std_mean: bootstrap_std_mean(&gaps, cfg.seed ^ ((m as u64) << 20 | (r as u64) << 8 | d as u64)),
            })
        })
        .collect()
}

/// Runs every trial and cell; infeasible cells are kept as records without
/// a bound. Output files are written when `cfg.output` is set: the trial CSV
/// at the path and the per-cell summary next to it with a `.summary.csv`
/// suffix.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentResult> {
    cfg.validate()?;
    let per_trial = exec.map(cfg.trials, |t| run_trial(cfg, t, exec));
    let mut records = Vec::new();
    for t in per_trial {
        records.extend(t?);
    }
    let summary = summarize(cfg, &records);
    let result = ExperimentResult { records, summary };
    if let Some(path) = &cfg.output {
        std::fs::File::create(path)?.write_all(result.records_csv().as_bytes())?;
        std::fs::File::create(summary_path(path))?.write_all(result.summary_csv().as_bytes())?;
    }
    Ok(result)
}

pub fn summary_path(path: &std::path::Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".summary.csv");
    PathBuf::from(s)
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub r: usize,
    pub k: usize,
    pub domain_size: usize,
    /// Exact error rate of the full classifier over the domain.
    pub p_star: f64,
    /// `Σ_S Σ_T (-1)^{|T|} P(C_{S,T})`.
    pub signed_sum: f64,
    /// Truncated signed sums by depth.
    pub truncated: Vec<(usize, f64)>,
    pub t_w: f64,
    pub p_c_r: f64,
    pub p_c_r_prime: f64,
    pub checks: Vec<Check>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A finite input domain with point weights and `P(y = 1 | x)`.
#[derive(Debug, Clone)]
pub struct FiniteDomain {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub positive: Vec<f64>,
    /// Query tiebreak for each point.
    pub tiebreaks: Vec<f64>,
}

impl FiniteDomain {
    /// Grid points on `[-1, 1]^2` with random weights and label probabilities.
    pub fn random(size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return param("domain must have at least one point");
        }
        let side = (size as f64).sqrt().ceil() as usize;
        let mut g = rng::stream(seed, rng::TAG_DOMAIN, 0);
        let coord = |i: usize| if side == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (side - 1) as f64 };
        let points: Vec<Vec<f64>> = (0..size).map(|p| vec![coord(p % side), coord(p / side)]).collect();
        let raw: Vec<f64> = (0..size).map(|_| g.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let positive = points
            .iter()
            .map(|x| {
                let clean = QuadrantDistribution::clean_label(x);
                let p: f64 = g.gen_range(0.0..0.3);
                if clean == 1 { 1.0 - p } else { p }
            })
            .collect();
        let tiebreaks = (0..size).map(|_| g.gen()).collect();
        Ok(FiniteDomain { points, weights, positive, tiebreaks })
    }

    /// `n` in-sample examples drawn from the domain.
    pub fn sample(&self, n: usize, g: &mut rng::Rng) -> Vec<LabeledExample> {
        let idx: Vec<usize> = (0..self.points.len()).collect();
        (0..n)
            .map(|_| {
                let p = *idx.choose_weighted(g, |&i| self.weights[i]).expect("non-empty domain");
                let label = u8::from(g.gen::<f64>() < self.positive[p]);
                LabeledExample { input: self.points[p].clone(), label, tiebreak: g.gen() }
            })
            .collect()
    }

    /// Probability that `label` is wrong at point `p`.
    fn error_prob(&self, p: usize, label: u8) -> f64 {
        if label == 1 { 1.0 - self.positive[p] } else { self.positive[p] }
    }
}

/// Exhaustive check of the inclusion and exclusion identity, the partition
/// by `b_S`, truncation soundness, and the residual bounds, on a random
/// finite domain and in-sample set.
pub fn verify_identity(domain_size: usize, r: usize, k: usize, seed: u64) -> Result<IdentityReport> {
    if domain_size > 1000 {
        return param("domain size must be at most 1000");
    }
    if k % 2 == 0 || r == 0 || r > 6 {
        return param("need odd k and 1 <= r <= 6");
    }
    let domain = FiniteDomain::random(domain_size, seed)?;
    let (m, w) = (4usize, 4usize);
    let n = r * m + w + k + 12;
    let data = domain.sample(n, &mut rng::stream(seed, rng::TAG_TRIAL, 0));
    let partition = PartitionedDataset::new(&data, r, m, w, k)?;
    let full_positions: Vec<usize> = (0..n).collect();
    let all = SubsetMask::full(r);

    let mut p_star = 0.0;
    let mut signed = 0.0;
    let mut truncated = vec![0.0; r + 1];
    let mut t_w = 0.0;
    let mut p_c_r = 0.0;
    let mut p_c_r_prime = 0.0;
    let mut partition_ok = true;
    let mut g_r_matches = true;
    for p in 0..domain_size {
        let q = Query::new(domain.points[p].clone(), domain.tiebreaks[p]);
        let wt = domain.weights[p];
        let ctx = build_context(&partition, &q, k, &Euclidean)?;
        let full = crate::neighbors::classify_by_scan(&data, full_positions.iter().copied(), &q, k, &Euclidean);
        g_r_matches &= ctx.classify(all)? == full;
        p_star += wt * domain.error_prob(p, full);
        let b_count = all.submasks().filter(|&s| s == ctx.condition_b()).count();
        partition_ok &= b_count == 1;
        for s in all.submasks() {
            let err = wt * domain.error_prob(p, ctx.classify(s)?);
            for t in all.minus(s).submasks() {
                if !ctx.condition_c(s.union(t)) {
                    continue;
                }
                let sign = if t.len() % 2 == 0 { 1.0 } else { -1.0 };
                signed += sign * err;
                if s.union(t) == all {
                    t_w += sign * err;
                }
                for (d, acc) in truncated.iter_mut().enumerate() {
                    if t.len() <= truncation_width(s, d) {
                        *acc += sign * err;
                    }
                }
            }
        }
        if ctx.condition_c(all) {
            p_c_r += wt;
        }
        if ctx.condition_c_prime()? {
            p_c_r_prime += wt;
        }
    }
    let mut checks = vec![
        Check {
            name: "identity".into(),
            passed: (p_star - signed).abs() <= 1e-12,
            detail: format!("p* = {p_star}, signed sum = {signed}"),
        },
        Check { name: "b-partition".into(), passed: partition_ok, detail: "exactly one S with b_S per point".into() },
        Check { name: "g-full".into(), passed: g_r_matches, detail: "g_R equals the full classifier".into() },
        Check {
            name: "residual-magnitude".into(),
            passed: t_w.abs() <= 2f64.powi(r as i32 - 1) * p_c_r + 1e-15,
            detail: format!("|t_W| = {}, 2^(r-1) P(c_R) = {}", t_w.abs(), 2f64.powi(r as i32 - 1) * p_c_r),
        },
        Check {
            name: "reduced-condition".into(),
            passed: p_c_r_prime >= p_c_r,
            detail: format!("P(c_R') = {p_c_r_prime}, P(c_R) = {p_c_r}"),
        },
    ];
    for (d, &v) in truncated.iter().enumerate().filter(|(d, _)| d % 2 == 0) {
        checks.push(Check {
            name: format!("truncation-d{d}"),
            passed: v >= p_star - 1e-12,
            detail: format!("truncated = {v}, p* = {p_star}"),
        });
    }
    Ok(IdentityReport {
        r,
        k,
        domain_size,
        p_star,
        signed_sum: signed,
        truncated: truncated.into_iter().enumerate().collect(),
        t_w,
        p_c_r,
        p_c_r_prime,
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageSuite {
    Concentration,
    ResultBound,
    TestBound,
    Independent,
    Combination,
    UValue,
    All,
}

impl std::str::FromStr for CoverageSuite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "concentration" => CoverageSuite::Concentration,
            "result-bound" => CoverageSuite::ResultBound,
            "test-bound" => CoverageSuite::TestBound,
            "independent" => CoverageSuite::Independent,
            "combination" => CoverageSuite::Combination,
            "u-value" => CoverageSuite::UValue,
            "all" => CoverageSuite::All,
            other => return Err(format!("unknown coverage suite {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub dim: usize,
    pub noise: f64,
    pub delta: f64,
    pub delta_w: f64,
    pub test_size: usize,
    /// Permutations per independent bound.
    pub q: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            n: 2000,
            k: 3,
            r: 2,
            dim: DEFAULT_DIM,
            noise: 0.1,
            delta: 0.025,
            delta_w: 0.025,
            test_size: 100_000,
            q: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageLine {
    pub name: String,
    pub violations: usize,
    pub reps: usize,
    /// Allowed failure probability.
    pub budget: f64,
    /// Largest acceptable violation fraction: budget plus three standard errors.
    pub threshold: f64,
    pub passed: bool,
}

impl CoverageLine {
    fn new(name: &str, violations: usize, reps: usize, budget: f64) -> Self {
        let threshold = budget + 3.0 * (budget * (1.0 - budget) / reps as f64).sqrt();
        CoverageLine {
            name: name.into(),
            violations,
            reps,
            budget,
            threshold,
            passed: (violations as f64 / reps as f64) <= threshold,
        }
    }

    pub fn rate(&self) -> f64 {
        self.violations as f64 / self.reps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub lines: Vec<CoverageLine>,
}

impl CoverageReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }
}

fn concentration_suite(reps: usize, seed: u64, exec: Execution) -> Result<Vec<CoverageLine>> {
    let (count, p, delta) = (60usize, 0.2f64, 0.05f64);
    let rows = exec.map(reps, |i| -> Result<[bool; 4]> {
        let mut g = rng::stream(seed, rng::TAG_TRIAL, i as u64);
        let values: Vec<f64> = (0..count).map(|_| f64::from(u8::from(g.gen::<f64>() < p))).collect();
        let hits = values.iter().filter(|&&v| v > 0.0).count() as u64;
        Ok([
            hoeffding_bound(&values, 1.0, delta, Direction::Upper)? < p,
            hoeffding_bound(&values, 1.0, delta, Direction::Lower)? > p,
            empirical_bernstein_bound(&values, 1.0, delta, Direction::Upper)? < p,
            binomial_tail_upper(hits, count as u64, delta)? < p,
        ])
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let names = ["hoeffding-upper", "hoeffding-lower", "bernstein-upper", "binomial-tail"];
    Ok(names
        .iter()
        .enumerate()
        .map(|(j, name)| CoverageLine::new(name, rows.iter().filter(|r| r[j]).count(), reps, delta))
        .collect())
}

fn u_value_suite(reps: usize, seed: u64) -> Result<Vec<CoverageLine>> {
    let (n, k, r, m) = (20usize, 3usize, 2usize, 3usize);
    let exact = u_value(n, k, r, m)?;
    let samples = reps.max(1) * 5000;
    let mut g = rng::stream(seed, rng::TAG_PERMUTATION, 0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut hits = 0usize;
    for _ in 0..samples {
        order.shuffle(&mut g);
        let mut rest_seen = 0;
        let mut covered = [false; 2];
        for &p in &order {
            if p < r * m {
                covered[p / m] = true;
            } else {
                rest_seen += 1;
                if rest_seen == k {
                    break;
                }
            }
        }
        hits += usize::from(covered.iter().all(|&c| c));
    }
    let estimate = hits as f64 / samples as f64;
    let sigma = (exact * (1.0 - exact) / samples as f64).sqrt();
    let deviates = (estimate - exact).abs() > 3.0 * sigma;
    Ok(vec![CoverageLine {
        name: format!("u-value (exact {exact:.6}, sampled {estimate:.6})"),
        violations: usize::from(deviates),
        reps: 1,
        budget: 0.0,
        threshold: 0.0,
        passed: !deviates,
    }])
}

/// Which bounds a data-set repetition evaluates.
#[derive(Debug, Clone, Copy)]
struct BoundSuites {
    result: bool,
    test: bool,
    independent: bool,
    combination: bool,
}

fn bound_suites(cfg: &CoverageConfig, which: BoundSuites, reps: usize, seed: u64, exec: Execution) -> Result<Vec<CoverageLine>> {
    let (m, w) = suggest_m(cfg.n, cfg.k, cfg.r)?;
    let (m_ind, _) = suggest_m_independent(cfg.n, cfg.k, cfg.r)?;
    let dist = QuadrantDistribution::new(cfg.dim, cfg.noise)?;
    let result_cfg = BoundConfig::result_bound(cfg.k, cfg.r, m, w, cfg.delta, cfg.delta_w);
    let test_cfg = BoundConfig::test_bound(cfg.k, cfg.r, m, w, cfg.r - 1, cfg.delta, cfg.delta_w);
    let ind_cfg = BoundConfig::result_bound(cfg.k, cfg.r, m_ind, 0, cfg.delta, cfg.delta_w);
    let rows = exec.map(reps, |i| -> Result<[bool; 4]> {
        let data = generate_quadrant_dataset(cfg.n, cfg.dim, cfg.noise, rng::derive_seed(seed, rng::TAG_TRIAL, i as u64))?
            .into_examples();
        let test = dist.sample_n(cfg.test_size, &mut rng::stream(seed, rng::TAG_TEST_SET, i as u64));
        let error = KnnClassifier::new(&data, cfg.k)?.error_rate(&test, exec);
        let mut out = [false; 4];
        if which.result || which.test || which.combination {
            let evals = Evaluations::compute(&result_cfg.partition(&data)?, cfg.k, exec)?;
            let check = |r: Result<BoundReport>| r.map(|b| b.violated_by(error));
            if which.result {
                out[0] = check(bound_from(&evals, &result_cfg))?;
            }
            if which.test {
                out[1] = check(bound_from(&evals, &test_cfg))?;
            }
            if which.combination {
                out[3] = check(combination_bound_from(&evals, &result_cfg, ScheduleKind::ClosedForm))?;
            }
        }
        if which.independent {
            let plan = PermutationPlan::new(cfg.q, rng::derive_seed(seed, rng::TAG_PERMUTATION, i as u64), cfg.delta_w)?;
            let sample = permutation_s_v(&data, &ind_cfg, &plan, exec)?;
            out[2] = independent_bound_from(&sample, cfg.n, &ind_cfg, &plan, true)?.violated_by(error);
        }
        Ok(out)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let budget = cfg.delta + cfg.delta_w;
    let count = |j: usize| rows.iter().filter(|r| r[j]).count();
    let mut lines = Vec::new();
    if which.result {
        lines.push(CoverageLine::new("result-bound", count(0), reps, budget));
    }
    if which.test {
        lines.push(CoverageLine::new("test-bound", count(1), reps, budget));
    }
    if which.independent {
        lines.push(CoverageLine::new("independent", count(2), reps, budget));
    }
    if which.combination {
        lines.push(CoverageLine::new("combination", count(3), reps, budget));
    }
    Ok(lines)
}

/// Monte Carlo coverage of the selected suite over `reps` repetitions.
pub fn run_coverage(
    suite: CoverageSuite,
    cfg: &CoverageConfig,
    reps: usize,
    seed: u64,
    exec: Execution,
) -> Result<CoverageReport> {
    if reps == 0 {
        return param("repetitions must be at least 1");
    }
    let none = BoundSuites { result: false, test: false, independent: false, combination: false };
    let mut lines = Vec::new();
    match suite {
        CoverageSuite::Concentration => lines.extend(concentration_suite(reps, seed, exec)?),
        CoverageSuite::UValue => lines.extend(u_value_suite(reps, seed)?),
        CoverageSuite::ResultBound => lines.extend(bound_suites(cfg, BoundSuites { result: true, ..none }, reps, seed, exec)?),
        CoverageSuite::TestBound => lines.extend(bound_suites(cfg, BoundSuites { test: true, ..none }, reps, seed, exec)?),
        CoverageSuite::Independent => {
            lines.extend(bound_suites(cfg, BoundSuites { independent: true, ..none }, reps, seed, exec)?)
        }
        CoverageSuite::Combination => {
            lines.extend(bound_suites(cfg, BoundSuites { combination: true, ..none }, reps, seed, exec)?)
        }
        CoverageSuite::All => {
            lines.extend(concentration_suite(reps, seed, exec)?);
            lines.extend(u_value_suite(reps, seed)?);
            let every = BoundSuites { result: true, test: true, independent: true, combination: true };
            lines.extend(bound_suites(cfg, every, reps, seed, exec)?);
        }
    }
    Ok(CoverageReport { lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n: 1500,
            trials: 3,
            m_fractions: vec![0.05, 0.4],
            r_values: vec![1, 2],
            test_size: 2000,
            timing: false,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn experiment_is_deterministic_and_ordered() {
        let cfg = small();
        let a = run_experiment(&cfg, Execution::Parallel).unwrap();
        let b = run_experiment(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a.records_csv(), b.records_csv());
        assert_eq!(a.summary_csv(), b.summary_csv());
        // Two fractions, r = 1 with d = 0 and r = 2 with d in {0, 1}: 3 rows each.
        assert_eq!(a.records.len(), 3 * 2 * 3);
        let skipped: Vec<_> = a.records.iter().filter(|r| r.bound.is_none()).collect();
        assert!(!skipped.is_empty() && skipped.iter().all(|r| r.m == 600 && r.r == 2));
        for r in &a.records {
            if let (Some(b), Some(g)) = (r.bound, r.gap()) {
                assert_eq!(g, b - r.test_error);
            }
        }
        let csv = a.records_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 13);
    }

    #[test]
    fn trial_test_error_shared_across_cells() {
        let res = run_experiment(&small(), Execution::Sequential).unwrap();
        for t in 0..3 {
            let errs: Vec<f64> = res.records.iter().filter(|r| r.trial == t).map(|r| r.test_error).collect();
            assert!(errs.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn bootstrap_spread_tracks_formula() {
        let mut g = rng::stream(3, rng::TAG_DOMAIN, 1);
        let values: Vec<f64> = (0..100).map(|_| g.gen::<f64>()).collect();
        let b = bootstrap_std_mean(&values, 5);
        let f = std_dev(&values) / 10.0;
        assert!((b - f).abs() < 0.2 * f, "{b} vs {f}");
    }

    #[test]
    fn identity_small_domains() {
        for (r, k) in [(1usize, 1usize), (1, 3), (2, 3), (3, 1)] {
            let rep = verify_identity(100, r, k, 7).unwrap();
            assert!(rep.passed(), "{:?}", rep.checks);
        }
        assert!(verify_identity(1001, 2, 3, 1).is_err());
    }

    #[test]
    fn invalid_configs() {
        assert!(ExperimentConfig { trials: 0, ..small() }.validate().is_err());
        assert!(ExperimentConfig { m_fractions: vec![1.5], ..small() }.validate().is_err());
        assert!(ExperimentConfig { k: 2, ..small() }.validate().is_err());
    }

    #[test]
    fn concentration_coverage_quick() {
        let rep = run_coverage(CoverageSuite::Concentration, &CoverageConfig::default(), 300, 1, Execution::Parallel).unwrap();
        assert!(rep.passed(), "{:?}", rep.lines);
        let rep = run_coverage(CoverageSuite::UValue, &CoverageConfig::default(), 20, 1, Execution::Sequential).unwrap();
        assert!(rep.passed(), "{:?}", rep.lines);
    }
}
