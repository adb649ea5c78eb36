//! Brute-force reference implementations shared by the integration tests.
//! Nothing here goes through the library's neighbor search or term tables.

#![allow(dead_code)]

use knnval::dataset::LabeledExample;
use knnval::rng;
use rand::Rng;

/// Ranking key exactly as stated: distance, tiebreak gap, position.
fn key(e: &LabeledExample, pos: usize, qx: &[f64], qz: f64) -> (f64, f64, usize) {
    let d = e.input.iter().zip(qx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    (d, (e.tiebreak - qz).abs(), pos)
}

fn less(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)).is_lt()
}

/// Explicit layout of a partition: subset index per position, `None` for F - V.
pub struct Layout {
    pub r: usize,
    pub sizes: Vec<usize>,
    pub w: usize,
    pub region: Vec<Option<usize>>,
    pub holdout: Vec<bool>,
}

impl Layout {
    pub fn new(n: usize, sizes: &[usize], w: usize) -> Self {
        let mut region = vec![None; n];
        let mut p = 0;
        for (i, &m) in sizes.iter().enumerate() {
            for slot in region.iter_mut().skip(p).take(m) {
                *slot = Some(i);
            }
            p += m;
        }
        let holdout = (0..n).map(|j| j >= n - w).collect();
        Layout { r: sizes.len(), sizes: sizes.to_vec(), w, region, holdout }
    }

    pub fn members(&self, set: u32) -> Vec<usize> {
        (0..self.region.len())
            .filter(|&j| self.region[j].is_some_and(|i| set >> i & 1 == 1))
            .collect()
    }
}

/// Reference evaluation of the conditions at one query.
pub struct Brute<'a> {
    data: &'a [LabeledExample],
    layout: &'a Layout,
    k: usize,
    qx: Vec<f64>,
    qz: f64,
}

impl<'a> Brute<'a> {
    pub fn new(data: &'a [LabeledExample], layout: &'a Layout, k: usize, qx: &[f64], qz: f64) -> Self {
        Brute { data, layout, k, qx: qx.to_vec(), qz }
    }

    fn sorted(&self, keep: impl Fn(usize) -> bool) -> Vec<(f64, f64, usize)> {
        let mut v: Vec<_> = (0..self.data.len())
            .filter(|&j| keep(j))
            .map(|j| key(&self.data[j], j, &self.qx, self.qz))
            .collect();
        v.sort_by(|a, b| if less(*a, *b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
        v
    }

    fn h(&self) -> (f64, f64, usize) {
        self.sorted(|j| self.layout.region[j].is_none())[self.k - 1]
    }

    fn h_reduced(&self) -> (f64, f64, usize) {
        self.sorted(|j| self.layout.region[j].is_none() && !self.layout.holdout[j])[self.k - 1]
    }

    fn beats(&self, i: usize, radius: (f64, f64, usize)) -> bool {
        (0..self.data.len())
            .filter(|&j| self.layout.region[j] == Some(i))
            .any(|j| less(key(&self.data[j], j, &self.qx, self.qz), radius))
    }

    /// `c_A`.
    pub fn c(&self, a: u32) -> bool {
        let h = self.h();
        (0..self.layout.r).filter(|&i| a >> i & 1 == 1).all(|i| self.beats(i, h))
    }

    /// `c_R'`.
    pub fn c_prime(&self) -> bool {
        let h = self.h_reduced();
        (0..self.layout.r).all(|i| self.beats(i, h))
    }

    /// `b_S`: exactly the subsets in `S` beat the radius.
    pub fn b(&self, s: u32) -> bool {
        let h = self.h();
        (0..self.layout.r).all(|i| self.beats(i, h) == (s >> i & 1 == 1))
    }

    /// `g_S`.
    pub fn g(&self, s: u32) -> u8 {
        let l = self.layout;
        let near = self.sorted(|j| l.region[j].map_or(true, |i| s >> i & 1 == 1));
        let ones = near[..self.k].iter().filter(|t| self.data[t.2].label == 1).count();
        u8::from(2 * ones > self.k)
    }
}

/// `|T| <= u(S)` truncation rule.
pub fn allowed(s: u32, t: u32, depth: usize) -> bool {
    let rest = depth.saturating_sub(s.count_ones() as usize);
    t.count_ones() as usize <= 2 * (rest / 2)
}

/// The signed double sum over `S` and `T ⊆ R - S` with `S ∪ T ≠ R`, each
/// term an empirical mean over `V_{R - (S ∪ T)}`, truncated at `depth`.
pub fn direct_s_v(data: &[LabeledExample], layout: &Layout, k: usize, depth: usize) -> f64 {
    let r = layout.r;
    let full = (1u32 << r) - 1;
    let mut total = 0.0;
    for s in 0..=full {
        let others = full & !s;
        let mut t = others;
        loop {
            let a = s | t;
            if a != full && allowed(s, t, depth) {
                let pts = layout.members(full & !a);
                let hits = pts
                    .iter()
                    .filter(|&&j| {
                        let b = Brute::new(data, layout, k, &data[j].input, data[j].tiebreak);
                        b.c(a) && b.g(s) != data[j].label
                    })
                    .count();
                let sign = if t.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * hits as f64 / pts.len() as f64;
            }
            if t == 0 {
                break;
            }
            t = (t - 1) & others;
        }
    }
    total
}

/// Small random instance on a coarse grid so distance ties are common.
pub fn random_instance(seed: u64, n: usize, dim: usize, grid: i32) -> Vec<LabeledExample> {
    let mut g = rng::stream(seed, 99, 0);
    (0..n)
        .map(|_| {
            let input: Vec<f64> = (0..dim).map(|_| f64::from(g.gen_range(-grid..=grid)) / f64::from(grid)).collect();
            let label = u8::from(g.gen::<f64>() < 0.4);
            // Quantized tiebreaks also repeat, which leaves position as the last resort.
            let tiebreak = f64::from(g.gen_range(0..8u8)) / 7.0;
            LabeledExample::new(input, label, tiebreak).unwrap()
        })
        .collect()
}
