//! Mean holdout frequency of `c_R'` against its combinatorial upper bound.

use knnval::concentration::chvatal_tail_bound;
use knnval::dataset::{PartitionedDataset, QuadrantDistribution};
use knnval::dependent_bounds::Evaluations;
use knnval::exec::Execution;
use knnval::rng;

#[test]
fn holdout_rate_below_chvatal_bound() {
    let dist = QuadrantDistribution::new(2, 0.1).unwrap();
    for (n, k, r, m, w) in [(400usize, 3usize, 2usize, 8usize, 40usize), (300, 1, 1, 10, 30), (500, 3, 3, 5, 50)] {
        let draws = 300;
        let mut total = 0.0;
        for t in 0..draws {
            let data = dist.sample_n(n, &mut rng::stream(t, 62, n as u64));
            let p = PartitionedDataset::new(&data, r, m, w, k).unwrap();
            let evals = Evaluations::compute(&p, k, Execution::Sequential).unwrap();
            total += evals.holdout_hits() as f64 / w as f64;
        }
        let mean = total / draws as f64;
        let bound = chvatal_tail_bound((n - w) as u64, k as u64, r as u64, m as u64).unwrap();
        assert!(mean <= bound, "n {n} r {r}: mean {mean} bound {bound}");
    }
}
