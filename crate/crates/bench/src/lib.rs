//! Instance builders shared by the criterion benches.

use grlpn_core::{assemble, fixtures, kfold_split, CvSplit, Dataset, MpecProblem, SolverConfig};

/// Separable 2-D instance with `l1` cross-validation and `l2` test points.
pub fn separable_instance(l1: usize, l2: usize, seed: u64) -> (Dataset, CvSplit, MpecProblem) {
    let data = fixtures::separable_2d(l1 + l2, seed);
    let split = kfold_split(&data, 3, l1, seed, true).expect("valid split");
    let bounds = SolverConfig::default().bounds(data.n_features);
    let p = assemble(&split, &data, &bounds).expect("valid problem");
    (data, split, p)
}
