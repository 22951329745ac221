//! Small hand-checkable problems used by tests, benches and the CLI.

use crate::dataio::{CvSplit, Dataset};
use crate::mpec::{assemble, AffineMpec, Bounds, MpecProblem};
use crate::sparse::CsrMatrix;

/// Eight points in two folds of four; each fold validates on the other's
/// training points.
pub fn example1_dataset() -> (Dataset, CvSplit) {
    let points = vec![
        vec![0.0, 1.0, 1.0],
        vec![-1.0, 1.0, 1.0],
        vec![1.0, 0.0, 1.0],
        vec![2.0, -1.0, 1.0],
        vec![-1.0, 0.0, 1.0],
        vec![1.0, 3.0, 1.0],
        vec![0.0, -1.0, 1.0],
        vec![1.0, -2.0, 1.0],
    ];
    let labels = vec![-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
    let data = Dataset::new(points, labels, true).expect("fixture is valid");
    let split = CvSplit::from_folds(vec![vec![4, 5, 6, 7], vec![0, 1, 2, 3]], vec![])
        .expect("fixture is valid");
    (data, split)
}

pub fn example1_bounds() -> Bounds {
    Bounds::uniform(0.1, 1.0, 0.1, 2.0, 3)
}

pub fn example1_problem() -> MpecProblem {
    let (data, split) = example1_dataset();
    assemble(&split, &data, &example1_bounds()).expect("fixture is valid")
}

/// A feasible point of the eight-point fixture where both folds share `w = (1, −1, 0)`,
/// `C = 1` and `w̄ = 1.5`. The margin points are the first and third of
/// each training fold, with `α = C` there.
pub fn example1_point() -> (MpecProblem, Vec<f64>) {
    let p = example1_problem();
    let d = p.dims;
    let mut v = vec![0.0; d.nv()];
    v[0] = 1.0;
    v[d.w_bar()].iter_mut().for_each(|w| *w = 1.5);
    for i in [0, 2, 4, 6] {
        v[d.alpha().start + i] = 1.0;
    }
    (p, v)
}

/// A three-variable toy MPEC:
/// `min v1 + v2 − v3  s.t.  −v3 >= 0,  0 <= v2 ⟂ v1 >= 0`.
pub fn toy_mpec() -> AffineMpec {
    AffineMpec::new(
        vec![1.0, 1.0, -1.0],
        CsrMatrix::from_dense(&[vec![1.0, 0.0, 0.0]], 3),
        vec![0.0],
        CsrMatrix::from_dense(&[vec![0.0, 1.0, 0.0]], 3),
        vec![0.0],
        CsrMatrix::from_dense(&[vec![0.0, 0.0, -1.0]], 3),
        vec![0.0],
    )
    .expect("fixture is valid")
}

/// Layout `[v(3), λg, λG, λH, λGH, u]`.
pub const TOY_START: [f64; 8] = [0.1, 0.1, -0.1, 1.0, 1.0, 1.0, 0.1, 0.02];
pub const TOY_SOLUTION: [f64; 8] = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.02];
pub const TOY_TAU: f64 = 0.02;

/// Seeded, linearly separable 2-D data (bias appended): labels follow the
/// sign of `x1 + x2` and every point keeps a gap of at least `0.2` from the
/// separating line.
pub fn separable_2d(count: usize, seed: u64) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    while points.len() < count {
        let x1: f64 = rng.random_range(-1.0..1.0);
        let x2: f64 = rng.random_range(-1.0..1.0);
        let s = x1 + x2;
        if s.abs() < 0.2 {
            continue;
        }
        // alternate classes so stratified folds are balanced
        let want = if points.len() % 2 == 0 { 1.0 } else { -1.0 };
        if s.signum() != want {
            continue;
        }
        points.push(vec![x1, x2, 1.0]);
        labels.push(want);
    }
    Dataset::new(points, labels, true).expect("generated data is valid")
}

/// Seeded 2-D data that no line separates: two overlapping Gaussian
/// clouds plus a slice of flipped labels (bias appended).
pub fn overlapping_2d(count: usize, flip: f64, seed: u64) -> Dataset {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.8).expect("valid normal");
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let x1 = 0.6 * y + noise.sample(&mut rng);
        let x2 = 0.3 * y + noise.sample(&mut rng);
        let label = if rng.random_bool(flip) { -y } else { y };
        points.push(vec![x1, x2, 1.0]);
        labels.push(label);
    }
    Dataset::new(points, labels, true).expect("generated data is valid")
}
