//! LIBSVM-format loading, bias augmentation and K-fold cross-validation splits.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled points with labels in {-1, +1}, stored densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub n_features: usize,
    /// True when the last component of every point is the constant 1.
    pub bias: bool,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Vec<f64>, bias: bool) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let n_features = points.first().map_or(0, Vec::len);
        if let Some((i, _)) = points
            .iter()
            .enumerate()
            .find(|(_, p)| p.len() != n_features)
        {
            return Err(Error::Dimension(format!(
                "point {i} has length {} (expected {n_features})",
                points[i].len()
            )));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Label(format!("label {y} is not +1 or -1")));
        }
        if bias && points.iter().any(|p| p.last() != Some(&1.0)) {
            return Err(Error::Dimension(
                "dataset flagged as bias-augmented but a last component differs from 1".into(),
            ));
        }
        Ok(Self {
            points,
            labels,
            n_features,
            bias,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Marks the dataset as already carrying a trailing bias component.
    pub fn into_pre_augmented(self) -> Result<Self> {
        Self::new(self.points, self.labels, true)
    }

    /// Number of features excluding the bias column.
    pub fn n_original_features(&self) -> usize {
        if self.bias {
            self.n_features - 1
        } else {
            self.n_features
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
            bias: self.bias,
        }
    }

    /// Writes the dataset back out in LIBSVM format. The bias column, if
    /// present, is not written.
    pub fn to_libsvm(&self) -> String {
        let n = self.n_original_features();
        let mut out = String::new();
        for (p, y) in self.points.iter().zip(&self.labels) {
            let _ = write!(out, "{}", if *y > 0.0 { "+1" } else { "-1" });
            for (j, v) in p[..n].iter().enumerate() {
                if *v != 0.0 {
                    let _ = write!(out, " {}:{}", j + 1, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parses LIBSVM text. Indices are 1-based and strictly increasing per line;
/// unspecified features are zero. When the file carries two distinct labels
/// other than {-1, +1}, the larger maps to +1.
pub fn parse_libsvm<R: Read>(mut input: R, n_hint: Option<usize>) -> Result<Dataset> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    parse_libsvm_str(&text, n_hint)
}

pub fn parse_libsvm_str(text: &str, n_hint: Option<usize>) -> Result<Dataset> {
    let mut raw_labels = Vec::new();
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_idx = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "missing label".into(),
        })?;
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label token {label_tok:?}"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("non-finite label {label_tok:?}"),
            });
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad index {idx_s:?}"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad value {val_s:?}"),
            })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("index {idx} not 1-based strictly increasing"),
                });
            }
            last = idx;
            entries.push((idx - 1, val));
        }
        max_idx = max_idx.max(last);
        raw_labels.push(label);
        sparse.push(entries);
    }

    if raw_labels.is_empty() {
        return Err(Error::NoRecords);
    }

    let distinct: BTreeSet<u64> = raw_labels.iter().map(|y| canonical_bits(*y)).collect();
    let labels: Vec<f64> = match distinct.len() {
        1 => {
            let y = raw_labels[0];
            if y != 1.0 && y != -1.0 {
                return Err(Error::Label(format!(
                    "single label {y} cannot be mapped to +1/-1"
                )));
            }
            raw_labels
        }
        2 => {
            let hi = raw_labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            raw_labels
                .iter()
                .map(|&y| if y == hi { 1.0 } else { -1.0 })
                .collect()
        }
        k => return Err(Error::Label(format!("{k} distinct labels; expected two"))),
    };

    let n = n_hint.unwrap_or(0).max(max_idx);
    let points = sparse
        .into_iter()
        .map(|entries| {
            let mut p = vec![0.0; n];
            for (j, v) in entries {
                p[j] = v;
            }
            p
        })
        .collect();
    Dataset::new(points, labels, false).map(|mut d| {
        d.n_features = n;
        d
    })
}

fn canonical_bits(y: f64) -> u64 {
    if y == 0.0 {
        0.0f64.to_bits()
    } else {
        y.to_bits()
    }
}

/// Appends a constant-1 component to every point.
pub fn augment_bias(d: &Dataset) -> Dataset {
    Dataset {
        points: d
            .points
            .iter()
            .map(|p| {
                let mut q = p.clone();
                q.push(1.0);
                q
            })
            .collect(),
        labels: d.labels.clone(),
        n_features: d.n_features + 1,
        bias: true,
    }
}

/// Index bookkeeping for K-fold cross-validation plus a hold-out test set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvSplit {
    pub k: usize,
    pub validation_idx: Vec<Vec<usize>>,
    pub training_idx: Vec<Vec<usize>>,
    pub test_idx: Vec<usize>,
}

impl CvSplit {
    /// Builds a split from explicit validation folds; training sets are the
    /// complement within the union of the folds.
    pub fn from_folds(validation_idx: Vec<Vec<usize>>, test_idx: Vec<usize>) -> Result<Self> {
        let k = validation_idx.len();
        if k < 2 {
            return Err(Error::Split(format!("need at least 2 folds, got {k}")));
        }
        let m1 = validation_idx[0].len();
        if validation_idx.iter().any(|f| f.len() != m1) || m1 == 0 {
            return Err(Error::Split(
                "validation folds must share a positive size".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for &i in validation_idx.iter().flatten().chain(&test_idx) {
            if !seen.insert(i) {
                return Err(Error::Split(format!("index {i} appears twice")));
            }
        }
        let training_idx = (0..k)
            .map(|t| {
                let mut tr: Vec<usize> = validation_idx
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| *s != t)
                    .flat_map(|(_, f)| f.iter().copied())
                    .collect();
                tr.sort_unstable();
                tr
            })
            .collect();
        Ok(Self {
            k,
            validation_idx,
            training_idx,
            test_idx,
        })
    }

    pub fn m1(&self) -> usize {
        self.validation_idx[0].len()
    }

    pub fn m2(&self) -> usize {
        self.training_idx[0].len()
    }

    pub fn l1(&self) -> usize {
        self.k * self.m1()
    }

    pub fn l2(&self) -> usize {
        self.test_idx.len()
    }

    /// All cross-validation indices in ascending order.
    pub fn cv_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.validation_idx.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Draws a seeded K-fold split of `l1` cross-validation points; the rest of
/// the dataset becomes the hold-out test set.
pub fn kfold_split(
    d: &Dataset,
    k: usize,
    l1: usize,
    seed: u64,
    stratified: bool,
) -> Result<CvSplit> {
    if k < 2 {
        return Err(Error::Split(format!("fold count must be >= 2, got {k}")));
    }
    if l1 == 0 || l1 % k != 0 {
        return Err(Error::Split(format!(
            "cross-validation size {l1} is not a positive multiple of {k}"
        )));
    }
    if l1 > d.len() {
        return Err(Error::Split(format!(
            "cross-validation size {l1} exceeds dataset size {}",
            d.len()
        )));
    }
    let m1 = l1 / k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (mut folds, rest) = if stratified {
        let mut pos: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] > 0.0).collect();
        let mut neg: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] < 0.0).collect();
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let target = m1 as f64 * pos.len() as f64 / d.len() as f64;
        let base = target.floor() as usize;
        let extra = ((target - base as f64) * k as f64).round() as usize;
        let mut counts: Vec<usize> = (0..k).map(|t| base + usize::from(t < extra)).collect();
        // keep every fold realisable with the available points of each class
        for c in counts.iter_mut() {
            *c = (*c).min(m1);
        }
        while counts.iter().sum::<usize>() > pos.len() {
            let t = counts
                .iter()
                .enumerate()
                .max_by_key(|(_, c)| **c)
                .unwrap()
                .0;
            counts[t] -= 1;
        }
        while l1 - counts.iter().sum::<usize>() > neg.len() {
            let t = counts
                .iter()
                .enumerate()
                .min_by_key(|(_, c)| **c)
                .unwrap()
                .0;
            counts[t] += 1;
        }
        let mut pi = pos.into_iter();
        let mut ni = neg.into_iter();
        let folds: Vec<Vec<usize>> = counts
            .iter()
            .map(|&c| {
                let mut f: Vec<usize> = pi
                    .by_ref()
                    .take(c)
                    .chain(ni.by_ref().take(m1 - c))
                    .collect();
                f.sort_unstable();
                f
            })
            .collect();
        let rest: Vec<usize> = pi.chain(ni).collect();
        (folds, rest)
    } else {
        let mut all: Vec<usize> = (0..d.len()).collect();
        all.shuffle(&mut rng);
        let rest = all.split_off(l1);
        let folds = all
            .chunks(m1)
            .map(|c| {
                let mut f = c.to_vec();
                f.sort_unstable();
                f
            })
            .collect();
        (folds, rest)
    };
    let mut test = rest;
    test.sort_unstable();
    folds.truncate(k);
    CvSplit::from_folds(folds, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sparse_line_with_hint() {
        let d = parse_libsvm_str("+1 1:0.5 3:-2\n", Some(3)).unwrap();
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.points, vec![vec![0.5, 0.0, -2.0]]);
        let d = parse_libsvm_str("-1 2:1\n", Some(3)).unwrap();
        assert_eq!(d.labels, vec![-1.0]);
        assert_eq!(d.points, vec![vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn empty_stream_has_no_records() {
        assert!(matches!(parse_libsvm_str("", None), Err(Error::NoRecords)));
        assert!(matches!(
            parse_libsvm_str("\n  \n", None),
            Err(Error::NoRecords)
        ));
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let err = parse_libsvm_str("+1 1:2\n-1 2:x\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_libsvm_str("+1 2:1 1:1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_libsvm_str("abc 1:1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_libsvm_str("+1 1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn maps_two_arbitrary_labels_and_rejects_three() {
        let d = parse_libsvm_str("2 1:1\n4 1:2\n2 1:3\n", None).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0, -1.0]);
        assert!(matches!(
            parse_libsvm_str("1 1:1\n2 1:1\n3 1:1\n", None),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn augment_adds_trailing_one() {
        let d = Dataset::new(vec![vec![2.0, 3.0]], vec![1.0], false).unwrap();
        let a = augment_bias(&d);
        assert_eq!(a.points, vec![vec![2.0, 3.0, 1.0]]);
        assert_eq!(a.n_features, 3);
        assert!(a.bias);

        let empty = Dataset {
            points: vec![vec![]],
            labels: vec![-1.0],
            n_features: 0,
            bias: false,
        };
        let a = augment_bias(&empty);
        assert_eq!(a.points, vec![vec![1.0]]);
        assert_eq!(a.n_features, 1);
    }

    #[test]
    fn pre_augmented_points_are_not_augmented_twice() {
        let d = Dataset::new(vec![vec![0.0, 1.0, 1.0]], vec![-1.0], false)
            .unwrap()
            .into_pre_augmented()
            .unwrap();
        assert_eq!(d.n_features, 3);
        assert_eq!(d.n_original_features(), 2);
    }

    fn toy(n: usize) -> Dataset {
        let points = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        Dataset::new(points, labels, false).unwrap()
    }

    #[test]
    fn six_points_three_folds() {
        for strat in [true, false] {
            let s = kfold_split(&toy(6), 3, 6, 1, strat).unwrap();
            assert_eq!(s.m1(), 2);
            assert_eq!(s.m2(), 4);
            assert!(s.test_idx.is_empty());
        }
    }

    #[test]
    fn fourclass_sized_split() {
        let s = kfold_split(&toy(862), 3, 300, 7, true).unwrap();
        assert_eq!((s.m1(), s.m2(), s.l2()), (100, 200, 562));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(
            kfold_split(&toy(10), 3, 7, 0, true),
            Err(Error::Split(_))
        ));
        assert!(matches!(
            kfold_split(&toy(10), 3, 12, 0, true),
            Err(Error::Split(_))
        ));
        assert!(matches!(
            kfold_split(&toy(10), 1, 4, 0, true),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let a = kfold_split(&toy(50), 5, 40, 3, true).unwrap();
        let b = kfold_split(&toy(50), 5, 40, 3, true).unwrap();
        let c = kfold_split(&toy(50), 5, 40, 4, true).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
