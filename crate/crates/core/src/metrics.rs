//! Classification metrics and the closed-form upper-level selector.

use crate::error::{Error, Result};
use crate::mpec::MpecProblem;

/// Misclassification count with the `sign(0) = +1` convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorCount {
    pub errors: usize,
    pub total: usize,
    /// Points with `w^T x = 0` exactly.
    pub zero_hits: usize,
}

impl ErrorCount {
    pub fn rate(&self) -> f64 {
        self.errors as f64 / self.total as f64
    }
}

pub fn count_errors(w: &[f64], points: &[Vec<f64>], labels: &[f64]) -> Result<ErrorCount> {
    if points.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if points.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let mut out = ErrorCount {
        errors: 0,
        total: points.len(),
        zero_hits: 0,
    };
    for (x, &y) in points.iter().zip(labels) {
        if x.len() != w.len() {
            return Err(Error::Dimension(format!(
                "point has {} features, w has {}",
                x.len(),
                w.len()
            )));
        }
        let s: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        if s == 0.0 {
            out.zero_hits += 1;
        }
        let pred = if s >= 0.0 { 1.0 } else { -1.0 };
        if pred != y {
            out.errors += 1;
        }
    }
    if out.zero_hits > 0 {
        log::warn!(
            "{} test points lie exactly on the decision boundary",
            out.zero_hits
        );
    }
    Ok(out)
}

/// `E_t = (1/l2) Σ ½|sign(w^T x) − y|`.
pub fn test_error(w: &[f64], points: &[Vec<f64>], labels: &[f64]) -> Result<f64> {
    Ok(count_errors(w, points, labels)?.rate())
}

/// Number of validation points with `−y x^T w^t > 0`, summed over folds.
pub fn cv_misclassified(p: &MpecProblem, v: &[f64]) -> Result<usize> {
    let ws = p.reconstruct_w(v)?;
    Ok(p.a_blocks
        .iter()
        .zip(&ws)
        .map(|(ab, w)| {
            ab.iter()
                .filter(|a| a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() < 0.0)
                .count()
        })
        .sum())
}

/// `(1/K) Σ_t (1/m1) ‖(−y_i x_i^T w^t)_+‖₀` from the reconstructed classifiers.
pub fn cv_error(p: &MpecProblem, v: &[f64]) -> Result<f64> {
    let total = p.dims.k * p.dims.m1;
    Ok(cv_misclassified(p, v)? as f64 / total as f64)
}

/// Minimizer of `−u^T r` over `[0, 1]^m`: 1 where `r > 0`, 0 where `r < 0`.
/// Zero components are ambiguous; they resolve to 0 and are reported.
pub fn zeta_from_lp(r: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let ambiguous: Vec<usize> = (0..r.len()).filter(|&i| r[i] == 0.0).collect();
    if !ambiguous.is_empty() {
        log::warn!(
            "{} zero components in the misclassification margin",
            ambiguous.len()
        );
    }
    (
        r.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect(),
        ambiguous,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn test_error_examples() {
        let pts = vec![vec![1.0], vec![2.0], vec![-1.0], vec![-3.0]];
        assert_eq!(
            test_error(&[1.0], &pts, &[1.0, 1.0, -1.0, -1.0]).unwrap(),
            0.0
        );
        assert_eq!(
            test_error(&[-1.0], &pts, &[1.0, 1.0, -1.0, -1.0]).unwrap(),
            1.0
        );
        assert_eq!(
            test_error(&[1.0], &pts, &[1.0, 1.0, -1.0, 1.0]).unwrap(),
            0.25
        );
        assert!(matches!(
            test_error(&[1.0], &[], &[]),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn sign_zero_counts_as_positive() {
        let pts = vec![vec![1.0], vec![1.0]];
        let c = count_errors(&[0.0], &pts, &[1.0, -1.0]).unwrap();
        assert_eq!((c.errors, c.zero_hits), (1, 2));
    }

    #[test]
    fn zeta_sign_rule() {
        assert_eq!(zeta_from_lp(&[3.0, -1.0]).0, vec![1.0, 0.0]);
        assert_eq!(zeta_from_lp(&[-5.0]).0, vec![0.0]);
        let (z, amb) = zeta_from_lp(&[0.0, 2.0]);
        assert_eq!((z, amb), (vec![0.0, 1.0], vec![0]));
    }

    #[test]
    fn cv_error_on_example1() {
        let (p, mut v) = fixtures::example1_point();
        assert_eq!(cv_error(&p, &v).unwrap(), 0.0);
        // flip fold 0's classifier by moving α onto a wrongly-signed combination
        let d = p.dims;
        v[d.alpha()].iter_mut().for_each(|a| *a = 0.0);
        v[d.beta().start] = 0.0;
        v[d.gamma().start + 1] = 0.0;
        v[d.beta().start + 1] = 1.0; // w^0 = (0, 1, 0)
        let e = cv_misclassified(&p, &v).unwrap();
        // fold 0 validates on points 5..8: signed second coordinates 0, −3, −1, −2
        assert_eq!(e, 3);
        assert_eq!(cv_error(&p, &v).unwrap(), 3.0 / 8.0);
    }
}
