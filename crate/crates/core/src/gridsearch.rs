//! Exhaustive grid search over C and per-feature bound levels.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::{CvSplit, Dataset};
use crate::error::{Error, Result};
use crate::metrics::test_error;
use crate::svcqp::{train_boxed_signed, QpOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub c_values: Vec<f64>,
    pub wbar_levels: Vec<f64>,
    /// Fixed bound for the bias column; `None` grids it like any feature.
    pub bias_level: Option<f64>,
    /// Refuse grids with more cells than this.
    pub budget: u128,
    pub jobs: usize,
    pub qp: QpOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            c_values: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4],
            wbar_levels: vec![0.0, 0.75, 1.5],
            bias_level: Some(1.5),
            budget: 1_000_000,
            jobs: 1,
            qp: QpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    #[serde(rename = "C")]
    pub c: f64,
    pub c_scaled: f64,
    pub w_bar: Vec<f64>,
    #[serde(rename = "E_C")]
    pub cv_error: f64,
    #[serde(rename = "E_t")]
    pub test_error: Option<f64>,
    pub per_fold_w: Vec<Vec<f64>>,
    pub w_refit: Vec<f64>,
    pub cells: u128,
    pub failed_cells: usize,
    /// Number of tuned quantities (`C` plus one bound per gridded feature).
    pub size: usize,
    pub wall_time_secs: f64,
}

struct Cell {
    errors: usize,
    per_fold_w: Vec<Vec<f64>>,
}

fn signed(data: &Dataset, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| data.points[i].iter().map(|x| data.labels[i] * x).collect())
        .collect()
}

fn eval_cell(
    folds: &[(Vec<Vec<f64>>, Vec<Vec<f64>>)],
    c: f64,
    w_bar: &[f64],
    qp: &QpOptions,
) -> Result<Cell> {
    let mut errors = 0;
    let mut per_fold_w = Vec::with_capacity(folds.len());
    for (a, b) in folds {
        let w = train_boxed_signed(b, c, w_bar, qp, None)?.w;
        errors += a
            .iter()
            .filter(|r| r.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() < 0.0)
            .count();
        per_fold_w.push(w);
    }
    Ok(Cell { errors, per_fold_w })
}

/// Bound vector for cell `idx` (last gridded feature varies fastest).
fn wbar_of(
    mut idx: usize,
    levels: &[f64],
    gridded: usize,
    n: usize,
    bias: Option<f64>,
) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for j in (0..gridded).rev() {
        out[j] = levels[idx % levels.len()];
        idx /= levels.len();
    }
    if let Some(b) = bias {
        out[n - 1] = b;
    }
    out
}

pub fn grid_search(data: &Dataset, split: &CvSplit, cfg: &GridConfig) -> Result<GridResult> {
    let started = Instant::now();
    if cfg.c_values.is_empty() || cfg.wbar_levels.is_empty() {
        return Err(Error::Config(
            "grid needs at least one C and one w̄ level".into(),
        ));
    }
    if cfg.c_values.iter().any(|c| !(*c > 0.0)) || cfg.wbar_levels.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Config(
            "grid C values must be > 0 and levels >= 0".into(),
        ));
    }
    let n = data.n_features;
    let bias = if data.bias { cfg.bias_level } else { None };
    let gridded = if bias.is_some() { n - 1 } else { n };
    let per_c = (cfg.wbar_levels.len() as u128).checked_pow(gridded as u32);
    let cells = per_c.and_then(|p| p.checked_mul(cfg.c_values.len() as u128));
    let cells = match cells {
        Some(c) if c <= cfg.budget => c,
        Some(c) => {
            return Err(Error::GridBudget {
                cells: c,
                budget: cfg.budget,
            })
        }
        None => {
            return Err(Error::GridBudget {
                cells: u128::MAX,
                budget: cfg.budget,
            })
        }
    };
    let per_c = per_c.unwrap() as usize;
    let folds: Vec<_> = (0..split.k)
        .map(|t| {
            (
                signed(data, &split.validation_idx[t]),
                signed(data, &split.training_idx[t]),
            )
        })
        .collect();

    let total = cells as usize;
    let jobs = cfg.jobs.max(1).min(total);
    let results: Vec<Option<Cell>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|worker| {
                let folds = &folds;
                s.spawn(move || {
                    (worker..total)
                        .step_by(jobs)
                        .map(|cell| {
                            let c = cfg.c_values[cell / per_c];
                            let wb = wbar_of(cell % per_c, &cfg.wbar_levels, gridded, n, bias);
                            (cell, eval_cell(folds, c, &wb, &cfg.qp))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut out: Vec<Option<Cell>> = (0..total).map(|_| None).collect();
        for h in handles {
            for (cell, r) in h.join().expect("grid worker panicked") {
                match r {
                    Ok(c) => out[cell] = Some(c),
                    Err(e) => log::warn!("grid cell {cell} failed: {e}"),
                }
            }
        }
        out
    });

    // cells are ordered by C, then by w̄ lexicographically; keep the first minimum
    let order = {
        let mut c_order: Vec<usize> = (0..cfg.c_values.len()).collect();
        c_order.sort_by(|a, b| cfg.c_values[*a].partial_cmp(&cfg.c_values[*b]).unwrap());
        c_order
    };
    let mut best: Option<(usize, usize, Vec<f64>)> = None;
    for &ci in &order {
        let mut local: Vec<(Vec<f64>, usize)> = (0..per_c)
            .map(|wi| {
                (
                    wbar_of(wi, &cfg.wbar_levels, gridded, n, bias),
                    ci * per_c + wi,
                )
            })
            .collect();
        local.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (wb, cell) in local {
            if let Some(r) = &results[cell] {
                if best.as_ref().is_none_or(|(e, _, _)| r.errors < *e) {
                    best = Some((r.errors, cell, wb));
                }
            }
        }
    }
    let failed_cells = results.iter().filter(|r| r.is_none()).count();
    let Some((errors, cell, w_bar)) = best else {
        return Err(Error::Internal("every grid cell failed".into()));
    };
    let c = cfg.c_values[cell / per_c];
    let per_fold_w = results[cell].as_ref().unwrap().per_fold_w.clone();
    let c_scaled = c * split.k as f64 / (split.k - 1) as f64;
    let cv_rows = signed(data, &split.cv_indices());
    let w_refit = train_boxed_signed(&cv_rows, c_scaled, &w_bar, &cfg.qp, None)?.w;
    let test_error = if split.test_idx.is_empty() {
        None
    } else {
        let pts: Vec<Vec<f64>> = split
            .test_idx
            .iter()
            .map(|&i| data.points[i].clone())
            .collect();
        let ys: Vec<f64> = split.test_idx.iter().map(|&i| data.labels[i]).collect();
        Some(test_error(&w_refit, &pts, &ys)?)
    };
    Ok(GridResult {
        c,
        c_scaled,
        w_bar,
        cv_error: errors as f64 / split.l1() as f64,
        test_error,
        per_fold_w,
        w_refit,
        cells,
        failed_cells,
        size: gridded + 1,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{augment_bias, kfold_split};

    fn toy() -> (Dataset, CvSplit) {
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![s * (1.0 + (i as f64) * 0.1), 0.3 * i as f64 - 1.5]
            })
            .collect();
        let ys: Vec<f64> = (0..12)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let d = augment_bias(&Dataset::new(pts, ys, false).unwrap());
        let s = kfold_split(&d, 3, 9, 1, true).unwrap();
        (d, s)
    }

    #[test]
    fn cell_count_and_size() {
        let (d, s) = toy();
        let r = grid_search(&d, &s, &GridConfig::default()).unwrap();
        assert_eq!(r.cells, 81);
        assert_eq!(r.size, 3);
        assert_eq!(r.cv_error, 0.0);
        assert!(r.w_bar[0] > 0.0);
    }

    #[test]
    fn parallel_matches_serial() {
        let (d, s) = toy();
        let a = grid_search(&d, &s, &GridConfig::default()).unwrap();
        let b = grid_search(
            &d,
            &s,
            &GridConfig {
                jobs: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((a.c, &a.w_bar, a.cv_error), (b.c, &b.w_bar, b.cv_error));
    }

    #[test]
    fn budget_guard() {
        let (d, s) = toy();
        let cfg = GridConfig {
            budget: 10,
            ..Default::default()
        };
        match grid_search(&d, &s, &cfg) {
            Err(Error::GridBudget { cells, .. }) => assert_eq!(cells, 81),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wbar_enumeration_order() {
        let lv = [0.0, 0.75, 1.5];
        assert_eq!(wbar_of(0, &lv, 2, 3, Some(1.5)), vec![0.0, 0.0, 1.5]);
        assert_eq!(wbar_of(1, &lv, 2, 3, Some(1.5)), vec![0.0, 0.75, 1.5]);
        assert_eq!(wbar_of(3, &lv, 2, 3, Some(1.5)), vec![0.75, 0.0, 1.5]);
    }
}
