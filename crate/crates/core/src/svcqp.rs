//! Linear SVC with box bounds on the weights:
//!
//! ```text
//! min ½‖w‖² + C Σ ξ_i   s.t.  y_i x_i^T w >= 1 − ξ_i,  ξ >= 0,  −w̄ <= w <= w̄
//! ```
//!
//! The primary path is a projected Newton method on a smoothed hinge with a
//! shrinking smoothing width; every level is followed by an exact active-set
//! repair that recovers `α` from the margins of `w`. If that does not reach
//! the tolerance, dual coordinate descent over `α ∈ [0, C]` takes over, with
//! the bound multipliers eliminated in closed form
//! (`w = clip(B^T α, −w̄, w̄)`). The returned multipliers satisfy
//! `w = B^T α + β − γ` by construction.

use nalgebra::{DMatrix, DVector};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, LinearProgram, LpBackend, LpOptions, LpStatus, RowKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Try an active-set polish every this many sweeps.
    pub polish_every: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 100_000,
            polish_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub w: Vec<f64>,
    pub xi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kkt_residual: f64,
    pub objective: f64,
    pub sweeps: usize,
}

/// Trains on raw points and ±1 labels.
pub fn train_boxed(
    points: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    w_bar: &[f64],
    opts: &QpOptions,
) -> Result<SvcModel> {
    let b = signed(points, labels)?;
    train_boxed_signed(&b, c, w_bar, opts, None)
}

/// [`train_boxed`] with `w̄ = +∞`.
pub fn train_unbounded(
    points: &[Vec<f64>],
    labels: &[f64],
    c: f64,
    opts: &QpOptions,
) -> Result<SvcModel> {
    let b = signed(points, labels)?;
    let n = b.first().map_or(0, Vec::len);
    train_boxed_signed(&b, c, &vec![f64::INFINITY; n], opts, None)
}

fn signed(points: &[Vec<f64>], labels: &[f64]) -> Result<Vec<Vec<f64>>> {
    if points.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    Ok(points
        .iter()
        .zip(labels)
        .map(|(x, y)| x.iter().map(|v| y * v).collect())
        .collect())
}

fn clip(s: f64, wb: f64) -> f64 {
    s.clamp(-wb, wb)
}

/// Trains on rows `b_i = y_i x_i`, optionally warm-started from `alpha0`.
pub fn train_boxed_signed(
    b: &[Vec<f64>],
    c: f64,
    w_bar: &[f64],
    opts: &QpOptions,
    alpha0: Option<&[f64]>,
) -> Result<SvcModel> {
    let n = w_bar.len();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!(
            "C must be positive and finite, got {c}"
        )));
    }
    if w_bar.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Config("w̄ must be nonnegative".into()));
    }
    if let Some(r) = b.iter().find(|r| r.len() != n) {
        return Err(Error::Dimension(format!(
            "training row has {} features, w̄ has {n}",
            r.len()
        )));
    }
    let m = b.len();
    let (newton_best, newton_iters) = smoothed_newton(b, c, w_bar, opts.tol);
    if let Some(model) = &newton_best {
        if model.kkt_residual <= opts.tol {
            return Ok(model.clone());
        }
    }
    let mut alpha = match alpha0 {
        Some(a) if a.len() == m => a.iter().map(|x| x.clamp(0.0, c)).collect(),
        _ => vec![0.0; m],
    };
    let mut s = bt_alpha(b, &alpha, n);
    let mut best = match newton_best {
        Some(model) => (model.kkt_residual, model.alpha),
        None => (f64::INFINITY, alpha.clone()),
    };
    let mut sweeps = newton_iters;
    let mut bp: Vec<f64> = Vec::with_capacity(2 * n + 2);

    let sweep_cap = sweeps + opts.max_sweeps;
    while sweeps < sweep_cap {
        sweeps += 1;
        let mut worst_pg = 0.0f64;
        for i in 0..m {
            let bi = &b[i];
            let h = |t: f64| -> f64 {
                bi.iter()
                    .zip(&s)
                    .zip(w_bar)
                    .map(|((bij, sj), wb)| bij * clip(sj + t * bij, *wb))
                    .sum::<f64>()
                    - 1.0
            };
            let g0 = h(0.0);
            let pg = if alpha[i] <= 0.0 {
                g0.min(0.0)
            } else if alpha[i] >= c {
                g0.max(0.0)
            } else {
                g0
            };
            worst_pg = worst_pg.max(pg.abs());
            if pg == 0.0 {
                continue;
            }
            let (lo, hi) = (-alpha[i], c - alpha[i]);
            let t = if h(lo) >= 0.0 {
                lo
            } else if h(hi) <= 0.0 {
                hi
            } else {
                bp.clear();
                bp.push(lo);
                bp.push(hi);
                for ((bij, sj), wb) in bi.iter().zip(&s).zip(w_bar) {
                    if *bij != 0.0 && wb.is_finite() {
                        for edge in [-wb, *wb] {
                            let t = (edge - sj) / bij;
                            if t > lo && t < hi {
                                bp.push(t);
                            }
                        }
                    }
                }
                bp.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let mut root = hi;
                let mut prev = (lo, h(lo));
                for &t in &bp[1..] {
                    let ht = h(t);
                    if ht >= 0.0 {
                        let (a, ha) = prev;
                        root = if ht > ha {
                            a - ha * (t - a) / (ht - ha)
                        } else {
                            t
                        };
                        break;
                    }
                    prev = (t, ht);
                }
                root
            };
            let new = if t == lo {
                0.0
            } else if t == hi {
                c
            } else {
                (alpha[i] + t).clamp(0.0, c)
            };
            let delta = new - alpha[i];
            if delta != 0.0 {
                alpha[i] = new;
                s.iter_mut()
                    .zip(bi)
                    .for_each(|(sj, bij)| *sj += delta * bij);
            }
        }
        if worst_pg <= opts.tol || sweeps % opts.polish_every.max(1) == 0 {
            s = bt_alpha(b, &alpha, n);
            let model = build_model(b, c, w_bar, &alpha, sweeps);
            if model.kkt_residual < best.0 {
                best = (model.kkt_residual, alpha.clone());
            }
            if model.kkt_residual <= opts.tol {
                return Ok(model);
            }
            let w: Vec<f64> = s.iter().zip(w_bar).map(|(sj, wb)| clip(*sj, *wb)).collect();
            for gap in [1e-3, 1e-5, 1e-7] {
                let Some(polished) = polish(b, c, w_bar, &w, gap) else {
                    continue;
                };
                let pm = build_model(b, c, w_bar, &polished, sweeps);
                if pm.kkt_residual <= opts.tol {
                    return Ok(pm);
                }
                if pm.kkt_residual < best.0 {
                    best = (pm.kkt_residual, polished);
                }
            }
        }
    }
    let model = build_model(b, c, w_bar, &best.1, sweeps);
    if model.kkt_residual <= opts.tol {
        return Ok(model);
    }
    Err(Error::QpNonConvergence {
        iterations: sweeps,
        kkt_residual: model.kkt_residual,
    })
}

/// Primal projected Newton on the hinge smoothed over a width `μ`, run
/// along a decreasing `μ` schedule. Each level hands its `w` to [`polish`],
/// which usually lands on the exact active set once `μ` is below the
/// smallest nonzero margin gap. Returns the best polished model and the
/// Newton iteration count.
fn smoothed_newton(b: &[Vec<f64>], c: f64, w_bar: &[f64], tol: f64) -> (Option<SvcModel>, usize) {
    let n = w_bar.len();
    let mut w = vec![0.0; n];
    let mut iters = 0;
    let mut best: Option<SvcModel> = None;
    let phi = |w: &[f64], mu: f64| -> f64 {
        let loss: f64 = b
            .iter()
            .map(|bi| {
                let t = 1.0 - dot(bi, w);
                if t <= 0.0 {
                    0.0
                } else if t < mu {
                    t * t / (2.0 * mu)
                } else {
                    t - mu / 2.0
                }
            })
            .sum();
        0.5 * dot(w, w) + c * loss
    };
    let mut mu = 1.0;
    while mu >= 1e-11 {
        for _ in 0..200 {
            iters += 1;
            let mut g = w.clone();
            let mut curved = Vec::new();
            for (i, bi) in b.iter().enumerate() {
                let t = 1.0 - dot(bi, &w);
                let slope = (t / mu).clamp(0.0, 1.0);
                if slope > 0.0 {
                    g.iter_mut()
                        .zip(bi)
                        .for_each(|(gj, bij)| *gj -= c * slope * bij);
                }
                if t > 0.0 && t < mu {
                    curved.push(i);
                }
            }
            let pg = (0..n)
                .map(|j| (w[j] - (w[j] - g[j]).clamp(-w_bar[j], w_bar[j])).abs())
                .fold(0.0f64, f64::max);
            if pg <= 1e-14 * (1.0 + c) {
                break;
            }
            let eps = pg.min(1e-6);
            let free: Vec<usize> = (0..n)
                .filter(|&j| {
                    !((w[j] <= -w_bar[j] + eps && g[j] > 0.0)
                        || (w[j] >= w_bar[j] - eps && g[j] < 0.0))
                })
                .collect();
            let mut d = vec![0.0; n];
            if !free.is_empty() {
                let k = free.len();
                let mut h = DMatrix::<f64>::identity(k, k);
                for &i in &curved {
                    let bf = DVector::from_iterator(k, free.iter().map(|&j| b[i][j]));
                    h.ger(c / mu, &bf, &bf, 1.0);
                }
                let gf = DVector::from_iterator(k, free.iter().map(|&j| -g[j]));
                let step = match h.clone().cholesky() {
                    Some(ch) => ch.solve(&gf),
                    None => h.lu().solve(&gf).unwrap_or(gf),
                };
                for (r, &j) in free.iter().enumerate() {
                    d[j] = step[r];
                }
            }
            for j in 0..n {
                if !free.contains(&j) {
                    d[j] = -g[j];
                }
            }
            let f0 = phi(&w, mu);
            let mut step = 1.0;
            let mut moved = false;
            while step > 1e-20 {
                let trial: Vec<f64> = (0..n)
                    .map(|j| (w[j] + step * d[j]).clamp(-w_bar[j], w_bar[j]))
                    .collect();
                let decrease: f64 = (0..n).map(|j| g[j] * (trial[j] - w[j])).sum();
                if phi(&trial, mu) <= f0 + 1e-4 * decrease {
                    moved = trial != w;
                    w = trial;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if mu <= 1e-2 {
            for gap in [10.0 * mu, 1e3 * mu] {
                if let Some(alpha) = polish(b, c, w_bar, &w, gap) {
                    let model = build_model(b, c, w_bar, &alpha, iters);
                    if best
                        .as_ref()
                        .is_none_or(|bm| model.kkt_residual < bm.kkt_residual)
                    {
                        best = Some(model);
                    }
                    if best.as_ref().is_some_and(|bm| bm.kkt_residual <= tol) {
                        return (best, iters);
                    }
                }
            }
        }
        mu *= 0.1;
    }
    (best, iters)
}

fn bt_alpha(b: &[Vec<f64>], alpha: &[f64], n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for (bi, &a) in b.iter().zip(alpha) {
        if a != 0.0 {
            s.iter_mut().zip(bi).for_each(|(sj, bij)| *sj += a * bij);
        }
    }
    s
}

fn build_model(b: &[Vec<f64>], c: f64, w_bar: &[f64], alpha: &[f64], sweeps: usize) -> SvcModel {
    let n = w_bar.len();
    let s = bt_alpha(b, alpha, n);
    let w: Vec<f64> = s.iter().zip(w_bar).map(|(sj, wb)| clip(*sj, *wb)).collect();
    let beta: Vec<f64> = s
        .iter()
        .zip(w_bar)
        .map(|(sj, wb)| (-wb - sj).max(0.0))
        .collect();
    let gamma: Vec<f64> = s
        .iter()
        .zip(w_bar)
        .map(|(sj, wb)| (sj - wb).max(0.0))
        .collect();
    let xi: Vec<f64> = b.iter().map(|bi| (1.0 - dot(bi, &w)).max(0.0)).collect();
    let mu: Vec<f64> = alpha.iter().map(|a| c - a).collect();
    let objective = 0.5 * dot(&w, &w) + c * xi.iter().sum::<f64>();
    let mut model = SvcModel {
        w,
        xi,
        alpha: alpha.to_vec(),
        mu,
        beta,
        gamma,
        kkt_residual: 0.0,
        objective,
        sweeps,
    };
    model.kkt_residual = kkt_residual(b, c, w_bar, &model);
    model
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Active-set repair driven by the margins of the current `w`: points with
/// `b_i^T w` clearly above (below) one get `α_i = 0` (`C`), bound-hitting
/// weights stay clipped, and the free part of `w` and the remaining margin
/// multipliers are recovered from the equality system. The margin
/// multipliers are found by a small feasibility LP because they need not be
/// unique.
fn polish(b: &[Vec<f64>], c: f64, w_bar: &[f64], w: &[f64], gap: f64) -> Option<Vec<f64>> {
    let n = w_bar.len();
    let mut out = vec![0.0; b.len()];
    let mut margin_set = Vec::new();
    for (i, bi) in b.iter().enumerate() {
        let r = dot(bi, &w) - 1.0;
        if r > gap {
            out[i] = 0.0;
        } else if r < -gap {
            out[i] = c;
        } else {
            margin_set.push(i);
        }
    }
    if margin_set.len() > 400 {
        return None;
    }
    // clipped coordinates: +1 at the upper face, −1 at the lower face
    let side: Vec<i8> = (0..n)
        .map(|j| {
            if w_bar[j].is_finite() && w[j] >= w_bar[j] - gap * w_bar[j].max(1.0) {
                1
            } else if w_bar[j].is_finite() && w[j] <= -w_bar[j] + gap * w_bar[j].max(1.0) {
                -1
            } else {
                0
            }
        })
        .collect();
    let free_j: Vec<usize> = (0..n).filter(|&j| side[j] == 0).collect();
    let base = bt_alpha(b, &out, n);
    if margin_set.is_empty() {
        return Some(out);
    }
    // unknowns α_M; the free part of w is B_MF^T α_M + base_F
    let clipped = |i: usize| -> f64 {
        (0..n)
            .filter(|&j| side[j] != 0)
            .map(|j| b[i][j] * side[j] as f64 * w_bar[j])
            .sum()
    };
    let mut lp = LinearProgram::new(margin_set.len());
    for k in 0..margin_set.len() {
        lp.set_bounds(k, 0.0, c);
    }
    for &i in &margin_set {
        let row: Vec<(usize, f64)> = margin_set
            .iter()
            .enumerate()
            .map(|(k, &l)| (k, free_j.iter().map(|&j| b[i][j] * b[l][j]).sum()))
            .collect();
        let rhs = 1.0 - clipped(i) - free_j.iter().map(|&j| b[i][j] * base[j]).sum::<f64>();
        lp.add_row(&row, RowKind::Eq, rhs);
    }
    for j in (0..n).filter(|&j| side[j] != 0) {
        let row: Vec<(usize, f64)> = margin_set
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, b[i][j]))
            .collect();
        let rhs = side[j] as f64 * w_bar[j] - base[j];
        let kind = if side[j] > 0 {
            RowKind::Ge
        } else {
            RowKind::Le
        };
        lp.add_row(&row, kind, rhs);
    }
    let sol = solve_lp(
        &lp,
        &LpOptions {
            backend: LpBackend::Dense,
            ..Default::default()
        },
    )
    .ok()?;
    if sol.status != LpStatus::Optimal {
        return None;
    }
    for (k, &i) in margin_set.iter().enumerate() {
        out[i] = sol.x[k].clamp(0.0, c);
    }
    Some(out)
}

/// Independent KKT check of a model against the training rows: the ∞-norm of
/// stationarity, the multiplier identities and all complementarity residuals
/// (measured with `min(a, b)`, which also penalizes sign violations).
pub fn kkt_residual(b: &[Vec<f64>], c: f64, w_bar: &[f64], m: &SvcModel) -> f64 {
    let n = w_bar.len();
    let mut r = 0.0f64;
    let mut upd = |x: f64| r = r.max(x.abs());
    // w = B^T α + β − γ
    let s = bt_alpha(b, &m.alpha, n);
    for j in 0..n {
        upd(m.w[j] - s[j] - m.beta[j] + m.gamma[j]);
    }
    for (i, bi) in b.iter().enumerate() {
        let margin = dot(bi, &m.w) - 1.0 + m.xi[i];
        upd(m.alpha[i].min(margin));
        upd(m.xi[i].min(m.mu[i]));
        upd(m.mu[i] - (c - m.alpha[i]));
    }
    for j in 0..n {
        let (lo, hi) = (w_bar[j] + m.w[j], w_bar[j] - m.w[j]);
        upd(if lo.is_finite() {
            m.beta[j].min(lo)
        } else {
            m.beta[j]
        });
        upd(if hi.is_finite() {
            m.gamma[j].min(hi)
        } else {
            m.gamma[j]
        });
    }
    r
}
