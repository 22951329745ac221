//! Global relaxation driven by LP-Newton: solve the relaxed KKT system for a
//! decreasing sequence of `τ`, warm-starting each round from the last.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::{CvSplit, Dataset};
use crate::error::{Error, Result};
use crate::lpnewton::{inner_solve, InnerStatus, LpNewtonConfig, LpNewtonStep};
use crate::lpsolve::{solve_lp, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::metrics::{cv_error, test_error};
use crate::mpec::{mfcq_diagnostic, AffineMpec, Bounds, MfcqReport, MpecDims, MpecProblem};
use crate::residual::{IterateZ, PointEval};
use crate::svcqp::{train_boxed_signed, QpOptions};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpsilonMode {
    /// `ε_k = eps_inner` every round.
    Constant,
    /// `ε_k = min(eps_inner, τ_k²)`.
    Theory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    /// Candidate C values are these multipliers over `(K − 1)·m2`.
    pub c_multipliers: Vec<f64>,
    /// Fit the starting multipliers by an LP on the stationarity residual
    /// instead of starting from zero.
    pub fit_multipliers: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            c_multipliers: vec![1e-2, 1e-1, 1.0, 1e1, 1e2],
            fit_multipliers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau0: f64,
    pub tau_min: f64,
    pub sigma2: f64,
    pub sigma1: f64,
    pub theta: f64,
    pub eps_inner: f64,
    pub eps_mode: EpsilonMode,
    pub vio_stop: f64,
    pub c_lb: f64,
    pub c_ub: f64,
    pub wbar_lb: f64,
    pub wbar_ub: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub m_max: usize,
    pub seed: u64,
    pub init: InitConfig,
    pub qp: QpOptions,
    pub lp: LpOptions,
    /// Tolerance used by the end-of-run index-set and MFCQ diagnostics.
    pub diagnostic_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau0: 0.1,
            tau_min: 1e-8,
            sigma2: 0.1,
            sigma1: 1e-2,
            theta: 0.5,
            eps_inner: 1e-2,
            eps_mode: EpsilonMode::Constant,
            vio_stop: 1e-3,
            c_lb: 1e-4,
            c_ub: 1e4,
            wbar_lb: 1e-6,
            wbar_ub: 1.5,
            max_outer: 50,
            max_inner: 500,
            m_max: 50,
            seed: 0,
            init: InitConfig::default(),
            qp: QpOptions::default(),
            lp: LpOptions::default(),
            diagnostic_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tau_min > 0.0 && self.tau_min < self.tau0) {
            return bad(format!(
                "need 0 < tau_min < tau0 (got {} and {})",
                self.tau_min, self.tau0
            ));
        }
        if !unit(self.sigma2) || !unit(self.sigma1) || !unit(self.theta) {
            return bad("sigma1, sigma2 and theta must lie in (0, 1)".into());
        }
        if !(self.vio_stop > 0.0) {
            return bad("vio_stop must be positive".into());
        }
        if !(self.eps_inner >= 0.0) {
            return bad("eps_inner must be nonnegative".into());
        }
        if !(self.c_lb > 0.0 && self.c_lb < self.c_ub) {
            return bad("need 0 < C_lb < C_ub".into());
        }
        if !(self.wbar_lb > 0.0 && self.wbar_lb < self.wbar_ub) {
            return bad("need 0 < w̄_lb < w̄_ub".into());
        }
        if self.max_outer == 0 {
            return bad("max_outer must be at least 1".into());
        }
        if self.init.c_multipliers.is_empty() || self.init.c_multipliers.iter().any(|c| !(*c > 0.0))
        {
            return bad("C candidates must be positive".into());
        }
        Ok(())
    }

    pub fn bounds(&self, n: usize) -> Bounds {
        Bounds::uniform(self.c_lb, self.c_ub, self.wbar_lb, self.wbar_ub, n)
    }

    fn eps_for(&self, tau: f64) -> f64 {
        match self.eps_mode {
            EpsilonMode::Constant => self.eps_inner,
            EpsilonMode::Theory => self.eps_inner.min(tau * tau),
        }
    }

    fn inner(&self) -> LpNewtonConfig {
        LpNewtonConfig {
            sigma1: self.sigma1,
            theta: self.theta,
            m_max: self.m_max,
            max_inner: self.max_inner,
            lp: self.lp,
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// `Vio(v) < vio_stop`.
    VioMet,
    /// `τ_k <= τ_min`.
    TauMin,
    /// Outer round cap (the only exit for a single-round solve).
    MaxOuter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub tau: f64,
    pub eps: f64,
    pub inner_iters: usize,
    pub inner_status: InnerStatus,
    pub start_residual: f64,
    pub residual: f64,
    pub vio: f64,
    /// `max_i G_i H_i` at the end of the round.
    pub max_product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub method: String,
    pub status: SolveStatus,
    pub dims: MpecDims,
    /// Number of entries of the extended iterate, `3n̄ + 5m̄`.
    pub size: usize,
    pub v_opt: Vec<f64>,
    /// C as found by the solver.
    #[serde(rename = "C")]
    pub c: f64,
    /// C rescaled by `K/(K−1)` for the refit on the full CV set.
    pub c_scaled: f64,
    pub w_bar: Vec<f64>,
    pub w_bar_thresholded: Vec<f64>,
    pub kept_features: Vec<usize>,
    pub per_fold_w: Vec<Vec<f64>>,
    pub w_refit: Vec<f64>,
    pub vio: f64,
    #[serde(rename = "E_C")]
    pub cv_error: f64,
    #[serde(rename = "E_t")]
    pub test_error: Option<f64>,
    pub outer_iters: usize,
    pub final_tau: f64,
    pub outer_trace: Vec<OuterRecord>,
    pub inner_traces: Vec<Vec<LpNewtonStep>>,
    pub initial_c: f64,
    pub initial_vio: f64,
    pub diagnostics: Option<MfcqReport>,
    pub wall_time_secs: f64,
}

impl SolveReport {
    /// CSV with columns `k,tau,eps,inner_iters,status,resid,vio`.
    pub fn outer_trace_csv(&self) -> String {
        let mut s = String::from("k,tau,eps,inner_iters,status,resid,vio\n");
        for r in &self.outer_trace {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{},{:?},{:e},{:e}",
                r.k, r.tau, r.eps, r.inner_iters, r.inner_status, r.residual, r.vio
            );
        }
        s
    }

    /// Pretty JSON; `wall_time_secs` is the only run-dependent field.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `Vio(v) = ‖min(G(v), H(v))‖∞`.
pub fn vio(p: &MpecProblem, v: &[f64]) -> Result<f64> {
    p.vio(v)
}

/// Zeroes every `w̄_i < √τ`; returns the thresholded vector and survivors.
pub fn threshold_features(w_bar: &[f64], tau_final: f64) -> (Vec<f64>, Vec<usize>) {
    let cut = tau_final.max(0.0).sqrt();
    let kept: Vec<usize> = (0..w_bar.len()).filter(|&i| w_bar[i] >= cut).collect();
    let out = w_bar
        .iter()
        .map(|&w| if w >= cut { w } else { 0.0 })
        .collect();
    (out, kept)
}

fn check_folds(data: &Dataset, split: &CvSplit) -> Result<()> {
    for (t, tr) in split.training_idx.iter().enumerate() {
        let pos = tr.iter().filter(|&&i| data.labels[i] > 0.0).count();
        if pos == 0 || pos == tr.len() {
            return Err(Error::DegenerateFold {
                fold: t,
                msg: "training fold holds a single class; both labels are required in every fold"
                    .into(),
            });
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Starting point: C from a small validation sweep of unbounded SVCs
/// (fewest validation errors, then smallest validation hinge loss), w̄
/// from one unbounded SVC on the whole CV set, lower-level variables from
/// the per-fold boxed SVCs, ζ and z from the sign rule, multipliers from
/// [`fit_multipliers`] (or zero).
pub fn initialize(p: &MpecProblem, cfg: &SolverConfig, tau0: f64) -> Result<(IterateZ, f64)> {
    let d = p.dims;
    let qp = cfg.qp;
    let unb = vec![f64::INFINITY; d.n];
    let scale = ((d.k - 1) * d.m2) as f64;
    // ranked by validation errors, ties broken by validation hinge loss
    let mut best: Option<(usize, f64, f64)> = None;
    for &mult in &cfg.init.c_multipliers {
        let c = (mult / scale).clamp(p.bounds.c_lb, p.bounds.c_ub);
        let mut errors = 0;
        let mut hinge = 0.0;
        for (ab, bb) in p.a_blocks.iter().zip(&p.b_blocks) {
            let w = match train_boxed_signed(bb, c, &unb, &qp, None) {
                Ok(m) => m.w,
                Err(Error::QpNonConvergence { .. }) => {
                    log::warn!("initial C sweep: SVC at C = {c:e} did not converge");
                    errors = usize::MAX / 2;
                    break;
                }
                Err(e) => return Err(e),
            };
            errors += ab.iter().filter(|a| dot(a, &w) < 0.0).count();
            hinge += ab.iter().map(|a| (1.0 - dot(a, &w)).max(0.0)).sum::<f64>();
        }
        let better = match best {
            None => true,
            Some((e, h, _)) => errors < e || (errors == e && hinge < h - 1e-12 * (1.0 + h)),
        };
        if better {
            best = Some((errors, hinge, c));
        }
    }
    let c = best.map(|b| b.2).unwrap_or(p.bounds.c_lb);

    let all_b: Vec<Vec<f64>> = p.a_blocks.iter().flatten().cloned().collect();
    let w_full = match train_boxed_signed(&all_b, c, &unb, &qp, None) {
        Ok(m) => m.w,
        Err(Error::QpNonConvergence { .. }) => vec![0.0; d.n],
        Err(e) => return Err(e),
    };
    let w_bar: Vec<f64> = w_full
        .iter()
        .enumerate()
        .map(|(j, w)| w.abs().min(p.bounds.wbar_ub[j]).max(p.bounds.wbar_lb[j]))
        .collect();

    let mut v = vec![0.0; d.nv()];
    v[0] = c;
    v[d.w_bar()].copy_from_slice(&w_bar);
    for (t, (ab, bb)) in p.a_blocks.iter().zip(&p.b_blocks).enumerate() {
        let w_t = match train_boxed_signed(bb, c, &w_bar, &qp, None) {
            Ok(m) => {
                v[d.alpha().start + t * d.m2..][..d.m2].copy_from_slice(&m.alpha);
                v[d.xi().start + t * d.m2..][..d.m2].copy_from_slice(&m.xi);
                v[d.beta().start + t * d.n..][..d.n].copy_from_slice(&m.beta);
                v[d.gamma().start + t * d.n..][..d.n].copy_from_slice(&m.gamma);
                m.w
            }
            Err(Error::QpNonConvergence { kkt_residual, .. }) => {
                log::warn!("fold {t}: boxed SVC did not converge ({kkt_residual:e}); using α = 0");
                v[d.xi().start + t * d.m2..][..d.m2]
                    .iter_mut()
                    .for_each(|x| *x = 1.0);
                vec![0.0; d.n]
            }
            Err(e) => return Err(e),
        };
        for (i, a) in ab.iter().enumerate() {
            let r = -dot(a, &w_t);
            if r > 0.0 {
                v[d.zeta().start + t * d.m1 + i] = 1.0;
                v[d.z().start + t * d.m1 + i] = r;
            }
        }
    }
    let mut z = IterateZ::from_primal(&p.affine, &v, tau0)?;
    if cfg.init.fit_multipliers {
        if let Err(e) = fit_multipliers(&p.affine, &mut z, &cfg.lp) {
            log::warn!("multiplier fit failed ({e}); starting from zero multipliers");
        }
    }
    Ok((z, c))
}

/// With `v` and `u` fixed, picks nonnegative multipliers on the active
/// constraints (zero function value, or zero slack for `λGH`) minimizing
/// `‖∇_v L‖∞`. Inactive multipliers stay zero, so the complementarity
/// blocks of the residual are untouched.
pub fn fit_multipliers(m: &AffineMpec, z: &mut IterateZ, lp_opts: &LpOptions) -> Result<f64> {
    const ACTIVE: f64 = 1e-10;
    const CAP: f64 = 1e6;
    let ev = PointEval::new(m, z.v());
    let layout = z.layout;
    // columns: t, then one per active multiplier
    let mut cols: Vec<usize> = Vec::new();
    let mut pick = |range: std::ops::Range<usize>, fun: &[f64]| {
        for (i, f) in fun.iter().enumerate() {
            if *f <= ACTIVE {
                cols.push(range.start + i);
            }
        }
    };
    pick(layout.lam_g(), &ev.g);
    pick(layout.lam_gbig(), &ev.gbig);
    pick(layout.lam_h(), &ev.h);
    pick(layout.lam_gh(), z.u());
    let mut grad_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); layout.nv];
    for (k, &zc) in cols.iter().enumerate() {
        let col = k + 1;
        if layout.lam_g().contains(&zc) {
            for (j, val) in m.r.row(zc - layout.lam_g().start) {
                grad_rows[j].push((col, -val));
            }
        } else if layout.lam_gbig().contains(&zc) {
            for (j, val) in m.p.row(zc - layout.lam_gbig().start) {
                grad_rows[j].push((col, -val));
            }
        } else if layout.lam_h().contains(&zc) {
            for (j, val) in m.q.row(zc - layout.lam_h().start) {
                grad_rows[j].push((col, -val));
            }
        } else {
            let i = zc - layout.lam_gh().start;
            for (j, val) in m.p.row(i) {
                grad_rows[j].push((col, val * ev.h[i]));
            }
            for (j, val) in m.q.row(i) {
                grad_rows[j].push((col, val * ev.gbig[i]));
            }
        }
    }
    let mut lp = LinearProgram::new(cols.len() + 1);
    lp.objective[0] = 1.0;
    for k in 1..=cols.len() {
        lp.set_bounds(k, 0.0, CAP);
    }
    for (j, row) in grad_rows.iter().enumerate() {
        // |M_j + row·λ| <= t
        let mut le = row.clone();
        le.push((0, -1.0));
        lp.add_row(&le, RowKind::Le, -m.objective[j]);
        let mut ge = row.clone();
        ge.push((0, 1.0));
        lp.add_row(&ge, RowKind::Ge, -m.objective[j]);
    }
    let sol = solve_lp(&lp, lp_opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "multiplier LP returned {:?}",
            sol.status
        )));
    }
    for (k, &zc) in cols.iter().enumerate() {
        z.data[zc] = sol.x[k + 1].max(0.0);
    }
    Ok(sol.x[0])
}

/// Runs the full relaxation schedule.
pub fn solve(
    p: &MpecProblem,
    data: &Dataset,
    split: &CvSplit,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    run(p, data, split, cfg, cfg.tau0, cfg.max_outer, "GRLPN")
}

/// Solves the relaxed problem once at a fixed `τ`.
pub fn solve_inlp(
    p: &MpecProblem,
    data: &Dataset,
    split: &CvSplit,
    cfg: &SolverConfig,
    tau_fixed: f64,
) -> Result<SolveReport> {
    if !(tau_fixed > 0.0) {
        return Err(Error::Config(format!(
            "tau must be positive, got {tau_fixed}"
        )));
    }
    let mut c = cfg.clone();
    c.tau0 = tau_fixed;
    c.tau_min = c.tau_min.min(tau_fixed * 0.5);
    c.validate()?;
    run(p, data, split, &c, tau_fixed, 1, "InLP")
}

fn run(
    p: &MpecProblem,
    data: &Dataset,
    split: &CvSplit,
    cfg: &SolverConfig,
    tau_start: f64,
    max_outer: usize,
    method: &str,
) -> Result<SolveReport> {
    let started = Instant::now();
    check_folds(data, split)?;
    let (mut z, initial_c) = initialize(p, cfg, tau_start)?;
    let initial_vio = p.vio(z.v())?;
    let inner_cfg = cfg.inner();
    let mut tau = tau_start;
    let mut outer_trace = Vec::new();
    let mut inner_traces = Vec::new();
    let status;
    let mut k = 0;
    loop {
        let eps = cfg.eps_for(tau);
        let start_residual =
            crate::sparse::inf_norm(&crate::residual::eval_residual(&p.affine, &z, tau)?);
        let rep = inner_solve(&p.affine, &z, tau, eps, &inner_cfg).map_err(|e| Error::Outer {
            outer: k,
            tau,
            source: Box::new(e),
        })?;
        z = rep.iterate;
        let g = p.affine.eval_g_big(z.v())?;
        let h = p.affine.eval_h(z.v())?;
        let vio_k = crate::mpec::vio_of(&g, &h);
        let max_product = g
            .iter()
            .zip(&h)
            .map(|(a, b)| a * b)
            .fold(f64::MIN, f64::max);
        log::info!(
            "{method} round {k}: tau = {tau:e}, inner {:?} after {} its, |F| = {:e}, vio = {vio_k:e}",
            rep.status,
            rep.iterations,
            rep.residual_norm
        );
        outer_trace.push(OuterRecord {
            k,
            tau,
            eps,
            inner_iters: rep.iterations,
            inner_status: rep.status,
            start_residual,
            residual: rep.residual_norm,
            vio: vio_k,
            max_product,
        });
        inner_traces.push(rep.trace);
        k += 1;
        if vio_k < cfg.vio_stop {
            status = SolveStatus::VioMet;
            break;
        }
        if tau <= cfg.tau_min * (1.0 + 1e-9) {
            status = SolveStatus::TauMin;
            break;
        }
        if k >= max_outer {
            status = SolveStatus::MaxOuter;
            break;
        }
        tau *= cfg.sigma2;
        // the slack u carries over; F_τ picks up the change in τ
    }

    let v = z.v().to_vec();
    let d = p.dims;
    let c = v[0];
    let c_scaled = c * d.k as f64 / (d.k - 1) as f64;
    let w_bar = v[d.w_bar()].to_vec();
    let (w_bar_thresholded, kept_features) = threshold_features(&w_bar, tau);
    let cv_idx = split.cv_indices();
    let cv_rows: Vec<Vec<f64>> = cv_idx
        .iter()
        .map(|&i| data.points[i].iter().map(|x| data.labels[i] * x).collect())
        .collect();
    let w_refit = match train_boxed_signed(&cv_rows, c_scaled, &w_bar_thresholded, &cfg.qp, None) {
        Ok(m) => m.w,
        Err(Error::QpNonConvergence { kkt_residual, .. }) => {
            log::warn!("refit SVC did not converge ({kkt_residual:e}); using fold average");
            let ws = p.reconstruct_w(&v)?;
            (0..d.n)
                .map(|j| ws.iter().map(|w| w[j]).sum::<f64>() / d.k as f64)
                .collect()
        }
        Err(e) => return Err(e),
    };
    let test_err = if split.test_idx.is_empty() {
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
    let diagnostics = match mfcq_diagnostic(p, &v, cfg.diagnostic_tol) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("diagnostics failed: {e}");
            None
        }
    };
    Ok(SolveReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method: method.to_string(),
        status,
        dims: d,
        size: d.q_bar(),
        vio: p.vio(&v)?,
        cv_error: cv_error(p, &v)?,
        per_fold_w: p.reconstruct_w(&v)?,
        v_opt: v,
        c,
        c_scaled,
        w_bar,
        w_bar_thresholded,
        kept_features,
        w_refit,
        test_error: test_err,
        outer_iters: k,
        final_tau: tau,
        outer_trace,
        inner_traces,
        initial_c,
        initial_vio,
        diagnostics,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = SolverConfig::default();
        c.sigma2 = 1.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.tau_min = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn threshold_examples() {
        let (w, kept) = threshold_features(&[0.2, 1e-5], 1e-8);
        assert_eq!(w, vec![0.2, 0.0]);
        assert_eq!(kept, vec![0]);
        let (w, kept) = threshold_features(&[0.2, 0.3], 1e-8);
        assert_eq!((w, kept), (vec![0.2, 0.3], vec![0, 1]));
        let (w, kept) = threshold_features(&[1e-6, 1e-7], 1e-8);
        assert_eq!((w, kept.len()), (vec![0.0, 0.0], 0));
    }

    #[test]
    fn vio_examples() {
        assert_eq!(crate::mpec::vio_of(&[1.0, 0.0], &[0.0, 2.0]), 0.0);
        assert_eq!(crate::mpec::vio_of(&[0.1, 0.3], &[0.2, 0.1]), 0.1);
    }

    #[test]
    fn theory_eps_schedule() {
        let c = SolverConfig {
            eps_mode: EpsilonMode::Theory,
            ..Default::default()
        };
        assert_eq!(c.eps_for(0.1), 1e-2);
        assert!(c.eps_for(1e-3) <= 1e-6);
    }
}
