//! LP-Newton method for `F_τ(z) = 0` over the convex set `Ω̃`.
//!
//! Each iteration solves
//!
//! ```text
//! min η  s.t.  ‖F + J d‖∞ <= η ‖F‖∞²,  ‖d‖∞ <= η ‖F‖∞,  z + d ∈ Ω̃
//! ```
//!
//! and backtracks along `d` until `‖F(z + θ^m d)‖∞ <= ‖F‖∞ + σ1 θ^m Δ` with
//! `Δ = −‖F‖∞ (1 − η ‖F‖∞)`.
//!
//! The LP is posed in the scaled step `s = d / ‖F‖∞`, which keeps its data
//! of order one as the residual goes to zero; `η` is unchanged by this.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, LinearProgram, LpOptions, LpStatus, RowKind};
use crate::mpec::AffineMpec;
use crate::residual::{
    jacobian_with, omega_violation, residual_with, select_with, IterateZ, PointEval,
};
use crate::sparse::{inf_norm, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpNewtonConfig {
    pub sigma1: f64,
    pub theta: f64,
    pub m_max: usize,
    pub max_inner: usize,
    pub lp: LpOptions,
    /// Keep every iterate in the trace (for post-hoc checks on small problems).
    pub keep_iterates: bool,
}

impl Default for LpNewtonConfig {
    fn default() -> Self {
        Self {
            sigma1: 1e-2,
            theta: 0.5,
            m_max: 50,
            max_inner: 500,
            lp: LpOptions::default(),
            keep_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerStatus {
    ResidualZero,
    DeltaZero,
    ToleranceMet,
    StallLineSearch,
    IterCap,
    /// The LP subproblem could not be solved (numerical breakdown); the best
    /// iterate so far is returned.
    LpFailure,
}

/// One LP-Newton iteration as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpNewtonStep {
    pub j: usize,
    pub residual_norm: f64,
    pub eta: f64,
    /// Accepted backtracking power; `None` when the line search stalled.
    pub m: Option<usize>,
    pub delta: f64,
    pub lp_pivots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterate: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub iterate: IterateZ,
    pub iterations: usize,
    pub status: InnerStatus,
    pub residual_norm: f64,
    pub trace: Vec<LpNewtonStep>,
}

impl InnerReport {
    /// CSV with columns `j,resid_inf,eta,m,delta,lp_pivots`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("j,resid_inf,eta,m,delta,lp_pivots\n");
        for t in &self.trace {
            let m = t.m.map_or(String::from("stall"), |m| m.to_string());
            let _ = writeln!(
                s,
                "{},{:e},{:e},{},{:e},{}",
                t.j, t.residual_norm, t.eta, m, t.delta, t.lp_pivots
            );
        }
        s
    }
}

/// Builds the scaled subproblem. Column 0 is `η`, columns `1..` are
/// `s = d / ‖F‖∞`. Returns the LP and `‖F‖∞`.
pub fn build_subproblem(
    m: &AffineMpec,
    z: &IterateZ,
    f: &[f64],
    jac: &CsrMatrix,
) -> Result<(LinearProgram, f64)> {
    let rho = inf_norm(f);
    if !(rho > 0.0) {
        return Err(Error::Internal(
            "LP-Newton subproblem needs a nonzero residual".into(),
        ));
    }
    let l = z.layout;
    let q = l.len();
    if f.len() != q || jac.nrows() != q || jac.ncols() != q {
        return Err(Error::Dimension(
            "residual or Jacobian size mismatch".into(),
        ));
    }
    let mut lp = LinearProgram::new(1 + q);
    lp.objective[0] = 1.0;
    for k in 1..=q {
        lp.set_bounds(k, f64::NEG_INFINITY, f64::INFINITY);
    }
    // multipliers and slack stay nonnegative
    for k in l.nonneg_start()..q {
        lp.lower[1 + k] = -z.data[k] / rho;
    }
    let mut row: Vec<(usize, f64)> = Vec::new();
    for i in 0..q {
        row.clear();
        row.extend(jac.row(i).map(|(c, v)| (1 + c, v)));
        row.push((0, -rho));
        lp.add_row(&row, RowKind::Le, -f[i] / rho);
        row.iter_mut().for_each(|e| e.1 = -e.1);
        row.last_mut().unwrap().1 = -rho;
        lp.add_row(&row, RowKind::Le, f[i] / rho);
    }
    for k in 1..=q {
        lp.add_row(&[(k, 1.0), (0, -1.0)], RowKind::Le, 0.0);
        lp.add_row(&[(k, -1.0), (0, -1.0)], RowKind::Le, 0.0);
    }
    // affine parts of Ω̃: −A s_v <= value / ρ for A ∈ {R, P, Q}
    let ev = PointEval::new(m, z.v());
    for (mat, vals) in [(&m.r, &ev.g), (&m.p, &ev.gbig), (&m.q, &ev.h)] {
        for i in 0..mat.nrows() {
            let rhs = vals[i] / rho;
            if mat.row_nnz(i) == 1 {
                let (c, a) = mat.row(i).next().unwrap();
                let bound = -rhs / a;
                if a > 0.0 {
                    lp.lower[1 + c] = lp.lower[1 + c].max(bound);
                } else {
                    lp.upper[1 + c] = lp.upper[1 + c].min(bound);
                }
            } else {
                row.clear();
                row.extend(mat.row(i).map(|(c, a)| (1 + c, -a)));
                lp.add_row(&row, RowKind::Le, rhs);
            }
        }
    }
    Ok((lp, rho))
}

/// Smallest `m <= m_max` with `‖F(z + θ^m d)‖∞ <= ‖F(z)‖∞ + σ1 θ^m Δ`,
/// returning it with the accepted point and its residual norm.
#[allow(clippy::too_many_arguments)]
pub fn line_search(
    mpec: &AffineMpec,
    z: &IterateZ,
    d: &[f64],
    rho: f64,
    delta: f64,
    tau: f64,
    cfg: &LpNewtonConfig,
) -> Option<(usize, IterateZ, f64)> {
    let mut step = 1.0;
    for m in 0..=cfg.m_max {
        let trial = step_to(z, d, step);
        let ev = PointEval::new(mpec, trial.v());
        let fnorm = inf_norm(&residual_with(mpec, &trial, tau, &ev));
        if fnorm <= rho + cfg.sigma1 * step * delta {
            return Some((m, trial, fnorm));
        }
        step *= cfg.theta;
    }
    None
}

/// `z + t d` with multipliers and slack clamped at zero (the LP keeps them
/// nonnegative up to its feasibility tolerance).
pub fn step_to(z: &IterateZ, d: &[f64], t: f64) -> IterateZ {
    let mut out = z.clone();
    let nn = z.layout.nonneg_start();
    for (k, (x, dk)) in out.data.iter_mut().zip(d).enumerate() {
        *x += t * dk;
        if k >= nn && *x < 0.0 {
            *x = 0.0;
        }
    }
    out
}

/// Runs LP-Newton from `z0` until `‖F_τ‖∞ <= eps` or another stop fires.
pub fn inner_solve(
    mpec: &AffineMpec,
    z0: &IterateZ,
    tau: f64,
    eps: f64,
    cfg: &LpNewtonConfig,
) -> Result<InnerReport> {
    let mut z = z0.clone();
    let nn = z.layout.nonneg_start();
    z.data[nn..].iter_mut().for_each(|x| *x = x.max(0.0));
    let mut trace = Vec::new();
    let mut best: Option<(f64, IterateZ)> = None;
    let mut j = 0;
    loop {
        let ev = PointEval::new(mpec, z.v());
        let f = residual_with(mpec, &z, tau, &ev);
        let rho = inf_norm(&f);
        if best.as_ref().is_none_or(|(b, _)| rho < *b) {
            best = Some((rho, z.clone()));
        }
        let finish = |status, z: IterateZ, rho, trace: Vec<LpNewtonStep>| {
            Ok(InnerReport {
                iterate: z,
                iterations: trace.len(),
                status,
                residual_norm: rho,
                trace,
            })
        };
        if rho == 0.0 {
            return finish(InnerStatus::ResidualZero, z, rho, trace);
        }
        if rho <= eps {
            return finish(InnerStatus::ToleranceMet, z, rho, trace);
        }
        if j >= cfg.max_inner {
            let (r, b) = best.unwrap();
            return finish(InnerStatus::IterCap, b, r, trace);
        }
        let sel = select_with(&z, &ev);
        let jac = jacobian_with(mpec, &z, &sel, &ev);
        let (lp, rho) = build_subproblem(mpec, &z, &f, &jac)?;
        let sol = match solve_lp(&lp, &cfg.lp) {
            Ok(sol) if sol.status == LpStatus::Optimal => sol,
            other => {
                let why = match other {
                    Ok(sol) => format!("{:?}", sol.status),
                    Err(e) => e.to_string(),
                };
                log::warn!("LP-Newton subproblem at iteration {j} failed: {why}");
                let (r, b) = best.unwrap();
                return finish(InnerStatus::LpFailure, b, r, trace);
            }
        };
        // s = 0, η = 1/ρ is always feasible, so anything above it is LP
        // tolerance noise
        let (eta, d): (f64, Vec<f64>) = if sol.x[0] * rho >= 1.0 {
            (1.0 / rho, vec![0.0; sol.x.len() - 1])
        } else {
            (
                sol.x[0].max(0.0),
                sol.x[1..].iter().map(|s| s * rho).collect(),
            )
        };
        let delta = -rho * (1.0 - eta * rho);
        let mut rec = LpNewtonStep {
            j,
            residual_norm: rho,
            eta,
            m: None,
            delta,
            lp_pivots: sol.iterations,
            iterate: cfg.keep_iterates.then(|| z.data.clone()),
            direction: cfg.keep_iterates.then(|| d.clone()),
        };
        j += 1;
        if delta >= -1e-14 * (1.0 + rho) {
            trace.push(rec);
            return finish(InnerStatus::DeltaZero, z, rho, trace);
        }
        match line_search(mpec, &z, &d, rho, delta, tau, cfg) {
            Some((m, next, _)) => {
                rec.m = Some(m);
                trace.push(rec);
                z = next;
            }
            None => {
                trace.push(rec);
                let (r, b) = best.unwrap();
                return finish(InnerStatus::StallLineSearch, b, r, trace);
            }
        }
        log::trace!("inner {j}: |F| = {rho:e}, eta = {eta:e}");
    }
}

/// Largest violation of `Ω̃` at `z`.
pub fn omega_residual(mpec: &AffineMpec, z: &IterateZ) -> f64 {
    omega_violation(z, &PointEval::new(mpec, z.v()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_mpec, TOY_SOLUTION, TOY_START, TOY_TAU};
    use crate::residual::{eval_residual, jacobian, select_active, ZLayout};

    fn toy(data: &[f64]) -> (AffineMpec, IterateZ) {
        let m = toy_mpec();
        let z = IterateZ::new(ZLayout::of(&m), data.to_vec()).unwrap();
        (m, z)
    }

    #[test]
    fn toy_converges_fast() {
        let (m, z) = toy(&TOY_START);
        let cfg = LpNewtonConfig {
            keep_iterates: true,
            ..Default::default()
        };
        let r = inner_solve(&m, &z, TOY_TAU, 1e-10, &cfg).unwrap();
        assert!(matches!(
            r.status,
            InnerStatus::ToleranceMet | InnerStatus::ResidualZero
        ));
        assert!(r.iterations <= 30, "{}", r.iterations);
        for (a, b) in r.iterate.data.iter().zip(TOY_SOLUTION) {
            assert!((a - b).abs() <= 1e-6, "{:?}", r.iterate.data);
        }
        // Armijo replay
        for t in &r.trace {
            let z = IterateZ::new(ZLayout::of(&m), t.iterate.clone().unwrap()).unwrap();
            let mm = t.m.unwrap();
            let next = step_to(&z, t.direction.as_ref().unwrap(), 0.5f64.powi(mm as i32));
            let fn_ = inf_norm(&eval_residual(&m, &next, TOY_TAU).unwrap());
            assert!(fn_ <= t.residual_norm + 1e-2 * 0.5f64.powi(mm as i32) * t.delta);
            assert!(t.eta <= 1.0 / t.residual_norm + 1e-9);
        }
    }

    #[test]
    fn exact_solution_stops_immediately() {
        let (m, z) = toy(&TOY_SOLUTION);
        let r = inner_solve(&m, &z, TOY_TAU, 0.0, &LpNewtonConfig::default()).unwrap();
        assert_eq!(r.status, InnerStatus::ResidualZero);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn iteration_cap_of_one() {
        let (m, z) = toy(&TOY_START);
        let cfg = LpNewtonConfig {
            max_inner: 1,
            ..Default::default()
        };
        let r = inner_solve(&m, &z, TOY_TAU, 0.0, &cfg).unwrap();
        assert_eq!(r.status, InnerStatus::IterCap);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn subproblem_eta_below_inverse_residual() {
        let (m, z) = toy(&[0.1, 0.1, -0.1, 1.0, 1.0, 1.0, 0.1, 0.019]);
        let f = eval_residual(&m, &z, TOY_TAU).unwrap();
        let sel = select_active(&m, &z).unwrap();
        let jac = jacobian(&m, &z, &sel).unwrap();
        let (lp, rho) = build_subproblem(&m, &z, &f, &jac).unwrap();
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.x[0] < 0.5 / rho);
    }
}
