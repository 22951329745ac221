//! KKT residual of the relaxed problem, written as a system of
//! piecewise-smooth equations `F_τ(z) = 0` with the min complementarity
//! function, and its Jacobian for a chosen selection of active pieces.
//!
//! The relaxed problem replaces `G ⟂ H` by `G, H >= 0, G∘H <= τ` and adds a
//! slack `u = τ − G∘H`. The extended iterate is
//! `z = [v, λg, λG, λH, λGH, u]`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpec::AffineMpec;
use crate::sparse::{CsrBuilder, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZLayout {
    pub nv: usize,
    pub ng: usize,
    pub mc: usize,
}

impl ZLayout {
    pub fn of(m: &AffineMpec) -> Self {
        Self {
            nv: m.nv(),
            ng: m.ng(),
            mc: m.mc(),
        }
    }

    pub fn len(&self) -> usize {
        self.nv + self.ng + 4 * self.mc
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn v(&self) -> Range<usize> {
        0..self.nv
    }

    pub fn lam_g(&self) -> Range<usize> {
        self.nv..self.nv + self.ng
    }

    pub fn lam_gbig(&self) -> Range<usize> {
        let s = self.nv + self.ng;
        s..s + self.mc
    }

    pub fn lam_h(&self) -> Range<usize> {
        let s = self.lam_gbig().end;
        s..s + self.mc
    }

    pub fn lam_gh(&self) -> Range<usize> {
        let s = self.lam_h().end;
        s..s + self.mc
    }

    pub fn u(&self) -> Range<usize> {
        let s = self.lam_gh().end;
        s..s + self.mc
    }

    /// Start of the multiplier and slack part, all of which must stay >= 0.
    pub fn nonneg_start(&self) -> usize {
        self.nv
    }

    // residual row blocks, in the order of the KKT system
    pub fn row_grad(&self) -> Range<usize> {
        0..self.nv
    }

    pub fn row_slack(&self) -> Range<usize> {
        self.nv..self.nv + self.mc
    }

    pub fn row_min_g(&self) -> Range<usize> {
        let s = self.row_slack().end;
        s..s + self.ng
    }

    pub fn row_min_gbig(&self) -> Range<usize> {
        let s = self.row_min_g().end;
        s..s + self.mc
    }

    pub fn row_min_h(&self) -> Range<usize> {
        let s = self.row_min_gbig().end;
        s..s + self.mc
    }

    pub fn row_min_gh(&self) -> Range<usize> {
        let s = self.row_min_h().end;
        s..s + self.mc
    }
}

/// An extended iterate `[v, λg, λG, λH, λGH, u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateZ {
    pub layout: ZLayout,
    pub data: Vec<f64>,
}

impl IterateZ {
    pub fn new(layout: ZLayout, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "iterate has length {} (expected {})",
                data.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, data })
    }

    /// Primal `v` with zero multipliers and the slack consistent with `τ`.
    pub fn from_primal(m: &AffineMpec, v: &[f64], tau: f64) -> Result<Self> {
        let layout = ZLayout::of(m);
        if v.len() != layout.nv {
            return Err(Error::Dimension(format!(
                "v has length {} (expected {})",
                v.len(),
                layout.nv
            )));
        }
        let mut data = vec![0.0; layout.len()];
        data[layout.v()].copy_from_slice(v);
        let mut z = Self { layout, data };
        z.reset_slack(m, tau);
        Ok(z)
    }

    /// `u ← max(0, τ − G∘H)`.
    pub fn reset_slack(&mut self, m: &AffineMpec, tau: f64) {
        let ev = PointEval::new(m, self.v());
        let r = self.layout.u();
        for (i, u) in self.data[r].iter_mut().enumerate() {
            *u = (tau - ev.gbig[i] * ev.h[i]).max(0.0);
        }
    }

    pub fn v(&self) -> &[f64] {
        &self.data[self.layout.v()]
    }

    pub fn lam_g(&self) -> &[f64] {
        &self.data[self.layout.lam_g()]
    }

    pub fn lam_gbig(&self) -> &[f64] {
        &self.data[self.layout.lam_gbig()]
    }

    pub fn lam_h(&self) -> &[f64] {
        &self.data[self.layout.lam_h()]
    }

    pub fn lam_gh(&self) -> &[f64] {
        &self.data[self.layout.lam_gh()]
    }

    pub fn u(&self) -> &[f64] {
        &self.data[self.layout.u()]
    }
}

/// `g`, `G`, `H` at one primal point.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub g: Vec<f64>,
    pub gbig: Vec<f64>,
    pub h: Vec<f64>,
}

impl PointEval {
    pub fn new(m: &AffineMpec, v: &[f64]) -> Self {
        Self {
            g: m.g(v),
            gbig: m.g_big(v),
            h: m.h(v),
        }
    }
}

fn check(m: &AffineMpec, z: &IterateZ) -> Result<()> {
    if z.layout != ZLayout::of(m) {
        return Err(Error::Dimension(format!(
            "iterate layout {:?} does not match problem {:?}",
            z.layout,
            ZLayout::of(m)
        )));
    }
    Ok(())
}

/// `L = f − λg^T g − λG^T G − λH^T H + λGH^T (G∘H − τ)`.
pub fn lagrangian(m: &AffineMpec, z: &IterateZ, tau: f64) -> Result<f64> {
    check(m, z)?;
    let ev = PointEval::new(m, z.v());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let prod: Vec<f64> = (0..m.mc()).map(|i| ev.gbig[i] * ev.h[i] - tau).collect();
    Ok(m.eval_f(z.v())?
        - dot(z.lam_g(), &ev.g)
        - dot(z.lam_gbig(), &ev.gbig)
        - dot(z.lam_h(), &ev.h)
        + dot(z.lam_gh(), &prod))
}

/// `∇_v L = M − R^T λg − P^T λG − Q^T λH + Σ λGH_i (H_i P_i + G_i Q_i)^T`.
pub fn lagrangian_grad(m: &AffineMpec, z: &IterateZ) -> Result<Vec<f64>> {
    check(m, z)?;
    let ev = PointEval::new(m, z.v());
    Ok(grad_with(m, z, &ev))
}

fn grad_with(m: &AffineMpec, z: &IterateZ, ev: &PointEval) -> Vec<f64> {
    let mut out = m.objective.clone();
    m.r.tmatvec_acc(z.lam_g(), -1.0, &mut out);
    let lgh = z.lam_gh();
    let pw: Vec<f64> = (0..m.mc())
        .map(|i| -z.lam_gbig()[i] + lgh[i] * ev.h[i])
        .collect();
    let qw: Vec<f64> = (0..m.mc())
        .map(|i| -z.lam_h()[i] + lgh[i] * ev.gbig[i])
        .collect();
    m.p.tmatvec_acc(&pw, 1.0, &mut out);
    m.q.tmatvec_acc(&qw, 1.0, &mut out);
    out
}

/// `F_τ(z)`: stationarity, slack definition and four min-complementarity blocks.
pub fn eval_residual(m: &AffineMpec, z: &IterateZ, tau: f64) -> Result<Vec<f64>> {
    check(m, z)?;
    let ev = PointEval::new(m, z.v());
    Ok(residual_with(m, z, tau, &ev))
}

pub(crate) fn residual_with(m: &AffineMpec, z: &IterateZ, tau: f64, ev: &PointEval) -> Vec<f64> {
    let l = z.layout;
    let mut f = Vec::with_capacity(l.len());
    f.extend(grad_with(m, z, ev));
    f.extend((0..l.mc).map(|i| z.u()[i] + ev.gbig[i] * ev.h[i] - tau));
    f.extend(z.lam_g().iter().zip(&ev.g).map(|(a, b)| a.min(*b)));
    f.extend(z.lam_gbig().iter().zip(&ev.gbig).map(|(a, b)| a.min(*b)));
    f.extend(z.lam_h().iter().zip(&ev.h).map(|(a, b)| a.min(*b)));
    f.extend(z.lam_gh().iter().zip(z.u()).map(|(a, b)| a.min(*b)));
    f
}

/// Which argument of each `min` is active. Ties go to the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Mult,
    Fun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSelection {
    pub g: Vec<Branch>,
    pub gbig: Vec<Branch>,
    pub h: Vec<Branch>,
    pub gh: Vec<Branch>,
}

fn pick(mult: &[f64], fun: &[f64]) -> Vec<Branch> {
    mult.iter()
        .zip(fun)
        .map(|(a, b)| if a <= b { Branch::Mult } else { Branch::Fun })
        .collect()
}

pub fn select_active(m: &AffineMpec, z: &IterateZ) -> Result<ActiveSelection> {
    check(m, z)?;
    let ev = PointEval::new(m, z.v());
    Ok(select_with(z, &ev))
}

pub(crate) fn select_with(z: &IterateZ, ev: &PointEval) -> ActiveSelection {
    ActiveSelection {
        g: pick(z.lam_g(), &ev.g),
        gbig: pick(z.lam_gbig(), &ev.gbig),
        h: pick(z.lam_h(), &ev.h),
        gh: pick(z.lam_gh(), z.u()),
    }
}

/// Element of the generalized Jacobian of `F_τ` for the given selection.
pub fn jacobian(m: &AffineMpec, z: &IterateZ, sel: &ActiveSelection) -> Result<CsrMatrix> {
    check(m, z)?;
    let ev = PointEval::new(m, z.v());
    Ok(jacobian_with(m, z, sel, &ev))
}

pub(crate) fn jacobian_with(
    m: &AffineMpec,
    z: &IterateZ,
    sel: &ActiveSelection,
    ev: &PointEval,
) -> CsrMatrix {
    let l = z.layout;
    let (pt, qt, rt) = (m.pt(), m.qt(), m.rt());
    let lgh = z.lam_gh();
    let (c_lg, c_lgb, c_lh, c_lgh, c_u) = (
        l.lam_g().start,
        l.lam_gbig().start,
        l.lam_h().start,
        l.lam_gh().start,
        l.u().start,
    );
    let mut b = CsrBuilder::new(l.len());

    // stationarity rows
    for r in 0..l.nv {
        // Hessian: Σ λGH_i (P_i^T Q_i + Q_i^T P_i), row r
        for (i, pir) in pt.row(r) {
            if lgh[i] != 0.0 {
                b.extend(m.q.row(i).map(|(c, q)| (c, lgh[i] * pir * q)));
            }
        }
        for (i, qir) in qt.row(r) {
            if lgh[i] != 0.0 {
                b.extend(m.p.row(i).map(|(c, p)| (c, lgh[i] * qir * p)));
            }
        }
        b.extend(rt.row(r).map(|(i, x)| (c_lg + i, -x)));
        b.extend(pt.row(r).map(|(i, x)| (c_lgb + i, -x)));
        b.extend(qt.row(r).map(|(i, x)| (c_lh + i, -x)));
        b.extend(pt.row(r).map(|(i, x)| (c_lgh + i, ev.h[i] * x)));
        b.extend(qt.row(r).map(|(i, x)| (c_lgh + i, ev.gbig[i] * x)));
        b.finish_row();
    }
    // slack rows: (H_i P_i + G_i Q_i) dv + du_i
    for i in 0..l.mc {
        b.extend(m.p.row(i).map(|(c, x)| (c, ev.h[i] * x)));
        b.extend(m.q.row(i).map(|(c, x)| (c, ev.gbig[i] * x)));
        b.push(c_u + i, 1.0);
        b.finish_row();
    }
    let mut min_rows = |branches: &[Branch], mat: &CsrMatrix, mult_col: usize| {
        for (i, br) in branches.iter().enumerate() {
            match br {
                Branch::Mult => b.push(mult_col + i, 1.0),
                Branch::Fun => b.extend(mat.row(i)),
            }
            b.finish_row();
        }
    };
    min_rows(&sel.g, &m.r, c_lg);
    min_rows(&sel.gbig, &m.p, c_lgb);
    min_rows(&sel.h, &m.q, c_lh);
    for (i, br) in sel.gh.iter().enumerate() {
        match br {
            Branch::Mult => b.push(c_lgh + i, 1.0),
            Branch::Fun => b.push(c_u + i, 1.0),
        }
        b.finish_row();
    }
    b.build()
}

/// Membership in `Ω̃ = {λ >= 0, u >= 0, g >= 0, G >= 0, H >= 0}` up to `tol`.
pub fn in_omega(m: &AffineMpec, z: &IterateZ, tol: f64) -> bool {
    let ev = PointEval::new(m, z.v());
    omega_violation(z, &ev) <= tol
}

pub(crate) fn omega_violation(z: &IterateZ, ev: &PointEval) -> f64 {
    let neg = |x: &f64| (-x).max(0.0);
    z.data[z.layout.nonneg_start()..]
        .iter()
        .chain(&ev.g)
        .chain(&ev.gbig)
        .chain(&ev.h)
        .map(neg)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{toy_mpec, TOY_SOLUTION, TOY_START, TOY_TAU};
    use crate::sparse::inf_norm;

    fn toy_z(data: &[f64]) -> IterateZ {
        IterateZ::new(ZLayout::of(&toy_mpec()), data.to_vec()).unwrap()
    }

    #[test]
    fn toy_solution_has_zero_residual() {
        let m = toy_mpec();
        let f = eval_residual(&m, &toy_z(&TOY_SOLUTION), TOY_TAU).unwrap();
        assert_eq!(inf_norm(&f), 0.0);
    }

    #[test]
    fn toy_start_residual() {
        let m = toy_mpec();
        let z = toy_z(&TOY_START);
        let f = eval_residual(&m, &z, TOY_TAU).unwrap();
        // ∇L = (1 − λG + λGH H, 1 − λH + λGH G, −1 + λg)
        assert!((f[0] - (1.0 - 1.0 + 0.1 * 0.1)).abs() < 1e-15);
        assert!((f[2] - 0.0).abs() < 1e-15);
        // slack: u + G H − τ = 0.02 + 0.01 − 0.02
        assert!((f[3] - 0.01).abs() < 1e-15);
        // min(λg, g) with g = −v3 = 0.1
        assert!((f[4] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences_on_toy() {
        let m = toy_mpec();
        let z = toy_z(&[0.3, 0.2, -0.4, 0.7, 0.9, 1.3, 0.6, 0.05]);
        let sel = select_active(&m, &z).unwrap();
        let j = jacobian(&m, &z, &sel).unwrap().to_dense();
        let f0 = eval_residual(&m, &z, TOY_TAU).unwrap();
        let h = 1e-7;
        for c in 0..z.data.len() {
            let mut zp = z.clone();
            zp.data[c] += h;
            let fp = eval_residual(&m, &zp, TOY_TAU).unwrap();
            for r in 0..f0.len() {
                let fd = (fp[r] - f0[r]) / h;
                assert!(
                    (fd - j[r][c]).abs() < 1e-5,
                    "J[{r}][{c}] = {} vs {fd}",
                    j[r][c]
                );
            }
        }
    }

    #[test]
    fn ties_choose_multiplier() {
        let m = toy_mpec();
        let mut z = toy_z(&TOY_SOLUTION);
        z.data[4] = 0.0; // λG = G = 0
        let sel = select_active(&m, &z).unwrap();
        assert_eq!(sel.gbig[0], Branch::Mult);
    }

    #[test]
    fn slack_reset_is_nonnegative() {
        let m = toy_mpec();
        let z = IterateZ::from_primal(&m, &[0.5, 0.5, 0.0], 0.1).unwrap();
        assert!(z.u()[0] == 0.0);
        let z = IterateZ::from_primal(&m, &[0.1, 0.1, 0.0], 0.1).unwrap();
        assert!((z.u()[0] - 0.09).abs() < 1e-15);
        assert!(in_omega(&m, &z, 0.0));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let m = toy_mpec();
        let bad = IterateZ::new(
            ZLayout {
                nv: 2,
                ng: 1,
                mc: 1,
            },
            vec![0.0; 7],
        )
        .unwrap();
        assert!(eval_residual(&m, &bad, 0.1).is_err());
    }
}
