//! Assembly of the single-level MPEC for K-fold SVC hyperparameter selection:
//!
//! ```text
//! min  M^T v   s.t.  g(v) = R v + b >= 0,   0 <= H(v) = Q v  _|_  G(v) = P v + a >= 0
//! ```
//!
//! with `v = [C, w̄, ζ, z, α, ξ, β, γ]`. The generic affine form lives in
//! [`AffineMpec`] so that the relaxation solver can run on any problem of
//! this shape; [`MpecProblem`] adds the SVC-specific block structure.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataio::{CvSplit, Dataset};
use crate::error::{Error, Result};
use crate::sparse::{CsrBuilder, CsrMatrix};

/// An MPEC with linear objective and affine constraint maps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineMpec {
    pub objective: Vec<f64>,
    pub p: CsrMatrix,
    pub a: Vec<f64>,
    pub q: CsrMatrix,
    pub h_offset: Vec<f64>,
    pub r: CsrMatrix,
    pub b: Vec<f64>,
    pt: CsrMatrix,
    qt: CsrMatrix,
    rt: CsrMatrix,
}

impl AffineMpec {
    pub fn new(
        objective: Vec<f64>,
        p: CsrMatrix,
        a: Vec<f64>,
        q: CsrMatrix,
        h_offset: Vec<f64>,
        r: CsrMatrix,
        b: Vec<f64>,
    ) -> Result<Self> {
        let nv = objective.len();
        let mc = p.nrows();
        let ok = p.ncols() == nv
            && q.ncols() == nv
            && r.ncols() == nv
            && q.nrows() == mc
            && a.len() == mc
            && h_offset.len() == mc
            && b.len() == r.nrows();
        if !ok {
            return Err(Error::Assembly(format!(
                "inconsistent affine MPEC: nv={nv}, P {}x{}, Q {}x{}, R {}x{}, |a|={}, |c|={}, |b|={}",
                p.nrows(),
                p.ncols(),
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols(),
                a.len(),
                h_offset.len(),
                b.len()
            )));
        }
        let (pt, qt, rt) = (p.transpose(), q.transpose(), r.transpose());
        Ok(Self {
            objective,
            p,
            a,
            q,
            h_offset,
            r,
            b,
            pt,
            qt,
            rt,
        })
    }

    /// Number of primal variables.
    pub fn nv(&self) -> usize {
        self.objective.len()
    }

    /// Number of complementarity pairs.
    pub fn mc(&self) -> usize {
        self.p.nrows()
    }

    /// Number of inequality constraints `g`.
    pub fn ng(&self) -> usize {
        self.r.nrows()
    }

    pub fn pt(&self) -> &CsrMatrix {
        &self.pt
    }

    pub fn qt(&self) -> &CsrMatrix {
        &self.qt
    }

    pub fn rt(&self) -> &CsrMatrix {
        &self.rt
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.nv() {
            return Err(Error::Dimension(format!(
                "v has length {} (expected {})",
                v.len(),
                self.nv()
            )));
        }
        Ok(())
    }

    pub fn eval_f(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        Ok(self.objective.iter().zip(v).map(|(m, x)| m * x).sum())
    }

    pub fn eval_g_big(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(self.g_big(v))
    }

    pub fn eval_h(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(self.h(v))
    }

    pub fn eval_g(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok(self.g(v))
    }

    pub(crate) fn g_big(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.p.matvec(v);
        out.iter_mut().zip(&self.a).for_each(|(o, a)| *o += a);
        out
    }

    pub(crate) fn h(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.q.matvec(v);
        out.iter_mut()
            .zip(&self.h_offset)
            .for_each(|(o, c)| *o += c);
        out
    }

    pub(crate) fn g(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.r.matvec(v);
        out.iter_mut().zip(&self.b).for_each(|(o, b)| *o += b);
        out
    }

    /// `‖min(G(v), H(v))‖∞`
    pub fn vio(&self, v: &[f64]) -> Result<f64> {
        self.check_len(v)?;
        Ok(vio_of(&self.g_big(v), &self.h(v)))
    }
}

pub fn vio_of(g: &[f64], h: &[f64]) -> f64 {
    g.iter()
        .zip(h)
        .fold(0.0f64, |m, (a, b)| m.max(a.min(*b).abs()))
}

/// Dimension bookkeeping: `K` folds, `m1` validation and `m2` training points
/// per fold, `n` features (bias included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpecDims {
    pub k: usize,
    pub m1: usize,
    pub m2: usize,
    pub n: usize,
}

impl MpecDims {
    pub fn n_bar(&self) -> usize {
        1 + self.n
    }

    /// Number of complementarity pairs, `2K(m1 + m2 + n)`.
    pub fn m_bar(&self) -> usize {
        2 * self.k * (self.m1 + self.m2 + self.n)
    }

    pub fn nv(&self) -> usize {
        self.n_bar() + self.m_bar()
    }

    /// Length of the extended LP-Newton iterate, `3n̄ + 5m̄`.
    pub fn q_bar(&self) -> usize {
        3 * self.n_bar() + 5 * self.m_bar()
    }

    pub fn c_index(&self) -> usize {
        0
    }

    pub fn w_bar(&self) -> Range<usize> {
        1..1 + self.n
    }

    pub fn zeta(&self) -> Range<usize> {
        let s = self.n_bar();
        s..s + self.k * self.m1
    }

    pub fn z(&self) -> Range<usize> {
        let s = self.zeta().end;
        s..s + self.k * self.m1
    }

    pub fn alpha(&self) -> Range<usize> {
        let s = self.z().end;
        s..s + self.k * self.m2
    }

    pub fn xi(&self) -> Range<usize> {
        let s = self.alpha().end;
        s..s + self.k * self.m2
    }

    pub fn beta(&self) -> Range<usize> {
        let s = self.xi().end;
        s..s + self.k * self.n
    }

    pub fn gamma(&self) -> Range<usize> {
        let s = self.beta().end;
        s..s + self.k * self.n
    }

    /// Ranges of the six complementarity parts inside `[0, m̄)`; part `j`
    /// pairs `H` (the variable block) with the `j`-th block of `G`.
    pub fn parts(&self) -> [Range<usize>; 6] {
        let off = self.n_bar();
        let shift = |r: Range<usize>| r.start - off..r.end - off;
        [
            shift(self.zeta()),
            shift(self.z()),
            shift(self.alpha()),
            shift(self.xi()),
            shift(self.beta()),
            shift(self.gamma()),
        ]
    }
}

/// Box bounds on the hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub c_lb: f64,
    pub c_ub: f64,
    pub wbar_lb: Vec<f64>,
    pub wbar_ub: Vec<f64>,
}

impl Bounds {
    /// Same scalar bounds on every feature.
    pub fn uniform(c_lb: f64, c_ub: f64, wbar_lb: f64, wbar_ub: f64, n: usize) -> Self {
        Self {
            c_lb,
            c_ub,
            wbar_lb: vec![wbar_lb; n],
            wbar_ub: vec![wbar_ub; n],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.c_lb < self.c_ub) {
            return Err(Error::Assembly(format!(
                "C bounds must satisfy lb < ub (got {} .. {})",
                self.c_lb, self.c_ub
            )));
        }
        if self.wbar_lb.len() != n || self.wbar_ub.len() != n {
            return Err(Error::Assembly(format!(
                "w̄ bounds must have length {n} (got {} and {})",
                self.wbar_lb.len(),
                self.wbar_ub.len()
            )));
        }
        for (j, (lo, hi)) in self.wbar_lb.iter().zip(&self.wbar_ub).enumerate() {
            if !(*lo > 0.0 && lo < hi) {
                return Err(Error::Assembly(format!(
                    "w̄ bounds for feature {j} must satisfy 0 < lb < ub (got {lo} .. {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Variables of the MPEC laid out as `[C, w̄, ζ, z, α, ξ, β, γ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableVector {
    pub dims: MpecDims,
    pub data: Vec<f64>,
}

impl VariableVector {
    pub fn zeros(dims: MpecDims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.nv()],
        }
    }

    pub fn from_vec(dims: MpecDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.nv() {
            return Err(Error::Dimension(format!(
                "variable vector has length {} (expected {})",
                data.len(),
                dims.nv()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn c(&self) -> f64 {
        self.data[0]
    }

    pub fn w_bar(&self) -> &[f64] {
        &self.data[self.dims.w_bar()]
    }

    pub fn zeta(&self) -> &[f64] {
        &self.data[self.dims.zeta()]
    }

    pub fn z(&self) -> &[f64] {
        &self.data[self.dims.z()]
    }

    pub fn alpha(&self) -> &[f64] {
        &self.data[self.dims.alpha()]
    }

    pub fn xi(&self) -> &[f64] {
        &self.data[self.dims.xi()]
    }

    pub fn beta(&self) -> &[f64] {
        &self.data[self.dims.beta()]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.data[self.dims.gamma()]
    }

    pub fn block_mut(&mut self, r: Range<usize>) -> &mut [f64] {
        &mut self.data[r]
    }
}

/// The assembled SVC hyperparameter MPEC.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpecProblem {
    pub dims: MpecDims,
    pub bounds: Bounds,
    /// Per fold, the `m1 × n` block with rows `y_i x_i^T` over validation points.
    pub a_blocks: Vec<Vec<Vec<f64>>>,
    /// Per fold, the `m2 × n` block with rows `y_i x_i^T` over training points.
    pub b_blocks: Vec<Vec<Vec<f64>>>,
    pub affine: AffineMpec,
}

fn signed_rows(data: &Dataset, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| data.points[i].iter().map(|x| data.labels[i] * x).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assembles the MPEC for a dataset and its cross-validation split.
pub fn assemble(split: &CvSplit, data: &Dataset, bounds: &Bounds) -> Result<MpecProblem> {
    if split.validation_idx.len() != split.k || split.training_idx.len() != split.k {
        return Err(Error::Assembly("split fold lists disagree with K".into()));
    }
    if let Some(&i) = split
        .validation_idx
        .iter()
        .chain(&split.training_idx)
        .flatten()
        .find(|&&i| i >= data.len())
    {
        return Err(Error::Assembly(format!(
            "split index {i} out of range for {} points",
            data.len()
        )));
    }
    let m2 = split.m2();
    if split.training_idx.iter().any(|t| t.len() != m2) {
        return Err(Error::Assembly("training folds differ in size".into()));
    }
    let a_blocks = split
        .validation_idx
        .iter()
        .map(|idx| signed_rows(data, idx))
        .collect();
    let b_blocks = split
        .training_idx
        .iter()
        .map(|idx| signed_rows(data, idx))
        .collect();
    assemble_from_blocks(a_blocks, b_blocks, data.n_features, bounds.clone())
}

/// Builds the problem directly from signed data blocks.
pub fn assemble_from_blocks(
    a_blocks: Vec<Vec<Vec<f64>>>,
    b_blocks: Vec<Vec<Vec<f64>>>,
    n: usize,
    bounds: Bounds,
) -> Result<MpecProblem> {
    let k = a_blocks.len();
    if k == 0 || b_blocks.len() != k {
        return Err(Error::Assembly(format!(
            "need matching nonzero fold counts (A has {k}, B has {})",
            b_blocks.len()
        )));
    }
    let m1 = a_blocks[0].len();
    let m2 = b_blocks[0].len();
    if m1 == 0 || m2 == 0 || n == 0 {
        return Err(Error::Assembly(format!(
            "empty dimensions: m1={m1}, m2={m2}, n={n}"
        )));
    }
    for (t, (ab, bb)) in a_blocks.iter().zip(&b_blocks).enumerate() {
        if ab.len() != m1 || bb.len() != m2 || ab.iter().chain(bb).any(|r| r.len() != n) {
            return Err(Error::Assembly(format!(
                "fold {t} block has the wrong shape"
            )));
        }
    }
    bounds.validate(n)?;
    let dims = MpecDims { k, m1, m2, n };
    let nv = dims.nv();
    let (zeta, zr, alpha, xi, beta, gamma) = (
        dims.zeta().start,
        dims.z().start,
        dims.alpha().start,
        dims.xi().start,
        dims.beta().start,
        dims.gamma().start,
    );

    let mut objective = vec![0.0; nv];
    let weight = 1.0 / (k * m1) as f64;
    objective[dims.zeta()].iter_mut().for_each(|m| *m = weight);

    let mut p = CsrBuilder::new(nv);
    let mut a_off = Vec::with_capacity(dims.m_bar());

    // part 1: A B^T α + A β − A γ + z
    for (t, (ab, bb)) in a_blocks.iter().zip(&b_blocks).enumerate() {
        for (i, ai) in ab.iter().enumerate() {
            p.push(zr + t * m1 + i, 1.0);
            for (kk, bk) in bb.iter().enumerate() {
                p.push(alpha + t * m2 + kk, dot(ai, bk));
            }
            for (j, &aij) in ai.iter().enumerate() {
                p.push(beta + t * n + j, aij);
                p.push(gamma + t * n + j, -aij);
            }
            p.finish_row();
            a_off.push(0.0);
        }
    }
    // part 2: 1 − ζ
    for t in 0..k {
        for i in 0..m1 {
            p.push(zeta + t * m1 + i, -1.0);
            p.finish_row();
            a_off.push(1.0);
        }
    }
    // part 3: B B^T α + B β − B γ − 1 + ξ
    for (t, bb) in b_blocks.iter().enumerate() {
        for (i, bi) in bb.iter().enumerate() {
            for (kk, bk) in bb.iter().enumerate() {
                p.push(alpha + t * m2 + kk, dot(bi, bk));
            }
            p.push(xi + t * m2 + i, 1.0);
            for (j, &bij) in bi.iter().enumerate() {
                p.push(beta + t * n + j, bij);
                p.push(gamma + t * n + j, -bij);
            }
            p.finish_row();
            a_off.push(-1.0);
        }
    }
    // part 4: C − α
    for t in 0..k {
        for i in 0..m2 {
            p.push(0, 1.0);
            p.push(alpha + t * m2 + i, -1.0);
            p.finish_row();
            a_off.push(0.0);
        }
    }
    // parts 5 and 6: ±(B^T α + β − γ) + w̄
    for sign in [1.0, -1.0] {
        for (t, bb) in b_blocks.iter().enumerate() {
            for j in 0..n {
                p.push(1 + j, 1.0);
                for (kk, bk) in bb.iter().enumerate() {
                    p.push(alpha + t * m2 + kk, sign * bk[j]);
                }
                p.push(beta + t * n + j, sign);
                p.push(gamma + t * n + j, -sign);
                p.finish_row();
                a_off.push(0.0);
            }
        }
    }
    let p = p.build();

    let mut q = CsrBuilder::new(nv);
    for i in 0..dims.m_bar() {
        q.push(dims.n_bar() + i, 1.0);
        q.finish_row();
    }
    let q = q.build();

    let mut r = CsrBuilder::new(nv);
    let mut b = Vec::with_capacity(2 * dims.n_bar());
    r.push(0, -1.0);
    r.finish_row();
    b.push(bounds.c_ub);
    r.push(0, 1.0);
    r.finish_row();
    b.push(-bounds.c_lb);
    for j in 0..n {
        r.push(1 + j, -1.0);
        r.finish_row();
        b.push(bounds.wbar_ub[j]);
    }
    for j in 0..n {
        r.push(1 + j, 1.0);
        r.finish_row();
        b.push(-bounds.wbar_lb[j]);
    }
    let r = r.build();

    let affine = AffineMpec::new(objective, p, a_off, q, vec![0.0; dims.m_bar()], r, b)?;
    Ok(MpecProblem {
        dims,
        bounds,
        a_blocks,
        b_blocks,
        affine,
    })
}

impl MpecProblem {
    pub fn eval_f(&self, v: &[f64]) -> Result<f64> {
        self.affine.eval_f(v)
    }

    #[allow(non_snake_case)]
    pub fn eval_G(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.affine.eval_g_big(v)
    }

    #[allow(non_snake_case)]
    pub fn eval_H(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.affine.eval_h(v)
    }

    pub fn eval_g(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.affine.eval_g(v)
    }

    pub fn vio(&self, v: &[f64]) -> Result<f64> {
        self.affine.vio(v)
    }

    /// Per-fold classifiers `w^t = (B^t)^T α^t + β^t − γ^t`.
    pub fn reconstruct_w(&self, v: &[f64]) -> Result<Vec<Vec<f64>>> {
        let d = self.dims;
        if v.len() != d.nv() {
            return Err(Error::Dimension(format!(
                "v has length {} (expected {})",
                v.len(),
                d.nv()
            )));
        }
        let (alpha, beta, gamma) = (&v[d.alpha()], &v[d.beta()], &v[d.gamma()]);
        Ok(self
            .b_blocks
            .iter()
            .enumerate()
            .map(|(t, bb)| {
                let mut w: Vec<f64> = (0..d.n)
                    .map(|j| beta[t * d.n + j] - gamma[t * d.n + j])
                    .collect();
                for (kk, bk) in bb.iter().enumerate() {
                    let a = alpha[t * d.m2 + kk];
                    if a != 0.0 {
                        w.iter_mut().zip(bk).for_each(|(wj, b)| *wj += a * b);
                    }
                }
                w
            })
            .collect())
    }

    /// Serializes the problem as text: a dims header, the bounds, then the
    /// signed data blocks row-major. Floats use their shortest round-trip form.
    pub fn dump(&self) -> String {
        let d = self.dims;
        let mut s = String::new();
        let fmt_row = |row: &[f64]| {
            row.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "grlpn-mpec 1");
        let _ = writeln!(s, "dims {} {} {} {}", d.k, d.m1, d.m2, d.n);
        let _ = writeln!(s, "c_bounds {:?} {:?}", self.bounds.c_lb, self.bounds.c_ub);
        let _ = writeln!(s, "wbar_lb {}", fmt_row(&self.bounds.wbar_lb));
        let _ = writeln!(s, "wbar_ub {}", fmt_row(&self.bounds.wbar_ub));
        for (t, blk) in self.a_blocks.iter().enumerate() {
            let _ = writeln!(s, "A {t} {} {}", blk.len(), d.n);
            for row in blk {
                let _ = writeln!(s, "{}", fmt_row(row));
            }
        }
        for (t, blk) in self.b_blocks.iter().enumerate() {
            let _ = writeln!(s, "B {t} {} {}", blk.len(), d.n);
            for row in blk {
                let _ = writeln!(s, "{}", fmt_row(row));
            }
        }
        s
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("unexpected end of problem dump, expected {what}"),
            })
        };
        let nums = |lineno: usize, toks: &[&str]| -> Result<Vec<f64>> {
            toks.iter()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("bad number {t:?}"),
                    })
                })
                .collect()
        };
        let header = |lineno: usize, line: &str, key: &str| -> Result<Vec<String>> {
            let toks: Vec<String> = line.split_whitespace().map(String::from).collect();
            if toks.first().map(String::as_str) != Some(key) {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {key:?}"),
                });
            }
            Ok(toks[1..].to_vec())
        };
        let (ln, l) = next("magic")?;
        let magic = header(ln, l, "grlpn-mpec")?;
        if magic != ["1"] {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "unsupported problem dump version".into(),
            });
        }
        let (ln, l) = next("dims")?;
        let dims_t = header(ln, l, "dims")?;
        let dims: Vec<usize> = dims_t
            .iter()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    msg: format!("bad dimension {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let [k, m1, m2, n] = dims[..] else {
            return Err(Error::Parse {
                line: ln + 1,
                msg: "dims needs K m1 m2 n".into(),
            });
        };
        let (ln, l) = next("c_bounds")?;
        let cb = header(ln, l, "c_bounds")?;
        let cb = nums(ln, &cb.iter().map(String::as_str).collect::<Vec<_>>())?;
        let (ln, l) = next("wbar_lb")?;
        let wl = header(ln, l, "wbar_lb")?;
        let wbar_lb = nums(ln, &wl.iter().map(String::as_str).collect::<Vec<_>>())?;
        let (ln, l) = next("wbar_ub")?;
        let wu = header(ln, l, "wbar_ub")?;
        let wbar_ub = nums(ln, &wu.iter().map(String::as_str).collect::<Vec<_>>())?;
        if cb.len() != 2 {
            return Err(Error::Parse {
                line: 0,
                msg: "c_bounds needs two numbers".into(),
            });
        }
        let mut read_blocks = |key: &str, rows: usize| -> Result<Vec<Vec<Vec<f64>>>> {
            let mut blocks = Vec::with_capacity(k);
            for t in 0..k {
                let (ln, l) = next(key)?;
                let h = header(ln, l, key)?;
                if h.len() != 3 || h[0] != t.to_string() {
                    return Err(Error::Parse {
                        line: ln + 1,
                        msg: format!("expected {key} {t} <rows> <cols>"),
                    });
                }
                let mut blk = Vec::with_capacity(rows);
                for _ in 0..rows {
                    let (ln, l) = next("block row")?;
                    let row = nums(ln, &l.split_whitespace().collect::<Vec<_>>())?;
                    if row.len() != n {
                        return Err(Error::Parse {
                            line: ln + 1,
                            msg: format!("block row has {} entries (expected {n})", row.len()),
                        });
                    }
                    blk.push(row);
                }
                blocks.push(blk);
            }
            Ok(blocks)
        };
        let a_blocks = read_blocks("A", m1)?;
        let b_blocks = read_blocks("B", m2)?;
        let bounds = Bounds {
            c_lb: cb[0],
            c_ub: cb[1],
            wbar_lb,
            wbar_ub,
        };
        assemble_from_blocks(a_blocks, b_blocks, n, bounds)
    }
}

/// Active-index classification at a (nearly) feasible point. All indices are
/// zero-based: `I_G`, `I_H`, `I_GH` index `[0, m̄)`, `I_g` indexes `[0, 2n̄)`,
/// the Ψ sets index validation points `[0, K·m1)`, the Λ sets training points
/// `[0, K·m2)` and the Π sets bound rows `[0, K·n)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    pub tolerance: f64,
    pub i_g_big: Vec<usize>,
    pub i_h: Vec<usize>,
    pub i_gh: Vec<usize>,
    pub i_g: Vec<usize>,
    pub psi1: Vec<usize>,
    pub psi1_zero: Vec<usize>,
    pub psi1_plus: Vec<usize>,
    pub psi2: Vec<usize>,
    pub psi3: Vec<usize>,
    pub lambda1: Vec<usize>,
    pub lambda2: Vec<usize>,
    pub lambda3: Vec<usize>,
    pub lambda3_plus: Vec<usize>,
    pub lambda3_c: Vec<usize>,
    pub lambda_u: Vec<usize>,
    pub pi1: Vec<usize>,
    pub pi1_zero: Vec<usize>,
    pub pi1_plus: Vec<usize>,
    pub pi2: Vec<usize>,
    pub pi3: Vec<usize>,
    pub pi3_zero: Vec<usize>,
    pub pi3_plus: Vec<usize>,
    /// Indices that fit none of the Ψ / Λ / Π patterns (infeasible points).
    pub unclassified_validation: Vec<usize>,
    pub unclassified_training: Vec<usize>,
    pub unclassified_bounds: Vec<usize>,
}

impl IndexSets {
    /// `Λ1 ∪ Λ3`, sorted.
    pub fn lambda13(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.lambda1.iter().chain(&self.lambda3).copied().collect();
        s.sort_unstable();
        s
    }

    /// Validation points sitting on a decision boundary (`y x^T w ≈ 0`).
    pub fn boundary_ties(&self) -> &[usize] {
        &self.psi1
    }
}

/// Classifies every index with `x <= tol` read as "= 0". Values below zero
/// fall into the zero branch too, so the `I_*` sets always partition `[m̄]`.
pub fn classify_index_sets(p: &MpecProblem, v: &[f64], tol: f64) -> Result<IndexSets> {
    let d = p.dims;
    let gv = p.eval_G(v)?;
    let hv = p.eval_H(v)?;
    let gs = p.eval_g(v)?;
    let zero = |x: f64| x <= tol;
    let pos = |x: f64| x > tol;
    let mut s = IndexSets {
        tolerance: tol,
        ..Default::default()
    };
    for i in 0..d.m_bar() {
        match (zero(gv[i]), zero(hv[i])) {
            (true, false) => s.i_g_big.push(i),
            (false, true) => s.i_h.push(i),
            (true, true) => s.i_gh.push(i),
            (false, false) => {}
        }
    }
    s.i_g = (0..gs.len()).filter(|&i| gs[i].abs() <= tol).collect();

    let parts = d.parts();
    let c = v[0];
    let near = |x: f64, y: f64| (x - y).abs() <= tol;

    for i in 0..d.k * d.m1 {
        let zeta = hv[parts[0].start + i];
        let g1 = gv[parts[0].start + i];
        let zi = hv[parts[1].start + i];
        if zero(g1.abs()) && zero(zi) && zeta < 1.0 - tol && zeta >= -tol {
            s.psi1.push(i);
            if zero(zeta.abs()) {
                s.psi1_zero.push(i);
            } else {
                s.psi1_plus.push(i);
            }
        } else if zero(zeta.abs()) && pos(g1) && zero(zi.abs()) {
            s.psi2.push(i);
        } else if near(zeta, 1.0) && zero(g1.abs()) && pos(zi) {
            s.psi3.push(i);
        } else {
            s.unclassified_validation.push(i);
        }
    }

    for i in 0..d.k * d.m2 {
        let alpha = hv[parts[2].start + i];
        let g3 = gv[parts[2].start + i];
        let xi = hv[parts[3].start + i];
        let (a0, g0, x0) = (zero(alpha.abs()), zero(g3.abs()), zero(xi.abs()));
        if a0 && g0 && x0 {
            s.lambda1.push(i);
        } else if a0 && pos(g3) && x0 {
            s.lambda2.push(i);
        } else if pos(alpha) && alpha <= c + tol && g0 && x0 {
            s.lambda3.push(i);
            if near(alpha, c) {
                s.lambda3_c.push(i);
            } else {
                s.lambda3_plus.push(i);
            }
        } else if near(alpha, c) && g0 && pos(xi) {
            s.lambda_u.push(i);
        } else {
            s.unclassified_training.push(i);
        }
    }

    let ws = p.reconstruct_w(v)?;
    let wbar = &v[d.w_bar()];
    for t in 0..d.k {
        for j in 0..d.n {
            let i = t * d.n + j;
            let w = ws[t][j];
            let wb = wbar[j];
            let beta = hv[parts[4].start + i];
            let gamma = hv[parts[5].start + i];
            let at_lower = near(w, -wb);
            let at_upper = near(w, wb);
            let below_upper = w < wb - tol;
            let above_lower = w > -wb + tol;
            if at_lower && below_upper && beta >= -tol && zero(gamma.abs()) {
                s.pi1.push(i);
                if zero(beta.abs()) {
                    s.pi1_zero.push(i);
                } else {
                    s.pi1_plus.push(i);
                }
            } else if above_lower && below_upper && zero(beta.abs()) && zero(gamma.abs()) {
                s.pi2.push(i);
            } else if above_lower && at_upper && zero(beta.abs()) && gamma >= -tol {
                s.pi3.push(i);
                if zero(gamma.abs()) {
                    s.pi3_zero.push(i);
                } else {
                    s.pi3_plus.push(i);
                }
            } else {
                s.unclassified_bounds.push(i);
            }
        }
    }
    Ok(s)
}

/// Checkable hypotheses of the MPEC-MFCQ result for this problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcqReport {
    /// Per fold: `−w̄ < w^t < w̄` with margin `tol`.
    pub strict_interior: Vec<bool>,
    /// Rows of `B` tested (`Λ1 ∪ Λ3`, zero-based).
    pub rows: Vec<usize>,
    pub rank_b_sub: usize,
    pub full_row_rank: bool,
    pub positive_definite: bool,
    /// Smallest eigenvalue of `(B B^T)` restricted to `Λ1 ∪ Λ3`; `None` when empty.
    pub min_eigenvalue: Option<f64>,
    pub singular_values: Vec<f64>,
    /// True when every hypothesis holds.
    pub satisfied: bool,
}

pub fn mfcq_diagnostic(p: &MpecProblem, v: &[f64], tol: f64) -> Result<MfcqReport> {
    let d = p.dims;
    let sets = classify_index_sets(p, v, tol)?;
    let ws = p.reconstruct_w(v)?;
    let wbar = &v[d.w_bar()];
    let strict_interior: Vec<bool> = ws
        .iter()
        .map(|w| {
            w.iter()
                .zip(wbar)
                .all(|(wj, wb)| *wj > -wb + tol && *wj < wb - tol)
        })
        .collect();

    let rows = sets.lambda13();
    let b_sub = sub_b(p, &rows);
    let (rank, singular_values, min_eig) = if rows.is_empty() {
        (0, Vec::new(), None)
    } else {
        let svd = b_sub.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let smax = sv.first().copied().unwrap_or(0.0);
        let rank = sv.iter().filter(|&&s| s > tol * smax && s > 0.0).count();
        let gram = &b_sub * b_sub.transpose();
        let eig = SymmetricEigen::new(gram);
        let min_eig = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (rank, sv, Some(min_eig))
    };
    let full_row_rank = rank == rows.len();
    let positive_definite = min_eig.is_none_or(|e| e > tol);
    let satisfied = strict_interior.iter().all(|&b| b) && positive_definite;
    Ok(MfcqReport {
        strict_interior,
        rows,
        rank_b_sub: rank,
        full_row_rank,
        positive_definite,
        min_eigenvalue: min_eig,
        singular_values,
        satisfied,
    })
}

/// Rows `rows` of the block-diagonal `B ∈ R^{K m2 × K n}`.
pub fn sub_b(p: &MpecProblem, rows: &[usize]) -> DMatrix<f64> {
    let d = p.dims;
    let mut m = DMatrix::zeros(rows.len(), d.k * d.n);
    for (r, &i) in rows.iter().enumerate() {
        let (t, local) = (i / d.m2, i % d.m2);
        for j in 0..d.n {
            m[(r, t * d.n + j)] = p.b_blocks[t][local][j];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn dimension_formula() {
        let dims = MpecDims {
            k: 2,
            m1: 1,
            m2: 2,
            n: 2,
        };
        assert_eq!(dims.m_bar(), 20);
        assert_eq!(dims.nv(), 23);
        assert_eq!(dims.gamma().end, 23);
    }

    #[test]
    fn origin_evaluates_to_offsets() {
        let p = fixtures::example1_problem();
        let v = vec![0.0; p.dims.nv()];
        assert_eq!(p.eval_G(&v).unwrap(), p.affine.a);
        assert!(p.eval_H(&v).unwrap().iter().all(|&h| h == 0.0));
        assert_eq!(p.eval_g(&v).unwrap(), p.affine.b);
        assert!(p.eval_G(&v[1..]).is_err());
    }

    #[test]
    fn objective_is_mean_of_zeta() {
        let p = fixtures::example1_problem();
        let mut v = vec![0.0; p.dims.nv()];
        v[p.dims.zeta()].iter_mut().for_each(|z| *z = 1.0);
        approx::assert_abs_diff_eq!(p.eval_f(&v).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn c_upper_bound_row() {
        let p = fixtures::example1_problem();
        let mut v = vec![0.0; p.dims.nv()];
        v[0] = p.bounds.c_ub;
        assert_eq!(p.eval_g(&v).unwrap()[0], 0.0);
    }

    #[test]
    fn example1_b_rows_are_signed_points() {
        let p = fixtures::example1_problem();
        let rows = sub_b(&p, &[0, 2, 4, 6]);
        let expected = DMatrix::from_row_slice(
            4,
            6,
            &[
                0., -1., -1., 0., 0., 0., //
                1., 0., 1., 0., 0., 0., //
                0., 0., 0., 1., 0., -1., //
                0., 0., 0., 0., -1., 1.,
            ],
        );
        assert_eq!(rows, expected);
    }

    #[test]
    fn reconstruct_w_single_term() {
        let bounds = Bounds::uniform(0.1, 10.0, 0.1, 5.0, 2);
        let p = assemble_from_blocks(
            vec![vec![vec![1.0, 1.0]], vec![vec![1.0, 0.0]]],
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            2,
            bounds,
        )
        .unwrap();
        let mut v = vec![0.0; p.dims.nv()];
        assert_eq!(p.reconstruct_w(&v).unwrap(), vec![vec![0.0; 2]; 2]);
        v[p.dims.alpha().start] = 2.0;
        assert_eq!(p.reconstruct_w(&v).unwrap()[0], vec![2.0, 0.0]);
    }

    #[test]
    fn classification_basic_cases() {
        let bounds = Bounds::uniform(0.1, 10.0, 0.1, 5.0, 1);
        let p = assemble_from_blocks(
            vec![vec![vec![1.0]], vec![vec![1.0]]],
            vec![vec![vec![1.0]], vec![vec![1.0]]],
            1,
            bounds,
        )
        .unwrap();
        // z_0 = 0.5 makes G_0 = 0.5 while H_0 = ζ_0 = 0 -> I_H
        let mut v = vec![0.0; p.dims.nv()];
        v[p.dims.z().start] = 0.5;
        let s = classify_index_sets(&p, &v, 1e-6).unwrap();
        assert!(s.i_h.contains(&0));
        // G_0 = H_0 = 0 -> biactive
        let v = vec![0.0; p.dims.nv()];
        let s = classify_index_sets(&p, &v, 1e-6).unwrap();
        assert!(s.i_gh.contains(&0));
    }

    #[test]
    fn example1_index_sets_and_rank() {
        let (p, v) = fixtures::example1_point();
        let s = classify_index_sets(&p, &v, 1e-6).unwrap();
        assert_eq!(s.lambda13(), vec![0, 2, 4, 6]);
        let r = mfcq_diagnostic(&p, &v, 1e-6).unwrap();
        assert_eq!(r.rank_b_sub, 4);
        assert!(r.full_row_rank);
        assert!(r.positive_definite);
        assert!(r.strict_interior.iter().all(|&b| b));
    }

    #[test]
    fn empty_lambda13_is_vacuous() {
        let (p, mut v) = fixtures::example1_point();
        // scale α down so no training point sits on the margin any more
        let d = p.dims;
        v[d.alpha()].iter_mut().for_each(|a| *a = 0.0);
        v[d.xi()].iter_mut().for_each(|x| *x = 5.0);
        let r = mfcq_diagnostic(&p, &v, 1e-6).unwrap();
        assert!(r.rows.is_empty());
        assert!(r.full_row_rank && r.positive_definite);
    }

    #[test]
    fn duplicate_rows_lose_rank() {
        let bounds = Bounds::uniform(0.1, 10.0, 0.1, 5.0, 2);
        let dup = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let p = assemble_from_blocks(
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            vec![dup.clone(), dup],
            2,
            bounds,
        )
        .unwrap();
        // α = 0.25 on both duplicates puts both on the margin (w = (0.5, 0.5))
        let mut v = vec![0.0; p.dims.nv()];
        v[0] = 1.0;
        v[p.dims.w_bar()].iter_mut().for_each(|w| *w = 1.0);
        v[p.dims.alpha()].iter_mut().for_each(|a| *a = 0.25);
        let r = mfcq_diagnostic(&p, &v, 1e-9).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rank_b_sub, 2);
        assert!(!r.full_row_rank);
        assert!(!r.positive_definite);
    }

    #[test]
    fn dump_load_round_trip() {
        let p = fixtures::example1_problem();
        let q = MpecProblem::load(&p.dump()).unwrap();
        assert_eq!(q.dims, p.dims);
        assert_eq!(q.bounds, p.bounds);
        assert_eq!(q.affine.p, p.affine.p);
        assert_eq!(q.affine.b, p.affine.b);
        assert!(MpecProblem::load("grlpn-mpec 2\n").is_err());
    }
}
