//! Linear programming for the LP-Newton subproblems.
//!
//! Small problems go to a dense bounded-variable primal simplex (two phases,
//! Dantzig pricing, Bland's rule after a run of degenerate pivots). Large
//! sparse problems go to HiGHS.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

/// `min c^T x  s.t.  row_i(x) {<=,>=,=} rhs_i,  lower <= x <= upper`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
    pub kinds: Vec<RowKind>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    /// `n` variables with zero cost and bounds `[0, ∞)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            row_ptr: vec![0],
            ..Default::default()
        }
    }

    pub fn ncols(&self) -> usize {
        self.objective.len()
    }

    pub fn nrows(&self) -> usize {
        self.kinds.len()
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    /// Adds a row; duplicate columns are summed and zeros dropped.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], kind: RowKind, rhs: f64) {
        let mut c: Vec<(usize, f64)> = coefs.to_vec();
        c.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < c.len() {
            let col = c[i].0;
            assert!(col < self.ncols(), "LP column {col} out of range");
            let mut acc = 0.0;
            while i < c.len() && c[i].0 == col {
                acc += c[i].1;
                i += 1;
            }
            if acc != 0.0 {
                self.row_idx.push(col);
                self.row_val.push(acc);
            }
        }
        self.row_ptr.push(self.row_idx.len());
        self.kinds.push(kind);
        self.rhs.push(rhs);
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.row_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.row_val[r].iter().copied())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of a row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        for i in 0..self.nrows() {
            let ax: f64 = self.row(i).map(|(c, v)| v * x[c]).sum();
            let d = ax - self.rhs[i];
            worst = worst.max(match self.kinds[i] {
                RowKind::Le => d,
                RowKind::Ge => -d,
                RowKind::Eq => d.abs(),
            });
        }
        worst
    }

    /// CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let mut s = String::from("Minimize\n obj:");
        let term = |s: &mut String, v: f64, j: usize| {
            let _ = write!(s, " {} {:?} x{j}", if v < 0.0 { '-' } else { '+' }, v.abs());
        };
        let mut any = false;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                term(&mut s, c, j);
                any = true;
            }
        }
        if !any {
            s.push_str(" 0 x0");
        }
        s.push_str("\nSubject To\n");
        for i in 0..self.nrows() {
            let _ = write!(s, " r{i}:");
            let mut empty = true;
            for (j, v) in self.row(i) {
                term(&mut s, v, j);
                empty = false;
            }
            if empty {
                s.push_str(" 0 x0");
            }
            let op = match self.kinds[i] {
                RowKind::Le => "<=",
                RowKind::Ge => ">=",
                RowKind::Eq => "=",
            };
            let _ = writeln!(s, " {op} {:?}", self.rhs[i]);
        }
        s.push_str("Bounds\n");
        for j in 0..self.ncols() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                let _ = writeln!(s, " x{j} free");
            } else {
                let fmt = |x: f64| {
                    if x == f64::INFINITY {
                        "+inf".to_string()
                    } else if x == f64::NEG_INFINITY {
                        "-inf".to_string()
                    } else {
                        format!("{x:?}")
                    }
                };
                let _ = writeln!(s, " {} <= x{j} <= {}", fmt(lo), fmt(hi));
            }
        }
        s.push_str("End\n");
        s
    }
}

/// Beale's cycling example; optimum −5/4.
pub fn beale() -> LinearProgram {
    let mut lp = LinearProgram::new(4);
    lp.objective = vec![-0.75, 20.0, -0.5, 6.0];
    lp.add_row(
        &[(0, 0.25), (1, -8.0), (2, -1.0), (3, 9.0)],
        RowKind::Le,
        0.0,
    );
    lp.add_row(
        &[(0, 0.5), (1, -12.0), (2, -0.5), (3, 3.0)],
        RowKind::Le,
        0.0,
    );
    lp.add_row(&[(2, 1.0)], RowKind::Le, 1.0);
    lp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Lower bound on the optimum certified by the final reduced costs
    /// (dense backend only).
    pub dual_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpBackend {
    Dense,
    Sparse,
    /// Dense below `dense_limit` tableau entries, sparse above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub backend: LpBackend,
    pub dense_limit: usize,
    /// Pivot cap; `None` means `50·(nvars + nrows)`.
    pub max_iterations: Option<usize>,
    pub tol: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            backend: LpBackend::Auto,
            dense_limit: 400_000,
            max_iterations: None,
            tol: 1e-9,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    for j in 0..lp.ncols() {
        if lp.lower[j] > lp.upper[j] || lp.lower[j].is_nan() || lp.upper[j].is_nan() {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![],
                objective: f64::NAN,
                iterations: 0,
                dual_bound: None,
            });
        }
    }
    let dense = match opts.backend {
        LpBackend::Dense => true,
        LpBackend::Sparse => false,
        LpBackend::Auto => (lp.nrows() + 1) * (lp.ncols() + 2 * lp.nrows() + 1) <= opts.dense_limit,
    };
    if dense {
        return DenseSimplex::build(lp, opts).run();
    }
    match solve_sparse(lp, opts) {
        // last resort when the sparse solver gives up on a degenerate subproblem
        Err(Error::Internal(msg))
            if opts.backend == LpBackend::Auto
                && (lp.nrows() + 1) * (lp.ncols() + 2 * lp.nrows() + 1)
                    <= 10 * opts.dense_limit =>
        {
            log::warn!("{msg}; retrying with the dense simplex");
            DenseSimplex::build(lp, opts).run()
        }
        other => other,
    }
}

fn solve_sparse(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    use highs::{HighsModelStatus as H, RowProblem, Sense};
    let mut p = RowProblem::default();
    let cols: Vec<_> = (0..lp.ncols())
        .map(|j| p.add_column(lp.objective[j], lp.lower[j]..=lp.upper[j]))
        .collect();
    for i in 0..lp.nrows() {
        let row: Vec<_> = lp.row(i).map(|(j, v)| (cols[j], v)).collect();
        let r = lp.rhs[i];
        match lp.kinds[i] {
            RowKind::Le => p.add_row(..=r, row),
            RowKind::Ge => p.add_row(r.., row),
            RowKind::Eq => p.add_row(r..=r, row),
        }
    }
    let mut model = p
        .try_optimise(Sense::Minimise)
        .map_err(|e| Error::Internal(format!("sparse LP backend: {e:?}")))?;
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("primal_feasibility_tolerance", opts.tol.max(1e-10));
    model.set_option("dual_feasibility_tolerance", opts.tol.max(1e-10));
    if let Some(cap) = opts.max_iterations {
        model.set_option("simplex_iteration_limit", cap.min(i32::MAX as usize) as i32);
    }
    let solved = model
        .try_solve()
        .map_err(|e| Error::Internal(format!("sparse LP backend: {e:?}")))?;
    let fail = |status| LpSolution {
        status,
        x: vec![],
        objective: f64::NAN,
        iterations: solved.simplex_iteration_count().max(0) as usize,
        dual_bound: None,
    };
    match solved.status() {
        H::Optimal => {
            let x = solved.get_solution().columns().to_vec();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: lp.objective_value(&x),
                x,
                iterations: solved.simplex_iteration_count().max(0) as usize,
                dual_bound: None,
            })
        }
        H::Infeasible => Ok(fail(LpStatus::Infeasible)),
        H::Unbounded | H::UnboundedOrInfeasible => Ok(fail(LpStatus::Unbounded)),
        H::ReachedIterationLimit | H::ReachedTimeLimit => Ok(fail(LpStatus::IterationLimit)),
        other => Err(Error::Internal(format!("sparse LP backend: {other:?}"))),
    }
}

/// How an original variable maps to the nonnegative internal columns.
#[derive(Debug, Clone, Copy)]
enum ColMap {
    /// `x = lo + y`
    Shift(usize, f64),
    /// `x = hi − y`
    Mirror(usize, f64),
    /// `x = y⁺ − y⁻`
    Split(usize, usize),
}

/// Bounded-variable tableau simplex on `min c^T y, T y = β, 0 <= y <= ub`.
struct DenseSimplex {
    m: usize,
    ncols: usize,
    tab: Vec<f64>,
    beta: Vec<f64>,
    rhs0: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    artificial_start: usize,
    map: Vec<ColMap>,
    const_obj: f64,
    tol: f64,
    max_iter: usize,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

impl DenseSimplex {
    fn build(lp: &LinearProgram, opts: &LpOptions) -> Self {
        let n = lp.ncols();
        let m = lp.nrows();
        let mut map = Vec::with_capacity(n);
        let mut ub = Vec::new();
        let mut cost = Vec::new();
        let mut const_obj = 0.0;
        for j in 0..n {
            let (lo, hi, c) = (lp.lower[j], lp.upper[j], lp.objective[j]);
            if lo.is_finite() {
                map.push(ColMap::Shift(ub.len(), lo));
                ub.push(hi - lo);
                cost.push(c);
                const_obj += c * lo;
            } else if hi.is_finite() {
                map.push(ColMap::Mirror(ub.len(), hi));
                ub.push(f64::INFINITY);
                cost.push(-c);
                const_obj += c * hi;
            } else {
                map.push(ColMap::Split(ub.len(), ub.len() + 1));
                ub.extend([f64::INFINITY; 2]);
                cost.extend([c, -c]);
            }
        }
        let nstruct = ub.len();
        let nslack = lp.kinds.iter().filter(|k| **k != RowKind::Eq).count();
        let artificial_start = nstruct + nslack;
        let ncols = artificial_start + m;
        let mut tab = vec![0.0; m * ncols];
        let mut beta = vec![0.0; m];
        let mut slack = nstruct;
        for i in 0..m {
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            let mut rhs = lp.rhs[i];
            for (j, v) in lp.row(i) {
                match map[j] {
                    ColMap::Shift(k, lo) => {
                        row[k] += v;
                        rhs -= v * lo;
                    }
                    ColMap::Mirror(k, hi) => {
                        row[k] -= v;
                        rhs -= v * hi;
                    }
                    ColMap::Split(a, b) => {
                        row[a] += v;
                        row[b] -= v;
                    }
                }
            }
            match lp.kinds[i] {
                RowKind::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                RowKind::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                RowKind::Eq => {}
            }
            if rhs < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
                rhs = -rhs;
            }
            row[artificial_start + i] = 1.0;
            beta[i] = rhs;
        }
        ub.extend(std::iter::repeat_n(f64::INFINITY, nslack + m));
        cost.extend(std::iter::repeat_n(0.0, nslack + m));
        let basis: Vec<usize> = (artificial_start..ncols).collect();
        let mut is_basic = vec![false; ncols];
        basis.iter().for_each(|&b| is_basic[b] = true);
        Self {
            m,
            ncols,
            tab,
            rhs0: beta.clone(),
            beta,
            ub,
            cost,
            basis,
            at_upper: vec![false; ncols],
            is_basic,
            artificial_start,
            map,
            const_obj,
            tol: opts.tol,
            max_iter: opts.max_iterations.unwrap_or(50 * (n + m).max(1)),
            iterations: 0,
        }
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut d = c.to_vec();
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.ncols..(i + 1) * self.ncols];
                d.iter_mut().zip(row).for_each(|(dj, t)| *dj -= cb * t);
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let nc = self.ncols;
        let piv = self.tab[r * nc + q];
        for x in &mut self.tab[r * nc..(r + 1) * nc] {
            *x /= piv;
        }
        let prow: Vec<f64> = self.tab[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f != 0.0 {
                for (x, p) in self.tab[i * nc..(i + 1) * nc].iter_mut().zip(&prow) {
                    *x -= f * p;
                }
                self.tab[i * nc + q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            d.iter_mut().zip(&prow).for_each(|(x, p)| *x -= f * p);
            d[q] = 0.0;
        }
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = q;
        self.is_basic[q] = true;
    }

    /// Runs primal simplex with costs `c` over columns `< active_cols`.
    fn phase(&mut self, c: &[f64], active_cols: usize) -> PhaseEnd {
        let mut d = self.reduced_costs(c);
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iter {
                return PhaseEnd::Limit;
            }
            let bland = degenerate_run >= 10;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..active_cols {
                if self.is_basic[j] || self.ub[j] == 0.0 {
                    continue;
                }
                let score = if self.at_upper[j] { d[j] } else { -d[j] };
                if score > self.tol {
                    if bland {
                        enter = Some((j, score));
                        break;
                    }
                    if enter.is_none_or(|(_, s)| score > s) {
                        enter = Some((j, score));
                    }
                }
            }
            let Some((q, _)) = enter else {
                return PhaseEnd::Optimal;
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let nc = self.ncols;
            let mut theta = self.ub[q];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let a = self.tab[i * nc + q] * dir;
                let b = self.basis[i];
                let lim = if a > self.tol {
                    self.beta[i].max(0.0) / a
                } else if a < -self.tol && self.ub[b].is_finite() {
                    (self.ub[b] - self.beta[i]).max(0.0) / -a
                } else {
                    continue;
                };
                let better = match leave {
                    None => lim < theta,
                    Some((li, _)) => {
                        lim < theta - 1e-12
                            || (lim <= theta + 1e-12
                                && if bland {
                                    b < self.basis[li]
                                } else {
                                    a.abs() > (self.tab[li * nc + q]).abs()
                                })
                    }
                };
                if better {
                    theta = lim;
                    leave = Some((i, a < 0.0));
                }
            }
            if theta == f64::INFINITY {
                return PhaseEnd::Unbounded;
            }
            self.iterations += 1;
            degenerate_run = if theta <= 1e-12 {
                degenerate_run + 1
            } else {
                0
            };
            for i in 0..self.m {
                self.beta[i] -= theta * dir * self.tab[i * nc + q];
            }
            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some((r, to_upper)) => {
                    let leaving = self.basis[r];
                    let entering_value = if self.at_upper[q] {
                        self.ub[q] - theta
                    } else {
                        theta
                    };
                    self.at_upper[leaving] = to_upper;
                    self.at_upper[q] = false;
                    self.pivot(r, q, &mut d);
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let fail = |status, it| LpSolution {
            status,
            x: vec![],
            objective: f64::NAN,
            iterations: it,
            dual_bound: None,
        };
        let mut c1 = vec![0.0; self.ncols];
        c1[self.artificial_start..]
            .iter_mut()
            .for_each(|c| *c = 1.0);
        match self.phase(&c1, self.ncols) {
            PhaseEnd::Limit => return Ok(fail(LpStatus::IterationLimit, self.iterations)),
            PhaseEnd::Unbounded => {
                return Err(Error::Internal("phase one reported unbounded".into()))
            }
            PhaseEnd::Optimal => {}
        }
        let infeas: f64 = (0..self.m)
            .filter(|&i| self.basis[i] >= self.artificial_start)
            .map(|i| self.beta[i])
            .sum();
        let scale = 1.0 + self.beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > 1e-8 * scale {
            return Ok(fail(LpStatus::Infeasible, self.iterations));
        }
        // drive zero-level artificials out where a structural pivot exists
        let nc = self.ncols;
        let mut dummy = vec![0.0; nc];
        for r in 0..self.m {
            if self.basis[r] < self.artificial_start {
                continue;
            }
            let q = (0..self.artificial_start)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&a, &b| {
                    self.tab[r * nc + a]
                        .abs()
                        .partial_cmp(&self.tab[r * nc + b].abs())
                        .unwrap()
                });
            if let Some(q) = q {
                if self.tab[r * nc + q].abs() > 1e-9 {
                    let value = if self.at_upper[q] { self.ub[q] } else { 0.0 };
                    self.pivot(r, q, &mut dummy);
                    self.beta[r] = value;
                    self.at_upper[q] = false;
                }
            }
        }
        for j in self.artificial_start..nc {
            self.ub[j] = 0.0;
        }
        let cost = self.cost.clone();
        match self.phase(&cost, self.artificial_start) {
            PhaseEnd::Limit => return Ok(fail(LpStatus::IterationLimit, self.iterations)),
            PhaseEnd::Unbounded => return Ok(fail(LpStatus::Unbounded, self.iterations)),
            PhaseEnd::Optimal => {}
        }
        let mut y: Vec<f64> = (0..nc)
            .map(|j| if self.at_upper[j] { self.ub[j] } else { 0.0 })
            .collect();
        for i in 0..self.m {
            y[self.basis[i]] = self.beta[i];
        }
        let x: Vec<f64> = self
            .map
            .iter()
            .map(|m| match *m {
                ColMap::Shift(k, lo) => lo + y[k],
                ColMap::Mirror(k, hi) => hi - y[k],
                ColMap::Split(a, b) => y[a] - y[b],
            })
            .collect();
        let objective = self.const_obj
            + self.cost[..self.artificial_start]
                .iter()
                .zip(&y)
                .map(|(c, v)| c * v)
                .sum::<f64>();
        // duals are read off the artificial columns (unit columns, zero cost)
        let d = self.reduced_costs(&self.cost);
        let mut bound = self.const_obj;
        for i in 0..self.m {
            bound -= d[self.artificial_start + i] * self.rhs0[i];
        }
        for j in 0..self.artificial_start {
            if d[j] < 0.0 {
                bound += d[j] * self.ub[j];
            }
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            iterations: self.iterations,
            dual_bound: bound.is_finite().then_some(bound),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense() -> LpOptions {
        LpOptions {
            backend: LpBackend::Dense,
            ..Default::default()
        }
    }

    fn sparse() -> LpOptions {
        LpOptions {
            backend: LpBackend::Sparse,
            ..Default::default()
        }
    }

    /// A cycling variant with a different optimum.
    fn beale_variant() -> LinearProgram {
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![-0.75, 150.0, -0.02, 6.0];
        lp.add_row(
            &[(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
            RowKind::Le,
            0.0,
        );
        lp.add_row(
            &[(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
            RowKind::Le,
            0.0,
        );
        lp.add_row(&[(2, 1.0)], RowKind::Le, 1.0);
        lp
    }

    #[test]
    fn cycling_examples_terminate_at_optimum() {
        for o in [dense(), sparse()] {
            let s = solve_lp(&beale(), &o).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective + 1.25).abs() < 1e-9, "{}", s.objective);
            let s = solve_lp(&beale_variant(), &o).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
        }
    }

    #[test]
    fn dual_bound_certifies_optimum() {
        let s = solve_lp(&beale(), &dense()).unwrap();
        let b = s.dual_bound.unwrap();
        assert!((b - s.objective).abs() <= 1e-6 * (1.0 + s.objective.abs()));
    }

    #[test]
    fn trivial_examples() {
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        lp.set_bounds(0, 0.0, 10.0);
        lp.add_row(&[(0, 1.0)], RowKind::Le, 1.0);
        let s = solve_lp(&lp, &dense()).unwrap();
        assert_eq!((s.x[0], s.objective), (1.0, -1.0));
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[(0, 1.0)], RowKind::Le, -1.0);
        assert_eq!(
            solve_lp(&lp, &dense()).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x0 − x1, x0 free, x1 <= 3, x0 >= x1 − 5, x0 + x1 <= 10
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, -1.0];
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, 3.0);
        lp.add_row(&[(0, 1.0), (1, -1.0)], RowKind::Ge, -5.0);
        lp.add_row(&[(0, 1.0), (1, 1.0)], RowKind::Le, 10.0);
        let s = solve_lp(&lp, &dense()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 5.0).abs() < 1e-9);
        assert!(lp.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(&[(0, 1.0)], RowKind::Ge, 2.0);
        lp.add_row(&[(0, 1.0)], RowKind::Le, 1.0);
        assert_eq!(
            solve_lp(&lp, &dense()).unwrap().status,
            LpStatus::Infeasible
        );
        assert_eq!(
            solve_lp(&lp, &sparse()).unwrap().status,
            LpStatus::Infeasible
        );
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![-1.0];
        assert_eq!(solve_lp(&lp, &dense()).unwrap().status, LpStatus::Unbounded);
        assert_eq!(
            solve_lp(&lp, &sparse()).unwrap().status,
            LpStatus::Unbounded
        );
    }

    #[test]
    fn equality_rows_and_redundancy() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 2.0, 3.0];
        lp.add_row(&[(0, 1.0), (1, 1.0), (2, 1.0)], RowKind::Eq, 1.0);
        lp.add_row(&[(0, 2.0), (1, 2.0), (2, 2.0)], RowKind::Eq, 2.0);
        lp.add_row(&[(2, 1.0)], RowKind::Ge, 0.25);
        let s = solve_lp(&lp, &dense()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.5).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_path() {
        // max x0 + x1 with boxes only, reached purely by bound flips
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.set_bounds(0, -1.0, 2.0);
        lp.set_bounds(1, 0.5, 1.5);
        lp.add_row(&[(0, 1.0), (1, 1.0)], RowKind::Le, 100.0);
        let s = solve_lp(&lp, &dense()).unwrap();
        assert!((s.objective + 3.5).abs() < 1e-12);
    }

    #[test]
    fn lp_format_export() {
        let txt = beale().to_lp_format();
        assert!(txt.starts_with("Minimize"));
        assert!(txt.contains("r2: + 1.0 x2 <= 1.0"), "{txt}");
        assert!(txt.trim_end().ends_with("End"));
    }
}
