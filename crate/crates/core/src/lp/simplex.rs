//! Bounded-variable dual simplex on a dense tableau.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` whose bounds encode the
//! row sense, so the system is `[A | -I] z = 0` with box bounds on `z`. The
//! starting basis is all logicals. Infinite bounds are replaced by artificial
//! ones (±1e7) when a nonbasic variable needs to sit on them; a variable left
//! on an artificial bound with a nonzero reduced cost at the end signals an
//! unbounded problem.

use alloc::vec;
use alloc::vec::Vec;

use super::model::{MilpModel, Sense};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

const ARTIFICIAL: f64 = 1e7;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Smallest pivot accepted by the anti-cycling rule, relative to the
/// largest eligible entry of the pivot row.
const BLAND_RELATIVE_PIVOT: f64 = 1e-7;
const RESIDUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 5000;
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values (meaningful for `Optimal`).
    pub x: Vec<f64>,
    /// Objective including the model constant.
    pub objective: f64,
    /// Row multipliers `y` with `c - Aᵀy = reduced_costs`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Reusable dual simplex state. Bounds and objective may be changed between
/// solves; the last basis is kept as a warm start.
#[derive(Debug, Clone)]
pub struct DualSimplex {
    n: usize,
    m: usize,
    ncol: usize,
    rows: Vec<Vec<(usize, f64)>>,
    tab: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    obj_constant: f64,
    lo: Vec<f64>,
    up: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    val: Vec<f64>,
    pivots_since_refactor: usize,
    pub iteration_limit: usize,
    iterations: usize,
}

impl DualSimplex {
    /// Set up the LP relaxation of `model` (integrality is ignored).
    pub fn new(model: &MilpModel) -> Result<DualSimplex> {
        model.validate()?;
        let n = model.num_vars();
        let m = model.num_cons();
        let ncol = n + m;
        let mut lo = Vec::with_capacity(ncol);
        let mut up = Vec::with_capacity(ncol);
        for v in &model.vars {
            lo.push(v.lower);
            up.push(v.upper);
        }
        for c in &model.cons {
            let (l, u) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lo.push(l);
            up.push(u);
        }
        let mut tab = vec![0.0; m * ncol];
        for (i, c) in model.cons.iter().enumerate() {
            for &(j, a) in &c.terms {
                tab[i * ncol + j] = -a;
            }
            tab[i * ncol + n + i] = 1.0;
        }
        let mut cost = model.objective.clone();
        cost.resize(ncol, 0.0);
        let mut s = DualSimplex {
            n,
            m,
            ncol,
            rows: model.cons.iter().map(|c| c.terms.clone()).collect(),
            tab,
            d: cost.clone(),
            cost,
            obj_constant: model.obj_constant,
            lo,
            up,
            state: vec![State::Lower; ncol],
            basis: (n..ncol).collect(),
            val: vec![0.0; ncol],
            pivots_since_refactor: 0,
            iteration_limit: 20 * ncol + 10_000,
            iterations: 0,
        };
        for i in 0..m {
            s.state[n + i] = State::Basic;
        }
        for j in 0..n {
            s.state[j] = s.pick_state(j);
        }
        s.compute_basics();
        Ok(s)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.up[j])
    }

    /// Change the bounds of structural variable `j`.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n);
        self.lo[j] = lower;
        self.up[j] = upper;
        if self.state[j] != State::Basic {
            self.state[j] = self.keep_or_pick_state(j);
        }
    }

    /// Replace the structural objective (the constant is kept).
    pub fn set_objective(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.n);
        self.cost[..self.n].copy_from_slice(c);
        self.recompute_reduced_costs();
        for j in 0..self.ncol {
            if self.state[j] != State::Basic {
                self.state[j] = self.keep_or_pick_state(j);
            }
        }
    }

    pub fn set_objective_constant(&mut self, c0: f64) {
        self.obj_constant = c0;
    }

    fn work_lo(&self, j: usize) -> f64 {
        if self.lo[j].is_finite() {
            self.lo[j]
        } else {
            -ARTIFICIAL
        }
    }

    fn work_up(&self, j: usize) -> f64 {
        if self.up[j].is_finite() {
            self.up[j]
        } else {
            ARTIFICIAL
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lo[j] == self.up[j]
    }

    fn pick_state(&self, j: usize) -> State {
        let d = self.d[j];
        if self.is_fixed(j) {
            State::Lower
        } else if d > DUAL_TOL {
            State::Lower
        } else if d < -DUAL_TOL {
            State::Upper
        } else if self.lo[j].is_finite() {
            State::Lower
        } else if self.up[j].is_finite() {
            State::Upper
        } else {
            State::Zero
        }
    }

    fn keep_or_pick_state(&self, j: usize) -> State {
        if self.is_fixed(j) {
            return State::Lower;
        }
        let d = self.d[j];
        let (lo_fin, up_fin) = (self.lo[j].is_finite(), self.up[j].is_finite());
        let consistent = match self.state[j] {
            State::Lower => d >= -DUAL_TOL && (lo_fin || d > DUAL_TOL),
            State::Upper => d <= DUAL_TOL && (up_fin || d < -DUAL_TOL),
            State::Zero => d.abs() <= DUAL_TOL && !lo_fin && !up_fin,
            State::Basic => true,
        };
        if consistent {
            self.state[j]
        } else {
            self.pick_state(j)
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.work_lo(j),
            State::Upper => self.work_up(j),
            State::Zero => 0.0,
            State::Basic => self.val[j],
        }
    }

    fn compute_basics(&mut self) {
        let mut xn = vec![0.0; self.ncol];
        for j in 0..self.ncol {
            if self.state[j] != State::Basic {
                let v = self.nonbasic_value(j);
                self.val[j] = v;
                xn[j] = v;
            }
        }
        let nz: Vec<usize> = (0..self.ncol).filter(|&j| xn[j] != 0.0).collect();
        for i in 0..self.m {
            let row = &self.tab[i * self.ncol..(i + 1) * self.ncol];
            let mut s = 0.0;
            for &j in &nz {
                s -= row[j] * xn[j];
            }
            self.val[self.basis[i]] = s;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.ncol..(i + 1) * self.ncol];
                for (dj, t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        self.d = d;
    }

    /// Rebuild the tableau from the original rows and the current basis.
    fn refactor(&mut self) -> Result<()> {
        let (m, n, ncol) = (self.m, self.n, self.ncol);
        if m == 0 {
            return Ok(());
        }
        // Column k of B is column basis[k] of [A | -I].
        let mut b = Matrix::zeros(m, m);
        for (k, &col) in self.basis.iter().enumerate() {
            if col >= n {
                b[(col - n, k)] = -1.0;
            }
        }
        let mut pos = vec![usize::MAX; ncol];
        for (k, &col) in self.basis.iter().enumerate() {
            pos[col] = k;
        }
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                if pos[j] != usize::MAX {
                    b[(i, pos[j])] = a;
                }
            }
        }
        let lu = Lu::factor(&b)?;
        // Column k of B^{-1} is B^{-1} e_k.
        let mut binv = Matrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for k in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[k] = 1.0;
            let col = lu.solve(&e);
            for i in 0..m {
                binv[(i, k)] = col[i];
            }
        }
        let mut tab = vec![0.0; m * ncol];
        for (k, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                for i in 0..m {
                    tab[i * ncol + j] += binv[(i, k)] * a;
                }
            }
        }
        for k in 0..m {
            for i in 0..m {
                tab[i * ncol + n + k] = -binv[(i, k)];
            }
        }
        self.tab = tab;
        self.recompute_reduced_costs();
        self.compute_basics();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Rebuild the tableau, falling back to the all-logical basis when the
    /// current one has become numerically singular.
    fn refactor_or_reset(&mut self) {
        if self.refactor().is_ok() {
            return;
        }
        let (m, n, ncol) = (self.m, self.n, self.ncol);
        let mut tab = vec![0.0; m * ncol];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                tab[i * ncol + j] = -a;
            }
            tab[i * ncol + n + i] = 1.0;
        }
        self.tab = tab;
        self.basis = (n..ncol).collect();
        for i in 0..m {
            self.state[n + i] = State::Basic;
        }
        self.recompute_reduced_costs();
        for j in 0..n {
            self.state[j] = self.pick_state(j);
        }
        self.compute_basics();
        self.pivots_since_refactor = 0;
    }

    fn residual_ok(&self) -> bool {
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * self.val[j]).sum();
            let r = self.val[self.n + i];
            if (act - r).abs() > RESIDUAL_TOL * (1.0 + r.abs()) {
                return false;
            }
        }
        true
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let alpha = self.tab[r * ncol + q];
        {
            let row = &mut self.tab[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                if *v != 0.0 {
                    *v /= alpha;
                }
            }
            row[q] = 1.0;
        }
        let nz: Vec<usize> = (0..ncol).filter(|&j| self.tab[r * ncol + j] != 0.0).collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&j| self.tab[r * ncol + j]).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * ncol + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * ncol..(i + 1) * ncol];
            for (&j, &p) in nz.iter().zip(&pivot_row) {
                row[j] -= f * p;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (&j, &p) in nz.iter().zip(&pivot_row) {
                self.d[j] -= f * p;
            }
        }
        self.d[q] = 0.0;
        self.pivots_since_refactor += 1;
    }

    /// Dual simplex iterations until primal feasibility, infeasibility or
    /// the iteration limit.
    fn dual_phase(&mut self, budget: &mut usize) -> LpStatus {
        let mut stall = 0usize;
        loop {
            if *budget == 0 {
                return LpStatus::IterationLimit;
            }
            let bland = stall >= STALL_LIMIT;
            // Leaving row.
            let mut r = usize::MAX;
            let mut best = 0.0;
            for i in 0..self.m {
                let b = self.basis[i];
                let x = self.val[b];
                let viol = (self.lo[b] - x).max(x - self.up[b]);
                if viol > PRIMAL_TOL {
                    if bland {
                        if r == usize::MAX || b < self.basis[r] {
                            r = i;
                        }
                    } else if viol > best {
                        best = viol;
                        r = i;
                    }
                }
            }
            if r == usize::MAX {
                return LpStatus::Optimal;
            }
            let p = self.basis[r];
            let above = self.val[p] > self.up[p];
            let target = if above { self.up[p] } else { self.lo[p] };
            let s = if above { 1.0 } else { -1.0 };
            let row = &self.tab[r * self.ncol..(r + 1) * self.ncol];

            let eligible = |j: usize, st: State, a: f64| -> Option<f64> {
                if st == State::Basic || a.abs() <= PIVOT_TOL || self.lo[j] == self.up[j] {
                    return None;
                }
                let at = s * a;
                let dj = self.d[j];
                match st {
                    State::Lower if at > 0.0 => Some(dj.max(0.0)),
                    State::Upper if at < 0.0 => Some((-dj).max(0.0)),
                    State::Zero => Some(dj.abs()),
                    _ => None,
                }
            };

            let mut q = usize::MAX;
            if bland {
                let amax = (0..self.ncol)
                    .filter(|&j| eligible(j, self.state[j], row[j]).is_some())
                    .map(|j| row[j].abs())
                    .fold(0.0, f64::max);
                let floor = BLAND_RELATIVE_PIVOT * amax;
                let mut best_ratio = f64::INFINITY;
                for j in 0..self.ncol {
                    if row[j].abs() < floor {
                        continue;
                    }
                    if let Some(dj) = eligible(j, self.state[j], row[j]) {
                        let ratio = dj / row[j].abs();
                        if ratio < best_ratio - 1e-15 {
                            best_ratio = ratio;
                            q = j;
                        }
                    }
                }
            } else {
                let mut theta_max = f64::INFINITY;
                for j in 0..self.ncol {
                    if let Some(dj) = eligible(j, self.state[j], row[j]) {
                        theta_max = theta_max.min((dj + DUAL_TOL) / row[j].abs());
                    }
                }
                let mut best_alpha = 0.0;
                for j in 0..self.ncol {
                    if let Some(dj) = eligible(j, self.state[j], row[j]) {
                        let a = row[j].abs();
                        if dj / a <= theta_max && a > best_alpha {
                            best_alpha = a;
                            q = j;
                        }
                    }
                }
            }
            if q == usize::MAX {
                return LpStatus::Infeasible;
            }
            let alpha = row[q];
            let theta_d = eligible(q, self.state[q], alpha).unwrap_or(0.0) / alpha.abs();
            let delta = self.val[p] - target;
            if theta_d * delta.abs() > 1e-12 {
                stall = 0;
            } else {
                stall += 1;
            }
            // Primal update.
            let dx = delta / alpha;
            for i in 0..self.m {
                let t = self.tab[i * self.ncol + q];
                if t != 0.0 && i != r {
                    let b = self.basis[i];
                    self.val[b] -= t * dx;
                }
            }
            self.val[q] += dx;
            self.val[p] = target;
            self.pivot(r, q);
            self.basis[r] = q;
            self.state[q] = State::Basic;
            self.state[p] = if above { State::Upper } else { State::Lower };
            *budget -= 1;
            self.iterations += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor_or_reset();
            }
        }
    }

    /// Solve from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus> {
        self.iterations = 0;
        let mut budget = self.iteration_limit;
        let mut refactored = false;
        self.compute_basics();
        loop {
            let status = self.dual_phase(&mut budget);
            if status == LpStatus::IterationLimit {
                return Ok(status);
            }
            if status == LpStatus::Infeasible {
                if !refactored && self.pivots_since_refactor > 0 {
                    self.refactor_or_reset();
                    refactored = true;
                    continue;
                }
                return Ok(status);
            }
            // Primal feasible: restore dual feasibility lost to tolerances.
            let mut flipped = false;
            for j in 0..self.ncol {
                if self.state[j] == State::Basic || self.is_fixed(j) {
                    continue;
                }
                let new = self.pick_state(j);
                let bad = match self.state[j] {
                    State::Lower => self.d[j] < -DUAL_TOL,
                    State::Upper => self.d[j] > DUAL_TOL,
                    State::Zero => self.d[j].abs() > DUAL_TOL,
                    State::Basic => false,
                };
                if bad {
                    self.state[j] = new;
                    flipped = true;
                }
            }
            if flipped {
                if budget == 0 {
                    return Ok(LpStatus::IterationLimit);
                }
                budget -= 1;
                self.compute_basics();
                continue;
            }
            if !self.residual_ok() {
                if refactored {
                    return Err(Error::Singular("simplex tableau drift"));
                }
                self.refactor_or_reset();
                refactored = true;
                continue;
            }
            for j in 0..self.ncol {
                let on_artificial = match self.state[j] {
                    State::Lower => !self.lo[j].is_finite(),
                    State::Upper => !self.up[j].is_finite(),
                    _ => false,
                };
                if on_artificial && self.d[j].abs() > DUAL_TOL {
                    return Ok(LpStatus::Unbounded);
                }
            }
            return Ok(LpStatus::Optimal);
        }
    }

    pub fn x(&self) -> Vec<f64> {
        self.val[..self.n].to_vec()
    }

    pub fn objective(&self) -> f64 {
        self.obj_constant
            + self.cost[..self.n]
                .iter()
                .zip(&self.val[..self.n])
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn solution(&self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            x: self.x(),
            objective: self.objective(),
            duals: self.d[self.n..].to_vec(),
            reduced_costs: self.d[..self.n].to_vec(),
            iterations: self.iterations,
        }
    }
}

/// Solve the LP relaxation of `model` from scratch.
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution> {
    let mut s = DualSimplex::new(model)?;
    let status = s.solve()?;
    Ok(s.solution(status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::model::VarTag;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};

    fn var(m: &mut MilpModel, lo: f64, hi: f64) -> usize {
        let k = m.num_vars();
        m.add_continuous(alloc::format!("x{k}"), lo, hi, VarTag::Untagged)
    }

    #[test]
    fn small_maximization() {
        let mut m = MilpModel::new("t");
        let a = var(&mut m, 0.0, 1.0);
        let b = var(&mut m, 0.0, 1.0);
        m.add_objective(a, -1.0);
        m.add_objective(b, -1.0);
        m.add_constraint("cap", &[(a, 1.0), (b, 1.0)], Sense::Le, 1.5);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_rows_pick_box_corner() {
        let mut m = MilpModel::new("t");
        let a = var(&mut m, -2.0, 3.0);
        let b = var(&mut m, 1.0, 4.0);
        m.add_objective(a, 1.0);
        m.add_objective(b, -2.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, alloc::vec![-2.0, 4.0]);
    }

    #[test]
    fn degenerate_with_redundant_equality() {
        let mut m = MilpModel::new("t");
        let x: Vec<usize> = (0..4).map(|_| var(&mut m, 0.0, f64::INFINITY)).collect();
        for (k, &j) in x.iter().enumerate() {
            m.add_objective(j, -((k + 1) as f64));
        }
        let all: Vec<(usize, f64)> = x.iter().map(|&j| (j, 1.0)).collect();
        m.add_constraint("sum", &all, Sense::Eq, 1.0);
        let twice: Vec<(usize, f64)> = x.iter().map(|&j| (j, 2.0)).collect();
        m.add_constraint("sum2", &twice, Sense::Eq, 2.0);
        m.add_constraint("a", &[(x[0], 1.0), (x[1], 1.0)], Sense::Le, 1.0);
        m.add_constraint("b", &[(x[2], 1.0), (x[3], 1.0)], Sense::Le, 1.0);
        m.add_constraint("c", &[(x[3], 1.0)], Sense::Le, 1.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 4.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded_detected() {
        let mut m = MilpModel::new("t");
        let a = var(&mut m, 0.0, 1.0);
        m.add_constraint("r", &[(a, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);

        let mut m = MilpModel::new("t");
        let a = var(&mut m, 0.0, f64::INFINITY);
        let b = var(&mut m, f64::NEG_INFINITY, f64::INFINITY);
        m.add_objective(a, -1.0);
        m.add_constraint("r", &[(a, 1.0), (b, -1.0)], Sense::Le, 0.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_ranges() {
        // min |x - 3| via epigraph with a free x.
        let mut m = MilpModel::new("t");
        let x = var(&mut m, f64::NEG_INFINITY, f64::INFINITY);
        let t = var(&mut m, f64::NEG_INFINITY, f64::INFINITY);
        m.add_objective(t, 1.0);
        m.add_constraint("p", &[(t, 1.0), (x, -1.0)], Sense::Ge, -3.0);
        m.add_constraint("n", &[(t, 1.0), (x, 1.0)], Sense::Ge, 3.0);
        m.add_constraint("cap", &[(x, 1.0)], Sense::Le, 2.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    /// Independent optimality certificate: primal feasibility, dual sign
    /// conditions, stationarity and zero duality gap.
    fn assert_kkt(m: &MilpModel, s: &LpSolution) {
        assert!(m.max_violation(&s.x).amount <= 1e-7);
        let n = m.num_vars();
        let mut grad = m.objective.clone();
        for (i, c) in m.cons.iter().enumerate() {
            for &(j, a) in &c.terms {
                grad[j] -= a * s.duals[i];
            }
        }
        for j in 0..n {
            assert!((grad[j] - s.reduced_costs[j]).abs() <= 1e-7, "stationarity {j}");
            let v = &m.vars[j];
            let (x, d) = (s.x[j], s.reduced_costs[j]);
            if d > 1e-7 {
                assert!((x - v.lower).abs() <= 1e-7, "reduced cost sign {j}");
            }
            if d < -1e-7 {
                assert!((x - v.upper).abs() <= 1e-7, "reduced cost sign {j}");
            }
        }
        for (i, c) in m.cons.iter().enumerate() {
            let y = s.duals[i];
            let slack = c.activity(&s.x) - c.rhs;
            match c.sense {
                Sense::Le => assert!(y <= 1e-7 && (y.abs() <= 1e-7 || slack.abs() <= 1e-7)),
                Sense::Ge => assert!(y >= -1e-7 && (y.abs() <= 1e-7 || slack.abs() <= 1e-7)),
                Sense::Eq => {}
            }
        }
    }

    #[test]
    fn random_lps_satisfy_kkt() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let mut m = MilpModel::new("r");
            let n = rng.random_range(2..12);
            for _ in 0..n {
                let lo = rng.random_range(-2.0..0.0);
                let hi = rng.random_range(0.0..2.0);
                let j = var(&mut m, lo, hi);
                m.add_objective(j, rng.random_range(-1.0..1.0));
            }
            for k in 0..rng.random_range(0..10) {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                for j in 0..n {
                    if rng.random_bool(0.6) {
                        terms.push((j, rng.random_range(-1.0..1.0)));
                    }
                }
                let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.random_range(0..3)];
                // Keep x = 0 feasible so every instance has an optimum.
                let rhs = match sense {
                    Sense::Le => rng.random_range(0.0..1.0),
                    Sense::Ge => rng.random_range(-1.0..0.0),
                    Sense::Eq => 0.0,
                };
                m.add_constraint(alloc::format!("c{k}"), &terms, sense, rhs);
            }
            let s = solve_lp(&m).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert_kkt(&m, &s);
        }
    }

    #[test]
    fn warm_start_after_bound_and_objective_changes() {
        let mut m = MilpModel::new("t");
        let a = var(&mut m, 0.0, 1.0);
        let b = var(&mut m, 0.0, 1.0);
        m.add_objective(a, -1.0);
        m.add_objective(b, -2.0);
        m.add_constraint("cap", &[(a, 1.0), (b, 1.0)], Sense::Le, 1.5);
        let mut s = DualSimplex::new(&m).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective() + 2.5).abs() < 1e-12);
        s.set_bounds(b, 0.0, 0.25);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective() + 1.5).abs() < 1e-12);
        s.set_objective(&[1.0, 1.0]);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!(s.objective().abs() < 1e-12);
    }
}
