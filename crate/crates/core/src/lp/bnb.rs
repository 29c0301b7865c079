//! Best-first branch-and-bound over the dual simplex.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::model::{MilpModel, VarKind};
use super::simplex::{DualSimplex, LpStatus};
use crate::error::Result;
use crate::Stopwatch;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpConfig {
    /// Relative gap at which the search stops.
    pub gap: f64,
    pub node_limit: usize,
    pub time_limit_secs: f64,
    pub int_tol: f64,
    /// Run the diving heuristic at the root and every this many nodes.
    pub dive_every: usize,
}

impl Default for MilpConfig {
    fn default() -> Self {
        MilpConfig {
            gap: 0.01,
            node_limit: 100_000,
            time_limit_secs: 600.0,
            int_tol: 1e-6,
            dive_every: 50,
        }
    }
}

impl MilpConfig {
    /// Run to proven optimality with no budget other than `node_limit`.
    pub fn exact() -> Self {
        MilpConfig {
            gap: 0.0,
            time_limit_secs: f64::INFINITY,
            ..MilpConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    GapReached,
    BudgetExhausted,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent; empty when none was found.
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_secs: f64,
    pub lp_iterations: usize,
    /// Global lower bound after each processed node.
    pub bound_trace: Vec<f64>,
    /// Nodes dropped because their LP hit the iteration limit.
    pub numerical_drops: usize,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }
}

pub fn relative_gap(obj: f64, bound: f64) -> f64 {
    if !obj.is_finite() {
        return f64::INFINITY;
    }
    ((obj - bound) / obj.abs().max(1e-9)).max(0.0)
}

struct Node {
    key: f64,
    seq: usize,
    fixes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smaller key (then newer node) has priority.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    lp: DualSimplex,
    binaries: Vec<usize>,
    root_bounds: Vec<(f64, f64)>,
    cfg: MilpConfig,
    incumbent: Vec<f64>,
    inc_obj: f64,
    lp_iterations: usize,
}

impl Search<'_> {
    /// True when a subtree with lower bound `bound` cannot beat the incumbent.
    fn dominated(&self, bound: f64) -> bool {
        self.inc_obj.is_finite() && bound >= self.inc_obj - 1e-9 * (1.0 + self.inc_obj.abs())
    }

    fn apply(&mut self, fixes: &[(usize, f64, f64)]) {
        for (k, &j) in self.binaries.iter().enumerate() {
            let (lo, hi) = self.root_bounds[k];
            self.lp.set_bounds(j, lo, hi);
        }
        for &(j, lo, hi) in fixes {
            self.lp.set_bounds(j, lo, hi);
        }
    }

    fn solve(&mut self) -> Result<LpStatus> {
        let st = self.lp.solve()?;
        self.lp_iterations += self.lp.iterations();
        Ok(st)
    }

    /// Branching candidate: ReLU binaries first, then the most fractional,
    /// then the lowest index.
    fn pick_fractional(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(bool, f64, usize)> = None;
        for &j in &self.binaries {
            let f = x[j] - crate::math::floor(x[j]);
            let frac = f.min(1.0 - f);
            if frac <= self.cfg.int_tol {
                continue;
            }
            let relu = self.model.vars[j].tag.is_relu();
            let better = match best {
                None => true,
                Some((br, bf, _)) => (relu && !br) || (relu == br && frac > bf + 1e-12),
            };
            if better {
                best = Some((relu, frac, j));
            }
        }
        best.map(|b| b.2)
    }

    fn offer(&mut self, x: &[f64]) -> bool {
        let mut cand = x.to_vec();
        for &j in &self.binaries {
            cand[j] = crate::math::round(cand[j]);
        }
        if self.model.max_violation(&cand).amount > 1e-6 {
            cand = x.to_vec();
            if self.model.max_violation(&cand).amount > 1e-6 {
                return false;
            }
        }
        let obj = self.model.objective_value(&cand);
        if obj < self.inc_obj {
            self.inc_obj = obj;
            self.incumbent = cand;
            true
        } else {
            false
        }
    }

    /// Fix integral binaries, round the preferred fractional one
    /// (commitment variables up, others to nearest) and re-solve.
    fn dive(&mut self, base: &[(usize, f64, f64)], x0: &[f64]) -> Result<()> {
        let mut fixes = base.to_vec();
        let mut x = x0.to_vec();
        for _ in 0..=self.binaries.len() {
            let j = match self.pick_fractional(&x) {
                None => {
                    self.offer(&x);
                    return Ok(());
                }
                Some(j) => j,
            };
            for &b in &self.binaries {
                let r = crate::math::round(x[b]);
                if (x[b] - r).abs() <= self.cfg.int_tol {
                    fixes.push((b, r, r));
                }
            }
            let v = if self.model.vars[j].tag.is_commitment() {
                1.0
            } else {
                crate::math::round(x[j])
            };
            fixes.push((j, v, v));
            self.apply(&fixes);
            if self.solve()? != LpStatus::Optimal || self.dominated(self.lp.objective()) {
                return Ok(());
            }
            x = self.lp.x();
        }
        Ok(())
    }
}

/// Solve `model` to the configured gap or budget.
pub fn solve_milp(
    model: &MilpModel,
    cfg: &MilpConfig,
    clock: &dyn Stopwatch,
) -> Result<MilpSolution> {
    let lp = DualSimplex::new(model)?;
    let binaries: Vec<usize> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let root_bounds = binaries.iter().map(|&j| (model.vars[j].lower, model.vars[j].upper)).collect();
    let mut s = Search {
        model,
        lp,
        binaries,
        root_bounds,
        cfg: *cfg,
        incumbent: Vec::new(),
        inc_obj: f64::INFINITY,
        lp_iterations: 0,
    };
    let start = clock.elapsed_secs();
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        key: f64::NEG_INFINITY,
        seq: 0,
        fixes: Vec::new(),
    });
    let mut seq = 1usize;
    let mut nodes = 0usize;
    let mut trace = Vec::new();
    let mut drops = 0usize;
    let mut status = None;
    let mut last_bound = f64::NEG_INFINITY;

    loop {
        let lb = heap.peek().map_or(s.inc_obj, |nd| nd.key.min(s.inc_obj));
        if nodes > 0 {
            last_bound = last_bound.max(lb);
            trace.push(last_bound);
        }
        let Some(node) = heap.pop() else { break };
        if s.dominated(node.key) {
            continue;
        }
        if s.inc_obj.is_finite() && nodes > 0 && relative_gap(s.inc_obj, lb) <= cfg.gap {
            heap.push(node);
            status = Some(MilpStatus::GapReached);
            break;
        }
        if nodes >= cfg.node_limit || clock.elapsed_secs() - start > cfg.time_limit_secs {
            heap.push(node);
            status = Some(MilpStatus::BudgetExhausted);
            break;
        }
        s.apply(&node.fixes);
        let st = s.solve()?;
        nodes += 1;
        match st {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if nodes == 1 {
                    status = Some(MilpStatus::Unbounded);
                    break;
                }
                continue;
            }
            LpStatus::IterationLimit => {
                drops += 1;
                continue;
            }
            LpStatus::Optimal => {}
        }
        let bound = s.lp.objective().max(node.key);

        if s.dominated(bound) {
            continue;
        }
        let x = s.lp.x();
        let Some(j) = s.pick_fractional(&x) else {
            s.offer(&x);
            continue;
        };
        if nodes == 1 || (cfg.dive_every > 0 && nodes % cfg.dive_every == 0) {
            s.dive(&node.fixes, &x)?;
        }
        if s.dominated(bound) {
            continue;
        }
        let (lo, hi) = (model.vars[j].lower, model.vars[j].upper);
        for (a, b) in [(lo, 0.0), (1.0, hi)] {
            let mut fixes = node.fixes.clone();
            fixes.push((j, a, b));
            heap.push(Node {
                key: bound,
                seq,
                fixes,
            });
            seq += 1;
        }
    }

    let open_bound = heap.iter().map(|nd| nd.key).fold(f64::INFINITY, f64::min);
    let best_bound = if s.inc_obj.is_finite() {
        open_bound.min(s.inc_obj).max(last_bound.min(s.inc_obj))
    } else {
        open_bound.max(last_bound)
    };
    let status = match status {
        Some(st) => st,
        None if s.inc_obj.is_finite() && drops == 0 => MilpStatus::Optimal,
        None if s.inc_obj.is_finite() => MilpStatus::BudgetExhausted,
        None if drops == 0 => MilpStatus::Infeasible,
        None => MilpStatus::BudgetExhausted,
    };
    let objective = s.inc_obj;
    Ok(MilpSolution {
        status,
        gap: relative_gap(objective, best_bound),
        x: s.incumbent,
        objective,
        best_bound,
        nodes,
        wall_secs: clock.elapsed_secs() - start,
        lp_iterations: s.lp_iterations,
        bound_trace: trace,
        numerical_drops: drops,
    })
}
