//! Newton power flow, sequential-LP AC optimal power flow and the
//! multi-period feasibility check of commitment schedules.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::grid::{Network, OperatingPoint};
use crate::instance::{CostCurve, UcInstance};
use crate::jacobian::{self, FlowDirection};
use crate::linalg::{Lu, Matrix};
use crate::lp::{DualSimplex, LpStatus, MilpModel, Sense, VarTag};
use crate::schedule::{self, UcSchedule};
use crate::Stopwatch;

/// Tolerance used to classify an operating point as feasible (p.u.).
pub const FEAS_TOL: f64 = 1e-6;

/// One generator (or condenser) as seen by a single-period dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub bus: usize,
    pub on: bool,
    pub p_lo: f64,
    pub p_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// Production cost as a function of total active output.
    pub cost: Option<CostCurve>,
}

/// Single-period dispatch problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSpec {
    pub gens: Vec<GenSpec>,
    pub pd: Vec<f64>,
    pub qd: Vec<f64>,
    pub vmin: Vec<f64>,
    pub vmax: Vec<f64>,
}

impl DispatchSpec {
    pub fn validate(&self, net: &Network) -> Result<()> {
        check_len("active loads", net.n, self.pd.len())?;
        check_len("reactive loads", net.n, self.qd.len())?;
        check_len("voltage lower bounds", net.n, self.vmin.len())?;
        check_len("voltage upper bounds", net.n, self.vmax.len())?;
        for (k, g) in self.gens.iter().enumerate() {
            if g.bus >= net.n {
                return Err(Error::validation(format!("dispatch generator {k} at unknown bus")));
            }
            if !(g.p_lo <= g.p_hi) || !(g.q_lo <= g.q_hi) {
                return Err(Error::validation(format!("dispatch generator {k} has empty bounds")));
            }
            if !g.on && (g.p_lo != 0.0 || g.p_hi != 0.0 || g.q_lo != 0.0 || g.q_hi != 0.0) {
                return Err(Error::validation(format!(
                    "dispatch generator {k} is off but has nonzero bounds"
                )));
            }
        }
        for b in 0..net.n {
            if !(self.vmin[b] <= self.vmax[b]) {
                return Err(Error::validation("empty voltage band"));
            }
        }
        Ok(())
    }

    /// Units of `inst` at period `t` with the given on/off status, followed
    /// by the always-on condensers.
    pub fn for_period(net: &Network, inst: &UcInstance, t: usize, on: &[bool]) -> DispatchSpec {
        let mut gens = Vec::new();
        for (g, unit) in inst.units.iter().enumerate() {
            let on = on[g];
            gens.push(GenSpec {
                bus: unit.bus,
                on,
                p_lo: if on { unit.pmin } else { 0.0 },
                p_hi: if on { unit.pmax } else { 0.0 },
                q_lo: if on { unit.qmin } else { 0.0 },
                q_hi: if on { unit.qmax } else { 0.0 },
                cost: Some(unit.cost.clone()),
            });
        }
        for c in &inst.condensers {
            gens.push(GenSpec {
                bus: c.bus,
                on: true,
                p_lo: 0.0,
                p_hi: 0.0,
                q_lo: c.qmin,
                q_hi: c.qmax,
                cost: None,
            });
        }
        DispatchSpec {
            gens,
            pd: inst.pd[t].clone(),
            qd: inst.qd[t].clone(),
            vmin: net.vmin.clone(),
            vmax: net.vmax.clone(),
        }
    }
}

/// Solve the power flow with the reference bus as slack and every bus with
/// an on generator as a PV bus. Generators inject their lower active bound
/// (set `p_lo = p_hi` to fix a setpoint).
pub fn newton_power_flow(
    net: &Network,
    spec: &DispatchSpec,
    v0: &[f64],
    theta0: &[f64],
) -> Result<OperatingPoint> {
    spec.validate(net)?;
    check_len("initial voltages", net.n, v0.len())?;
    check_len("initial angles", net.n, theta0.len())?;
    let n = net.n;
    let mut pv = vec![false; n];
    let mut p_spec: Vec<f64> = spec.pd.iter().map(|d| -d).collect();
    let q_spec: Vec<f64> = spec.qd.iter().map(|d| -d).collect();
    for g in spec.gens.iter().filter(|g| g.on) {
        pv[g.bus] = true;
        p_spec[g.bus] += g.p_lo;
    }
    let angle_buses: Vec<usize> = (0..n).filter(|&b| b != net.ref_bus).collect();
    let mag_buses: Vec<usize> = (0..n).filter(|&b| b != net.ref_bus && !pv[b]).collect();
    let (mut v, mut th) = (v0.to_vec(), theta0.to_vec());
    th[net.ref_bus] = 0.0;
    for it in 0..=50 {
        let op = net.eval_power_flow(&v, &th)?;
        let mut mis: Vec<f64> = angle_buses.iter().map(|&b| op.p_inj[b] - p_spec[b]).collect();
        mis.extend(mag_buses.iter().map(|&b| op.q_inj[b] - q_spec[b]));
        if mis.iter().any(|x| !x.is_finite()) {
            break;
        }
        if crate::math::norm_inf(&mis) <= 1e-8 {
            return Ok(op);
        }
        if it == 50 {
            break;
        }
        let full = jacobian::injection_jacobian(net, &v, &th)?;
        let rows: Vec<usize> = angle_buses
            .iter()
            .copied()
            .chain(mag_buses.iter().map(|&b| n + b))
            .collect();
        let cols: Vec<usize> = angle_buses
            .iter()
            .map(|&b| n + b)
            .chain(mag_buses.iter().copied())
            .collect();
        let jac = Matrix::from_fn(rows.len(), cols.len(), |i, j| full[(rows[i], cols[j])]);
        let lu = Lu::factor(&jac)?;
        let step = lu.solve(&mis);
        for (k, &c) in cols.iter().enumerate() {
            if c >= n {
                th[c - n] -= step[k];
            } else {
                v[c] -= step[k];
            }
        }
        if v.iter().any(|x| !(*x > 0.0)) {
            break;
        }
    }
    Err(Error::NoSolution("Newton power flow did not converge in 50 iterations".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpfObjective {
    MinCost,
    FeasibilityOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlpConfig {
    pub trust_radius: f64,
    pub shrink: f64,
    pub expand: f64,
    pub max_radius: f64,
    pub max_iterations: usize,
    pub step_tol: f64,
    pub feas_tol: f64,
    pub time_limit_secs: f64,
}

impl Default for SlpConfig {
    fn default() -> Self {
        SlpConfig {
            trust_radius: 0.1,
            shrink: 0.5,
            expand: 2.0,
            max_radius: 0.5,
            max_iterations: 60,
            step_tol: 1e-7,
            feas_tol: FEAS_TOL,
            time_limit_secs: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    NoSolution,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
            Verdict::NoSolution => "no_solution",
        }
    }
}

/// Result of an AC feasibility or OPF solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub verdict: Verdict,
    /// Largest independently evaluated violation per period (p.u.).
    pub violations: Vec<f64>,
    /// Production (plus start-up, for schedules) cost.
    pub objective: f64,
    pub iterations: usize,
    /// Realized operating points; present when feasible.
    pub points: Vec<OperatingPoint>,
    /// Dispatch `[t][gen]`.
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// Reserve `[t][unit]` (multi-period checks only).
    pub reserve: Vec<Vec<f64>>,
    pub message: alloc::string::String,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Linear coupling between periods: caps, ramps and reserve for the first
/// `units` generators of every period's spec.
#[derive(Debug, Clone)]
struct Coupling {
    pmin: Vec<f64>,
    /// Right-hand side of the start-up/shut-down caps on `p^Δ + r` and on
    /// `p^Δ` alone, `[g][t]`.
    cap_pr: Vec<Vec<f64>>,
    cap_p: Vec<Vec<Option<f64>>>,
    y: Vec<Vec<bool>>,
    ramp_up: Vec<f64>,
    ramp_down: Vec<f64>,
    initial_delta: Vec<f64>,
    reserve: Vec<f64>,
    fixed_cost: f64,
}

impl Coupling {
    fn new(inst: &UcInstance, sched: &UcSchedule) -> Coupling {
        let big_t = inst.horizon;
        let mut cap_pr = Vec::new();
        let mut cap_p = Vec::new();
        for (g, unit) in inst.units.iter().enumerate() {
            let span = unit.pmax - unit.pmin;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for t in 0..big_t {
                let y = f64::from(u8::from(sched.y[g][t]));
                let u = f64::from(u8::from(sched.u[g][t]));
                let wn = if t + 1 < big_t {
                    f64::from(u8::from(sched.w[g][t + 1]))
                } else {
                    0.0
                };
                let su = (unit.pmax - unit.startup_cap) * u;
                let sd = (unit.pmax - unit.shutdown_cap) * wn;
                if unit.min_up >= 2 {
                    a.push(span * y - su - sd);
                    b.push(None);
                } else {
                    a.push(span * y - su);
                    b.push(Some(span * y - sd));
                }
            }
            cap_pr.push(a);
            cap_p.push(b);
        }
        let mut fixed_cost = 0.0;
        if let Ok(total) = schedule::schedule_cost(inst, &zero_dispatch(sched)) {
            // Start-up costs only: subtract the fixed production part.
            let fixed: f64 = inst
                .units
                .iter()
                .enumerate()
                .map(|(g, u)| {
                    sched.y[g].iter().filter(|&&on| on).count() as f64 * u.cost.cost_at_min()
                })
                .sum();
            fixed_cost = total - fixed;
        }
        Coupling {
            pmin: inst.units.iter().map(|u| u.pmin).collect(),
            cap_pr,
            cap_p,
            y: sched.y.clone(),
            ramp_up: inst.units.iter().map(|u| u.ramp_up).collect(),
            ramp_down: inst.units.iter().map(|u| u.ramp_down).collect(),
            initial_delta: inst.units.iter().map(|u| u.initial_delta()).collect(),
            reserve: inst.reserve.clone(),
            fixed_cost,
        }
    }

    fn units(&self) -> usize {
        self.pmin.len()
    }

    fn delta(&self, g: usize, t: usize, p: f64) -> f64 {
        if self.y[g][t] {
            p - self.pmin[g]
        } else {
            p
        }
    }

    /// Largest violation of the linear coupling rows.
    fn violation(&self, p: &[Vec<f64>], r: &[Vec<f64>]) -> Vec<f64> {
        let big_t = p.len();
        let mut out = vec![0.0f64; big_t];
        for t in 0..big_t {
            let mut total_r = 0.0;
            for g in 0..self.units() {
                let d = self.delta(g, t, p[t][g]);
                let rv = r[t][g];
                total_r += rv;
                let mut worst = (-rv).max(d + rv - self.cap_pr[g][t]);
                if let Some(c) = self.cap_p[g][t] {
                    worst = worst.max(d - c);
                }
                let prev = if t == 0 {
                    self.initial_delta[g]
                } else {
                    self.delta(g, t - 1, p[t - 1][g])
                };
                worst = worst.max(d + rv - prev - self.ramp_up[g]);
                worst = worst.max(prev - d - self.ramp_down[g]);
                out[t] = out[t].max(worst);
            }
            out[t] = out[t].max(self.reserve[t] - total_r);
        }
        out
    }
}

fn zero_dispatch(sched: &UcSchedule) -> UcSchedule {
    let mut s = sched.clone();
    for row in &mut s.p_delta {
        row.iter_mut().for_each(|v| *v = 0.0);
    }
    s
}

/// Convex cost as a maximum of affine pieces `(intercept, slope)`.
fn cost_pieces(curve: &CostCurve) -> Vec<(f64, f64)> {
    let pts = &curve.points;
    let mut out = Vec::new();
    for w in pts.windows(2) {
        if w[1].0 > w[0].0 {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            out.push((w[0].1 - slope * w[0].0, slope));
        }
    }
    if out.is_empty() {
        out.push((pts[0].1, 0.0));
    }
    out
}

fn eval_cost(curve: &CostCurve, p: f64) -> f64 {
    cost_pieces(curve)
        .iter()
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a + b * p))
}

/// Independent static-constraint check of one period: exact AC balance,
/// thermal, voltage, angle-difference and generator limits.
pub fn period_violation(
    net: &Network,
    spec: &DispatchSpec,
    op: &OperatingPoint,
    p: &[f64],
    q: &[f64],
) -> f64 {
    let mut worst = 0.0f64;
    let mut bal_p: Vec<f64> = spec.pd.iter().map(|d| -d).collect();
    let mut bal_q: Vec<f64> = spec.qd.iter().map(|d| -d).collect();
    for (k, g) in spec.gens.iter().enumerate() {
        bal_p[g.bus] += p[k];
        bal_q[g.bus] += q[k];
        worst = worst
            .max(g.p_lo - p[k])
            .max(p[k] - g.p_hi)
            .max(g.q_lo - q[k])
            .max(q[k] - g.q_hi);
    }
    for b in 0..net.n {
        worst = worst
            .max((op.p_inj[b] - bal_p[b]).abs())
            .max((op.q_inj[b] - bal_q[b]).abs())
            .max(spec.vmin[b] - op.v[b])
            .max(op.v[b] - spec.vmax[b]);
    }
    for l in 0..net.m {
        worst = worst
            .max(op.s_ft[l] - net.smax[l])
            .max(op.s_tf[l] - net.smax[l]);
        let d = op.theta[net.from[l]] - op.theta[net.to[l]];
        worst = worst.max(net.ang_min[l] - d).max(d - net.ang_max[l]);
    }
    worst.max(op.theta[net.ref_bus].abs())
}

/// State of one SLP iterate for one period.
#[derive(Debug, Clone)]
struct Iterate {
    v: Vec<f64>,
    th: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
}

struct PeriodVars {
    dv: Vec<(usize, usize)>,
    dth: Vec<Option<(usize, usize)>>,
    p: Vec<usize>,
    q: Vec<usize>,
    r: Vec<usize>,
}

struct SlpProblem<'a> {
    net: &'a Network,
    specs: &'a [DispatchSpec],
    coupling: Option<&'a Coupling>,
    objective: OpfObjective,
    mu: f64,
    prox: f64,
}

impl SlpProblem<'_> {
    fn cost(&self, it: &[Iterate]) -> f64 {
        if self.objective == OpfObjective::FeasibilityOnly {
            return 0.0;
        }
        let mut c = self.coupling.map_or(0.0, |cp| cp.fixed_cost);
        for (t, spec) in self.specs.iter().enumerate() {
            for (k, g) in spec.gens.iter().enumerate() {
                if let (true, Some(curve)) = (g.on, &g.cost) {
                    c += eval_cost(curve, it[t].p[k]);
                }
            }
        }
        c
    }

    /// Exact-penalty merit: cost plus `mu` times AC balance and thermal
    /// violations.
    fn merit(&self, it: &[Iterate]) -> Result<(f64, Vec<OperatingPoint>)> {
        let mut pen = 0.0;
        let mut ops = Vec::with_capacity(it.len());
        for (t, spec) in self.specs.iter().enumerate() {
            let op = self.net.eval_power_flow(&it[t].v, &it[t].th)?;
            let mut bp: Vec<f64> = spec.pd.iter().map(|d| -d).collect();
            let mut bq: Vec<f64> = spec.qd.iter().map(|d| -d).collect();
            for (k, g) in spec.gens.iter().enumerate() {
                bp[g.bus] += it[t].p[k];
                bq[g.bus] += it[t].q[k];
            }
            for b in 0..self.net.n {
                pen += (op.p_inj[b] - bp[b]).abs() + (op.q_inj[b] - bq[b]).abs();
            }
            for l in 0..self.net.m {
                pen += (op.s_ft[l] - self.net.smax[l]).max(0.0);
                pen += (op.s_tf[l] - self.net.smax[l]).max(0.0);
            }
            ops.push(op);
        }
        Ok((self.cost(it) + self.mu * pen, ops))
    }

    /// Build the trust-region LP around `it`. Returns the model, the variable
    /// layout and the model merit offset (the constant part of the LP
    /// objective that is not part of the merit).
    fn build_lp(&self, it: &[Iterate], ops: &[OperatingPoint], radius: f64) -> Result<(MilpModel, Vec<PeriodVars>, Vec<usize>)> {
        let net = self.net;
        let n = net.n;
        let mut m = MilpModel::new("slp");
        let mut layout = Vec::new();
        let mut prox_vars = Vec::new();
        for (t, spec) in self.specs.iter().enumerate() {
            let cur = &it[t];
            let op = &ops[t];
            let mut dv = Vec::with_capacity(n);
            for b in 0..n {
                let up = radius.min(spec.vmax[b] - cur.v[b]).max(0.0);
                let dn = radius.min(cur.v[b] - spec.vmin[b]).max(0.0);
                let a = m.add_continuous(format!("dvp{b}_{t}"), 0.0, up, VarTag::Untagged);
                let c = m.add_continuous(format!("dvm{b}_{t}"), 0.0, dn, VarTag::Untagged);
                dv.push((a, c));
                prox_vars.push(a);
                prox_vars.push(c);
            }
            let mut dth = Vec::with_capacity(n);
            for b in 0..n {
                if b == net.ref_bus {
                    dth.push(None);
                    continue;
                }
                let a = m.add_continuous(format!("dtp{b}_{t}"), 0.0, radius, VarTag::Untagged);
                let c = m.add_continuous(format!("dtm{b}_{t}"), 0.0, radius, VarTag::Untagged);
                dth.push(Some((a, c)));
                prox_vars.push(a);
                prox_vars.push(c);
            }
            let mut pv = Vec::new();
            let mut qv = Vec::new();
            for (k, g) in spec.gens.iter().enumerate() {
                pv.push(m.add_continuous(format!("p{k}_{t}"), g.p_lo, g.p_hi, VarTag::Untagged));
                qv.push(m.add_continuous(format!("q{k}_{t}"), g.q_lo, g.q_hi, VarTag::Untagged));
                if let (true, Some(curve), OpfObjective::MinCost) = (g.on, &g.cost, self.objective) {
                    let c = m.add_continuous(format!("c{k}_{t}"), f64::NEG_INFINITY, f64::INFINITY, VarTag::Untagged);
                    m.add_objective(c, 1.0);
                    for (a, s) in cost_pieces(curve) {
                        m.add_constraint("cost", &[(c, 1.0), (pv[k], -s)], Sense::Ge, a);
                    }
                }
            }
            let mut rv = Vec::new();
            if let Some(cp) = self.coupling {
                for g in 0..cp.units() {
                    rv.push(m.add_continuous(format!("r{g}_{t}"), 0.0, f64::INFINITY, VarTag::Untagged));
                }
            }
            // Linearized balance rows.
            let jinj = jacobian::injection_jacobian(net, &cur.v, &cur.th)?;
            let push_lin = |terms: &mut Vec<(usize, f64)>, jrow: &[f64]| {
                for b in 0..n {
                    let a = jrow[b];
                    if a != 0.0 {
                        terms.push((dv[b].0, a));
                        terms.push((dv[b].1, -a));
                    }
                    if let Some((x, y)) = dth[b] {
                        let a = jrow[n + b];
                        if a != 0.0 {
                            terms.push((x, a));
                            terms.push((y, -a));
                        }
                    }
                }
            };
            for b in 0..n {
                for (reactive, f0, load) in [(false, op.p_inj[b], spec.pd[b]), (true, op.q_inj[b], spec.qd[b])] {
                    let mut terms = Vec::new();
                    push_lin(&mut terms, jinj.row(if reactive { n + b } else { b }));
                    for (k, g) in spec.gens.iter().enumerate() {
                        if g.bus == b {
                            terms.push((if reactive { qv[k] } else { pv[k] }, -1.0));
                        }
                    }
                    let ep = m.add_continuous("ep", 0.0, f64::INFINITY, VarTag::Untagged);
                    let em = m.add_continuous("em", 0.0, f64::INFINITY, VarTag::Untagged);
                    m.add_objective(ep, self.mu);
                    m.add_objective(em, self.mu);
                    terms.push((ep, 1.0));
                    terms.push((em, -1.0));
                    m.add_constraint("bal", &terms, Sense::Eq, -load - f0);
                }
            }
            for (dir, s0) in [(FlowDirection::FromTo, &op.s_ft), (FlowDirection::ToFrom, &op.s_tf)] {
                let js = jacobian::apparent_flow_jacobian(net, &cur.v, &cur.th, dir)?;
                for l in 0..net.m {
                    let mut terms = Vec::new();
                    push_lin(&mut terms, js.matrix.row(l));
                    let sg = m.add_continuous("sig", 0.0, f64::INFINITY, VarTag::Untagged);
                    m.add_objective(sg, self.mu);
                    terms.push((sg, -1.0));
                    m.add_constraint("therm", &terms, Sense::Le, net.smax[l] - s0[l]);
                }
            }
            for l in 0..net.m {
                let (f, to) = (net.from[l], net.to[l]);
                let d0 = cur.th[f] - cur.th[to];
                let mut terms = Vec::new();
                if let Some((a, c)) = dth[f] {
                    terms.push((a, 1.0));
                    terms.push((c, -1.0));
                }
                if let Some((a, c)) = dth[to] {
                    terms.push((a, -1.0));
                    terms.push((c, 1.0));
                }
                if net.ang_max[l].is_finite() {
                    m.add_constraint("angmax", &terms, Sense::Le, net.ang_max[l] - d0);
                }
                if net.ang_min[l].is_finite() {
                    m.add_constraint("angmin", &terms, Sense::Ge, net.ang_min[l] - d0);
                }
            }
            layout.push(PeriodVars {
                dv,
                dth,
                p: pv,
                q: qv,
                r: rv,
            });
        }
        if let Some(cp) = self.coupling {
            let big_t = self.specs.len();
            for t in 0..big_t {
                let mut res = Vec::new();
                for g in 0..cp.units() {
                    let (p, r) = (layout[t].p[g], layout[t].r[g]);
                    let shift = if cp.y[g][t] { cp.pmin[g] } else { 0.0 };
                    res.push((r, 1.0));
                    m.add_constraint("cap", &[(p, 1.0), (r, 1.0)], Sense::Le, cp.cap_pr[g][t] + shift);
                    if let Some(c) = cp.cap_p[g][t] {
                        m.add_constraint("capsd", &[(p, 1.0)], Sense::Le, c + shift);
                    }
                    let (prev_terms, prev_shift) = if t == 0 {
                        (Vec::new(), -cp.initial_delta[g])
                    } else {
                        let s = if cp.y[g][t - 1] { cp.pmin[g] } else { 0.0 };
                        (alloc::vec![(layout[t - 1].p[g], -1.0)], s)
                    };
                    // (p_t - shift_t) + r_t - (p_{t-1} - shift_{t-1}) <= RU
                    let mut up = alloc::vec![(p, 1.0), (r, 1.0)];
                    up.extend(prev_terms.iter().copied());
                    m.add_constraint("ramp_up", &up, Sense::Le, cp.ramp_up[g] + shift - prev_shift);
                    let mut dn = alloc::vec![(p, -1.0)];
                    dn.extend(prev_terms.iter().map(|&(j, a)| (j, -a)));
                    m.add_constraint("ramp_dn", &dn, Sense::Le, cp.ramp_down[g] - shift + prev_shift);
                }
                m.add_constraint("reserve", &res, Sense::Ge, cp.reserve[t]);
            }
        }
        for &j in &prox_vars {
            m.add_objective(j, self.prox);
        }
        Ok((m, layout, prox_vars))
    }
}

/// Solve one or more coupled periods by sequential linear programming.
fn solve_slp(
    prob: &SlpProblem,
    start: Vec<Iterate>,
    cfg: &SlpConfig,
    clock: &dyn Stopwatch,
) -> Result<FeasibilityReport> {
    let t0 = clock.elapsed_secs();
    let mut it = start;
    let mut radius = cfg.trust_radius;
    let mut current: Option<(f64, Vec<OperatingPoint>)> = None;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut message = alloc::string::String::new();

    while iterations < cfg.max_iterations {
        if clock.elapsed_secs() - t0 > cfg.time_limit_secs {
            message = "time budget exhausted".into();
            break;
        }
        iterations += 1;
        let ops = match &current {
            Some((_, ops)) => ops.clone(),
            None => prob.merit(&it)?.1,
        };
        let (model, layout, prox_vars) = prob.build_lp(&it, &ops, radius)?;
        let mut lp = DualSimplex::new(&model)?;
        let status = lp.solve()?;
        if status != LpStatus::Optimal {
            if status == LpStatus::Infeasible {
                message = "linear constraints infeasible for the fixed schedule".into();
                return Ok(report(prob, Verdict::Infeasible, &it, iterations, message, cfg)?);
            }
            message = format!("LP subproblem ended with {status:?}");
            break;
        }
        let x = lp.x();
        let prox_cost: f64 = prox_vars.iter().map(|&j| prob.prox * x[j]).sum();
        let model_merit = lp.objective() - prox_cost;
        let (cand, step) = apply_step(prob.net, &it, &layout, &x);
        let (cand_merit, cand_ops) = prob.merit(&cand)?;
        let Some((cur_merit, _)) = &current else {
            it = cand;
            current = Some((cand_merit, cand_ops));
            continue;
        };
        let cur_merit = *cur_merit;
        let pred = cur_merit - model_merit;
        let actual = cur_merit - cand_merit;
        let scale = 1.0 + cur_merit.abs();
        let accept = actual >= 0.1 * pred || (pred <= 1e-12 * scale && actual >= -1e-12 * scale);
        if accept {
            let ratio = if pred > 0.0 { actual / pred } else { 1.0 };
            if ratio > 0.75 && step >= 0.99 * radius {
                radius = (radius * cfg.expand).min(cfg.max_radius);
            }
            it = cand;
            current = Some((cand_merit, cand_ops));
            if step <= cfg.step_tol || pred <= 1e-10 * scale {
                converged = true;
                break;
            }
        } else {
            radius *= cfg.shrink;
            if radius < 1e-10 {
                converged = true;
                break;
            }
        }
    }
    let mut viol = violations(prob, &it)?;
    let mut worst = viol.iter().fold(0.0f64, |a, b| a.max(*b));
    if worst > cfg.feas_tol && worst <= POLISH_RANGE {
        it = polish(prob, it, cfg)?;
        viol = violations(prob, &it)?;
        worst = viol.iter().fold(0.0f64, |a, b| a.max(*b));
    }
    let verdict = if worst <= cfg.feas_tol {
        Verdict::Feasible
    } else if converged {
        Verdict::Infeasible
    } else {
        Verdict::NoSolution
    };
    if message.is_empty() {
        message = if converged {
            "converged".into()
        } else {
            "iteration budget exhausted".into()
        };
    }
    report(prob, verdict, &it, iterations, message, cfg)
}

/// Largest residual violation that a polishing pass attempts to remove.
const POLISH_RANGE: f64 = 1e-3;

fn apply_step(net: &Network, it: &[Iterate], layout: &[PeriodVars], x: &[f64]) -> (Vec<Iterate>, f64) {
    let mut cand = it.to_vec();
    let mut step = 0.0f64;
    for (t, lay) in layout.iter().enumerate() {
        for b in 0..net.n {
            let d = x[lay.dv[b].0] - x[lay.dv[b].1];
            cand[t].v[b] = it[t].v[b] + d;
            step = step.max(d.abs());
            if let Some((a, c)) = lay.dth[b] {
                let d = x[a] - x[c];
                cand[t].th[b] = it[t].th[b] + d;
                step = step.max(d.abs());
            }
        }
        for k in 0..lay.p.len() {
            cand[t].p[k] = x[lay.p[k]];
            cand[t].q[k] = x[lay.q[k]];
        }
        for g in 0..lay.r.len() {
            cand[t].r[g] = x[lay.r[g]];
        }
    }
    (cand, step)
}

/// Restoration near a converged point: re-solve the step LP inside a small
/// trust region and keep steps that reduce the largest violation.
fn polish(prob: &SlpProblem, mut it: Vec<Iterate>, cfg: &SlpConfig) -> Result<Vec<Iterate>> {
    let worst = |it: &[Iterate]| -> Result<f64> {
        Ok(violations(prob, it)?.iter().fold(0.0f64, |a, b| a.max(*b)))
    };
    let mut best = worst(&it)?;
    let mut radius = 1e-2;
    for _ in 0..8 {
        if best <= 1e-3 * cfg.feas_tol {
            break;
        }
        let ops = prob.merit(&it)?.1;
        let (model, layout, _) = prob.build_lp(&it, &ops, radius)?;
        let mut lp = DualSimplex::new(&model)?;
        if lp.solve()? != LpStatus::Optimal {
            break;
        }
        let (cand, _) = apply_step(prob.net, &it, &layout, &lp.x());
        let w = worst(&cand)?;
        if w < best {
            best = w;
            it = cand;
        } else {
            radius *= 0.1;
        }
    }
    Ok(it)
}

fn violations(prob: &SlpProblem, it: &[Iterate]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (t, spec) in prob.specs.iter().enumerate() {
        let op = prob.net.eval_power_flow(&it[t].v, &it[t].th)?;
        out.push(period_violation(prob.net, spec, &op, &it[t].p, &it[t].q));
    }
    if let Some(cp) = prob.coupling {
        let p: Vec<Vec<f64>> = it.iter().map(|i| i.p.clone()).collect();
        let r: Vec<Vec<f64>> = it.iter().map(|i| i.r.clone()).collect();
        for (o, c) in out.iter_mut().zip(cp.violation(&p, &r)) {
            *o = o.max(c);
        }
    }
    Ok(out)
}

fn report(
    prob: &SlpProblem,
    verdict: Verdict,
    it: &[Iterate],
    iterations: usize,
    message: alloc::string::String,
    _cfg: &SlpConfig,
) -> Result<FeasibilityReport> {
    let viol = violations(prob, it)?;
    let points = if verdict == Verdict::Feasible {
        it.iter()
            .map(|i| prob.net.eval_power_flow(&i.v, &i.th))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let full_cost = SlpProblem {
        objective: OpfObjective::MinCost,
        ..*prob
    }
    .cost(it);
    Ok(FeasibilityReport {
        verdict,
        violations: viol,
        objective: full_cost,
        iterations,
        points,
        p: it.iter().map(|i| i.p.clone()).collect(),
        q: it.iter().map(|i| i.q.clone()).collect(),
        reserve: it.iter().map(|i| i.r.clone()).collect(),
        message,
    })
}

fn penalty_weight(specs: &[DispatchSpec], objective: OpfObjective) -> f64 {
    if objective == OpfObjective::FeasibilityOnly {
        return 1e4;
    }
    let slope = specs
        .iter()
        .flat_map(|s| s.gens.iter())
        .filter_map(|g| g.cost.as_ref())
        .fold(0.0f64, |m, c| m.max(c.max_slope()));
    (100.0 * slope).max(1e4)
}

fn flat_start(net: &Network, spec: &DispatchSpec, units: usize) -> Iterate {
    Iterate {
        v: (0..net.n).map(|b| 1.0f64.clamp(spec.vmin[b], spec.vmax[b])).collect(),
        th: vec![0.0; net.n],
        p: spec.gens.iter().map(|g| g.p_lo).collect(),
        q: spec.gens.iter().map(|g| g.q_lo.max(0.0).min(g.q_hi)).collect(),
        r: vec![0.0; units],
    }
}

/// Single-period AC optimal power flow by sequential linear programming.
pub fn slp_acopf(
    net: &Network,
    spec: &DispatchSpec,
    objective: OpfObjective,
    cfg: &SlpConfig,
    clock: &dyn Stopwatch,
) -> Result<FeasibilityReport> {
    spec.validate(net)?;
    let specs = core::slice::from_ref(spec);
    let mu = penalty_weight(specs, objective);
    let prob = SlpProblem {
        net,
        specs,
        coupling: None,
        objective,
        mu,
        prox: 1e-6 * mu,
    };
    solve_slp(&prob, vec![flat_start(net, spec, 0)], cfg, clock)
}

/// Multi-period AC feasibility of a commitment schedule with the binaries
/// fixed. Logic violations are rejected before any AC solve.
pub fn mtp_acopf_check(
    net: &Network,
    inst: &UcInstance,
    sched: &UcSchedule,
    cfg: &SlpConfig,
    clock: &dyn Stopwatch,
) -> Result<FeasibilityReport> {
    schedule::check_logic(inst, sched)?;
    if inst.bus_count != net.n {
        return Err(Error::Dimension {
            what: "instance buses",
            expected: net.n,
            got: inst.bus_count,
        });
    }
    let specs: Vec<DispatchSpec> = (0..inst.horizon)
        .map(|t| {
            let on: Vec<bool> = sched.y.iter().map(|row| row[t]).collect();
            DispatchSpec::for_period(net, inst, t, &on)
        })
        .collect();
    let coupling = Coupling::new(inst, sched);
    let mu = penalty_weight(&specs, OpfObjective::MinCost);
    let prob = SlpProblem {
        net,
        specs: &specs,
        coupling: Some(&coupling),
        objective: OpfObjective::MinCost,
        mu,
        prox: 1e-6 * mu,
    };
    let start: Vec<Iterate> = specs
        .iter()
        .enumerate()
        .map(|(t, spec)| {
            let mut s = flat_start(net, spec, inst.units.len());
            if let (Some(v), Some(th)) = (&sched.v, &sched.theta) {
                for b in 0..net.n {
                    s.v[b] = v[t][b].clamp(spec.vmin[b], spec.vmax[b]);
                    s.th[b] = th[t][b];
                }
                s.th[net.ref_bus] = 0.0;
            }
            s
        })
        .collect();
    solve_slp(&prob, start, cfg, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::fixtures::*;
    use crate::case::RawCase;
    use crate::NoClock;

    fn spec_for(case: &RawCase, net: &Network, on: bool) -> DispatchSpec {
        let base = case.base_mva;
        DispatchSpec {
            gens: case
                .generators
                .iter()
                .enumerate()
                .map(|(k, g)| GenSpec {
                    bus: case.bus_index(g.bus).unwrap(),
                    on,
                    p_lo: if on { g.pmin } else { 0.0 },
                    p_hi: if on { g.pmax } else { 0.0 },
                    q_lo: if on { g.qmin } else { 0.0 },
                    q_hi: if on { g.qmax } else { 0.0 },
                    cost: case.gencosts.get(k).map(|c| {
                        CostCurve::new(
                            (0..=3)
                                .map(|i| {
                                    let p = g.pmin + (g.pmax - g.pmin) * i as f64 / 3.0;
                                    (p, c.eval_mw(p * base))
                                })
                                .collect(),
                        )
                        .unwrap()
                    }),
                })
                .collect(),
            pd: case.buses.iter().map(|b| b.pd).collect(),
            qd: case.buses.iter().map(|b| b.qd).collect(),
            vmin: net.vmin.clone(),
            vmax: net.vmax.clone(),
        }
    }

    #[test]
    fn newton_zero_load_converges_immediately() {
        let case = two_bus(0.0, 0.0);
        let net = Network::build(&case).unwrap();
        let mut spec = spec_for(&case, &net, true);
        spec.gens[0].p_lo = 0.0;
        let op = newton_power_flow(&net, &spec, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(op.p_ft[0].abs() < 1e-15 && op.theta[1] == 0.0);
    }

    #[test]
    fn newton_two_bus_matches_closed_form() {
        let case = two_bus(0.5, 0.1);
        let net = Network::build(&case).unwrap();
        let spec = spec_for(&case, &net, true);
        let op = newton_power_flow(&net, &spec, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        // With V1 = 1 and a lossless x = 0.1 line: V2 sin(d) = 0.05 and
        // V2^2 = (0.98 + sqrt(0.95)) / 2 on the high-voltage branch.
        let v2 = ((0.98 + 0.95f64.sqrt()) / 2.0).sqrt();
        let th2 = -(0.05 / v2).asin();
        assert!((op.v[1] - v2).abs() < 1e-8, "{} vs {v2}", op.v[1]);
        assert!((op.theta[1] - th2).abs() < 1e-8);
    }

    #[test]
    fn newton_beyond_loadability_fails() {
        // The lossless two-bus line delivers at most 1/(2x) = 5 p.u. at unity
        // power factor; ask for ten times that.
        let case = two_bus(50.0, 0.0);
        let net = Network::build(&case).unwrap();
        let spec = spec_for(&case, &net, true);
        assert!(newton_power_flow(&net, &spec, &[1.0, 1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn slp_finds_feasible_point_on_lossy_case() {
        let case = four_bus();
        let net = Network::build(&case).unwrap();
        let spec = spec_for(&case, &net, true);
        for obj in [OpfObjective::MinCost, OpfObjective::FeasibilityOnly] {
            let rep = slp_acopf(&net, &spec, obj, &SlpConfig::default(), &NoClock).unwrap();
            assert_eq!(rep.verdict, Verdict::Feasible, "{obj:?}: {}", rep.message);
            let op = &rep.points[0];
            assert!(period_violation(&net, &spec, op, &rep.p[0], &rep.q[0]) <= 1e-6);
        }
    }

    #[test]
    fn slp_min_cost_prefers_cheap_unit() {
        let case = four_bus();
        let net = Network::build(&case).unwrap();
        let spec = spec_for(&case, &net, true);
        let cheap = slp_acopf(&net, &spec, OpfObjective::MinCost, &SlpConfig::default(), &NoClock).unwrap();
        let feas = slp_acopf(&net, &spec, OpfObjective::FeasibilityOnly, &SlpConfig::default(), &NoClock).unwrap();
        assert!(cheap.objective <= feas.objective + 1e-6);
    }

    #[test]
    fn slp_all_off_is_infeasible() {
        let case = four_bus();
        let net = Network::build(&case).unwrap();
        let spec = spec_for(&case, &net, false);
        let rep = slp_acopf(&net, &spec, OpfObjective::MinCost, &SlpConfig::default(), &NoClock).unwrap();
        assert_eq!(rep.verdict, Verdict::Infeasible);
    }
}
