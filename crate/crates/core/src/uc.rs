//! Unit commitment models: the shared commitment/dispatch core and the
//! NN, linearized and DC network formulations, plus schedule extraction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encode::{add_inputs, encode_linear, encode_relu_network, BigMBounds, BoundBox, NnFragment};
use crate::error::{check_len, Error, Result};
use crate::grid::Network;
use crate::instance::UcInstance;
use crate::jacobian::LinearPfModel;
use crate::lp::{MilpModel, Sense, VarTag};
use crate::nn::CompactPwlModel;
use crate::schedule::{check_logic, schedule_cost, UcSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formulation {
    Nn,
    Linear,
    Dc,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [Formulation::Nn, Formulation::Linear, Formulation::Dc];

    pub fn label(self) -> &'static str {
        match self {
            Formulation::Nn => "nn",
            Formulation::Linear => "linear",
            Formulation::Dc => "dc",
        }
    }

    pub fn parse(s: &str) -> Option<Formulation> {
        Formulation::ALL.into_iter().find(|f| f.label() == s)
    }
}

/// Network variables of one period.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodNetwork {
    /// `x = [v; θ_nonref]` and surrogate outputs `y = [p; q; s_ft; s_tf]`.
    Ac {
        x: Vec<usize>,
        y: Vec<usize>,
        nn: Option<NnFragment>,
    },
    /// Angles per bus (`None` at the reference) and one flow per line.
    Dc {
        theta: Vec<Option<usize>>,
        flow: Vec<usize>,
    },
}

/// Variable indices of a built model, indexed `[unit][t]` or
/// `[cond][t]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UcVars {
    pub y: Vec<Vec<usize>>,
    pub u: Vec<Vec<usize>>,
    pub w: Vec<Vec<usize>>,
    pub p_delta: Vec<Vec<usize>>,
    pub reserve: Vec<Vec<usize>>,
    pub q: Vec<Vec<usize>>,
    pub q_sc: Vec<Vec<usize>>,
    pub segments: Vec<Vec<Vec<usize>>>,
    /// Start-up tier indicators `[unit][t][tier]`; empty with one tier.
    pub tiers: Vec<Vec<Vec<usize>>>,
    pub network: Vec<PeriodNetwork>,
}

#[derive(Debug, Clone)]
pub struct UcModel {
    pub milp: MilpModel,
    pub vars: UcVars,
    pub formulation: Option<Formulation>,
    /// Static infeasibility diagnostics found while building.
    pub warnings: Vec<String>,
}

impl UcModel {
    pub fn binary_count(&self) -> usize {
        self.milp.binaries().count()
    }

    pub fn relu_binary_count(&self) -> usize {
        self.milp.binaries().filter(|&j| self.milp.vars[j].tag.is_relu()).count()
    }
}

fn window_sum(
    vars: &[usize],
    history: impl Fn(i64) -> f64,
    t: i64,
    len: u32,
) -> (Vec<(usize, f64)>, f64) {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    for k in t - len as i64 + 1..=t {
        if k >= 1 {
            terms.push((vars[(k - 1) as usize], 1.0));
        } else {
            constant += history(k);
        }
    }
    (terms, constant)
}

/// Commitment logic, reserve, generation limits, ramps, reactive limits and
/// the cost objective.
pub fn build_core_uc(inst: &UcInstance) -> Result<UcModel> {
    let big_t = inst.horizon;
    check_len("reserve profile", big_t, inst.reserve.len())?;
    let mut milp = MilpModel::new("uc");
    let mut v = UcVars::default();
    let mut warnings = Vec::new();

    for (g, unit) in inst.units.iter().enumerate() {
        let span = unit.pmax - unit.pmin;
        let mut ys = Vec::new();
        let mut us = Vec::new();
        let mut ws = Vec::new();
        let mut ps = Vec::new();
        let mut rs = Vec::new();
        let mut qs = Vec::new();
        let mut segs_g = Vec::new();
        for t in 0..big_t {
            ys.push(milp.add_binary(format!("y_{g}_{t}"), VarTag::Commit { unit: g, t }));
            us.push(milp.add_binary(format!("u_{g}_{t}"), VarTag::Startup { unit: g, t }));
            ws.push(milp.add_binary(format!("w_{g}_{t}"), VarTag::Shutdown { unit: g, t }));
            ps.push(milp.add_continuous(format!("pd_{g}_{t}"), 0.0, span.max(0.0), VarTag::Dispatch { unit: g, t }));
            rs.push(milp.add_continuous(format!("r_{g}_{t}"), 0.0, f64::INFINITY, VarTag::Reserve { unit: g, t }));
            qs.push(milp.add_continuous(
                format!("q_{g}_{t}"),
                unit.qmin.min(0.0),
                unit.qmax.max(0.0),
                VarTag::Reactive { unit: g, t },
            ));
        }
        for t in 0..big_t {
            let tt = t as i64 + 1;
            let (y, u, w, p, r, q) = (ys[t], us[t], ws[t], ps[t], rs[t], qs[t]);

            let (mut terms, c) = window_sum(&us, |k| unit.history_u(k), tt, unit.min_up);
            terms.push((y, -1.0));
            milp.add_constraint(format!("minup_{g}_{t}"), &terms, Sense::Le, -c);
            let (mut terms, c) = window_sum(&ws, |k| unit.history_w(k), tt, unit.min_down);
            terms.push((y, 1.0));
            milp.add_constraint(format!("mindown_{g}_{t}"), &terms, Sense::Le, 1.0 - c);

            if t == 0 {
                let y0 = f64::from(u8::from(unit.initially_on()));
                milp.add_constraint(format!("link_{g}_{t}"), &[(y, 1.0), (u, -1.0), (w, 1.0)], Sense::Eq, y0);
            } else {
                milp.add_constraint(
                    format!("link_{g}_{t}"),
                    &[(y, 1.0), (ys[t - 1], -1.0), (u, -1.0), (w, 1.0)],
                    Sense::Eq,
                    0.0,
                );
            }
            milp.add_constraint(format!("excl_{g}_{t}"), &[(u, 1.0), (w, 1.0)], Sense::Le, 1.0);

            let su = unit.pmax - unit.startup_cap;
            let sd = unit.pmax - unit.shutdown_cap;
            let next_w = (t + 1 < big_t).then(|| ws[t + 1]);
            let mut cap = vec![(p, 1.0), (r, 1.0), (y, -span), (u, su)];
            if unit.min_up >= 2 {
                if let Some(wn) = next_w {
                    cap.push((wn, sd));
                }
                milp.add_constraint(format!("cap_{g}_{t}"), &cap, Sense::Le, 0.0);
            } else {
                milp.add_constraint(format!("capsu_{g}_{t}"), &cap, Sense::Le, 0.0);
                let mut sdc = vec![(p, 1.0), (y, -span)];
                if let Some(wn) = next_w {
                    sdc.push((wn, sd));
                }
                milp.add_constraint(format!("capsd_{g}_{t}"), &sdc, Sense::Le, 0.0);
            }
            if t == 0 && unit.p_init > unit.shutdown_cap {
                milp.vars[w].upper = 0.0;
            }

            let prev = if t == 0 { None } else { Some(ps[t - 1]) };
            let p0 = if t == 0 { unit.initial_delta() } else { 0.0 };
            let mut up = vec![(p, 1.0), (r, 1.0)];
            let mut down = vec![(p, -1.0)];
            if let Some(pp) = prev {
                up.push((pp, -1.0));
                down.push((pp, 1.0));
            }
            milp.add_constraint(format!("rampup_{g}_{t}"), &up, Sense::Le, unit.ramp_up + p0);
            milp.add_constraint(format!("rampdn_{g}_{t}"), &down, Sense::Le, unit.ramp_down - p0);

            milp.add_constraint(format!("qmin_{g}_{t}"), &[(q, 1.0), (y, -unit.qmin)], Sense::Ge, 0.0);
            milp.add_constraint(format!("qmax_{g}_{t}"), &[(q, 1.0), (y, -unit.qmax)], Sense::Le, 0.0);

            milp.add_objective(y, unit.cost.cost_at_min());
            let segments = unit.cost.segments();
            let mut seg_vars = Vec::new();
            if !segments.is_empty() {
                let mut link = vec![(p, -1.0)];
                for (k, (width, slope)) in segments.iter().enumerate() {
                    let s = milp.add_continuous(format!("seg_{g}_{t}_{k}"), 0.0, *width, VarTag::SegmentPower { unit: g, t, seg: k });
                    milp.add_objective(s, *slope);
                    link.push((s, 1.0));
                    seg_vars.push(s);
                }
                milp.add_constraint(format!("segs_{g}_{t}"), &link, Sense::Eq, 0.0);
            }
            segs_g.push(seg_vars);
        }

        let tiers = &unit.startup_tiers;
        let mut tiers_g = Vec::new();
        for t in 0..big_t {
            let tt = t as i64 + 1;
            let u = us[t];
            if tiers.len() <= 1 {
                milp.add_objective(u, tiers.first().map_or(0.0, |s| s.cost));
                tiers_g.push(Vec::new());
                continue;
            }
            let mut deltas = Vec::new();
            let mut pick = vec![(u, -1.0)];
            for (s, tier) in tiers.iter().enumerate() {
                let d = milp.add_binary(format!("su_{g}_{t}_{s}"), VarTag::StartupTier { unit: g, t, tier: s });
                milp.add_objective(d, tier.cost);
                pick.push((d, 1.0));
                if s + 1 < tiers.len() {
                    let mut terms = vec![(d, 1.0)];
                    let mut constant = 0.0;
                    for i in tier.lag as i64..tiers[s + 1].lag as i64 {
                        let k = tt - i;
                        if k >= 1 {
                            terms.push((ws[(k - 1) as usize], -1.0));
                        } else {
                            constant += unit.history_w(k);
                        }
                    }
                    milp.add_constraint(format!("sutier_{g}_{t}_{s}"), &terms, Sense::Le, constant);
                }
                deltas.push(d);
            }
            milp.add_constraint(format!("supick_{g}_{t}"), &pick, Sense::Eq, 0.0);
            tiers_g.push(deltas);
        }

        v.y.push(ys);
        v.u.push(us);
        v.w.push(ws);
        v.p_delta.push(ps);
        v.reserve.push(rs);
        v.q.push(qs);
        v.segments.push(segs_g);
        v.tiers.push(tiers_g);
    }

    for t in 0..big_t {
        let terms: Vec<(usize, f64)> = v.reserve.iter().map(|r| (r[t], 1.0)).collect();
        milp.add_constraint(format!("reserve_{t}"), &terms, Sense::Ge, inst.reserve[t]);
        let headroom: f64 = inst.units.iter().map(|u| u.pmax - u.pmin).sum();
        if inst.reserve[t] > headroom {
            warnings.push(format!(
                "period {t}: reserve {} exceeds total headroom {headroom}",
                inst.reserve[t]
            ));
        }
        let cap: f64 = inst.units.iter().map(|u| u.pmax).sum();
        if inst.total_load(t) > cap {
            warnings.push(format!("period {t}: load {} exceeds total capacity {cap}", inst.total_load(t)));
        }
    }

    for (c, cond) in inst.condensers.iter().enumerate() {
        v.q_sc.push(
            (0..big_t)
                .map(|t| milp.add_continuous(format!("qsc_{c}_{t}"), cond.qmin, cond.qmax, VarTag::CondenserReactive { cond: c, t }))
                .collect(),
        );
    }

    Ok(UcModel {
        milp,
        vars: v,
        formulation: None,
        warnings,
    })
}

fn check_network(inst: &UcInstance, net: &Network) -> Result<()> {
    check_len("instance buses", net.n, inst.bus_count)?;
    check_len("load periods", inst.horizon, inst.pd.len())?;
    for t in 0..inst.horizon {
        check_len("active loads", net.n, inst.pd[t].len())?;
        check_len("reactive loads", net.n, inst.qd[t].len())?;
    }
    Ok(())
}

/// `Σ_{g at b} (p^Δ + Pmin·y)` as terms, for bus `b` at period `t`.
fn generation_terms(inst: &UcInstance, v: &UcVars, b: usize, t: usize) -> Vec<(usize, f64)> {
    let mut terms = Vec::new();
    for (g, unit) in inst.units_at(b) {
        terms.push((v.p_delta[g][t], 1.0));
        if unit.pmin != 0.0 {
            terms.push((v.y[g][t], unit.pmin));
        }
    }
    terms
}

/// Tie surrogate outputs to generation, apply flow limits.
fn link_ac_outputs(uc: &mut UcModel, inst: &UcInstance, net: &Network, y: &[usize], t: usize) {
    let (n, m) = (net.n, net.m);
    for b in 0..n {
        let mut terms = vec![(y[b], 1.0)];
        terms.extend(generation_terms(inst, &uc.vars, b, t).into_iter().map(|(j, a)| (j, -a)));
        uc.milp.add_constraint(format!("pbal_{b}_{t}"), &terms, Sense::Eq, -inst.pd[t][b]);

        let mut terms = vec![(y[n + b], 1.0)];
        for (g, _) in inst.units_at(b) {
            terms.push((uc.vars.q[g][t], -1.0));
        }
        for (c, cond) in inst.condensers.iter().enumerate() {
            if cond.bus == b {
                terms.push((uc.vars.q_sc[c][t], -1.0));
            }
        }
        uc.milp.add_constraint(format!("qbal_{b}_{t}"), &terms, Sense::Eq, -inst.qd[t][b]);
    }
    for l in 0..m {
        for k in [2 * n + l, 2 * n + m + l] {
            if net.smax[l].is_finite() {
                uc.milp.vars[y[k]].upper = net.smax[l];
            }
        }
    }
}

/// UC with the compact network encoded once per period.
pub fn build_nn_ac_uc(
    inst: &UcInstance,
    net: &Network,
    model: &CompactPwlModel,
    bounds: &BigMBounds,
) -> Result<UcModel> {
    check_network(inst, net)?;
    model.validate()?;
    check_len("model inputs", net.input_dim(), model.input_dim())?;
    check_len("model outputs", net.output_dim(), model.output_dim())?;
    let mut uc = build_core_uc(inst)?;
    uc.milp.name = String::from("nn_ac_uc");
    let bbox = BoundBox::network(net);
    for t in 0..inst.horizon {
        let x = add_inputs(&mut uc.milp, &bbox, "", t);
        let frag = encode_relu_network(&mut uc.milp, model, bounds, &x, "", t)?;
        link_ac_outputs(&mut uc, inst, net, &frag.y, t);
        uc.vars.network.push(PeriodNetwork::Ac {
            x,
            y: frag.y.clone(),
            nn: Some(frag),
        });
    }
    uc.formulation = Some(Formulation::Nn);
    Ok(uc)
}

/// UC with the linear power flow model `y = J*x + r*`.
pub fn build_l_ac_uc(inst: &UcInstance, net: &Network, lin: &LinearPfModel) -> Result<UcModel> {
    check_network(inst, net)?;
    check_len("model inputs", net.input_dim(), lin.input_dim())?;
    check_len("model outputs", net.output_dim(), lin.output_dim())?;
    let mut uc = build_core_uc(inst)?;
    uc.milp.name = String::from("l_ac_uc");
    let bbox = BoundBox::network(net);
    for t in 0..inst.horizon {
        let x = add_inputs(&mut uc.milp, &bbox, "", t);
        let y = encode_linear(&mut uc.milp, lin, &x, "", t)?;
        link_ac_outputs(&mut uc, inst, net, &y, t);
        uc.vars.network.push(PeriodNetwork::Ac { x, y, nn: None });
    }
    uc.formulation = Some(Formulation::Linear);
    Ok(uc)
}

/// DC-UC: lossless active flows `p_ft = (θ_f − θ_t)/x`, no reactive power
/// or voltage magnitudes.
pub fn build_dc_uc(inst: &UcInstance, net: &Network) -> Result<UcModel> {
    check_network(inst, net)?;
    if let Some(l) = (0..net.m).find(|&l| net.x[l] == 0.0 || !net.x[l].is_finite()) {
        return Err(Error::validation(format!("line {l} has zero reactance")));
    }
    let mut uc = build_core_uc(inst)?;
    uc.milp.name = String::from("dc_uc");
    for g in 0..inst.units.len() {
        for t in 0..inst.horizon {
            let j = uc.vars.q[g][t];
            uc.milp.vars[j].lower = 0.0;
            uc.milp.vars[j].upper = 0.0;
        }
    }
    let bbox = BoundBox::network(net);
    let (n, m) = (net.n, net.m);
    for t in 0..inst.horizon {
        let theta: Vec<Option<usize>> = (0..n)
            .map(|b| {
                net.theta_slot(b).map(|s| {
                    uc.milp.add_continuous(format!("th{b}_{t}"), bbox.x_lo[s], bbox.x_hi[s], VarTag::Angle { bus: b, t })
                })
            })
            .collect();
        let mut flow = Vec::with_capacity(m);
        for l in 0..m {
            let lim = net.smax[l];
            let f = uc.milp.add_continuous(format!("pf{l}_{t}"), -lim, lim, VarTag::Flow { line: l, t });
            let mut terms = vec![(f, 1.0)];
            if let Some(a) = theta[net.from[l]] {
                terms.push((a, -1.0 / net.x[l]));
            }
            if let Some(a) = theta[net.to[l]] {
                terms.push((a, 1.0 / net.x[l]));
            }
            uc.milp.add_constraint(format!("flow{l}_{t}"), &terms, Sense::Eq, 0.0);
            let mut ang = Vec::new();
            if let Some(a) = theta[net.from[l]] {
                ang.push((a, 1.0));
            }
            if let Some(a) = theta[net.to[l]] {
                ang.push((a, -1.0));
            }
            if !ang.is_empty() {
                if net.ang_max[l].is_finite() {
                    uc.milp.add_constraint(format!("angmax{l}_{t}"), &ang, Sense::Le, net.ang_max[l]);
                }
                if net.ang_min[l].is_finite() {
                    uc.milp.add_constraint(format!("angmin{l}_{t}"), &ang, Sense::Ge, net.ang_min[l]);
                }
            }
            flow.push(f);
        }
        for b in 0..n {
            let mut terms: Vec<(usize, f64)> = generation_terms(inst, &uc.vars, b, t).into_iter().map(|(j, a)| (j, -a)).collect();
            for l in 0..m {
                if net.from[l] == b {
                    terms.push((flow[l], 1.0));
                }
                if net.to[l] == b {
                    terms.push((flow[l], -1.0));
                }
            }
            uc.milp.add_constraint(format!("pbal_{b}_{t}"), &terms, Sense::Eq, -inst.pd[t][b]);
        }
        uc.vars.network.push(PeriodNetwork::Dc { theta, flow });
    }
    uc.formulation = Some(Formulation::Dc);
    Ok(uc)
}

const INTEGRALITY_TOL: f64 = 1e-6;

/// Read a schedule from a solution vector of `uc`. Binaries are rounded,
/// the unit logic is re-verified and the objective is recomputed from the
/// cost curves. The recomputed value may fall below `solver_objective`
/// (an unused cheaper start-up tier or segment order) but never above it.
pub fn extract_schedule(inst: &UcInstance, uc: &UcModel, x: &[f64], solver_objective: f64) -> Result<UcSchedule> {
    check_len("solution", uc.milp.num_vars(), x.len())?;
    if let Some(j) = uc.milp.binaries().find(|&j| (x[j] - x[j].round()).abs() > INTEGRALITY_TOL) {
        return Err(Error::NoSolution(format!(
            "binary {} is fractional ({})",
            uc.milp.vars[j].name, x[j]
        )));
    }
    let v = &uc.vars;
    let bits = |m: &Vec<Vec<usize>>| -> Vec<Vec<bool>> { m.iter().map(|r| r.iter().map(|&j| x[j] > 0.5).collect()).collect() };
    let vals = |m: &Vec<Vec<usize>>| -> Vec<Vec<f64>> { m.iter().map(|r| r.iter().map(|&j| x[j]).collect()).collect() };
    let mut sched = UcSchedule {
        y: bits(&v.y),
        u: bits(&v.u),
        w: bits(&v.w),
        p_delta: v.p_delta.iter().map(|r| r.iter().map(|&j| x[j].max(0.0)).collect()).collect(),
        reserve: v.reserve.iter().map(|r| r.iter().map(|&j| x[j].max(0.0)).collect()).collect(),
        q: vals(&v.q),
        q_sc: vals(&v.q_sc),
        ..UcSchedule::default()
    };
    check_logic(inst, &sched)?;

    if !v.network.is_empty() {
        let mut volts = Vec::new();
        let mut angles = Vec::new();
        let mut sft = Vec::new();
        let mut stf = Vec::new();
        for period in &v.network {
            match period {
                PeriodNetwork::Ac { x: xv, y, .. } => {
                    let n = (xv.len() + 1) / 2;
                    let m = (y.len() - 2 * n) / 2;
                    volts.push(xv[..n].iter().map(|&j| x[j]).collect());
                    let mut th = Vec::with_capacity(n);
                    let mut slot = n;
                    let ref_bus = (0..n).find(|&b| {
                        !xv[n..].iter().any(|&j| matches!(uc.milp.vars[j].tag, VarTag::Angle { bus, .. } if bus == b))
                    });
                    for b in 0..n {
                        if Some(b) == ref_bus {
                            th.push(0.0);
                        } else {
                            th.push(x[xv[slot]]);
                            slot += 1;
                        }
                    }
                    angles.push(th);
                    sft.push(y[2 * n..2 * n + m].iter().map(|&j| x[j]).collect());
                    stf.push(y[2 * n + m..].iter().map(|&j| x[j]).collect());
                }
                PeriodNetwork::Dc { theta, flow } => {
                    angles.push(theta.iter().map(|a| a.map_or(0.0, |j| x[j])).collect());
                    sft.push(flow.iter().map(|&j| x[j]).collect());
                    stf.push(flow.iter().map(|&j| -x[j]).collect());
                }
            }
        }
        if !volts.is_empty() {
            sched.v = Some(volts);
        }
        sched.theta = Some(angles);
        sched.s_ft = Some(sft);
        sched.s_tf = Some(stf);
    }

    let cost = schedule_cost(inst, &sched)?;
    if cost > solver_objective + 1e-6 * (1.0 + solver_objective.abs()) {
        return Err(Error::validation(format!(
            "recomputed cost {cost} exceeds solver objective {solver_objective}"
        )));
    }
    sched.objective = cost;
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acopf::{newton_power_flow, DispatchSpec};
    use crate::case::fixtures::four_bus;
    use crate::encode::{interval_bounds, prune, Provenance, ReluStatus};
    use crate::instance::{StartupTier, UcData};
    use crate::jacobian::linearize;
    use crate::linalg::Matrix;
    use crate::lp::{solve_lp, solve_milp, LpStatus, MilpConfig, MilpStatus};
    use crate::schedule::fixtures::{instance, unit};
    use crate::schedule::{dispatch_violation, startup_cost, with_status};
    use crate::NoClock;

    fn solve(uc: &UcModel) -> (f64, Vec<f64>) {
        let sol = solve_milp(&uc.milp, &MilpConfig::exact(), &NoClock).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        (sol.objective, sol.x)
    }

    fn fix(uc: &mut UcModel, j: usize, v: f64) {
        uc.milp.vars[j].lower = v;
        uc.milp.vars[j].upper = v;
    }

    fn lp_status(uc: &UcModel) -> LpStatus {
        solve_lp(&uc.milp.relaxed()).unwrap().status
    }

    #[test]
    fn minimum_up_time_keeps_unit_on() {
        let inst = instance(vec![unit(0.1, 1.0, 2, 1, -1)], vec![0.0, 0.0]);
        let mut uc = build_core_uc(&inst).unwrap();
        let (u1, y2) = (uc.vars.u[0][0], uc.vars.y[0][1]);
        fix(&mut uc, u1, 1.0);
        fix(&mut uc, y2, 0.0);
        assert_eq!(lp_status(&uc), LpStatus::Infeasible);
        uc.milp.vars[y2].upper = 1.0;
        uc.milp.vars[y2].lower = 1.0;
        assert_eq!(lp_status(&uc), LpStatus::Optimal);
    }

    #[test]
    fn initial_output_above_shutdown_cap_blocks_first_shutdown() {
        let mut g = unit(0.1, 1.0, 1, 1, 3);
        g.p_init = 0.8;
        g.shutdown_cap = 0.5;
        let inst = instance(vec![g], vec![0.0, 0.0]);
        let uc = build_core_uc(&inst).unwrap();
        assert_eq!(uc.milp.vars[uc.vars.w[0][0]].upper, 0.0);
        assert_eq!(uc.milp.vars[uc.vars.w[0][1]].upper, 1.0);
    }

    #[test]
    fn excessive_reserve_is_reported() {
        let mut inst = instance(vec![unit(0.1, 1.0, 1, 1, 1)], vec![0.5]);
        inst.reserve = vec![2.0];
        let uc = build_core_uc(&inst).unwrap();
        assert_eq!(uc.warnings.len(), 1);
    }

    /// Copper-plate dispatch cost for a fixed status matrix, solved as an
    /// LP written from scratch; `None` when the dispatch is infeasible.
    fn oracle_dispatch(inst: &UcInstance, sched: &UcSchedule) -> Option<f64> {
        check_logic(inst, sched).ok()?;
        let mut m = MilpModel::new("oracle");
        let (ng, nt) = (inst.units.len(), inst.horizon);
        let mut p = vec![vec![0; nt]; ng];
        let mut r = vec![vec![0; nt]; ng];
        for g in 0..ng {
            let unit = &inst.units[g];
            for t in 0..nt {
                let on = sched.y[g][t];
                p[g][t] = m.add_continuous("p", 0.0, if on { unit.pmax - unit.pmin } else { 0.0 }, VarTag::Untagged);
                r[g][t] = m.add_continuous("r", 0.0, f64::INFINITY, VarTag::Untagged);
                // Convex cost through an epigraph over the segment lines.
                let c = m.add_continuous("c", f64::NEG_INFINITY, f64::INFINITY, VarTag::Untagged);
                m.add_objective(c, 1.0);
                let mut x0 = 0.0;
                let mut c0 = 0.0;
                for (width, slope) in unit.cost.segments() {
                    m.add_constraint("epi", &[(c, 1.0), (p[g][t], -slope)], Sense::Ge, c0 - slope * x0);
                    x0 += width;
                    c0 += slope * width;
                }
            }
        }
        let mut fixed = 0.0;
        for g in 0..ng {
            let unit = &inst.units[g];
            for t in 0..nt {
                let b = |v: bool| f64::from(u8::from(v));
                let (y, u) = (b(sched.y[g][t]), b(sched.u[g][t]));
                let wn = if t + 1 < nt { b(sched.w[g][t + 1]) } else { 0.0 };
                let span = unit.pmax - unit.pmin;
                let lim = span * y - (unit.pmax - unit.startup_cap) * u - (unit.pmax - unit.shutdown_cap) * wn;
                if unit.min_up >= 2 {
                    m.add_constraint("cap", &[(p[g][t], 1.0), (r[g][t], 1.0)], Sense::Le, lim);
                } else {
                    m.add_constraint("cap", &[(p[g][t], 1.0), (r[g][t], 1.0)], Sense::Le, span * y - (unit.pmax - unit.startup_cap) * u);
                    m.add_constraint("cap", &[(p[g][t], 1.0)], Sense::Le, span * y - (unit.pmax - unit.shutdown_cap) * wn);
                }
                let (prev, p0) = if t == 0 { (None, unit.initial_delta()) } else { (Some(p[g][t - 1]), 0.0) };
                let mut up = vec![(p[g][t], 1.0), (r[g][t], 1.0)];
                let mut dn = vec![(p[g][t], -1.0)];
                if let Some(pp) = prev {
                    up.push((pp, -1.0));
                    dn.push((pp, 1.0));
                }
                m.add_constraint("ru", &up, Sense::Le, unit.ramp_up + p0);
                m.add_constraint("rd", &dn, Sense::Le, unit.ramp_down - p0);
                if sched.y[g][t] {
                    fixed += unit.cost.cost_at_min();
                }
            }
        }
        for t in 0..nt {
            let mut bal = Vec::new();
            let mut pmin = 0.0;
            for g in 0..ng {
                bal.push((p[g][t], 1.0));
                if sched.y[g][t] {
                    pmin += inst.units[g].pmin;
                }
            }
            m.add_constraint("bal", &bal, Sense::Eq, inst.total_load(t) - pmin);
            let res: Vec<(usize, f64)> = (0..ng).map(|g| (r[g][t], 1.0)).collect();
            m.add_constraint("res", &res, Sense::Ge, inst.reserve[t]);
        }
        let sol = solve_lp(&m).unwrap();
        if sol.status != LpStatus::Optimal {
            return None;
        }
        let mut starts = 0.0;
        for g in 0..ng {
            let unit = &inst.units[g];
            for t in 0..nt {
                if sched.u[g][t] {
                    // Downtime by scanning back for the last shutdown.
                    let mut d = None;
                    for k in (0..t).rev() {
                        if sched.w[g][k] {
                            d = Some((t - k) as i64);
                            break;
                        }
                    }
                    if d.is_none() && unit.initial_status < 0 {
                        d = Some(t as i64 - unit.initial_status as i64);
                    }
                    starts += startup_cost(unit, d);
                }
            }
        }
        Some(sol.objective + fixed + starts)
    }

    /// Two units on one copper-plate bus with a big line; three periods.
    fn oracle_instance(variant: u64) -> (Network, UcInstance) {
        let mut case = four_bus();
        for br in &mut case.branches {
            br.rate_a = 100.0;
        }
        let net = Network::build(&case).unwrap();
        let data = UcData {
            horizon: 3,
            load_profile: Some(vec![0.4, 1.0, 0.5]),
            ..Default::default()
        };
        let mut inst = UcInstance::from_data(&data, &case).unwrap();
        inst.reserve = vec![0.1, 0.2, 0.1];
        let v = variant as f64;
        let tiers = vec![StartupTier { lag: 1, cost: 3.0 + v }, StartupTier { lag: 2, cost: 8.0 }, StartupTier { lag: 3, cost: 20.0 }];
        inst.units[0].startup_tiers = tiers.clone();
        inst.units[1].startup_tiers = tiers;
        inst.units[0].min_up = 2;
        inst.units[0].initial_status = -1;
        inst.units[1].min_down = 1 + (variant % 2) as u32;
        inst.units[1].initial_status = 2;
        inst.units[1].p_init = 0.3;
        inst.units[0].ramp_up = 0.6 + 0.1 * v;
        (net, inst)
    }

    fn brute_force(inst: &UcInstance) -> Option<f64> {
        let (ng, nt) = (inst.units.len(), inst.horizon);
        let mut best: Option<f64> = None;
        for mask in 0..1u32 << (ng * nt) {
            let y: Vec<Vec<bool>> = (0..ng).map(|g| (0..nt).map(|t| mask >> (g * nt + t) & 1 == 1).collect()).collect();
            let sched = with_status(inst, y);
            if let Some(c) = oracle_dispatch(inst, &sched) {
                best = Some(best.map_or(c, |b| b.min(c)));
            }
        }
        best
    }

    #[test]
    fn dc_uc_matches_enumeration_oracle() {
        for variant in 0..4 {
            let (net, inst) = oracle_instance(variant);
            let want = brute_force(&inst).expect("oracle finds a schedule");
            let uc = build_dc_uc(&inst, &net).unwrap();
            let (obj, x) = solve(&uc);
            assert!((obj - want).abs() <= 1e-6 * (1.0 + want.abs()), "variant {variant}: {obj} vs {want}");
            let sched = extract_schedule(&inst, &uc, &x, obj).unwrap();
            assert!((sched.objective - obj).abs() <= 1e-6 * (1.0 + obj.abs()));
            assert!(dispatch_violation(&inst, &sched).unwrap() <= 1e-7);
        }
    }

    #[test]
    fn dc_flow_law_and_structure() {
        let (net, inst) = oracle_instance(0);
        let uc = build_dc_uc(&inst, &net).unwrap();
        let (_, x) = solve(&uc);
        assert!(!uc.milp.vars.iter().any(|v| matches!(v.tag, VarTag::Voltage { .. })));
        for g in 0..inst.units.len() {
            let q = &uc.milp.vars[uc.vars.q[g][0]];
            assert_eq!((q.lower, q.upper), (0.0, 0.0));
        }
        let PeriodNetwork::Dc { theta, flow } = &uc.vars.network[1] else { panic!() };
        for l in 0..net.m {
            let th = |b: usize| theta[b].map_or(0.0, |j| x[j]);
            let want = (th(net.from[l]) - th(net.to[l])) / net.x[l];
            assert!((x[flow[l]] - want).abs() < 1e-8);
        }
    }

    #[test]
    fn dc_flow_limit_is_two_sided() {
        let (net, inst) = oracle_instance(0);
        let uc = build_dc_uc(&inst, &net).unwrap();
        let PeriodNetwork::Dc { flow, .. } = &uc.vars.network[0] else { panic!() };
        let v = &uc.milp.vars[flow[0]];
        assert_eq!((v.lower, v.upper), (-net.smax[0], net.smax[0]));
    }

    fn linear_setup(horizon: usize) -> (Network, UcInstance, LinearPfModel) {
        let case = four_bus();
        let net = Network::build(&case).unwrap();
        let data = UcData {
            horizon,
            load_profile: Some((0..horizon).map(|t| 0.9 + 0.1 * t as f64).collect()),
            ..Default::default()
        };
        let inst = UcInstance::from_data(&data, &case).unwrap();
        let spec = DispatchSpec::for_period(&net, &inst, 0, &[true, true]);
        let op = newton_power_flow(&net, &spec, &[1.0; 4], &[0.0; 4]).unwrap();
        let lin = linearize(&net, &op).unwrap();
        (net, inst, lin)
    }

    fn relu_model(lin: &LinearPfModel, rho: usize, seed: u64) -> CompactPwlModel {
        let nin = lin.input_dim();
        let mut s = seed;
        let mut g = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let w1 = Matrix::from_fn(nin, rho, |_, _| 0.5 * g());
        let b = (0..rho).map(|_| 0.1 * g()).collect();
        let mut m = CompactPwlModel::from_linear(lin.clone(), w1, b).unwrap();
        m.w2 = Matrix::from_fn(lin.output_dim(), rho, |_, _| 0.01 * g());
        m
    }

    #[test]
    fn l_ac_uc_solves_and_respects_limits() {
        let (net, inst, lin) = linear_setup(2);
        let uc = build_l_ac_uc(&inst, &net, &lin).unwrap();
        let (obj, x) = solve(&uc);
        let sched = extract_schedule(&inst, &uc, &x, obj).unwrap();
        let v = sched.v.as_ref().unwrap();
        for t in 0..2 {
            for b in 0..net.n {
                assert!(v[t][b] >= net.vmin[b] - 1e-9 && v[t][b] <= net.vmax[b] + 1e-9);
            }
            // Predicted injections equal generation minus load.
            let xin: Vec<f64> = match &uc.vars.network[t] {
                PeriodNetwork::Ac { x: xv, .. } => xv.iter().map(|&j| x[j]).collect(),
                _ => unreachable!(),
            };
            let y = lin.predict(&xin);
            for b in 0..net.n {
                let gen: f64 = inst.units_at(b).map(|(g, _)| sched.output(&inst, g, t)).sum();
                assert!((y[b] - (gen - inst.pd[t][b])).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn fixed_off_network_equals_linear_model() {
        let (net, inst, lin) = linear_setup(1);
        // Zero input weights make every pre-activation the constant -1.5.
        let mut model = relu_model(&lin, 3, 7);
        model.w1 = Matrix::zeros(lin.input_dim(), 3);
        model.b = vec![-1.5; 3];
        let bounds = BigMBounds {
            mmin: vec![-1.5; 3],
            mmax: vec![-1.5; 3],
            status: vec![ReluStatus::FixedOff; 3],
            provenance: vec![Provenance::Interval; 3],
        };
        let nn = build_nn_ac_uc(&inst, &net, &model, &bounds).unwrap();
        let l = build_l_ac_uc(&inst, &net, &lin).unwrap();
        assert_eq!(nn.relu_binary_count(), 0);
        assert_eq!(nn.binary_count(), l.binary_count());
        let (a, _) = solve(&nn);
        let (b, _) = solve(&l);
        assert!((a - b).abs() <= 1e-7 * (1.0 + b.abs()));
    }

    #[test]
    fn zero_update_network_matches_linear_objective() {
        let (net, inst, lin) = linear_setup(2);
        let model = relu_model(&lin, 3, 9).without_update();
        let bounds = interval_bounds(&model, &BoundBox::network(&net)).unwrap();
        let nn = build_nn_ac_uc(&inst, &net, &model, &bounds).unwrap();
        let l = build_l_ac_uc(&inst, &net, &lin).unwrap();
        let (a, _) = solve(&nn);
        let (b, _) = solve(&l);
        assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
    }

    #[test]
    fn binary_count_formula() {
        let (net, inst, lin) = linear_setup(3);
        let model = relu_model(&lin, 4, 3);
        let mut bounds = prune(&interval_bounds(&model, &BoundBox::network(&net)).unwrap());
        bounds.mmax[0] = -0.5;
        bounds.mmin[0] = bounds.mmin[0].min(-1.0);
        bounds.status[0] = ReluStatus::FixedOff;
        let uc = build_nn_ac_uc(&inst, &net, &model, &bounds).unwrap();
        let tier_bins: usize = inst
            .units
            .iter()
            .map(|u| if u.startup_tiers.len() > 1 { u.startup_tiers.len() } else { 0 })
            .sum::<usize>()
            * inst.horizon;
        let want = bounds.free_count() * inst.horizon + 3 * inst.units.len() * inst.horizon + tier_bins;
        assert_eq!(uc.binary_count(), want);
    }

    #[test]
    fn nn_ac_uc_outputs_follow_the_network() {
        let (net, inst, lin) = linear_setup(2);
        let model = relu_model(&lin, 3, 11);
        let bounds = interval_bounds(&model, &BoundBox::network(&net)).unwrap();
        let uc = build_nn_ac_uc(&inst, &net, &model, &bounds).unwrap();
        let (obj, x) = solve(&uc);
        extract_schedule(&inst, &uc, &x, obj).unwrap();
        for period in &uc.vars.network {
            let PeriodNetwork::Ac { x: xv, y, .. } = period else { panic!() };
            let xin: Vec<f64> = xv.iter().map(|&j| x[j]).collect();
            let want = model.predict(&xin);
            for (k, &j) in y.iter().enumerate() {
                assert!((x[j] - want[k]).abs() < 1e-7);
            }
        }
    }

    fn core_solution(uc: &UcModel, y: &[bool], u: &[bool], w: &[bool]) -> Vec<f64> {
        let mut x = vec![0.0; uc.milp.num_vars()];
        for t in 0..y.len() {
            x[uc.vars.y[0][t]] = f64::from(u8::from(y[t]));
            x[uc.vars.u[0][t]] = f64::from(u8::from(u[t]));
            x[uc.vars.w[0][t]] = f64::from(u8::from(w[t]));
        }
        x
    }

    #[test]
    fn extraction_accepts_valid_start() {
        let inst = instance(vec![unit(0.1, 1.0, 1, 1, -1)], vec![0.0, 0.0]);
        let uc = build_core_uc(&inst).unwrap();
        let x = core_solution(&uc, &[true, true], &[true, false], &[false, false]);
        let s = extract_schedule(&inst, &uc, &x, 1e9).unwrap();
        assert_eq!(s.y[0], vec![true, true]);
    }

    #[test]
    fn extraction_rejects_unflagged_shutdown() {
        let inst = instance(vec![unit(0.1, 1.0, 1, 1, -1)], vec![0.0, 0.0]);
        let uc = build_core_uc(&inst).unwrap();
        let x = core_solution(&uc, &[true, false], &[true, false], &[false, false]);
        assert!(matches!(extract_schedule(&inst, &uc, &x, 1e9), Err(Error::LogicViolation(_))));
    }

    #[test]
    fn extraction_rejects_fractional_binary() {
        let inst = instance(vec![unit(0.1, 1.0, 1, 1, -1)], vec![0.0]);
        let uc = build_core_uc(&inst).unwrap();
        let mut x = core_solution(&uc, &[true], &[true], &[false]);
        x[uc.vars.y[0][0]] = 0.7;
        assert!(extract_schedule(&inst, &uc, &x, 1e9).is_err());
    }
}
