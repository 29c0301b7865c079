//! Commitment schedules and an independent checker of the unit-logic and
//! generation constraints.
//!
//! Nothing here is shared with the model builders in [`crate::uc`]: the
//! checker re-derives every constraint directly from the instance data.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::instance::{UcInstance, UcUnit};

/// A commitment schedule with dispatch, indexed `[unit][t]` (`[t][..]` for
/// network quantities).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UcSchedule {
    pub y: Vec<Vec<bool>>,
    pub u: Vec<Vec<bool>>,
    pub w: Vec<Vec<bool>>,
    pub p_delta: Vec<Vec<f64>>,
    pub reserve: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    /// `[condenser][t]`.
    pub q_sc: Vec<Vec<f64>>,
    /// Voltage magnitudes `[t][bus]` when the formulation carries them.
    pub v: Option<Vec<Vec<f64>>>,
    /// Full angle vectors `[t][bus]` (reference angle 0).
    pub theta: Option<Vec<Vec<f64>>>,
    /// Apparent flows predicted by the formulation, `[t][line]`.
    pub s_ft: Option<Vec<Vec<f64>>>,
    pub s_tf: Option<Vec<Vec<f64>>>,
    pub objective: f64,
}

impl UcSchedule {
    pub fn units(&self) -> usize {
        self.y.len()
    }

    pub fn horizon(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    /// Total active output `p^Δ + Pmin·y` of unit `g` at `t`.
    pub fn output(&self, inst: &UcInstance, g: usize, t: usize) -> f64 {
        self.p_delta[g][t] + if self.y[g][t] { inst.units[g].pmin } else { 0.0 }
    }
}

fn bit(b: bool) -> i64 {
    i64::from(b)
}

fn u_at(unit: &UcUnit, sched: &UcSchedule, g: usize, t: i64) -> i64 {
    if t >= 1 {
        bit(sched.u[g][(t - 1) as usize])
    } else if unit.history_u(t) > 0.5 {
        1
    } else {
        0
    }
}

fn w_at(unit: &UcUnit, sched: &UcSchedule, g: usize, t: i64) -> i64 {
    if t >= 1 {
        bit(sched.w[g][(t - 1) as usize])
    } else if unit.history_w(t) > 0.5 {
        1
    } else {
        0
    }
}

fn check_shape(inst: &UcInstance, sched: &UcSchedule) -> Result<()> {
    let (g, t) = (inst.units.len(), inst.horizon);
    for (what, m) in [("y", &sched.y), ("u", &sched.u), ("w", &sched.w)] {
        check_len(what, g, m.len())?;
        for row in m {
            check_len(what, t, row.len())?;
        }
    }
    for (what, m) in [
        ("p_delta", &sched.p_delta),
        ("reserve", &sched.reserve),
        ("q", &sched.q),
    ] {
        check_len(what, g, m.len())?;
        for row in m {
            check_len(what, t, row.len())?;
        }
    }
    check_len("q_sc", inst.condensers.len(), sched.q_sc.len())?;
    Ok(())
}

/// Check the binary logic: minimum up/down windows, status linking,
/// exclusive start/stop and the initial shut-down restriction.
pub fn check_logic(inst: &UcInstance, sched: &UcSchedule) -> Result<()> {
    check_shape(inst, sched)?;
    for (g, unit) in inst.units.iter().enumerate() {
        let y_prev0 = bit(unit.initially_on());
        for t in 1..=inst.horizon as i64 {
            let ti = (t - 1) as usize;
            let y = bit(sched.y[g][ti]);
            let yp = if t == 1 { y_prev0 } else { bit(sched.y[g][ti - 1]) };
            let (u, w) = (bit(sched.u[g][ti]), bit(sched.w[g][ti]));
            let fail = |what: &str| {
                Err(Error::LogicViolation(format!(
                    "unit {} period {t}: {what}",
                    unit.name
                )))
            };
            if y - yp != u - w {
                return fail("status change does not match start/stop flags");
            }
            if u + w > 1 {
                return fail("starts and stops in the same period");
            }
            let ups: i64 = (t - unit.min_up as i64 + 1..=t).map(|k| u_at(unit, sched, g, k)).sum();
            if ups > y {
                return fail("minimum up time violated");
            }
            let downs: i64 =
                (t - unit.min_down as i64 + 1..=t).map(|k| w_at(unit, sched, g, k)).sum();
            if downs > 1 - y {
                return fail("minimum down time violated");
            }
            if t == 1 && unit.p_init > unit.shutdown_cap && w == 1 {
                return fail("shuts down in the first period from above its shut-down limit");
            }
        }
    }
    Ok(())
}

/// Largest violation of the reserve, start-up/shut-down, ramp and
/// generation-limit constraints by the schedule's dispatch (p.u.).
pub fn dispatch_violation(inst: &UcInstance, sched: &UcSchedule) -> Result<f64> {
    check_shape(inst, sched)?;
    let mut worst = 0.0f64;
    let mut note = |v: f64| worst = worst.max(v);
    let big_t = inst.horizon;
    for t in 0..big_t {
        let total: f64 = (0..inst.units.len()).map(|g| sched.reserve[g][t]).sum();
        note(inst.reserve[t] - total);
    }
    for (g, unit) in inst.units.iter().enumerate() {
        let span = unit.pmax - unit.pmin;
        for t in 0..big_t {
            let (p, r, q) = (sched.p_delta[g][t], sched.reserve[g][t], sched.q[g][t]);
            let y = f64::from(u8::from(sched.y[g][t]));
            let u = f64::from(u8::from(sched.u[g][t]));
            let w_next = if t + 1 < big_t {
                f64::from(u8::from(sched.w[g][t + 1]))
            } else {
                0.0
            };
            note(-p);
            note(-r);
            if unit.min_up >= 2 {
                note(p + r - (span * y - (unit.pmax - unit.startup_cap) * u - (unit.pmax - unit.shutdown_cap) * w_next));
            } else {
                note(p + r - (span * y - (unit.pmax - unit.startup_cap) * u));
                note(p - (span * y - (unit.pmax - unit.shutdown_cap) * w_next));
            }
            let p_prev = if t == 0 { unit.initial_delta() } else { sched.p_delta[g][t - 1] };
            note(p + r - p_prev - unit.ramp_up);
            note(p_prev - p - unit.ramp_down);
            note(unit.qmin * y - q);
            note(q - unit.qmax * y);
        }
    }
    for (c, cond) in inst.condensers.iter().enumerate() {
        for t in 0..big_t {
            note(cond.qmin - sched.q_sc[c][t]);
            note(sched.q_sc[c][t] - cond.qmax);
        }
    }
    Ok(worst)
}

/// Hours the unit has been off when it starts at period `t` (1-based).
fn downtime_at_start(unit: &UcUnit, sched: &UcSchedule, g: usize, t: i64) -> Option<i64> {
    let mut k = t - 1;
    while k >= 1 {
        if sched.w[g][(k - 1) as usize] {
            return Some(t - k);
        }
        k -= 1;
    }
    if unit.initial_status < 0 {
        Some(t - (1 + unit.initial_status as i64))
    } else {
        None
    }
}

/// Start-up cost of a start after `downtime` hours off.
pub fn startup_cost(unit: &UcUnit, downtime: Option<i64>) -> f64 {
    let tiers = &unit.startup_tiers;
    let coldest = tiers.last().map_or(0.0, |t| t.cost);
    let Some(d) = downtime else { return coldest };
    for s in 0..tiers.len().saturating_sub(1) {
        if d >= tiers[s].lag as i64 && d < tiers[s + 1].lag as i64 {
            return tiers[s].cost;
        }
    }
    coldest
}

/// Production plus start-up cost of the schedule, recomputed from the
/// instance's cost curves.
pub fn schedule_cost(inst: &UcInstance, sched: &UcSchedule) -> Result<f64> {
    check_shape(inst, sched)?;
    let mut total = 0.0;
    for (g, unit) in inst.units.iter().enumerate() {
        for t in 0..inst.horizon {
            if sched.y[g][t] {
                total += unit.cost.cost_at_min() + unit.cost.incremental_cost(sched.p_delta[g][t]);
            }
            if sched.u[g][t] {
                total += startup_cost(unit, downtime_at_start(unit, sched, g, t as i64 + 1));
            }
        }
    }
    Ok(total)
}

/// Empty schedule shaped for `inst` with every unit off.
pub fn all_off(inst: &UcInstance) -> UcSchedule {
    let (g, t) = (inst.units.len(), inst.horizon);
    UcSchedule {
        y: vec![vec![false; t]; g],
        u: vec![vec![false; t]; g],
        w: vec![vec![false; t]; g],
        p_delta: vec![vec![0.0; t]; g],
        reserve: vec![vec![0.0; t]; g],
        q: vec![vec![0.0; t]; g],
        q_sc: vec![vec![0.0; t]; inst.condensers.len()],
        ..UcSchedule::default()
    }
}

/// Derive `u` and `w` from a status matrix `y` and the initial status.
pub fn with_status(inst: &UcInstance, y: Vec<Vec<bool>>) -> UcSchedule {
    let mut s = all_off(inst);
    for (g, unit) in inst.units.iter().enumerate() {
        let mut prev = unit.initially_on();
        for t in 0..inst.horizon {
            let cur = y[g][t];
            s.u[g][t] = cur && !prev;
            s.w[g][t] = !cur && prev;
            prev = cur;
        }
    }
    s.y = y;
    s
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::instance::{CostCurve, StartupTier};
    use alloc::string::ToString;

    pub fn unit(pmin: f64, pmax: f64, min_up: u32, min_down: u32, status: i32) -> UcUnit {
        UcUnit {
            name: "g".to_string(),
            gen_index: 0,
            bus: 0,
            pmin,
            pmax,
            qmin: -1.0,
            qmax: 1.0,
            startup_cap: pmax,
            shutdown_cap: pmax,
            ramp_up: pmax,
            ramp_down: pmax,
            min_up,
            min_down,
            p_init: 0.0,
            initial_status: status,
            cost: CostCurve::new(vec![(pmin, 10.0), (pmax, 10.0 + 20.0 * (pmax - pmin))]).unwrap(),
            startup_tiers: vec![StartupTier { lag: 1, cost: 5.0 }],
        }
    }

    pub fn instance(units: Vec<UcUnit>, loads: Vec<f64>) -> UcInstance {
        let horizon = loads.len();
        UcInstance {
            horizon,
            hours: (1..=horizon as u32).collect(),
            bus_count: 1,
            units,
            condensers: Vec::new(),
            pd: loads.iter().map(|&l| vec![l]).collect(),
            qd: loads.iter().map(|_| vec![0.0]).collect(),
            reserve: vec![0.0; horizon],
        }
    }
}
