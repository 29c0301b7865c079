//! Unit commitment instance data: temporal generator parameters, cost
//! curves, hourly loads and reserves, all in p.u. on the case base.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::case::{CostModel, RawCase};
use crate::error::{Error, Result};

/// Convex piecewise-linear production cost over total output.
///
/// `points[0].0` is the unit's minimum output and the last breakpoint its
/// maximum; costs are $/h.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCurve {
    pub points: Vec<(f64, f64)>,
}

impl CostCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<CostCurve> {
        if points.is_empty() {
            return Err(Error::validation("cost curve needs at least one breakpoint"));
        }
        let mut last_slope = f64::NEG_INFINITY;
        for w in points.windows(2) {
            let dx = w[1].0 - w[0].0;
            if dx < 0.0 {
                return Err(Error::validation("cost curve breakpoints must be increasing"));
            }
            if dx == 0.0 {
                continue;
            }
            let slope = (w[1].1 - w[0].1) / dx;
            if slope < last_slope - 1e-9 * (1.0 + last_slope.abs()) {
                return Err(Error::validation(format!(
                    "cost curve is not convex: slope {slope} follows {last_slope}"
                )));
            }
            last_slope = slope;
        }
        Ok(CostCurve { points })
    }

    pub fn cost_at_min(&self) -> f64 {
        self.points[0].1
    }

    /// `(width, slope)` for each segment above the minimum output.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .filter(|w| w[1].0 > w[0].0)
            .map(|w| (w[1].0 - w[0].0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
            .collect()
    }

    /// Cost of producing `delta` above the minimum output, excluding the
    /// fixed cost at minimum.
    pub fn incremental_cost(&self, delta: f64) -> f64 {
        let mut left = delta.max(0.0);
        let mut cost = 0.0;
        let segs = self.segments();
        for (k, (width, slope)) in segs.iter().enumerate() {
            let take = if k + 1 == segs.len() { left } else { left.min(*width) };
            cost += take * slope;
            left -= take;
            if left <= 0.0 {
                break;
            }
        }
        cost
    }

    pub fn max_slope(&self) -> f64 {
        self.segments().iter().fold(0.0, |m, s| m.max(s.1.abs()))
    }
}

/// Startup cost tier: applies when the unit has been down for at least
/// `lag` hours (and less than the next tier's lag).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartupTier {
    pub lag: u32,
    pub cost: f64,
}

/// A committable generating unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UcUnit {
    pub name: String,
    /// Row of the generator in the case's generator table.
    pub gen_index: usize,
    /// Internal index of the bus the unit sits at.
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub startup_cap: f64,
    pub shutdown_cap: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub min_up: u32,
    pub min_down: u32,
    pub p_init: f64,
    /// Hours in the current status before the horizon: positive when on,
    /// negative when off. Never zero.
    pub initial_status: i32,
    pub cost: CostCurve,
    pub startup_tiers: Vec<StartupTier>,
}

impl UcUnit {
    pub fn initially_on(&self) -> bool {
        self.initial_status > 0
    }

    /// Start-up indicator before the horizon (`t <= 0`).
    pub fn history_u(&self, t: i64) -> f64 {
        debug_assert!(t <= 0);
        if self.initial_status > 0 && t == 1 - self.initial_status as i64 {
            1.0
        } else {
            0.0
        }
    }

    /// Shut-down indicator before the horizon (`t <= 0`).
    pub fn history_w(&self, t: i64) -> f64 {
        debug_assert!(t <= 0);
        if self.initial_status < 0 && t == 1 + self.initial_status as i64 {
            1.0
        } else {
            0.0
        }
    }

    /// `p^Δ` in the hour before the horizon.
    pub fn initial_delta(&self) -> f64 {
        if self.initially_on() {
            (self.p_init - self.pmin).max(0.0)
        } else {
            0.0
        }
    }
}

/// Generator with no active power range, run as an always-on reactive source.
#[derive(Debug, Clone, PartialEq)]
pub struct Condenser {
    pub gen_index: usize,
    pub bus: usize,
    pub qmin: f64,
    pub qmax: f64,
}

/// Validated unit commitment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct UcInstance {
    pub horizon: usize,
    /// Hour-of-day label (1-based) for each period.
    pub hours: Vec<u32>,
    pub bus_count: usize,
    pub units: Vec<UcUnit>,
    pub condensers: Vec<Condenser>,
    /// `pd[t][b]`, p.u.
    pub pd: Vec<Vec<f64>>,
    pub qd: Vec<Vec<f64>>,
    pub reserve: Vec<f64>,
}

/// Optional per-unit overrides; `None` falls back to the defaulting scheme.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitData {
    /// Row of the generator in the case (0-based).
    pub gen_index: usize,
    pub pmin: Option<f64>,
    pub pmax: Option<f64>,
    pub startup_cap: Option<f64>,
    pub shutdown_cap: Option<f64>,
    pub ramp_up: Option<f64>,
    pub ramp_down: Option<f64>,
    pub min_up: Option<i64>,
    pub min_down: Option<i64>,
    pub p_init: Option<f64>,
    pub initial_status: Option<i32>,
    /// Breakpoints `(p.u., $/h)`.
    pub cost: Option<Vec<(f64, f64)>>,
    /// `(lag hours, $)` tiers.
    pub startup: Option<Vec<(u32, f64)>>,
}

/// Unvalidated instance description as read from a UC data document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UcData {
    pub horizon: usize,
    pub hours: Option<Vec<u32>>,
    pub units: Vec<UnitData>,
    /// Multipliers on the case's base loads, one per period.
    pub load_profile: Option<Vec<f64>>,
    /// Explicit hourly active loads (p.u.) by bus id; overrides the profile.
    pub bus_loads: Vec<(u32, Vec<f64>)>,
    pub reserve: Option<Vec<f64>>,
}

impl UcInstance {
    /// Build an instance against `case`, filling absent parameters with the
    /// least-restrictive defaults.
    pub fn from_data(data: &UcData, case: &RawCase) -> Result<UcInstance> {
        let horizon = data.horizon;
        if horizon == 0 {
            return Err(Error::validation("horizon must be at least one period"));
        }
        let hours = match &data.hours {
            Some(h) => {
                crate::error::check_len("hour labels", horizon, h.len())?;
                h.clone()
            }
            None => (1..=horizon as u32).collect(),
        };
        let n = case.buses.len();

        // Loads.
        let profile = match &data.load_profile {
            Some(p) => {
                crate::error::check_len("load profile", horizon, p.len())?;
                p.clone()
            }
            None => vec![1.0; horizon],
        };
        let mut pd: Vec<Vec<f64>> = profile
            .iter()
            .map(|m| case.buses.iter().map(|b| b.pd * m).collect())
            .collect();
        for (id, series) in &data.bus_loads {
            let b = case
                .bus_index(*id)
                .ok_or_else(|| Error::validation(format!("load references unknown bus {id}")))?;
            crate::error::check_len("bus load series", horizon, series.len())?;
            for (t, v) in series.iter().enumerate() {
                pd[t][b] = *v;
            }
        }
        let mut qd = vec![vec![0.0; n]; horizon];
        for b in 0..n {
            let base = &case.buses[b];
            let ratio = if base.pd != 0.0 { base.qd / base.pd } else { 0.0 };
            for t in 0..horizon {
                if !pd[t][b].is_finite() {
                    return Err(Error::NonFinite("bus load"));
                }
                qd[t][b] = pd[t][b] * ratio;
            }
        }
        let reserve = match &data.reserve {
            Some(r) if r.len() == 1 => vec![r[0]; horizon],
            Some(r) => {
                crate::error::check_len("reserve series", horizon, r.len())?;
                r.clone()
            }
            None => vec![0.0; horizon],
        };

        for u in &data.units {
            if u.gen_index >= case.generators.len() {
                return Err(Error::validation(format!(
                    "unit data references unknown generator {}",
                    u.gen_index + 1
                )));
            }
        }

        let mut units = Vec::new();
        let mut condensers = Vec::new();
        for (gi, g) in case.generators.iter().enumerate() {
            if !g.in_service {
                continue;
            }
            let bus = case.bus_index(g.bus).ok_or_else(|| {
                Error::validation(format!("generator {} at unknown bus {}", gi + 1, g.bus))
            })?;
            let over = data.units.iter().find(|u| u.gen_index == gi);
            let d = over.cloned().unwrap_or(UnitData {
                gen_index: gi,
                ..Default::default()
            });
            let pmin = d.pmin.unwrap_or(g.pmin);
            let pmax = d.pmax.unwrap_or(g.pmax);
            if pmax == 0.0 && pmin == 0.0 {
                condensers.push(Condenser {
                    gen_index: gi,
                    bus,
                    qmin: g.qmin,
                    qmax: g.qmax,
                });
                continue;
            }
            let su = d.startup_cap.unwrap_or(pmax);
            let sd = d.shutdown_cap.unwrap_or(pmax);
            let ramp_up = d.ramp_up.unwrap_or(pmax);
            let ramp_down = d.ramp_down.unwrap_or(pmax);
            let min_up = d.min_up.unwrap_or(1);
            let min_down = d.min_down.unwrap_or(1);
            if min_up < 1 || min_down < 1 {
                return Err(Error::validation(format!(
                    "generator {}: minimum up/down times must be at least 1 h",
                    gi + 1
                )));
            }
            if ramp_up < 0.0 || ramp_down < 0.0 {
                return Err(Error::validation(format!(
                    "generator {}: negative ramp limit",
                    gi + 1
                )));
            }
            if !(pmin <= pmax) || !(pmin <= su && su <= pmax) || !(pmin <= sd && sd <= pmax) {
                return Err(Error::validation(format!(
                    "generator {}: require Pmin <= SU, SD <= Pmax",
                    gi + 1
                )));
            }
            let cost = match &d.cost {
                Some(pts) => CostCurve::new(pts.clone())?,
                None => default_cost_curve(case, gi, pmin, pmax)?,
            };
            let tiers: Vec<StartupTier> = match &d.startup {
                Some(t) if !t.is_empty() => {
                    t.iter().map(|&(lag, cost)| StartupTier { lag, cost }).collect()
                }
                _ => {
                    let c = case.gencosts.get(gi).map_or(0.0, |c| c.startup);
                    vec![StartupTier { lag: 1, cost: c }]
                }
            };
            for w in tiers.windows(2) {
                if w[1].lag <= w[0].lag {
                    return Err(Error::validation(format!(
                        "generator {}: startup tier lags must increase",
                        gi + 1
                    )));
                }
                if w[1].cost < w[0].cost {
                    return Err(Error::validation(format!(
                        "generator {}: startup costs must not decrease with downtime",
                        gi + 1
                    )));
                }
            }
            let coldest = tiers.last().map_or(1, |t| t.lag).max(min_down as u32);
            let initial_status = d.initial_status.unwrap_or(-(coldest as i32));
            if initial_status == 0 {
                return Err(Error::validation(format!(
                    "generator {}: initial status must be non-zero",
                    gi + 1
                )));
            }
            let p_init = d.p_init.unwrap_or(0.0);
            units.push(UcUnit {
                name: format!("g{}", gi + 1),
                gen_index: gi,
                bus,
                pmin,
                pmax,
                qmin: g.qmin,
                qmax: g.qmax,
                startup_cap: su,
                shutdown_cap: sd,
                ramp_up,
                ramp_down,
                min_up: min_up as u32,
                min_down: min_down as u32,
                p_init,
                initial_status,
                cost,
                startup_tiers: tiers,
            });
        }
        Ok(UcInstance {
            horizon,
            hours,
            bus_count: n,
            units,
            condensers,
            pd,
            qd,
            reserve,
        })
    }

    /// Restrict the instance to the given periods (0-based), keeping hour
    /// labels and initial conditions.
    pub fn subsample(&self, periods: &[usize]) -> Result<UcInstance> {
        if periods.is_empty() {
            return Err(Error::validation("empty period selection"));
        }
        if let Some(&t) = periods.iter().find(|&&t| t >= self.horizon) {
            return Err(Error::validation(format!("period {t} beyond horizon")));
        }
        Ok(UcInstance {
            horizon: periods.len(),
            hours: periods.iter().map(|&t| self.hours[t]).collect(),
            bus_count: self.bus_count,
            units: self.units.clone(),
            condensers: self.condensers.clone(),
            pd: periods.iter().map(|&t| self.pd[t].clone()).collect(),
            qd: periods.iter().map(|&t| self.qd[t].clone()).collect(),
            reserve: periods.iter().map(|&t| self.reserve[t]).collect(),
        })
    }

    pub fn total_load(&self, t: usize) -> f64 {
        self.pd[t].iter().sum()
    }

    /// Units located at bus `b`.
    pub fn units_at(&self, b: usize) -> impl Iterator<Item = (usize, &UcUnit)> {
        self.units.iter().enumerate().filter(move |(_, u)| u.bus == b)
    }
}

/// Three-segment secant approximation of a polynomial cost, or the case's
/// own piecewise-linear curve clipped to `[pmin, pmax]`.
fn default_cost_curve(case: &RawCase, gi: usize, pmin: f64, pmax: f64) -> Result<CostCurve> {
    let base = case.base_mva;
    let Some(gc) = case.gencosts.get(gi) else {
        return CostCurve::new(vec![(pmin, 0.0), (pmax, 0.0)]);
    };
    let pts: Vec<(f64, f64)> = match gc.model {
        CostModel::Polynomial => (0..=3)
            .map(|k| {
                let p = pmin + (pmax - pmin) * k as f64 / 3.0;
                (p, gc.eval_mw(p * base))
            })
            .collect(),
        CostModel::PiecewiseLinear => {
            let mut pts: Vec<(f64, f64)> = vec![(pmin, gc.eval_mw(pmin * base))];
            for c in gc.coeffs.chunks(2) {
                let p = c[0] / base;
                if p > pmin && p < pmax {
                    pts.push((p, c[1]));
                }
            }
            pts.push((pmax, gc.eval_mw(pmax * base)));
            pts
        }
    };
    CostCurve::new(pts)
}
