//! Per-unitized MATPOWER case records.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Pq,
    Pv,
    Ref,
}

impl BusType {
    pub fn from_code(code: u32) -> Option<BusType> {
        match code {
            1 => Some(BusType::Pq),
            2 => Some(BusType::Pv),
            3 => Some(BusType::Ref),
            _ => None,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            BusType::Pq => 1,
            BusType::Pv => 2,
            BusType::Ref => 3,
        }
    }
}

/// One row of `mpc.bus`, powers in p.u. on the case base.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub kind: BusType,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub area: u32,
    /// Voltage magnitude from the case's stored solution (p.u.).
    pub vm: f64,
    /// Voltage angle from the case's stored solution (radians).
    pub va: f64,
    pub base_kv: f64,
    pub zone: u32,
    pub vmax: f64,
    pub vmin: f64,
}

/// One row of `mpc.branch`. Angles in radians, `rate_a` in p.u.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    pub rate_a: f64,
    pub rate_b: f64,
    pub rate_c: f64,
    /// Off-nominal tap ratio; 0 in the file means 1.
    pub tap: f64,
    pub shift: f64,
    pub in_service: bool,
    pub ang_min: f64,
    pub ang_max: f64,
}

impl Branch {
    pub fn tap_ratio(&self) -> f64 {
        if self.tap == 0.0 {
            1.0
        } else {
            self.tap
        }
    }
}

/// One row of `mpc.gen`, powers in p.u.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus: u32,
    pub pg: f64,
    pub qg: f64,
    pub qmax: f64,
    pub qmin: f64,
    pub vg: f64,
    pub mbase: f64,
    pub in_service: bool,
    pub pmax: f64,
    pub pmin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostModel {
    PiecewiseLinear,
    Polynomial,
}

/// One row of `mpc.gencost`, kept in the file's own units ($/h vs MW).
#[derive(Debug, Clone, PartialEq)]
pub struct GenCost {
    pub model: CostModel,
    pub startup: f64,
    pub shutdown: f64,
    /// Breakpoint pairs (MW, $/h) for piecewise-linear costs, or polynomial
    /// coefficients highest order first.
    pub coeffs: Vec<f64>,
}

impl GenCost {
    /// Cost in $/h at output `mw`.
    pub fn eval_mw(&self, mw: f64) -> f64 {
        match self.model {
            CostModel::Polynomial => self.coeffs.iter().fold(0.0, |acc, c| acc * mw + c),
            CostModel::PiecewiseLinear => {
                let pts: Vec<(f64, f64)> = self.coeffs.chunks(2).map(|c| (c[0], c[1])).collect();
                if pts.len() < 2 {
                    return pts.first().map_or(0.0, |p| p.1);
                }
                let k = pts
                    .windows(2)
                    .position(|w| mw <= w[1].0)
                    .unwrap_or(pts.len() - 2);
                let (x0, y0) = pts[k];
                let (x1, y1) = pts[k + 1];
                if x1 == x0 {
                    y0
                } else {
                    y0 + (y1 - y0) * (mw - x0) / (x1 - x0)
                }
            }
        }
    }
}

/// A parsed and per-unitized power system case.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub gencosts: Vec<GenCost>,
}

impl RawCase {
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn ref_bus_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusType::Ref)
    }

    /// Check the structural invariants every downstream module relies on.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0) {
            return Err(Error::validation(format!(
                "baseMVA must be positive, got {}",
                self.base_mva
            )));
        }
        let refs = self.buses.iter().filter(|b| b.kind == BusType::Ref).count();
        if refs != 1 {
            return Err(Error::validation(format!(
                "expected exactly one reference bus, found {refs}"
            )));
        }
        for (k, bus) in self.buses.iter().enumerate() {
            if self.buses[..k].iter().any(|b| b.id == bus.id) {
                return Err(Error::validation(format!("duplicate bus id {}", bus.id)));
            }
            if bus.vmin > bus.vmax {
                return Err(Error::validation(format!(
                    "bus {}: Vmin {} exceeds Vmax {}",
                    bus.id, bus.vmin, bus.vmax
                )));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            for end in [br.from, br.to] {
                if self.bus_index(end).is_none() {
                    return Err(Error::validation(format!(
                        "branch {} references unknown bus {end}",
                        k + 1
                    )));
                }
            }
            if br.in_service && !(br.rate_a > 0.0) {
                return Err(Error::validation(format!(
                    "branch {} ({}-{}) has non-positive rateA",
                    k + 1,
                    br.from,
                    br.to
                )));
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if self.bus_index(g.bus).is_none() {
                return Err(Error::validation(format!(
                    "generator {} references unknown bus {}",
                    k + 1,
                    g.bus
                )));
            }
        }
        Ok(())
    }

    /// Scale every thermal limit by `1 - factor`.
    pub fn derate_thermal_limits(&self, factor: f64) -> Result<RawCase> {
        if !(0.0..1.0).contains(&factor) {
            return Err(Error::validation(format!(
                "derate factor must lie in [0, 1), got {factor}"
            )));
        }
        let mut out = self.clone();
        for br in &mut out.branches {
            br.rate_a *= 1.0 - factor;
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    pub fn bus(id: u32, kind: BusType, pd: f64, qd: f64) -> Bus {
        Bus {
            id,
            kind,
            pd,
            qd,
            gs: 0.0,
            bs: 0.0,
            area: 1,
            vm: 1.0,
            va: 0.0,
            base_kv: 100.0,
            zone: 1,
            vmax: 1.1,
            vmin: 0.9,
        }
    }

    pub fn branch(from: u32, to: u32, r: f64, x: f64, rate: f64) -> Branch {
        Branch {
            from,
            to,
            r,
            x,
            b: 0.0,
            rate_a: rate,
            rate_b: 0.0,
            rate_c: 0.0,
            tap: 0.0,
            shift: 0.0,
            in_service: true,
            ang_min: -0.5,
            ang_max: 0.5,
        }
    }

    pub fn generator(bus: u32, pmin: f64, pmax: f64, qmin: f64, qmax: f64) -> Generator {
        Generator {
            bus,
            pg: 0.0,
            qg: 0.0,
            qmax,
            qmin,
            vg: 1.0,
            mbase: 100.0,
            in_service: true,
            pmax,
            pmin,
        }
    }

    /// Slack bus 1 with a generator, PQ bus 2 with a load, one lossless line.
    pub fn two_bus(pd: f64, qd: f64) -> RawCase {
        RawCase {
            name: "two_bus".into(),
            base_mva: 100.0,
            buses: vec![bus(1, BusType::Ref, 0.0, 0.0), bus(2, BusType::Pq, pd, qd)],
            branches: vec![branch(1, 2, 0.0, 0.1, 1.0)],
            generators: vec![generator(1, 0.0, 3.0, -3.0, 3.0)],
            gencosts: vec![GenCost {
                model: CostModel::Polynomial,
                startup: 0.0,
                shutdown: 0.0,
                coeffs: vec![0.0, 20.0, 0.0],
            }],
        }
    }

    /// Small meshed 4-bus system with losses, charging, a tap and a shunt.
    pub fn four_bus() -> RawCase {
        let mut buses = vec![
            bus(1, BusType::Ref, 0.0, 0.0),
            bus(2, BusType::Pv, 0.3, 0.1),
            bus(3, BusType::Pq, 0.6, 0.2),
            bus(4, BusType::Pq, 0.5, 0.15),
        ];
        buses[3].bs = 0.05;
        buses[2].gs = 0.01;
        let mut branches = vec![
            branch(1, 2, 0.01, 0.08, 1.5),
            branch(1, 3, 0.02, 0.12, 1.5),
            branch(2, 3, 0.015, 0.1, 1.0),
            branch(3, 4, 0.01, 0.09, 1.0),
            branch(2, 4, 0.02, 0.15, 1.0),
        ];
        branches[0].b = 0.04;
        branches[3].tap = 0.98;
        branches[4].shift = 0.02;
        RawCase {
            name: "four_bus".into(),
            base_mva: 100.0,
            buses,
            branches,
            generators: vec![
                generator(1, 0.1, 2.0, -1.0, 1.5),
                generator(2, 0.05, 1.0, -0.5, 0.8),
            ],
            gencosts: vec![
                GenCost {
                    model: CostModel::Polynomial,
                    startup: 0.0,
                    shutdown: 0.0,
                    coeffs: vec![0.01, 20.0, 0.0],
                },
                GenCost {
                    model: CostModel::Polynomial,
                    startup: 0.0,
                    shutdown: 0.0,
                    coeffs: vec![0.02, 30.0, 0.0],
                },
            ],
        }
    }
}
