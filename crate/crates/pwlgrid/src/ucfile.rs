//! Unit commitment data documents (TOML).
//!
//! ```toml
//! horizon = 24
//! load_profile = [0.7, 0.68, ...]   # multipliers on the case's base loads
//! reserve = [0.2]                   # p.u.; one value or one per period
//!
//! [[unit]]
//! gen = 1                           # 1-based row of the case's gen table
//! pmin = 0.5                        # p.u.
//! min_up = 3                        # hours
//! initial_status = 8                # hours on (>0) or off (<0)
//! p_init = 1.5
//! cost = [[0.5, 40.0], [3.3, 300.0]]  # (p.u., $/h) breakpoints
//! startup = [[1, 200.0], [4, 450.0]]  # (hours off, $) tiers
//!
//! [[bus_load]]
//! bus = 3                           # case bus id
//! p = [0.9, 0.95, ...]              # p.u. per period
//! ```

use pwlgrid_core::case::RawCase;
use pwlgrid_core::instance::{UcData, UcInstance, UnitData};
use serde::{Deserialize, Serialize};

use crate::FormatError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitDoc {
    pub gen: usize,
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
    pub cost: Option<Vec<(f64, f64)>>,
    pub startup: Option<Vec<(u32, f64)>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusLoadDoc {
    pub bus: u32,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UcDoc {
    pub horizon: usize,
    pub hours: Option<Vec<u32>>,
    pub load_profile: Option<Vec<f64>>,
    pub reserve: Option<Vec<f64>>,
    #[serde(default, rename = "unit")]
    pub units: Vec<UnitDoc>,
    #[serde(default, rename = "bus_load")]
    pub bus_loads: Vec<BusLoadDoc>,
}

impl UcDoc {
    pub fn to_data(&self) -> Result<UcData, FormatError> {
        let mut units = Vec::new();
        for u in &self.units {
            if u.gen == 0 {
                return Err(FormatError::Invalid("unit gen indices are 1-based".into()));
            }
            units.push(UnitData {
                gen_index: u.gen - 1,
                pmin: u.pmin,
                pmax: u.pmax,
                startup_cap: u.startup_cap,
                shutdown_cap: u.shutdown_cap,
                ramp_up: u.ramp_up,
                ramp_down: u.ramp_down,
                min_up: u.min_up,
                min_down: u.min_down,
                p_init: u.p_init,
                initial_status: u.initial_status,
                cost: u.cost.clone(),
                startup: u.startup.clone(),
            });
        }
        Ok(UcData {
            horizon: self.horizon,
            hours: self.hours.clone(),
            units,
            load_profile: self.load_profile.clone(),
            bus_loads: self.bus_loads.iter().map(|b| (b.bus, b.p.clone())).collect(),
            reserve: self.reserve.clone(),
        })
    }
}

/// Parse a UC document and build the instance against `case`.
pub fn load_uc_instance(text: &str, case: &RawCase) -> Result<UcInstance, FormatError> {
    let doc: UcDoc = toml::from_str(text).map_err(|e| FormatError::Toml(e.to_string()))?;
    UcInstance::from_data(&doc.to_data()?, case).map_err(|e| FormatError::Invalid(e.to_string()))
}
