//! Quasi-static time-domain simulation of a feeder with composite loads.
//!
//! The network is algebraic and solved every step; load dynamics (A/C stall
//! and thermal protection, three-phase motor slip) advance between solves.

mod engine;
mod hetero;
mod result;

pub use engine::{LoadPoint, Simulator, SteadySnapshot};
pub use hetero::draw_node_fractions;
pub use result::{recovery_crossing, AreaSeries, SimulationResult};

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BusId;
use crate::load::{LoadModel, Motor1PhaseParameters, Motor3PhaseParameters, PvParameters, ZipParameters};

/// Shunt fault applied at one bus for a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub bus: BusId,
    pub start: f64,
    pub duration: f64,
    /// Fault admittance `G + jB` in system per unit.
    pub fault_shunt: Complex64,
}

impl FaultScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !(self.start >= 0.0) {
            return Err(Error::invalid("fault start must be >= 0 and duration > 0"));
        }
        if !(self.fault_shunt.norm() > 0.0) {
            return Err(Error::invalid("fault shunt must be non-zero"));
        }
        Ok(())
    }

    pub fn clear_time(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt_s: f64,
    pub horizon_s: f64,
    pub seed: u64,
    pub report_hz: f64,
    /// Standard deviation of the per-node load fractions around the area mean.
    pub heterogeneity: f64,
    /// Constant-power and constant-current demand turns into constant
    /// admittance below this voltage.
    pub pq_low_voltage: f64,
    /// Threshold used for the recovery flags.
    pub v_recovery: f64,
    /// Keep every bus voltage magnitude at the reporting rate.
    pub record_buses: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 0.005,
            horizon_s: 25.0,
            seed: 0,
            report_hz: 100.0,
            heterogeneity: 0.05,
            pq_low_voltage: 0.7,
            v_recovery: 0.95,
            record_buses: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0) || !(self.horizon_s > self.dt_s) {
            return Err(Error::invalid("sim requires dt_s > 0 and horizon_s > dt_s"));
        }
        self.report_stride()?;
        if !(0.0..=0.5).contains(&self.heterogeneity) {
            return Err(Error::invalid("heterogeneity must lie in [0, 0.5]"));
        }
        Ok(())
    }

    /// Number of simulation steps per reported sample.
    pub fn report_stride(&self) -> Result<usize> {
        let ratio = 1.0 / (self.dt_s * self.report_hz);
        let stride = ratio.round();
        if !(stride >= 1.0) || (ratio - stride).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "report rate {} Hz does not divide the simulation rate {} Hz",
                self.report_hz,
                1.0 / self.dt_s
            )));
        }
        Ok(stride as usize)
    }

    pub fn steps(&self) -> usize {
        (self.horizon_s / self.dt_s).round() as usize
    }
}

/// Load that belongs to one node of an area, in kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeLoad {
    pub bus: BusId,
    pub p_kw: f64,
}

/// A load area behind one measurement point. The area consists of the
/// subtrees hanging off `root` through `entries`, plus the root itself when
/// `include_root` is set. Its current is what flows from the root into those
/// subtrees (and into the root load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaSpec {
    pub id: String,
    pub root: BusId,
    #[serde(default)]
    pub entries: Vec<BusId>,
    #[serde(default)]
    pub include_root: bool,
    pub nodes: Vec<NodeLoad>,
    pub load: LoadModel,
}

impl AreaSpec {
    pub fn total_kw(&self) -> f64 {
        self.nodes.iter().map(|n| n.p_kw).sum()
    }

    pub fn ac_kw(&self) -> f64 {
        self.total_kw() * self.load.composition.f_m1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreasFile {
    #[serde(default = "crate::schema::current")]
    pub format_version: u32,
    pub areas: Vec<AreaSpec>,
}

impl AreasFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: Self = serde_json::from_str(&text)?;
        crate::schema::check_version("areas file", f.format_version)?;
        Ok(f)
    }
}

/// Fault record as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultRecord {
    pub bus: BusId,
    pub start_s: f64,
    pub duration_s: f64,
    pub g_shunt_pu: f64,
    #[serde(default)]
    pub b_shunt_pu: f64,
}

impl From<FaultRecord> for FaultScenario {
    fn from(r: FaultRecord) -> Self {
        FaultScenario {
            bus: r.bus,
            start: r.start_s,
            duration: r.duration_s,
            fault_shunt: Complex64::new(r.g_shunt_pu, r.b_shunt_pu),
        }
    }
}

impl From<FaultScenario> for FaultRecord {
    fn from(f: FaultScenario) -> Self {
        FaultRecord {
            bus: f.bus,
            start_s: f.start,
            duration_s: f.duration,
            g_shunt_pu: f.fault_shunt.re,
            b_shunt_pu: f.fault_shunt.im,
        }
    }
}

/// Per-area parameter overrides applied on top of the areas file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaOverride {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_m1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_pv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip: Option<ZipParameters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor1: Option<Motor1PhaseParameters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor3: Option<Motor3PhaseParameters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv: Option<PvParameters>,
}

impl AreaOverride {
    /// Applies the override. A new A/C share is balanced against the static
    /// share so the composition still sums to one.
    pub fn apply(&self, area: &mut AreaSpec) -> Result<()> {
        let m = &mut area.load;
        if let Some(f) = self.f_m1 {
            let c = &mut m.composition;
            let delta = f - c.f_m1;
            if c.f_s - delta < -1e-12 {
                return Err(Error::invalid(format!(
                    "area {}: A/C share {f} leaves no room in the static share",
                    area.id
                )));
            }
            c.f_s = (c.f_s - delta).max(0.0);
            c.f_m1 = f;
        }
        if let Some(f) = self.f_pv {
            m.composition.f_pv = f;
        }
        if let Some(z) = self.zip {
            m.zip = z;
        }
        if let Some(p) = self.motor1 {
            m.motor1 = p;
        }
        if let Some(p) = self.motor3 {
            m.motor3 = p;
        }
        if let Some(p) = self.pv {
            m.pv = p;
        }
        m.validate()
    }
}

/// Scenario file: one fault, simulation settings and optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "crate::schema::current")]
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub fault: FaultRecord,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub areas: Vec<AreaOverride>,
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let f: Self = serde_json::from_str(&text)?;
        crate::schema::check_version("scenario file", f.format_version)?;
        Ok(f)
    }

    /// Area definitions with this scenario's overrides applied.
    pub fn apply_overrides(&self, areas: &[AreaSpec]) -> Result<Vec<AreaSpec>> {
        let mut out = areas.to_vec();
        for o in &self.areas {
            let area = out
                .iter_mut()
                .find(|a| a.id == o.id)
                .ok_or_else(|| Error::invalid(format!("override for unknown area {}", o.id)))?;
            o.apply(area)?;
        }
        Ok(out)
    }
}

/// Control step applied to an area during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlAction {
    pub time: f64,
    pub area: String,
    /// Nominal A/C demand to disconnect, kW.
    #[serde(default)]
    pub ac_disconnect_kw: f64,
    /// Reactive injection requested from the area PV, kvar.
    #[serde(default)]
    pub pv_q_kvar: f64,
}
