use std::collections::BTreeMap;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BusId, FeederNetwork};
use crate::sim::{AreaSpec, FaultScenario, SimConfig, Simulator};

use super::SteadyRecord;

/// Fault grid used to generate surrogate training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSweepSpec {
    /// Fault conductances, system per unit.
    pub fault_shunts: Vec<f64>,
    pub durations_s: Vec<f64>,
    pub buses: Vec<BusId>,
    #[serde(default = "default_start")]
    pub start_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Add one record without a fault.
    #[serde(default)]
    pub include_no_fault: bool,
}

fn default_start() -> f64 {
    1.0
}

impl ScenarioSweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fault_shunts.is_empty() || self.durations_s.is_empty() || self.buses.is_empty() {
            return Err(Error::invalid("sweep needs at least one shunt, duration and bus"));
        }
        Ok(())
    }

    /// Cross product in bus, shunt, duration order.
    pub fn faults(&self) -> Vec<FaultScenario> {
        let mut out = Vec::new();
        for &bus in &self.buses {
            for &g in &self.fault_shunts {
                for &d in &self.durations_s {
                    out.push(FaultScenario {
                        bus,
                        start: self.start_s,
                        duration: d,
                        fault_shunt: Complex64::new(g, 0.0),
                    });
                }
            }
        }
        out
    }
}

/// Root measurements of one area during one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaRecord {
    pub area: String,
    pub root: BusId,
    pub v: Vec<Complex64>,
    /// Power drawn into the area, system per unit.
    pub s: Vec<Complex64>,
    /// Whether any A/C in the area stalled.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecord {
    pub fault: Option<FaultScenario>,
    pub areas: Vec<AreaRecord>,
}

impl ScenarioRecord {
    pub fn label(&self) -> String {
        match &self.fault {
            Some(f) => format!("bus{}_g{}_{}ms", f.bus, f.fault_shunt.re, (f.duration * 1000.0).round()),
            None => "no_fault".into(),
        }
    }

    pub fn area(&self, id: &str) -> Option<&AreaRecord> {
        self.areas.iter().find(|a| a.area == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDataset {
    /// Sample spacing of the records.
    pub dt: f64,
    pub base_mva: f64,
    pub pq_low_voltage: f64,
    pub scenarios: Vec<ScenarioRecord>,
    /// Steady operating points per area at load scales 0.9, 1.0 and 1.1.
    pub steady: BTreeMap<String, Vec<SteadyRecord>>,
}

/// Steady operating points of every area at load scales 0.9, 1.0 and 1.1.
pub fn steady_records(sim: &Simulator) -> Result<BTreeMap<String, Vec<SteadyRecord>>> {
    let mut steady: BTreeMap<String, Vec<SteadyRecord>> = BTreeMap::new();
    for scale in [0.9, 1.0, 1.1] {
        let snap = sim.steady_state(scale)?;
        for (k, spec) in sim.area_specs().enumerate() {
            steady.entry(spec.id.clone()).or_default().push(SteadyRecord {
                v_root: snap.v[sim.area_root_index(k)],
                v_agg: snap.area_v_agg[k],
                i_area: snap.area_current[k],
            });
        }
    }
    Ok(steady)
}

/// Runs the detailed model over the sweep and records root voltage and
/// power of every area. Collapsed scenarios are logged and left out.
pub fn generate_surrogate_dataset(
    net: &FeederNetwork,
    areas: &[AreaSpec],
    config: &SimConfig,
    sweep: &ScenarioSweepSpec,
) -> Result<FitDataset> {
    sweep.validate()?;
    let cfg = SimConfig { seed: sweep.seed, ..*config };
    let sim = Simulator::new(net, areas, cfg)?;

    let steady = steady_records(&sim)?;

    let mut cases: Vec<Option<FaultScenario>> = Vec::new();
    if sweep.include_no_fault {
        cases.push(None);
    }
    cases.extend(sweep.faults().into_iter().map(Some));

    use rayon::prelude::*;
    let runs: Vec<Result<Option<ScenarioRecord>>> = cases
        .par_iter()
        .map(|fault| {
            let r = sim.run(fault.as_ref(), &[])?;
            if let Some(reason) = &r.collapsed {
                warn!("scenario {:?} collapsed and is excluded: {reason}", fault);
                return Ok(None);
            }
            let areas = r
                .areas
                .iter()
                .map(|a| AreaRecord {
                    area: a.id.clone(),
                    root: a.root,
                    s: (0..a.v.len()).map(|k| a.power(k)).collect(),
                    v: a.v.clone(),
                    stalled: a.stalled_kw.iter().any(|&s| s > 0.0),
                })
                .collect();
            Ok(Some(ScenarioRecord { fault: *fault, areas }))
        })
        .collect();
    let mut scenarios = Vec::new();
    for r in runs {
        if let Some(s) = r? {
            scenarios.push(s);
        }
    }
    Ok(FitDataset {
        dt: 1.0 / cfg.report_hz,
        base_mva: net.base_mva(),
        pq_low_voltage: cfg.pq_low_voltage,
        scenarios,
        steady,
    })
}
