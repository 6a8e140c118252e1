//! Shared inputs for the benchmarks in `benches/`.

use std::collections::BTreeMap;

use fidvr_core::mitigation::{simulator_capacities, AreaCapacity};
use fidvr_core::monitor::{monitor_frames, AreaModel, DetectionConfig, EstimationConfig, MonitorReport};
use fidvr_core::pmu::{emit_mupmu_stream, MuPmuFrame};
use fidvr_core::rdsm::census_file;
use fidvr_core::reference;
use fidvr_core::sim::{SimConfig, Simulator};

/// The reference feeder after the reference fault, monitored once.
pub struct Fixture {
    pub sim: Simulator,
    pub models: BTreeMap<String, AreaModel>,
    pub caps: Vec<AreaCapacity>,
    pub frames: Vec<MuPmuFrame>,
    pub report: MonitorReport,
}

impl Fixture {
    pub fn reference() -> Self {
        let sim = Simulator::new(&reference::network(), &reference::areas(), SimConfig::default())
            .expect("reference system");
        let models = census_file(&sim).expect("census parameters").models();
        let r = sim.run(Some(&reference::reference_fault()), &[]).expect("reference run");
        let frames = emit_mupmu_stream(&r, sim.config().report_hz).expect("stream");
        let report = monitor_frames(&frames, &models, &DetectionConfig::default(), &EstimationConfig::default())
            .expect("monitor");
        let caps = simulator_capacities(&sim);
        Self { sim, models, caps, frames, report }
    }
}
