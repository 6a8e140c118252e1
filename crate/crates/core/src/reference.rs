//! Reference test system: a balanced positive-sequence equivalent of the
//! IEEE 37-node feeder with six measured load areas, and the fault suite
//! used for regression.
//!
//! The same data is checked in under `data/` as JSON; a test keeps the two
//! in sync.

use num_complex::Complex64;

use crate::grid::{Branch, Bus, BusId, FeederNetwork, TheveninSource};
use crate::load::{LoadComposition, LoadModel, Motor1PhaseParameters, PvParameters};
use crate::sim::{AreaSpec, FaultScenario, NodeLoad};

pub const BASE_MVA: f64 = 2.5;
pub const BASE_KV: f64 = 4.8;
pub const SOURCE_BUS: BusId = 799;

/// Source emf and impedance (transmission equivalent plus substation
/// transformer, regulator folded into the emf).
pub const SOURCE_EMF: f64 = 1.0;
pub const SOURCE_R: f64 = 0.028;
pub const SOURCE_X: f64 = 0.14;

/// Positive-sequence line impedance in Ω per mile by cable configuration.
fn config_impedance(config: u32) -> Complex64 {
    match config {
        721 => Complex64::new(0.2253, 0.2341),
        722 => Complex64::new(0.3122, 0.3299),
        723 => Complex64::new(0.8065, 0.4602),
        724 => Complex64::new(1.5748, 0.3673),
        _ => unreachable!("unknown cable configuration {config}"),
    }
}

/// (from, to, length in ft, cable configuration)
const LINES: [(BusId, BusId, f64, u32); 35] = [
    (799, 701, 1850.0, 721),
    (701, 702, 960.0, 722),
    (702, 705, 400.0, 724),
    (702, 713, 360.0, 723),
    (702, 703, 1320.0, 722),
    (703, 727, 240.0, 724),
    (703, 730, 600.0, 723),
    (704, 714, 80.0, 724),
    (704, 720, 800.0, 723),
    (705, 742, 320.0, 724),
    (705, 712, 240.0, 724),
    (706, 725, 280.0, 724),
    (707, 724, 760.0, 724),
    (707, 722, 120.0, 724),
    (708, 733, 320.0, 723),
    (708, 732, 320.0, 724),
    (709, 731, 600.0, 723),
    (709, 708, 320.0, 723),
    (710, 735, 200.0, 724),
    (710, 736, 1280.0, 724),
    (711, 741, 400.0, 723),
    (711, 740, 200.0, 724),
    (713, 704, 520.0, 723),
    (714, 718, 520.0, 724),
    (720, 707, 920.0, 724),
    (720, 706, 600.0, 723),
    (727, 744, 280.0, 723),
    (730, 709, 200.0, 723),
    (733, 734, 560.0, 723),
    (734, 737, 640.0, 723),
    (734, 710, 520.0, 724),
    (737, 738, 400.0, 723),
    (738, 711, 400.0, 723),
    (744, 728, 200.0, 724),
    (744, 729, 280.0, 724),
];

/// Transformer 709–775, 500 kVA, 0.09 + j1.81 % on its own rating.
const XFM_709_775: (f64, f64) = (0.0009, 0.0181);
const XFM_KVA: f64 = 500.0;

pub fn base_impedance_ohm() -> f64 {
    BASE_KV * BASE_KV / BASE_MVA
}

pub fn network() -> FeederNetwork {
    let zbase = base_impedance_ohm();
    let mut ids: Vec<BusId> = LINES.iter().flat_map(|&(f, t, _, _)| [f, t]).collect();
    ids.push(775);
    ids.sort_unstable();
    ids.dedup();
    let buses = ids
        .iter()
        .map(|&id| Bus {
            id,
            base_kv: BASE_KV,
            is_source: id == SOURCE_BUS,
        })
        .collect();
    let mut branches: Vec<Branch> = LINES
        .iter()
        .map(|&(from, to, ft, cfg)| Branch {
            from,
            to,
            impedance: config_impedance(cfg) * (ft / 5280.0) / zbase,
            shunt_b: 0.0,
        })
        .collect();
    let k = BASE_MVA * 1000.0 / XFM_KVA;
    branches.push(Branch {
        from: 709,
        to: 775,
        impedance: Complex64::new(XFM_709_775.0, XFM_709_775.1) * k,
        shunt_b: 0.0,
    });
    FeederNetwork::new(
        buses,
        branches,
        TheveninSource {
            emf: Complex64::new(SOURCE_EMF, 0.0),
            impedance: Complex64::new(SOURCE_R, SOURCE_X),
        },
        BASE_MVA,
    )
    .expect("reference network is valid")
}

/// Spot loads of the original feeder in kW (phase sum).
const SPOT_LOADS: [(BusId, f64); 24] = [
    (701, 630.0),
    (712, 85.0),
    (713, 85.0),
    (714, 38.0),
    (718, 85.0),
    (720, 85.0),
    (722, 161.0),
    (724, 42.0),
    (725, 42.0),
    (727, 42.0),
    (728, 126.0),
    (729, 42.0),
    (731, 85.0),
    (732, 42.0),
    (733, 85.0),
    (734, 42.0),
    (735, 85.0),
    (736, 42.0),
    (737, 140.0),
    (738, 126.0),
    (740, 85.0),
    (741, 42.0),
    (742, 93.0),
    (744, 42.0),
];

struct AreaRow {
    id: &'static str,
    root: BusId,
    entries: &'static [BusId],
    include_root: bool,
    p_kw: f64,
    f_s: f64,
    f_m1: f64,
    f_m3: f64,
    r_stall: f64,
    x_stall: f64,
    t_th: f64,
    theta1: f64,
    theta2: f64,
}

const AREAS: [AreaRow; 6] = [
    AreaRow { id: "A1", root: 702, entries: &[705], include_root: false, p_kw: 178.0, f_s: 0.61, f_m1: 0.39, f_m3: 0.0, r_stall: 0.061, x_stall: 0.073, t_th: 17.84, theta1: 0.714, theta2: 3.025 },
    AreaRow { id: "A2", root: 702, entries: &[713], include_root: false, p_kw: 538.0, f_s: 0.46, f_m1: 0.54, f_m3: 0.0, r_stall: 0.092, x_stall: 0.112, t_th: 12.00, theta1: 0.452, theta2: 1.949 },
    AreaRow { id: "A3", root: 703, entries: &[727], include_root: false, p_kw: 245.0, f_s: 0.49, f_m1: 0.29, f_m3: 0.22, r_stall: 0.057, x_stall: 0.058, t_th: 15.14, theta1: 0.450, theta2: 3.750 },
    AreaRow { id: "A4", root: 709, entries: &[731, 775], include_root: false, p_kw: 160.0, f_s: 0.49, f_m1: 0.51, f_m3: 0.0, r_stall: 0.074, x_stall: 0.077, t_th: 13.99, theta1: 0.653, theta2: 3.222 },
    AreaRow { id: "A5", root: 709, entries: &[708], include_root: false, p_kw: 684.0, f_s: 0.47, f_m1: 0.53, f_m3: 0.0, r_stall: 0.072, x_stall: 0.091, t_th: 13.62, theta1: 0.739, theta2: 2.615 },
    AreaRow { id: "A6", root: 701, entries: &[], include_root: true, p_kw: 420.0, f_s: 0.20, f_m1: 0.10, f_m3: 0.70, r_stall: 0.080, x_stall: 0.090, t_th: 15.00, theta1: 0.800, theta2: 3.000 },
];

/// PV generation relative to demand, used in every area.
pub const PV_SHARE: f64 = 0.25;

/// The six load areas, with spot loads rescaled to the area totals.
pub fn areas() -> Vec<AreaSpec> {
    let net = network();
    AREAS
        .iter()
        .map(|row| {
            let root = net.bus_index(row.root).unwrap();
            let mut members: Vec<BusId> = row
                .entries
                .iter()
                .flat_map(|&e| net.subtree(net.bus_index(e).unwrap()))
                .map(|i| net.buses()[i].id)
                .collect();
            if row.include_root {
                members.push(net.buses()[root].id);
            }
            let spots: Vec<(BusId, f64)> =
                SPOT_LOADS.iter().copied().filter(|(b, _)| members.contains(b)).collect();
            let raw: f64 = spots.iter().map(|s| s.1).sum();
            let nodes = spots
                .iter()
                .map(|&(bus, kw)| NodeLoad {
                    bus,
                    p_kw: round6(kw * row.p_kw / raw),
                })
                .collect();
            let mut load = LoadModel::new(LoadComposition {
                p_total_kw: row.p_kw,
                f_s: row.f_s,
                f_el: 0.0,
                f_m1: row.f_m1,
                f_m3: row.f_m3,
                f_pv: PV_SHARE,
            });
            load.motor1 = Motor1PhaseParameters {
                r_stall: row.r_stall,
                x_stall: row.x_stall,
                t_th: row.t_th,
                theta1: row.theta1,
                theta2: row.theta2,
                ..Motor1PhaseParameters::default()
            };
            load.pv = PvParameters::default();
            AreaSpec {
                id: row.id.to_string(),
                root: row.root,
                entries: row.entries.to_vec(),
                include_root: row.include_root,
                nodes,
                load,
            }
        })
        .collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Default fault admittance of the regression suite, system per unit.
pub const FAULT_G: f64 = 40.0;

pub fn fault(bus: BusId, duration: f64) -> FaultScenario {
    FaultScenario {
        bus,
        start: 1.0,
        duration,
        fault_shunt: Complex64::new(FAULT_G, 0.0),
    }
}

/// Three fault locations times two durations.
pub fn fault_suite() -> Vec<FaultScenario> {
    let mut out = Vec::new();
    for bus in [701, 720, 740] {
        for d in [0.05, 0.08] {
            out.push(fault(bus, d));
        }
    }
    out
}

/// The reference event: 80 ms fault at bus 701.
pub fn reference_fault() -> FaultScenario {
    fault(701, 0.08)
}

/// The event used for control studies: 80 ms fault at bus 740, inside A5.
pub fn control_fault() -> FaultScenario {
    fault(740, 0.08)
}
