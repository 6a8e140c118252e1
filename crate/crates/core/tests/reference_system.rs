use approx::assert_relative_eq;
use fidvr_core::grid::build_admittance_matrix;
use fidvr_core::mitigation::{
    apply_control_plan, build_controls, build_reduced_network, compute_voltage_control_sensitivities,
    report_operating_points, simulator_capacities, uniform_ac_plan, ControlKind, MitigationConfig, PlannedControl,
};
use fidvr_core::monitor::{monitor_frames, DetectionConfig, EstimationConfig, MonitorReport};
use fidvr_core::pmu::emit_mupmu_stream;
use fidvr_core::rdsm::census_file;
use fidvr_core::reference;
use fidvr_core::sim::{SimConfig, SimulationResult, Simulator};
use nalgebra::DVector;
use num_complex::Complex64;

fn simulator() -> Simulator {
    Simulator::new(&reference::network(), &reference::areas(), SimConfig::default()).unwrap()
}

fn monitor(sim: &Simulator, r: &SimulationResult) -> MonitorReport {
    let models = census_file(sim).unwrap().models();
    let frames = emit_mupmu_stream(r, sim.config().report_hz).unwrap();
    monitor_frames(&frames, &models, &DetectionConfig::default(), &EstimationConfig::default()).unwrap()
}

#[test]
fn quiet_run_stays_at_the_initial_state() {
    let sim = simulator();
    let r = sim.run(None, &[]).unwrap();
    assert!(r.collapsed.is_none());
    for a in &r.areas {
        assert!(a.stalled_kw.iter().all(|&s| s == 0.0), "{} stalled without a fault", a.id);
        let v0 = a.v[0].norm();
        assert!(a.v.iter().all(|v| (v.norm() - v0).abs() < 1e-9));
        // the calibrated source leaves roots just above 0.9 p.u. before any event
        assert!(v0 > 0.85 && v0 < 1.0, "{} starts at {v0}", a.id);
    }
}

#[test]
fn reference_fault_stalls_then_recovers() {
    let sim = simulator();
    let r = sim.run(Some(&reference::reference_fault()), &[]).unwrap();
    assert!(r.collapsed.is_none());
    let t = r.recovery_time().expect("recovers within the horizon");
    assert!(t > 5.0 && t < r.times.last().unwrap() - r.fault_clear());
    for a in &r.areas {
        let peak = a.stalled_kw.iter().copied().fold(0.0, f64::max);
        assert!(peak > 0.5 * a.ac_kw, "{} did not stall", a.id);
        // every stalled motor is tripped by the end
        assert!(*a.stalled_kw.last().unwrap() < 1e-9);
        assert!(a.v.iter().all(|v| v.norm() >= 0.0 && v.norm().is_finite()));
    }
    assert!(r.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn control_amounts_of_the_reference_plans() {
    let sim = simulator();
    let caps = simulator_capacities(&sim);
    let total = |plan: &[PlannedControl]| plan.iter().fold(0.0, |acc, p| acc + p.amount);
    let uniform = uniform_ac_plan(&caps, 0.3);
    assert_relative_eq!(total(&uniform), 275.1, epsilon = 0.05);
    let a5: Vec<_> = uniform.into_iter().filter(|p| p.area == "A5").collect();
    assert_relative_eq!(total(&a5), 108.8, epsilon = 0.05);
}

#[test]
fn zero_plan_matches_the_uncontrolled_run() {
    let sim = simulator();
    let fault = reference::control_fault();
    let base = sim.run(Some(&fault), &[]).unwrap();
    let zero = apply_control_plan(&sim, &fault, &uniform_ac_plan(&simulator_capacities(&sim), 0.0), 1.1, 1.5).unwrap();
    assert_eq!(base.min_root_voltage, zero.min_root_voltage);
    assert_eq!(base.areas, zero.areas);
}

#[test]
fn more_uniform_shedding_recovers_sooner() {
    let sim = simulator();
    let fault = reference::control_fault();
    let caps = simulator_capacities(&sim);
    let t: Vec<f64> = [0.0, 0.1, 0.2, 0.3]
        .iter()
        .map(|&f| {
            apply_control_plan(&sim, &fault, &uniform_ac_plan(&caps, f), 1.1, 1.5)
                .unwrap()
                .recovery_time()
                .unwrap()
        })
        .collect();
    assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
}

/// Load-point voltage magnitudes of the reduced network after changing the
/// shunt admittances, by a direct solve.
fn solve_reduced(red: &fidvr_core::mitigation::ReducedNetwork, shunts: &[Complex64]) -> Vec<f64> {
    let net = &red.net;
    let mut y = build_admittance_matrix(net);
    for (k, sh) in shunts.iter().enumerate() {
        y[(k, k)] += sh;
    }
    let s = net.source_index();
    let zs = net.source().impedance;
    y[(s, s)] += zs.inv();
    let mut rhs = DVector::zeros(net.len());
    rhs[s] = net.source().emf / zs;
    let v = y.lu().solve(&rhs).unwrap();
    red.load_bus.iter().map(|&k| v[k].norm()).collect()
}

#[test]
fn sensitivities_match_perturbed_solves() {
    let sim = simulator();
    let r = sim.run(Some(&reference::reference_fault()), &[]).unwrap();
    let report = monitor(&sim, &r);
    let models = census_file(&sim).unwrap().models();
    let op = report_operating_points(&report, &models).unwrap();
    let red = build_reduced_network(&reference::network(), &op).unwrap();
    let controls = build_controls(&simulator_capacities(&sim), &MitigationConfig::default());
    let s = compute_voltage_control_sensitivities(&red, &op, &controls).unwrap();

    let base = solve_reduced(&red, &red.shunts);
    let scale = 1e-3 / red.net.base_mva();
    let eps = 0.5;
    for (j, c) in controls.iter().enumerate() {
        let a = op.iter().position(|x| x.area == c.area).unwrap();
        let mut shunts = red.shunts.clone();
        match c.kind {
            ControlKind::AcDisconnect => {
                shunts[red.load_bus[a]] -= op[a].motor1.stall_admittance() * (eps * scale);
            }
            ControlKind::PvQInject => {
                let k = red.root_bus[a];
                shunts[k] += Complex64::new(0.0, eps * scale) / red.voltages[k].norm_sqr();
            }
        }
        let moved = solve_reduced(&red, &shunts);
        for i in 0..op.len() {
            let fd = (moved[i] - base[i]) / eps;
            let an = s[(i, j)];
            assert!(an > 0.0, "{} {:?} lowers {} voltage", c.area, c.kind, op[i].area);
            assert!(
                (fd - an).abs() <= 0.05 * an.abs(),
                "{} {:?} on {}: analytic {an:.4e} vs perturbed {fd:.4e}",
                c.area,
                c.kind,
                op[i].area
            );
        }
    }
}

fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn checked_in_data_matches_the_builtin_system() {
    use fidvr_core::grid::{FeederNetwork, NetworkFile};
    use fidvr_core::rdsm::FittedParamsFile;
    use fidvr_core::sim::AreasFile;

    let text = std::fs::read_to_string(data("network.json")).unwrap();
    let spec: NetworkFile = serde_json::from_str(&text).unwrap();
    let net = FeederNetwork::from_file_spec(spec).unwrap();
    let mut builtin = reference::network().to_file_spec();
    builtin.name = None;
    let mut loaded = net.to_file_spec();
    loaded.name = None;
    assert_eq!(loaded, builtin);

    assert_eq!(AreasFile::load(data("areas.json")).unwrap().areas, reference::areas());

    let census = FittedParamsFile::load(data("params_census.json")).unwrap();
    assert_eq!(census, census_file(&simulator()).unwrap());

    // fitted parameters cover every area with an identified stall
    let fitted = FittedParamsFile::load(data("fitted_params.json")).unwrap();
    let prov = fitted.provenance.as_ref().expect("fit provenance");
    for a in reference::areas() {
        assert!(fitted.area(&a.id).is_some(), "{} missing", a.id);
        assert!(prov.areas[&a.id].stall_identified);
        assert!(prov.areas[&a.id].nrmse.worst() < 0.05);
    }
}
