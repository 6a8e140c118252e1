use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{build_admittance_matrix, compute_jacobian, Branch, Bus, BusId, FeederNetwork, JacobianFactor};
use crate::load::{kw_to_pu, Motor1PhaseParameters};

use super::{ControlKind, ControlVariable};

/// Measured state of one area during the stalled plateau.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaOperatingPoint {
    pub area: String,
    pub root: BusId,
    pub v_root: Complex64,
    pub i: Complex64,
    pub feeder_z: Complex64,
    pub motor1: Motor1PhaseParameters,
}

impl AreaOperatingPoint {
    pub fn v_load(&self) -> Complex64 {
        self.v_root - self.feeder_z * self.i
    }
}

/// The feeder reduced to the paths from the source to the area roots, with
/// one load bus per area behind its equivalent feeder. Each area is
/// represented by the admittance it presented at the operating point.
#[derive(Debug, Clone)]
pub struct ReducedNetwork {
    pub net: FeederNetwork,
    pub shunts: Vec<Complex64>,
    pub voltages: Vec<Complex64>,
    /// Per area: bus index of the root and of the aggregate load.
    pub root_bus: Vec<usize>,
    pub load_bus: Vec<usize>,
}

pub fn build_reduced_network(full: &FeederNetwork, areas: &[AreaOperatingPoint]) -> Result<ReducedNetwork> {
    if areas.is_empty() {
        return Err(Error::invalid("no areas in the operating point"));
    }
    let mut keep = vec![false; full.len()];
    for a in areas {
        for b in full.path_from_source(full.require_bus(a.root)?) {
            keep[b] = true;
        }
    }
    let mut buses = Vec::new();
    let mut branches = Vec::new();
    for &b in full.bfs_order() {
        if !keep[b] {
            continue;
        }
        buses.push(full.buses()[b].clone());
        if let Some((_, br)) = full.parent(b) {
            branches.push(full.branches()[br].clone());
        }
    }
    let mut next_id = full.buses().iter().map(|b| b.id).max().unwrap_or(0) + 1;
    let mut load_ids = Vec::with_capacity(areas.len());
    for a in areas {
        if a.feeder_z.norm() > 0.0 {
            let root = &full.buses()[full.require_bus(a.root)?];
            buses.push(Bus {
                id: next_id,
                base_kv: root.base_kv,
                is_source: false,
            });
            branches.push(Branch {
                from: a.root,
                to: next_id,
                impedance: a.feeder_z,
                shunt_b: 0.0,
            });
            load_ids.push(next_id);
            next_id += 1;
        } else {
            load_ids.push(a.root);
        }
    }
    let net = FeederNetwork::new(buses, branches, *full.source(), full.base_mva())?;

    let mut shunts = vec![Complex64::new(0.0, 0.0); net.len()];
    let mut root_bus = Vec::with_capacity(areas.len());
    let mut load_bus = Vec::with_capacity(areas.len());
    for (a, &id) in areas.iter().zip(&load_ids) {
        let vl = a.v_load();
        if vl.norm() <= 0.0 {
            return Err(Error::invalid(format!("area {}: zero load-point voltage", a.area)));
        }
        let k = net.require_bus(id)?;
        shunts[k] += a.i / vl;
        root_bus.push(net.require_bus(a.root)?);
        load_bus.push(k);
    }

    // admittance-only network: one direct solve gives the operating point
    let mut y = build_admittance_matrix(&net);
    for (k, sh) in shunts.iter().enumerate() {
        y[(k, k)] += sh;
    }
    let s = net.source_index();
    let zs = net.source().impedance;
    y[(s, s)] += zs.inv();
    let mut rhs = DVector::zeros(net.len());
    rhs[s] = net.source().emf / zs;
    let v = y
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("reduced network admittance matrix".into()))?;

    Ok(ReducedNetwork {
        voltages: v.iter().copied().collect(),
        net,
        shunts,
        root_bus,
        load_bus,
    })
}

/// Complex power injected at the bus for one unit of the control, system
/// per unit. Disconnecting stalled A/C removes `V_L² (G + jB)` per kW of
/// motor base; PV support injects pure reactive power at the area root.
fn unit_injection(red: &ReducedNetwork, areas: &[AreaOperatingPoint], c: &ControlVariable, area: usize) -> (usize, Complex64) {
    let scale = kw_to_pu(red.net.base_mva());
    match c.kind {
        ControlKind::PvQInject => (red.root_bus[area], Complex64::new(0.0, scale)),
        ControlKind::AcDisconnect => {
            let k = red.load_bus[area];
            let vl2 = red.voltages[k].norm_sqr();
            let m = &areas[area].motor1;
            (k, Complex64::new(m.g_stall(), m.b_stall()) * vl2 * scale)
        }
    }
}

/// `∂|V_L| / ∂u` for every area (rows) and control (columns), from the
/// power-flow Jacobian of the reduced network. Columns are independent
/// solves with the same factorization and run in parallel.
pub fn compute_voltage_control_sensitivities(
    red: &ReducedNetwork,
    areas: &[AreaOperatingPoint],
    controls: &[ControlVariable],
) -> Result<DMatrix<f64>> {
    let n = red.net.len();
    let jac = compute_jacobian(&red.net, &red.shunts, &red.voltages)?;
    let factor = JacobianFactor::new(jac)?;
    let columns: Vec<Result<Vec<f64>>> = controls
        .par_iter()
        .map(|c| {
            let a = areas
                .iter()
                .position(|x| x.area == c.area)
                .ok_or_else(|| Error::invalid(format!("control for unknown area {}", c.area)))?;
            let (bus, ds) = unit_injection(red, areas, c, a);
            let mut rhs = DVector::zeros(2 * n);
            rhs[bus] = ds.re;
            rhs[n + bus] = ds.im;
            let dx = factor.solve(&rhs)?;
            Ok(red.load_bus.iter().map(|&k| dx[n + k]).collect())
        })
        .collect();
    let mut s = DMatrix::zeros(areas.len(), controls.len());
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            s[(i, j)] = v;
        }
    }
    Ok(s)
}
