//! Static feeder model: buses, branches, the Thevenin substation source,
//! admittance assembly, the fixed-point power-flow solver and the polar
//! power-flow Jacobian.

mod admittance;
mod jacobian;
mod powerflow;

pub use admittance::{build_admittance_matrix, stall_admittance};
pub use jacobian::{compute_jacobian, power_injections, JacobianFactor};
pub use powerflow::{
    current_mismatch, solve_power_flow, BusLoad, PowerFlowOptions, PowerFlowSolution,
};
pub(crate) use powerflow::TreeSolver;

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type BusId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: BusId,
    pub base_kv: f64,
    #[serde(default)]
    pub is_source: bool,
}

/// A series branch in per unit on the network MVA base. `shunt_b` is the
/// total line charging, split equally between both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub impedance: Complex64,
    pub shunt_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninSource {
    pub emf: Complex64,
    pub impedance: Complex64,
}

/// A validated radial feeder.
///
/// Construction checks id uniqueness, the single source bus, positive
/// branch impedances, connectivity and radiality. Bus indices used by the
/// matrix routines follow the order of `buses`.
#[derive(Debug, Clone)]
pub struct FeederNetwork {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    source: TheveninSource,
    base_mva: f64,
    index: HashMap<BusId, usize>,
    source_index: usize,
    /// (parent bus index, branch index) for every non-source bus.
    parent: Vec<Option<(usize, usize)>>,
    /// Breadth-first order from the source.
    order: Vec<usize>,
}

impl FeederNetwork {
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        source: TheveninSource,
        base_mva: f64,
    ) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::invalid("network has no buses"));
        }
        if !(base_mva > 0.0) {
            return Err(Error::invalid("base_mva must be positive"));
        }
        let emf = source.emf.norm();
        if !(0.9..=1.1).contains(&emf) {
            return Err(Error::invalid(format!(
                "source emf magnitude {emf} outside [0.9, 1.1]"
            )));
        }
        if !(source.impedance.norm() > 0.0) {
            return Err(Error::invalid("source impedance must be non-zero"));
        }

        let mut index = HashMap::with_capacity(buses.len());
        for (i, b) in buses.iter().enumerate() {
            if index.insert(b.id, i).is_some() {
                return Err(Error::invalid(format!("duplicate bus id {}", b.id)));
            }
        }
        let sources: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_source)
            .map(|(i, _)| i)
            .collect();
        if sources.len() != 1 {
            return Err(Error::invalid(format!(
                "expected exactly one source bus, found {}",
                sources.len()
            )));
        }
        let source_index = sources[0];

        if branches.len() + 1 != buses.len() {
            return Err(Error::invalid(format!(
                "radial network needs {} branches for {} buses, got {}",
                buses.len() - 1,
                buses.len(),
                branches.len()
            )));
        }

        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); buses.len()];
        for (k, br) in branches.iter().enumerate() {
            if !(br.impedance.norm() > 0.0) {
                return Err(Error::invalid(format!(
                    "branch {}-{} has zero impedance",
                    br.from, br.to
                )));
            }
            let f = *index
                .get(&br.from)
                .ok_or_else(|| Error::invalid(format!("branch references unknown bus {}", br.from)))?;
            let t = *index
                .get(&br.to)
                .ok_or_else(|| Error::invalid(format!("branch references unknown bus {}", br.to)))?;
            if f == t {
                return Err(Error::invalid(format!("branch {}-{} is a self loop", br.from, br.to)));
            }
            adjacency[f].push((t, k));
            adjacency[t].push((f, k));
        }

        let mut parent = vec![None; buses.len()];
        let mut seen = vec![false; buses.len()];
        let mut order = Vec::with_capacity(buses.len());
        let mut queue = VecDeque::from([source_index]);
        seen[source_index] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &(j, k) in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some((i, k));
                    queue.push_back(j);
                }
            }
        }
        if order.len() != buses.len() {
            return Err(Error::invalid("network is not connected"));
        }

        Ok(Self {
            buses,
            branches,
            source,
            base_mva,
            index,
            source_index,
            parent,
            order,
        })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn source(&self) -> &TheveninSource {
        &self.source
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn source_index(&self) -> usize {
        self.source_index
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn require_bus(&self, id: BusId) -> Result<usize> {
        self.bus_index(id)
            .ok_or_else(|| Error::invalid(format!("unknown bus id {id}")))
    }

    /// Parent bus and connecting branch, `None` for the source bus.
    pub fn parent(&self, bus: usize) -> Option<(usize, usize)> {
        self.parent[bus]
    }

    /// Buses in breadth-first order starting at the source.
    pub fn bfs_order(&self) -> &[usize] {
        &self.order
    }

    pub fn children(&self, bus: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.buses.len()).filter_map(move |j| match self.parent[j] {
            Some((p, k)) if p == bus => Some((j, k)),
            _ => None,
        })
    }

    /// Every bus in the subtree rooted at `bus`, including `bus` itself.
    pub fn subtree(&self, bus: usize) -> Vec<usize> {
        let mut out = vec![bus];
        let mut i = 0;
        while i < out.len() {
            let b = out[i];
            out.extend(self.children(b).map(|(c, _)| c));
            i += 1;
        }
        out
    }

    /// Bus indices on the path from the source to `bus`, source first.
    pub fn path_from_source(&self, bus: usize) -> Vec<usize> {
        let mut path = vec![bus];
        let mut cur = bus;
        while let Some((p, _)) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Replace the Thevenin source, keeping the topology.
    pub fn with_source(&self, source: TheveninSource) -> Result<Self> {
        Self::new(self.buses.clone(), self.branches.clone(), source, self.base_mva)
    }

    pub fn from_file_spec(spec: NetworkFile) -> Result<Self> {
        crate::schema::check_version("network file", spec.format_version)?;
        let buses = spec.buses;
        let branches = spec
            .branches
            .into_iter()
            .map(|b| Branch {
                from: b.from,
                to: b.to,
                impedance: Complex64::new(b.r_pu, b.x_pu),
                shunt_b: b.b_pu,
            })
            .collect();
        let source = TheveninSource {
            emf: Complex64::from_polar(spec.source.emf_pu, spec.source.angle_rad),
            impedance: Complex64::new(spec.source.r_pu, spec.source.x_pu),
        };
        Self::new(buses, branches, source, spec.base_mva)
    }

    pub fn to_file_spec(&self) -> NetworkFile {
        NetworkFile {
            format_version: crate::schema::FORMAT_VERSION,
            name: None,
            base_mva: self.base_mva,
            buses: self.buses.clone(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    from: b.from,
                    to: b.to,
                    r_pu: b.impedance.re,
                    x_pu: b.impedance.im,
                    b_pu: b.shunt_b,
                })
                .collect(),
            source: SourceRecord {
                emf_pu: self.source.emf.norm(),
                angle_rad: self.source.emf.arg(),
                r_pu: self.source.impedance.re,
                x_pu: self.source.impedance.im,
            },
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: NetworkFile = serde_json::from_str(&text)?;
        Self::from_file_spec(spec)
    }
}

/// On-disk network definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default = "crate::schema::current")]
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<BranchRecord>,
    pub source: SourceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub from: BusId,
    pub to: BusId,
    pub r_pu: f64,
    pub x_pu: f64,
    #[serde(default)]
    pub b_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceRecord {
    pub emf_pu: f64,
    #[serde(default)]
    pub angle_rad: f64,
    pub r_pu: f64,
    pub x_pu: f64,
}


#[cfg(test)]
mod tests {
    use super::test_networks::*;
    use super::*;

    #[test]
    fn rejects_meshed_and_disconnected() {
        let meshed = FeederNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![
                branch(1, 2, 0.01, 0.01),
                branch(2, 3, 0.01, 0.01),
                branch(1, 3, 0.01, 0.01),
            ],
            source(0.1),
            1.0,
        );
        assert!(matches!(meshed, Err(Error::InvalidInput(_))));

        // right branch count but a cycle leaves bus 4 unreachable
        let disconnected = FeederNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false), bus(4, false)],
            vec![
                branch(1, 2, 0.01, 0.01),
                branch(2, 3, 0.01, 0.01),
                branch(3, 2, 0.01, 0.01),
            ],
            source(0.1),
            1.0,
        );
        assert!(disconnected.is_err());
    }

    #[test]
    fn rejects_bad_sources_and_ids() {
        let two_sources = FeederNetwork::new(
            vec![bus(1, true), bus(2, true)],
            vec![branch(1, 2, 0.01, 0.01)],
            source(0.1),
            1.0,
        );
        assert!(two_sources.is_err());

        let dup = FeederNetwork::new(
            vec![bus(1, true), bus(1, false)],
            vec![branch(1, 1, 0.01, 0.01)],
            source(0.1),
            1.0,
        );
        assert!(dup.is_err());

        let weak = FeederNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![branch(1, 2, 0.01, 0.01)],
            TheveninSource {
                emf: Complex64::new(1.2, 0.0),
                impedance: Complex64::new(0.0, 0.1),
            },
            1.0,
        );
        assert!(weak.is_err());

        let zero_z = FeederNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![branch(1, 2, 0.0, 0.0)],
            source(0.1),
            1.0,
        );
        assert!(zero_z.is_err());
    }

    #[test]
    fn topology_queries() {
        let net = small_feeder();
        assert_eq!(net.branches().len(), net.len() - 1);
        let b2 = net.bus_index(2).unwrap();
        let mut sub = net.subtree(b2);
        sub.sort();
        assert_eq!(sub, vec![1, 2, 3]);
        assert_eq!(net.path_from_source(net.bus_index(4).unwrap()), vec![0, 1, 3]);
        assert_eq!(net.parent(net.source_index()), None);
    }

    #[test]
    fn file_round_trip_preserves_network() {
        let net = small_feeder();
        let text = serde_json::to_string(&net.to_file_spec()).unwrap();
        let back = FeederNetwork::from_file_spec(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.branches(), net.branches());
        assert_eq!(back.source(), net.source());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"base_mva":1.0,"buses":[{"id":1,"base_kv":4.8,"is_source":true,"colour":"red"}],
            "branches":[],"source":{"emf_pu":1.0,"r_pu":0.0,"x_pu":0.1}}"#;
        assert!(serde_json::from_str::<NetworkFile>(text).is_err());
    }
}
