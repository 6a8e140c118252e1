//! Simulation, monitoring and mitigation of fault-induced delayed voltage
//! recovery on radial distribution feeders.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod load;
pub mod mitigation;
pub mod monitor;
pub mod pmu;
pub mod rdsm;
pub mod reference;
pub mod schema;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{BusId, FeederNetwork};
pub use load::Motor1PhaseParameters;
pub use mitigation::{MitigationConfig, MitigationPlan, PlannedControl};
pub use monitor::{AreaModel, MonitorReport};
pub use pmu::MuPmuFrame;
pub use rdsm::{FittedParamsFile, SubModelParameters};
pub use sim::{AreaSpec, ControlAction, FaultScenario, SimConfig, SimulationResult, Simulator};
