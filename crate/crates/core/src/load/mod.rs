//! Composite load: static ZIP, electronic, single-phase A/C motors with stall
//! and thermal protection, an aggregate three-phase motor, and PV.

mod injection;
mod motor3;
mod params;
mod relay;

pub use injection::{aggregate_load_injection, kw_to_pu, motor3_base_kw};
pub use motor3::{
    electrical_torque, equilibrium_slip, mechanical_torque, motor3_admittance, motor3_impedance,
    motor3_step, peak_torque_slip, slip_for_power,
};
pub use params::{
    LoadComposition, LoadModel, Motor1PhaseParameters, Motor3PhaseParameters, PvParameters,
    ZipParameters,
};
pub use relay::{
    heating_power, step_thermal_relay, trip_fraction, update_stall_state, LoadAreaState, Motor1Mode,
};
