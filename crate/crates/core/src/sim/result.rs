use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::FaultScenario;
use crate::grid::BusId;

/// Reported time series of one area at its measurement point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSeries {
    pub id: String,
    pub root: BusId,
    /// Root bus voltage phasor.
    pub v: Vec<Complex64>,
    /// Current phasor flowing from the root into the area, system base.
    pub i: Vec<Complex64>,
    /// A/C demand still connected in the stalled state, kW at nominal.
    pub stalled_kw: Vec<f64>,
    /// Nominal A/C demand of the area, kW.
    pub ac_kw: f64,
}

impl AreaSeries {
    /// Complex power drawn by the area, system per unit.
    pub fn power(&self, k: usize) -> Complex64 {
        self.v[k] * self.i[k].conj()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub seed: u64,
    pub dt: f64,
    pub fault: Option<FaultScenario>,
    pub base_mva: f64,
    /// Reporting instants.
    pub times: Vec<f64>,
    pub areas: Vec<AreaSeries>,
    /// Bus ids matching the columns of `bus_voltages`.
    pub bus_ids: Vec<BusId>,
    /// Bus voltage magnitudes per reporting instant, when recorded.
    pub bus_voltages: Vec<Vec<f64>>,
    /// Lowest measurement-point voltage at every simulation step.
    pub min_root_voltage: Vec<f64>,
    pub v_recovery: f64,
    /// Diagnostic when the network solve failed; the series end there.
    pub collapsed: Option<String>,
}

impl SimulationResult {
    pub(crate) fn new(
        seed: u64,
        dt: f64,
        fault: Option<&FaultScenario>,
        base_mva: f64,
        v_recovery: f64,
    ) -> Self {
        Self {
            seed,
            dt,
            fault: fault.copied(),
            base_mva,
            times: Vec::new(),
            areas: Vec::new(),
            bus_ids: Vec::new(),
            bus_voltages: Vec::new(),
            min_root_voltage: Vec::new(),
            v_recovery,
            collapsed: None,
        }
    }

    /// Fault clearing time, zero without a fault.
    pub fn fault_clear(&self) -> f64 {
        self.fault.map(|f| f.clear_time()).unwrap_or(0.0)
    }

    /// Time from fault clearing until every measurement point stays at or
    /// above the recovery voltage. `None` if the run ends below it or
    /// collapsed.
    pub fn recovery_time(&self) -> Option<f64> {
        self.recovery_time_at(self.v_recovery)
    }

    pub fn recovery_time_at(&self, threshold: f64) -> Option<f64> {
        if self.collapsed.is_some() {
            return None;
        }
        let times: Vec<f64> = (0..self.min_root_voltage.len()).map(|k| k as f64 * self.dt).collect();
        let clear = self.fault_clear();
        recovery_crossing(&times, &self.min_root_voltage, clear, threshold).map(|t| t - clear)
    }

    pub fn recovered(&self) -> bool {
        self.recovery_time().is_some()
    }

    pub fn area(&self, id: &str) -> Option<&AreaSeries> {
        self.areas.iter().find(|a| a.id == id)
    }
}

/// Last upward crossing of `threshold` at or after `t_from`, linearly
/// interpolated between samples. Returns `t_from` if the signal never dips
/// below the threshold afterwards and `None` if it ends below.
pub fn recovery_crossing(times: &[f64], values: &[f64], t_from: f64, threshold: f64) -> Option<f64> {
    let start = times.iter().position(|&t| t >= t_from - 1e-9)?;
    let last_below = (start..values.len()).rev().find(|&k| values[k] < threshold);
    match last_below {
        None => Some(t_from),
        Some(k) if k + 1 == values.len() => None,
        Some(k) => {
            let (v0, v1) = (values[k], values[k + 1]);
            let frac = (threshold - v0) / (v1 - v0);
            Some(times[k] + frac * (times[k + 1] - times[k]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_is_interpolated() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 0.8, 0.9, 1.0];
        let c = recovery_crossing(&t, &v, 0.5, 0.95).unwrap();
        assert!((c - 2.5).abs() < 1e-12);
    }

    #[test]
    fn never_below_returns_start() {
        assert_eq!(recovery_crossing(&[0.0, 1.0], &[1.0, 1.0], 0.0, 0.95), Some(0.0));
    }

    #[test]
    fn ending_below_is_unrecovered() {
        assert_eq!(recovery_crossing(&[0.0, 1.0], &[1.0, 0.9], 0.0, 0.95), None);
    }
}
