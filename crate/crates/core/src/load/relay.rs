use serde::{Deserialize, Serialize};

use super::Motor1PhaseParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motor1Mode {
    Running,
    Stalled,
    /// Stalling is disabled for this block (no A/C or stall switched off).
    NeverStalled,
}

/// Dynamic state of the single-phase motor block of one load point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadAreaState {
    pub motor1_mode: Motor1Mode,
    /// Time spent below the stall voltage while still running.
    pub stall_timer: f64,
    /// Thermal relay temperature on the motor base.
    pub theta: f64,
    /// Fraction of the stalled block still connected.
    pub f_th: f64,
    /// Slip of the three-phase motor.
    pub slip3: f64,
    /// Share of the A/C block left connected by mitigation control.
    #[serde(default = "one")]
    pub ac_connected: f64,
    /// Commanded PV reactive injection in kvar.
    #[serde(default)]
    pub pv_q_kvar: f64,
}

fn one() -> f64 {
    1.0
}

impl LoadAreaState {
    pub fn running(slip3: f64) -> Self {
        Self {
            motor1_mode: Motor1Mode::Running,
            stall_timer: 0.0,
            theta: 0.0,
            f_th: 1.0,
            slip3,
            ac_connected: 1.0,
            pv_q_kvar: 0.0,
        }
    }

    pub fn is_stalled(&self) -> bool {
        self.motor1_mode == Motor1Mode::Stalled
    }
}

/// Advances the stall detector by `dt` at voltage magnitude `v`.
///
/// A stall is declared once `v` has stayed below `v_stall` for longer than
/// `t_stall`. Stalling is absorbing: the simulated horizon is too short for
/// the compressors to restart.
pub fn update_stall_state(state: &mut LoadAreaState, v: f64, dt: f64, p: &Motor1PhaseParameters) {
    if state.motor1_mode != Motor1Mode::Running {
        return;
    }
    if v < p.v_stall {
        state.stall_timer += dt;
        if state.stall_timer > p.t_stall {
            state.motor1_mode = Motor1Mode::Stalled;
        }
    } else {
        state.stall_timer = 0.0;
    }
}

/// Fraction of stalled motors still connected at temperature `theta`.
pub fn trip_fraction(theta: f64, p: &Motor1PhaseParameters) -> f64 {
    (1.0 - (theta - p.theta1) / (p.theta2 - p.theta1)).clamp(0.0, 1.0)
}

/// Advances the thermal relay of a stalled block by `dt` at voltage `v`.
///
/// The temperature follows `T dθ/dt = V² G_stall − θ`, integrated exactly
/// over the step with `V` frozen. Heating uses the full stall conductance of
/// the block, so the relay model describes a representative motor rather
/// than the connected remainder. Tripped motors never reconnect, so `f_th`
/// is latched at its running minimum.
pub fn step_thermal_relay(state: &mut LoadAreaState, v: f64, dt: f64, p: &Motor1PhaseParameters) {
    if !state.is_stalled() {
        return;
    }
    let target = v * v * p.g_stall();
    state.theta = target + (state.theta - target) * (-dt / p.t_th).exp();
    state.f_th = state.f_th.min(trip_fraction(state.theta, p));
}

/// Heating power of a stalled motor at voltage `v` on the motor base.
pub fn heating_power(v: f64, p: &Motor1PhaseParameters) -> f64 {
    v * v * p.g_stall()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params() -> Motor1PhaseParameters {
        Motor1PhaseParameters::default()
    }

    fn stalled() -> LoadAreaState {
        LoadAreaState {
            motor1_mode: Motor1Mode::Stalled,
            ..LoadAreaState::running(0.0)
        }
    }

    #[test]
    fn stall_requires_sustained_low_voltage() {
        let p = params();
        let mut s = LoadAreaState::running(0.0);
        for _ in 0..2 {
            update_stall_state(&mut s, 0.4, 0.01, &p);
        }
        assert_eq!(s.motor1_mode, Motor1Mode::Running);
        update_stall_state(&mut s, 0.9, 0.01, &p);
        assert_eq!(s.stall_timer, 0.0);
        for _ in 0..4 {
            update_stall_state(&mut s, 0.4, 0.01, &p);
        }
        assert!(s.is_stalled());
        // absorbing
        update_stall_state(&mut s, 1.0, 0.01, &p);
        assert!(s.is_stalled());
    }

    #[test]
    fn never_stalled_mode_is_inert() {
        let p = params();
        let mut s = LoadAreaState {
            motor1_mode: Motor1Mode::NeverStalled,
            ..LoadAreaState::running(0.0)
        };
        update_stall_state(&mut s, 0.0, 1.0, &p);
        step_thermal_relay(&mut s, 0.0, 1.0, &p);
        assert_eq!(s.motor1_mode, Motor1Mode::NeverStalled);
        assert_eq!(s.theta, 0.0);
    }

    #[test]
    fn running_motor_does_not_heat() {
        let p = params();
        let mut s = LoadAreaState::running(0.0);
        step_thermal_relay(&mut s, 0.8, 1.0, &p);
        assert_eq!(s.theta, 0.0);
        assert_eq!(s.f_th, 1.0);
    }

    #[test]
    fn temperature_matches_closed_form() {
        let p = params();
        let v = 0.8;
        let mut s = stalled();
        let dt = 0.01;
        let steps = 500;
        for _ in 0..steps {
            step_thermal_relay(&mut s, v, dt, &p);
        }
        let t = dt * steps as f64;
        let target = v * v * p.g_stall();
        let exact = target * (1.0 - (-t / p.t_th).exp());
        assert_relative_eq!(s.theta, exact, max_relative = 1e-12);
    }

    #[test]
    fn single_step_from_cold() {
        // P_th = 2.45 with T_th = 15 s over one time constant
        let mut p = params();
        p.r_stall = 1.0 / 2.45;
        p.x_stall = 1e-12;
        let mut s = stalled();
        step_thermal_relay(&mut s, 1.0, 15.0, &p);
        assert_relative_eq!(s.theta, 1.5487, epsilon = 5e-5);

        // forward Euler at 1 ms converges to the same value
        let mut theta = 0.0;
        for _ in 0..15_000 {
            theta += 1e-3 * (2.45 - theta) / 15.0;
        }
        assert_relative_eq!(theta, s.theta, max_relative = 1e-4);
    }

    #[test]
    fn two_half_steps_equal_one_step() {
        let p = params();
        let mut a = stalled();
        let mut b = stalled();
        a.theta = 0.3;
        b.theta = 0.3;
        step_thermal_relay(&mut a, 0.72, 0.2, &p);
        step_thermal_relay(&mut b, 0.72, 0.1, &p);
        step_thermal_relay(&mut b, 0.72, 0.1, &p);
        assert!((a.theta - b.theta).abs() <= 1e-12);
    }

    #[test]
    fn trip_fraction_is_clamped_linear() {
        let p = params();
        assert_eq!(trip_fraction(0.0, &p), 1.0);
        assert_eq!(trip_fraction(p.theta1, &p), 1.0);
        assert_relative_eq!(trip_fraction(0.5 * (p.theta1 + p.theta2), &p), 0.5);
        assert_eq!(trip_fraction(p.theta2, &p), 0.0);
        assert_eq!(trip_fraction(10.0, &p), 0.0);
    }

    #[test]
    fn all_motors_trip_eventually_at_reduced_voltage() {
        let p = params();
        let mut s = stalled();
        let mut t = 0.0;
        while s.f_th > 0.0 && t < 200.0 {
            step_thermal_relay(&mut s, 0.85, 0.01, &p);
            t += 0.01;
        }
        assert_eq!(s.f_th, 0.0);
    }

    proptest! {
        #[test]
        fn connected_fraction_never_increases(
            volts in proptest::collection::vec(0.0f64..1.2, 1..400),
            dt in 0.001f64..0.2,
        ) {
            let p = params();
            let mut s = stalled();
            let mut prev = s.f_th;
            for v in volts {
                step_thermal_relay(&mut s, v, dt, &p);
                prop_assert!(s.f_th <= prev);
                prop_assert!((0.0..=1.0).contains(&s.f_th));
                prop_assert!(s.theta >= 0.0);
                prev = s.f_th;
            }
        }
    }
}
