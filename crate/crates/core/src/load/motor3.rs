//! Single-cage induction motor on its own base. Synchronous speed is 1 p.u.,
//! so air-gap power and electrical torque coincide.

use num_complex::Complex64;

use super::Motor3PhaseParameters;
use crate::error::{Error, Result};

const MIN_SLIP: f64 = 1e-9;

/// Input impedance `Rs + jXls + jXm ∥ (Rr/s + jXlr)` at slip `s`.
pub fn motor3_impedance(s: f64, p: &Motor3PhaseParameters) -> Complex64 {
    let stator = Complex64::new(p.r_s, p.x_ls);
    let xm = Complex64::new(0.0, p.x_m);
    if s <= MIN_SLIP {
        return stator + xm;
    }
    let rotor = Complex64::new(p.r_r / s, p.x_lr);
    stator + xm * rotor / (xm + rotor)
}

/// Terminal admittance at slip `s`.
pub fn motor3_admittance(s: f64, p: &Motor3PhaseParameters) -> Complex64 {
    motor3_impedance(s, p).inv()
}

/// Electrical torque `|I_r|² Rr / s` at terminal voltage magnitude `v`.
pub fn electrical_torque(s: f64, v: f64, p: &Motor3PhaseParameters) -> f64 {
    if s <= MIN_SLIP {
        return 0.0;
    }
    let xm = Complex64::new(0.0, p.x_m);
    let rotor = Complex64::new(p.r_r / s, p.x_lr);
    let i_s = Complex64::new(v, 0.0) / motor3_impedance(s, p);
    let i_r = i_s * xm / (xm + rotor);
    i_r.norm_sqr() * p.r_r / s
}

/// Load torque `T0 (1 − s)^k`.
pub fn mechanical_torque(s: f64, t0: f64, p: &Motor3PhaseParameters) -> f64 {
    t0 * (1.0 - s).max(0.0).powf(p.load_torque_exponent)
}

/// Slip of peak electrical torque, the edge of the stable operating region.
pub fn peak_torque_slip(p: &Motor3PhaseParameters) -> f64 {
    // Thevenin equivalent seen by the rotor
    let xm = Complex64::new(0.0, p.x_m);
    let zs = Complex64::new(p.r_s, p.x_ls);
    let zth = zs * xm / (zs + xm);
    let s = p.r_r / (zth.re * zth.re + (zth.im + p.x_lr).powi(2)).sqrt();
    s.min(1.0)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Slip at which the motor draws active power `p_in` at voltage `v`,
/// searched on the stable side of the torque peak.
pub fn slip_for_power(p_in: f64, v: f64, p: &Motor3PhaseParameters) -> Result<f64> {
    let s_max = peak_torque_slip(p);
    let power = |s: f64| v * v * motor3_admittance(s, p).re - p_in;
    if power(s_max) < 0.0 {
        return Err(Error::Singular(format!(
            "three-phase motor cannot draw {p_in:.4} p.u. at {v:.4} p.u. voltage"
        )));
    }
    Ok(bisect(MIN_SLIP, s_max, power))
}

/// Stable equilibrium slip for load torque `T0 (1 − s)^k` at voltage `v`, or
/// `None` when the motor cannot carry the load and stalls.
pub fn equilibrium_slip(v: f64, t0: f64, p: &Motor3PhaseParameters) -> Option<f64> {
    let s_max = peak_torque_slip(p);
    let net = |s: f64| electrical_torque(s, v, p) - mechanical_torque(s, t0, p);
    if net(s_max) < 0.0 {
        return None;
    }
    Some(bisect(MIN_SLIP, s_max, net))
}

/// Explicit Euler step of `2H ds/dt = T_m − T_e`, clamped to `[0, 1]`.
pub fn motor3_step(s: f64, v: f64, t0: f64, dt: f64, p: &Motor3PhaseParameters) -> f64 {
    let ds = (mechanical_torque(s, t0, p) - electrical_torque(s, v, p)) / (2.0 * p.h);
    (s + dt * ds).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> Motor3PhaseParameters {
        Motor3PhaseParameters::default()
    }

    #[test]
    fn torque_equals_air_gap_power() {
        let p = params();
        for s in [0.005, 0.02, 0.1, 0.5, 1.0] {
            let y = motor3_admittance(s, &p);
            let i_s = y * 0.97;
            let stator_loss = i_s.norm_sqr() * p.r_s;
            let p_in = 0.97 * 0.97 * y.re;
            assert_relative_eq!(electrical_torque(s, 0.97, &p), p_in - stator_loss, max_relative = 1e-10);
        }
    }

    #[test]
    fn equilibrium_has_zero_derivative() {
        let p = params();
        let s0 = slip_for_power(p.loading_factor, 1.0, &p).unwrap();
        let t0 = electrical_torque(s0, 1.0, &p) / (1.0 - s0).powf(p.load_torque_exponent);
        let ds = (mechanical_torque(s0, t0, &p) - electrical_torque(s0, 1.0, &p)) / (2.0 * p.h);
        assert!(ds.abs() < 1e-6);
        assert_relative_eq!(motor3_step(s0, 1.0, t0, 0.005, &p), s0, epsilon = 1e-9);
    }

    #[test]
    fn zero_voltage_decelerates_monotonically() {
        let p = params();
        let s0 = slip_for_power(p.loading_factor, 1.0, &p).unwrap();
        let t0 = electrical_torque(s0, 1.0, &p) / (1.0 - s0).powi(2);
        let mut s = s0;
        for _ in 0..2000 {
            let next = motor3_step(s, 0.0, t0, 0.005, &p);
            assert!(next >= s);
            s = next;
        }
        assert!(s > 0.8);
    }

    #[test]
    fn stepping_converges_to_bisection_root() {
        let p = params();
        let s0 = slip_for_power(p.loading_factor, 1.0, &p).unwrap();
        let t0 = electrical_torque(s0, 1.0, &p) / (1.0 - s0).powi(2);
        // voltage sag to 0.9 and settle
        let mut s = s0;
        for _ in 0..20_000 {
            s = motor3_step(s, 0.9, t0, 0.005, &p);
        }
        let root = equilibrium_slip(0.9, t0, &p).unwrap();
        assert!((s - root).abs() < 1e-4, "{s} vs {root}");
        assert!(root > s0);
    }

    #[test]
    fn deep_sag_has_no_equilibrium() {
        let p = params();
        let s0 = slip_for_power(p.loading_factor, 1.0, &p).unwrap();
        let t0 = electrical_torque(s0, 1.0, &p) / (1.0 - s0).powi(2);
        assert!(equilibrium_slip(0.2, t0, &p).is_none());
    }

    #[test]
    fn peak_slip_maximizes_torque() {
        let p = params();
        let sp = peak_torque_slip(&p);
        let t = electrical_torque(sp, 1.0, &p);
        assert!(t >= electrical_torque(sp * 0.98, 1.0, &p));
        assert!(t >= electrical_torque(sp * 1.02, 1.0, &p));
    }
}
