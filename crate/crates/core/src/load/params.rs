use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::stall_admittance;

/// Single-phase (air-conditioner) motor block.
///
/// Impedances, temperatures and the running demand are on the motor base,
/// which is the rated running active power of the block (kW taken as kVA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Motor1PhaseParameters {
    pub v_stall: f64,
    pub t_stall: f64,
    pub r_stall: f64,
    pub x_stall: f64,
    pub t_th: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub p_nom: f64,
    pub q_nom: f64,
}

impl Default for Motor1PhaseParameters {
    fn default() -> Self {
        Self {
            v_stall: 0.55,
            t_stall: 0.03,
            r_stall: 0.1,
            x_stall: 0.1,
            t_th: 15.0,
            theta1: 0.7,
            theta2: 3.0,
            p_nom: 1.0,
            q_nom: 0.6,
        }
    }
}

impl Motor1PhaseParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.0 && self.theta1 < self.theta2) {
            return Err(Error::invalid(format!(
                "motor1 requires 0 < theta1 < theta2 (got {} / {})",
                self.theta1, self.theta2
            )));
        }
        if !(self.t_th > 0.0) {
            return Err(Error::invalid("motor1 t_th must be positive"));
        }
        if !(self.v_stall > 0.0 && self.v_stall < 1.0) {
            return Err(Error::invalid("motor1 v_stall must lie in (0, 1)"));
        }
        if !(self.t_stall > 0.0) {
            return Err(Error::invalid("motor1 t_stall must be positive"));
        }
        if !(self.r_stall > 0.0 && self.x_stall > 0.0) {
            return Err(Error::invalid("motor1 stall impedance must be positive"));
        }
        Ok(())
    }

    /// `G_stall - j B_stall` on the motor base.
    pub fn stall_admittance(&self) -> Complex64 {
        stall_admittance(self.r_stall, self.x_stall)
            .unwrap_or_else(|_| Complex64::new(0.0, 0.0))
    }

    pub fn g_stall(&self) -> f64 {
        self.stall_admittance().re
    }

    pub fn b_stall(&self) -> f64 {
        -self.stall_admittance().im
    }
}

/// Aggregate three-phase induction motor, single-cage equivalent circuit on
/// its own base (`rated kW / loading_factor`). The double-cage rotor terms
/// are carried for completeness and not simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Motor3PhaseParameters {
    pub r_s: f64,
    pub x_ls: f64,
    pub x_m: f64,
    pub r_r: f64,
    pub x_lr: f64,
    pub h: f64,
    pub load_torque_exponent: f64,
    pub loading_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_lr2: Option<f64>,
}

impl Default for Motor3PhaseParameters {
    fn default() -> Self {
        Self {
            r_s: 0.03,
            x_ls: 0.1,
            x_m: 3.0,
            r_r: 0.03,
            x_lr: 0.08,
            h: 0.5,
            load_torque_exponent: 2.0,
            loading_factor: 0.75,
            r_r2: None,
            x_lr2: None,
        }
    }
}

impl Motor3PhaseParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_ls > 0.0 && self.x_m > 0.0 && self.x_lr > 0.0) {
            return Err(Error::invalid("motor3 reactances must be positive"));
        }
        if !(self.r_r > 0.0 && self.r_s >= 0.0) {
            return Err(Error::invalid("motor3 resistances must be non-negative (r_r > 0)"));
        }
        if !(self.h > 0.0) {
            return Err(Error::invalid("motor3 inertia must be positive"));
        }
        if !(self.loading_factor > 0.0 && self.loading_factor <= 1.0) {
            return Err(Error::invalid("motor3 loading factor must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Static load. Active and reactive shares split the static demand into
/// constant impedance, current and power parts; `q_ratio` is the static
/// Q/P at nominal voltage and `q_sh0` a shunt capacitor sized as a fraction
/// of the static active power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZipParameters {
    pub p_z0: f64,
    pub p_i0: f64,
    pub p_p0: f64,
    pub q_z0: f64,
    pub q_i0: f64,
    pub q_p0: f64,
    pub q_sh0: f64,
    pub q_ratio: f64,
}

impl Default for ZipParameters {
    fn default() -> Self {
        Self {
            p_z0: 0.5,
            p_i0: 0.3,
            p_p0: 0.2,
            q_z0: 0.7,
            q_i0: 0.2,
            q_p0: 0.1,
            q_sh0: 0.0,
            q_ratio: 0.3,
        }
    }
}

impl ZipParameters {
    pub fn validate(&self) -> Result<()> {
        let p = self.p_z0 + self.p_i0 + self.p_p0;
        let q = self.q_z0 + self.q_i0 + self.q_p0;
        if (p - 1.0).abs() > 1e-9 || (q - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "ZIP shares must each sum to 1 (P: {p}, Q: {q})"
            )));
        }
        Ok(())
    }
}

/// Inverter-interfaced PV. Rating is expressed relative to the PV active
/// output so the Q headroom scales with penetration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvParameters {
    /// Inverter kVA rating per kW of PV output.
    pub rating_ratio: f64,
    /// Reactive capability as a fraction of the rating.
    pub q_max_frac: f64,
}

impl Default for PvParameters {
    fn default() -> Self {
        Self {
            rating_ratio: 1.1,
            q_max_frac: 0.44,
        }
    }
}

impl PvParameters {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q_max_frac) {
            return Err(Error::invalid("pv q_max_frac must lie in [0, 1]"));
        }
        if !(self.rating_ratio >= 1.0) {
            return Err(Error::invalid("pv rating must cover its active output"));
        }
        Ok(())
    }
}

/// Demand split of one load point. `f_pv` is generation relative to the
/// demand and is not part of the unit sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadComposition {
    #[serde(default)]
    pub p_total_kw: f64,
    pub f_s: f64,
    #[serde(default)]
    pub f_el: f64,
    pub f_m1: f64,
    pub f_m3: f64,
    #[serde(default)]
    pub f_pv: f64,
}

impl LoadComposition {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.f_s, self.f_el, self.f_m1, self.f_m3, self.f_pv];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::invalid("load fractions must lie in [0, 1]"));
        }
        let sum = self.f_s + self.f_el + self.f_m1 + self.f_m3;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "f_s + f_el + f_m1 + f_m3 must equal 1 (got {sum})"
            )));
        }
        if !(self.p_total_kw >= 0.0) {
            return Err(Error::invalid("p_total_kw must be non-negative"));
        }
        Ok(())
    }

    pub fn ac_kw(&self) -> f64 {
        self.p_total_kw * self.f_m1
    }

    pub fn pv_kw(&self) -> f64 {
        self.p_total_kw * self.f_pv
    }
}

/// Complete parameter set of one composite load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadModel {
    pub composition: LoadComposition,
    #[serde(default)]
    pub zip: ZipParameters,
    #[serde(default)]
    pub motor1: Motor1PhaseParameters,
    #[serde(default)]
    pub motor3: Motor3PhaseParameters,
    #[serde(default)]
    pub pv: PvParameters,
    #[serde(default = "default_electronic_q_ratio")]
    pub electronic_q_ratio: f64,
}

fn default_electronic_q_ratio() -> f64 {
    0.1
}

impl LoadModel {
    pub fn new(composition: LoadComposition) -> Self {
        Self {
            composition,
            zip: ZipParameters::default(),
            motor1: Motor1PhaseParameters::default(),
            motor3: Motor3PhaseParameters::default(),
            pv: PvParameters::default(),
            electronic_q_ratio: default_electronic_q_ratio(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.composition.validate()?;
        self.zip.validate()?;
        self.motor1.validate()?;
        self.motor3.validate()?;
        self.pv.validate()
    }

    /// Reactive capability of the PV block in kvar.
    pub fn pv_q_max_kvar(&self) -> f64 {
        self.composition.pv_kw() * self.pv.rating_ratio * self.pv.q_max_frac
    }
}
