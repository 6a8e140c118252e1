use std::ops::{Add, AddAssign, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{build_admittance_matrix, FeederNetwork};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Demand at one bus in load convention (positive P and Q consume power).
///
/// * `power` – constant-power part `S`.
/// * `current` – constant-current part, the complex power drawn at 1 p.u.
/// * `admittance` – constant-admittance part `Y`, drawing `|V|^2 * conj(Y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BusLoad {
    pub power: Complex64,
    pub current: Complex64,
    pub admittance: Complex64,
}

impl BusLoad {
    pub fn admittance(y: Complex64) -> Self {
        Self {
            admittance: y,
            ..Self::default()
        }
    }

    pub fn power(s: Complex64) -> Self {
        Self {
            power: s,
            ..Self::default()
        }
    }

    /// Current drawn at `v`, honouring the optional low-voltage conversion of
    /// constant-power and constant-current parts into constant admittance.
    pub fn current_at(&self, v: Complex64, pq_low_voltage: Option<f64>) -> Complex64 {
        let mag = v.norm();
        let mut i = self.admittance * v;
        if self.power == ZERO && self.current == ZERO {
            return i;
        }
        match pq_low_voltage {
            Some(vt) if mag < vt => {
                // S_p * |V|^2 / vt^2 and S_i * |V|^2 / vt: both admittance-like
                let y = (self.power / (vt * vt) + self.current / vt).conj();
                i += y * v;
            }
            _ => {
                if mag == 0.0 {
                    return Complex64::new(f64::NAN, f64::NAN);
                }
                i += (self.power / v).conj() + (self.current * mag / v).conj();
            }
        }
        i
    }

    /// Complex power drawn at `v`.
    pub fn power_at(&self, v: Complex64, pq_low_voltage: Option<f64>) -> Complex64 {
        v * self.current_at(v, pq_low_voltage).conj()
    }
}

impl Add for BusLoad {
    type Output = BusLoad;
    fn add(self, rhs: BusLoad) -> BusLoad {
        BusLoad {
            power: self.power + rhs.power,
            current: self.current + rhs.current,
            admittance: self.admittance + rhs.admittance,
        }
    }
}

impl AddAssign for BusLoad {
    fn add_assign(&mut self, rhs: BusLoad) {
        *self = *self + rhs;
    }
}

impl Mul<f64> for BusLoad {
    type Output = BusLoad;
    fn mul(self, k: f64) -> BusLoad {
        BusLoad {
            power: self.power * k,
            current: self.current * k,
            admittance: self.admittance * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFlowOptions {
    pub max_iterations: usize,
    /// Convergence threshold on max |ΔV| between iterations.
    pub tolerance: f64,
    /// Below this voltage, constant-power and constant-current demand is
    /// converted to constant admittance. `None` keeps the pure load model.
    pub pq_low_voltage: Option<f64>,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-10,
            pq_low_voltage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub voltages: Vec<Complex64>,
    pub iterations: usize,
}

/// Fixed-point current-injection solve: admittance parts are absorbed into
/// the bus matrix, constant-power and constant-current parts are injected as
/// `conj(S/V)` and refreshed until the voltage update falls below tolerance.
pub fn solve_power_flow(
    net: &FeederNetwork,
    loads: &[BusLoad],
    options: &PowerFlowOptions,
    initial: Option<&[Complex64]>,
) -> Result<PowerFlowSolution> {
    TreeSolver::new(net).solve(loads, options, initial)
}

/// KCL mismatch `Y_aug V - I_source + I_load(V)` at every bus, evaluated with
/// the dense bus matrix.
pub fn current_mismatch(
    net: &FeederNetwork,
    loads: &[BusLoad],
    v: &[Complex64],
    pq_low_voltage: Option<f64>,
) -> Vec<Complex64> {
    let y = build_admittance_matrix(net);
    let src = net.source();
    let s = net.source_index();
    let n = net.len();
    (0..n)
        .map(|i| {
            let mut r: Complex64 = (0..n).map(|j| y[(i, j)] * v[j]).sum();
            if i == s {
                r += (v[i] - src.emf) / src.impedance;
            }
            r + loads[i].current_at(v[i], pq_low_voltage)
        })
        .collect()
}

/// Direct solver for the tree-structured bus matrix. Eliminating buses from
/// the leaves toward the source produces no fill-in, so each linear solve is
/// linear in the bus count.
#[derive(Debug, Clone)]
pub(crate) struct TreeSolver {
    /// BFS order from the source.
    order: Vec<usize>,
    /// (parent, series admittance) per bus; the source has none.
    parent: Vec<Option<(usize, Complex64)>>,
    /// Diagonal of the branch matrix plus the Thevenin admittance.
    diag: Vec<Complex64>,
    source_index: usize,
    emf: Complex64,
    norton: Complex64,
}

impl TreeSolver {
    pub(crate) fn new(net: &FeederNetwork) -> Self {
        let n = net.len();
        let mut diag = vec![ZERO; n];
        let mut parent = vec![None; n];
        for (i, p) in parent.iter_mut().enumerate() {
            if let Some((pi, k)) = net.parent(i) {
                let br = &net.branches()[k];
                let y = br.impedance.inv();
                let half = Complex64::new(0.0, 0.5 * br.shunt_b);
                diag[i] += y + half;
                diag[pi] += y + half;
                *p = Some((pi, y));
            }
        }
        let src = net.source();
        let s = net.source_index();
        diag[s] += src.impedance.inv();
        Self {
            order: net.bfs_order().to_vec(),
            parent,
            diag,
            source_index: s,
            emf: src.emf,
            norton: src.emf / src.impedance,
        }
    }

    /// Solve `(Y + diag(shunt)) V = rhs` in place of `rhs`.
    pub(crate) fn linear_solve(&self, shunt: &[Complex64], rhs: &mut [Complex64]) -> Result<()> {
        let mut d: Vec<Complex64> = self.diag.iter().zip(shunt).map(|(a, b)| a + b).collect();
        for &j in self.order.iter().rev() {
            if let Some((p, y)) = self.parent[j] {
                if d[j].norm() < 1e-300 {
                    return Err(Error::Singular(format!("zero pivot at bus index {j}")));
                }
                let f = y / d[j];
                d[p] -= f * y;
                let bj = rhs[j];
                rhs[p] += f * bj;
            }
        }
        for &j in &self.order {
            match self.parent[j] {
                None => {
                    if d[j].norm() < 1e-300 {
                        return Err(Error::Singular("zero pivot at source bus".into()));
                    }
                    rhs[j] /= d[j];
                }
                Some((p, y)) => {
                    let vp = rhs[p];
                    rhs[j] = (rhs[j] + y * vp) / d[j];
                }
            }
        }
        Ok(())
    }

    pub(crate) fn solve(
        &self,
        loads: &[BusLoad],
        options: &PowerFlowOptions,
        initial: Option<&[Complex64]>,
    ) -> Result<PowerFlowSolution> {
        let n = self.diag.len();
        if loads.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} bus loads, got {}",
                loads.len()
            )));
        }
        let shunt: Vec<Complex64> = loads.iter().map(|l| l.admittance).collect();
        let has_nonlinear = loads.iter().any(|l| l.power != ZERO || l.current != ZERO);
        let mut v: Vec<Complex64> = match initial {
            Some(v0) if v0.len() == n => v0.to_vec(),
            _ => vec![self.emf; n],
        };
        let mut rhs = vec![ZERO; n];
        let mut last_step = f64::INFINITY;
        for it in 1..=options.max_iterations {
            for (i, r) in rhs.iter_mut().enumerate() {
                let l = BusLoad {
                    admittance: ZERO,
                    ..loads[i]
                };
                *r = if l.power == ZERO && l.current == ZERO {
                    ZERO
                } else {
                    -l.current_at(v[i], options.pq_low_voltage)
                };
            }
            rhs[self.source_index] += self.norton;
            self.linear_solve(&shunt, &mut rhs)?;
            last_step = rhs
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            std::mem::swap(&mut v, &mut rhs);
            if !last_step.is_finite() {
                break;
            }
            if last_step <= options.tolerance || !has_nonlinear {
                return Ok(PowerFlowSolution {
                    voltages: v,
                    iterations: it,
                });
            }
        }
        Err(Error::Diverged {
            iterations: options.max_iterations,
            last_step,
        })
    }
}
