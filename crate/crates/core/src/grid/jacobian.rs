use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;

use super::{build_admittance_matrix, FeederNetwork};
use crate::error::{Error, Result};

fn augmented_admittance(net: &FeederNetwork, shunts: &[Complex64]) -> DMatrix<Complex64> {
    let mut y = build_admittance_matrix(net);
    for (i, sh) in shunts.iter().enumerate() {
        y[(i, i)] += sh;
    }
    let s = net.source_index();
    y[(s, s)] += net.source().impedance.inv();
    y
}

/// Net complex power injected into the network at every bus,
/// `S_i = V_i * conj(I_i)`, where the bus currents include the admittance
/// loads in `shunts` and the Thevenin source. At a power-flow solution this
/// equals the negated constant-power demand.
pub fn power_injections(net: &FeederNetwork, shunts: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let y = augmented_admittance(net, shunts);
    let n = net.len();
    let s = net.source_index();
    let norton = net.source().emf / net.source().impedance;
    (0..n)
        .map(|i| {
            let mut cur: Complex64 = (0..n).map(|j| y[(i, j)] * v[j]).sum();
            if i == s {
                cur -= norton;
            }
            v[i] * cur.conj()
        })
        .collect()
}

/// Polar power-flow Jacobian `∂(P, Q) / ∂(θ, |V|)` at the operating point `v`.
///
/// Every bus is a PQ bus; the Thevenin emf is the angle reference, so the
/// matrix is square of size `2n` with rows `[P; Q]` and columns
/// `[θ; |V|]`. Admittance loads in `shunts` are part of the bus matrix and
/// so contribute their voltage dependence.
pub fn compute_jacobian(
    net: &FeederNetwork,
    shunts: &[Complex64],
    v: &[Complex64],
) -> Result<DMatrix<f64>> {
    let n = net.len();
    if v.len() != n || shunts.len() != n {
        return Err(Error::invalid("voltage/shunt vectors do not match the network"));
    }
    let y = augmented_admittance(net, shunts);
    let s = net.source_index();
    let norton = net.source().emf / net.source().impedance;
    let ibus: Vec<Complex64> = (0..n)
        .map(|i| {
            let c: Complex64 = (0..n).map(|j| y[(i, j)] * v[j]).sum();
            if i == s {
                c - norton
            } else {
                c
            }
        })
        .collect();

    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    let j = Complex64::i();
    for i in 0..n {
        for k in 0..n {
            // dS/dθ = j diag(V) conj(diag(I) - Y diag(V))
            let mut d_theta = -(y[(i, k)] * v[k]).conj();
            if i == k {
                d_theta += ibus[i].conj();
            }
            d_theta = j * v[i] * d_theta;
            // dS/d|V| = diag(V) conj(Y diag(V/|V|)) + diag(conj(I)) diag(V/|V|)
            let uk = v[k] / v[k].norm();
            let mut d_mag = v[i] * (y[(i, k)] * uk).conj();
            if i == k {
                d_mag += ibus[i].conj() * uk;
            }
            jac[(i, k)] = d_theta.re;
            jac[(i, n + k)] = d_mag.re;
            jac[(n + i, k)] = d_theta.im;
            jac[(n + i, n + k)] = d_mag.im;
        }
    }
    // fail early on an operating point at or past the nose
    JacobianFactor::new(jac.clone())?;
    Ok(jac)
}

/// LU factorization of a Jacobian, reused across right-hand sides.
#[derive(Debug, Clone)]
pub struct JacobianFactor {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl JacobianFactor {
    pub fn new(jac: DMatrix<f64>) -> Result<Self> {
        let scale = jac.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lu = jac.lu();
        let u = lu.u();
        let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        if !(scale > 0.0) || !(min_pivot > 1e-12 * scale) {
            return Err(Error::Singular(format!(
                "power-flow Jacobian is singular (min pivot {min_pivot:.3e}, scale {scale:.3e})"
            )));
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(rhs)
            .ok_or_else(|| Error::Singular("Jacobian solve failed".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_networks::*;
    use super::super::{solve_power_flow, BusLoad, FeederNetwork, PowerFlowOptions};
    use super::*;

    fn operating_point(net: &FeederNetwork) -> (Vec<Complex64>, Vec<Complex64>) {
        let shunts = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.8, -0.6),
            Complex64::new(0.3, -0.1),
            Complex64::new(1.2, -1.5),
        ];
        let loads: Vec<BusLoad> = shunts
            .iter()
            .enumerate()
            .map(|(i, &y)| BusLoad {
                admittance: y,
                power: Complex64::new(0.05 * i as f64, 0.02),
                ..BusLoad::default()
            })
            .collect();
        let v = solve_power_flow(net, &loads, &PowerFlowOptions::default(), None)
            .unwrap()
            .voltages;
        (shunts, v)
    }

    /// Central differences of the injected-power map in polar coordinates.
    fn finite_difference(net: &FeederNetwork, shunts: &[Complex64], v: &[Complex64]) -> DMatrix<f64> {
        let n = v.len();
        let h = 1e-6;
        let mut fd = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..2 * n {
            let perturb = |sign: f64| {
                let mut vp = v.to_vec();
                let (mag, ang) = (vp[k % n].norm(), vp[k % n].arg());
                vp[k % n] = if k < n {
                    Complex64::from_polar(mag, ang + sign * h)
                } else {
                    Complex64::from_polar(mag + sign * h, ang)
                };
                power_injections(net, shunts, &vp)
            };
            let sp = perturb(1.0);
            let sm = perturb(-1.0);
            for i in 0..n {
                let d = (sp[i] - sm[i]) / (2.0 * h);
                fd[(i, k)] = d.re;
                fd[(n + i, k)] = d.im;
            }
        }
        fd
    }

    #[test]
    fn matches_central_differences() {
        let net = small_feeder();
        let (shunts, v) = operating_point(&net);
        let jac = compute_jacobian(&net, &shunts, &v).unwrap();
        let fd = finite_difference(&net, &shunts, &v);
        let scale = jac.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in jac.iter().zip(fd.iter()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3 * scale), "{a} vs {b}");
        }
    }

    #[test]
    fn flat_start_two_bus_is_diagonally_dominant() {
        let net = FeederNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![branch(1, 2, 0.01, 0.05)],
            source(0.1),
            1.0,
        )
        .unwrap();
        let v = vec![Complex64::new(1.0, 0.0); 2];
        let jac = compute_jacobian(&net, &[Complex64::new(0.0, 0.0); 2], &v).unwrap();
        for blk in [0, 2] {
            for i in 0..2 {
                let r = blk + i;
                let diag = jac[(r, blk + i)].abs();
                let off = jac[(r, blk + 1 - i)].abs();
                // weak at an unloaded leaf, strict where the source adds coupling
                if i == 0 {
                    assert!(diag > off, "row {r}: {diag} <= {off}");
                } else {
                    assert!(diag >= off * (1.0 - 1e-12), "row {r}: {diag} < {off}");
                }
            }
        }
    }

    #[test]
    fn relabelling_permutes_the_jacobian() {
        let net = small_feeder();
        let (shunts, v) = operating_point(&net);
        let jac = compute_jacobian(&net, &shunts, &v).unwrap();

        // same feeder, buses listed in reverse order with new ids
        let perm = [3usize, 2, 1, 0];
        let ids = [40u32, 30, 20, 10];
        let id_of = |old: u32| ids[perm.iter().position(|&p| p == old as usize - 1).unwrap()];
        let buses = perm
            .iter()
            .zip(ids)
            .map(|(&old, id)| bus(id, old == 0))
            .collect();
        let branches = net
            .branches()
            .iter()
            .map(|b| super::super::Branch {
                from: id_of(b.from),
                to: id_of(b.to),
                ..b.clone()
            })
            .collect();
        let relabelled = FeederNetwork::new(buses, branches, *net.source(), net.base_mva()).unwrap();
        let sh2: Vec<_> = perm.iter().map(|&o| shunts[o]).collect();
        let v2: Vec<_> = perm.iter().map(|&o| v[o]).collect();
        let jac2 = compute_jacobian(&relabelled, &sh2, &v2).unwrap();
        let n = 4;
        for (ni, &oi) in perm.iter().enumerate() {
            for (nk, &ok) in perm.iter().enumerate() {
                for (bi, bk) in [(0, 0), (0, n), (n, 0), (n, n)] {
                    let a = jac2[(bi + ni, bk + nk)];
                    let b = jac[(bi + oi, bk + ok)];
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn singular_jacobian_is_reported() {
        assert!(matches!(
            JacobianFactor::new(DMatrix::zeros(2, 2)),
            Err(Error::Singular(_))
        ));
        let rank_one = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(JacobianFactor::new(rank_one).is_err());
    }
}
