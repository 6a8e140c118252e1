use nalgebra::DMatrix;
use num_complex::Complex64;

use super::FeederNetwork;
use crate::error::{Error, Result};

/// Bus admittance matrix of the feeder branches (the Thevenin source is not
/// included). Line charging is split half-and-half between the two ends.
pub fn build_admittance_matrix(net: &FeederNetwork) -> DMatrix<Complex64> {
    let elements: Vec<_> = net
        .branches()
        .iter()
        .map(|br| {
            // indices were validated at construction
            let f = net.bus_index(br.from).unwrap();
            let t = net.bus_index(br.to).unwrap();
            (f, t, br.impedance, br.shunt_b)
        })
        .collect();
    assemble(net.len(), &elements).expect("validated network has non-zero impedances")
}

pub(crate) fn assemble(
    n: usize,
    elements: &[(usize, usize, Complex64, f64)],
) -> Result<DMatrix<Complex64>> {
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for &(f, t, z, b) in elements {
        if !(z.norm() > 0.0) {
            return Err(Error::invalid("zero-impedance branch"));
        }
        let ys = z.inv();
        let half = Complex64::new(0.0, 0.5 * b);
        y[(f, f)] += ys + half;
        y[(t, t)] += ys + half;
        y[(f, t)] -= ys;
        y[(t, f)] -= ys;
    }
    Ok(y)
}

/// Admittance of a stalled single-phase motor, `G_stall - j*B_stall`, on the
/// motor base.
pub fn stall_admittance(r_stall: f64, x_stall: f64) -> Result<Complex64> {
    if !(r_stall > 0.0) || x_stall < 0.0 || !x_stall.is_finite() {
        return Err(Error::invalid(format!(
            "stall impedance must have r > 0 and x >= 0 (got r = {r_stall}, x = {x_stall})"
        )));
    }
    let d = r_stall * r_stall + x_stall * x_stall;
    Ok(Complex64::new(r_stall / d, -x_stall / d))
}

#[cfg(test)]
mod tests {
    use super::super::test_networks::*;
    use super::super::{FeederNetwork, TheveninSource};
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_branch_off_diagonal() {
        let net = FeederNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![branch(1, 2, 0.01, 0.02)],
            source(0.1),
            1.0,
        )
        .unwrap();
        let y = build_admittance_matrix(&net);
        assert_relative_eq!(y[(0, 1)].re, -20.0, epsilon = 1e-9);
        assert_relative_eq!(y[(0, 1)].im, 40.0, epsilon = 1e-9);
        assert_eq!(y[(0, 1)], y[(1, 0)]);
        assert_relative_eq!((y[(0, 0)] + y[(0, 1)]).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn no_branches_gives_zero_matrix() {
        let net = FeederNetwork::new(
            vec![bus(7, true)],
            vec![],
            TheveninSource {
                emf: Complex64::new(1.0, 0.0),
                impedance: Complex64::new(0.0, 0.1),
            },
            1.0,
        )
        .unwrap();
        let y = build_admittance_matrix(&net);
        assert_eq!(y.shape(), (1, 1));
        assert_eq!(y[(0, 0)], Complex64::new(0.0, 0.0));
        assert!(assemble(3, &[]).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn parallel_branches_add() {
        let z = Complex64::new(0.01, 0.02);
        let one = assemble(2, &[(0, 1, z, 0.0)]).unwrap();
        let two = assemble(2, &[(0, 1, z, 0.0), (0, 1, z, 0.0)]).unwrap();
        assert_relative_eq!((two[(0, 1)] - 2.0 * one[(0, 1)]).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_impedance_rejected() {
        assert!(assemble(2, &[(0, 1, Complex64::new(0.0, 0.0), 0.0)]).is_err());
    }

    #[test]
    fn shunt_charging_on_diagonal_only() {
        let y = assemble(2, &[(0, 1, Complex64::new(0.01, 0.02), 0.004)]).unwrap();
        let sum_row: Complex64 = y.row(0).iter().sum();
        assert_relative_eq!(sum_row.im, 0.002, epsilon = 1e-12);
        assert_relative_eq!(sum_row.re, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn matrix_is_symmetric() {
        let y = build_admittance_matrix(&small_feeder());
        assert_eq!(y, y.transpose());
    }

    #[test]
    fn stall_admittance_examples() {
        let y = stall_admittance(0.1, 0.1).unwrap();
        assert_relative_eq!(y.re, 5.0, epsilon = 1e-12);
        assert_relative_eq!(-y.im, 5.0, epsilon = 1e-12);

        // area A5 stall impedance; the exact reciprocal is 5.347 - j6.758,
        // within 1 % of the rounded 5.30 / 6.70
        let y = stall_admittance(0.072, 0.091).unwrap();
        assert_relative_eq!(y.re, 0.072 / 0.013465, max_relative = 1e-12);
        assert_relative_eq!(-y.im, 0.091 / 0.013465, max_relative = 1e-12);
        assert_relative_eq!(y.re, 5.30, max_relative = 1e-2);
        assert_relative_eq!(-y.im, 6.70, max_relative = 1e-2);

        let y = stall_admittance(1.0, 0.0).unwrap();
        assert_eq!(y, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn stall_admittance_rejects_non_positive() {
        assert!(stall_admittance(0.0, 0.1).is_err());
        assert!(stall_admittance(-0.1, 0.1).is_err());
        assert!(stall_admittance(0.1, -0.1).is_err());
    }
}
