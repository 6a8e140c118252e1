use num_complex::Complex64;

use crate::error::{Error, Result};

/// One steady operating point of an area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRecord {
    pub v_root: Complex64,
    /// Load-weighted mean voltage of the area's load buses.
    pub v_agg: Complex64,
    pub i_area: Complex64,
}

/// Equivalent feeder impedance from steady records.
///
/// Fits `V_root − V_agg = z I + c` by complex least squares over the
/// records. The intercept absorbs the part of the drop that does not scale
/// with the area current (voltage-dependent load shares), so the slope is
/// the incremental impedance seen from the root.
pub fn estimate_feeder_equivalent(records: &[SteadyRecord]) -> Result<Complex64> {
    if records.len() < 3 {
        return Err(Error::invalid("feeder equivalent needs at least 3 operating points"));
    }
    let n = records.len() as f64;
    let i_mean: Complex64 = records.iter().map(|r| r.i_area).sum::<Complex64>() / n;
    let d_mean: Complex64 = records.iter().map(|r| r.v_root - r.v_agg).sum::<Complex64>() / n;
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    let mut scale = 0.0;
    for r in records {
        let di = r.i_area - i_mean;
        num += di.conj() * (r.v_root - r.v_agg - d_mean);
        den += di.norm_sqr();
        scale += r.i_area.norm_sqr();
    }
    if !(scale > 0.0) || den <= 1e-12 * scale {
        return Err(Error::invalid(
            "operating points do not vary the area current; cannot identify the feeder",
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_branch_is_exact() {
        let z = c(0.013, 0.021);
        let records: Vec<_> = [0.9, 1.0, 1.1]
            .iter()
            .map(|&s| {
                let i = c(0.3, -0.1) * s;
                let v_root = c(0.98, -0.01);
                SteadyRecord { v_root, v_agg: v_root - z * i, i_area: i }
            })
            .collect();
        let zf = estimate_feeder_equivalent(&records).unwrap();
        assert_relative_eq!((zf - z).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_loadings_rejected() {
        let r = SteadyRecord {
            v_root: c(1.0, 0.0),
            v_agg: c(0.99, 0.0),
            i_area: c(0.2, -0.1),
        };
        assert!(estimate_feeder_equivalent(&[r, r, r]).is_err());
    }

    #[test]
    fn zero_load_rejected() {
        let r = SteadyRecord {
            v_root: c(1.0, 0.0),
            v_agg: c(1.0, 0.0),
            i_area: c(0.0, 0.0),
        };
        assert!(estimate_feeder_equivalent(&[r, r, r]).is_err());
    }

    #[test]
    fn too_few_points_rejected() {
        let r = SteadyRecord {
            v_root: c(1.0, 0.0),
            v_agg: c(1.0, 0.0),
            i_area: c(0.1, 0.0),
        };
        assert!(estimate_feeder_equivalent(&[r, r]).is_err());
    }
}
