use fidvr_core::load::Motor1PhaseParameters;
use fidvr_core::mitigation::{compute_time_voltage_derivatives, solve_bounded_lp, uniform_ac_plan, AreaCapacity, LpStatus};
use fidvr_core::monitor::{estimate_t1, estimate_t2};
use fidvr_core::pmu::{read_csv, write_csv, MuPmuFrame};
use num_complex::Complex64;
use proptest::prelude::*;

fn relay() -> impl Strategy<Value = Motor1PhaseParameters> {
    (0.05..0.3f64, 0.05..0.3f64, 5.0..30.0f64, 0.2..1.0f64, 0.5..3.0f64).prop_map(|(r, x, t_th, theta1, gap)| {
        Motor1PhaseParameters {
            r_stall: r,
            x_stall: x,
            t_th,
            theta1,
            theta2: theta1 + gap,
            ..Motor1PhaseParameters::default()
        }
    })
}

/// Problems shaped like the mitigation LP: nonpositive effects, nonpositive
/// requirements, nonnegative costs and bounds.
fn mitigation_lp() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1..6usize, 1..5usize).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(0.0..5.0f64, n),
            prop::collection::vec(prop::collection::vec(-2.0..0.0f64, n), m),
            prop::collection::vec(-4.0..0.0f64, m),
            prop::collection::vec(0.0..3.0f64, n),
        )
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn recovery_times_fall_with_voltage(p in relay(), v in 0.3..0.9f64) {
        let h = 1e-3;
        if let (Ok(a), Ok(b)) = (estimate_t1(v, &p), estimate_t1(v + h, &p)) {
            prop_assert!(b < a);
        }
        if let (Ok(a), Ok(b)) = (estimate_t2(v, 0.95, &p), estimate_t2(v + h, 0.95, &p)) {
            prop_assert!(b < a);
        }
        if let Ok((d1, d2)) = compute_time_voltage_derivatives(v, 0.95, &p) {
            prop_assert!(d1 < 0.0 && d2 < 0.0);
        }
    }

    #[test]
    fn lp_solutions_are_feasible_and_infeasibility_is_exact((c, g, h, ub) in mitigation_lp()) {
        let sol = solve_bounded_lp(&c, &g, &h, &ub).unwrap();
        // with nonpositive effects, full effort is the most any plan can do
        let full_effort_works = g.iter().zip(&h).all(|(row, &hi)| dot(row, &ub) <= hi + 1e-9);
        match sol.status {
            LpStatus::Optimal => {
                prop_assert!(full_effort_works);
                for (x, u) in sol.x.iter().zip(&ub) {
                    prop_assert!(*x >= -1e-12 && *x <= u + 1e-12);
                }
                for (row, hi) in g.iter().zip(&h) {
                    prop_assert!(dot(row, &sol.x) <= hi + 1e-9);
                }
                prop_assert!((dot(&c, &sol.x) - sol.objective).abs() < 1e-9);
                prop_assert!(sol.objective <= dot(&c, &ub) + 1e-9);

                // relaxing every requirement never costs more
                let looser: Vec<f64> = h.iter().map(|x| x * 0.5).collect();
                let relaxed = solve_bounded_lp(&c, &g, &looser, &ub).unwrap();
                prop_assert_eq!(relaxed.status, LpStatus::Optimal);
                prop_assert!(relaxed.objective <= sol.objective + 1e-9);
            }
            LpStatus::Infeasible => prop_assert!(!full_effort_works),
        }
    }

    #[test]
    fn uniform_plan_sheds_the_fraction_of_every_area(
        kw in prop::collection::vec(0.0..500.0f64, 1..8),
        frac in 0.0..1.0f64,
    ) {
        let caps: Vec<AreaCapacity> = kw
            .iter()
            .enumerate()
            .map(|(k, &ac_kw)| AreaCapacity { area: format!("A{k}"), ac_kw, pv_q_max_kvar: 10.0 })
            .collect();
        let plan = uniform_ac_plan(&caps, frac);
        let total = plan.iter().fold(0.0, |acc, p| acc + p.amount);
        prop_assert!((total - frac * kw.iter().sum::<f64>()).abs() < 1e-9);
        prop_assert!(plan.iter().all(|p| p.amount >= 0.0));
    }

    #[test]
    fn csv_round_trip_keeps_nine_digits(
        rows in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -5.0..5.0f64, -5.0..5.0f64), 1..20),
    ) {
        let frames: Vec<MuPmuFrame> = rows
            .iter()
            .enumerate()
            .map(|(k, &(vr, vi, ir, ii))| MuPmuFrame {
                t: k as f64 * 0.01,
                area: "A1".into(),
                node: 702,
                v: Complex64::new(vr, vi),
                i: Complex64::new(ir, ii),
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &frames).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), frames.len());
        for (a, b) in frames.iter().zip(&back) {
            prop_assert_eq!(&a.area, &b.area);
            prop_assert_eq!(a.node, b.node);
            prop_assert!((a.t - b.t).abs() <= 1e-8 * a.t.abs().max(1e-3));
            // phasors are stored in polar form, so the error scales with the magnitude
            for (x, y) in [(a.v, b.v), (a.i, b.i)] {
                prop_assert!((x - y).norm() <= 1e-8 * x.norm().max(1e-3));
            }
        }
    }
}
