//! Bound-constrained Nelder–Mead with seeded multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop when the best value improved by less than this relative amount
    /// over `stall_iterations` iterations.
    pub rel_tol: f64,
    pub stall_iterations: usize,
    pub max_iterations: usize,
    /// Initial simplex edge as a fraction of each bound range.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            stall_iterations: 50,
            max_iterations: 2000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best value after every iteration; nonincreasing.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimises `f` from `x0` inside the box `bounds`. Trial points are
/// projected onto the box before evaluation.
pub fn nelder_mead<F>(f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let value = eval(x0);
        return Minimum {
            x: Vec::new(),
            value,
            iterations: 0,
            evaluations,
            trace: vec![value],
        };
    }

    let mut start = x0.to_vec();
    project(&mut start, bounds);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let step = opts.initial_step * (hi - lo).max(1e-12);
        let mut p = start.clone();
        // step away from the nearer bound so the vertex stays distinct
        p[i] = if p[i] + step <= hi { p[i] + step } else { p[i] - step };
        project(&mut p, bounds);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();
        trace.push(values[0]);

        if trace.len() > opts.stall_iterations {
            let old = trace[trace.len() - 1 - opts.stall_iterations];
            if old - values[0] <= opts.rel_tol * old.abs().max(1e-300) {
                break;
            }
        }
        if values[0] == 0.0 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect();
            project(&mut p, bounds);
            p
        };

        let xr = along(-alpha);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-gamma);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(-rho);
            let v = eval(&x);
            (x, v)
        } else {
            let x = along(rho);
            let v = eval(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for k in 1..=n {
            let p: Vec<f64> = (0..n)
                .map(|j| simplex[0][j] + sigma * (simplex[k][j] - simplex[0][j]))
                .collect();
            values[k] = eval(&p);
            simplex[k] = p;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    if trace.last().is_none_or(|&t| values[best] < t) {
        trace.push(values[best]);
    }
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        trace,
    }
}

/// Start points for a multi-start run: `x0` first, then uniform draws in
/// the box from a seeded generator.
pub fn start_points(x0: &[f64], bounds: &[(f64, f64)], starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![x0.to_vec()];
    while out.len() < starts.max(1) {
        out.push(bounds.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect());
    }
    out
}

/// Runs Nelder–Mead from every start in parallel and returns all minima
/// in start order.
pub fn multi_start<F>(f: F, starts: &[Vec<f64>], bounds: &[(f64, f64)], opts: &NelderMeadOptions) -> Vec<Minimum>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    starts.par_iter().map(|x0| nelder_mead(&f, x0, bounds, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let opts = NelderMeadOptions {
            rel_tol: 1e-12,
            max_iterations: 5000,
            ..NelderMeadOptions::default()
        };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[(-2.0, 2.0), (-2.0, 2.0)], &opts);
        assert_relative_eq!(m.x[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(m.x[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let m = nelder_mead(f, &[0.5, 0.5], &[(0.0, 1.0), (0.0, 1.0)], &NelderMeadOptions::default());
        assert_relative_eq!(m.x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(m.x[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn trace_is_nonincreasing() {
        let m = nelder_mead(rosenbrock, &[0.0, 0.0], &[(-2.0, 2.0), (-2.0, 2.0)], &NelderMeadOptions::default());
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.value <= rosenbrock(&[0.0, 0.0]));
    }

    #[test]
    fn empty_parameter_set_evaluates_once() {
        let m = nelder_mead(|_| 0.25, &[], &[], &NelderMeadOptions::default());
        assert_eq!(m.evaluations, 1);
        assert_eq!(m.value, 0.25);
    }

    #[test]
    fn starts_are_seeded() {
        let b = [(0.0, 1.0), (5.0, 6.0)];
        let a = start_points(&[0.5, 5.5], &b, 8, 7);
        assert_eq!(a, start_points(&[0.5, 5.5], &b, 8, 7));
        assert_eq!(a.len(), 8);
        assert_eq!(a[0], vec![0.5, 5.5]);
        assert!(a.iter().all(|p| (0.0..=1.0).contains(&p[0]) && (5.0..=6.0).contains(&p[1])));
    }
}
