//! Bounded-variable revised simplex for small dense problems
//!
//! ```text
//! minimise    cᵀx
//! subject to  G x ≤ h,   0 ≤ x ≤ u
//! ```
//!
//! Variable bounds are handled natively (nonbasic variables rest at either
//! bound), a phase-one problem with artificials finds a feasible basis, and
//! Bland's rule guarantees termination.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const TOL: f64 = 1e-10;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Problem {
    /// Constraint matrix over structural, slack and artificial columns.
    a: DMatrix<f64>,
    b: DVector<f64>,
    upper: Vec<f64>,
}

struct Simplex<'a> {
    p: &'a Problem,
    basis: Vec<usize>,
    state: Vec<State>,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn basis_matrix(&self) -> DMatrix<f64> {
        let m = self.p.b.len();
        DMatrix::from_fn(m, m, |r, c| self.p.a[(r, self.basis[c])])
    }

    /// Values of all variables for the current basis.
    fn values(&self, lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> Result<Vec<f64>> {
        let n = self.p.a.ncols();
        let mut rhs = self.p.b.clone();
        let mut x = vec![0.0; n];
        for j in 0..n {
            if self.state[j] == State::Upper {
                x[j] = self.p.upper[j];
                rhs -= self.p.a.column(j) * x[j];
            }
        }
        let xb = lu.solve(&rhs).ok_or_else(|| Error::Singular("simplex basis is singular".into()))?;
        for (k, &j) in self.basis.iter().enumerate() {
            x[j] = xb[k];
        }
        Ok(x)
    }

    fn run(&mut self, cost: &[f64]) -> Result<Vec<f64>> {
        let n = self.p.a.ncols();
        let m = self.p.b.len();
        let max_iter = 50 * (n + m) + 1000;
        loop {
            self.iterations += 1;
            if self.iterations > max_iter {
                return Err(Error::Diverged {
                    iterations: self.iterations,
                    last_step: f64::NAN,
                });
            }
            let bm = self.basis_matrix();
            let lu = bm.clone().lu();
            let x = self.values(&lu)?;
            let cb = DVector::from_iterator(m, self.basis.iter().map(|&j| cost[j]));
            let y = bm.transpose().lu().solve(&cb).ok_or_else(|| Error::Singular("simplex basis is singular".into()))?;

            // Bland: first eligible index enters
            let entering = (0..n).find(|&j| {
                if self.state[j] == State::Basic || self.p.upper[j] == 0.0 {
                    return false;
                }
                let d = cost[j] - self.p.a.column(j).dot(&y);
                match self.state[j] {
                    State::Lower => d < -TOL,
                    State::Upper => d > TOL,
                    State::Basic => false,
                }
            });
            let Some(q) = entering else {
                return Ok(x);
            };
            let dir = if self.state[q] == State::Lower { 1.0 } else { -1.0 };
            let alpha = lu.solve(&self.p.a.column(q).into_owned()).ok_or_else(|| Error::Singular("simplex basis is singular".into()))?;

            // ratio test: x_B - dir * t * alpha stays within bounds; ties go
            // to the smallest variable index
            let mut best: Option<(f64, usize, State)> = None;
            for k in 0..m {
                let rate = dir * alpha[k];
                let j = self.basis[k];
                let (limit, to) = if rate > TOL {
                    (x[j].max(0.0) / rate, State::Lower)
                } else if rate < -TOL && self.p.upper[j].is_finite() {
                    ((self.p.upper[j] - x[j]).max(0.0) / -rate, State::Upper)
                } else {
                    continue;
                };
                let take = match best {
                    None => true,
                    Some((bl, bk, _)) => limit < bl - TOL || (limit <= bl + TOL && j < self.basis[bk]),
                };
                if take {
                    best = Some((limit, k, to));
                }
            }
            let leave = match best {
                Some((limit, k, to)) if limit < self.p.upper[q] => Some((k, to)),
                _ => None,
            };
            if leave.is_none() && !self.p.upper[q].is_finite() {
                return Err(Error::invalid("linear program is unbounded"));
            }
            match leave {
                None => {
                    // bound flip of the entering variable
                    self.state[q] = if self.state[q] == State::Lower { State::Upper } else { State::Lower };
                }
                Some((k, to)) => {
                    let out = self.basis[k];
                    self.state[out] = to;
                    self.basis[k] = q;
                    self.state[q] = State::Basic;
                }
            }
        }
    }
}

/// Solves `min cᵀx` subject to `G x ≤ h`, `0 ≤ x ≤ upper`.
///
/// `g` is row-major with one row per constraint. Infeasible problems are
/// reported through [`LpStatus::Infeasible`], not as an error.
pub fn solve_bounded_lp(c: &[f64], g: &[Vec<f64>], h: &[f64], upper: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = h.len();
    if g.len() != m || g.iter().any(|row| row.len() != n) || upper.len() != n {
        return Err(Error::invalid("linear program dimensions do not agree"));
    }
    if upper.iter().any(|&u| !(u >= 0.0)) {
        return Err(Error::invalid("upper bounds must be non-negative"));
    }
    if c.iter().chain(h).chain(g.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("linear program data must be finite"));
    }
    if m == 0 {
        // bounds only: each variable sits at whichever bound is cheaper
        let x: Vec<f64> = c.iter().zip(upper).map(|(&ci, &u)| if ci < 0.0 { u } else { 0.0 }).collect();
        let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            iterations: 0,
        });
    }

    // columns: structural n, slack m, artificial m
    let cols = n + 2 * m;
    let mut a = DMatrix::zeros(m, cols);
    let mut b = DVector::zeros(m);
    for r in 0..m {
        let sign = if h[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            a[(r, j)] = sign * g[r][j];
        }
        a[(r, n + r)] = sign;
        a[(r, n + m + r)] = 1.0;
        b[r] = sign * h[r];
    }
    let mut upper_all: Vec<f64> = upper.to_vec();
    upper_all.extend(std::iter::repeat_n(f64::INFINITY, m));
    // artificials only exist for rows whose slack cannot start the basis
    upper_all.extend(h.iter().map(|&hr| if hr < 0.0 { f64::INFINITY } else { 0.0 }));
    let mut problem = Problem { a, b, upper: upper_all };

    // phase one: rows with h ≥ 0 start on their slack, the rest on an artificial
    let mut state = vec![State::Lower; cols];
    let mut basis = Vec::with_capacity(m);
    for r in 0..m {
        let j = if h[r] >= 0.0 { n + r } else { n + m + r };
        basis.push(j);
        state[j] = State::Basic;
    }
    let mut phase1_cost = vec![0.0; cols];
    for r in 0..m {
        if h[r] < 0.0 {
            phase1_cost[n + m + r] = 1.0;
        }
    }
    let mut sx = Simplex {
        p: &problem,
        basis,
        state,
        iterations: 0,
    };
    let x1 = sx.run(&phase1_cost)?;
    let infeas: f64 = (0..m).map(|r| x1[n + m + r]).sum();
    let scale = 1.0 + h.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeas > 1e-9 * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: x1[..n].to_vec(),
            objective: f64::NAN,
            iterations: sx.iterations,
        });
    }

    // phase two: artificials are pinned at zero
    let (basis, state, iters) = (sx.basis, sx.state, sx.iterations);
    for r in 0..m {
        problem.upper[n + m + r] = 0.0;
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, 2 * m));
    let mut sx = Simplex {
        p: &problem,
        basis,
        state,
        iterations: iters,
    };
    let x = sx.run(&cost)?;
    let xs: Vec<f64> = x[..n].iter().zip(upper).map(|(&v, &u)| v.clamp(0.0, u)).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: c.iter().zip(&xs).map(|(a, b)| a * b).sum(),
        x: xs,
        iterations: sx.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_constraint() {
        let s = solve_bounded_lp(&[1.0], &[vec![-1.0]], &[-2.0], &[5.0]).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_relative_eq!(s.x[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.objective, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cheapest_effective_control_wins() {
        let s = solve_bounded_lp(&[1.0, 1.0], &[vec![-0.02, -0.005]], &[-2.0], &[120.0, 120.0]).unwrap();
        assert_relative_eq!(s.x[0], 100.0, epsilon = 1e-9);
        assert_relative_eq!(s.x[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_requirement_needs_no_control() {
        let s = solve_bounded_lp(&[1.0, 0.01], &[vec![-0.3, -0.1]], &[0.0], &[10.0, 10.0]).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
    }

    #[test]
    fn upper_bound_binding_spills_to_next_control() {
        let s = solve_bounded_lp(&[1.0, 2.0], &[vec![-1.0, -1.0]], &[-7.0], &[4.0, 10.0]).unwrap();
        assert_relative_eq!(s.x[0], 4.0, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], 3.0, epsilon = 1e-12);
        assert_relative_eq!(s.objective, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_when_bounds_are_too_tight() {
        let s = solve_bounded_lp(&[1.0], &[vec![-1.0]], &[-6.0], &[5.0]).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_rows_terminate() {
        // duplicated constraints create degenerate pivots
        let g = vec![vec![-1.0, -1.0], vec![-1.0, -1.0], vec![-2.0, -2.0]];
        let s = solve_bounded_lp(&[1.0, 1.0], &g, &[-1.0, -1.0, -2.0], &[3.0, 3.0]).unwrap();
        assert_relative_eq!(s.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        assert!(solve_bounded_lp(&[1.0, 1.0], &[vec![1.0]], &[1.0], &[1.0, 1.0]).is_err());
    }
}
