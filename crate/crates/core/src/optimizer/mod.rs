//! Smooth constrained local minimization.
//!
//! [`minimize`] runs an augmented-Lagrangian outer loop (Rockafellar form for
//! inequalities) around a limited-memory BFGS inner solver with Armijo
//! backtracking. Both best-response subproblems of the game are expressed as
//! an [`NlpProblem`]; the solver knows nothing about trajectories or sensors.
//!
//! Constraint convention: equalities `h(x) = 0`, inequalities `g(x) ≤ 0`.
//! Constraint gradients are sparse `(index, value)` lists because every
//! constraint in this crate touches at most four coordinates.

mod nnls;

pub use nnls::nnls;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use thiserror::Error;

pub const INITIAL_PENALTY: f64 = 1.0;
pub const PENALTY_GROWTH: f64 = 10.0;
pub const MAX_PENALTY: f64 = 1e10;
pub const LBFGS_MEMORY: usize = 10;
pub const MAX_BACKTRACKS: usize = 40;
pub const ARMIJO_C1: f64 = 1e-4;
const MAX_OUTER: usize = 60;
/// Relative merit change treated as floating-point noise by the line search.
pub const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("starting point has {got} coordinates, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective or gradient is not finite at the current iterate")]
    NonFiniteObjective,
}

/// Objective: writes the dense gradient into the slice, returns the value.
pub type ObjectiveFn<'a> = Box<dyn Fn(&[f64], &mut [f64]) -> f64 + 'a>;
/// Constraint: pushes sparse gradient entries (the buffer arrives empty), returns the value.
pub type ConstraintFn<'a> = Box<dyn Fn(&[f64], &mut Vec<(usize, f64)>) -> f64 + 'a>;

pub struct NlpProblem<'a> {
    dimension: usize,
    objective: ObjectiveFn<'a>,
    equalities: Vec<ConstraintFn<'a>>,
    inequalities: Vec<ConstraintFn<'a>>,
    bounds: Option<Vec<(f64, f64)>>,
}

impl<'a> NlpProblem<'a> {
    pub fn new(dimension: usize, objective: impl Fn(&[f64], &mut [f64]) -> f64 + 'a) -> Self {
        Self { dimension, objective: Box::new(objective), equalities: Vec::new(), inequalities: Vec::new(), bounds: None }
    }

    pub fn equality(mut self, h: impl Fn(&[f64], &mut Vec<(usize, f64)>) -> f64 + 'a) -> Self {
        self.equalities.push(Box::new(h));
        self
    }

    pub fn inequality(mut self, g: impl Fn(&[f64], &mut Vec<(usize, f64)>) -> f64 + 'a) -> Self {
        self.inequalities.push(Box::new(g));
        self
    }

    pub fn add_equality(&mut self, h: impl Fn(&[f64], &mut Vec<(usize, f64)>) -> f64 + 'a) {
        self.equalities.push(Box::new(h));
    }

    pub fn add_inequality(&mut self, g: impl Fn(&[f64], &mut Vec<(usize, f64)>) -> f64 + 'a) {
        self.inequalities.push(Box::new(g));
    }

    /// Per-coordinate box `lo ≤ x_i ≤ hi`; infinite ends are ignored.
    pub fn bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(bounds.len(), self.dimension, "one bound pair per coordinate");
        self.bounds = Some(bounds);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.objective)(x, grad)
    }

    pub fn equality_count(&self) -> usize {
        self.equalities.len()
    }

    pub fn inequality_count(&self) -> usize {
        self.inequalities.len()
    }

    /// Largest violation over every constraint and bound.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut buf = Vec::new();
        let mut v = 0.0_f64;
        for h in &self.equalities {
            buf.clear();
            v = v.max(h(x, &mut buf).abs());
        }
        for g in &self.inequalities {
            buf.clear();
            v = v.max(g(x, &mut buf));
        }
        if let Some(b) = &self.bounds {
            for (xi, &(lo, hi)) in x.iter().zip(b) {
                v = v.max(lo - xi).max(xi - hi);
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub objective_value: f64,
    /// `max(‖∇ₓL‖∞, complementarity)` with the final multiplier estimates.
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    /// Accepted inner (quasi-Newton) steps over all outer iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    pub status: SolveStatus,
    pub equality_multipliers: Vec<f64>,
    pub inequality_multipliers: Vec<f64>,
    /// Merit value after every accepted step, tagged with its outer iteration.
    pub merit_trace: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InnerOutcome {
    Converged,
    Budget,
    LineSearchFailure,
}

struct Multipliers {
    eq: Vec<f64>,
    ineq: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rho: f64,
}

struct Merit<'p, 'a> {
    problem: &'p NlpProblem<'a>,
    buf: Vec<(usize, f64)>,
}

impl Merit<'_, '_> {
    /// Augmented Lagrangian value and gradient.
    fn eval(&mut self, x: &[f64], m: &Multipliers, grad: &mut [f64]) -> Result<f64, OptimizeError> {
        let p = self.problem;
        let f = p.objective(x, grad);
        if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(OptimizeError::NonFiniteObjective);
        }
        let rho = m.rho;
        let mut value = f;
        for (h, &lam) in p.equalities.iter().zip(&m.eq) {
            self.buf.clear();
            let c = h(x, &mut self.buf);
            value += lam * c + 0.5 * rho * c * c;
            let coef = lam + rho * c;
            for &(i, v) in &self.buf {
                grad[i] += coef * v;
            }
        }
        for (g, &mu) in p.inequalities.iter().zip(&m.ineq) {
            self.buf.clear();
            let c = g(x, &mut self.buf);
            let shifted = mu + rho * c;
            if shifted > 0.0 {
                value += (shifted * shifted - mu * mu) / (2.0 * rho);
                for &(i, v) in &self.buf {
                    grad[i] += shifted * v;
                }
            } else {
                value -= mu * mu / (2.0 * rho);
            }
        }
        if let Some(bounds) = &p.bounds {
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                for (c, mu, sign) in [(lo - x[i], m.lower[i], -1.0), (x[i] - hi, m.upper[i], 1.0)] {
                    if !c.is_finite() {
                        continue;
                    }
                    let shifted = mu + rho * c;
                    if shifted > 0.0 {
                        value += (shifted * shifted - mu * mu) / (2.0 * rho);
                        grad[i] += sign * shifted;
                    } else {
                        value -= mu * mu / (2.0 * rho);
                    }
                }
            }
        }
        if !value.is_finite() {
            return Err(OptimizeError::NonFiniteObjective);
        }
        Ok(value)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS on the merit function with fixed multipliers.
fn inner_minimize(
    merit: &mut Merit<'_, '_>,
    mult: &Multipliers,
    x: &mut Vec<f64>,
    tol: f64,
    budget: usize,
    outer: usize,
    trace: &mut Vec<(usize, f64)>,
) -> Result<(InnerOutcome, usize), OptimizeError> {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut phi = merit.eval(x, mult, &mut g)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut alphas = vec![0.0; LBFGS_MEMORY];
    let mut steps = 0;

    loop {
        if inf_norm(&g) < tol {
            return Ok((InnerOutcome::Converged, steps));
        }
        if steps >= budget {
            return Ok((InnerOutcome::Budget, steps));
        }

        // two-loop recursion
        d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
        for (slot, (s, y, rho)) in memory.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alphas[slot] = a;
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        } else {
            let scale = 1.0 / inf_norm(&g).max(1.0);
            d.iter_mut().for_each(|di| *di *= scale);
        }
        for (slot, (s, y, rho)) in memory.iter().enumerate() {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (alphas[slot] - b) * si);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            memory.clear();
            let scale = 1.0 / inf_norm(&g).max(1.0);
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi * scale);
            slope = dot(&g, &d);
        }

        let g_norm = inf_norm(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            trial.iter_mut().zip(x.iter().zip(&d)).for_each(|(t, (xi, di))| *t = xi + step * di);
            let phi_t = match merit.eval(&trial, mult, &mut g_trial) {
                Ok(v) => v,
                Err(_) => {
                    step *= 0.5;
                    continue;
                }
            };
            let armijo = phi_t <= phi + ARMIJO_C1 * step * slope;
            // At the roundoff floor of φ, accept steps that shrink the gradient.
            let flat = (phi - phi_t).abs() <= ROUNDOFF * (1.0 + phi.abs())
                && inf_norm(&g_trial) < g_norm;
            if armijo || flat {
                accepted = Some(phi_t);
                break;
            }
            step *= 0.5;
        }

        let Some(phi_t) = accepted else {
            if memory.is_empty() {
                return Ok((InnerOutcome::LineSearchFailure, steps));
            }
            memory.clear();
            continue;
        };

        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        } else {
            // non-positive curvature: restart from steepest descent
            memory.clear();
        }
        std::mem::swap(x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        phi = phi_t;
        steps += 1;
        trace.push((outer, phi));
    }
}

/// Minimizes `problem` from `x0` until the Lagrangian gradient, the
/// complementarity gap and the constraint violation all fall below `tol`,
/// or until `max_iter` quasi-Newton steps have been taken.
pub fn minimize(problem: &NlpProblem<'_>, x0: &[f64], tol: f64, max_iter: usize) -> Result<SolveReport, OptimizeError> {
    minimize_with(problem, x0, &SolveOptions { tol, feasibility_tol: tol, max_iter })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Bound on `‖∇ₓL‖∞` and on complementarity.
    pub tol: f64,
    /// Bound on the largest constraint violation.
    pub feasibility_tol: f64,
    pub max_iter: usize,
}

/// [`minimize`] with independent stationarity and feasibility tolerances.
pub fn minimize_with(problem: &NlpProblem<'_>, x0: &[f64], options: &SolveOptions) -> Result<SolveReport, OptimizeError> {
    let SolveOptions { tol, feasibility_tol, max_iter } = *options;
    if x0.len() != problem.dimension {
        return Err(OptimizeError::DimensionMismatch { expected: problem.dimension, got: x0.len() });
    }
    let n = problem.dimension;
    let mut mult = Multipliers {
        eq: vec![0.0; problem.equalities.len()],
        ineq: vec![0.0; problem.inequalities.len()],
        lower: vec![0.0; if problem.bounds.is_some() { n } else { 0 }],
        upper: vec![0.0; if problem.bounds.is_some() { n } else { 0 }],
        rho: INITIAL_PENALTY,
    };
    let mut merit = Merit { problem, buf: Vec::new() };
    let mut x = x0.to_vec();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut inner_tol = (0.1_f64).max(tol);
    let mut prev_violation = f64::INFINITY;
    let mut status = SolveStatus::IterationLimit;
    let mut kkt = f64::INFINITY;
    let mut violation = problem.violation(&x);
    let mut outer = 0;
    let mut failures_at_cap = 0;
    let mut grad = vec![0.0; n];

    while outer < MAX_OUTER {
        let (outcome, steps) =
            inner_minimize(&mut merit, &mult, &mut x, inner_tol, max_iter.saturating_sub(iterations), outer, &mut trace)?;
        iterations += steps;
        outer += 1;

        // ∇L with the updated multipliers equals ∇φ with the current ones.
        merit.eval(&x, &mult, &mut grad)?;
        let stationarity = inf_norm(&grad);

        let mut buf = Vec::new();
        let mut viol = 0.0_f64;
        let mut comp = 0.0_f64;
        for (h, lam) in problem.equalities.iter().zip(mult.eq.iter_mut()) {
            buf.clear();
            let c = h(&x, &mut buf);
            viol = viol.max(c.abs());
            *lam += mult.rho * c;
        }
        for (g, mu) in problem.inequalities.iter().zip(mult.ineq.iter_mut()) {
            buf.clear();
            let c = g(&x, &mut buf);
            viol = viol.max(c);
            *mu = (*mu + mult.rho * c).max(0.0);
            comp = comp.max((*mu).min(-c).max(0.0));
        }
        if let Some(bounds) = &problem.bounds {
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                for (c, mu) in [(lo - x[i], &mut mult.lower[i]), (x[i] - hi, &mut mult.upper[i])] {
                    if c.is_finite() {
                        viol = viol.max(c);
                        *mu = (*mu + mult.rho * c).max(0.0);
                        comp = comp.max((*mu).min(-c).max(0.0));
                    }
                }
            }
        }
        kkt = stationarity.max(comp);
        violation = viol;

        if stationarity < tol && comp < tol && viol < feasibility_tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= max_iter {
            status = SolveStatus::IterationLimit;
            break;
        }
        let failed = outcome == InnerOutcome::LineSearchFailure;
        if (viol > feasibility_tol && viol > 0.25 * prev_violation) || failed {
            if mult.rho >= MAX_PENALTY {
                if failed {
                    failures_at_cap += 1;
                    if failures_at_cap >= 3 {
                        status = SolveStatus::LineSearchFailure;
                        break;
                    }
                }
            } else {
                mult.rho = (mult.rho * PENALTY_GROWTH).min(MAX_PENALTY);
            }
        }
        prev_violation = viol;
        if outcome != InnerOutcome::LineSearchFailure {
            inner_tol = (inner_tol * 0.1).max(0.1 * tol);
        }
    }

    let objective_value = problem.objective(&x, &mut grad);
    let mut inequality_multipliers = mult.ineq;
    inequality_multipliers.extend(mult.lower);
    inequality_multipliers.extend(mult.upper);
    Ok(SolveReport {
        solution: x,
        objective_value,
        kkt_residual: kkt,
        constraint_violation: violation,
        iterations,
        outer_iterations: outer,
        status,
        equality_multipliers: mult.eq,
        inequality_multipliers,
        merit_trace: trace,
    })
}

/// Largest coordinate error between the analytical objective gradient and a
/// central difference with step `h`, relative to the finite-difference
/// gradient's largest component.
pub fn check_gradient(problem: &NlpProblem<'_>, x: &[f64], h: f64) -> f64 {
    let n = problem.dimension;
    let mut analytic = vec![0.0; n];
    problem.objective(x, &mut analytic);
    let fd = central_difference(|p| problem.objective(p, &mut vec![0.0; n]), x, h);
    relative_gradient_error(&analytic, &fd)
}

/// Central-difference gradient of a scalar function.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i − r_i| / max(‖r‖∞, 1e-12)`.
pub fn relative_gradient_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = inf_norm(reference).max(1e-12);
    analytic.iter().zip(reference).map(|(a, r)| (a - r).abs()).fold(0.0, f64::max) / scale
}

/// Stationarity residual `‖g + Aλ‖∞` at the non-negative least-squares
/// multipliers `λ = argmin_{λ ≥ 0} ‖g + Aλ‖₂`. Columns of `A` are sparse;
/// a free multiplier is expressed as a `±` column pair.
pub fn kkt_residual(g: &DVector<f64>, columns: &[Vec<(usize, f64)>]) -> f64 {
    if columns.is_empty() {
        return g.amax();
    }
    let mut a = DMatrix::zeros(g.len(), columns.len());
    for (j, col) in columns.iter().enumerate() {
        for &(i, v) in col {
            a[(i, j)] += v;
        }
    }
    let lambda = nnls(&a, &(-g));
    (g + &a * lambda).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_bowl() {
        let p = NlpProblem::new(2, |x, g| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 2.0 * (x[1] - 4.0);
            (x[0] - 3.0).powi(2) + (x[1] - 4.0).powi(2)
        });
        let r = minimize(&p, &[0.0, 0.0], 1e-9, 500).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_abs_diff_eq!(r.solution[0], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.solution[1], 4.0, epsilon = 1e-8);
        assert!(r.kkt_residual < 1e-9);
    }

    #[test]
    fn linear_equality() {
        let p = NlpProblem::new(2, |x, g| {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
            x[0] * x[0] + x[1] * x[1]
        })
        .equality(|x, g| {
            g.push((0, 1.0));
            g.push((1, 1.0));
            x[0] + x[1] - 1.0
        });
        let r = minimize(&p, &[0.0, 0.0], 1e-9, 2000).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_abs_diff_eq!(r.solution[0], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(r.solution[1], 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(r.equality_multipliers[0], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn disk_tangency() {
        let p = NlpProblem::new(2, |x, g| {
            g[0] = -1.0;
            g[1] = -1.0;
            -(x[0] + x[1])
        })
        .inequality(|x, g| {
            g.push((0, 2.0 * x[0]));
            g.push((1, 2.0 * x[1]));
            x[0] * x[0] + x[1] * x[1] - 1.0
        });
        let r = minimize(&p, &[0.0, 0.0], 1e-10, 5000).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(r.solution[0], s, epsilon = 1e-6);
        assert_abs_diff_eq!(r.solution[1], s, epsilon = 1e-6);
    }

    #[test]
    fn box_bounds() {
        let p = NlpProblem::new(2, |x, g| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 2.0 * (x[1] + 1.0);
            (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)
        })
        .bounds(vec![(0.0, 1.0), (0.0, f64::INFINITY)]);
        let r = minimize(&p, &[0.5, 0.5], 1e-9, 2000).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert_abs_diff_eq!(r.solution[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r.solution[1], 0.0, epsilon = 1e-7);
    }

    #[test]
    fn dimension_mismatch() {
        let p = NlpProblem::new(3, |_, _| 0.0);
        assert_eq!(
            minimize(&p, &[0.0], 1e-6, 10).unwrap_err(),
            OptimizeError::DimensionMismatch { expected: 3, got: 1 }
        );
    }

    #[test]
    fn non_finite_objective() {
        let p = NlpProblem::new(1, |x, g| {
            g[0] = 1.0;
            x[0].ln()
        });
        assert_eq!(minimize(&p, &[-1.0], 1e-6, 10).unwrap_err(), OptimizeError::NonFiniteObjective);
    }

    #[test]
    fn merit_non_increasing_within_outer_iterations() {
        let p = NlpProblem::new(2, |x, g| {
            g[0] = 4.0 * x[0].powi(3) - 2.0 * x[1];
            g[1] = 2.0 * x[1] - 2.0 * x[0];
            x[0].powi(4) + x[1] * x[1] - 2.0 * x[0] * x[1]
        })
        .inequality(|x, g| {
            g.push((0, -1.0));
            0.5 - x[0]
        });
        let r = minimize(&p, &[3.0, -2.0], 1e-8, 2000).unwrap();
        for w in r.merit_trace.windows(2) {
            if w[0].0 == w[1].0 {
                assert!(w[1].1 <= w[0].1 + ROUNDOFF * (1.0 + w[0].1.abs()), "merit rose from {} to {}", w[0].1, w[1].1);
            }
        }
    }

    #[test]
    fn gradient_checker() {
        let good = NlpProblem::new(2, |x, g| {
            g[0] = 2.0 * x[0] + x[1];
            g[1] = x[0] + 6.0 * x[1];
            x[0] * x[0] + x[0] * x[1] + 3.0 * x[1] * x[1]
        });
        assert!(check_gradient(&good, &[1.3, -0.7], 1e-6) < 1e-9);
        let bad = NlpProblem::new(2, |x, g| {
            g[0] = 2.0 * 2.0 * x[0];
            g[1] = 2.0 * 2.0 * x[1];
            x[0] * x[0] + x[1] * x[1]
        });
        let e = check_gradient(&bad, &[1.0, 2.0], 1e-6);
        assert!((e - 1.0).abs() < 1e-6, "planted 2x fault gave {e}");
    }

    fn random_equality_qp(seed: u64) -> (nalgebra::DMatrix<f64>, nalgebra::DVector<f64>, nalgebra::DVector<f64>, f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = &m * m.transpose() + nalgebra::DMatrix::identity(n, n) * 0.5;
        let c = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let a = nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        (q, c, a, rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn random_equality_qps_match_kkt_solve() {
        for seed in 0..10 {
            let (q, c, a, b) = random_equality_qp(seed);
            let n = c.len();
            // [Q a; aᵀ 0] [x; λ] = [-c; b]
            let mut kkt = nalgebra::DMatrix::zeros(n + 1, n + 1);
            kkt.view_mut((0, 0), (n, n)).copy_from(&q);
            kkt.view_mut((0, n), (n, 1)).copy_from(&a);
            kkt.view_mut((n, 0), (1, n)).copy_from(&a.transpose());
            let mut rhs = nalgebra::DVector::zeros(n + 1);
            rhs.rows_mut(0, n).copy_from(&(-&c));
            rhs[n] = b;
            let exact = kkt.lu().solve(&rhs).unwrap();

            let (qr, cr, ar) = (&q, &c, &a);
            let p = NlpProblem::new(n, move |x, g| {
                let xv = nalgebra::DVector::from_column_slice(x);
                let grad = qr * &xv + cr;
                g.copy_from_slice(grad.as_slice());
                0.5 * xv.dot(&(qr * &xv)) + cr.dot(&xv)
            })
            .equality(move |x, g| {
                g.extend(ar.iter().copied().enumerate());
                ar.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() - b
            });
            let r = minimize(&p, &vec![0.0; n], 1e-10, 5000).unwrap();
            assert_eq!(r.status, SolveStatus::Converged, "seed {seed}");
            for i in 0..n {
                assert_abs_diff_eq!(r.solution[i], exact[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn bitwise_deterministic() {
        let build = || {
            NlpProblem::new(2, |x, g| {
                g[0] = -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]);
                g[1] = 200.0 * (x[1] - x[0] * x[0]);
                100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
            })
            .inequality(|x, g| {
                g.push((0, 2.0 * x[0]));
                g.push((1, 2.0 * x[1]));
                x[0] * x[0] + x[1] * x[1] - 1.5
            })
        };
        let a = minimize(&build(), &[-1.2, 1.0], 1e-8, 3000).unwrap();
        let b = minimize(&build(), &[-1.2, 1.0], 1e-8, 3000).unwrap();
        assert_eq!(a.solution[0].to_bits(), b.solution[0].to_bits());
        assert_eq!(a.solution[1].to_bits(), b.solution[1].to_bits());
        assert_eq!(a.iterations, b.iterations);
    }
}
