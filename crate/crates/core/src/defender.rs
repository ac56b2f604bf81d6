//! Defender best response: sensors slide along their buildings' boundaries.
//!
//! Each sensor `j` is held on the smoothed boundary `R(x_j) = 0` of its
//! assigned building and inside its half-spaces `A x_j ≤ b`. The payoff
//! `J = −Σₖ Σⱼ ln(1 − Kⱼ)` is a sum of per-sensor terms, so the joint problem
//! separates into one two-dimensional problem per sensor; those are solved
//! independently and their reports merged.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{ConvexPolygon, Vec2};
use crate::optimizer::{kkt_residual, minimize_with, NlpProblem, OptimizeError, SolveOptions, SolveReport, SolveStatus};
use crate::sensing::{payoff_and_gradients, Sensor, SensingError, SensorPlacement, Trajectory};

pub const DEFAULT_EPSILON: f64 = 0.05;
/// Largest admissible `|R(x)|` on a returned placement.
pub const EQUALITY_TOL: f64 = 1e-6;
/// Perimeter points scanned for a better starting point before each local solve.
pub const DEFAULT_SCAN_POINTS: usize = 128;
const ACTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DefenderError {
    #[error("sensor {sensor} is assigned to building {building}, but only {count} exist")]
    UnknownBuilding { sensor: usize, building: usize, count: usize },
    #[error("smoothing parameter must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("placement has {got} positions for {expected} sensors")]
    PlacementMismatch { expected: usize, got: usize },
    #[error("sensor {index}: {source}")]
    Sensor { index: usize, source: SensingError },
    #[error(transparent)]
    Solver(#[from] OptimizeError),
}

/// Sensors, their buildings and the smoothing parameter `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenderSpec {
    pub sensors: Vec<Sensor>,
    pub buildings: Vec<ConvexPolygon>,
    pub epsilon: f64,
    /// Perimeter samples checked for a better start than the warm start (0 disables the scan).
    pub scan_points: usize,
}

impl DefenderSpec {
    pub fn new(sensors: Vec<Sensor>, buildings: Vec<ConvexPolygon>, epsilon: f64) -> Self {
        Self { sensors, buildings, epsilon, scan_points: DEFAULT_SCAN_POINTS }
    }

    pub fn validate(&self) -> Result<(), DefenderError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(DefenderError::InvalidEpsilon(self.epsilon));
        }
        for (index, s) in self.sensors.iter().enumerate() {
            if s.building >= self.buildings.len() {
                return Err(DefenderError::UnknownBuilding {
                    sensor: index,
                    building: s.building,
                    count: self.buildings.len(),
                });
            }
            s.validate().map_err(|source| DefenderError::Sensor { index, source })?;
        }
        Ok(())
    }

    fn building(&self, j: usize) -> &ConvexPolygon {
        &self.buildings[self.sensors[j].building]
    }
}

/// Moves `p` onto the level set `R = 0` by Newton steps along `∇R`.
pub fn restore_to_boundary(building: &ConvexPolygon, p: &Vec2, eps: f64) -> Vec2 {
    let mut x = *p;
    for _ in 0..50 {
        let r = building.lse_residual(&x, eps);
        if r.abs() <= 1e-13 {
            break;
        }
        let g = building.lse_gradient(&x, eps);
        x -= g * (r / g.norm_squared());
    }
    x
}

/// One sensor per assigned building at a uniformly drawn arc-length coordinate.
pub fn sample_initial_placement(spec: &DefenderSpec, seed: u64) -> SensorPlacement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = spec
        .sensors
        .iter()
        .map(|s| spec.buildings[s.building].perimeter_point(rng.gen_range(0.0..1.0)))
        .collect();
    SensorPlacement::new(positions)
}

/// [`sample_initial_placement`] followed by [`restore_to_boundary`], so that
/// `|R(x_j)|` is at roundoff level.
pub fn sample_feasible_placement(spec: &DefenderSpec, seed: u64) -> SensorPlacement {
    let raw = sample_initial_placement(spec, seed);
    let positions = raw
        .positions
        .iter()
        .enumerate()
        .map(|(j, p)| restore_to_boundary(spec.building(j), p, spec.epsilon))
        .collect();
    SensorPlacement::new(positions)
}

/// `J_j = −Σₖ ln(1 − Kⱼ(x, z_k, t_k))` and its gradient in `x`.
fn sensor_payoff(traj: &Trajectory, sensor: &Sensor, x: Vec2) -> (f64, Vec2) {
    let pg = payoff_and_gradients(traj, &SensorPlacement::new(vec![x]), std::slice::from_ref(sensor));
    (pg.value, pg.sensors[0])
}

/// Worst equality or half-space violation of one position.
fn position_violation(building: &ConvexPolygon, p: &Vec2, eps: f64) -> f64 {
    building.lse_residual(p, eps).abs().max(building.signed_distance(p))
}

/// Largest constraint violation of a placement for the defender NLP.
pub fn placement_violation(spec: &DefenderSpec, placement: &SensorPlacement) -> f64 {
    placement
        .positions
        .iter()
        .enumerate()
        .map(|(j, p)| position_violation(spec.building(j), p, spec.epsilon))
        .fold(0.0, f64::max)
}

fn sensor_problem<'a>(traj: &'a Trajectory, sensor: &'a Sensor, building: &'a ConvexPolygon, eps: f64) -> NlpProblem<'a> {
    let mut p = NlpProblem::new(2, move |x, g| {
        let (j, grad) = sensor_payoff(traj, sensor, Vec2::new(x[0], x[1]));
        g[0] = -grad.x;
        g[1] = -grad.y;
        -j
    })
    .equality(move |x, g| {
        let z = Vec2::new(x[0], x[1]);
        let grad = building.lse_gradient(&z, eps);
        g.extend([(0, grad.x), (1, grad.y)]);
        building.lse_residual(&z, eps)
    });
    for h in building.halfspaces() {
        p.add_inequality(move |x, g| {
            g.extend([(0, h.normal.x), (1, h.normal.y)]);
            h.eval(&Vec2::new(x[0], x[1]))
        });
    }
    p
}

/// Maximizes the log-survival payoff over sensor positions, starting from `init`.
///
/// The result never has a lower payoff than `init` after `init` has been
/// restored onto `R = 0` (positions already within [`EQUALITY_TOL`] are kept as is).
pub fn defender_best_response(
    spec: &DefenderSpec,
    traj: &Trajectory,
    init: &SensorPlacement,
    tol: f64,
) -> Result<(SensorPlacement, SolveReport), DefenderError> {
    spec.validate()?;
    if init.len() != spec.sensors.len() {
        return Err(DefenderError::PlacementMismatch { expected: spec.sensors.len(), got: init.len() });
    }
    let eps = spec.epsilon;
    let options = SolveOptions { tol, feasibility_tol: 1e-10, max_iter: 500 };
    let mut positions = Vec::with_capacity(init.len());
    let mut merged = SolveReport {
        solution: Vec::with_capacity(2 * init.len()),
        objective_value: 0.0,
        kkt_residual: 0.0,
        constraint_violation: 0.0,
        iterations: 0,
        outer_iterations: 0,
        status: SolveStatus::Converged,
        equality_multipliers: Vec::new(),
        inequality_multipliers: Vec::new(),
        merit_trace: Vec::new(),
    };

    for (j, (sensor, p0)) in spec.sensors.iter().zip(&init.positions).enumerate() {
        let building = spec.building(j);
        let start = if position_violation(building, p0, eps) > EQUALITY_TOL {
            restore_to_boundary(building, p0, eps)
        } else {
            *p0
        };
        let j_start = sensor_payoff(traj, sensor, start).0;

        let mut seed = (j_start, start);
        for i in 0..spec.scan_points {
            let q = restore_to_boundary(building, &building.perimeter_point(i as f64 / spec.scan_points as f64), eps);
            let v = sensor_payoff(traj, sensor, q).0;
            if v > seed.0 {
                seed = (v, q);
            }
        }

        let problem = sensor_problem(traj, sensor, building, eps);
        let report = minimize_with(&problem, &[seed.1.x, seed.1.y], &options)?;
        let solved = restore_to_boundary(building, &Vec2::new(report.solution[0], report.solution[1]), eps);
        let j_solved = sensor_payoff(traj, sensor, solved).0;
        let chosen = if position_violation(building, &solved, eps) <= EQUALITY_TOL && j_solved >= seed.0 {
            solved
        } else {
            seed.1
        };
        let chosen = if sensor_payoff(traj, sensor, chosen).0 >= j_start { chosen } else { start };

        positions.push(chosen);
        merged.solution.extend([chosen.x, chosen.y]);
        merged.objective_value -= sensor_payoff(traj, sensor, chosen).0;
        merged.kkt_residual = merged.kkt_residual.max(report.kkt_residual);
        merged.constraint_violation = merged.constraint_violation.max(position_violation(building, &chosen, eps));
        merged.iterations += report.iterations;
        merged.outer_iterations = merged.outer_iterations.max(report.outer_iterations);
        if report.status != SolveStatus::Converged {
            merged.status = report.status;
        }
        merged.equality_multipliers.extend(report.equality_multipliers);
        merged.inequality_multipliers.extend(report.inequality_multipliers);
        merged.merit_trace.extend(report.merit_trace.into_iter().map(|(o, m)| (o + 1000 * j, m)));
    }
    Ok((SensorPlacement::new(positions), merged))
}

/// KKT residual of the defender NLP at `placement`: per sensor, the smallest
/// `‖−∇ⱼJ + μ ∇R + Σ λₖ aₖ‖∞` with free `μ` and `λ ≥ 0` on active faces.
pub fn defender_residual(spec: &DefenderSpec, traj: &Trajectory, placement: &SensorPlacement) -> f64 {
    let mut worst = 0.0_f64;
    for (j, (sensor, x)) in spec.sensors.iter().zip(&placement.positions).enumerate() {
        let building = spec.building(j);
        let grad = -sensor_payoff(traj, sensor, *x).1;
        let g = DVector::from_vec(vec![grad.x, grad.y]);
        let n = building.lse_gradient(x, spec.epsilon);
        let mut columns = vec![vec![(0, n.x), (1, n.y)], vec![(0, -n.x), (1, -n.y)]];
        for h in building.halfspaces() {
            if h.eval(x) >= -ACTIVE_TOL {
                columns.push(vec![(0, h.normal.x), (1, h.normal.y)]);
            }
        }
        worst = worst.max(kkt_residual(&g, &columns));
    }
    worst
}
