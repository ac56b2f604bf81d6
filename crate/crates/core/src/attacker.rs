//! Attacker best response.
//!
//! A space-time RRT* tree over `(x, y, t)` supplies a feasible, detection-aware
//! initial trajectory; [`attacker_best_response`] then refines the interior
//! waypoints with the constrained solver.
//!
//! Tree nodes live on the trajectory's time grid `t = k·Δt`, so every edge
//! spans a whole number of steps and the resampled trajectory's chords lie on
//! tree edges. This keeps the returned waypoints inside the clearance and
//! speed guarantees that the tree checked.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Arena, Vec2};
use crate::optimizer::{kkt_residual, minimize_with, NlpProblem, OptimizeError, SolveOptions, SolveReport};
use crate::sensing::{log_survival_payoff, payoff_and_gradients, step_cost, Sensor, SensorPlacement, Trajectory};

/// Probability of sampling the goal itself.
pub const GOAL_BIAS: f64 = 0.05;
/// Trajectories ending within this distance of the goal may be completed with a final edge.
pub const GOAL_RADIUS: f64 = 1.0;
/// Tolerance used when checking a trajectory against the NLP constraints.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Constraints within this distance of their bound count as active in the stationarity test.
pub const ACTIVE_TOL: f64 = 5e-5;
/// The NLP tightens every constraint by this much so that a solve stopped
/// slightly outside its own feasible set still lands inside the true one.
const MARGIN: f64 = 2e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackerError {
    #[error("no tree path reached the goal within the iteration budget")]
    NoPathFound,
    #[error("attacker specification is infeasible: {0}")]
    InfeasibleSpec(String),
    #[error("initial trajectory violates the constraints by {violation:e}")]
    InfeasibleInit { violation: f64 },
    #[error(transparent)]
    Solver(#[from] OptimizeError),
}

/// Mission description: `z_init`, `z_goal`, `v_max`, horizon `T_a` and step count `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackerSpec {
    pub start: Vec2,
    pub goal: Vec2,
    pub v_max: f64,
    pub t_a: f64,
    pub n_steps: usize,
}

impl AttackerSpec {
    pub fn dt(&self) -> f64 {
        self.t_a / self.n_steps as f64
    }

    /// Largest distance coverable in one step.
    pub fn step_length(&self) -> f64 {
        self.v_max * self.dt()
    }

    pub fn validate(&self) -> Result<(), AttackerError> {
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return Err(AttackerError::InfeasibleSpec(format!("v_max must be positive, got {}", self.v_max)));
        }
        if !(self.t_a.is_finite() && self.t_a > 0.0) {
            return Err(AttackerError::InfeasibleSpec(format!("t_a must be positive, got {}", self.t_a)));
        }
        if self.n_steps < 2 {
            return Err(AttackerError::InfeasibleSpec(format!("n_steps must be at least 2, got {}", self.n_steps)));
        }
        let need = (self.goal - self.start).norm() / self.v_max;
        if need > self.t_a * (1.0 + 1e-12) {
            return Err(AttackerError::InfeasibleSpec(format!(
                "goal needs {need:.6} s at v_max but the horizon is {} s",
                self.t_a
            )));
        }
        Ok(())
    }

    /// Constant-speed straight line from start to goal.
    pub fn straight_line(&self) -> Trajectory {
        Trajectory::straight(self.start, self.goal, self.t_a, self.n_steps)
    }
}

/// A tree vertex. `step` indexes the time grid, so `time = step · Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeNode {
    pub position: Vec2,
    pub step: usize,
    pub time: f64,
    pub parent: Option<usize>,
    /// Accumulated log-survival cost along the tree path.
    pub cost: f64,
    children: Vec<usize>,
}

/// Largest constraint violation of `traj` for the attacker NLP: endpoints,
/// per-step speed (in distance units), clearance and map bounds.
pub fn trajectory_violation(spec: &AttackerSpec, traj: &Trajectory, arena: &Arena, clearance: f64) -> f64 {
    let w = &traj.waypoints;
    if w.len() != spec.n_steps + 1 {
        return f64::INFINITY;
    }
    let step = spec.step_length();
    let mut v = (w[0] - spec.start).norm().max((w[spec.n_steps] - spec.goal).norm());
    for pair in w.windows(2) {
        v = v.max((pair[1] - pair[0]).norm() - step);
    }
    for z in &w[1..spec.n_steps] {
        v = v.max(clearance - arena.obstacle_distance(z));
        v = v.max(-z.x).max(-z.y).max(z.x - arena.width).max(z.y - arena.height);
    }
    v
}

struct Planner<'a> {
    spec: &'a AttackerSpec,
    placement: &'a SensorPlacement,
    sensors: &'a [Sensor],
    arena: &'a Arena,
    clearance: f64,
    dt: f64,
    step_len: f64,
}

impl Planner<'_> {
    fn edge_feasible(&self, a: &Vec2, ka: usize, b: &Vec2, kb: usize) -> bool {
        kb > ka
            && (b - a).norm() <= self.step_len * (kb - ka) as f64 * (1.0 + 1e-12)
            && self.arena.in_bounds(b)
            && self.arena.segment_clear(a, b, self.clearance)
    }

    fn goal_reachable(&self, p: &Vec2, k: usize) -> bool {
        (self.spec.goal - p).norm() <= self.step_len * (self.spec.n_steps - k) as f64 + 1e-9
    }

    /// Trapezoidal integral of the step cost along a straight edge, in units of steps.
    fn edge_cost(&self, a: &Vec2, ka: usize, b: &Vec2, kb: usize) -> f64 {
        let span = kb - ka;
        let subs = 4 * span;
        let t0 = ka as f64 * self.dt;
        let mut total = 0.0;
        for i in 0..=subs {
            let u = i as f64 / subs as f64;
            let z = a + (b - a) * u;
            let c = step_cost(self.placement, self.sensors, &z, t0 + u * span as f64 * self.dt);
            total += if i == 0 || i == subs { 0.5 * c } else { c };
        }
        total * span as f64 / subs as f64
    }

    fn metric(&self, a: &Vec2, ka: usize, b: &Vec2, kb: usize) -> f64 {
        let dt = self.step_len * (kb as f64 - ka as f64);
        ((b - a).norm_squared() + dt * dt).sqrt()
    }

    fn resample(&self, path: &[(Vec2, usize)]) -> Trajectory {
        let n = self.spec.n_steps;
        let mut waypoints = Vec::with_capacity(n + 1);
        let mut e = 0;
        for k in 0..=n {
            while e + 1 < path.len() - 1 && path[e + 1].1 <= k {
                e += 1;
            }
            let (a, ka) = path[e];
            let (b, kb) = path[e + 1];
            let u = ((k as f64 - ka as f64) / (kb - ka) as f64).clamp(0.0, 1.0);
            waypoints.push(a + (b - a) * u);
        }
        waypoints[0] = self.spec.start;
        waypoints[n] = self.spec.goal;
        Trajectory::new(waypoints, self.spec.t_a)
    }
}

fn propagate(nodes: &mut [SpaceTimeNode], root: usize, delta: f64) {
    let mut stack = nodes[root].children.clone();
    while let Some(i) = stack.pop() {
        nodes[i].cost += delta;
        stack.extend_from_slice(&nodes[i].children);
    }
}

/// Space-time RRT* from `spec.start` at `t = 0` to `spec.goal` at `t = T_a`.
///
/// Returns the minimum-payoff trajectory among the best tree paths reaching
/// the goal region and the straight line (when the latter is collision-free).
/// The straight line wins ties, so an empty map yields it exactly.
pub fn stp_rrt_star(
    spec: &AttackerSpec,
    placement: &SensorPlacement,
    sensors: &[Sensor],
    arena: &Arena,
    clearance: f64,
    seed: u64,
    iterations: usize,
) -> Result<Trajectory, AttackerError> {
    spec.validate()?;
    for (name, p) in [("start", spec.start), ("goal", spec.goal)] {
        if !arena.in_bounds(&p) {
            return Err(AttackerError::InfeasibleSpec(format!("{name} lies outside the map")));
        }
        if arena.obstacle_distance(&p) < clearance {
            return Err(AttackerError::InfeasibleSpec(format!("{name} is closer than {clearance} to a building")));
        }
    }
    let planner = Planner {
        spec,
        placement,
        sensors,
        arena,
        clearance,
        dt: spec.dt(),
        step_len: spec.step_length(),
    };
    let n = spec.n_steps;
    let max_span = (n / 8).max(2);
    let gamma = 1.5 * (arena.width * arena.height * spec.v_max * spec.t_a).cbrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![SpaceTimeNode {
        position: spec.start,
        step: 0,
        time: 0.0,
        parent: None,
        cost: 0.0,
        children: Vec::new(),
    }];

    for _ in 0..iterations {
        let (sample, ks) = if rng.gen::<f64>() < GOAL_BIAS {
            (spec.goal, n)
        } else {
            let p = Vec2::new(rng.gen_range(0.0..=arena.width), rng.gen_range(0.0..=arena.height));
            (p, rng.gen_range(1..=n))
        };

        let Some(near) = nodes
            .iter()
            .enumerate()
            .filter(|(_, nd)| nd.step < ks)
            .map(|(i, nd)| (i, planner.metric(&nd.position, nd.step, &sample, ks)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
        else {
            continue;
        };

        let from = nodes[near].position;
        let k_new = ks.min(nodes[near].step + max_span);
        let reach = planner.step_len * (k_new - nodes[near].step) as f64;
        let dir = sample - from;
        let len = dir.norm();
        let mut p = if len > reach { from + dir * (reach / len) } else { sample };
        if !planner.goal_reachable(&p, k_new) {
            let r = planner.step_len * (n - k_new) as f64;
            let off = p - spec.goal;
            p = spec.goal + off * (r / off.norm());
            if (p - from).norm() > reach * (1.0 + 1e-12) {
                continue;
            }
        }
        if k_new == n && (p - spec.goal).norm() > 1e-9 {
            continue;
        }
        if !planner.edge_feasible(&from, nodes[near].step, &p, k_new) {
            continue;
        }

        let count = nodes.len() as f64;
        let radius = gamma * ((count + 1.0).ln() / (count + 1.0)).cbrt();
        let mut best_parent = near;
        let mut best_cost = nodes[near].cost + planner.edge_cost(&from, nodes[near].step, &p, k_new);
        let mut neighbours = Vec::new();
        for (i, nd) in nodes.iter().enumerate() {
            if planner.metric(&nd.position, nd.step, &p, k_new) <= radius {
                neighbours.push(i);
            }
        }
        for &i in &neighbours {
            let nd = &nodes[i];
            if i == near || nd.step >= k_new || k_new - nd.step > 2 * max_span {
                continue;
            }
            if !planner.edge_feasible(&nd.position, nd.step, &p, k_new) {
                continue;
            }
            let c = nd.cost + planner.edge_cost(&nd.position, nd.step, &p, k_new);
            if c < best_cost {
                best_cost = c;
                best_parent = i;
            }
        }

        let id = nodes.len();
        nodes.push(SpaceTimeNode {
            position: p,
            step: k_new,
            time: k_new as f64 * planner.dt,
            parent: Some(best_parent),
            cost: best_cost,
            children: Vec::new(),
        });
        nodes[best_parent].children.push(id);

        for &i in &neighbours {
            let (pos, step) = (nodes[i].position, nodes[i].step);
            if step <= k_new || step - k_new > 2 * max_span {
                continue;
            }
            if !planner.edge_feasible(&p, k_new, &pos, step) {
                continue;
            }
            let c = best_cost + planner.edge_cost(&p, k_new, &pos, step);
            if c < nodes[i].cost {
                let old_parent = nodes[i].parent.expect("only the root lacks a parent");
                nodes[old_parent].children.retain(|&ch| ch != i);
                nodes[id].children.push(i);
                let delta = c - nodes[i].cost;
                nodes[i].parent = Some(id);
                nodes[i].cost = c;
                propagate(&mut nodes, i, delta);
            }
        }
    }

    let goal_node = (spec.goal, n);
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for (i, nd) in nodes.iter().enumerate() {
        if (nd.position - spec.goal).norm() > GOAL_RADIUS {
            continue;
        }
        if nd.step == n {
            candidates.push((nd.cost, i));
        } else if planner.edge_feasible(&nd.position, nd.step, &goal_node.0, n) {
            candidates.push((nd.cost + planner.edge_cost(&nd.position, nd.step, &goal_node.0, n), i));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best: Option<(f64, Trajectory)> = None;
    if arena.segment_clear(&spec.start, &spec.goal, clearance) {
        let line = spec.straight_line();
        best = Some((log_survival_payoff(&line, placement, sensors), line));
    }
    for &(_, i) in candidates.iter().take(8) {
        let mut path = Vec::new();
        let mut cur = Some(i);
        while let Some(c) = cur {
            path.push((nodes[c].position, nodes[c].step));
            cur = nodes[c].parent;
        }
        path.reverse();
        if path.last().map(|&(_, k)| k) != Some(n) {
            path.push(goal_node);
        }
        let traj = planner.resample(&path);
        let j = log_survival_payoff(&traj, placement, sensors);
        if best.as_ref().is_none_or(|(bj, _)| j < *bj) {
            best = Some((j, traj));
        }
    }
    best.map(|(_, t)| t).ok_or(AttackerError::NoPathFound)
}

/// Index of the first coordinate of waypoint `k` in the NLP vector, if `k` is interior.
fn var(k: usize, n: usize) -> Option<usize> {
    (k >= 1 && k < n).then(|| 2 * (k - 1))
}

fn unpack(x: &[f64], spec: &AttackerSpec) -> Vec<Vec2> {
    let mut w = Vec::with_capacity(spec.n_steps + 1);
    w.push(spec.start);
    w.extend(x.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])));
    w.push(spec.goal);
    w
}

fn pack(traj: &Trajectory) -> Vec<f64> {
    let n = traj.steps();
    traj.waypoints[1..n].iter().flat_map(|z| [z.x, z.y]).collect()
}

fn build_problem<'a>(
    spec: &'a AttackerSpec,
    placement: &'a SensorPlacement,
    sensors: &'a [Sensor],
    arena: &'a Arena,
    clearance: f64,
) -> NlpProblem<'a> {
    let n = spec.n_steps;
    let dim = 2 * (n - 1);
    let problem = NlpProblem::new(dim, move |x, g| {
        let traj = Trajectory::new(unpack(x, spec), spec.t_a);
        let pg = payoff_and_gradients(&traj, placement, sensors);
        for (c, gz) in g.chunks_exact_mut(2).zip(&pg.waypoints[1..n]) {
            c[0] = gz.x;
            c[1] = gz.y;
        }
        pg.value
    });
    with_constraints(problem, spec, arena, clearance)
}

/// Adds the speed, clearance and map-bound constraints, each tightened by `MARGIN`.
fn with_constraints<'a>(problem: NlpProblem<'a>, spec: &'a AttackerSpec, arena: &'a Arena, clearance: f64) -> NlpProblem<'a> {
    let n = spec.n_steps;
    let dim = 2 * (n - 1);
    let mut problem = problem
    .bounds((0..dim).map(|i| (MARGIN, if i % 2 == 0 { arena.width } else { arena.height } - MARGIN)).collect());

    let inv = 1.0 / spec.step_length().powi(2);
    for k in 0..n {
        problem.add_inequality(move |x, g| {
            let a = var(k, n).map_or(spec.start, |i| Vec2::new(x[i], x[i + 1]));
            let b = var(k + 1, n).map_or(spec.goal, |i| Vec2::new(x[i], x[i + 1]));
            let d = b - a;
            if let Some(i) = var(k, n) {
                g.push((i, -2.0 * d.x * inv));
                g.push((i + 1, -2.0 * d.y * inv));
            }
            if let Some(i) = var(k + 1, n) {
                g.push((i, 2.0 * d.x * inv));
                g.push((i + 1, 2.0 * d.y * inv));
            }
            d.norm_squared() * inv - (1.0 - MARGIN)
        });
    }
    for k in 1..n {
        let i = 2 * (k - 1);
        for building in &arena.buildings {
            problem.add_inequality(move |x, g| {
                let z = Vec2::new(x[i], x[i + 1]);
                let face = &building.halfspaces()[building.active_face(&z)];
                g.push((i, -face.normal.x));
                g.push((i + 1, -face.normal.y));
                clearance + MARGIN - face.eval(&z)
            });
        }
    }
    problem
}

/// Nearest point of the tightened feasible set to a slightly infeasible
/// trajectory.
fn repair(spec: &AttackerSpec, arena: &Arena, clearance: f64, traj: &Trajectory) -> Result<Trajectory, AttackerError> {
    let target = pack(traj);
    let t = target.clone();
    let objective = NlpProblem::new(target.len(), move |x, g| {
        let mut v = 0.0;
        for ((gi, xi), ti) in g.iter_mut().zip(x).zip(&t) {
            *gi = xi - ti;
            v += 0.5 * (xi - ti) * (xi - ti);
        }
        v
    });
    let problem = with_constraints(objective, spec, arena, clearance);
    let options = SolveOptions { tol: 1e-9, feasibility_tol: 1e-10, max_iter: 2000 };
    let report = minimize_with(&problem, &target, &options)?;
    Ok(Trajectory::new(unpack(&report.solution, spec), spec.t_a))
}

/// Refines `init` into a locally detection-minimizing trajectory.
///
/// The returned trajectory never has a higher payoff than `init` (the
/// solver result is discarded in favour of `init` when it would be, or when
/// it violates the constraints by more than [`FEASIBILITY_TOL`]).
pub fn attacker_best_response(
    spec: &AttackerSpec,
    placement: &SensorPlacement,
    sensors: &[Sensor],
    arena: &Arena,
    clearance: f64,
    init: &Trajectory,
    tol: f64,
) -> Result<(Trajectory, SolveReport), AttackerError> {
    spec.validate()?;
    let violation = trajectory_violation(spec, init, arena, clearance);
    if violation > FEASIBILITY_TOL {
        return Err(AttackerError::InfeasibleInit { violation });
    }
    let problem = build_problem(spec, placement, sensors, arena, clearance);
    let x0 = pack(init);
    let options = SolveOptions { tol, feasibility_tol: 1e-9, max_iter: 4000 };
    let mut report = minimize_with(&problem, &x0, &options)?;
    let refined = Trajectory::new(unpack(&report.solution, spec), spec.t_a);
    let j_init = log_survival_payoff(init, placement, sensors);
    let mut refined = refined;
    if trajectory_violation(spec, &refined, arena, clearance) > FEASIBILITY_TOL {
        refined = repair(spec, arena, clearance, &refined)?;
    }
    let j_new = log_survival_payoff(&refined, placement, sensors);
    if trajectory_violation(spec, &refined, arena, clearance) > FEASIBILITY_TOL || j_new > j_init + 1e-9 {
        report.solution = x0;
        report.objective_value = j_init;
        return Ok((init.clone(), report));
    }
    report.solution = pack(&refined);
    report.objective_value = j_new;
    Ok((refined, report))
}

/// Projected gradient norm of the attacker NLP at `traj`: the smallest
/// `‖∇J + Σ λᵢ ∇cᵢ‖∞` over non-negative multipliers on active constraints.
pub fn attacker_residual(
    spec: &AttackerSpec,
    traj: &Trajectory,
    placement: &SensorPlacement,
    sensors: &[Sensor],
    arena: &Arena,
    clearance: f64,
) -> f64 {
    let n = spec.n_steps;
    let dim = 2 * (n - 1);
    let pg = payoff_and_gradients(traj, placement, sensors);
    let g = DVector::from_iterator(dim, pg.waypoints[1..n].iter().flat_map(|v| [v.x, v.y]));
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let w = &traj.waypoints;
    let inv = 1.0 / spec.step_length().powi(2);
    for k in 0..n {
        let d = w[k + 1] - w[k];
        if d.norm_squared() * inv - 1.0 >= -ACTIVE_TOL {
            let mut col = Vec::new();
            if let Some(i) = var(k, n) {
                col.extend([(i, -2.0 * d.x * inv), (i + 1, -2.0 * d.y * inv)]);
            }
            if let Some(i) = var(k + 1, n) {
                col.extend([(i, 2.0 * d.x * inv), (i + 1, 2.0 * d.y * inv)]);
            }
            columns.push(col);
        }
    }
    for k in 1..n {
        let i = 2 * (k - 1);
        let z = w[k];
        for building in &arena.buildings {
            for h in building.halfspaces() {
                // sd(z) ≥ clearance can bind through any face within tolerance
                if (h.eval(&z) - clearance).abs() <= ACTIVE_TOL && building.signed_distance(&z) - clearance <= ACTIVE_TOL {
                    columns.push(vec![(i, -h.normal.x), (i + 1, -h.normal.y)]);
                }
            }
        }
        for (c, hi) in [(0, arena.width), (1, arena.height)] {
            let v = z[c];
            if v <= ACTIVE_TOL {
                columns.push(vec![(i + c, -1.0)]);
            }
            if v >= hi - ACTIVE_TOL {
                columns.push(vec![(i + c, 1.0)]);
            }
        }
    }
    kkt_residual(&g, &columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use crate::optimizer::check_gradient;

    fn spec(t_a: f64, n: usize) -> AttackerSpec {
        AttackerSpec { start: Vec2::new(10.0, 50.0), goal: Vec2::new(90.0, 50.0), v_max: 2.0, t_a, n_steps: n }
    }

    fn square(cx: f64, cy: f64, h: f64) -> ConvexPolygon {
        ConvexPolygon::from_vertices(&[
            Vec2::new(cx - h, cy - h),
            Vec2::new(cx + h, cy - h),
            Vec2::new(cx + h, cy + h),
            Vec2::new(cx - h, cy + h),
        ])
        .unwrap()
    }

    fn omni_at(p: Vec2) -> (SensorPlacement, Vec<Sensor>) {
        (SensorPlacement::new(vec![p]), vec![Sensor::omnidirectional(0.01, 0.0, 0)])
    }

    #[test]
    fn spec_validation() {
        assert!(spec(60.0, 30).validate().is_ok());
        assert!(matches!(spec(30.0, 30).validate(), Err(AttackerError::InfeasibleSpec(_))));
        assert!(matches!(spec(60.0, 1).validate(), Err(AttackerError::InfeasibleSpec(_))));
    }

    #[test]
    fn empty_map_gives_straight_line() {
        let s = spec(60.0, 20);
        let arena = Arena::new(100.0, 100.0, vec![]);
        let empty = SensorPlacement::new(vec![]);
        let t = stp_rrt_star(&s, &empty, &[], &arena, 0.5, 1, 300).unwrap();
        assert_eq!(t, s.straight_line());
        assert_eq!(log_survival_payoff(&t, &empty, &[]), 0.0);
    }

    #[test]
    fn blocked_line_is_avoided() {
        let s = spec(70.0, 30);
        let arena = Arena::new(100.0, 100.0, vec![square(50.0, 50.0, 8.0)]);
        let empty = SensorPlacement::new(vec![]);
        let t = stp_rrt_star(&s, &empty, &[], &arena, 0.5, 3, 3000).unwrap();
        assert!(trajectory_violation(&s, &t, &arena, 0.5) <= 1e-9);
        for w in t.waypoints.windows(2) {
            assert!(arena.segment_clear(&w[0], &w[1], 0.5));
        }
    }

    #[test]
    fn sensor_on_the_line_is_avoided() {
        let s = spec(70.0, 30);
        let arena = Arena::new(100.0, 100.0, vec![]);
        let (placement, sensors) = omni_at(Vec2::new(50.0, 50.0));
        let t = stp_rrt_star(&s, &placement, &sensors, &arena, 0.5, 5, 2000).unwrap();
        let line = log_survival_payoff(&s.straight_line(), &placement, &sensors);
        assert!(log_survival_payoff(&t, &placement, &sensors) < line);
        assert!(trajectory_violation(&s, &t, &arena, 0.5) <= 1e-9);
    }

    #[test]
    fn planner_is_deterministic() {
        let s = spec(70.0, 30);
        let arena = Arena::new(100.0, 100.0, vec![square(50.0, 40.0, 6.0)]);
        let (placement, sensors) = omni_at(Vec2::new(44.0, 50.0));
        let a = stp_rrt_star(&s, &placement, &sensors, &arena, 0.5, 9, 1500).unwrap();
        let b = stp_rrt_star(&s, &placement, &sensors, &arena, 0.5, 9, 1500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn goal_inside_building_rejected() {
        let s = spec(70.0, 30);
        let arena = Arena::new(100.0, 100.0, vec![square(90.0, 50.0, 3.0)]);
        let empty = SensorPlacement::new(vec![]);
        assert!(matches!(stp_rrt_star(&s, &empty, &[], &arena, 0.5, 0, 10), Err(AttackerError::InfeasibleSpec(_))));
    }

    #[test]
    fn zero_sensors_is_stationary() {
        let s = spec(60.0, 20);
        let arena = Arena::new(100.0, 100.0, vec![]);
        let empty = SensorPlacement::new(vec![]);
        let init = s.straight_line();
        let (t, r) = attacker_best_response(&s, &empty, &[], &arena, 0.5, &init, 1e-6).unwrap();
        assert_eq!(r.objective_value, 0.0);
        assert_eq!(attacker_residual(&s, &t, &empty, &[], &arena, 0.5), 0.0);
    }

    #[test]
    fn refinement_bows_away_from_sensor() {
        let s = spec(80.0, 30);
        let arena = Arena::new(100.0, 100.0, vec![]);
        let (placement, sensors) = omni_at(Vec2::new(50.0, 48.0));
        let init = s.straight_line();
        let (t, r) = attacker_best_response(&s, &placement, &sensors, &arena, 0.5, &init, 1e-7).unwrap();
        let j0 = log_survival_payoff(&init, &placement, &sensors);
        let j1 = log_survival_payoff(&t, &placement, &sensors);
        assert!(j1 < j0 - 1e-3, "{j1} vs {j0}");
        assert!(t.waypoints[15].y > 50.5, "midpoint {:?} should move away", t.waypoints[15]);
        assert!(trajectory_violation(&s, &t, &arena, 0.5) <= FEASIBILITY_TOL);
        assert!(attacker_residual(&s, &t, &placement, &sensors, &arena, 0.5) < 1e-6, "{r:?}");
    }

    #[test]
    fn tight_horizon_keeps_straight_line() {
        let s = spec(40.0, 20);
        let arena = Arena::new(100.0, 100.0, vec![]);
        let (placement, sensors) = omni_at(Vec2::new(50.0, 48.0));
        let init = s.straight_line();
        let (t, _) = attacker_best_response(&s, &placement, &sensors, &arena, 0.5, &init, 1e-7).unwrap();
        for (a, b) in t.waypoints.iter().zip(&init.waypoints) {
            assert!((a - b).norm() < 1e-4, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn infeasible_init_rejected() {
        let s = spec(60.0, 20);
        let arena = Arena::new(100.0, 100.0, vec![square(50.0, 50.0, 5.0)]);
        let empty = SensorPlacement::new(vec![]);
        let err = attacker_best_response(&s, &empty, &[], &arena, 0.5, &s.straight_line(), 1e-6).unwrap_err();
        assert!(matches!(err, AttackerError::InfeasibleInit { .. }));
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let s = spec(80.0, 16);
        let arena = Arena::new(100.0, 100.0, vec![]);
        let placement = SensorPlacement::new(vec![Vec2::new(40.0, 45.0), Vec2::new(60.0, 58.0)]);
        let sensors = vec![
            Sensor::omnidirectional(0.01, 0.001, 0),
            Sensor::directional(crate::sensing::PanSchedule::new(1.2, 0.6, 20.0).unwrap(), 0.6, 0.01, 0.001, 20.0, 0),
        ];
        let p = build_problem(&s, &placement, &sensors, &arena, 0.5);
        let mut x = pack(&s.straight_line());
        for (i, v) in x.iter_mut().enumerate() {
            *v += ((i * 7) % 5) as f64 * 0.3 - 0.6;
        }
        assert!(check_gradient(&p, &x, 1e-6) < 1e-6);
    }
}
