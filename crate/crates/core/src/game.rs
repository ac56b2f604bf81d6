//! The alternating bilevel loop.
//!
//! Each round runs the attacker's best response against the current
//! placement and then the defender's best response against the fresh
//! trajectory (Gauss–Seidel order). A round is recorded as
//!
//! * `J_A = J(a_new, d_old)`, the attacker's payoff against the placement it answered,
//! * `J_D = J(a_new, d_new)`, the defender's payoff, which is also the joint payoff.
//!
//! The loop stops when the stationarity residual of the pair drops below
//! `δ`. A reinitialization (fresh random placement and a fresh tree
//! trajectory) happens after `K_max` rounds or when the joint payoff settles
//! into a limit cycle.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::attacker::{attacker_best_response, attacker_residual, stp_rrt_star, AttackerError};
use crate::defender::{defender_best_response, defender_residual, sample_feasible_placement, DefenderError, DefenderSpec};
use crate::harness::scenario::{Scenario, ScenarioError};
use crate::sensing::{log_survival_payoff, SensorPlacement, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameOptions {
    /// Stationarity tolerance `δ`.
    pub delta: f64,
    pub k_max: usize,
    pub r_max: usize,
    pub limit_cycle_window: usize,
    pub seed: u64,
}

impl Default for GameOptions {
    fn default() -> Self {
        Self { delta: 1e-5, k_max: 50, r_max: 5, limit_cycle_window: 6, seed: 0 }
    }
}

impl GameOptions {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ScenarioError::at("game.delta", "must be positive and finite"));
        }
        if self.k_max < 1 {
            return Err(ScenarioError::at("game.k_max", "must be at least 1"));
        }
        if self.r_max < 1 {
            return Err(ScenarioError::at("game.r_max", "must be at least 1"));
        }
        if self.limit_cycle_window < 4 {
            return Err(ScenarioError::at("game.limit_cycle_window", "must be at least 4"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error(transparent)]
    ScenarioInvalid(#[from] ScenarioError),
    #[error("attacker: {0}")]
    Attacker(#[from] AttackerError),
    #[error("defender: {0}")]
    Defender(#[from] DefenderError),
}

impl GameError {
    pub fn is_no_path(&self) -> bool {
        matches!(self, GameError::Attacker(AttackerError::NoPathFound))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameStatus {
    Converged,
    LimitCycleRecovered,
    BudgetExhausted,
}

impl GameStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            GameStatus::Converged => "converged",
            GameStatus::LimitCycleRecovered => "limit_cycle_recovered",
            GameStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// One bilevel round (log-survival scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub reinit: usize,
    /// 1-based round index within the reinitialization.
    pub round: usize,
    pub j_attacker: f64,
    pub j_defender: f64,
    pub joint: f64,
    pub residual: f64,
}

/// The starting pair of the reinitialization that produced the returned
/// strategies, with the two cross payoffs against the returned pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StartingPoint {
    pub attacker: Trajectory,
    pub defender: SensorPlacement,
    /// `J(a⁰, d⁰)`.
    pub joint: f64,
    /// `J(a⁰, d*)`: the tree trajectory against the returned placement.
    pub attacker_vs_final: f64,
    /// `J(a*, d⁰)`: the returned trajectory against the random placement.
    pub defender_vs_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameResult {
    pub attacker: Trajectory,
    pub defender: SensorPlacement,
    pub trace: Vec<RoundRecord>,
    pub status: GameStatus,
    /// Rounds played over all reinitializations.
    pub rounds: usize,
    /// Reinitializations after the first start.
    pub reinits: usize,
    /// Index into `trace` of the round that produced the returned pair.
    pub final_round: usize,
    pub start: StartingPoint,
    /// `J(a⁰, d⁰)` of every reinitialization, in order.
    pub start_joints: Vec<f64>,
    pub wall_time_s: f64,
}

impl GameResult {
    pub fn final_record(&self) -> &RoundRecord {
        &self.trace[self.final_round]
    }
}

/// `max(attacker projected gradient, defender KKT residual)` at the pair.
pub fn stationarity_residual(traj: &Trajectory, placement: &SensorPlacement, scenario: &Scenario) -> f64 {
    let a = attacker_residual(
        &scenario.attacker,
        traj,
        placement,
        &scenario.sensors,
        &scenario.arena,
        scenario.smoothing.clearance,
    );
    let d = defender_residual(&scenario.defender_spec(), traj, placement);
    a.max(d)
}

/// True iff over the last `window` rounds the payoff increments `|ΔJ|` have
/// mean above `10·δ` and a non-negative least-squares slope.
pub fn detect_limit_cycle(joint: &[f64], window: usize, delta: f64) -> bool {
    if window < 2 || joint.len() < window + 1 {
        return false;
    }
    let tail = &joint[joint.len() - window - 1..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    if mean <= 10.0 * delta {
        return false;
    }
    let x_mean = (n - 1.0) / 2.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, d) in diffs.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (d - mean);
        den += dx * dx;
    }
    num / den >= 0.0
}

struct Best {
    attacker: Trajectory,
    defender: SensorPlacement,
    joint: f64,
    round: usize,
    start: (Trajectory, SensorPlacement, f64),
}

fn starting_point(start: (Trajectory, SensorPlacement, f64), a: &Trajectory, d: &SensorPlacement, scenario: &Scenario) -> StartingPoint {
    let sensors = &scenario.sensors;
    StartingPoint {
        attacker_vs_final: log_survival_payoff(&start.0, d, sensors),
        defender_vs_final: log_survival_payoff(a, &start.1, sensors),
        attacker: start.0,
        defender: start.1,
        joint: start.2,
    }
}

/// Runs the bilevel game on `scenario` with `options` (the scenario's own
/// game section is ignored).
pub fn run_bilevel(scenario: &Scenario, options: &GameOptions) -> Result<GameResult, GameError> {
    let started = Instant::now();
    scenario.validate()?;
    options.validate()?;
    let spec: DefenderSpec = scenario.defender_spec();
    let sensors = &scenario.sensors;
    let arena = &scenario.arena;
    let clearance = scenario.smoothing.clearance;
    let att = &scenario.attacker;
    let tol = options.delta / 10.0;
    // After the first round of a start the defender only tracks its current
    // local optimum; the global perimeter scan is reserved for restarts.
    let local_spec = DefenderSpec { scan_points: 0, ..spec.clone() };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut trace = Vec::new();
    let mut best: Option<Best> = None;
    let mut cycled = false;
    let mut start_joints = Vec::new();
    let mut reinit = 0;

    while reinit < options.r_max {
        let placement_seed: u64 = rng.gen();
        let tree_seed: u64 = rng.gen();
        let d0 = sample_feasible_placement(&spec, placement_seed);
        let a0 = stp_rrt_star(att, &d0, sensors, arena, clearance, tree_seed, scenario.rrt_iterations)?;
        let j0 = log_survival_payoff(&a0, &d0, sensors);
        start_joints.push(j0);

        let mut a = a0.clone();
        let mut d = d0.clone();
        let mut joints = vec![j0];
        let mut converged = false;

        for k in 1..=options.k_max {
            let (a_new, _) = attacker_best_response(att, &d, sensors, arena, clearance, &a, tol)?;
            let j_attacker = log_survival_payoff(&a_new, &d, sensors);
            let (d_new, _) = defender_best_response(if k == 1 { &spec } else { &local_spec }, &a_new, &d, tol)?;
            let joint = log_survival_payoff(&a_new, &d_new, sensors);
            a = a_new;
            d = d_new;
            let residual = stationarity_residual(&a, &d, scenario);
            trace.push(RoundRecord { reinit, round: k, j_attacker, j_defender: joint, joint, residual });
            joints.push(joint);

            if best.as_ref().is_none_or(|b| joint > b.joint) {
                let start = (a0.clone(), d0.clone(), j0);
                best = Some(Best { attacker: a.clone(), defender: d.clone(), joint, round: trace.len() - 1, start });
            }
            if residual < options.delta {
                converged = true;
                break;
            }
            if detect_limit_cycle(&joints, options.limit_cycle_window, options.delta) {
                cycled = true;
                break;
            }
        }

        if converged {
            let status = if cycled { GameStatus::LimitCycleRecovered } else { GameStatus::Converged };
            let round = trace.len() - 1;
            let start = starting_point((a0, d0, j0), &a, &d, scenario);
            return Ok(GameResult {
                attacker: a,
                defender: d,
                rounds: trace.len(),
                trace,
                status,
                reinits: reinit,
                final_round: round,
                start,
                start_joints,
                wall_time_s: started.elapsed().as_secs_f64(),
            });
        }
        reinit += 1;
    }

    let best = best.expect("at least one round was played");
    let start = starting_point(best.start, &best.attacker, &best.defender, scenario);
    Ok(GameResult {
        attacker: best.attacker,
        defender: best.defender,
        rounds: trace.len(),
        trace,
        status: GameStatus::BudgetExhausted,
        reinits: options.r_max - 1,
        final_round: best.round,
        start,
        start_joints,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
