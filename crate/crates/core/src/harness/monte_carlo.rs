//! Randomized batches of bilevel games.
//!
//! Trial `i` draws every random quantity from a ChaCha8 stream seeded with
//! `base_seed + i`, and trials are collected in index order, so a batch is
//! reproducible regardless of the worker count.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::attacker::AttackerSpec;
use crate::game::{run_bilevel, GameError, GameOptions, GameResult, GameStatus};
use crate::geometry::{Arena, ConvexPolygon, Vec2};
use crate::harness::scenario::{Scenario, SmoothingParams};
use crate::sensing::{alpha_for_range, detection_probability, PanSchedule, Sensor, SensorKind};

/// Pan speeds below this magnitude (deg/s) are raised to it so the period stays finite.
pub const MIN_PAN_SPEED_DEG: f64 = 0.5;
/// Buildings keep at least this distance from the start and goal.
pub const ENDPOINT_EXCLUSION: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid Monte Carlo configuration `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Paper,
    Desk,
}

/// Inclusive range `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range<T> {
    pub lo: T,
    pub hi: T,
}

impl<T> Range<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }
}

impl Range<f64> {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo { rng.gen_range(self.lo..=self.hi) } else { self.lo }
    }
}

impl Range<usize> {
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.gen_range(self.lo..=self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub base_seed: u64,
    pub workers: usize,
    /// Write measured wall times; disable for byte-reproducible output.
    pub record_timing: bool,

    pub map_size: f64,
    pub psi_init_deg: Range<f64>,
    pub pan_speed_deg: Range<f64>,
    pub half_sweep_deg: Range<f64>,
    pub range: Range<f64>,
    pub directional: Range<usize>,
    pub omnidirectional: Range<usize>,
    pub fov_deg: Range<f64>,
    pub sigma: f64,
    pub sharpness: f64,

    pub building_count: Range<usize>,
    pub building_points: Range<usize>,
    pub building_radius: Range<f64>,

    pub start: Vec2,
    pub goal: Vec2,
    pub v_max: f64,
    pub horizon_s: f64,
    pub n_steps: usize,
    pub rrt_iterations: usize,
    pub smoothing: SmoothingParams,
    pub game: GameOptions,
}

impl MonteCarloConfig {
    /// The 500-trial, 150×150 protocol.
    pub fn paper() -> Self {
        Self {
            trials: 500,
            base_seed: 0,
            workers: 1,
            record_timing: true,
            map_size: 150.0,
            psi_init_deg: Range::new(0.0, 360.0),
            pan_speed_deg: Range::new(-10.0, 10.0),
            half_sweep_deg: Range::new(30.0, 90.0),
            range: Range::new(10.0, 15.0),
            directional: Range::new(5, 10),
            omnidirectional: Range::new(5, 10),
            fov_deg: Range::new(10.0, 30.0),
            sigma: 0.0,
            sharpness: 50.0,
            building_count: Range::new(3, 6),
            building_points: Range::new(5, 8),
            building_radius: Range::new(8.0, 15.0),
            start: Vec2::new(5.0, 5.0),
            goal: Vec2::new(145.0, 145.0),
            v_max: 2.5,
            horizon_s: 100.0,
            n_steps: 50,
            rrt_iterations: 2000,
            smoothing: SmoothingParams::default(),
            game: GameOptions::default(),
        }
    }

    /// 50 trials on a 100×100 map with 3+3 sensors, sized for a single desktop core.
///
/// Ranges are scaled down with the map: at 10–15 units six sensors already
/// cover most of a 100×100 square and every trial saturates near `P_d = 1`.
    pub fn desk() -> Self {
        Self {
            trials: 50,
            map_size: 100.0,
            range: Range::new(4.0, 6.0),
            directional: Range::new(3, 3),
            omnidirectional: Range::new(3, 3),
            goal: Vec2::new(95.0, 95.0),
            horizon_s: 70.0,
            n_steps: 30,
            rrt_iterations: 800,
            ..Self::paper()
        }
    }

    pub fn for_scale(scale: Scale) -> Self {
        match scale {
            Scale::Paper => Self::paper(),
            Scale::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, reason: &str| Err(ConfigError::Invalid { field, reason: reason.to_string() });
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        for (field, r) in [
            ("psi_init_deg", self.psi_init_deg),
            ("pan_speed_deg", self.pan_speed_deg),
            ("half_sweep_deg", self.half_sweep_deg),
            ("range", self.range),
            ("fov_deg", self.fov_deg),
            ("building_radius", self.building_radius),
        ] {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return bad(field, "range must be finite and non-empty");
            }
        }
        for (field, r) in [
            ("directional", self.directional),
            ("omnidirectional", self.omnidirectional),
            ("building_count", self.building_count),
            ("building_points", self.building_points),
        ] {
            if r.lo > r.hi {
                return bad(field, "range must be non-empty");
            }
        }
        if self.building_count.lo == 0 && self.directional.hi + self.omnidirectional.hi > 0 {
            return bad("building_count", "sensors need at least one building");
        }
        if self.building_points.lo < 3 {
            return bad("building_points", "a polygon needs at least 3 points");
        }
        if self.range.lo <= 0.0 {
            return bad("range", "must be positive");
        }
        if !(self.fov_deg.lo > 0.0 && self.fov_deg.hi < 180.0) {
            return bad("fov_deg", "must lie in (0, 180)");
        }
        if self.half_sweep_deg.lo < 0.0 || self.half_sweep_deg.hi > 180.0 {
            return bad("half_sweep_deg", "must lie in [0, 180]");
        }
        if !(0.0..=0.1).contains(&self.sigma) {
            return bad("sigma", "must lie in [0, 0.1]");
        }
        let spec = AttackerSpec { start: self.start, goal: self.goal, v_max: self.v_max, t_a: self.horizon_s, n_steps: self.n_steps };
        if spec.validate().is_err() {
            return bad("horizon_s", "goal unreachable within the horizon");
        }
        Ok(())
    }
}

/// Uniform pan speed and half-sweep converted to a triangular schedule:
/// `T = 4Δψ/|v|`, with a half-period phase for negative speeds.
pub fn schedule_from_pan_speed(psi0: f64, half_sweep: f64, pan_speed: f64) -> PanSchedule {
    let speed = pan_speed.abs().max(MIN_PAN_SPEED_DEG.to_radians());
    let period = 4.0 * half_sweep / speed;
    let phase = if pan_speed < 0.0 { 0.5 * period } else { 0.0 };
    PanSchedule { psi0, delta_psi: half_sweep, period, phase }
}

fn random_building(config: &MonteCarloConfig, rng: &mut ChaCha8Rng) -> Option<ConvexPolygon> {
    let radius = config.building_radius.sample(rng);
    let size = config.map_size;
    if 2.0 * radius >= size {
        return None;
    }
    let center = Vec2::new(rng.gen_range(radius..size - radius), rng.gen_range(radius..size - radius));
    let count = config.building_points.sample(rng);
    let points: Vec<Vec2> = (0..count)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..TAU);
            center + Vec2::new(r * a.cos(), r * a.sin())
        })
        .collect();
    ConvexPolygon::hull(&points).ok()
}

/// Draws one trial's scenario. Buildings are rejection-sampled so that they
/// neither overlap each other nor come within [`ENDPOINT_EXCLUSION`] of the
/// start and goal.
pub fn random_scenario(config: &MonteCarloConfig, rng: &mut ChaCha8Rng) -> Scenario {
    let wanted = config.building_count.sample(rng);
    let gap = 2.0 * config.smoothing.clearance + 1.0;
    let mut buildings: Vec<ConvexPolygon> = Vec::with_capacity(wanted);
    let mut attempts = 0;
    while buildings.len() < wanted && attempts < 1000 {
        attempts += 1;
        let Some(b) = random_building(config, rng) else { continue };
        let far_from_ends = [config.start, config.goal]
            .iter()
            .all(|p| b.signed_distance(p) > ENDPOINT_EXCLUSION.max(config.smoothing.clearance));
        if far_from_ends && buildings.iter().all(|o| !o.overlaps(&b, gap)) {
            buildings.push(b);
        }
    }

    let n_dir = config.directional.sample(rng);
    let n_omni = config.omnidirectional.sample(rng);
    let mut sensors = Vec::with_capacity(n_dir + n_omni);
    for i in 0..n_dir + n_omni {
        let building = rng.gen_range(0..buildings.len().max(1));
        let alpha = alpha_for_range(config.range.sample(rng));
        let kind = if i < n_dir {
            let psi0 = config.psi_init_deg.sample(rng).to_radians();
            let half = config.half_sweep_deg.sample(rng).to_radians();
            let speed = config.pan_speed_deg.sample(rng).to_radians();
            let fov = config.fov_deg.sample(rng).to_radians();
            SensorKind::Directional { schedule: schedule_from_pan_speed(psi0, half, speed), fov }
        } else {
            SensorKind::Omnidirectional
        };
        sensors.push(Sensor { kind, alpha, sigma: config.sigma, sharpness: config.sharpness, building });
    }

    let seed = rng.gen();
    Scenario {
        arena: Arena::new(config.map_size, config.map_size, buildings),
        sensors,
        attacker: AttackerSpec {
            start: config.start,
            goal: config.goal,
            v_max: config.v_max,
            t_a: config.horizon_s,
            n_steps: config.n_steps,
        },
        smoothing: config.smoothing,
        game: GameOptions { seed, ..config.game },
        rrt_iterations: config.rrt_iterations,
    }
}

pub fn trial_scenario(config: &MonteCarloConfig, index: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config, index));
    random_scenario(config, &mut rng)
}

pub fn trial_seed(config: &MonteCarloConfig, index: usize) -> u64 {
    config.base_seed.wrapping_add(index as u64)
}

/// One row of `trials.csv`. Payoffs are detection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    /// `P_d(a⁰, d*)`: the tree trajectory against the returned placement.
    pub j_a0: f64,
    /// Attacker payoff of the returned round, `P_d(a*, d_prev)`.
    pub j_a_star: f64,
    /// `P_d(a*, d⁰)`: the returned trajectory against the random placement.
    pub j_d0: f64,
    /// `P_d(a*, d*)`.
    pub j_d_star: f64,
    pub rounds: usize,
    pub reinits: usize,
    pub status: String,
    pub wall_time_s: f64,
}

impl TrialRecord {
    pub fn from_result(seed: u64, result: &GameResult) -> Self {
        let last = result.final_record();
        Self {
            seed,
            j_a0: detection_probability(result.start.attacker_vs_final),
            j_a_star: detection_probability(last.j_attacker),
            j_d0: detection_probability(result.start.defender_vs_final),
            j_d_star: detection_probability(last.j_defender),
            rounds: result.rounds,
            reinits: result.reinits,
            status: result.status.as_str().to_string(),
            wall_time_s: result.wall_time_s,
        }
    }

    fn failed(seed: u64, error: &GameError, wall_time_s: f64) -> Self {
        let status = if error.is_no_path() { "failed_no_path" } else { "failed_solver" };
        Self {
            seed,
            j_a0: f64::NAN,
            j_a_star: f64::NAN,
            j_d0: f64::NAN,
            j_d_star: f64::NAN,
            rounds: 0,
            reinits: 0,
            status: status.to_string(),
            wall_time_s,
        }
    }

    pub fn succeeded(&self) -> bool {
        !self.status.starts_with("failed")
    }

    pub fn delta_attacker(&self) -> f64 {
        self.j_a_star - self.j_a0
    }

    pub fn delta_defender(&self) -> f64 {
        self.j_d_star - self.j_d0
    }
}

/// Runs one trial, returning its record and (on success) the full game result.
pub fn run_trial(config: &MonteCarloConfig, index: usize) -> (TrialRecord, Option<GameResult>) {
    let seed = trial_seed(config, index);
    let scenario = trial_scenario(config, index);
    let started = std::time::Instant::now();
    match run_bilevel(&scenario, &scenario.game) {
        Ok(mut result) => {
            if !config.record_timing {
                result.wall_time_s = 0.0;
            }
            (TrialRecord::from_result(seed, &result), Some(result))
        }
        Err(e) => {
            let t = if config.record_timing { started.elapsed().as_secs_f64() } else { 0.0 };
            (TrialRecord::failed(seed, &e, t), None)
        }
    }
}

/// Mean with a normal-approximation 95% interval half-width `1.96·s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, ci95: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, ci95: 0.0, n };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self { mean, ci95: 1.96 * (var / n as f64).sqrt(), n }
    }

    pub fn excludes_zero(&self) -> bool {
        self.mean.abs() > self.ci95
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub failed: usize,
    pub converged: usize,
    pub limit_cycle_recovered: usize,
    pub budget_exhausted: usize,
    pub j_a0: Estimate,
    pub j_a_star: Estimate,
    pub j_d0: Estimate,
    pub j_d_star: Estimate,
    pub delta_a: Estimate,
    pub delta_d: Estimate,
    /// Fraction of completed trials with `ΔJ_D > 0`.
    pub defender_improved: f64,
    /// `mean(J_D*) / mean(J_D0)`.
    pub defender_ratio: f64,
}

impl Summary {
    pub fn of(records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.succeeded()).collect();
        let col = |f: fn(&TrialRecord) -> f64| Estimate::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
        let count = |s: GameStatus| records.iter().filter(|r| r.status == s.as_str()).count();
        let j_d0 = col(|r| r.j_d0);
        let j_d_star = col(|r| r.j_d_star);
        Self {
            trials: records.len(),
            failed: records.len() - ok.len(),
            converged: count(GameStatus::Converged),
            limit_cycle_recovered: count(GameStatus::LimitCycleRecovered),
            budget_exhausted: count(GameStatus::BudgetExhausted),
            j_a0: col(|r| r.j_a0),
            j_a_star: col(|r| r.j_a_star),
            j_d0,
            j_d_star,
            delta_a: col(TrialRecord::delta_attacker),
            delta_d: col(TrialRecord::delta_defender),
            defender_improved: ok.iter().filter(|r| r.delta_defender() > 0.0).count() as f64 / ok.len().max(1) as f64,
            defender_ratio: j_d_star.mean / j_d0.mean,
        }
    }

    /// `(converged + limit_cycle_recovered) / trials`.
    pub fn convergence_rate(&self) -> f64 {
        (self.converged + self.limit_cycle_recovered) as f64 / self.trials as f64
    }
}

/// Runs every trial on a pool of `config.workers` threads and summarizes them.
///
/// Returns the records in trial order together with each successful trial's game result.
pub fn run_monte_carlo_detailed(config: &MonteCarloConfig) -> Result<(Vec<TrialRecord>, Vec<Option<GameResult>>, Summary), ConfigError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| ConfigError::Invalid { field: "workers", reason: e.to_string() })?;
    let outcomes: Vec<(TrialRecord, Option<GameResult>)> =
        pool.install(|| (0..config.trials).into_par_iter().map(|i| run_trial(config, i)).collect());
    let (records, results): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let summary = Summary::of(&records);
    Ok((records, results, summary))
}

pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<(Vec<TrialRecord>, Summary), ConfigError> {
    run_monte_carlo_detailed(config).map(|(r, _, s)| (r, s))
}
