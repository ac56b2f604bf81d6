//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use segame::defender::{defender_best_response, restore_to_boundary, sample_initial_placement, DefenderSpec};
use segame::game::{GameResult, GameStatus};
use segame::geometry::{ConvexPolygon, Vec2};
use segame::harness::export::write_trials;
use segame::harness::gradients::check_payoff_gradients;
use segame::harness::monte_carlo::{run_monte_carlo_detailed, trial_scenario, MonteCarloConfig, Summary, TrialRecord};
use segame::sensing::{
    alpha_for_range, detection_probability, log_survival_payoff, pan_angle, PanSchedule, Sensor, SensorPlacement,
    Trajectory,
};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn random_polygon(rng: &mut ChaCha8Rng) -> ConvexPolygon {
    loop {
        let c = Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let n = rng.gen_range(5..12);
        let pts: Vec<Vec2> = (0..n).map(|_| c + Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))).collect();
        if let Ok(p) = ConvexPolygon::hull(&pts) {
            if p.perimeter() > 5.0 && p.edge_count() >= 3 {
                return p;
            }
        }
    }
}

fn random_sensor(rng: &mut ChaCha8Rng, range: f64) -> Sensor {
    if rng.gen_bool(0.5) {
        let s = PanSchedule::new(rng.gen_range(-PI..PI), rng.gen_range(0.1..1.5), rng.gen_range(5.0..60.0)).unwrap();
        Sensor::directional(s, rng.gen_range(0.2..1.0), alpha_for_range(range), rng.gen_range(0.0..0.05), 50.0, 0)
    } else {
        Sensor::omnidirectional(alpha_for_range(range), rng.gen_range(0.0..0.05), 0)
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let config = MonteCarloConfig::desk();
    let (mut worst_a, mut worst_d) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let report = check_payoff_gradients(&trial_scenario(&config, i), 1, i as u64);
        worst_a = worst_a.max(report.attacker_error);
        worst_d = worst_d.max(report.defender_error);
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst_a < 1e-5 && worst_d < 1e-5 && secs < 10.0,
        format!("max rel. error attacker {worst_a:.2e}, defender {worst_d:.2e}, {secs:.1} s"),
    )
}

fn lse_fidelity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let polygons: Vec<ConvexPolygon> = (0..20).map(|_| random_polygon(&mut rng)).collect();
    let mut within = true;
    let mut maxima = Vec::new();
    for eps in [0.5, 0.1, 0.01] {
        let mut worst = 0.0f64;
        for poly in &polygons {
            let bound = eps * (poly.edge_count() as f64).ln();
            for i in 0..1000 {
                let p = poly.perimeter_point(i as f64 / 1000.0);
                let err = (poly.lse_residual(&p, eps) + poly.signed_distance(&p)).abs();
                within &= err <= bound;
                worst = worst.max(err);
            }
        }
        maxima.push(worst);
    }
    let monotone = maxima.windows(2).all(|w| w[1] <= w[0]);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        within && monotone && secs < 5.0,
        format!("max error at ε = 0.5, 0.1, 0.01: {:.3e}, {:.3e}, {:.3e}; {secs:.2} s", maxima[0], maxima[1], maxima[2]),
    )
}

fn log_domain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut cases = 0;
    while cases < 1000 {
        let n = rng.gen_range(2..=50);
        let sensors: Vec<Sensor> = (0..rng.gen_range(1..4))
            .map(|_| {
                let range = rng.gen_range(3.0..20.0);
                random_sensor(&mut rng, range)
            })
            .collect();
        let placement =
            SensorPlacement::new(sensors.iter().map(|_| Vec2::new(rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0))).collect());
        let mut waypoints = vec![Vec2::new(rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0))];
        for _ in 0..n {
            let last = *waypoints.last().unwrap();
            waypoints.push(last + Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)));
        }
        let traj = Trajectory::new(waypoints, rng.gen_range(10.0..100.0));
        let mut survive = 1.0;
        let mut capped = true;
        for k in 0..traj.steps() {
            for (s, x) in sensors.iter().zip(&placement.positions) {
                let kk = s.detectability(x, &traj.waypoints[k], traj.time(k));
                capped &= kk <= 0.9;
                survive *= 1.0 - kk;
            }
        }
        if !capped {
            continue;
        }
        let j = log_survival_payoff(&traj, &placement, &sensors);
        worst = worst.max((detection_probability(j) - (1.0 - survive)).abs());
        cases += 1;
    }
    Outcome::new(worst < 1e-12, format!("max |P_log - P_product| = {worst:.2e} over {cases} trajectories"))
}

/// Best payoff over `count` uniformly spaced perimeter points, each restored
/// onto the smoothed boundary the optimizer is constrained to.
fn perimeter_sweep(spec: &DefenderSpec, traj: &Trajectory, count: usize) -> f64 {
    let b = &spec.buildings[0];
    (0..count)
        .map(|i| {
            let p = restore_to_boundary(b, &b.perimeter_point(i as f64 / count as f64), spec.epsilon);
            log_survival_payoff(traj, &SensorPlacement::new(vec![p]), &spec.sensors)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn defender_oracle() -> Outcome {
    let start = Instant::now();
    let gaps: Vec<Option<f64>> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + i);
            let building = {
                let c = Vec2::new(50.0, 50.0);
                let pts: Vec<Vec2> = (0..rng.gen_range(5..9))
                    .map(|_| {
                        let a = rng.gen_range(0.0..2.0 * PI);
                        c + Vec2::new(a.cos(), a.sin()) * rng.gen_range(5.0..12.0)
                    })
                    .collect();
                ConvexPolygon::hull(&pts).unwrap()
            };
            let range = rng.gen_range(8.0..20.0);
            let spec = DefenderSpec::new(vec![random_sensor(&mut rng, range)], vec![building], 0.05);
            let a = rng.gen_range(0.0..2.0 * PI);
            let offset = rng.gen_range(15.0..30.0);
            let mid = Vec2::new(50.0, 50.0) + Vec2::new(a.cos(), a.sin()) * offset;
            let dir = Vec2::new(-a.sin(), a.cos()) * 40.0;
            let traj = Trajectory::straight(mid - dir, mid + dir, 60.0, 30);
            let init = sample_initial_placement(&spec, i);
            let (out, _) = defender_best_response(&spec, &traj, &init, 1e-8).ok()?;
            Some(log_survival_payoff(&traj, &out, &spec.sensors) - perimeter_sweep(&spec, &traj, 2000))
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let solved = gaps.iter().flatten().count();
    let worst = gaps.iter().flatten().fold(f64::INFINITY, |m, &g| m.min(g));
    Outcome::new(
        solved == 20 && worst >= -1e-3 && secs < 60.0,
        format!("{solved}/20 solved, min (NLP - grid) = {worst:+.3e}, {secs:.1} s"),
    )
}

/// Step violations over the whole trace of one run: attacker ascents and defender descents.
fn monotonicity_violations(result: &GameResult) -> usize {
    let mut bad = 0;
    let mut previous = None;
    let mut current_reinit = usize::MAX;
    for r in &result.trace {
        if r.reinit != current_reinit {
            current_reinit = r.reinit;
            previous = Some(result.start_joints[r.reinit]);
        }
        if r.j_attacker > previous.unwrap() + 1e-9 {
            bad += 1;
        }
        if r.j_defender < r.j_attacker - 1e-9 {
            bad += 1;
        }
        previous = Some(r.joint);
    }
    bad
}

fn bilevel(results: &[Option<GameResult>], delta: f64, secs: f64) -> Outcome {
    let runs: Vec<&GameResult> = results.iter().take(20).flatten().collect();
    let steps: usize = runs.iter().map(|r| r.trace.len()).sum();
    let violations: usize = runs.iter().map(|r| monotonicity_violations(r)).sum();
    let converged: Vec<&&GameResult> = runs.iter().filter(|r| r.status == GameStatus::Converged).collect();
    let stationary = converged.iter().filter(|r| r.final_record().residual < delta).count();
    Outcome::new(
        runs.len() == 20 && violations == 0 && stationary == converged.len() && secs < 900.0,
        format!(
            "{} of 20 runs completed, {violations} violations in {steps} rounds, {stationary}/{} converged runs below δ",
            runs.len(),
            converged.len()
        ),
    )
}

fn monte_carlo(s: &Summary, secs: f64) -> Outcome {
    let a = s.delta_d.mean > 0.0 && s.delta_d.excludes_zero();
    let b = s.defender_improved >= 0.9;
    let c = s.defender_ratio >= 2.0;
    let d = s.delta_a.mean <= 0.0;
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    Outcome::new(
        a && b && c && d,
        format!(
            "(a) ΔJ_D {:+.4} ± {:.4} {}; (b) ΔJ_D > 0 in {:.0}% {}; (c) J_D*/J_D0 {:.3} {}; (d) ΔJ_A {:+.4} {}; {secs:.0} s",
            s.delta_d.mean,
            s.delta_d.ci95,
            mark(a),
            100.0 * s.defender_improved,
            mark(b),
            s.defender_ratio,
            mark(c),
            s.delta_a.mean,
            mark(d),
        ),
    )
}

fn robustness(s: &Summary) -> Outcome {
    Outcome::new(
        s.convergence_rate() >= 0.9,
        format!(
            "converged {} + limit_cycle_recovered {} of {} ({:.0}%)",
            s.converged,
            s.limit_cycle_recovered,
            s.trials,
            100.0 * s.convergence_rate()
        ),
    )
}

fn determinism(config: &MonteCarloConfig, records: &[TrialRecord]) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.csv");
    let second = dir.path().join("second.csv");
    write_trials(&first, records).unwrap();
    let rerun = MonteCarloConfig { workers: if config.workers == 1 { 2 } else { 1 }, ..config.clone() };
    let (again, _, _) = run_monte_carlo_detailed(&rerun).unwrap();
    write_trials(&second, &again).unwrap();
    let (a, b) = (std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    Outcome::new(
        a == b,
        format!("trials.csv {} bytes, rerun with {} workers {}", a.len(), rerun.workers, if a == b { "identical" } else { "differs" }),
    )
}

fn triangular_wave() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (psi0, dpsi, period) = (rng.gen_range(-PI..PI), rng.gen_range(0.0..PI), rng.gen_range(0.5..200.0));
        let s = PanSchedule::new(psi0, dpsi, period).unwrap();
        for (q, expected) in [(0.0, psi0), (0.25, psi0 + dpsi), (0.5, psi0), (0.75, psi0 - dpsi)] {
            worst = worst.max((pan_angle(&s, q * period) - expected).abs());
        }
    }
    Outcome::new(worst <= 1e-12, format!("max deviation {worst:.2e} over 50 schedules"))
}

fn main() -> ExitCode {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let config = MonteCarloConfig { workers, record_timing: false, ..MonteCarloConfig::desk() };

    let mut outcomes = vec![(1, gradients()), (2, lse_fidelity()), (3, log_domain()), (4, defender_oracle())];

    let start = Instant::now();
    let (records, results, summary) = run_monte_carlo_detailed(&config).unwrap();
    let batch_secs = start.elapsed().as_secs_f64();
    let desk_delta = trial_scenario(&config, 0).game.delta;
    outcomes.push((5, bilevel(&results, desk_delta, batch_secs)));
    outcomes.push((6, monte_carlo(&summary, batch_secs)));
    outcomes.push((7, robustness(&summary)));
    outcomes.push((8, determinism(&config, &records)));
    outcomes.push((9, triangular_wave()));

    for (n, o) in &outcomes {
        println!("criterion {n}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if outcomes.iter().all(|(_, o)| o.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
