//! Finite-difference check of the payoff gradients on random strategy pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::Scenario;
use crate::defender::sample_feasible_placement;
use crate::geometry::Vec2;
use crate::optimizer::{central_difference, relative_gradient_error};
use crate::sensing::{log_survival_payoff, payoff_and_gradients, SensorPlacement, Trajectory};

pub const FD_STEP: f64 = 1e-6;
/// Waypoints closer than this to a sensor are resampled.
pub const MIN_SENSOR_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    pub trials: usize,
    /// Largest relative error of `∇_z J` over all trials.
    pub attacker_error: f64,
    /// Largest relative error of `∇_x J` over all trials.
    pub defender_error: f64,
}

impl GradientReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.attacker_error < tol && self.defender_error < tol
    }
}

fn random_pair(scenario: &Scenario, rng: &mut ChaCha8Rng) -> (Trajectory, SensorPlacement) {
    let spec = scenario.defender_spec();
    let placement = sample_feasible_placement(&spec, rng.gen());
    let (w, h) = (scenario.arena.width, scenario.arena.height);
    let n = scenario.attacker.n_steps;
    let mut waypoints = Vec::with_capacity(n + 1);
    while waypoints.len() <= n {
        let z = Vec2::new(rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        if placement.positions.iter().all(|x| (x - z).norm() >= MIN_SENSOR_DISTANCE) {
            waypoints.push(z);
        }
    }
    (Trajectory::new(waypoints, scenario.attacker.t_a), placement)
}

fn flatten(v: &[Vec2]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn unflatten(x: &[f64]) -> Vec<Vec2> {
    x.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

/// Compares both analytical payoff gradients against central differences
/// on `trials` random (trajectory, placement) pairs drawn from `seed`.
pub fn check_payoff_gradients(scenario: &Scenario, trials: usize, seed: u64) -> GradientReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensors = &scenario.sensors;
    let mut report = GradientReport { trials, attacker_error: 0.0, defender_error: 0.0 };
    for _ in 0..trials {
        let (traj, placement) = random_pair(scenario, &mut rng);
        let analytic = payoff_and_gradients(&traj, &placement, sensors);

        let z = flatten(&traj.waypoints);
        let fd_z = central_difference(
            |p| log_survival_payoff(&Trajectory::new(unflatten(p), traj.t_f), &placement, sensors),
            &z,
            FD_STEP,
        );
        let err_z = relative_gradient_error(&flatten(&analytic.waypoints), &fd_z);

        let x = flatten(&placement.positions);
        let fd_x = central_difference(|p| log_survival_payoff(&traj, &SensorPlacement::new(unflatten(p)), sensors), &x, FD_STEP);
        let err_x = relative_gradient_error(&flatten(&analytic.sensors), &fd_x);

        report.attacker_error = report.attacker_error.max(err_z);
        report.defender_error = report.defender_error.max(err_x);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::monte_carlo::{trial_scenario, MonteCarloConfig};

    #[test]
    fn desk_scene_gradients_agree() {
        let scenario = trial_scenario(&MonteCarloConfig::desk(), 3);
        let report = check_payoff_gradients(&scenario, 5, 11);
        assert!(report.passes(1e-5), "{report:?}");
    }

    #[test]
    fn unflatten_inverts_flatten() {
        let v = vec![Vec2::new(1.0, 2.0), Vec2::new(-3.0, 0.5)];
        assert_eq!(unflatten(&flatten(&v)), v);
    }
}
