//! Sensor kinematics and the smooth detection model.
//!
//! A sensor at `x` detects a target at `z` at time `t` with probability
//! `K = D(z) · Ψ(z, t)`:
//!
//! * `D(z) = 1 / (α‖x − z‖² + 1) + σ` decays with range,
//! * `Ψ(z, t) = sigmoid(c (cos γ − cos(θ/2)))` is the soft field of view around
//!   the panning heading `h(t)`, with `cos γ = r̂ · h(t)`; omnidirectional
//!   sensors use `Ψ ≡ 1`.
//!
//! Detections are independent across sensors and time steps, so the
//! trajectory payoff is the log-survival sum `J = −Σₖ Σⱼ ln(1 − Kⱼ(zₖ, tₖ))`
//! and the detection probability is `P_d = 1 − e^{−J}`.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::geometry::Vec2;

/// Upper clamp on a single sensor's detectability is `1 − KAPPA`.
pub const KAPPA: f64 = 1e-9;

/// Distances below this are floored when forming `r̂` and `∇Ψ`.
pub const DISTANCE_FLOOR: f64 = 1e-6;

pub const DEFAULT_SHARPNESS: f64 = 50.0;
pub const DEFAULT_SIGMA: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensingError {
    #[error("sensor is omnidirectional and has no heading")]
    NotDirectional,
    #[error("invalid sensor parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SensingError {
    SensingError::InvalidParameter { field, reason: reason.into() }
}

/// Triangular pan waveform `ψ(t) = ψ₀ + (2Δψ/π)·asin(sin(2π(t + phase)/T))`.
///
/// `phase` is zero for a sweep that starts toward `ψ₀ + Δψ`; a half-period
/// phase (`T/2`) reverses the initial sweep direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanSchedule {
    pub psi0: f64,
    pub delta_psi: f64,
    pub period: f64,
    pub phase: f64,
}

impl PanSchedule {
    pub fn new(psi0: f64, delta_psi: f64, period: f64) -> Result<Self, SensingError> {
        Self::with_phase(psi0, delta_psi, period, 0.0)
    }

    pub fn with_phase(psi0: f64, delta_psi: f64, period: f64, phase: f64) -> Result<Self, SensingError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("period", format!("must be positive and finite, got {period}")));
        }
        if !(0.0..=PI).contains(&delta_psi) {
            return Err(invalid("delta_psi", format!("must lie in [0, π], got {delta_psi}")));
        }
        if !psi0.is_finite() || !phase.is_finite() {
            return Err(invalid("psi0", "must be finite"));
        }
        Ok(Self { psi0, delta_psi, period, phase })
    }

    /// A fixed heading (no sweep).
    pub fn stationary(psi0: f64) -> Self {
        Self { psi0, delta_psi: 0.0, period: 1.0, phase: 0.0 }
    }

    pub fn angle(&self, t: f64) -> f64 {
        pan_angle(self, t)
    }
}

pub fn pan_angle(schedule: &PanSchedule, t: f64) -> f64 {
    let arg = TAU * (t + schedule.phase) / schedule.period;
    schedule.psi0 + (2.0 * schedule.delta_psi / PI) * arg.sin().asin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SensorKind {
    /// Panning sensor with full field-of-view angle `fov` (radians).
    Directional { schedule: PanSchedule, fov: f64 },
    Omnidirectional,
}

/// Physical parameters of one sensor and the building it is mounted on.
///
/// Positions are not part of the sensor: they are the defender's decision
/// variables and live in [`SensorPlacement`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensor {
    pub kind: SensorKind,
    /// Distance scaling `α` (1/units²).
    pub alpha: f64,
    /// Minimal detection bias `σ`.
    pub sigma: f64,
    /// Sigmoid sharpness `c`.
    pub sharpness: f64,
    pub building: usize,
}

/// `α` such that `D(range) = 0.1` when `σ = 0`.
pub fn alpha_for_range(range: f64) -> f64 {
    9.0 / (range * range)
}

/// `(K, ∇_z K)` for one sensor at one point. Gradient is zero while the clamp is active.
#[derive(Debug, Clone, Copy)]
struct PointTerm {
    k: f64,
    grad_z: Vec2,
}

impl Sensor {
    pub fn omnidirectional(alpha: f64, sigma: f64, building: usize) -> Self {
        Self { kind: SensorKind::Omnidirectional, alpha, sigma, sharpness: DEFAULT_SHARPNESS, building }
    }

    pub fn directional(schedule: PanSchedule, fov: f64, alpha: f64, sigma: f64, sharpness: f64, building: usize) -> Self {
        Self { kind: SensorKind::Directional { schedule, fov }, alpha, sigma, sharpness, building }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(0.0..=0.1).contains(&self.sigma) {
            return Err(invalid("sigma", format!("must lie in [0, 0.1], got {}", self.sigma)));
        }
        if !(self.sharpness.is_finite() && self.sharpness > 0.0) {
            return Err(invalid("sharpness", format!("must be positive, got {}", self.sharpness)));
        }
        if let SensorKind::Directional { schedule, fov } = self.kind {
            if !(fov > 0.0 && fov < PI) {
                return Err(invalid("fov", format!("must lie in (0, π), got {fov}")));
            }
            PanSchedule::with_phase(schedule.psi0, schedule.delta_psi, schedule.period, schedule.phase)?;
        }
        Ok(())
    }

    pub fn is_directional(&self) -> bool {
        matches!(self.kind, SensorKind::Directional { .. })
    }

    /// Unit heading `h(t) = (cos ψ(t), sin ψ(t))`.
    pub fn heading(&self, t: f64) -> Result<Vec2, SensingError> {
        match &self.kind {
            SensorKind::Directional { schedule, .. } => {
                let psi = schedule.angle(t);
                Ok(Vec2::new(psi.cos(), psi.sin()))
            }
            SensorKind::Omnidirectional => Err(SensingError::NotDirectional),
        }
    }

    /// `D = 1/(α‖x − z‖² + 1) + σ`.
    pub fn distance_decay(&self, x: &Vec2, z: &Vec2) -> f64 {
        1.0 / (self.alpha * (x - z).norm_squared() + 1.0) + self.sigma
    }

    /// Soft field-of-view factor `Ψ ∈ (0, 1)`; exactly 1 for omnidirectional sensors.
    pub fn visibility(&self, x: &Vec2, z: &Vec2, t: f64) -> f64 {
        match &self.kind {
            SensorKind::Omnidirectional => 1.0,
            SensorKind::Directional { schedule, fov } => {
                let r = z - x;
                let r_hat = r / r.norm().max(DISTANCE_FLOOR);
                let psi = schedule.angle(t);
                let cos_gamma = r_hat.x * psi.cos() + r_hat.y * psi.sin();
                sigmoid(self.sharpness * (cos_gamma - (0.5 * fov).cos()))
            }
        }
    }

    /// `K = clamp(D·Ψ, 0, 1 − κ)`.
    pub fn detectability(&self, x: &Vec2, z: &Vec2, t: f64) -> f64 {
        (self.distance_decay(x, z) * self.visibility(x, z, t)).clamp(0.0, 1.0 - KAPPA)
    }

    fn point_term(&self, x: &Vec2, z: &Vec2, t: f64) -> PointTerm {
        let r = z - x;
        let dist2 = r.norm_squared();
        let q = self.alpha * dist2 + 1.0;
        let d = 1.0 / q + self.sigma;
        let grad_d = r * (-2.0 * self.alpha / (q * q));
        let (psi, grad_psi) = match &self.kind {
            SensorKind::Omnidirectional => (1.0, Vec2::zeros()),
            SensorKind::Directional { schedule, fov } => {
                let dist = dist2.sqrt().max(DISTANCE_FLOOR);
                let r_hat = r / dist;
                let angle = schedule.angle(t);
                let h = Vec2::new(angle.cos(), angle.sin());
                let cos_gamma = r_hat.dot(&h);
                let vis = sigmoid(self.sharpness * (cos_gamma - (0.5 * fov).cos()));
                let grad = (h - r_hat * cos_gamma) * (self.sharpness * vis * (1.0 - vis) / dist);
                (vis, grad)
            }
        };
        let raw = d * psi;
        if raw > 1.0 - KAPPA {
            PointTerm { k: 1.0 - KAPPA, grad_z: Vec2::zeros() }
        } else {
            PointTerm { k: raw.max(0.0), grad_z: grad_d * psi + grad_psi * d }
        }
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Attacker waypoints `z₀ … z_N` on the uniform grid `t_k = k·T_f/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Vec2>,
    pub t_f: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vec2>, t_f: f64) -> Self {
        debug_assert!(waypoints.len() >= 2, "a trajectory needs at least one step");
        Self { waypoints, t_f }
    }

    /// Constant-speed line from `start` to `goal` in `n_steps` steps.
    pub fn straight(start: Vec2, goal: Vec2, t_f: f64, n_steps: usize) -> Self {
        let waypoints = (0..=n_steps).map(|k| start + (goal - start) * (k as f64 / n_steps as f64)).collect();
        Self { waypoints, t_f }
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.t_f / self.steps() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// Largest per-step speed `‖z_{k+1} − z_k‖ / Δt`.
    pub fn max_speed(&self) -> f64 {
        let dt = self.dt();
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm() / dt).fold(0.0, f64::max)
    }
}

/// Defender strategy: one position per sensor, in sensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorPlacement {
    pub positions: Vec<Vec2>,
}

impl SensorPlacement {
    pub fn new(positions: Vec<Vec2>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `K = 1 − Πⱼ(1 − Kⱼ)`.
pub fn combined_detectability(placement: &SensorPlacement, sensors: &[Sensor], z: &Vec2, t: f64) -> f64 {
    debug_assert_eq!(placement.len(), sensors.len());
    let survive: f64 = sensors
        .iter()
        .zip(&placement.positions)
        .map(|(s, x)| 1.0 - s.detectability(x, z, t))
        .product();
    1.0 - survive
}

/// `J = −Σ_{k=0}^{N−1} ln(1 − K(z_k, S, t_k))`; the final waypoint carries no cost.
pub fn log_survival_payoff(traj: &Trajectory, placement: &SensorPlacement, sensors: &[Sensor]) -> f64 {
    debug_assert_eq!(placement.len(), sensors.len());
    let dt = traj.dt();
    let mut j = 0.0;
    for (k, z) in traj.waypoints[..traj.steps()].iter().enumerate() {
        let t = k as f64 * dt;
        for (s, x) in sensors.iter().zip(&placement.positions) {
            j -= (-s.detectability(x, z, t)).ln_1p();
        }
    }
    j
}

/// `P_d = 1 − exp(−J)`.
pub fn detection_probability(j: f64) -> f64 {
    -(-j).exp_m1()
}

/// Payoff with both gradient blocks, computed in one sweep.
#[derive(Debug, Clone)]
pub struct PayoffGradients {
    pub value: f64,
    /// `∂J/∂z_k` for `k = 0 … N` (the last entry is always zero).
    pub waypoints: Vec<Vec2>,
    /// `∂J/∂x_j` for every sensor.
    pub sensors: Vec<Vec2>,
}

pub fn payoff_and_gradients(traj: &Trajectory, placement: &SensorPlacement, sensors: &[Sensor]) -> PayoffGradients {
    debug_assert_eq!(placement.len(), sensors.len());
    let dt = traj.dt();
    let mut value = 0.0;
    let mut gz = vec![Vec2::zeros(); traj.waypoints.len()];
    let mut gx = vec![Vec2::zeros(); sensors.len()];
    for (k, z) in traj.waypoints[..traj.steps()].iter().enumerate() {
        let t = k as f64 * dt;
        for (j, (s, x)) in sensors.iter().zip(&placement.positions).enumerate() {
            let term = s.point_term(x, z, t);
            value -= (-term.k).ln_1p();
            let g = term.grad_z / (1.0 - term.k);
            gz[k] += g;
            gx[j] -= g;
        }
    }
    PayoffGradients { value, waypoints: gz, sensors: gx }
}

/// `∇_{z_k} J = Σⱼ (Ψⱼ∇Dⱼ + Dⱼ∇Ψⱼ)/(1 − Kⱼ)` for every waypoint.
pub fn payoff_gradient_z(traj: &Trajectory, placement: &SensorPlacement, sensors: &[Sensor]) -> Vec<Vec2> {
    payoff_and_gradients(traj, placement, sensors).waypoints
}

/// `∇_{x_j} J = −Σ_k (Ψⱼ∇Dⱼ + Dⱼ∇Ψⱼ)/(1 − Kⱼ)` for every sensor.
pub fn payoff_gradient_x(traj: &Trajectory, placement: &SensorPlacement, sensors: &[Sensor]) -> Vec<Vec2> {
    payoff_and_gradients(traj, placement, sensors).sensors
}

/// Per-step survival-weighted detection density used by the planner:
/// `−ln(1 − K(z, S, t))`.
pub fn step_cost(placement: &SensorPlacement, sensors: &[Sensor], z: &Vec2, t: f64) -> f64 {
    sensors
        .iter()
        .zip(&placement.positions)
        .map(|(s, x)| -(-s.detectability(x, z, t)).ln_1p())
        .sum()
}

/// Normalizes an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI { w + TAU } else { w }
}
