//! Scenario files.
//!
//! A scenario is a single JSON document. Angles are given in degrees and
//! times in seconds (the unit is part of each field name); they are converted
//! to radians at load time. The schema is documented in `docs/scenario.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacker::AttackerSpec;
use crate::defender::{DefenderSpec, DEFAULT_EPSILON};
use crate::game::GameOptions;
use crate::geometry::{Arena, ConvexPolygon, Vec2};
use crate::sensing::{alpha_for_range, PanSchedule, Sensor, SensorKind, DEFAULT_SHARPNESS, DEFAULT_SIGMA};

pub const DEFAULT_CLEARANCE: f64 = 0.5;
pub const DEFAULT_RRT_ITERATIONS: usize = 1500;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario field `{path}`: {message}")]
    Validation { path: String, message: String },
}

impl ScenarioError {
    pub(crate) fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation { path: path.into(), message: message.into() }
    }
}

/// Smoothing and safety margins shared by both players.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingParams {
    /// LSE smoothing `ε` of the defender's boundary residual.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Minimum signed distance between the attacker and any building.
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, clearance: DEFAULT_CLEARANCE }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_clearance() -> f64 {
    DEFAULT_CLEARANCE
}

/// A validated game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub arena: Arena,
    pub sensors: Vec<Sensor>,
    pub attacker: AttackerSpec,
    pub smoothing: SmoothingParams,
    pub game: GameOptions,
    pub rrt_iterations: usize,
}

impl Scenario {
    pub fn defender_spec(&self) -> DefenderSpec {
        DefenderSpec::new(self.sensors.clone(), self.arena.buildings.clone(), self.smoothing.epsilon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serialization cannot fail")
    }

    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        file.into_scenario()
    }

    /// Checks every invariant that [`Scenario::from_json`] enforces.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        ScenarioFile::from(self).into_scenario().map(|_| ())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json(&text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub map: MapFile,
    #[serde(default)]
    pub buildings: Vec<BuildingFile>,
    #[serde(default)]
    pub sensors: Vec<SensorFile>,
    pub attacker: AttackerFile,
    #[serde(default)]
    pub smoothing: SmoothingParams,
    #[serde(default)]
    pub game: GameFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingFile {
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKindFile {
    Directional,
    Omnidirectional,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFile {
    pub kind: SensorKindFile,
    pub building: usize,
    /// Detection range `R` with `D(R) = 0.1`; alternative to `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_psi_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_s: Option<f64>,
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_sharpness() -> f64 {
    DEFAULT_SHARPNESS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerFile {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub v_max: f64,
    pub horizon_s: f64,
    pub n_steps: usize,
    #[serde(default = "default_rrt_iterations")]
    pub rrt_iterations: usize,
}

fn default_rrt_iterations() -> usize {
    DEFAULT_RRT_ITERATIONS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameFile {
    pub delta: f64,
    pub k_max: usize,
    pub r_max: usize,
    pub limit_cycle_window: usize,
    pub seed: u64,
}

impl Default for GameFile {
    fn default() -> Self {
        let g = GameOptions::default();
        Self { delta: g.delta, k_max: g.k_max, r_max: g.r_max, limit_cycle_window: g.limit_cycle_window, seed: g.seed }
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ScenarioError::at(path, format!("must be positive and finite, got {v}")))
    }
}

fn point(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl SensorFile {
    fn into_sensor(self, path: &str, building_count: usize) -> Result<Sensor, ScenarioError> {
        if self.building >= building_count {
            return Err(ScenarioError::at(
                format!("{path}.building"),
                format!("building {} does not exist ({building_count} defined)", self.building),
            ));
        }
        let alpha = match (self.range, self.alpha) {
            (Some(r), None) => alpha_for_range(positive(&format!("{path}.range"), r)?),
            (None, Some(a)) => positive(&format!("{path}.alpha"), a)?,
            (Some(_), Some(_)) => return Err(ScenarioError::at(format!("{path}.alpha"), "give either `range` or `alpha`, not both")),
            (None, None) => return Err(ScenarioError::at(format!("{path}.range"), "one of `range` or `alpha` is required")),
        };
        if !(0.0..=0.1).contains(&self.sigma) {
            return Err(ScenarioError::at(format!("{path}.sigma"), format!("must lie in [0, 0.1], got {}", self.sigma)));
        }
        positive(&format!("{path}.sharpness"), self.sharpness)?;
        let directional_only = [
            ("fov_deg", self.fov_deg),
            ("psi0_deg", self.psi0_deg),
            ("delta_psi_deg", self.delta_psi_deg),
            ("period_s", self.period_s),
            ("phase_s", self.phase_s),
        ];
        match self.kind {
            SensorKindFile::Omnidirectional => {
                if let Some((name, _)) = directional_only.iter().find(|(_, v)| v.is_some()) {
                    return Err(ScenarioError::at(format!("{path}.{name}"), "only directional sensors have this field"));
                }
                Ok(Sensor { kind: SensorKind::Omnidirectional, alpha, sigma: self.sigma, sharpness: self.sharpness, building: self.building })
            }
            SensorKindFile::Directional => {
                let need = |name: &str, v: Option<f64>| {
                    v.ok_or_else(|| ScenarioError::at(format!("{path}.{name}"), "required for directional sensors"))
                };
                let fov = need("fov_deg", self.fov_deg)?;
                if !(fov > 0.0 && fov < 180.0) {
                    return Err(ScenarioError::at(format!("{path}.fov_deg"), format!("must lie in (0, 180), got {fov}")));
                }
                let psi0 = need("psi0_deg", self.psi0_deg)?;
                if !psi0.is_finite() {
                    return Err(ScenarioError::at(format!("{path}.psi0_deg"), "must be finite"));
                }
                let delta = need("delta_psi_deg", self.delta_psi_deg)?;
                if !(0.0..=180.0).contains(&delta) {
                    return Err(ScenarioError::at(format!("{path}.delta_psi_deg"), format!("must lie in [0, 180], got {delta}")));
                }
                let period = positive(&format!("{path}.period_s"), need("period_s", self.period_s)?)?;
                let phase = self.phase_s.unwrap_or(0.0);
                if !phase.is_finite() {
                    return Err(ScenarioError::at(format!("{path}.phase_s"), "must be finite"));
                }
                let schedule = PanSchedule::with_phase(psi0.to_radians(), delta.to_radians(), period, phase)
                    .map_err(|e| ScenarioError::at(path, e.to_string()))?;
                Ok(Sensor {
                    kind: SensorKind::Directional { schedule, fov: fov.to_radians() },
                    alpha,
                    sigma: self.sigma,
                    sharpness: self.sharpness,
                    building: self.building,
                })
            }
        }
    }
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let width = positive("map.width", self.map.width)?;
        let height = positive("map.height", self.map.height)?;

        let mut buildings = Vec::with_capacity(self.buildings.len());
        for (i, b) in self.buildings.iter().enumerate() {
            let path = format!("buildings[{i}].vertices");
            let pts: Vec<Vec2> = b.vertices.iter().copied().map(point).collect();
            if pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
                return Err(ScenarioError::at(path, "coordinates must be finite"));
            }
            if pts.iter().any(|p| p.x < 0.0 || p.y < 0.0 || p.x > width || p.y > height) {
                return Err(ScenarioError::at(path, "building extends outside the map"));
            }
            buildings.push(ConvexPolygon::from_vertices(&pts).map_err(|e| ScenarioError::at(path, e.to_string()))?);
        }

        let sensors = self
            .sensors
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.into_sensor(&format!("sensors[{i}]"), buildings.len()))
            .collect::<Result<Vec<_>, _>>()?;

        let smoothing = self.smoothing;
        positive("smoothing.epsilon", smoothing.epsilon)?;
        if !(smoothing.clearance.is_finite() && smoothing.clearance >= 0.0) {
            return Err(ScenarioError::at("smoothing.clearance", format!("must be non-negative, got {}", smoothing.clearance)));
        }

        let a = &self.attacker;
        let arena = Arena::new(width, height, buildings);
        for (name, p) in [("attacker.start", a.start), ("attacker.goal", a.goal)] {
            let p = point(p);
            if !arena.in_bounds(&p) {
                return Err(ScenarioError::at(name, "lies outside the map"));
            }
            if arena.obstacle_distance(&p) < smoothing.clearance {
                return Err(ScenarioError::at(name, "lies inside a building or within the clearance margin"));
            }
        }
        let v_max = positive("attacker.v_max", a.v_max)?;
        let t_a = positive("attacker.horizon_s", a.horizon_s)?;
        if a.n_steps < 2 {
            return Err(ScenarioError::at("attacker.n_steps", format!("must be at least 2, got {}", a.n_steps)));
        }
        let attacker = AttackerSpec { start: point(a.start), goal: point(a.goal), v_max, t_a, n_steps: a.n_steps };
        if attacker.validate().is_err() {
            return Err(ScenarioError::at("attacker.horizon_s", "the goal is not reachable within the horizon at v_max"));
        }
        if a.rrt_iterations == 0 {
            return Err(ScenarioError::at("attacker.rrt_iterations", "must be at least 1"));
        }

        let g = &self.game;
        let game = GameOptions { delta: g.delta, k_max: g.k_max, r_max: g.r_max, limit_cycle_window: g.limit_cycle_window, seed: g.seed };
        game.validate()?;

        Ok(Scenario { arena, sensors, attacker, smoothing, game, rrt_iterations: a.rrt_iterations })
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let sensors = s
            .sensors
            .iter()
            .map(|sensor| {
                let mut f = SensorFile {
                    kind: SensorKindFile::Omnidirectional,
                    building: sensor.building,
                    range: None,
                    alpha: Some(sensor.alpha),
                    sigma: sensor.sigma,
                    sharpness: sensor.sharpness,
                    fov_deg: None,
                    psi0_deg: None,
                    delta_psi_deg: None,
                    period_s: None,
                    phase_s: None,
                };
                if let SensorKind::Directional { schedule, fov } = sensor.kind {
                    f.kind = SensorKindFile::Directional;
                    f.fov_deg = Some(fov.to_degrees());
                    f.psi0_deg = Some(schedule.psi0.to_degrees());
                    f.delta_psi_deg = Some(schedule.delta_psi.to_degrees());
                    f.period_s = Some(schedule.period);
                    f.phase_s = Some(schedule.phase);
                }
                f
            })
            .collect();
        let g = s.game;
        ScenarioFile {
            map: MapFile { width: s.arena.width, height: s.arena.height },
            buildings: s
                .arena
                .buildings
                .iter()
                .map(|b| BuildingFile { vertices: b.vertices().iter().map(|v| [v.x, v.y]).collect() })
                .collect(),
            sensors,
            attacker: AttackerFile {
                start: [s.attacker.start.x, s.attacker.start.y],
                goal: [s.attacker.goal.x, s.attacker.goal.y],
                v_max: s.attacker.v_max,
                horizon_s: s.attacker.t_a,
                n_steps: s.attacker.n_steps,
                rrt_iterations: s.rrt_iterations,
            },
            smoothing: s.smoothing,
            game: GameFile { delta: g.delta, k_max: g.k_max, r_max: g.r_max, limit_cycle_window: g.limit_cycle_window, seed: g.seed },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "map": {"width": 100, "height": 100},
        "buildings": [{"vertices": [[40, 40], [60, 40], [60, 60], [40, 60]]}],
        "sensors": [
            {"kind": "omnidirectional", "building": 0, "range": 30},
            {"kind": "directional", "building": 0, "range": 30, "fov_deg": 30,
             "psi0_deg": 90, "delta_psi_deg": 45, "period_s": 18}
        ],
        "attacker": {"start": [5, 5], "goal": [95, 95], "v_max": 2.5, "horizon_s": 80, "n_steps": 40}
    }"#;

    fn with(patch: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        patch(&mut v);
        v.to_string()
    }

    fn path_of(err: ScenarioError) -> String {
        match err {
            ScenarioError::Validation { path, .. } => path,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.sensors.len(), 2);
        assert_eq!(s.smoothing, SmoothingParams::default());
        assert_eq!(s.game, GameOptions::default());
        assert!((s.sensors[0].alpha - 0.01).abs() < 1e-15);
        match s.sensors[1].kind {
            SensorKind::Directional { fov, schedule } => {
                assert!((fov - 30f64.to_radians()).abs() < 1e-15);
                assert!((schedule.delta_psi - 45f64.to_radians()).abs() < 1e-15);
            }
            SensorKind::Omnidirectional => panic!("expected a directional sensor"),
        }
    }

    #[test]
    fn start_inside_building_names_field() {
        let text = with(|v| v["attacker"]["start"] = serde_json::json!([50, 50]));
        assert_eq!(path_of(Scenario::from_json(&text).unwrap_err()), "attacker.start");
    }

    #[test]
    fn zero_period_names_sensor() {
        let text = with(|v| v["sensors"][1]["period_s"] = serde_json::json!(0));
        assert_eq!(path_of(Scenario::from_json(&text).unwrap_err()), "sensors[1].period_s");
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = with(|v| v["map"]["depth"] = serde_json::json!(3));
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn other_validation_paths() {
        let cases: Vec<(Box<dyn FnOnce(&mut serde_json::Value)>, &str)> = vec![
            (Box::new(|v| v["sensors"][0]["building"] = serde_json::json!(4)), "sensors[0].building"),
            (Box::new(|v| v["buildings"][0]["vertices"] = serde_json::json!([[0, 0], [1, 1], [2, 2]])), "buildings[0].vertices"),
            (Box::new(|v| v["attacker"]["horizon_s"] = serde_json::json!(10)), "attacker.horizon_s"),
            (Box::new(|v| v["sensors"][0]["fov_deg"] = serde_json::json!(20)), "sensors[0].fov_deg"),
            (Box::new(|v| v["game"] = serde_json::json!({"limit_cycle_window": 2})), "game.limit_cycle_window"),
        ];
        for (patch, expected) in cases {
            assert_eq!(path_of(Scenario::from_json(&with(patch)).unwrap_err()), expected);
        }
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back.arena, s.arena);
        assert_eq!(back.attacker, s.attacker);
        for (a, b) in back.sensors.iter().zip(&s.sensors) {
            assert!((a.alpha - b.alpha).abs() < 1e-15);
            assert_eq!(a.building, b.building);
        }
    }
}
