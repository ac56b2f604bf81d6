//! CSV and JSON result files.
//!
//! A solved game is written as a directory holding `scenario.json`,
//! `solution.json` and `trace.csv`; a batch adds `trials.csv` and
//! `summary.csv` at the top level with one such directory per trial under
//! `trials/`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::monte_carlo::{trial_scenario, Estimate, MonteCarloConfig, Summary, TrialRecord};
use super::scenario::{Scenario, ScenarioError};
use crate::game::{GameResult, RoundRecord};
use crate::geometry::Vec2;
use crate::sensing::{detection_probability, SensorPlacement, Trajectory};

pub const TRIALS_HEADER: [&str; 9] =
    ["seed", "J_A0", "J_A_star", "J_D0", "J_D_star", "rounds", "reinits", "status", "wall_time_s"];
pub const TRACE_HEADER: [&str; 7] = ["reinit", "round", "J_A", "J_D", "joint", "P_d", "residual"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("malformed {file}: {message}")]
    Malformed { file: String, message: String },
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn points(p: &[Vec2]) -> Vec<[f64; 2]> {
    p.iter().map(|v| [v.x, v.y]).collect()
}

fn vecs(p: &[[f64; 2]]) -> Vec<Vec2> {
    p.iter().map(|v| Vec2::new(v[0], v[1])).collect()
}

/// The returned strategies and the starting pair they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub status: String,
    pub rounds: usize,
    pub reinits: usize,
    pub horizon_s: f64,
    pub attacker: Vec<[f64; 2]>,
    pub defender: Vec<[f64; 2]>,
    pub initial_attacker: Vec<[f64; 2]>,
    pub initial_defender: Vec<[f64; 2]>,
    /// Detection probability of the returned pair.
    pub p_d: f64,
    pub residual: f64,
}

impl SolutionFile {
    pub fn from_result(result: &GameResult) -> Self {
        let last = result.final_record();
        Self {
            status: result.status.as_str().to_string(),
            rounds: result.rounds,
            reinits: result.reinits,
            horizon_s: result.attacker.t_f,
            attacker: points(&result.attacker.waypoints),
            defender: points(&result.defender.positions),
            initial_attacker: points(&result.start.attacker.waypoints),
            initial_defender: points(&result.start.defender.positions),
            p_d: detection_probability(last.joint),
            residual: last.residual,
        }
    }

    pub fn attacker(&self) -> Trajectory {
        Trajectory::new(vecs(&self.attacker), self.horizon_s)
    }

    pub fn initial_attacker(&self) -> Trajectory {
        Trajectory::new(vecs(&self.initial_attacker), self.horizon_s)
    }

    pub fn defender(&self) -> SensorPlacement {
        SensorPlacement::new(vecs(&self.defender))
    }

    pub fn initial_defender(&self) -> SensorPlacement {
        SensorPlacement::new(vecs(&self.initial_defender))
    }
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRIALS_HEADER)?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            fmt_f64(r.j_a0),
            fmt_f64(r.j_a_star),
            fmt_f64(r.j_d0),
            fmt_f64(r.j_d_star),
            r.rounds.to_string(),
            r.reinits.to_string(),
            r.status.clone(),
            fmt_f64(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn malformed(path: &Path, message: impl Into<String>) -> ExportError {
    ExportError::Malformed { file: path.display().to_string(), message: message.into() }
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>, ExportError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(TRIALS_HEADER) {
        return Err(malformed(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64, ExportError> {
            row[i].parse().map_err(|_| malformed(path, format!("bad number {:?}", &row[i])))
        };
        let int = |i: usize| -> Result<u64, ExportError> {
            row[i].parse().map_err(|_| malformed(path, format!("bad integer {:?}", &row[i])))
        };
        out.push(TrialRecord {
            seed: int(0)?,
            j_a0: num(1)?,
            j_a_star: num(2)?,
            j_d0: num(3)?,
            j_d_star: num(4)?,
            rounds: int(5)? as usize,
            reinits: int(6)? as usize,
            status: row[7].to_string(),
            wall_time_s: num(8)?,
        });
    }
    Ok(out)
}

/// `metric,mean,ci95,n` rows for every estimate followed by the counts.
pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "mean", "ci95", "n"])?;
    let rows: [(&str, &Estimate); 6] = [
        ("J_A0", &summary.j_a0),
        ("J_A_star", &summary.j_a_star),
        ("J_D0", &summary.j_d0),
        ("J_D_star", &summary.j_d_star),
        ("delta_J_A", &summary.delta_a),
        ("delta_J_D", &summary.delta_d),
    ];
    for (name, e) in rows {
        w.write_record([name.to_string(), fmt_f64(e.mean), fmt_f64(e.ci95), e.n.to_string()])?;
    }
    let n = summary.trials.to_string();
    let scalars = [
        ("defender_improved_fraction", summary.defender_improved),
        ("defender_ratio", summary.defender_ratio),
        ("convergence_rate", summary.convergence_rate()),
        ("converged", summary.converged as f64),
        ("limit_cycle_recovered", summary.limit_cycle_recovered as f64),
        ("budget_exhausted", summary.budget_exhausted as f64),
        ("failed", summary.failed as f64),
    ];
    for (name, v) in scalars {
        w.write_record([name.to_string(), fmt_f64(v), String::new(), n.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &[RoundRecord]) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.reinit.to_string(),
            r.round.to_string(),
            fmt_f64(r.j_attacker),
            fmt_f64(r.j_defender),
            fmt_f64(r.joint),
            fmt_f64(detection_probability(r.joint)),
            fmt_f64(r.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<RoundRecord>, ExportError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(TRACE_HEADER) {
        return Err(malformed(path, "unexpected header"));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64, ExportError> {
            row[i].parse().map_err(|_| malformed(path, format!("bad number {:?}", &row[i])))
        };
        let int = |i: usize| -> Result<usize, ExportError> {
            row[i].parse().map_err(|_| malformed(path, format!("bad integer {:?}", &row[i])))
        };
        out.push(RoundRecord {
            reinit: int(0)?,
            round: int(1)?,
            j_attacker: num(2)?,
            j_defender: num(3)?,
            joint: num(4)?,
            residual: num(6)?,
        });
    }
    Ok(out)
}

/// Writes `scenario.json`, `solution.json` and `trace.csv` into `dir`.
pub fn write_solution_dir(dir: &Path, scenario: &Scenario, result: &GameResult) -> Result<(), ExportError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scenario.json"), scenario.to_json())?;
    fs::write(dir.join("solution.json"), serde_json::to_string_pretty(&SolutionFile::from_result(result))?)?;
    write_trace(&dir.join("trace.csv"), &result.trace)
}

/// Reads back a directory written by [`write_solution_dir`].
pub fn read_solution_dir(dir: &Path) -> Result<(Scenario, SolutionFile, Vec<RoundRecord>), ExportError> {
    let scenario = super::scenario::load_scenario(dir.join("scenario.json"))?;
    let solution: SolutionFile = serde_json::from_str(&fs::read_to_string(dir.join("solution.json"))?)?;
    let trace = read_trace(&dir.join("trace.csv"))?;
    if solution.defender.len() != scenario.sensors.len() || solution.initial_defender.len() != scenario.sensors.len() {
        return Err(malformed(&dir.join("solution.json"), "sensor count does not match the scenario"));
    }
    Ok((scenario, solution, trace))
}

/// Directory of trial `index` inside a batch output directory.
pub fn trial_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join("trials").join(format!("seed_{seed}"))
}

/// Writes `trials.csv`, `summary.csv` and one solution directory per
/// successful trial.
pub fn export_results(
    out_dir: &Path,
    config: &MonteCarloConfig,
    records: &[TrialRecord],
    results: &[Option<GameResult>],
    summary: &Summary,
) -> Result<(), ExportError> {
    fs::create_dir_all(out_dir)?;
    write_trials(&out_dir.join("trials.csv"), records)?;
    write_summary(&out_dir.join("summary.csv"), summary)?;
    for (index, (record, result)) in records.iter().zip(results).enumerate() {
        if let Some(result) = result {
            write_solution_dir(&trial_dir(out_dir, record.seed), &trial_scenario(config, index), result)?;
        }
    }
    Ok(())
}
