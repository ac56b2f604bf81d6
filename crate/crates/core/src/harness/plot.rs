//! Static SVG figures: the scene with both players' strategies and the
//! convergence trace of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::export::{read_solution_dir, ExportError, SolutionFile};
use super::scenario::Scenario;
use crate::game::RoundRecord;
use crate::geometry::Vec2;
use crate::sensing::{detection_probability, SensorKind, SensorPlacement, Trajectory};

/// Radius of the drawn FOV wedge: the distance where `D` falls to 0.1.
fn wedge_radius(alpha: f64) -> f64 {
    (9.0 / alpha).sqrt()
}

fn pts(points: impl IntoIterator<Item = Vec2>) -> String {
    points.into_iter().map(|p| format!("{:.3},{:.3}", p.x, p.y)).collect::<Vec<_>>().join(" ")
}

fn path_data(traj: &Trajectory) -> String {
    let mut d = String::new();
    for (i, p) in traj.waypoints.iter().enumerate() {
        let _ = write!(d, "{}{:.3} {:.3} ", if i == 0 { "M" } else { "L" }, p.x, p.y);
    }
    d.trim_end().to_string()
}

fn sensors(out: &mut String, scenario: &Scenario, placement: &SensorPlacement, initial: bool) {
    let scale = scenario.arena.width.max(scenario.arena.height) / 100.0;
    for (s, x) in scenario.sensors.iter().zip(&placement.positions) {
        let colour = if s.is_directional() { "#c0392b" } else { "#2471a3" };
        if initial {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="{colour}" stroke-width="{:.3}"/>"#,
                x.x, x.y, 0.9 * scale, 0.25 * scale
            );
            continue;
        }
        if let SensorKind::Directional { fov, .. } = s.kind {
            let h = s.heading(0.0).expect("directional sensor has a heading");
            let psi = h.y.atan2(h.x);
            let r = wedge_radius(s.alpha);
            let arc = (0..=16).map(|i| {
                let a = psi - fov / 2.0 + fov * i as f64 / 16.0;
                x + Vec2::new(a.cos(), a.sin()) * r
            });
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="{colour}" fill-opacity="0.15" stroke="none"/>"#,
                pts(std::iter::once(*x).chain(arc).chain(std::iter::once(*x)))
            );
            let tip = x + h * (3.0 * scale);
            let _ = writeln!(
                out,
                r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{colour}" stroke-width="{:.3}"/>"#,
                x.x, x.y, tip.x, tip.y, 0.4 * scale
            );
        }
        let _ = writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="{colour}"/>"#, x.x, x.y, scale);
    }
}

/// Buildings (one `polygon` each), sensors at `t = 0` with FOV wedges, and
/// the initial and returned trajectories (one `path` each).
pub fn scene_svg(scenario: &Scenario, solution: &SolutionFile) -> String {
    let (w, h) = (scenario.arena.width, scenario.arena.height);
    let scale = w.max(h) / 100.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="600" height="{:.0}">"#, 600.0 * h / w);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white" stroke="black" stroke-width="{:.3}"/>"#, 0.3 * scale);
    let _ = writeln!(out, r#"<g transform="translate(0,{h}) scale(1,-1)">"#);
    for b in &scenario.arena.buildings {
        let _ = writeln!(out, r##"<polygon points="{}" fill="#bbbbbb" stroke="#555555" stroke-width="{:.3}"/>"##, pts(b.vertices().iter().copied()), 0.3 * scale);
    }
    sensors(&mut out, scenario, &solution.initial_defender(), true);
    sensors(&mut out, scenario, &solution.defender(), false);
    let _ = writeln!(
        out,
        r##"<path d="{}" fill="none" stroke="#7f8c8d" stroke-width="{:.3}" stroke-dasharray="{:.3}"/>"##,
        path_data(&solution.initial_attacker()),
        0.4 * scale,
        1.5 * scale
    );
    let _ = writeln!(out, r##"<path d="{}" fill="none" stroke="#27ae60" stroke-width="{:.3}"/>"##, path_data(&solution.attacker()), 0.6 * scale);
    for p in [scenario.attacker.start, scenario.attacker.goal] {
        let _ = writeln!(out, r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="black"/>"#, p.x - scale, p.y - scale, 2.0 * scale, 2.0 * scale);
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Joint detection probability per round (top) and `log10` residual (bottom).
pub fn convergence_svg(trace: &[RoundRecord]) -> String {
    let (w, h, pad) = (600.0, 400.0, 40.0);
    let panel = (h - 3.0 * pad) / 2.0;
    let n = trace.len().max(2) as f64 - 1.0;
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / n;
    let logs: Vec<f64> = trace.iter().map(|r| r.residual.max(1e-16).log10()).collect();
    let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };

    let top = trace.iter().enumerate().map(|(i, r)| Vec2::new(x(i), pad + panel * (1.0 - detection_probability(r.joint))));
    let bottom = logs.iter().enumerate().map(|(i, &v)| Vec2::new(x(i), 2.0 * pad + panel + panel * (hi - v) / (hi - lo)));
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    for (y0, label) in [(pad, "joint P_d"), (2.0 * pad + panel, "log10 residual")] {
        let _ = writeln!(out, r##"<rect x="{pad}" y="{y0}" width="{}" height="{panel}" fill="none" stroke="#999999"/>"##, w - 2.0 * pad);
        let _ = writeln!(out, r#"<text x="{pad}" y="{}" font-size="12">{label}</text>"#, y0 - 6.0);
    }
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##, pts(top));
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#2471a3" stroke-width="1.5"/>"##, pts(bottom));
    // reinitialization boundaries
    for (i, pair) in trace.windows(2).enumerate() {
        if pair[1].reinit != pair[0].reinit {
            let xi = (x(i) + x(i + 1)) / 2.0;
            let _ = writeln!(out, r##"<line x1="{xi:.3}" y1="{pad}" x2="{xi:.3}" y2="{}" stroke="#aaaaaa" stroke-dasharray="4"/>"##, h - pad);
        }
    }
    let _ = writeln!(out, r#"<text x="{pad}" y="{}" font-size="11">log10 residual range [{lo:.1}, {hi:.1}]</text>"#, h - 12.0);
    out.push_str("</svg>\n");
    out
}

/// Renders `scene.svg` and `convergence.svg` into a solution directory.
pub fn plot_solution_dir(dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let (scenario, solution, trace) = read_solution_dir(dir)?;
    let scene = dir.join("scene.svg");
    let convergence = dir.join("convergence.svg");
    fs::write(&scene, scene_svg(&scenario, &solution))?;
    fs::write(&convergence, convergence_svg(&trace))?;
    Ok(vec![scene, convergence])
}

/// Plots a solution directory, or every trial directory of a batch output.
pub fn plot_results(dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    if dir.join("solution.json").is_file() {
        return plot_solution_dir(dir);
    }
    let trials = dir.join("trials");
    if !trials.is_dir() {
        return Err(ExportError::Malformed {
            file: dir.display().to_string(),
            message: "neither solution.json nor a trials/ directory found".into(),
        });
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(&trials)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    dirs.retain(|d| d.join("solution.json").is_file());
    dirs.sort();
    let mut written = Vec::new();
    for d in dirs {
        written.extend(plot_solution_dir(&d)?);
    }
    Ok(written)
}
