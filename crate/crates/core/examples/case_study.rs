//! Solves the bundled case study and prints the payoff trace.
//!
//! ```text
//! cargo run --release -p segame --example case_study
//! ```

use segame::game::run_bilevel;
use segame::harness::load_scenario;
use segame::sensing::detection_probability;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/case_study.scenario.json");
    let scenario = load_scenario(path).expect("bundled scenario is valid");
    let result = run_bilevel(&scenario, &scenario.game).expect("game runs");
    for r in &result.trace {
        println!(
            "reinit {} round {:2}  P_A {:.4}  P_D {:.4}  residual {:.2e}",
            r.reinit,
            r.round,
            detection_probability(r.j_attacker),
            detection_probability(r.j_defender),
            r.residual
        );
    }
    println!(
        "{} after {} rounds ({} reinitializations), P_d = {:.4}, {:.1} s",
        result.status.as_str(),
        result.rounds,
        result.reinits,
        detection_probability(result.final_record().joint),
        result.wall_time_s
    );
}
