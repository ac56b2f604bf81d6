//! Scenario I/O, the Monte Carlo experiment runner and result export.

pub mod export;
pub mod gradients;
pub mod monte_carlo;
pub mod plot;
pub mod scenario;

pub use export::{export_results, write_solution_dir, ExportError};
pub use monte_carlo::{run_monte_carlo, run_monte_carlo_detailed, MonteCarloConfig, Scale, Summary, TrialRecord};
pub use plot::plot_results;
pub use scenario::{load_scenario, Scenario, ScenarioError, SmoothingParams};
