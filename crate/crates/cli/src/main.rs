use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use segame::game::{run_bilevel, GameError};
use segame::harness::export::{export_results, write_solution_dir, ExportError};
use segame::harness::gradients::check_payoff_gradients;
use segame::harness::monte_carlo::{run_monte_carlo_detailed, MonteCarloConfig, Scale, Summary};
use segame::harness::plot::{plot_results, plot_solution_dir};
use segame::harness::scenario::{load_scenario, Scenario, ScenarioError};
use segame::sensing::detection_probability;

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_IO: u8 = 3;

/// Environment variable that overrides `--workers`.
const WORKERS_ENV: &str = "SEGAME_WORKERS";

#[derive(Parser)]
#[command(name = "segame", version, about = "Bilevel surveillance-evasion game solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Paper,
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and optionally write its result directory.
    Solve {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized batch.
    MonteCarlo {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write 0 for wall times so repeated batches give identical files.
        #[arg(long)]
        no_timing: bool,
    },
    /// Compare analytical payoff gradients with central differences.
    CheckGradients {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render scene and convergence SVGs for a result directory.
    Plot { result_dir: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = if matches!(e, ScenarioError::Io(_)) { EXIT_IO } else { EXIT_VALIDATION };
        Self::new(code, e)
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        let code = match &e {
            ExportError::Io(_) => EXIT_IO,
            ExportError::Csv(c) if c.is_io_error() => EXIT_IO,
            ExportError::Scenario(ScenarioError::Io(_)) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Self::new(code, e)
    }
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        let code = if matches!(e, GameError::ScenarioInvalid(_)) { EXIT_VALIDATION } else { EXIT_SOLVER };
        Self::new(code, e)
    }
}

fn solve(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let scenario: Scenario = load_scenario(path)?;
    let result = run_bilevel(&scenario, &scenario.game)?;
    let last = result.final_record();
    println!("status       {}", result.status.as_str());
    println!("rounds       {} ({} reinitializations)", result.rounds, result.reinits);
    println!("P_d          {:.6}", detection_probability(last.joint));
    println!("residual     {:.3e}", last.residual);
    println!("wall time    {:.2} s", result.wall_time_s);
    if let Some(dir) = out {
        write_solution_dir(dir, &scenario, &result)?;
        plot_solution_dir(dir)?;
        println!("wrote        {}", dir.display());
    }
    Ok(())
}

fn print_summary(s: &Summary) {
    println!("trials       {} ({} failed)", s.trials, s.failed);
    println!(
        "status       converged {}, limit_cycle_recovered {}, budget_exhausted {}",
        s.converged, s.limit_cycle_recovered, s.budget_exhausted
    );
    for (name, e) in [
        ("J_A0", s.j_a0),
        ("J_A*", s.j_a_star),
        ("J_D0", s.j_d0),
        ("J_D*", s.j_d_star),
        ("dJ_A", s.delta_a),
        ("dJ_D", s.delta_d),
    ] {
        println!("{name:<12} {:+.4} ± {:.4}", e.mean, e.ci95);
    }
    println!("J_D*/J_D0    {:.3}", s.defender_ratio);
    println!("dJ_D > 0     {:.1}%", 100.0 * s.defender_improved);
    println!("convergence  {:.1}%", 100.0 * s.convergence_rate());
}

fn workers(flag: usize) -> Result<usize, Failure> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&w: &usize| w > 0)
            .ok_or_else(|| Failure::new(EXIT_VALIDATION, format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn monte_carlo(
    trials: Option<usize>,
    seed: u64,
    scale: ScaleArg,
    workers_flag: usize,
    out: Option<&Path>,
    no_timing: bool,
) -> Result<(), Failure> {
    let mut config = MonteCarloConfig::for_scale(match scale {
        ScaleArg::Paper => Scale::Paper,
        ScaleArg::Desk => Scale::Desk,
    });
    if let Some(n) = trials {
        config.trials = n;
    }
    config.base_seed = seed;
    config.workers = workers(workers_flag)?;
    config.record_timing = !no_timing;
    let (records, results, summary) =
        run_monte_carlo_detailed(&config).map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
    print_summary(&summary);
    if let Some(dir) = out {
        export_results(dir, &config, &records, &results, &summary)?;
        println!("wrote        {}", dir.display());
    }
    Ok(())
}

fn check_gradients(path: &Path, trials: usize, seed: u64) -> Result<(), Failure> {
    let scenario = load_scenario(path)?;
    let report = check_payoff_gradients(&scenario, trials, seed);
    println!("trials             {}", report.trials);
    println!("attacker rel.err   {:.3e}", report.attacker_error);
    println!("defender rel.err   {:.3e}", report.defender_error);
    if report.passes(1e-5) {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure::new(EXIT_SOLVER, "gradient check exceeded relative error 1e-5"))
    }
}

fn plot(dir: &Path) -> Result<(), Failure> {
    for f in plot_results(dir)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Solve { scenario, out } => solve(&scenario, out.as_deref()),
        Command::MonteCarlo { trials, seed, scale, workers, out, no_timing } => {
            monte_carlo(trials, seed, scale, workers, out.as_deref(), no_timing)
        }
        Command::CheckGradients { scenario, trials, seed } => check_gradients(&scenario, trials, seed),
        Command::Plot { result_dir } => plot(&result_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
