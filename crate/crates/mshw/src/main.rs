use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mshw::config::{self, ConfigError};
use mshw::experiment::{self, ExperimentError};
use mshw::{csvio, output};
use mshw_core::des::{self, Discipline, InitialCondition, RunConfig};
use mshw_core::limits;
use mshw_core::maps::{self, MapCoefficients, Quadrature, SolveOptions};

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mshw",
    version,
    about = "Many-server heavy-traffic workbench: simulate G/Ph/n+GI queues, \
             construct their fluid and diffusion limits, and compare the two"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the service law in a scenario config and print its algebra
    ValidatePh { config: PathBuf },
    /// Simulate replications and export path CSVs
    Simulate {
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        reps: usize,
        /// Output directory for path_<rep>.csv files
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        grid_dt: f64,
        #[arg(long, default_value = "original")]
        discipline: String,
        #[arg(long, default_value = "stationary_phase_mix")]
        initial: String,
        /// Also export events_<rep>.log audit files
        #[arg(long)]
        events: bool,
    },
    /// Sample diffusion-limit paths and export them in the path CSV schema
    Limit {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        grid_dt: f64,
    },
    /// Solve an integral map for a driver path CSV (columns t,x,z1..zK)
    MapSolve {
        path: PathBuf,
        /// phi (critical) or psi (overloaded)
        #[arg(long)]
        variant: String,
        /// Scenario config supplying the coefficients (alpha, p, R)
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// trapezoid or left
        #[arg(long, default_value = "trapezoid")]
        quadrature: String,
    },
    /// Run a scaling-experiment plan and write report.json plus plot data
    Experiment {
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    mshw::init_thread_pool();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    BadArgument(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::BadArgument(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::ValidatePh { config } => validate_ph(&config),
        Command::Simulate {
            config,
            n,
            horizon,
            seed,
            reps,
            out,
            grid_dt,
            discipline,
            initial,
            events,
        } => simulate(&config, n, horizon, seed, reps, &out, grid_dt, &discipline, &initial, events),
        Command::Limit { config, seed, reps, out, horizon, grid_dt } => {
            limit(&config, seed, reps, &out, horizon, grid_dt)
        }
        Command::MapSolve { path, variant, config, out, quadrature } => {
            map_solve(&path, &variant, &config, &out, &quadrature)
        }
        Command::Experiment { plan, out_dir } => run_experiment(&plan, &out_dir),
    }
}

fn validate_ph(config: &Path) -> Result<ExitCode, CliError> {
    let cfg = config::load_scenario(config)?;
    let sc = cfg.build()?;
    let ph = &sc.ph;
    println!("service law: {} phase(s)", ph.phases());
    println!("  mean service time  m     = {:.12}", ph.mean());
    println!("  mean service rate  mu    = {:.12}", ph.rate());
    println!("  service-time s.d.        = {:.12}", ph.variance().sqrt());
    let gamma = ph
        .load_vector()
        .iter()
        .map(|g| format!("{g:.12}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!("  phase load         gamma = [{gamma}]");
    println!("arrival scv        c_a^2   = {:.12}", sc.arrival_scv());
    println!("patience hazard    alpha   = {:.12}", sc.alpha());
    println!("regime: {:?}, fluid queue q = {:.12}", sc.regime, sc.q());
    println!("ok");
    Ok(ExitCode::SUCCESS)
}

fn parse_discipline(s: &str) -> Result<Discipline, CliError> {
    match s {
        "original" => Ok(Discipline::Original),
        "perturbed" => Ok(Discipline::Perturbed),
        other => Err(CliError::BadArgument(format!("unknown discipline '{other}'"))),
    }
}

fn parse_initial(s: &str) -> Result<InitialCondition, CliError> {
    match s {
        "empty" => Ok(InitialCondition::Empty),
        "stationary_phase_mix" => Ok(InitialCondition::StationaryPhaseMix),
        other => Err(CliError::BadArgument(format!("unknown initial condition '{other}'"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    config: &Path,
    n: usize,
    horizon: f64,
    seed: u64,
    reps: usize,
    out: &Path,
    grid_dt: f64,
    discipline: &str,
    initial: &str,
    events: bool,
) -> Result<ExitCode, CliError> {
    let sc = config::load_scenario(config)?.build()?;
    let discipline = parse_discipline(discipline)?;
    let initial = parse_initial(initial)?;
    std::fs::create_dir_all(out).map_err(runtime)?;
    for rep in 0..reps {
        let mut cfg = RunConfig::new(n, horizon, grid_dt, seed);
        cfg.stream = rep as u64;
        cfg.discipline = discipline;
        cfg.initial = initial;
        cfg.record_events = events;
        let path = des::run(&sc, &cfg).map_err(runtime)?;
        csvio::write_sim_path(&out.join(format!("path_{rep:04}.csv")), &path).map_err(runtime)?;
        if events {
            if let Some(log) = &path.events {
                csvio::write_event_log(&out.join(format!("events_{rep:04}.log")), log)
                    .map_err(runtime)?;
            }
        }
    }
    println!("wrote {reps} path file(s) to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn limit(
    config: &Path,
    seed: u64,
    reps: usize,
    out: &Path,
    horizon: f64,
    grid_dt: f64,
) -> Result<ExitCode, CliError> {
    let sc = config::load_scenario(config)?.build()?;
    std::fs::create_dir_all(out).map_err(runtime)?;
    for rep in 0..reps {
        let path = limits::diffusion_path(&sc, grid_dt, horizon, seed, rep as u64)
            .map_err(runtime)?;
        csvio::write_limit_path(
            &out.join(format!("limit_{rep:04}.csv")),
            &path,
            sc.ph.initial_law(),
        )
        .map_err(runtime)?;
    }
    println!("wrote {reps} limit path file(s) to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn map_solve(
    path: &Path,
    variant: &str,
    config: &Path,
    out: &Path,
    quadrature: &str,
) -> Result<ExitCode, CliError> {
    let sc = config::load_scenario(config)?.build()?;
    let quadrature = match quadrature {
        "trapezoid" => Quadrature::Trapezoid,
        "left" => Quadrature::LeftPoint,
        other => return Err(CliError::BadArgument(format!("unknown quadrature '{other}'"))),
    };
    let coeff = match variant {
        "phi" => MapCoefficients::phi(sc.alpha(), &sc.ph),
        "psi" => MapCoefficients::psi(sc.alpha(), &sc.ph),
        other => return Err(CliError::BadArgument(format!("unknown map variant '{other}'"))),
    };
    let uv = csvio::read_grid_path(path).map_err(|e| CliError::BadArgument(e.to_string()))?;
    if uv.zdim() != sc.ph.phases() {
        return Err(CliError::BadArgument(format!(
            "path has {} vector coordinates but the service law has {} phases",
            uv.zdim(),
            sc.ph.phases()
        )));
    }
    let opts = SolveOptions { quadrature, ..SolveOptions::default() };
    let xz = maps::picard_solve(&coeff, &uv, &opts).map_err(runtime)?;
    csvio::write_grid_path(out, &xz).map_err(runtime)?;
    println!("solved {} map on {} grid points -> {}", variant, xz.num_points(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_experiment(plan_path: &Path, out_dir: &Path) -> Result<ExitCode, CliError> {
    let plan = config::load_plan(plan_path)?;
    let report = match experiment::run_experiment(&plan) {
        Ok(r) => r,
        Err(ExperimentError::Config(e)) => return Err(e.into()),
        Err(e @ ExperimentError::InsufficientReplications(_)) => {
            return Err(CliError::BadArgument(e.to_string()))
        }
        Err(e @ ExperimentError::WrongRegime { .. }) => {
            return Err(CliError::BadArgument(e.to_string()))
        }
        Err(e) => return Err(runtime(e)),
    };
    output::emit(&report, out_dir).map_err(runtime)?;
    output::dump_paths(&plan, out_dir).map_err(runtime)?;
    for check in &report.checks {
        println!(
            "{} {}: {}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    println!(
        "report: {} (hash {})",
        out_dir.join("report.json").display(),
        &report.config_hash[..12]
    );
    if report.pass {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("some checks failed");
        Ok(ExitCode::from(EXIT_CHECK_FAILED))
    }
}
