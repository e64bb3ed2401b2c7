use clap::{Args, Parser, Subcommand};
use rdbp_core::brs::brs_check;
use rdbp_core::config::{ConfigError, ControlConfig, ExperimentConfig};
use rdbp_core::dists::ClaimDistribution;
use rdbp_core::equilibrium::{linearized_ratio_multiplier, solve_equilibrium, DroppedRoot, EquilibriumSolution};
use rdbp_core::io::{flows_csv, json_bytes, read_transport_csv, trace_csv, write_atomic, IoError};
use rdbp_core::sim::monte_carlo;
use rdbp_core::transport::{
    brute_force_optimal, check_monge, control_search, northwest_plan, quantile_coupling_cost, Balance,
    DEFAULT_QUAD_POINTS,
};
use serde::Serialize;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Resource-dependent branching processes: simulation, equilibria, BRS
/// bound and transport control.
#[derive(Parser)]
#[command(name = "rdbp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo trajectories: trace CSV and summary JSON.
    Simulate(SimulateArgs),
    /// Equilibrium (τ, α) pairs of a two-population config.
    Equilibrium(EquilibriumArgs),
    /// Monte Carlo check of the BRS bound.
    Brs(BrsArgs),
    #[command(subcommand)]
    Transport(TransportCommand),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace CSV path; overrides `outputs.trace`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON path; overrides `outputs.summary`. Printed when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BrsArgs {
    /// Claim law as inline JSON or a path to a JSON file.
    #[arg(long)]
    dist: String,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    budget: f64,
    #[arg(long)]
    runs: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TransportCommand {
    /// Northwest-corner plan of a matrix CSV.
    Nw {
        #[arg(long)]
        input: PathBuf,
        /// Rescale the demand row to the supply total.
        #[arg(long)]
        normalize: bool,
        /// Flow CSV path; printed when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON sidecar with cost, Monge flag and sparsity.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    CheckMonge {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive optimum next to the northwest-corner cost.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        unit: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    QuantileCost {
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = DEFAULT_QUAD_POINTS)]
        quad_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank admissible demand laws by transport cost.
    Control {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn invalid(e: impl Display) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => write_atomic(p, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| Failure::Runtime(e.to_string())),
    }
}

fn parse_dist(arg: &str) -> Result<ClaimDistribution, Failure> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read_text(Path::new(arg))? };
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("claim law: {e}")))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::from_json(&read_text(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
    if let Some(horizon) = args.horizon {
        config.horizon = horizon;
    }
    config.validate()?;
    let mc = monte_carlo(&config.specs(), &config.initial_counts(), &config.sim_options(), config.runs, config.seed)
        .map_err(Failure::invalid)?;
    if let Some(trace) = args.out.or(config.outputs.trace) {
        emit(Some(&trace), &trace_csv(&mc.trajectories, config.subpopulations.len())?)?;
    }
    emit(args.summary.or(config.outputs.summary).as_deref(), &json_bytes(&mc.summary))
}

#[derive(Serialize)]
struct EquilibriumOutput {
    home: String,
    immigrant: String,
    solutions: Vec<EquilibriumSolution>,
    /// Derivative of the large-population ratio map at each solution.
    ratio_multipliers: Vec<Option<f64>>,
    dropped: Vec<DroppedRoot>,
}

fn equilibrium(args: EquilibriumArgs) -> Result<(), Failure> {
    let config = ExperimentConfig::from_json(&read_text(&args.config)?)?;
    let specs = config.specs();
    let [home, immigrant] = specs.as_slice() else {
        return Err(Failure::Validation(format!(
            "field `subpopulations`: equilibrium needs exactly two sub-populations, got {}",
            specs.len()
        )));
    };
    let report = solve_equilibrium(home, immigrant, &config.solver).map_err(Failure::invalid)?;
    let out = EquilibriumOutput {
        home: home.label.clone(),
        immigrant: immigrant.label.clone(),
        ratio_multipliers: report.solutions.iter().map(|s| linearized_ratio_multiplier(s, home, immigrant)).collect(),
        solutions: report.solutions,
        dropped: report.dropped,
    };
    emit(args.out.or(config.outputs.equilibrium).as_deref(), &json_bytes(&out))
}

fn brs(args: BrsArgs) -> Result<(), Failure> {
    let dist = parse_dist(&args.dist)?;
    let check = brs_check(&dist, args.n, args.budget, args.runs, args.seed).map_err(Failure::invalid)?;
    emit(args.out.as_deref(), &json_bytes(&check))
}

#[derive(Serialize)]
struct PlanSidecar {
    cost: f64,
    monge: bool,
    sparsity: usize,
}

#[derive(Serialize)]
struct OracleOutput {
    optimal_cost: f64,
    northwest_cost: f64,
    monge: bool,
}

fn transport(cmd: TransportCommand) -> Result<(), Failure> {
    match cmd {
        TransportCommand::Nw { input, normalize, out, summary } => {
            let (a, b, cost) = read_transport_csv(&read_text(&input)?)?;
            let balance = if normalize { Balance::NormalizeDemand } else { Balance::Strict };
            let plan = northwest_plan(&a, &b, balance).and_then(|p| p.priced(&cost)).map_err(Failure::invalid)?;
            emit(out.as_deref(), &flows_csv(&plan)?)?;
            if let Some(path) = summary {
                let sidecar = PlanSidecar {
                    cost: plan.total_cost.unwrap_or_default(),
                    monge: check_monge(&cost, 1e-12),
                    sparsity: plan.positive_entries(),
                };
                emit(Some(&path), &json_bytes(&sidecar))?;
            }
            Ok(())
        }
        TransportCommand::CheckMonge { input, tol, out } => {
            let (_, _, cost) = read_transport_csv(&read_text(&input)?)?;
            emit(out.as_deref(), &json_bytes(&serde_json::json!({ "monge": check_monge(&cost, tol) })))
        }
        TransportCommand::Oracle { input, unit, out } => {
            let (a, b, cost) = read_transport_csv(&read_text(&input)?)?;
            let optimal_cost = brute_force_optimal(&a, &b, &cost, unit).map_err(Failure::invalid)?;
            let plan = northwest_plan(&a, &b, Balance::Strict).and_then(|p| p.priced(&cost)).map_err(Failure::invalid)?;
            let result = OracleOutput {
                optimal_cost,
                northwest_cost: plan.total_cost.unwrap_or_default(),
                monge: check_monge(&cost, 1e-12),
            };
            emit(out.as_deref(), &json_bytes(&result))
        }
        TransportCommand::QuantileCost { src, dst, p, quad_points, out } => {
            let (src, dst) = (parse_dist(&src)?, parse_dist(&dst)?);
            let cost = quantile_coupling_cost(&src, &dst, p, quad_points).map_err(Failure::invalid)?;
            emit(out.as_deref(), &json_bytes(&serde_json::json!({ "cost": cost, "p": p })))
        }
        TransportCommand::Control { config, out } => {
            let c = ControlConfig::from_json(&read_text(&config)?)?;
            let (home, immigrant) = (c.home.spec(), c.immigrant.spec());
            let ranked = control_search(&home.claims, &c.grid, &home, &immigrant, c.p, &c.solver, c.quad_points)
                .map_err(Failure::invalid)?;
            emit(out.as_deref(), &json_bytes(&ranked))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Equilibrium(a) => equilibrium(a),
        Command::Brs(a) => brs(a),
        Command::Transport(t) => transport(t),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("rdbp: invalid input: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("rdbp: {msg}");
            ExitCode::from(1)
        }
    }
}
