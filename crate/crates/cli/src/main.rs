//! `cccp`: solve and validate chance-constrained problems, and run the
//! beamforming experiments.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cccp::beamform::{run_experiment, run_joint_vs_individual, BeamformScenario, ExperimentConfig};
use cccp::files::{
    from_json, solve_problem, to_json, Problem, ProblemFile, ResultFile, SolveMethod, SolveOptions,
    TOOL_VERSION,
};
use cccp::linalg::CVec;
use cccp::socp::Status;
use cccp::validate::{estimate_individual, estimate_joint, ValidationReport};
use cccp::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

const EXIT_SCHEMA: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "cccp", version, about = "Chance-constrained optimization over complex variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the result document.
    Solve(SolveArgs),
    /// Estimate constraint satisfaction of a solution by Monte Carlo.
    Validate(ValidateArgs),
    /// Run a beamforming experiment and write one CSV per INR setting.
    Beamform(BeamformArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, default_value = "individual", value_parser = parse_method)]
    method: SolveMethod,
    /// Approximation points of the joint bound programs.
    #[arg(long, default_value_t = cccp::reformulate::DEFAULT_APPROX_POINTS)]
    tangents: usize,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Result path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Attach a Monte-Carlo validation with this many samples.
    #[arg(long)]
    validate: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args)]
struct ValidateArgs {
    file: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Fig1,
    Fig2,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
        })
    }
}

#[derive(clap::Args)]
struct BeamformArgs {
    /// Experiment configuration; the built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Experiment,
    #[arg(long)]
    out: PathBuf,
    /// Override the number of runs.
    #[arg(long)]
    runs: Option<usize>,
}

fn parse_method(s: &str) -> Result<SolveMethod, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = SolveMethod::ALL.iter().map(|m| m.as_str()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(s) => status_code(s),
            _ => EXIT_SCHEMA,
        };
        Failure { code, message: e.to_string() }
    }
}

fn fail(code: u8, message: impl fmt::Display) -> Failure {
    Failure { code, message: message.to_string() }
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Optimal => 0,
        Status::PrimalInfeasible | Status::DualInfeasible => EXIT_INFEASIBLE,
        Status::MaxIterations | Status::NumericalError => EXIT_SOLVER,
    }
}

/// Prints a line to standard output; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(fail(EXIT_SCHEMA, e)),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_SCHEMA, format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| fail(EXIT_SCHEMA, format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// `CCCP_SEED`, when set, replaces seeds from configuration files and
/// defaults; an explicit `--seed` still wins.
fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("CCCP_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| fail(EXIT_SCHEMA, format!("CCCP_SEED: not an unsigned integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn seed_or_default(flag: Option<u64>) -> Result<u64, Failure> {
    Ok(match flag {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    })
}

fn validate_at(problem: &Problem, z: &CVec, samples: usize, seed: u64) -> Result<ValidationReport, Failure> {
    if z.len() != problem.dim() {
        return Err(fail(
            EXIT_SCHEMA,
            format!("solution has dimension {}, problem has {}", z.len(), problem.dim()),
        ));
    }
    Ok(match problem {
        Problem::Individual(p) => estimate_individual(p, z, samples, seed)?,
        Problem::Joint(p) => estimate_joint(p, z, samples, seed)?,
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<u8, Failure> {
    let problem = ProblemFile::parse(&read(&args.file)?)?;
    let opts = SolveOptions { points: args.tangents, grid_step: args.grid_step, ..Default::default() };
    let mut result = solve_problem(&problem, args.method, &opts)?;
    if let (Some(samples), Some(sol)) = (args.validate, &result.solution) {
        let seed = seed_or_default(args.seed)?;
        let z = sol.z.to_cvec()?;
        result.validation = Some(validate_at(&problem, &z, samples, seed)?);
        result.seed = Some(seed);
    }
    let json = result.to_json()?;
    match &args.out {
        Some(path) => write_atomic(path, format!("{json}\n").as_bytes())?,
        None => emit(&json)?,
    }
    if result.status != Status::Optimal {
        eprintln!("status: {:?}", result.status);
    }
    Ok(status_code(result.status))
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8, Failure> {
    let problem = ProblemFile::parse(&read(&args.file)?)?;
    let result = ResultFile::parse(&read(&args.solution)?)?;
    let Some(sol) = &result.solution else {
        return Err(fail(EXIT_SCHEMA, "solution: result file carries no solution"));
    };
    let z = sol.z.to_cvec()?;
    let report = validate_at(&problem, &z, args.samples, seed_or_default(args.seed)?)?;
    emit(&to_json(&report)?)?;
    Ok(if report.pass() { 0 } else { EXIT_INFEASIBLE })
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    inr_db: Option<f64>,
    scenario: BeamformScenario,
}

#[derive(Serialize)]
struct Manifest {
    tool_version: &'static str,
    experiment: String,
    seed: u64,
    files: Vec<ManifestEntry>,
}

fn csv_bytes(result: &cccp::beamform::ExperimentResult) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| fail(EXIT_SCHEMA, e);
    for s in &result.stats {
        w.serialize(s).map_err(io)?;
    }
    w.into_inner().map_err(|e| fail(EXIT_SCHEMA, e.error()))
}

fn cmd_beamform(args: &BeamformArgs) -> Result<u8, Failure> {
    let mut config = match &args.config {
        Some(path) => from_json::<ExperimentConfig>(&read(path)?)?,
        None => match args.experiment {
            Experiment::Fig1 => ExperimentConfig::fig1(),
            Experiment::Fig2 => ExperimentConfig::fig2(),
        },
    };
    if let Some(runs) = args.runs {
        config.scenario.runs = runs;
    }
    if let Some(seed) = env_seed()? {
        config.scenario.seed = seed;
    }
    let scenarios = config.scenarios()?;
    fs::create_dir_all(&args.out).map_err(|e| fail(EXIT_SCHEMA, format!("{}: {e}", args.out.display())))?;
    let mut files = Vec::new();
    for (inr, sc) in scenarios {
        let result = match args.experiment {
            Experiment::Fig1 => run_experiment(&sc)?,
            Experiment::Fig2 => run_joint_vs_individual(&sc)?,
        };
        let name = match inr {
            Some(inr) => format!("{}_inr{inr}.csv", args.experiment),
            None => format!("{}.csv", args.experiment),
        };
        write_atomic(&args.out.join(&name), &csv_bytes(&result)?)?;
        emit(&args.out.join(&name).display().to_string())?;
        files.push(ManifestEntry { file: name, inr_db: inr, scenario: sc });
    }
    let manifest = Manifest {
        tool_version: TOOL_VERSION,
        experiment: args.experiment.to_string(),
        seed: config.scenario.seed,
        files,
    };
    write_atomic(&args.out.join("manifest.json"), format!("{}\n", to_json(&manifest)?).as_bytes())?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Beamform(a) => cmd_beamform(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
