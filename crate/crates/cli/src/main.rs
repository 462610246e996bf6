use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecodeflect::report::{parse_start_times, run, Command, RegimeChoice, ReportError, RunManifest};
use ecodeflect::scenario::{bennu_like_scenario, default_scenario, scenario_to_json, validate_scenario, Scenario, ScenarioError};
use ecodeflect::transcription::BoundedProfile;
use serde_json::json;

#[derive(Parser)]
#[command(name = "ecodeflect", version, about = "Earth-crossing object deflection studies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal continuous control at one or more start times.
    Solve(RunArgs),
    /// Warm-started solves over a start-time grid.
    Sweep(RunArgs),
    /// Minimum single impulse and post-flyby orbits.
    Impulsive(RunArgs),
    /// Miss distance against Moon anomaly inside the SOI.
    Lunar(RunArgs),
    /// Check a scenario file and print its normalized form.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Constant,
    Variable,
    Bounded,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON; built-in default otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "constant")]
    regime: RegimeArg,
    /// const:<f>, ramp:<a>:<b>; all three standard cases when omitted.
    #[arg(long)]
    profile: Option<String>,
    /// Start time in Tp, or a:step:b. Impulse lead time for `impulsive`.
    #[arg(long)]
    ti: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of control intervals N.
    #[arg(long, default_value_t = 60)]
    nodes: usize,
    #[arg(long, value_enum)]
    mass_loss: Option<OnOff>,
    /// Nominal miss for `lunar`, Earth radii.
    #[arg(long, default_value_t = 10.0)]
    miss_re: f64,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Run(#[from] ReportError),
}

impl CliError {
    fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Scenario(ScenarioError::Invalid(list)) => {
                json!({ "error": "invalid_scenario", "message": self.to_string(), "details": list })
            }
            CliError::Scenario(_) => json!({ "error": "invalid_scenario", "message": self.to_string() }),
            CliError::Run(e) => json!({ "error": e.kind(), "message": self.to_string() }),
        }
    }
}

fn manifest(command: Command, a: &RunArgs) -> Result<RunManifest, CliError> {
    let mut m = RunManifest::new(command, &a.out);
    m.scenario_path = a.scenario.clone();
    m.regime = match a.regime {
        RegimeArg::Constant => RegimeChoice::Constant,
        RegimeArg::Variable => RegimeChoice::Variable,
        RegimeArg::Bounded => RegimeChoice::Bounded,
        RegimeArg::All => RegimeChoice::All,
    };
    m.profile = a
        .profile
        .as_deref()
        .map(|p| p.parse::<BoundedProfile>().map_err(|e| ReportError::BadArgument(e.to_string())))
        .transpose()?;
    if let Some(ti) = &a.ti {
        m.start_times = parse_start_times(ti)?;
    }
    m.seed = a.seed;
    m.nodes = a.nodes;
    m.mass_loss = a.mass_loss.map(|v| matches!(v, OnOff::On));
    m.lunar_miss_re = a.miss_re;
    m.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Ok(m)
}

fn load(command: Command, path: Option<&PathBuf>) -> Result<Scenario, CliError> {
    Ok(match path {
        Some(p) => validate_scenario(p)?,
        None if command == Command::Impulsive => bennu_like_scenario(),
        None => default_scenario(),
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (command, args) = match cli.command {
        Cmd::Validate { scenario } => {
            let sc = validate_scenario(&scenario)?;
            println!("{}", scenario_to_json(&sc));
            return Ok(());
        }
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Impulsive(a) => (Command::Impulsive, a),
        Cmd::Lunar(a) => (Command::Lunar, a),
    };
    let m = manifest(command, &args)?;
    let sc = load(command, args.scenario.as_ref())?;
    let out = run(&m, &sc)?;
    eprintln!("wrote {} ({} failed)", m.out_dir.display(), out.failures);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
