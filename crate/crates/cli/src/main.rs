use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use persuasion_core::{BiasParam, GridSpec, UpdateProcedure};

use persuade_cli::commands::{self, ConstructOptions, Construction, Program};
use persuade_cli::error::{self, CliError, EXIT_REPRO_FAILED};
use persuade_cli::repro::{self, Suite};
use persuade_cli::schema::{
    parse_experiments, parse_strategy, read, strategy_to_value, Scenario, ScenarioFile,
};

/// Sequential persuasion of a receiver with anchored beliefs.
#[derive(Parser)]
#[command(name = "persuade", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the belief trajectory for a sequence of signals.
    Update(UpdateArgs),
    /// Evaluate a strategy file.
    Eval(EvalArgs),
    /// Solve a one-shot value program.
    Solve(SolveArgs),
    /// Build one of the constructive strategies and print it as a strategy file.
    Construct(ConstructArgs),
    /// Run a reproduction suite.
    Repro(ReproArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's bias parameter.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the scenario's update procedure (bayes, pbp-n, pbp-o, lp).
    #[arg(long)]
    procedure: Option<UpdateProcedure>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, CliError> {
        let mut s = ScenarioFile::load(&self.scenario)?.validate()?;
        if let Some(a) = self.alpha {
            s.alpha =
                BiasParam::new(a).map_err(|e| CliError::validation(format!("--alpha: {e}")))?;
        }
        if let Some(p) = self.procedure {
            s.procedure = p;
        }
        Ok(s)
    }
}

#[derive(Args)]
struct UpdateArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// One experiment, or an array with one experiment per period.
    #[arg(long)]
    experiment: PathBuf,
    /// Comma-separated signal labels.
    #[arg(long, default_value = "")]
    signals: String,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long)]
    strategy: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Mesh subdivisions per simplex edge.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Skip bracketing of best-response boundaries.
    #[arg(long)]
    no_refine: bool,
}

impl GridArgs {
    fn spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.grid, !self.no_refine).map_err(|e| CliError::validation(e.to_string()))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long, value_enum)]
    program: Program,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long, value_enum)]
    kind: Construction,
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Comma-separated target belief (pbpo-geometric).
    #[arg(long, value_delimiter = ',')]
    target: Option<Vec<f64>>,
    /// Stretch factor (pbpo-geometric); the maximal admissible one by default.
    #[arg(long)]
    gamma: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    name: Suite,
    /// CSV file for the suite's data series.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(CliError::io)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = writer(out)?;
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    writeln!(w, "{text}").map_err(CliError::io)?;
    w.flush().map_err(CliError::io)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Update(args) => {
            let scenario = args.common.load()?;
            let experiments = parse_experiments(&read(&args.experiment)?)?;
            let signals: Vec<String> = args
                .signals
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            let mut w = writer(args.common.out.as_deref())?;
            commands::update(&scenario, &experiments, &signals, &mut w)?;
            w.flush().map_err(CliError::io)
        }
        Command::Eval(args) => {
            let scenario = args.common.load()?;
            let strategy = parse_strategy(&read(&args.strategy)?)?;
            let report = commands::eval(&scenario, &strategy, commands::limits_from_env()?)?;
            emit_json(args.common.out.as_deref(), &report)
        }
        Command::Solve(args) => {
            let scenario = args.common.load()?;
            let report = commands::solve(&scenario, args.program, args.grid.spec()?)?;
            emit_json(args.common.out.as_deref(), &report)
        }
        Command::Construct(args) => {
            let scenario = args.common.load()?;
            let opts = ConstructOptions {
                periods: args.periods,
                epsilon: args.epsilon,
                target: args.target,
                gamma: args.gamma,
                grid: args.grid.spec()?,
            };
            let node = commands::construct(&scenario, args.kind, &opts)?;
            emit_json(args.common.out.as_deref(), &strategy_to_value(&node))
        }
        Command::Repro(args) => {
            let report = repro::run(args.name)?;
            if let Some(path) = &args.out {
                report.write_csv(File::create(path).map_err(CliError::io)?)?;
            }
            let mut w = writer(None)?;
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                writeln!(w, "{status} {}: {}", c.name, c.detail).map_err(CliError::io)?;
            }
            w.flush().map_err(CliError::io)?;
            match report.first_failure() {
                Some(c) => Err(CliError::new(
                    EXIT_REPRO_FAILED,
                    format!("check failed: {}", c.name),
                )),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                error::EXIT_VALIDATION
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
