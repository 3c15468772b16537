use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use jointsparse::harness::{
    bounds_report, oracle_check, parse_config, render_report, run_sweep, write_rows, ExperimentConfig, OutputFormat,
    SweepKind,
};
use jointsparse::Error;

#[derive(Parser)]
#[command(name = "jointsparse", version, about = "Monte Carlo harness for joint sparse support recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recovery versus measurements per node.
    SweepM(Common),
    /// Recovery versus node count.
    SweepL(Common),
    /// Recovery versus ring neighborhood size.
    SweepNeighborhood(Common),
    /// S-OMP against OMP on the summed MAC output.
    MacCompare(Common),
    /// Analytical bounds as a JSON object.
    Bounds(Common),
    /// Greedy estimators against the exhaustive least-squares oracle.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            key: "--config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?,
        None => String::new(),
    };
    let mut config = parse_config(&text)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    if let Some(format) = common.format {
        config.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    config.validate().map_err(|(key, message)| Error::Config {
        line: 0,
        key: key.into(),
        message,
    })?;
    Ok(config)
}

fn output(config: &ExperimentConfig) -> Result<Box<dyn Write>, Error> {
    Ok(match &config.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Error::Runtime(format!("cannot create {}: {e}", path.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn json_out<T: serde::Serialize>(config: &ExperimentConfig, value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(e.to_string()))?;
    let mut out = output(config)?;
    writeln!(out, "{text}").map_err(|e| Error::Runtime(e.to_string()))?;
    out.flush().map_err(|e| Error::Runtime(e.to_string()))
}

fn run(command: Command) -> Result<(), Error> {
    let (kind, common) = match command {
        Command::SweepM(c) => (Some(SweepKind::M), c),
        Command::SweepL(c) => (Some(SweepKind::L), c),
        Command::SweepNeighborhood(c) => (Some(SweepKind::Neighborhood), c),
        Command::MacCompare(c) => (Some(SweepKind::MacCompare), c),
        Command::Bounds(c) => {
            let config = load(&c)?;
            let text = render_report(&bounds_report(&config)?)?;
            let mut out = output(&config)?;
            out.write_all(text.as_bytes()).map_err(|e| Error::Runtime(e.to_string()))?;
            return out.flush().map_err(|e| Error::Runtime(e.to_string()));
        }
        Command::OracleCheck(c) => {
            let config = load(&c)?;
            return json_out(&config, &oracle_check(&config)?);
        }
    };
    let config = load(&common)?;
    let rows = run_sweep(&config, kind.expect("sweep subcommand"))?;
    let mut out = output(&config)?;
    write_rows(&rows, config.format, &mut out)?;
    out.flush().map_err(|e| Error::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
