//! `loopsoup`: runs identity checks, Monte Carlo checks and samplers for
//! loop measures, loop soups and Gaussian free fields, writing JSON lines.

mod config;
mod fixtures;
mod mc;
mod report;
mod sample;
mod suite;
mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use report::{exit_code, write_reports, CheckReport, Status};
use sample::{SampleJob, What};
use suite::{run_suites, Context, Suite};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, fixture or request; exit code 2.
    Input(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "loopsoup",
    version,
    about = "Loop measure identities, loop soups and Gaussian free fields"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write JSON lines here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Matrix JSON file; repeatable, replaces the configured fixtures.
    #[arg(long, global = true)]
    fixture: Vec<PathBuf>,
    /// Graph JSON file; repeatable, replaces the configured graphs.
    #[arg(long, global = true)]
    graph: Vec<PathBuf>,
    /// Record per-suite wall time in reports (makes output non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deterministic identity checks.
    Verify,
    /// Randomized checks.
    Mc {
        /// Overrides the configured seed and `LOOPSOUP_SEED`.
        #[arg(long)]
        seed: Option<u64>,
        /// Samples per suite.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Print the effective configuration as TOML.
    Config,
    /// Stream samples as JSON lines.
    Sample {
        #[arg(long, value_enum)]
        what: What,
        /// Number of samples.
        #[arg(short, long)]
        n: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if !cli.fixture.is_empty() {
        config.fixtures = cli.fixture.clone();
    }
    if !cli.graph.is_empty() {
        config.graphs = cli.graph.clone();
    }
    let out = cli.out.clone().or_else(|| config.out.clone());
    match cli.command {
        Command::Verify => {
            let ctx = context(config, None)?;
            Ok(check(&verify::suites(), &ctx, "verify", out.as_deref(), cli.timings)?)
        }
        Command::Mc { seed, samples } => {
            if let Some(n) = samples {
                config.samples = n;
            }
            config.validate()?;
            let ctx = context(config, seed)?;
            Ok(check(&mc::suites(), &ctx, "mc", out.as_deref(), cli.timings)?)
        }
        Command::Config => {
            config.out = out;
            config.seed = Some(config.resolve_seed(None)?);
            print!("{}", config.to_toml());
            Ok(0)
        }
        Command::Sample { what, n, seed } => {
            let seed = config.resolve_seed(seed)?;
            let weights = match config.fixtures.as_slice() {
                [] if what == What::Soup => fixtures::one_point(),
                [] => fixtures::two_state(),
                [path] => fixtures::load_fixture(path)?.weights,
                _ => return Err(CliError::Input("sample takes a single fixture".into())),
            };
            let graph = match config.graphs.as_slice() {
                [] => loopsoup::SimpleGraph::complete(4),
                [path] => fixtures::load_graph(path)?.graph,
                _ => return Err(CliError::Input("sample takes a single graph".into())),
            };
            let job = SampleJob {
                what,
                n,
                seed,
                intensity: config.intensity,
                weights,
                graph,
            };
            with_output(out.as_deref(), |w| job.run(w))?;
            Ok(0)
        }
    }
}

fn context(config: RunConfig, seed: Option<u64>) -> Result<Context, CliError> {
    Ok(Context {
        seed: config.resolve_seed(seed)?,
        fixtures: fixtures::load_fixtures(&config.fixtures)?,
        graphs: fixtures::load_graphs(&config.graphs)?,
        config,
    })
}

fn with_output<T>(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> Result<T, CliError>,
) -> Result<T, CliError> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Input(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            let value = write(&mut w)?;
            w.flush()?;
            Ok(value)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let value = write(&mut w)?;
            w.flush()?;
            Ok(value)
        }
    }
}

fn check(suites: &[Suite], ctx: &Context, name: &str, out: Option<&Path>, timings: bool) -> Result<u8, CliError> {
    let reports = run_suites(suites, ctx, timings);
    with_output(out, |w| Ok(write_reports(w, &reports)?))?;
    summarize(name, suites, &reports);
    Ok(exit_code(&reports))
}

fn summarize(name: &str, suites: &[Suite], reports: &[CheckReport]) {
    for s in suites {
        let mine: Vec<_> = reports.iter().filter(|r| r.check == s.id).collect();
        let count = |st| mine.iter().filter(|r| r.status == st).count();
        let verdict = if count(Status::Fail) > 0 {
            "FAIL"
        } else if count(Status::Inconclusive) > 0 {
            "INCONCLUSIVE"
        } else {
            "PASS"
        };
        eprintln!("{verdict:<12} {:<26} {} checks", s.id, mine.len());
        for r in mine.iter().filter(|r| r.status == Status::Fail) {
            eprintln!("    error {:e} > tolerance {:e}: {}", r.error, r.tolerance, r.lhs);
        }
    }
    let failed = reports.iter().filter(|r| r.status == Status::Fail).count();
    eprintln!(
        "{name}: {} suites, {} checks, {failed} failed",
        suites.len(),
        reports.len()
    );
}
