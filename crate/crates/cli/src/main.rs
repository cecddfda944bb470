use std::path::PathBuf;
use std::process::ExitCode;

use agvsb::commands::{self, Options, Report};
use agvsb::output::Format;
use agvsb::CliError;
use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "agvsb",
    version,
    about = "Multi-AGV warehouse simulation benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Replace the scenario's top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Concurrent simulations during a sweep [default: available cores].
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Directory for every output file.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Table format: csv or json.
    #[arg(long, global = true, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the base scenario once; writes results and trace.csv.
    Simulate { spec: PathBuf },
    /// Run every sweep point under every rule; writes results and errors.
    Sweep { spec: PathBuf },
    /// Summarise a results CSV and chart every KPI.
    Compare { results: PathBuf },
    /// Train the Q-network; writes curves, evaluation and qnet.params.
    Train { spec: PathBuf },
    /// Count AGV collisions in a trace CSV.
    Replay { trace: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<Report> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let opts = Options {
        out_dir: cli.out_dir,
        format: cli.format,
        jobs,
        seed: cli.seed,
    };
    std::fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("cannot create {}", opts.out_dir.display()))?;
    let report = match &cli.command {
        Command::Simulate { spec } => commands::simulate(spec, &opts),
        Command::Sweep { spec } => commands::sweep(spec, &opts),
        Command::Compare { results } => commands::compare(results, &opts),
        Command::Train { spec } => commands::train(spec, &opts),
        Command::Replay { trace } => commands::replay(trace, &opts),
    }?;
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(report) => {
            println!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<CliError>()
                .map_or(1, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}
