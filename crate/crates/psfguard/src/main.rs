use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psfguard::catalog;
use psfguard::runner::{run_to_dir, Mode, Outcome, RunError, RunOptions};
use psfguard::scenario_file::{load_scenario, ScenarioFile};
use psfguard::server::{serve, ServeOptions};
use psfguard::telemetry::summarize_file;
use psfguard_core::sim::EngineOptions;

/// Exit code for unreadable or invalid input.
const EXIT_INVALID: u8 = 2;
/// Exit code for an episode that could not run to the end.
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Full-body manipulator collision avoidance with Poisson safety functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one headless episode; exit 0 when it had no violations.
    Run(RunArgs),
    /// Run a scenario indefinitely as a live WebSocket session.
    Serve(ServeArgs),
    /// Aggregate a telemetry file into a summary JSON.
    Summarize {
        telemetry: PathBuf,
        /// Write here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the closed-loop suite as scenario files.
    Catalog {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Output directory (default: out/<scenario name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run this many ticks instead of duration × rate.
    #[arg(long)]
    ticks: Option<usize>,
    /// Apply the nominal command directly, for paired baselines.
    #[arg(long)]
    unfiltered: bool,
    /// Dump the field and its grid every K ticks.
    #[arg(long, value_name = "K")]
    dump_fields: Option<usize>,
    /// Single-threaded lockstep (the default).
    #[arg(long, conflicts_with = "concurrent")]
    deterministic: bool,
    /// Field pipeline in its own thread, control loop at wall-clock pace.
    #[arg(long)]
    concurrent: bool,
    /// Record zero for every timing column, making output byte-identical.
    #[arg(long)]
    null_clock: bool,
}

#[derive(Args)]
struct ServeArgs {
    scenario: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Directory with the browser client, served at /.
    #[arg(long)]
    ui: Option<PathBuf>,
    /// Also write the session's telemetry to this JSONL file.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    #[arg(long)]
    unfiltered: bool,
}

fn engine_options(unfiltered: bool) -> EngineOptions {
    if unfiltered {
        EngineOptions::unfiltered()
    } else {
        EngineOptions::default()
    }
}

fn run(args: RunArgs) -> u8 {
    let mut scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let options = RunOptions {
        engine: engine_options(args.unfiltered),
        ticks: args.ticks,
        dump_every: args.dump_fields,
        mode: if args.concurrent {
            Mode::Concurrent
        } else {
            Mode::Lockstep
        },
        null_clock: args.null_clock,
    };
    match run_to_dir(&scenario, &options, &out) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summaries serialize")
            );
            if let Some(reason) = &summary.aborted {
                eprintln!("aborted: {reason}");
            }
            Outcome::of(&summary).exit_code()
        }
        Err(e @ RunError::Setup(_)) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            EXIT_INVALID
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ABORT
        }
    }
}

fn serve_cmd(args: ServeArgs) -> u8 {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let options = ServeOptions {
        engine: engine_options(args.unfiltered),
        telemetry: args.telemetry,
        ui_dir: args.ui,
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ABORT;
        }
    };
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        tokio::select! {
            r = serve(listener, scenario, options) => r,
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ABORT
        }
    }
}

fn summarize(telemetry: PathBuf, out: Option<PathBuf>) -> u8 {
    let summary = match summarize_file(&telemetry) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", telemetry.display());
            return EXIT_INVALID;
        }
    };
    if summary.corrupt_lines > 0 {
        eprintln!("warning: skipped {} corrupt line(s)", summary.corrupt_lines);
    }
    let text = serde_json::to_string_pretty(&summary).expect("summaries serialize");
    match out {
        Some(path) => match std::fs::write(&path, text + "\n") {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                EXIT_ABORT
            }
        },
        None => {
            println!("{text}");
            0
        }
    }
}

fn export_catalog(out: PathBuf) -> u8 {
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: {}: {e}", out.display());
        return EXIT_ABORT;
    }
    for s in catalog::static_suite()
        .into_iter()
        .chain(catalog::dynamic_suite())
    {
        let path = out.join(format!("{}.json", s.name));
        let file = ScenarioFile::from_scenario(&s).expect("catalog scenarios use built-in robots");
        if let Err(e) = std::fs::write(&path, file.to_json() + "\n") {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_ABORT;
        }
        println!("{}", path.display());
    }
    0
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn,psfguard=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let code = match Cli::parse().command {
        Cmd::Run(args) => run(args),
        Cmd::Serve(args) => serve_cmd(args),
        Cmd::Summarize { telemetry, out } => summarize(telemetry, out),
        Cmd::Catalog { out } => export_catalog(out),
    };
    ExitCode::from(code)
}
