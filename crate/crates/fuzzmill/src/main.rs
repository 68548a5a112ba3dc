use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand};

use fuzzmill::cli::{self, SimulateOverrides};
use fuzzmill::config::Config;
use fuzzmill::report::ReportFormat;

#[derive(Parser)]
#[command(name = "fuzzmill", version, about = "Continuous-fuzzing pipeline orchestrator")]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "fuzzmill.toml")]
    config: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Walk recent history backwards, fingerprint every target per commit,
    /// and report identical-target proportions.
    Scan {
        /// How many of the most recent commits to process.
        #[arg(long, default_value_t = 50)]
        commits: usize,
    },
    /// Continuous pipeline over the configured commit stream:
    /// build -> fingerprint/select -> minimize -> fuzz -> merge -> report.
    Run,
    /// Duration-versus-effectiveness sweep on the mock backend
    /// (virtual clock; an 8-hour point costs milliseconds).
    Simulate {
        /// Campaign durations in seconds, comma separated.
        #[arg(long, value_delimiter = ',')]
        durations: Option<Vec<u64>>,
        /// Trials per (library, duration) cell.
        #[arg(long)]
        trials: Option<u32>,
        /// Simulated commits per trial chain.
        #[arg(long)]
        commits_per_trial: Option<u32>,
    },
    /// Re-emit a stored JSON report in another format.
    Report {
        /// Stored report (sweep, selection stats, or savings JSON).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
}

static STOP: AtomicBool = AtomicBool::new(false);

extern "C" fn on_signal(_sig: libc::c_int) {
    STOP.store(true, Ordering::Relaxed);
}

fn install_signal_handlers() {
    let handler = on_signal as extern "C" fn(libc::c_int) as usize;
    unsafe {
        libc::signal(libc::SIGINT, handler);
        libc::signal(libc::SIGTERM, handler);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Cli::parse();

    let mut config = match Config::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("fuzzmill: {e}");
            return ExitCode::from(cli::EXIT_FATAL as u8);
        }
    };
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = if out.is_relative() {
            std::env::current_dir().unwrap_or_default().join(out)
        } else {
            out
        };
    }

    let result = match args.command {
        Command::Scan { commits } => cli::cmd_scan(&config, commits),
        Command::Run => {
            install_signal_handlers();
            cli::cmd_run(&config, &STOP)
        }
        Command::Simulate {
            durations,
            trials,
            commits_per_trial,
        } => cli::cmd_simulate(
            &config,
            &SimulateOverrides {
                durations_s: durations,
                trials,
                commits_per_trial,
            },
        ),
        Command::Report {
            input,
            format,
            report_out,
        } => {
            let out = report_out.unwrap_or_else(|| config.output_dir.clone());
            cli::cmd_report(&input, format, &out)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("fuzzmill: {e}");
            ExitCode::from(cli::EXIT_FATAL as u8)
        }
    }
}
