use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crossfix::cli::{self, Console, ExitStatus, MetricsOptions, RunFlags, Services};
use crossfix::metrics::CiMethod;

#[derive(Parser)]
#[command(
    name = "crossfix",
    version,
    about = "Three-phase multi-provider bug analysis with arbitration"
)]
struct Args {
    /// Configuration file.
    #[arg(long, global = true, default_value = "config.yaml")]
    config: PathBuf,

    /// Skip the connectivity and token preflight before `run`.
    #[arg(long, global = true)]
    skip_check: bool,

    /// Answer every call from `<phase>_<role>.md` files in this directory.
    #[arg(long, global = true, value_name = "DIR")]
    replay: Option<PathBuf>,

    /// Write per-run metrics rows to this CSV file.
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ci {
    Wald,
    Wilson,
}

#[derive(Subcommand)]
enum Command {
    /// Scaffold config, prompts, bug.txt and codebase/ in DIR.
    Init {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
    /// Check provider connectivity and token headroom.
    Check {
        #[arg(long)]
        codebase: Option<PathBuf>,
    },
    /// Run all three phases and write a new results directory.
    Run {
        #[arg(long, default_value = "bug.txt")]
        bug: PathBuf,
        #[arg(long, default_value = "codebase")]
        codebase: PathBuf,
    },
    /// Compute acceptance and contribution statistics from definitive-fixes documents.
    Metrics {
        /// Files, directories or glob patterns.
        #[arg(required = true)]
        inputs: Vec<String>,
        /// YAML mapping of run id to group label.
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Print JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
        #[arg(long, value_enum, default_value = "wald")]
        ci: Ci,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let mut console = Console {
        out: &mut out,
        err: &mut err,
    };

    let services = || match Services::system() {
        Ok(s) => Some(s),
        Err(e) => {
            eprintln!("error: {e}");
            None
        }
    };

    let status = match args.command {
        Command::Init { dir } => cli::cmd_init(&dir, &mut console),
        Command::Check { codebase } => match services() {
            Some(s) => {
                cli::cmd_check(
                    &args.config,
                    codebase.as_deref(),
                    args.replay.as_deref(),
                    &s,
                    &mut console,
                )
                .1
            }
            None => ExitStatus::InputError,
        },
        Command::Run { bug, codebase } => match services() {
            Some(s) => {
                let flags = RunFlags {
                    skip_check: args.skip_check,
                    replay: args.replay,
                };
                cli::cmd_run(&args.config, &bug, &codebase, &flags, &s, &mut console)
            }
            None => ExitStatus::InputError,
        },
        Command::Metrics {
            inputs,
            groups,
            json,
            ci,
        } => {
            let opts = MetricsOptions {
                groups,
                csv: args.csv,
                json,
                ci: match ci {
                    Ci::Wald => CiMethod::Wald,
                    Ci::Wilson => CiMethod::Wilson,
                },
            };
            cli::cmd_metrics(&inputs, &opts, &mut console)
        }
    };
    ExitCode::from(status.code() as u8)
}
