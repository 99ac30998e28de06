use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netulln_harness::{execute, render_report, HarnessError, Options, RunManifest, Verb};

#[derive(Parser)]
#[command(name = "netulln", version, about = "Uniform LLN experiments for network-dependent data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Treat WAIVED as FAIL.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the dependence, sparsity and boundedness assumptions.
    Diagnose(RunArgs),
    /// Sup-deviation experiment over the n grid.
    VerifyUlln(RunArgs),
    /// Maximal-moment growth and block moment checks.
    VerifyMaximal(RunArgs),
    /// M and GMM consistency tables.
    Estimate(RunArgs),
    /// Every stage with every configured assertion.
    FullSuite(RunArgs),
    /// Print the record of a finished run.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(verb: Verb, a: RunArgs) -> Result<i32, HarnessError> {
    let opts = Options { verb, config: a.config, seed: a.seed, out: a.out, threads: a.threads, strict: a.strict };
    let m = execute(&opts)?;
    print!("{}", render_report(&m));
    Ok(m.exit_code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Diagnose(a) => run(Verb::Diagnose, a),
        Command::VerifyUlln(a) => run(Verb::VerifyUlln, a),
        Command::VerifyMaximal(a) => run(Verb::VerifyMaximal, a),
        Command::Estimate(a) => run(Verb::Estimate, a),
        Command::FullSuite(a) => run(Verb::FullSuite, a),
        Command::Report { out } => RunManifest::load(&out).map(|m| {
            print!("{}", render_report(&m));
            m.exit_code
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
