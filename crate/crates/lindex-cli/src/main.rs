use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lindex::cli::{execute, Invocation, USAGE_EXIT};
use lindex::exec::{set_mode, ExecMode};

/// Certify L-index bounds, criteria and growth estimates for analytic functions in the unit ball.
#[derive(Parser, Debug)]
#[command(name = "lindex", version)]
struct Args {
    /// index | dominate | criterion | growth | lclass | pde
    command: String,
    /// TOML run configuration
    config: PathBuf,
    /// Override a config entry, e.g. `--set criterion.p0=12`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads; 1 runs sequentially
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json, timing.json and curve.csv
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if args.jobs == Some(1) {
        set_mode(ExecMode::Sequential);
    }
    let (code, summary) = execute(&Invocation {
        command: args.command,
        config: args.config,
        sets: args.sets,
        jobs: args.jobs,
        seed: args.seed,
        out: args.out,
    });
    if code == USAGE_EXIT {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    ExitCode::from(code as u8)
}
