use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use girsanov_bsde::cli::{run, RunOptions};

#[derive(Parser)]
#[command(version, about = "Run a configured experiment and write JSON/CSV artifacts")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the command described by a JSON configuration file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output` in the file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides `seed` in the file).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Cmd::Run { config, out, seed, threads } = Args::parse().command;
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&config, &RunOptions { out, seed }) {
        Ok(v) => {
            for c in &v.checks {
                println!("{} {}: {:.4e} (bound {:.4e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
            }
            println!("{}: {}", v.command, if v.pass { "pass" } else { "fail" });
            if v.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
