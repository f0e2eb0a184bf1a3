use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsvgd::harness::{load_config, run_experiment};

#[derive(Parser)]
#[command(name = "gsvgd", version, about = "SVGD and Grassmann SVGD experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant and oracle checks on small instances.
    Check,
    /// Print the version.
    Version,
}

fn init_threads() {
    if let Some(n) = std::env::var("GSVGD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    init_threads();
    match cli.command {
        Command::Version => {
            println!("{}", gsvgd::VERSION);
            ExitCode::SUCCESS
        }
        Command::Check => {
            let results = gsvgd::check::run_all();
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Run { config, out, seed } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(gsvgd::Error::Io(e)) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            match run_experiment(&cfg) {
                Ok(outcome) => {
                    for d in &outcome.summary.divergences {
                        eprintln!("rep {} failed: {}", d.rep, d.error);
                    }
                    for (name, iv) in &outcome.summary.metrics {
                        println!("{name}: {:.6} [{:.6}, {:.6}]", iv.mean, iv.ci_low, iv.ci_high);
                    }
                    println!("wrote {}", outcome.output.display());
                    if outcome.all_diverged() {
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
