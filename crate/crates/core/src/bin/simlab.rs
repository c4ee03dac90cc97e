use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use simlab::commands::{load_config, run_command, Command, ErrorLog};
use simlab::SimError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Simulate,
    Sweep,
    EulerCheck,
    Verify,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Sweep => Command::Sweep,
            Sub::EulerCheck => Command::EulerCheck,
            Sub::Verify => Command::Verify,
        }
    }
}

/// Stochastic hyperviscous Navier-Stokes laboratory. The configuration file
/// is the single source of truth; flags only pick the command and override
/// the seed and output directory.
#[derive(Debug, Parser)]
#[command(name = "simlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicas and ensembles (results do not depend on it).
    #[arg(long)]
    parallel: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = Command::from(cli.command);
    let fail = |err: SimError, dir: Option<&std::path::Path>| {
        eprint!("{}", ErrorLog::new(command.name(), &err).emit(dir));
        ExitCode::from(2)
    };
    let cfg = match load_config(&cli.config, cli.seed, cli.out.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(e, cli.out.as_deref()),
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let threads = cli.parallel.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let err = SimError::InvalidParameter {
                name: "parallel",
                reason: e.to_string(),
            };
            return fail(err, Some(&cfg.output_dir));
        }
    };
    match pool.install(|| run_command(command, &cfg)) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!(
                    "{} {}: {:e} (limit {:e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit
                );
            }
            println!("{} artifacts in {}", outcome.manifest.artifacts.len() + 1, cfg.output_dir.display());
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(e, Some(&cfg.output_dir)),
    }
}
