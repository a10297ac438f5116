use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scenery::experiment::{Command, Run, RunError};

/// Scaling scenery experiments on shift-invariant measures.
#[derive(Parser)]
#[command(name = "scenery", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Check model invariants.
    Validate,
    /// Draw trajectories.
    Sample,
    /// Convergence of scenery distributions towards Q.
    VerifyUsm,
    /// Exact, Monte Carlo and empirical values of Q on a battery of sets.
    VerifyQ,
    /// Central limit statistics for one generating set.
    Clt,
    /// Gibbs equivalence audit of conditional measures.
    GibbsBounds,
    /// Separate scenery limits of a non-ergodic mixture.
    DemoNonergodic,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Validate => Command::Validate,
            Cmd::Sample => Command::Sample,
            Cmd::VerifyUsm => Command::VerifyUsm,
            Cmd::VerifyQ => Command::VerifyQ,
            Cmd::Clt => Command::Clt,
            Cmd::GibbsBounds => Command::GibbsBounds,
            Cmd::DemoNonergodic => Command::DemoNonergodic,
        }
    }
}

fn run(cli: &Cli) -> Result<i32, RunError> {
    let path = cli.config.as_ref().ok_or_else(|| RunError::Config("--config is required".into()))?;
    let run = Run::from_file(path, cli.seed, &cli.out)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(RunError::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| RunError::Io(e.to_string()))?;
    let outcome = pool.install(|| run.execute(cli.command.into()))?;
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
