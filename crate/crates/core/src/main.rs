use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use waveop_lab::cli_io::{run, RunConfig, Verb};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    PhaseShifts,
    Smatrix,
    Waveop,
    Remainder,
    Levinson,
    VerifyAll,
}

impl From<Command> for Verb {
    fn from(c: Command) -> Self {
        match c {
            Command::PhaseShifts => Verb::PhaseShifts,
            Command::Smatrix => Verb::Smatrix,
            Command::Waveop => Verb::Waveop,
            Command::Remainder => Verb::Remainder,
            Command::Levinson => Verb::Levinson,
            Command::VerifyAll => Verb::VerifyAll,
        }
    }
}

/// Partial-wave checks of explicit wave-operator formulas.
#[derive(Debug, Parser)]
#[command(name = "waveop-lab", version)]
struct Cli {
    #[arg(value_enum)]
    verb: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads {n}: {e}");
            return ExitCode::from(1);
        }
    }
    let verb = Verb::from(cli.verb);
    let cfg = match RunConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let started = std::time::Instant::now();
    match run(verb, &cfg, cli.out.as_deref()) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for o in &report.outcomes {
                println!("{}", o.line());
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!("{} finished in {:.1} s", verb.name(), started.elapsed().as_secs_f64());
            if report.failures().is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {} failed: {e}", verb.name());
            ExitCode::from(1)
        }
    }
}
