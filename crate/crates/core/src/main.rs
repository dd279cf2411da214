use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use degenerate_ma::cli::{parse_config_with, run, Command};
use degenerate_ma::par::Exec;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Solve,
    Sections,
    Scaling,
    Barriers,
    Liouville,
    Maxsection,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Sections => Command::Sections,
            Cmd::Scaling => Command::Scaling,
            Cmd::Barriers => Command::Barriers,
            Cmd::Liouville => Command::Liouville,
            Cmd::Maxsection => Command::Maxsection,
        }
    }
}

/// Degenerate Monge-Ampère experiments: solves, sections, barriers and
/// scaling checks driven by flat INI run configs.
#[derive(Debug, Parser)]
#[command(name = "dmalab", version)]
struct Args {
    command: Cmd,
    /// Run-config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs the sequential code path.
    #[arg(long)]
    jobs: Option<usize>,
    /// Accepted for scripting symmetry: the pipeline never draws random numbers.
    #[arg(long)]
    seed_free: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config_with(&text, Some(args.command.into())) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = args.out {
        cfg.out_dir = dir;
    }
    if let Some(jobs) = args.jobs {
        if jobs <= 1 {
            if let Some(s) = cfg.solver.as_mut() {
                s.exec = Exec::Sequential;
            }
        } else {
            #[cfg(feature = "parallel")]
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
                eprintln!("warning: could not size the thread pool: {e}");
            }
        }
    }
    let outcome = run(&cfg);
    for line in &outcome.lines {
        println!("{line}");
    }
    ExitCode::from(outcome.code as u8)
}
