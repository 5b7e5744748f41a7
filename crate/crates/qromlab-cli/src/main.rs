use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qromlab::par::Parallelism;
use qromlab::pipeline::{run_theorem, verify_lemma_seeded, ExperimentConfig, Report, LEMMA_NAMES, THEOREM_NAMES};

#[derive(Parser)]
#[command(name = "qromlab", version, about = "Exact small-instance experiments on black-box simulation in the QROM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one lemma exhaustively on small instances.
    VerifyLemma {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(LEMMA_NAMES))]
        name: String,
        /// Seed for the randomly drawn test states.
        #[arg(long, default_value_t = qromlab::pipeline::lemmas::DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Run a simulator-to-decider pipeline.
    Run {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(THEOREM_NAMES))]
        theorem: String,
        #[arg(long, default_value = "toy-qr")]
        protocol: String,
        /// Parallel repetitions of toy-qr.
        #[arg(long, default_value_t = 3)]
        reps: u32,
        /// Sparsity of the aborting predicate, as B/A.
        #[arg(long, default_value = "1/4")]
        eps: String,
        /// Budget in verifier calls; defaults to what the simulator uses.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long, default_value = "honest-wrapper")]
        sim: String,
        /// Restrict to these statements.
        #[arg(long, value_delimiter = ',')]
        statements: Option<Vec<u64>>,
        /// Accepted for symmetry with verify-lemma; pipelines are exhaustive.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Output {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one CSV row per check.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock time in the report (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Output {
    fn mode(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::default()
        }
    }

    fn emit(&self, mut report: Report, started: Instant) -> Result<bool> {
        if self.timing {
            report.runtime_ms = Some(started.elapsed().as_millis() as u64);
        }
        let json = report.to_json()?;
        match &self.out {
            Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
            None => println!("{json}"),
        }
        if let Some(path) = &self.csv {
            std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        }
        for c in report.failures() {
            eprintln!("FAIL {} (statement {:?}): {:e} {} {:e}", c.name, c.statement, c.lhs, c.relation.symbol(), c.rhs);
        }
        if let Some(d) = &report.decision {
            eprintln!("min yes {:?}, max no {:?}, gap {:?}", d.min_yes(), d.max_no(), d.gap);
        }
        Ok(report.ok())
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    let started = Instant::now();
    let ok = match cli.command {
        Command::VerifyLemma { name, seed, out } => {
            let report = verify_lemma_seeded(&name, out.mode(), seed)?;
            out.emit(report, started)?
        }
        Command::Run { theorem, protocol, reps, eps, q, sim, statements, seed: _, out } => {
            let cfg = ExperimentConfig { protocol, reps, q, simulator: sim, statements, mode: out.mode(), ..Default::default() }
                .with_eps(&eps)?;
            let report = run_theorem(&theorem, &cfg)?;
            out.emit(report, started)?
        }
    };
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
