use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dataloc::audit::{claims, expected_failures};
use dataloc::proto::ProtocolKind;
use dataloc::scenario::{run_suite, write_outputs, Suite};

#[derive(Parser)]
#[command(name = "dataloc", version, about = "Data location protocol simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite file ("default" for the built-in suite).
    Run {
        suite: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the suite's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Keep only scenarios of this protocol.
        #[arg(long)]
        filter: Option<ProtocolKind>,
    },
    ListProtocols,
    /// Print a protocol's claimed row and the classes measured by the last run.
    Explain {
        protocol: ProtocolKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(suite: &str, out: PathBuf, seed: Option<u64>, filter: Option<ProtocolKind>) -> Result<bool> {
    let mut suite = if suite == "default" { Suite::default_suite() } else { Suite::load(suite)? };
    if let Some(seed) = seed {
        suite.seed = seed;
    }
    if let Some(p) = filter {
        suite = suite.filter(p);
    }
    let started = Instant::now();
    let outcome = run_suite(&suite);
    write_outputs(&outcome, &out).with_context(|| format!("writing results to {}", out.display()))?;
    print!("{}", outcome.table.to_text());
    match &outcome.conjecture {
        Ok(r) => print!("{}", r.to_text()),
        Err(e) => println!("conjecture check failed: {e}"),
    }
    for f in &outcome.failures {
        eprintln!("failed: {f}");
    }
    eprintln!(
        "{} points in {:.1}s, results in {}",
        outcome.points.len(),
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(outcome.passed())
}

fn explain(protocol: ProtocolKind, out: PathBuf) -> Result<()> {
    println!("{} ({})", protocol.title(), protocol.family());
    let expected: Vec<String> = expected_failures(protocol).iter().map(|p| p.to_string()).collect();
    println!("expected to give up: {}", expected.join(", "));
    for c in claims(protocol) {
        println!("  {:<22} {}", c.column.label(), c.paper);
    }
    let path = out.join("table1.csv");
    let Ok(mut rdr) = csv::Reader::from_path(&path) else {
        println!("no measurements at {} (run a suite first)", path.display());
        return Ok(());
    };
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(0) != Some(protocol.label()) {
            continue;
        }
        println!("measured:");
        for (h, v) in headers.iter().zip(rec.iter()).skip(1) {
            println!("  {h:<22} {v}");
        }
        return Ok(());
    }
    println!("the last run in {} did not include {}", out.display(), protocol.label());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { suite, out, seed, filter } => run(&suite, out, seed, filter),
        Command::ListProtocols => {
            for k in ProtocolKind::ALL {
                println!("{:<20} {}", k.label(), k.title());
            }
            Ok(true)
        }
        Command::Explain { protocol, out } => explain(protocol, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
