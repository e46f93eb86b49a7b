//! `rdt`: run flow experiments, list and describe the built-in geometries, re-audit
//! stored snapshots.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rdt_core::harness::{self, report::to_json};

#[derive(Parser)]
#[command(name = "rdt", version, about = "Ricci de Turck flow laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve, audit and write artifacts for a JSON experiment config.
    Run {
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in geometries.
    List,
    /// Print parameters and curvature hypothesis constants of one geometry.
    Describe { name: String },
    /// Re-run the auditors on a stored snapshot CSV.
    Audit {
        snapshots: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Usage and configuration errors.
const EXIT_USAGE: u8 = 3;

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("RDT_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("RDT_THREADS must be a positive integer, got {v:?}"))?;
    anyhow::ensure!(n > 0, "RDT_THREADS must be a positive integer, got {v:?}");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn status(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn run(config: PathBuf, out: Option<PathBuf>) -> Result<u8> {
    let mut cfg = harness::parse_config(&config)?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let outcome = harness::run_experiment(&cfg)?;
    if let Some(err) = &outcome.error {
        eprintln!("{}", String::from_utf8_lossy(&to_json(err)?).trim_end());
    }
    if let Some(r) = &outcome.report {
        println!("{}: t = {}", r.name, r.t_final);
        println!("  equivalence_window   {}", status(r.equivalence_window.pass));
        println!("  profiles             {}", status(r.profiles.pass));
        println!("  fits                 {}", status(r.fits.pass));
        if let Some(p) = &r.proof_device_audits {
            println!("  proof_device_audits  {}", status(p.pass));
        }
        if let Some(c) = &r.convergence_report {
            println!("  convergence_report   {}", status(c.pass));
        }
    }
    println!("artifacts in {}", outcome.dir.display());
    Ok(outcome.exit_code() as u8)
}

fn audit(snapshots: PathBuf, config: PathBuf, out: Option<PathBuf>) -> Result<u8> {
    let cfg = harness::parse_config(&config)?;
    let report = harness::audit_stored(&cfg, &snapshots)?;
    let bytes = to_json(&report)?;
    match out {
        Some(p) => std::fs::write(&p, &bytes).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn dispatch(cli: Cli) -> Result<u8> {
    init_threads()?;
    match cli.cmd {
        Cmd::Run { config, out } => run(config, out),
        Cmd::List => {
            for e in harness::list_experiments() {
                println!("{:<18} {}", e.name, e.summary);
            }
            Ok(0)
        }
        Cmd::Describe { name } => {
            print!("{}", harness::describe(&name)?);
            Ok(0)
        }
        Cmd::Audit { snapshots, config, out } => audit(snapshots, config, out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
