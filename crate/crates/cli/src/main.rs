//! `vpmcf` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vpmcf::config::{parse_config, parse_sweep, SimConfig};
use vpmcf::output::{emit_run, oracle_csv, RunManifest, ORACLE_FILE};
use vpmcf::presets;
use vpmcf::{Error, Result};

#[derive(Parser)]
#[command(name = "vpmcf", version, about = "Phase-field volume-preserving mean curvature flow with obstacles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its artifacts.
    Run { config: PathBuf },
    /// Inspect the preset catalog.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Integrate the sharp-interface twin of a configuration.
    Oracle { config: PathBuf },
    /// Run every leg of a sweep meta-config.
    Sweep { config: PathBuf },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names with a one-line summary.
    List,
    /// Print the keys a preset expands to.
    Show { name: String },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load(path: &Path) -> Result<SimConfig> {
    let cfg = parse_config(&read(path)?)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn report(m: &RunManifest) {
    println!("wrote {} ({} steps)", m.output_dir.display(), m.steps);
    for (name, digest) in &m.digests {
        println!("  {name} {digest}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => report(&emit_run(&load(&config)?)?),
        Command::Preset { action: PresetAction::List } => {
            for p in presets::catalog() {
                let kind = if p.is_sweep() { "sweep" } else { "run" };
                println!("{:<16} {:<6} {}", p.name, kind, p.summary);
            }
        }
        Command::Preset {
            action: PresetAction::Show { name },
        } => {
            let p = presets::find(&name)?;
            for (k, v) in p.keys {
                println!("{k}={v}");
            }
            if p.is_sweep() {
                let legs: Vec<String> = p.legs.iter().map(|(e, n)| format!("{e}:{n}")).collect();
                println!("legs={}", legs.join(","));
            }
        }
        Command::Oracle { config } => {
            let cfg = load(&config)?;
            fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
            let path = cfg.output_dir.join(ORACLE_FILE);
            fs::write(&path, oracle_csv(&cfg)?).map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
        }
        Command::Sweep { config } => {
            let sweep = parse_sweep(&read(&config)?)?;
            for i in 0..sweep.legs.len() {
                let leg = sweep.leg(i)?;
                for w in leg.warnings() {
                    eprintln!("warning: {w}");
                }
                report(&emit_run(&leg)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                eprintln!("error[usage]: {e}");
                return ExitCode::from(2);
            }
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
