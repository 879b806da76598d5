//! `nevlab`: sweeps, bound verifications and orbit constructions from the command line.
//!
//! Exit status is 0 when a run passes, 2 when a verification fails and 1 on any error.

mod config;
mod dynamics;
mod inputs;
mod output;
mod sweep;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{merge, FileConfig, Format, Mode, RunConfig};
use output::Sink;

pub enum Outcome {
    Pass,
    Fail(String),
}

#[derive(Parser, Debug)]
#[command(name = "nevlab", version, about = "Nevanlinna characteristics, bound checks and algebraic-map orbits")]
struct Cli {
    /// JSON parameters; flags given on the command line win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    execution: Option<Mode>,
    /// Worker threads for parallel execution
    #[arg(long, global = true, env = "NEVLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// T(r, f), m(r, f) and N(r, f) over a radius grid
    Char(sweep::CharArgs),
    /// Hyper-order estimate from a characteristic sweep
    Hyperorder(sweep::HyperorderArgs),
    /// Run one of the bound harnesses
    Verify {
        #[command(subcommand)]
        which: verify::Which,
    },
    /// Iterates of an algebraic map
    Orbit(dynamics::OrbitArgs),
    /// Orbit family and point data of a built-in panel
    Construct(dynamics::ConstructArgs),
    /// Pre-image invariance of the constructed function under its map
    Census(dynamics::CensusArgs),
    /// The exp(exp z) functional identity and its pre-images
    Counterexample(dynamics::CounterexampleArgs),
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Char(_) => "char".into(),
            Command::Hyperorder(_) => "hyperorder".into(),
            Command::Verify { which } => format!("verify {}", which.name()),
            Command::Orbit(_) => "orbit".into(),
            Command::Construct(_) => "construct".into(),
            Command::Census(_) => "census".into(),
            Command::Counterexample(_) => "counterexample".into(),
        }
    }
}

/// Merges file parameters, fills defaults and returns the arguments with their echo form.
fn settle<T, F>(args: &T, file: &FileConfig, resolve: F) -> Result<(T, serde_json::Value)>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce(T) -> Result<T>,
{
    let resolved = resolve(merge(args, &file.params)?)?;
    let echo = serde_json::to_value(&resolved)?;
    Ok((resolved, echo))
}

fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let name = cli.command.name();
    if let Some(c) = &file.command {
        if *c != name {
            bail!("config was written for `{c}`, not `{name}`");
        }
    }
    let mode = cli.execution.or(file.execution).unwrap_or(Mode::Parallel);
    let format = cli.format.or(file.format).unwrap_or_default();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let exec = mode.into();
    let sink = |params| Sink { out: cli.out.clone(), config: RunConfig { command: name.clone(), execution: mode, format, params } };

    match &cli.command {
        Command::Char(a) => {
            let (a, echo) = settle(a, &file, sweep::CharArgs::resolve)?;
            sweep::run_char(&a, exec, &sink(echo))
        }
        Command::Hyperorder(a) => {
            let (a, echo) = settle(a, &file, |mut h: sweep::HyperorderArgs| {
                h.sweep = h.sweep.resolve()?;
                Ok(h)
            })?;
            sweep::run_hyperorder(&a, exec, &sink(echo))
        }
        Command::Verify { which } => {
            let (w, echo) = settle_verify(which, &file)?;
            w.run(exec, &sink(echo))
        }
        Command::Orbit(a) => {
            let (a, echo) = settle(a, &file, dynamics::OrbitArgs::resolve)?;
            dynamics::run_orbit(&a, exec, &sink(echo))
        }
        Command::Construct(a) => {
            let (a, echo) = settle(a, &file, dynamics::ConstructArgs::resolve)?;
            dynamics::run_construct(&a, &sink(echo))
        }
        Command::Census(a) => {
            let (a, echo) = settle(a, &file, dynamics::CensusArgs::resolve)?;
            dynamics::run_census(&a, exec, &sink(echo))
        }
        Command::Counterexample(a) => {
            let (a, echo) = settle(a, &file, dynamics::CounterexampleArgs::resolve)?;
            dynamics::run_counterexample(&a, &sink(echo))
        }
    }
}

// The echo holds only the inner parameters; the subcommand is in `command`.
fn settle_verify(which: &verify::Which, file: &FileConfig) -> Result<(verify::Which, serde_json::Value)> {
    use verify::Which as W;
    Ok(match which {
        W::Pest(a) => {
            let (a, e) = settle(a, file, verify::PestArgs::resolve)?;
            (W::Pest(a), e)
        }
        W::Lemma1(a) => {
            let (a, e) = settle(a, file, verify::Lemma1Args::resolve)?;
            (W::Lemma1(a), e)
        }
        W::Asym(a) => {
            let (a, e) = settle(a, file, verify::AsymArgs::resolve)?;
            (W::Asym(a), e)
        }
        W::Smt(a) => {
            let (a, e) = settle(a, file, verify::SmtArgs::resolve)?;
            (W::Smt(a), e)
        }
        W::Borel(a) => {
            let (a, e) = settle(a, file, verify::BorelArgs::resolve)?;
            (W::Borel(a), e)
        }
        W::Growth(a) => {
            let (a, e) = settle(a, file, verify::GrowthArgs::resolve)?;
            (W::Growth(a), e)
        }
    })
}

/// Runs one command line and returns the process exit status.
fn exit_status<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // usage errors are errors, not verification failures
            return if usage { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("verification failed: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(exit_status(std::env::args_os()))
}

#[cfg(test)]
mod tests;
