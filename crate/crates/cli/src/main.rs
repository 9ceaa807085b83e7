mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Command};
use output::NonFinite;

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

trait Seeded {
    fn out(&self) -> Option<&str>;
    fn seed(&self) -> u64;
}

macro_rules! seeded {
    ($($t:ty),*) => {$(
        impl Seeded for $t {
            fn out(&self) -> Option<&str> {
                self.out.as_deref()
            }
            fn seed(&self) -> u64 {
                self.seed.unwrap_or(0)
            }
        }
    )*};
}

seeded!(
    args::KernelTableArgs,
    args::SampleArgs,
    args::CompressArgs,
    args::Fig2Args,
    args::Fig3Args,
    args::Fig4Args,
    args::ConcentrationArgs
);

fn execute<A, F>(name: &str, flags: &A, config: Option<&serde_json::Map<String, serde_json::Value>>, run: F) -> anyhow::Result<()>
where
    A: Serialize + DeserializeOwned + Default + Seeded,
    F: FnOnce(A) -> anyhow::Result<(A, commands::Outcome)>,
{
    let started = Instant::now();
    let merged = config::merge(flags, config)?;
    let (resolved, outcome) = run(merged)?;
    let out = resolved.out().expect("commands require --out").to_string();
    commands::finish(name, &resolved, resolved.seed(), &out, started, outcome)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = cli.config.as_deref().map(config::load).transpose()?;
    let cfg = config.as_ref();
    let name = cli.command.name();
    match &cli.command {
        Command::KernelTable(a) => execute(name, a, cfg, commands::kernel_table),
        Command::Sample(a) => execute(name, a, cfg, commands::sample),
        Command::Compress(a) => execute(name, a, cfg, commands::compress),
        Command::Fig2(a) => execute(name, a, cfg, commands::fig2),
        Command::Fig3(a) => execute(name, a, cfg, commands::fig3),
        Command::Fig4(a) => execute(name, a, cfg, commands::fig4),
        Command::Concentration(a) => execute(name, a, cfg, commands::concentration),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|e| {
        e.is::<NonFinite>() || matches!(e.downcast_ref::<relu_compress::Error>(), Some(relu_compress::Error::Singular | relu_compress::Error::NonFinite(_)))
    });
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_INVALID
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
