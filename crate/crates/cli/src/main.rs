mod args;
mod commands;
mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::process::ExitCode;

use anyhow::{Context, Result};

use args::{Command, SweepArgs};

fn output(a: &SweepArgs) -> Result<Box<dyn Write>> {
    Ok(match &a.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run() -> Result<ExitCode> {
    let cli = args::parse_with_config(std::env::args_os().collect())?;
    let a = cli.command.args();
    let table = match &cli.command {
        Command::Capacity(a) => commands::capacity(a)?,
        Command::SingleShot(a) => commands::single_shot(a)?,
        Command::Iterate(a) => commands::iterate(a)?,
        Command::Fock(a) => commands::fock(a)?,
        Command::Swap(a) => {
            let rows = commands::swap(a)?;
            let mut out = output(a)?;
            commands::write_swap(&rows, a.format, &mut out)?;
            out.flush()?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Verify(_) => {
            let report = commands::verify()?;
            for r in &report.results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", r.name, r.detail);
            }
            return Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    };
    let mut out = output(a)?;
    table.write(a.format, &mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
