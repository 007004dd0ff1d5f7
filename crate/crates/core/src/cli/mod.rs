//! Batch front end: one scenario file drives every command.

pub mod report;
pub mod run;
pub mod scenario;

use std::path::PathBuf;

use clap::Parser;

pub use report::{blob_hash, sha256_hex, Diagnostic, Format, Level, RunReport, Table};
pub use run::{run, Command};
pub use scenario::{bundled_dir, parse_scenario, parse_scenario_str, ParseOptions, Parsed, Scenario};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "synthwave",
    version,
    about = "Synthetic cavity nonlinearities: synthesis, simulation and counting"
)]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "synthwave-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Tolerate keys the scenario schema does not know.
    #[arg(long)]
    pub allow_unknown: bool,
}

/// Parses, runs and writes; returns the report and the files written.
pub fn execute(args: &Args) -> Result<(RunReport, Vec<PathBuf>)> {
    let bytes = std::fs::read(&args.scenario).map_err(|e| Error::io(&args.scenario, e))?;
    let input_hash = blob_hash(&bytes);
    let parsed = parse_scenario(
        &args.scenario,
        ParseOptions {
            allow_unknown: args.allow_unknown,
        },
    )?;
    let mut scenario = parsed.scenario;
    if let Some(s) = args.seed {
        scenario.seed = s;
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut report = run(args.command, &scenario, &input_hash, &args.out)?;
    for k in parsed.ignored_keys {
        report.diagnostics.push(Diagnostic {
            level: Level::Warning,
            source: "scenario".into(),
            message: format!("unknown key `{k}` ignored"),
        });
    }
    let files = report.write(&args.out, args.format)?;
    Ok((report, files))
}

/// Process entry point; returns the exit code.
pub fn main_with(args: Args) -> i32 {
    match execute(&args) {
        Ok((report, files)) => {
            for d in &report.diagnostics {
                if d.level != Level::Info {
                    eprintln!("{:?} [{}]: {}", d.level, d.source, d.message);
                }
            }
            for t in &report.tables {
                println!("{}: {} row(s)", t.name, t.rows.len());
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            report.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
