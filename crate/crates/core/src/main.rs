use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gridgame::cli::{cmd_check, cmd_run, cmd_solve, load_scenario, render_report, CliError, RunReport, Scenario};

#[derive(Parser)]
#[command(name = "gridgame", version, about = "Microgrid renewable-generation game on a DC network")]
struct Args {
    /// Output format on stdout.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    /// Override the scenario's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the Nash equilibrium directly, plus team optimum and LOE.
    Solve { file: PathBuf },
    /// Simulate the configured update scheme and write trajectory artifacts.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed sweep `A..B` (end exclusive); each seed writes to `<out>/seed_<s>/`.
        #[arg(long, value_parser = parse_range)]
        seeds: Option<Range<u64>>,
    },
    /// Report whether the contraction condition of the configured scheme holds.
    Check { file: PathBuf },
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    if b <= a {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut sc = load_scenario(path)?;
    if let Some(s) = seed {
        sc.config.seed = s;
        sc.file.algorithm.seed = s;
    }
    Ok(sc)
}

fn print<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("report serializes")),
        Format::Text => print!("{}", text()),
    }
}

fn sweep(sc: &Scenario, out: &Path, seeds: Range<u64>) -> Result<Vec<(u64, RunReport)>, CliError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .map(|s| {
                scope.spawn(move || {
                    let mut sc = sc.clone();
                    sc.config.seed = s;
                    sc.file.algorithm.seed = s;
                    cmd_run(&sc, &out.join(format!("seed_{s}"))).map(|r| (s, r))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    })
}

fn execute(args: Args) -> Result<ExitCode, CliError> {
    match args.command {
        Command::Solve { file } => {
            let report = cmd_solve(&load(&file, args.seed)?)?;
            print(args.format, &report, || render_report(&report));
        }
        Command::Run { file, out, seeds } => {
            let sc = load(&file, args.seed)?;
            match seeds {
                None => {
                    let report = cmd_run(&sc, &out)?;
                    print(args.format, &report, || render_report(&report));
                }
                Some(range) => {
                    let reports = sweep(&sc, &out, range)?;
                    let json: Vec<&RunReport> = reports.iter().map(|(_, r)| r).collect();
                    print(args.format, &json, || {
                        reports
                            .iter()
                            .map(|(s, r)| format!("seed {s}: {}\n", r.terminal_status.as_deref().unwrap_or("finished")))
                            .collect()
                    });
                }
            }
        }
        Command::Check { file } => {
            let report = cmd_check(&load(&file, args.seed)?);
            print(args.format, &report, || report.text.clone());
            if !report.conditions.selected_condition_met {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
