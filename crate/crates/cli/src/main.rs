use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use gendd_cli::{report, run, table, Config, RunOptions};

#[derive(Parser)]
#[command(name = "gendd", version, about = "Drawdown and tax first-passage functionals with Monte Carlo cross-checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a config and write CSV/JSON reports. Exits nonzero if any row fails.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        /// Overrides the MC seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mc: Option<Switch>,
        /// Worker threads for MC (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print report files as aligned tables.
    Table {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Parse and check a config without evaluating anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            mc,
            jobs,
        } => {
            let mut cfg = Config::load(&config)?;
            RunOptions {
                mc: mc.map(|s| matches!(s, Switch::On)),
                seed,
                jobs,
            }
            .apply(&mut cfg);
            let rows = run::run_config(&cfg)?;
            let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            let (csv, json) = run::write_reports(&rows, &out, stem)?;
            let failed = rows.iter().filter(|r| r.status.failed()).count();
            eprintln!(
                "{} rows, {failed} failing; wrote {} and {}",
                rows.len(),
                csv.display(),
                json.display()
            );
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Table { reports } => {
            for (i, path) in reports.iter().enumerate() {
                let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let rows = report::read_csv(file).with_context(|| format!("reading {}", path.display()))?;
                if reports.len() > 1 {
                    if i > 0 {
                        println!();
                    }
                    println!("# {}", path.display());
                }
                print!("{}", table::render(&rows));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = Config::load(&config)?;
            cfg.validate()?;
            let points: usize = cfg.experiments.iter().map(|e| e.queries().len() * e.targets.len()).sum();
            println!("{}: {} experiments, {points} rows", config.display(), cfg.experiments.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}
