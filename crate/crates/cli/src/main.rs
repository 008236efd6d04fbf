//! Command line front end: run a scenario, A/B it across seeds, or just
//! check that a file parses.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use egsim_core::{compare, emit_csv, load_scenario, run, write_compare_csv, Error};

#[derive(Parser)]
#[command(name = "egsim", version, about = "Simulator of co-located sensor networks with collaborating gateways")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write timeseries.csv, events.csv, summary.csv
    Run {
        /// Scenario file (TOML)
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed in the scenario file
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory, created if absent
        #[arg(long)]
        out: PathBuf,
    },
    /// Run each seed with collaboration on and off and write compare.csv
    Compare {
        /// Scenario file (TOML)
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated seeds, e.g. 1,2,3
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        seeds: Vec<u64>,
        /// Output directory, created if absent
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario file
    Validate {
        /// Scenario file (TOML)
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn ensure_dir(dir: &Path) -> egsim_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn execute(cli: Cli) -> egsim_core::Result<()> {
    match cli.command {
        Command::Run { scenario, seed, out } => {
            let sc = load_scenario(&scenario)?;
            ensure_dir(&out)?;
            let result = run(&sc, seed);
            emit_csv(&result.metrics, &out)?;
            for id in &result.metrics.network_ids {
                let cfg = &result.final_configs[id];
                println!(
                    "{id}: energy {:.1} J, final config n_active={} interval={}s alert={}",
                    result.metrics.total_energy(id),
                    cfg.n_active,
                    cfg.report_interval,
                    cfg.alert_mode,
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Compare { scenario, seeds, out } => {
            let sc = load_scenario(&scenario)?;
            ensure_dir(&out)?;
            let report = compare(&sc, &seeds);
            let path = out.join("compare.csv");
            write_compare_csv(&report, &path)?;
            for row in report.rows.iter().filter(|r| r.seed == "mean") {
                println!(
                    "{}: mean saving {:.2}% over {} seed(s)",
                    row.network_id,
                    row.energy_saving_pct,
                    seeds.len(),
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Validate { scenario } => {
            load_scenario(&scenario)?;
            println!("OK");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
