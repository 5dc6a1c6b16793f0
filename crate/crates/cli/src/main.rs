use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flam::metrics::RunReport;
use flam::pipeline;
use flam::scenario::{Scenario, PRESETS};

#[derive(Parser)]
#[command(name = "flam", version, about = "Flow-based localization and mapping: simulate, solve and evaluate runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let scenario = match (&self.config, &self.preset) {
            (Some(path), _) => {
                Scenario::from_file(path).with_context(|| format!("loading {}", path.display()))?
            }
            (None, Some(name)) => Scenario::preset(name)?,
            (None, None) => bail!("either --config or --preset is required"),
        };
        Ok(match self.seed {
            Some(s) => scenario.with_seed(s),
            None => scenario,
        })
    }

    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate truth and sensor logs: ins.csv, adcp.csv, truth.csv, meta.json.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run FLAM on a simulated log: trajectories, maps and iterations.jsonl.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a solved run directory, or run and evaluate seeds end to end.
    Eval {
        /// Solved run directory.
        #[arg(long = "in", conflicts_with_all = ["config", "preset", "runs"])]
        input: Option<PathBuf>,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Monte Carlo runs at consecutive seeds, executed in parallel.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Output root for end-to-end runs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy spectrum of the scenario's turbulence: spectrum.csv.
    Spectrum {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Samples per side of the square sample grid.
        #[arg(long, default_value_t = pipeline::SPECTRUM_GRID)]
        grid: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, out } => {
            let sc = scenario.load()?;
            let log = pipeline::simulate_to_dir(&sc, &out)?;
            println!(
                "simulated {} (seed {}): {} INS and {} ADCP samples -> {}",
                sc.name,
                sc.seed,
                log.ins.len(),
                log.adcp.len(),
                out.display()
            );
        }
        Command::Solve { input, out } => {
            let out = out.unwrap_or_else(|| input.clone());
            let outputs = pipeline::solve_dir(&input, &out)?;
            let last = outputs.iterations.last().context("solver ran no iterations")?;
            println!(
                "solved in {} iterations: cost {:.6e}, last step {:.3e} -> {}",
                outputs.iterations.len(),
                last.cost,
                last.step_norm,
                out.display()
            );
        }
        Command::Eval { input, scenario, runs, out } => match input {
            Some(dir) => print!("{}", pipeline::eval_dir(&dir)?.summary_table()),
            None if scenario.given() => monte_carlo(&scenario.load()?, runs, out.as_deref())?,
            None => bail!("eval needs --in, or --config/--preset for end-to-end runs"),
        },
        Command::Spectrum { scenario, out, grid } => {
            let sc = scenario.load()?;
            let report = pipeline::spectrum(&sc, grid)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("spectrum.csv");
            pipeline::write_spectrum(&path, &report)?;
            if report.spectrum.is_empty() {
                println!("spectrum is empty (zero turbulence intensity) -> {}", path.display());
            } else {
                match report.fit {
                    Some(f) => println!(
                        "inertial-range slope {:.4} over k in [{:.3}, {:.3}] ({} bins), total energy {:.6e} -> {}",
                        f.slope,
                        f.k_lo,
                        f.k_hi,
                        f.bins_used,
                        report.spectrum.total_energy,
                        path.display()
                    ),
                    None => println!("too few bins for a slope fit -> {}", path.display()),
                }
            }
        }
    }
    Ok(())
}

fn monte_carlo(base: &Scenario, runs: u64, out: Option<&Path>) -> Result<()> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let seeds: Vec<u64> = (0..runs).map(|i| base.seed.wrapping_add(i)).collect();
    let reports: Vec<RunReport> = match out {
        Some(root) => pipeline::monte_carlo_to_dirs(base, &seeds, root)
            .into_iter()
            .collect::<flam::Result<_>>()?,
        None => pipeline::monte_carlo(base, &seeds).into_iter().collect::<flam::Result<_>>()?,
    };
    if let [single] = reports.as_slice() {
        print!("{}", single.summary_table());
        return Ok(());
    }
    println!("{:>8}{:>14}{:>14}{:>14}{:>14}{:>8}", "seed", "DR RMSE", "FLAM RMSE", "DR final", "FLAM final", "iters");
    for r in &reports {
        println!(
            "{:>8}{:>14.6}{:>14.6}{:>14.6}{:>14.6}{:>8}",
            r.seed,
            r.dr.position_rmse,
            r.flam.position_rmse,
            r.dr.terminal_position,
            r.flam.terminal_position,
            r.iterations.len()
        );
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&RunReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let wins = reports.iter().filter(|r| r.flam.terminal_position < r.dr.terminal_position).count();
    println!(
        "mean position RMSE: DR {:.6} FLAM {:.6}; FLAM terminal error below DR on {}/{} runs",
        mean(|r| r.dr.position_rmse),
        mean(|r| r.flam.position_rmse),
        wins,
        reports.len()
    );
    Ok(())
}
