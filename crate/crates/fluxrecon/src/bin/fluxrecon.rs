//! Command-line front end: twin experiments, truth simulation, feasibility
//! checks, parameter sweeps, and decay-rate fits on exported CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fluxrecon::harness::{
    check_conditions, fit_decay_rate, run_twin, simulate, sweep, sweep_csv, Algorithm,
    ExperimentConfig, OutputSection,
};

#[derive(Parser)]
#[command(name = "fluxrecon", version, about = "Reconstructs quasi-finite-rank forcings of transport-diffusion and 2D Navier-Stokes equations from low-mode observations")]
struct Cli {
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for sweeps (defaults to the RAYON_NUM_THREADS
    /// environment override, then the core count).
    #[arg(long, global = true)]
    threads: Option<u32>,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the truth trajectory and write its observation archive.
    Simulate {
        /// Experiment definition (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a sieve twin experiment.
    Sieve {
        /// Experiment definition (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a nudging twin experiment.
    Nudge {
        /// Experiment definition (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the parameter feasibility conditions (exit code 0 iff
    /// feasible).
    Check {
        /// Experiment definition (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the experiment once per value of a swept parameter.
    Sweep {
        /// Experiment definition (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Dotted config field to sweep (e.g. `params.mu1`).
        #[arg(long)]
        axis: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Fit an exponential decay rate to a column of an exported series CSV.
    Fit {
        /// Series CSV written by a twin run.
        #[arg(long)]
        csv: PathBuf,
        /// Column name (e.g. `model_err_Hm1`).
        #[arg(long)]
        column: String,
        /// Window start time (default: beginning of the series).
        #[arg(long)]
        from: Option<f64>,
        /// Window end time (default: end of the series).
        #[arg(long)]
        to: Option<f64>,
    },
}

fn load(path: &PathBuf, cli: &Cli) -> Result<ExperimentConfig, fluxrecon::FluxError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(OutputSection { dir: out.display().to_string() });
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitCode, fluxrecon::FluxError> {
    if let Some(threads) = cli.threads {
        // Ignore failure: the global pool may already exist.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads as usize).build_global();
    }
    match &cli.cmd {
        Cmd::Simulate { config } => {
            let cfg = load(config, cli)?;
            simulate(&cfg)?;
            if !cli.quiet {
                if let Some(out) = &cfg.output {
                    println!("observation archive written to {}", out.dir);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sieve { config } | Cmd::Nudge { config } => {
            let mut cfg = load(config, cli)?;
            if matches!(cli.cmd, Cmd::Nudge { .. }) {
                cfg.algorithm = Algorithm::Nudging;
            } else if cfg.algorithm == Algorithm::Nudging {
                cfg.algorithm = Algorithm::Sieve;
            }
            let out = run_twin(&cfg)?;
            if !cli.quiet {
                let s = &out.series;
                if let (Some(first), Some(last)) = (s.model_hm1.first(), s.model_hm1.last()) {
                    println!("model error (dual norm): {first:.6e} -> {last:.6e}");
                }
                if let (Some(first), Some(last)) = (s.sync_l2.first(), s.sync_l2.last()) {
                    println!("sync error (L2):         {first:.6e} -> {last:.6e}");
                }
                for fit in &s.fits {
                    println!(
                        "fit {}: rate = {:.6e}, residual = {:.3e}{}",
                        fit.column,
                        fit.fit.rate,
                        fit.fit.residual,
                        if fit.fit.floored { " (floored)" } else { "" }
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check { config } => {
            let cfg = load(config, cli)?;
            let report = check_conditions(&cfg)?;
            if !cli.quiet {
                println!("{}", report.summary);
            }
            Ok(if report.feasible { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Sweep { config, axis, values } => {
            let cfg = load(config, cli)?;
            let rows = sweep(&cfg, axis, values)?;
            let csv = sweep_csv(axis, &rows)?;
            match &cfg.output {
                Some(out) => {
                    std::fs::create_dir_all(&out.dir)?;
                    let path = std::path::Path::new(&out.dir).join("sweep.csv");
                    fluxrecon::io::atomic_write(&path, csv.as_bytes())?;
                    if !cli.quiet {
                        println!("sweep summary written to {}", path.display());
                    }
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Fit { csv, column, from, to } => {
            let mut reader = csv::Reader::from_path(csv)
                .map_err(|e| fluxrecon::FluxError::Format(e.to_string()))?;
            let headers = reader
                .headers()
                .map_err(|e| fluxrecon::FluxError::Format(e.to_string()))?
                .clone();
            let t_idx = headers
                .iter()
                .position(|h| h == "t")
                .ok_or_else(|| fluxrecon::FluxError::Format("CSV has no 't' column".into()))?;
            let v_idx = headers.iter().position(|h| h == column).ok_or_else(|| {
                fluxrecon::FluxError::Format(format!("CSV has no '{column}' column"))
            })?;
            let mut times = Vec::new();
            let mut values = Vec::new();
            for record in reader.records() {
                let record = record.map_err(|e| fluxrecon::FluxError::Format(e.to_string()))?;
                let t: f64 = record[t_idx]
                    .parse()
                    .map_err(|_| fluxrecon::FluxError::Format("bad time value".into()))?;
                let v: f64 = record[v_idx]
                    .parse()
                    .map_err(|_| fluxrecon::FluxError::Format("bad column value".into()))?;
                if t >= from.unwrap_or(f64::NEG_INFINITY) && t <= to.unwrap_or(f64::INFINITY) {
                    times.push(t);
                    values.push(v);
                }
            }
            let fit = fit_decay_rate(&times, &values)?;
            println!(
                "rate = {:.12e}\nintercept = {:.12e}\nresidual = {:.6e}\nsamples = {}{}",
                fit.rate,
                fit.intercept,
                fit.residual,
                fit.samples_used,
                if fit.floored { "\nfloored = true" } else { "" }
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
