//! Command-line front end of the simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use osmoflow_core::config::RunConfig;
use osmoflow_core::evolution::Mode;
use osmoflow_core::par;
use osmoflow_core::run::{self, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "osmoflow", version, about = "Viscous drop in a semipermeable membrane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Model variant (overrides the configuration).
        #[arg(long)]
        mode: Option<Mode>,
        /// Resume from a snapshot written by an earlier run.
        #[arg(long)]
        restart: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Radially symmetric reference run for circular initial data.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Check a configuration and its initial data without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// List the model variants.
    Modes,
    /// Run several configurations concurrently, each into `<out>/<config stem>`.
    Sweep {
        #[arg(long, required = true, num_args = 1..)]
        config: Vec<PathBuf>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(path: &Path, mode: Option<Mode>) -> Result<RunConfig, RunError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(m) = mode {
        cfg.model.mode = m;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory))
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run { config, out, mode, restart, quiet } => {
            let cfg = load(&config, mode)?;
            let dir = out_dir(&cfg, out);
            let summary = run::run_to_dir(&cfg, &dir, &RunOptions { quiet, restart })?;
            if !quiet {
                println!("{}: {} steps, t = {}", dir.display(), summary.steps, summary.t_reached);
            }
        }
        Command::Oracle { config, out, mode } => {
            let cfg = load(&config, mode)?;
            let dir = out_dir(&cfg, out);
            let o = run::oracle_to_dir(&cfg, &dir)?;
            println!("{}: R({}) = {:.12}", dir.join("oracle.csv").display(), o.times.last().unwrap(), o.radius.last().unwrap());
        }
        Command::Validate { config, mode } => {
            let cfg = load(&config, mode)?;
            let init = run::initial_data(&cfg)?;
            println!(
                "ok: mode {}, grid {}x{}, compatibility residual {:.3e}{}",
                cfg.model.mode,
                cfg.grid.n_phi,
                cfg.grid.n_s,
                init.residual,
                if init.amplitudes.is_empty() { "" } else { " (projected)" }
            );
        }
        Command::Modes => {
            for m in Mode::ALL {
                println!("{:<26} {}", m.name(), m.equations());
            }
        }
        Command::Sweep { config, out, quiet } => {
            let results = par::map_range(config.len(), |k| {
                let path = &config[k];
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| k.to_string());
                let res = load(path, None)
                    .and_then(|cfg| run::run_to_dir(&cfg, &out.join(&stem), &RunOptions { quiet: true, restart: None }));
                (stem, res)
            });
            let mut first_error = None;
            for (stem, res) in results {
                match res {
                    Ok(s) if !quiet => println!("{stem}: complete, {} steps", s.steps),
                    Ok(_) => {}
                    Err(e) => {
                        eprintln!("{stem}: {e}");
                        first_error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_error {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match par::with_threads(par::threads_from_env(), move || execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
