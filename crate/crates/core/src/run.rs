//! Run orchestration: initial data, output directory layout, restart and
//! the radial reference run.
//!
//! A run directory holds `diagnostics.csv`, `snapshot_NNNN.json` (plus
//! `frame_NNNN.svg` when enabled), `final.json` and `manifest.json`.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, I2Policy, RunConfig};
use crate::evolution::{self, EvolutionError, Mode, SimState, Simulation};
use crate::geometry::{CurveGeometry, PolarCurve};
use crate::initial::{ConcentrationPreset, ShapePreset};
use crate::oracle::{self, OracleError, RadialState};
use crate::output::{self, DiagnosticsWriter, Manifest, OutputError, RunStatus, Snapshot, SCHEMA_VERSION};
use crate::transport::ConcentrationField;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Config(ConfigError),
    #[error("{0}")]
    Compatibility(EvolutionError),
    #[error("{0}")]
    Output(OutputError),
    #[error("simulation stopped at t = {t}: {source}")]
    Simulation { t: f64, source: EvolutionError },
    #[error("oracle failed: {0}")]
    Oracle(OracleError),
}

impl RunError {
    /// Process exit code for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Parse(_)) => 2,
            RunError::Config(ConfigError::Validation(_)) => 3,
            RunError::Config(ConfigError::Io(_)) => 5,
            RunError::Compatibility(_) => 4,
            RunError::Output(OutputError::Io(_)) => 5,
            RunError::Output(OutputError::Schema(_)) => 6,
            RunError::Simulation { .. } | RunError::Oracle(_) => 1,
        }
    }
}

impl From<OutputError> for RunError {
    fn from(e: OutputError) -> Self {
        RunError::Output(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Validation(msg.into()))
}

/// Initial state after the positivity check and the compatibility policy.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub state: SimState,
    /// Residual of the compatibility condition before any projection.
    pub residual: f64,
    /// Projection amplitudes per angle (empty unless projected).
    pub amplitudes: Vec<f64>,
}

pub fn initial_data(cfg: &RunConfig) -> Result<InitialData, RunError> {
    let mode = cfg.model.mode;
    let kappa = cfg.model.kappa;
    let curve = cfg.initial_shape.build(cfg.grid.n_phi).with_scheme(cfg.grid.derivatives);
    curve.validate().map_err(|e| invalid(e.to_string()))?;
    let mut xi = cfg
        .initial_concentration
        .build(&curve, cfg.grid.n_s, kappa)
        .map_err(|e| invalid(e.to_string()))?;
    if mode.uniform_concentration() {
        let geo = CurveGeometry::new(&curve).map_err(|e| invalid(e.to_string()))?;
        let mean = crate::energetics::solute_mass(&geo, &xi) / geo.area();
        xi = ConcentrationField::filled(xi.grid, mean);
    }
    let res = evolution::compatibility_residual(&curve, &xi, kappa, mode).map_err(RunError::Compatibility)?;
    let residual = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let mut amplitudes = Vec::new();
    match cfg.initial_data.i2_policy {
        I2Policy::Reject => {
            evolution::check_compatibility(&curve, &xi, kappa, mode).map_err(RunError::Compatibility)?;
        }
        I2Policy::Project => {
            let (adjusted, amps) =
                evolution::project_compatibility(&curve, &xi, kappa, mode).map_err(RunError::Compatibility)?;
            evolution::check_compatibility(&curve, &adjusted, kappa, mode).map_err(RunError::Compatibility)?;
            xi = adjusted;
            amplitudes = amps;
        }
    }
    let floor = cfg.initial_data.c_min;
    if xi.min() < floor {
        return Err(invalid(format!("initial concentration {:e} below c_min {:e}", xi.min(), floor)));
    }
    Ok(InitialData { state: SimState::new(curve, xi, kappa, mode), residual, amplitudes })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub quiet: bool,
    /// Snapshot to resume from.
    pub restart: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub steps: usize,
    pub t_reached: f64,
    pub final_state: SimState,
}

fn snapshot_of(cfg: &RunConfig, sim: &Simulation) -> Snapshot {
    Snapshot {
        t: sim.state.t,
        config: cfg.clone(),
        r: sim.state.curve.r.clone(),
        xi: sim.state.xi.clone(),
        record: sim.last.expect("record exists after the first diagnostics"),
    }
}

/// Times in `(t0, t_final]` at which snapshots are written.
pub fn stop_times(t0: f64, t_final: f64, interval: Option<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    if let Some(dt) = interval {
        let mut k = 1usize;
        loop {
            let t = k as f64 * dt;
            if t >= t_final * (1.0 - 1e-12) {
                break;
            }
            if t > t0 * (1.0 + 1e-12) + 1e-15 {
                out.push(t);
            }
            k += 1;
        }
    }
    if t_final > t0 {
        out.push(t_final);
    }
    out
}

fn rel(out: &Path, path: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

/// Runs the configuration into `out`, from the initial data or from a
/// snapshot. On a stepping failure the manifest is marked partial.
pub fn run_to_dir(cfg: &RunConfig, out: &Path, opts: &RunOptions) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let evo = cfg.evolution_options();
    let (mut sim, index0) = match &opts.restart {
        Some(path) => {
            let snap = output::read_snapshot(path)?;
            if snap.xi.grid.n_phi != cfg.grid.n_phi || snap.xi.grid.n_s != cfg.grid.n_s {
                return Err(invalid(format!(
                    "snapshot grid {}x{} does not match the configuration {}x{}",
                    snap.xi.grid.n_phi, snap.xi.grid.n_s, cfg.grid.n_phi, cfg.grid.n_s
                )));
            }
            if snap.config.model != cfg.model {
                return Err(invalid("snapshot model differs from the configuration"));
            }
            let curve = PolarCurve::new(snap.r).with_scheme(cfg.grid.derivatives);
            let mut state = SimState::new(curve, snap.xi, cfg.model.kappa, cfg.model.mode);
            state.t = snap.t;
            let index = cfg.output.snapshot_interval.map_or(0, |dt| (snap.t / dt).round() as usize);
            (Simulation::resume(state, snap.record, evo, cfg.dt_policy()), Some(index))
        }
        None => (Simulation::new(initial_data(cfg)?.state, evo, cfg.dt_policy()), None),
    };
    std::fs::create_dir_all(out).map_err(|e| OutputError::Io(format!("{}: {e}", out.display())))?;
    let csv_path = out.join("diagnostics.csv");
    let mut csv = DiagnosticsWriter::create(&csv_path)?;
    let mut files = vec![rel(out, &csv_path)];
    let first = match sim.last {
        Some(rec) if index0.is_some() => rec,
        _ => sim
            .initial_record()
            .map_err(|source| RunError::Simulation { t: sim.state.t, source })?,
    };
    csv.write(&first)?;

    let write_frame = |sim: &Simulation, k: usize, files: &mut Vec<String>| -> Result<(), RunError> {
        let p = out.join(format!("snapshot_{k:04}.json"));
        output::write_snapshot(&p, &snapshot_of(cfg, sim))?;
        files.push(rel(out, &p));
        if cfg.output.emit_svg {
            let p = out.join(format!("frame_{k:04}.svg"));
            let svg = output::svg_frame(&sim.state.curve, &sim.state.xi, sim.state.t);
            std::fs::write(&p, svg).map_err(|e| OutputError::Io(format!("{}: {e}", p.display())))?;
            files.push(rel(out, &p));
        }
        Ok(())
    };

    let mut index = index0.unwrap_or(0);
    if index0.is_none() {
        write_frame(&sim, 0, &mut files)?;
    }
    let t_final = cfg.time.t_final;
    let mut steps = 0usize;
    let mut failure = None;
    for stop in stop_times(sim.state.t, t_final, cfg.output.snapshot_interval) {
        let mut io_error = None;
        let result = sim.run_until(stop, |rec, _| {
            steps += 1;
            if io_error.is_none() {
                io_error = csv.write(rec).err();
            }
        });
        if let Some(e) = io_error {
            return Err(e.into());
        }
        if let Err(source) = result {
            failure = Some(RunError::Simulation { t: sim.state.t, source });
            break;
        }
        index += 1;
        write_frame(&sim, index, &mut files)?;
        if !opts.quiet {
            eprintln!("t = {:.6}  steps = {steps}  min_r = {:.6}", sim.state.t, sim.state.curve.min_r());
        }
    }
    csv.finish()?;
    let status = if failure.is_some() { RunStatus::Partial } else { RunStatus::Complete };
    if failure.is_none() {
        let p = out.join("final.json");
        output::write_snapshot(&p, &snapshot_of(cfg, &sim))?;
        files.push(rel(out, &p));
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        status: status.clone(),
        mode: cfg.model.mode.name().into(),
        t_final,
        t_reached: sim.state.t,
        steps,
        error: failure.as_ref().map(|e| e.to_string()),
        files,
    };
    output::write_manifest(&out.join("manifest.json"), &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(RunSummary { status, steps, t_reached: sim.state.t, final_state: sim.state }),
    }
}

/// Radial profile `ĉ(s)` of the configured initial data on a circle, with the
/// angle-averaged projection amplitude added when the policy projects.
fn radial_profile(cfg: &RunConfig, radius: f64, mean_amp: f64) -> Result<Box<dyn Fn(f64) -> f64>, RunError> {
    let kappa = cfg.model.kappa;
    let base: Box<dyn Fn(f64) -> f64> = match &cfg.initial_concentration {
        ConcentrationPreset::Uniform { value } => {
            let v = *value;
            Box::new(move |_| v)
        }
        ConcentrationPreset::Equilibrium => {
            let v = kappa / radius;
            Box::new(move |_| v)
        }
        ConcentrationPreset::GaussianBump { base, amplitude, center, width } => {
            if center[0].hypot(center[1]) > 0.0 {
                return Err(invalid("radial reference needs a bump centered at the origin"));
            }
            let (b, a, w) = (*base, *amplitude, *width);
            Box::new(move |s: f64| b + a * (-(s * radius).powi(2) / (2.0 * w * w)).exp())
        }
    };
    let adjust = evolution::projected_radial_profile(0.0, mean_amp);
    Ok(Box::new(move |s| base(s) + adjust(s)))
}

/// Output of [`oracle_to_dir`].
#[derive(Debug, Clone)]
pub struct OracleSummary {
    pub times: Vec<f64>,
    pub radius: Vec<f64>,
    /// Final radial profile `ĉ(s_i)` on the fine grid (empty for the ODE).
    pub profile: Vec<f64>,
}

/// Fine radial grid of the reference run.
pub const ORACLE_NODES: usize = 1025;

/// Radially symmetric reference for circular initial data, written to
/// `oracle.csv` (`t, radius, mass, c_boundary`).
pub fn oracle_to_dir(cfg: &RunConfig, out: &Path) -> Result<OracleSummary, RunError> {
    cfg.validate()?;
    let radius = match cfg.initial_shape {
        ShapePreset::Circle { radius } => radius,
        _ => return Err(invalid("the radial reference needs a circular initial shape")),
    };
    let kappa = cfg.model.kappa;
    let t_final = cfg.time.t_final;
    let mut rows: Vec<[f64; 4]> = Vec::new();
    let mut profile = Vec::new();
    match cfg.model.mode {
        Mode::Full | Mode::Osmosis => {
            let init = initial_data(cfg)?;
            let amp = if init.amplitudes.is_empty() {
                0.0
            } else {
                init.amplitudes.iter().sum::<f64>() / init.amplitudes.len() as f64
            };
            let initial = radial_profile(cfg, radius, amp)?;
            let mut s = RadialState::from_profile(radius, ORACLE_NODES, kappa, 2, initial).map_err(RunError::Oracle)?;
            let dt = (1e-3f64).min(s.h());
            rows.push([s.t, s.radius, s.mass(), s.boundary_value()]);
            while s.t < t_final {
                let step = dt.min(t_final - s.t);
                let target = s.t + step;
                s = oracle::radial_step(&s, step).map_err(RunError::Oracle)?;
                s.t = if t_final - target < 1e-12 * t_final.max(1.0) { t_final } else { target };
                rows.push([s.t, s.radius, s.mass(), s.boundary_value()]);
            }
            profile = s.c_hat;
        }
        Mode::FastDiffusion | Mode::FastDiffusionNoflow => {
            let init = initial_data(cfg)?;
            let mass = init.state.mass().map_err(|e| invalid(e.to_string()))?;
            let sol = oracle::fastdiff_ode(radius, mass, kappa, t_final, 1e-4).map_err(RunError::Oracle)?;
            for (t, r) in sol.t.iter().zip(&sol.radius) {
                rows.push([*t, *r, mass, mass / (std::f64::consts::PI * r * r)]);
            }
        }
        Mode::Impermeable => {
            return Err(invalid("no radial reference for the impermeable mode; a circle is stationary"));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| OutputError::Io(format!("{}: {e}", out.display())))?;
    let mut text = String::from("t,radius,mass,c_boundary\n");
    for r in &rows {
        text.push_str(&r.iter().map(|v| output::format_value(*v)).collect::<Vec<_>>().join(","));
        text.push('\n');
    }
    let path = out.join("oracle.csv");
    std::fs::write(&path, text).map_err(|e| OutputError::Io(format!("{}: {e}", path.display())))?;
    Ok(OracleSummary { times: rows.iter().map(|r| r[0]).collect(), radius: rows.iter().map(|r| r[1]).collect(),
        profile,
    })
}
