//! Coupled time stepping of boundary and concentration.
//!
//! Each step uses the state at `t_n` for the curvature, the Stokes flow and
//! the boundary trace of `c`, moves the curve, and then transports the
//! solute from the old to the new domain.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energetics::{self, DissipationBreakdown};
use crate::field::{BoundaryField, InteriorField};
use crate::geometry::{build_domain_map, CurveGeometry, GeometryError, PolarCurve};
use crate::linalg::cyclic_tridiagonal;
use crate::stokes::{curvature_traction, solve_traction_on, StokesError, StokesOptions, StokesSolution};
use crate::transport::{self, build_operators, BoundaryClosure, ConcentrationField, TransportError, TransportOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Stokes flow, osmotic membrane and solute transport.
    Full,
    /// Immobile solvent: `u = 0`, `V_n = κH + c`.
    Osmosis,
    /// Impermeable membrane: `V_n = u·n`, `∂n c = 0`.
    Impermeable,
    /// Instant mixing: `c = M/|Ω|`, `V_n = κH + c + u·n`.
    FastDiffusion,
    /// Instant mixing without flow: `V_n = κH + M/|Ω|`.
    FastDiffusionNoflow,
}

impl Mode {
    pub const ALL: [Mode; 5] =
        [Mode::Full, Mode::Osmosis, Mode::Impermeable, Mode::FastDiffusion, Mode::FastDiffusionNoflow];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Osmosis => "osmosis",
            Mode::Impermeable => "impermeable",
            Mode::FastDiffusion => "fast_diffusion",
            Mode::FastDiffusionNoflow => "fast_diffusion_noflow",
        }
    }

    /// One-line statement of the governing equations.
    pub fn equations(self) -> &'static str {
        match self {
            Mode::Full => {
                "Stokes traction problem with κHn; ∂t c − Δc = −∇c·u; ∂n c + c(κH + c) = 0; V_n = κH + c + u·n"
            }
            Mode::Osmosis => "u = 0; ∂t c − Δc = 0; ∂n c + c(κH + c) = 0; V_n = κH + c",
            Mode::Impermeable => "Stokes traction problem with κHn; ∂t c − Δc = −∇c·u; ∂n c = 0; V_n = u·n",
            Mode::FastDiffusion => "Stokes traction problem with κHn; c = M/|Ω|; V_n = κH + M/|Ω| + u·n",
            Mode::FastDiffusionNoflow => "u = 0; c = M/|Ω|; V_n = κH + M/|Ω| (curvature flow with nonlocal braking)",
        }
    }

    pub fn has_flow(self) -> bool {
        matches!(self, Mode::Full | Mode::Impermeable | Mode::FastDiffusion)
    }

    pub fn uniform_concentration(self) -> bool {
        matches!(self, Mode::FastDiffusion | Mode::FastDiffusionNoflow)
    }

    fn curvature_driven(self) -> bool {
        self != Mode::Impermeable
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (expected one of full, osmosis, impermeable, fast_diffusion, fast_diffusion_noflow)"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("star shape lost: min radius {min_r:e} below {floor:e}")]
    StarShapeLoss { min_r: f64, floor: f64 },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("initial data violates the compatibility condition: residual {residual:e} > {tolerance:e}")]
    Incompatible { residual: f64, tolerance: f64 },
    #[error("initial concentration {min:e} below the floor {floor:e}")]
    BelowFloor { min: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionOptions {
    pub stokes: StokesOptions,
    pub transport: TransportOptions,
    /// Smallest admissible radius.
    pub r_floor: f64,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self { stokes: StokesOptions::default(), transport: TransportOptions::default(), r_floor: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub curve: PolarCurve,
    pub xi: ConcentrationField,
    pub kappa: f64,
    pub mode: Mode,
    /// Stokes solution for `curve`, if already computed.
    pub stokes: Option<StokesSolution>,
}

impl SimState {
    pub fn new(curve: PolarCurve, xi: ConcentrationField, kappa: f64, mode: Mode) -> Self {
        Self { t: 0.0, curve, xi, kappa, mode, stokes: None }
    }

    pub fn geometry(&self) -> Result<CurveGeometry, GeometryError> {
        CurveGeometry::new(&self.curve)
    }

    pub fn mass(&self) -> Result<f64, GeometryError> {
        Ok(energetics::solute_mass(&self.geometry()?, &self.xi))
    }

    pub fn energy(&self) -> Result<f64, GeometryError> {
        Ok(energetics::energy(&self.geometry()?, &self.xi, self.kappa))
    }

    /// Boundary trace of the concentration.
    pub fn trace(&self) -> Vec<f64> {
        self.xi.boundary()
    }
}

/// Velocities of a state: flow, boundary normal velocity and membrane flux.
#[derive(Debug, Clone)]
pub struct Processes {
    pub geometry: CurveGeometry,
    /// Interior fluid velocity on the concentration grid.
    pub velocity: Option<InteriorField<[f64; 2]>>,
    /// `u·n` on the boundary (zero without flow).
    pub normal_flow: BoundaryField,
    /// `V_n` prescribed by the mode.
    pub normal_velocity: BoundaryField,
    /// `κH + c` on the boundary.
    pub membrane_flux: BoundaryField,
}

/// Computes (and caches) the Stokes solution and derives `V_n`.
pub fn processes(state: &mut SimState, opts: &EvolutionOptions) -> Result<Processes, EvolutionError> {
    let geo = state.geometry()?;
    let n = geo.n_phi();
    let mode = state.mode;
    let (velocity, normal_flow) = if mode.has_flow() {
        if state.stokes.is_none() {
            let so = StokesOptions { n_s: state.xi.grid.n_s, ..opts.stokes };
            let traction = curvature_traction(&geo, state.kappa);
            state.stokes = Some(solve_traction_on(&geo, &traction, &so)?);
        }
        let sol = state.stokes.as_ref().expect("cached above");
        let un = (0..n)
            .map(|j| {
                let (u, nr) = (sol.boundary_velocity[j], geo.normal[j]);
                u[0] * nr[0] + u[1] * nr[1]
            })
            .collect();
        (Some(sol.interior.clone()), un)
    } else {
        (None, vec![0.0; n])
    };
    let trace = if mode.uniform_concentration() {
        vec![energetics::solute_mass(&geo, &state.xi) / geo.area(); n]
    } else {
        state.trace()
    };
    let membrane_flux = energetics::membrane_flux(&geo, state.kappa, &trace);
    let normal_velocity = match mode {
        Mode::Impermeable => normal_flow.clone(),
        _ => membrane_flux.iter().zip(&normal_flow).map(|(a, b)| a + b).collect(),
    };
    Ok(Processes { geometry: geo, velocity, normal_flow, normal_velocity, membrane_flux })
}

/// Default step `0.25·min(h², h/max|V_n|)` with `h` the smallest boundary
/// node spacing, further limited so that fluid and mesh Courant numbers on
/// the concentration grid stay below one half.
pub fn auto_dt(state: &SimState, procs: &Processes) -> f64 {
    let h = procs.geometry.min_ds();
    let vmax = procs.normal_velocity.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut dt = 0.25 * h * h;
    if vmax > 0.0 {
        dt = dt.min(0.25 * h / vmax);
    }
    if let Some(u) = &procs.velocity {
        let umax = u.values.iter().fold(0.0f64, |a, v| a.max(v[0].hypot(v[1])));
        let cell = state.xi.grid.h() * state.curve.min_r();
        if umax > 0.0 {
            dt = dt.min(0.5 * cell / umax);
        }
    }
    dt
}

/// Second-order periodic second difference.
fn second_difference(r: &[f64], dphi: f64) -> Vec<f64> {
    let n = r.len();
    (0..n).map(|j| (r[(j + 1) % n] - 2.0 * r[j] + r[(j + n - 1) % n]) / (dphi * dphi)).collect()
}

/// New boundary radii after one step with `ṙ = Λ V_n`, the `r''` part of
/// `κΛH` treated implicitly. Without curvature in `V_n` the step is explicit.
pub fn advance_curve(
    curve: &PolarCurve,
    procs: &Processes,
    kappa: f64,
    mode: Mode,
    dt: f64,
) -> PolarCurve {
    let geo = &procs.geometry;
    let n = geo.n_phi();
    let dphi = TAU / n as f64;
    let lambda = geo.normal_velocity_factor();
    let r = &curve.r;
    if !mode.curvature_driven() {
        // Explicit in r²: the area then changes by exactly dt∮V_n ds.
        let r = (0..n).map(|j| (r[j] * r[j] + 2.0 * dt * r[j] * lambda[j] * procs.normal_velocity[j]).sqrt()).collect();
        return PolarCurve { r, scheme: curve.scheme };
    }
    let mut rhs: Vec<f64> = (0..n).map(|j| r[j] + dt * lambda[j] * procs.normal_velocity[j]).collect();
    let weight: Vec<f64> = (0..n).map(|j| dt * kappa / (r[j] * r[j] + geo.dr[j] * geo.dr[j])).collect();
    let d2 = second_difference(r, dphi);
    for j in 0..n {
        rhs[j] -= weight[j] * d2[j];
    }
    let off: Vec<f64> = weight.iter().map(|w| -w / (dphi * dphi)).collect();
    let diag: Vec<f64> = weight.iter().map(|w| 1.0 + 2.0 * w / (dphi * dphi)).collect();
    PolarCurve { r: cyclic_tridiagonal(&off, &diag, &off, &rhs), scheme: curve.scheme }
}

/// Advances `state` by `dt` using its processes.
pub fn advance(
    state: &SimState,
    procs: &Processes,
    dt: f64,
    opts: &EvolutionOptions,
) -> Result<SimState, EvolutionError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EvolutionError::InvalidStep(dt));
    }
    let curve = advance_curve(&state.curve, procs, state.kappa, state.mode, dt);
    let min_r = curve.r.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_r >= opts.r_floor) {
        return Err(EvolutionError::StarShapeLoss { min_r, floor: opts.r_floor });
    }
    curve.validate()?;
    let grid = state.xi.grid;
    let xi = if state.mode.uniform_concentration() {
        let mass = energetics::solute_mass(&procs.geometry, &state.xi);
        let area = CurveGeometry::new(&curve)?.area();
        InteriorField::filled(grid, mass / area)
    } else {
        let old = build_domain_map(&state.curve, None, grid.n_s)?;
        let new = build_domain_map(&curve, None, grid.n_s)?;
        let (xi, _) = transport::step(
            &state.xi,
            dt,
            &old,
            &new,
            procs.velocity.as_ref(),
            &BoundaryClosure::ZeroNetFlux,
            &opts.transport,
        )?;
        xi
    };
    Ok(SimState { t: state.t + dt, curve, xi, kappa: state.kappa, mode: state.mode, stokes: None })
}

/// One coupled step: processes at the current state, then [`advance`].
pub fn step_coupled(state: &mut SimState, dt: f64, opts: &EvolutionOptions) -> Result<SimState, EvolutionError> {
    let procs = processes(state, opts)?;
    advance(state, &procs, dt, opts)
}

/// Per-step record of integral quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub area: f64,
    pub perimeter: f64,
    pub mass: f64,
    pub energy: f64,
    pub diss_solute: f64,
    pub diss_viscous: f64,
    pub diss_membrane: f64,
    pub diss_total: f64,
    pub var_residual: f64,
    pub min_c: f64,
    pub max_c: f64,
    pub min_r: f64,
    pub dt_used: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 14] = [
        "t",
        "area",
        "perimeter",
        "mass",
        "energy",
        "diss_solute",
        "diss_viscous",
        "diss_membrane",
        "diss_total",
        "var_residual",
        "min_c",
        "max_c",
        "min_r",
        "dt_used",
    ];

    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.area,
            self.perimeter,
            self.mass,
            self.energy,
            self.diss_solute,
            self.diss_viscous,
            self.diss_membrane,
            self.diss_total,
            self.var_residual,
            self.min_c,
            self.max_c,
            self.min_r,
            self.dt_used,
        ]
    }

    pub fn from_values(v: [f64; 14]) -> Self {
        Self {
            t: v[0],
            area: v[1],
            perimeter: v[2],
            mass: v[3],
            energy: v[4],
            diss_solute: v[5],
            diss_viscous: v[6],
            diss_membrane: v[7],
            diss_total: v[8],
            var_residual: v[9],
            min_c: v[10],
            max_c: v[11],
            min_r: v[12],
            dt_used: v[13],
        }
    }

    pub fn dissipation(&self) -> DissipationBreakdown {
        DissipationBreakdown {
            solute: self.diss_solute,
            viscous: self.diss_viscous,
            membrane: self.diss_membrane,
            total: self.diss_total,
        }
    }
}

/// Floor of the residual denominator.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// Dissipation of the processes of a state, by mode.
pub fn dissipation(state: &SimState, procs: &Processes) -> DissipationBreakdown {
    let geo = &procs.geometry;
    let mode = state.mode;
    let solute = if mode.uniform_concentration() {
        0.0
    } else {
        let map = build_domain_map(&state.curve, None, state.xi.grid.n_s).expect("validated curve");
        energetics::solute_dissipation(&state.xi, &build_operators(&map))
    };
    let viscous = match &state.stokes {
        Some(sol) if mode.has_flow() => energetics::viscous_dissipation(geo, state.kappa, &sol.boundary_velocity),
        _ => 0.0,
    };
    let membrane =
        if mode == Mode::Impermeable { 0.0 } else { energetics::boundary_square(geo, &procs.membrane_flux) };
    DissipationBreakdown::new(solute, viscous, membrane)
}

/// `|ΔE/dt + (Ψ_n + Ψ_{n−1})| / max(|ΔE/dt|, 1e−12)`, the discrete form of
/// `dE/dt + 2Ψ = 0` with the trapezoid rule for `2Ψ`. The flag marks a
/// denominator at the floor.
pub fn variational_residual(prev: &DiagnosticsRecord, energy: f64, diss_total: f64, dt: f64) -> (f64, bool) {
    let rate = (energy - prev.energy) / dt;
    let denom = rate.abs().max(RESIDUAL_FLOOR);
    ((rate + diss_total + prev.diss_total).abs() / denom, rate.abs() <= RESIDUAL_FLOOR)
}

pub fn diagnose(
    state: &SimState,
    procs: &Processes,
    prev: Option<&DiagnosticsRecord>,
    dt_used: f64,
) -> DiagnosticsRecord {
    let geo = &procs.geometry;
    let energy = energetics::energy(geo, &state.xi, state.kappa);
    let diss = dissipation(state, procs);
    let var_residual = match prev {
        Some(p) if dt_used > 0.0 => variational_residual(p, energy, diss.total, dt_used).0,
        _ => f64::NAN,
    };
    DiagnosticsRecord {
        t: state.t,
        area: geo.area(),
        perimeter: geo.perimeter(),
        mass: energetics::solute_mass(geo, &state.xi),
        energy,
        diss_solute: diss.solute,
        diss_viscous: diss.viscous,
        diss_membrane: diss.membrane,
        diss_total: diss.total,
        var_residual,
        min_c: state.xi.min(),
        max_c: state.xi.max(),
        min_r: state.curve.min_r(),
        dt_used,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtPolicy {
    Auto,
    Fixed(f64),
}

/// Sequential driver that keeps the last diagnostics record for the
/// variational residual.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SimState,
    pub opts: EvolutionOptions,
    pub dt_policy: DtPolicy,
    pub last: Option<DiagnosticsRecord>,
}

impl Simulation {
    pub fn new(state: SimState, opts: EvolutionOptions, dt_policy: DtPolicy) -> Self {
        Self { state, opts, dt_policy, last: None }
    }

    /// Resumes from a state and the record written with it.
    pub fn resume(state: SimState, last: DiagnosticsRecord, opts: EvolutionOptions, dt_policy: DtPolicy) -> Self {
        Self { state, opts, dt_policy, last: Some(last) }
    }

    /// Diagnostics of the current state (no step taken).
    pub fn initial_record(&mut self) -> Result<DiagnosticsRecord, EvolutionError> {
        let procs = processes(&mut self.state, &self.opts)?;
        let rec = diagnose(&self.state, &procs, None, 0.0);
        self.last = Some(rec);
        Ok(rec)
    }

    /// One step of at most `dt_max`; returns the new record.
    pub fn step(&mut self, dt_max: f64) -> Result<DiagnosticsRecord, EvolutionError> {
        let procs = processes(&mut self.state, &self.opts)?;
        if self.last.is_none() {
            self.last = Some(diagnose(&self.state, &procs, None, 0.0));
        }
        let natural = match self.dt_policy {
            DtPolicy::Auto => auto_dt(&self.state, &procs),
            DtPolicy::Fixed(dt) => dt,
        };
        let (dt, landing) = if natural >= dt_max * (1.0 - 1e-9) { (dt_max, true) } else { (natural, false) };
        let target = self.state.t + dt_max;
        let mut next = advance(&self.state, &procs, dt, &self.opts)?;
        if landing {
            next.t = target;
        }
        let next_procs = processes(&mut next, &self.opts)?;
        let rec = diagnose(&next, &next_procs, self.last.as_ref(), dt);
        self.state = next;
        self.last = Some(rec);
        Ok(rec)
    }

    /// Steps until `t_stop`, landing on it exactly. `on_step` sees every
    /// new record.
    pub fn run_until(
        &mut self,
        t_stop: f64,
        mut on_step: impl FnMut(&DiagnosticsRecord, &SimState),
    ) -> Result<(), EvolutionError> {
        while self.state.t < t_stop {
            let rec = self.step(t_stop - self.state.t)?;
            on_step(&rec, &self.state);
        }
        Ok(())
    }
}

/// Profile used to adjust boundary derivative data: `ω(s) = (1−s)e^{−(1−s)/δ}`,
/// with `ω(1) = 0` and `ω'(1) = −1`.
fn projection_profile(s: f64, delta: f64) -> f64 {
    (1.0 - s) * (-(1.0 - s) / delta).exp()
}

pub const PROJECTION_WIDTH: f64 = 0.1;

/// Discrete boundary condition residual of initial data: `∂n c + κHc + c²`
/// with a membrane, `∂n c` for the impermeable mode, and zero when the
/// concentration is uniform by construction.
pub fn compatibility_residual(
    curve: &PolarCurve,
    xi: &ConcentrationField,
    kappa: f64,
    mode: Mode,
) -> Result<BoundaryField, EvolutionError> {
    let map = build_domain_map(curve, None, xi.grid.n_s)?;
    let ops = build_operators(&map);
    Ok(match mode {
        Mode::Full | Mode::Osmosis => transport::membrane_bc_residual(xi, &map.geometry.curvature, kappa, &ops),
        Mode::Impermeable => ops.normal_derivative(xi),
        Mode::FastDiffusion | Mode::FastDiffusionNoflow => vec![0.0; curve.n_phi()],
    })
}

/// Adds `a(φ)ω(s)` to `xi` so that the discrete compatibility residual
/// vanishes. The boundary values are unchanged; only the normal derivative
/// moves. Returns the adjusted field and the amplitudes `a`.
pub fn project_compatibility(
    curve: &PolarCurve,
    xi: &ConcentrationField,
    kappa: f64,
    mode: Mode,
) -> Result<(ConcentrationField, Vec<f64>), EvolutionError> {
    let grid = xi.grid;
    let map = build_domain_map(curve, None, grid.n_s)?;
    let residual = compatibility_residual(curve, xi, kappa, mode)?;
    let h = grid.h();
    let ds_omega =
        (-4.0 * projection_profile(1.0 - h, PROJECTION_WIDTH) + projection_profile(1.0 - 2.0 * h, PROJECTION_WIDTH)) / (2.0 * h);
    let amps: Vec<f64> = (0..grid.n_phi)
        .map(|j| {
            let g = map.g[j];
            let b_omega = (1.0 + g * g).sqrt() * ds_omega / curve.r[j];
            -residual[j] / b_omega
        })
        .collect();
    let mut out = xi.clone();
    for i in 0..grid.n_s {
        let w = projection_profile(grid.s(i), PROJECTION_WIDTH);
        for (j, a) in amps.iter().enumerate() {
            let v = out.at(i, j) + a * w;
            out.set(i, j, v);
        }
    }
    // The origin is a single point.
    let origin = out.ring(0).iter().sum::<f64>() / grid.n_phi as f64;
    for j in 0..grid.n_phi {
        out.set(0, j, origin);
    }
    Ok((out, amps))
}

/// Tolerance `1e−6(1 + max c)` for the compatibility check.
pub fn compatibility_tolerance(xi: &ConcentrationField) -> f64 {
    1e-6 * (1.0 + xi.max().abs())
}

pub fn check_compatibility(
    curve: &PolarCurve,
    xi: &ConcentrationField,
    kappa: f64,
    mode: Mode,
) -> Result<f64, EvolutionError> {
    let res = compatibility_residual(curve, xi, kappa, mode)?;
    let worst = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let tolerance = compatibility_tolerance(xi);
    if worst > tolerance {
        return Err(EvolutionError::Incompatible { residual: worst, tolerance });
    }
    Ok(worst)
}

/// Radial profile `ĉ(s) = c0 + a ω(s)` of projected uniform data on a circle, the
/// same profile the 2D projection produces.
pub fn projected_radial_profile(c0: f64, amplitude: f64) -> impl Fn(f64) -> f64 {
    move |s| c0 + amplitude * projection_profile(s, PROJECTION_WIDTH)
}
