//! Free energy, dissipation and the nondimensional scales.
//!
//! The nondimensional energy is `E = ∫ c ln c + κ|Γ|` and the dissipation
//! `Ψ = ½∫|f − cu|²/c + ½∫|ε(u)|² + ½∮(u·n − V_n)²`. Along solutions
//! `dE/dt = −2Ψ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::InteriorField;
use crate::geometry::{node_volumes, CurveGeometry};
use crate::transport::{ConcentrationField, TransportOperators};

/// Below this `c ln c` is taken as its limit 0.
pub const ENTROPY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DissipationBreakdown {
    pub solute: f64,
    pub viscous: f64,
    pub membrane: f64,
    pub total: f64,
}

impl DissipationBreakdown {
    pub fn new(solute: f64, viscous: f64, membrane: f64) -> Self {
        Self { solute, viscous, membrane, total: solute + viscous + membrane }
    }
}

fn entropy_density(c: f64) -> f64 {
    if c < ENTROPY_FLOOR {
        0.0
    } else {
        c * c.ln()
    }
}

/// `∫ c ln c` by the node-volume quadrature.
pub fn entropy(geo: &CurveGeometry, xi: &ConcentrationField) -> f64 {
    let grid = xi.grid;
    let vol = node_volumes(&grid, &geo.curve.r);
    vol.iter().zip(&xi.values).map(|(v, c)| v * entropy_density(*c)).sum()
}

/// `∫ c` by the node-volume quadrature.
pub fn solute_mass(geo: &CurveGeometry, xi: &ConcentrationField) -> f64 {
    let vol = node_volumes(&xi.grid, &geo.curve.r);
    vol.iter().zip(&xi.values).map(|(v, c)| v * c).sum()
}

pub fn energy(geo: &CurveGeometry, xi: &ConcentrationField, kappa: f64) -> f64 {
    entropy(geo, xi) + kappa * geo.perimeter()
}

/// Solute flux `f = c u − ∇c`.
pub fn recovered_flux(
    xi: &ConcentrationField,
    ops: &TransportOperators,
    velocity: Option<&InteriorField<[f64; 2]>>,
) -> InteriorField<[f64; 2]> {
    let mut f = ops.gradient(xi);
    for (k, v) in f.values.iter_mut().enumerate() {
        let c = xi.values[k];
        let u = velocity.map_or([0.0, 0.0], |u| u.values[k]);
        *v = [c * u[0] - v[0], c * u[1] - v[1]];
    }
    f
}

/// `½∫|∇c|²/c`; nodes with `c ≤ ENTROPY_FLOOR` contribute nothing.
pub fn solute_dissipation(xi: &ConcentrationField, ops: &TransportOperators) -> f64 {
    let grad = ops.gradient(xi);
    let weights = ops.node_volumes();
    let mut acc = 0.0;
    for k in 0..xi.values.len() {
        let c = xi.values[k];
        if c > ENTROPY_FLOOR {
            let g = grad.values[k];
            acc += weights.values[k] * (g[0] * g[0] + g[1] * g[1]) / c;
        }
    }
    0.5 * acc
}

/// `½∫|ε(u)|²` through the energy identity `∫|ε(u)|² = ∮ (traction)·u`,
/// with traction `κHn`. Clamped at 0 against rounding.
pub fn viscous_dissipation(geo: &CurveGeometry, kappa: f64, boundary_velocity: &[[f64; 2]]) -> f64 {
    let work: f64 = (0..geo.n_phi())
        .map(|j| {
            let n = geo.normal[j];
            let u = boundary_velocity[j];
            kappa * geo.curvature[j] * (n[0] * u[0] + n[1] * u[1]) * geo.ds[j]
        })
        .sum();
    (0.5 * work).max(0.0)
}

/// `½∮ w²` for a boundary quantity `w` (the membrane flux).
pub fn boundary_square(geo: &CurveGeometry, w: &[f64]) -> f64 {
    0.5 * w.iter().zip(&geo.ds).map(|(w, ds)| w * w * ds).sum::<f64>()
}

/// Membrane flux `κH + c` on the boundary.
pub fn membrane_flux(geo: &CurveGeometry, kappa: f64, trace: &[f64]) -> Vec<f64> {
    geo.curvature.iter().zip(trace).map(|(h, c)| kappa * h + c).collect()
}

/// Dimensional constants of the model, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParameters {
    /// inverse solute mobility
    pub eta1: f64,
    /// shear viscosity
    pub eta2: f64,
    /// inverse membrane permeability
    pub eta3: f64,
    /// surface energy density
    pub alpha: f64,
    /// entropy scale
    pub gamma: f64,
    /// spatial dimension
    pub dim: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub length: f64,
    pub time: f64,
    pub force: f64,
    pub mass: f64,
    pub kappa: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParameterError {
    #[error("parameter {0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("dimension must be 2 or 3, got {0}")]
    Dimension(u32),
}

pub fn nondimensionalize(p: &PhysicalParameters) -> Result<Scales, ParameterError> {
    for (name, v) in
        [("eta1", p.eta1), ("eta2", p.eta2), ("eta3", p.eta3), ("alpha", p.alpha), ("gamma", p.gamma)]
    {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ParameterError::NotPositive(name));
        }
    }
    if !(2..=3).contains(&p.dim) {
        return Err(ParameterError::Dimension(p.dim));
    }
    let n = p.dim as i32;
    let length = p.eta2 / p.eta3;
    let time = length * length * p.eta1 / p.gamma;
    let force = length.powi(n - 1) * p.eta2 / time;
    let mass = length * force / p.gamma;
    let kappa = p.alpha * p.eta1 * p.eta2.powi(n - 1) / (p.gamma * p.eta3.powi(n));
    Ok(Scales { length, time, force, mass, kappa })
}
