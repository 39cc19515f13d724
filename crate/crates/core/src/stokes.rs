//! Interior Stokes traction problem by a single-layer boundary integral
//! method.
//!
//! The stress is `σ(u, p) = ε(u) - pI` (viscosity 1/2), so the momentum
//! balance is `-½Δu + ∇p = 0` and the traction is `(ε(u) - pI)n`. The velocity
//! is a single layer `u = S ψ` with the Stokeslet
//! `G(d) = (1/2π)(-ln|d| I + d dᵀ/|d|²)`; the interior traction limit gives
//! the second-kind system `(½I + K')ψ = t`. Its three-dimensional kernel is
//! removed by bordering with the rigid motions, and the resulting velocity is
//! shifted by a rigid motion so that its area-weighted rigid moments vanish
//! on the mapped reference grid.
//!
//! The log part of the self interaction uses the product quadrature for
//! `ln(4 sin²((φ-φ')/2))` on the uniform grid; everything else is the
//! periodic trapezoid rule, so the boundary trace is spectrally accurate on
//! smooth curves.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::field::{BoundaryVectorField, InteriorField, RefGrid};
use crate::geometry::{node_volumes, CurveGeometry, GeometryError, PolarCurve};
use crate::{par, spectral};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StokesError {
    #[error("traction data is incompatible: rigid residuals {residuals:?} exceed {tolerance:e}")]
    IncompatibleData { residuals: [f64; 3], tolerance: f64 },
    #[error("boundary integral system is singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("traction has {got} entries, curve has {expected}")]
    Length { got: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesOptions {
    /// Radial resolution of the reference grid used for the rigid-moment
    /// quadrature and the cached interior field.
    pub n_s: usize,
    /// Relative tolerance for the solvability residuals.
    pub solvability_tol: f64,
    /// Largest acceptable pivot-ratio condition estimate.
    pub max_condition: f64,
}

impl Default for StokesOptions {
    fn default() -> Self {
        Self { n_s: 32, solvability_tol: 1e-8, max_condition: 1e13 }
    }
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    /// Velocity trace at the boundary nodes.
    pub boundary_velocity: BoundaryVectorField,
    /// Single-layer density ψ (force per unit length).
    pub layer_density: BoundaryVectorField,
    /// Pressure `p = q + c` at the origin.
    pub effective_pressure_const: f64,
    /// Discrete rigid moments `Σ V u·φ_k` after the projection.
    pub rigid_components: [f64; 3],
    /// Rigid motion `(a_x, a_y, ω)` subtracted from the single layer.
    pub rigid_correction: [f64; 3],
    /// Bordering multipliers; these vanish for compatible data.
    pub multipliers: [f64; 3],
    pub condition_estimate: f64,
    /// Velocity on the reference grid of the solve.
    pub interior: InteriorField<[f64; 2]>,
}

/// Rigid velocity fields `(1,0)`, `(0,1)`, `(-y,x)` at `x`.
pub fn rigid_modes(x: [f64; 2]) -> [[f64; 2]; 3] {
    [[1.0, 0.0], [0.0, 1.0], [-x[1], x[0]]]
}

fn add_rigid(u: &mut [f64; 2], x: [f64; 2], c: [f64; 3], sign: f64) {
    u[0] += sign * (c[0] - c[2] * x[1]);
    u[1] += sign * (c[1] + c[2] * x[0]);
}

/// `∮ t·φ_k ds` for the three rigid motions.
pub fn solvability_check(geo: &CurveGeometry, traction: &[[f64; 2]]) -> [f64; 3] {
    let mut res = [0.0; 3];
    for j in 0..geo.n_phi() {
        for (k, phi) in rigid_modes(geo.position[j]).iter().enumerate() {
            res[k] += (traction[j][0] * phi[0] + traction[j][1] * phi[1]) * geo.ds[j];
        }
    }
    res
}

/// Traction `κHn` of the membrane tension.
pub fn curvature_traction(geo: &CurveGeometry, kappa: f64) -> BoundaryVectorField {
    (0..geo.n_phi())
        .map(|j| {
            let f = kappa * geo.curvature[j];
            [f * geo.normal[j][0], f * geo.normal[j][1]]
        })
        .collect()
}

/// Weights of the product rule `∫ ln(4 sin²((t-τ)/2)) f(τ) dτ ≈ Σ_j R_{i-j} f_j`
/// on `n` uniform nodes, indexed by `(i - j) mod n`.
pub fn log_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let top = n.div_ceil(2);
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / nf;
            let mut w = 0.0;
            for m in 1..top {
                w -= (4.0 * PI / nf) * (m as f64 * t).cos() / m as f64;
            }
            if n % 2 == 0 {
                w -= 4.0 * PI / (nf * nf) * if k % 2 == 0 { 1.0 } else { -1.0 };
            }
            w
        })
        .collect()
}

/// Stokeslet `G(d)` with viscosity 1/2 applied to `f`.
#[inline]
fn stokeslet(d: [f64; 2], f: [f64; 2]) -> [f64; 2] {
    let r2 = d[0] * d[0] + d[1] * d[1];
    let l = -0.5 * r2.ln();
    let p = (d[0] * f[0] + d[1] * f[1]) / r2;
    [(l * f[0] + p * d[0]) / TAU, (l * f[1] + p * d[1]) / TAU]
}

/// Velocity of the exterior-point Stokeslet field with force `g` at `x0`.
pub fn stokeslet_velocity(x: [f64; 2], x0: [f64; 2], g: [f64; 2]) -> [f64; 2] {
    stokeslet([x[0] - x0[0], x[1] - x0[1]], g)
}

/// Traction `(ε - pI)n` at `x` of the Stokeslet with force `g` at `x0`.
pub fn stokeslet_traction(x: [f64; 2], n: [f64; 2], x0: [f64; 2], g: [f64; 2]) -> [f64; 2] {
    let d = [x[0] - x0[0], x[1] - x0[1]];
    let r2 = d[0] * d[0] + d[1] * d[1];
    let f = -(d[0] * n[0] + d[1] * n[1]) * (d[0] * g[0] + d[1] * g[1]) / (PI * r2 * r2);
    [f * d[0], f * d[1]]
}

pub fn solve_traction(
    curve: &PolarCurve,
    traction: &[[f64; 2]],
    opts: &StokesOptions,
) -> Result<StokesSolution, StokesError> {
    let geo = CurveGeometry::new(curve)?;
    solve_traction_on(&geo, traction, opts)
}

pub fn solve_traction_on(
    geo: &CurveGeometry,
    traction: &[[f64; 2]],
    opts: &StokesOptions,
) -> Result<StokesSolution, StokesError> {
    let n = geo.n_phi();
    if traction.len() != n {
        return Err(StokesError::Length { got: traction.len(), expected: n });
    }
    let residuals = solvability_check(geo, traction);
    let scale: f64 = traction
        .iter()
        .zip(&geo.ds)
        .map(|(t, ds)| t[0].hypot(t[1]) * ds * (1.0 + geo.curve.r.iter().copied().fold(0.0, f64::max)))
        .sum();
    let tolerance = opts.solvability_tol * (1.0 + scale);
    if residuals.iter().any(|r| r.abs() > tolerance) {
        return Err(StokesError::IncompatibleData { residuals, tolerance });
    }

    let (matrix, _) = assemble(geo);
    let dim = 2 * n + 3;
    let mut rhs = DVector::zeros(dim);
    for j in 0..n {
        rhs[2 * j] = traction[j][0];
        rhs[2 * j + 1] = traction[j][1];
    }
    let lu = matrix.lu();
    let condition = pivot_condition(&lu);
    if !condition.is_finite() || condition > opts.max_condition {
        return Err(StokesError::SingularSystem { condition });
    }
    let sol = lu.solve(&rhs).ok_or(StokesError::SingularSystem { condition: f64::INFINITY })?;
    let density: BoundaryVectorField = (0..n).map(|j| [sol[2 * j], sol[2 * j + 1]]).collect();
    let multipliers = [sol[2 * n], sol[2 * n + 1], sol[2 * n + 2]];

    let raw_trace = boundary_trace(geo, &density);
    let grid = RefGrid::new(opts.n_s, n);
    let mut interior = raw_interior(geo, &density, &raw_trace, &grid);
    let volumes = node_volumes(&grid, &geo.curve.r);
    let positions = grid_positions(geo, &grid);
    let correction = rigid_fit(&interior.values, &positions, &volumes);
    for (u, x) in interior.values.iter_mut().zip(&positions) {
        add_rigid(u, *x, correction, -1.0);
    }
    let boundary_velocity = raw_trace
        .iter()
        .zip(&geo.position)
        .map(|(u, x)| {
            let mut u = *u;
            add_rigid(&mut u, *x, correction, -1.0);
            u
        })
        .collect();
    let rigid_components = rigid_moments(&interior.values, &positions, &volumes);
    let effective_pressure_const = pressure_at(geo, &density, [0.0, 0.0]);

    Ok(StokesSolution {
        boundary_velocity,
        layer_density: density,
        effective_pressure_const,
        rigid_components,
        rigid_correction: correction,
        multipliers,
        condition_estimate: condition,
        interior,
    })
}

/// Velocity at every node of `grid` for a solution computed on `curve`.
pub fn evaluate_interior(
    curve: &PolarCurve,
    sol: &StokesSolution,
    grid: &RefGrid,
) -> Result<InteriorField<[f64; 2]>, StokesError> {
    let geo = CurveGeometry::new(curve)?;
    let trace = boundary_trace(&geo, &sol.layer_density);
    let mut field = raw_interior(&geo, &sol.layer_density, &trace, grid);
    let positions = grid_positions(&geo, grid);
    for (u, x) in field.values.iter_mut().zip(&positions) {
        add_rigid(u, *x, sol.rigid_correction, -1.0);
    }
    Ok(field)
}

/// Single-layer velocity at an arbitrary interior point, by direct quadrature
/// on an `upsample`-times refined boundary.
pub fn single_layer_at(geo: &CurveGeometry, density: &[[f64; 2]], x: [f64; 2], upsample: usize) -> [f64; 2] {
    let fine = FineBoundary::new(geo, density, upsample);
    fine.velocity(x)
}

fn pivot_condition(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    max / min
}

/// Bordered matrix `[½I + K', Φ; Φᵀ W, 0]` and its dimension.
fn assemble(geo: &CurveGeometry) -> (DMatrix<f64>, usize) {
    let n = geo.n_phi();
    let dim = 2 * n + 3;
    let dphi = geo.curve.dphi();
    let rows: Vec<[Vec<f64>; 2]> = par::map_range(n, |i| {
        let mut r0 = vec![0.0; dim];
        let mut r1 = vec![0.0; dim];
        let x = geo.position[i];
        let nx = geo.normal[i];
        for j in 0..n {
            let w = geo.speed[j] * dphi;
            let k = if i == j {
                let t = geo.tangent[i];
                let c = geo.curvature[i] / TAU;
                [[c * t[0] * t[0], c * t[0] * t[1]], [c * t[1] * t[0], c * t[1] * t[1]]]
            } else {
                let y = geo.position[j];
                let d = [x[0] - y[0], x[1] - y[1]];
                let r2 = d[0] * d[0] + d[1] * d[1];
                let c = -(d[0] * nx[0] + d[1] * nx[1]) / (PI * r2 * r2);
                [[c * d[0] * d[0], c * d[0] * d[1]], [c * d[1] * d[0], c * d[1] * d[1]]]
            };
            r0[2 * j] = k[0][0] * w;
            r0[2 * j + 1] = k[0][1] * w;
            r1[2 * j] = k[1][0] * w;
            r1[2 * j + 1] = k[1][1] * w;
        }
        r0[2 * i] += 0.5;
        r1[2 * i + 1] += 0.5;
        let phi = rigid_modes(x);
        for k in 0..3 {
            r0[2 * n + k] = phi[k][0];
            r1[2 * n + k] = phi[k][1];
        }
        [r0, r1]
    });
    let mut m = DMatrix::zeros(dim, dim);
    for (i, [r0, r1]) in rows.iter().enumerate() {
        for c in 0..dim {
            m[(2 * i, c)] = r0[c];
            m[(2 * i + 1, c)] = r1[c];
        }
    }
    for j in 0..n {
        let w = geo.speed[j] * dphi;
        for (k, phi) in rigid_modes(geo.position[j]).iter().enumerate() {
            m[(2 * n + k, 2 * j)] = phi[0] * w;
            m[(2 * n + k, 2 * j + 1)] = phi[1] * w;
        }
    }
    (m, dim)
}

/// Single-layer velocity at the boundary nodes.
pub fn boundary_trace(geo: &CurveGeometry, density: &[[f64; 2]]) -> BoundaryVectorField {
    let n = geo.n_phi();
    let dphi = geo.curve.dphi();
    let logw = log_weights(n);
    par::map_range(n, |i| {
        let x = geo.position[i];
        let mut u = [0.0, 0.0];
        for j in 0..n {
            let f = [density[j][0] * geo.speed[j], density[j][1] * geo.speed[j]];
            let (smooth_log, dyad) = if i == j {
                (geo.speed[i].ln(), geo.tangent[i])
            } else {
                let y = geo.position[j];
                let d = [x[0] - y[0], x[1] - y[1]];
                let r = d[0].hypot(d[1]);
                let half = 2.0 * ((geo.phi[i] - geo.phi[j]) * 0.5).sin().abs();
                ((r / half).ln(), [d[0] / r, d[1] / r])
            };
            let lw = logw[(i + n - j) % n];
            let proj = dyad[0] * f[0] + dyad[1] * f[1];
            for a in 0..2 {
                u[a] += -0.5 * lw * f[a] + dphi * (-smooth_log * f[a] + proj * dyad[a]);
            }
        }
        [u[0] / TAU, u[1] / TAU]
    })
}

/// Pressure of the single layer at an interior point.
pub fn pressure_at(geo: &CurveGeometry, density: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let mut p = 0.0;
    for j in 0..geo.n_phi() {
        let y = geo.position[j];
        let d = [x[0] - y[0], x[1] - y[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        p += (d[0] * density[j][0] + d[1] * density[j][1]) / r2 * geo.ds[j];
    }
    p / TAU
}

/// Boundary refined by trigonometric interpolation, with quadrature-weighted
/// density `ψ |X'| Δφ` at the fine nodes.
struct FineBoundary {
    position: Vec<[f64; 2]>,
    weighted: Vec<[f64; 2]>,
}

impl FineBoundary {
    fn new(geo: &CurveGeometry, density: &[[f64; 2]], factor: usize) -> Self {
        let n = geo.n_phi();
        let m = n * factor;
        let fine_curve = PolarCurve::new(spectral::interpolate(&geo.curve.r, m)).with_scheme(geo.curve.scheme);
        let (dr, _) = fine_curve.derivatives();
        let px: Vec<f64> = density.iter().map(|p| p[0]).collect();
        let py: Vec<f64> = density.iter().map(|p| p[1]).collect();
        let (fx, fy) = (spectral::interpolate(&px, m), spectral::interpolate(&py, m));
        let dphi = TAU / m as f64;
        let mut position = Vec::with_capacity(m);
        let mut weighted = Vec::with_capacity(m);
        for k in 0..m {
            let phi = dphi * k as f64;
            let r = fine_curve.r[k];
            let w = (r * r + dr[k] * dr[k]).sqrt() * dphi;
            position.push([r * phi.cos(), r * phi.sin()]);
            weighted.push([fx[k] * w, fy[k] * w]);
        }
        Self { position, weighted }
    }

    fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let mut u = [0.0, 0.0];
        for (y, f) in self.position.iter().zip(&self.weighted) {
            let v = stokeslet([x[0] - y[0], x[1] - y[1]], *f);
            u[0] += v[0];
            u[1] += v[1];
        }
        u
    }
}

/// Refinement needed for the trapezoid rule to resolve the kernel at
/// distance `dist` from a boundary of mesh width `h`.
fn upsample_factor(dist: f64, h: f64) -> usize {
    const DECAY: f64 = 36.0;
    let need = DECAY * h / (TAU * dist);
    let mut k = 1;
    while (k as f64) < need && k < 64 {
        k *= 2;
    }
    k
}

/// Distance from the boundary, in boundary mesh widths, below which rings are
/// interpolated rather than evaluated.
pub const NEAR_FRACTION: f64 = 0.25;
/// Number of direct rings in the near-boundary interpolant.
const NEAR_DEGREE: usize = 4;

fn grid_positions(geo: &CurveGeometry, grid: &RefGrid) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.n_s {
        let s = grid.s(i);
        for p in &geo.position {
            out.push([s * p[0], s * p[1]]);
        }
    }
    out
}

/// Single-layer velocity on the reference grid, before the rigid shift.
///
/// Rings closer to the boundary than [`NEAR_FRACTION`] boundary mesh widths
/// are filled along each ray by polynomial interpolation through the boundary
/// trace and the outermost directly evaluated rings.
fn raw_interior(
    geo: &CurveGeometry,
    density: &[[f64; 2]],
    trace: &[[f64; 2]],
    grid: &RefGrid,
) -> InteriorField<[f64; 2]> {
    let n = geo.n_phi();
    assert_eq!(grid.n_phi, n, "grid and curve resolutions differ");
    let m = grid.boundary_ring();
    let h_b = geo.max_ds();
    let reach = (0..n).map(|j| geo.curve.r[j] * geo.curve.r[j] / geo.speed[j]).fold(f64::INFINITY, f64::min);

    // (ring, upsample factor) for directly evaluated rings
    let mut direct: Vec<(usize, usize)> = Vec::new();
    for i in 0..m {
        let dist = (1.0 - grid.s(i)) * reach;
        if i == 0 || dist >= NEAR_FRACTION * h_b {
            direct.push((i, upsample_factor(dist, h_b)));
        }
    }
    let mut factors: Vec<usize> = direct.iter().map(|d| d.1).collect();
    factors.sort_unstable();
    factors.dedup();
    let fines: Vec<(usize, FineBoundary)> =
        factors.iter().map(|&k| (k, FineBoundary::new(geo, density, k))).collect();
    let fine_for = |k: usize| &fines.iter().find(|f| f.0 == k).expect("factor prepared").1;

    let targets: Vec<(usize, usize, usize)> = direct
        .iter()
        .flat_map(|&(i, k)| (0..if i == 0 { 1 } else { n }).map(move |j| (i, j, k)))
        .collect();
    let values = par::map_range(targets.len(), |t| {
        let (i, j, k) = targets[t];
        let s = grid.s(i);
        let p = geo.position[j];
        fine_for(k).velocity([s * p[0], s * p[1]])
    });

    let mut field = InteriorField::filled(*grid, [0.0, 0.0]);
    for (&(i, j, _), v) in targets.iter().zip(&values) {
        if i == 0 {
            for jj in 0..n {
                field.set(0, jj, *v);
            }
        } else {
            field.set(i, j, *v);
        }
    }
    for (j, u) in trace.iter().enumerate() {
        field.set(m, j, *u);
    }

    // Nodes of the ray interpolant: the boundary and the outermost direct rings.
    let mut nodes: Vec<usize> = vec![m];
    nodes.extend(direct.iter().map(|d| d.0).rev().take(NEAR_DEGREE));
    let first_gap = nodes[1] + 1;
    let svals: Vec<f64> = nodes.iter().map(|&i| grid.s(i)).collect();
    for i in first_gap..m {
        let s = grid.s(i);
        let weights: Vec<f64> = (0..nodes.len())
            .map(|a| {
                (0..nodes.len())
                    .filter(|&b| b != a)
                    .map(|b| (s - svals[b]) / (svals[a] - svals[b]))
                    .product()
            })
            .collect();
        for j in 0..n {
            let mut u = [0.0, 0.0];
            for (&node, w) in nodes.iter().zip(&weights) {
                let v = field.at(node, j);
                u[0] += w * v[0];
                u[1] += w * v[1];
            }
            field.set(i, j, u);
        }
    }
    field
}

/// Discrete moments `Σ V u·φ_k`.
pub fn rigid_moments(u: &[[f64; 2]], positions: &[[f64; 2]], volumes: &[f64]) -> [f64; 3] {
    let mut m = [0.0; 3];
    for ((u, x), v) in u.iter().zip(positions).zip(volumes) {
        for (k, phi) in rigid_modes(*x).iter().enumerate() {
            m[k] += v * (u[0] * phi[0] + u[1] * phi[1]);
        }
    }
    m
}

/// Rigid motion with the same discrete moments as `u`.
pub fn rigid_fit(u: &[[f64; 2]], positions: &[[f64; 2]], volumes: &[f64]) -> [f64; 3] {
    let m = rigid_moments(u, positions, volumes);
    let mut gram = Matrix3::zeros();
    for (x, v) in positions.iter().zip(volumes) {
        let phi = rigid_modes(*x);
        for a in 0..3 {
            for b in 0..3 {
                gram[(a, b)] += v * (phi[a][0] * phi[b][0] + phi[a][1] * phi[b][1]);
            }
        }
    }
    let c = gram.lu().solve(&Vector3::new(m[0], m[1], m[2])).unwrap_or_else(Vector3::zeros);
    [c[0], c[1], c[2]]
}
