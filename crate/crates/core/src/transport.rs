//! Solute transport on the mapped polar grid.
//!
//! The scheme is a conservative finite-volume discretization in ALE form.
//! Node `(i, j)` owns the control volume `V_ij = A_i r_j² Δφ` (see
//! [`node_volumes`]); the origin is one unknown whose volume is the small
//! central disk. Diffusive fluxes use the contravariant form
//!
//! ```text
//! det J · Δc = ∂s(s(1+g²)c_s − g c_φ) + ∂φ(−g c_s + c_φ/s),   g = r'/r,
//! ```
//!
//! which only depends on `g`, so radial rescaling of the domain leaves the
//! flux stencil unchanged. Mesh motion is accounted for by the volume swept
//! by each radial face, which satisfies the discrete geometric conservation
//! law exactly. Convection by the fluid is explicit and centered; diffusion
//! is backward Euler and solved with preconditioned GMRES.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::field::{BoundaryField, InteriorField, RefGrid};
use crate::geometry::{node_volumes, radial_cell_moment, DomainMap};
use crate::linalg::{gmres, thomas_complex, Csr, CsrBuilder, KrylovReport};
use crate::spectral;

/// Concentration `ξ = c ∘ Θ` on the reference grid. Ring 0 repeats the single
/// origin value.
pub type ConcentrationField = InteriorField<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("CFL violation: cell Courant number {courant:.3e} exceeds {limit}")]
    CflViolation { courant: f64, limit: f64 },
    #[error("positivity lost: min concentration {min:.3e} (max {max:.3e})")]
    PositivityLoss { min: f64, max: f64 },
    #[error("linear solver stalled at relative residual {residual:.3e}")]
    SolverFailure { residual: f64 },
    #[error("grid mismatch: {0}")]
    Shape(String),
}

/// How solute crosses the outer ring during a step.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryClosure {
    /// No net solute transport through the moving boundary. With the
    /// membrane law `V_n = κH + c + u·n` this is exactly the condition
    /// `∂n c + c(κH + c) = 0` written in flux form, with `V_n` taken from the
    /// realized boundary motion.
    ZeroNetFlux,
    /// `∂n c = −β c` per boundary node, with the fluid and mesh fluxes through
    /// the boundary included explicitly. `β ≡ 0` is the impermeable wall.
    Robin(BoundaryField),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Largest admissible `dt Σ|face flux| / V` per cell.
    pub max_courant: f64,
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { max_courant: 1.0, tolerance: 1e-13, restart: 40, max_iterations: 800 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub mass_before: f64,
    pub mass_after: f64,
    pub max_courant: f64,
    pub krylov: KrylovReport,
}

/// Maps grid nodes onto the compact unknown vector (single origin value).
#[derive(Debug, Clone, Copy)]
struct Layout {
    n_phi: usize,
    m: usize,
}

impl Layout {
    fn new(grid: &RefGrid) -> Self {
        Self { n_phi: grid.n_phi, m: grid.boundary_ring() }
    }

    fn len(&self) -> usize {
        1 + self.m * self.n_phi
    }

    fn at(&self, i: usize, j: isize) -> usize {
        if i == 0 {
            0
        } else {
            1 + (i - 1) * self.n_phi + j.rem_euclid(self.n_phi as isize) as usize
        }
    }

    fn compact(&self, f: &InteriorField<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.push(f.at(0, 0));
        out.extend_from_slice(&f.values[self.n_phi..]);
        out
    }

    fn expand(&self, grid: RefGrid, v: &[f64]) -> InteriorField<f64> {
        let mut values = vec![v[0]; self.n_phi];
        values.extend_from_slice(&v[1..]);
        InteriorField { grid, values }
    }

    fn volumes(&self, grid: &RefGrid, r: &[f64]) -> Vec<f64> {
        let full = node_volumes(grid, r);
        let mut out = Vec::with_capacity(self.len());
        out.push(full[..self.n_phi].iter().sum());
        out.extend_from_slice(&full[self.n_phi..]);
        out
    }
}

/// Linear functional `Σ coeff · ξ[node]`.
type Stencil = Vec<(usize, f64)>;

/// Diffusive outflow `−∮ ∇c·ν` for every face, as stencils on compact
/// unknowns. Each entry is `(from, to, stencil)`.
fn diffusive_faces(lay: &Layout, h: f64, g: &[f64]) -> Vec<(usize, usize, Stencil)> {
    let n = lay.n_phi as isize;
    let dphi = TAU / n as f64;
    let m = lay.m;
    let mut faces = Vec::with_capacity(2 * m * lay.n_phi);
    for i in 0..m {
        let sf = (i as f64 + 0.5) * h;
        for j in 0..n {
            let gj = g[j as usize];
            let (a, b) = (lay.at(i, j), lay.at(i + 1, j));
            let radial = sf * (1.0 + gj * gj) / h;
            let mut st: Stencil = vec![(b, -radial * dphi), (a, radial * dphi)];
            // cross term g c_φ averaged over the two rings
            let w = 0.25 * gj;
            for ring in [i, i + 1] {
                if ring > 0 {
                    st.push((lay.at(ring, j + 1), w));
                    st.push((lay.at(ring, j - 1), -w));
                }
            }
            faces.push((a, b, st));
        }
    }
    for i in 1..=m {
        let (e, s_mid) = if i < m { (h, i as f64 * h) } else { (0.5 * h, 1.0 - 0.25 * h) };
        let ell = e / s_mid;
        for j in 0..n {
            let gbar = 0.5 * (g[j as usize] + g[((j + 1) % n) as usize]);
            let (a, b) = (lay.at(i, j), lay.at(i, j + 1));
            let mut st: Stencil = vec![(b, -ell / dphi), (a, ell / dphi)];
            let w = gbar * e * 0.5;
            for jj in [j, j + 1] {
                if i < m {
                    st.push((lay.at(i + 1, jj), w / (2.0 * h)));
                    st.push((lay.at(i - 1, jj), -w / (2.0 * h)));
                } else {
                    st.push((lay.at(i, jj), w / h));
                    st.push((lay.at(i - 1, jj), -w / h));
                }
            }
            faces.push((a, b, st));
        }
    }
    faces
}

fn outflow_matrix(lay: &Layout, h: f64, g: &[f64], scale: f64) -> CsrBuilder {
    let mut b = CsrBuilder::new(lay.len());
    for (from, to, st) in diffusive_faces(lay, h, g) {
        for (col, v) in st {
            b.add(from, col, scale * v);
            b.add(to, col, -scale * v);
        }
    }
    b
}

/// Discrete mapped operators on one domain: Laplacian `A`, boundary normal
/// derivative `B` and gradient `K`.
#[derive(Debug, Clone)]
pub struct TransportOperators {
    pub grid: RefGrid,
    lay: Layout,
    outflow: Csr,
    volumes: Vec<f64>,
    r: Vec<f64>,
    g: Vec<f64>,
    phi: Vec<f64>,
}

pub fn build_operators(map: &DomainMap) -> TransportOperators {
    let grid = map.grid;
    let lay = Layout::new(&grid);
    TransportOperators {
        grid,
        lay,
        outflow: outflow_matrix(&lay, grid.h(), &map.g, 1.0).build(),
        volumes: lay.volumes(&grid, &map.geometry.curve.r),
        r: map.geometry.curve.r.clone(),
        g: map.g.clone(),
        phi: map.geometry.phi.clone(),
    }
}

impl TransportOperators {
    /// Mapped Laplacian as the finite-volume balance `(net inflow)/V`. The
    /// boundary ring uses the same balance with no flux through `s = 1`.
    pub fn laplacian(&self, xi: &ConcentrationField) -> InteriorField<f64> {
        let x = self.lay.compact(xi);
        let mut y = vec![0.0; x.len()];
        self.outflow.matvec(&x, &mut y);
        for (yk, v) in y.iter_mut().zip(&self.volumes) {
            *yk = -*yk / v;
        }
        self.lay.expand(self.grid, &y)
    }

    fn ds_boundary(&self, xi: &ConcentrationField, j: usize) -> f64 {
        let m = self.grid.boundary_ring();
        let h = self.grid.h();
        (3.0 * xi.at(m, j) - 4.0 * xi.at(m - 1, j) + xi.at(m - 2, j)) / (2.0 * h)
    }

    /// Outward normal derivative on the boundary ring, second order.
    pub fn normal_derivative(&self, xi: &ConcentrationField) -> BoundaryField {
        let n = self.grid.n_phi;
        let m = self.grid.boundary_ring();
        let dphi = self.grid.dphi();
        (0..n)
            .map(|j| {
                let cs = self.ds_boundary(xi, j);
                let cphi = (xi.at(m, (j + 1) % n) - xi.at(m, (j + n - 1) % n)) / (2.0 * dphi);
                let g = self.g[j];
                ((1.0 + g * g) * cs - g * cphi) / (self.r[j] * (1.0 + g * g).sqrt())
            })
            .collect()
    }

    /// Physical gradient at every node. The origin value is the least-squares
    /// plane through the first ring.
    pub fn gradient(&self, xi: &ConcentrationField) -> InteriorField<[f64; 2]> {
        let grid = self.grid;
        let n = grid.n_phi;
        let m = grid.boundary_ring();
        let h = grid.h();
        let dphi = grid.dphi();
        let mut out = InteriorField::filled(grid, [0.0, 0.0]);
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            let rho = h * self.r[j];
            let (c, s) = (self.phi[j].cos(), self.phi[j].sin());
            let d = xi.at(1, j) - xi.at(0, 0);
            a11 += rho * rho * c * c;
            a12 += rho * rho * c * s;
            a22 += rho * rho * s * s;
            b1 += rho * d * c;
            b2 += rho * d * s;
        }
        let det = a11 * a22 - a12 * a12;
        let origin = [(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det];
        for j in 0..n {
            out.set(0, j, origin);
        }
        for i in 1..=m {
            let s = grid.s(i);
            for j in 0..n {
                let cs = if i < m {
                    (xi.at(i + 1, j) - xi.at(i - 1, j)) / (2.0 * h)
                } else {
                    self.ds_boundary(xi, j)
                };
                let cphi = (xi.at(i, (j + 1) % n) - xi.at(i, (j + n - 1) % n)) / (2.0 * dphi);
                let radial = cs / self.r[j];
                let angular = (cphi - s * self.g[j] * cs) / (s * self.r[j]);
                let (c, sn) = (self.phi[j].cos(), self.phi[j].sin());
                out.set(i, j, [radial * c - angular * sn, radial * sn + angular * c]);
            }
        }
        out
    }

    /// Control volume of each grid node; the origin volume is split evenly
    /// over the repeated ring-0 entries.
    pub fn node_volumes(&self) -> InteriorField<f64> {
        let n = self.grid.n_phi;
        let mut f = self.lay.expand(self.grid, &self.volumes);
        for j in 0..n {
            f.set(0, j, self.volumes[0] / n as f64);
        }
        f
    }

    /// `Σ V ξ`.
    pub fn mass(&self, xi: &ConcentrationField) -> f64 {
        self.lay.compact(xi).iter().zip(&self.volumes).map(|(x, v)| x * v).sum()
    }

    /// Volume-weighted sum of a nodal quantity over the domain.
    pub fn integrate(&self, values: &InteriorField<f64>) -> f64 {
        self.mass(values)
    }
}

/// `Bξ + κHξ + ξ²` on the boundary ring.
pub fn membrane_bc_residual(
    xi: &ConcentrationField,
    curvature: &[f64],
    kappa: f64,
    ops: &TransportOperators,
) -> BoundaryField {
    let m = ops.grid.boundary_ring();
    ops.normal_derivative(xi)
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let c = xi.at(m, j);
            b + kappa * curvature[j] * c + c * c
        })
        .collect()
}

/// Diagonal-in-Fourier approximation of the implicit operator: `g = 0`, the
/// mean `r²` and the mean boundary coefficient.
struct FourierPreconditioner {
    lay: Layout,
    /// per mode: (lower, diag, upper) over unknowns `[origin?, ring 1..m]`
    modes: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl FourierPreconditioner {
    fn new(lay: Layout, h: f64, r2_mean: f64, dt: f64, robin_mean: f64) -> Self {
        let n = lay.n_phi;
        let m = lay.m;
        let dphi = TAU / n as f64;
        let radial = |i: usize| dt * (i as f64 + 0.5) * h * dphi / h;
        let modes = (0..n)
            .map(|k| {
                let lam = 2.0 - 2.0 * (k as f64 * dphi).cos();
                let offset = usize::from(k == 0);
                let len = m + offset;
                let (mut lo, mut di, mut up) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
                if k == 0 {
                    let c = n as f64 * radial(0);
                    di[0] = radial_cell_moment(0, m, h) * n as f64 * r2_mean * dphi + c;
                    up[0] = -c;
                }
                for i in 1..=m {
                    let row = i - 1 + offset;
                    let (e, s_mid) = if i < m { (h, i as f64 * h) } else { (0.5 * h, 1.0 - 0.25 * h) };
                    let mut d = radial_cell_moment(i, m, h) * r2_mean * dphi;
                    d += radial(i - 1) + dt * e / s_mid * lam / dphi;
                    if i < m {
                        d += radial(i);
                        up[row] = -radial(i);
                    } else {
                        d += dt * robin_mean * dphi;
                    }
                    if i > 1 || k == 0 {
                        lo[row] = -radial(i - 1);
                    }
                    di[row] = d;
                }
                (lo, di, up)
            })
            .collect();
        Self { lay, modes }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.lay.n_phi;
        let m = self.lay.m;
        let mut spec = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            let ring = &mut spec[i * n..(i + 1) * n];
            for (s, v) in ring.iter_mut().zip(&x[1 + i * n..1 + (i + 1) * n]) {
                *s = Complex64::new(*v / n as f64, 0.0);
            }
            spectral::forward_in_place(ring);
        }
        let mut origin = 0.0;
        for (k, (lo, di, up)) in self.modes.iter().enumerate() {
            let offset = usize::from(k == 0);
            let mut rhs = vec![Complex64::new(0.0, 0.0); m + offset];
            if k == 0 {
                rhs[0] = Complex64::new(x[0], 0.0);
            }
            for i in 0..m {
                rhs[i + offset] = spec[i * n + k];
            }
            thomas_complex(lo, di, up, &mut rhs);
            if k == 0 {
                origin = rhs[0].re;
            }
            for i in 0..m {
                spec[i * n + k] = rhs[i + offset];
            }
        }
        y[0] = origin;
        for i in 0..m {
            let ring = &mut spec[i * n..(i + 1) * n];
            spectral::inverse_in_place(ring);
            for (v, s) in y[1 + i * n..1 + (i + 1) * n].iter_mut().zip(ring.iter()) {
                *v = s.re;
            }
        }
    }
}

/// One transport step from the domain `old` to the domain `new`.
///
/// The mesh velocity is implied by the two curves; `velocity` is the fluid
/// velocity on the old domain (none for a fluid at rest).
pub fn step(
    xi: &ConcentrationField,
    dt: f64,
    old: &DomainMap,
    new: &DomainMap,
    velocity: Option<&InteriorField<[f64; 2]>>,
    closure: &BoundaryClosure,
    opts: &TransportOptions,
) -> Result<(ConcentrationField, StepReport), TransportError> {
    let grid = old.grid;
    if new.grid != grid || xi.grid != grid {
        return Err(TransportError::Shape("concentration and maps use different grids".into()));
    }
    if let Some(u) = velocity {
        if u.grid != grid {
            return Err(TransportError::Shape("velocity grid differs".into()));
        }
    }
    if let BoundaryClosure::Robin(beta) = closure {
        if beta.len() != grid.n_phi {
            return Err(TransportError::Shape("Robin coefficient length".into()));
        }
    }
    let lay = Layout::new(&grid);
    let n = grid.n_phi;
    let m = grid.boundary_ring();
    let h = grid.h();
    let dphi = grid.dphi();
    let r_old = &old.geometry.curve.r;
    let r_new = &new.geometry.curve.r;
    let x_old = lay.compact(xi);
    let v_old = lay.volumes(&grid, r_old);
    let v_new = lay.volumes(&grid, r_new);

    let mut rhs: Vec<f64> = x_old.iter().zip(&v_old).map(|(x, v)| x * v).collect();
    let mut traffic = vec![0.0; lay.len()];

    // volume swept by the radial faces
    for i in 0..m {
        let sf = (i as f64 + 0.5) * h;
        for j in 0..n as isize {
            let ju = j as usize;
            let sweep = 0.5 * sf * sf * (r_new[ju] * r_new[ju] - r_old[ju] * r_old[ju]) * dphi;
            let (a, b) = (lay.at(i, j), lay.at(i + 1, j));
            let flow = sweep * 0.5 * (x_old[a] + x_old[b]);
            rhs[a] += flow;
            rhs[b] -= flow;
            traffic[a] += sweep.abs();
            traffic[b] += sweep.abs();
        }
    }

    // explicit centered convection by the fluid
    if let Some(u) = velocity {
        let dr = &old.geometry.dr;
        let phi = &old.geometry.phi;
        let avg = |p: [f64; 2], q: [f64; 2]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        for i in 0..m {
            let sf = (i as f64 + 0.5) * h;
            for j in 0..n as isize {
                let ju = j as usize;
                let uf = avg(u.at(i, ju), u.at(i + 1, ju));
                let (c, s) = (phi[ju].cos(), phi[ju].sin());
                let (ur, up) = (uf[0] * c + uf[1] * s, -uf[0] * s + uf[1] * c);
                let q = dt * sf * (r_old[ju] * ur - dr[ju] * up) * dphi;
                let (a, b) = (lay.at(i, j), lay.at(i + 1, j));
                let flow = q * 0.5 * (x_old[a] + x_old[b]);
                rhs[a] -= flow;
                rhs[b] += flow;
                traffic[a] += q.abs();
                traffic[b] += q.abs();
            }
        }
        for i in 1..=m {
            let e = if i < m { h } else { 0.5 * h };
            for j in 0..n as isize {
                let (ju, jn) = (j as usize, ((j + 1) % n as isize) as usize);
                let uf = avg(u.at(i, ju), u.at(i, jn));
                let ph = phi[ju] + 0.5 * dphi;
                let up = -uf[0] * ph.sin() + uf[1] * ph.cos();
                let q = dt * e * 0.5 * (r_old[ju] + r_old[jn]) * up;
                let (a, b) = (lay.at(i, j), lay.at(i, j + 1));
                let flow = q * 0.5 * (x_old[a] + x_old[b]);
                rhs[a] -= flow;
                rhs[b] += flow;
                traffic[a] += q.abs();
                traffic[b] += q.abs();
            }
        }
    }

    let mut robin_diag = vec![0.0; n];
    if let BoundaryClosure::Robin(beta) = closure {
        for j in 0..n {
            let a = lay.at(m, j as isize);
            let swept = 0.5 * (r_new[j] * r_new[j] - r_old[j] * r_old[j]) * dphi;
            let un = match velocity {
                Some(u) => {
                    let v = u.at(m, j);
                    let nrm = old.geometry.normal[j];
                    dt * (v[0] * nrm[0] + v[1] * nrm[1]) * old.geometry.speed[j] * dphi
                }
                None => 0.0,
            };
            rhs[a] += (swept - un) * x_old[a];
            traffic[a] += swept.abs() + un.abs();
            robin_diag[j] = dt * beta[j] * new.geometry.speed[j] * dphi;
        }
    }

    let max_courant = traffic.iter().zip(&v_old).map(|(t, v)| t / v).fold(0.0, f64::max);
    if max_courant > opts.max_courant {
        return Err(TransportError::CflViolation { courant: max_courant, limit: opts.max_courant });
    }

    let mut builder = outflow_matrix(&lay, h, &new.g, dt);
    for (k, v) in v_new.iter().enumerate() {
        builder.add(k, k, *v);
    }
    for (j, d) in robin_diag.iter().enumerate() {
        builder.add(lay.at(m, j as isize), lay.at(m, j as isize), *d);
    }
    let matrix = builder.build();
    let r2_mean = r_new.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let robin_mean = robin_diag.iter().sum::<f64>() / (n as f64 * dt * dphi).max(f64::MIN_POSITIVE);
    let pre = FourierPreconditioner::new(lay, h, r2_mean, dt, robin_mean);

    let mut x = x_old.clone();
    let krylov = gmres(
        |v, o| matrix.matvec(v, o),
        |v, o| pre.apply(v, o),
        &rhs,
        &mut x,
        opts.tolerance,
        opts.restart,
        opts.max_iterations,
    );
    if !krylov.converged && !(krylov.relative_residual <= 1e3 * opts.tolerance) {
        return Err(TransportError::SolverFailure { residual: krylov.relative_residual });
    }

    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || !max.is_finite() || min < -10.0 * f64::EPSILON * max.abs() {
        return Err(TransportError::PositivityLoss { min, max });
    }
    let mass_before = x_old.iter().zip(&v_old).map(|(a, b)| a * b).sum();
    let mass_after = x.iter().zip(&v_new).map(|(a, b)| a * b).sum();
    Ok((lay.expand(grid, &x), StepReport { mass_before, mass_after, max_courant, krylov }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain_map, PolarCurve};

    fn map(curve: &PolarCurve, n_s: usize) -> DomainMap {
        build_domain_map(curve, None, n_s).unwrap()
    }

    #[test]
    fn unit_circle_laplacian_is_polar_stencil() {
        let curve = PolarCurve::circle(12, 1.0);
        let mp = map(&curve, 9);
        let ops = build_operators(&mp);
        let grid = mp.grid;
        let f = |s: f64, p: f64| s * s * (1.0 + 0.3 * (2.0 * p).cos()) + 0.2 * s.powi(3) * p.sin();
        let xi = InteriorField::from_fn(grid, |i, j| f(grid.s(i), grid.phi(j)));
        let lap = ops.laplacian(&xi);
        let (h, dp) = (grid.h(), grid.dphi());
        let n = grid.n_phi;
        for i in 1..grid.boundary_ring() {
            let s = grid.s(i);
            for j in 0..n {
                let (sp, sm) = (s + 0.5 * h, s - 0.5 * h);
                let radial = (sp * (xi.at(i + 1, j) - xi.at(i, j)) - sm * (xi.at(i, j) - xi.at(i - 1, j))) / (s * h * h);
                let ang = (xi.at(i, (j + 1) % n) - 2.0 * xi.at(i, j) + xi.at(i, (j + n - 1) % n)) / (s * s * dp * dp);
                assert!((lap.at(i, j) - radial - ang).abs() < 1e-10, "({i},{j})");
            }
        }
        let mean1: f64 = xi.ring(1).iter().sum::<f64>() / n as f64;
        assert!((lap.at(0, 0) - 4.0 * (mean1 - xi.at(0, 0)) / (h * h)).abs() < 1e-10);
    }

    #[test]
    fn radius_two_normal_derivative_halves_reference_slope() {
        let curve = PolarCurve::circle(16, 2.0);
        let mp = map(&curve, 11);
        let ops = build_operators(&mp);
        let grid = mp.grid;
        let xi = InteriorField::from_fn(grid, |i, j| {
            let s = grid.s(i);
            1.0 + s * s * (1.0 + 0.5 * grid.phi(j).sin())
        });
        let b = ops.normal_derivative(&xi);
        for (j, bj) in b.iter().enumerate() {
            let m = grid.boundary_ring();
            let ds = (3.0 * xi.at(m, j) - 4.0 * xi.at(m - 1, j) + xi.at(m - 2, j)) / (2.0 * grid.h());
            assert!((bj - 0.5 * ds).abs() < 1e-13);
        }
    }

    #[test]
    fn equilibrium_disk_satisfies_membrane_condition() {
        let (kappa, radius) = (1.3, 0.8);
        let curve = PolarCurve::circle(16, radius);
        let mp = map(&curve, 9);
        let ops = build_operators(&mp);
        let xi = InteriorField::filled(mp.grid, kappa / radius);
        let res = membrane_bc_residual(&xi, &mp.geometry.curvature, kappa, &ops);
        assert!(res.iter().all(|r| r.abs() < 1e-13));
        let zero = InteriorField::filled(mp.grid, 0.0);
        assert!(membrane_bc_residual(&zero, &mp.geometry.curvature, kappa, &ops).iter().all(|r| *r == 0.0));
    }

    #[test]
    fn static_equilibrium_is_preserved() {
        let (kappa, radius) = (1.0, 1.5);
        let curve = PolarCurve::circle(32, radius);
        let mp = map(&curve, 17);
        let xi = InteriorField::filled(mp.grid, kappa / radius);
        let beta = vec![0.0; 32];
        let (out, rep) =
            step(&xi, 1e-2, &mp, &mp, None, &BoundaryClosure::Robin(beta), &TransportOptions::default()).unwrap();
        assert!(rep.krylov.converged);
        for v in &out.values {
            assert!((v - kappa / radius).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_mesh_step_conserves_mass() {
        let curve = PolarCurve::fourier(32, 1.0, &[0.0, 0.0, 0.12], &[0.0, 0.05]);
        let moved = PolarCurve::fourier(32, 1.002, &[0.0, 0.0, 0.118], &[0.0, 0.051]);
        let (a, b) = (map(&curve, 17), map(&moved, 17));
        let grid = a.grid;
        let xi = InteriorField::from_fn(grid, |i, j| 1.0 + 0.3 * grid.s(i).powi(2) * grid.phi(j).cos());
        let (out, rep) =
            step(&xi, 1e-3, &a, &b, None, &BoundaryClosure::ZeroNetFlux, &TransportOptions::default()).unwrap();
        assert!(((rep.mass_after - rep.mass_before) / rep.mass_before).abs() < 1e-12);
        assert!((build_operators(&b).mass(&out) - rep.mass_before).abs() < 1e-12);
    }
}
