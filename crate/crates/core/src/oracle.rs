//! Radially symmetric reference solutions.
//!
//! [`radial_step`] advances a disk (N = 2) or ball (N = 3) with a fine 1D
//! finite-volume grid in the mapped coordinate `s = |x|/R`, Crank–Nicolson
//! in time, with the membrane Robin condition and the radius equation
//! `Ṙ = κH + c(R)` coupled by fixed-point iteration. [`fastdiff_ode`]
//! integrates the fast-diffusion radius equation `Ṙ = −κ/R + M/(πR²)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("radius collapsed to {0:e}")]
    Collapse(f64),
    #[error("positivity lost: min concentration {0:e}")]
    PositivityLoss(f64),
    #[error("time step {dt} exceeds the accuracy bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("fixed-point iteration for the radius did not converge")]
    NoConvergence,
    #[error("invalid input: {0}")]
    Invalid(&'static str),
}

/// Radius and mapped radial concentration `ĉ(s_i)`, `s_i = i/(len-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialState {
    pub t: f64,
    pub radius: f64,
    pub c_hat: Vec<f64>,
    pub kappa: f64,
    pub dim: u32,
}

/// `∫ s^{N-1} ds` over the cell of node `i` of `n + 1` nodes.
fn cell_moment(i: usize, n: usize, h: f64, dim: i32) -> f64 {
    let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
    let hi = if i == n { 1.0 } else { (i as f64 + 0.5) * h };
    (hi.powi(dim) - lo.powi(dim)) / dim as f64
}

fn sphere_measure(dim: u32) -> f64 {
    if dim == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

impl RadialState {
    pub fn new(radius: f64, c_hat: Vec<f64>, kappa: f64, dim: u32) -> Result<Self, OracleError> {
        if !(radius > 0.0) {
            return Err(OracleError::Invalid("radius must be positive"));
        }
        if c_hat.len() < 3 {
            return Err(OracleError::Invalid("need at least 3 radial nodes"));
        }
        if !(2..=3).contains(&dim) {
            return Err(OracleError::Invalid("dimension must be 2 or 3"));
        }
        if !(kappa > 0.0) {
            return Err(OracleError::Invalid("kappa must be positive"));
        }
        Ok(Self { t: 0.0, radius, c_hat, kappa, dim })
    }

    pub fn from_profile(
        radius: f64,
        n_s: usize,
        kappa: f64,
        dim: u32,
        profile: impl Fn(f64) -> f64,
    ) -> Result<Self, OracleError> {
        let h = 1.0 / (n_s - 1) as f64;
        Self::new(radius, (0..n_s).map(|i| profile(i as f64 * h)).collect(), kappa, dim)
    }

    /// Disk or ball at rest: `R* = M/(κπ)` in 2D, `ĉ ≡ κ(N−1)/R*`.
    pub fn equilibrium(radius: f64, n_s: usize, kappa: f64, dim: u32) -> Result<Self, OracleError> {
        let c = kappa * (dim as f64 - 1.0) / radius;
        Self::from_profile(radius, n_s, kappa, dim, |_| c)
    }

    pub fn n(&self) -> usize {
        self.c_hat.len() - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn mass(&self) -> f64 {
        let (n, h, d) = (self.n(), self.h(), self.dim as i32);
        let sum: f64 = self.c_hat.iter().enumerate().map(|(i, c)| cell_moment(i, n, h, d) * c).sum();
        sphere_measure(self.dim) * self.radius.powi(d) * sum
    }

    /// Piecewise-linear `ĉ` at mapped radius `s ∈ [0, 1]`.
    pub fn profile_at(&self, s: f64) -> f64 {
        let x = s.clamp(0.0, 1.0) * self.n() as f64;
        let i = (x.floor() as usize).min(self.n() - 1);
        let w = x - i as f64;
        (1.0 - w) * self.c_hat[i] + w * self.c_hat[i + 1]
    }

    pub fn boundary_value(&self) -> f64 {
        self.c_hat[self.n()]
    }
}

/// Mean of `R^{N−1}` between two radii, `(b^N − a^N)/(N(b − a))`.
fn mean_power(a: f64, b: f64, dim: i32) -> f64 {
    if (b - a).abs() <= 1e-14 * a.abs() {
        (0.5 * (a + b)).powi(dim - 1)
    } else {
        (b.powi(dim) - a.powi(dim)) / (dim as f64 * (b - a))
    }
}

fn tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// One Crank–Nicolson step with the radius coupled by fixed-point iteration.
/// Requires `dt ≤ h`.
pub fn radial_step(state: &RadialState, dt: f64) -> Result<RadialState, OracleError> {
    let n = state.n();
    let h = state.h();
    if dt > h * (1.0 + 1e-12) {
        return Err(OracleError::StepTooLarge { dt, bound: h });
    }
    let d = state.dim as i32;
    let nd = d as f64;
    let kappa = state.kappa;
    let r_old = state.radius;
    let c_old = &state.c_hat;
    let moments: Vec<f64> = (0..=n).map(|i| cell_moment(i, n, h, d)).collect();
    let face = |i: usize| ((i as f64 + 0.5) * h).powi(d - 1) / h;
    let diff_old: Vec<f64> = (0..=n)
        .map(|i| {
            let mut net = 0.0;
            if i < n {
                net += face(i) * (c_old[i + 1] - c_old[i]);
            }
            if i > 0 {
                net -= face(i - 1) * (c_old[i] - c_old[i - 1]);
            }
            net * r_old.powi(d - 2)
        })
        .collect();

    let mut r_new = r_old + dt * (-kappa * (nd - 1.0) / r_old + c_old[n]);
    let mut c_new = c_old.clone();
    for _ in 0..200 {
        if !(r_new > 0.0) {
            return Err(OracleError::Collapse(r_new));
        }
        let dvol = (r_new.powi(d) - r_old.powi(d)) / nd;
        let rbar = mean_power(r_old, r_new, d);
        let h_mid = -(nd - 1.0) / (0.5 * (r_old + r_new));
        let c_lag = 0.5 * (c_old[n] + c_new[n]);
        let dn = 0.5 * dt * r_new.powi(d - 2);
        let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
        for i in 0..=n {
            di[i] = moments[i] * r_new.powi(d);
            rhs[i] = moments[i] * r_old.powi(d) * c_old[i] + 0.5 * dt * diff_old[i];
            if i < n {
                let f = face(i);
                di[i] += dn * f;
                up[i] -= dn * f;
                // content swept from cell i+1 into cell i, midpoint face value
                let sweep = ((i as f64 + 0.5) * h).powi(d) * dvol;
                let q = 0.25 * sweep;
                di[i] -= q;
                up[i] -= q;
                rhs[i] += q * (c_old[i] + c_old[i + 1]);
            }
            if i > 0 {
                let f = face(i - 1);
                di[i] += dn * f;
                lo[i] -= dn * f;
                let sweep = ((i as f64 - 0.5) * h).powi(d) * dvol;
                let q = 0.25 * sweep;
                di[i] += q;
                lo[i] += q;
                rhs[i] -= q * (c_old[i] + c_old[i - 1]);
            }
        }
        // membrane: Robin outflow minus the volume swept by the boundary
        let robin = dt * rbar * (kappa * h_mid + c_lag) - dvol;
        di[n] += 0.5 * robin;
        rhs[n] -= 0.5 * robin * c_old[n];

        let c_next = tridiagonal(&lo, &di, &up, &rhs);
        let r_next = r_old + dt * (kappa * h_mid + 0.5 * (c_old[n] + c_next[n]));
        let dc = c_next.iter().zip(&c_new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dr = (r_next - r_new).abs();
        c_new = c_next;
        r_new = r_next;
        if dr <= 1e-14 * r_new && dc <= 1e-13 * (1.0 + c_new[n].abs()) {
            let min = c_new.iter().copied().fold(f64::INFINITY, f64::min);
            if min < 0.0 {
                return Err(OracleError::PositivityLoss(min));
            }
            return Ok(RadialState { t: state.t + dt, radius: r_new, c_hat: c_new, kappa, dim: state.dim });
        }
    }
    Err(OracleError::NoConvergence)
}

/// Advances to `t_end` with steps of at most `dt`, landing exactly on it.
pub fn radial_run(state: &RadialState, t_end: f64, dt: f64) -> Result<RadialState, OracleError> {
    let mut s = state.clone();
    while s.t < t_end - 1e-14 {
        let step = dt.min(t_end - s.t);
        s = radial_step(&s, step)?;
    }
    s.t = t_end;
    Ok(s)
}

/// Radius history of the fast-diffusion ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastDiffusionSolution {
    pub t: Vec<f64>,
    pub radius: Vec<f64>,
    pub mass: f64,
    pub kappa: f64,
    /// `(t_lo, t_hi)` bracketing the extinction time, if the disk vanished.
    pub extinction: Option<(f64, f64)>,
}

pub fn fastdiff_rate(r: f64, mass: f64, kappa: f64) -> f64 {
    -kappa / r + mass / (PI * r * r)
}

/// Classical RK4 for `Ṙ = −κ/R + M/(πR²)` on `[0, T]` with step `dt`
/// (the last step is shortened to land on `T`).
pub fn fastdiff_ode(r0: f64, mass: f64, kappa: f64, t_final: f64, dt: f64) -> Result<FastDiffusionSolution, OracleError> {
    if !(r0 > 0.0) || !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(OracleError::Invalid("need R0 > 0, dt > 0, T >= 0"));
    }
    let f = |r: f64| fastdiff_rate(r, mass, kappa);
    let mut t = vec![0.0];
    let mut radius = vec![r0];
    let mut extinction = None;
    let steps = (t_final / dt).ceil() as usize;
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let step = if k + 1 == steps { t_final - t0 } else { dt };
        let r = *radius.last().unwrap();
        let k1 = f(r);
        let k2 = f(r + 0.5 * step * k1);
        let k3 = f(r + 0.5 * step * k2);
        let k4 = f(r + step * k3);
        let next = r + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(next > 0.0) || !next.is_finite() || [k2, k3, k4].iter().any(|v| !v.is_finite()) {
            extinction = Some((t0, t0 + step));
            break;
        }
        t.push(if k + 1 == steps { t_final } else { t0 + step });
        radius.push(next);
    }
    Ok(FastDiffusionSolution { t, radius, mass, kappa, extinction })
}

impl FastDiffusionSolution {
    /// Cubic Hermite interpolation of the radius at time `s`.
    pub fn radius_at(&self, s: f64) -> f64 {
        let k = match self.t.iter().position(|&t| t >= s) {
            Some(0) => return self.radius[0],
            Some(k) => k,
            None => return *self.radius.last().unwrap(),
        };
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let (r0, r1) = (self.radius[k - 1], self.radius[k]);
        let (d0, d1) = (fastdiff_rate(r0, self.mass, self.kappa), fastdiff_rate(r1, self.mass, self.kappa));
        let hstep = t1 - t0;
        let x = (s - t0) / hstep;
        let (x2, x3) = (x * x, x * x * x);
        (2.0 * x3 - 3.0 * x2 + 1.0) * r0
            + (x3 - 2.0 * x2 + x) * hstep * d0
            + (-2.0 * x3 + 3.0 * x2) * r1
            + (x3 - x2) * hstep * d1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let s0 = RadialState::equilibrium(0.9, 257, 1.1, 2).unwrap();
        let s1 = radial_run(&s0, 0.05, 1e-3).unwrap();
        assert!((s1.radius - 0.9).abs() < 1e-12);
        assert!(s1.c_hat.iter().all(|c| (c - 1.1 / 0.9).abs() < 1e-12));
    }

    #[test]
    fn zero_concentration_follows_exact_radius() {
        let s0 = RadialState::from_profile(1.0, 65, 1.0, 2, |_| 0.0).unwrap();
        let s1 = radial_run(&s0, 0.3, 1e-2).unwrap();
        assert!((s1.radius - 0.4f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fast_diffusion_fixed_point() {
        let sol = fastdiff_ode(1.0, PI, 1.0, 1.0, 1e-3).unwrap();
        assert!(sol.radius.iter().all(|r| (r - 1.0).abs() < 1e-14));
    }
}
