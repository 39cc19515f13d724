//! Star-shaped curves as radial graphs, their differential geometry, and the
//! radial-scaling map from the unit disk onto the enclosed domain.
//!
//! Curvature convention: `H = -(curvature of a convex curve)`, so a circle of
//! radius `R` has `H = -1/R` with the outward normal. With this sign the
//! normal law `V_n = κH + ...` shrinks a curvature-driven circle.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{BoundaryField, BoundaryVectorField, RefGrid};
use crate::spectral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve needs at least 8 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("radius at node {index} is not positive and finite: {value}")]
    BadRadius { index: usize, value: f64 },
    #[error("degenerate curve: non-finite geometry at node {0}")]
    Degenerate(usize),
    #[error("curve rate has {got} entries, curve has {expected}")]
    RateLength { got: usize, expected: usize },
}

/// How derivatives of `r(φ)` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeScheme {
    /// FFT differentiation (even `n_phi` only; odd grids fall back to `Fd4`).
    #[default]
    Spectral,
    /// Fourth-order periodic central differences.
    Fd4,
}

/// Boundary `X(φ) = r(φ)(cos φ, sin φ)` sampled at `φ_j = 2πj/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCurve {
    pub r: Vec<f64>,
    pub scheme: DerivativeScheme,
}

impl PolarCurve {
    pub fn new(r: Vec<f64>) -> Self {
        Self { r, scheme: DerivativeScheme::Spectral }
    }

    pub fn with_scheme(mut self, scheme: DerivativeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::new((0..n).map(|j| f(TAU * j as f64 / n as f64)).collect())
    }

    pub fn circle(n: usize, radius: f64) -> Self {
        Self::new(vec![radius; n])
    }

    /// Ellipse with semi-axes `a` (x) and `b` (y) centred at `center`; the
    /// origin must lie inside it.
    pub fn ellipse(n: usize, a: f64, b: f64, center: [f64; 2]) -> Self {
        Self::from_fn(n, |p| ellipse_radius(p, a, b, center))
    }

    /// `r(φ) = r0 + Σ_k a_k cos(kφ) + b_k sin(kφ)`, `k` starting at 1.
    pub fn fourier(n: usize, r0: f64, cos: &[f64], sin: &[f64]) -> Self {
        Self::from_fn(n, |p| {
            let mut r = r0;
            for (k, a) in cos.iter().enumerate() {
                r += a * ((k + 1) as f64 * p).cos();
            }
            for (k, b) in sin.iter().enumerate() {
                r += b * ((k + 1) as f64 * p).sin();
            }
            r
        })
    }

    pub fn n_phi(&self) -> usize {
        self.r.len()
    }

    pub fn dphi(&self) -> f64 {
        TAU / self.r.len() as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.dphi()
    }

    pub fn min_r(&self) -> f64 {
        self.r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.r.len() < 8 {
            return Err(GeometryError::TooFewNodes(self.r.len()));
        }
        for (index, &value) in self.r.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::BadRadius { index, value });
            }
        }
        Ok(())
    }

    /// `(r', r'')` with the configured scheme.
    pub fn derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        match self.scheme {
            DerivativeScheme::Spectral if self.r.len() % 2 == 0 => spectral::fourier_derivatives(&self.r),
            _ => spectral::fd4_derivatives(&self.r),
        }
    }

    /// Rotates the curve by `shift` grid nodes counter-clockwise.
    pub fn rotated_by_nodes(&self, shift: usize) -> Self {
        let n = self.r.len();
        let r = (0..n).map(|j| self.r[(j + n - shift % n) % n]).collect();
        Self { r, scheme: self.scheme }
    }
}

/// Polar radius of the ellipse `((x-cx)/a)^2 + ((y-cy)/b)^2 = 1` along
/// direction `phi`.
pub fn ellipse_radius(phi: f64, a: f64, b: f64, center: [f64; 2]) -> f64 {
    let (c, s) = (phi.cos(), phi.sin());
    let qa = c * c / (a * a) + s * s / (b * b);
    let qb = center[0] * c / (a * a) + center[1] * s / (b * b);
    let qc = center[0] * center[0] / (a * a) + center[1] * center[1] / (b * b) - 1.0;
    (qb + (qb * qb - qa * qc).sqrt()) / qa
}

/// Everything derived from the boundary samples, computed once.
#[derive(Debug, Clone)]
pub struct CurveGeometry {
    pub curve: PolarCurve,
    pub phi: Vec<f64>,
    pub dr: Vec<f64>,
    pub ddr: Vec<f64>,
    pub position: BoundaryVectorField,
    /// `|X'(φ)| = sqrt(r² + r'²)`.
    pub speed: BoundaryField,
    /// Counter-clockwise unit tangent.
    pub tangent: BoundaryVectorField,
    /// Outward unit normal.
    pub normal: BoundaryVectorField,
    pub curvature: BoundaryField,
    /// Arclength quadrature weights `|X'_j| Δφ`.
    pub ds: BoundaryField,
}

impl CurveGeometry {
    pub fn new(curve: &PolarCurve) -> Result<Self, GeometryError> {
        curve.validate()?;
        let n = curve.n_phi();
        let (dr, ddr) = curve.derivatives();
        let dphi = curve.dphi();
        let mut geo = CurveGeometry {
            curve: curve.clone(),
            phi: (0..n).map(|j| curve.phi(j)).collect(),
            dr,
            ddr,
            position: Vec::with_capacity(n),
            speed: Vec::with_capacity(n),
            tangent: Vec::with_capacity(n),
            normal: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
            ds: Vec::with_capacity(n),
        };
        for j in 0..n {
            let (r, rp, rpp) = (curve.r[j], geo.dr[j], geo.ddr[j]);
            let (c, s) = (geo.phi[j].cos(), geo.phi[j].sin());
            let q = r * r + rp * rp;
            let speed = q.sqrt();
            let h = -(r * r + 2.0 * rp * rp - r * rpp) / (q * speed);
            if !(speed.is_finite() && speed > 0.0 && h.is_finite()) {
                return Err(GeometryError::Degenerate(j));
            }
            // X' = r' e_r + r e_φ
            let xp = [rp * c - r * s, rp * s + r * c];
            geo.position.push([r * c, r * s]);
            geo.speed.push(speed);
            geo.tangent.push([xp[0] / speed, xp[1] / speed]);
            geo.normal.push([xp[1] / speed, -xp[0] / speed]);
            geo.curvature.push(h);
            geo.ds.push(speed * dphi);
        }
        Ok(geo)
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn area(&self) -> f64 {
        0.5 * self.curve.r.iter().map(|r| r * r).sum::<f64>() * self.curve.dphi()
    }

    pub fn perimeter(&self) -> f64 {
        self.ds.iter().sum()
    }

    /// `Λ = |X'|/r`, the factor in `ṙ = Λ V_n`.
    pub fn normal_velocity_factor(&self) -> BoundaryField {
        self.speed.iter().zip(&self.curve.r).map(|(s, r)| s / r).collect()
    }

    /// Largest boundary mesh width.
    pub fn max_ds(&self) -> f64 {
        self.ds.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_ds(&self) -> f64 {
        self.ds.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Area, perimeter and arclength weights of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Measures {
    pub area: f64,
    pub perimeter: f64,
    pub arclength_weights: BoundaryField,
}

/// Mean curvature `H = -(r² + 2r'² - r r'')/(r² + r'²)^{3/2}` at each node.
pub fn curvature(curve: &PolarCurve) -> Result<BoundaryField, GeometryError> {
    Ok(CurveGeometry::new(curve)?.curvature)
}

/// Outward unit normals.
pub fn normal(curve: &PolarCurve) -> Result<BoundaryVectorField, GeometryError> {
    Ok(CurveGeometry::new(curve)?.normal)
}

pub fn measures(curve: &PolarCurve) -> Result<Measures, GeometryError> {
    let geo = CurveGeometry::new(curve)?;
    Ok(Measures { area: geo.area(), perimeter: geo.perimeter(), arclength_weights: geo.ds })
}

pub fn normal_velocity_factor(curve: &PolarCurve) -> Result<BoundaryField, GeometryError> {
    Ok(CurveGeometry::new(curve)?.normal_velocity_factor())
}

/// The map `Θ(s, φ) = s r(φ)(cos φ, sin φ)` from the reference disk onto the
/// domain, with its metric data on a [`RefGrid`].
#[derive(Debug, Clone)]
pub struct DomainMap {
    pub geometry: CurveGeometry,
    pub grid: RefGrid,
    /// `g = r'/r` per angle.
    pub g: Vec<f64>,
    /// `g' = (r r'' - r'²)/r²` per angle.
    pub dg: Vec<f64>,
    /// `ṙ` per angle, when the curve moves.
    pub rate: Option<Vec<f64>>,
}

pub fn build_domain_map(
    curve: &PolarCurve,
    curve_rate: Option<&[f64]>,
    n_s: usize,
) -> Result<DomainMap, GeometryError> {
    let geometry = CurveGeometry::new(curve)?;
    if let Some(rate) = curve_rate {
        if rate.len() != curve.n_phi() {
            return Err(GeometryError::RateLength { got: rate.len(), expected: curve.n_phi() });
        }
    }
    let r = &curve.r;
    let g = (0..r.len()).map(|j| geometry.dr[j] / r[j]).collect();
    let dg = (0..r.len())
        .map(|j| (r[j] * geometry.ddr[j] - geometry.dr[j] * geometry.dr[j]) / (r[j] * r[j]))
        .collect();
    Ok(DomainMap {
        grid: RefGrid::new(n_s, curve.n_phi()),
        geometry,
        g,
        dg,
        rate: curve_rate.map(|r| r.to_vec()),
    })
}

impl DomainMap {
    pub fn r(&self, j: usize) -> f64 {
        self.geometry.curve.r[j]
    }

    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        let s = self.grid.s(i);
        let p = self.geometry.position[j];
        [s * p[0], s * p[1]]
    }

    /// Columns `∂Θ/∂s` and `∂Θ/∂φ` at node `(i, j)`.
    pub fn jacobian(&self, i: usize, j: usize) -> [[f64; 2]; 2] {
        let s = self.grid.s(i);
        let (r, rp) = (self.r(j), self.geometry.dr[j]);
        let (c, sn) = (self.geometry.phi[j].cos(), self.geometry.phi[j].sin());
        let ds = [r * c, r * sn];
        let dphi = [s * (rp * c - r * sn), s * (rp * sn + r * c)];
        [ds, dphi]
    }

    /// `det ∂Θ = s r(φ)²`.
    pub fn det(&self, i: usize, j: usize) -> f64 {
        let r = self.r(j);
        self.grid.s(i) * r * r
    }

    /// Mesh velocity `w = s ṙ e_r`; zero for a static curve.
    pub fn mesh_velocity(&self, i: usize, j: usize) -> [f64; 2] {
        match &self.rate {
            Some(rate) => {
                let v = self.grid.s(i) * rate[j];
                [v * self.geometry.phi[j].cos(), v * self.geometry.phi[j].sin()]
            }
            None => [0.0, 0.0],
        }
    }

    /// Coefficients `(a_ss, a_s, a_φφ, a_sφ)` of the pulled-back Laplacian
    /// `a_ss ∂ss + a_s ∂s + a_φφ ∂φφ + a_sφ ∂sφ` at a point with `s > 0`.
    pub fn laplacian_coefficients(&self, s: f64, j: usize) -> [f64; 4] {
        let r = self.r(j);
        let (g, dg) = (self.g[j], self.dg[j]);
        let inv = 1.0 / (r * r);
        [inv * (1.0 + g * g), inv * (1.0 + g * g - dg) / s, inv / (s * s), -2.0 * inv * g / s]
    }

    /// Physical gradient from reference derivatives `(∂s f, ∂φ f)` at `(s, φ_j)`.
    pub fn gradient(&self, s: f64, j: usize, fs: f64, fphi: f64) -> [f64; 2] {
        let r = self.r(j);
        let g = self.g[j];
        let (c, sn) = (self.geometry.phi[j].cos(), self.geometry.phi[j].sin());
        let radial = fs / r;
        let angular = (fphi - s * g * fs) / (s * r);
        [radial * c - angular * sn, radial * sn + angular * c]
    }
}

/// Control-volume weights of the reference grid nodes mapped onto the domain
/// bounded by `r`.
///
/// Node `(i, j)` owns `∫ s ds` over its radial cell (half cells at the origin
/// and at the boundary) times `r_j² Δφ`. The origin disk is split evenly over
/// its `n_phi` copies. The weights sum to the polygonal area `½ Σ r_j² Δφ`.
pub fn node_volumes(grid: &RefGrid, r: &[f64]) -> Vec<f64> {
    let h = grid.h();
    let m = grid.boundary_ring();
    let dphi = grid.dphi();
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.n_s {
        let a = radial_cell_moment(i, m, h);
        for rj in r.iter().take(grid.n_phi) {
            out.push(a * rj * rj * dphi);
        }
    }
    out
}

/// `∫ s ds` over the radial cell of ring `i` (boundary ring `m`).
pub fn radial_cell_moment(i: usize, m: usize, h: f64) -> f64 {
    if i == 0 {
        h * h / 8.0
    } else if i == m {
        0.5 * (h - 0.25 * h * h)
    } else {
        i as f64 * h * h
    }
}
