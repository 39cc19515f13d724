//! Initial shapes and concentrations.

use serde::{Deserialize, Serialize};

use crate::field::{InteriorField, RefGrid};
use crate::geometry::{CurveGeometry, GeometryError, PolarCurve};
use crate::transport::ConcentrationField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapePreset {
    Circle {
        radius: f64,
    },
    /// Ellipse with semi-axes `a` (along x) and `b`, optionally off-center;
    /// the origin must stay inside.
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `r(φ) = r0 + Σ cos_k cos(kφ) + sin_k sin(kφ)`, `k = 1, 2, …`.
    Fourier {
        r0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl ShapePreset {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive"))
            }
        };
        match self {
            Self::Circle { radius } => pos("radius", *radius),
            Self::Ellipse { a, b, center } => {
                pos("a", *a)?;
                pos("b", *b)?;
                if (center[0] / a).powi(2) + (center[1] / b).powi(2) >= 1.0 {
                    return Err("ellipse center offset leaves the origin outside".into());
                }
                Ok(())
            }
            Self::Fourier { r0, cos, sin } => {
                pos("r0", *r0)?;
                let amp: f64 = cos.iter().chain(sin).map(|c| c.abs()).sum();
                if amp >= *r0 {
                    return Err("Fourier coefficients may make the radius nonpositive".into());
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, n_phi: usize) -> PolarCurve {
        match self {
            Self::Circle { radius } => PolarCurve::circle(n_phi, *radius),
            Self::Ellipse { a, b, center } => PolarCurve::ellipse(n_phi, *a, *b, *center),
            Self::Fourier { r0, cos, sin } => PolarCurve::fourier(n_phi, *r0, cos, sin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConcentrationPreset {
    Uniform {
        value: f64,
    },
    /// `base + amplitude·exp(−|x − center|²/(2 width²))`.
    GaussianBump {
        base: f64,
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
        width: f64,
    },
    /// Uniform `c = 2πκ/|Γ|`, i.e. `κ/R` on a circle of radius `R`.
    Equilibrium,
}

impl ConcentrationPreset {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Self::Uniform { value } if !(value.is_finite() && *value >= 0.0) => {
                Err("uniform value must be nonnegative".into())
            }
            Self::GaussianBump { base, amplitude, width, .. } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err("bump width must be positive".into());
                }
                if !(base.is_finite() && amplitude.is_finite() && *base >= 0.0 && base + amplitude.min(0.0) >= 0.0) {
                    return Err("bump must stay nonnegative".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, curve: &PolarCurve, n_s: usize, kappa: f64) -> Result<ConcentrationField, GeometryError> {
        let grid = RefGrid::new(n_s, curve.n_phi());
        let geo = CurveGeometry::new(curve)?;
        Ok(match self {
            Self::Uniform { value } => InteriorField::filled(grid, *value),
            Self::Equilibrium => InteriorField::filled(grid, std::f64::consts::TAU * kappa / geo.perimeter()),
            Self::GaussianBump { base, amplitude, center, width } => InteriorField::from_fn(grid, |i, j| {
                let s = grid.s(i);
                let p = geo.position[j];
                let d2 = (s * p[0] - center[0]).powi(2) + (s * p[1] - center[1]).powi(2);
                base + amplitude * (-d2 / (2.0 * width * width)).exp()
            }),
        })
    }
}
