//! Run configuration (TOML).
//!
//! ```toml
//! [model]
//! mode = "full"
//! kappa = 1.0
//!
//! [grid]
//! n_phi = 128
//! n_s = 128
//!
//! [time]
//! t_final = 1.0
//! dt = "auto"
//!
//! [initial_shape]
//! preset = "circle"
//! radius = 1.0
//!
//! [initial_concentration]
//! preset = "uniform"
//! value = 0.8
//!
//! [initial_data]
//! i2_policy = "project"
//!
//! [output]
//! directory = "out"
//! snapshot_interval = 0.5
//! emit_svg = true
//! ```

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::evolution::{DtPolicy, EvolutionOptions, Mode};
use crate::geometry::DerivativeScheme;
use crate::initial::{ConcentrationPreset, ShapePreset};
use crate::stokes::StokesOptions;
use crate::transport::TransportOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial_shape: ShapePreset,
    pub initial_concentration: ConcentrationPreset,
    #[serde(default)]
    pub initial_data: InitialDataConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mode: Mode,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_phi: usize,
    pub n_s: usize,
    #[serde(default)]
    pub derivatives: DerivativeScheme,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtSetting {
    Auto,
    Fixed(f64),
}

impl Serialize for DtSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DtSetting::Auto => s.serialize_str("auto"),
            DtSetting::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for DtSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = DtSetting;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"auto\" or a positive number")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<DtSetting, E> {
                if v == "auto" {
                    Ok(DtSetting::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<DtSetting, E> {
                Ok(DtSetting::Fixed(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<DtSetting, E> {
                Ok(DtSetting::Fixed(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<DtSetting, E> {
                Ok(DtSetting::Fixed(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    #[serde(default = "auto_dt")]
    pub dt: DtSetting,
}

fn auto_dt() -> DtSetting {
    DtSetting::Auto
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum I2Policy {
    Reject,
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    #[serde(default = "default_policy")]
    pub i2_policy: I2Policy,
    /// Lower bound on the initial concentration. Zero admits `c ≡ 0`.
    #[serde(default = "default_c_min")]
    pub c_min: f64,
}

fn default_policy() -> I2Policy {
    I2Policy::Reject
}

fn default_c_min() -> f64 {
    1e-8
}

impl Default for InitialDataConfig {
    fn default() -> Self {
        Self { i2_policy: default_policy(), c_min: default_c_min() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub solvability: f64,
    pub max_condition: f64,
    pub linear_solver: f64,
    pub max_courant: f64,
    pub r_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = StokesOptions::default();
        let t = TransportOptions::default();
        Self {
            solvability: s.solvability_tol,
            max_condition: s.max_condition,
            linear_solver: t.tolerance,
            max_courant: t.max_courant,
            r_floor: EvolutionOptions::default().r_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: String,
    /// Time between snapshots; none writes only the initial and final ones.
    #[serde(default)]
    pub snapshot_interval: Option<f64>,
    #[serde(default)]
    pub emit_svg: bool,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_dir(), snapshot_interval: None, emit_svg: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse(String),
    Validation(String),
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "parse error: {m}"),
            ConfigError::Validation(m) => write!(f, "invalid configuration: {m}"),
            ConfigError::Io(m) => write!(f, "cannot read configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Validation(m));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.model.kappa) {
            return bad(format!("kappa must be positive, got {}", self.model.kappa));
        }
        if self.grid.n_phi < 8 {
            return bad(format!("n_phi must be at least 8, got {}", self.grid.n_phi));
        }
        if self.grid.n_s < 4 {
            return bad(format!("n_s must be at least 4, got {}", self.grid.n_s));
        }
        if !(self.time.t_final.is_finite() && self.time.t_final >= 0.0) {
            return bad(format!("t_final must be nonnegative, got {}", self.time.t_final));
        }
        if let DtSetting::Fixed(dt) = self.time.dt {
            if !finite_pos(dt) {
                return bad(format!("dt must be positive or \"auto\", got {dt}"));
            }
        }
        self.initial_shape.validate().map_err(ConfigError::Validation)?;
        self.initial_concentration.validate().map_err(ConfigError::Validation)?;
        if !(self.initial_data.c_min.is_finite() && self.initial_data.c_min >= 0.0) {
            return bad("c_min must be nonnegative".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("solvability", t.solvability),
            ("max_condition", t.max_condition),
            ("linear_solver", t.linear_solver),
            ("max_courant", t.max_courant),
            ("r_floor", t.r_floor),
        ] {
            if !finite_pos(v) {
                return bad(format!("tolerance {name} must be positive"));
            }
        }
        if let Some(dt) = self.output.snapshot_interval {
            if !finite_pos(dt) {
                return bad("snapshot_interval must be positive".into());
            }
        }
        Ok(())
    }

    pub fn evolution_options(&self) -> EvolutionOptions {
        let t = &self.tolerances;
        EvolutionOptions {
            stokes: StokesOptions { n_s: self.grid.n_s, solvability_tol: t.solvability, max_condition: t.max_condition },
            transport: TransportOptions { max_courant: t.max_courant, tolerance: t.linear_solver, ..Default::default() },
            r_floor: t.r_floor,
        }
    }

    pub fn dt_policy(&self) -> DtPolicy {
        match self.time.dt {
            DtSetting::Auto => DtPolicy::Auto,
            DtSetting::Fixed(dt) => DtPolicy::Fixed(dt),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
mode = "full"
kappa = 1.0
[grid]
n_phi = 32
n_s = 16
[time]
t_final = 0.1
dt = "auto"
[initial_shape]
preset = "circle"
radius = 1.0
[initial_concentration]
preset = "equilibrium"
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.model.mode, Mode::Full);
        assert_eq!(cfg.time.dt, DtSetting::Auto);
        assert_eq!(cfg.initial_data.i2_policy, I2Policy::Reject);
    }

    #[test]
    fn numeric_dt_and_unknown_keys() {
        let cfg = RunConfig::from_toml(&BASE.replace("dt = \"auto\"", "dt = 1e-3")).unwrap();
        assert_eq!(cfg.time.dt, DtSetting::Fixed(1e-3));
        let err = RunConfig::from_toml(&BASE.replace("kappa = 1.0", "kappa = 1.0\ncolour = 3")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn negative_kappa_is_a_validation_error() {
        let err = RunConfig::from_toml(&BASE.replace("kappa = 1.0", "kappa = -1.0")).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)));
    }
}
