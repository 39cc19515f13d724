//! Diagnostics CSV, JSON snapshots with exact floats, SVG frames and the run
//! manifest.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::evolution::DiagnosticsRecord;
use crate::field::{InteriorField, RefGrid};
use crate::geometry::PolarCurve;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutputError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("snapshot schema error: {0}")]
    Schema(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> OutputError {
    OutputError::Io(format!("{}: {e}", path.display()))
}

/// Decimal with 17 significant digits; non-finite values as `NaN`/`inf`/`-inf`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn csv_header() -> String {
    DiagnosticsRecord::COLUMNS.join(",")
}

pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    rec.values().iter().map(|v| format_value(*v)).collect::<Vec<_>>().join(",")
}

/// Streams diagnostics rows to a CSV file.
pub struct DiagnosticsWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl DiagnosticsWriter {
    pub fn create(path: &Path) -> Result<Self, OutputError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = Self { out: BufWriter::new(file), path: path.to_path_buf() };
        w.line(&csv_header())?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<(), OutputError> {
        self.out.write_all(s.as_bytes()).and_then(|_| self.out.write_all(b"\n")).map_err(|e| io_err(&self.path, e))
    }

    pub fn write(&mut self, rec: &DiagnosticsRecord) -> Result<(), OutputError> {
        self.line(&csv_row(rec))
    }

    pub fn finish(mut self) -> Result<(), OutputError> {
        self.out.flush().map_err(|e| io_err(&self.path, e))
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(csv_header().as_str()) {
        return Err(OutputError::Schema(format!("{}: unexpected header", path.display())));
    }
    lines
        .map(|l| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|e| OutputError::Schema(format!("bad value '{x}': {e}"))))
                .collect::<Result<_, _>>()?;
            let arr: [f64; 14] =
                vals.try_into().map_err(|_| OutputError::Schema("wrong number of columns".into()))?;
            Ok(DiagnosticsRecord::from_values(arr))
        })
        .collect()
}

/// Float stored as its IEEE-754 bit pattern in hexadecimal.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Hex(f64);

impl Serialize for Hex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:016x}", self.0.to_bits()))
    }
}

impl<'de> Deserialize<'de> for Hex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map(|b| Hex(f64::from_bits(b))).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotFile {
    schema_version: u32,
    t: Hex,
    config: RunConfig,
    n_phi: usize,
    n_s: usize,
    r: Vec<Hex>,
    xi: Vec<Hex>,
    diagnostics_columns: Vec<String>,
    diagnostics: Vec<Hex>,
}

/// Complete restartable state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub config: RunConfig,
    pub r: Vec<f64>,
    pub xi: InteriorField<f64>,
    pub record: DiagnosticsRecord,
}

impl Snapshot {
    pub fn to_json(&self) -> String {
        let file = SnapshotFile {
            schema_version: SCHEMA_VERSION,
            t: Hex(self.t),
            config: self.config.clone(),
            n_phi: self.xi.grid.n_phi,
            n_s: self.xi.grid.n_s,
            r: self.r.iter().map(|v| Hex(*v)).collect(),
            xi: self.xi.values.iter().map(|v| Hex(*v)).collect(),
            diagnostics_columns: DiagnosticsRecord::COLUMNS.iter().map(|c| c.to_string()).collect(),
            diagnostics: self.record.values().iter().map(|v| Hex(*v)).collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("snapshot serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, OutputError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| OutputError::Schema(format!("not JSON: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            other => {
                return Err(OutputError::Schema(format!(
                    "schema_version {other:?} does not match {SCHEMA_VERSION}"
                )))
            }
        }
        let f: SnapshotFile = serde_json::from_value(value).map_err(|e| OutputError::Schema(e.to_string()))?;
        if f.r.len() != f.n_phi || f.xi.len() != f.n_phi * f.n_s || f.n_s < 3 || f.n_phi < 4 {
            return Err(OutputError::Schema("array lengths do not match the grid".into()));
        }
        if f.diagnostics_columns.iter().map(String::as_str).ne(DiagnosticsRecord::COLUMNS) || f.diagnostics.len() != 14 {
            return Err(OutputError::Schema("diagnostics columns differ".into()));
        }
        let mut rec = [0.0; 14];
        for (k, v) in f.diagnostics.iter().enumerate() {
            rec[k] = v.0;
        }
        Ok(Snapshot {
            t: f.t.0,
            config: f.config,
            r: f.r.iter().map(|v| v.0).collect(),
            xi: InteriorField { grid: RefGrid::new(f.n_s, f.n_phi), values: f.xi.iter().map(|v| v.0).collect() },
            record: DiagnosticsRecord::from_values(rec),
        })
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), OutputError> {
    std::fs::write(path, snap.to_json()).map_err(|e| io_err(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, OutputError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Snapshot::from_json(&text)
}

/// Band boundaries for the SVG concentration fill.
pub const BAND_LEVELS: [f64; 8] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0];
const BAND_COLORS: [&str; 9] =
    ["#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c", "#08306b"];

fn band(c: f64) -> usize {
    BAND_LEVELS.iter().take_while(|&&l| c >= l).count()
}

/// Boundary polygon over concentration bands. Cells are drawn on a grid of
/// at most 48 × 96 sampled nodes.
pub fn svg_frame(curve: &PolarCurve, xi: &InteriorField<f64>, t: f64) -> String {
    let n = curve.n_phi();
    let pts: Vec<[f64; 2]> =
        (0..n).map(|j| [curve.r[j] * curve.phi(j).cos(), curve.r[j] * curve.phi(j).sin()]).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0);
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\" width=\"512\" height=\"{:.0}\">",
        x0 - pad,
        -(y1 + pad),
        w,
        h,
        512.0 * h / w
    );
    let _ = writeln!(s, "<title>t = {t:.6}</title>");
    let _ = writeln!(s, "<g transform=\"scale(1,-1)\" stroke=\"none\">");
    let grid = xi.grid;
    let si = (grid.n_s - 1).div_ceil(48).max(1);
    let sj = n.div_ceil(96).max(1);
    let rings: Vec<usize> = (0..grid.n_s).step_by(si).chain(std::iter::once(grid.n_s - 1)).collect();
    let mut rings = rings;
    rings.dedup();
    let angles: Vec<usize> = (0..n).step_by(sj).collect();
    let at = |i: usize, j: usize| {
        let s = grid.s(i);
        [s * pts[j][0], s * pts[j][1]]
    };
    for w in rings.windows(2) {
        let (ia, ib) = (w[0], w[1]);
        for (k, &ja) in angles.iter().enumerate() {
            let jb = angles[(k + 1) % angles.len()];
            let c = 0.25 * (xi.at(ia, ja) + xi.at(ia, jb) + xi.at(ib, ja) + xi.at(ib, jb));
            let q = [at(ia, ja), at(ib, ja), at(ib, jb), at(ia, jb)];
            let _ = writeln!(
                s,
                "<polygon points=\"{:.6},{:.6} {:.6},{:.6} {:.6},{:.6} {:.6},{:.6}\" fill=\"{}\"/>",
                q[0][0], q[0][1], q[1][0], q[1][1], q[2][0], q[2][1], q[3][0], q[3][1], BAND_COLORS[band(c)]
            );
        }
    }
    s.push_str("</g>\n<path transform=\"scale(1,-1)\" fill=\"none\" stroke=\"black\" stroke-width=\"");
    let _ = write!(s, "{:.6}\" d=\"", 0.004 * w.max(h));
    for (k, p) in pts.iter().enumerate() {
        let _ = write!(s, "{}{:.6} {:.6} ", if k == 0 { "M" } else { "L" }, p[0], p[1]);
    }
    s.push_str("Z\"/>\n</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub status: RunStatus,
    pub mode: String,
    pub t_final: f64,
    pub t_reached: f64,
    pub steps: usize,
    pub error: Option<String>,
    pub files: Vec<String>,
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<(), OutputError> {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serializes");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}
