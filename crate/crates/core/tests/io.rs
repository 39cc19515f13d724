use osmoflow_core::config::RunConfig;
use osmoflow_core::output::{read_csv, read_snapshot, svg_frame, OutputError, Snapshot};
use osmoflow_core::run::{run_to_dir, RunError, RunOptions};

const SMALL: &str = r#"
[model]
mode = "full"
kappa = 1.0
[grid]
n_phi = 16
n_s = 8
[time]
t_final = 0.02
[initial_shape]
preset = "ellipse"
a = 1.1
b = 0.9
[initial_concentration]
preset = "uniform"
value = 0.8
[initial_data]
i2_policy = "project"
[output]
snapshot_interval = 0.01
emit_svg = true
"#;

fn quiet() -> RunOptions {
    RunOptions { quiet: true, restart: None }
}

#[test]
fn zero_horizon_writes_only_the_initial_record() {
    let cfg = RunConfig::from_toml(&SMALL.replace("t_final = 0.02", "t_final = 0.0")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_to_dir(&cfg, dir.path(), &quiet()).unwrap();
    assert_eq!(s.steps, 0);
    let rows = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].t, 0.0);
    assert!(rows[0].var_residual.is_nan());
}

#[test]
fn snapshots_round_trip_exactly() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, dir.path(), &quiet()).unwrap();
    for name in ["snapshot_0000.json", "snapshot_0001.json", "final.json"] {
        let path = dir.path().join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        let snap = read_snapshot(&path).unwrap();
        assert_eq!(snap.to_json(), text, "{name}");
        assert_eq!(snap.config, cfg);
    }
    let last = read_snapshot(&dir.path().join("final.json")).unwrap();
    let rows = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    assert_eq!(last.record, *rows.last().unwrap());
    assert_eq!(last.t, 0.02);
    assert!(dir.path().join("frame_0002.svg").exists());
}

#[test]
fn snapshot_schema_is_checked() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, dir.path(), &quiet()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("final.json")).unwrap();
    let bumped = text.replace("\"schema_version\": 1", "\"schema_version\": 99");
    assert!(matches!(Snapshot::from_json(&bumped), Err(OutputError::Schema(_))));
    let truncated = text.replace("\"n_s\": 8", "\"n_s\": 9");
    assert!(matches!(Snapshot::from_json(&truncated), Err(OutputError::Schema(_))));
    assert!(matches!(Snapshot::from_json("{}"), Err(OutputError::Schema(_))));
}

#[test]
fn restart_continues_bitwise() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_to_dir(&cfg, a.path(), &quiet()).unwrap();
    let opts = RunOptions { quiet: true, restart: Some(a.path().join("snapshot_0001.json")) };
    run_to_dir(&cfg, b.path(), &opts).unwrap();
    assert_eq!(std::fs::read(a.path().join("final.json")).unwrap(), std::fs::read(b.path().join("final.json")).unwrap());
    let other = RunConfig::from_toml(&SMALL.replace("n_phi = 16", "n_phi = 32")).unwrap();
    let err = run_to_dir(&other, b.path(), &opts).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn stepping_failure_leaves_a_partial_manifest() {
    // without solute the disk shrinks to a point near t = 0.5
    let toml = SMALL
        .replace("t_final = 0.02", "t_final = 1.0")
        .replace("value = 0.8", "value = 0.0")
        .replace("i2_policy = \"project\"", "i2_policy = \"project\"\nc_min = 0.0")
        .replace("snapshot_interval = 0.01", "snapshot_interval = 0.25");
    let cfg = RunConfig::from_toml(&toml).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_to_dir(&cfg, dir.path(), &quiet()).unwrap_err();
    assert!(matches!(err, RunError::Simulation { .. }));
    assert_eq!(err.exit_code(), 1);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "partial");
    assert!(manifest["error"].is_string());
}

#[test]
fn incompatible_data_is_rejected_by_default() {
    let cfg = RunConfig::from_toml(&SMALL.replace("i2_policy = \"project\"", "i2_policy = \"reject\"")).unwrap();
    let err = run_to_dir(&cfg, tempfile::tempdir().unwrap().path(), &quiet()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn svg_frame_draws_the_boundary() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_to_dir(&cfg, dir.path(), &quiet()).unwrap();
    let svg = svg_frame(&s.final_state.curve, &s.final_state.xi, s.t_reached);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polygon").count(), 7 * 16);
    assert!(svg.contains("Z\"/>"));
}

#[test]
fn rejection_example_with_unit_concentration() {
    // ∂n c + c(κH + c) = 1·(−2 + 1) on the unit circle with κ = 2
    let text = SMALL
        .replace("kappa = 1.0", "kappa = 2.0")
        .replace("preset = \"ellipse\"\na = 1.1\nb = 0.9", "preset = \"circle\"\nradius = 1.0")
        .replace("value = 0.8", "value = 1.0")
        .replace("i2_policy = \"project\"", "i2_policy = \"reject\"");
    let cfg = RunConfig::from_toml(&text).unwrap();
    match osmoflow_core::run::initial_data(&cfg) {
        Err(RunError::Compatibility(osmoflow_core::evolution::EvolutionError::Incompatible { residual, .. })) => {
            assert!((residual - 1.0).abs() < 1e-12, "{residual}")
        }
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn diagnostics_rows_increase_in_time() {
    let cfg = RunConfig::from_toml(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&cfg, dir.path(), &quiet()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(!text.contains('\r'));
    let rows = read_csv(&dir.path().join("diagnostics.csv")).unwrap();
    assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
    let sum: f64 = rows[1..].iter().map(|r| r.dt_used).sum();
    assert!((sum - 0.02).abs() < 1e-14);
}

#[test]
fn svg_is_deterministic_and_spans_the_ellipse() {
    use osmoflow_core::field::{InteriorField, RefGrid};
    use osmoflow_core::geometry::PolarCurve;
    let curve = PolarCurve::ellipse(64, 1.3, 0.8, [0.0, 0.0]);
    let xi = InteriorField::filled(RefGrid::new(8, 64), 0.4);
    let a = svg_frame(&curve, &xi, 0.0);
    assert_eq!(a, svg_frame(&curve, &xi, 0.0));
    let path = a.split(" d=\"").nth(1).unwrap();
    let nums: Vec<f64> = path
        .split(|c: char| c == 'M' || c == 'L' || c == ' ' || c == 'Z' || c == '"')
        .filter_map(|t| t.parse().ok())
        .collect();
    assert_eq!(nums.len(), 128);
    let xs: Vec<f64> = nums.iter().step_by(2).copied().collect();
    let ys: Vec<f64> = nums.iter().skip(1).step_by(2).copied().collect();
    let span = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((span(&xs) - 2.6).abs() < 1e-5 && (span(&ys) - 1.6).abs() < 1e-5);
}
