use osmoflow_core::config::RunConfig;
use osmoflow_core::evolution::{
    check_compatibility, project_compatibility, variational_residual, DiagnosticsRecord, DtPolicy, EvolutionError,
    EvolutionOptions, Mode, SimState, Simulation,
};
use osmoflow_core::field::{InteriorField, RefGrid};
use osmoflow_core::geometry::PolarCurve;
use osmoflow_core::run::initial_data;

fn config(mode: &str, shape: &str, conc: &str) -> RunConfig {
    RunConfig::from_toml(&format!(
        "[model]\nmode = \"{mode}\"\nkappa = 1.0\n[grid]\nn_phi = 32\nn_s = 16\n[time]\nt_final = 0.1\n\
         [initial_shape]\n{shape}\n[initial_concentration]\n{conc}\n[initial_data]\ni2_policy = \"project\"\nc_min = 0.0"
    ))
    .unwrap()
}

fn simulate(cfg: &RunConfig, t: f64) -> (Simulation, Vec<DiagnosticsRecord>) {
    let mut sim = Simulation::new(initial_data(cfg).unwrap().state, cfg.evolution_options(), cfg.dt_policy());
    let mut rows = vec![sim.initial_record().unwrap()];
    sim.run_until(t, |r, _| rows.push(*r)).unwrap();
    (sim, rows)
}

const ELLIPSE: &str = "preset = \"ellipse\"\na = 1.2\nb = 0.85";
const BUMP: &str = "preset = \"gaussian_bump\"\nbase = 0.5\namplitude = 0.6\ncenter = [0.2, 0.1]\nwidth = 0.3";

#[test]
fn every_mode_dissipates_energy() {
    for mode in Mode::ALL {
        let (_, rows) = simulate(&config(mode.name(), ELLIPSE, BUMP), 0.05);
        let e0 = rows[0].energy.abs();
        for w in rows.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-8 * e0, "{mode}: energy rose at t = {}", w[1].t);
            assert!(w[1].diss_total >= 0.0);
        }
        assert_eq!(rows.last().unwrap().t, 0.05);
    }
}

#[test]
fn solute_mass_is_conserved_in_every_mode() {
    for mode in Mode::ALL {
        let (_, rows) = simulate(&config(mode.name(), ELLIPSE, BUMP), 0.05);
        let m0 = rows[0].mass;
        for r in &rows {
            assert!(((r.mass - m0) / m0).abs() < 1e-11, "{mode}: {} vs {m0}", r.mass);
        }
    }
}

#[test]
fn fast_modes_keep_the_concentration_uniform() {
    for mode in [Mode::FastDiffusion, Mode::FastDiffusionNoflow] {
        let (sim, _) = simulate(&config(mode.name(), ELLIPSE, BUMP), 0.05);
        let xi = &sim.state.xi;
        assert!(xi.max() - xi.min() < 1e-14 * xi.max(), "{mode}");
    }
}

#[test]
fn impermeable_mode_keeps_the_area() {
    let (_, rows) = simulate(&config("impermeable", ELLIPSE, BUMP), 0.1);
    let a0 = rows[0].area;
    assert!(rows.iter().all(|r| ((r.area - a0) / a0).abs() < 1e-5));
    assert!(rows.iter().all(|r| r.diss_membrane == 0.0));
}

#[test]
fn full_mode_area_rate_matches_the_membrane_flux() {
    // d|Ω|/dt = ∮ (κH + c) ds, since ∮ u·n = 0
    let cfg = config("full", ELLIPSE, BUMP);
    let mut sim = Simulation::new(initial_data(&cfg).unwrap().state, cfg.evolution_options(), DtPolicy::Fixed(1e-4));
    let r0 = sim.initial_record().unwrap();
    let geo = sim.state.geometry().unwrap();
    let trace = sim.state.trace();
    let rate: f64 = (0..32).map(|j| (geo.curvature[j] + trace[j]) * geo.ds[j]).sum();
    let r1 = sim.step(1e-4).unwrap();
    let measured = (r1.area - r0.area) / 1e-4;
    assert!((measured - rate).abs() < 1e-2 * rate.abs().max(1e-3), "{measured} vs {rate}");
}

#[test]
fn projection_enforces_the_boundary_condition_in_each_mode() {
    let curve = PolarCurve::ellipse(32, 1.2, 0.85, [0.0, 0.0]);
    let xi = InteriorField::filled(RefGrid::new(16, 32), 0.7);
    for mode in [Mode::Full, Mode::Osmosis, Mode::Impermeable] {
        let (fixed, _) = project_compatibility(&curve, &xi, 1.0, mode).unwrap();
        assert!(check_compatibility(&curve, &fixed, 1.0, mode).unwrap() < 1e-10);
        assert_eq!(fixed.boundary(), xi.boundary());
    }
    assert!(matches!(check_compatibility(&curve, &xi, 1.0, Mode::Full), Err(EvolutionError::Incompatible { .. })));
    assert!(check_compatibility(&curve, &xi, 1.0, Mode::Impermeable).unwrap() < 1e-14);
}

#[test]
fn residual_flags_a_flat_energy() {
    let prev = DiagnosticsRecord::from_values([0.0, 1.0, 1.0, 1.0, 5.0, 1.0, 0.0, 0.0, 1.0, f64::NAN, 1.0, 1.0, 1.0, 0.0]);
    let (res, flat) = variational_residual(&prev, 5.0, 0.0, 1e-3);
    assert!(flat && res > 1.0);
    let (res, flat) = variational_residual(&prev, 5.0 - 2e-3, 1.0, 1e-3);
    assert!(!flat && res.abs() < 1e-12);
}

#[test]
fn collapse_is_reported_not_hidden() {
    let curve = PolarCurve::circle(16, 0.05);
    let xi = InteriorField::filled(RefGrid::new(8, 16), 0.0);
    let mut sim = Simulation::new(SimState::new(curve, xi, 1.0, Mode::Osmosis), EvolutionOptions::default(), DtPolicy::Fixed(1e-3));
    let err = sim.run_until(1.0, |_, _| {}).unwrap_err();
    assert!(matches!(err, EvolutionError::StarShapeLoss { .. } | EvolutionError::Geometry(_) | EvolutionError::Transport(_)), "{err}");
}
