mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use bathsync::scenarios::{
    execute, ladder_coupling, neutrino_model, reference_coupling, run_scenario, sweep, write_sweep_csv,
    CouplingLadder, NeutrinoParams, Scenario, ScenarioConfig, SWEEP_HEADER,
};
use bathsync::{validate_model, Error, ModelSpec};

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn fig1(ladder: &[f64], samples: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Scenario::Fig1);
    cfg.coupling_log10 = Some(CouplingLadder::List(ladder.to_vec()));
    cfg.samples = samples;
    cfg
}

#[test]
fn run_scenario_writes_trajectories_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fig1(&[-1.0, 1.0], 64);
    cfg.output_path = dir.path().to_path_buf();
    cfg.full = true;
    let summary = run_scenario(&cfg).unwrap();
    assert_eq!(summary.runs.len(), 2);
    for run in &summary.runs {
        let text = fs::read_to_string(dir.path().join(&run.file)).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&header[..3], &["t", "p_left", "entropy"]);
        // 10 populations plus 10 blocks of 4 complex entries.
        assert_eq!(header.len(), 3 + 10 + 80);
        assert_eq!(lines.count(), 64);
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["scenario"], "fig1");
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn csv_values_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fig1(&[0.0], 16);
    cfg.output_path = dir.path().to_path_buf();
    let summary = run_scenario(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join(&summary.runs[0].file)).unwrap();
    let row = text.lines().nth(2).unwrap();
    let p: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    let field = row.split(',').nth(1).unwrap();
    let mantissa = field.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17, "{field}");
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let grid = vec![fig1(&[-2.0], 32), fig1(&[0.0], 32), fig1(&[2.0], 32)];
    let mut serial = Vec::new();
    write_sweep_csv(&mut serial, &sweep(&grid, 1).unwrap()).unwrap();
    let mut parallel = Vec::new();
    write_sweep_csv(&mut parallel, &sweep(&grid, 3).unwrap()).unwrap();
    assert_eq!(serial, parallel);
    let text = String::from_utf8(serial).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER.join(","));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn single_config_sweep_matches_run() {
    let cfg = fig1(&[1.0], 32);
    let rows = sweep(std::slice::from_ref(&cfg), 1).unwrap();
    let direct = execute(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].outcome.as_ref().unwrap(), &direct.summary.runs[0]);
}

#[test]
fn failing_config_yields_error_row() {
    let mut bad = ScenarioConfig::new(Scenario::Custom);
    bad.model_path = Some(PathBuf::from("/nonexistent/model.json"));
    let rows = sweep(&[fig1(&[0.0], 16), bad], 2).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].outcome.is_ok());
    assert!(rows[1].outcome.as_ref().unwrap_err().contains("cannot read model"));
    let mut out = Vec::new();
    write_sweep_csv(&mut out, &rows).unwrap();
    let text = String::from_utf8(out).unwrap();
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("1,custom,"), "{last}");
}

#[test]
fn config_errors_are_reported_as_config() {
    let mut cfg = ScenarioConfig::new(Scenario::Zeno);
    cfg.coupling_log10 = Some(CouplingLadder::List(vec![1.0, 2.0]));
    assert!(matches!(execute(&cfg), Err(Error::Config(_))));
    let mut cfg = ScenarioConfig::new(Scenario::Fig1);
    cfg.temperature = -1.0;
    assert!(matches!(execute(&cfg), Err(Error::Config(_))));
    assert!(matches!(ScenarioConfig::from_json_str(r#"{"scenario":"fig1","bogus":1}"#), Err(Error::Config(_))));
    assert!(matches!(execute(&ScenarioConfig::new(Scenario::Custom)), Err(Error::Config(_))));
}

#[test]
fn shipped_neutrino_models_match_generator() {
    let params = NeutrinoParams::default();
    let k0 = reference_coupling(&neutrino_model(&params, 1.0, 0.0).unwrap()).unwrap();
    for (name, l) in [("neutrino30_strong.json", 3.0), ("neutrino30_weak.json", -3.0)] {
        let shipped = ModelSpec::load(models_dir().join(name)).unwrap();
        assert!(validate_model(&shipped).is_empty());
        let fresh = neutrino_model(&params, ladder_coupling(k0, l), 0.0).unwrap();
        assert_eq!(shipped.levels, fresh.levels);
        let gap = (&shipped.gamma - &fresh.gamma).abs().max();
        assert!(gap <= 1e-12 * fresh.gamma.max(), "{name}: rate gap {gap:e}");
    }
}

#[test]
fn model_json_round_trip() {
    let mut r = common::rng(21);
    for _ in 0..20 {
        let spec = common::random_spec(&mut r, 6);
        let back = ModelSpec::from_json_str(&spec.to_json_string().unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}

#[test]
fn thermalize_reaches_boltzmann_weights() {
    let mut cfg = ScenarioConfig::new(Scenario::Thermalize);
    cfg.samples = 64;
    let out = execute(&cfg).unwrap();
    let e: Vec<f64> = bathsync::doublewell::default_spectrum().pairs.iter().map(|p| p.e_mean).collect();
    let target = common::boltzmann(&e, 5.0);
    let pops = &out.trajectories[0].observables.last().unwrap().populations;
    for (a, b) in pops.iter().zip(&target) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn free_run_matches_closed_form() {
    let mut cfg = ScenarioConfig::new(Scenario::Fig1);
    cfg.coupling_log10 = Some(CouplingLadder::Single(-30.0));
    cfg.samples = 256;
    let out = execute(&cfg).unwrap();
    let s = bathsync::doublewell::default_spectrum();
    let e: Vec<f64> = s.pairs.iter().map(|p| p.e_mean).collect();
    let g: Vec<f64> = s.pairs.iter().map(|p| p.g).collect();
    let w = common::boltzmann(&e, 5.0);
    let traj = &out.trajectories[0];
    for (t, p) in traj.times.iter().zip(traj.p_left()) {
        assert!((p - common::free_p_left(&w, &g, *t)).abs() < 1e-6);
    }
    let period = out.summary.average_period.unwrap();
    let omega: f64 = w.iter().zip(&g).map(|(p, g)| 2.0 * p * g).sum();
    assert!((period - 2.0 * PI / omega).abs() < 1e-9 * period);
}
