//! Preset experiments on the double-well model, custom-model runs and the
//! parallel sweep driver.

mod config;
mod metrics;
mod neutrino;
mod output;
mod sweep;

pub use config::{CouplingLadder, Scenario, ScenarioConfig, DEFAULT_LADDER, STRONGEST_LADDER};
pub use metrics::{amplitude_decay_per_period, first_crossing, period_amplitudes, sup_deviation, transition_width};
pub use neutrino::{neutrino_model, NeutrinoParams};
pub use output::{
    csv_field, fmt17, write_dipoles_csv, write_rates_csv, write_spectrum_csv, write_trajectory_csv,
};
pub use sweep::{sweep, write_sweep_csv, SweepRow, SWEEP_HEADER};

use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::doublewell::{default_spectrum, model_from_spectrum, SpectrumResult};
use crate::error::{Error, Result};
use crate::evolution::{
    estimate_frequency, integrate_adaptive, propagate_expm, propagate_segmented, spectral_lines, stiffness_scale,
    thermal_average_frequency, uniform_grid, Trajectory,
};
use crate::model::{thermal_initial_state, BiasSchedule, CouplingOperator, DensityState, FlavorMatrix, ModelSpec};

/// Well-distinguishing strengths of the Zeno runs.
pub const ZENO_B: [f64; 4] = [0.0, 0.001, 0.005, 0.5];
/// Default run lengths in average periods.
pub const FIG_PERIODS: f64 = 10.0;
pub const ZENO_PERIODS: f64 = 5.0;
pub const BIAS_PERIODS: f64 = 100.0;
/// Thermalization runs last this many slowest-rate lifetimes.
pub const THERMALIZE_LIFETIMES: f64 = 50.0;
/// Ladder used to locate the entropy-rate peak for the bias sweep.
pub const PRESWEEP_LADDER: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
/// Exponential-midpoint segments for biased runs too stiff for Runge-Kutta.
pub const BIAS_SEGMENTS: usize = 2048;
const RK_STEP_BUDGET: f64 = 2e5;
const RK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagator {
    Expm,
    AdaptiveRk,
    SegmentedExpm,
}

/// Per-run summary; scenario-specific fields are `null` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub file: String,
    pub coupling_log10: Option<f64>,
    /// Raw `q/v`; `null` for custom models.
    pub coupling: Option<f64>,
    /// `null` when the model's zeta is an explicit matrix.
    pub b: Option<f64>,
    pub temperature: f64,
    pub t_end: f64,
    pub samples: usize,
    pub propagator: Propagator,
    pub estimated_frequency: Option<f64>,
    pub frequency_error: Option<String>,
    pub thermal_average_frequency: Option<f64>,
    pub spectral_lines: usize,
    pub amplitude_decay_per_period: Option<f64>,
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub min_eigenvalue: f64,
    pub entropy_rate: f64,
    pub min_p_left: f64,
    pub final_p_left: f64,
    pub final_p_right: f64,
    pub sup_deviation_from_b0: Option<f64>,
    pub damping_vs_b0: Option<f64>,
    pub transition_width: Option<f64>,
    pub max_boltzmann_deviation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub coupling_log10: f64,
    pub entropy_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub temperature: f64,
    /// `q/v` at ladder value 0.
    pub reference_coupling: Option<f64>,
    pub average_period: Option<f64>,
    pub epsilon0: Option<f64>,
    pub moderate_coupling_log10: Option<f64>,
    pub presweep: Option<Vec<LadderPoint>>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub summary: ScenarioSummary,
    /// Aligned with `summary.runs`.
    pub trajectories: Vec<Trajectory>,
}

/// Coupling at which the thermally averaged escape rate equals the thermally
/// averaged oscillation frequency, for a model built at unit coupling.
pub fn reference_coupling(unit: &ModelSpec) -> Result<f64> {
    let omega = thermal_average_frequency(unit)?;
    let escape: f64 = unit.boltzmann_weights().iter().zip(unit.out_rates()).map(|(p, g)| p * g).sum();
    if !(escape > 0.0 && omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "reference coupling needs positive escape rate and frequency, got {escape:.3e} and {omega:.3e}"
        )));
    }
    Ok((omega / escape).sqrt())
}

/// Reference coupling of the default double well at temperature `t`.
pub fn well_reference_coupling(temperature: f64) -> Result<f64> {
    reference_coupling(&model_from_spectrum(default_spectrum(), 1.0, temperature, 0.0)?)
}

pub fn ladder_coupling(reference: f64, log10: f64) -> f64 {
    reference * 10f64.powf(log10)
}

/// Exact exponential for static models; for biased ones Runge-Kutta when its
/// capped step count is affordable, the segmented exponential otherwise.
pub fn propagate(spec: &ModelSpec, initial: &DensityState, t_grid: &[f64]) -> Result<(Trajectory, Propagator)> {
    if !spec.is_time_dependent() {
        return Ok((propagate_expm(spec, initial, t_grid)?, Propagator::Expm));
    }
    let span = t_grid.last().copied().unwrap_or(initial.time) - initial.time;
    let steps = span * stiffness_scale(spec) / 0.1;
    if steps <= RK_STEP_BUDGET {
        Ok((integrate_adaptive(spec, initial, t_grid, RK_TOL)?, Propagator::AdaptiveRk))
    } else {
        Ok((propagate_segmented(spec, initial, t_grid, BIAS_SEGMENTS)?, Propagator::SegmentedExpm))
    }
}

fn left_state(spec: &ModelSpec) -> Result<DensityState> {
    thermal_initial_state(spec, &FlavorMatrix::basis_projector(spec.dim(), 0))
}

fn ladder_label(prefix: &str, l: f64) -> String {
    format!("{prefix}_l{l}")
}

struct RunRequest<'a> {
    label: String,
    spec: &'a ModelSpec,
    initial: DensityState,
    t_end: f64,
    samples: usize,
    period: Option<f64>,
    coupling_log10: Option<f64>,
    coupling: Option<f64>,
    b: Option<f64>,
}

fn run_one(req: RunRequest<'_>) -> Result<(RunSummary, Trajectory)> {
    let grid = uniform_grid(req.t_end, req.samples);
    let (traj, propagator) = propagate(req.spec, &req.initial, &grid)?;
    let diag = traj.check_gates()?;
    let p = traj.p_left();
    let (estimated_frequency, frequency_error) = match estimate_frequency(&traj) {
        Ok(w) => (Some(w), None),
        Err(e @ (Error::NoDominantLine { .. } | Error::InvalidArgument(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let lines = spectral_lines(&traj.times, &p).map_or(0, |l| l.len());
    let last = *p.last().unwrap_or(&f64::NAN);
    let summary = RunSummary {
        file: format!("{}.csv", req.label),
        label: req.label,
        coupling_log10: req.coupling_log10,
        coupling: req.coupling,
        b: req.b,
        temperature: req.spec.temperature,
        t_end: req.t_end,
        samples: req.samples,
        propagator,
        estimated_frequency,
        frequency_error,
        thermal_average_frequency: thermal_average_frequency(req.spec).ok(),
        spectral_lines: lines,
        amplitude_decay_per_period: req.period.and_then(|t| amplitude_decay_per_period(&traj.times, &p, t)),
        trace_drift: diag.trace_drift,
        hermiticity_drift: diag.hermiticity_drift,
        min_eigenvalue: diag.min_eigenvalue,
        entropy_rate: traj.entropy_rate(),
        min_p_left: p.iter().copied().fold(f64::INFINITY, f64::min),
        final_p_left: last,
        final_p_right: 1.0 - last,
        sup_deviation_from_b0: None,
        damping_vs_b0: None,
        transition_width: None,
        max_boltzmann_deviation: None,
    };
    Ok((summary, traj))
}

struct WellContext {
    spectrum: &'static SpectrumResult,
    reference: f64,
    period: f64,
}

impl WellContext {
    fn new(temperature: f64) -> Result<Self> {
        let spectrum = default_spectrum();
        let free = model_from_spectrum(spectrum, 0.0, temperature, 0.0)?;
        let omega = thermal_average_frequency(&free)?;
        Ok(WellContext { spectrum, reference: well_reference_coupling(temperature)?, period: 2.0 * PI / omega })
    }

    fn model(&self, log10: Option<f64>, temperature: f64, b: f64) -> Result<(ModelSpec, f64)> {
        let q = log10.map_or(0.0, |l| ladder_coupling(self.reference, l));
        Ok((model_from_spectrum(self.spectrum, q, temperature, b)?, q))
    }

    fn summary(&self, scenario: Scenario, temperature: f64, runs: Vec<RunSummary>) -> ScenarioSummary {
        ScenarioSummary {
            scenario,
            temperature,
            reference_coupling: Some(self.reference),
            average_period: Some(self.period),
            epsilon0: None,
            moderate_coupling_log10: None,
            presweep: None,
            runs,
        }
    }
}

fn unzip(results: Vec<Result<(RunSummary, Trajectory)>>) -> Result<(Vec<RunSummary>, Vec<Trajectory>)> {
    let mut runs = Vec::with_capacity(results.len());
    let mut trajs = Vec::with_capacity(results.len());
    for r in results {
        let (s, t) = r?;
        runs.push(s);
        trajs.push(t);
    }
    Ok((runs, trajs))
}

fn ladder_runs(cfg: &ScenarioConfig, ctx: &WellContext, ladder: &[f64], prefix: &str, t_end: f64) -> Result<(Vec<RunSummary>, Vec<Trajectory>)> {
    let results: Vec<_> = ladder
        .par_iter()
        .map(|&l| {
            let (spec, q) = ctx.model(Some(l), cfg.temperature, cfg.b)?;
            run_one(RunRequest {
                label: ladder_label(prefix, l),
                initial: left_state(&spec)?,
                spec: &spec,
                t_end,
                samples: cfg.samples,
                period: Some(ctx.period),
                coupling_log10: Some(l),
                coupling: Some(q),
                b: Some(cfg.b),
            })
        })
        .collect();
    unzip(results)
}

fn run_fig(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let ctx = WellContext::new(cfg.temperature)?;
    let t_end = cfg.t_end.unwrap_or(FIG_PERIODS * ctx.period);
    let (runs, trajectories) = ladder_runs(cfg, &ctx, &cfg.ladder(), cfg.scenario.name(), t_end)?;
    Ok(ScenarioOutput { summary: ctx.summary(cfg.scenario, cfg.temperature, runs), trajectories })
}

fn run_zeno(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let ctx = WellContext::new(cfg.temperature)?;
    let l = cfg.ladder()[0];
    let t_end = cfg.t_end.unwrap_or(ZENO_PERIODS * ctx.period);
    let results: Vec<_> = ZENO_B
        .par_iter()
        .map(|&b| {
            let (spec, q) = ctx.model(Some(l), cfg.temperature, b)?;
            run_one(RunRequest {
                label: format!("zeno_b{b}"),
                initial: left_state(&spec)?,
                spec: &spec,
                t_end,
                samples: cfg.samples,
                period: Some(ctx.period),
                coupling_log10: Some(l),
                coupling: Some(q),
                b: Some(b),
            })
        })
        .collect();
    let (mut runs, trajectories) = unzip(results)?;
    let reference = trajectories[0].p_left();
    let ref_amp = period_amplitudes(&trajectories[0].times, &reference, ctx.period).last().copied();
    for (run, traj) in runs.iter_mut().zip(&trajectories) {
        let p = traj.p_left();
        run.sup_deviation_from_b0 = Some(sup_deviation(&p, &reference));
        let amp = period_amplitudes(&traj.times, &p, ctx.period).last().copied();
        run.damping_vs_b0 = match (amp, ref_amp) {
            (Some(a), Some(a0)) if a0 > 0.0 => Some(1.0 - a / a0),
            _ => None,
        };
    }
    Ok(ScenarioOutput { summary: ctx.summary(Scenario::Zeno, cfg.temperature, runs), trajectories })
}

/// `10 g(E_5)`, clipped below a tenth of the smallest gap between doublets.
pub fn default_bias_amplitude(spectrum: &SpectrumResult) -> f64 {
    let g5 = spectrum.pairs.get(4).or(spectrum.pairs.last()).map_or(0.0, |p| p.g);
    let e = spectrum.energies();
    let min_gap = e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    (10.0 * g5).min(0.1 * min_gap)
}

fn run_bias_sweep(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let ctx = WellContext::new(cfg.temperature)?;
    let eps0 = default_bias_amplitude(ctx.spectrum);
    let strong = cfg.ladder()[0];
    let (pre, _) = ladder_runs(cfg, &ctx, &PRESWEEP_LADDER, "presweep", FIG_PERIODS * ctx.period)?;
    let presweep: Vec<LadderPoint> = pre
        .iter()
        .map(|r| LadderPoint { coupling_log10: r.coupling_log10.unwrap_or(f64::NAN), entropy_rate: r.entropy_rate })
        .collect();
    let moderate = presweep
        .iter()
        .fold(None::<LadderPoint>, |best, p| match best {
            Some(b) if b.entropy_rate >= p.entropy_rate => Some(b),
            _ => Some(*p),
        })
        .map(|p| p.coupling_log10)
        .unwrap_or(0.0);

    let t_end = cfg.t_end.unwrap_or(BIAS_PERIODS * ctx.period);
    let rungs: [(&str, Option<f64>); 3] = [("coupling0", None), ("moderate", Some(moderate)), ("strong", Some(strong))];
    let results: Vec<_> = rungs
        .par_iter()
        .map(|&(name, l)| {
            let (mut spec, q) = ctx.model(l, cfg.temperature, cfg.b)?;
            spec.bias = Some(BiasSchedule::linear_ramp(eps0, -eps0, 0.0, t_end));
            let (mut s, t) = run_one(RunRequest {
                label: format!("bias_sweep_{name}"),
                initial: left_state(&spec)?,
                spec: &spec,
                t_end,
                samples: cfg.samples,
                period: None,
                coupling_log10: l,
                coupling: Some(q),
                b: Some(cfg.b),
            })?;
            let right: Vec<f64> = t.p_left().iter().map(|p| 1.0 - p).collect();
            s.transition_width = transition_width(&t.times, &right);
            Ok((s, t))
        })
        .collect();
    let (runs, trajectories) = unzip(results)?;
    let mut summary = ctx.summary(Scenario::BiasSweep, cfg.temperature, runs);
    summary.epsilon0 = Some(eps0);
    summary.moderate_coupling_log10 = Some(moderate);
    summary.presweep = Some(presweep);
    Ok(ScenarioOutput { summary, trajectories })
}

fn run_thermalize(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let ctx = WellContext::new(cfg.temperature)?;
    let l = cfg.ladder()[0];
    let (mut spec, q) = ctx.model(Some(l), cfg.temperature, 0.0)?;
    spec.lambdas = vec![FlavorMatrix::zeros(2); spec.n_levels()];
    spec.coupling = CouplingOperator::identity(2);
    let slowest = spec.gamma.iter().copied().filter(|&g| g > 0.0).fold(f64::INFINITY, f64::min);
    if !slowest.is_finite() {
        return Err(Error::Config("thermalize needs a nonzero coupling".into()));
    }
    let t_end = cfg.t_end.unwrap_or(THERMALIZE_LIFETIMES / slowest);
    let m = spec.n_levels();
    let mut initial = DensityState { rhos: vec![FlavorMatrix::zeros(2); m], time: 0.0 };
    initial.rhos[m - 1] = FlavorMatrix::basis_projector(2, 0);
    let (mut run, traj) = run_one(RunRequest {
        label: ladder_label("thermalize", l),
        spec: &spec,
        initial,
        t_end,
        samples: cfg.samples,
        period: None,
        coupling_log10: Some(l),
        coupling: Some(q),
        b: None,
    })?;
    let target = spec.boltzmann_weights();
    let last = &traj.observables[traj.len() - 1].populations;
    run.max_boltzmann_deviation = Some(sup_deviation(last, &target));
    let mut summary = ctx.summary(Scenario::Thermalize, cfg.temperature, vec![run]);
    summary.average_period = None;
    Ok(ScenarioOutput { summary, trajectories: vec![traj] })
}

fn run_custom(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let path = cfg.model_path.as_ref().ok_or_else(|| Error::Config("scenario custom requires model_path".into()))?;
    let spec = ModelSpec::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("cannot read model {}: {io}", path.display())),
        Error::Json(j) => Error::Config(format!("model {} is not a valid ModelSpec document: {j}", path.display())),
        other => other,
    })?;
    crate::model::ensure_valid(&spec)?;
    let period = thermal_average_frequency(&spec).ok().map(|w| 2.0 * PI / w);
    let t_end = match (cfg.t_end, period) {
        (Some(t), _) => t,
        (None, Some(p)) => FIG_PERIODS * p,
        (None, None) => {
            return Err(Error::Config(
                "custom model has no g sigma1 splittings to define an average period; set t_end".into(),
            ))
        }
    };
    let b = spec.coupling.b;
    let (run, traj) = run_one(RunRequest {
        label: "custom".into(),
        initial: left_state(&spec)?,
        spec: &spec,
        t_end,
        samples: cfg.samples,
        period,
        coupling_log10: None,
        coupling: None,
        b,
    })?;
    Ok(ScenarioOutput {
        summary: ScenarioSummary {
            scenario: Scenario::Custom,
            temperature: spec.temperature,
            reference_coupling: None,
            average_period: period,
            epsilon0: None,
            moderate_coupling_log10: None,
            presweep: None,
            runs: vec![run],
        },
        trajectories: vec![traj],
    })
}

/// Runs a scenario in memory.
pub fn execute(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Fig1 | Scenario::Fig2 => run_fig(cfg),
        Scenario::Zeno => run_zeno(cfg),
        Scenario::BiasSweep => run_bias_sweep(cfg),
        Scenario::Thermalize => run_thermalize(cfg),
        Scenario::Custom => run_custom(cfg),
    }
}

/// Runs a scenario and writes one CSV per run plus `summary.json` under `output_path`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioSummary> {
    let out = execute(cfg)?;
    write_outputs(&out, &cfg.output_path, cfg.full)?;
    Ok(out.summary)
}

pub fn write_outputs(out: &ScenarioOutput, dir: &Path, full: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (run, traj) in out.summary.runs.iter().zip(&out.trajectories) {
        let mut w = BufWriter::new(fs::File::create(dir.join(&run.file))?);
        write_trajectory_csv(&mut w, traj, full)?;
        std::io::Write::flush(&mut w)?;
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    Ok(())
}
