//! Independent scenario runs executed on a worker pool, assembled in input order.

use std::io::Write;

use rayon::prelude::*;

use super::output::{csv_field, fmt17, fmt_opt};
use super::{execute, RunSummary, Scenario, ScenarioConfig};
use crate::error::{Error, Result};

/// One run of one grid entry, or the error that stopped the entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: usize,
    pub scenario: Scenario,
    pub outcome: std::result::Result<RunSummary, String>,
}

pub const SWEEP_HEADER: [&str; 21] = [
    "config",
    "scenario",
    "label",
    "coupling_log10",
    "coupling",
    "b",
    "T",
    "t_end",
    "estimated_frequency",
    "thermal_average_frequency",
    "spectral_lines",
    "amplitude_decay_per_period",
    "entropy_rate",
    "trace_drift",
    "hermiticity_drift",
    "min_eigenvalue",
    "min_p_left",
    "final_p_left",
    "final_p_right",
    "transition_width",
    "error",
];

/// Runs every config on `workers` threads. A failing config yields an error row
/// and leaves the others untouched.
pub fn sweep(grid: &[ScenarioConfig], workers: usize) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_config: Vec<Vec<SweepRow>> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(k, cfg)| match execute(cfg) {
                Ok(out) => out
                    .summary
                    .runs
                    .into_iter()
                    .map(|r| SweepRow { config: k, scenario: cfg.scenario, outcome: Ok(r) })
                    .collect(),
                Err(e) => vec![SweepRow { config: k, scenario: cfg.scenario, outcome: Err(e.to_string()) }],
            })
            .collect()
    });
    Ok(per_config.into_iter().flatten().collect())
}

pub fn write_sweep_csv(w: &mut impl Write, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "{}", SWEEP_HEADER.join(","))?;
    for row in rows {
        let mut fields = vec![row.config.to_string(), row.scenario.to_string()];
        match &row.outcome {
            Ok(r) => {
                fields.push(csv_field(&r.label));
                fields.push(fmt_opt(r.coupling_log10));
                fields.push(fmt_opt(r.coupling));
                fields.push(fmt_opt(r.b));
                fields.push(fmt17(r.temperature));
                fields.push(fmt17(r.t_end));
                fields.push(fmt_opt(r.estimated_frequency));
                fields.push(fmt_opt(r.thermal_average_frequency));
                fields.push(r.spectral_lines.to_string());
                fields.push(fmt_opt(r.amplitude_decay_per_period));
                fields.push(fmt17(r.entropy_rate));
                fields.push(fmt17(r.trace_drift));
                fields.push(fmt17(r.hermiticity_drift));
                fields.push(fmt17(r.min_eigenvalue));
                fields.push(fmt17(r.min_p_left));
                fields.push(fmt17(r.final_p_left));
                fields.push(fmt17(r.final_p_right));
                fields.push(fmt_opt(r.transition_width));
                fields.push(String::new());
            }
            Err(msg) => {
                fields.extend(std::iter::repeat_n(String::new(), SWEEP_HEADER.len() - 3));
                fields.push(csv_field(msg));
            }
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
