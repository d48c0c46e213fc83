//! Time evolution of the generalized Bloch equation and derived observables.

mod expm;
mod frequency;
mod liouvillian;
mod observables;
mod propagate;

pub use expm::expm;
pub use frequency::{estimate_frequency, spectral_lines, thermal_average_frequency, SpectralLine};
pub use liouvillian::{build_liouvillian, rhs, Liouvillian};
pub use observables::{observables, Observables};
pub use propagate::{integrate_adaptive, propagate_expm, propagate_segmented, uniform_grid};
pub(crate) use propagate::stiffness_scale;

use crate::error::{Error, Result};
use crate::model::DensityState;

/// Gate thresholds applied to every emitted trajectory.
pub const TRACE_GATE: f64 = 1e-9;
pub const HERMITICITY_GATE: f64 = 1e-9;
pub const POSITIVITY_GATE: f64 = -1e-8;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityState>,
    pub observables: Vec<Observables>,
    /// Largest `|A - A^H|` of any raw block before re-Hermitization.
    pub hermiticity_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub min_eigenvalue: f64,
}

impl Trajectory {
    pub fn from_states(states: Vec<DensityState>) -> Self {
        Trajectory {
            times: states.iter().map(|s| s.time).collect(),
            observables: states.iter().map(observables).collect(),
            states,
            hermiticity_drift: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn p_left(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.p_left).collect()
    }

    pub fn entropy(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.entropy).collect()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let trace_drift = self
            .observables
            .iter()
            .map(|o| (o.populations.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let min_eigenvalue = self.observables.iter().map(|o| o.min_eigenvalue).fold(f64::INFINITY, f64::min);
        // f64::max drops NaN, so non-finite states are flagged explicitly.
        let finite = self.states.iter().all(|s| s.rhos.iter().all(|r| r.matrix().iter().all(|z| z.re.is_finite() && z.im.is_finite())));
        if !finite {
            return Diagnostics { trace_drift: f64::NAN, hermiticity_drift: f64::NAN, min_eigenvalue: f64::NAN };
        }
        Diagnostics { trace_drift, hermiticity_drift: self.hermiticity_drift, min_eigenvalue }
    }

    /// Refuses trajectories that break trace, Hermiticity or positivity bounds.
    pub fn check_gates(&self) -> Result<Diagnostics> {
        let d = self.diagnostics();
        if !(d.trace_drift < TRACE_GATE) {
            return Err(Error::Gate { gate: "trace", detail: format!("max |sum Tr rho - 1| = {:.3e}", d.trace_drift) });
        }
        if !(d.hermiticity_drift < HERMITICITY_GATE) {
            return Err(Error::Gate {
                gate: "hermiticity",
                detail: format!("max |rho - rho^H| = {:.3e}", d.hermiticity_drift),
            });
        }
        if !(d.min_eigenvalue > POSITIVITY_GATE) {
            return Err(Error::Gate { gate: "positivity", detail: format!("min eigenvalue {:.3e}", d.min_eigenvalue) });
        }
        Ok(d)
    }

    /// Least-squares slope of the entropy over the final third of the run.
    pub fn entropy_rate(&self) -> f64 {
        let n = self.len();
        let start = n - n / 3;
        least_squares_slope(&self.times[start.min(n)..], &self.entropy()[start.min(n)..])
    }
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
