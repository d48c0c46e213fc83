use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("flavor projector rejected: |P^2 - P| = {idempotency:.3e}, |Tr P - 1| = {trace:.3e}")]
    NotAProjector { idempotency: f64, trace: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("spectrum: {0}")]
    Spectrum(String),

    #[error("degenerate levels {i} and {j} (E = {energy}) carry a nonzero coupling")]
    DegenerateCoupling { i: usize, j: usize, energy: f64 },

    #[error("propagate_expm requires a time-independent generator; use integrate_adaptive for biased models")]
    TimeDependent,

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem is too stiff for the explicit integrator, reduce the coupling or propagate piecewise with expm")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {steps} steps before t = {t:.6e}; the generator is too stiff for explicit stepping")]
    TooManySteps { t: f64, steps: usize },

    #[error("no dominant spectral line (peak {peak:.3e} < 5 x median {median:.3e})")]
    NoDominantLine { peak: f64, median: f64 },

    #[error("trajectory failed the {gate} gate: {detail}")]
    Gate { gate: &'static str, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. } | Error::TooManySteps { .. } | Error::NoDominantLine { .. } | Error::Gate { .. }
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
