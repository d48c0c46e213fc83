//! Synthetic neutrino-style model: a continuum of energy bins, each mixing two
//! flavors with a vacuum-like splitting `g(E) = delta / E`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingOperator, FlavorMatrix, ModelSpec};
use crate::rates::gamma_from_dipoles;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutrinoParams {
    pub levels: usize,
    pub e_min: f64,
    pub e_max: f64,
    /// `g(E) = delta / E`.
    pub delta: f64,
    pub temperature: f64,
}

impl Default for NeutrinoParams {
    fn default() -> Self {
        NeutrinoParams { levels: 30, e_min: 5.0, e_max: 25.0, delta: 0.01, temperature: 5.0 }
    }
}

impl NeutrinoParams {
    pub fn with_levels(self, levels: usize) -> Self {
        NeutrinoParams { levels, ..self }
    }

    /// Bin midpoints.
    pub fn energies(&self) -> Vec<f64> {
        let h = self.bin_width();
        (0..self.levels).map(|k| self.e_min + (k as f64 + 0.5) * h).collect()
    }

    pub fn bin_width(&self) -> f64 {
        (self.e_max - self.e_min) / self.levels as f64
    }
}

/// Bins exchange energy `omega` with squared coupling `kappa^2 h omega^2`, so the
/// total escape rate from a bin converges as the mesh is refined.
pub fn neutrino_model(params: &NeutrinoParams, coupling: f64, b: f64) -> Result<ModelSpec> {
    if params.levels < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {}", params.levels)));
    }
    if !(params.e_min > 0.0 && params.e_max > params.e_min) {
        return Err(Error::InvalidArgument(format!(
            "energy range must satisfy 0 < e_min < e_max, got [{}, {}]",
            params.e_min, params.e_max
        )));
    }
    if !(coupling >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling must be nonnegative, got {coupling}")));
    }
    let levels = params.energies();
    let h = params.bin_width();
    let m = levels.len();
    let c2 = DMatrix::from_fn(m, m, |j, k| {
        let w = levels[j] - levels[k];
        coupling * coupling * h * w * w
    });
    let gamma = gamma_from_dipoles(&c2, &levels, params.temperature)?.into_inner();
    let sigma1 = FlavorMatrix::sigma1();
    Ok(ModelSpec {
        lambdas: levels.iter().map(|&e| sigma1.scaled(params.delta / e)).collect(),
        levels,
        coupling: CouplingOperator::two_flavor(b),
        gamma,
        temperature: params.temperature,
        bias: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn bins_cover_the_range() {
        let p = NeutrinoParams::default();
        let e = p.energies();
        assert_eq!(e.len(), 30);
        assert!((e[0] - (5.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert!((e[29] - (25.0 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn generated_model_is_valid_and_balanced() {
        let p = NeutrinoParams::default();
        let spec = neutrino_model(&p, 0.3, 0.0).unwrap();
        assert!(validate_model(&spec).is_empty());
        let (j, k) = (3, 17);
        let ratio = spec.gamma[(k, j)] / spec.gamma[(j, k)];
        let expected = ((spec.levels[k] - spec.levels[j]) / p.temperature).exp();
        assert!((ratio / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn escape_rate_is_mesh_insensitive() {
        let p = NeutrinoParams::default();
        let coarse = neutrino_model(&p.with_levels(20), 1.0, 0.0).unwrap();
        let fine = neutrino_model(&p.with_levels(40), 1.0, 0.0).unwrap();
        let avg = |s: &ModelSpec| s.boltzmann_weights().iter().zip(s.out_rates()).map(|(w, g)| w * g).sum::<f64>();
        assert!((avg(&coarse) / avg(&fine) - 1.0).abs() < 0.05);
    }
}
