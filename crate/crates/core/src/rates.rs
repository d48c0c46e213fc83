//! Thermal transition rates between vertical levels.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Mean bosonic occupation `1 / (exp(omega/T) - 1)`.
pub fn bose_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("bose_occupation needs omega > 0, got {omega}")));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("bose_occupation needs T > 0, got {temperature}")));
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// Dense rate matrix; entry `(i, j)` is the rate for `E_i -> E_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(pub DMatrix<f64>);

impl RateMatrix {
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Smallest strictly positive rate, if any.
    pub fn min_positive(&self) -> Option<f64> {
        self.0.iter().copied().filter(|&g| g > 0.0).min_by(f64::total_cmp)
    }
}

/// Builds rates from squared couplings `c2[(j, k)] = c_jk c_kj`.
///
/// Downhill transitions carry the stimulated plus spontaneous factor `n + 1`,
/// uphill transitions carry `n`, so every pair obeys
/// `Gamma(E_hi -> E_lo) = exp(omega/T) Gamma(E_lo -> E_hi)`.
pub fn gamma_from_dipoles(c2: &DMatrix<f64>, energies: &[f64], temperature: f64) -> Result<RateMatrix> {
    let m = energies.len();
    if c2.nrows() != m || c2.ncols() != m {
        return Err(Error::Dimension(format!(
            "c2 is {}x{} but there are {m} levels",
            c2.nrows(),
            c2.ncols()
        )));
    }
    let mut gamma = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            if j == k {
                continue;
            }
            let c = c2[(j, k)];
            if c < 0.0 || (c - c2[(k, j)]).abs() > 1e-12 * c.abs().max(c2[(k, j)].abs()) {
                return Err(Error::InvalidArgument(format!(
                    "c2 must be symmetric and nonnegative (entry {j},{k} = {c})"
                )));
            }
            if c == 0.0 {
                continue;
            }
            let omega = energies[j] - energies[k];
            if omega == 0.0 {
                return Err(Error::DegenerateCoupling { i: j, j: k, energy: energies[j] });
            }
            let n = bose_occupation(omega.abs(), temperature)?;
            gamma[(j, k)] = 2.0 * PI * c * if omega > 0.0 { n + 1.0 } else { n };
        }
    }
    Ok(RateMatrix(gamma))
}
