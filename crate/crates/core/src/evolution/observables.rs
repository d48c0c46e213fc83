use crate::model::{DensityState, POSITIVITY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    /// Probability of flavor state 0 (the left well), summed over levels.
    pub p_left: f64,
    /// Von Neumann entropy `-sum_j Tr[rho_j ln rho_j]`.
    pub entropy: f64,
    pub populations: Vec<f64>,
    /// Smallest block eigenvalue; below `-POSITIVITY_TOL` the state is flagged.
    pub min_eigenvalue: f64,
}

impl Observables {
    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue >= -POSITIVITY_TOL
    }
}

pub fn observables(state: &DensityState) -> Observables {
    let mut entropy = 0.0;
    let mut min_eigenvalue = f64::INFINITY;
    for r in &state.rhos {
        for ev in r.eigenvalues() {
            min_eigenvalue = min_eigenvalue.min(ev);
            let p = ev.clamp(0.0, 1.0);
            if p > 0.0 {
                entropy -= p * p.ln();
            }
        }
    }
    Observables {
        p_left: state.rhos.iter().map(|r| r.matrix()[(0, 0)].re).sum(),
        entropy,
        populations: state.rhos.iter().map(|r| r.trace()).collect(),
        min_eigenvalue,
    }
}
