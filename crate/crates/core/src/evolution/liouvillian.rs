//! Right-hand side of the generalized Bloch equation and its matrix form.
//!
//! ```text
//! d rho_i/dt = -i [lambda_i(t), rho_i]
//!              + sum_j zeta rho_j zeta Gamma(j -> i)
//!              - 1/2 {zeta^2, rho_i} sum_j Gamma(i -> j)
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{DensityState, ModelSpec, C64};

const I: C64 = C64::new(0.0, 1.0);

fn check_shapes(state: &DensityState, spec: &ModelSpec) -> Result<()> {
    if state.n_levels() != spec.n_levels() {
        return Err(Error::Dimension(format!(
            "state has {} levels, model has {}",
            state.n_levels(),
            spec.n_levels()
        )));
    }
    if state.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "state has flavor dimension {}, model has {}",
            state.dim(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Time derivative of every level block, evaluated directly from the equation.
pub fn rhs(state: &DensityState, spec: &ModelSpec, t: f64) -> Result<Vec<DMatrix<C64>>> {
    check_shapes(state, spec)?;
    let zeta = spec.coupling.zeta.matrix();
    let zeta2 = spec.coupling.squared();
    let sandwiched: Vec<DMatrix<C64>> = state.rhos.iter().map(|r| zeta * r.matrix() * zeta).collect();
    let out_rates = spec.out_rates();
    let half = C64::new(0.5, 0.0);

    let mut out = Vec::with_capacity(state.n_levels());
    for (i, rho) in state.rhos.iter().enumerate() {
        let rho = rho.matrix();
        let lambda = spec.lambda_eff(i, t);
        let mut d = (&lambda * rho - rho * &lambda) * (-I);
        for (j, s) in sandwiched.iter().enumerate() {
            let g = spec.gamma[(j, i)];
            if g != 0.0 {
                d += s * C64::new(g, 0.0);
            }
        }
        if out_rates[i] != 0.0 {
            d -= (&zeta2 * rho + rho * &zeta2) * (half * out_rates[i]);
        }
        out.push(d);
    }
    Ok(out)
}

/// Matrix of the (linear) equation acting on the stacked column vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub generator: DMatrix<C64>,
    pub time_dependent: bool,
}

/// Static generator plus the unit-bias commutator block, `L(t) = base + eps(t) bias`.
#[derive(Debug, Clone)]
pub(crate) struct GeneratorParts {
    pub base: DMatrix<C64>,
    pub bias: Option<DMatrix<C64>>,
}

impl GeneratorParts {
    pub fn new(spec: &ModelSpec) -> Self {
        let m = spec.n_levels();
        let d = spec.dim();
        let d2 = d * d;
        let ident = DMatrix::<C64>::identity(d, d);
        let zeta = spec.coupling.zeta.matrix();
        let zeta2 = spec.coupling.squared();
        let gain = zeta.transpose().kronecker(zeta);
        let anti = ident.kronecker(&zeta2) + zeta2.transpose().kronecker(&ident);
        let out_rates = spec.out_rates();

        let mut base = DMatrix::zeros(m * d2, m * d2);
        for i in 0..m {
            let lambda = spec.lambdas[i].matrix();
            let comm = (ident.kronecker(lambda) - lambda.transpose().kronecker(&ident)) * (-I);
            let diag = comm - &anti * C64::new(0.5 * out_rates[i], 0.0);
            base.view_mut((i * d2, i * d2), (d2, d2)).copy_from(&diag);
            for j in 0..m {
                let g = spec.gamma[(j, i)];
                if g != 0.0 {
                    let mut block = base.view_mut((i * d2, j * d2), (d2, d2));
                    block += &gain * C64::new(g, 0.0);
                }
            }
        }

        let bias = spec.bias.map(|_| {
            let mut sigma3 = DMatrix::<C64>::zeros(d, d);
            sigma3[(0, 0)] = C64::new(1.0, 0.0);
            sigma3[(1, 1)] = C64::new(-1.0, 0.0);
            let comm = (ident.kronecker(&sigma3) - sigma3.transpose().kronecker(&ident)) * (-I);
            let mut full = DMatrix::zeros(m * d2, m * d2);
            for i in 0..m {
                full.view_mut((i * d2, i * d2), (d2, d2)).copy_from(&comm);
            }
            full
        });
        GeneratorParts { base, bias }
    }

    pub fn at(&self, epsilon: f64) -> DMatrix<C64> {
        match &self.bias {
            Some(b) if epsilon != 0.0 => &self.base + b * C64::new(epsilon, 0.0),
            _ => self.base.clone(),
        }
    }

    /// `out = L(eps) x` without materializing `L(eps)`.
    pub fn apply(&self, epsilon: f64, x: &DVector<C64>, out: &mut DVector<C64>) {
        self.base.mul_to(x, out);
        if let (Some(b), true) = (&self.bias, epsilon != 0.0) {
            out.gemv(C64::new(epsilon, 0.0), b, x, C64::new(1.0, 0.0));
        }
    }
}

pub fn build_liouvillian(spec: &ModelSpec, t: f64) -> Result<Liouvillian> {
    crate::model::ensure_valid(spec)?;
    let parts = GeneratorParts::new(spec);
    Ok(Liouvillian { generator: parts.at(spec.epsilon(t)), time_dependent: spec.is_time_dependent() })
}

impl Liouvillian {
    /// Largest `|w^T L|` entry for the level-summed trace functional `w`.
    pub fn trace_leakage(&self, d: usize) -> f64 {
        let n = self.generator.nrows();
        let mut worst = 0.0_f64;
        for col in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for row in (0..n).filter(|r| (r % (d * d)) % (d + 1) == 0) {
                s += self.generator[(row, col)];
            }
            worst = worst.max(s.norm());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingOperator, FlavorMatrix};

    fn single_mode(g: f64) -> ModelSpec {
        ModelSpec {
            levels: vec![1.0],
            lambdas: vec![FlavorMatrix::sigma1().scaled(g)],
            coupling: CouplingOperator::two_flavor(0.0),
            gamma: DMatrix::zeros(1, 1),
            temperature: 1.0,
            bias: None,
        }
    }

    #[test]
    fn two_level_precession_at_t0() {
        let g = 0.7;
        let spec = single_mode(g);
        let state = DensityState { rhos: vec![FlavorMatrix::basis_projector(2, 0)], time: 0.0 };
        let d = rhs(&state, &spec, 0.0).unwrap();
        // dP_left/dt = 0 and the commutator drives the coherence: d rho_01/dt = i g
        assert!(d[0][(0, 0)].norm() < 1e-15);
        assert!((d[0][(0, 1)] - C64::new(0.0, g)).norm() < 1e-15);
        // Second derivative of P_left: apply the generator twice -> -2 g^2.
        let l = build_liouvillian(&spec, 0.0).unwrap();
        let x = state.to_vector();
        let second = &l.generator * (&l.generator * x);
        assert!((second[0].re + 2.0 * g * g).abs() < 1e-14);
    }

    #[test]
    fn single_mode_generator_spectrum() {
        let g = 0.35;
        let l = build_liouvillian(&single_mode(g), 0.0).unwrap();
        let mut ev: Vec<C64> = l.generator.clone().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_else(|| {
            nalgebra::linalg::Schur::new(l.generator.clone()).eigenvalues().unwrap().iter().copied().collect()
        });
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        let expected = [C64::new(0.0, -2.0 * g), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 2.0 * g)];
        for (a, b) in ev.iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn identity_zeta_collapses_to_scalar_redistribution() {
        let gamma = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2 * 1f64.exp(), 0.0]);
        let spec = ModelSpec {
            levels: vec![1.0, 2.0],
            lambdas: vec![FlavorMatrix::zeros(2), FlavorMatrix::zeros(2)],
            coupling: CouplingOperator::two_flavor(0.0),
            gamma: gamma.clone(),
            temperature: 1.0,
            bias: None,
        };
        let r0 = FlavorMatrix::from_real(2, &[0.3, 0.1, 0.1, 0.2]).unwrap();
        let r1 = FlavorMatrix::from_real(2, &[0.4, -0.05, -0.05, 0.1]).unwrap();
        let state = DensityState { rhos: vec![r0.clone(), r1.clone()], time: 0.0 };
        let d = rhs(&state, &spec, 0.0).unwrap();
        let expected0 = r1.matrix() * C64::new(gamma[(1, 0)], 0.0) - r0.matrix() * C64::new(gamma[(0, 1)], 0.0);
        assert!((&d[0] - expected0).camax() < 1e-15);
        let total = &d[0] + &d[1];
        assert!(total.camax() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let spec = single_mode(0.1);
        let state = DensityState { rhos: vec![FlavorMatrix::identity(2); 2], time: 0.0 };
        assert!(matches!(rhs(&state, &spec, 0.0), Err(Error::Dimension(_))));
    }
}
