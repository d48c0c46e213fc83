//! Domain types for the system + bath model.
//!
//! The system lives on a product of a *vertical* space (discrete energy levels
//! `E_i`) and a *horizontal* flavor space of dimension `d`. The density matrix
//! is kept block-diagonal in the vertical index, so a state is a list of `d x d`
//! Hermitian blocks `rho(E_i)` whose traces sum to one.

use std::fmt;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Entry-wise tolerance for the Hermiticity of model operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance for detailed balance between rate pairs.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;
/// Tolerance on the total trace of a density state.
pub const TRACE_TOL: f64 = 1e-10;
/// Most-negative eigenvalue still accepted as numerical noise.
pub const POSITIVITY_TOL: f64 = 1e-9;

/// Largest entry of `|A - A^H|`.
pub fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermitian operator on the horizontal (flavor) space.
#[derive(Debug, Clone, PartialEq)]
pub struct FlavorMatrix(DMatrix<C64>);

impl FlavorMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "flavor matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() < 2 {
            return Err(Error::Dimension("flavor dimension must be at least 2".into()));
        }
        let deviation = hermiticity_deviation(&m);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(FlavorMatrix(m))
    }

    /// Projects an arbitrary square matrix onto its Hermitian part `(A + A^H)/2`.
    pub fn hermitized(m: &DMatrix<C64>) -> Self {
        FlavorMatrix((m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn from_real(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::Dimension(format!("expected {} entries, got {}", d * d, entries.len())));
        }
        Self::new(DMatrix::from_row_iterator(d, d, entries.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn zeros(d: usize) -> Self {
        FlavorMatrix(DMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        FlavorMatrix(DMatrix::identity(d, d))
    }

    pub fn sigma1() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("sigma1 is Hermitian")
    }

    pub fn sigma3() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("sigma3 is Hermitian")
    }

    /// Rank-one projector `|k><k|` onto flavor basis state `k`.
    pub fn basis_projector(d: usize, k: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        m[(k, k)] = C64::new(1.0, 0.0);
        FlavorMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scaled(&self, s: f64) -> Self {
        FlavorMatrix(&self.0 * C64::new(s, 0.0))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Horizontal-space factor `zeta` of the system-bath coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingOperator {
    pub zeta: FlavorMatrix,
    /// Set when `zeta` was built as `I + b sigma3`.
    pub b: Option<f64>,
}

impl CouplingOperator {
    pub fn two_flavor(b: f64) -> Self {
        let zeta = FlavorMatrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0 + b, 0.0),
            C64::new(1.0 - b, 0.0),
        ])));
        CouplingOperator { zeta, b: Some(b) }
    }

    pub fn from_matrix(zeta: FlavorMatrix) -> Self {
        CouplingOperator { zeta, b: None }
    }

    pub fn identity(d: usize) -> Self {
        if d == 2 {
            Self::two_flavor(0.0)
        } else {
            Self::from_matrix(FlavorMatrix::identity(d))
        }
    }

    pub fn dim(&self) -> usize {
        self.zeta.dim()
    }

    pub fn squared(&self) -> DMatrix<C64> {
        self.zeta.matrix() * self.zeta.matrix()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasShape {
    /// `epsilon(t) = epsilon_start` at all times.
    Constant,
    LinearRamp,
}

/// Well asymmetry `epsilon(t)` entering as `epsilon(t) sigma3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSchedule {
    #[serde(rename = "eps_start")]
    pub epsilon_start: f64,
    #[serde(rename = "eps_end")]
    pub epsilon_end: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub shape: BiasShape,
}

impl BiasSchedule {
    pub fn constant(epsilon: f64) -> Self {
        BiasSchedule {
            epsilon_start: epsilon,
            epsilon_end: epsilon,
            t_start: 0.0,
            t_end: 0.0,
            shape: BiasShape::Constant,
        }
    }

    pub fn linear_ramp(epsilon_start: f64, epsilon_end: f64, t_start: f64, t_end: f64) -> Self {
        BiasSchedule { epsilon_start, epsilon_end, t_start, t_end, shape: BiasShape::LinearRamp }
    }

    pub fn epsilon(&self, t: f64) -> f64 {
        match self.shape {
            BiasShape::Constant => self.epsilon_start,
            BiasShape::LinearRamp => {
                if t <= self.t_start {
                    self.epsilon_start
                } else if t >= self.t_end {
                    self.epsilon_end
                } else {
                    let s = (t - self.t_start) / (self.t_end - self.t_start);
                    self.epsilon_start + s * (self.epsilon_end - self.epsilon_start)
                }
            }
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.shape == BiasShape::LinearRamp && self.epsilon_start != self.epsilon_end
    }

    pub fn max_abs(&self) -> f64 {
        self.epsilon_start.abs().max(self.epsilon_end.abs())
    }
}

/// Complete simulation definition.
///
/// `gamma[(i, j)]` is the rate for the vertical transition `E_i -> E_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub levels: Vec<f64>,
    pub lambdas: Vec<FlavorMatrix>,
    pub coupling: CouplingOperator,
    pub gamma: DMatrix<f64>,
    pub temperature: f64,
    pub bias: Option<BiasSchedule>,
}

impl ModelSpec {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.coupling.dim()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.bias.is_some_and(|b| b.is_time_dependent())
    }

    pub fn epsilon(&self, t: f64) -> f64 {
        self.bias.map_or(0.0, |b| b.epsilon(t))
    }

    /// `lambda(E_i) + epsilon(t) sigma3`.
    pub fn lambda_eff(&self, i: usize, t: f64) -> DMatrix<C64> {
        let mut m = self.lambdas[i].matrix().clone();
        let eps = self.epsilon(t);
        if eps != 0.0 {
            m[(0, 0)] += C64::new(eps, 0.0);
            m[(1, 1)] -= C64::new(eps, 0.0);
        }
        m
    }

    /// Total escape rate `sum_j Gamma(E_i, E_j)` from each level.
    pub fn out_rates(&self) -> Vec<f64> {
        (0..self.n_levels()).map(|i| self.gamma.row(i).sum()).collect()
    }

    pub fn boltzmann_weights(&self) -> Vec<f64> {
        boltzmann_weights(&self.levels, self.temperature)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Normalized `exp(-E_i/T)` weights, shifted by the lowest level for stability.
pub fn boltzmann_weights(levels: &[f64], temperature: f64) -> Vec<f64> {
    let e0 = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = levels.iter().map(|&e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// A single broken model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoLevels,
    NonFiniteLevel { index: usize, value: f64 },
    NonIncreasingLevels { index: usize, previous: f64, current: f64 },
    DegenerateLevels { i: usize, j: usize, energy: f64 },
    LambdaCount { expected: usize, found: usize },
    LambdaDimension { index: usize, expected: usize, found: usize },
    GammaShape { rows: usize, cols: usize, expected: usize },
    GammaNotFinite { from: usize, to: usize },
    GammaDiagonal { index: usize, value: f64 },
    GammaNegative { from: usize, to: usize, value: f64 },
    DetailedBalance { lower: usize, upper: usize, expected_ratio: f64, actual_ratio: f64, relative_error: f64 },
    Temperature { value: f64 },
    BiasDimension { dim: usize },
    BiasWindow { t_start: f64, t_end: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoLevels => write!(f, "model has no energy levels"),
            NonFiniteLevel { index, value } => write!(f, "level {index} has non-finite energy {value}"),
            NonIncreasingLevels { index, previous, current } => {
                write!(f, "levels not increasing at {index}: {previous} then {current}")
            }
            DegenerateLevels { i, j, energy } => write!(f, "levels {i} and {j} are degenerate at E = {energy}"),
            LambdaCount { expected, found } => write!(f, "expected {expected} lambdas, found {found}"),
            LambdaDimension { index, expected, found } => {
                write!(f, "lambda {index} has dimension {found}, coupling has {expected}")
            }
            GammaShape { rows, cols, expected } => {
                write!(f, "gamma is {rows}x{cols}, expected {expected}x{expected}")
            }
            GammaNotFinite { from, to } => write!(f, "gamma[{from},{to}] is not finite"),
            GammaDiagonal { index, value } => write!(f, "gamma[{index},{index}] = {value} must be zero"),
            GammaNegative { from, to, value } => write!(f, "gamma[{from},{to}] = {value} is negative"),
            DetailedBalance { lower, upper, expected_ratio, actual_ratio, relative_error } => write!(
                f,
                "detailed balance broken between levels {lower} and {upper}: down/up = {actual_ratio:.6e}, expected {expected_ratio:.6e} (rel. error {relative_error:.3e})"
            ),
            Temperature { value } => write!(f, "temperature {value} must be positive and finite"),
            BiasDimension { dim } => write!(f, "bias schedules need a two-flavor model, got d = {dim}"),
            BiasWindow { t_start, t_end } => write!(f, "bias window [{t_start}, {t_end}] is invalid"),
        }
    }
}

/// Reports every broken invariant of `spec`; an empty list means the model is valid.
pub fn validate_model(spec: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = spec.n_levels();
    let d = spec.dim();
    if m == 0 {
        out.push(Violation::NoLevels);
    }
    for (index, &value) in spec.levels.iter().enumerate() {
        if !value.is_finite() {
            out.push(Violation::NonFiniteLevel { index, value });
        }
    }
    for i in 1..m {
        let (previous, current) = (spec.levels[i - 1], spec.levels[i]);
        if current == previous {
            out.push(Violation::DegenerateLevels { i: i - 1, j: i, energy: current });
        } else if current < previous {
            out.push(Violation::NonIncreasingLevels { index: i, previous, current });
        }
    }
    if spec.lambdas.len() != m {
        out.push(Violation::LambdaCount { expected: m, found: spec.lambdas.len() });
    }
    for (index, l) in spec.lambdas.iter().enumerate() {
        if l.dim() != d {
            out.push(Violation::LambdaDimension { index, expected: d, found: l.dim() });
        }
    }
    let t = spec.temperature;
    if !(t.is_finite() && t > 0.0) {
        out.push(Violation::Temperature { value: t });
    }
    if let Some(bias) = &spec.bias {
        if d != 2 {
            out.push(Violation::BiasDimension { dim: d });
        }
        let window_ok = bias.t_start.is_finite() && bias.t_end.is_finite();
        if !window_ok || (bias.shape == BiasShape::LinearRamp && bias.t_end <= bias.t_start) {
            out.push(Violation::BiasWindow { t_start: bias.t_start, t_end: bias.t_end });
        }
    }

    let g = &spec.gamma;
    if g.nrows() != m || g.ncols() != m {
        out.push(Violation::GammaShape { rows: g.nrows(), cols: g.ncols(), expected: m });
        return out;
    }
    let mut finite = true;
    for i in 0..m {
        for j in 0..m {
            let v = g[(i, j)];
            if !v.is_finite() {
                out.push(Violation::GammaNotFinite { from: i, to: j });
                finite = false;
            } else if i == j && v != 0.0 {
                out.push(Violation::GammaDiagonal { index: i, value: v });
            } else if v < 0.0 {
                out.push(Violation::GammaNegative { from: i, to: j, value: v });
            }
        }
    }
    if !finite || !(t.is_finite() && t > 0.0) {
        return out;
    }
    for i in 0..m {
        for j in 0..m {
            let (lower, upper) = (i, j);
            if spec.levels[upper] <= spec.levels[lower] {
                continue;
            }
            let up = g[(lower, upper)];
            let down = g[(upper, lower)];
            if up <= 0.0 && down <= 0.0 {
                continue;
            }
            // Compare in the direction that cannot overflow: up == down * exp(-w/T).
            let omega = spec.levels[upper] - spec.levels[lower];
            let boltzmann = (-omega / t).exp();
            let predicted_up = down * boltzmann;
            let scale = up.abs().max(predicted_up.abs());
            let relative_error = if scale > 0.0 { (up - predicted_up).abs() / scale } else { 0.0 };
            if relative_error > DETAILED_BALANCE_TOL || (up > 0.0 && down <= 0.0) {
                out.push(Violation::DetailedBalance {
                    lower,
                    upper,
                    expected_ratio: (omega / t).exp(),
                    actual_ratio: if up > 0.0 { down / up } else { f64::INFINITY },
                    relative_error,
                });
            }
        }
    }
    out
}

/// Fails with [`Error::InvalidModel`] unless `validate_model` reports nothing.
pub fn ensure_valid(spec: &ModelSpec) -> Result<()> {
    let v = validate_model(spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(v))
    }
}

/// Block-diagonal density matrix: one sub-normalized flavor block per level.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rhos: Vec<FlavorMatrix>,
    pub time: f64,
}

impl DensityState {
    pub fn n_levels(&self) -> usize {
        self.rhos.len()
    }

    pub fn dim(&self) -> usize {
        self.rhos.first().map_or(0, FlavorMatrix::dim)
    }

    pub fn total_trace(&self) -> f64 {
        self.rhos.iter().map(FlavorMatrix::trace).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rhos
            .iter()
            .flat_map(|r| r.eigenvalues().into_iter().next())
            .fold(f64::INFINITY, f64::min)
    }

    /// Column-stacked vectorization, level blocks concatenated.
    pub fn to_vector(&self) -> DVector<C64> {
        let d2 = self.dim() * self.dim();
        let mut x = DVector::zeros(self.n_levels() * d2);
        for (i, r) in self.rhos.iter().enumerate() {
            x.rows_mut(i * d2, d2).copy_from_slice(r.matrix().as_slice());
        }
        x
    }

    /// Inverse of [`to_vector`](Self::to_vector); each block is Hermitized.
    pub fn from_vector(x: &DVector<C64>, d: usize, time: f64) -> Self {
        let d2 = d * d;
        assert_eq!(x.len() % d2, 0, "state vector length must be a multiple of d^2");
        let rhos = x
            .as_slice()
            .chunks(d2)
            .map(|c| FlavorMatrix::hermitized(&DMatrix::from_column_slice(d, d, c)))
            .collect();
        DensityState { rhos, time }
    }

    /// Checks the Hermitian, positivity and unit-trace invariants.
    pub fn check(&self) -> Result<()> {
        for r in &self.rhos {
            let deviation = hermiticity_deviation(r.matrix());
            if deviation > HERMITIAN_TOL {
                return Err(Error::NotHermitian { deviation });
            }
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -POSITIVITY_TOL {
            return Err(Error::Gate { gate: "positivity", detail: format!("min eigenvalue {min_ev:.3e}") });
        }
        let tr = self.total_trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Gate { gate: "trace", detail: format!("total trace {tr:.15}") });
        }
        Ok(())
    }
}

/// `rho(E_i, 0) = p_i P` with Boltzmann weights `p_i` and a rank-one flavor projector `P`.
pub fn thermal_initial_state(spec: &ModelSpec, flavor_projector: &FlavorMatrix) -> Result<DensityState> {
    let p = flavor_projector.matrix();
    let idempotency = (p * p - p).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let trace = (p.trace().re - 1.0).abs() + p.trace().im.abs();
    if idempotency > 1e-10 || trace > 1e-10 {
        return Err(Error::NotAProjector { idempotency, trace });
    }
    if flavor_projector.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "projector has dimension {}, model has {}",
            flavor_projector.dim(),
            spec.dim()
        )));
    }
    let rhos = spec.boltzmann_weights().into_iter().map(|w| flavor_projector.scaled(w)).collect();
    Ok(DensityState { rhos, time: 0.0 })
}

// JSON document layout.

type JsonComplexMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ZetaDocument {
    B { b: f64 },
    Matrix(JsonComplexMatrix),
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    levels: Vec<f64>,
    lambdas: Vec<JsonComplexMatrix>,
    zeta: ZetaDocument,
    gamma: Vec<Vec<f64>>,
    temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<BiasSchedule>,
}

fn matrix_to_json(m: &DMatrix<C64>) -> JsonComplexMatrix {
    m.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn matrix_from_json(rows: &JsonComplexMatrix) -> Result<FlavorMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("flavor matrix rows must all have length d".into()));
    }
    FlavorMatrix::new(DMatrix::from_row_iterator(
        n,
        n,
        rows.iter().flatten().map(|&[re, im]| C64::new(re, im)),
    ))
}

impl From<&ModelSpec> for ModelDocument {
    fn from(spec: &ModelSpec) -> Self {
        let zeta = match spec.coupling.b {
            Some(b) => ZetaDocument::B { b },
            None => ZetaDocument::Matrix(matrix_to_json(spec.coupling.zeta.matrix())),
        };
        ModelDocument {
            levels: spec.levels.clone(),
            lambdas: spec.lambdas.iter().map(|l| matrix_to_json(l.matrix())).collect(),
            zeta,
            gamma: spec.gamma.row_iter().map(|r| r.iter().copied().collect()).collect(),
            temperature: spec.temperature,
            bias: spec.bias,
        }
    }
}

impl TryFrom<ModelDocument> for ModelSpec {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let lambdas = doc.lambdas.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
        let coupling = match &doc.zeta {
            ZetaDocument::B { b } => CouplingOperator::two_flavor(*b),
            ZetaDocument::Matrix(rows) => CouplingOperator::from_matrix(matrix_from_json(rows)?),
        };
        let m = doc.gamma.len();
        if doc.gamma.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("gamma must be square".into()));
        }
        let gamma = DMatrix::from_row_iterator(m, m, doc.gamma.iter().flatten().copied());
        Ok(ModelSpec {
            levels: doc.levels,
            lambdas,
            coupling,
            gamma,
            temperature: doc.temperature,
            bias: doc.bias,
        })
    }
}
