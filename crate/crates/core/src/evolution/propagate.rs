//! Propagators: exact exponential for static generators, embedded Runge-Kutta
//! for time-dependent bias, and a segmented exponential for stiff biased runs.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::expm::expm;
use super::liouvillian::GeneratorParts;
use super::Trajectory;
use crate::error::{Error, Result};
use crate::model::{ensure_valid, hermiticity_deviation, DensityState, ModelSpec, C64};

/// `n` uniformly spaced instants from 0 to `t_end` inclusive.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grid(initial: &DensityState, t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty sampling grid".into()));
    }
    if t_grid[0] < initial.time || t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "sampling instants must be finite, nondecreasing and not before the initial time".into(),
        ));
    }
    Ok(())
}

fn check_state(spec: &ModelSpec, initial: &DensityState) -> Result<()> {
    if initial.n_levels() != spec.n_levels() || initial.dim() != spec.dim() {
        return Err(Error::Dimension(format!(
            "initial state is {} levels x d={}, model is {} levels x d={}",
            initial.n_levels(),
            initial.dim(),
            spec.n_levels(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Largest per-block `|A - A^H|` of a raw state vector.
fn vector_hermiticity(x: &DVector<C64>, d: usize) -> f64 {
    x.as_slice()
        .chunks(d * d)
        .map(|c| hermiticity_deviation(&DMatrix::from_column_slice(d, d, c)))
        .fold(0.0, f64::max)
}

fn hermitize(x: &mut DVector<C64>, d: usize) {
    for block in x.as_mut_slice().chunks_mut(d * d) {
        for r in 0..d {
            for c in r..d {
                let (a, b) = (block[r + c * d], block[c + r * d]);
                let avg = (a + b.conj()) * 0.5;
                block[r + c * d] = avg;
                block[c + r * d] = avg.conj();
            }
        }
    }
}

/// Collects samples and the raw Hermiticity drift seen before each re-Hermitization.
struct Recorder {
    d: usize,
    states: Vec<DensityState>,
    hermiticity_drift: f64,
}

impl Recorder {
    fn new(d: usize, capacity: usize) -> Self {
        Recorder { d, states: Vec::with_capacity(capacity), hermiticity_drift: 0.0 }
    }

    fn record(&mut self, x: &mut DVector<C64>, t: f64) {
        self.hermiticity_drift = self.hermiticity_drift.max(vector_hermiticity(x, self.d));
        hermitize(x, self.d);
        self.states.push(DensityState::from_vector(x, self.d, t));
    }

    fn finish(self) -> Trajectory {
        let mut traj = Trajectory::from_states(self.states);
        traj.hermiticity_drift = self.hermiticity_drift;
        traj
    }
}

/// Exact propagation `x(t_k) = exp(L (t_k - t_{k-1})) x(t_{k-1})`.
///
/// Step propagators are cached per distinct step length, so uniform grids cost a
/// handful of matrix exponentials.
pub fn propagate_expm(spec: &ModelSpec, initial: &DensityState, t_grid: &[f64]) -> Result<Trajectory> {
    ensure_valid(spec)?;
    if spec.is_time_dependent() {
        return Err(Error::TimeDependent);
    }
    check_state(spec, initial)?;
    check_grid(initial, t_grid)?;
    let d = spec.dim();
    let generator = GeneratorParts::new(spec).at(spec.epsilon(0.0));

    let mut cache: HashMap<u64, DMatrix<C64>> = HashMap::new();
    let mut rec = Recorder::new(d, t_grid.len());
    let mut x = initial.to_vector();
    let mut t_prev = initial.time;
    for &t in t_grid {
        let dt = t - t_prev;
        if dt == 0.0 {
            rec.states.push(DensityState { time: t, ..initial_or_last(&rec, initial) });
            continue;
        }
        let step = cache.entry(dt.to_bits()).or_insert_with(|| step_propagator(&generator, dt, d));
        x = &*step * &x;
        rec.record(&mut x, t);
        t_prev = t;
    }
    Ok(rec.finish())
}

/// `exp(L dt)` with its trace row reset to the exact value.
///
/// Squaring a stiff generator loses about `|L dt| * eps` of trace per step, which
/// otherwise accumulates linearly over a long trajectory. Columns fed by a
/// population are rescaled on their population rows, so tiny thermal weights
/// keep their relative accuracy; coherence columns get an additive fix.
fn step_propagator(generator: &DMatrix<C64>, dt: f64, d: usize) -> DMatrix<C64> {
    let mut p = expm(&(generator * C64::new(dt, 0.0)));
    let n = p.nrows();
    let diag: Vec<usize> = (0..n).filter(|r| (r % (d * d)) % (d + 1) == 0).collect();
    let share = 1.0 / diag.len() as f64;
    for col in 0..n {
        let sum: C64 = diag.iter().map(|&r| p[(r, col)]).sum();
        if diag.contains(&col) && sum.norm() > 0.5 {
            let f = C64::new(1.0, 0.0) / sum;
            for &r in &diag {
                p[(r, col)] *= f;
            }
        } else {
            let target = if diag.contains(&col) { 1.0 } else { 0.0 };
            let fix = (C64::new(target, 0.0) - sum) * share;
            for &r in &diag {
                p[(r, col)] += fix;
            }
        }
    }
    p
}

fn initial_or_last(rec: &Recorder, initial: &DensityState) -> DensityState {
    rec.states.last().cloned().unwrap_or_else(|| initial.clone())
}

/// Exponential-midpoint propagation of a biased model.
///
/// Every sampling interval is cut into equal pieces, at least `segments` in
/// total, and the bias is frozen at its midpoint value on each piece.
pub fn propagate_segmented(
    spec: &ModelSpec,
    initial: &DensityState,
    t_grid: &[f64],
    segments: usize,
) -> Result<Trajectory> {
    ensure_valid(spec)?;
    check_state(spec, initial)?;
    check_grid(initial, t_grid)?;
    if segments == 0 {
        return Err(Error::InvalidArgument("segments must be positive".into()));
    }
    let d = spec.dim();
    let parts = GeneratorParts::new(spec);
    let intervals = t_grid.iter().fold((initial.time, 0usize), |(prev, n), &t| (t, n + usize::from(t > prev))).1;
    let per_interval = segments.div_ceil(intervals.max(1));

    let mut rec = Recorder::new(d, t_grid.len());
    let mut x = initial.to_vector();
    let mut t = initial.time;
    for &ts in t_grid {
        if ts == t {
            rec.states.push(DensityState { time: ts, ..initial_or_last(&rec, initial) });
            continue;
        }
        let h = (ts - t) / per_interval as f64;
        for k in 0..per_interval {
            let mid = t + (k as f64 + 0.5) * h;
            x = step_propagator(&parts.at(spec.epsilon(mid)), h, d) * &x;
            hermitize(&mut x, d);
        }
        t = ts;
        rec.record(&mut x, ts);
    }
    Ok(rec.finish())
}

/// Largest rate scale of the model: total escape rate, splitting, or bias.
pub(crate) fn stiffness_scale(spec: &ModelSpec) -> f64 {
    let gamma = spec.out_rates().into_iter().fold(0.0, f64::max);
    let lambda = spec
        .lambdas
        .iter()
        .flat_map(|l| l.eigenvalues())
        .map(f64::abs)
        .fold(0.0, f64::max);
    let eps = spec.bias.map_or(0.0, |b| b.max_abs());
    gamma.max(lambda).max(eps)
}

const MAX_STEPS: usize = 20_000_000;
const MIN_STEP: f64 = 1e-14;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) integration, sampled at `t_grid`.
///
/// Steps are capped at `0.1 / max(escape rate, |lambda|, |eps|)` and land exactly
/// on every sample instant. The state is re-Hermitized after each accepted step.
pub fn integrate_adaptive(
    spec: &ModelSpec,
    initial: &DensityState,
    t_grid: &[f64],
    rel_tol: f64,
) -> Result<Trajectory> {
    ensure_valid(spec)?;
    check_state(spec, initial)?;
    check_grid(initial, t_grid)?;
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let d = spec.dim();
    let parts = GeneratorParts::new(spec);
    let abs_tol = rel_tol;
    let scale = stiffness_scale(spec);
    let h_max = if scale > 0.0 { 0.1 / scale } else { f64::INFINITY };
    let n = initial.to_vector().len();

    let f = |t: f64, x: &DVector<C64>, out: &mut DVector<C64>| parts.apply(spec.epsilon(t), x, out);

    let mut rec = Recorder::new(d, t_grid.len());
    let mut x = initial.to_vector();
    let mut t = initial.time;
    let mut k: Vec<DVector<C64>> = (0..7).map(|_| DVector::zeros(n)).collect();
    let mut stage = DVector::zeros(n);
    let mut x_new = DVector::zeros(n);
    let span = t_grid.last().copied().unwrap_or(t) - t;
    let mut h = h_max.min(if span > 0.0 { span / 100.0 } else { 1.0 });
    let mut steps = 0usize;
    f(t, &x, &mut k[0]);

    for &ts in t_grid {
        while t < ts {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::TooManySteps { t, steps: MAX_STEPS });
            }
            let last = ts - t <= h;
            let h_try = if last { ts - t } else { h };
            for s in 1..7 {
                stage.copy_from(&x);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        stage.axpy(C64::new(h_try * a, 0.0), kj, C64::new(1.0, 0.0));
                    }
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                f(t + C[s] * h_try, &stage, &mut tail[0]);
            }
            // Stage 7 is evaluated at the 5th-order solution (FSAL).
            x_new.copy_from(&stage);
            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for (s, ks) in k.iter().enumerate() {
                    if E[s] != 0.0 {
                        e += ks[i] * E[s];
                    }
                }
                let sc = abs_tol + rel_tol * x[i].norm().max(x_new[i].norm());
                err_sq += (e.norm() * h_try / sc).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();
            if err <= 1.0 {
                t = if last { ts } else { t + h_try };
                x.copy_from(&x_new);
                hermitize(&mut x, d);
                f(t, &x, &mut k[0]);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || h_try >= h {
                    h = (h_try * grow).min(h_max);
                }
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < MIN_STEP {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        rec.record(&mut x, ts);
    }
    Ok(rec.finish())
}
