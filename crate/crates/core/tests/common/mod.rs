//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use bathsync::doublewell::WellGeometry;
use bathsync::model::C64;
use bathsync::rates::gamma_from_dipoles;
use bathsync::{CouplingOperator, DensityState, FlavorMatrix, ModelSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lowest `count` eigenvalues of the finite-difference double-well Hamiltonian on
/// `(-(a+w), a+w)` with `cells` cells. Grid points sitting on a barrier edge see
/// half the barrier height.
pub fn fd_levels(geom: &WellGeometry, cells: usize, count: usize) -> Vec<f64> {
    let half = geom.barrier_half_width + geom.well_width;
    let h = 2.0 * half / cells as f64;
    let kinetic = 1.0 / (2.0 * geom.mass * h * h);
    let n = cells - 1;
    let diag: Vec<f64> = (1..=n)
        .map(|i| {
            let x = -half + i as f64 * h;
            let edge = (x.abs() - geom.barrier_half_width).abs() < 1e-9 * h;
            let v = if edge {
                0.5 * geom.barrier_height
            } else if x.abs() < geom.barrier_half_width {
                geom.barrier_height
            } else {
                0.0
            };
            2.0 * kinetic + v
        })
        .collect();
    let off = -kinetic;
    // Sturm count: eigenvalues below `lam` equal the negative pivots of T - lam.
    let below = |lam: f64| {
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in diag.iter().enumerate() {
            q = d - lam - if i == 0 { 0.0 } else { off * off / q };
            if q == 0.0 {
                q = -1e-300;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let upper = 4.0 * kinetic + geom.barrier_height;
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = if k == 0 { (0.0, upper) } else { (0.0, upper) };
            while hi - lo > 1e-13 * hi.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                if below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// `<j| x |k>` for the infinite well of width `l` by composite Simpson quadrature.
pub fn dipole_quadrature(l: f64, j: usize, k: usize, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = l / n as f64;
    let f = |x: f64| (2.0 / l) * (j as f64 * PI * x / l).sin() * x * (k as f64 * PI * x / l).sin();
    let mut s = f(0.0) + f(l);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Normalized `exp(-E/T)`, computed without shifting.
pub fn boltzmann(levels: &[f64], t: f64) -> Vec<f64> {
    let w: Vec<f64> = levels.iter().map(|e| (-e / t).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// Closed-system `P_left(t)` for `lambda_j = g_j sigma1` from the left well.
pub fn free_p_left(weights: &[f64], splittings: &[f64], t: f64) -> f64 {
    weights.iter().zip(splittings).map(|(p, g)| p * 0.5 * (1.0 + (2.0 * g * t).cos())).sum()
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<C64> {
    let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)
}

/// Random valid two-flavor model with at most `max_levels` levels.
pub fn random_spec(rng: &mut ChaCha8Rng, max_levels: usize) -> ModelSpec {
    let m = rng.random_range(1..=max_levels);
    let mut levels: Vec<f64> = Vec::with_capacity(m);
    let mut e = rng.random_range(0.0..1.0);
    for _ in 0..m {
        levels.push(e);
        e += rng.random_range(0.2..1.5);
    }
    let temperature = rng.random_range(0.5..5.0);
    let mut c2 = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in j + 1..m {
            let v = if rng.random_bool(0.8) { rng.random_range(0.0..0.3) } else { 0.0 };
            c2[(j, k)] = v;
            c2[(k, j)] = v;
        }
    }
    let gamma = gamma_from_dipoles(&c2, &levels, temperature).expect("random rates").into_inner();
    let coupling = if rng.random_bool(0.5) {
        CouplingOperator::two_flavor(rng.random_range(-0.6..0.6))
    } else {
        CouplingOperator::from_matrix(FlavorMatrix::new(random_hermitian(rng, 2, 1.2)).unwrap())
    };
    ModelSpec {
        lambdas: (0..m).map(|_| FlavorMatrix::new(random_hermitian(rng, 2, 1.5)).unwrap()).collect(),
        levels,
        coupling,
        gamma,
        temperature,
        bias: None,
    }
}

/// Random mixed state with random level weights.
pub fn random_state(rng: &mut ChaCha8Rng, spec: &ModelSpec) -> DensityState {
    let d = spec.dim();
    let weights: Vec<f64> = (0..spec.n_levels()).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let rhos = weights
        .iter()
        .map(|w| {
            let a = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let rho = &a * a.adjoint();
            let tr = rho.trace().re;
            FlavorMatrix::hermitized(&(rho * C64::new(w / total / tr, 0.0)))
        })
        .collect();
    DensityState { rhos, time: 0.0 }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `max_k |a_k - b_k|_inf / max_k |b_k|_inf` over matching samples.
pub fn relative_state_gap(a: &[DensityState], b: &[DensityState]) -> f64 {
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        let (vx, vy) = (x.to_vector(), y.to_vector());
        num = num.max((&vx - &vy).iter().map(|z| z.norm()).fold(0.0, f64::max));
        den = den.max(vy.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    num / den
}

/// Peak-to-peak amplitude over each complete period of `period` starting at `times[0]`.
pub fn amplitudes(times: &[f64], values: &[f64], period: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let lo = times[0] + k as f64 * period;
        let hi = lo + period;
        if hi > times[times.len() - 1] * (1.0 + 1e-12) {
            break;
        }
        let window: Vec<f64> =
            times.iter().zip(values).filter(|(t, _)| **t >= lo && **t <= hi).map(|(_, v)| *v).collect();
        let mx = window.iter().copied().fold(f64::MIN, f64::max);
        let mn = window.iter().copied().fold(f64::MAX, f64::min);
        out.push(mx - mn);
        k += 1;
    }
    out
}
