//! Symmetric double square well.
//!
//! Geometry (lengths in units of the barrier half-width `a`): impenetrable walls
//! at `x = +-(a + w)`, a central barrier of height `U0` on `|x| < a`, and two
//! flat wells of width `w = 7a` in between. The mass is chosen so that the
//! ground state of a single infinite well of width `w` has energy 1, which fixes
//! the energy unit (and, with hbar = 1, the time unit).
//!
//! Bound states are the roots of the even/odd matching conditions at `x = a`,
//! bracketed on a uniform energy grid and refined by bisection. Adjacent
//! even/odd roots form a tunnelling doublet with half-splitting `g`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CouplingOperator, FlavorMatrix, ModelSpec};
use crate::rates::gamma_from_dipoles;

/// Number of bound states the default geometry is tuned to hold.
pub const DEFAULT_BOUND_STATES: usize = 20;

const BRACKET_POINTS: usize = 20_000;
const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellGeometry {
    /// Half-width `a` of the central barrier.
    pub barrier_half_width: f64,
    /// Width of each flat well (`7a` by default).
    pub well_width: f64,
    /// Barrier height `U0`.
    pub barrier_height: f64,
    pub mass: f64,
    /// When set, `solve_bound_states` insists on exactly this many bound states.
    pub expected_bound_states: Option<usize>,
}

impl Default for WellGeometry {
    /// `a = 1`, `w = 7`, `U0` tuned to hold exactly twenty bound states.
    fn default() -> Self {
        let base = WellGeometry::with_barrier(1.0, 7.0, f64::NAN);
        WellGeometry {
            barrier_height: default_barrier_height(),
            expected_bound_states: Some(DEFAULT_BOUND_STATES),
            ..base
        }
    }
}

impl WellGeometry {
    /// Geometry with mass fixed by `E_1(infinite well of width w) = 1`.
    pub fn with_barrier(barrier_half_width: f64, well_width: f64, barrier_height: f64) -> Self {
        WellGeometry {
            barrier_half_width,
            well_width,
            barrier_height,
            mass: PI * PI / (2.0 * well_width * well_width),
            expected_bound_states: None,
        }
    }

    pub fn outer_wall(&self) -> f64 {
        self.barrier_half_width + self.well_width
    }

    /// Infinite-well level `n` of a single well of width `w`.
    pub fn single_well_energy(&self, n: usize) -> f64 {
        let n = n as f64;
        n * n * PI * PI / (2.0 * self.mass * self.well_width * self.well_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Matching function whose zeros are the bound states of one parity.
///
/// Wronskian of the outer solution `sin(k (a + w - x))` and the barrier solution
/// (`cosh` or `sinh`) at `x = a`, divided by the barrier amplitude.
pub fn matching_function(geom: &WellGeometry, parity: Parity, energy: f64) -> f64 {
    let a = geom.barrier_half_width;
    let k = (2.0 * geom.mass * energy).sqrt();
    let kappa = (2.0 * geom.mass * (geom.barrier_height - energy).max(0.0)).sqrt();
    let inner_log_derivative = match parity {
        Parity::Even => kappa * (kappa * a).tanh(),
        Parity::Odd => {
            let z = kappa * a;
            if z < 1e-6 {
                (1.0 + z * z / 3.0) / a
            } else {
                kappa / z.tanh()
            }
        }
    };
    let kw = k * geom.well_width;
    -k * kw.cos() - inner_log_derivative * kw.sin()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All roots of one parity in `(0, e_max]`, ascending.
pub fn parity_roots(geom: &WellGeometry, parity: Parity, e_max: f64) -> Vec<f64> {
    let f = |e: f64| matching_function(geom, parity, e);
    let step = e_max / BRACKET_POINTS as f64;
    let mut roots = Vec::new();
    let mut e_prev = step * 1e-6;
    let mut f_prev = f(e_prev);
    for i in 1..=BRACKET_POINTS {
        let e = step * i as f64;
        let fe = f(e);
        if fe == 0.0 {
            roots.push(e);
        } else if f_prev != 0.0 && (fe < 0.0) != (f_prev < 0.0) {
            roots.push(bisect(f, e_prev, e, f_prev));
        }
        e_prev = e;
        f_prev = fe;
    }
    roots
}

/// (even, odd) bound-state energies below `e_max` (capped at the barrier top).
pub fn bound_states_below(geom: &WellGeometry, e_max: f64) -> (Vec<f64>, Vec<f64>) {
    let e_max = e_max.min(geom.barrier_height);
    let mut found: Vec<Vec<f64>> = [Parity::Even, Parity::Odd]
        .par_iter()
        .map(|&p| parity_roots(geom, p, e_max))
        .collect();
    let odd = found.pop().unwrap_or_default();
    let even = found.pop().unwrap_or_default();
    (even, odd)
}

pub fn count_bound_states(geom: &WellGeometry) -> usize {
    let (e, o) = bound_states_below(geom, geom.barrier_height);
    e.len() + o.len()
}

/// Interval `[lo, hi)` of barrier heights holding exactly `target` bound states.
pub fn bound_state_window(barrier_half_width: f64, well_width: f64, target: usize) -> (f64, f64) {
    let count = |u: f64| count_bound_states(&WellGeometry::with_barrier(barrier_half_width, well_width, u));
    // Smallest U0 at which at least `n` states are bound.
    let threshold = |n: usize| {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while count(hi) < n {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * hi {
                break;
            }
            if count(mid) >= n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    (threshold(target), threshold(target + 1))
}

/// Midpoint of the twenty-bound-state window for `a = 1`, `w = 7`.
pub fn default_barrier_height() -> f64 {
    static U0: OnceLock<f64> = OnceLock::new();
    *U0.get_or_init(|| {
        let (lo, hi) = bound_state_window(1.0, 7.0, DEFAULT_BOUND_STATES);
        0.5 * (lo + hi)
    })
}

/// One tunnelling doublet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doublet {
    pub e_even: f64,
    pub e_odd: f64,
    pub e_mean: f64,
    /// Half-splitting; `lambda = g sigma1`.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub pairs: Vec<Doublet>,
    /// Dipole table over single-well levels, in units of length.
    pub dipoles: DMatrix<f64>,
}

impl SpectrumResult {
    pub fn energies(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.e_mean).collect()
    }

    pub fn splittings(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.g).collect()
    }
}

pub fn solve_bound_states(geom: &WellGeometry) -> Result<SpectrumResult> {
    if !(geom.barrier_height > 0.0) {
        return Err(Error::Spectrum(format!("barrier height must be positive, got {}", geom.barrier_height)));
    }
    let (even, odd) = bound_states_below(geom, geom.barrier_height);
    if even.len() != odd.len() {
        return Err(Error::Spectrum(format!(
            "{} even and {} odd bound states below U0 = {}; doublets cannot be formed",
            even.len(),
            odd.len(),
            geom.barrier_height
        )));
    }
    if let Some(expected) = geom.expected_bound_states {
        let total = even.len() + odd.len();
        if total != expected {
            return Err(Error::Spectrum(format!(
                "{total} bound states below U0 = {}, expected {expected}; U0 is mistuned",
                geom.barrier_height
            )));
        }
    }
    let pairs: Vec<Doublet> = even
        .iter()
        .zip(&odd)
        .map(|(&e_even, &e_odd)| Doublet {
            e_even,
            e_odd,
            e_mean: 0.5 * (e_even + e_odd),
            g: 0.5 * (e_odd - e_even),
        })
        .collect();
    let n = pairs.len().max(2);
    Ok(SpectrumResult { pairs, dipoles: infinite_well_dipoles(geom, n) })
}

/// `x_jk` for the infinite well of width `w`, origin at the well edge.
///
/// Only off-diagonal elements are filled; diagonal contributions cancel between
/// the `+k` and `-k` bath modes and are never used.
pub fn infinite_well_dipoles(geom: &WellGeometry, n_levels: usize) -> DMatrix<f64> {
    let l = geom.well_width;
    DMatrix::from_fn(n_levels, n_levels, |r, c| {
        let (j, k) = ((r + 1) as f64, (c + 1) as f64);
        if (r + c) % 2 == 0 {
            0.0
        } else {
            let d = j * j - k * k;
            -8.0 * l * j * k / (PI * PI * d * d)
        }
    })
}

/// Assembles the double-well model with coupling knob `q/v`.
pub fn build_model(geom: &WellGeometry, coupling: f64, temperature: f64, b: f64) -> Result<ModelSpec> {
    let spectrum = solve_bound_states(geom)?;
    model_from_spectrum(&spectrum, coupling, temperature, b)
}

/// Same as [`build_model`] but reuses an already solved spectrum.
pub fn model_from_spectrum(spectrum: &SpectrumResult, coupling: f64, temperature: f64, b: f64) -> Result<ModelSpec> {
    if !(coupling >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling must be nonnegative, got {coupling}")));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {temperature}")));
    }
    let levels = spectrum.energies();
    let m = levels.len();
    let c2 = DMatrix::from_fn(m, m, |j, k| {
        let x = spectrum.dipoles[(j, k)];
        let w = levels[j] - levels[k];
        coupling * coupling * w * w * x * x
    });
    let gamma = gamma_from_dipoles(&c2, &levels, temperature)?.into_inner();
    let sigma1 = FlavorMatrix::sigma1();
    Ok(ModelSpec {
        lambdas: spectrum.pairs.iter().map(|p| sigma1.scaled(p.g)).collect(),
        levels,
        coupling: CouplingOperator::two_flavor(b),
        gamma,
        temperature,
        bias: None,
    })
}

/// Spectrum of the default geometry, solved once per process.
pub fn default_spectrum() -> &'static SpectrumResult {
    static SPECTRUM: OnceLock<SpectrumResult> = OnceLock::new();
    SPECTRUM.get_or_init(|| solve_bound_states(&WellGeometry::default()).expect("default geometry is tuned"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn default_well_holds_twenty_states() {
        let geom = WellGeometry::default();
        assert_eq!(count_bound_states(&geom), 20);
        let s = solve_bound_states(&geom).unwrap();
        assert_eq!(s.pairs.len(), 10);
        assert!(geom.barrier_height > 90.0 && geom.barrier_height < 130.0, "U0 = {}", geom.barrier_height);
    }

    #[test]
    fn splittings_grow_and_stay_small() {
        let s = default_spectrum();
        let g = s.splittings();
        assert!(g[0] > 0.0);
        for w in g.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(g[9] / g[0] > 10.0);
        let e = s.energies();
        for i in 0..5 {
            assert!(g[i] < 0.01 * (e[i + 1] - e[i]), "pair {i}: g = {}", g[i]);
        }
    }

    #[test]
    fn impenetrable_barrier_recovers_single_well() {
        // Penetration depth ~ 1/kappa, relative shift ~ 2/(w kappa).
        let geom = WellGeometry::with_barrier(1.0, 7.0, 1e6);
        let (e, o) = bound_states_below(&geom, 2.0);
        assert_eq!((e.len(), o.len()), (1, 1));
        assert!((0.5 * (e[0] + o[0]) - 1.0).abs() < 1e-3);
        assert!(o[0] - e[0] < 1e-12);

        let geom = WellGeometry::with_barrier(1.0, 7.0, 1e14);
        let (e, o) = bound_states_below(&geom, 2.0);
        assert!((0.5 * (e[0] + o[0]) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mismatched_count_is_reported() {
        let mut geom = WellGeometry::default();
        geom.barrier_height *= 1.5;
        assert!(matches!(solve_bound_states(&geom), Err(Error::Spectrum(_))));
        assert!(solve_bound_states(&WellGeometry { barrier_height: -1.0, ..geom }).is_err());
    }

    #[test]
    fn dipole_closed_form() {
        let geom = WellGeometry::default();
        let x = infinite_well_dipoles(&geom, 10);
        assert!((x[(0, 1)] + 112.0 / (9.0 * PI * PI)).abs() < 1e-14);
        assert!((x[(0, 1)] + 1.26089).abs() < 1e-5);
        assert_eq!(x[(0, 2)], 0.0);
        assert_eq!(x, x.transpose());
    }

    #[test]
    fn zero_coupling_has_no_rates() {
        let spec = model_from_spectrum(default_spectrum(), 0.0, 5.0, 0.0).unwrap();
        assert!(spec.gamma.iter().all(|&g| g == 0.0));
        assert!(validate_model(&spec).is_empty());
    }

    #[test]
    fn built_model_validates_and_respects_selection_rule() {
        let spec = build_model(&WellGeometry::default(), 0.3, 5.0, 0.0).unwrap();
        assert!(validate_model(&spec).is_empty());
        for j in 0..10 {
            for k in 0..10 {
                if (j + k) % 2 == 0 {
                    assert_eq!(spec.gamma[(j, k)], 0.0);
                } else {
                    assert!(spec.gamma[(j, k)] > 0.0);
                }
            }
        }
    }
}
