//! Oscillation frequency of `P_left(t)` and the thermally averaged mode frequency.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Peaks must exceed this multiple of the median spectral magnitude.
pub const LINE_THRESHOLD: f64 = 5.0;
/// A line must be the largest bin within this many bins on either side.
const LINE_ISOLATION: usize = 3;
/// Signals with a smaller peak-to-peak range are rounding noise and carry no lines.
pub const FLAT_SIGNAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    /// Angular frequency after interpolation.
    pub omega: f64,
    pub magnitude: f64,
    pub bin: usize,
}

struct Spectrum {
    magnitudes: Vec<f64>,
    median: f64,
    flat: bool,
    /// Angular frequency per bin.
    bin_width: f64,
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 8 {
        return Err(Error::InvalidArgument("need at least 8 samples for a spectrum".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs());
    if !(dt > 0.0) || !uniform {
        return Err(Error::InvalidArgument("spectral analysis needs uniformly spaced samples".into()));
    }
    Ok(dt)
}

fn spectrum(times: &[f64], values: &[f64]) -> Result<Spectrum> {
    let dt = uniform_step(times)?;
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let range = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos());
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let magnitudes: Vec<f64> = buf[..=n / 2].iter().map(|z| z.norm()).collect();
    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    Ok(Spectrum { magnitudes, median, flat: !(range >= FLAT_SIGNAL), bin_width: 2.0 * PI / (n as f64 * dt) })
}

/// Log-parabolic refinement of a peak at `bin`, in fractional bins.
fn refine(mags: &[f64], bin: usize) -> f64 {
    if bin == 0 || bin + 1 >= mags.len() {
        return bin as f64;
    }
    let ln = |x: f64| x.max(f64::MIN_POSITIVE).ln();
    let (a, b, c) = (ln(mags[bin - 1]), ln(mags[bin]), ln(mags[bin + 1]));
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return bin as f64;
    }
    bin as f64 + (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Isolated spectral peaks above the median threshold, strongest first.
pub fn spectral_lines(times: &[f64], values: &[f64]) -> Result<Vec<SpectralLine>> {
    let s = spectrum(times, values)?;
    if s.flat {
        return Ok(Vec::new());
    }
    let mags = &s.magnitudes;
    let threshold = LINE_THRESHOLD * s.median;
    let mut lines: Vec<SpectralLine> = (1..mags.len())
        .filter(|&k| {
            let lo = k.saturating_sub(LINE_ISOLATION);
            let hi = (k + LINE_ISOLATION).min(mags.len() - 1);
            mags[k] > threshold && (lo..=hi).all(|j| j == k || mags[j] < mags[k])
        })
        .map(|k| SpectralLine { omega: refine(mags, k) * s.bin_width, magnitude: mags[k], bin: k })
        .collect();
    lines.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    Ok(lines)
}

/// Dominant angular frequency of `P_left(t)`.
pub fn estimate_frequency(traj: &Trajectory) -> Result<f64> {
    dominant_frequency(&traj.times, &traj.p_left())
}

pub(crate) fn dominant_frequency(times: &[f64], values: &[f64]) -> Result<f64> {
    let s = spectrum(times, values)?;
    if s.flat {
        return Err(Error::NoDominantLine { peak: 0.0, median: 0.0 });
    }
    let mags = &s.magnitudes;
    let (bin, &peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InvalidArgument("spectrum too short".into()))?;
    if !(peak >= LINE_THRESHOLD * s.median) || peak == 0.0 {
        return Err(Error::NoDominantLine { peak, median: s.median });
    }
    Ok(refine(mags, bin) * s.bin_width)
}

/// `sum_j p_j 2 g(E_j)` for models whose lambdas are all of the form `g sigma1`.
pub fn thermal_average_frequency(spec: &ModelSpec) -> Result<f64> {
    if spec.dim() != 2 {
        return Err(Error::InvalidArgument("thermal average frequency needs a two-flavor model".into()));
    }
    let mut splittings = Vec::with_capacity(spec.n_levels());
    for (i, l) in spec.lambdas.iter().enumerate() {
        let m = l.matrix();
        let off_sigma1 = m[(0, 0)].norm().max(m[(1, 1)].norm()).max(m[(0, 1)].im.abs());
        if off_sigma1 > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "lambda {i} is not of the form g sigma1 (residual {off_sigma1:.3e})"
            )));
        }
        splittings.push(m[(0, 1)].re);
    }
    Ok(spec.boltzmann_weights().iter().zip(&splittings).map(|(p, g)| 2.0 * p * g).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::uniform_grid;
    use crate::model::{CouplingOperator, FlavorMatrix};
    use nalgebra::DMatrix;

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t = uniform_grid(t_end, n);
        let v = t.iter().map(|&x| f(x)).collect();
        (t, v)
    }

    #[test]
    fn pure_tone_is_recovered() {
        let w0 = 3.7;
        let periods = 20.0;
        let (t, v) = sampled(|t| 0.5 + 0.5 * (w0 * t).cos(), periods * 2.0 * PI / w0, 20 * 64);
        let w = dominant_frequency(&t, &v).unwrap();
        assert!((w - w0).abs() / w0 < 1e-3, "{w}");
    }

    #[test]
    fn stronger_of_two_tones_wins() {
        let (t, v) = sampled(|t| 0.5 + 0.5 * (2.0 * t).cos() + 0.05 * (5.3 * t).cos(), 60.0, 4096);
        let w = dominant_frequency(&t, &v).unwrap();
        assert!((w - 2.0).abs() < 0.01);
        let lines = spectral_lines(&t, &v).unwrap();
        assert_eq!(lines.len(), 2, "{lines:?}");
        assert!((lines[1].omega - 5.3).abs() < 0.02);
    }

    #[test]
    fn flat_signal_has_no_line() {
        let (t, v) = sampled(|_| 0.25, 10.0, 256);
        assert!(matches!(dominant_frequency(&t, &v), Err(Error::NoDominantLine { .. })));
        let (t, v) = sampled(|x| 0.25 + 1e-15 * (3.0 * x).sin(), 10.0, 256);
        assert!(matches!(dominant_frequency(&t, &v), Err(Error::NoDominantLine { .. })));
        assert!(spectral_lines(&t, &v).unwrap().is_empty());
    }

    #[test]
    fn thermal_average_of_single_mode() {
        let spec = ModelSpec {
            levels: vec![2.0],
            lambdas: vec![FlavorMatrix::sigma1().scaled(0.3)],
            coupling: CouplingOperator::two_flavor(0.0),
            gamma: DMatrix::zeros(1, 1),
            temperature: 1.0,
            bias: None,
        };
        assert!((thermal_average_frequency(&spec).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn hot_limit_is_simple_mean() {
        let spec = ModelSpec {
            levels: vec![1.0, 1.0 + 1e-9],
            lambdas: vec![FlavorMatrix::sigma1().scaled(0.1), FlavorMatrix::sigma1().scaled(0.5)],
            coupling: CouplingOperator::two_flavor(0.0),
            gamma: DMatrix::zeros(2, 2),
            temperature: 1e6,
            bias: None,
        };
        assert!((thermal_average_frequency(&spec).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn sigma3_lambda_is_rejected() {
        let spec = ModelSpec {
            levels: vec![1.0],
            lambdas: vec![FlavorMatrix::sigma3()],
            coupling: CouplingOperator::two_flavor(0.0),
            gamma: DMatrix::zeros(1, 1),
            temperature: 1.0,
            bias: None,
        };
        assert!(thermal_average_frequency(&spec).is_err());
    }
}
