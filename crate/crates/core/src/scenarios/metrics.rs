//! Scalar summaries of sampled curves.

/// Peak-to-peak amplitude over each complete period, starting at `times[0]`.
pub fn period_amplitudes(times: &[f64], values: &[f64], period: f64) -> Vec<f64> {
    if times.is_empty() || !(period > 0.0) {
        return Vec::new();
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    // Tolerate the last sample landing a hair short of a period boundary.
    let n = ((span / period) * (1.0 + 1e-12)).floor() as usize;
    (0..n)
        .map(|k| {
            let (lo, hi) = (t0 + k as f64 * period, t0 + (k + 1) as f64 * period);
            let mut mx = f64::NEG_INFINITY;
            let mut mn = f64::INFINITY;
            for (&t, &v) in times.iter().zip(values) {
                if t >= lo && t <= hi {
                    mx = mx.max(v);
                    mn = mn.min(v);
                }
            }
            if mx >= mn {
                mx - mn
            } else {
                0.0
            }
        })
        .collect()
}

/// Mean fractional amplitude loss per period, `1 - (A_last / A_first)^(1/(n-1))`.
pub fn amplitude_decay_per_period(times: &[f64], values: &[f64], period: f64) -> Option<f64> {
    let amps = period_amplitudes(times, values, period);
    if amps.len() < 2 || !(amps[0] > 0.0) {
        return None;
    }
    let ratio = amps[amps.len() - 1] / amps[0];
    Some(1.0 - ratio.powf(1.0 / (amps.len() - 1) as f64))
}

pub fn sup_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// First instant at which `values` reaches `level`, interpolated between samples.
pub fn first_crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let k = values.iter().position(|&v| v >= level)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (v0, v1) = (values[k - 1], values[k]);
    let frac = (level - v0) / (v1 - v0);
    Some(times[k - 1] + frac * (times[k] - times[k - 1]))
}

/// Time from the first 25% crossing to the first 75% crossing; `None` if either is never reached.
pub fn transition_width(times: &[f64], values: &[f64]) -> Option<f64> {
    let lo = first_crossing(times, values, 0.25)?;
    let hi = first_crossing(times, values, 0.75)?;
    Some(hi - lo)
}
