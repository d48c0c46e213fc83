//! Fixed-format CSV writers. Every real is printed with 17 significant digits.

use std::io::Write;

use nalgebra::DMatrix;

use crate::doublewell::SpectrumResult;
use crate::error::Result;
use crate::evolution::Trajectory;

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// Quotes a CSV field when it holds a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn trajectory_header(n_levels: usize, d: usize, full: bool) -> Vec<String> {
    let mut h = vec!["t".to_string(), "p_left".into(), "entropy".into()];
    h.extend((1..=n_levels).map(|j| format!("pop_{j}")));
    if full {
        for j in 1..=n_levels {
            for c in 0..d {
                for r in 0..d {
                    h.push(format!("rho{j}_{r}{c}_re"));
                    h.push(format!("rho{j}_{r}{c}_im"));
                }
            }
        }
    }
    h
}

/// Columns `t, p_left, entropy, pop_1..pop_M`, then with `full` the column-major
/// real and imaginary parts of every block.
pub fn write_trajectory_csv(w: &mut impl Write, traj: &Trajectory, full: bool) -> Result<()> {
    let (m, d) = traj.states.first().map_or((0, 0), |s| (s.n_levels(), s.dim()));
    writeln!(w, "{}", trajectory_header(m, d, full).join(","))?;
    for ((t, obs), state) in traj.times.iter().zip(&traj.observables).zip(&traj.states) {
        let mut row = vec![fmt17(*t), fmt17(obs.p_left), fmt17(obs.entropy)];
        row.extend(obs.populations.iter().map(|&p| fmt17(p)));
        if full {
            for r in &state.rhos {
                for z in r.matrix().iter() {
                    row.push(fmt17(z.re));
                    row.push(fmt17(z.im));
                }
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_spectrum_csv(w: &mut impl Write, spectrum: &SpectrumResult) -> Result<()> {
    writeln!(w, "pair,e_even,e_odd,e_mean,g")?;
    for (k, p) in spectrum.pairs.iter().enumerate() {
        writeln!(w, "{},{},{},{},{}", k + 1, fmt17(p.e_even), fmt17(p.e_odd), fmt17(p.e_mean), fmt17(p.g))?;
    }
    Ok(())
}

/// Off-diagonal dipole elements `x_jk` for `j < k`, 1-based.
pub fn write_dipoles_csv(w: &mut impl Write, dipoles: &DMatrix<f64>) -> Result<()> {
    writeln!(w, "j,k,x")?;
    for j in 0..dipoles.nrows() {
        for k in j + 1..dipoles.ncols() {
            writeln!(w, "{},{},{}", j + 1, k + 1, fmt17(dipoles[(j, k)]))?;
        }
    }
    Ok(())
}

/// Every ordered pair `from != to`, 1-based, with level energies.
pub fn write_rates_csv(w: &mut impl Write, gamma: &DMatrix<f64>, levels: &[f64]) -> Result<()> {
    writeln!(w, "from,to,e_from,e_to,rate")?;
    for i in 0..gamma.nrows() {
        for j in 0..gamma.ncols() {
            if i != j {
                writeln!(w, "{},{},{},{},{}", i + 1, j + 1, fmt17(levels[i]), fmt17(levels[j]), fmt17(gamma[(i, j)]))?;
            }
        }
    }
    Ok(())
}
