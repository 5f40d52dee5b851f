//! The two counterexamples for the semilinear theory: the linear heat flow
//! with a growing potential, and the chirp multiplier on `M^{p,q}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::tfa::{gaussian_window, modulation_norm_stft, ModulationNormSpec};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contro1Row {
    pub t: f64,
    pub sup: f64,
}

/// `sup_x |e^{−t x²} − 1|` for `u0 ≡ 1` evolved by `∂_t u + x² u = 0`.
pub fn contro1_check(grid: &Grid, t_list: &[f64]) -> Result<Vec<Contro1Row>> {
    grid.require_line()?;
    let one = GridFunction::from_real_fn(*grid, |_| 1.0);
    t_list
        .iter()
        .map(|&t| {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("time {t} must be finite and ≥ 0")));
            }
            let evolved = one.map(|p, v| v * (-t * p[0] * p[0]).exp());
            Ok(Contro1Row { t, sup: (&evolved - &one).sup_norm() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contro2Row {
    pub length: f64,
    pub n: usize,
    pub ratio: f64,
}

/// Points per box so the chirp frequency `2x` stays below Nyquist.
fn chirp_resolution(length: f64) -> usize {
    ((length * length / std::f64::consts::PI).ceil() as usize).next_power_of_two().max(64)
}

/// `‖e^{−ix²} u0‖_{M^{p,q}} / ‖u0‖_{M^{p,q}}` per box length, with `u0` a
/// Gaussian of width `L/20` and the STFT norm over the covering lattice.
pub fn contro2_check(p: f64, q: f64, box_sizes: &[f64]) -> Result<Vec<Contro2Row>> {
    let spec = ModulationNormSpec::new(p, q, 0.0)?;
    box_sizes
        .iter()
        .map(|&length| {
            let n = chirp_resolution(length);
            let grid = Grid::line(length, n)?;
            let sigma = length / 20.0;
            let u0 = GridFunction::from_real_fn(grid, |x| (-0.5 * (x[0] / sigma).powi(2)).exp());
            let chirped = u0.map(|x, v| v * C::from_polar(1.0, -x[0] * x[0]));
            let g = gaussian_window(grid);
            let base = modulation_norm_stft(&u0, &g, spec)?;
            if base == 0.0 {
                return Err(Error::ZeroNorm("initial datum"));
            }
            let ratio = modulation_norm_stft(&chirped, &g, spec)? / base;
            Ok(Contro2Row { length, n, ratio })
        })
        .collect()
}
