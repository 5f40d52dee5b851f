use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{propagator_matrix, EvolutionProblem};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operator::OperatorMatrix;
use crate::tfa::{fourier_columns, phase_shift_spectral, stft_rect, window_rows, PhaseLattice, PhaseSpaceField};

type C = Complex64;

/// Bins whose maximum falls below this are left out of the fit.
const FIT_FLOOR: f64 = 1e-12;

/// `⟨S(t) π(z) g, π(w) g⟩` for all lattice pairs, row `z`, column `w`.
pub fn gabor_matrix(prob: &EvolutionProblem, t: f64, g: &GridFunction, lattice: &PhaseLattice) -> Result<PhaseSpaceField> {
    let s = propagator_matrix(prob, 0.0, t)?;
    gabor_matrix_of(&s, g, lattice)
}

/// Gabor matrix `⟨A π(z) g, π(w) g⟩` of an arbitrary operator.
pub fn gabor_matrix_of(op: &OperatorMatrix, g: &GridFunction, lattice: &PhaseLattice) -> Result<PhaseSpaceField> {
    let grid = *op.grid();
    if g.grid() != &grid || lattice.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if g.l2_norm() == 0.0 {
        return Err(Error::ZeroWindow);
    }
    g.check_support("window");
    let points = lattice.points();
    let windows = window_rows(g, lattice.xs());
    let fourier = fourier_columns(&grid, lattice.xis());
    let index: Vec<(usize, usize)> = points
        .iter()
        .map(|w| (position(lattice.xs(), w.x), position(lattice.xis(), w.xi)))
        .collect();
    let rows: Vec<Vec<C>> = points
        .par_iter()
        .map(|&z| {
            let moved = op.apply(&phase_shift_spectral(g, z));
            let rect = stft_rect(moved.values(), &windows, &fourier, grid.spacing());
            index.iter().map(|&(a, b)| rect[[a, b]]).collect()
        })
        .collect();
    let n = points.len();
    let values = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]);
    PhaseSpaceField::pairs(lattice.clone(), values)
}

fn position(values: &[f64], v: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Per-bin maxima of `|entry|` against `|w − z|` and the power-law fit
/// `log max ≈ c − N log(1 + r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub bin_edges: Vec<f64>,
    pub max_abs: Vec<f64>,
    pub fitted_n: f64,
    pub intercept: f64,
    /// RMS of the fit residuals in natural-log units.
    pub residual: f64,
    pub used_bins: usize,
}

impl DecayReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r_lo", "r_hi", "max_abs"])?;
        for (e, m) in self.bin_edges.windows(2).zip(&self.max_abs) {
            w.write_record([e[0].to_string(), e[1].to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// [`decay_fit_with`] with bins one lattice step wide.
pub fn decay_fit(field: &PhaseSpaceField) -> Result<DecayReport> {
    let width = field.lattice.alpha().max(field.lattice.beta());
    decay_fit_with(field, width, |_, _| true)
}

/// Decay fit over the pairs accepted by `keep(Δx, Δξ)`.
pub fn decay_fit_with(field: &PhaseSpaceField, width: f64, keep: impl Fn(f64, f64) -> bool) -> Result<DecayReport> {
    let values = field
        .as_pairs()
        .ok_or_else(|| Error::InvalidArgument("decay fit needs a matrix-type field".into()))?;
    if !(width > 0.0) {
        return Err(Error::InvalidArgument("bin width must be positive".into()));
    }
    let points = field.lattice.points();
    let mut max_abs: Vec<f64> = Vec::new();
    for (i, z) in points.iter().enumerate() {
        for (j, w) in points.iter().enumerate() {
            let d = *w - *z;
            if !keep(d.x, d.xi) {
                continue;
            }
            let bin = (d.norm() / width).floor() as usize;
            if bin >= max_abs.len() {
                max_abs.resize(bin + 1, 0.0);
            }
            max_abs[bin] = max_abs[bin].max(values[[i, j]].norm());
        }
    }
    let bin_edges: Vec<f64> = (0..=max_abs.len()).map(|k| k as f64 * width).collect();
    let samples: Vec<(f64, f64)> = max_abs
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > FIT_FLOOR)
        .map(|(k, &m)| ((1.0 + (k as f64 + 0.5) * width).ln(), m.ln()))
        .collect();
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(samples.len()));
    }
    let (slope, intercept, residual) = least_squares(&samples);
    Ok(DecayReport { bin_edges, max_abs, fitted_n: -slope, intercept, residual, used_bins: samples.len() })
}

/// Slope, intercept and RMS residual of the straight-line fit.
pub(crate) fn least_squares(samples: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (samples.iter().map(|s| (s.1 - intercept - slope * s.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// Fit restricted to offsets `w − z` whose direction (taken modulo π) lies in
/// one sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDecay {
    /// Sector centre `kπ/sectors`, measured from the `x` axis.
    pub angle: f64,
    pub report: DecayReport,
}

/// [`decay_fit_with`] on `sectors` equal direction sectors. Sectors with too
/// few usable bins are skipped; the zero offset is counted in every sector.
pub fn directional_decay(field: &PhaseSpaceField, sectors: usize) -> Result<Vec<DirectionalDecay>> {
    if sectors == 0 {
        return Err(Error::InvalidArgument("need at least one sector".into()));
    }
    let width = field.lattice.alpha().max(field.lattice.beta());
    let span = PI / sectors as f64;
    let mut out = Vec::new();
    for k in 0..sectors {
        let centre = k as f64 * span;
        let keep = |dx: f64, dxi: f64| {
            if dx == 0.0 && dxi == 0.0 {
                return true;
            }
            let angle = dxi.atan2(dx).rem_euclid(PI);
            let off = (angle - centre).abs();
            off.min(PI - off) <= 0.5 * span
        };
        match decay_fit_with(field, width, keep) {
            Ok(report) => out.push(DirectionalDecay { angle: centre, report }),
            Err(Error::DegenerateFit(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
