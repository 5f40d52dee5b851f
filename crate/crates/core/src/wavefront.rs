//! Global (Gabor) wave front sets: conic decay of the STFT, non-characteristic
//! symbols, and the pseudolocality of evolution operators.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::propagator::{least_squares, solve_linear, EvolutionProblem};
use crate::symbols::{gamma_seminorm, PhaseSampling, Symbol};
use crate::tfa::{phase_shift_spectral, PhasePoint};

pub const DEFAULT_ANGULAR_N: usize = 32;
pub const DEFAULT_THRESHOLD: f64 = 4.0;
/// Lower bound `c` in the non-characteristic test.
pub const DEFAULT_NONCHAR_FLOOR: f64 = 1e-3;
const RADII: usize = 16;
/// Angular samples across a cone, including both edges.
const CONE_SAMPLES: usize = 5;
/// STFT moduli below this are treated as zero.
const DECAY_FLOOR: f64 = 1e-13;

/// `V_{z0,ε} = { z : |z/|z| − z0/|z0|| < ε, |z| > 1/ε }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    axis: PhasePoint,
    eps: f64,
}

impl Cone {
    pub fn new(z0: PhasePoint, eps: f64) -> Result<Self> {
        let r = z0.norm();
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument("cone axis must be a nonzero point".into()));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidArgument(format!("cone parameter ε = {eps} must lie in (0, 1)")));
        }
        Ok(Self { axis: PhasePoint::new(z0.x / r, z0.xi / r), eps })
    }

    /// Unit vector along the axis.
    pub fn axis(&self) -> PhasePoint {
        self.axis
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn contains(&self, z: PhasePoint) -> bool {
        let r = z.norm();
        r > 1.0 / self.eps && PhasePoint::new(z.x / r, z.xi / r).dist(&self.axis) < self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoncharReport {
    pub noncharacteristic: bool,
    /// `min |sym| / (1 + |x| + |ξ|)^m` over the samples in the cone.
    pub margin: f64,
    pub samples: usize,
}

/// Whether `sym` is bounded below by `floor · (1 + |x| + |ξ|)^m` on the
/// sampled part of the cone.
pub fn noncharacteristic_test(
    sym: &Symbol,
    m: f64,
    cone: &Cone,
    sampling: &PhaseSampling,
    floor: f64,
) -> Result<NoncharReport> {
    let class = gamma_seminorm(sym, m, 0, sampling)?;
    if !class.seminorm(0).is_finite() {
        return Err(Error::NonFinite("symbol samples"));
    }
    let mut margin = f64::INFINITY;
    let mut samples = 0;
    for &x in &sampling.xs {
        for &xi in &sampling.xis {
            if cone.contains(PhasePoint::new(x, xi)) {
                samples += 1;
                margin = margin.min(sym.eval(0.0, x, xi).norm() / (1.0 + x.abs() + xi.abs()).powf(m));
            }
        }
    }
    if samples == 0 {
        return Err(Error::EmptyCone);
    }
    Ok(NoncharReport { noncharacteristic: margin >= floor, margin, samples })
}

/// Settings of [`estimate_wavefront`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavefrontParams {
    pub angular_n: usize,
    pub threshold: f64,
    /// Radial fit range; `None` means `L/16` and `L/4`.
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
}

impl Default for WavefrontParams {
    fn default() -> Self {
        Self { angular_n: DEFAULT_ANGULAR_N, threshold: DEFAULT_THRESHOLD, r_min: None, r_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionFit {
    /// Angle from the positive `x` axis in `[0, 2π)`.
    pub angle: f64,
    /// `−slope` of `ln max|V_g f|` against `ln r`; infinite when the STFT
    /// vanishes on all but two radii.
    pub exponent: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavefrontEstimate {
    pub directions: Vec<DirectionFit>,
    pub radii: Vec<f64>,
    pub threshold: f64,
}

impl WavefrontEstimate {
    pub fn angular_n(&self) -> usize {
        self.directions.len()
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.directions.len()).filter(|&k| self.directions[k].member).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.iter().all(|d| !d.member)
    }

    /// Direction cells of `self` further than `cells` from every member of `other`.
    pub fn outside(&self, other: &WavefrontEstimate, cells: usize) -> Vec<usize> {
        let n = self.angular_n();
        let theirs = other.members();
        self.members()
            .into_iter()
            .filter(|&k| !theirs.iter().any(|&j| cell_distance(k, j, n) <= cells))
            .collect()
    }

    /// CSV with columns `angle,exponent,member`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["angle", "exponent", "member"])?;
        for d in &self.directions {
            w.write_record([d.angle.to_string(), d.exponent.to_string(), u8::from(d.member).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Distance between two cells on the circle of `n` cells.
pub fn cell_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// Dilation followed by erosion on the circle: fills isolated gaps.
fn close_cyclic(flags: &[bool]) -> Vec<bool> {
    let n = flags.len();
    let at = |v: &[bool], k: usize, o: isize| v[(k as isize + o).rem_euclid(n as isize) as usize];
    let dilated: Vec<bool> = (0..n).map(|k| at(flags, k, -1) || flags[k] || at(flags, k, 1)).collect();
    if dilated.iter().all(|&b| b) {
        return flags.to_vec();
    }
    (0..n).map(|k| at(&dilated, k, -1) && dilated[k] && at(&dilated, k, 1)).collect()
}

fn stft_at(f: &GridFunction, g: &GridFunction, z: PhasePoint) -> f64 {
    f.inner(&phase_shift_spectral(g, z)).norm()
}

/// Marks the directions `θ_k = 2πk/angular_n` along which `|V_g f|` decays
/// slower than `r^{−threshold}` over the radial range; the maximum is taken
/// over the cone of aperture `2/angular_n` at each radius.
pub fn estimate_wavefront(f: &GridFunction, g: &GridFunction, params: &WavefrontParams) -> Result<WavefrontEstimate> {
    let grid = *f.grid();
    grid.require_line()?;
    if g.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if params.angular_n < 16 {
        return Err(Error::InvalidArgument(format!("angular_n = {} must be at least 16", params.angular_n)));
    }
    let r_min = params.r_min.unwrap_or(grid.length() / 16.0);
    let r_max = params.r_max.unwrap_or(grid.length() / 4.0);
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::DegenerateFit(0));
    }
    let radii: Vec<f64> = (0..RADII).map(|i| r_min * (r_max / r_min).powf(i as f64 / (RADII - 1) as f64)).collect();
    let n = params.angular_n;
    let aperture = 2.0 / n as f64;
    let exponents: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let samples: Vec<(f64, f64)> = radii
                .iter()
                .filter_map(|&r| {
                    let peak = (0..CONE_SAMPLES)
                        .map(|a| {
                            let phi = theta + aperture * (2.0 * a as f64 / (CONE_SAMPLES - 1) as f64 - 1.0);
                            stft_at(f, g, PhasePoint::new(r * phi.cos(), r * phi.sin()))
                        })
                        .fold(0.0, f64::max);
                    (peak > DECAY_FLOOR).then(|| (r.ln(), peak.ln()))
                })
                .collect();
            if samples.len() < 3 {
                f64::INFINITY
            } else {
                -least_squares(&samples).0
            }
        })
        .collect();
    let raw: Vec<bool> = exponents.iter().map(|&e| e < params.threshold).collect();
    let member = close_cyclic(&raw);
    let directions = (0..n)
        .map(|k| DirectionFit { angle: 2.0 * PI * k as f64 / n as f64, exponent: exponents[k], member: member[k] })
        .collect();
    Ok(WavefrontEstimate { directions, radii, threshold: params.threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudolocalityReport {
    pub contained: bool,
    pub initial: WavefrontEstimate,
    pub evolved: WavefrontEstimate,
    /// Cells of the evolved estimate further than one cell from the initial one.
    pub escaped: Vec<usize>,
}

/// Compares the estimates of `f` and `S(t, 0) f`.
pub fn pseudolocality_check(
    prob: &EvolutionProblem,
    t: f64,
    f: &GridFunction,
    g: &GridFunction,
    params: &WavefrontParams,
) -> Result<PseudolocalityReport> {
    let evolved_f = solve_linear(prob, f, 0.0, t)?.last().clone();
    let initial = estimate_wavefront(f, g, params)?;
    let evolved = estimate_wavefront(&evolved_f, g, params)?;
    let escaped = evolved.outside(&initial, 1);
    Ok(PseudolocalityReport { contained: escaped.is_empty(), initial, evolved, escaped })
}
