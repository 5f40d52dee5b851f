//! Phase-space shifts, the short-time Fourier transform and modulation-space
//! norms (smoothed frequency boxes, and mixed STFT norms).

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Grid, GridFunction};

type C = Complex64;

/// A point `z = (x, ξ)` of phase space (d = 1).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub xi: f64,
}

impl PhasePoint {
    pub const ORIGIN: Self = Self { x: 0.0, xi: 0.0 };

    pub fn new(x: f64, xi: f64) -> Self {
        Self { x, xi }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.xi)
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self.x - other.x).hypot(self.xi - other.xi)
    }
}

impl std::ops::Add for PhasePoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.xi + o.xi)
    }
}

impl std::ops::Sub for PhasePoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.xi - o.xi)
    }
}

impl std::ops::Neg for PhasePoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.xi)
    }
}

/// Result of [`phase_shift`]: the shifted function and the spatial shift that
/// was actually applied after rounding to the sample lattice.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub function: GridFunction,
    pub applied_x: f64,
    pub rounding: f64,
}

/// `π(z) f (y) = e^{iξy} f(y − x)`, translating by a whole number of samples
/// with periodic wraparound.
pub fn phase_shift(f: &GridFunction, z: PhasePoint) -> Result<Shifted> {
    let grid = *f.grid();
    grid.require_line()?;
    let n = grid.n() as i64;
    let steps = (z.x / grid.spacing()).round() as i64;
    let applied_x = steps as f64 * grid.spacing();
    let src = f.values();
    let values = (0..n)
        .map(|j| {
            let from = (j - steps).rem_euclid(n) as usize;
            let y = grid.x(j as usize);
            src[from] * C::from_polar(1.0, z.xi * y)
        })
        .collect();
    Ok(Shifted {
        function: GridFunction::new(grid, values)?,
        applied_x,
        rounding: applied_x - z.x,
    })
}

/// Periodic translation by an arbitrary `x` through the Fourier shift theorem.
pub fn translate_spectral(f: &GridFunction, x: f64) -> GridFunction {
    grid::apply_multiplier(f, |xi| C::from_polar(1.0, -x * xi[0]))
}

/// `π(z) f` with the translation done spectrally, so `z` need not sit on the
/// sample lattice. Exact for band-limited, numerically supported `f`.
pub fn phase_shift_spectral(f: &GridFunction, z: PhasePoint) -> GridFunction {
    translate_spectral(f, z.x).map(|p, v| v * C::from_polar(1.0, z.xi * p[0]))
}

/// `e^{-y²/2}` normalized in L².
pub fn gaussian_window(grid: Grid) -> GridFunction {
    let c = PI.powf(-0.25);
    GridFunction::from_real_fn(grid, |p| c * (-0.5 * p[0] * p[0]).exp())
}

/// Rectangular lattice `{(x_a, ξ_b)}` with optional disc restriction `|z| ≤ radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLattice {
    grid: Grid,
    alpha: f64,
    beta: f64,
    xs: Vec<f64>,
    xis: Vec<f64>,
    radius: Option<f64>,
    points: Vec<PhasePoint>,
}

fn symmetric_steps(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let kmin = (lo / step).ceil() as i64;
    let kmax = (hi / step).floor() as i64;
    (kmin..=kmax).map(|k| k as f64 * step).collect()
}

impl PhaseLattice {
    fn build(grid: Grid, alpha: f64, beta: f64, xs: Vec<f64>, xis: Vec<f64>, radius: Option<f64>) -> Result<Self> {
        grid.require_line()?;
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::InvalidArgument("lattice steps must be positive".into()));
        }
        if alpha * beta > 2.0 * PI {
            return Err(Error::InvalidArgument(format!(
                "lattice density αβ = {} exceeds 2π",
                alpha * beta
            )));
        }
        let mut points = Vec::with_capacity(xs.len() * xis.len());
        for &x in &xs {
            for &xi in &xis {
                let z = PhasePoint::new(x, xi);
                if radius.is_none_or(|r| z.norm() <= r + 1e-12) {
                    points.push(z);
                }
            }
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("lattice has no points".into()));
        }
        Ok(Self { grid, alpha, beta, xs, xis, radius, points })
    }

    /// Lattice covering the whole box and frequency band.
    pub fn covering(grid: Grid, alpha: f64, beta: f64) -> Result<Self> {
        let half = 0.5 * grid.length();
        let k = grid.nyquist();
        let xs = symmetric_steps(alpha, -half, half - 1e-9 * half);
        let xis = symmetric_steps(beta, -k, k - 1e-9 * k);
        Self::build(grid, alpha, beta, xs, xis, None)
    }

    /// Lattice points with `|z| ≤ radius`.
    pub fn disc(grid: Grid, alpha: f64, beta: f64, radius: f64) -> Result<Self> {
        if radius >= 0.5 * grid.length() || radius >= grid.nyquist() {
            return Err(Error::InvalidArgument(format!("radius {radius} leaves the grid ranges")));
        }
        let xs = symmetric_steps(alpha, -radius, radius);
        let xis = symmetric_steps(beta, -radius, radius);
        Self::build(grid, alpha, beta, xs, xis, Some(radius))
    }

    /// Lattice points with `|x| ≤ half_width` and `|ξ| ≤ half_width`.
    pub fn square(grid: Grid, alpha: f64, beta: f64, half_width: f64) -> Result<Self> {
        if half_width >= 0.5 * grid.length() || half_width >= grid.nyquist() {
            return Err(Error::InvalidArgument(format!("half width {half_width} leaves the grid ranges")));
        }
        let xs = symmetric_steps(alpha, -half_width, half_width);
        let xis = symmetric_steps(beta, -half_width, half_width);
        Self::build(grid, alpha, beta, xs, xis, None)
    }

    /// The sample set for Gabor matrices: steps `1/2`, `|x|, |ξ| ≤ L/4`.
    pub fn gabor_default(grid: Grid) -> Result<Self> {
        Self::square(grid, 0.5, 0.5, 0.25 * grid.length())
    }

    /// The default lattice: `α = β = 1/2` covering the grid.
    pub fn default_for(grid: Grid) -> Result<Self> {
        Self::covering(grid, 0.5, 0.5)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn xis(&self) -> &[f64] {
        &self.xis
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the lattice point equal to `z` (within rounding), if any.
    pub fn index_of(&self, z: PhasePoint) -> Option<usize> {
        let tol = 1e-9 * (1.0 + z.norm());
        self.points.iter().position(|p| p.dist(&z) < tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValues {
    /// One value per lattice point.
    Points(Vec<C>),
    /// Row `z`, column `w`.
    Pairs(Array2<C>),
}

/// Values indexed by lattice points or by pairs of lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField {
    pub lattice: PhaseLattice,
    pub values: FieldValues,
}

impl PhaseSpaceField {
    pub fn points(lattice: PhaseLattice, values: Vec<C>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidArgument("field length does not match lattice".into()));
        }
        Ok(Self { lattice, values: FieldValues::Points(values) })
    }

    pub fn pairs(lattice: PhaseLattice, values: Array2<C>) -> Result<Self> {
        let m = lattice.len();
        if values.dim() != (m, m) {
            return Err(Error::InvalidArgument("matrix field shape does not match lattice".into()));
        }
        Ok(Self { lattice, values: FieldValues::Pairs(values) })
    }

    pub fn as_points(&self) -> Option<&[C]> {
        match &self.values {
            FieldValues::Points(v) => Some(v),
            FieldValues::Pairs(_) => None,
        }
    }

    pub fn as_pairs(&self) -> Option<&Array2<C>> {
        match &self.values {
            FieldValues::Pairs(v) => Some(v),
            FieldValues::Points(_) => None,
        }
    }

    /// Value at lattice point `z`, for point fields.
    pub fn at(&self, z: PhasePoint) -> Option<C> {
        let i = self.lattice.index_of(z)?;
        self.as_points().map(|v| v[i])
    }

    /// CSV: `zx,zxi,re,im` for point fields, `zx,zxi,wx,wxi,abs` for matrices.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let pts = self.lattice.points();
        match &self.values {
            FieldValues::Points(v) => {
                w.write_record(["zx", "zxi", "re", "im"])?;
                for (z, val) in pts.iter().zip(v) {
                    w.write_record([z.x, z.xi, val.re, val.im].map(|x| x.to_string()))?;
                }
            }
            FieldValues::Pairs(m) => {
                w.write_record(["zx", "zxi", "wx", "wxi", "abs"])?;
                for (i, z) in pts.iter().enumerate() {
                    for (j, wp) in pts.iter().enumerate() {
                        w.write_record([z.x, z.xi, wp.x, wp.xi, m[[i, j]].norm()].map(|x| x.to_string()))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_window(g: &GridFunction) -> Result<()> {
    if g.l2_norm() == 0.0 {
        Err(Error::ZeroWindow)
    } else {
        Ok(())
    }
}

/// Conjugated shifted windows `conj(g(y − x_a))`, one row per `x_a`.
pub(crate) fn window_rows(g: &GridFunction, xs: &[f64]) -> Array2<C> {
    let n = g.grid().n();
    let mut rows = Array2::zeros((xs.len(), n));
    for (a, &x) in xs.iter().enumerate() {
        let shifted = translate_spectral(g, x);
        for (j, v) in shifted.values().iter().enumerate() {
            rows[[a, j]] = v.conj();
        }
    }
    rows
}

/// `e^{-iξ_b y_j}`, one column per `ξ_b`.
pub(crate) fn fourier_columns(grid: &Grid, xis: &[f64]) -> Array2<C> {
    Array2::from_shape_fn((grid.n(), xis.len()), |(j, b)| C::from_polar(1.0, -xis[b] * grid.x(j)))
}

/// `V_g f` on the full rectangle `xs × xis`, row `a`, column `b`.
pub(crate) fn stft_rect(f: &[C], windows: &Array2<C>, fourier: &Array2<C>, h: f64) -> Array2<C> {
    let fv = Array1::from(f.to_vec());
    let prod = windows * &fv.insert_axis(ndarray::Axis(0));
    prod.dot(fourier) * C::new(h, 0.0)
}

/// `V_g f(z) = ⟨f, π(z)g⟩` at every lattice point.
pub fn stft(f: &GridFunction, g: &GridFunction, lattice: &PhaseLattice) -> Result<PhaseSpaceField> {
    f.grid().require_line()?;
    if f.grid() != g.grid() || f.grid() != lattice.grid() {
        return Err(Error::GridMismatch);
    }
    check_window(g)?;
    let grid = *f.grid();
    let windows = window_rows(g, lattice.xs());
    let fourier = fourier_columns(&grid, lattice.xis());
    let rect = stft_rect(f.values(), &windows, &fourier, grid.spacing());
    let nb = lattice.xis().len();
    let values = lattice
        .points()
        .iter()
        .map(|z| {
            let a = nearest(lattice.xs(), z.x);
            let b = nearest(lattice.xis(), z.xi);
            rect[[a, b.min(nb - 1)]]
        })
        .collect();
    PhaseSpaceField::points(lattice.clone(), values)
}

fn nearest(values: &[f64], v: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Exponents of a weighted mixed norm; `f64::INFINITY` selects sup norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationNormSpec {
    pub p: f64,
    pub q: f64,
    pub s: f64,
}

impl ModulationNormSpec {
    pub fn new(p: f64, q: f64, s: f64) -> Result<Self> {
        if !(p >= 1.0 && q >= 1.0) {
            return Err(Error::InvalidArgument(format!("exponents p = {p}, q = {q} must be >= 1")));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight s = {s} must be finite and >= 0")));
        }
        Ok(Self { p, q, s })
    }

    pub fn l2() -> Self {
        Self { p: 2.0, q: 2.0, s: 0.0 }
    }
}

/// `(w Σ |v|^p)^{1/p}`, or `max |v|` for `p = ∞`.
pub(crate) fn lp_sum(values: impl Iterator<Item = f64>, p: f64, weight: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (weight * values.map(|v| v.powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

/// Bump `σ(ξ) = S(1 − |ξ|)` with the smoothstep `S(t) = 3t² − 2t³`; its
/// integer translates sum to one.
pub fn box_bump(xi: f64) -> f64 {
    let t = 1.0 - xi.abs();
    if t <= 0.0 {
        0.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

/// Integer box centers whose bumps meet the frequency band.
fn box_centers(grid: &Grid) -> std::ops::RangeInclusive<i64> {
    let k = grid.nyquist().ceil() as i64 + 1;
    -k..=k
}

/// `□_k f` for one box center.
pub fn box_component(f: &GridFunction, center: i64) -> GridFunction {
    let c = center as f64;
    grid::apply_multiplier(f, |xi| C::new(box_bump(xi[0] - c), 0.0))
}

/// `(Σ_k ⟨k⟩^{sq} ‖□_k f‖_{L^p}^q)^{1/q}`.
pub fn modulation_norm_boxes(f: &GridFunction, spec: ModulationNormSpec) -> Result<f64> {
    let grid = *f.grid();
    grid.require_line()?;
    let spectrum = grid::dft(f);
    let h = grid.spacing();
    let terms: Vec<f64> = box_centers(&grid)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let mut s = spectrum.clone();
            s.multiply(|xi| C::new(box_bump(xi[0] - k as f64), 0.0));
            let part = grid::idft(&s);
            let norm = lp_sum(part.values().iter().map(|v| v.norm()), spec.p, h);
            (1.0 + (k * k) as f64).powf(0.5 * spec.s) * norm
        })
        .collect();
    Ok(lp_sum(terms.into_iter(), spec.q, 1.0))
}

/// Mixed norm of `⟨ξ⟩^s V_g f` on `lattice`: inner `L^p` in `x`, outer `L^q` in `ξ`.
pub fn modulation_norm_stft_on(
    f: &GridFunction,
    g: &GridFunction,
    spec: ModulationNormSpec,
    lattice: &PhaseLattice,
) -> Result<f64> {
    f.grid().require_line()?;
    if f.grid() != g.grid() || f.grid() != lattice.grid() {
        return Err(Error::GridMismatch);
    }
    check_window(g)?;
    let grid = *f.grid();
    let windows = window_rows(g, lattice.xs());
    let fourier = fourier_columns(&grid, lattice.xis());
    let rect = stft_rect(f.values(), &windows, &fourier, grid.spacing());
    let inner: Vec<f64> = lattice
        .xis()
        .iter()
        .enumerate()
        .map(|(b, &xi)| {
            let col = rect.column(b);
            let w = (1.0 + xi * xi).powf(0.5 * spec.s);
            w * lp_sum(col.iter().map(|v| v.norm()), spec.p, lattice.alpha())
        })
        .collect();
    Ok(lp_sum(inner.into_iter(), spec.q, lattice.beta()))
}

/// [`modulation_norm_stft_on`] over the default covering lattice.
pub fn modulation_norm_stft(f: &GridFunction, g: &GridFunction, spec: ModulationNormSpec) -> Result<f64> {
    let lattice = PhaseLattice::default_for(*f.grid())?;
    modulation_norm_stft_on(f, g, spec, &lattice)
}
