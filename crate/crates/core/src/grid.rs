//! Periodic sampled functions on the box `[-L/2, L/2)^d`, the Fourier transform
//! with the `∫ e^{-ixξ} f(x) dx` normalization, spectral derivatives and the
//! polynomial weights `(1-Δ)^k`, `(1+|x|²)^k`.

use std::cell::RefCell;
use std::io::Write;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples closer than this fraction of `L` to the boundary must be negligible.
pub const COLLAR_FRACTION: f64 = 0.125;
/// Threshold below which boundary samples count as zero.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    length: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, length: f64, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {length} must be positive")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} must be a power of two >= 8")));
        }
        Ok(Self { dim, length, n })
    }

    pub fn line(length: f64, n: usize) -> Result<Self> {
        Self::new(1, length, n)
    }

    /// The default working size: d = 1, L = 40, n = 512.
    pub fn desk() -> Self {
        Self { dim: 1, length: 40.0, n: 512 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Samples per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of samples, `n^d`.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn freq_step(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Half-width of the frequency band, `πn/L`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.length
    }

    /// Spatial coordinate of sample `j` along one axis.
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Frequency of spectral slot `m` along one axis (symmetric order, Nyquist first).
    pub fn xi(&self, m: usize) -> f64 {
        (m as f64 - (self.n / 2) as f64) * self.freq_step()
    }

    pub fn axis_points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn axis_frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.xi(m)).collect()
    }

    /// Per-axis indices of a flat row-major index.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    /// Coordinates of flat sample `idx` (second entry unused when d = 1).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unravel(idx);
        match self.dim {
            1 => [self.x(i), 0.0],
            _ => [self.x(i), self.x(j)],
        }
    }

    /// Frequency of flat spectral slot `idx`.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unravel(idx);
        match self.dim {
            1 => [self.xi(i), 0.0],
            _ => [self.xi(i), self.xi(j)],
        }
    }

    /// Volume element `h^d`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Frequency volume element `(2π/L)^d (2π)^{-d} = L^{-d}`.
    pub fn freq_cell(&self) -> f64 {
        self.length.powi(-(self.dim as i32))
    }

    /// The same box with twice as many samples per axis.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n, ..*self }
    }

    pub(crate) fn require_line(&self) -> Result<()> {
        if self.dim == 1 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension(self.dim))
        }
    }
}

/// Complex samples on a [`Grid`], in spatial order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
}

/// Samples of `f̂` on the symmetric frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.size(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.size()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.size()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_fn(grid, |p| Complex64::new(f(p), 0.0))
    }

    /// `e^{-|x - center|²/2}`.
    pub fn gaussian(grid: Grid, center: [f64; 2]) -> Self {
        Self::from_real_fn(grid, |p| {
            let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            (-0.5 * r2).exp()
        })
    }

    /// Discrete delta at the sample nearest the origin, height `h^{-d}`.
    pub fn delta(grid: Grid) -> Self {
        let mut f = Self::zeros(grid);
        let mid = grid.n() / 2;
        let idx = if grid.dim() == 1 { mid } else { mid * grid.n() + mid };
        f.values[idx] = Complex64::new(1.0 / grid.cell(), 0.0);
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn([f64; 2], Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.point(i), v))
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Discrete `⟨f, g⟩ = h^d Σ f ḡ`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s * self.grid.cell()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest modulus within `L/8` of the box boundary.
    pub fn boundary_mass(&self) -> f64 {
        let collar = COLLAR_FRACTION * self.grid.length;
        let half = 0.5 * self.grid.length;
        let near = |c: f64| c < -half + collar || c >= half - collar;
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let p = self.grid.point(*i);
                near(p[0]) || (self.grid.dim == 2 && near(p[1]))
            })
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_numerically_supported(&self) -> bool {
        self.boundary_mass() < SUPPORT_TOL
    }

    /// Logs a warning when the function is not negligible near the boundary.
    pub fn check_support(&self, what: &str) -> bool {
        let mass = self.boundary_mass();
        if mass >= SUPPORT_TOL {
            log::warn!("{what} is not numerically supported: boundary modulus {mass:.3e}");
            false
        } else {
            true
        }
    }

    /// CSV with columns `index,x,re,im` (or `index,x,y,re,im` in 2-d).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.grid.dim == 1 {
            w.write_record(["index", "x", "re", "im"])?;
        } else {
            w.write_record(["index", "x", "y", "re", "im"])?;
        }
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            let mut row = vec![i.to_string(), p[0].to_string()];
            if self.grid.dim == 2 {
                row.push(p[1].to_string());
            }
            row.push(v.re.to_string());
            row.push(v.im.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: Self) -> GridFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: Self) -> GridFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Spectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Applies `values[m] *= mult(ξ_m)`.
    pub fn multiply(&mut self, mult: impl Fn([f64; 2]) -> Complex64) {
        let grid = self.grid;
        for (i, v) in self.values.iter_mut().enumerate() {
            *v *= mult(grid.frequency(i));
        }
    }

    /// `(2π)^{-d} ∫ |f̂|² dξ` by the rectangle rule.
    pub fn l2_norm_sqr(&self) -> f64 {
        self.grid.freq_cell() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Unnormalized in-place FFT along every axis of a row-major `n^d` array.
fn fft_nd(values: &mut [Complex64], grid: &Grid, forward: bool) {
    let n = grid.n;
    let plan = fft_plan(n, forward);
    plan.process(values);
    if grid.dim == 2 {
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = values[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                values[i * n + j] = col[i];
            }
        }
    }
}

fn sign(m: usize, n: usize) -> f64 {
    // (-1)^(m - n/2)
    if (m + n / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Symmetric slot of raw FFT bin `k`, per axis.
fn slot_of_bin(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

/// Flat permutation between raw FFT order and symmetric order, with the
/// `(-1)^m` phase from the box offset.
fn reorder(values: &[Complex64], grid: &Grid, to_symmetric: bool, scale: f64) -> Vec<Complex64> {
    let n = grid.n;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for (idx, &v) in values.iter().enumerate() {
        let [a, b] = grid.unravel(idx);
        let (sa, sb) = if to_symmetric {
            (slot_of_bin(a, n), if grid.dim == 2 { slot_of_bin(b, n) } else { 0 })
        } else {
            (a, b)
        };
        let mut s = sign(sa, n);
        if grid.dim == 2 {
            s *= sign(sb, n);
        }
        let target = if to_symmetric {
            if grid.dim == 1 { sa } else { sa * n + sb }
        } else {
            // a, b are symmetric slots; raw bin is the inverse shift
            let ra = slot_of_bin(a, n);
            if grid.dim == 1 { ra } else { ra * n + slot_of_bin(b, n) }
        };
        out[target] = v * (s * scale);
    }
    out
}

/// `f̂(ξ_m) ≈ ∫ e^{-ixξ_m} f(x) dx` by the rectangle rule.
pub fn dft(f: &GridFunction) -> Spectrum {
    let grid = f.grid;
    let mut buf = f.values.clone();
    fft_nd(&mut buf, &grid, true);
    Spectrum { grid, values: reorder(&buf, &grid, true, grid.cell()) }
}

/// Inverse of [`dft`]: `f(x_j) = (2π)^{-d} Σ_m f̂(ξ_m) e^{ix_jξ_m} (2π/L)^d`.
pub fn idft(s: &Spectrum) -> GridFunction {
    let grid = s.grid;
    let mut buf = reorder(&s.values, &grid, false, grid.freq_cell());
    fft_nd(&mut buf, &grid, false);
    GridFunction { grid, values: buf }
}

pub fn spectrum_from_values(grid: Grid, values: Vec<Complex64>) -> Result<Spectrum> {
    if values.len() != grid.size() {
        return Err(Error::InvalidArgument("spectrum length mismatch".into()));
    }
    Ok(Spectrum { grid, values })
}

/// `idft(mult · dft(f))`.
pub fn apply_multiplier(f: &GridFunction, mult: impl Fn([f64; 2]) -> Complex64) -> GridFunction {
    let mut s = dft(f);
    s.multiply(mult);
    idft(&s)
}

/// `∂^α f` computed spectrally; `alpha` has one entry per axis.
pub fn spectral_derivative(f: &GridFunction, alpha: &[u32]) -> Result<GridFunction> {
    let d = f.grid.dim;
    if alpha.len() != d {
        return Err(Error::InvalidArgument(format!("multi-index of length {} for d = {d}", alpha.len())));
    }
    let order: u32 = alpha.iter().sum();
    if order > 16 {
        return Err(Error::InvalidArgument(format!("derivative order {order} exceeds 16")));
    }
    if order == 0 {
        return Ok(f.clone());
    }
    let i = Complex64::i();
    Ok(apply_multiplier(f, |xi| {
        alpha.iter().enumerate().map(|(ax, &a)| (i * xi[ax]).powu(a)).product()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSide {
    Frequency,
    Space,
}

/// `E_k(D) = (1-Δ)^k` or `E_k(x) = (1+|x|²)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub k: i32,
    pub side: WeightSide,
}

impl WeightSpec {
    pub fn new(k: i32, side: WeightSide) -> Result<Self> {
        if k.abs() > 8 {
            return Err(Error::InvalidArgument(format!("weight order {k} exceeds 8")));
        }
        Ok(Self { k, side })
    }
}

fn japanese_pow(v: [f64; 2], k: i32) -> f64 {
    (1.0 + v[0] * v[0] + v[1] * v[1]).powi(k)
}

pub fn weight_apply(f: &GridFunction, w: WeightSpec) -> GridFunction {
    if w.k == 0 {
        return f.clone();
    }
    match w.side {
        WeightSide::Frequency => {
            apply_multiplier(f, |xi| Complex64::new(japanese_pow(xi, w.k), 0.0))
        }
        WeightSide::Space => f.map(|x, v| v * japanese_pow(x, w.k)),
    }
}

/// `(‖E_k(D) f‖² + ‖E_k(x) f‖²)^{1/2}`.
///
/// The second term is `‖f̂‖_{H^{2k}}` divided by the Plancherel factor
/// `(2π)^{d/2}`, so both halves are measured in the same L² units and
/// `k = 0` returns exactly `√2 ‖f‖`.
pub fn sobolev_q_norm(f: &GridFunction, k: u32) -> f64 {
    let k = k as i32;
    let freq = weight_apply(f, WeightSpec { k, side: WeightSide::Frequency }).l2_norm();
    let space = weight_apply(f, WeightSpec { k, side: WeightSide::Space }).l2_norm();
    (freq * freq + space * space).sqrt()
}
