//! Weyl quantization of symbols to dense matrices, and the quadratic-form
//! lower-bound tester.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_plan, weight_apply, Grid, GridFunction, WeightSide, WeightSpec};
use crate::operator::OperatorMatrix;
use crate::symbols::Symbol;

type C = Complex64;

/// How the pair `(x_j, x_l)` is assigned a midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantization {
    /// `(x_j + x_l)/2` for every pair.
    #[default]
    Midpoint,
    /// Quantization on the circle: the symbol is made `L`-periodic in `x`, and
    /// pairs about half a box apart blend the midpoint with its antipode, so
    /// that both arcs between `x_j` and `x_l` are treated alike.
    Torus,
    /// Midpoint along the shorter arc of the circle, wrapped into the box.
    /// This is the exact inverse of [`crate::propagator::extract_symbol`].
    Geodesic,
}

/// Smooth step from 0 (`u ≤ 0`) to 1 (`u ≥ 1`), flat to all orders at both ends.
fn smooth_step(u: f64) -> f64 {
    let f = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    let u = u.clamp(0.0, 1.0);
    let (a, b) = (f(u), f(1.0 - u));
    a / (a + b)
}

/// Width of the blending collar used by [`Quantization::Torus`].
fn collar(grid: &Grid) -> f64 {
    grid.length() / 8.0
}

/// `L`-periodic version of `sym` in `x`, agreeing with `sym` away from the
/// box boundary and blending `sym(x)` with `sym(x ∓ L)` across it.
pub fn periodized(sym: &Symbol, grid: &Grid) -> Symbol {
    let s = sym.clone();
    let len = grid.length();
    let half = 0.5 * len;
    let c = collar(grid);
    let f = move |t: f64, x: f64, xi: f64| {
        let x = (x + half).rem_euclid(len) - half;
        if x > half - c {
            let th = smooth_step((x - half + c) / (2.0 * c));
            (1.0 - th) * s.eval(t, x, xi) + th * s.eval(t, x - len, xi)
        } else if x < -half + c {
            let th = smooth_step((x + half + c) / (2.0 * c));
            th * s.eval(t, x, xi) + (1.0 - th) * s.eval(t, x + len, xi)
        } else {
            s.eval(t, x, xi)
        }
    };
    if sym.is_time_dependent() {
        Symbol::time_dependent(format!("periodic {}", sym.name()), f)
    } else {
        Symbol::stationary(format!("periodic {}", sym.name()), move |x, xi| f(0.0, x, xi))
    }
}

/// `G[k mod n] = (1/n) Σ_m e^{2πikm/n} a(mid, ξ_m)`, the kernel along one
/// anti-diagonal as a function of the index difference `k`.
fn diagonal_kernel(sym: &Symbol, t: f64, grid: &Grid, mid: f64) -> Vec<C> {
    let n = grid.n();
    let step = 2.0 * PI / grid.length();
    let half = (n / 2) as i64;
    let mut buf: Vec<C> = (0..n)
        .map(|k| {
            // raw FFT slot k carries signed frequency index m
            let m = if (k as i64) < half { k as i64 } else { k as i64 - n as i64 };
            sym.eval(t, mid, m as f64 * step)
        })
        .collect();
    fft_plan(n, false).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= inv);
    buf
}

/// Discretized `aʷ f(x) = (2π)^{-1} ∬ e^{i(x−y)ξ} a((x+y)/2, ξ) f(y) dy dξ`.
pub fn weyl_quantize(sym: &Symbol, t: f64, grid: &Grid) -> Result<OperatorMatrix> {
    weyl_quantize_with(sym, t, grid, Quantization::Midpoint)
}

pub fn weyl_quantize_with(sym: &Symbol, t: f64, grid: &Grid, rule: Quantization) -> Result<OperatorMatrix> {
    grid.require_line()?;
    if rule == Quantization::Geodesic {
        return geodesic_quantize(sym, t, grid);
    }
    let n = grid.n();
    let h = grid.spacing();
    let half_len = 0.5 * grid.length();
    let (sym, c) = match rule {
        Quantization::Midpoint | Quantization::Geodesic => (sym.clone(), 0.0),
        Quantization::Torus => (periodized(sym, grid), collar(grid)),
    };
    let diagonals: Vec<Vec<C>> = (0..2 * n - 1)
        .into_par_iter()
        .map(|s| {
            let mid = -half_len + 0.5 * s as f64 * h;
            let lo = s.saturating_sub(n - 1);
            let hi = s.min(n - 1);
            let near = diagonal_kernel(&sym, t, grid, mid);
            let far = match rule {
                Quantization::Torus if (hi - lo) as f64 * h > half_len - c => {
                    Some(diagonal_kernel(&sym, t, grid, mid + half_len))
                }
                _ => None,
            };
            (lo..=hi)
                .map(|j| {
                    let k = (2 * j as i64 - s as i64).rem_euclid(n as i64) as usize;
                    match &far {
                        None => near[k],
                        Some(far) => {
                            let dist = (2.0 * j as f64 - s as f64).abs() * h;
                            let w = smooth_step((dist - (half_len - c)) / (2.0 * c));
                            (1.0 - w) * near[k] + w * far[k]
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut entries = Array2::zeros((n, n));
    for (s, diag) in diagonals.iter().enumerate() {
        let lo = s.saturating_sub(n - 1);
        for (off, v) in diag.iter().enumerate() {
            let j = lo + off;
            entries[[j, s - j]] = *v;
        }
    }
    OperatorMatrix::new(*grid, entries)
}

/// Pairs `(j, l)` whose short-arc midpoint has half-step index `s`, with their `k`.
pub(crate) fn geodesic_pairs(s: usize, n: usize) -> impl Iterator<Item = (usize, usize, i64)> {
    let half = (n / 2) as i64;
    let (s, ni) = (s as i64, n as i64);
    (-half..half).filter(move |k| (k - s).rem_euclid(2) == 0).map(move |k| {
        let l = ((s - k) / 2).rem_euclid(ni);
        let j = (l + k).rem_euclid(ni);
        (j as usize, l as usize, k)
    })
}

fn geodesic_quantize(sym: &Symbol, t: f64, grid: &Grid) -> Result<OperatorMatrix> {
    let n = grid.n();
    let h = grid.spacing();
    let half_len = 0.5 * grid.length();
    let blocks: Vec<Vec<(usize, usize, C)>> = (0..2 * n)
        .into_par_iter()
        .map(|s| {
            let kernel = diagonal_kernel(sym, t, grid, -half_len + 0.5 * s as f64 * h);
            geodesic_pairs(s, n).map(|(j, l, k)| (j, l, kernel[k.rem_euclid(n as i64) as usize])).collect()
        })
        .collect();
    let mut entries = Array2::zeros((n, n));
    for (j, l, v) in blocks.into_iter().flatten() {
        entries[[j, l]] = v;
    }
    OperatorMatrix::new(*grid, entries)
}

/// Quantization of a real symbol with the Hermitian part enforced.
#[derive(Debug, Clone)]
pub struct HermitianQuantization {
    pub matrix: OperatorMatrix,
    /// `‖A − A*‖/‖A‖` before symmetrization.
    pub deviation: f64,
}

pub fn weyl_quantize_hermitian(sym: &Symbol, t: f64, grid: &Grid, rule: Quantization) -> Result<HermitianQuantization> {
    let raw = weyl_quantize_with(sym, t, grid, rule)?;
    let deviation = raw.hermitian_deviation();
    if deviation > 1e-10 {
        log::warn!("quantization of {} deviates from Hermitian by {deviation:.3e}", sym.name());
    }
    Ok(HermitianQuantization { matrix: raw.hermitian_part(), deviation })
}

/// `aʷ + i bʷ`, each part symmetrized.
pub fn generator_matrix(a: &Symbol, b: &Symbol, t: f64, grid: &Grid, rule: Quantization) -> Result<OperatorMatrix> {
    let am = weyl_quantize_hermitian(a, t, grid, rule)?.matrix;
    let bm = weyl_quantize_hermitian(b, t, grid, rule)?.matrix;
    Ok(am.add(&bm.scaled(C::i())))
}

/// `max −Re⟨E_k ℒu, E_k u⟩ / ‖E_k u‖²` over the battery and both weights
/// `E_k(D)`, `E_k(x)`, with `ℒ = aʷ + i bʷ`.
pub fn garding_constant(a: &Symbol, b: &Symbol, k: i32, t: f64, battery: &[GridFunction]) -> Result<f64> {
    let first = battery.first().ok_or_else(|| Error::InvalidArgument("empty battery".into()))?;
    let grid = *first.grid();
    for u in battery {
        if u.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        if u.l2_norm() == 0.0 {
            return Err(Error::ZeroNorm("battery member"));
        }
        u.check_support("battery member");
    }
    let m = generator_matrix(a, b, t, &grid, Quantization::Midpoint)?;
    garding_constant_for(&m, k, battery)
}

/// [`garding_constant`] for an already assembled generator.
pub fn garding_constant_for(m: &OperatorMatrix, k: i32, battery: &[GridFunction]) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for u in battery {
        let lu = m.apply(u);
        for side in [WeightSide::Frequency, WeightSide::Space] {
            let w = WeightSpec::new(k, side)?;
            let eu = weight_apply(u, w);
            let elu = weight_apply(&lu, w);
            let denom = eu.l2_norm().powi(2);
            if denom == 0.0 {
                return Err(Error::ZeroNorm("weighted battery member"));
            }
            worst = worst.max(-elu.inner(&eu).re / denom);
        }
    }
    Ok(worst)
}
