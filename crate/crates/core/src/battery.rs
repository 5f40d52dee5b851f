//! Frozen, seeded families of test functions.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, GridFunction};

type C = Complex64;

pub const DEFAULT_SEED: u64 = 20240917;

/// `e^{-(x-c)²/(2w²)} e^{iξ0 x}`.
pub fn wave_packet(grid: Grid, center: f64, width: f64, freq: f64) -> GridFunction {
    GridFunction::from_fn(grid, |p| {
        let y = p[0] - center;
        C::from_polar((-0.5 * y * y / (width * width)).exp(), freq * p[0])
    })
}

/// Hermite function `H_k(x) e^{-x²/2}` (physicists' polynomials, unnormalized).
pub fn hermite_function(grid: Grid, k: usize) -> GridFunction {
    GridFunction::from_real_fn(grid, |p| {
        let x = p[0];
        let (mut h0, mut h1) = (1.0, 2.0 * x);
        let hk = match k {
            0 => h0,
            _ => {
                for i in 1..k {
                    let next = 2.0 * x * h1 - 2.0 * i as f64 * h0;
                    h0 = h1;
                    h1 = next;
                }
                h1
            }
        };
        hk * (-0.5 * x * x).exp()
    })
}

/// A Gaussian envelope times a few random plane waves with `|ξ| ≤ max_freq`.
pub fn random_bandlimited(grid: Grid, rng: &mut impl Rng, max_freq: f64) -> GridFunction {
    let center = rng.gen_range(-4.0..4.0);
    let width = rng.gen_range(0.8..2.5);
    let waves: Vec<(f64, C)> = (0..4)
        .map(|_| (rng.gen_range(-max_freq..max_freq), C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    GridFunction::from_fn(grid, |p| {
        let y = p[0] - center;
        let env = (-0.5 * y * y / (width * width)).exp();
        waves.iter().map(|(xi, c)| c * C::from_polar(env, xi * p[0])).sum()
    })
}

/// Twelve functions: Gaussians at three widths and two centers, two modulated
/// Gaussians, two Hermite functions, two random band-limited functions.
pub fn garding_battery(grid: Grid, seed: u64) -> Vec<GridFunction> {
    let mut out = Vec::with_capacity(12);
    for &w in &[0.7, 1.0, 1.5] {
        for &c in &[0.0, -2.0] {
            out.push(wave_packet(grid, c, w, 0.0));
        }
    }
    out.push(wave_packet(grid, 0.0, 1.0, 3.0));
    out.push(wave_packet(grid, 1.0, 1.0, -5.0));
    out.push(hermite_function(grid, 1));
    out.push(hermite_function(grid, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.push(random_bandlimited(grid, &mut rng, 6.0));
    out.push(random_bandlimited(grid, &mut rng, 6.0));
    out
}

/// `count` random band-limited functions with frequencies up to 8.
pub fn norm_battery(grid: Grid, seed: u64, count: usize) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_bandlimited(grid, &mut rng, 8.0)).collect()
}
