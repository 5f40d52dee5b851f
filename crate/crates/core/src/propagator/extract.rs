use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{fft_plan, Grid};
use crate::operator::OperatorMatrix;
use crate::symbols::Symbol;
use crate::weyl::geodesic_pairs;

type C = Complex64;

/// Lagrange weights at offsets ±1, ±3, ±5 for the value at 0.
const MIDPOINT_WEIGHTS: [(i64, f64); 6] = [
    (-5, 3.0 / 256.0),
    (-3, -25.0 / 256.0),
    (-1, 150.0 / 256.0),
    (1, 150.0 / 256.0),
    (3, -25.0 / 256.0),
    (5, 3.0 / 256.0),
];

/// Weyl symbol sampled at the half-step midpoints `−L/2 + s h/2`,
/// `s ∈ [0, 2n)`, and the grid frequencies in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    grid: Grid,
    values: Array2<C>,
}

impl SymbolTable {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Row `s` (midpoint), column `m` (frequency slot).
    pub fn values(&self) -> &Array2<C> {
        &self.values
    }

    pub fn midpoint(&self, s: usize) -> f64 {
        -0.5 * self.grid.length() + 0.5 * s as f64 * self.grid.spacing()
    }

    /// Value at the nearest table node, periodic in both variables.
    pub fn lookup(&self, x: f64, xi: f64) -> C {
        let n = self.grid.n() as i64;
        let s = ((x + 0.5 * self.grid.length()) / (0.5 * self.grid.spacing())).round() as i64;
        let m = (xi / self.grid.freq_step()).round() as i64 + n / 2;
        self.values[[s.rem_euclid(2 * n) as usize, m.rem_euclid(n) as usize]]
    }

    /// The table as a time-independent [`Symbol`] by nearest-node lookup.
    pub fn symbol(&self) -> Symbol {
        let table = Arc::new(self.clone());
        Symbol::stationary("extracted", move |x, xi| table.lookup(x, xi))
    }

    /// CSV with columns `x,xi,re,im`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "xi", "re", "im"])?;
        for ((s, m), v) in self.values.indexed_iter() {
            w.write_record([self.midpoint(s), self.grid.xi(m), v.re, v.im].map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inverse Weyl transform `p(x, ξ) = Σ_k K(x + kh/2, x − kh/2) e^{−ikhξ}`
/// (entries already carry the factor `h`) along the short arc of the circle.
///
/// For a midpoint index `s` only offsets `k` of the parity of `s` are
/// sampled; the others are interpolated along `s` from neighbouring
/// midpoints. Quantizing the table with [`crate::weyl::Quantization::Geodesic`]
/// reproduces `op` exactly.
pub fn extract_symbol(op: &OperatorMatrix) -> Result<SymbolTable> {
    let grid = *op.grid();
    grid.require_line()?;
    let n = grid.n();
    let entries = op.entries();
    // F[s][k mod n], filled at the sampled parity
    let mut kernel = Array2::<C>::zeros((2 * n, n));
    for s in 0..2 * n {
        for (j, l, k) in geodesic_pairs(s, n) {
            kernel[[s, k.rem_euclid(n as i64) as usize]] = entries[[j, l]];
        }
    }
    let half = (n / 2) as i64;
    let rows: Vec<Vec<C>> = (0..2 * n)
        .into_par_iter()
        .map(|s| {
            let mut buf = vec![C::new(0.0, 0.0); n];
            for k in -half..half {
                let slot = k.rem_euclid(n as i64) as usize;
                buf[slot] = if (k - s as i64).rem_euclid(2) == 0 {
                    kernel[[s, slot]]
                } else {
                    MIDPOINT_WEIGHTS
                        .iter()
                        .map(|&(o, w)| w * kernel[[(s as i64 + o).rem_euclid(2 * n as i64) as usize, slot]])
                        .sum()
                };
            }
            fft_plan(n, true).process(&mut buf);
            // frequency slot m' carries signed index m' − n/2
            (0..n).map(|m| buf[(m as i64 - half).rem_euclid(n as i64) as usize]).collect()
        })
        .collect();
    let values = Array2::from_shape_fn((2 * n, n), |(s, m)| rows[s][m]);
    Ok(SymbolTable { grid, values })
}
