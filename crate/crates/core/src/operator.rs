//! Dense complex operators on grid samples, the matrix exponential, and the
//! `WOPM` binary format.

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: Grid,
    entries: Array2<C>,
}

impl OperatorMatrix {
    pub fn new(grid: Grid, entries: Array2<C>) -> Result<Self> {
        let n = grid.size();
        if entries.dim() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "operator of shape {:?} on a grid of {n} samples",
                entries.dim()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator matrix"));
        }
        Ok(Self { grid, entries })
    }

    pub fn identity(grid: Grid) -> Self {
        Self { grid, entries: Array2::eye(grid.size()) }
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.size();
        Self { grid, entries: Array2::zeros((n, n)) }
    }

    /// Diagonal multiplication by `f(x)`.
    pub fn multiplication(grid: Grid, f: impl Fn([f64; 2]) -> C) -> Self {
        let diag: Array1<C> = (0..grid.size()).map(|i| f(grid.point(i))).collect();
        Self { grid, entries: Array2::from_diag(&diag) }
    }

    /// Matrix whose columns are the images of the unit vectors under `op`.
    pub fn from_linear_map(grid: Grid, op: impl Fn(&GridFunction) -> GridFunction) -> Self {
        let n = grid.size();
        let mut entries = Array2::zeros((n, n));
        let mut e = GridFunction::zeros(grid);
        for j in 0..n {
            e.values_mut()[j] = ONE;
            let col = op(&e);
            entries.column_mut(j).assign(&Array1::from(col.values().to_vec()));
            e.values_mut()[j] = ZERO;
        }
        Self { grid, entries }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &Array2<C> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Array2<C> {
        &mut self.entries
    }

    pub fn into_entries(self) -> Array2<C> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        let v = Array1::from(f.values().to_vec());
        let out = self.entries.dot(&v);
        GridFunction::new(self.grid, out.to_vec()).expect("matrix product stays on the grid")
    }

    /// Applies the operator to every column of `block`.
    pub fn apply_block(&self, block: &Array2<C>) -> Array2<C> {
        self.entries.dot(block)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { grid: self.grid, entries: self.entries.dot(&other.entries) }
    }

    pub fn adjoint(&self) -> Self {
        Self { grid: self.grid, entries: self.entries.t().mapv(|v| v.conj()) }
    }

    pub fn scaled(&self, c: C) -> Self {
        Self { grid: self.grid, entries: &self.entries * c }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { grid: self.grid, entries: &self.entries + &other.entries }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { grid: self.grid, entries: &self.entries - &other.entries }
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A − B‖_F / ‖B‖_F` (absolute when `B = 0`).
    pub fn relative_distance(&self, reference: &Self) -> f64 {
        let diff = self.sub(reference).frobenius();
        let scale = reference.frobenius();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// `‖A − A*‖_F / ‖A‖_F`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.frobenius();
        if n == 0.0 {
            return 0.0;
        }
        self.sub(&self.adjoint()).frobenius() / n
    }

    /// `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        self.add(&self.adjoint()).scaled(C::new(0.5, 0.0))
    }

    /// `exp(c·A)`.
    pub fn exp_scaled(&self, c: C) -> Self {
        Self { grid: self.grid, entries: expm(&(&self.entries * c)) }
    }

    /// Largest `|λ|` of the operator, by power iteration from a fixed start.
    pub fn spectral_radius_estimate(&self, iterations: usize) -> f64 {
        let n = self.dim();
        let mut v = Array1::from_shape_fn(n, |i| C::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
        let norm = |v: &Array1<C>| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let n0 = norm(&v);
        v.mapv_inplace(|x| x / n0);
        let mut log_growth = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let w = self.entries.dot(&v);
            let nw = norm(&w);
            if nw == 0.0 || !nw.is_finite() {
                return if nw == 0.0 { 0.0 } else { f64::INFINITY };
            }
            log_growth.push(nw.ln());
            v = w.mapv(|x| x / nw);
        }
        // average over the second half to suppress transient and rotation effects
        let tail = &log_growth[iterations / 2..];
        (tail.iter().sum::<f64>() / tail.len() as f64).exp()
    }

    /// Writes the `WOPM` format: magic, then `d`, `n` (u64) and `L` (f64), all
    /// little-endian, then row-major `(re, im)` pairs.
    pub fn write_wopm<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"WOPM")?;
        w.write_all(&(self.grid.dim() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n() as u64).to_le_bytes())?;
        w.write_all(&self.grid.length().to_le_bytes())?;
        for v in self.entries.iter() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_wopm<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"WOPM" {
            return Err(Error::InvalidArgument("missing WOPM magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let d = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let length = f64::from_le_bytes(word);
        let grid = Grid::new(d, length, n)?;
        let size = grid.size();
        let mut entries = Array2::zeros((size, size));
        for v in entries.iter_mut() {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            *v = C::new(re, f64::from_le_bytes(word));
        }
        Self::new(grid, entries)
    }
}

fn one_norm(a: &Array2<C>) -> f64 {
    a.axis_iter(Axis(1)).map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

fn pade_coefficients(m: usize) -> Vec<f64> {
    match m {
        3 => vec![120.0, 60.0, 12.0, 1.0],
        5 => vec![30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => vec![17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => vec![
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => PADE13.to_vec(),
    }
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant
/// of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm(a: &Array2<C>) -> Array2<C> {
    let n = a.nrows();
    let eye: Array2<C> = Array2::eye(n);
    let norm = one_norm(a);
    if norm == 0.0 {
        return eye;
    }
    let a2 = a.dot(a);
    for &(m, theta) in &THETA {
        if norm <= theta {
            let b = pade_coefficients(m);
            // odd/even split with powers up to a^{m-1}
            let mut powers = vec![eye.clone(), a2.clone()];
            while powers.len() < (m + 1) / 2 {
                let next = powers.last().unwrap().dot(&a2);
                powers.push(next);
            }
            let mut u_inner: Array2<C> = Array2::zeros((n, n));
            let mut v: Array2<C> = Array2::zeros((n, n));
            for (k, p) in powers.iter().enumerate() {
                u_inner.scaled_add(C::new(b[2 * k + 1], 0.0), p);
                v.scaled_add(C::new(b[2 * k], 0.0), p);
            }
            let u = a.dot(&u_inner);
            return pade_solve(&u, &v);
        }
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scale = C::new(0.5f64.powi(s), 0.0);
    let a1 = a.mapv(|v| v * scale);
    let b = PADE13;
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let c = |k: usize| C::new(b[k], 0.0);
    let mut w1 = &a6 * c(13);
    w1.scaled_add(c(11), &a4);
    w1.scaled_add(c(9), &a2);
    let mut w2 = &a6 * c(7);
    w2.scaled_add(c(5), &a4);
    w2.scaled_add(c(3), &a2);
    w2.scaled_add(c(1), &eye);
    let u = a1.dot(&(a6.dot(&w1) + w2));
    let mut z1 = &a6 * c(12);
    z1.scaled_add(c(10), &a4);
    z1.scaled_add(c(8), &a2);
    let mut v = a6.dot(&z1);
    v.scaled_add(c(6), &a6);
    v.scaled_add(c(4), &a4);
    v.scaled_add(c(2), &a2);
    v.scaled_add(c(0), &eye);
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Solves `(V − U) R = (V + U)`.
fn pade_solve(u: &Array2<C>, v: &Array2<C>) -> Array2<C> {
    let p = v - u;
    let q = v + u;
    lu_solve(p, q).expect("Padé denominator is nonsingular for admissible norms")
}

/// Solves `A X = B` by LU factorization with partial pivoting, overwriting copies.
pub fn lu_solve(mut a: Array2<C>, mut b: Array2<C>) -> Result<Array2<C>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::InvalidArgument("lu_solve shape mismatch".into()));
    }
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, a[[i, k]].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            return Err(Error::InvalidArgument("singular matrix".into()));
        }
        if piv != k {
            for j in 0..n {
                a.swap([k, j], [piv, j]);
            }
            for j in 0..b.ncols() {
                b.swap([k, j], [piv, j]);
            }
        }
        let pivot = a[[k, k]];
        let (top, mut rest) = a.view_mut().split_at(Axis(0), k + 1);
        let row_k = top.slice(s![k, k + 1..]);
        let (btop, mut brest) = b.view_mut().split_at(Axis(0), k + 1);
        let brow_k = btop.row(k);
        for (mut row, mut brow) in rest.rows_mut().into_iter().zip(brest.rows_mut()) {
            let factor = row[k] / pivot;
            if factor == ZERO {
                continue;
            }
            row[k] = factor;
            row.slice_mut(s![k + 1..]).scaled_add(-factor, &row_k);
            brow.scaled_add(-factor, &brow_k);
        }
    }
    // back substitution
    for k in (0..n).rev() {
        let pivot = a[[k, k]];
        let (mut top, bottom) = b.view_mut().split_at(Axis(0), k + 1);
        for i in k + 1..n {
            let coef = a[[k, i]];
            if coef != ZERO {
                top.row_mut(k).scaled_add(-coef, &bottom.row(i - k - 1));
            }
        }
        top.row_mut(k).mapv_inplace(|v| v / pivot);
    }
    Ok(b)
}
