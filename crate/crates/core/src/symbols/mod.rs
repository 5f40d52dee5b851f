//! Time-dependent phase-space symbols `a(t, x, ξ)`, finite-difference seminorm
//! estimates, shifts `a_z`, and the analytic-coefficient bounds.

mod expr;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tfa::PhasePoint;

pub use expr::Expression;

type C = Complex64;

pub type SymbolFn = dyn Fn(f64, f64, f64) -> C + Send + Sync;

/// Declared membership, informational only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SymbolClass {
    /// Derivatives of total order `>= k` bounded.
    BoundedFrom { k: u32 },
    /// `(1+|x|+|ξ|)^{m-|α|-|β|}` growth.
    Gamma { m: f64 },
    /// Bounded ξ-derivatives and factorially bounded x-derivatives.
    AnalyticType,
}

#[derive(Clone)]
pub struct Symbol {
    name: String,
    eval: Arc<SymbolFn>,
    class: Option<SymbolClass>,
    time_dependent: bool,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

/// `σ(x) = (1 + tanh x)/2`.
pub fn degenerate_profile(x: f64) -> f64 {
    0.5 * (1.0 + x.tanh())
}

impl Symbol {
    /// Time-independent symbol from `(x, ξ) ↦ value`.
    pub fn stationary(name: impl Into<String>, f: impl Fn(f64, f64) -> C + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(move |_, x, xi| f(x, xi)), class: None, time_dependent: false }
    }

    pub fn real(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::stationary(name, move |x, xi| C::new(f(x, xi), 0.0))
    }

    pub fn time_dependent(name: impl Into<String>, f: impl Fn(f64, f64, f64) -> C + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(f), class: None, time_dependent: true }
    }

    pub fn constant(c: f64) -> Self {
        Self::real(format!("{c}"), move |_, _| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Real symbol from an expression in `t`, `x`, `xi`.
    pub fn parse(source: &str) -> Result<Self> {
        let e = Expression::parse(source)?;
        let time_dependent = source.split(|c: char| !c.is_alphanumeric() && c != '_').any(|tok| tok == "t");
        let name = source.to_string();
        Ok(Self {
            name,
            eval: Arc::new(move |t, x, xi| C::new(e.eval(t, x, xi), 0.0)),
            class: None,
            time_dependent,
        })
    }

    /// Built-in symbols by name, or an expression when no name matches.
    pub fn named_or_parse(spec: &str) -> Result<Self> {
        match builtin(spec) {
            Some(s) => Ok(s),
            None => Self::parse(spec),
        }
    }

    pub fn with_class(mut self, class: SymbolClass) -> Self {
        self.class = Some(class);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> Option<SymbolClass> {
        self.class
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, xi: f64) -> C {
        (self.eval)(t, x, xi)
    }

    pub fn add(&self, other: &Symbol) -> Symbol {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Symbol {
            name: format!("{} + {}", self.name, other.name),
            eval: Arc::new(move |t, x, xi| a(t, x, xi) + b(t, x, xi)),
            class: None,
            time_dependent: self.time_dependent || other.time_dependent,
        }
    }

    pub fn scale(&self, c: C) -> Symbol {
        let a = self.eval.clone();
        Symbol {
            name: format!("({c})·{}", self.name),
            eval: Arc::new(move |t, x, xi| c * a(t, x, xi)),
            class: self.class,
            time_dependent: self.time_dependent,
        }
    }

    /// `a + i b`.
    pub fn generator(a: &Symbol, b: &Symbol) -> Symbol {
        a.add(&b.scale(C::i()))
    }

    /// `(t, x, ξ) ↦ self(t, x + x0, ξ + ξ0)`.
    pub fn shifted(&self, z: PhasePoint) -> Symbol {
        let a = self.eval.clone();
        Symbol {
            name: format!("{}@({}, {})", self.name, z.x, z.xi),
            eval: Arc::new(move |t, x, xi| a(t, x + z.x, xi + z.xi)),
            class: self.class,
            time_dependent: self.time_dependent,
        }
    }
}

/// `a_z(t, x, ξ) = a(t, x + x0, ξ + ξ0)`.
pub fn shift_symbol(sym: &Symbol, z: PhasePoint) -> Symbol {
    sym.shifted(z)
}

/// Named symbols available to configurations.
pub fn builtin(name: &str) -> Option<Symbol> {
    use SymbolClass::*;
    Some(match name {
        "zero" => Symbol::zero(),
        "one" => Symbol::constant(1.0),
        "heat" | "schrodinger_b" => Symbol::real(name, |_, xi| xi * xi).with_class(BoundedFrom { k: 2 }),
        "drift" => Symbol::real(name, |_, xi| xi).with_class(BoundedFrom { k: 1 }),
        "degenerate_diffusion" => {
            Symbol::real(name, |x, xi| degenerate_profile(x) * xi * xi).with_class(BoundedFrom { k: 2 })
        }
        "potential_well" => {
            let s = |x: f64| x.sin();
            Symbol::real(name, move |x, _| s(x) * s(x)).with_class(AnalyticType)
        }
        "chirp_b" => Symbol::real(name, |x, _| x * x),
        "position" => Symbol::real(name, |x, _| x),
        "frequency" => Symbol::real(name, |_, xi| xi),
        _ => return None,
    })
}

/// Phase-space sample set and finite-difference steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSampling {
    pub xs: Vec<f64>,
    pub xis: Vec<f64>,
    pub step_x: f64,
    pub step_xi: f64,
    /// Fourth-order Richardson extrapolation of the central differences.
    pub richardson: bool,
}

impl PhaseSampling {
    /// Grid points × frequency samples, differences at the sample spacings.
    pub fn from_grid(grid: &Grid) -> Self {
        Self {
            xs: grid.axis_points(),
            xis: grid.axis_frequencies(),
            step_x: grid.spacing(),
            step_xi: grid.freq_step(),
            richardson: false,
        }
    }

    /// Every `stride`-th sample per axis.
    pub fn strided(mut self, stride: usize) -> Self {
        let stride = stride.max(1);
        self.xs = self.xs.into_iter().step_by(stride).collect();
        self.xis = self.xis.into_iter().step_by(stride).collect();
        self
    }

    pub fn with_richardson(mut self) -> Self {
        self.richardson = true;
        self
    }

    /// Samples at least `margin` sample steps inside each end, so that
    /// stencils stay inside the sampled box.
    fn interior(&self, margin: usize) -> (Vec<f64>, Vec<f64>) {
        let x_lo = self.xs.first().copied().unwrap_or(0.0) + margin as f64 * self.step_x;
        let x_hi = self.xs.last().copied().unwrap_or(0.0) - margin as f64 * self.step_x;
        let k_lo = self.xis.first().copied().unwrap_or(0.0) + margin as f64 * self.step_xi;
        let k_hi = self.xis.last().copied().unwrap_or(0.0) - margin as f64 * self.step_xi;
        let eps = 1e-9;
        (
            self.xs.iter().copied().filter(|&x| x >= x_lo - eps && x <= x_hi + eps).collect(),
            self.xis.iter().copied().filter(|&k| k >= k_lo - eps && k <= k_hi + eps).collect(),
        )
    }
}

/// Central-difference stencil for the `k`-th derivative at unit step:
/// `δ²^{k/2}` for even `k`, `μδ · δ²^{(k-1)/2}` for odd `k`.
fn stencil(k: u32) -> Vec<(i32, f64)> {
    let conv = |a: &[(i32, f64)], b: &[(i32, f64)]| {
        let mut out: Vec<(i32, f64)> = Vec::new();
        for &(oa, wa) in a {
            for &(ob, wb) in b {
                match out.iter_mut().find(|(o, _)| *o == oa + ob) {
                    Some(e) => e.1 += wa * wb,
                    None => out.push((oa + ob, wa * wb)),
                }
            }
        }
        out
    };
    let d2 = [(-1, 1.0), (0, -2.0), (1, 1.0)];
    let mut s = if k % 2 == 1 { vec![(-1, -0.5), (1, 0.5)] } else { vec![(0, 1.0)] };
    for _ in 0..k / 2 {
        s = conv(&s, &d2);
    }
    s
}

/// `∂^α_ξ ∂^β_x sym (t, x, ξ)` by tensor central differences.
pub fn mixed_derivative(sym: &Symbol, t: f64, x: f64, xi: f64, alpha: u32, beta: u32, hx: f64, hxi: f64) -> C {
    let sa = stencil(alpha);
    let sb = stencil(beta);
    let mut acc = C::new(0.0, 0.0);
    for &(oa, wa) in &sa {
        for &(ob, wb) in &sb {
            acc += wa * wb * sym.eval(t, x + ob as f64 * hx, xi + oa as f64 * hxi);
        }
    }
    acc / (hxi.powi(alpha as i32) * hx.powi(beta as i32))
}

fn derivative(sym: &Symbol, t: f64, x: f64, xi: f64, alpha: u32, beta: u32, s: &PhaseSampling) -> C {
    let d1 = mixed_derivative(sym, t, x, xi, alpha, beta, s.step_x, s.step_xi);
    if s.richardson {
        let d2 = mixed_derivative(sym, t, x, xi, alpha, beta, 0.5 * s.step_x, 0.5 * s.step_xi);
        (4.0 * d2 - d1) / 3.0
    } else {
        d1
    }
}

/// Multi-index pairs `(α, β)` with `α + β ≤ max_order`, in order of total degree.
pub fn index_pairs(max_order: u32) -> Vec<(u32, u32)> {
    (0..=max_order).flat_map(|k| (0..=k).rev().map(move |a| (a, k - a))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormEntry {
    /// Order in ξ.
    pub alpha: u32,
    /// Order in x.
    pub beta: u32,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolClassReport {
    pub max_order: u32,
    pub entries: Vec<SeminormEntry>,
    /// Minimum of the real part over the samples.
    pub lower_bound: f64,
}

impl SymbolClassReport {
    pub fn get(&self, alpha: u32, beta: u32) -> Option<f64> {
        self.entries.iter().find(|e| e.alpha == alpha && e.beta == beta).map(|e| e.sup)
    }

    /// Largest entry over all orders up to `order`.
    pub fn seminorm(&self, order: u32) -> f64 {
        self.entries.iter().filter(|e| e.alpha + e.beta <= order).map(|e| e.sup).fold(0.0, f64::max)
    }
}

/// Sup of `weight(x, ξ, α, β) · |∂^α_ξ ∂^β_x sym|` per multi-index, plus the
/// minimum of `Re sym`, over interior samples and `times`.
fn scan(
    sym: &Symbol,
    times: &[f64],
    max_order: u32,
    sampling: &PhaseSampling,
    weight: impl Fn(f64, f64, u32, u32) -> f64 + Sync,
) -> (Vec<SeminormEntry>, f64) {
    let pairs = index_pairs(max_order);
    let margin = max_order.div_ceil(2) as usize + 1;
    let (xs, xis) = sampling.interior(margin);
    let times: Vec<f64> = if times.is_empty() { vec![0.0] } else { times.to_vec() };
    let rows: Vec<(Vec<f64>, f64)> = xs
        .par_iter()
        .map(|&x| {
            let mut sups = vec![0.0f64; pairs.len()];
            let mut low = f64::INFINITY;
            for &t in &times {
                for &xi in &xis {
                    low = low.min(sym.eval(t, x, xi).re);
                    for (slot, &(a, b)) in sups.iter_mut().zip(&pairs) {
                        let v = derivative(sym, t, x, xi, a, b, sampling).norm() * weight(x, xi, a, b);
                        if v > *slot || v.is_nan() {
                            *slot = v;
                        }
                    }
                }
            }
            (sups, low)
        })
        .collect();
    let mut sups = vec![0.0f64; pairs.len()];
    let mut low = f64::INFINITY;
    for (row, l) in rows {
        for (s, r) in sups.iter_mut().zip(row) {
            if r > *s || r.is_nan() {
                *s = r;
            }
        }
        low = low.min(l);
    }
    let entries = pairs.iter().zip(sups).map(|(&(alpha, beta), sup)| SeminormEntry { alpha, beta, sup }).collect();
    (entries, low)
}

/// Finite-difference estimate of the `S_{0,0}` seminorms up to `max_order`.
pub fn seminorm_estimate(
    sym: &Symbol,
    times: &[f64],
    max_order: u32,
    sampling: &PhaseSampling,
) -> Result<SymbolClassReport> {
    if max_order > 6 {
        return Err(Error::InvalidArgument(format!("max_order {max_order} exceeds 6")));
    }
    let (entries, lower_bound) = scan(sym, times, max_order, sampling, |_, _, _, _| 1.0);
    Ok(SymbolClassReport { max_order, entries, lower_bound })
}

/// Sup of `|∂^α_ξ ∂^β_x sym| (1+|x|+|ξ|)^{|α|+|β|-m}`.
pub fn gamma_seminorm(sym: &Symbol, m: f64, max_order: u32, sampling: &PhaseSampling) -> Result<SymbolClassReport> {
    if max_order > 4 {
        return Err(Error::InvalidArgument(format!("max_order {max_order} exceeds 4")));
    }
    let (entries, lower_bound) = scan(sym, &[0.0], max_order, sampling, |x, xi, a, b| {
        (1.0 + x.abs() + xi.abs()).powf((a + b) as f64 - m)
    });
    Ok(SymbolClassReport { max_order, entries, lower_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBoundReport {
    /// Largest ratio; `<= 1` means the bound holds on the samples.
    pub worst_ratio: f64,
    pub worst_alpha: u32,
    pub worst_beta: u32,
}

impl AnalyticBoundReport {
    pub fn holds(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Worst ratio `|∂^α_ξ ∂^β_x sym| / (C_α C^{β+1} β!)` for `α < c_alpha.len()`
/// and `β ≤ max_beta`.
pub fn analytic_bound_check(
    sym: &Symbol,
    c: f64,
    c_alpha: &[f64],
    max_beta: u32,
    sampling: &PhaseSampling,
) -> Result<AnalyticBoundReport> {
    if c_alpha.is_empty() || c_alpha.len() > 7 || max_beta > 6 {
        return Err(Error::InvalidArgument("orders are bounded by 6".into()));
    }
    if !(c > 0.0) || c_alpha.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("constants must be positive".into()));
    }
    let max_alpha = c_alpha.len() as u32 - 1;
    let (entries, _) = scan(sym, &[0.0], max_alpha + max_beta, sampling, |_, _, _, _| 1.0);
    let mut report = AnalyticBoundReport { worst_ratio: 0.0, worst_alpha: 0, worst_beta: 0 };
    for e in entries.iter().filter(|e| e.alpha <= max_alpha && e.beta <= max_beta) {
        let bound = c_alpha[e.alpha as usize] * c.powi(e.beta as i32 + 1) * factorial(e.beta);
        let ratio = e.sup / bound;
        if ratio > report.worst_ratio || ratio.is_nan() {
            report = AnalyticBoundReport { worst_ratio: ratio, worst_alpha: e.alpha, worst_beta: e.beta };
        }
    }
    Ok(report)
}

/// Largest change `|sym(t_{i+1}) − sym(t_i)|` between consecutive sample times.
pub fn time_modulus(sym: &Symbol, times: &[f64], sampling: &PhaseSampling) -> f64 {
    times
        .windows(2)
        .map(|w| {
            sampling
                .xs
                .par_iter()
                .map(|&x| {
                    sampling.xis.iter().map(|&xi| (sym.eval(w[1], x, xi) - sym.eval(w[0], x, xi)).norm()).fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
