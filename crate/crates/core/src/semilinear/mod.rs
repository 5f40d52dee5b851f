//! Semilinear problems `∂_t u + ℒu = g(t, x) F(u)` by Duhamel–Picard iteration.

mod remarks;

pub use remarks::{contro1_check, contro2_check, Contro1Row, Contro2Row};

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operator::OperatorMatrix;
use crate::propagator::{step_exponentials, EvolutionProblem, Trajectory};
use crate::symbols::Expression;
use crate::tfa::{modulation_norm_boxes, ModulationNormSpec};

type C = Complex64;

/// Largest total degree `j + k` accepted in a coefficient table.
pub const MAX_DEGREE: u32 = 8;
/// Ratio of successive gaps at or above which `T0` is halved.
pub const GEOMETRIC_RATIO: f64 = 0.9;
/// `T0` is halved at most this many times.
pub const MAX_HALVINGS: u32 = 10;

/// Coefficient of `u^j ū^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub j: u32,
    pub k: u32,
    pub coeff: C,
}

type FactorFn = dyn Fn(f64, f64) -> C + Send + Sync;

/// Space-time factor `g(t, x)` of the nonlinearity.
#[derive(Clone)]
pub struct Factor {
    name: String,
    eval: Arc<FactorFn>,
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Factor").field("name", &self.name).finish()
    }
}

impl Factor {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> C + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(f) }
    }

    pub fn one() -> Self {
        Self::new("1", |_, _| C::new(1.0, 0.0))
    }

    /// Real expression in `t` and `x`.
    pub fn parse(source: &str) -> Result<Self> {
        let e = Expression::parse(source)?;
        Ok(Self::new(source, move |t, x| C::new(e.eval(t, x, 0.0), 0.0)))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, t: f64, x: f64) -> C {
        (self.eval)(t, x)
    }
}

/// `N(t, x, u) = g(t, x) Σ c_{jk} u^j ū^k` with a finite table, `j + k ≥ 1`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    factor: Factor,
    terms: Vec<Monomial>,
}

impl Nonlinearity {
    pub fn new(factor: Factor, terms: Vec<Monomial>) -> Result<Self> {
        for m in &terms {
            if m.j + m.k == 0 {
                return Err(Error::InvalidArgument("constant term would make F(0) ≠ 0".into()));
            }
            if m.j + m.k > MAX_DEGREE {
                return Err(Error::InvalidArgument(format!(
                    "degree {} exceeds the truncation degree {MAX_DEGREE}",
                    m.j + m.k
                )));
            }
            if !(m.coeff.re.is_finite() && m.coeff.im.is_finite()) {
                return Err(Error::NonFinite("nonlinearity coefficient"));
            }
        }
        Ok(Self { factor, terms })
    }

    pub fn zero() -> Self {
        Self { factor: Factor::one(), terms: Vec::new() }
    }

    /// `g · u^j ū^k` with a unit coefficient.
    pub fn monomial(factor: Factor, j: u32, k: u32) -> Result<Self> {
        Self::new(factor, vec![Monomial { j, k, coeff: C::new(1.0, 0.0) }])
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|m| m.coeff == C::new(0.0, 0.0))
    }

    /// Highest total degree in the table.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|m| m.j + m.k).max().unwrap_or(0)
    }

    fn f(&self, u: C) -> C {
        self.terms.iter().map(|m| m.coeff * u.powu(m.j) * u.conj().powu(m.k)).sum()
    }
}

/// Pointwise `g(t, x) F(u(x))`.
pub fn eval_nonlinearity(nl: &Nonlinearity, t: f64, u: &GridFunction) -> GridFunction {
    u.map(|p, v| if v == C::new(0.0, 0.0) { v } else { nl.factor.eval(t, p[0]) * nl.f(v) })
}

/// Starting iterate of the Picard loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    /// `S(t, 0) u0`.
    #[default]
    Linear,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial: InitialGuess,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 60, initial: InitialGuess::Linear }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    /// Sup over step times of the `M^{p,1}_s` distance between successive
    /// iterates, for the final local time.
    pub iterate_gaps: Vec<f64>,
    pub converged: bool,
    pub t0_used: f64,
    pub halvings: u32,
    /// Truncation degree of the coefficient table.
    pub degree: u32,
    /// `sup_t ‖u(t)‖_∞`; with the degree it bounds the neglected tail of an
    /// entire `F`.
    pub max_amplitude: f64,
}

impl PicardDiagnostics {
    /// Ratios of successive gaps.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.iterate_gaps.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Step matrices on `[0, T0]`: `S(t_i, t_{i−1})` for each step.
struct Stepper {
    times: Vec<f64>,
    steps: Vec<OperatorMatrix>,
}

impl Stepper {
    fn new(prob: &EvolutionProblem, t0: f64) -> Result<Self> {
        let (times, steps) = step_exponentials(prob, 0.0, t0)?;
        Ok(Self { times, steps })
    }

    fn step(&self, i: usize) -> &OperatorMatrix {
        &self.steps[if self.steps.len() == 1 { 0 } else { i - 1 }]
    }

    fn tau(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    fn linear(&self, u0: &GridFunction) -> Vec<GridFunction> {
        let mut out = vec![u0.clone()];
        for i in 1..self.times.len() {
            let next = self.step(i).apply(&out[i - 1]);
            out.push(next);
        }
        out
    }

    /// `L_i + Σ_j w_j S(t_i, t_j) N_j` with trapezoid weights, by the
    /// recursion `I_i = S(t_i, t_{i−1})(I_{i−1} + τ/2 N_{i−1}) + τ/2 N_i`.
    fn duhamel(&self, linear: &[GridFunction], sources: &[GridFunction]) -> Vec<GridFunction> {
        let half = 0.5 * self.tau();
        let mut acc = GridFunction::zeros(*linear[0].grid());
        let mut out = vec![linear[0].clone()];
        for i in 1..self.times.len() {
            let carried = &acc + &(&sources[i - 1] * half);
            let moved = self.step(i).apply(&carried);
            acc = &moved + &(&sources[i] * half);
            out.push(&linear[i] + &acc);
        }
        out
    }
}

fn sources(nl: &Nonlinearity, times: &[f64], states: &[GridFunction]) -> Vec<GridFunction> {
    times.par_iter().zip(states.par_iter()).map(|(&t, u)| eval_nonlinearity(nl, t, u)).collect()
}

fn sup_distance(a: &[GridFunction], b: &[GridFunction], spec: ModulationNormSpec) -> Result<f64> {
    let gaps = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| modulation_norm_boxes(&(x - y), spec))
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

fn max_amplitude(states: &[GridFunction]) -> f64 {
    states.iter().map(GridFunction::sup_norm).fold(0.0, f64::max)
}

enum Attempt {
    Converged(Vec<GridFunction>, Vec<f64>),
    Stalled(Vec<f64>),
}

fn iterate(stepper: &Stepper, nl: &Nonlinearity, u0: &GridFunction, spec: ModulationNormSpec, opts: &PicardOptions) -> Result<Attempt> {
    let linear = stepper.linear(u0);
    let mut current = match opts.initial {
        InitialGuess::Linear => linear.clone(),
        InitialGuess::Zero => vec![GridFunction::zeros(*u0.grid()); linear.len()],
    };
    let mut gaps: Vec<f64> = Vec::new();
    for _ in 0..opts.max_iter {
        let next = stepper.duhamel(&linear, &sources(nl, &stepper.times, &current));
        let gap = sup_distance(&next, &current, spec)?;
        current = next;
        if !gap.is_finite() {
            gaps.push(gap);
            return Ok(Attempt::Stalled(gaps));
        }
        let ratio = gaps.last().map(|&prev| gap / prev);
        gaps.push(gap);
        if gap < opts.tol {
            return Ok(Attempt::Converged(current, gaps));
        }
        if ratio.is_some_and(|r| r >= GEOMETRIC_RATIO) {
            return Ok(Attempt::Stalled(gaps));
        }
    }
    Ok(Attempt::Stalled(gaps))
}

/// Duhamel–Picard iteration in the `M^{p,1}_s` norm of `spec` (which must
/// have `q = 1`), halving the local time on stagnation.
pub fn picard_solve(
    prob: &EvolutionProblem,
    nl: &Nonlinearity,
    u0: &GridFunction,
    spec: ModulationNormSpec,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardDiagnostics)> {
    if spec.q != 1.0 {
        return Err(Error::InvalidArgument(format!("Picard norm needs q = 1, got {}", spec.q)));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument("need tol > 0 and max_iter ≥ 1".into()));
    }
    if u0.grid() != &prob.grid {
        return Err(Error::GridMismatch);
    }
    u0.check_support("initial datum");
    let mut t0 = prob.final_time;
    let mut halvings = 0;
    loop {
        let stepper = Stepper::new(prob, t0)?;
        if nl.is_zero() {
            let states = stepper.linear(u0);
            let diag = PicardDiagnostics { iterate_gaps: vec![0.0], converged: true, t0_used: t0, halvings, degree: 0, max_amplitude: max_amplitude(&states) };
            return Ok((Trajectory { times: stepper.times, states }, diag));
        }
        match iterate(&stepper, nl, u0, spec, opts)? {
            Attempt::Converged(states, iterate_gaps) => {
                let diag = PicardDiagnostics { iterate_gaps, converged: true, t0_used: t0, halvings, degree: nl.degree(), max_amplitude: max_amplitude(&states) };
                return Ok((Trajectory { times: stepper.times, states }, diag));
            }
            Attempt::Stalled(gaps) => {
                let last_gap = gaps.last().copied().unwrap_or(f64::NAN);
                if halvings == MAX_HALVINGS {
                    return Err(Error::NonConvergence { last_gap, t0 });
                }
                log::info!("Picard gaps stalled at {last_gap:.3e} on T0 = {t0:.4e}; halving");
                halvings += 1;
                t0 *= 0.5;
            }
        }
    }
}

/// `‖(u_{i+1} − u_{i−1})/(2τ) + ℒu_i − N(t_i, u_i)‖_{L²}` at interior step times.
pub fn duhamel_residual(prob: &EvolutionProblem, nl: &Nonlinearity, traj: &Trajectory) -> Result<Vec<f64>> {
    let n = traj.times.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let generator = |t: f64| crate::weyl::generator_matrix(&prob.a, &prob.b, t, &prob.grid, prob.rule);
    let fixed = if prob.is_time_dependent() { None } else { Some(generator(0.0)?) };
    (1..n - 1)
        .map(|i| {
            let tau2 = traj.times[i + 1] - traj.times[i - 1];
            let m = match &fixed {
                Some(m) => m.clone(),
                None => generator(traj.times[i])?,
            };
            let dt = &(&traj.states[i + 1] - &traj.states[i - 1]) * (1.0 / tau2);
            let r = &(&dt + &m.apply(&traj.states[i])) - &eval_nonlinearity(nl, traj.times[i], &traj.states[i]);
            Ok(r.l2_norm())
        })
        .collect()
}

/// `‖u_i − S(t_i, t_{i−1})(u_{i−1} + τ/2 N_{i−1}) − τ/2 N_i‖_{L²}` for each
/// step: how far a trajectory is from a fixed point of the discrete Duhamel map.
pub fn scheme_defect(prob: &EvolutionProblem, nl: &Nonlinearity, traj: &Trajectory) -> Result<Vec<f64>> {
    let span = *traj.times.last().expect("trajectory is never empty");
    if traj.times.len() < 2 {
        return Ok(Vec::new());
    }
    let stepper = Stepper::new(prob, span)?;
    if stepper.times.len() != traj.times.len() {
        return Err(Error::InvalidArgument("trajectory does not match the problem's step times".into()));
    }
    let half = 0.5 * stepper.tau();
    let n = sources(nl, &traj.times, &traj.states);
    Ok((1..traj.times.len())
        .map(|i| {
            let moved = stepper.step(i).apply(&(&traj.states[i - 1] + &(&n[i - 1] * half)));
            (&(&traj.states[i] - &moved) - &(&n[i] * half)).l2_norm()
        })
        .collect())
}

/// `sup_t ‖u(t) − v(t)‖ / ‖u0 − v0‖` in the `M^{p,1}_s` norm, for data inside
/// the ball of radius `radius`.
pub fn lipschitz_check(
    prob: &EvolutionProblem,
    nl: &Nonlinearity,
    u0: &GridFunction,
    v0: &GridFunction,
    spec: ModulationNormSpec,
    radius: f64,
    opts: &PicardOptions,
) -> Result<f64> {
    let denom = modulation_norm_boxes(&(u0 - v0), spec)?;
    if denom == 0.0 {
        return Err(Error::ZeroNorm("difference of the data"));
    }
    for (name, d) in [("u0", u0), ("v0", v0)] {
        let r = modulation_norm_boxes(d, spec)?;
        if r > radius {
            return Err(Error::InvalidArgument(format!("{name} has norm {r:.4} outside the ball of radius {radius}")));
        }
    }
    let (mut u, du) = picard_solve(prob, nl, u0, spec, opts)?;
    let (mut v, dv) = picard_solve(prob, nl, v0, spec, opts)?;
    if du.t0_used != dv.t0_used {
        let t0 = du.t0_used.min(dv.t0_used);
        let p = EvolutionProblem { final_time: t0, dt: prob.dt.min(t0), ..prob.clone() };
        u = picard_solve(&p, nl, u0, spec, opts)?.0;
        v = picard_solve(&p, nl, v0, spec, opts)?.0;
    }
    Ok(sup_distance(&u.states, &v.states, spec)? / denom)
}
