//! Linear evolution `∂_t u + (aʷ + i bʷ) u = 0` with dense matrix exponentials,
//! plus the phase-space diagnostics built on it.

mod energy;
mod extract;
mod gabor;

pub use energy::{analytic_energy, analytic_stability, energy_uniformity, StabilityRow, UniformityEntry, UniformityTable};
pub use extract::{extract_symbol, SymbolTable};
pub(crate) use gabor::least_squares;
pub use gabor::{decay_fit, decay_fit_with, directional_decay, gabor_matrix, gabor_matrix_of, DecayReport, DirectionalDecay};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::operator::OperatorMatrix;
use crate::symbols::{seminorm_estimate, shift_symbol, time_modulus, PhaseSampling, Symbol};
use crate::tfa::PhasePoint;
use crate::weyl::{generator_matrix, Quantization};

type C = Complex64;

pub const DEFAULT_DT: f64 = 1e-2;
/// Slack below `−C_0` tolerated by the blow-up guard.
pub const DEFAULT_GUARD_MARGIN: f64 = 30.0;
const GUARD_ITERATIONS: usize = 120;

/// Cauchy problem for `∂_t u + aʷ u + i bʷ u = 0` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct EvolutionProblem {
    pub a: Symbol,
    pub b: Symbol,
    pub final_time: f64,
    pub dt: f64,
    pub grid: Grid,
    pub rule: Quantization,
    pub guard_margin: f64,
}

impl EvolutionProblem {
    pub fn new(a: Symbol, b: Symbol, final_time: f64, dt: f64, grid: Grid) -> Result<Self> {
        grid.require_line()?;
        if !(dt > 0.0 && dt <= final_time) {
            return Err(Error::InvalidArgument(format!("need 0 < dt ≤ T, got dt = {dt}, T = {final_time}")));
        }
        let samples = PhaseSampling::from_grid(&grid).strided(16);
        for (name, sym) in [("a", &a), ("b", &b)] {
            for &x in &samples.xs {
                for &xi in &samples.xis {
                    let v = sym.eval(0.0, x, xi);
                    if !v.re.is_finite() || v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
                        return Err(Error::InvalidArgument(format!(
                            "symbol {name} = {} is not real-valued at ({x}, {xi})",
                            sym.name()
                        )));
                    }
                }
            }
        }
        Ok(Self { a, b, final_time, dt, grid, rule: Quantization::Torus, guard_margin: DEFAULT_GUARD_MARGIN })
    }

    pub fn with_rule(mut self, rule: Quantization) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_guard_margin(mut self, margin: f64) -> Self {
        self.guard_margin = margin;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= self.final_time) {
            return Err(Error::InvalidArgument(format!("need 0 < dt ≤ T, got {dt}")));
        }
        self.dt = dt;
        Ok(self)
    }

    /// The same problem with both symbols moved by `z`.
    pub fn shifted(&self, z: PhasePoint) -> Self {
        Self { a: shift_symbol(&self.a, z), b: shift_symbol(&self.b, z), ..self.clone() }
    }

    pub fn is_time_dependent(&self) -> bool {
        self.a.is_time_dependent() || self.b.is_time_dependent()
    }

    /// `max(0, −min Re a)` over the sampled box and step times.
    pub fn lower_constant(&self) -> f64 {
        let samples = PhaseSampling::from_grid(&self.grid).strided(4);
        let mut low = f64::INFINITY;
        for t in self.sample_times() {
            for &x in &samples.xs {
                for &xi in &samples.xis {
                    low = low.min(self.a.eval(t, x, xi).re);
                }
            }
        }
        (-low).max(0.0)
    }

    fn sample_times(&self) -> Vec<f64> {
        if self.is_time_dependent() {
            (0..=8).map(|i| self.final_time * i as f64 / 8.0).collect()
        } else {
            vec![0.0]
        }
    }

    fn generator(&self, t: f64) -> Result<OperatorMatrix> {
        generator_matrix(&self.a, &self.b, t, &self.grid, self.rule)
    }

    /// Empirical check of the standing hypotheses on the sampled box.
    pub fn check_hypotheses(&self) -> HypothesisReport {
        let full = PhaseSampling::from_grid(&self.grid).strided(8);
        let inner = PhaseSampling {
            xs: full.xs.iter().copied().filter(|x| x.abs() <= 0.25 * self.grid.length()).collect(),
            xis: full.xis.iter().copied().filter(|xi| xi.abs() <= 0.5 * self.grid.nyquist()).collect(),
            ..full.clone()
        };
        let times = self.sample_times();
        let mut warnings = Vec::new();
        let mut growth = |sym: &Symbol, from: u32, label: &str| -> f64 {
            let (Ok(big), Ok(small)) =
                (seminorm_estimate(sym, &times, from + 1, &full), seminorm_estimate(sym, &times, from + 1, &inner))
            else {
                return f64::NAN;
            };
            let mut worst = 0.0f64;
            for (e, s) in big.entries.iter().zip(&small.entries).filter(|(e, _)| e.alpha + e.beta >= from) {
                let ratio = e.sup / s.sup.max(1e-12);
                if e.sup > 1e-9 && ratio > GROWTH_WARNING {
                    warnings.push(format!(
                        "{label}: ∂ξ^{} ∂x^{} grows by {ratio:.2} from the inner to the full box",
                        e.alpha, e.beta
                    ));
                }
                worst = worst.max(e.sup);
            }
            worst
        };
        let a_bound = growth(&self.a, 2, "a ∉ S(2)");
        let b_bound = growth(&self.b, 1, "b ∉ S(1)");
        let lower = self.lower_constant();
        let continuity = if self.is_time_dependent() {
            time_modulus(&self.a, &times, &full).max(time_modulus(&self.b, &times, &full))
        } else {
            0.0
        };
        if !continuity.is_finite() {
            warnings.push("symbols are not continuous in t on the samples".into());
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        HypothesisReport { a_bound, lower_constant: lower, b_bound, continuity, warnings }
    }
}

/// Ratio of a derivative sup over the full box to the inner box above which
/// the derivative is reported as unbounded.
const GROWTH_WARNING: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Largest derivative of `a` of order 2 or 3.
    pub a_bound: f64,
    /// `C` with `a ≥ −C`.
    pub lower_constant: f64,
    /// Largest derivative of `b` of order 1 or 2.
    pub b_bound: f64,
    /// Largest change of either symbol between sampled times.
    pub continuity: f64,
    pub warnings: Vec<String>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// States of one evolution at the step times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
}

impl Trajectory {
    pub fn last(&self) -> &GridFunction {
        self.states.last().expect("trajectory is never empty")
    }
}

fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) - 1e-9).ceil().max(1.0) as usize
}

fn check_interval(prob: &EvolutionProblem, sigma: f64, t: f64) -> Result<()> {
    if !(sigma <= t) || sigma < 0.0 || t > prob.final_time * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("need 0 ≤ σ ≤ t ≤ T, got σ = {sigma}, t = {t}")));
    }
    Ok(())
}

/// Rejects `exp(−span·M)` when its spectral radius implies a generator
/// spectrum below `−(C_0 + margin)`.
fn guard(prob: &EvolutionProblem, propagator: &OperatorMatrix, span: f64, c0: f64) -> Result<()> {
    let rho = propagator.spectral_radius_estimate(GUARD_ITERATIONS);
    if !rho.is_finite() {
        return Err(Error::NonFinite("propagator"));
    }
    let lower = -rho.ln() / span;
    let limit = -(c0 + prob.guard_margin);
    if lower < limit {
        return Err(Error::BlowUp { lower, limit });
    }
    Ok(())
}

/// Step exponentials `exp(−Δt M(t_mid))` from `σ` to `t`, in time order.
pub(crate) fn step_exponentials(prob: &EvolutionProblem, sigma: f64, t: f64) -> Result<(Vec<f64>, Vec<OperatorMatrix>)> {
    let steps = step_count(t - sigma, prob.dt);
    let step = (t - sigma) / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|i| sigma + step * i as f64).collect();
    let c0 = prob.lower_constant();
    let exps = if prob.is_time_dependent() {
        let mut out = Vec::with_capacity(steps);
        for w in times.windows(2) {
            let m = prob.generator(0.5 * (w[0] + w[1]))?;
            let e = m.exp_scaled(C::new(-step, 0.0));
            guard(prob, &e, step, c0)?;
            out.push(e);
        }
        out
    } else {
        let e = prob.generator(0.0)?.exp_scaled(C::new(-step, 0.0));
        guard(prob, &e, step, c0)?;
        vec![e]
    };
    Ok((times, exps))
}

/// Exponential-midpoint integration from `σ` to `t`, keeping every step state.
pub fn solve_linear(prob: &EvolutionProblem, u0: &GridFunction, sigma: f64, t: f64) -> Result<Trajectory> {
    check_interval(prob, sigma, t)?;
    if u0.grid() != &prob.grid {
        return Err(Error::GridMismatch);
    }
    u0.check_support("initial datum");
    if t == sigma {
        return Ok(Trajectory { times: vec![sigma], states: vec![u0.clone()] });
    }
    let (times, exps) = step_exponentials(prob, sigma, t)?;
    let mut states = Vec::with_capacity(times.len());
    states.push(u0.clone());
    for i in 1..times.len() {
        let e = &exps[if exps.len() == 1 { 0 } else { i - 1 }];
        let next = e.apply(&states[i - 1]);
        if next.values().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("solution"));
        }
        states.push(next);
    }
    Ok(Trajectory { times, states })
}

/// [`solve_linear`] with `dt` halved until the final states of consecutive
/// refinements agree to `tol` in L². Returns the trajectory and the `dt` used.
pub fn solve_linear_converged(
    prob: &EvolutionProblem,
    u0: &GridFunction,
    sigma: f64,
    t: f64,
    tol: f64,
) -> Result<(Trajectory, f64)> {
    let first = solve_linear(prob, u0, sigma, t)?;
    if !prob.is_time_dependent() || t == sigma {
        return Ok((first, prob.dt));
    }
    let mut prev = first;
    let mut p = prob.clone();
    for _ in 0..12 {
        p.dt *= 0.5;
        let next = solve_linear(&p, u0, sigma, t)?;
        let gap = (next.last() - prev.last()).l2_norm();
        if gap <= tol {
            return Ok((next, p.dt));
        }
        prev = next;
    }
    log::warn!("time step refinement stopped at dt = {:.3e} before reaching {tol:.1e}", p.dt);
    Ok((prev, p.dt))
}

/// `S(t, σ)` as a dense matrix: one exponential for time-independent symbols,
/// otherwise the ordered product of step exponentials.
pub fn propagator_matrix(prob: &EvolutionProblem, sigma: f64, t: f64) -> Result<OperatorMatrix> {
    check_interval(prob, sigma, t)?;
    if t == sigma {
        return Ok(OperatorMatrix::identity(prob.grid));
    }
    if !prob.is_time_dependent() {
        let span = t - sigma;
        let e = prob.generator(0.0)?.exp_scaled(C::new(-span, 0.0));
        guard(prob, &e, span, prob.lower_constant())?;
        return Ok(e);
    }
    let (_, exps) = step_exponentials(prob, sigma, t)?;
    let mut acc = OperatorMatrix::identity(prob.grid);
    for e in &exps {
        acc = e.compose(&acc);
    }
    Ok(acc)
}
