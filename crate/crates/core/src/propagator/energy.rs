use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_linear, EvolutionProblem};
use crate::error::{Error, Result};
use crate::grid::{sobolev_q_norm, spectral_derivative, GridFunction};
use crate::tfa::PhasePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityEntry {
    pub z: PhasePoint,
    /// `max_t ‖u(t)‖_Q / ‖g‖_Q` for the problem shifted by `z`.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityTable {
    pub k: u32,
    pub entries: Vec<UniformityEntry>,
}

impl UniformityTable {
    pub fn max(&self) -> f64 {
        self.entries.iter().map(|e| e.c).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.entries.iter().map(|e| e.c).fold(f64::INFINITY, f64::min)
    }

    /// `max C(z) / min C(z)`.
    pub fn spread(&self) -> f64 {
        self.max() / self.min()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["zx", "zxi", "c"])?;
        for e in &self.entries {
            w.write_record([e.z.x, e.z.xi, e.c].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For every `z`, evolves `g` under the problem shifted by `z` over `[0, T]`
/// and records the worst growth of the `Q` norm of order `k`.
pub fn energy_uniformity(prob: &EvolutionProblem, k: u32, g: &GridFunction, z_set: &[PhasePoint]) -> Result<UniformityTable> {
    if z_set.is_empty() {
        return Err(Error::InvalidArgument("empty z set".into()));
    }
    g.check_support("datum");
    let base = sobolev_q_norm(g, k);
    if base == 0.0 {
        return Err(Error::ZeroNorm("datum"));
    }
    let entries = z_set
        .par_iter()
        .map(|&z| {
            let traj = solve_linear(&prob.shifted(z), g, 0.0, prob.final_time)?;
            let c = traj.states.iter().map(|u| sobolev_q_norm(u, k)).fold(0.0, f64::max) / base;
            Ok(UniformityEntry { z, c })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UniformityTable { k, entries })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `Σ_{α ≤ N} ε^{2α} / α!² ‖∂^α u‖²`.
pub fn analytic_energy(u: &GridFunction, eps: f64, order: u32) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0, 1], got {eps}")));
    }
    if order > 12 {
        return Err(Error::InvalidArgument(format!("order {order} exceeds 12")));
    }
    u.grid().require_line()?;
    let mut total = 0.0;
    for alpha in 0..=order {
        let d = spectral_derivative(u, &[alpha])?;
        total += eps.powi(2 * alpha as i32) / factorial(alpha).powi(2) * d.l2_norm().powi(2);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub order: u32,
    /// `max_t E_N[u(t)]^{1/2} / E_N[u0]^{1/2}`.
    pub ratio: f64,
}

/// Growth of the analytic energy along one trajectory, for each order in `orders`.
pub fn analytic_stability(
    prob: &EvolutionProblem,
    u0: &GridFunction,
    eps: f64,
    orders: &[u32],
) -> Result<Vec<StabilityRow>> {
    let traj = solve_linear(prob, u0, 0.0, prob.final_time)?;
    orders
        .par_iter()
        .map(|&order| {
            let base = analytic_energy(u0, eps, order)?;
            if base == 0.0 {
                return Err(Error::ZeroNorm("initial datum"));
            }
            let mut worst = 0.0f64;
            for u in &traj.states {
                worst = worst.max(analytic_energy(u, eps, order)?);
            }
            Ok(StabilityRow { order, ratio: (worst / base).sqrt() })
        })
        .collect()
}
