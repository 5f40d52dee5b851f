use clap::Subcommand;
use gaborheat::battery::garding_battery;
use gaborheat::propagator::{
    analytic_stability, decay_fit, directional_decay, energy_uniformity, extract_symbol, gabor_matrix,
    propagator_matrix, solve_linear, solve_linear_converged, EvolutionProblem,
};
use gaborheat::semilinear::{contro1_check, contro2_check, lipschitz_check, picard_solve};
use gaborheat::symbols::Symbol;
use gaborheat::tfa::{gaussian_window, modulation_norm_boxes, modulation_norm_stft, stft};
use gaborheat::wavefront::{estimate_wavefront, pseudolocality_check, WavefrontEstimate};
use gaborheat::weyl::{garding_constant, weyl_quantize_with};
use gaborheat::{OperatorMatrix, PhaseLattice};

use crate::config::{HypothesisPolicy, RunConfig};
use crate::error::CliError;
use crate::output::Run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// STFT of the datum on a phase-space lattice.
    Stft,
    /// Box and STFT modulation norms of the datum.
    Modnorm,
    /// Weyl quantization of a symbol, written as WOPM.
    Quantize,
    /// Gårding lower-bound constants over the seeded battery.
    Garding,
    /// Linear evolution of the datum.
    Propagate,
    /// Gabor matrix of the propagator and its off-diagonal decay fit.
    GaborDecay,
    /// Energy constants C(z) over phase-space shifts of the problem.
    EnergyUniformity,
    /// Weyl symbol of the propagator.
    SymbolExtract,
    /// Growth of the analytic energies along the evolution.
    AnalyticEnergy,
    /// Duhamel–Picard solution of the semilinear problem.
    Picard,
    /// Lipschitz ratio of the semilinear solution map.
    Lipschitz,
    /// Heat flow with the potential x² from the constant datum.
    Contro1,
    /// Chirp multiplier norm ratios on growing boxes.
    Contro2,
    /// Global wave front set estimate of the datum.
    Wavefront,
    /// Wave front estimates before and after the evolution.
    Pseudolocality,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stft => "stft",
            Command::Modnorm => "modnorm",
            Command::Quantize => "quantize",
            Command::Garding => "garding",
            Command::Propagate => "propagate",
            Command::GaborDecay => "gabor-decay",
            Command::EnergyUniformity => "energy-uniformity",
            Command::SymbolExtract => "symbol-extract",
            Command::AnalyticEnergy => "analytic-energy",
            Command::Picard => "picard",
            Command::Lipschitz => "lipschitz",
            Command::Contro1 => "contro1",
            Command::Contro2 => "contro2",
            Command::Wavefront => "wavefront",
            Command::Pseudolocality => "pseudolocality",
        }
    }

    pub fn run(self, cfg: &RunConfig) -> Result<Run, CliError> {
        let mut run = Run::default();
        match self {
            Command::Stft => stft_cmd(cfg, &mut run),
            Command::Modnorm => modnorm(cfg, &mut run),
            Command::Quantize => quantize(cfg, &mut run),
            Command::Garding => garding(cfg, &mut run),
            Command::Propagate => propagate(cfg, &mut run),
            Command::GaborDecay => gabor_decay(cfg, &mut run),
            Command::EnergyUniformity => energy(cfg, &mut run),
            Command::SymbolExtract => symbol_extract(cfg, &mut run),
            Command::AnalyticEnergy => analytic(cfg, &mut run),
            Command::Picard => picard(cfg, &mut run),
            Command::Lipschitz => lipschitz(cfg, &mut run),
            Command::Contro1 => contro1(cfg, &mut run),
            Command::Contro2 => contro2(cfg, &mut run),
            Command::Wavefront => wavefront(cfg, &mut run),
            Command::Pseudolocality => pseudolocality(cfg, &mut run),
        }?;
        Ok(run)
    }
}

/// The configured problem after its hypothesis check.
fn checked_problem(cfg: &RunConfig, run: &mut Run) -> Result<EvolutionProblem, CliError> {
    let prob = cfg.problem()?;
    let report = prob.check_hypotheses();
    run.scalar("lower_constant", report.lower_constant);
    if !report.passed() {
        if cfg.hypotheses == HypothesisPolicy::Enforce {
            return Err(CliError::Hypotheses(report.warnings));
        }
        run.warnings.extend(report.warnings);
    }
    Ok(prob)
}

fn lattice(cfg: &RunConfig, fallback: impl FnOnce() -> gaborheat::Result<PhaseLattice>) -> Result<PhaseLattice, CliError> {
    match &cfg.lattice {
        Some(l) => l.build(cfg.grid()?),
        None => Ok(fallback()?),
    }
}

fn stft_cmd(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let f = cfg.datum()?;
    let lat = lattice(cfg, || PhaseLattice::default_for(grid))?;
    let field = stft(&f, &gaussian_window(grid), &lat)?;
    let peak = field.as_points().map(|v| v.iter().map(|c| c.norm()).fold(0.0, f64::max));
    run.scalar("points", lat.len());
    run.scalar("max_abs", peak);
    run.write_with("stft.csv", |b| field.write_csv(b))
}

fn modnorm(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let f = cfg.datum()?;
    let spec = cfg.norm.spec()?;
    let boxes = modulation_norm_boxes(&f, spec)?;
    let stft_norm = modulation_norm_stft(&f, &gaussian_window(grid), spec)?;
    run.scalar("boxes", boxes);
    run.scalar("stft", stft_norm);
    run.scalar("ratio", boxes / stft_norm);
    run.csv(
        "modnorm.csv",
        &["p", "q", "s", "boxes", "stft", "ratio"],
        [[spec.p, spec.q, spec.s, boxes, stft_norm, boxes / stft_norm].map(|x| x.to_string())],
    )
}

fn quantize(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let source = cfg.quantize.symbol.as_deref().unwrap_or(&cfg.symbols.a);
    let sym = Symbol::named_or_parse(source)?;
    let op = weyl_quantize_with(&sym, cfg.quantize.t, &grid, cfg.quantize.rule.into())?;
    let rows = [
        ("frobenius", op.frobenius()),
        ("hermitian_deviation", op.hermitian_deviation()),
        ("spectral_radius", op.spectral_radius_estimate(120)),
    ];
    for (k, v) in rows {
        run.scalar(k, v);
    }
    run.csv("quantize.csv", &["quantity", "value"], rows.map(|(k, v)| [k.to_string(), v.to_string()]))?;
    run.write_with("quantize.wopm", |b| op.write_wopm(b))
}

fn garding(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let a = Symbol::named_or_parse(&cfg.symbols.a)?;
    let b = Symbol::named_or_parse(&cfg.symbols.b)?;
    let battery = garding_battery(grid, cfg.seed());
    let mut rows = Vec::new();
    for &k in &cfg.garding.k {
        let c = garding_constant(&a, &b, k, cfg.garding.t, &battery)?;
        run.scalar(&format!("c_est_k{k}"), c);
        rows.push([k.to_string(), c.to_string()]);
    }
    run.scalar("battery_size", battery.len());
    run.csv("garding.csv", &["k", "c_est"], rows)
}

fn propagate(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let u0 = cfg.datum()?;
    let t = prob.final_time;
    let (traj, dt) = match cfg.propagate.converge_tol {
        Some(tol) => solve_linear_converged(&prob, &u0, 0.0, t, tol)?,
        None => (solve_linear(&prob, &u0, 0.0, t)?, prob.dt),
    };
    run.scalar("dt", dt);
    run.scalar("final_l2", traj.last().l2_norm());
    run.scalar("initial_l2", u0.l2_norm());
    run.trajectory("propagate", &traj, cfg.output.trajectory)?;
    if cfg.propagate.write_matrix {
        let s = propagator_matrix(&prob.clone().with_dt(dt)?, 0.0, t)?;
        run.write_with("propagate.wopm", |b| s.write_wopm(b))?;
    }
    Ok(())
}

fn gabor_decay(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let grid = cfg.grid()?;
    let lat = lattice(cfg, || PhaseLattice::gabor_default(grid))?;
    let field = gabor_matrix(&prob, cfg.gabor.t, &gaussian_window(grid), &lat)?;
    let report = decay_fit(&field)?;
    run.scalar("fitted_N", report.fitted_n);
    run.scalar("residual", report.residual);
    run.scalar("used_bins", report.used_bins);
    run.write_with("gabor_decay.csv", |b| report.write_csv(b))?;
    let sectors = directional_decay(&field, cfg.gabor.sectors)?;
    let min = sectors.iter().map(|d| d.report.fitted_n).fold(f64::INFINITY, f64::min);
    run.scalar("min_directional_N", min);
    run.csv(
        "gabor_directional.csv",
        &["angle", "fitted_n", "residual", "used_bins"],
        sectors.iter().map(|d| {
            [d.angle.to_string(), d.report.fitted_n.to_string(), d.report.residual.to_string(), d.report.used_bins.to_string()]
        }),
    )
}

fn energy(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let table = energy_uniformity(&prob, cfg.energy.k, &gaussian_window(cfg.grid()?), &cfg.energy.shifts())?;
    run.scalar("max_C", table.max());
    run.scalar("min_C", table.min());
    run.scalar("C_ratio", table.spread());
    run.write_with("energy_uniformity.csv", |b| table.write_csv(b))
}

fn symbol_extract(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let op: OperatorMatrix = propagator_matrix(&prob, 0.0, cfg.extract.t)?;
    let table = extract_symbol(&op)?;
    let grid = cfg.grid()?;
    let stride = cfg.extract.stride.max(1);
    let values = table.values();
    let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    run.scalar("sup_abs", sup);
    run.scalar("t", cfg.extract.t);
    let rows = values.indexed_iter().filter(|((s, m), _)| s % stride == 0 && m % stride == 0).map(|((s, m), v)| {
        [table.midpoint(s), grid.xi(m), v.re, v.im].map(|x| x.to_string())
    });
    run.csv("symbol_extract.csv", &["x", "xi", "re", "im"], rows)
}

fn analytic(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let u0 = cfg.datum()?;
    let rows = analytic_stability(&prob, &u0, cfg.analytic.eps, &cfg.analytic.orders)?;
    let max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    run.scalar("max_ratio", max);
    run.scalar("ratio_spread", max / min);
    run.csv("analytic_energy.csv", &["order", "ratio"], rows.iter().map(|r| [r.order.to_string(), r.ratio.to_string()]))
}

fn picard(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let nl = cfg.nonlinearity.build()?;
    let (traj, diag) = picard_solve(&prob, &nl, &cfg.datum()?, cfg.norm.spec()?, &cfg.tolerances.options())?;
    run.scalar("picard_gaps", &diag.iterate_gaps);
    run.scalar("converged", diag.converged);
    run.scalar("t0_used", diag.t0_used);
    run.scalar("halvings", diag.halvings);
    run.scalar("degree", diag.degree);
    run.scalar("max_amplitude", diag.max_amplitude);
    run.csv(
        "picard_gaps.csv",
        &["iteration", "gap"],
        diag.iterate_gaps.iter().enumerate().map(|(i, g)| [(i + 1).to_string(), g.to_string()]),
    )?;
    run.trajectory("picard", &traj, cfg.output.trajectory)
}

fn lipschitz(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let nl = cfg.nonlinearity.build()?;
    let u0 = cfg.datum()?;
    let v0 = match &cfg.lipschitz.v0 {
        Some(d) => d.build(cfg.grid()?, cfg.seed())?,
        None => u0.map(|_, v| v * cfg.lipschitz.scale),
    };
    let ratio =
        lipschitz_check(&prob, &nl, &u0, &v0, cfg.norm.spec()?, cfg.lipschitz.radius, &cfg.tolerances.options())?;
    run.scalar("ratio", ratio);
    run.csv("lipschitz.csv", &["ratio"], [[ratio.to_string()]])
}

fn contro1(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let rows = contro1_check(&cfg.grid()?, &cfg.contro1.t_list)?;
    let sup = rows.iter().map(|r| r.sup).fold(0.0, f64::max);
    run.scalar("sup", sup);
    run.csv("contro1.csv", &["t", "sup"], rows.iter().map(|r| [r.t.to_string(), r.sup.to_string()]))
}

fn contro2(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let c = &cfg.contro2;
    let rows = contro2_check(c.p.0, c.q.0, &c.box_sizes)?;
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        run.scalar("growth", last.ratio / first.ratio);
    }
    run.scalar("ratios", rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    run.csv(
        "contro2.csv",
        &["L", "n", "ratio"],
        rows.iter().map(|r| [r.length.to_string(), r.n.to_string(), r.ratio.to_string()]),
    )
}

fn record_estimate(run: &mut Run, key: &str, e: &WavefrontEstimate) {
    run.scalar(&format!("{key}_members"), e.members());
}

fn wavefront(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let f = cfg.datum()?;
    let e = estimate_wavefront(&f, &gaussian_window(cfg.grid()?), &cfg.wavefront.params())?;
    record_estimate(run, "wavefront", &e);
    run.write_with("wavefront.csv", |b| e.write_csv(b))
}

fn pseudolocality(cfg: &RunConfig, run: &mut Run) -> Result<(), CliError> {
    let prob = checked_problem(cfg, run)?;
    let t = cfg.pseudolocality.t.unwrap_or(prob.final_time);
    let f = cfg.datum()?;
    let r = pseudolocality_check(&prob, t, &f, &gaussian_window(cfg.grid()?), &cfg.wavefront.params())?;
    run.scalar("contained", r.contained);
    run.scalar("escaped", &r.escaped);
    record_estimate(run, "initial", &r.initial);
    record_estimate(run, "evolved", &r.evolved);
    run.write_with("pseudolocality_initial.csv", |b| r.initial.write_csv(b))?;
    run.write_with("pseudolocality_evolved.csv", |b| r.evolved.write_csv(b))
}
