use std::f64::consts::PI;

use gaborheat::propagator::{solve_linear, EvolutionProblem};
use gaborheat::semilinear::{
    contro1_check, contro2_check, duhamel_residual, eval_nonlinearity, lipschitz_check, picard_solve, scheme_defect,
    Factor, InitialGuess, Monomial, Nonlinearity, PicardOptions,
};
use gaborheat::symbols::builtin;
use gaborheat::tfa::modulation_norm_boxes;
use gaborheat::{Complex64, Error, Grid, GridFunction, ModulationNormSpec, Symbol};
use proptest::prelude::*;

type C = Complex64;

fn desk() -> Grid {
    Grid::desk()
}

fn m21() -> ModulationNormSpec {
    ModulationNormSpec::new(2.0, 1.0, 0.0).unwrap()
}

fn heat(t: f64) -> EvolutionProblem {
    EvolutionProblem::new(builtin("heat").unwrap(), Symbol::zero(), t, 0.01, desk()).unwrap()
}

fn square() -> Nonlinearity {
    Nonlinearity::monomial(Factor::one(), 2, 0).unwrap()
}

fn small_gaussian(amp: f64) -> GridFunction {
    GridFunction::from_real_fn(desk(), |p| amp * (-0.5 * p[0] * p[0]).exp())
}

#[test]
fn nonlinearity_of_zero_is_zero() {
    let nl = Nonlinearity::new(
        Factor::parse("1 + x*x").unwrap(),
        vec![
            Monomial { j: 1, k: 0, coeff: C::new(2.0, 1.0) },
            Monomial { j: 2, k: 3, coeff: C::new(-1.0, 0.0) },
        ],
    )
    .unwrap();
    let out = eval_nonlinearity(&nl, 0.3, &GridFunction::zeros(desk()));
    assert_eq!(out.sup_norm(), 0.0);
}

#[test]
fn square_of_gaussian() {
    let u = small_gaussian(1.0);
    let out = eval_nonlinearity(&square(), 0.0, &u);
    let exact = GridFunction::from_real_fn(desk(), |p| (-p[0] * p[0]).exp());
    assert!((&out - &exact).sup_norm() < 1e-15);
}

#[test]
fn cubic_gauge_term() {
    let nl = Nonlinearity::monomial(Factor::one(), 2, 1).unwrap();
    let u = GridFunction::from_fn(desk(), |p| C::new(0.0, (-0.5 * p[0] * p[0]).exp()));
    let out = eval_nonlinearity(&nl, 0.0, &u);
    let exact = GridFunction::from_fn(desk(), |p| C::new(0.0, (-1.5 * p[0] * p[0]).exp()));
    assert!((&out - &exact).sup_norm() < 1e-15);
}

#[test]
fn space_time_factor() {
    let nl = Nonlinearity::monomial(Factor::parse("t * cos(x)").unwrap(), 1, 0).unwrap();
    let u = small_gaussian(1.0);
    let out = eval_nonlinearity(&nl, 0.5, &u);
    let exact = GridFunction::from_real_fn(desk(), |p| 0.5 * p[0].cos() * (-0.5 * p[0] * p[0]).exp());
    assert!((&out - &exact).sup_norm() < 1e-14);
}

#[test]
fn coefficient_table_is_validated() {
    let constant = Nonlinearity::new(Factor::one(), vec![Monomial { j: 0, k: 0, coeff: C::new(1.0, 0.0) }]);
    assert!(matches!(constant, Err(Error::InvalidArgument(_))));
    assert!(Nonlinearity::monomial(Factor::one(), 5, 4).is_err());
    assert_eq!(Nonlinearity::monomial(Factor::one(), 4, 4).unwrap().degree(), 8);
    let nan = Nonlinearity::new(Factor::one(), vec![Monomial { j: 1, k: 0, coeff: C::new(f64::NAN, 0.0) }]);
    assert!(nan.is_err());
}

#[test]
fn zero_nonlinearity_is_the_linear_flow() {
    let prob = heat(0.5);
    let u0 = small_gaussian(0.1);
    let (traj, diag) = picard_solve(&prob, &Nonlinearity::zero(), &u0, m21(), &PicardOptions::default()).unwrap();
    let linear = solve_linear(&prob, &u0, 0.0, 0.5).unwrap();
    assert!(diag.converged);
    assert_eq!(diag.iterate_gaps.len(), 1);
    assert_eq!(traj.times, linear.times);
    for (a, b) in traj.states.iter().zip(&linear.states) {
        assert!((a - b).sup_norm() < 1e-14);
    }
}

#[test]
fn flat_datum_solves_the_riccati_ode() {
    let prob = EvolutionProblem::new(Symbol::zero(), Symbol::zero(), 0.5, 0.01, desk()).unwrap();
    let c0 = 0.25;
    let u0 = GridFunction::from_real_fn(desk(), |_| c0);
    let (traj, diag) = picard_solve(&prob, &square(), &u0, m21(), &PicardOptions::default()).unwrap();
    assert!(diag.converged);
    assert_eq!(diag.t0_used, 0.5);
    for (&t, u) in traj.times.iter().zip(&traj.states) {
        let exact = c0 / (1.0 - t * c0);
        for v in u.values() {
            assert!((v - exact).norm() < 1e-5, "t = {t}: {v} vs {exact}");
        }
    }
}

/// Heat flow `e^{τ∂²}` as a dense real convolution built from a plain DFT.
fn heat_step_matrix(grid: Grid, tau: f64) -> Vec<Vec<f64>> {
    let n = grid.n();
    let h = grid.spacing();
    let dk = 2.0 * PI / grid.length();
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            let r = d as f64 * h;
            (0..n)
                .map(|m| {
                    let xi = (m as f64 - (n / 2) as f64) * dk;
                    (-tau * xi * xi).exp() * (xi * r).cos()
                })
                .sum::<f64>()
                / n as f64
        })
        .collect();
    (0..n).map(|j| (0..n).map(|l| kernel[(j + n - l) % n]).collect()).collect()
}

fn apply_real(m: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
}

fn rk4_square(u: f64, tau: f64) -> f64 {
    let f = |v: f64| v * v;
    let k1 = f(u);
    let k2 = f(u + 0.5 * tau * k1);
    let k3 = f(u + 0.5 * tau * k2);
    let k4 = f(u + tau * k3);
    u + tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[test]
fn heat_with_square_matches_split_integrator() {
    let t_end = 0.5;
    let prob = heat(t_end);
    let u0 = small_gaussian(0.1);
    let (traj, diag) = picard_solve(&prob, &square(), &u0, m21(), &PicardOptions::default()).unwrap();
    assert!(diag.converged);

    let tau = prob.dt / 16.0;
    let half = heat_step_matrix(desk(), 0.5 * tau);
    let mut u: Vec<f64> = u0.values().iter().map(|v| v.re).collect();
    for _ in 0..(t_end / tau).round() as usize {
        u = apply_real(&half, &u);
        u = u.into_iter().map(|v| rk4_square(v, tau)).collect();
        u = apply_real(&half, &u);
    }
    let oracle = GridFunction::new(desk(), u.into_iter().map(|v| C::new(v, 0.0)).collect()).unwrap();
    let err = (traj.last() - &oracle).l2_norm();
    assert!(err < 1e-4, "L² distance {err:e}");
}

#[test]
fn gaps_decrease_geometrically() {
    let (_, diag) = picard_solve(&heat(0.5), &square(), &small_gaussian(0.1), m21(), &PicardOptions::default()).unwrap();
    assert!(diag.converged);
    assert!(diag.iterate_gaps.iter().all(|&g| g >= 0.0));
    let below: Vec<f64> = diag.iterate_gaps.iter().copied().skip_while(|&g| g >= 1.0).collect();
    for w in below.windows(2) {
        assert!(w[1] / w[0] < 0.9, "gaps {:?}", diag.iterate_gaps);
    }
    assert!(*diag.iterate_gaps.last().unwrap() < 1e-8);
}

#[test]
fn converged_solution_satisfies_the_discrete_scheme() {
    let prob = heat(0.5);
    let nl = square();
    let opts = PicardOptions::default();
    let (traj, _) = picard_solve(&prob, &nl, &small_gaussian(0.1), m21(), &opts).unwrap();
    let defect = scheme_defect(&prob, &nl, &traj).unwrap();
    assert_eq!(defect.len(), 50);
    assert!(defect.iter().all(|&d| d <= 10.0 * opts.tol), "{defect:?}");
}

#[test]
fn finite_difference_residual_is_second_order() {
    let nl = square();
    let u0 = small_gaussian(0.1);
    let opts = PicardOptions::default();
    let max = |prob: &EvolutionProblem| {
        let (traj, _) = picard_solve(prob, &nl, &u0, m21(), &opts).unwrap();
        duhamel_residual(prob, &nl, &traj).unwrap().into_iter().fold(0.0, f64::max)
    };
    let coarse = max(&heat(0.5));
    let fine = max(&heat(0.5).with_dt(0.005).unwrap());
    assert!(coarse < 1e-4);
    let order = (coarse / fine).log2();
    assert!((order - 2.0).abs() < 0.25, "observed order {order}");
}

#[test]
fn limit_does_not_depend_on_the_initial_guess() {
    let prob = heat(0.5);
    let u0 = small_gaussian(0.1);
    let linear = PicardOptions::default();
    let zero = PicardOptions { initial: InitialGuess::Zero, ..linear };
    let (a, da) = picard_solve(&prob, &square(), &u0, m21(), &linear).unwrap();
    let (b, db) = picard_solve(&prob, &square(), &u0, m21(), &zero).unwrap();
    assert!(da.converged && db.converged);
    for (x, y) in a.states.iter().zip(&b.states) {
        assert!(modulation_norm_boxes(&(x - y), m21()).unwrap() <= 2.0 * linear.tol);
    }
}

#[test]
fn blow_up_halves_the_local_time() {
    // u' = u² from u0 = 4 blows up at t = 1/4
    let prob = EvolutionProblem::new(Symbol::zero(), Symbol::zero(), 0.5, 0.01, desk()).unwrap();
    let u0 = GridFunction::from_real_fn(desk(), |_| 4.0);
    let (traj, diag) = picard_solve(&prob, &square(), &u0, m21(), &PicardOptions::default()).unwrap();
    assert!(diag.halvings >= 1);
    assert!(diag.t0_used < 0.25);
    assert_eq!(*traj.times.last().unwrap(), diag.t0_used);
    let t = diag.t0_used;
    let exact = 4.0 / (1.0 - 4.0 * t);
    let got = traj.last().values()[0].re;
    assert!((got - exact).abs() < 1e-2 * exact, "t0 = {t}, halvings {}: {got} vs {exact}", diag.halvings);
}

#[test]
fn hopeless_data_report_nonconvergence() {
    let prob = EvolutionProblem::new(Symbol::zero(), Symbol::zero(), 0.5, 0.01, desk()).unwrap();
    let u0 = GridFunction::from_real_fn(desk(), |_| 1e6);
    let err = picard_solve(&prob, &square(), &u0, m21(), &PicardOptions::default()).unwrap_err();
    match err {
        Error::NonConvergence { t0, .. } => assert!((t0 - 0.5 / 1024.0).abs() < 1e-15),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn picard_rejects_bad_arguments() {
    let prob = heat(0.5);
    let u0 = small_gaussian(0.1);
    let l2 = ModulationNormSpec::l2();
    assert!(picard_solve(&prob, &square(), &u0, l2, &PicardOptions::default()).is_err());
    let bad = PicardOptions { tol: 0.0, ..Default::default() };
    assert!(picard_solve(&prob, &square(), &u0, m21(), &bad).is_err());
    let other = GridFunction::zeros(Grid::line(40.0, 256).unwrap());
    assert!(matches!(
        picard_solve(&prob, &square(), &other, m21(), &PicardOptions::default()),
        Err(Error::GridMismatch)
    ));
}

#[test]
fn degree_and_amplitude_are_recorded() {
    let (_, diag) = picard_solve(&heat(0.2), &square(), &small_gaussian(0.1), m21(), &PicardOptions::default()).unwrap();
    assert_eq!(diag.degree, 2);
    assert!((diag.max_amplitude - 0.1).abs() < 1e-12);
}

#[test]
fn linear_heat_is_lipschitz_one() {
    let u0 = small_gaussian(0.3);
    let v0 = GridFunction::from_real_fn(desk(), |p| 0.2 * (-0.5 * (p[0] - 1.0).powi(2)).exp());
    let r = lipschitz_check(&heat(0.5), &Nonlinearity::zero(), &u0, &v0, m21(), 10.0, &PicardOptions::default()).unwrap();
    assert!(r <= 1.0 + 1e-6, "ratio {r}");
}

#[test]
fn identical_data_have_no_lipschitz_ratio() {
    let u0 = small_gaussian(0.3);
    let r = lipschitz_check(&heat(0.5), &square(), &u0, &u0, m21(), 10.0, &PicardOptions::default());
    assert!(matches!(r, Err(Error::ZeroNorm(_))));
}

#[test]
fn data_outside_the_ball_are_rejected() {
    let u0 = small_gaussian(3.0);
    let v0 = small_gaussian(3.003);
    let r = lipschitz_check(&heat(0.5), &square(), &u0, &v0, m21(), 1.0, &PicardOptions::default());
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn lipschitz_ratio_bounded_on_battery() {
    let prob = heat(0.5);
    let mut ratios = Vec::new();
    for amp in [0.2, 0.5, 1.0, 1.5, 2.0] {
        let u0 = GridFunction::from_real_fn(desk(), |p| amp * (-0.5 * p[0] * p[0]).exp() * (1.0 + 0.1 * p[0]).cos());
        let v0 = u0.map(|_, v| v * 1.001);
        ratios.push(lipschitz_check(&prob, &square(), &u0, &v0, m21(), 10.0, &PicardOptions::default()).unwrap());
    }
    // desk run: 1, 1, 1.12, 1.46, 2.00
    assert!(ratios.iter().all(|&r| (1.0 - 1e-9..=2.1).contains(&r)), "{ratios:?}");
    assert!(ratios[4] > ratios[2] && ratios[2] > 1.05, "{ratios:?}");
}

#[test]
fn heat_flow_from_one_loses_everything_far_out() {
    let rows = contro1_check(&Grid::line(40.0, 512).unwrap(), &[0.0, 0.01, 0.1, 1.0]).unwrap();
    assert_eq!(rows[0].sup, 0.0);
    assert!((rows[3].sup - 1.0).abs() < 1e-12);
    for w in rows.windows(2) {
        assert!(w[1].sup >= w[0].sup);
    }
    // sup is attained at the left box end x = −L/2
    assert!((rows[1].sup - (1.0 - (-0.01f64 * 400.0).exp())).abs() < 1e-14);
    assert!(contro1_check(&desk(), &[-1.0]).is_err());
}

#[test]
fn contro1_approaches_one_as_the_box_grows() {
    let small = contro1_check(&Grid::line(4.0, 64).unwrap(), &[0.1]).unwrap()[0].sup;
    let large = contro1_check(&Grid::line(40.0, 64).unwrap(), &[0.1]).unwrap()[0].sup;
    assert!(small < 0.34 && large > 1.0 - 1e-12);
}

#[test]
fn chirp_is_unitary_on_l2() {
    for row in contro2_check(2.0, 2.0, &[20.0, 40.0, 80.0]).unwrap() {
        assert!((row.ratio - 1.0).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn chirp_ratio_grows_for_unequal_exponents() {
    let rows = contro2_check(f64::INFINITY, 1.0, &[20.0, 40.0, 80.0]).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), [128, 512, 2048]);
    for w in rows.windows(2) {
        assert!(w[1].ratio > w[0].ratio);
    }
    // desk run: 1.446, 2.683, 5.313
    assert!(rows[2].ratio / rows[0].ratio >= 2.0);
}

#[test]
fn chirp_needs_valid_exponents() {
    assert!(contro2_check(0.5, 1.0, &[20.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nonlinearity_is_pointwise(center in -8.0f64..8.0, j in 1u32..4, k in 0u32..3) {
        let g = Grid::line(40.0, 128).unwrap();
        let u = GridFunction::from_real_fn(g, |p| if (p[0] - center).abs() < 2.0 { 1.0 + p[0].sin() } else { 0.0 });
        let nl = Nonlinearity::monomial(Factor::parse("1 + x*x").unwrap(), j, k).unwrap();
        let out = eval_nonlinearity(&nl, 0.0, &u);
        for (a, b) in u.values().iter().zip(out.values()) {
            if a.norm() == 0.0 {
                prop_assert_eq!(b.norm(), 0.0);
            }
        }
        let expected = |v: f64, x: f64| (1.0 + x * x) * v.powi((j + k) as i32);
        for (i, (a, b)) in u.values().iter().zip(out.values()).enumerate() {
            let x = g.x(i);
            prop_assert!((b.re - expected(a.re, x)).abs() <= 1e-12 * (1.0 + b.re.abs()));
        }
    }
}
