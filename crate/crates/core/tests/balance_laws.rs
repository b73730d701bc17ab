//! Discrete versions of the moment, entropy and second-moment balance laws:
//! the residuals must vanish at order at least one under grid refinement.

use polarsim_core::diagnostics::lyapunov_rescaled;
use polarsim_core::grid::make_grid_1d;
use polarsim_core::initial::{project_initial, InitialCondition};
use polarsim_core::rescaled1d::run_rescaled;
use polarsim_core::solver1d::run_bks;
use polarsim_core::solver2d::{run_2d, trace_row, VelocityCase};
use polarsim_core::variants1d::run_range;
use polarsim_core::{BlowupCaps, Field2D, Grid2D, RunControl, RunOutput};

const REFINEMENTS: [usize; 3] = [100, 200, 400];
const MIN_ORDER: f64 = 1.0;

fn observed_orders(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn assert_converges(name: &str, residuals: &[f64]) {
    for p in observed_orders(residuals) {
        assert!(p >= MIN_ORDER, "{name}: observed order {p:.3} from residuals {residuals:?}");
    }
}

/// Largest residual over records of `quantity(k) - quantity(0) - predicted(k)`.
fn max_residual(out: &RunOutput, quantity: impl Fn(usize) -> f64, predicted: impl Fn(usize) -> f64) -> f64 {
    (0..out.records.len()).map(|k| (quantity(k) - quantity(0) - predicted(k)).abs()).fold(0.0, f64::max)
}

fn half_line_run(ic: &InitialCondition<f64>, z_max: f64, n: usize, t_end: f64) -> RunOutput {
    let g = make_grid_1d(z_max, n).unwrap();
    let f = project_initial(ic, &g).unwrap();
    let caps = BlowupCaps::defaults_1d(f.mass(), z_max, g.dz(), f.trace());
    run_bks(f, &RunControl::new(t_end, t_end / 10.0, caps)).unwrap()
}

#[test]
fn first_moment_law() {
    let residuals: Vec<f64> = REFINEMENTS
        .iter()
        .map(|&n| {
            let out = half_line_run(&InitialCondition::exponential(1.5, 0.8), 20.0, n, 2.0);
            max_residual(&out, |k| out.records[k].j, |k| out.integrals[k].moment_rate)
        })
        .collect();
    assert_converges("first moment", &residuals);
}

#[test]
fn entropy_balance() {
    let residuals: Vec<f64> = REFINEMENTS
        .iter()
        .map(|&n| {
            let out = half_line_run(&InitialCondition::exponential(1.5, 0.8), 20.0, n, 1.0);
            max_residual(&out, |k| out.records[k].entropy, |k| out.integrals[k].trace_sq - out.integrals[k].fisher)
        })
        .collect();
    assert_converges("entropy balance", &residuals);
}

#[test]
fn critical_mass_moments() {
    let (mut j_drift, mut i_res) = (vec![], vec![]);
    for n in REFINEMENTS {
        // step of width 2 and unit mass: J0 = 1
        let out = half_line_run(&InitialCondition::step(2.0, 1.0), 30.0, n, 2.0);
        let j0 = out.records[0].j;
        j_drift.push(out.records.iter().map(|r| (r.j - j0).abs()).fold(0.0, f64::max));
        i_res.push(max_residual(&out, |k| out.records[k].i, |k| out.records[k].t - j0 * out.integrals[k].trace));
    }
    assert_converges("first moment at M = 1", &j_drift);
    assert_converges("second moment at M = 1", &i_res);
}

#[test]
fn exponential_moment_law_with_finite_range() {
    let alpha = 0.5;
    let residuals: Vec<f64> = REFINEMENTS
        .iter()
        .map(|&n| {
            let g = make_grid_1d(20.0, n).unwrap();
            let f = project_initial(&InitialCondition::exponential(1.0, 0.8), &g).unwrap();
            let caps = BlowupCaps::defaults_1d(0.8, 20.0, g.dz(), f.trace());
            let out = run_range(f, alpha, &RunControl::new(0.5, 0.05, caps)).unwrap();
            assert!(!out.blowup.detected);
            max_residual(&out, |k| out.records[k].j_alpha.unwrap(), |k| out.integrals[k].moment_rate)
        })
        .collect();
    assert_converges("exponential moment", &residuals);
}

#[test]
fn rescaled_dissipation_identity() {
    let residuals: Vec<f64> = REFINEMENTS
        .iter()
        .map(|&n| {
            let g = make_grid_1d(10.0, n).unwrap();
            let u = project_initial(&InitialCondition::step(1.5, 0.6), &g).unwrap();
            let out = run_rescaled(u, &RunControl::new(0.5, 0.05, BlowupCaps::disabled())).unwrap();
            max_residual(&out, |k| out.records[k].lyapunov.unwrap(), |k| -out.integrals[k].dissipation)
        })
        .collect();
    assert_converges("rescaled dissipation", &residuals);
}

#[test]
fn rescaled_lyapunov_matches_direct_evaluation() {
    let g = make_grid_1d(10.0, 200).unwrap();
    let u = project_initial(&InitialCondition::step(1.5, 0.6), &g).unwrap();
    let out = run_rescaled(u.clone(), &RunControl::new(0.1, 0.1, BlowupCaps::disabled())).unwrap();
    let (l, _) = lyapunov_rescaled(&u, polarsim_core::rescaled1d::solve_alpha(0.6).unwrap(), 0.6).unwrap();
    assert!((out.records[0].lyapunov.unwrap() - l).abs() < 1e-10);
}

#[test]
fn transversal_second_moment_law() {
    // the box must be large enough that the edge terms z n and y n of the
    // continuous law are negligible
    let residuals: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = Grid2D::new(-10.0, 10.0, 12.0, 2 * n, n).unwrap();
            let f =
                Field2D::separable(g, |y| (-y * y / 2.0).exp(), &InitialCondition::exponential(1.0, 1.0), 1.5).unwrap();
            let tr0 = trace_row(&f).into_iter().fold(0.0, f64::max);
            let caps = BlowupCaps::defaults_2d(1.5, &g, tr0);
            let run = run_2d(f, VelocityCase::Transversal, &RunControl::new(0.5, 0.05, caps)).unwrap();
            let out = &run.output;
            assert!(!out.blowup.detected);
            max_residual(out, |k| out.records[k].i, |k| out.integrals[k].moment_rate)
        })
        .collect();
    assert_converges("transversal second moment", &residuals);
}

#[test]
fn single_precision_smoke() {
    let g = make_grid_1d(20.0_f32, 100).unwrap();
    let f = project_initial(&InitialCondition::exponential(1.0_f32, 0.8), &g).unwrap();
    let caps = polarsim_core::driver::BlowupCaps::defaults_1d(0.8_f32, 20.0, g.dz(), f.trace());
    let out = run_bks(f, &polarsim_core::driver::RunControl::new(1.0_f32, 0.25, caps)).unwrap();
    assert!(!out.blowup.detected);
    assert_eq!(out.records.len(), 5);
    assert!(out.relative_mass_drift() < 1e-4);
}
