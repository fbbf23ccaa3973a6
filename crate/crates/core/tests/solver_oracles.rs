mod common;

use common::*;
use cryocell::materials::PropertyTable;
use cryocell::parallel::Executor;
use cryocell::solver::thomas::{thomas_solve, TridiagonalSystem};
use cryocell::solver::{Field, Solver, SolverConfig, StepRule};
use proptest::prelude::*;

fn solver_for<'a>(
    grid: &'a cryocell::Grid,
    mats: &'a cryocell::LayerMaterials,
    src: &'a dyn cryocell::HeatSource,
    tau: f64,
) -> Solver<'a> {
    Solver::new(grid, mats, src, SolverConfig::default(), StepRule::Fixed(tau), Executor::sequential()).unwrap()
}

#[test]
fn radial_half_step_matches_dense_fixed_point() {
    let c = nonlinear_cylinder();
    let (lam, rc) = nonlinear_tables();
    let (grid, mats) = c.solver_setup(lam, rc);
    let src = TestSource;
    let tau = 0.01;
    let s = solver_for(&grid, &mats, &src, tau);
    let t0 = nonlinear_initial(&c);
    let half = s.radial_half_step(&Field::from_values(&grid, t0.clone()), 0.2, tau).unwrap();
    let (oracle, iters) = c.radial_oracle(&t0, 0.2, tau, &src, 1e-6, 50);
    assert_eq!(half.iterations, iters);
    let err = max_diff(half.field.values(), &oracle);
    assert!(err <= 1e-6, "{err}");
    let (exact, _) = c.radial_oracle(&t0, 0.2, tau, &src, 1e-14, 200);
    assert!(max_diff(half.field.values(), &exact) <= 1e-6);
}

#[test]
fn axial_half_step_matches_dense_fixed_point() {
    let c = nonlinear_cylinder();
    let (lam, rc) = nonlinear_tables();
    let (grid, mats) = c.solver_setup(lam, rc);
    let src = TestSource;
    let tau = 0.01;
    let s = solver_for(&grid, &mats, &src, tau);
    let bar = nonlinear_initial(&c);
    let full = s.axial_half_step(&Field::from_values(&grid, bar.clone()), 0.2, tau).unwrap();
    let (oracle, iters) = c.axial_oracle(&bar, 0.2, tau, &src, 1e-6, 50);
    assert_eq!(full.iterations, iters);
    assert!(max_diff(full.field.values(), &oracle) <= 1e-6);
    let (exact, _) = c.axial_oracle(&bar, 0.2, tau, &src, 1e-14, 200);
    assert!(max_diff(full.field.values(), &exact) <= 1e-6);
}

fn adi(c: &Cylinder, tau: f64, steps: usize) -> Vec<f64> {
    let (lam, rc) = nonlinear_tables();
    let (grid, mats) = c.solver_setup(lam, rc);
    let src = TestSource;
    let cfg = SolverConfig {
        epsilon: 1e-12,
        max_iter: 50,
        ..SolverConfig::default()
    };
    let s = Solver::new(&grid, &mats, &src, cfg, StepRule::Fixed(tau), Executor::sequential()).unwrap();
    let mut f = Field::from_values(&grid, nonlinear_initial(c));
    let mut t = 0.0;
    for _ in 0..steps {
        let r = s.adi_step(&f, t).unwrap();
        assert_eq!(r.halvings, 0);
        t += r.tau;
        f = r.field;
    }
    f.values().to_vec()
}

#[test]
fn adi_approaches_explicit_reference_at_measured_order() {
    let c = nonlinear_cylinder();
    let tau = 0.004;
    let end = 10.0 * tau;
    let reference = c.euler(&nonlinear_initial(&c), 0.0, end, 100_000, &TestSource);
    let errs: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&k| max_diff(&adi(&c, tau / k as f64, 10 * k), &reference))
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(order > 0.9, "errors {errs:?}");
    let predicted = errs[1] / 2f64.powf(order);
    assert!(errs[2] <= 1.25 * predicted, "errors {errs:?}, order {order}");
}

#[test]
fn manufactured_solution_is_second_order_in_space() {
    let m = Manufactured { length: 1.0, t0: 4.2 };
    let error = |n: usize| {
        let c = Cylinder {
            radius: 1.0,
            length: 1.0,
            nr: n,
            nz: n,
            lambda: unit,
            rho_c: unit,
            top: Some(4.2),
        };
        let (grid, mats) = c.solver_setup(PropertyTable::constant(1.0), PropertyTable::constant(1.0));
        let tau = 2e-4;
        let s = solver_for(&grid, &mats, &m, tau);
        let mut f = Field::from_fn(&grid, |i, j| m.exact(c.r(i), c.z(j), 0.0));
        let mut t = 0.0;
        for _ in 0..250 {
            let r = s.adi_step(&f, t).unwrap();
            t += r.tau;
            f = r.field;
        }
        grid.cells()
            .map(|(i, j)| (f.get(i, j) - m.exact(c.r(i), c.z(j), t)).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (error(8), error(16));
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "{e1} {e2} -> {order}");
}

fn dominant() -> impl Strategy<Value = TridiagonalSystem> {
    (2usize..=64).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec((0.05f64..3.0, any::<bool>()), n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(|(lower, upper, margin, rhs)| {
                let diag = (0..lower.len())
                    .map(|k| {
                        let d = lower[k].abs() + upper[k].abs() + margin[k].0;
                        if margin[k].1 {
                            d
                        } else {
                            -d
                        }
                    })
                    .collect();
                TridiagonalSystem { lower, diag, upper, rhs }
            })
    })
}

proptest! {
    #[test]
    fn thomas_agrees_with_dense_elimination(sys in dominant()) {
        let n = sys.len();
        let x = thomas_solve(&sys).unwrap();
        let mut a = vec![vec![0.0; n]; n];
        for k in 0..n {
            a[k][k] = sys.diag[k];
            if k > 0 { a[k][k - 1] = sys.lower[k]; }
            if k + 1 < n { a[k][k + 1] = sys.upper[k]; }
        }
        let y = dense_solve(a, sys.rhs.clone());
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        prop_assert!(max_diff(&x, &y) / scale <= 1e-12);
    }
}
