//! Built-in self checks run by `--mode validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::app::Problem;
use crate::geometry::{DomainSpec, Grid, GridSpec};
use crate::materials::{LayerMaterials, MaterialTable};
use crate::parallel::Executor;
use crate::solver::thomas::{thomas_solve, TridiagonalSystem};
use crate::solver::{Field, Solver, SolverConfig, StepRule, TerminalFace};
use crate::source::{pulse_rect, pulse_transient, pulse_transient_phase, NoSource, SourceSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Gaussian elimination with partial pivoting on a dense copy.
fn dense_solve(sys: &TridiagonalSystem) -> Vec<f64> {
    let n = sys.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for k in 0..n {
        a[k][k] = sys.diag[k];
        if k > 0 {
            a[k][k - 1] = sys.lower[k];
        }
        if k + 1 < n {
            a[k][k + 1] = sys.upper[k];
        }
        a[k][n] = sys.rhs[k];
    }
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..=n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

pub fn random_dominant_system(rng: &mut impl Rng, n: usize) -> TridiagonalSystem {
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let diag = (0..n)
        .map(|k| {
            let off = lower[k].abs() + upper[k].abs();
            let d = off + rng.gen_range(0.1..2.0);
            if rng.gen_bool(0.5) {
                d
            } else {
                -d
            }
        })
        .collect();
    let rhs = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    TridiagonalSystem { lower, diag, upper, rhs }
}

pub fn check_thomas(systems: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..systems {
        let n = rng.gen_range(2..=64);
        let sys = random_dominant_system(&mut rng, n);
        let x = match thomas_solve(&sys) {
            Ok(x) => x,
            Err(e) => return check("thomas", false, e.to_string()),
        };
        let y = dense_solve(&sys);
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(err / scale);
    }
    check(
        "thomas",
        worst <= 1e-12,
        format!("{systems} systems, max relative error {worst:.3e}"),
    )
}

/// Smoothed pulse against the rectangular one away from its edges, and its
/// periodicity after three periods. Periodicity is checked at fixed phases;
/// shifting a float time by whole periods perturbs it by an ulp, which the
/// steep edges amplify well past 1e-12.
pub fn check_pulse(spec: &SourceSpec) -> CheckResult {
    let p = spec.timing();
    let samples = 20_000;
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for k in 0..samples {
        let t = k as f64 * 3.0 * p.t_per / samples as f64;
        if !p.in_transition(t) && p.t_per - p.phase(t).1 > p.t_trs {
            worst = worst.max((pulse_transient(t, spec) - pulse_rect(t, spec)).abs());
        }
        let phase = k as f64 * p.t_per / samples as f64;
        let base = pulse_transient_phase(3, phase, spec);
        for n in 4..8 {
            drift = drift.max((pulse_transient_phase(n, phase, spec) - base).abs());
        }
    }
    check(
        "pulse-limits",
        worst < 1e-6 && drift < 1e-12,
        format!("max |v - u| off-edge {worst:.3e}, period drift {drift:.3e}"),
    )
}

fn two_layer() -> (Grid, LayerMaterials) {
    let d = DomainSpec {
        layer_radii: vec![0.5, 1.0],
        core_length: 2.0,
        outer_length: 1.5,
        layer_materials: vec!["a".into(), "b".into()],
        source_layer: 1,
    };
    let g = Grid::build(
        &d,
        &GridSpec {
            radial_divisions: vec![8, 6],
            axial_divisions_core: 12,
            axial_divisions_outer: 9,
        },
    )
    .expect("built-in grid");
    let m = LayerMaterials::new(vec![
        MaterialTable::uniform("a", 2.0, 1.5, 1.0),
        MaterialTable::uniform("b", 1.0, 1.0, 0.3),
    ])
    .expect("built-in materials");
    (g, m)
}

/// Insulated, source-free, constant coefficients: the weighted heat sum
/// must not drift.
pub fn check_conservation(steps: usize) -> CheckResult {
    let (g, m) = two_layer();
    let cfg = SolverConfig {
        terminal: TerminalFace::Insulated,
        ..SolverConfig::default()
    };
    let s = match Solver::new(&g, &m, &NoSource, cfg, StepRule::Fixed(1e-2), Executor::sequential()) {
        Ok(s) => s,
        Err(e) => return check("conservation", false, e.to_string()),
    };
    let mut f = Field::from_fn(&g, |i, j| 4.2 + 10.0 * (i as f64 * 0.37 + j as f64 * 0.11).sin().abs());
    let q0 = f.weighted_heat(&g, &m);
    let mut t = 0.0;
    for _ in 0..steps {
        match s.adi_step(&f, t) {
            Ok(r) => {
                t += r.tau;
                f = r.field;
            }
            Err(e) => return check("conservation", false, e.to_string()),
        }
    }
    let drift = ((f.weighted_heat(&g, &m) - q0) / q0).abs();
    check(
        "conservation",
        drift <= 1e-10,
        format!("{steps} steps, relative drift {drift:.3e}"),
    )
}

/// The configured geometry and materials on a coarse grid, no source, at the
/// terminal temperature: the field must not move.
pub fn check_equilibrium(problem: &Problem, steps: usize) -> CheckResult {
    let cfg = &problem.config;
    let coarse = GridSpec {
        radial_divisions: cfg.grid.radial_divisions.iter().map(|&n| n.clamp(1, 8)).collect(),
        axial_divisions_core: cfg.grid.axial_divisions_core.clamp(1, 16)
            + (cfg.grid.axial_divisions_core > cfg.grid.axial_divisions_outer) as usize,
        axial_divisions_outer: cfg.grid.axial_divisions_outer.clamp(1, 16),
    };
    let g = match Grid::build(&cfg.domain, &coarse) {
        Ok(g) => g,
        Err(e) => return check("equilibrium", false, e.to_string()),
    };
    let t0 = cfg.solver.terminal_temperature;
    let s = match Solver::new(
        &g,
        &problem.materials,
        &NoSource,
        cfg.solver.clone(),
        StepRule::Pulse(cfg.source.timing()),
        Executor::sequential(),
    ) {
        Ok(s) => s,
        Err(e) => return check("equilibrium", false, e.to_string()),
    };
    let mut f = Field::uniform(&g, t0);
    let mut t = 0.0;
    for _ in 0..steps {
        match s.adi_step(&f, t) {
            Ok(r) => {
                t += r.tau;
                f = r.field;
            }
            Err(e) => return check("equilibrium", false, e.to_string()),
        }
    }
    let dev = f.max_abs_diff(&Field::uniform(&g, t0), &g);
    check(
        "equilibrium",
        dev <= 1e-12,
        format!("{steps} steps at T = {t0}, max deviation {dev:.3e}"),
    )
}

pub fn run_all(problem: &Problem) -> Vec<CheckResult> {
    vec![
        check_thomas(1000),
        check_pulse(&problem.config.source),
        check_conservation(100),
        check_equilibrium(problem, 200),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_oracle_matches_hand_solution() {
        let sys = TridiagonalSystem {
            lower: vec![0.0, -1.0, -1.0],
            diag: vec![2.0; 3],
            upper: vec![-1.0, -1.0, 0.0],
            rhs: vec![1.0, 0.0, 1.0],
        };
        for v in dense_solve(&sys) {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn builtin_checks_pass() {
        assert!(check_thomas(200).passed);
        let p = check_pulse(&SourceSpec::reference_pulse());
        assert!(p.passed, "{p}");
        let c = check_conservation(20);
        assert!(c.passed, "{c}");
    }
}
