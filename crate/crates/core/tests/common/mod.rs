//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here uses the solver's grid metrics or
//! operators; geometry is recomputed from scratch for a uniform
//! single-layer cylinder.

#![allow(dead_code)]

use cryocell::geometry::{DomainSpec, Grid, GridSpec};
use cryocell::materials::{LayerMaterials, MaterialTable, PropertyTable};
use cryocell::source::{CellRef, HeatSource};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f == 0.0 {
                continue;
            }
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub type Coef = fn(f64) -> f64;

/// Uniform cylinder `0 <= r <= radius`, `0 <= z <= length`, axis and
/// `z = 0` symmetric, outer radius insulated, optional fixed temperature
/// at `z = length`. Temperatures are stored `j * nr + i`.
#[derive(Clone, Copy)]
pub struct Cylinder {
    pub radius: f64,
    pub length: f64,
    pub nr: usize,
    pub nz: usize,
    pub lambda: Coef,
    pub rho_c: Coef,
    pub top: Option<f64>,
}

impl Cylinder {
    pub fn len(&self) -> usize {
        self.nr * self.nz
    }
    pub fn dr(&self) -> f64 {
        self.radius / self.nr as f64
    }
    pub fn dz(&self) -> f64 {
        self.length / self.nz as f64
    }
    pub fn r(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }
    pub fn z(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dz()
    }
    pub fn at(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }

    /// The same cylinder as a solver domain.
    pub fn solver_setup(&self, lambda: PropertyTable, rho_c: PropertyTable) -> (Grid, LayerMaterials) {
        let domain = DomainSpec {
            layer_radii: vec![self.radius],
            core_length: self.length,
            outer_length: self.length,
            layer_materials: vec!["m".into()],
            source_layer: 0,
        };
        let grid = Grid::build(
            &domain,
            &GridSpec {
                radial_divisions: vec![self.nr],
                axial_divisions_core: self.nz,
                axial_divisions_outer: self.nz,
            },
        )
        .unwrap();
        let mut m = MaterialTable::uniform("m", 1.0, 1.0, 1.0);
        m.conductivity = lambda;
        m.heat_capacity = rho_c;
        (grid, LayerMaterials::new(vec![m]).unwrap())
    }

    /// Matrix of `-Lr` with conductivities from `coef`, one row per cell.
    fn radial_matrix(&self, coef: &[f64]) -> Vec<Vec<f64>> {
        let (n, dr) = (self.len(), self.dr());
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..self.nz {
            for i in 0..self.nr {
                let p = self.at(i, j);
                let vol = self.r(i) * dr;
                for (nb, face) in [(i.wrapping_sub(1), i as f64 * dr), (i + 1, (i + 1) as f64 * dr)] {
                    if nb >= self.nr {
                        continue;
                    }
                    let q = self.at(nb, j);
                    let k = face * (self.lambda)(0.5 * (coef[p] + coef[q])) / dr / vol;
                    a[p][p] += k;
                    a[p][q] -= k;
                }
            }
        }
        a
    }

    /// Matrix of `-Lz` and the constant part contributed by the top boundary.
    fn axial_matrix(&self, coef: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (n, dz) = (self.len(), self.dz());
        let mut a = vec![vec![0.0; n]; n];
        let mut c = vec![0.0; n];
        for j in 0..self.nz {
            for i in 0..self.nr {
                let p = self.at(i, j);
                for nb in [j.wrapping_sub(1), j + 1] {
                    if nb < self.nz {
                        let q = self.at(i, nb);
                        let k = (self.lambda)(0.5 * (coef[p] + coef[q])) / dz / dz;
                        a[p][p] += k;
                        a[p][q] -= k;
                    }
                }
                if j + 1 == self.nz {
                    if let Some(t0) = self.top {
                        let k = (self.lambda)(0.5 * (coef[p] + t0)) / (0.5 * dz) / dz;
                        a[p][p] += k;
                        c[p] += k * t0;
                    }
                }
            }
        }
        (a, c)
    }

    fn apply(a: &[Vec<f64>], c: Option<&[f64]>, t: &[f64]) -> Vec<f64> {
        (0..t.len())
            .map(|p| -a[p].iter().zip(t).map(|(x, y)| x * y).sum::<f64>() + c.map_or(0.0, |c| c[p]))
            .collect()
    }

    pub fn lr(&self, t: &[f64], coef: &[f64]) -> Vec<f64> {
        Self::apply(&self.radial_matrix(coef), None, t)
    }

    pub fn lz(&self, t: &[f64], coef: &[f64]) -> Vec<f64> {
        let (a, c) = self.axial_matrix(coef);
        Self::apply(&a, Some(&c), t)
    }

    fn source(&self, src: &dyn HeatSource, t: &[f64], time: f64) -> Vec<f64> {
        (0..self.len())
            .map(|p| {
                let (i, j) = (p % self.nr, p / self.nr);
                let cell = CellRef {
                    i,
                    j,
                    layer: 0,
                    r: self.r(i),
                    z: self.z(j),
                };
                src.density(cell, t[p], time)
            })
            .collect()
    }

    /// Radial half-step by simple iteration, each iterate solved densely.
    /// Returns the result and the number of iterations.
    pub fn radial_oracle(&self, tk: &[f64], time: f64, tau: f64, src: &dyn HeatSource, eps: f64, max_iter: usize) -> (Vec<f64>, usize) {
        let h = 0.5 * tau;
        let lz = self.lz(tk, tk);
        let mut ts = tk.to_vec();
        for s in 1..=max_iter {
            let mut a = self.radial_matrix(&ts);
            let x = self.source(src, &ts, time + h);
            let mut b = vec![0.0; self.len()];
            for p in 0..self.len() {
                let cap = (self.rho_c)(ts[p]) / h;
                a[p][p] += cap;
                b[p] = cap * tk[p] + lz[p] + x[p];
            }
            let next = dense_solve(a, b);
            let change = next.iter().zip(&ts).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            ts = next;
            if change < eps {
                return (ts, s);
            }
        }
        panic!("radial oracle did not converge");
    }

    /// Axial half-step from the half-layer field `bar`.
    pub fn axial_oracle(&self, bar: &[f64], time: f64, tau: f64, src: &dyn HeatSource, eps: f64, max_iter: usize) -> (Vec<f64>, usize) {
        let h = 0.5 * tau;
        let lr = self.lr(bar, bar);
        let x = self.source(src, bar, time + h);
        let mut ts = bar.to_vec();
        for s in 1..=max_iter {
            let (mut a, c) = self.axial_matrix(&ts);
            let mut b = vec![0.0; self.len()];
            for p in 0..self.len() {
                let cap = (self.rho_c)(bar[p]) / h;
                a[p][p] += cap;
                b[p] = cap * bar[p] + lr[p] + x[p] + c[p];
            }
            let next = dense_solve(a, b);
            let change = next.iter().zip(&ts).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            ts = next;
            if change < eps {
                return (ts, s);
            }
        }
        panic!("axial oracle did not converge");
    }

    /// Forward Euler on `rho_c(T) dT/dt = Lr[T] + Lz[T] + X`.
    pub fn euler(&self, t0: &[f64], start: f64, end: f64, steps: usize, src: &dyn HeatSource) -> Vec<f64> {
        let dt = (end - start) / steps as f64;
        let mut t = t0.to_vec();
        for k in 0..steps {
            let time = start + k as f64 * dt;
            let lr = self.lr(&t, &t);
            let lz = self.lz(&t, &t);
            let x = self.source(src, &t, time);
            for p in 0..t.len() {
                t[p] += dt * (lr[p] + lz[p] + x[p]) / (self.rho_c)(t[p]);
            }
        }
        t
    }
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// A smooth temperature- and position-dependent source.
pub struct TestSource;

impl HeatSource for TestSource {
    fn density(&self, cell: CellRef, temp: f64, t: f64) -> f64 {
        (2.0 + 0.05 * temp) * (1.0 + cell.r) * (1.0 + 0.5 * cell.z) * (1.0 + t)
    }
    fn as_dyn(&self) -> &dyn HeatSource {
        self
    }
}

pub fn nonlinear_lambda(t: f64) -> f64 {
    1.0 + 0.1 * t
}

pub fn unit(_: f64) -> f64 {
    1.0
}

/// The 6 x 4 nonlinear test problem: `lambda = 1 + 0.1 T`, `rho c = 1`,
/// fixed 4.2 at the top.
pub fn nonlinear_cylinder() -> Cylinder {
    Cylinder {
        radius: 1.0,
        length: 1.0,
        nr: 6,
        nz: 4,
        lambda: nonlinear_lambda,
        rho_c: unit,
        top: Some(4.2),
    }
}

pub fn nonlinear_tables() -> (PropertyTable, PropertyTable) {
    (PropertyTable::linear(1.0, 0.1, 0.0, 1000.0), PropertyTable::constant(1.0))
}

pub fn nonlinear_initial(c: &Cylinder) -> Vec<f64> {
    (0..c.len())
        .map(|p| {
            let (r, z) = (c.r(p % c.nr), c.z(p / c.nr));
            4.2 + 20.0 * (1.0 - r * r) * (1.0 - z * z) + 3.0 * r * z
        })
        .collect()
}

/// Manufactured solution `T0 + e^-t (1 + r^2 - r^4/2) cos(pi z / 2L)` on the
/// unit-radius cylinder with `lambda = rho c = 1`.
pub struct Manufactured {
    pub length: f64,
    pub t0: f64,
}

impl Manufactured {
    fn f(r: f64) -> f64 {
        1.0 + r * r - 0.5 * r.powi(4)
    }
    fn g(&self, z: f64) -> f64 {
        (std::f64::consts::PI * z / (2.0 * self.length)).cos()
    }
    pub fn exact(&self, r: f64, z: f64, t: f64) -> f64 {
        self.t0 + (-t).exp() * Self::f(r) * self.g(z)
    }
}

impl HeatSource for Manufactured {
    fn density(&self, cell: CellRef, _: f64, t: f64) -> f64 {
        let k = std::f64::consts::PI / (2.0 * self.length);
        let f = Self::f(cell.r);
        let lap_r = 4.0 - 8.0 * cell.r * cell.r;
        (-t).exp() * self.g(cell.z) * (-f - lap_r + k * k * f)
    }
    fn as_dyn(&self) -> &dyn HeatSource {
        self
    }
}
