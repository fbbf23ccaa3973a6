//! ADI time stepping with simple (Picard) iteration.
//!
//! One step of length `tau` is two half-steps of `tau / 2`:
//!
//! 1. radial: implicit in `r`, with the axial operator taken explicitly at
//!    the current layer. Heat capacity, conductivity and source are frozen
//!    at the previous iterate and the line systems are re-solved until the
//!    max-norm change between iterates drops below `epsilon`;
//! 2. axial: implicit in `z`, with the radial operator, heat capacity and
//!    source taken at the half-step field; only the conductivity is iterated.
//!
//! If either iteration needs more than `max_iter` solves the step is
//! restarted with `tau / 2`. Each line is solved in increment form, so a
//! field in equilibrium produces a zero right-hand side and stays put
//! exactly.

pub mod operators;
pub mod thomas;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Grid;
use crate::materials::{HalfPointRule, LayerMaterials, MaterialError};
use crate::parallel::{ExecError, Executor};
use crate::source::{CellRef, FrozenSource, HeatSource, PulseTiming};

pub use operators::Operators;
pub use thomas::{thomas_solve, ThomasError, TridiagonalSystem};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("simple iteration did not converge in {iterations} iterations (last change {residual:e})")]
    NonConverged { iterations: usize, residual: f64 },
    #[error("time step fell below the floor at t = {t}: tau = {tau:e} < tau_min = {tau_min:e}")]
    TauFloor { t: f64, tau: f64, tau_min: f64 },
    #[error("cell ({i}, {j}): {source}")]
    Range {
        i: usize,
        j: usize,
        #[source]
        source: MaterialError,
    },
    #[error("line {line}: {source}")]
    Thomas {
        line: usize,
        #[source]
        source: ThomasError,
    },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("non-finite temperature at cell ({i}, {j})")]
    NonFinite { i: usize, j: usize },
}

/// Treatment of the face `z = z_max` of every column reaching it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalFace {
    /// Held at `terminal_temperature`.
    #[default]
    Dirichlet,
    /// Zero flux, which makes every face of the domain insulated.
    Insulated,
}

fn default_epsilon() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    10
}
fn default_transient_divisor() -> f64 {
    1000.0
}
fn default_source_divisor() -> f64 {
    100.0
}
fn default_t0() -> f64 {
    4.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Tolerance on `max |T^{s+1} - T^s|`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Smallest admissible step; defaults to `1e-12 * t_per`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    #[serde(default = "default_transient_divisor")]
    pub tau_transient_divisor: f64,
    #[serde(default = "default_source_divisor")]
    pub tau_source_divisor: f64,
    #[serde(default)]
    pub halfpoint_rule: HalfPointRule,
    /// Fail instead of clamping when a temperature leaves a material table.
    #[serde(default)]
    pub strict_range: bool,
    #[serde(default)]
    pub terminal: TerminalFace,
    #[serde(default = "default_t0")]
    pub terminal_temperature: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: default_epsilon(),
            max_iter: default_max_iter(),
            tau_min: None,
            tau_transient_divisor: default_transient_divisor(),
            tau_source_divisor: default_source_divisor(),
            halfpoint_rule: HalfPointRule::default(),
            strict_range: false,
            terminal: TerminalFace::default(),
            terminal_temperature: default_t0(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let fail = |m: &str| Err(SolverError::Config(m.to_string()));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if self.max_iter == 0 {
            return fail("max_iter must be at least 1");
        }
        if let Some(t) = self.tau_min {
            if !(t.is_finite() && t > 0.0) {
                return fail("tau_min must be positive");
            }
        }
        if !(self.tau_transient_divisor > 0.0 && self.tau_source_divisor > 0.0) {
            return fail("tau divisors must be positive");
        }
        if !self.terminal_temperature.is_finite() {
            return fail("terminal_temperature must be finite");
        }
        Ok(())
    }
}

/// How the first trial step of each evolution step is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `t_trs / 1000` inside pulse edges, `t_src / 100` elsewhere.
    Pulse(PulseTiming),
    Fixed(f64),
}

/// Temperatures over the grid, row-major; cells outside the mask hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nr: usize,
    nz: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn uniform(grid: &Grid, value: f64) -> Self {
        Self::from_fn(grid, |_, _| value)
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![f64::NAN; grid.len()];
        for (i, j) in grid.cells() {
            values[grid.index(i, j)] = f(i, j);
        }
        Field {
            nr: grid.nr(),
            nz: grid.nz(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size must match the grid");
        Field {
            nr: grid.nr(),
            nz: grid.nz(),
            values,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nr, self.nz)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nr + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.nr + i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs_diff(&self, other: &Field, grid: &Grid) -> f64 {
        grid.cells()
            .map(|(i, j)| (self.get(i, j) - other.get(i, j)).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_max(&self, grid: &Grid) -> (f64, f64) {
        grid.cells()
            .map(|(i, j)| self.get(i, j))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// `sum r_i hbar_i etabar_j rho c_V(T) T` over masked cells.
    pub fn weighted_heat(&self, grid: &Grid, materials: &LayerMaterials) -> f64 {
        grid.cells()
            .map(|(i, j)| {
                let t = self.get(i, j);
                grid.weight(i, j) * materials.layer(grid.layer_of_col[i]).capacity(t) * t
            })
            .sum()
    }

    /// Whether two fields are identical bit for bit (NaN padding included).
    pub fn bitwise_eq(&self, other: &Field) -> bool {
        self.dims() == other.dims()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// A converged half-step.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfStep {
    pub field: Field,
    pub iterations: usize,
    pub residual: f64,
    /// Masked cells whose temperature lies outside a material table.
    pub clamped_cells: usize,
}

/// An accepted ADI step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub field: Field,
    pub tau: f64,
    pub halvings: u32,
    pub radial_iterations: usize,
    pub axial_iterations: usize,
    pub clamped_cells: usize,
}

pub struct Solver<'a> {
    grid: &'a Grid,
    materials: &'a LayerMaterials,
    source: &'a dyn HeatSource,
    config: SolverConfig,
    rule: StepRule,
    exec: Executor,
    /// Per-layer temperature range covered by every table of the layer.
    ranges: Vec<(f64, f64)>,
}

struct LineScratch {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    cp: Vec<f64>,
}

impl LineScratch {
    fn new(n: usize) -> Self {
        LineScratch {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
            cp: vec![0.0; n],
        }
    }

    fn solve(&mut self, n: usize) -> Result<(), ThomasError> {
        thomas::solve_in_place(&self.lower, &self.diag, &self.upper, &mut self.rhs[..n], &mut self.cp)
    }
}

fn first_error<T>(results: Vec<Result<T, ThomasError>>) -> Result<Vec<T>, SolverError> {
    results
        .into_iter()
        .enumerate()
        .map(|(line, r)| r.map_err(|source| SolverError::Thomas { line, source }))
        .collect()
}

impl<'a> Solver<'a> {
    pub fn new(
        grid: &'a Grid,
        materials: &'a LayerMaterials,
        source: &'a dyn HeatSource,
        config: SolverConfig,
        rule: StepRule,
        exec: Executor,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        if materials.len() != grid.layer_count() {
            return Err(SolverError::Config(format!(
                "{} materials for {} layers",
                materials.len(),
                grid.layer_count()
            )));
        }
        if let StepRule::Fixed(tau) = rule {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(SolverError::Config("fixed tau must be positive".into()));
            }
        }
        let ranges = materials
            .iter()
            .map(|m| {
                let mut tables = vec![&m.heat_capacity, &m.conductivity];
                tables.extend(m.resistivity.as_ref());
                tables
                    .iter()
                    .map(|t| t.domain())
                    .fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), (a, b)| (lo.max(a), hi.min(b)))
            })
            .collect();
        Ok(Solver {
            grid,
            materials,
            source,
            config,
            rule,
            exec,
            ranges,
        })
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn materials(&self) -> &'a LayerMaterials {
        self.materials
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn step_rule(&self) -> StepRule {
        self.rule
    }

    pub fn operators(&self) -> Operators<'a> {
        Operators {
            grid: self.grid,
            materials: self.materials,
            rule: self.config.halfpoint_rule,
            terminal: match self.config.terminal {
                TerminalFace::Dirichlet => Some(self.config.terminal_temperature),
                TerminalFace::Insulated => None,
            },
        }
    }

    pub fn tau_min(&self) -> f64 {
        self.config.tau_min.unwrap_or(match self.rule {
            StepRule::Pulse(p) => 1e-12 * p.t_per,
            StepRule::Fixed(tau) => 1e-12 * tau,
        })
    }

    /// First trial step at time `t`.
    pub fn initial_tau(&self, t: f64) -> f64 {
        match self.rule {
            StepRule::Pulse(p) => initial_tau(t, &p, &self.config),
            StepRule::Fixed(tau) => tau,
        }
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> CellRef {
        CellRef {
            i,
            j,
            layer: self.grid.layer_of_col[i],
            r: self.grid.r_centers[i],
            z: self.grid.z_centers[j],
        }
    }

    /// Explicit operator over the whole grid, row-major.
    fn explicit(&self, field: &Field, radial: bool) -> Result<Vec<f64>, SolverError> {
        let g = self.grid;
        let ops = self.operators();
        let mut out = vec![0.0; g.len()];
        if radial {
            self.exec.for_each_line_mut(&mut out, g.nr(), |j, row| {
                ops.lambda_r_row(field.values(), j, row);
            })?;
            return Ok(out);
        }
        // upper-face fluxes of every cell, then differences between rows
        let mut flux = vec![0.0; g.len()];
        self.exec.for_each_line_mut(&mut flux, g.nr(), |j, row| {
            for (i, slot) in row.iter_mut().enumerate().take(g.row_len[j]) {
                *slot = ops.axial_flux(field.values(), i, j);
            }
        })?;
        let nr = g.nr();
        self.exec.for_each_line_mut(&mut out, nr, |j, row| {
            for (i, slot) in row.iter_mut().enumerate().take(g.row_len[j]) {
                let lower = if j == 0 { 0.0 } else { flux[(j - 1) * nr + i] };
                *slot = (flux[j * nr + i] - lower) / g.etabar[j];
            }
        })?;
        Ok(out)
    }

    /// Row-major to column-major (or back, with `nr` and `nz` swapped).
    fn transpose(&self, src: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>, SolverError> {
        let mut out = vec![f64::NAN; src.len()];
        self.exec.for_each_line_mut(&mut out, rows, |c, line| {
            for (r, v) in line.iter_mut().enumerate() {
                *v = src[r * cols + c];
            }
        })?;
        Ok(out)
    }

    fn check_range(&self, field: &Field) -> Result<usize, SolverError> {
        let mut clamped = 0;
        for (i, j) in self.grid.cells() {
            let t = field.get(i, j);
            if !t.is_finite() {
                return Err(SolverError::NonFinite { i, j });
            }
            let (lo, hi) = self.ranges[self.grid.layer_of_col[i]];
            if t < lo || t > hi {
                if self.config.strict_range {
                    return Err(SolverError::Range {
                        i,
                        j,
                        source: MaterialError::OutOfRange { temperature: t, lo, hi },
                    });
                }
                clamped += 1;
            }
        }
        Ok(clamped)
    }

    /// Solves the radial half-step from `current` over `[t, t + tau/2]`.
    pub fn radial_half_step(&self, current: &Field, t: f64, tau: f64) -> Result<HalfStep, SolverError> {
        let g = self.grid;
        let nr = g.nr();
        let ops = self.operators();
        let source = self.source.at(t + 0.5 * tau);
        let half_tau = 0.5 * tau;
        let lz = self.explicit(current, false)?;
        let cur = current.values();

        let mut iterate = current.clone();
        let mut residual = f64::INFINITY;
        for s in 1..=self.config.max_iter {
            let prev = iterate.values();
            let mut next = vec![f64::NAN; g.len()];
            let partial = self.exec.for_each_line_mut(&mut next, nr, |j, out| {
                self.radial_line(&ops, &source, j, half_tau, cur, prev, &lz, out)
            })?;
            residual = first_error(partial)?.into_iter().fold(0.0, f64::max);
            iterate = Field::from_values(g, next);
            if residual < self.config.epsilon {
                let clamped_cells = self.check_range(&iterate)?;
                return Ok(HalfStep {
                    field: iterate,
                    iterations: s,
                    residual,
                    clamped_cells,
                });
            }
        }
        Err(SolverError::NonConverged {
            iterations: self.config.max_iter,
            residual,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn radial_line(
        &self,
        ops: &Operators<'_>,
        source: &FrozenSource<'_>,
        j: usize,
        half_tau: f64,
        cur: &[f64],
        prev: &[f64],
        lz: &[f64],
        out: &mut [f64],
    ) -> Result<f64, ThomasError> {
        let g = self.grid;
        let n = g.row_len[j];
        let base = j * g.nr();
        let (cur, prev, lz) = (&cur[base..base + n], &prev[base..base + n], &lz[base..base + n]);
        let mut m = LineScratch::new(n);
        let mut k_in = 0.0;
        for i in 0..n {
            let k_out = if i + 1 < n {
                ops.radial_conductance(i, prev[i], prev[i + 1])
            } else {
                0.0
            };
            let w = g.r_centers[i] * g.hbar[i];
            let cap = ops.material(i).capacity(prev[i]) * w / half_tau;
            let x = source.density(self.cell(i, j), prev[i]);
            let flux_out = if i + 1 < n { k_out * (cur[i + 1] - cur[i]) } else { 0.0 };
            let flux_in = if i > 0 { k_in * (cur[i] - cur[i - 1]) } else { 0.0 };
            m.lower[i] = -k_in;
            m.upper[i] = -k_out;
            m.diag[i] = cap + k_in + k_out;
            m.rhs[i] = flux_out - flux_in + w * (lz[i] + x);
            k_in = k_out;
        }
        m.solve(n)?;
        let mut change: f64 = 0.0;
        for i in 0..n {
            let v = cur[i] + m.rhs[i];
            change = change.max((v - prev[i]).abs());
            out[i] = v;
        }
        Ok(change)
    }

    /// Solves the axial half-step from the half-layer field `half` over
    /// `[t + tau/2, t + tau]`.
    pub fn axial_half_step(&self, half: &Field, t: f64, tau: f64) -> Result<HalfStep, SolverError> {
        let g = self.grid;
        let (nr, nz) = (g.nr(), g.nz());
        let ops = self.operators();
        let source = self.source.at(t + 0.5 * tau);
        let half_tau = 0.5 * tau;
        let lr = self.explicit(half, true)?;
        let lr_cols = self.transpose(&lr, nz, nr)?;
        let bar_cols = self.transpose(half.values(), nz, nr)?;

        let mut prev = bar_cols.clone();
        let mut residual = f64::INFINITY;
        for s in 1..=self.config.max_iter {
            let mut next = vec![f64::NAN; g.len()];
            let partial = self.exec.for_each_line_mut(&mut next, nz, |i, out| {
                self.axial_line(&ops, &source, i, half_tau, &bar_cols, &prev, &lr_cols, out)
            })?;
            residual = first_error(partial)?.into_iter().fold(0.0, f64::max);
            prev = next;
            if residual < self.config.epsilon {
                let field = Field::from_values(g, self.transpose(&prev, nr, nz)?);
                let clamped_cells = self.check_range(&field)?;
                return Ok(HalfStep {
                    field,
                    iterations: s,
                    residual,
                    clamped_cells,
                });
            }
        }
        Err(SolverError::NonConverged {
            iterations: self.config.max_iter,
            residual,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn axial_line(
        &self,
        ops: &Operators<'_>,
        source: &FrozenSource<'_>,
        i: usize,
        half_tau: f64,
        bar: &[f64],
        prev: &[f64],
        lr: &[f64],
        out: &mut [f64],
    ) -> Result<f64, ThomasError> {
        let g = self.grid;
        let n = g.col_len[i];
        let base = i * g.nz();
        let (bar, prev, lr) = (&bar[base..base + n], &prev[base..base + n], &lr[base..base + n]);
        let material = ops.material(i);
        let mut m = LineScratch::new(n);
        let mut k_in = 0.0;
        for j in 0..n {
            let eb = g.etabar[j];
            let cap = material.capacity(bar[j]) * eb / half_tau;
            let x = source.density(self.cell(i, j), bar[j]);
            let (k_out, flux_out) = if j + 1 < n {
                let k = ops.axial_conductance(i, j, prev[j], prev[j + 1]);
                (k, k * (bar[j + 1] - bar[j]))
            } else if let Some((k, t0)) = ops.terminal_conductance(i, prev[j]) {
                (k, k * (t0 - bar[j]))
            } else {
                (0.0, 0.0)
            };
            let flux_in = if j > 0 { k_in * (bar[j] - bar[j - 1]) } else { 0.0 };
            m.lower[j] = -k_in;
            m.upper[j] = if j + 1 < n { -k_out } else { 0.0 };
            m.diag[j] = cap + k_in + k_out;
            m.rhs[j] = flux_out - flux_in + eb * (lr[j] + x);
            k_in = k_out;
        }
        m.solve(n)?;
        let mut change: f64 = 0.0;
        for j in 0..n {
            let v = bar[j] + m.rhs[j];
            change = change.max((v - prev[j]).abs());
            out[j] = v;
        }
        Ok(change)
    }

    /// Attempts one full step of exactly `tau`.
    pub fn try_step(&self, current: &Field, t: f64, tau: f64) -> Result<(HalfStep, HalfStep), SolverError> {
        let half = self.radial_half_step(current, t, tau)?;
        let full = self.axial_half_step(&half.field, t, tau)?;
        Ok((half, full))
    }

    /// One evolution step starting with `initial_tau(t)`.
    pub fn adi_step(&self, current: &Field, t: f64) -> Result<StepReport, SolverError> {
        self.step_from(current, t, self.initial_tau(t))
    }

    /// One evolution step starting from the trial step `tau`, halving it
    /// until both half-step iterations converge.
    pub fn step_from(&self, current: &Field, t: f64, tau: f64) -> Result<StepReport, SolverError> {
        let tau_min = self.tau_min();
        let mut tau = tau;
        let mut halvings = 0;
        loop {
            if tau < tau_min {
                return Err(SolverError::TauFloor { t, tau, tau_min });
            }
            match self.try_step(current, t, tau) {
                Ok((half, full)) => {
                    return Ok(StepReport {
                        field: full.field,
                        tau,
                        halvings,
                        radial_iterations: half.iterations,
                        axial_iterations: full.iterations,
                        clamped_cells: half.clamped_cells.max(full.clamped_cells),
                    })
                }
                Err(SolverError::NonConverged { .. }) => {
                    tau *= 0.5;
                    halvings += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// `t_trs / tau_transient_divisor` inside a pulse edge window,
/// `t_src / tau_source_divisor` elsewhere.
pub fn initial_tau(t: f64, timing: &PulseTiming, config: &SolverConfig) -> f64 {
    if timing.in_transition(t) {
        timing.t_trs / config.tau_transient_divisor
    } else {
        timing.t_src / config.tau_source_divisor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{paper_cell_domain, DomainSpec, GridSpec};
    use crate::materials::{MaterialTable, PropertyTable};
    use crate::source::{NoSource, SourceSpec};

    fn small_stepped() -> Grid {
        let d = DomainSpec {
            layer_radii: vec![0.5, 1.0],
            core_length: 2.0,
            outer_length: 1.5,
            layer_materials: vec!["a".into(), "b".into()],
            source_layer: 1,
        };
        Grid::build(
            &d,
            &GridSpec {
                radial_divisions: vec![4, 3],
                axial_divisions_core: 6,
                axial_divisions_outer: 4,
            },
        )
        .unwrap()
    }

    fn mats(nonlinear: bool) -> LayerMaterials {
        let mut a = MaterialTable::uniform("a", 2.0, 1.5, 1.0);
        let mut b = MaterialTable::uniform("b", 1.0, 1.0, 0.3);
        if nonlinear {
            a.conductivity = PropertyTable::linear(1.0, 0.1, 0.0, 1000.0);
            b.heat_capacity = PropertyTable::linear(0.5, 0.05, 0.0, 1000.0);
        }
        LayerMaterials::new(vec![a, b]).unwrap()
    }

    #[test]
    fn initial_tau_windows() {
        let p = SourceSpec::reference_pulse().timing();
        let c = SolverConfig::default();
        assert!((initial_tau(0.5e-4, &p, &c) - 1e-7).abs() < 1e-20);
        assert!((initial_tau(0.05, &p, &c) - 1e-4).abs() < 1e-18);
        assert!((initial_tau(0.3 + 0.01 + 0.5e-4, &p, &c) - 1e-7).abs() < 1e-20);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let g = Grid::build(
            &paper_cell_domain(),
            &GridSpec {
                radial_divisions: vec![8, 4, 4, 2],
                axial_divisions_core: 10,
                axial_divisions_outer: 8,
            },
        )
        .unwrap();
        let m = LayerMaterials::new(vec![MaterialTable::uniform("x", 1.0, 1.0, 1.0); 4]).unwrap();
        let s = Solver::new(
            &g,
            &m,
            &NoSource,
            SolverConfig::default(),
            StepRule::Pulse(SourceSpec::reference_pulse().timing()),
            Executor::sequential(),
        )
        .unwrap();
        let f = Field::uniform(&g, 4.2);
        let rep = s.adi_step(&f, 0.0).unwrap();
        assert!(rep.field.bitwise_eq(&f));
        assert_eq!((rep.radial_iterations, rep.axial_iterations), (1, 1));
        assert_eq!(rep.tau, 1e-4 / 1000.0);
    }

    #[test]
    fn constant_coefficients_converge_in_two_iterations() {
        let g = small_stepped();
        let m = mats(false);
        let s = Solver::new(
            &g,
            &m,
            &NoSource,
            SolverConfig {
                epsilon: 1e-13,
                ..SolverConfig::default()
            },
            StepRule::Fixed(0.05),
            Executor::sequential(),
        )
        .unwrap();
        let f = Field::from_fn(&g, |i, j| 4.2 + (i * 7 + j * 3) as f64 % 5.0);
        let rep = s.adi_step(&f, 0.0).unwrap();
        assert_eq!(rep.radial_iterations, 2);
        assert_eq!(rep.axial_iterations, 2);
    }

    #[test]
    fn insulated_box_conserves_heat() {
        let g = small_stepped();
        let m = mats(false);
        let s = Solver::new(
            &g,
            &m,
            &NoSource,
            SolverConfig {
                terminal: TerminalFace::Insulated,
                ..SolverConfig::default()
            },
            StepRule::Fixed(0.1),
            Executor::sequential(),
        )
        .unwrap();
        let mut f = Field::from_fn(&g, |i, j| 10.0 + ((i * 13 + j * 7) % 11) as f64);
        let q0 = f.weighted_heat(&g, &m);
        for k in 0..20 {
            f = s.adi_step(&f, k as f64 * 0.1).unwrap().field;
        }
        assert!(((f.weighted_heat(&g, &m) - q0) / q0).abs() < 1e-12);
    }

    #[test]
    fn forced_halving_and_floor() {
        let g = small_stepped();
        let m = mats(true);
        let f = Field::from_fn(&g, |i, _| if i < 4 { 4.2 } else { 60.0 });
        let cfg = SolverConfig {
            max_iter: 1,
            ..SolverConfig::default()
        };
        let s = Solver::new(&g, &m, &NoSource, cfg.clone(), StepRule::Fixed(0.1), Executor::sequential()).unwrap();
        let rep = s.adi_step(&f, 0.0).unwrap();
        assert!(rep.halvings >= 1);
        assert_eq!(rep.tau, 0.1 / 2f64.powi(rep.halvings as i32));

        let s = Solver::new(
            &g,
            &m,
            &NoSource,
            SolverConfig {
                tau_min: Some(0.06),
                ..cfg
            },
            StepRule::Fixed(0.1),
            Executor::sequential(),
        )
        .unwrap();
        assert!(matches!(s.adi_step(&f, 0.0), Err(SolverError::TauFloor { .. })));
    }

    #[test]
    fn strict_range_rejects_out_of_table_temperatures() {
        let g = small_stepped();
        let mut a = MaterialTable::uniform("a", 1.0, 1.0, 1.0);
        a.heat_capacity = PropertyTable::new(&[(4.0, 1.0), (50.0, 2.0)]);
        let m = LayerMaterials::new(vec![a, MaterialTable::uniform("b", 1.0, 1.0, 1.0)]).unwrap();
        let f = Field::uniform(&g, 80.0);
        let mut cfg = SolverConfig {
            terminal: TerminalFace::Insulated,
            ..SolverConfig::default()
        };
        let s = Solver::new(&g, &m, &NoSource, cfg.clone(), StepRule::Fixed(0.01), Executor::sequential()).unwrap();
        assert_eq!(s.adi_step(&f, 0.0).unwrap().clamped_cells, g.col_len[..4].iter().sum::<usize>());
        cfg.strict_range = true;
        let s = Solver::new(&g, &m, &NoSource, cfg, StepRule::Fixed(0.01), Executor::sequential()).unwrap();
        assert!(matches!(s.adi_step(&f, 0.0), Err(SolverError::Range { .. })));
    }

    #[test]
    fn bad_config_rejected() {
        let g = small_stepped();
        let m = mats(false);
        for cfg in [
            SolverConfig {
                epsilon: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                max_iter: 0,
                ..SolverConfig::default()
            },
        ] {
            assert!(matches!(
                Solver::new(&g, &m, &NoSource, cfg, StepRule::Fixed(0.1), Executor::sequential()),
                Err(SolverError::Config(_))
            ));
        }
    }
}
