//! Flux-form finite-difference operators on the shifted grid.
//!
//! Radial:
//! `Lr[T]_i = (F_{i+1/2} - F_{i-1/2}) / (r_i hbar_i)` with
//! `F_{i+1/2} = r_{i+1/2} lambda_{i+1/2} (T_{i+1} - T_i) / h_{i+1}`.
//!
//! Axial:
//! `Lz[T]_j = (G_{j+1/2} - G_{j-1/2}) / etabar_j` with
//! `G_{j+1/2} = lambda_{j+1/2} (T_{j+1} - T_j) / eta_{j+1}`.
//!
//! Fluxes through the axis and through every insulated face are zero. At
//! the terminal face `z = z_max` the boundary sits half a cell above the last
//! centre and the flux is `lambda (T0 - T_last) / (dz_last / 2)`.

use crate::geometry::Grid;
use crate::materials::{face_conductivity, HalfPointRule, LayerMaterials, MaterialTable};

/// Grid, materials and boundary data needed to evaluate fluxes.
#[derive(Clone, Copy)]
pub struct Operators<'a> {
    pub grid: &'a Grid,
    pub materials: &'a LayerMaterials,
    pub rule: HalfPointRule,
    /// Temperature held at `z = z_max`; `None` makes that face insulated.
    pub terminal: Option<f64>,
}

impl<'a> Operators<'a> {
    #[inline]
    pub fn material(&self, i: usize) -> &'a MaterialTable {
        self.materials.layer(self.grid.layer_of_col[i])
    }

    /// `r_{i+1/2} lambda_{i+1/2} / h_{i+1}` for the face between `i` and `i + 1`.
    #[inline]
    pub fn radial_conductance(&self, i: usize, t_a: f64, t_b: f64) -> f64 {
        let g = self.grid;
        let lambda = face_conductivity(self.rule, self.material(i), self.material(i + 1), t_a, t_b);
        g.r_half[i + 1] * lambda / g.h[i + 1]
    }

    /// `lambda_{j+1/2} / eta_{j+1}` for the face between `j` and `j + 1` in column `i`.
    #[inline]
    pub fn axial_conductance(&self, i: usize, j: usize, t_a: f64, t_b: f64) -> f64 {
        let m = self.material(i);
        face_conductivity(self.rule, m, m, t_a, t_b) / self.grid.eta[j + 1]
    }

    /// Conductance of the half cell between the top centre of column `i`
    /// and the terminal, or `None` when that face is insulated.
    #[inline]
    pub fn terminal_conductance(&self, i: usize, t_last: f64) -> Option<(f64, f64)> {
        let t0 = self.terminal?;
        let g = self.grid;
        if g.col_len[i] != g.nz() {
            return None;
        }
        let m = self.material(i);
        let lambda = face_conductivity(self.rule, m, m, t_last, t0);
        Some((lambda / (0.5 * g.z_widths[g.nz() - 1]), t0))
    }

    /// Radial flux `F_{i+1/2}` in row `j` (zero past the end of the row).
    #[inline]
    pub fn radial_flux(&self, field: &[f64], i: usize, j: usize) -> f64 {
        let g = self.grid;
        if i + 1 >= g.row_len[j] {
            return 0.0;
        }
        let (a, b) = (field[g.index(i, j)], field[g.index(i + 1, j)]);
        self.radial_conductance(i, a, b) * (b - a)
    }

    /// Axial flux `G_{j+1/2}` in column `i`, including the terminal face.
    #[inline]
    pub fn axial_flux(&self, field: &[f64], i: usize, j: usize) -> f64 {
        let g = self.grid;
        let a = field[g.index(i, j)];
        if j + 1 < g.col_len[i] {
            let b = field[g.index(i, j + 1)];
            self.axial_conductance(i, j, a, b) * (b - a)
        } else if let Some((k, t0)) = self.terminal_conductance(i, a) {
            k * (t0 - a)
        } else {
            0.0
        }
    }

    /// Radial operator at masked cell `(i, j)` of a row-major field.
    pub fn apply_lambda_r(&self, field: &[f64], i: usize, j: usize) -> f64 {
        let g = self.grid;
        let outer = self.radial_flux(field, i, j);
        let inner = if i == 0 { 0.0 } else { self.radial_flux(field, i - 1, j) };
        (outer - inner) / (g.r_centers[i] * g.hbar[i])
    }

    /// Axial operator at masked cell `(i, j)` of a row-major field.
    pub fn apply_lambda_z(&self, field: &[f64], i: usize, j: usize) -> f64 {
        let g = self.grid;
        let upper = self.axial_flux(field, i, j);
        let lower = if j == 0 { 0.0 } else { self.axial_flux(field, i, j - 1) };
        (upper - lower) / g.etabar[j]
    }

    /// Fills `out` (one row) with the radial operator of row `j`.
    pub fn lambda_r_row(&self, field: &[f64], j: usize, out: &mut [f64]) {
        let g = self.grid;
        let n = g.row_len[j];
        let mut inner = 0.0;
        for i in 0..n {
            let outer = self.radial_flux(field, i, j);
            out[i] = (outer - inner) / (g.r_centers[i] * g.hbar[i]);
            inner = outer;
        }
    }

    /// Fills `out` (one row) with the axial operator of row `j`.
    pub fn lambda_z_row(&self, field: &[f64], j: usize, out: &mut [f64]) {
        let g = self.grid;
        for (i, slot) in out.iter_mut().enumerate().take(g.row_len[j]) {
            *slot = self.apply_lambda_z(field, i, j);
        }
    }
}
