//! Stepped multilayer cylinder and its shifted (cell-centred) grid.
//!
//! The domain is axisymmetric. Layer 0 (the core) spans `0 <= r < r*_0`
//! and `0 <= z < core_length`; the outer layers `1..` span
//! `r*_{m-1} <= r < r*_m` and `0 <= z < outer_length`. Unknowns sit at cell
//! centres, so every layer interface falls on a cell face.
//!
//! Grid storage is row-major: index `j * nr + i`, with `i` radial and `j`
//! axial. Radial lines (fixed `j`) are contiguous.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("at least one layer is required")]
    NoLayers,
    #[error("layer radii must be positive and strictly increasing (radius {index} = {value})")]
    NonMonotoneRadii { index: usize, value: f64 },
    #[error("lengths must satisfy 0 < outer_length <= core_length (outer {outer}, core {core})")]
    BadLengths { outer: f64, core: f64 },
    #[error("{what}: expected {expected} entries, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("source layer {0} does not exist")]
    BadSourceLayer(usize),
    #[error("division count for {0} must be at least 1")]
    ZeroDivisions(&'static str),
    #[error(
        "core axial divisions ({core}) must exceed outer divisions ({outer}) when the core is longer, and equal them otherwise"
    )]
    AxialDivisions { core: usize, outer: usize },
    #[error("cell ({i}, {j}) is outside the domain")]
    OutOfMask { i: usize, j: usize },
    #[error("location (r = {r}, z = {z}) is outside the domain")]
    OutsideDomain { r: f64, z: f64 },
}

/// Layered cylinder geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Outer radius of each layer, innermost first. The last entry is `r_max`.
    pub layer_radii: Vec<f64>,
    /// Axial extent of the core (`z_max`).
    pub core_length: f64,
    /// Axial extent of the outer layers (`z_0`).
    pub outer_length: f64,
    pub layer_materials: Vec<String>,
    pub source_layer: usize,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.layer_radii.is_empty() {
            return Err(GeometryError::NoLayers);
        }
        let mut prev = 0.0;
        for (index, &value) in self.layer_radii.iter().enumerate() {
            if !(value.is_finite() && value > prev) {
                return Err(GeometryError::NonMonotoneRadii { index, value });
            }
            prev = value;
        }
        let (outer, core) = (self.outer_length, self.core_length);
        if !(outer.is_finite() && core.is_finite() && outer > 0.0 && outer <= core) {
            return Err(GeometryError::BadLengths { outer, core });
        }
        if self.layer_materials.len() != self.layer_radii.len() {
            return Err(GeometryError::CountMismatch {
                what: "layer_materials",
                expected: self.layer_radii.len(),
                found: self.layer_materials.len(),
            });
        }
        if self.source_layer >= self.layer_radii.len() {
            return Err(GeometryError::BadSourceLayer(self.source_layer));
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layer_radii.len()
    }

    pub fn r_max(&self) -> f64 {
        *self.layer_radii.last().expect("validated domain has layers")
    }

    /// Inner radius of layer `m` (0 for the core).
    pub fn inner_radius(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.layer_radii[m - 1]
        }
    }

    /// Cross-section of the annulus occupied by layer `m`.
    pub fn layer_area(&self, m: usize) -> f64 {
        let (a, b) = (self.inner_radius(m), self.layer_radii[m]);
        std::f64::consts::PI * (b * b - a * a)
    }
}

/// Cell counts for the shifted grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Radial cells per layer, innermost first.
    pub radial_divisions: Vec<usize>,
    /// Axial cells along the whole core, `[0, core_length]`.
    pub axial_divisions_core: usize,
    /// Axial cells along the outer layers, `[0, outer_length]`.
    pub axial_divisions_outer: usize,
}

/// Metric quantities of one cell as used by the flux-form operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub r: f64,
    pub hbar: f64,
    pub etabar: f64,
    /// `r_{i-1/2}`; zero on the axis.
    pub r_inner: f64,
    /// `r_{i+1/2}`.
    pub r_outer: f64,
}

/// Shifted non-uniform grid over a [`DomainSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Radial cell centres.
    pub r_centers: Vec<f64>,
    /// Radial cell widths; they sum to each layer's thickness.
    pub r_widths: Vec<f64>,
    /// Centre spacing `h_i = r_i - r_{i-1}`; `h_0 = 2 r_0` (mirror across the axis).
    pub h: Vec<f64>,
    /// `hbar_i = (h_{i+1} + h_i) / 2`, with a mirrored ghost beyond `r_max`.
    pub hbar: Vec<f64>,
    /// Face radii `r_{i-1/2}` for `i = 0..=nr`: `r_half[0] = 0`, `r_half[nr] = r_max`.
    pub r_half: Vec<f64>,
    /// Axial cell centres along the core column.
    pub z_centers: Vec<f64>,
    pub z_widths: Vec<f64>,
    /// `eta_j = z_j - z_{j-1}`; `eta_0 = 2 z_0` (mirror across `z = 0`).
    pub eta: Vec<f64>,
    /// `etabar_j = (eta_{j+1} + eta_j) / 2`, with a mirrored ghost beyond `z_max`.
    pub etabar: Vec<f64>,
    /// Layer of each radial column.
    pub layer_of_col: Vec<usize>,
    /// Number of axial cells active in each radial column.
    pub col_len: Vec<usize>,
    /// Number of radial cells active in each axial row.
    pub row_len: Vec<usize>,
    /// Interface radii (outer radius of each layer).
    pub interfaces: Vec<f64>,
    pub core_cells: usize,
    pub outer_axial_cells: usize,
    pub core_length: f64,
    pub outer_length: f64,
}

fn uniform_cells(start: f64, end: f64, n: usize, centers: &mut Vec<f64>, widths: &mut Vec<f64>) {
    let w = (end - start) / n as f64;
    for k in 0..n {
        centers.push(start + (k as f64 + 0.5) * w);
        widths.push(w);
    }
}

/// Centre spacings and their averages with mirrored ghosts at both ends.
fn spacings(centers: &[f64], widths: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = centers.len();
    let mut h = Vec::with_capacity(n);
    h.push(2.0 * centers[0]);
    for k in 1..n {
        h.push(centers[k] - centers[k - 1]);
    }
    let mut hbar = Vec::with_capacity(n);
    for k in 0..n {
        let next = if k + 1 < n { h[k + 1] } else { widths[n - 1] };
        hbar.push(0.5 * (next + h[k]));
    }
    (h, hbar)
}

impl Grid {
    pub fn build(domain: &DomainSpec, spec: &GridSpec) -> Result<Grid, GeometryError> {
        domain.validate()?;
        let layers = domain.layer_count();
        if spec.radial_divisions.len() != layers {
            return Err(GeometryError::CountMismatch {
                what: "radial_divisions",
                expected: layers,
                found: spec.radial_divisions.len(),
            });
        }
        if spec.radial_divisions.contains(&0) {
            return Err(GeometryError::ZeroDivisions("radial_divisions"));
        }
        if spec.axial_divisions_core == 0 {
            return Err(GeometryError::ZeroDivisions("axial_divisions_core"));
        }
        if spec.axial_divisions_outer == 0 {
            return Err(GeometryError::ZeroDivisions("axial_divisions_outer"));
        }
        let (core_z, outer_z) = (spec.axial_divisions_core, spec.axial_divisions_outer);
        let stepped = domain.outer_length < domain.core_length;
        if (stepped && core_z <= outer_z) || (!stepped && core_z != outer_z) {
            return Err(GeometryError::AxialDivisions {
                core: core_z,
                outer: outer_z,
            });
        }

        let mut r_centers = Vec::new();
        let mut r_widths = Vec::new();
        let mut layer_of_col = Vec::new();
        for (m, &n) in spec.radial_divisions.iter().enumerate() {
            uniform_cells(
                domain.inner_radius(m),
                domain.layer_radii[m],
                n,
                &mut r_centers,
                &mut r_widths,
            );
            layer_of_col.extend(std::iter::repeat_n(m, n));
        }
        let (h, hbar) = spacings(&r_centers, &r_widths);
        let nr = r_centers.len();
        let mut r_half = Vec::with_capacity(nr + 1);
        r_half.push(0.0);
        for i in 1..nr {
            r_half.push(0.5 * (r_centers[i - 1] + r_centers[i]));
        }
        r_half.push(domain.r_max());

        let mut z_centers = Vec::new();
        let mut z_widths = Vec::new();
        uniform_cells(0.0, domain.outer_length, outer_z, &mut z_centers, &mut z_widths);
        if stepped {
            uniform_cells(
                domain.outer_length,
                domain.core_length,
                core_z - outer_z,
                &mut z_centers,
                &mut z_widths,
            );
        }
        let (eta, etabar) = spacings(&z_centers, &z_widths);

        let core_cells = spec.radial_divisions[0];
        let col_len = layer_of_col
            .iter()
            .map(|&m| if m == 0 { core_z } else { outer_z })
            .collect();
        let row_len = (0..core_z)
            .map(|j| if j < outer_z { nr } else { core_cells })
            .collect();

        Ok(Grid {
            r_centers,
            r_widths,
            h,
            hbar,
            r_half,
            z_centers,
            z_widths,
            eta,
            etabar,
            layer_of_col,
            col_len,
            row_len,
            interfaces: domain.layer_radii.clone(),
            core_cells,
            outer_axial_cells: outer_z,
            core_length: domain.core_length,
            outer_length: domain.outer_length,
        })
    }

    /// Radial cell count (full width, rows below `outer_length`).
    pub fn nr(&self) -> usize {
        self.r_centers.len()
    }

    /// Axial cell count (full height, core column).
    pub fn nz(&self) -> usize {
        self.z_centers.len()
    }

    pub fn len(&self) -> usize {
        self.nr() * self.nz()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nr() + i
    }

    #[inline]
    pub fn in_mask(&self, i: usize, j: usize) -> bool {
        i < self.nr() && j < self.col_len[i]
    }

    pub fn active_cells(&self) -> usize {
        self.col_len.iter().sum()
    }

    pub fn r_max(&self) -> f64 {
        *self.r_half.last().expect("grid has cells")
    }

    pub fn layer_count(&self) -> usize {
        self.interfaces.len()
    }

    /// Iterates `(i, j)` over masked cells, row by row.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_len
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| (0..n).map(move |i| (i, j)))
    }

    pub fn layer_index(&self, i: usize, j: usize) -> Result<usize, GeometryError> {
        if self.in_mask(i, j) {
            Ok(self.layer_of_col[i])
        } else {
            Err(GeometryError::OutOfMask { i, j })
        }
    }

    pub fn cell_metrics(&self, i: usize, j: usize) -> Result<CellMetrics, GeometryError> {
        if !self.in_mask(i, j) {
            return Err(GeometryError::OutOfMask { i, j });
        }
        Ok(CellMetrics {
            r: self.r_centers[i],
            hbar: self.hbar[i],
            etabar: self.etabar[j],
            r_inner: self.r_half[i],
            r_outer: self.r_half[i + 1],
        })
    }

    /// Upper axial extent of the domain at radius `r`.
    pub fn z_extent(&self, r: f64) -> f64 {
        if r < self.interfaces[0] {
            self.core_length
        } else {
            self.outer_length
        }
    }

    /// Masked cell whose centre is nearest to `(r, z)`.
    pub fn nearest_cell(&self, r: f64, z: f64) -> Result<(usize, usize), GeometryError> {
        let outside = GeometryError::OutsideDomain { r, z };
        if !(r >= 0.0 && r <= self.r_max() && z >= 0.0 && z <= self.z_extent(r)) {
            return Err(outside);
        }
        let i = nearest(&self.r_centers, r);
        let j = nearest(&self.z_centers, z);
        if self.in_mask(i, j) {
            Ok((i, j))
        } else {
            Err(outside)
        }
    }

    /// Volume weight `r_i * hbar_i * etabar_j` of the flux-form scheme.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.r_centers[i] * self.hbar[i] * self.etabar[j]
    }
}

fn nearest(sorted: &[f64], x: f64) -> usize {
    let k = sorted.partition_point(|&c| c < x);
    if k == 0 {
        0
    } else if k == sorted.len() {
        k - 1
    } else if (sorted[k] - x) < (x - sorted[k - 1]) {
        k
    } else {
        k - 1
    }
}

/// The four-layer cell geometry used throughout the examples and tests.
pub fn paper_cell_domain() -> DomainSpec {
    DomainSpec {
        layer_radii: vec![0.24, 0.245, 0.25, 0.2501],
        core_length: 5.0,
        outer_length: 4.0,
        layer_materials: ["copper", "insulator", "heater", "coating"]
            .map(String::from)
            .to_vec(),
        source_layer: 2,
    }
}

/// Production grid for [`paper_cell_domain`]: 1210 x 100 cells.
pub fn paper_cell_grid() -> GridSpec {
    GridSpec {
        radial_divisions: vec![800, 200, 200, 10],
        axial_divisions_core: 100,
        axial_divisions_outer: 80,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(width: f64, n: usize) -> (DomainSpec, GridSpec) {
        (
            DomainSpec {
                layer_radii: vec![width],
                core_length: 1.0,
                outer_length: 1.0,
                layer_materials: vec!["m".into()],
                source_layer: 0,
            },
            GridSpec {
                radial_divisions: vec![n],
                axial_divisions_core: 1,
                axial_divisions_outer: 1,
            },
        )
    }

    #[test]
    fn single_cell() {
        let (d, g) = single(1.0, 1);
        let grid = Grid::build(&d, &g).unwrap();
        assert_eq!(grid.r_centers, vec![0.5]);
        assert_eq!(grid.h, vec![1.0]);
        assert_eq!(grid.hbar, vec![1.0]);
    }

    #[test]
    fn two_layer_centers() {
        let d = DomainSpec {
            layer_radii: vec![1.0, 1.5],
            core_length: 2.0,
            outer_length: 1.0,
            layer_materials: vec!["a".into(), "b".into()],
            source_layer: 1,
        };
        let g = GridSpec {
            radial_divisions: vec![2, 1],
            axial_divisions_core: 3,
            axial_divisions_outer: 2,
        };
        let grid = Grid::build(&d, &g).unwrap();
        assert_eq!(grid.r_centers, vec![0.25, 0.75, 1.25]);
        assert_eq!(grid.z_centers, vec![0.25, 0.75, 1.5]);
        assert_eq!(grid.row_len, vec![3, 3, 2]);
        assert!(grid.in_mask(2, 1));
        assert!(!grid.in_mask(2, 2));
        assert!(grid.in_mask(1, 2));
    }

    #[test]
    fn paper_cell_dimensions() {
        let grid = Grid::build(&paper_cell_domain(), &paper_cell_grid()).unwrap();
        assert_eq!(grid.nr(), 1210);
        assert_eq!(grid.nz(), 100);
        assert!((grid.r_centers[0] - 0.5 * 0.24 / 800.0).abs() < 1e-15);
        let last = *grid.r_centers.last().unwrap();
        assert!((last - (0.2501 - 0.5 * 0.0001 / 10.0)).abs() < 1e-15);
        // core extension keeps the outer axial step
        assert!((grid.z_widths[99] - 0.05).abs() < 1e-14);
    }

    #[test]
    fn uniform_hbar_and_interface_jump() {
        let (d, g) = single(1.0, 10);
        let grid = Grid::build(&d, &g).unwrap();
        for i in 1..9 {
            assert!((grid.hbar[i] - 0.1).abs() < 1e-15);
        }
        // h jumps 0.1 -> 0.01 across a face
        let d = DomainSpec {
            layer_radii: vec![0.5, 0.6],
            core_length: 1.0,
            outer_length: 1.0,
            layer_materials: vec!["a".into(), "b".into()],
            source_layer: 1,
        };
        let g = GridSpec {
            radial_divisions: vec![5, 10],
            axial_divisions_core: 1,
            axial_divisions_outer: 1,
        };
        let grid = Grid::build(&d, &g).unwrap();
        // h_5 = 0.055 (centre spacing across the face), h_6 = 0.01
        assert!((grid.h[5] - 0.055).abs() < 1e-14);
        assert!((grid.hbar[4] - (0.1 + 0.055) / 2.0).abs() < 1e-14);
        assert!((grid.hbar[5] - (0.055 + 0.01) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn axis_face_radius_is_zero() {
        let (d, g) = single(1.0, 4);
        let grid = Grid::build(&d, &g).unwrap();
        let m = grid.cell_metrics(0, 0).unwrap();
        assert_eq!(m.r_inner, 0.0);
        assert_eq!(m.r_outer, 0.25);
        assert!(grid.cell_metrics(4, 0).is_err());
    }

    #[test]
    fn layer_lookup_in_paper_cell() {
        let grid = Grid::build(&paper_cell_domain(), &paper_cell_grid()).unwrap();
        for (r, layer) in [(0.1, 0), (0.2475, 2), (0.25005, 3)] {
            let (i, j) = grid.nearest_cell(r, 0.0).unwrap();
            assert_eq!(grid.layer_index(i, j).unwrap(), layer);
        }
        // no masked cell above the outer layers
        assert!(grid.nearest_cell(0.2475, 4.5).is_err());
        assert_eq!(grid.layer_index(1000, 90), Err(GeometryError::OutOfMask { i: 1000, j: 90 }));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut d = paper_cell_domain();
        d.layer_radii[2] = 0.2;
        assert!(matches!(
            Grid::build(&d, &paper_cell_grid()),
            Err(GeometryError::NonMonotoneRadii { index: 2, .. })
        ));
        let mut d = paper_cell_domain();
        d.outer_length = 6.0;
        assert!(matches!(
            Grid::build(&d, &paper_cell_grid()),
            Err(GeometryError::BadLengths { .. })
        ));
        let mut g = paper_cell_grid();
        g.radial_divisions[1] = 0;
        assert_eq!(
            Grid::build(&paper_cell_domain(), &g),
            Err(GeometryError::ZeroDivisions("radial_divisions"))
        );
        let mut d = paper_cell_domain();
        d.source_layer = 4;
        assert_eq!(d.validate(), Err(GeometryError::BadSourceLayer(4)));
    }
}
