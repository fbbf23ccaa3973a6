//! Pulsed Joule heating.
//!
//! The current is switched on for `t_src` at the start of every period
//! `t_per`. Two waveforms are provided: an ideal rectangular train and an
//! erf-smoothed one whose edges take roughly `t_trs` to settle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainSpec, Grid};
use crate::materials::{LayerMaterials, MaterialTable};

#[derive(Debug, Error, PartialEq)]
pub enum SourceError {
    #[error("source parameter `{field}` is invalid: {reason}")]
    Invalid { field: &'static str, reason: &'static str },
    #[error("source layer material `{0}` has no resistivity table")]
    MissingResistivity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Waveform {
    Rectangular,
    #[default]
    Transient,
}

fn default_xi() -> f64 {
    4.0
}

fn default_zeta() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub t_per: f64,
    pub t_src: f64,
    pub t_trs: f64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Current amplitude `I0` in the source layer.
    pub current: f64,
    /// Source-layer cross-section; derived from the geometry when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_section: Option<f64>,
    #[serde(default)]
    pub waveform: Waveform,
    /// Use `chi * (I / S)^2` instead of `chi * I^2 / S`.
    #[serde(default)]
    pub joule_dimensional: bool,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |field, reason| Err(SourceError::Invalid { field, reason });
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.t_per) {
            return bad("t_per", "must be positive");
        }
        if !pos(self.t_src) || self.t_src > self.t_per {
            return bad("t_src", "must satisfy 0 < t_src <= t_per");
        }
        if !pos(self.t_trs) || self.t_trs >= self.t_src {
            return bad("t_trs", "must satisfy 0 < t_trs < t_src");
        }
        if !pos(self.xi) {
            return bad("xi", "must be positive");
        }
        if !pos(self.zeta) {
            return bad("zeta", "must be positive");
        }
        if !(self.current.is_finite() && self.current >= 0.0) {
            return bad("current", "must be non-negative");
        }
        if let Some(s) = self.cross_section {
            if !pos(s) {
                return bad("cross_section", "must be positive");
            }
        }
        Ok(())
    }

    pub fn timing(&self) -> PulseTiming {
        PulseTiming {
            t_per: self.t_per,
            t_src: self.t_src,
            t_trs: self.t_trs,
        }
    }

    pub fn pulse(&self, t: f64) -> f64 {
        match self.waveform {
            Waveform::Rectangular => pulse_rect(t, self),
            Waveform::Transient => pulse_transient(t, self),
        }
    }

    /// Peak power density per unit resistivity, `I0^2 / S` (or `(I0 / S)^2`).
    pub fn amplitude(&self, area: f64) -> f64 {
        let i2 = self.current * self.current;
        if self.joule_dimensional {
            i2 / (area * area)
        } else {
            i2 / area
        }
    }

    /// The `t_per = 0.1, t_src = 0.01, t_trs = 1e-4, I0 = 0.5742` pulse train.
    pub fn reference_pulse() -> Self {
        SourceSpec {
            t_per: 0.1,
            t_src: 0.01,
            t_trs: 1e-4,
            xi: 4.0,
            zeta: 2.0,
            current: 0.5742,
            cross_section: None,
            waveform: Waveform::Transient,
            joule_dimensional: false,
        }
    }
}

/// Period, heating duration and edge duration of a pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTiming {
    pub t_per: f64,
    pub t_src: f64,
    pub t_trs: f64,
}

impl PulseTiming {
    /// Tolerance for deciding that a time sits on a pulse edge.
    pub fn edge_eps(&self) -> f64 {
        1e-6 * self.t_trs
    }

    /// Period index and phase of `t`, snapping phases within `edge_eps` of
    /// the next period start onto it.
    pub fn phase(&self, t: f64) -> (f64, f64) {
        let n = (t / self.t_per).floor();
        let mut phase = t - n * self.t_per;
        let mut n = n;
        if phase < 0.0 {
            n -= 1.0;
            phase += self.t_per;
        }
        if self.t_per - phase <= self.edge_eps() {
            n += 1.0;
            phase = 0.0;
        }
        (n, phase.max(0.0))
    }

    /// Whether `t` lies in a turn-on `[0, t_trs]` or turn-off
    /// `[t_src, t_src + t_trs]` window.
    pub fn in_transition(&self, t: f64) -> bool {
        let (_, p) = self.phase(t);
        let eps = self.edge_eps();
        p <= self.t_trs + eps || (p >= self.t_src - eps && p <= self.t_src + self.t_trs + eps)
    }

    /// First pulse edge (turn-on or turn-off instant) strictly after `t`.
    pub fn next_edge(&self, t: f64) -> f64 {
        let (n, p) = self.phase(t);
        let base = n * self.t_per;
        if p + self.edge_eps() < self.t_src {
            base + self.t_src
        } else {
            base + self.t_per
        }
    }
}

/// Rectangular pulse train, on for `t mod t_per` in `[0, t_src)`.
pub fn pulse_rect(t: f64, spec: &SourceSpec) -> f64 {
    let (_, phase) = spec.timing().phase(t);
    if phase < spec.t_src {
        1.0
    } else {
        0.0
    }
}

/// erf-smoothed pulse train.
///
/// Only the periods whose edges lie within the erf saturation width of `t`
/// contribute; all other terms are below 1e-16.
pub fn pulse_transient(t: f64, spec: &SourceSpec) -> f64 {
    let mut n = (t / spec.t_per).floor();
    let mut phase = t - n * spec.t_per;
    if phase < 0.0 {
        n -= 1.0;
        phase += spec.t_per;
    }
    pulse_transient_phase(n.max(0.0) as u64, phase, spec)
}

/// The smoothed pulse at `phase` within period `n`, summing the terms of
/// periods `n + 1` down to the first that still contributes. For `n` past the
/// start-up periods the result does not depend on `n`.
pub fn pulse_transient_phase(n: u64, phase: f64, spec: &SourceSpec) -> f64 {
    let SourceSpec {
        t_per,
        t_src,
        t_trs,
        xi,
        zeta,
        ..
    } = *spec;
    let arg = |s: f64| xi * (zeta * s / t_trs - 1.0);
    // erf(x) is within 1e-16 of +-1 for |x| > 6
    let width = t_trs * (1.0 + 6.0 / xi) / zeta;
    let back = ((t_src + width - phase) / t_per).floor().max(0.0) as u64;
    let mut sum = 0.0;
    // the next period's turn-on edge
    if phase > t_per - width {
        let s = phase - t_per;
        sum += erf_diff(arg(s), arg(s - t_src));
    }
    for k in 0..=back.min(n) {
        let s = phase + k as f64 * t_per;
        sum += erf_diff(arg(s), arg(s - t_src));
    }
    0.5 * sum
}

/// `erf(a) - erf(b)` without cancellation when both lie in the same tail.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a < 0.0 && b < 0.0 {
        libm::erfc(-a) - libm::erfc(-b)
    } else if a > 0.0 && b > 0.0 {
        libm::erfc(b) - libm::erfc(a)
    } else {
        libm::erf(a) - libm::erf(b)
    }
}

/// Where a cell sits, passed to [`HeatSource`] implementations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRef {
    pub i: usize,
    pub j: usize,
    pub layer: usize,
    pub r: f64,
    pub z: f64,
}

/// Volumetric heat source `X(T, t, r, z)`.
pub trait HeatSource: Sync {
    /// Power density at `cell` with local temperature `temp` at time `t`.
    fn density(&self, cell: CellRef, temp: f64, t: f64) -> f64;

    /// Fixes the time argument once per half-step. The default defers to
    /// [`HeatSource::density`].
    fn at(&self, t: f64) -> FrozenSource<'_> {
        FrozenSource::Dynamic { source: self.as_dyn(), t }
    }

    fn as_dyn(&self) -> &dyn HeatSource;

    /// True when the source is identically zero.
    fn is_zero(&self) -> bool {
        false
    }
}

/// A source with its time argument fixed.
pub enum FrozenSource<'a> {
    Zero,
    /// `scale * chi(T)` on the given layer, zero elsewhere.
    Joule {
        layer: usize,
        chi: &'a MaterialTable,
        scale: f64,
    },
    Dynamic { source: &'a dyn HeatSource, t: f64 },
}

impl FrozenSource<'_> {
    #[inline]
    pub fn density(&self, cell: CellRef, temp: f64) -> f64 {
        match self {
            FrozenSource::Zero => 0.0,
            FrozenSource::Joule { layer, chi, scale } => {
                if cell.layer == *layer && *scale != 0.0 {
                    let table = chi.resistivity.as_ref().expect("checked at construction");
                    scale * table.eval(temp)
                } else {
                    0.0
                }
            }
            FrozenSource::Dynamic { source, t } => source.density(cell, temp, *t),
        }
    }
}

/// No heat input.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSource;

impl HeatSource for NoSource {
    fn density(&self, _: CellRef, _: f64, _: f64) -> f64 {
        0.0
    }
    fn at(&self, _: f64) -> FrozenSource<'_> {
        FrozenSource::Zero
    }
    fn as_dyn(&self) -> &dyn HeatSource {
        self
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// Joule heating `chi(T) * I0^2 / S_C * p(t)` in the source layer.
#[derive(Debug, Clone)]
pub struct JouleSource {
    spec: SourceSpec,
    layer: usize,
    material: MaterialTable,
    area: f64,
}

impl JouleSource {
    pub fn new(spec: SourceSpec, domain: &DomainSpec, materials: &LayerMaterials) -> Result<Self, SourceError> {
        spec.validate()?;
        let layer = domain.source_layer;
        let material = materials.layer(layer).clone();
        if material.resistivity.is_none() {
            return Err(SourceError::MissingResistivity(material.name));
        }
        let area = spec.cross_section.unwrap_or_else(|| domain.layer_area(layer));
        Ok(JouleSource {
            spec,
            layer,
            material,
            area,
        })
    }

    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn layer(&self) -> usize {
        self.layer
    }
}

impl HeatSource for JouleSource {
    fn density(&self, cell: CellRef, temp: f64, t: f64) -> f64 {
        self.at(t).density(cell, temp)
    }

    fn at(&self, t: f64) -> FrozenSource<'_> {
        FrozenSource::Joule {
            layer: self.layer,
            chi: &self.material,
            scale: self.spec.amplitude(self.area) * self.spec.pulse(t),
        }
    }

    fn as_dyn(&self) -> &dyn HeatSource {
        self
    }

    fn is_zero(&self) -> bool {
        self.spec.current == 0.0
    }
}

/// Total source power `sum X * 2 pi r hbar etabar` over the grid, for diagnostics.
pub fn total_power(grid: &Grid, source: &FrozenSource<'_>, field: &[f64]) -> f64 {
    grid.cells()
        .map(|(i, j)| {
            let cell = CellRef {
                i,
                j,
                layer: grid.layer_of_col[i],
                r: grid.r_centers[i],
                z: grid.z_centers[j],
            };
            2.0 * std::f64::consts::PI * grid.weight(i, j) * source.density(cell, field[grid.index(i, j)])
        })
        .sum()
}
