//! Time evolution until a requested end time or the periodic regime.
//!
//! Steps start at `initial_tau(t)` and are shortened so they never jump
//! over a pulse edge or past the end time. The probe trace is stored raw,
//! one row per accepted step, and is also resampled at fixed phases of the
//! pulse period for the periodic-regime detector.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Grid};
use crate::solver::{Field, Solver, SolverError, StepRule};
use crate::source::PulseTiming;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("probe: {0}")]
    Probe(#[from] GeometryError),
    #[error("t_end must be positive, got {0}")]
    BadEndTime(f64),
    #[error("invalid runner configuration: {0}")]
    Config(String),
}

/// Failure during evolution, with the last accepted state for post-mortem output.
#[derive(Debug, Error)]
#[error("evolution failed at t = {}: {error}", state.t)]
pub struct EvolveFailure {
    pub state: Box<EvolutionState>,
    #[source]
    pub error: SolverError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeLocation {
    pub r: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotPhase {
    /// Just before the source turns on.
    On,
    /// Just after the source turns off.
    Off,
    #[default]
    Both,
    None,
}

impl SnapshotPhase {
    fn wants(self, kind: SnapshotKind) -> bool {
        matches!(
            (self, kind),
            (SnapshotPhase::Both, _)
                | (SnapshotPhase::On, SnapshotKind::BeforeTurnOn)
                | (SnapshotPhase::Off, SnapshotKind::AfterTurnOff)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    BeforeTurnOn,
    AfterTurnOff,
}

impl SnapshotKind {
    pub fn label(self) -> &'static str {
        match self {
            SnapshotKind::BeforeTurnOn => "before_turn_on",
            SnapshotKind::AfterTurnOff => "after_turn_off",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeDetectorConfig {
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_min_periods")]
    pub min_periods: usize,
}

fn default_samples() -> usize {
    64
}
fn default_tolerance() -> f64 {
    1e-3
}
fn default_min_periods() -> usize {
    2
}
fn yes() -> bool {
    true
}

impl Default for RegimeDetectorConfig {
    fn default() -> Self {
        RegimeDetectorConfig {
            samples_per_period: default_samples(),
            tolerance: default_tolerance(),
            min_periods: default_min_periods(),
        }
    }
}

impl RegimeDetectorConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.samples_per_period == 0 || self.min_periods == 0 || !(self.tolerance > 0.0) {
            return Err(RunError::Config(
                "samples_per_period, tolerance and min_periods must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerConfig {
    #[serde(default)]
    pub detector: RegimeDetectorConfig,
    /// Stop as soon as the periodic regime is detected.
    #[serde(default = "yes")]
    pub stop_on_periodic: bool,
    /// Probe points; the outer surface at `z = 0` when empty.
    #[serde(default)]
    pub probes: Vec<ProbeLocation>,
    #[serde(default)]
    pub snapshot_phase: SnapshotPhase,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            detector: RegimeDetectorConfig::default(),
            stop_on_periodic: true,
            probes: Vec::new(),
            snapshot_phase: SnapshotPhase::Both,
        }
    }
}

/// Temperature of the masked cell nearest to `location`.
pub fn probe(grid: &Grid, field: &Field, location: ProbeLocation) -> Result<f64, GeometryError> {
    let (i, j) = grid.nearest_cell(location.r, location.z)?;
    Ok(field.get(i, j))
}

/// True when the last `min_periods` consecutive period pairs differ by less
/// than `tolerance` at every phase sample. Each period is a flat vector of
/// phase samples (all probes).
pub fn detect_periodic(periods: &[Vec<f64>], cfg: &RegimeDetectorConfig) -> bool {
    let need = cfg.min_periods + 1;
    if periods.len() < need {
        return false;
    }
    let recent = &periods[periods.len() - need..];
    recent.windows(2).all(|w| {
        w[0].len() == w[1].len()
            && w[0]
                .iter()
                .zip(&w[1])
                .all(|(a, b)| (a - b).abs() < cfg.tolerance)
    })
}

/// One resampled point of the probe trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub t: f64,
    pub period: u64,
    pub phase_index: usize,
    pub values: Vec<f64>,
}

/// Resamples a trace at `samples_per_period` fixed phases and keeps the
/// most recent complete periods.
#[derive(Debug, Clone)]
pub struct PeriodicDetector {
    cfg: RegimeDetectorConfig,
    t_per: f64,
    next_sample: Option<u64>,
    last: Option<(f64, Vec<f64>)>,
    current: Vec<f64>,
    periods: VecDeque<Vec<f64>>,
    samples: Vec<PhaseSample>,
}

impl PeriodicDetector {
    pub fn new(cfg: RegimeDetectorConfig, t_per: f64) -> Self {
        PeriodicDetector {
            cfg,
            t_per,
            next_sample: None,
            last: None,
            current: Vec::new(),
            periods: VecDeque::new(),
            samples: Vec::new(),
        }
    }

    fn dt(&self) -> f64 {
        self.t_per / self.cfg.samples_per_period as f64
    }

    fn sample_time(&self, k: u64) -> f64 {
        let s = self.cfg.samples_per_period as u64;
        (k / s) as f64 * self.t_per + (k % s) as f64 * self.dt()
    }

    /// Feeds one trace point; returns true when a period was completed.
    pub fn push(&mut self, t: f64, values: &[f64]) -> bool {
        let s = self.cfg.samples_per_period as u64;
        let mut k = match self.next_sample {
            Some(k) => k,
            None => {
                // first full period boundary at or after the first point
                let first = (t / self.t_per - 1e-9).ceil().max(0.0) as u64;
                first * s
            }
        };
        let mut completed = false;
        match &self.last {
            None => {
                if (self.sample_time(k) - t).abs() <= 1e-9 * self.t_per {
                    self.record(k, values.to_vec());
                    completed |= self.close_period(k);
                    k += 1;
                }
            }
            Some((ta, va)) => {
                let (ta, va) = (*ta, va.clone());
                loop {
                    let tk = self.sample_time(k);
                    if tk > t || tk < ta {
                        break;
                    }
                    let w = if t > ta { (tk - ta) / (t - ta) } else { 1.0 };
                    let v: Vec<f64> = va.iter().zip(values).map(|(a, b)| a + (b - a) * w).collect();
                    self.record(k, v);
                    completed |= self.close_period(k);
                    k += 1;
                }
            }
        }
        self.next_sample = Some(k);
        self.last = Some((t, values.to_vec()));
        completed
    }

    fn record(&mut self, k: u64, values: Vec<f64>) {
        let s = self.cfg.samples_per_period as u64;
        self.current.extend_from_slice(&values);
        self.samples.push(PhaseSample {
            t: self.sample_time(k),
            period: k / s,
            phase_index: (k % s) as usize,
            values,
        });
    }

    fn close_period(&mut self, k: u64) -> bool {
        let s = self.cfg.samples_per_period as u64;
        if k % s != s - 1 {
            return false;
        }
        let done = std::mem::take(&mut self.current);
        self.periods.push_back(done);
        while self.periods.len() > self.cfg.min_periods + 1 {
            self.periods.pop_front();
        }
        true
    }

    pub fn is_periodic(&self) -> bool {
        let periods: Vec<Vec<f64>> = self.periods.iter().cloned().collect();
        detect_periodic(&periods, &self.cfg)
    }

    /// Every resampled point so far.
    pub fn samples(&self) -> &[PhaseSample] {
        &self.samples
    }

    pub fn completed_periods(&self) -> usize {
        self.samples.len() / self.cfg.samples_per_period
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub tau: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub t: f64,
    pub period: u64,
    pub field: Field,
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub t: f64,
    clock: CompensatedSum,
    pub step_count: u64,
    pub halvings: u64,
    pub clamped_steps: u64,
    pub field: Field,
    pub trace: Vec<TraceRow>,
    pub detector: Option<PeriodicDetector>,
    pub snapshots: Vec<Snapshot>,
    /// Step count at which the periodic regime was first detected.
    pub periodic_since: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EndTime,
    Periodic,
}

#[derive(Debug)]
pub struct Evolution {
    pub state: EvolutionState,
    pub stop: StopReason,
}

/// Drives a [`Solver`] through time.
pub struct Runner<'s, 'a> {
    solver: &'s Solver<'a>,
    cfg: RunnerConfig,
    probes: Vec<(usize, usize)>,
    timing: Option<PulseTiming>,
}

impl<'s, 'a> Runner<'s, 'a> {
    pub fn new(solver: &'s Solver<'a>, cfg: RunnerConfig) -> Result<Self, RunError> {
        cfg.detector.validate()?;
        let grid = solver.grid();
        let locations = if cfg.probes.is_empty() {
            vec![ProbeLocation { r: grid.r_max(), z: 0.0 }]
        } else {
            cfg.probes.clone()
        };
        let probes = locations
            .iter()
            .map(|p| grid.nearest_cell(p.r, p.z))
            .collect::<Result<Vec<_>, _>>()?;
        let timing = match solver.step_rule() {
            StepRule::Pulse(p) => Some(p),
            StepRule::Fixed(_) => None,
        };
        Ok(Runner {
            solver,
            cfg,
            probes,
            timing,
        })
    }

    pub fn probe_cells(&self) -> &[(usize, usize)] {
        &self.probes
    }

    pub fn probe_values(&self, field: &Field) -> Vec<f64> {
        self.probes.iter().map(|&(i, j)| field.get(i, j)).collect()
    }

    pub fn start(&self, initial: Field) -> EvolutionState {
        let detector = self.timing.map(|p| {
            let mut d = PeriodicDetector::new(self.cfg.detector.clone(), p.t_per);
            d.push(0.0, &self.probe_values(&initial));
            d
        });
        EvolutionState {
            t: 0.0,
            clock: CompensatedSum::default(),
            step_count: 0,
            halvings: 0,
            clamped_steps: 0,
            field: initial,
            trace: Vec::new(),
            detector,
            snapshots: Vec::new(),
            periodic_since: None,
        }
    }

    /// Trial step at `t`: `initial_tau`, clipped to the next pulse edge and to `t_end`.
    pub fn trial_tau(&self, t: f64, t_end: f64) -> f64 {
        let mut tau = self.solver.initial_tau(t);
        if let Some(p) = self.timing {
            tau = tau.min(p.next_edge(t) - t);
        }
        tau.min(t_end - t)
    }

    /// Advances by one accepted step. Returns true if a pulse period was
    /// completed and the detector now reports a periodic regime.
    pub fn advance(&self, state: &mut EvolutionState, t_end: f64) -> Result<bool, SolverError> {
        let tau = self.trial_tau(state.t, t_end);
        let report = self.solver.step_from(&state.field, state.t, tau)?;
        state.clock.add(report.tau);
        state.t = state.clock.value();
        state.step_count += 1;
        state.halvings += u64::from(report.halvings);
        if report.clamped_cells > 0 {
            state.clamped_steps += 1;
        }
        state.field = report.field;
        let values = self.probe_values(&state.field);
        let mut periodic = false;
        if let Some(d) = state.detector.as_mut() {
            if d.push(state.t, &values) && d.is_periodic() {
                periodic = true;
                state.periodic_since.get_or_insert(state.step_count);
            }
        }
        state.trace.push(TraceRow {
            t: state.t,
            tau: report.tau,
            values,
        });
        self.capture(state);
        Ok(periodic)
    }

    fn capture(&self, state: &mut EvolutionState) {
        let Some(p) = self.timing else { return };
        let (n, phase) = p.phase(state.t);
        let eps = p.edge_eps();
        let kind = if phase <= eps && n >= 1.0 {
            SnapshotKind::BeforeTurnOn
        } else if (phase - p.t_src).abs() <= eps {
            SnapshotKind::AfterTurnOff
        } else {
            return;
        };
        if !self.cfg.snapshot_phase.wants(kind) {
            return;
        }
        let snap = Snapshot {
            kind,
            t: state.t,
            period: n as u64,
            field: state.field.clone(),
        };
        match state.snapshots.iter_mut().find(|s| s.kind == kind) {
            Some(slot) => *slot = snap,
            None => state.snapshots.push(snap),
        }
    }

    /// Runs until `t_end` or, if enabled, until the periodic regime is detected.
    pub fn evolve(&self, initial: Field, t_end: f64) -> Result<Evolution, EvolveFailure> {
        let state = self.start(initial);
        self.resume(state, t_end)
    }

    pub fn resume(&self, mut state: EvolutionState, t_end: f64) -> Result<Evolution, EvolveFailure> {
        if !(t_end > 0.0) {
            return Err(EvolveFailure {
                state: Box::new(state),
                error: SolverError::Config(format!("t_end must be positive, got {t_end}")),
            });
        }
        let done = 1e-12 * t_end;
        while t_end - state.t > done {
            match self.advance(&mut state, t_end) {
                Ok(true) if self.cfg.stop_on_periodic => {
                    return Ok(Evolution {
                        state,
                        stop: StopReason::Periodic,
                    })
                }
                Ok(_) => {}
                Err(error) => {
                    return Err(EvolveFailure {
                        state: Box::new(state),
                        error,
                    })
                }
            }
        }
        Ok(Evolution {
            state,
            stop: StopReason::EndTime,
        })
    }
}
