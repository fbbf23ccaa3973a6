//! Drives a configured run end to end: builds the problem, evolves it and
//! writes the output directory.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, RunConfig, SnapshotFormat};
use crate::geometry::{GeometryError, Grid};
use crate::materials::LayerMaterials;
use crate::output::{self, Header, OutputError};
use crate::parallel::{ExecError, ExecPlan, Executor};
use crate::runner::{EvolutionState, RunError, Runner, StopReason};
use crate::solver::{Field, Solver, SolverError, StepRule};
use crate::source::{JouleSource, SourceError};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("source: {0}")]
    Source(#[from] SourceError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("runner: {0}")]
    Run(#[from] RunError),
    #[error("executor: {0}")]
    Exec(#[from] ExecError),
    #[error("output: {0}")]
    Output(#[from] OutputError),
    #[error("evolution failed at t = {t}: {error}; last state written to {dump}")]
    Evolve { t: f64, error: SolverError, dump: PathBuf },
}

/// Grid, materials and source owned together so solvers can borrow them.
pub struct Problem {
    pub config: RunConfig,
    pub grid: Grid,
    pub materials: LayerMaterials,
    pub source: JouleSource,
}

impl Problem {
    pub fn new(config: RunConfig) -> Result<Problem, AppError> {
        let grid = Grid::build(&config.domain, &config.grid)?;
        let materials = config.load_materials()?;
        let source = JouleSource::new(config.source.clone(), &config.domain, &materials)?;
        Ok(Problem {
            config,
            grid,
            materials,
            source,
        })
    }

    pub fn solver(&self, plan: ExecPlan) -> Result<Solver<'_>, AppError> {
        Ok(Solver::new(
            &self.grid,
            &self.materials,
            &self.source,
            self.config.solver.clone(),
            StepRule::Pulse(self.config.source.timing()),
            Executor::new(plan)?,
        )?)
    }

    pub fn initial_field(&self) -> Field {
        Field::uniform(&self.grid, self.config.initial_temperature)
    }

    pub fn header(&self) -> Header {
        Header::new(self.config.hash())
    }
}

/// What a simulation produced.
#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub t: f64,
    pub steps: u64,
    pub halvings: u64,
    pub stop: StopReason,
    pub periods: usize,
    pub files: Vec<PathBuf>,
}

/// Writes the resolved configuration next to the run's outputs.
pub fn dump_resolved(config: &RunConfig, out: &Path) -> Result<PathBuf, AppError> {
    std::fs::create_dir_all(out).map_err(|source| OutputError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let path = out.join("resolved_config.toml");
    let text = format!(
        "# cryocell {} config={}\n{}",
        output::VERSION,
        config.hash(),
        config.resolved_toml()
    );
    std::fs::write(&path, text).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn write_field(problem: &Problem, out: &Path, stem: &str, field: &Field, header: &Header) -> Result<Vec<PathBuf>, AppError> {
    let mut files = Vec::new();
    for format in &problem.config.output.snapshot_formats {
        let path = match format {
            SnapshotFormat::Csv => {
                let p = out.join(format!("{stem}.csv"));
                output::write_snapshot_csv(&p, &problem.grid, field, header)?;
                p
            }
            SnapshotFormat::Vtk => {
                let p = out.join(format!("{stem}.vtk"));
                output::write_snapshot_vtk(&p, &problem.grid, field, header)?;
                p
            }
        };
        files.push(path);
    }
    Ok(files)
}

fn write_state(problem: &Problem, runner: &Runner<'_, '_>, state: &EvolutionState, out: &Path) -> Result<Vec<PathBuf>, AppError> {
    let header = problem.header();
    let probes = runner.probe_cells().len();
    let mut files = Vec::new();
    let trace = out.join("trace.csv");
    output::write_trace(&trace, &state.trace, probes, &header)?;
    files.push(trace);
    if let Some(d) = &state.detector {
        let p = out.join("phase_trace.csv");
        output::write_phase_trace(&p, d.samples(), probes, &header)?;
        files.push(p);
    }
    for snap in &state.snapshots {
        let h = header.clone().with("t", snap.t).with("period", snap.period).with("kind", snap.kind.label());
        files.extend(write_field(problem, out, &format!("snapshot_{}", snap.kind.label()), &snap.field, &h)?);
    }
    let h = header.with("t", state.t).with("kind", "final");
    files.extend(write_field(problem, out, "final", &state.field, &h)?);
    Ok(files)
}

/// Runs the configured simulation and writes trace and snapshot files.
pub fn simulate(problem: &Problem) -> Result<SimulationSummary, AppError> {
    let out = problem.config.output_dir();
    let solver = problem.solver(problem.config.exec.clone())?;
    let runner = Runner::new(&solver, problem.config.runner.clone())?;
    match runner.evolve(problem.initial_field(), problem.config.t_end) {
        Ok(ev) => {
            let files = write_state(problem, &runner, &ev.state, &out)?;
            Ok(SimulationSummary {
                t: ev.state.t,
                steps: ev.state.step_count,
                halvings: ev.state.halvings,
                stop: ev.stop,
                periods: ev.state.detector.as_ref().map_or(0, |d| d.completed_periods()),
                files,
            })
        }
        Err(failure) => {
            let dump = out.join("failure");
            write_state(problem, &runner, &failure.state, &dump)?;
            Err(AppError::Evolve {
                t: failure.state.t,
                error: failure.error,
                dump,
            })
        }
    }
}
