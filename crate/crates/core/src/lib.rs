//! Transient heat conduction in an axisymmetric layered cell with a pulsed
//! Joule heater, solved by alternating-direction implicit steps.

pub mod app;
pub mod bench;
pub mod config;
pub mod geometry;
pub mod materials;
pub mod output;
pub mod parallel;
pub mod runner;
pub mod solver;
pub mod source;
pub mod validate;

pub use config::RunConfig;
pub use geometry::{DomainSpec, Grid, GridSpec};
pub use materials::{LayerMaterials, MaterialLibrary, MaterialTable, PropertyTable};
pub use parallel::{ExecPlan, Executor};
pub use runner::{Runner, RunnerConfig};
pub use solver::{Field, Solver, SolverConfig, StepRule};
pub use source::{HeatSource, JouleSource, SourceSpec};
