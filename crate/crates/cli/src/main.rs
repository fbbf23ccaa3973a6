use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cryocell::app::{self, AppError, Problem};
use cryocell::bench::run_benchmark;
use cryocell::config::{ConfigError, Mode, RunConfig};
use cryocell::output::{self, Header};
use cryocell::runner::SnapshotPhase;
use cryocell::validate;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Simulate,
    Bench,
    Validate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhaseArg {
    On,
    Off,
    Both,
    None,
}

/// Pulsed heating of a layered axisymmetric cryogenic cell.
#[derive(Debug, Parser)]
#[command(name = "cryocell", version)]
struct Cli {
    /// Run configuration file, or the name of a shipped configuration
    /// (e.g. `paper_cell`).
    #[arg(long)]
    config: String,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Worker count; a comma-separated list in bench mode.
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Output directory (default: $CRYOCELL_OUT_DIR, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    snapshot_phase: Option<PhaseArg>,
}

/// Shipped configurations live in `configs/`, looked up from the working
/// directory first and then from the source tree.
fn resolve_config(arg: &str) -> PathBuf {
    let given = PathBuf::from(arg);
    if given.is_file() || arg.contains('/') || arg.ends_with(".toml") {
        return given;
    }
    let name = format!("{arg}.toml");
    let local = Path::new("configs").join(&name);
    if local.is_file() {
        return local;
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) -> Result<(), ConfigError> {
    if let Some(m) = cli.mode {
        cfg.mode = match m {
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Bench => Mode::Bench,
            ModeArg::Validate => Mode::Validate,
        };
    }
    if let Some(w) = &cli.workers {
        if cfg.mode == Mode::Bench {
            cfg.bench.worker_counts = w.clone();
        } else if let [one] = w.as_slice() {
            cfg.exec.workers = *one;
        } else {
            return Err(ConfigError::Invalid {
                field: "--workers".into(),
                message: "takes a single count outside bench mode".into(),
            });
        }
    }
    if let Some(t) = cli.t_end {
        cfg.t_end = t;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(std::path::absolute(out).unwrap_or_else(|_| out.clone()));
    }
    if let Some(p) = cli.snapshot_phase {
        cfg.runner.snapshot_phase = match p {
            PhaseArg::On => SnapshotPhase::On,
            PhaseArg::Off => SnapshotPhase::Off,
            PhaseArg::Both => SnapshotPhase::Both,
            PhaseArg::None => SnapshotPhase::None,
        };
    }
    cfg.resolve_output_dir();
    cfg.validate()
}

fn run(cli: &Cli) -> Result<bool, AppError> {
    let mut cfg = RunConfig::load(&resolve_config(&cli.config))?;
    apply_overrides(cli, &mut cfg)?;
    let out = cfg.output_dir();
    let dumped = app::dump_resolved(&cfg, &out)?;
    println!("config {} -> {}", cfg.hash(), dumped.display());
    let problem = Problem::new(cfg)?;
    match problem.config.mode {
        Mode::Simulate => {
            let s = app::simulate(&problem)?;
            println!(
                "stopped ({:?}) at t = {} after {} steps, {} halvings, {} periods",
                s.stop, s.t, s.steps, s.halvings, s.periods
            );
            for f in &s.files {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
        Mode::Bench => {
            let b = &problem.config.bench;
            let report = run_benchmark(&problem, &b.worker_counts, b.steps)?;
            let path = out.join("bench.csv");
            let header: Header = problem.header();
            output::write_bench(&path, &report.rows, &report.env, &header)?;
            for (k, v) in &report.env {
                println!("{k}={v}");
            }
            for r in &report.rows {
                println!(
                    "workers {:>3}  wall {:.4} s  speedup {:.3}  efficiency {:.3}",
                    r.workers, r.wall_s, r.speedup, r.efficiency
                );
            }
            println!("fields identical across worker counts: {}", report.identical);
            println!("wrote {}", path.display());
            Ok(report.identical)
        }
        Mode::Validate => {
            let results = validate::run_all(&problem);
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
