//! Wall-clock scaling of the ADI sweeps over worker counts.

use std::time::Instant;

use crate::app::{AppError, Problem};
use crate::parallel::ExecPlan;
use crate::runner::Runner;
use crate::output::BenchRow;

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Machine and run description written as comment lines.
    pub env: Vec<(String, String)>,
    /// Whether every worker count produced a bitwise identical field.
    pub identical: bool,
}

pub fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

/// Times `steps` evolution steps from the initial field for each worker
/// count, after one untimed warm-up step. Speedups are relative to one worker,
/// which is always measured first even when absent from `worker_counts`.
pub fn run_benchmark(problem: &Problem, worker_counts: &[usize], steps: usize) -> Result<BenchReport, AppError> {
    let mut counts = vec![1];
    counts.extend(worker_counts.iter().copied().filter(|&w| w != 1));
    let cores = available_cores();
    let mut timings = Vec::new();
    let mut reference = None;
    let mut identical = true;
    for &w in &counts {
        let plan = ExecPlan {
            workers: w,
            ..problem.config.exec.clone()
        };
        let solver = problem.solver(plan)?;
        let runner = Runner::new(&solver, problem.config.runner.clone())?;
        let t_end = problem.config.t_end;

        let mut warm = runner.start(problem.initial_field());
        runner.advance(&mut warm, t_end)?;

        let mut state = runner.start(problem.initial_field());
        let clock = Instant::now();
        for _ in 0..steps {
            runner.advance(&mut state, t_end)?;
        }
        let wall = clock.elapsed().as_secs_f64();
        match &reference {
            None => reference = Some(state.field),
            Some(r) => identical &= state.field.bitwise_eq(r),
        }
        timings.push((w, wall));
    }
    let base = timings[0].1;
    let rows = timings
        .iter()
        .filter(|(w, _)| *w != 1 || worker_counts.contains(&1))
        .map(|&(w, wall)| BenchRow {
            workers: w,
            wall_s: wall,
            speedup: base / wall,
            efficiency: base / wall / w as f64,
        })
        .collect();
    let max_workers = counts.iter().copied().max().unwrap_or(1);
    let env = vec![
        ("cores".to_string(), cores.to_string()),
        ("oversubscribed".to_string(), (max_workers > cores).to_string()),
        ("grid".to_string(), format!("{}x{}", problem.grid.nr(), problem.grid.nz())),
        ("steps".to_string(), steps.to_string()),
        ("chunking".to_string(), format!("{:?}", problem.config.exec.chunking)),
        ("os".to_string(), std::env::consts::OS.to_string()),
        ("arch".to_string(), std::env::consts::ARCH.to_string()),
    ];
    Ok(BenchReport { rows, env, identical })
}
