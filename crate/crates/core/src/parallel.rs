//! Fork-join execution of independent grid lines.
//!
//! Lines are assigned to workers statically, so the assignment never
//! depends on timing. Every line writes only its own output slice and the
//! per-line results come back in line order; any reduction over them is
//! done sequentially by the caller, which keeps results bitwise identical
//! for every worker count.

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("building worker pool: {0}")]
    Pool(String),
    #[error("line {line} failed: {message}")]
    LinePanicked { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chunking {
    /// Contiguous blocks of `ceil(count / workers)` lines.
    #[default]
    StaticBlock,
    /// Line `k` goes to worker `k % workers`.
    StaticInterleave,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecPlan {
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub chunking: Chunking,
    /// Recorded for reproducibility; thread pinning is left to the OS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_hint: Option<bool>,
}

impl Default for ExecPlan {
    fn default() -> Self {
        ExecPlan {
            workers: 1,
            chunking: Chunking::StaticBlock,
            pin_hint: None,
        }
    }
}

impl ExecPlan {
    pub fn with_workers(workers: usize) -> Self {
        ExecPlan {
            workers,
            ..Self::default()
        }
    }

    /// Line indices handled by `worker`.
    pub fn assignment(&self, count: usize, worker: usize) -> Vec<usize> {
        let w = self.workers.max(1);
        match self.chunking {
            Chunking::StaticBlock => {
                let block = count.div_ceil(w);
                let start = (worker * block).min(count);
                (start..(start + block).min(count)).collect()
            }
            Chunking::StaticInterleave => (worker..count).step_by(w).collect(),
        }
    }
}

/// A worker pool bound to an [`ExecPlan`].
pub struct Executor {
    plan: ExecPlan,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("plan", &self.plan).finish()
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

impl Executor {
    pub fn new(plan: ExecPlan) -> Result<Self, ExecError> {
        if plan.workers == 0 {
            return Err(ExecError::NoWorkers);
        }
        let pool = if plan.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(plan.workers)
                .thread_name(|k| format!("cryocell-worker-{k}"))
                .build()
                .map_err(|e| ExecError::Pool(e.to_string()))?;
            Some(pool)
        } else {
            None
        };
        Ok(Executor { plan, pool })
    }

    pub fn sequential() -> Self {
        Executor {
            plan: ExecPlan::default(),
            pool: None,
        }
    }

    pub fn plan(&self) -> &ExecPlan {
        &self.plan
    }

    pub fn workers(&self) -> usize {
        self.plan.workers
    }

    /// Runs `body` once per line, handing it the line's slice of `buf`
    /// (`buf.len() / line_len` lines). Returns the per-line results in line
    /// order once every line has finished.
    pub fn for_each_line_mut<T, R, F>(&self, buf: &mut [T], line_len: usize, body: F) -> Result<Vec<R>, ExecError>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Sync,
    {
        if buf.is_empty() || line_len == 0 {
            return Ok(Vec::new());
        }
        let count = buf.len() / line_len;
        let run = |line: usize, slice: &mut [T]| -> Result<R, ExecError> {
            catch_unwind(AssertUnwindSafe(|| body(line, slice))).map_err(|p| ExecError::LinePanicked {
                line,
                message: panic_message(p),
            })
        };

        let Some(pool) = &self.pool else {
            return buf
                .chunks_mut(line_len)
                .take(count)
                .enumerate()
                .map(|(line, slice)| run(line, slice))
                .collect();
        };

        let workers = self.plan.workers;
        let mut buckets: Vec<Vec<(usize, &mut [T])>> = (0..workers).map(|_| Vec::new()).collect();
        let block = count.div_ceil(workers);
        for (line, slice) in buf.chunks_mut(line_len).take(count).enumerate() {
            let w = match self.plan.chunking {
                Chunking::StaticBlock => line / block,
                Chunking::StaticInterleave => line % workers,
            };
            buckets[w].push((line, slice));
        }

        let mut outputs: Vec<Vec<(usize, Result<R, ExecError>)>> = (0..workers).map(|_| Vec::new()).collect();
        pool.scope(|scope| {
            for (bucket, out) in buckets.into_iter().zip(outputs.iter_mut()) {
                let run = &run;
                scope.spawn(move |_| {
                    *out = bucket.into_iter().map(|(line, slice)| (line, run(line, slice))).collect();
                });
            }
        });

        let mut slots: Vec<Option<Result<R, ExecError>>> = (0..count).map(|_| None).collect();
        for (line, r) in outputs.into_iter().flatten() {
            slots[line] = Some(r);
        }
        slots
            .into_iter()
            .map(|s| s.expect("every line is assigned to exactly one worker"))
            .collect()
    }

    /// Runs `body` for each line index and collects the results in line order.
    pub fn map_lines<R, F>(&self, count: usize, body: F) -> Result<Vec<R>, ExecError>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        let mut slots: Vec<()> = vec![(); count];
        self.for_each_line_mut(&mut slots, 1, |line, _| body(line))
    }
}

/// Convenience wrapper: run `body` for every line on a fresh executor.
pub fn parallel_for_lines<R, F>(count: usize, plan: &ExecPlan, body: F) -> Result<Vec<R>, ExecError>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    Executor::new(plan.clone())?.map_lines(count, body)
}
