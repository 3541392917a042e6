//! The sequential surrogate loop for a single run.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{RangeSource, RunConfig};
use crate::benchmarks::{get_benchmark_with_record, recompute_range, Benchmark};
use crate::designs::{initial_doe, CandidatePool, Doe};
use crate::learning::{select, SelectionContext};
use crate::metrics::{
    error_measure, static_criterion, variance_criterion, variance_decomposition, BoundedCdfs, CriterionValue,
    DistributionEstimate, MethodKey, RunSummary, StoppingKind, ThresholdGrid, TracePoint, TriggerCounter,
    VarianceDecomposition,
};
use crate::rng::derive_seed;
use crate::surrogates::{GpOptions, PceOptions, Predictor, SurrogateHandle, SurrogateOptions};
use crate::{Error, Result};

/// Optimizer starts once the previous optimum is available (it is one of them).
pub const WARM_FIT_STARTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub pool: u64,
    pub design: u64,
    pub surrogate: u64,
}

impl RunSeeds {
    pub fn derive(config: &RunConfig) -> Self {
        Self {
            pool: config.pool_seed.unwrap_or_else(|| derive_seed(config.seed, &[1])),
            design: derive_seed(config.seed, &[2]),
            surrogate: derive_seed(config.seed, &[3]),
        }
    }
}

/// One iteration of the loop: the fitted state at `doe_size` and what was
/// selected next (if anything).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub doe_size: usize,
    pub eps_f: f64,
    pub eps_s: Option<f64>,
    pub eps_v: Option<f64>,
    pub selected: Option<usize>,
    pub y_star: Option<f64>,
    pub fallback: bool,
    /// Kernel fit diagnostic (log-likelihood for GP/PCK, LOO error for PCE).
    pub fit_diagnostic: f64,
    pub decomposition: Option<VarianceDecomposition>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub repetition: u32,
    pub seeds: RunSeeds,
    pub range: (f64, f64),
    pub status: RunStatus,
    pub message: Option<String>,
    pub trace: Vec<IterationRecord>,
    pub final_estimate: Option<DistributionEstimate>,
    pub evaluations: usize,
}

impl RunRecord {
    pub fn failed(config: RunConfig, repetition: u32, message: String) -> Self {
        Self {
            seeds: RunSeeds::derive(&config),
            config,
            repetition,
            range: (f64::NAN, f64::NAN),
            status: RunStatus::Error,
            message: Some(message),
            trace: Vec::new(),
            final_estimate: None,
            evaluations: 0,
        }
    }

    pub fn method(&self) -> MethodKey {
        MethodKey {
            surrogate: self.config.surrogate,
            enrichment: self.config.enrichment,
        }
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            benchmark: self.config.benchmark,
            method: self.method(),
            repetition: self.repetition,
            trace: self
                .trace
                .iter()
                .map(|t| TracePoint {
                    doe_size: t.doe_size,
                    eps_f: t.eps_f,
                    eps_s: t.eps_s,
                    eps_v: t.eps_v,
                })
                .collect(),
        }
    }
}

/// Output range used for the threshold grid.
pub fn output_range(b: &Benchmark, config: &RunConfig) -> Result<(f64, f64)> {
    match config.range_source {
        RangeSource::Table => Ok(b.operative_range()),
        RangeSource::Recompute => recompute_range(b, config.range_samples, derive_seed(config.seed, &[4])),
    }
}

/// Runs the loop for `config`. Invalid configurations are errors; failures
/// during the loop end the run with [`RunStatus::Error`].
pub fn run_sequential(config: &RunConfig) -> Result<RunRecord> {
    run_repetition(config, 0)
}

pub fn run_repetition(config: &RunConfig, repetition: u32) -> Result<RunRecord> {
    let b = get_benchmark_with_record(config.benchmark, config.ground_motion.as_deref())?;
    let joint = b.joint()?.clone();
    config.validate(b.dim())?;
    let (init, max) = config.sizes(b.dim());
    let seeds = RunSeeds::derive(config);
    let range = output_range(&b, config)?;
    let grid = ThresholdGrid::new(range.0, range.1, config.grid_intervals)?;

    let pool = CandidatePool::build(&joint, config.pool_size, seeds.pool)?;
    let reference = DistributionEstimate::empirical(&b.evaluate_all(pool.points())?, &grid);

    let mut record = RunRecord {
        config: config.clone(),
        repetition,
        seeds,
        range,
        status: RunStatus::BudgetExhausted,
        message: None,
        trace: Vec::new(),
        final_estimate: None,
        evaluations: 0,
    };

    let mut doe = Doe::new(b.dim());
    for i in initial_doe(&pool, init, seeds.design)? {
        let x = pool.points().row(i).to_vec();
        match b.evaluate(&x) {
            Ok(y) => doe.push_pool_point(i, &x, y)?,
            Err(e) => return Ok(fail(record, doe.len(), e)),
        }
    }

    let mut counter = TriggerCounter::new(config.stopping.consecutive_triggers)?;
    let mut prev: Option<DistributionEstimate> = None;
    let mut warm: Option<Vec<f64>> = None;
    loop {
        let started = Instant::now();
        let iteration = doe.len() as u64;
        let opts = SurrogateOptions {
            gp: GpOptions {
                seed: derive_seed(seeds.surrogate, &[iteration, 1]),
                starts: if warm.is_some() { WARM_FIT_STARTS } else { GpOptions::default().starts },
                warm_start: warm.clone(),
                ..GpOptions::default()
            },
            pce: PceOptions {
                max_degree: config.pce_max_degree,
                seed: derive_seed(seeds.surrogate, &[iteration, 2]),
                ..PceOptions::default()
            },
        };
        let handle = match SurrogateHandle::fit(config.surrogate, &doe.inputs, &doe.outputs, &joint, pool.scaling(), &opts)
        {
            Ok(h) => h,
            Err(e) => return Ok(fail(record, doe.len(), e)),
        };
        warm = handle.log_lengthscales();
        let predictions = handle.predict(pool.points());
        let cdfs = BoundedCdfs::from_predictions(&predictions, &grid);
        let eps_f = error_measure(&reference, &cdfs.zero)?;
        let s = static_criterion(prev.as_ref(), &cdfs.zero, config.stopping.tol)?;
        let v = variance_criterion(&cdfs, config.stopping.tol)?;
        let decomposition = match &handle {
            SurrogateHandle::Pck(m) => Some(variance_decomposition(m, pool.points())?),
            _ => None,
        };
        let stop = match config.stopping.kind {
            StoppingKind::Static => counter.record(s),
            StoppingKind::Variance => counter.record(v),
            StoppingKind::BudgetOnly => counter.record(CriterionValue {
                value: None,
                triggered: false,
            }),
        };
        let mut entry = IterationRecord {
            doe_size: doe.len(),
            eps_f,
            eps_s: s.value,
            eps_v: v.value,
            selected: None,
            y_star: None,
            fallback: false,
            fit_diagnostic: handle.fit_diagnostic(),
            decomposition,
            wall_seconds: 0.0,
        };
        let done = if stop {
            record.status = RunStatus::Converged;
            true
        } else {
            doe.len() >= max
        };
        if !done {
            let ctx = SelectionContext::new(&handle as &dyn Predictor, &pool, &doe, &grid, &cdfs, &predictions)?;
            let sel = match select(config.enrichment, &ctx) {
                Ok(s) => s,
                Err(e) => {
                    record.trace.push(entry);
                    return Ok(fail(record, doe.len(), e));
                }
            };
            entry.selected = Some(sel.index);
            entry.y_star = sel.y_star;
            entry.fallback = sel.fallback;
            let x = pool.points().row(sel.index).to_vec();
            match b.evaluate(&x) {
                Ok(y) => doe.push_pool_point(sel.index, &x, y)?,
                Err(e) => {
                    record.trace.push(entry);
                    return Ok(fail(record, doe.len(), e));
                }
            }
        }
        entry.wall_seconds = started.elapsed().as_secs_f64();
        record.trace.push(entry);
        prev = Some(cdfs.zero.clone());
        if done {
            record.final_estimate = Some(cdfs.zero);
            record.evaluations = doe.len();
            return Ok(record);
        }
    }
}

fn fail(mut record: RunRecord, doe_size: usize, e: Error) -> RunRecord {
    record.status = RunStatus::Error;
    record.message = Some(format!("at design size {doe_size}: {e}"));
    record.evaluations = doe_size;
    record
}
