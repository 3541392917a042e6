//! Browser bindings: benchmark cards, a small sequential run, and the
//! active-learning benefit ratio. The `*_json` functions hold the logic so
//! they can be tested natively; the exported wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use surrodist::benchmarks::{get_benchmark, MAX_ID};
use surrodist::designs::CandidatePool;
use surrodist::learning::Enrichment;
use surrodist::metrics::{al_benefit, DistributionEstimate, ThresholdGrid};
use surrodist::runner::{run_sequential, RunConfig, RunStatus};
use surrodist::surrogates::SurrogateKind;

/// Largest pool the page may request.
pub const MAX_DEMO_POOL: usize = 20_000;

#[derive(Debug, Serialize)]
struct DemoRun {
    label: String,
    status: RunStatus,
    evaluations: usize,
    doe_sizes: Vec<usize>,
    eps_f: Vec<f64>,
    grid: Vec<f64>,
    reference_cdf: Vec<f64>,
    estimate_cdf: Vec<f64>,
    message: Option<String>,
}

/// Cards of the benchmarks that can run, as a JSON array.
pub fn cards_json() -> Result<String, String> {
    let cards: Vec<_> = (1..=MAX_ID)
        .filter_map(|id| get_benchmark(id).ok())
        .filter(|b| b.joint().is_ok() && b.id() != 15)
        .map(|b| b.card())
        .collect();
    serde_json::to_string(&cards).map_err(|e| e.to_string())
}

/// One budget-only run with the pool-reference and final surrogate CDFs.
pub fn run_json(
    benchmark: u32,
    surrogate: &str,
    enrichment: &str,
    pool: usize,
    max_doe: usize,
    seed: u64,
) -> Result<String, String> {
    if pool > MAX_DEMO_POOL {
        return Err(format!("pool is limited to {MAX_DEMO_POOL} in the page"));
    }
    let surrogate: SurrogateKind = surrogate.parse().map_err(|e: surrodist::Error| e.to_string())?;
    let enrichment: Enrichment = enrichment.parse().map_err(|e: surrodist::Error| e.to_string())?;
    let mut cfg = RunConfig::new(benchmark, surrogate, enrichment);
    cfg.pool_size = pool;
    cfg.max_doe_size = Some(max_doe);
    cfg.seed = seed;
    let record = run_sequential(&cfg).map_err(|e| e.to_string())?;

    let b = get_benchmark(benchmark).map_err(|e| e.to_string())?;
    let grid = ThresholdGrid::new(record.range.0, record.range.1, cfg.grid_intervals).map_err(|e| e.to_string())?;
    let pool = CandidatePool::build(b.joint().map_err(|e| e.to_string())?, cfg.pool_size, record.seeds.pool)
        .map_err(|e| e.to_string())?;
    let y = b.evaluate_all(pool.points()).map_err(|e| e.to_string())?;
    let reference = DistributionEstimate::empirical(&y, &grid);

    let out = DemoRun {
        label: cfg.label(0),
        status: record.status,
        evaluations: record.evaluations,
        doe_sizes: record.trace.iter().map(|t| t.doe_size).collect(),
        eps_f: record.trace.iter().map(|t| t.eps_f).collect(),
        grid: reference.grid.clone(),
        reference_cdf: reference.cdf,
        estimate_cdf: record.final_estimate.map(|e| e.cdf).unwrap_or_default(),
        message: record.message,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// `(n_uniform - n_active) / n_uniform`.
pub fn benefit(n_uniform: usize, n_active: usize) -> Result<f64, String> {
    al_benefit(n_uniform, n_active).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = benchmarkCards)]
pub fn benchmark_cards() -> Result<String, JsError> {
    cards_json().map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = runDemo)]
pub fn run_demo(
    benchmark: u32,
    surrogate: &str,
    enrichment: &str,
    pool: usize,
    max_doe: usize,
    seed: u64,
) -> Result<String, JsError> {
    run_json(benchmark, surrogate, enrichment, pool, max_doe, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = alBenefit)]
pub fn al_benefit_js(n_uniform: usize, n_active: usize) -> Result<f64, JsError> {
    benefit(n_uniform, n_active).map_err(|e| JsError::new(&e))
}
