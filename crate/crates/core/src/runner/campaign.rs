//! Multi-run campaigns: execution with a bounded worker set, persistence,
//! resume, and aggregation into report files.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::{CampaignSpec, RunConfig, StoppingPreset, DEFAULT_EPS_F_TOL};
use super::sequential::{run_repetition, RunRecord, RunStatus};
use crate::learning::Enrichment;
use crate::metrics::{
    benefit_table, campaign_metrics, cost_efficient_point, group_summaries, stopping_curve, Comparison, RunSummary,
    StoppingKind,
};
use crate::rng::{derive_seed, label_tag};
use crate::surrogates::SurrogateKind;
use crate::{Error, Result};

/// Environment variable overriding the worker count.
pub const JOBS_ENV: &str = "SURRODIST_JOBS";

/// Worker count: the environment override if set, else `requested`, at least 1.
pub fn worker_count(requested: usize) -> usize {
    std::env::var(JOBS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(requested)
        .max(1)
}

/// Seed of one run, from the campaign seed and the run's coordinates.
pub fn run_seed(campaign_seed: u64, benchmark: u32, surrogate: SurrogateKind, enrichment: Enrichment, rep: u32) -> u64 {
    derive_seed(
        campaign_seed,
        &[
            benchmark as u64,
            label_tag(surrogate.as_str()),
            label_tag(enrichment.as_str()),
            rep as u64,
        ],
    )
}

/// Every (config, repetition) of the campaign with seeds filled in.
pub fn expand(spec: &CampaignSpec) -> Vec<(RunConfig, u32)> {
    let mut out = Vec::new();
    for rep in 0..spec.repetitions {
        for cell in &spec.matrix {
            let mut c = cell.clone();
            c.seed = run_seed(cell.seed, c.benchmark, c.surrogate, c.enrichment, rep);
            if spec.fixed_pool {
                c.pool_seed = Some(derive_seed(cell.seed, &[c.benchmark as u64, rep as u64, 0xB00]));
            }
            out.push((c, rep));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub benchmark: u32,
    pub surrogate: SurrogateKind,
    pub enrichment: Enrichment,
    pub repetition: u32,
    pub status: RunStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: CampaignSpec,
    pub runs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub records: Vec<RunRecord>,
    /// Runs executed in this call (the rest were loaded on resume).
    pub executed: usize,
}

fn runs_dir(out: &Path) -> PathBuf {
    out.join("runs")
}

pub fn save_record(record: &RunRecord, path: &Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string(record)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Loads every run record under `dir/runs` (or `dir` itself), sorted by file name.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let base = if runs_dir(dir).is_dir() { runs_dir(dir) } else { dir.to_path_buf() };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&base)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    files.sort();
    files.iter().map(|p| load_record(p)).collect()
}

/// Runs every (cell, repetition) with `jobs` workers, writing one JSON file
/// per run plus `manifest.json`. With `resume`, runs whose file already
/// parses are loaded instead of executed.
pub fn run_campaign(spec: &CampaignSpec, jobs: usize, out: &Path, resume: bool) -> Result<CampaignResult> {
    if spec.matrix.is_empty() {
        return Err(Error::config("campaign matrix is empty"));
    }
    let dir = runs_dir(out);
    std::fs::create_dir_all(&dir)?;
    let tasks = expand(spec);
    let slots: Vec<Mutex<Option<RunRecord>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let mut pending = Vec::new();
    for (k, (cfg, rep)) in tasks.iter().enumerate() {
        let path = dir.join(format!("{}.json", cfg.label(*rep)));
        match resume.then(|| load_record(&path)) {
            Some(Ok(r)) if r.config == *cfg && r.repetition == *rep => {
                *slots[k].lock().expect("slot") = Some(r);
            }
            _ => pending.push(k),
        }
    }
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..worker_count(jobs).min(pending.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&k) = pending.get(i) else { break };
                let (cfg, rep) = &tasks[k];
                let record = run_repetition(cfg, *rep)
                    .unwrap_or_else(|e| RunRecord::failed(cfg.clone(), *rep, e.to_string()));
                if let Err(e) = save_record(&record, &dir.join(format!("{}.json", cfg.label(*rep)))) {
                    failure.lock().expect("failure").get_or_insert(e);
                }
                *slots[k].lock().expect("slot") = Some(record);
            });
        }
    });
    if let Some(e) = failure.into_inner().expect("failure") {
        return Err(e);
    }
    let records: Vec<RunRecord> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot").expect("every task ran"))
        .collect();
    let manifest = Manifest {
        spec: spec.clone(),
        runs: records
            .iter()
            .map(|r| ManifestEntry {
                file: format!("runs/{}.json", r.config.label(r.repetition)),
                benchmark: r.config.benchmark,
                surrogate: r.config.surrogate,
                enrichment: r.config.enrichment,
                repetition: r.repetition,
                status: r.status,
            })
            .collect(),
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(CampaignResult {
        records,
        executed: pending.len(),
    })
}

/// Stopping-threshold sweep used for the cost-accuracy curves.
pub fn default_thresholds() -> Vec<f64> {
    (0..=48).map(|i| 10f64.powf(-4.0 + i as f64 * 4.5 / 48.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub tols: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub triggers: Vec<usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tols: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            thresholds: default_thresholds(),
            triggers: vec![2, 3],
        }
    }
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the report CSVs into `out` and returns their paths. An empty
/// tolerance sweep writes nothing.
pub fn analyze(records: &[RunRecord], opts: &AnalysisOptions, out: &Path) -> Result<Vec<PathBuf>> {
    if opts.tols.is_empty() {
        eprintln!("warning: empty tolerance sweep, no reports written");
        return Ok(Vec::new());
    }
    let summaries: Vec<RunSummary> = records
        .iter()
        .filter(|r| r.status != RunStatus::Error && !r.trace.is_empty())
        .map(RunRecord::summary)
        .collect();
    if summaries.is_empty() {
        return Err(Error::config("no successful runs to analyze"));
    }
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();

    let mut rows = Vec::new();
    for comparison in [Comparison::Surrogate, Comparison::Enrichment, Comparison::Strategy] {
        for &tol in &opts.tols {
            let m = campaign_metrics(&summaries, tol, comparison)?;
            for x in m.methods {
                rows.push(vec![
                    format!("{comparison:?}").to_lowercase(),
                    x.method,
                    tol.to_string(),
                    x.cases.to_string(),
                    x.accuracy.to_string(),
                    x.efficiency.to_string(),
                    opt(x.cost_mean),
                ]);
            }
        }
    }
    files.push(write_csv(
        &out.join("accuracy_efficiency.csv"),
        &["comparison", "method", "eps_f_tol", "cases", "accuracy", "efficiency", "cost_mean"],
        rows,
    )?);

    let mut rows = Vec::new();
    for &tol in &opts.tols {
        for g in group_summaries(&summaries, tol) {
            rows.push(vec![
                g.benchmark.to_string(),
                g.method.surrogate.to_string(),
                g.method.enrichment.to_string(),
                tol.to_string(),
                g.repetitions.to_string(),
                g.final_mean_eps.to_string(),
                opt(g.evals_to_converge),
            ]);
        }
    }
    files.push(write_csv(
        &out.join("evaluations.csv"),
        &["benchmark", "surrogate", "enrichment", "eps_f_tol", "repetitions", "final_mean_eps_f", "evals_to_converge"],
        rows,
    )?);

    let rows = benefit_table(&group_summaries(&summaries, DEFAULT_EPS_F_TOL))
        .into_iter()
        .map(|r| {
            vec![
                r.benchmark.to_string(),
                r.surrogate.to_string(),
                opt(r.n_uniform),
                opt(r.n_al),
                opt(r.best_al),
                opt(r.lambda),
            ]
        })
        .collect();
    files.push(write_csv(
        &out.join("al_benefit.csv"),
        &["benchmark", "surrogate", "n_uniform", "n_al", "best_al", "lambda"],
        rows,
    )?);

    let mut curve_rows = Vec::new();
    let mut point_rows = Vec::new();
    let mut recommended: Vec<(f64, usize, StoppingKind, Option<f64>)> = Vec::new();
    for &tol in &opts.tols {
        for &t in &opts.triggers {
            for kind in [StoppingKind::Static, StoppingKind::Variance] {
                let curve = stopping_curve(&summaries, kind, &opts.thresholds, t, tol)?;
                for p in &curve.points {
                    curve_rows.push(vec![
                        kind.to_string(),
                        t.to_string(),
                        tol.to_string(),
                        p.threshold.to_string(),
                        p.cost.to_string(),
                        p.accuracy.to_string(),
                    ]);
                }
                let point = cost_efficient_point(&curve).ok();
                point_rows.push(vec![
                    kind.to_string(),
                    t.to_string(),
                    tol.to_string(),
                    opt(point.map(|p| p.cost)),
                    opt(point.map(|p| p.accuracy)),
                    opt(point.map(|p| p.threshold)),
                ]);
                recommended.push((tol, t, kind, point.map(|p| p.threshold)));
            }
        }
    }
    files.push(write_csv(
        &out.join("stopping_curves.csv"),
        &["criterion", "triggers", "eps_f_tol", "threshold", "cost", "accuracy"],
        curve_rows,
    )?);
    files.push(write_csv(
        &out.join("cost_efficient_points.csv"),
        &["criterion", "triggers", "eps_f_tol", "cost", "accuracy", "threshold"],
        point_rows,
    )?);

    let find = |tol: f64, t: usize, kind: StoppingKind| {
        recommended
            .iter()
            .find(|r| r.0 == tol && r.1 == t && r.2 == kind)
            .and_then(|r| r.3)
    };
    let presets = StoppingPreset::all();
    let tabulated = |tol: f64, t: usize, kind: StoppingKind| {
        presets
            .iter()
            .find(|p| (p.eps_f_tol - tol).abs() < 1e-12 && p.triggers == t)
            .map(|p| if kind == StoppingKind::Static { p.static_tol } else { p.variance_tol })
    };
    let mut rows = Vec::new();
    for &tol in &opts.tols {
        let mut row = vec![tol.to_string()];
        for t in [2, 3] {
            for kind in [StoppingKind::Static, StoppingKind::Variance] {
                row.push(opt(find(tol, t, kind)));
                row.push(opt(tabulated(tol, t, kind)));
            }
        }
        rows.push(row);
    }
    files.push(write_csv(
        &out.join("recommended_thresholds.csv"),
        &[
            "eps_f_tol",
            "t2_eps_s",
            "t2_eps_s_preset",
            "t2_eps_v",
            "t2_eps_v_preset",
            "t3_eps_s",
            "t3_eps_s_preset",
            "t3_eps_v",
            "t3_eps_v_preset",
        ],
        rows,
    )?);

    let mut rows = Vec::new();
    for r in records {
        if let Some(last) = r.trace.iter().rev().find(|t| t.decomposition.is_some()) {
            let d = last.decomposition.expect("checked");
            rows.push(vec![
                r.config.benchmark.to_string(),
                r.config.surrogate.to_string(),
                r.config.enrichment.to_string(),
                r.repetition.to_string(),
                last.doe_size.to_string(),
                d.var_global.to_string(),
                d.var_local.to_string(),
                d.covariance.to_string(),
                d.var_total.to_string(),
                d.global_share().to_string(),
                (d.var_local / d.var_total).to_string(),
            ]);
        }
    }
    files.push(write_csv(
        &out.join("variance_decomposition.csv"),
        &[
            "benchmark",
            "surrogate",
            "enrichment",
            "repetition",
            "doe_size",
            "var_global",
            "var_local",
            "covariance",
            "var_total",
            "global_share",
            "local_share",
        ],
        rows,
    )?);
    Ok(files)
}
