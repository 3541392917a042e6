//! Aggregation of run traces into the comparison metrics: accuracy,
//! efficiency and cost per method, AL benefit, and cost-accuracy curves for
//! the stopping criteria.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CriterionValue, TriggerCounter};
use crate::learning::Enrichment;
use crate::surrogates::SurrogateKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodKey {
    pub surrogate: SurrogateKind,
    pub enrichment: Enrichment,
}

impl fmt::Display for MethodKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.surrogate, self.enrichment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub doe_size: usize,
    /// Error against the reference CDF.
    pub eps_f: f64,
    pub eps_s: Option<f64>,
    pub eps_v: Option<f64>,
}

/// The part of a run record the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub benchmark: u32,
    pub method: MethodKey,
    pub repetition: u32,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoppingKind {
    Static,
    Variance,
    #[serde(rename = "budget")]
    BudgetOnly,
}

impl fmt::Display for StoppingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StoppingKind::Static => "static",
            StoppingKind::Variance => "variance",
            StoppingKind::BudgetOnly => "budget",
        })
    }
}

impl FromStr for StoppingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(StoppingKind::Static),
            "variance" => Ok(StoppingKind::Variance),
            "budget" | "budget-only" | "none" => Ok(StoppingKind::BudgetOnly),
            other => Err(Error::config(format!("unknown stopping criterion `{other}`"))),
        }
    }
}

/// Repetition-averaged error trace of one group, aligned on design size. A run
/// that stopped early contributes its last value to later sizes.
pub fn mean_trace(runs: &[&RunSummary]) -> Vec<(usize, f64)> {
    let mut sizes: Vec<usize> = runs.iter().flat_map(|r| r.trace.iter().map(|t| t.doe_size)).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .filter_map(|size| {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.trace.iter().take_while(|t| t.doe_size <= size).last().map(|t| t.eps_f))
                .collect();
            (vals.len() == runs.len()).then(|| (size, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

/// First design size whose error is at most `tol`.
pub fn evaluations_to_reach(trace: &[(usize, f64)], tol: f64) -> Option<usize> {
    trace.iter().find(|(_, e)| *e <= tol).map(|(n, _)| *n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub benchmark: u32,
    pub method: MethodKey,
    pub repetitions: usize,
    /// Mean error at budget exhaustion (last point of the mean trace).
    pub final_mean_eps: f64,
    /// Design size at which the mean trace first reaches the tolerance.
    pub evals_to_converge: Option<usize>,
}

/// One summary per (benchmark, method), sorted.
pub fn group_summaries(records: &[RunSummary], tol: f64) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(u32, MethodKey), Vec<&RunSummary>> = BTreeMap::new();
    for r in records {
        groups.entry((r.benchmark, r.method)).or_default().push(r);
    }
    groups
        .into_iter()
        .filter_map(|((benchmark, method), runs)| {
            let trace = mean_trace(&runs);
            let &(_, last) = trace.last()?;
            Some(GroupSummary {
                benchmark,
                method,
                repetitions: runs.len(),
                final_mean_eps: last,
                evals_to_converge: evaluations_to_reach(&trace, tol),
            })
        })
        .collect()
}

/// Which factor is being compared; the others define the comparison cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// Surrogates compared within each (benchmark, enrichment).
    Surrogate,
    /// Enrichments compared within each (benchmark, surrogate).
    Enrichment,
    /// All strategies compared within each benchmark.
    Strategy,
}

impl Comparison {
    fn contestant(&self, m: &MethodKey) -> String {
        match self {
            Comparison::Surrogate => m.surrogate.to_string(),
            Comparison::Enrichment => m.enrichment.to_string(),
            Comparison::Strategy => m.to_string(),
        }
    }

    fn cell(&self, benchmark: u32, m: &MethodKey) -> String {
        match self {
            Comparison::Surrogate => format!("{benchmark}/{}", m.enrichment),
            Comparison::Enrichment => format!("{benchmark}/{}", m.surrogate),
            Comparison::Strategy => benchmark.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    /// Number of groups (cases) of this method.
    pub cases: usize,
    /// Fraction of cases whose mean error at budget exhaustion meets the tolerance.
    pub accuracy: f64,
    /// Share of comparison cells won (ties split equally).
    pub efficiency: f64,
    /// Mean of evaluations-to-converge divided by the cell's best, over converged cases.
    pub cost_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetrics {
    pub comparison: Comparison,
    pub tol: f64,
    pub methods: Vec<MethodMetrics>,
}

pub fn campaign_metrics(records: &[RunSummary], tol: f64, comparison: Comparison) -> Result<CampaignMetrics> {
    if records.is_empty() {
        return Err(Error::config("campaign metrics need at least one run"));
    }
    let groups = group_summaries(records, tol);
    let mut cases: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut cells: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
    for g in &groups {
        let who = comparison.contestant(&g.method);
        let entry = cases.entry(who.clone()).or_default();
        entry.0 += 1;
        if g.final_mean_eps <= tol {
            entry.1 += 1;
        }
        let cell = cells.entry(comparison.cell(g.benchmark, &g.method)).or_default();
        if let Some(n) = g.evals_to_converge {
            cell.push((who, n));
        }
    }
    let mut wins: BTreeMap<String, f64> = BTreeMap::new();
    let mut costs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut decided = 0usize;
    for contenders in cells.values() {
        let Some(best) = contenders.iter().map(|(_, n)| *n).min() else { continue };
        decided += 1;
        let winners: Vec<&String> = contenders.iter().filter(|(_, n)| *n == best).map(|(w, _)| w).collect();
        for w in &winners {
            *wins.entry((*w).clone()).or_default() += 1.0 / winners.len() as f64;
        }
        for (w, n) in contenders {
            costs.entry(w.clone()).or_default().push(*n as f64 / best as f64);
        }
    }
    let methods = cases
        .into_iter()
        .map(|(method, (total, ok))| {
            let cost = costs.get(&method).map(|v| v.iter().sum::<f64>() / v.len() as f64);
            let won = wins.get(&method).copied().unwrap_or(0.0);
            MethodMetrics {
                efficiency: if decided > 0 { won / decided as f64 } else { 0.0 },
                accuracy: ok as f64 / total as f64,
                cases: total,
                cost_mean: cost,
                method,
            }
        })
        .collect();
    Ok(CampaignMetrics {
        comparison,
        tol,
        methods,
    })
}

/// Relative saving `(n_uniform - n_al) / n_uniform` of active learning over the uniform design.
pub fn al_benefit(n_uniform: usize, n_al: usize) -> Result<f64> {
    if n_uniform == 0 {
        return Err(Error::domain("uniform-design evaluation count must be positive"));
    }
    Ok((n_uniform as f64 - n_al as f64) / n_uniform as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cost: f64,
    pub accuracy: f64,
    pub threshold: f64,
}

/// Cost-accuracy pairs for a sweep of stopping thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostAccuracyCurve {
    pub points: Vec<CurvePoint>,
}

/// Replays each run's criterion trace: the run stops at the first iteration
/// where the criterion has triggered `triggers` consecutive times (or at the
/// budget). Accuracy is the fraction of runs whose error there meets
/// `eps_tol`; cost is the mean of `N_stop / N_min` over runs that ever reach
/// `eps_tol`, `N_min` being the first design size where they do. Points are
/// ordered by decreasing threshold.
pub fn stopping_curve(
    records: &[RunSummary],
    kind: StoppingKind,
    thresholds: &[f64],
    triggers: usize,
    eps_tol: f64,
) -> Result<CostAccuracyCurve> {
    if kind == StoppingKind::BudgetOnly {
        return Err(Error::config("cost-accuracy curves need a static or variance criterion"));
    }
    if records.is_empty() {
        return Err(Error::config("cost-accuracy curves need at least one run"));
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut points = Vec::with_capacity(sorted.len());
    for &tau in &sorted {
        let mut accurate = 0usize;
        let mut ratios = Vec::new();
        for r in records {
            let Some(stop) = replay_stop(&r.trace, kind, tau, triggers)? else { continue };
            let at = r.trace[stop];
            if at.eps_f <= eps_tol {
                accurate += 1;
            }
            if let Some(first) = r.trace.iter().find(|t| t.eps_f <= eps_tol) {
                ratios.push(at.doe_size as f64 / first.doe_size as f64);
            }
        }
        let cost = if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        points.push(CurvePoint {
            cost,
            accuracy: accurate as f64 / records.len() as f64,
            threshold: tau,
        });
    }
    Ok(CostAccuracyCurve { points })
}

/// Index of the stopping iteration, or the last one if never triggered.
fn replay_stop(trace: &[TracePoint], kind: StoppingKind, tau: f64, triggers: usize) -> Result<Option<usize>> {
    if trace.is_empty() {
        return Ok(None);
    }
    let mut counter = TriggerCounter::new(triggers)?;
    for (i, t) in trace.iter().enumerate() {
        let v = match kind {
            StoppingKind::Static => t.eps_s,
            _ => t.eps_v,
        };
        let value = CriterionValue {
            value: v,
            triggered: v.is_some_and(|v| v <= tau),
        };
        if counter.record(value) {
            return Ok(Some(i));
        }
    }
    Ok(Some(trace.len() - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEfficientPoint {
    pub cost: f64,
    pub accuracy: f64,
    /// Threshold interpolated at the same position along the curve.
    pub threshold: f64,
}

/// Projects the intersection of the initial chord-slope tangent and the
/// maximum-accuracy horizontal back onto the curve.
pub fn cost_efficient_point(curve: &CostAccuracyCurve) -> Result<CostEfficientPoint> {
    let mut pts: Vec<CurvePoint> = curve.points.clone();
    if pts.len() < 3 {
        return Err(Error::NoCostEfficientPoint(format!("need at least 3 points, got {}", pts.len())));
    }
    if pts.iter().any(|p| !p.cost.is_finite() || !p.accuracy.is_finite()) {
        return Err(Error::NoCostEfficientPoint("curve has undefined points".into()));
    }
    pts.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.accuracy.total_cmp(&b.accuracy)));
    let p0 = pts[0];
    let Some(p1) = pts.iter().find(|p| p.cost > p0.cost) else {
        return Err(Error::NoCostEfficientPoint("all points share one cost".into()));
    };
    let slope = (p1.accuracy - p0.accuracy) / (p1.cost - p0.cost);
    if !(slope > 0.0) {
        return Err(Error::NoCostEfficientPoint(format!("initial slope {slope} is not positive")));
    }
    let a_max = pts.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.accuracy));
    let cutoff = (p0.cost + (a_max - p0.accuracy) / slope).min(pts[pts.len() - 1].cost);
    let seg = pts.windows(2).position(|w| w[1].cost >= cutoff).unwrap_or(pts.len() - 2);
    let (a, b) = (pts[seg], pts[seg + 1]);
    let t = if b.cost > a.cost { (cutoff - a.cost) / (b.cost - a.cost) } else { 1.0 };
    Ok(CostEfficientPoint {
        cost: cutoff,
        accuracy: a.accuracy + t * (b.accuracy - a.accuracy),
        threshold: a.threshold + t * (b.threshold - a.threshold),
    })
}

/// AL benefit of one (benchmark, surrogate) pair: the uniform design is the
/// maximin enrichment, the AL count the fastest of the learning functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitRow {
    pub benchmark: u32,
    pub surrogate: SurrogateKind,
    pub n_uniform: Option<usize>,
    pub n_al: Option<usize>,
    pub best_al: Option<Enrichment>,
    pub lambda: Option<f64>,
}

pub fn benefit_table(groups: &[GroupSummary]) -> Vec<BenefitRow> {
    let mut by_pair: BTreeMap<(u32, SurrogateKind), Vec<&GroupSummary>> = BTreeMap::new();
    for g in groups {
        by_pair.entry((g.benchmark, g.method.surrogate)).or_default().push(g);
    }
    by_pair
        .into_iter()
        .map(|((benchmark, surrogate), gs)| {
            let n_uniform = gs
                .iter()
                .find(|g| g.method.enrichment == Enrichment::Md)
                .and_then(|g| g.evals_to_converge);
            let best = gs
                .iter()
                .filter(|g| g.method.enrichment != Enrichment::Md)
                .filter_map(|g| g.evals_to_converge.map(|n| (n, g.method.enrichment)))
                .min_by_key(|(n, e)| (*n, *e));
            let lambda = match (n_uniform, best) {
                (Some(u), Some((a, _))) => al_benefit(u, a).ok(),
                _ => None,
            };
            BenefitRow {
                benchmark,
                surrogate,
                n_uniform,
                n_al: best.map(|b| b.0),
                best_al: best.map(|b| b.1),
                lambda,
            }
        })
        .collect()
}
