//! Distribution estimates on a threshold grid, the tail-weighted CDF error,
//! stopping criteria, and the campaign-level comparison metrics.

mod campaign;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::designs::CandidatePool;
use crate::surrogates::{bounded, PckModel, Prediction, Predictor};
use crate::{Error, PointSet, Result};

pub use campaign::{
    al_benefit, benefit_table, campaign_metrics, cost_efficient_point, evaluations_to_reach, group_summaries,
    mean_trace, stopping_curve, BenefitRow, CampaignMetrics, Comparison, CostAccuracyCurve, CostEfficientPoint,
    CurvePoint, GroupSummary, MethodKey, MethodMetrics, RunSummary, StoppingKind, TracePoint,
};

/// Default number of grid intervals.
pub const DEFAULT_INTERVALS: usize = 100;

/// Equally spaced thresholds spanning `[y_min, y_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    values: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(y_min: f64, y_max: f64, intervals: usize) -> Result<Self> {
        if !(y_max > y_min) || !y_min.is_finite() || !y_max.is_finite() {
            return Err(Error::config(format!("grid range [{y_min}, {y_max}] is empty or not finite")));
        }
        if intervals == 0 {
            return Err(Error::config("grid needs at least one interval"));
        }
        let h = (y_max - y_min) / intervals as f64;
        let mut values: Vec<f64> = (0..=intervals).map(|i| y_min + i as f64 * h).collect();
        values[intervals] = y_max;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn y_min(&self) -> f64 {
        self.values[0]
    }

    pub fn y_max(&self) -> f64 {
        *self.values.last().expect("nonempty grid")
    }
}

/// Discretized CDF. The CCDF is `1 - cdf` on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub pool_size: usize,
}

impl DistributionEstimate {
    /// Fraction of `values` at or below each grid threshold.
    pub fn empirical(values: &[f64], grid: &ThresholdGrid) -> Self {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let cdf = grid
            .values()
            .iter()
            .map(|&y| sorted.partition_point(|&v| v <= y) as f64 / n as f64)
            .collect();
        Self {
            grid: grid.values().to_vec(),
            cdf,
            pool_size: n,
        }
    }

    pub fn ccdf(&self) -> Vec<f64> {
        self.cdf.iter().map(|f| 1.0 - f).collect()
    }

    /// Two-column CSV `threshold,probability`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["threshold", "probability"])?;
        for (y, f) in self.grid.iter().zip(&self.cdf) {
            w.write_record([format!("{y:?}"), format!("{f:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CDF of the bounded surrogate `mean + k std` over the pool.
pub fn estimate_cdf<P: Predictor + ?Sized>(
    model: &P,
    pool: &CandidatePool,
    grid: &ThresholdGrid,
    k: f64,
) -> DistributionEstimate {
    estimate_from_predictions(&model.predict(pool.points()), grid, k)
}

pub fn estimate_from_predictions(predictions: &[Prediction], grid: &ThresholdGrid, k: f64) -> DistributionEstimate {
    DistributionEstimate::empirical(&bounded(predictions, k), grid)
}

/// Estimates for `k = +2, 0, -2` from one batch of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedCdfs {
    pub plus: DistributionEstimate,
    pub zero: DistributionEstimate,
    pub minus: DistributionEstimate,
}

impl BoundedCdfs {
    pub fn from_predictions(predictions: &[Prediction], grid: &ThresholdGrid) -> Self {
        Self {
            plus: estimate_from_predictions(predictions, grid, 2.0),
            zero: estimate_from_predictions(predictions, grid, 0.0),
            minus: estimate_from_predictions(predictions, grid, -2.0),
        }
    }
}

fn check_same_grid(a: &DistributionEstimate, b: &DistributionEstimate) -> Result<()> {
    if a.grid != b.grid || a.cdf.len() != a.grid.len() || b.cdf.len() != b.grid.len() {
        return Err(Error::GridMismatch(format!(
            "grids differ ({} vs {} points)",
            a.grid.len(),
            b.grid.len()
        )));
    }
    if a.grid.len() < 2 {
        return Err(Error::GridMismatch("grid needs at least two points".into()));
    }
    Ok(())
}

/// `(1/(y_max-y_min)) * trapz(|a - b| / max(min(r, 1-r), floor))`, where `r`
/// supplies the tail weighting.
pub fn weighted_discrepancy(grid: &[f64], weight_ref: &[f64], a: &[f64], b: &[f64], floor: f64) -> f64 {
    let w: Vec<f64> = weight_ref
        .iter()
        .zip(a.iter().zip(b))
        .map(|(&r, (&x, &y))| (x - y).abs() / r.min(1.0 - r).max(floor))
        .collect();
    trapezoid(grid, &w) / (grid[grid.len() - 1] - grid[0])
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

fn denominator_floor(pool_size: usize) -> f64 {
    1.0 / pool_size.max(1) as f64
}

/// Tail-weighted CDF error; the first argument supplies the denominator.
pub fn error_measure(reference: &DistributionEstimate, estimate: &DistributionEstimate) -> Result<f64> {
    check_same_grid(reference, estimate)?;
    Ok(weighted_discrepancy(
        &reference.grid,
        &reference.cdf,
        &reference.cdf,
        &estimate.cdf,
        denominator_floor(reference.pool_size),
    ))
}

/// Value of a stopping criterion at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    /// `None` when the criterion cannot be computed yet.
    pub value: Option<f64>,
    pub triggered: bool,
}

/// Stability of successive estimates; `prev` is `None` on the first iteration.
pub fn static_criterion(
    prev: Option<&DistributionEstimate>,
    curr: &DistributionEstimate,
    tol: f64,
) -> Result<CriterionValue> {
    let Some(prev) = prev else {
        return Ok(CriterionValue {
            value: None,
            triggered: false,
        });
    };
    let v = error_measure(prev, curr)?;
    Ok(CriterionValue {
        value: Some(v),
        triggered: v <= tol,
    })
}

/// Width of the `+-2 std` band of the bounded-surrogate CDFs.
pub fn variance_criterion(cdfs: &BoundedCdfs, tol: f64) -> Result<CriterionValue> {
    check_same_grid(&cdfs.zero, &cdfs.plus)?;
    check_same_grid(&cdfs.zero, &cdfs.minus)?;
    let v = weighted_discrepancy(
        &cdfs.zero.grid,
        &cdfs.zero.cdf,
        &cdfs.plus.cdf,
        &cdfs.minus.cdf,
        denominator_floor(cdfs.zero.pool_size),
    );
    Ok(CriterionValue {
        value: Some(v),
        triggered: v <= tol,
    })
}

/// Stops once the criterion has triggered on `required` consecutive
/// computable iterations. Iterations where it is not computable are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerCounter {
    required: usize,
    consecutive: usize,
}

impl TriggerCounter {
    pub fn new(required: usize) -> Result<Self> {
        if required == 0 {
            return Err(Error::config("consecutive triggers must be at least 1"));
        }
        Ok(Self { required, consecutive: 0 })
    }

    /// Records one iteration and reports whether to stop.
    pub fn record(&mut self, value: CriterionValue) -> bool {
        if value.value.is_none() {
            return false;
        }
        if value.triggered {
            self.consecutive += 1;
        } else {
            self.consecutive = 0;
        }
        self.consecutive >= self.required
    }

    pub fn consecutive(&self) -> usize {
        self.consecutive
    }
}

/// Sample-variance split of a PC-Kriging predictor into its polynomial
/// (global) and correlation (local) parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub var_global: f64,
    pub var_local: f64,
    pub covariance: f64,
    pub var_total: f64,
}

impl VarianceDecomposition {
    /// `var_global + var_local + 2 cov - var_total`.
    pub fn identity_residual(&self) -> f64 {
        self.var_global + self.var_local + 2.0 * self.covariance - self.var_total
    }

    pub fn global_share(&self) -> f64 {
        self.var_global / self.var_total
    }
}

pub fn variance_decomposition(model: &PckModel, samples: &PointSet) -> Result<VarianceDecomposition> {
    let (g, l) = model.predict_parts(samples);
    decompose(&g, &l)
}

/// Decomposition of two prediction components evaluated on the same samples.
pub fn decompose(global: &[f64], local: &[f64]) -> Result<VarianceDecomposition> {
    let n = global.len();
    if n < 2 || local.len() != n {
        return Err(Error::domain("variance decomposition needs at least two samples"));
    }
    let nf = n as f64;
    let total: Vec<f64> = global.iter().zip(local).map(|(a, b)| a + b).collect();
    let mg = global.iter().sum::<f64>() / nf;
    let ml = local.iter().sum::<f64>() / nf;
    let mt = total.iter().sum::<f64>() / nf;
    let mut vg = 0.0;
    let mut vl = 0.0;
    let mut cov = 0.0;
    let mut vt = 0.0;
    for i in 0..n {
        let (dg, dl, dt) = (global[i] - mg, local[i] - ml, total[i] - mt);
        vg += dg * dg;
        vl += dl * dl;
        cov += dg * dl;
        vt += dt * dt;
    }
    let d = nf - 1.0;
    Ok(VarianceDecomposition {
        var_global: vg / d,
        var_local: vl / d,
        covariance: cov / d,
        var_total: vt / d,
    })
}
