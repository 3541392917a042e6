//! Point-selection functions for design enrichment: maximum variance (MoV),
//! the two-step threshold/U function, and the gradient-based function.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::designs::{maximin_extend, CandidatePool, Doe};
use crate::distributions::std_normal_cdf;
use crate::metrics::{trapezoid, BoundedCdfs, ThresholdGrid};
use crate::surrogates::{Prediction, Predictor};
use crate::{Error, PointSet, Result};

/// Finite-difference step for surrogate gradients, in normalized coordinates.
pub const GRADIENT_STEP: f64 = 1e-4;

/// Relative size below which Taylor residuals are treated as zero.
pub const RESIDUAL_FLOOR: f64 = 1e-9;

/// Number of top-ranked candidates kept in a [`Selection`].
pub const TOP_SCORES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Enrichment {
    /// Maximin design (no learning function).
    #[serde(rename = "md")]
    Md,
    #[serde(rename = "mov")]
    Mov,
    #[serde(rename = "two-step")]
    TwoStep,
    #[serde(rename = "gradient")]
    Gradient,
}

impl Enrichment {
    pub const ALL: [Enrichment; 4] = [Enrichment::Md, Enrichment::Mov, Enrichment::TwoStep, Enrichment::Gradient];

    pub fn as_str(&self) -> &'static str {
        match self {
            Enrichment::Md => "md",
            Enrichment::Mov => "mov",
            Enrichment::TwoStep => "two-step",
            Enrichment::Gradient => "gradient",
        }
    }

    pub fn is_active_learning(&self) -> bool {
        *self != Enrichment::Md
    }
}

impl fmt::Display for Enrichment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Enrichment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "maximin" => Ok(Enrichment::Md),
            "mov" => Ok(Enrichment::Mov),
            "two-step" | "twostep" | "t-lf" => Ok(Enrichment::TwoStep),
            "gradient" | "g-lf" => Ok(Enrichment::Gradient),
            other => Err(Error::config(format!("unknown enrichment `{other}`"))),
        }
    }
}

/// Everything a selector reads. `predictions` are the surrogate's predictions
/// on every pool row.
#[derive(Clone, Copy)]
pub struct SelectionContext<'a> {
    pub model: &'a dyn Predictor,
    pub pool: &'a CandidatePool,
    pub doe: &'a Doe,
    pub grid: &'a ThresholdGrid,
    pub cdfs: &'a BoundedCdfs,
    pub predictions: &'a [Prediction],
}

impl<'a> SelectionContext<'a> {
    pub fn new(
        model: &'a dyn Predictor,
        pool: &'a CandidatePool,
        doe: &'a Doe,
        grid: &'a ThresholdGrid,
        cdfs: &'a BoundedCdfs,
        predictions: &'a [Prediction],
    ) -> Result<Self> {
        if predictions.len() != pool.len() {
            return Err(Error::Selection(format!(
                "{} cached predictions for a pool of {}",
                predictions.len(),
                pool.len()
            )));
        }
        if doe.inputs.dim() != pool.dim() {
            return Err(Error::Selection("design and pool dimensions differ".into()));
        }
        if cdfs.zero.grid.as_slice() != grid.values() {
            return Err(Error::GridMismatch("bounded CDFs are not on the selection grid".into()));
        }
        Ok(Self {
            model,
            pool,
            doe,
            grid,
            cdfs,
            predictions,
        })
    }

    /// Pool rows not already in the design, ascending.
    pub fn candidates(&self) -> Vec<usize> {
        let mut taken = vec![false; self.pool.len()];
        for i in self.doe.pool_indices() {
            if i < taken.len() {
                taken[i] = true;
            }
        }
        (0..self.pool.len()).filter(|&i| !taken[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    /// Threshold found by the first stage of the two-step function.
    pub y_star: Option<f64>,
    /// True when the two-step function fell back to MoV.
    pub fallback: bool,
    /// Best-ranked `(index, score)` pairs, best first.
    pub top: Vec<(usize, f64)>,
}

/// Runs the selector for `enrichment`.
pub fn select(enrichment: Enrichment, ctx: &SelectionContext<'_>) -> Result<Selection> {
    match enrichment {
        Enrichment::Md => {
            let current = ctx.doe.pool_indices();
            let index = maximin_extend(ctx.pool, &current, 1)?[0];
            Ok(Selection {
                index,
                y_star: None,
                fallback: false,
                top: Vec::new(),
            })
        }
        Enrichment::Mov => select_mov(ctx),
        Enrichment::TwoStep => select_two_step(ctx),
        Enrichment::Gradient => select_gradient(ctx),
    }
}

/// Ranks candidates by score; NaN never wins and ties keep the lower index.
fn rank(candidates: &[usize], scores: &[f64], maximize: bool) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Selection("no candidates left in the pool".into()));
    }
    let key = |s: f64| {
        if s.is_nan() {
            f64::NEG_INFINITY
        } else if maximize {
            s
        } else {
            -s
        }
    };
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| key(scores[b]).total_cmp(&key(scores[a])).then(candidates[a].cmp(&candidates[b])));
    let top = order.iter().take(TOP_SCORES).map(|&k| (candidates[k], scores[k])).collect();
    Ok(Selection {
        index: candidates[order[0]],
        y_star: None,
        fallback: false,
        top,
    })
}

/// Largest predictive variance.
pub fn select_mov(ctx: &SelectionContext<'_>) -> Result<Selection> {
    let candidates = ctx.candidates();
    let scores: Vec<f64> = candidates.iter().map(|&i| ctx.predictions[i].variance).collect();
    rank(&candidates, &scores, true)
}

/// Localized band width `W_L(y')`, normalizer `Z(y')` and kernel width
/// `sigma(y')` at every grid threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScores {
    pub sigma: Vec<f64>,
    pub w_l: Vec<f64>,
    pub z: Vec<f64>,
}

impl ThresholdScores {
    /// `W_L / Z`, `-inf` where `sigma` vanishes.
    pub fn ratio(&self) -> Vec<f64> {
        self.sigma
            .iter()
            .zip(self.w_l.iter().zip(&self.z))
            .map(|(&s, (&w, &z))| if s > 0.0 && z > 0.0 { w / z } else { f64::NEG_INFINITY })
            .collect()
    }
}

pub fn threshold_scores(ctx: &SelectionContext<'_>) -> ThresholdScores {
    let grid = ctx.grid.values();
    let (y_min, y_max) = (ctx.grid.y_min(), ctx.grid.y_max());
    let floor = 1.0 / ctx.cdfs.zero.pool_size.max(1) as f64;
    let band: Vec<f64> = (0..grid.len())
        .map(|j| {
            let f0 = ctx.cdfs.zero.cdf[j];
            (ctx.cdfs.plus.cdf[j] - ctx.cdfs.minus.cdf[j]).abs() / f0.min(1.0 - f0).max(floor)
        })
        .collect();
    let mut sigma = Vec::with_capacity(grid.len());
    let mut w_l = Vec::with_capacity(grid.len());
    let mut z = Vec::with_capacity(grid.len());
    let mut integrand = vec![0.0; grid.len()];
    for &yp in grid {
        let mut nearest = 0;
        let mut gap = f64::INFINITY;
        for (i, p) in ctx.predictions.iter().enumerate() {
            let d = (yp - p.mean).abs();
            if d < gap {
                gap = d;
                nearest = i;
            }
        }
        let s = ctx.predictions[nearest].std_dev();
        sigma.push(s);
        if !(s > 0.0) || !s.is_finite() {
            w_l.push(0.0);
            z.push(0.0);
            continue;
        }
        for (v, (&y, &b)) in integrand.iter_mut().zip(grid.iter().zip(&band)) {
            *v = b * (-(y - yp) * (y - yp) / (2.0 * s * s)).exp();
        }
        w_l.push(trapezoid(grid, &integrand));
        z.push(
            (2.0 * std::f64::consts::PI).sqrt()
                * s
                * (std_normal_cdf((y_max - yp) / s) - std_normal_cdf((y_min - yp) / s)),
        );
    }
    ThresholdScores { sigma, w_l, z }
}

/// Grid threshold maximizing `W_L / Z`; `None` when every kernel width is zero.
pub fn two_step_threshold(ctx: &SelectionContext<'_>) -> Option<f64> {
    let ratio = threshold_scores(ctx).ratio();
    let mut best: Option<(usize, f64)> = None;
    for (j, &r) in ratio.iter().enumerate() {
        if r == f64::NEG_INFINITY || r.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((j, r));
        }
    }
    best.map(|(j, _)| ctx.grid.values()[j])
}

/// Smallest `U = |y* - mean| / std`; falls back to MoV when no threshold is
/// usable or every candidate has zero variance.
pub fn select_two_step(ctx: &SelectionContext<'_>) -> Result<Selection> {
    let candidates = ctx.candidates();
    let Some(y_star) = two_step_threshold(ctx) else {
        return mov_fallback(ctx, None);
    };
    if candidates.iter().all(|&i| !(ctx.predictions[i].variance > 0.0)) {
        return mov_fallback(ctx, Some(y_star));
    }
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&i| {
            let p = ctx.predictions[i];
            let s = p.std_dev();
            if s > 0.0 {
                (y_star - p.mean).abs() / s
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut sel = rank(&candidates, &scores, false)?;
    sel.y_star = Some(y_star);
    Ok(sel)
}

fn mov_fallback(ctx: &SelectionContext<'_>, y_star: Option<f64>) -> Result<Selection> {
    let mut sel = select_mov(ctx)?;
    sel.y_star = y_star;
    sel.fallback = true;
    Ok(sel)
}

/// Mean and central-difference gradient (normalized coordinates) of the
/// surrogate at each row of `z`.
pub fn mean_and_gradient(model: &dyn Predictor, pool: &CandidatePool, z: &PointSet) -> (Vec<f64>, PointSet) {
    let dim = z.dim();
    let scaling = pool.scaling();
    let mut probes = PointSet::zeros(0, dim);
    for row in z.rows() {
        probes.push(&scaling.invert(row));
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut p = row.to_vec();
                p[j] += sign * GRADIENT_STEP;
                probes.push(&scaling.invert(&p));
            }
        }
    }
    let m = model.predict_means(&probes);
    let stride = 1 + 2 * dim;
    let mut means = Vec::with_capacity(z.len());
    let mut grads = PointSet::zeros(z.len(), dim);
    for (r, chunk) in m.chunks(stride).enumerate() {
        means.push(chunk[0]);
        let g = grads.row_mut(r);
        for j in 0..dim {
            g[j] = (chunk[1 + 2 * j] - chunk[2 + 2 * j]) / (2.0 * GRADIENT_STEP);
        }
    }
    (means, grads)
}

/// Largest `L_G + omega * L_L`: normalized distance to the design plus the
/// weighted first-order Taylor residual at the nearest design point.
pub fn select_gradient(ctx: &SelectionContext<'_>) -> Result<Selection> {
    let candidates = ctx.candidates();
    if candidates.is_empty() {
        return Err(Error::Selection("no candidates left in the pool".into()));
    }
    if ctx.doe.is_empty() {
        return Err(Error::Selection("gradient selection needs a nonempty design".into()));
    }
    let scaling = ctx.pool.scaling();
    let design = scaling.apply_all(&ctx.doe.inputs);
    let (design_means, grads) = mean_and_gradient(ctx.model, ctx.pool, &design);
    let mut l_max: f64 = 0.0;
    for a in 0..design.len() {
        for b in a + 1..design.len() {
            l_max = l_max.max(distance(design.row(a), design.row(b)));
        }
    }
    let z = ctx.pool.normalized();
    let mut d_min = Vec::with_capacity(candidates.len());
    let mut residual = Vec::with_capacity(candidates.len());
    for &i in &candidates {
        let x = z.row(i);
        let (mut nearest, mut best) = (0, f64::INFINITY);
        for (k, d) in design.rows().enumerate() {
            let s = distance(x, d);
            if s < best {
                best = s;
                nearest = k;
            }
        }
        let taylor = design_means[nearest]
            + grads
                .row(nearest)
                .iter()
                .zip(x.iter().zip(design.row(nearest)))
                .map(|(g, (a, b))| g * (a - b))
                .sum::<f64>();
        d_min.push(best);
        residual.push((ctx.predictions[i].mean - taylor).abs());
    }
    let d_top = d_min.iter().fold(0.0_f64, |m, &v| m.max(v));
    if !(d_top > 0.0) {
        return Err(Error::Selection("pool exhausted by DoE".into()));
    }
    let r_top = residual.iter().fold(0.0_f64, |m, &v| m.max(v));
    // Residuals at finite-difference round-off level count as zero.
    let scale = candidates.iter().fold(1.0_f64, |m, &i| m.max(ctx.predictions[i].mean.abs()));
    let r_top = if r_top > RESIDUAL_FLOOR * scale { r_top } else { 0.0 };
    let scores: Vec<f64> = d_min
        .iter()
        .zip(&residual)
        .map(|(&d, &r)| {
            let omega = if l_max > 0.0 { (1.0 - d / l_max).clamp(0.0, 1.0) } else { 0.0 };
            let local = if r_top > 0.0 { r / r_top } else { 0.0 };
            d / d_top + omega * local
        })
        .collect();
    rank(&candidates, &scores, true)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests;
