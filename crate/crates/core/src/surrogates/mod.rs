//! Surrogate models behind one mean/variance interface: Gaussian-process
//! regression with a constant trend, polynomial chaos expansion, and
//! PC-Kriging (a kriging model whose trend is a selected chaos basis).

mod basis;
mod gp;
mod optim;
mod pce;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::designs::ZScore;
use crate::distributions::JointModel;
use crate::{Error, PointSet, Result};

pub use basis::{basis_size, hermite_orthonormal, total_degree_indices, TrendBasis};
pub use gp::{matern52, GpModel, GpOptions};
pub use pce::{PceModel, PceOptions};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Common prediction interface.
pub trait Predictor {
    fn predict(&self, x: &PointSet) -> Vec<Prediction>;

    /// Means only; implementations skip the variance work where possible.
    fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        self.predict(x).into_iter().map(|p| p.mean).collect()
    }

    fn predict_one(&self, x: &[f64]) -> Prediction {
        self.predict(&PointSet::from_row_major(x.len(), x.to_vec()))[0]
    }

    /// `mean + k * std` for every row.
    fn predict_bounded(&self, x: &PointSet, k: f64) -> Vec<f64> {
        bounded(&self.predict(x), k)
    }
}

/// `mean + k * std` of precomputed predictions.
pub fn bounded(predictions: &[Prediction], k: f64) -> Vec<f64> {
    predictions.iter().map(|p| p.mean + k * p.std_dev()).collect()
}

impl Predictor for GpModel {
    fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        GpModel::predict(self, x)
    }

    fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        GpModel::predict_means(self, x)
    }
}

impl Predictor for PceModel {
    fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        PceModel::predict(self, x)
    }

    fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        PceModel::predict_means(self, x)
    }
}

/// Kriging with a chaos-expansion trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckModel {
    trend: PceModel,
    gp: GpModel,
}

impl PckModel {
    /// Selects the polynomial basis by the chaos-expansion degree sweep, then
    /// calibrates a kriging model that uses it as regressors.
    pub fn fit(
        x: &PointSet,
        y: &[f64],
        joint: &JointModel,
        scaling: ZScore,
        max_degree: u32,
        gp_opts: &GpOptions,
    ) -> Result<Self> {
        let pce_opts = PceOptions {
            max_degree,
            bootstrap: 0,
            ..PceOptions::default()
        };
        let trend = PceModel::fit(x, y, joint, &pce_opts)?;
        let gp = GpModel::fit(x, y, trend.basis().clone(), scaling, gp_opts)?;
        Ok(Self { trend, gp })
    }

    pub fn trend(&self) -> &PceModel {
        &self.trend
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    /// Polynomial (global) and correlation (local) parts of the mean.
    pub fn predict_parts(&self, x: &PointSet) -> (Vec<f64>, Vec<f64>) {
        self.gp.predict_parts(x)
    }
}

impl Predictor for PckModel {
    fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        self.gp.predict(x)
    }

    fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        self.gp.predict_means(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Gp,
    Pce,
    Pck,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 3] = [SurrogateKind::Gp, SurrogateKind::Pce, SurrogateKind::Pck];

    pub fn as_str(&self) -> &'static str {
        match self {
            SurrogateKind::Gp => "gp",
            SurrogateKind::Pce => "pce",
            SurrogateKind::Pck => "pck",
        }
    }
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gp" | "kriging" => Ok(SurrogateKind::Gp),
            "pce" => Ok(SurrogateKind::Pce),
            "pck" | "pc-kriging" => Ok(SurrogateKind::Pck),
            other => Err(Error::config(format!("unknown surrogate `{other}`"))),
        }
    }
}

/// Settings shared by all surrogate variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateOptions {
    pub gp: GpOptions,
    pub pce: PceOptions,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            gp: GpOptions::default(),
            pce: PceOptions::default(),
        }
    }
}

/// A fitted surrogate of any variant, with its fit diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "model", rename_all = "lowercase")]
pub enum SurrogateHandle {
    Gp(GpModel),
    Pce(PceModel),
    Pck(PckModel),
}

impl SurrogateHandle {
    /// `x` holds raw inputs; `scaling` is the normalization used by the kernel.
    pub fn fit(
        kind: SurrogateKind,
        x: &PointSet,
        y: &[f64],
        joint: &JointModel,
        scaling: &ZScore,
        opts: &SurrogateOptions,
    ) -> Result<Self> {
        Ok(match kind {
            SurrogateKind::Gp => SurrogateHandle::Gp(GpModel::fit_constant(x, y, scaling.clone(), &opts.gp)?),
            SurrogateKind::Pce => SurrogateHandle::Pce(PceModel::fit(x, y, joint, &opts.pce)?),
            SurrogateKind::Pck => SurrogateHandle::Pck(PckModel::fit(
                x,
                y,
                joint,
                scaling.clone(),
                opts.pce.max_degree,
                &opts.gp,
            )?),
        })
    }

    pub fn kind(&self) -> SurrogateKind {
        match self {
            SurrogateHandle::Gp(_) => SurrogateKind::Gp,
            SurrogateHandle::Pce(_) => SurrogateKind::Pce,
            SurrogateHandle::Pck(_) => SurrogateKind::Pck,
        }
    }

    /// Log-likelihood for kriging variants, leave-one-out error for PCE.
    pub fn fit_diagnostic(&self) -> f64 {
        match self {
            SurrogateHandle::Gp(m) => m.log_likelihood(),
            SurrogateHandle::Pce(m) => m.loo_error(),
            SurrogateHandle::Pck(m) => m.gp().log_likelihood(),
        }
    }

    /// Kernel log-lengthscales, used to warm-start the next fit.
    pub fn log_lengthscales(&self) -> Option<Vec<f64>> {
        let gp = match self {
            SurrogateHandle::Gp(m) => m,
            SurrogateHandle::Pck(m) => m.gp(),
            SurrogateHandle::Pce(_) => return None,
        };
        Some(gp.lengthscales().iter().map(|t| t.ln()).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl Predictor for SurrogateHandle {
    fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        match self {
            SurrogateHandle::Gp(m) => m.predict(x),
            SurrogateHandle::Pce(m) => m.predict(x),
            SurrogateHandle::Pck(m) => Predictor::predict(m, x),
        }
    }

    fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        match self {
            SurrogateHandle::Gp(m) => m.predict_means(x),
            SurrogateHandle::Pce(m) => m.predict_means(x),
            SurrogateHandle::Pck(m) => Predictor::predict_means(m, x),
        }
    }
}

/// Runs `f(start, chunk)` over consecutive chunks, in parallel when enabled.
pub(crate) fn for_each_chunk<T, F>(out: &mut [T], size: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(size)
            .enumerate()
            .for_each(|(c, chunk)| f(c * size, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (c, chunk) in out.chunks_mut(size).enumerate() {
            f(c * size, chunk);
        }
    }
}

#[cfg(test)]
mod tests;
