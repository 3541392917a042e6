//! Parametric marginals, independent joint models and the component-wise
//! iso-probabilistic map to standard normal space.

mod config;
mod normal;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::rng::rng_from_seed;
use crate::{Error, PointSet, Result};

pub use config::{parse_joint, write_joint};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf};

/// CDF values are clamped into `[EPS, 1 - EPS]` before the inverse normal map.
pub const STANDARD_CLAMP: f64 = 1e-12;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKind {
    Normal,
    LogNormal,
    Uniform,
    Gumbel,
    Weibull,
}

/// How `(p1, p2)` are read.
///
/// * `MomentPair`: (mean, standard deviation); for `Uniform` the (lower, upper) bounds.
/// * `NaturalParams`: Normal (mu, sigma), LogNormal (log-mean, log-std),
///   Uniform (lower, upper), Gumbel (location, scale), Weibull (scale, shape).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    MomentPair,
    NaturalParams,
}

/// Natural parameters after conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Law {
    Normal { mu: f64, sigma: f64 },
    LogNormal { lambda: f64, zeta: f64 },
    Uniform { lo: f64, hi: f64 },
    Gumbel { loc: f64, scale: f64 },
    Weibull { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct MarginalSpec {
    kind: MarginalKind,
    p1: f64,
    p2: f64,
    parameterization: Parameterization,
}

/// One-dimensional input distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalSpec", into = "MarginalSpec")]
pub struct Marginal {
    spec: MarginalSpec,
    law: Law,
}

impl TryFrom<MarginalSpec> for Marginal {
    type Error = Error;

    fn try_from(s: MarginalSpec) -> Result<Self> {
        Marginal::new(s.kind, s.p1, s.p2, s.parameterization)
    }
}

impl From<Marginal> for MarginalSpec {
    fn from(m: Marginal) -> Self {
        m.spec
    }
}

impl Marginal {
    pub fn new(kind: MarginalKind, p1: f64, p2: f64, parameterization: Parameterization) -> Result<Self> {
        if !p1.is_finite() || !p2.is_finite() {
            return Err(Error::domain(format!("{kind:?}: non-finite parameters ({p1}, {p2})")));
        }
        let law = match (kind, parameterization) {
            (MarginalKind::Uniform, _) => {
                if p2 <= p1 {
                    return Err(Error::domain(format!("uniform bounds require upper > lower, got ({p1}, {p2})")));
                }
                Law::Uniform { lo: p1, hi: p2 }
            }
            (_, _) if p2 <= 0.0 => {
                return Err(Error::domain(format!("{kind:?}: second parameter must be positive, got {p2}")));
            }
            (MarginalKind::Normal, _) => Law::Normal { mu: p1, sigma: p2 },
            (MarginalKind::LogNormal, Parameterization::NaturalParams) => Law::LogNormal { lambda: p1, zeta: p2 },
            (MarginalKind::LogNormal, Parameterization::MomentPair) => {
                if p1 <= 0.0 {
                    return Err(Error::domain(format!("lognormal mean must be positive, got {p1}")));
                }
                let zeta2 = (1.0 + (p2 / p1).powi(2)).ln();
                Law::LogNormal {
                    lambda: p1.ln() - 0.5 * zeta2,
                    zeta: zeta2.sqrt(),
                }
            }
            (MarginalKind::Gumbel, Parameterization::NaturalParams) => Law::Gumbel { loc: p1, scale: p2 },
            (MarginalKind::Gumbel, Parameterization::MomentPair) => {
                let scale = p2 * 6f64.sqrt() / std::f64::consts::PI;
                Law::Gumbel {
                    loc: p1 - EULER_GAMMA * scale,
                    scale,
                }
            }
            (MarginalKind::Weibull, Parameterization::NaturalParams) => {
                if p1 <= 0.0 {
                    return Err(Error::domain(format!("weibull scale must be positive, got {p1}")));
                }
                Law::Weibull { shape: p2, scale: p1 }
            }
            (MarginalKind::Weibull, Parameterization::MomentPair) => {
                if p1 <= 0.0 {
                    return Err(Error::domain(format!("weibull mean must be positive, got {p1}")));
                }
                let shape = weibull_shape_from_cov(p2 / p1)?;
                Law::Weibull {
                    shape,
                    scale: p1 / gamma(1.0 + 1.0 / shape),
                }
            }
        };
        Ok(Self {
            spec: MarginalSpec {
                kind,
                p1,
                p2,
                parameterization,
            },
            law,
        })
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::new(MarginalKind::Normal, mean, std, Parameterization::MomentPair)
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0).expect("valid")
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(MarginalKind::Uniform, lo, hi, Parameterization::NaturalParams)
    }

    pub fn kind(&self) -> MarginalKind {
        self.spec.kind
    }

    pub fn params(&self) -> (f64, f64) {
        (self.spec.p1, self.spec.p2)
    }

    pub fn parameterization(&self) -> Parameterization {
        self.spec.parameterization
    }

    /// Natural parameters in the order documented on [`Parameterization`].
    pub fn natural_params(&self) -> (f64, f64) {
        match self.law {
            Law::Normal { mu, sigma } => (mu, sigma),
            Law::LogNormal { lambda, zeta } => (lambda, zeta),
            Law::Uniform { lo, hi } => (lo, hi),
            Law::Gumbel { loc, scale } => (loc, scale),
            Law::Weibull { shape, scale } => (scale, shape),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.law {
            Law::Normal { mu, .. } => mu,
            Law::LogNormal { lambda, zeta } => (lambda + 0.5 * zeta * zeta).exp(),
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Gumbel { loc, scale } => loc + EULER_GAMMA * scale,
            Law::Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
        }
    }

    pub fn std_dev(&self) -> f64 {
        match self.law {
            Law::Normal { sigma, .. } => sigma,
            Law::LogNormal { lambda, zeta } => ((zeta * zeta).exp_m1() * (2.0 * lambda + zeta * zeta).exp()).sqrt(),
            Law::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Law::Gumbel { scale, .. } => scale * std::f64::consts::PI / 6f64.sqrt(),
            Law::Weibull { shape, scale } => {
                let g1 = gamma(1.0 + 1.0 / shape);
                scale * (gamma(1.0 + 2.0 / shape) - g1 * g1).sqrt()
            }
        }
    }

    /// Support as a closed interval (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match self.law {
            Law::Normal { .. } | Law::Gumbel { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Law::LogNormal { .. } | Law::Weibull { .. } => (0.0, f64::INFINITY),
            Law::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal { mu, sigma } => std_normal_cdf((x - mu) / sigma),
            Law::LogNormal { lambda, zeta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - lambda) / zeta)
                }
            }
            Law::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law::Gumbel { loc, scale } => (-(-(x - loc) / scale).exp()).exp(),
            Law::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
        }
    }

    /// Survival function `1 - cdf(x)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal { mu, sigma } => std_normal_sf((x - mu) / sigma),
            Law::LogNormal { lambda, zeta } => {
                if x <= 0.0 {
                    1.0
                } else {
                    std_normal_sf((x.ln() - lambda) / zeta)
                }
            }
            Law::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            Law::Gumbel { loc, scale } => -(-(-(x - loc) / scale).exp()).exp_m1(),
            Law::Weibull { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x / scale).powf(shape)).exp()
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal { mu, sigma } => std_normal_pdf((x - mu) / sigma) / sigma,
            Law::LogNormal { lambda, zeta } => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((x.ln() - lambda) / zeta) / (x * zeta)
                }
            }
            Law::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Law::Gumbel { loc, scale } => {
                let z = (x - loc) / scale;
                (-(z + (-z).exp())).exp() / scale
            }
            Law::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    let t = x / scale;
                    shape / scale * t.powf(shape - 1.0) * (-t.powf(shape)).exp()
                }
            }
        }
    }

    /// Inverse CDF. Errors unless `0 < p < 1`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile probability must lie in (0, 1), got {p}")));
        }
        Ok(self.quantile_split(p, 1.0 - p))
    }

    /// Quantile given both `p` and `q = 1 - p`; whichever is smaller drives the
    /// computation so that both tails stay accurate.
    fn quantile_split(&self, p: f64, q: f64) -> f64 {
        let lower = p <= q;
        match self.law {
            Law::Normal { mu, sigma } => mu + sigma * normal::quantile_split(p, q),
            Law::LogNormal { lambda, zeta } => (lambda + zeta * normal::quantile_split(p, q)).exp(),
            Law::Uniform { lo, hi } => {
                if lower {
                    lo + p * (hi - lo)
                } else {
                    hi - q * (hi - lo)
                }
            }
            Law::Gumbel { loc, scale } => {
                // -ln(p) computed as -ln(1 - q) in the upper tail.
                let neg_ln_p = if lower { -p.ln() } else { -(-q).ln_1p() };
                loc - scale * neg_ln_p.ln()
            }
            Law::Weibull { shape, scale } => {
                let neg_ln_q = if lower { -(-p).ln_1p() } else { -q.ln() };
                scale * neg_ln_q.powf(1.0 / shape)
            }
        }
    }

    /// Standard-normal image of `x`.
    pub fn to_standard(&self, x: f64) -> f64 {
        match self.law {
            Law::Normal { mu, sigma } => (x - mu) / sigma,
            Law::LogNormal { lambda, zeta } => {
                let x = x.max(f64::MIN_POSITIVE);
                (x.ln() - lambda) / zeta
            }
            _ => {
                let p = self.cdf(x);
                if p <= 0.5 {
                    std_normal_quantile(p.clamp(STANDARD_CLAMP, 1.0 - STANDARD_CLAMP))
                } else {
                    -std_normal_quantile(self.sf(x).clamp(STANDARD_CLAMP, 1.0 - STANDARD_CLAMP))
                }
            }
        }
    }

    /// Inverse of [`Marginal::to_standard`].
    pub fn from_standard(&self, u: f64) -> f64 {
        match self.law {
            Law::Normal { mu, sigma } => mu + sigma * u,
            Law::LogNormal { lambda, zeta } => (lambda + zeta * u).exp(),
            _ => {
                let p = std_normal_cdf(u).clamp(STANDARD_CLAMP, 1.0 - STANDARD_CLAMP);
                let q = std_normal_sf(u).clamp(STANDARD_CLAMP, 1.0 - STANDARD_CLAMP);
                self.quantile_split(p, q)
            }
        }
    }

    fn sample_one(&self, rng: &mut crate::rng::Rng) -> f64 {
        match self.law {
            Law::Normal { mu, sigma } => mu + sigma * rng.sample::<f64, _>(StandardNormal),
            Law::LogNormal { lambda, zeta } => (lambda + zeta * rng.sample::<f64, _>(StandardNormal)).exp(),
            Law::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            _ => {
                // Open interval (0, 1) for the inverse transform.
                let u = (rng.random::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) + 0.5 / (1u64 << 53) as f64;
                self.quantile_split(u, 1.0 - u)
            }
        }
    }
}

impl fmt::Display for MarginalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MarginalKind::Normal => "normal",
            MarginalKind::LogNormal => "lognormal",
            MarginalKind::Uniform => "uniform",
            MarginalKind::Gumbel => "gumbel",
            MarginalKind::Weibull => "weibull",
        };
        f.write_str(s)
    }
}

impl FromStr for MarginalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(MarginalKind::Normal),
            "lognormal" | "log-normal" => Ok(MarginalKind::LogNormal),
            "uniform" => Ok(MarginalKind::Uniform),
            "gumbel" => Ok(MarginalKind::Gumbel),
            "weibull" => Ok(MarginalKind::Weibull),
            other => Err(Error::config(format!("unknown marginal kind `{other}`"))),
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameterization::MomentPair => "moments",
            Parameterization::NaturalParams => "natural",
        })
    }
}

impl FromStr for Parameterization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "moments" | "moment" | "momentpair" => Ok(Parameterization::MomentPair),
            "natural" | "naturalparams" => Ok(Parameterization::NaturalParams),
            other => Err(Error::config(format!("unknown parameterization `{other}`"))),
        }
    }
}

/// Solves `sqrt(G(1+2/k) / G(1+1/k)^2 - 1) = cov` for the Weibull shape `k`.
fn weibull_shape_from_cov(cov: f64) -> Result<f64> {
    if !(cov > 0.0) {
        return Err(Error::domain(format!("weibull coefficient of variation must be positive, got {cov}")));
    }
    let f = |k: f64| {
        let g1 = gamma(1.0 + 1.0 / k);
        (gamma(1.0 + 2.0 / k) / (g1 * g1) - 1.0).sqrt() - cov
    };
    // cov(k) decreases monotonically in k.
    let (mut lo, mut hi) = (0.05_f64, 5000.0_f64);
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(Error::domain(format!("weibull coefficient of variation {cov} out of range")));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Independent joint model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    marginals: Vec<Marginal>,
}

impl JointModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::config("joint model needs at least one marginal"));
        }
        Ok(Self { marginals })
    }

    pub fn iid(marginal: Marginal, dim: usize) -> Result<Self> {
        Self::new(vec![marginal; dim])
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self::iid(Marginal::standard_normal(), dim).expect("dim >= 1")
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    /// `n` i.i.d. joint samples; deterministic for a fixed seed.
    pub fn sample(&self, n: usize, seed: u64) -> PointSet {
        let mut rng = rng_from_seed(seed);
        let dim = self.dim();
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            for m in &self.marginals {
                data.push(m.sample_one(&mut rng));
            }
        }
        PointSet::from_row_major(dim, data)
    }

    pub fn to_standard(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; x.len()];
        self.to_standard_into(x, &mut u);
        u
    }

    pub fn to_standard_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for ((o, &xi), m) in out.iter_mut().zip(x).zip(&self.marginals) {
            *o = m.to_standard(xi);
        }
    }

    pub fn from_standard(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.marginals).map(|(&ui, m)| m.from_standard(ui)).collect()
    }
}
