//! Universal kriging with an anisotropic Matérn-5/2 correlation.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::basis::TrendBasis;
use super::optim::{bfgs, Objective};
use super::Prediction;
use crate::designs::{lhs, ZScore};
use crate::{Error, PointSet, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const CHUNK: usize = 256;

/// Matérn-5/2 correlation at scaled distance `r`.
pub fn matern52(r: f64) -> f64 {
    (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpOptions {
    /// Number of optimizer starts.
    pub starts: usize,
    pub max_iterations: usize,
    /// Lengthscale bounds in normalized input units.
    pub lengthscale_bounds: (f64, f64),
    pub nugget_start: f64,
    pub nugget_max: f64,
    /// Seed of the start-point design.
    pub seed: u64,
    /// Replaces the first start (e.g. the previous optimum in a sequential loop).
    pub warm_start: Option<Vec<f64>>,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            max_iterations: 200,
            lengthscale_bounds: (1e-2, 1e2),
            nugget_start: 1e-10,
            nugget_max: 1e-6,
            seed: 0x6b72_6967,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    scaling: ZScore,
    trend: TrendBasis,
    train: PointSet,
    lengthscales: Vec<f64>,
    sigma2: f64,
    nugget: f64,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    chol: DMatrix<f64>,
    ft: DMatrix<f64>,
    g_chol: DMatrix<f64>,
    log_likelihood: f64,
}

struct Factor {
    log_theta: Vec<f64>,
    nugget: f64,
    l: DMatrix<f64>,
    ft: DMatrix<f64>,
    g_chol: DMatrix<f64>,
    beta: DVector<f64>,
    gamma: DVector<f64>,
    sigma2: f64,
    nll: f64,
}

/// Negative profiled log-likelihood as a function of log-lengthscales.
struct Likelihood<'a> {
    n: usize,
    dim: usize,
    /// Per-dimension squared differences of each pair `i < j`, packed.
    pair_sq: Vec<f64>,
    y: &'a DVector<f64>,
    f: &'a DMatrix<f64>,
    nugget_start: f64,
    nugget_max: f64,
    evaluations: usize,
}

impl<'a> Likelihood<'a> {
    fn new(z: &PointSet, y: &'a DVector<f64>, f: &'a DMatrix<f64>, opts: &GpOptions) -> Self {
        let n = z.len();
        let dim = z.dim();
        let mut pair_sq = Vec::with_capacity(n * (n - 1) / 2 * dim);
        for i in 0..n {
            for j in i + 1..n {
                for (a, b) in z.row(i).iter().zip(z.row(j)) {
                    pair_sq.push((a - b) * (a - b));
                }
            }
        }
        Self {
            n,
            dim,
            pair_sq,
            y,
            f,
            nugget_start: opts.nugget_start,
            nugget_max: opts.nugget_max,
            evaluations: 0,
        }
    }

    fn correlation(&self, log_theta: &[f64]) -> DMatrix<f64> {
        let inv2: Vec<f64> = log_theta.iter().map(|lt| (-2.0 * lt).exp()).collect();
        let mut r = DMatrix::<f64>::identity(self.n, self.n);
        let mut p = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = &self.pair_sq[p * self.dim..(p + 1) * self.dim];
                let r2: f64 = d.iter().zip(&inv2).map(|(a, b)| a * b).sum();
                let c = matern52(r2.sqrt());
                r[(i, j)] = c;
                r[(j, i)] = c;
                p += 1;
            }
        }
        r
    }

    fn nugget_ladder(&self) -> impl Iterator<Item = f64> {
        let (start, max) = (self.nugget_start, self.nugget_max);
        std::iter::successors(Some(start), move |&t| {
            let next = t * 10.0;
            (next > t && next <= max * (1.0 + 1e-12)).then_some(next)
        })
    }

    fn factor(&mut self, log_theta: &[f64]) -> Option<Factor> {
        self.evaluations += 1;
        let base = self.correlation(log_theta);
        for tau in self.nugget_ladder() {
            let mut r = base.clone();
            for i in 0..self.n {
                r[(i, i)] += tau;
            }
            let Some(chol) = Cholesky::new(r) else { continue };
            let l = chol.unpack();
            let Some(ft) = l.solve_lower_triangular(self.f) else { continue };
            let Some(yt) = l.solve_lower_triangular(self.y) else { continue };
            let g = ft.transpose() * &ft;
            let Some(gc) = Cholesky::new(g) else { continue };
            let beta = gc.solve(&(ft.transpose() * &yt));
            let resid = &yt - &ft * &beta;
            let n = self.n as f64;
            let sigma2 = (resid.norm_squared() / n).max(f64::MIN_POSITIVE);
            let Some(gamma) = l.tr_solve_lower_triangular(&resid) else { continue };
            let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let nll = 0.5 * (n * sigma2.ln() + log_det);
            if !nll.is_finite() {
                continue;
            }
            return Some(Factor {
                log_theta: log_theta.to_vec(),
                nugget: tau,
                l,
                ft,
                g_chol: gc.unpack(),
                beta,
                gamma,
                sigma2,
                nll,
            });
        }
        None
    }

    /// Gradient of the negative log-likelihood with respect to log-lengthscales.
    fn gradient_log(&self, fac: &Factor) -> Vec<f64> {
        let n = self.n;
        let ident = DMatrix::<f64>::identity(n, n);
        let linv = fac.l.solve_lower_triangular(&ident).expect("factor is nonsingular");
        let rinv = linv.transpose() * &linv;
        let inv2: Vec<f64> = fac.log_theta.iter().map(|lt| (-2.0 * lt).exp()).collect();
        let mut grad = vec![0.0; self.dim];
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let d = &self.pair_sq[p * self.dim..(p + 1) * self.dim];
                let r2: f64 = d.iter().zip(&inv2).map(|(a, b)| a * b).sum();
                let r = r2.sqrt();
                let a = 5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp();
                let w = fac.gamma[i] * fac.gamma[j] / fac.sigma2 - rinv[(i, j)];
                // Both (i, j) and (j, i) contribute.
                let c = -a * w;
                for ((g, dk), s) in grad.iter_mut().zip(d).zip(&inv2) {
                    *g += c * dk * s;
                }
                p += 1;
            }
        }
        grad
    }
}

/// Likelihood in the unbounded coordinate `z`, with `log(theta) = c + h tanh(z)`.
struct BoundedLikelihood<'a, 'b> {
    inner: &'b mut Likelihood<'a>,
    center: f64,
    half: f64,
    last: Option<Factor>,
}

impl BoundedLikelihood<'_, '_> {
    fn to_log(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| self.center + self.half * v.tanh()).collect()
    }

    fn to_z(&self, log_theta: &[f64]) -> Vec<f64> {
        log_theta
            .iter()
            .map(|lt| ((lt - self.center) / self.half).clamp(-0.999_999, 0.999_999).atanh())
            .collect()
    }
}

impl Objective for BoundedLikelihood<'_, '_> {
    fn value(&mut self, z: &[f64]) -> Option<f64> {
        let lt = self.to_log(z);
        let fac = self.inner.factor(&lt)?;
        let v = fac.nll;
        self.last = Some(fac);
        Some(v)
    }

    fn gradient(&mut self, z: &[f64]) -> Vec<f64> {
        let fac = self.last.as_ref().expect("value evaluated first");
        let g = self.inner.gradient_log(fac);
        g.iter()
            .zip(z)
            .map(|(gi, zi)| {
                let t = zi.tanh();
                gi * self.half * (1.0 - t * t)
            })
            .collect()
    }
}

impl GpModel {
    /// Fits a kriging model with the given trend; inputs are raw coordinates
    /// and `scaling` maps them to the normalized space of the kernel.
    pub fn fit(x: &PointSet, y: &[f64], trend: TrendBasis, scaling: ZScore, opts: &GpOptions) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(fit_error(format!("kriging needs at least 2 points, got {n}")));
        }
        if y.len() != n || scaling.dim() != x.dim() {
            return Err(fit_error("input/output sizes disagree".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(fit_error("non-finite observation".into()));
        }
        let q = trend.len();
        if q >= n {
            return Err(fit_error(format!("trend has {q} terms for {n} observations")));
        }
        let z = scaling.apply_all(x);
        let yv = DVector::from_column_slice(y);
        let mut f = DMatrix::<f64>::zeros(n, q);
        let mut row = vec![0.0; q];
        for i in 0..n {
            trend.eval_into(x.row(i), &mut row);
            for (j, v) in row.iter().enumerate() {
                f[(i, j)] = *v;
            }
        }
        let (lo, hi) = opts.lengthscale_bounds;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("lengthscale bounds must satisfy 0 < lower < upper"));
        }
        let dim = x.dim();
        let mut lik = Likelihood::new(&z, &yv, &f, opts);
        let (center, half) = (0.5 * (lo.ln() + hi.ln()), 0.5 * (hi.ln() - lo.ln()));

        let starts = start_points(dim, opts, center, half)?;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in &starts {
            let mut obj = BoundedLikelihood {
                inner: &mut lik,
                center,
                half,
                last: None,
            };
            let z0 = obj.to_z(start);
            if let Some(m) = bfgs(&mut obj, &z0, opts.max_iterations) {
                let lt = obj.to_log(&m.x);
                if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
                    best = Some((m.value, lt));
                }
            }
        }
        let Some((_, log_theta)) = best else {
            let lt = opts.warm_start.clone().unwrap_or_else(|| vec![center; dim]);
            return Err(ill_conditioned(&lik, &lt));
        };
        let Some(fac) = lik.factor(&log_theta) else {
            return Err(ill_conditioned(&lik, &log_theta));
        };
        Ok(Self {
            scaling,
            trend,
            train: z,
            lengthscales: log_theta.iter().map(|v| v.exp()).collect(),
            sigma2: fac.sigma2,
            nugget: fac.nugget,
            beta: fac.beta.iter().copied().collect(),
            gamma: fac.gamma.iter().copied().collect(),
            chol: fac.l,
            ft: fac.ft,
            g_chol: fac.g_chol,
            log_likelihood: -fac.nll,
        })
    }

    pub fn fit_constant(x: &PointSet, y: &[f64], scaling: ZScore, opts: &GpOptions) -> Result<Self> {
        Self::fit(x, y, TrendBasis::Constant, scaling, opts)
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn process_variance(&self) -> f64 {
        self.sigma2
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn trend_coefficients(&self) -> &[f64] {
        &self.beta
    }

    pub fn trend(&self) -> &TrendBasis {
        &self.trend
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    /// Correlation of `z` with every training row. The nugget acts as a
    /// white-noise term, so a query that coincides with a training row picks
    /// it up and the predictor interpolates. Returns whether that happened.
    fn cross_correlation(&self, z: &[f64], out: &mut [f64]) -> bool {
        let inv2: Vec<f64> = self.lengthscales.iter().map(|t| 1.0 / (t * t)).collect();
        let mut coincident = false;
        for (o, row) in out.iter_mut().zip(self.train.rows()) {
            let r2: f64 = row
                .iter()
                .zip(z)
                .zip(&inv2)
                .map(|((a, b), s)| (a - b) * (a - b) * s)
                .sum();
            *o = matern52(r2.sqrt());
            if r2 == 0.0 {
                *o += self.nugget;
                coincident = true;
            }
        }
        coincident
    }

    /// Trend and correlation parts of the predictive mean, for rows `x`.
    pub fn predict_parts(&self, x: &PointSet) -> (Vec<f64>, Vec<f64>) {
        let n = self.train.len();
        let q = self.trend.len();
        let mut trend = Vec::with_capacity(x.len());
        let mut local = Vec::with_capacity(x.len());
        let mut r = vec![0.0; n];
        let mut z = vec![0.0; x.dim()];
        let mut psi = vec![0.0; q];
        for row in x.rows() {
            self.scaling.apply_into(row, &mut z);
            self.cross_correlation(&z, &mut r);
            self.trend.eval_into(row, &mut psi);
            trend.push(dot(&psi, &self.beta));
            local.push(dot(&r, &self.gamma));
        }
        (trend, local)
    }

    pub fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        let (t, l) = self.predict_parts(x);
        t.iter().zip(&l).map(|(a, b)| a + b).collect()
    }

    fn predict_chunk(&self, x: &PointSet, start: usize, end: usize, out: &mut [Prediction]) {
        let n = self.train.len();
        let q = self.trend.len();
        let m = end - start;
        let mut rc = DMatrix::<f64>::zeros(n, m);
        let mut psi = DMatrix::<f64>::zeros(q, m);
        let mut z = vec![0.0; x.dim()];
        let mut prior = vec![1.0; m];
        for (c, i) in (start..end).enumerate() {
            self.scaling.apply_into(x.row(i), &mut z);
            if self.cross_correlation(&z, rc.column_mut(c).as_mut_slice()) {
                prior[c] += self.nugget;
            }
            self.trend.eval_into(x.row(i), psi.column_mut(c).as_mut_slice());
        }
        let mut w = rc.clone();
        self.chol.solve_lower_triangular_mut(&mut w);
        // Column by column so results do not depend on the chunk width.
        let mut u = DMatrix::<f64>::zeros(q, m);
        for c in 0..m {
            for j in 0..q {
                u[(j, c)] = dot(self.ft.column(j).as_slice(), w.column(c).as_slice()) - psi[(j, c)];
            }
        }
        self.g_chol.solve_lower_triangular_mut(&mut u);
        for (c, o) in out.iter_mut().enumerate() {
            let mean = dot(psi.column(c).as_slice(), &self.beta) + dot(rc.column(c).as_slice(), &self.gamma);
            let var = self.sigma2 * (prior[c] - w.column(c).norm_squared() + u.column(c).norm_squared());
            *o = Prediction {
                mean,
                variance: var.max(0.0),
            };
        }
    }

    pub fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        let mut out = vec![Prediction::default(); x.len()];
        super::for_each_chunk(&mut out, CHUNK, |start, chunk| {
            self.predict_chunk(x, start, start + chunk.len(), chunk)
        });
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fit_error(message: String) -> Error {
    Error::Fit {
        message,
        condition: None,
    }
}

fn start_points(dim: usize, opts: &GpOptions, center: f64, half: f64) -> Result<Vec<Vec<f64>>> {
    let starts = opts.starts.max(1);
    let mut out = Vec::with_capacity(starts);
    out.push(opts.warm_start.clone().unwrap_or_else(|| vec![center; dim]));
    if starts > 1 {
        // Spread the remaining starts over the inner two thirds of the box.
        let cube = lhs(starts - 1, dim, opts.seed)?;
        for row in cube.rows() {
            out.push(row.iter().map(|u| center + half * (2.0 * u - 1.0) * 2.0 / 3.0).collect());
        }
    }
    Ok(out)
}

fn ill_conditioned(lik: &Likelihood<'_>, log_theta: &[f64]) -> Error {
    let mut r = lik.correlation(log_theta);
    for i in 0..lik.n {
        r[(i, i)] += lik.nugget_max;
    }
    let eig = SymmetricEigen::new(r).eigenvalues;
    let max = eig.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    Error::Fit {
        message: format!(
            "correlation matrix not positive definite with nugget {:e}",
            lik.nugget_max
        ),
        condition: Some(condition),
    }
}

#[cfg(test)]
pub(crate) fn profiled_nll_and_gradient(
    z: &PointSet,
    y: &[f64],
    log_theta: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let yv = DVector::from_column_slice(y);
    let f = DMatrix::<f64>::from_element(y.len(), 1, 1.0);
    let mut lik = Likelihood::new(z, &yv, &f, &GpOptions::default());
    let fac = lik.factor(log_theta)?;
    let g = lik.gradient_log(&fac);
    Some((fac.nll, g))
}
