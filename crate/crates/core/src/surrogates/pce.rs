//! Polynomial chaos expansion by least squares with leave-one-out degree
//! selection and bootstrap prediction variance.

use nalgebra::{DMatrix, DVector, QR};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::basis::{basis_size, TrendBasis};
use super::Prediction;
use crate::distributions::JointModel;
use crate::rng::rng_from_seed;
use crate::{Error, PointSet, Result};

/// Relative pivot size below which the regression matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-10;
/// LOO errors closer than this are treated as equal (lower degree wins).
const LOO_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceOptions {
    pub max_degree: u32,
    /// Bootstrap replicates; 0 disables the variance estimate.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for PceOptions {
    fn default() -> Self {
        Self {
            max_degree: 3,
            bootstrap: 100,
            seed: 0x7063_65,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceModel {
    basis: TrendBasis,
    coefficients: Vec<f64>,
    selected_degree: u32,
    loo_error: f64,
    /// One coefficient vector per successful bootstrap replicate.
    replicates: Vec<Vec<f64>>,
    requested_replicates: usize,
}

struct LeastSquares {
    coefficients: DVector<f64>,
    loo: f64,
}

fn design_matrix(basis: &TrendBasis, x: &PointSet) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::zeros(x.len(), basis.len());
    let mut row = vec![0.0; basis.len()];
    for i in 0..x.len() {
        basis.eval_into(x.row(i), &mut row);
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    a
}

/// Ordinary least squares by QR; `None` when the matrix is rank deficient.
fn solve_ols(a: DMatrix<f64>, y: &DVector<f64>, with_loo: bool) -> Option<LeastSquares> {
    let (n, p) = a.shape();
    if n < p {
        return None;
    }
    let qr = QR::new(a);
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(diag_max > 0.0) || r.diagonal().iter().any(|v| v.abs() <= RANK_TOL * diag_max) {
        return None;
    }
    let q = qr.q();
    let qty = q.transpose() * y;
    let coefficients = r.solve_upper_triangular(&qty)?;
    let loo = if with_loo {
        let fitted = &q * &qty;
        let mean = y.mean();
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let h = q.row(i).norm_squared();
            let e = (y[i] - fitted[i]) / (1.0 - h);
            acc += e * e;
        }
        let mse = acc / n as f64;
        if var > 0.0 {
            mse / var
        } else {
            mse
        }
    } else {
        f64::NAN
    };
    Some(LeastSquares { coefficients, loo })
}

impl PceModel {
    /// Sweeps total degrees `1..=max_degree` (or only the constant basis when
    /// `max_degree` is 0), capped so the basis has at most `2n/3` terms.
    pub fn fit(x: &PointSet, y: &[f64], joint: &JointModel, opts: &PceOptions) -> Result<Self> {
        let n = x.len();
        if y.len() != n {
            return Err(fit_error("input/output sizes disagree"));
        }
        if x.dim() != joint.dim() {
            return Err(fit_error("input dimension does not match the joint model"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(fit_error("non-finite observation"));
        }
        let cap = 2 * n / 3;
        let yv = DVector::from_column_slice(y);
        let degrees: Vec<u32> = if opts.max_degree == 0 { vec![0] } else { (1..=opts.max_degree).collect() };
        let mut best: Option<(u32, TrendBasis, LeastSquares, DMatrix<f64>)> = None;
        for p in degrees {
            if basis_size(joint.dim(), p) > cap.max(1) {
                break;
            }
            let basis = if p == 0 { TrendBasis::Constant } else { TrendBasis::hermite(joint.clone(), p) };
            let a = design_matrix(&basis, x);
            let Some(ls) = solve_ols(a.clone(), &yv, true) else { continue };
            let better = match &best {
                None => true,
                Some((_, _, b, _)) => ls.loo < b.loo - LOO_TIE || (b.loo.is_nan() && !ls.loo.is_nan()),
            };
            if better {
                best = Some((p, basis, ls, a));
            }
        }
        let Some((selected_degree, basis, ls, a)) = best else {
            return Err(fit_error(&format!(
                "no admissible polynomial basis for {n} points in {} dimensions",
                joint.dim()
            )));
        };

        let mut rng = rng_from_seed(opts.seed);
        let mut replicates = Vec::with_capacity(opts.bootstrap);
        let mut idx = vec![0usize; n];
        for _ in 0..opts.bootstrap {
            idx.iter_mut().for_each(|i| *i = rng.random_range(0..n));
            let ab = a.select_rows(idx.iter());
            let yb = DVector::from_iterator(n, idx.iter().map(|&i| y[i]));
            if let Some(fit) = solve_ols(ab, &yb, false) {
                replicates.push(fit.coefficients.iter().copied().collect());
            }
        }
        Ok(Self {
            basis,
            coefficients: ls.coefficients.iter().copied().collect(),
            selected_degree,
            loo_error: ls.loo,
            replicates,
            requested_replicates: opts.bootstrap,
        })
    }

    pub fn basis(&self) -> &TrendBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn selected_degree(&self) -> u32 {
        self.selected_degree
    }

    pub fn loo_error(&self) -> f64 {
        self.loo_error
    }

    /// Number of bootstrap replicates that were not rank deficient.
    pub fn effective_replicates(&self) -> usize {
        self.replicates.len()
    }

    pub fn requested_replicates(&self) -> usize {
        self.requested_replicates
    }

    pub fn predict_means(&self, x: &PointSet) -> Vec<f64> {
        let mut psi = vec![0.0; self.basis.len()];
        x.rows()
            .map(|row| {
                self.basis.eval_into(row, &mut psi);
                dot(&psi, &self.coefficients)
            })
            .collect()
    }

    /// Mean from the full fit; variance across bootstrap replicates.
    pub fn predict(&self, x: &PointSet) -> Vec<Prediction> {
        let mut out = vec![Prediction::default(); x.len()];
        super::for_each_chunk(&mut out, 512, |start, chunk| {
            let mut psi = vec![0.0; self.basis.len()];
            for (k, o) in chunk.iter_mut().enumerate() {
                self.basis.eval_into(x.row(start + k), &mut psi);
                o.mean = dot(&psi, &self.coefficients);
                o.variance = self.bootstrap_variance_at(&psi);
            }
        });
        out
    }

    fn bootstrap_variance_at(&self, psi: &[f64]) -> f64 {
        let b = self.replicates.len();
        if b < 2 {
            return 0.0;
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, beta) in self.replicates.iter().enumerate() {
            let v = dot(psi, beta);
            let d = v - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (v - mean);
        }
        (m2 / (b - 1) as f64).max(0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fit_error(message: &str) -> Error {
    Error::Fit {
        message: message.to_string(),
        condition: None,
    }
}
