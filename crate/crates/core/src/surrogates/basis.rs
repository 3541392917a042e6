use serde::{Deserialize, Serialize};

use crate::distributions::JointModel;

/// Regression functions of a kriging trend or a chaos expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrendBasis {
    Constant,
    /// Orthonormal Hermite products in the standard-normal image of the inputs.
    Hermite {
        joint: JointModel,
        multi_indices: Vec<Vec<u32>>,
    },
}

impl TrendBasis {
    pub fn hermite(joint: JointModel, degree: u32) -> Self {
        let multi_indices = total_degree_indices(joint.dim(), degree);
        TrendBasis::Hermite { joint, multi_indices }
    }

    pub fn len(&self) -> usize {
        match self {
            TrendBasis::Constant => 1,
            TrendBasis::Hermite { multi_indices, .. } => multi_indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn degree(&self) -> u32 {
        match self {
            TrendBasis::Constant => 0,
            TrendBasis::Hermite { multi_indices, .. } => {
                multi_indices.iter().map(|a| a.iter().sum::<u32>()).max().unwrap_or(0)
            }
        }
    }

    /// Writes the basis values at raw input `x` into `out` (length `len()`).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TrendBasis::Constant => out[0] = 1.0,
            TrendBasis::Hermite { joint, multi_indices } => {
                let u = joint.to_standard(x);
                let max_deg = multi_indices
                    .iter()
                    .flat_map(|a| a.iter().copied())
                    .max()
                    .unwrap_or(0) as usize;
                let table: Vec<Vec<f64>> = u.iter().map(|&ui| hermite_orthonormal(ui, max_deg)).collect();
                for (o, alpha) in out.iter_mut().zip(multi_indices) {
                    *o = alpha
                        .iter()
                        .zip(&table)
                        .map(|(&a, h)| h[a as usize])
                        .product();
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Orthonormal probabilists' Hermite polynomials `He_k(u) / sqrt(k!)`, `k = 0..=degree`.
pub fn hermite_orthonormal(u: f64, degree: usize) -> Vec<f64> {
    let mut he = Vec::with_capacity(degree + 1);
    he.push(1.0);
    if degree >= 1 {
        he.push(u);
    }
    for k in 1..degree {
        let next = u * he[k] - k as f64 * he[k - 1];
        he.push(next);
    }
    let mut fact = 1.0;
    for (k, h) in he.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *h /= fact.sqrt();
    }
    he
}

/// All multi-indices of total degree at most `degree`, graded by degree and
/// reverse-lexicographic within a degree (so `[1,0,..]` precedes `[0,1,..]`).
pub fn total_degree_indices(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut current = vec![0u32; dim];
        push_with_sum(&mut out, &mut current, 0, d);
    }
    out
}

fn push_with_sum(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        push_with_sum(out, current, pos + 1, remaining - v);
    }
    current[pos] = 0;
}

/// `C(dim + degree, degree)`.
pub fn basis_size(dim: usize, degree: u32) -> usize {
    let mut c: u128 = 1;
    for k in 1..=degree as u128 {
        c = c * (dim as u128 + k) / k;
    }
    c.min(usize::MAX as u128) as usize
}
