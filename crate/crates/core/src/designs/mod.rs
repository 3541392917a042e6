//! Candidate pools and experimental designs: the pool-based greedy maximin
//! design, Latin hypercube sampling and Sobol sequences.

mod sobol_table;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::distributions::JointModel;
use crate::points::squared_distance;
use crate::rng::rng_from_seed;
use crate::{Error, PointSet, Result};

pub use sobol_table::MAX_DIMS as SOBOL_MAX_DIMS;

/// Component-wise z-score map `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    /// Population mean and standard deviation of each column.
    pub fn fit(points: &PointSet) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::config("z-score needs at least two points"));
        }
        let dim = points.dim();
        let mut mean = vec![0.0; dim];
        for row in points.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for row in points.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        if let Some(j) = std.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::config(format!("column {j} is degenerate (zero standard deviation)")));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &xi), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.std) {
            *o = (xi - m) / s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_all(&self, points: &PointSet) -> PointSet {
        let mut out = PointSet::zeros(points.len(), points.dim());
        for i in 0..points.len() {
            self.apply_into(points.row(i), out.row_mut(i));
        }
        out
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((zi, m), s)| m + s * zi)
            .collect()
    }
}

/// Monte Carlo candidate set with its z-score normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    points: PointSet,
    normalized: PointSet,
    scaling: ZScore,
    seed: u64,
}

impl CandidatePool {
    /// Draws `n` joint samples and normalizes them.
    pub fn build(joint: &JointModel, n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("candidate pool needs at least 2 points, got {n}")));
        }
        Self::from_points(joint.sample(n, seed), seed)
    }

    pub fn from_points(points: PointSet, seed: u64) -> Result<Self> {
        let scaling = ZScore::fit(&points)?;
        let normalized = scaling.apply_all(&points);
        Ok(Self {
            points,
            normalized,
            scaling,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn normalized(&self) -> &PointSet {
        &self.normalized
    }

    pub fn scaling(&self) -> &ZScore {
        &self.scaling
    }

    pub fn mean(&self) -> &[f64] {
        &self.scaling.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.scaling.std
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Growing design of experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doe {
    /// Pool row of each design point, `None` for free points.
    pub indices: Vec<Option<usize>>,
    pub inputs: PointSet,
    pub outputs: Vec<f64>,
}

impl Doe {
    pub fn new(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            inputs: PointSet::zeros(0, dim),
            outputs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Appends an evaluated pool point. Errors if the index is already present.
    pub fn push_pool_point(&mut self, index: usize, x: &[f64], y: f64) -> Result<()> {
        if self.indices.contains(&Some(index)) {
            return Err(Error::Design(format!("pool index {index} already in the design")));
        }
        self.indices.push(Some(index));
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn push_free_point(&mut self, x: &[f64], y: f64) {
        self.indices.push(None);
        self.inputs.push(x);
        self.outputs.push(y);
    }

    pub fn pool_indices(&self) -> Vec<usize> {
        self.indices.iter().flatten().copied().collect()
    }
}

/// Greedily picks `count` pool rows, each maximizing the distance (normalized
/// coordinates) to the design formed by `current` and the earlier picks.
pub fn maximin_extend(pool: &CandidatePool, current: &[usize], count: usize) -> Result<Vec<usize>> {
    let n = pool.len();
    if current.is_empty() {
        return Err(Error::Design("maximin extension needs a nonempty current design".into()));
    }
    if count == 0 {
        return Err(Error::Design("maximin extension count must be at least 1".into()));
    }
    if let Some(&bad) = current.iter().find(|&&i| i >= n) {
        return Err(Error::Design(format!("index {bad} outside pool of size {n}")));
    }
    let mut in_doe = vec![false; n];
    let mut distinct = 0;
    for &i in current {
        if !in_doe[i] {
            in_doe[i] = true;
            distinct += 1;
        }
    }
    if n < distinct + count {
        return Err(Error::Design(format!(
            "pool exhausted: {n} points cannot hold {distinct} + {count}"
        )));
    }
    let z = pool.normalized();
    let mut nearest = vec![f64::INFINITY; n];
    for &j in current {
        update_nearest(z, z.row(j), &mut nearest);
    }
    let mut picks = Vec::with_capacity(count);
    for _ in 0..count {
        let best = argmax_excluding(&nearest, &in_doe).expect("capacity checked above");
        in_doe[best] = true;
        picks.push(best);
        update_nearest(z, z.row(best), &mut nearest);
    }
    Ok(picks)
}

fn update_nearest(z: &PointSet, p: &[f64], nearest: &mut [f64]) {
    for (d, row) in nearest.iter_mut().zip(z.rows()) {
        let s = squared_distance(row, p);
        if s < *d {
            *d = s;
        }
    }
}

/// Lowest index wins ties.
fn argmax_excluding(values: &[f64], excluded: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&v, &ex)) in values.iter().zip(excluded).enumerate() {
        if ex {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Initial design size `max(12, 3N)`.
pub fn default_initial_size(dim: usize) -> usize {
    12.max(3 * dim)
}

/// First point uniformly at random, the rest by maximin extension.
pub fn initial_doe(pool: &CandidatePool, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size == 0 || size > pool.len() {
        return Err(Error::Design(format!(
            "initial design size {size} must lie in 1..={}",
            pool.len()
        )));
    }
    let first = rng_from_seed(seed).random_range(0..pool.len());
    let mut out = vec![first];
    if size > 1 {
        out.extend(maximin_extend(pool, &out, size - 1)?);
    }
    Ok(out)
}

/// Latin hypercube sample in the unit cube.
pub fn lhs(n: usize, dims: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || dims == 0 {
        return Err(Error::Design("LHS needs n >= 1 and dims >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = PointSet::zeros(n, dims);
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..dims {
        perm.shuffle(&mut rng);
        for (i, &cell) in perm.iter().enumerate() {
            let u: f64 = rng.random();
            out.row_mut(i)[j] = ((cell as f64 + u) / n as f64).min(1.0 - f64::EPSILON);
        }
    }
    Ok(out)
}

const SOBOL_BITS: usize = 32;

fn sobol_directions(dim: usize) -> [u32; SOBOL_BITS] {
    let mut v = [0u32; SOBOL_BITS];
    let (s, a, m) = sobol_table::DIRECTIONS[dim];
    if s == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (31 - k);
        }
        return v;
    }
    let s = s as usize;
    for k in 0..s.min(SOBOL_BITS) {
        v[k] = m[k] << (31 - k);
    }
    for k in s..SOBOL_BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// First `n` points of the unscrambled Sobol sequence in natural index order
/// (point `i` combines the direction numbers of the set bits of `i`).
pub fn sobol(n: usize, dims: usize) -> Result<PointSet> {
    if dims == 0 || dims > sobol_table::MAX_DIMS {
        return Err(Error::Design(format!(
            "Sobol dimension {dims} outside 1..={}",
            sobol_table::MAX_DIMS
        )));
    }
    if n as u64 > 1u64 << SOBOL_BITS {
        return Err(Error::Design(format!("Sobol sequence limited to 2^32 points, asked {n}")));
    }
    let dirs: Vec<[u32; SOBOL_BITS]> = (0..dims).map(sobol_directions).collect();
    let mut out = PointSet::zeros(n, dims);
    let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
    for i in 0..n {
        let row = out.row_mut(i);
        for (x, v) in row.iter_mut().zip(&dirs) {
            let mut acc = 0u32;
            let mut bits = i as u64;
            let mut k = 0;
            while bits != 0 {
                if bits & 1 == 1 {
                    acc ^= v[k];
                }
                bits >>= 1;
                k += 1;
            }
            *x = acc as f64 * scale;
        }
    }
    Ok(out)
}

/// Smallest Euclidean distance between two distinct rows.
pub fn min_pairwise_distance(points: &PointSet) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Design("pairwise distance needs at least two points".into()));
    }
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(squared_distance(points.row(i), points.row(j)));
        }
    }
    Ok(best.sqrt())
}

/// Writes one point per row with a `x1..xN` header.
pub fn write_points_csv<W: Write>(points: &PointSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((1..=points.dim()).map(|j| format!("x{j}")))?;
    for row in points.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_points_csv(points: &PointSet, path: &Path) -> Result<()> {
    write_points_csv(points, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests;
