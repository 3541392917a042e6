//! The benchmark registry: closed-form simulators #1 to #13, the shear
//! building #15, and their input models and output ranges.

mod analytic;
pub mod ground_motion;
pub mod shear;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{JointModel, Marginal, MarginalKind, Parameterization};
use crate::surrogates::for_each_chunk;
use crate::{Error, PointSet, Result};

pub use analytic::{ISHIGAMI_A, ISHIGAMI_B, SERIES_SYSTEM_K};
pub use ground_motion::{
    bundled_record, load_ground_motion, parse_ground_motion, write_ground_motion, GroundMotionRecord, SyntheticMotion, BUNDLED_SEED,
};
pub use shear::{shear_building_response, ShearBuildingParams};

/// Registry ids run from 1 to this value.
pub const MAX_ID: u32 = 16;

/// Minimum sample count for [`recompute_range`].
pub const MIN_RANGE_SAMPLES: usize = 10_000;

/// Lower tail probability defining the output range.
pub const RANGE_TAIL: f64 = 1e-3;

/// `recompute_range` of the quartic polynomial with 1e6 samples and seed 1.
pub const QUARTIC_RANGE: (f64, f64) = (-0.3428, 179.25);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Implemented,
    OutOfScope,
}

#[derive(Clone)]
enum Simulator {
    Closed(fn(&[f64]) -> f64),
    Shear(Arc<GroundMotionRecord>),
    None,
}

#[derive(Clone)]
pub struct Benchmark {
    id: u32,
    name: &'static str,
    dim: usize,
    joint: Option<JointModel>,
    reference_range: (f64, f64),
    /// Replacement for a tabulated range that the function does not reproduce.
    operative_range: Option<(f64, f64)>,
    status: Status,
    note: Option<&'static str>,
    simulator: Simulator,
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("status", &self.status)
            .finish()
    }
}

fn n(mean: f64, std: f64) -> Marginal {
    Marginal::normal(mean, std).expect("valid normal")
}

fn u(lo: f64, hi: f64) -> Marginal {
    Marginal::uniform(lo, hi).expect("valid uniform")
}

fn joint(m: Vec<Marginal>) -> Option<JointModel> {
    Some(JointModel::new(m).expect("nonempty joint"))
}

fn closed(
    id: u32,
    name: &'static str,
    f: fn(&[f64]) -> f64,
    marginals: Vec<Marginal>,
    range: (f64, f64),
) -> Benchmark {
    Benchmark {
        id,
        name,
        dim: marginals.len(),
        joint: joint(marginals),
        reference_range: range,
        operative_range: None,
        status: Status::Implemented,
        note: None,
        simulator: Simulator::Closed(f),
    }
}

/// Benchmark `id` with the bundled ground motion for #15.
pub fn get_benchmark(id: u32) -> Result<Benchmark> {
    let std2 = || vec![Marginal::standard_normal(), Marginal::standard_normal()];
    let pi = std::f64::consts::PI;
    let b = match id {
        1 => {
            let mut b = closed(1, "quartic polynomial", analytic::quartic_polynomial, vec![n(10.0, 3.0), n(10.0, 3.0)], (12.0, 2061.0));
            b.note = Some("tabulated range disagrees with the function at the stated inputs; the grid uses the range of 1e6 direct evaluations (seed 1)");
            b.operative_range = Some(QUARTIC_RANGE);
            b
        }
        2 => {
            let mut b = closed(2, "sine product", analytic::sine_product, vec![n(1.5, 1.0), n(1.5, 1.0)], (-1.71, 3.41));
            b.note = Some("tabulated range is not reproduced by the stated function and inputs");
            b
        }
        3 => closed(3, "four-branch series system", analytic::four_branch, std2(), (-0.23, 3.24)),
        4 => closed(4, "two-plane series system", analytic::two_plane, std2(), (-4.67, 2.63)),
        5 => closed(5, "parabolic series system", analytic::parabolic_series, std2(), (-0.70, 5.6)),
        6 => closed(6, "modified Rastrigin", analytic::rastrigin, std2(), (-12.6, 19.9)),
        7 => closed(7, "Ishigami", analytic::ishigami, vec![u(-pi, pi), u(-pi, pi), u(-pi, pi)], (-9.1, 16.1)),
        8 => closed(
            8,
            "tube under torsion and bending",
            analytic::tube_stress,
            vec![
                u(70.0, 80.0),
                n(39.0, 0.1),
                Marginal::new(MarginalKind::Gumbel, 1342.0, 272.9, Parameterization::NaturalParams).expect("valid"),
                n(400.0, 0.1),
                n(2.5e5, 3.5e4),
            ],
            (0.9, 44.3),
        ),
        9 => closed(
            9,
            "nonlinear oscillator",
            analytic::oscillator,
            vec![n(1.0, 0.05), n(1.0, 0.1), n(0.1, 0.01), n(0.5, 0.05), n(1.0, 0.2), n(1.0, 0.2)],
            (-0.43, 1.41),
        ),
        10 => closed(
            10,
            "cylindrical shell buckling",
            analytic::shell_buckling,
            vec![
                n(7.0e10, 3.5e9),
                n(2.5e-3, 1.25e-4),
                n(0.524, 0.01048),
                n(0.90, 0.0225),
                n(8.0e4, 6.4e3),
                n(7.0e4, 5.6e3),
            ],
            (0.39, 0.725),
        ),
        11 => closed(
            11,
            "rotating disk burst",
            analytic::disk_burst,
            vec![
                Marginal::new(MarginalKind::Weibull, 0.9377, 4.59e-2, Parameterization::MomentPair).expect("valid"),
                n(2.2e5, 5.0e3),
                n(0.29, 5.8e-3),
                n(2.1e4, 1.0e3),
                n(24.0, 0.5),
                n(8.0, 0.3),
            ],
            (-0.004, 0.170),
        ),
        12 => closed(
            12,
            "frame plastic collapse",
            analytic::frame_collapse,
            vec![
                n(350.0, 35.0),
                n(50.8, 5.08),
                n(3.81, 0.381),
                n(173.0, 17.3),
                n(9.38, 0.938),
                n(33.1, 3.31),
                n(0.036, 0.0036),
            ],
            (-61008.0, 143310.0),
        ),
        13 => closed(
            13,
            "borehole",
            analytic::borehole,
            vec![
                u(0.05, 0.15),
                Marginal::new(MarginalKind::LogNormal, 7.71, 1.0056, Parameterization::NaturalParams).expect("valid"),
                u(63070.0, 115600.0),
                u(990.0, 1100.0),
                u(63.1, 116.0),
                u(700.0, 820.0),
                u(1120.0, 1680.0),
                u(9855.0, 12045.0),
            ],
            (12.0, 230.0),
        ),
        15 => return Ok(shear_building(bundled_record())),
        14 | 16 => Benchmark {
            id,
            name: if id == 14 { "23-bar truss" } else { "3-bay 5-story frame" },
            dim: if id == 14 { 10 } else { 21 },
            joint: None,
            reference_range: if id == 14 { (5.2, 12.2) } else { (0.007, 0.041) },
            operative_range: None,
            status: Status::OutOfScope,
            note: Some("finite-element model defined externally; not implemented"),
            simulator: Simulator::None,
        },
        _ => return Err(Error::config(format!("benchmark id {id} outside 1..={MAX_ID}"))),
    };
    Ok(b)
}

/// The shear building driven by `record`.
pub fn shear_building(record: GroundMotionRecord) -> Benchmark {
    let lognormal = |mean: f64, cov: f64| {
        Marginal::new(MarginalKind::LogNormal, mean, cov * mean, Parameterization::MomentPair).expect("valid")
    };
    let mut m: Vec<Marginal> = shear::TABLE_MASSES.iter().map(|&v| lognormal(v, shear::MASS_COV)).collect();
    m.extend(shear::TABLE_STIFFNESSES.iter().map(|&v| lognormal(v, shear::STIFFNESS_COV)));
    Benchmark {
        id: 15,
        name: "10-story shear building",
        dim: 2 * shear::STORIES,
        joint: joint(m),
        reference_range: (0.0121, 0.0174),
        operative_range: None,
        status: Status::Implemented,
        note: Some("driven by a synthetic stand-in record unless a ground motion file is supplied"),
        simulator: Simulator::Shear(Arc::new(record)),
    }
}

/// Benchmark `id`, with #15 driven by the record at `ground_motion` when given.
pub fn get_benchmark_with_record(id: u32, ground_motion: Option<&Path>) -> Result<Benchmark> {
    match (id, ground_motion) {
        (15, Some(path)) => Ok(shear_building(load_ground_motion(path)?)),
        _ => get_benchmark(id),
    }
}

/// Ids of all implemented benchmarks.
pub fn implemented_ids() -> Vec<u32> {
    (1..=MAX_ID)
        .filter(|&id| get_benchmark(id).is_ok_and(|b| b.status == Status::Implemented))
        .collect()
}

impl Benchmark {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn name(&self) -> &str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn note(&self) -> Option<&str> {
        self.note
    }

    pub fn joint(&self) -> Result<&JointModel> {
        self.joint.as_ref().ok_or_else(|| self.out_of_scope())
    }

    /// Tabulated output range.
    pub fn reference_range(&self) -> (f64, f64) {
        self.reference_range
    }

    /// Range used for the threshold grid in table mode: the tabulated range
    /// unless it was replaced.
    pub fn operative_range(&self) -> (f64, f64) {
        self.operative_range.unwrap_or(self.reference_range)
    }

    fn out_of_scope(&self) -> Error {
        Error::OutOfScope {
            id: self.id,
            reason: self.note.unwrap_or("not implemented").to_string(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::domain(format!(
                "benchmark #{} takes {} inputs, got {}",
                self.id,
                self.dim,
                x.len()
            )));
        }
        let y = match &self.simulator {
            Simulator::Closed(f) => f(x),
            Simulator::Shear(record) => shear_building_response(&ShearBuildingParams::from_inputs(x)?, record)?,
            Simulator::None => return Err(self.out_of_scope()),
        };
        if !y.is_finite() {
            return Err(Error::Simulation(format!("benchmark #{} returned {y} at {x:?}", self.id)));
        }
        Ok(y)
    }

    /// Evaluates every row, in parallel when enabled.
    pub fn evaluate_all(&self, x: &PointSet) -> Result<Vec<f64>> {
        if x.dim() != self.dim {
            return Err(Error::domain(format!("benchmark #{} takes {} inputs", self.id, self.dim)));
        }
        if matches!(self.simulator, Simulator::None) {
            return Err(self.out_of_scope());
        }
        let mut out: Vec<Result<f64>> = (0..x.len()).map(|_| Ok(0.0)).collect();
        let chunk = if matches!(self.simulator, Simulator::Shear(_)) { 16 } else { 4096 };
        for_each_chunk(&mut out, chunk, |start, slot| {
            for (k, s) in slot.iter_mut().enumerate() {
                *s = self.evaluate(x.row(start + k));
            }
        });
        out.into_iter().collect()
    }

    /// Identifies the simulator configuration (the ground motion for #15).
    pub fn fingerprint(&self) -> u64 {
        match &self.simulator {
            Simulator::Shear(r) => r
                .accelerations
                .iter()
                .fold(crate::rng::mix64(r.dt.to_bits()), |h, a| crate::rng::mix64(h ^ a.to_bits())),
            _ => 0,
        }
    }

    pub fn card(&self) -> BenchmarkCard {
        BenchmarkCard {
            id: self.id,
            name: self.name.to_string(),
            dimension: self.dim,
            status: self.status,
            inputs: self.joint.clone(),
            reference_range: self.reference_range,
            note: self.note.map(str::to_string),
        }
    }
}

/// JSON description of a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCard {
    pub id: u32,
    pub name: String,
    pub dimension: usize,
    pub status: Status,
    pub inputs: Option<JointModel>,
    pub reference_range: (f64, f64),
    pub note: Option<String>,
}

/// Quantile with linear interpolation between order statistics.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The `1e-3` and `1 - 1e-3` quantiles of `n` direct evaluations.
pub fn recompute_range(b: &Benchmark, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < MIN_RANGE_SAMPLES {
        return Err(Error::config(format!(
            "range recomputation needs at least {MIN_RANGE_SAMPLES} samples, got {n}"
        )));
    }
    let x = b.joint()?.sample(n, seed);
    let mut y = b.evaluate_all(&x)?;
    y.sort_by(f64::total_cmp);
    Ok((empirical_quantile(&y, RANGE_TAIL), empirical_quantile(&y, 1.0 - RANGE_TAIL)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedRange {
    id: u32,
    fingerprint: u64,
    n: usize,
    seed: u64,
    range: (f64, f64),
}

/// [`recompute_range`] memoized as JSON under `cache_dir`.
pub fn recompute_range_cached(b: &Benchmark, n: usize, seed: u64, cache_dir: &Path) -> Result<(f64, f64)> {
    let fingerprint = b.fingerprint();
    let path = cache_dir.join(format!("range-{}-{n}-{seed}-{fingerprint:016x}.json", b.id));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<CachedRange>(&text) {
            if c.id == b.id && c.fingerprint == fingerprint && c.n == n && c.seed == seed {
                return Ok(c.range);
            }
        }
    }
    let range = recompute_range(b, n, seed)?;
    std::fs::create_dir_all(cache_dir)?;
    std::fs::write(&path, serde_json::to_string_pretty(&CachedRange {
            id: b.id,
            fingerprint,
            n,
            seed,
            range,
        })?)?;
    Ok(range)
}

#[cfg(test)]
mod tests;
