//! Ground-motion records: text formats and a synthetic stationary-filtered
//! stand-in record.

use std::io::Write;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Standard gravity, m/s².
pub const G: f64 = 9.80665;

/// Tolerance on time-step uniformity, seconds.
pub const DT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundMotionRecord {
    pub dt: f64,
    /// Accelerations in m/s².
    pub accelerations: Vec<f64>,
    pub label: String,
}

impl GroundMotionRecord {
    pub fn new(dt: f64, accelerations: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("time step {dt} must be positive")));
        }
        if accelerations.len() < 2 {
            return Err(Error::domain("a record needs at least two samples"));
        }
        if accelerations.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("record contains non-finite accelerations"));
        }
        Ok(Self {
            dt,
            accelerations,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.accelerations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accelerations.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.len() - 1) as f64
    }

    pub fn pga(&self) -> f64 {
        self.accelerations.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dt: self.dt,
            accelerations: self.accelerations.iter().map(|a| a * factor).collect(),
            label: self.label.clone(),
        }
    }
}

/// The bundled stand-in record.
pub fn bundled_record() -> GroundMotionRecord {
    parse_ground_motion(BUNDLED, Path::new("elcentro_synthetic.txt")).expect("bundled record parses")
}

pub(crate) const BUNDLED: &str = include_str!("../../data/elcentro_synthetic.txt");

pub fn load_ground_motion(path: &Path) -> Result<GroundMotionRecord> {
    let text = std::fs::read_to_string(path)?;
    parse_ground_motion(&text, path)
}

/// Parses one of:
/// - a `key=value` header (`dt=`, optional `units=g|m/s2`, `label=`) followed by
///   one acceleration per line or several per line;
/// - two columns `time acceleration` (dt inferred; optional `units=` line);
/// - a PEER AT2 file (four header lines with `NPTS=` and `DT=`, values in g).
///
/// `#` starts a comment. Accelerations end up in m/s².
pub fn parse_ground_motion(text: &str, origin: &Path) -> Result<GroundMotionRecord> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() >= 4 && lines[3].to_ascii_uppercase().contains("NPTS") {
        return parse_at2(&lines, origin);
    }
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut dt: Option<f64> = None;
    let mut scale = 1.0;
    let mut label = origin
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut single: Vec<f64> = Vec::new();
    let mut pairs: Vec<(usize, f64, f64)> = Vec::new();
    for (k, raw) in lines.iter().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let value = value.trim();
            match key.trim().to_ascii_lowercase().as_str() {
                "dt" => {
                    let v: f64 = value.parse().map_err(|_| err(line_no, format!("bad dt `{value}`")))?;
                    dt = Some(v);
                }
                "units" => {
                    scale = match value.to_ascii_lowercase().as_str() {
                        "g" => G,
                        "m/s2" | "m/s^2" => 1.0,
                        "cm/s2" | "cm/s^2" | "gal" => 0.01,
                        other => return Err(err(line_no, format!("unknown units `{other}`"))),
                    }
                }
                "label" => label = value.to_string(),
                other => return Err(err(line_no, format!("unknown header key `{other}`"))),
            }
            continue;
        }
        let values: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| err(line_no, format!("bad number `{s}`"))))
            .collect::<Result<_>>()?;
        if dt.is_some() {
            single.extend(values);
        } else if values.len() == 2 {
            pairs.push((line_no, values[0], values[1]));
        } else {
            return Err(err(line_no, "expected `time acceleration` or a `dt=` header first".into()));
        }
    }
    let (dt, acc) = match dt {
        Some(dt) => {
            if !pairs.is_empty() {
                return Err(err(pairs[0].0, "mixed formats".into()));
            }
            (dt, single)
        }
        None => {
            if pairs.len() < 2 {
                return Err(err(lines.len(), "need at least two samples".into()));
            }
            let dt = pairs[1].1 - pairs[0].1;
            for w in pairs.windows(2) {
                if ((w[1].1 - w[0].1) - dt).abs() > DT_TOLERANCE {
                    return Err(err(w[1].0, format!("non-uniform time step {} vs {dt}", w[1].1 - w[0].1)));
                }
            }
            (dt, pairs.iter().map(|p| p.2).collect())
        }
    };
    let acc = acc.into_iter().map(|a| a * scale).collect();
    GroundMotionRecord::new(dt, acc, label).map_err(|e| err(lines.len(), e.to_string()))
}

fn parse_at2(lines: &[&str], origin: &Path) -> Result<GroundMotionRecord> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let header = lines[3].to_ascii_uppercase().replace(',', " ");
    let field = |name: &str| -> Option<f64> {
        let rest = &header[header.find(name)? + name.len()..];
        let rest = rest.trim_start().trim_start_matches('=').trim_start();
        let tok: String = rest
            .chars()
            .take_while(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'E'))
            .collect();
        tok.parse().ok()
    };
    let npts = field("NPTS").ok_or_else(|| err(4, "missing NPTS".into()))? as usize;
    let dt = field("DT").ok_or_else(|| err(4, "missing DT".into()))?;
    let mut acc = Vec::with_capacity(npts);
    for (k, line) in lines.iter().enumerate().skip(4) {
        for tok in line.split_whitespace() {
            acc.push(tok.parse::<f64>().map_err(|_| err(k + 1, format!("bad number `{tok}`")))? * G);
        }
    }
    if acc.len() != npts {
        return Err(err(lines.len(), format!("NPTS={npts} but {} values", acc.len())));
    }
    let label = lines[1].trim().to_string();
    GroundMotionRecord::new(dt, acc, label).map_err(|e| err(lines.len(), e.to_string()))
}

/// Writes the `dt=` format in m/s² with round-trip float formatting.
pub fn write_ground_motion<W: Write>(record: &GroundMotionRecord, mut w: W) -> Result<()> {
    writeln!(w, "label={}", record.label)?;
    writeln!(w, "dt={:?}", record.dt)?;
    writeln!(w, "units=m/s2")?;
    for a in &record.accelerations {
        writeln!(w, "{a:?}")?;
    }
    Ok(())
}

/// Parameters of a Kanai-Tajimi filtered white noise with a trapezoidal
/// (quadratic rise, plateau, exponential decay) envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMotion {
    pub ground_frequency: f64,
    pub ground_damping: f64,
    pub rise_end: f64,
    pub plateau_end: f64,
    pub decay_rate: f64,
    pub dt: f64,
    pub samples: usize,
    /// Target peak ground acceleration in g.
    pub pga_g: f64,
}

impl Default for SyntheticMotion {
    fn default() -> Self {
        Self {
            ground_frequency: 15.6,
            ground_damping: 0.6,
            rise_end: 1.5,
            plateau_end: 11.5,
            decay_rate: 0.18,
            dt: 0.02,
            samples: 1559,
            pga_g: 0.319,
        }
    }
}

impl SyntheticMotion {
    fn envelope(&self, t: f64) -> f64 {
        if t < self.rise_end {
            (t / self.rise_end).powi(2)
        } else if t <= self.plateau_end {
            1.0
        } else {
            (-self.decay_rate * (t - self.plateau_end)).exp()
        }
    }

    /// Filters unit white noise through the ground oscillator with
    /// average-acceleration steps, applies the envelope and scales to the
    /// target PGA. Output in m/s².
    pub fn generate(&self, seed: u64) -> Result<GroundMotionRecord> {
        if self.samples < 2 || !(self.dt > 0.0) || !(self.pga_g > 0.0) {
            return Err(Error::config("synthetic motion needs >= 2 samples, dt > 0 and pga > 0"));
        }
        let mut rng = rng_from_seed(seed);
        let (w, z, h) = (self.ground_frequency, self.ground_damping, self.dt);
        let (beta, gamma) = (0.25, 0.5);
        let k_eff = w * w + gamma / (beta * h) * 2.0 * z * w + 1.0 / (beta * h * h);
        let (mut u, mut v) = (0.0_f64, 0.0_f64);
        let noise: Vec<f64> = (0..self.samples).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut a = -noise[0];
        let mut out = Vec::with_capacity(self.samples);
        out.push(0.0);
        for (i, &n) in noise.iter().enumerate().skip(1) {
            let p = -n
                + (u / (beta * h * h) + v / (beta * h) + (0.5 / beta - 1.0) * a)
                + 2.0 * z * w * (gamma * u / (beta * h) + (gamma / beta - 1.0) * v + h * (0.5 * gamma / beta - 1.0) * a);
            let u1 = p / k_eff;
            let v1 = gamma / (beta * h) * (u1 - u) + (1.0 - gamma / beta) * v + h * (1.0 - 0.5 * gamma / beta) * a;
            let a1 = (u1 - u) / (beta * h * h) - v / (beta * h) - (0.5 / beta - 1.0) * a;
            u = u1;
            v = v1;
            a = a1;
            out.push(-(2.0 * z * w * v + w * w * u) * self.envelope(i as f64 * h));
        }
        let peak = out.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let scale = self.pga_g * G / peak;
        GroundMotionRecord::new(h, out.into_iter().map(|x| x * scale).collect(), "synthetic")
    }
}

/// Seed of the bundled record.
pub const BUNDLED_SEED: u64 = 1940;
