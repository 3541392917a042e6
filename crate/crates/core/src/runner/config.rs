//! Run configuration, stopping presets and the campaign matrix file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::learning::Enrichment;
use crate::metrics::StoppingKind;
use crate::surrogates::SurrogateKind;
use crate::{Error, Result};

pub const DEFAULT_POOL_SIZE: usize = 100_000;
pub const DEFAULT_GRID_INTERVALS: usize = 100;
pub const DEFAULT_RANGE_SAMPLES: usize = 1_000_000;
pub const DEFAULT_EPS_F_TOL: f64 = 0.1;

/// Budget `min(100 + 20 N, 300)`.
pub fn default_max_doe(dim: usize) -> usize {
    (100 + 20 * dim).min(300)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeSource {
    /// Tabulated range (or the recorded replacement for a flagged row).
    Table,
    /// Quantiles of direct evaluations.
    Recompute,
}

impl FromStr for RangeSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" => Ok(RangeSource::Table),
            "recompute" => Ok(RangeSource::Recompute),
            other => Err(Error::config(format!("unknown range source `{other}`"))),
        }
    }
}

impl std::fmt::Display for RangeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RangeSource::Table => "table",
            RangeSource::Recompute => "recompute",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub kind: StoppingKind,
    pub tol: f64,
    pub consecutive_triggers: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            kind: StoppingKind::BudgetOnly,
            tol: 0.0,
            consecutive_triggers: 2,
        }
    }
}

/// Recommended thresholds for a target accuracy and trigger count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingPreset {
    pub eps_f_tol: f64,
    pub triggers: usize,
    pub static_tol: f64,
    pub variance_tol: f64,
}

/// `(eps_f_tol, [static, variance] at 2 triggers, [static, variance] at 3 triggers)`.
const RECOMMENDED: [(f64, [f64; 2], [f64; 2]); 5] = [
    (0.05, [0.002, 0.071], [0.004, 0.085]),
    (0.10, [0.008, 0.225], [0.016, 0.274]),
    (0.15, [0.014, 0.320], [0.023, 0.390]),
    (0.20, [0.017, 0.441], [0.028, 0.511]),
    (0.25, [0.020, 0.460], [0.034, 0.533]),
];

impl StoppingPreset {
    pub fn all() -> Vec<StoppingPreset> {
        RECOMMENDED
            .iter()
            .flat_map(|&(eps, t2, t3)| {
                [(2, t2), (3, t3)].map(|(triggers, [s, v])| StoppingPreset {
                    eps_f_tol: eps,
                    triggers,
                    static_tol: s,
                    variance_tol: v,
                })
            })
            .collect()
    }

    /// Name such as `f0.10-t2`.
    pub fn name(&self) -> String {
        format!("f{:.2}-t{}", self.eps_f_tol, self.triggers)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|p| p.name() == name.trim())
            .ok_or_else(|| Error::config(format!("unknown stopping preset `{name}`")))
    }

    pub fn stopping(&self, kind: StoppingKind) -> Result<StoppingConfig> {
        let tol = match kind {
            StoppingKind::Static => self.static_tol,
            StoppingKind::Variance => self.variance_tol,
            StoppingKind::BudgetOnly => return Err(Error::config("presets apply to static or variance stopping")),
        };
        Ok(StoppingConfig {
            kind,
            tol,
            consecutive_triggers: self.triggers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub benchmark: u32,
    pub surrogate: SurrogateKind,
    pub enrichment: Enrichment,
    pub pool_size: usize,
    /// `None` means `max(12, 3N)`.
    pub initial_doe_size: Option<usize>,
    /// `None` means `min(100 + 20N, 300)`.
    pub max_doe_size: Option<usize>,
    pub grid_intervals: usize,
    pub range_source: RangeSource,
    pub range_samples: usize,
    pub stopping: StoppingConfig,
    pub seed: u64,
    /// Shared pool seed (deterministic-design mode); `None` derives it from `seed`.
    pub pool_seed: Option<u64>,
    pub pce_max_degree: u32,
    pub ground_motion: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(benchmark: u32, surrogate: SurrogateKind, enrichment: Enrichment) -> Self {
        Self {
            benchmark,
            surrogate,
            enrichment,
            pool_size: DEFAULT_POOL_SIZE,
            initial_doe_size: None,
            max_doe_size: None,
            grid_intervals: DEFAULT_GRID_INTERVALS,
            range_source: RangeSource::Table,
            range_samples: DEFAULT_RANGE_SAMPLES,
            stopping: StoppingConfig::default(),
            seed: 0,
            pool_seed: None,
            pce_max_degree: 3,
            ground_motion: None,
        }
    }

    /// Initial and maximum design sizes for an input dimension.
    pub fn sizes(&self, dim: usize) -> (usize, usize) {
        (
            self.initial_doe_size.unwrap_or_else(|| crate::designs::default_initial_size(dim)),
            self.max_doe_size.unwrap_or_else(|| default_max_doe(dim)),
        )
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let (init, max) = self.sizes(dim);
        if init < 2 {
            return Err(Error::config("initial design needs at least 2 points"));
        }
        if init > max {
            return Err(Error::config(format!("initial design {init} exceeds budget {max}")));
        }
        if self.pool_size < 10 * max {
            return Err(Error::config(format!(
                "pool of {} is smaller than 10 x budget {max}",
                self.pool_size
            )));
        }
        if self.stopping.consecutive_triggers == 0 {
            return Err(Error::config("consecutive triggers must be at least 1"));
        }
        if self.stopping.kind != StoppingKind::BudgetOnly && !(self.stopping.tol >= 0.0) {
            return Err(Error::config("stopping tolerance must be nonnegative"));
        }
        if self.grid_intervals == 0 {
            return Err(Error::config("grid needs at least one interval"));
        }
        Ok(())
    }

    /// File stem identifying the cell and repetition.
    pub fn label(&self, repetition: u32) -> String {
        format!("b{:02}-{}-{}-r{repetition:03}", self.benchmark, self.surrogate, self.enrichment)
    }
}

/// A campaign: a run matrix, repetitions, and analysis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub seed: u64,
    pub repetitions: u32,
    /// Share one pool per (benchmark, repetition) across strategies.
    pub fixed_pool: bool,
    /// Accuracy tolerances swept by the analysis.
    pub tols: Vec<f64>,
    pub matrix: Vec<RunConfig>,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            repetitions: 10,
            fixed_pool: false,
            tols: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            matrix: Vec::new(),
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn parse_one<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", value.trim()))
}

fn optional_size(value: &str) -> std::result::Result<Option<usize>, String> {
    match value.trim() {
        "default" | "auto" => Ok(None),
        v => parse_one(v).map(Some),
    }
}

/// Applies one scalar key to `cfg`.
fn apply_key(cfg: &mut RunConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    match key {
        "pool" | "pool_size" => cfg.pool_size = parse_one(value)?,
        "initial_doe" => cfg.initial_doe_size = optional_size(value)?,
        "max_doe" => cfg.max_doe_size = optional_size(value)?,
        "grid_intervals" => cfg.grid_intervals = parse_one(value)?,
        "range" => cfg.range_source = parse_one(value)?,
        "range_samples" => cfg.range_samples = parse_one(value)?,
        "stopping" => cfg.stopping.kind = parse_one(value)?,
        "tol" => cfg.stopping.tol = parse_one(value)?,
        "triggers" => cfg.stopping.consecutive_triggers = parse_one(value)?,
        "preset" => {
            let p = StoppingPreset::by_name(value).map_err(|e| e.to_string())?;
            let kind = match cfg.stopping.kind {
                StoppingKind::BudgetOnly => StoppingKind::Variance,
                k => k,
            };
            cfg.stopping = p.stopping(kind).map_err(|e| e.to_string())?;
        }
        "seed" => cfg.seed = parse_one(value)?,
        "pool_seed" => cfg.pool_seed = Some(parse_one(value)?),
        "pce_degree" => cfg.pce_max_degree = parse_one(value)?,
        "ground_motion" => cfg.ground_motion = Some(PathBuf::from(value.trim())),
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

/// Parses a campaign file:
///
/// ```text
/// [campaign]
/// seed = 7
/// reps = 3
/// tols = 0.05, 0.1
/// [defaults]
/// pool = 10000
/// [cell]
/// benchmark = 2, 4
/// surrogate = gp, pck
/// enrich = md, mov
/// ```
///
/// Each `[cell]` expands the Cartesian product of its comma lists over
/// benchmark, surrogate and enrichment; other keys override `[defaults]`.
/// Keys set in `[defaults]` apply to cells that follow it.
pub fn parse_campaign(text: &str, origin: &Path) -> Result<CampaignSpec> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    #[derive(PartialEq)]
    enum Section {
        None,
        Campaign,
        Defaults,
        Cell,
    }
    let mut spec = CampaignSpec::default();
    let mut defaults: Vec<(String, String)> = Vec::new();
    let mut cell: Option<(usize, BTreeMap<String, String>)> = None;
    let mut section = Section::None;

    fn flush(
        cell: Option<(usize, BTreeMap<String, String>)>,
        defaults: &[(String, String)],
        spec: &mut CampaignSpec,
        err: &dyn Fn(usize, String) -> Error,
    ) -> Result<()> {
        let Some((line, keys)) = cell else { return Ok(()) };
        let get = |k: &str| keys.get(k).ok_or_else(|| err(line, format!("cell is missing `{k}`")));
        let ids: Vec<u32> = parse_list(get("benchmark")?).map_err(|m| err(line, m))?;
        let surrogates: Vec<SurrogateKind> = parse_list(get("surrogate")?).map_err(|m| err(line, m))?;
        let enrichments: Vec<Enrichment> = parse_list(get("enrich")?).map_err(|m| err(line, m))?;
        for &id in &ids {
            for &s in &surrogates {
                for &e in &enrichments {
                    let mut cfg = RunConfig::new(id, s, e);
                    cfg.seed = spec.seed;
                    // A preset reads the stopping kind, so it goes last.
                    let mut preset = None;
                    let own = keys.iter().filter(|(k, _)| !matches!(k.as_str(), "benchmark" | "surrogate" | "enrich"));
                    for (k, v) in defaults.iter().map(|(k, v)| (k, v)).chain(own) {
                        if k == "preset" {
                            preset = Some(v);
                        } else {
                            apply_key(&mut cfg, k, v).map_err(|m| err(line, m))?;
                        }
                    }
                    if let Some(v) = preset {
                        apply_key(&mut cfg, "preset", v).map_err(|m| err(line, m))?;
                    }
                    spec.matrix.push(cfg);
                }
            }
        }
        Ok(())
    }

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            flush(cell.take(), &defaults, &mut spec, &err)?;
            section = match name.trim() {
                "campaign" => Section::Campaign,
                "defaults" => Section::Defaults,
                "cell" => {
                    cell = Some((line_no, BTreeMap::new()));
                    Section::Cell
                }
                other => return Err(err(line_no, format!("unknown section `{other}`"))),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line_no, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim().to_string());
        match section {
            Section::None => return Err(err(line_no, "key outside a section".into())),
            Section::Campaign => match key.as_str() {
                "seed" => spec.seed = parse_one(&value).map_err(|m| err(line_no, m))?,
                "reps" | "repetitions" => spec.repetitions = parse_one(&value).map_err(|m| err(line_no, m))?,
                "fixed_pool" => spec.fixed_pool = parse_one(&value).map_err(|m| err(line_no, m))?,
                "tols" => spec.tols = parse_list(&value).map_err(|m| err(line_no, m))?,
                other => return Err(err(line_no, format!("unknown campaign key `{other}`"))),
            },
            Section::Defaults => {
                let mut probe = RunConfig::new(1, SurrogateKind::Gp, Enrichment::Md);
                apply_key(&mut probe, &key, &value).map_err(|m| err(line_no, m))?;
                defaults.push((key, value));
            }
            Section::Cell => {
                let (_, keys) = cell.as_mut().expect("cell section open");
                keys.insert(key, value);
            }
        }
    }
    flush(cell.take(), &defaults, &mut spec, &err)?;
    if spec.matrix.is_empty() {
        return Err(err(text.lines().count().max(1), "campaign has no cells".into()));
    }
    Ok(spec)
}

pub fn load_campaign(path: &Path) -> Result<CampaignSpec> {
    parse_campaign(&std::fs::read_to_string(path)?, path)
}

fn size_text(v: Option<usize>) -> String {
    v.map_or_else(|| "default".to_string(), |n| n.to_string())
}

/// Writes `spec` with one fully explicit `[cell]` per matrix entry.
pub fn write_campaign(spec: &CampaignSpec) -> String {
    let mut s = String::new();
    let tols: Vec<String> = spec.tols.iter().map(|t| format!("{t:?}")).collect();
    let _ = writeln!(s, "[campaign]");
    let _ = writeln!(s, "seed = {}", spec.seed);
    let _ = writeln!(s, "reps = {}", spec.repetitions);
    let _ = writeln!(s, "fixed_pool = {}", spec.fixed_pool);
    let _ = writeln!(s, "tols = {}", tols.join(", "));
    for c in &spec.matrix {
        let _ = writeln!(s, "\n[cell]");
        let _ = writeln!(s, "benchmark = {}", c.benchmark);
        let _ = writeln!(s, "surrogate = {}", c.surrogate);
        let _ = writeln!(s, "enrich = {}", c.enrichment);
        let _ = writeln!(s, "pool = {}", c.pool_size);
        let _ = writeln!(s, "initial_doe = {}", size_text(c.initial_doe_size));
        let _ = writeln!(s, "max_doe = {}", size_text(c.max_doe_size));
        let _ = writeln!(s, "grid_intervals = {}", c.grid_intervals);
        let _ = writeln!(s, "range = {}", c.range_source);
        let _ = writeln!(s, "range_samples = {}", c.range_samples);
        let _ = writeln!(s, "stopping = {}", c.stopping.kind);
        let _ = writeln!(s, "tol = {:?}", c.stopping.tol);
        let _ = writeln!(s, "triggers = {}", c.stopping.consecutive_triggers);
        let _ = writeln!(s, "seed = {}", c.seed);
        if let Some(p) = c.pool_seed {
            let _ = writeln!(s, "pool_seed = {p}");
        }
        let _ = writeln!(s, "pce_degree = {}", c.pce_max_degree);
        if let Some(g) = &c.ground_motion {
            let _ = writeln!(s, "ground_motion = {}", g.display());
        }
    }
    s
}
