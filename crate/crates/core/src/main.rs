use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use surrodist::benchmarks::{
    get_benchmark, get_benchmark_with_record, implemented_ids, recompute_range, recompute_range_cached,
    write_ground_motion, SyntheticMotion, BUNDLED_SEED, MAX_ID,
};
use surrodist::designs::{initial_doe, lhs, save_points_csv, sobol, CandidatePool};
use surrodist::learning::Enrichment;
use surrodist::metrics::StoppingKind;
use surrodist::runner::{
    analyze, load_campaign, load_records, run_campaign, run_sequential, AnalysisOptions, RangeSource, RunConfig,
    RunRecord, StoppingConfig, StoppingPreset, DEFAULT_GRID_INTERVALS, DEFAULT_POOL_SIZE, JOBS_ENV,
};
use surrodist::surrogates::SurrogateKind;
use surrodist::{PointSet, Result};

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "surrodist", version, about = "Sequential surrogates for full output distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One sequential run; writes record.json, trace.csv and cdf.csv.
    Run(RunArgs),
    /// A run matrix from a campaign file.
    Campaign(CampaignArgs),
    /// Report CSVs from a campaign directory.
    Analyze(AnalyzeArgs),
    /// Recomputed output range next to the tabulated one.
    Range(RangeArgs),
    /// Benchmark cards as JSON.
    Card(CardArgs),
    /// Write a design (maximin from a pool, LHS, or Sobol) as CSV.
    Design(DesignArgs),
    /// Regenerate the bundled synthetic ground-motion record.
    GroundMotion(GroundMotionArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    benchmark: u32,
    #[arg(long, default_value = "pck")]
    surrogate: SurrogateKind,
    #[arg(long, default_value = "md")]
    enrich: Enrichment,
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pool: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// static, variance or budget.
    #[arg(long, default_value = "budget")]
    stopping: StoppingKind,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 2)]
    triggers: usize,
    /// Named threshold preset such as f0.10-t2 (sets tol and triggers).
    #[arg(long, conflicts_with_all = ["tol"])]
    preset: Option<String>,
    #[arg(long)]
    initial_doe: Option<usize>,
    #[arg(long)]
    max_doe: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_GRID_INTERVALS)]
    grid_intervals: usize,
    /// table or recompute.
    #[arg(long, default_value = "table")]
    range: RangeSource,
    #[arg(long, default_value_t = 3)]
    pce_degree: u32,
    /// Ground-motion file for the shear building.
    #[arg(long)]
    ground_motion: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CampaignArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Overrides the repetition count in the file.
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long, default_value_t = 1, env = JOBS_ENV)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
    /// Also write the report CSVs into <out>/report.
    #[arg(long)]
    analyze: bool,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2,0.25")]
    tols: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    triggers: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct RangeArgs {
    #[arg(long)]
    benchmark: Option<u32>,
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ground_motion: Option<PathBuf>,
    /// Cache directory for recomputed ranges.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CardArgs {
    /// All benchmarks when omitted.
    #[arg(long)]
    benchmark: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    Maximin,
    Lhs,
    Sobol,
}

#[derive(clap::Args)]
struct DesignArgs {
    #[arg(long, value_enum, default_value = "maximin")]
    kind: DesignKind,
    /// Benchmark whose inputs are sampled (maximin); unit hypercube otherwise.
    #[arg(long)]
    benchmark: Option<u32>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    pool: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct GroundMotionArgs {
    #[arg(long, default_value_t = BUNDLED_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(surrodist::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => run(a),
        Command::Campaign(a) => campaign(a),
        Command::Analyze(a) => analyze_dir(a),
        Command::Range(a) => range(a),
        Command::Card(a) => card(a),
        Command::Design(a) => design(a),
        Command::GroundMotion(a) => ground_motion(a),
    }
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::new(a.benchmark, a.surrogate, a.enrich);
    cfg.pool_size = a.pool;
    cfg.seed = a.seed;
    cfg.initial_doe_size = a.initial_doe;
    cfg.max_doe_size = a.max_doe;
    cfg.grid_intervals = a.grid_intervals;
    cfg.range_source = a.range;
    cfg.pce_max_degree = a.pce_degree;
    cfg.ground_motion = a.ground_motion;
    cfg.stopping = match (&a.preset, a.stopping) {
        (Some(name), kind) => StoppingPreset::by_name(name)?.stopping(kind)?,
        (None, StoppingKind::BudgetOnly) => StoppingConfig::default(),
        (None, kind) => StoppingConfig {
            kind,
            tol: a.tol.ok_or_else(|| surrodist::Error::Config("--tol is required with this stopping kind".into()))?,
            consecutive_triggers: a.triggers,
        },
    };
    let record = run_sequential(&cfg)?;
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("record.json"), serde_json::to_string_pretty(&record)?)?;
    write_trace(&record, &a.out.join("trace.csv"))?;
    if let Some(est) = &record.final_estimate {
        est.write_csv(BufWriter::new(File::create(a.out.join("cdf.csv"))?))?;
    }
    let last = record.trace.last();
    out!(
        "{}: {:?} after {} evaluations, eps_f = {}",
        cfg.label(0),
        record.status,
        record.evaluations,
        last.map_or("n/a".to_string(), |t| format!("{:.4}", t.eps_f))
    );
    if let Some(m) = &record.message {
        eprintln!("{m}");
    }
    Ok(())
}

fn write_trace(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "doe_size",
        "eps_f",
        "eps_s",
        "eps_v",
        "selected",
        "y_star",
        "fallback",
        "fit_diagnostic",
        "wall_seconds",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for t in &record.trace {
        w.write_record([
            t.doe_size.to_string(),
            t.eps_f.to_string(),
            opt(t.eps_s.map(|v| v.to_string())),
            opt(t.eps_v.map(|v| v.to_string())),
            opt(t.selected.map(|v| v.to_string())),
            opt(t.y_star.map(|v| v.to_string())),
            t.fallback.to_string(),
            t.fit_diagnostic.to_string(),
            t.wall_seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn campaign(a: CampaignArgs) -> Result<()> {
    let mut spec = load_campaign(&a.matrix)?;
    if let Some(r) = a.reps {
        spec.repetitions = r;
    }
    let result = run_campaign(&spec, a.jobs, &a.out, a.resume)?;
    let failed = result.records.iter().filter(|r| r.message.is_some()).count();
    out!(
        "{} runs ({} executed, {} loaded, {failed} failed) in {}",
        result.records.len(),
        result.executed,
        result.records.len() - result.executed,
        a.out.display()
    );
    if a.analyze {
        let opts = AnalysisOptions {
            tols: spec.tols.clone(),
            ..AnalysisOptions::default()
        };
        for f in analyze(&result.records, &opts, &a.out.join("report"))? {
            out!("{}", f.display());
        }
    }
    Ok(())
}

fn analyze_dir(a: AnalyzeArgs) -> Result<()> {
    let records = load_records(&a.input)?;
    let opts = AnalysisOptions {
        tols: a.tols,
        triggers: a.triggers,
        ..AnalysisOptions::default()
    };
    for f in analyze(&records, &opts, &a.out)? {
        out!("{}", f.display());
    }
    Ok(())
}

fn range(a: RangeArgs) -> Result<()> {
    let ids = match a.benchmark {
        Some(id) => vec![id],
        None => implemented_ids(),
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "benchmark,n,seed,recomputed_min,recomputed_max,table_min,table_max")?;
    for id in ids {
        let b = get_benchmark_with_record(id, a.ground_motion.as_deref())?;
        let r = match &a.cache {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                recompute_range_cached(&b, a.n, a.seed, dir)?
            }
            None => recompute_range(&b, a.n, a.seed)?,
        };
        let t = b.reference_range();
        writeln!(out, "{id},{},{},{},{},{},{}", a.n, a.seed, r.0, r.1, t.0, t.1)?;
    }
    Ok(())
}

fn card(a: CardArgs) -> Result<()> {
    let ids: Vec<u32> = match a.benchmark {
        Some(id) => vec![id],
        None => (1..=MAX_ID).collect(),
    };
    let cards = ids
        .into_iter()
        .map(|id| get_benchmark(id).map(|b| b.card()))
        .collect::<Result<Vec<_>>>()?;
    if cards.len() == 1 {
        out!("{}", serde_json::to_string_pretty(&cards[0])?);
    } else {
        out!("{}", serde_json::to_string_pretty(&cards)?);
    }
    Ok(())
}

fn design(a: DesignArgs) -> Result<()> {
    let points = match (a.kind, a.benchmark) {
        (DesignKind::Maximin, Some(id)) => {
            let b = get_benchmark(id)?;
            let pool = CandidatePool::build(b.joint()?, a.pool, a.seed)?;
            let picks = initial_doe(&pool, a.n, a.seed)?;
            let dim = pool.dim();
            let mut data = Vec::with_capacity(picks.len() * dim);
            for &i in &picks {
                data.extend_from_slice(pool.points().row(i));
            }
            PointSet::from_row_major(dim, data)
        }
        (DesignKind::Maximin, None) => {
            return Err(surrodist::Error::Config("maximin designs need --benchmark".into()));
        }
        (kind, b) => {
            let dim = match (a.dim, b) {
                (Some(d), _) => d,
                (None, Some(id)) => get_benchmark(id)?.dim(),
                (None, None) => return Err(surrodist::Error::Config("give --dim or --benchmark".into())),
            };
            match kind {
                DesignKind::Lhs => lhs(a.n, dim, a.seed)?,
                _ => sobol(a.n, dim)?,
            }
        }
    };
    save_points_csv(&points, &a.out)?;
    out!("{} points in {} dimensions -> {}", points.len(), points.dim(), a.out.display());
    Ok(())
}

fn ground_motion(a: GroundMotionArgs) -> Result<()> {
    let m = SyntheticMotion::default();
    let mut record = m.generate(a.seed)?;
    record.label = "synthetic-elcentro-ns".into();
    let mut w = BufWriter::new(File::create(&a.out)?);
    writeln!(w, "# Synthetic stand-in for the 1940 El Centro N-S component.")?;
    writeln!(
        w,
        "# Kanai-Tajimi filtered white noise ({} rad/s, damping {}), envelope rise {} s,",
        m.ground_frequency, m.ground_damping, m.rise_end
    )?;
    writeln!(
        w,
        "# plateau to {} s, decay {} 1/s, {} samples at {} s, scaled to PGA {} g.",
        m.plateau_end, m.decay_rate, m.samples, m.dt, m.pga_g
    )?;
    writeln!(w, "# Regenerate: surrodist ground-motion --seed {} --out <file>", a.seed)?;
    write_ground_motion(&record, &mut w)?;
    w.flush()?;
    Ok(())
}
