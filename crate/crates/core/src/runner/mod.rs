//! Orchestration: the sequential loop, campaigns, persistence and reports.

mod campaign;
mod config;
mod sequential;

pub use campaign::{
    analyze, default_thresholds, expand, load_record, load_records, run_campaign, run_seed, save_record,
    worker_count, AnalysisOptions, CampaignResult, Manifest, ManifestEntry, JOBS_ENV,
};
pub use config::{
    default_max_doe, load_campaign, parse_campaign, write_campaign, CampaignSpec, RangeSource, RunConfig,
    StoppingConfig, StoppingPreset, DEFAULT_EPS_F_TOL, DEFAULT_GRID_INTERVALS, DEFAULT_POOL_SIZE,
    DEFAULT_RANGE_SAMPLES,
};
pub use sequential::{
    output_range, run_repetition, run_sequential, IterationRecord, RunRecord, RunSeeds, RunStatus, WARM_FIT_STARTS,
};
