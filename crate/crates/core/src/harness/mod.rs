//! Experiment drivers: configuration, training, evaluation, sweeps and CSV
//! output.

mod config;
mod output;
mod runs;
pub mod units;

pub use config::{
    Config, HeuristicSection, JammingConfig, OutputConfig, PolicySpec, ProtocolConfig, SweepConfig,
    SwitchConfig, SystemConfig,
};
pub use output::{
    format_float, read_frames_csv, read_summary_csv, write_frames_csv, write_summary_csv,
    write_training_csv, FrameRecord,
};
pub use runs::{
    convergence_iteration, derive_seed, evaluate, link_bounds, run_sweep, run_switch, summarize,
    train, Evaluation, LinkReport, PolicyRun, Rolling, Summary, SwitchReport, TrainingRow,
    TrainingRun, SEED_AGENT, SEED_EVAL_ENV, SEED_TRAIN_ENV,
};
