//! Reproducible twin experiments driven by flat configuration files.

pub mod config;
pub mod experiment;
pub mod export;

pub use config::ExperimentConfig;
pub use experiment::{
    covariance_rank, rank_series, run_realization, run_twin_experiment, sweep, time_average, Divergence,
    ExperimentResult, RankSeries, RealizationTrace, RmseSeries, SweepEntry, SweepRow, TwinSetup,
};
