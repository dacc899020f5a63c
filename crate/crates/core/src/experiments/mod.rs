//! Scenario orchestration: config files, Monte Carlo repetitions, route
//! efficiency, the greedy comparator, parameter sweeps and CSV output.
//!
//! Repetition `r` of a run with root seed `s` draws everything from
//! `ChaCha8Rng::seed_from_u64(s + r)` (wrapping), so any single repetition
//! can be rerun on its own with `seed = s + r` and `repetitions = 1`.

mod config;
mod efficiency;
mod output;
mod scenario;
mod sweep;

pub use config::{
    parse_config, AcceptanceMode, AcceptanceSetting, AuctionSection, ChannelSection,
    DgroupSection, GridSection, GroupRuleName, PaymentName, QosSection, RadioSection,
    ReturnKind, RlSection, RouteSection, RunSection, ScenarioConfig, SchemeName,
};
pub use efficiency::{
    efficiency_comparison, efficiency_metrics, greedy_baseline, single_route, trapezoid_from_zero,
    Efficiency, EfficiencyRow, GreedyOutcome,
};
pub use output::{
    write_efficiency, write_eta, write_rl, write_rl_utilities, write_route, write_stats,
    write_summary, write_sweep, write_trace,
};
pub use scenario::{
    draw_destinations, draw_instance, mean_std, repetition_seed, route_analysis, run_repetition,
    run_rl, run_scenario, Instance, MetricSummary, Network, RepetitionResult, RouteAnalysis,
    RouteRow, ScenarioRun,
};
pub use sweep::{parse_axis_value, sweep, SweepRow};

use std::path::PathBuf;

use thiserror::Error;

use crate::auction::AuctionError;
use crate::bidding::BiddingError;
use crate::capacity::CapacityError;
use crate::channel::ChannelError;
use crate::hexgrid::GridError;
use crate::learning::LearningError;
use crate::routing::RouteError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("efficiency needs a nonempty increasing p grid in (0, 1] and one row per b")]
    BadGrid,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Bidding(#[from] BiddingError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
