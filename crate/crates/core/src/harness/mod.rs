//! Experiment configuration, the per-step simulation loop, summaries and
//! output files.
//!
//! A step runs in this order: the world evolves, the clients' query chains
//! advance, the filter predicts and the scheduler picks a sensor, the
//! polled value crosses the erasure channel, the filter updates, every
//! querying client is answered and scored, and the DQN agents learn.

mod config;
mod io;
mod run;
mod summary;

use rayon::prelude::*;

pub use config::{
    ChainSpec, ClientSpec, CrossCovFlag, ExperimentConfig, InnovationFlag, NlsdSpec, QuerySpec, RosterSpec,
    SchedulerKind, WorldSpec, DEFAULT_MEMORYLESS_Q,
};
pub use io::{events_csv, records_csv, records_header, write_aggregate, write_run, RECORD_COLUMNS};
pub use run::{run_experiment, ClientRecord, Experiment, RunRecord};
pub use summary::{aggregate, quantile, summarize, ActionSpace, Aggregate, ClientSummary, RunSummary, Spread};

use crate::Result;

/// Independent replications with seeds `seed, seed+1, …`, run in parallel.
pub fn run_replications(cfg: &ExperimentConfig, seed: u64, count: usize) -> Result<Vec<(Vec<RunRecord>, RunSummary)>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| run_experiment(cfg, seed.wrapping_add(k)))
        .collect()
}
