//! Argument parsing and dispatch for the `gosched` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use gosched::complexity::ComplexityRow;
use gosched::cqpoints::CqPointSet;
use gosched::harness::{aggregate, run_replications, write_aggregate, write_run, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "gosched", version, about = "Goal-oriented sensor scheduling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run an experiment and write records.csv, events.csv and summary.json.
    Run {
        /// JSON experiment config; every field is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed (defaults to the config's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of replications with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        /// Output directory (defaults to the config's `out`, then `./out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the cubature quadrature points and weights as JSON.
    Cqpoints {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        order: usize,
    },
    /// Print per-decision operation-count bounds for all schedulers.
    Complexity {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        m: u64,
        #[arg(long)]
        c: u64,
        #[arg(long)]
        s: u64,
        #[arg(long)]
        nprime: u64,
        /// Width of the benchmark agent's first hidden layer.
        #[arg(long, default_value_t = gosched::complexity::BENCHMARK_HIDDEN)]
        hidden: u64,
        /// Print only the JSON.
        #[arg(long)]
        json: bool,
    },
}

/// Runs the command and returns the text destined for stdout.
pub fn run(cli: Cli) -> Result<String, Box<dyn std::error::Error>> {
    let text = match cli.command {
        Command::Run { config, seed, seeds, out } => {
            let cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            let seed = seed.unwrap_or(cfg.seed);
            let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let runs = run_replications(&cfg, seed, seeds as usize)?;
            if seeds == 1 {
                let (records, summary) = &runs[0];
                write_run(&out, records, summary)?;
                serde_json::to_string_pretty(summary)?
            } else {
                for (records, summary) in &runs {
                    write_run(&out.join(format!("seed_{}", summary.seed)), records, summary)?;
                }
                let summaries: Vec<_> = runs.into_iter().map(|(_, s)| s).collect();
                let agg = aggregate(&summaries);
                write_aggregate(&out, &agg)?;
                serde_json::to_string_pretty(&agg)?
            }
        }
        Command::Cqpoints { dim, order } => {
            let set = CqPointSet::generate(dim, order)?;
            serde_json::to_string_pretty(&set.to_json())?
        }
        Command::Complexity { n, m, c, s, nprime, hidden, json } => {
            let row = ComplexityRow::compute_with_hidden(n, m, c, s, nprime, hidden)?;
            let mut text = serde_json::to_string_pretty(&row)?;
            if !json {
                text.push_str("\n\n");
                text.push_str(&row.to_text());
            }
            text
        }
    };
    Ok(text)
}
