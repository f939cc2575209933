use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::RunRecord;
use super::summary::{Aggregate, RunSummary};
use crate::Result;

/// Fixed leading columns of `records.csv`.
pub const RECORD_COLUMNS: [&str; 7] = ["t", "action", "transmitted", "erased", "reward", "trace_pri", "trace_pos"];

pub fn records_header(clients: usize) -> String {
    let mut cols: Vec<String> = RECORD_COLUMNS.iter().map(|s| s.to_string()).collect();
    for c in 1..=clients {
        cols.extend(["queried", "mse", "ztrue", "zhat"].iter().map(|k| format!("{k}_{c}")));
    }
    cols.join(",")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// One row per step, warm-up included. Empty cells mark absent values;
/// vector values are `;`-joined.
pub fn records_csv(records: &[RunRecord]) -> String {
    let clients = records.first().map_or(0, |r| r.clients.len());
    let mut out = records_header(clients);
    out.push('\n');
    for r in records {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            r.t,
            r.action,
            u8::from(r.transmitted),
            u8::from(r.erased),
            r.reward,
            r.trace_pri,
            r.trace_pos
        )
        .expect("writing to a String cannot fail");
        for c in &r.clients {
            write!(
                out,
                ",{},{},{},{}",
                u8::from(c.queried),
                opt(&c.mse),
                c.z_true.as_ref().map(|v| v.to_cell()).unwrap_or_default(),
                c.z_hat.as_ref().map(|v| v.to_cell()).unwrap_or_default()
            )
            .expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

/// One row per answered query in the evaluation window.
pub fn events_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("t,client,z_true,z_hat,mse\n");
    for r in records.iter().filter(|r| !r.warmup) {
        for (i, c) in r.clients.iter().enumerate().filter(|(_, c)| c.queried) {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.t,
                i + 1,
                c.z_true.as_ref().map(|v| v.to_cell()).unwrap_or_default(),
                c.z_hat.as_ref().map(|v| v.to_cell()).unwrap_or_default(),
                opt(&c.mse)
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

/// Writes `records.csv`, `events.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, records: &[RunRecord], summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("records.csv"), records_csv(records))?;
    fs::write(dir.join("events.csv"), events_csv(records))?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

pub fn write_aggregate(dir: &Path, agg: &Aggregate) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("aggregate.json"), serde_json::to_string_pretty(agg)?)?;
    Ok(())
}
