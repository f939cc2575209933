use serde::Serialize;

use super::run::RunRecord;

/// Contiguous action labels `first..first+len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub first: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientSummary {
    pub median_mse: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    /// Selection frequency of each action over the evaluation window;
    /// entry `k` is action `first + k`.
    pub asf: Vec<f64>,
    pub first_action: usize,
    pub transmissions: usize,
    pub erasures: usize,
    pub evaluation_steps: usize,
    pub per_client: Vec<ClientSummary>,
    pub total_reward: f64,
    pub seed: u64,
    pub config_echo: serde_json::Value,
    pub wall_clock_secs: f64,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

pub(crate) fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Statistics over records outside the warm-up window.
pub fn summarize(records: &[RunRecord], space: ActionSpace) -> RunSummary {
    let eval: Vec<&RunRecord> = records.iter().filter(|r| !r.warmup).collect();
    let steps = eval.len();
    let mut counts = vec![0usize; space.len];
    for r in &eval {
        if let Some(k) = r.action.checked_sub(space.first).filter(|&k| k < space.len) {
            counts[k] += 1;
        }
    }
    let asf = counts
        .iter()
        .map(|&c| if steps == 0 { 0.0 } else { c as f64 / steps as f64 })
        .collect();
    let clients = records.first().map_or(0, |r| r.clients.len());
    let per_client = (0..clients)
        .map(|c| {
            let mses = sorted(eval.iter().filter_map(|r| r.clients[c].mse).collect());
            ClientSummary {
                median_mse: quantile(&mses, 0.5),
                q1: quantile(&mses, 0.25),
                q3: quantile(&mses, 0.75),
                queries: mses.len(),
            }
        })
        .collect();
    RunSummary {
        asf,
        first_action: space.first,
        transmissions: eval.iter().filter(|r| r.transmitted).count(),
        erasures: eval.iter().filter(|r| r.erased).count(),
        evaluation_steps: steps,
        per_client,
        total_reward: eval.iter().map(|r| r.reward).sum(),
        seed: 0,
        config_echo: serde_json::Value::Null,
        wall_clock_secs: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

impl Spread {
    pub fn of(values: Vec<f64>) -> Option<Self> {
        let s = sorted(values);
        let (median, q1, q3) = (quantile(&s, 0.5)?, quantile(&s, 0.25)?, quantile(&s, 0.75)?);
        Some(Self { median, q1, q3, iqr: q3 - q1 })
    }
}

/// Median and IQR across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub transmissions: Option<Spread>,
    pub total_reward: Option<Spread>,
    pub asf: Vec<Option<Spread>>,
    pub median_mse: Vec<Option<Spread>>,
}

pub fn aggregate(summaries: &[RunSummary]) -> Aggregate {
    let actions = summaries.first().map_or(0, |s| s.asf.len());
    let clients = summaries.first().map_or(0, |s| s.per_client.len());
    Aggregate {
        seeds: summaries.iter().map(|s| s.seed).collect(),
        transmissions: Spread::of(summaries.iter().map(|s| s.transmissions as f64).collect()),
        total_reward: Spread::of(summaries.iter().map(|s| s.total_reward).collect()),
        asf: (0..actions)
            .map(|k| Spread::of(summaries.iter().map(|s| s.asf[k]).collect()))
            .collect(),
        median_mse: (0..clients)
            .map(|c| Spread::of(summaries.iter().filter_map(|s| s.per_client[c].median_mse).collect()))
            .collect(),
    }
}
