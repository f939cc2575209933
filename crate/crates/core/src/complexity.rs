//! Closed-form per-decision operation counts of the three schedulers.
//!
//! Asymptotically the proposed scheduler is `O(N²C)` (quadratic in the
//! sensor count, independent of `M`), the benchmark agent is
//! `O(N(M³ + NM + N²))` when its hidden width scales with `M`, and the Monte Carlo lookahead is
//! `O(NSM³n')`.
//!
//! Counts are evaluated exactly as scaled integers and rounded half up.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityBounds {
    pub lower: u128,
    pub upper: u128,
}

/// Numerator over 6, rounded half up.
fn round6(num: u128) -> u128 {
    (num + 3) / 6
}

fn positive(vals: &[(&str, u64)]) -> Result<()> {
    for (name, v) in vals {
        if *v == 0 {
            return Err(Error::Domain(format!("{name} must be a positive integer")));
        }
    }
    Ok(())
}

/// Monte Carlo one-step lookahead; does not depend on `C`.
pub fn montecarlo_bounds(n: u64, m: u64, c: u64, s: u64, nprime: u64) -> Result<ComplexityBounds> {
    positive(&[("N", n), ("M", m), ("C", c), ("S", s), ("n'", nprime)])?;
    let (n, m, s, np) = (n as u128, m as u128, s as u128, nprime as u128);
    let m2 = m * m;
    let m3 = m2 * m;
    let lower6 = 2 * m3 + 48 * m3 * np + 132 * m2 * np + 24 * m2 + 72 * m * np + 6 * n * s * (4 + m) + 6 * n;
    let extra6 = n * s * (44 * m3 + 96 * m3 * np + 60 * m2 * np + 48 * m2 + 6 * m + 18);
    Ok(ComplexityBounds {
        lower: round6(lower6),
        upper: round6(lower6 + extra6),
    })
}

/// Proposed scheduler with a `[C+1, 4, N+1]` network.
pub fn proposed_bounds(n: u64, c: u64) -> Result<ComplexityBounds> {
    positive(&[("N", n), ("C", c)])?;
    let (n, c) = (n as u128, c as u128);
    let lower = (30 * n + 31) * (8 * c + 9 * n + 21) + 3;
    Ok(ComplexityBounds {
        lower,
        upper: lower + n,
    })
}

/// Width of the benchmark agent's first hidden layer in the reference
/// configuration (`ceil(2.5M)` at `M = 20`).
pub const BENCHMARK_HIDDEN: u64 = 50;

/// Forward-pass operation count `Σ l_{i+1}(2l_i + 1)` of a fully connected
/// network with the given layer sizes.
pub fn layer_cost(sizes: &[u128]) -> u128 {
    sizes.windows(2).map(|w| w[1] * (2 * w[0] + 1)).sum()
}

/// Benchmark agent observing the full filter state, with a
/// [`BENCHMARK_HIDDEN`]-wide first hidden layer.
pub fn benchmark_bounds(n: u64, m: u64, c: u64) -> Result<ComplexityBounds> {
    benchmark_bounds_with_hidden(n, m, c, BENCHMARK_HIDDEN)
}

/// Benchmark agent with a `[M+M²+C, hidden, M, N, N]` network. With
/// `hidden = 2.5M` the lower bound is
/// `(30N+1)(5M³ + 10M² + 5MC + 3.5M + 2NM + 2N² + 2N) + 3`.
pub fn benchmark_bounds_with_hidden(n: u64, m: u64, c: u64, hidden: u64) -> Result<ComplexityBounds> {
    positive(&[("N", n), ("M", m), ("C", c), ("hidden", hidden)])?;
    let (n, m, c, hidden) = (n as u128, m as u128, c as u128, hidden as u128);
    let lower = (30 * n + 1) * layer_cost(&[m + m * m + c, hidden, m, n, n]) + 3;
    Ok(ComplexityBounds {
        lower,
        upper: lower + n - 1,
    })
}

/// All three schedulers for one parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityRow {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "C")]
    pub c: u64,
    #[serde(rename = "S")]
    pub s: u64,
    pub nprime: u64,
    pub proposed: ComplexityBounds,
    pub benchmark: ComplexityBounds,
    pub montecarlo: ComplexityBounds,
}

impl ComplexityRow {
    pub fn compute(n: u64, m: u64, c: u64, s: u64, nprime: u64) -> Result<Self> {
        Self::compute_with_hidden(n, m, c, s, nprime, BENCHMARK_HIDDEN)
    }

    pub fn compute_with_hidden(n: u64, m: u64, c: u64, s: u64, nprime: u64, hidden: u64) -> Result<Self> {
        Ok(Self {
            n,
            m,
            c,
            s,
            nprime,
            proposed: proposed_bounds(n, c)?,
            benchmark: benchmark_bounds_with_hidden(n, m, c, hidden)?,
            montecarlo: montecarlo_bounds(n, m, c, s, nprime)?,
        })
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let head = format!(
            "{{N, M, C, S, n'}} = {{{}, {}, {}, {}, {}}}",
            self.n, self.m, self.c, self.s, self.nprime
        );
        let line = |name: &str, b: &ComplexityBounds| format!("{name:<12}{:>14}{:>14}", b.lower, b.upper);
        [
            head,
            format!("{:<12}{:>14}{:>14}", "scheduler", "lower", "upper"),
            line("proposed", &self.proposed),
            line("benchmark", &self.benchmark),
            line("montecarlo", &self.montecarlo),
        ]
        .join("\n")
    }
}
