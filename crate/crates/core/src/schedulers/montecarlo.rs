use crate::dynamics::erasure_prob;
use crate::estimator::{Cqkf, FilterState};
use crate::numerics::{sample_variance, GaussianSampler, RngStream, StreamId, Vector};
use crate::queries::{QueryFn, QueryValue};
use crate::Result;

/// A client with a pending query at the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryingClient {
    pub query: QueryFn,
    pub alpha: f64,
}

/// One-step lookahead: for every sensor, simulate the channel and a
/// hypothetical measurement, sample the resulting posterior and score the
/// spread of each querying client's response.
#[derive(Debug, Clone)]
pub struct MonteCarloScheduler {
    samples: usize,
    rng: RngStream,
}

impl MonteCarloScheduler {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            rng: RngStream::new(seed, StreamId::MonteCarlo),
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Sensor with the smallest `Σ_c α_c ν_c` given an already predicted
    /// filter state; `0` when nobody queries. Ties go to the lower index.
    ///
    /// Samples are shared between clients so that every client's response
    /// spread is measured on the same hypothetical posteriors.
    pub fn decide(&mut self, filter: &Cqkf, predicted: &FilterState, clients: &[QueryingClient]) -> Result<usize> {
        Ok(self.scores(filter, predicted, clients)?.map_or(0, |scores| {
            let mut best = 0;
            for (i, &v) in scores.iter().enumerate() {
                if v < scores[best] {
                    best = i;
                }
            }
            best + 1
        }))
    }

    /// Per-sensor scores, or `None` with no querying client.
    pub fn scores(&mut self, filter: &Cqkf, predicted: &FilterState, clients: &[QueryingClient]) -> Result<Option<Vec<f64>>> {
        if clients.is_empty() {
            return Ok(None);
        }
        let m = predicted.dim();
        for c in clients {
            c.query.validate(m)?;
        }
        let n = filter.h.nrows();
        let prior = GaussianSampler::new(&predicted.prior_mean, &predicted.prior_cov)?;
        let mut scores = Vec::with_capacity(n);
        let mut responses: Vec<Vec<f64>> = vec![Vec::with_capacity(self.samples); clients.len()];
        let mut states: Vec<Vec<f64>> = Vec::new();
        for sensor in 1..=n {
            let gain = filter.gain_column(predicted, sensor)?;
            let post = GaussianSampler::new(&Vector::zeros(m), &gain.post_cov)?;
            let h = filter.h.row(sensor - 1);
            let y_mean = (h * &predicted.prior_mean)[0];
            let y_sd = (h * &predicted.prior_cov * h.transpose())[0].max(0.0).sqrt();
            let hbar = erasure_prob(sensor)?;
            for r in responses.iter_mut() {
                r.clear();
            }
            states.clear();
            for _ in 0..self.samples {
                let theta = self.rng.uniform();
                let x = if theta >= hbar {
                    let y = y_mean + y_sd * self.rng.standard_normal();
                    gain.posterior_mean(&predicted.prior_mean, y) + post.sample(&mut self.rng)
                } else {
                    prior.sample(&mut self.rng)
                };
                for (c, r) in clients.iter().zip(responses.iter_mut()) {
                    match c.query.eval(&x)? {
                        QueryValue::Scalar(v) => r.push(v),
                        QueryValue::Vector(_) => {}
                    }
                }
                if clients.iter().any(|c| c.query == QueryFn::CurrentState) {
                    states.push(x.iter().copied().collect());
                }
            }
            let state_var = if states.is_empty() {
                0.0
            } else {
                (0..m)
                    .map(|k| sample_variance(&states.iter().map(|s| s[k]).collect::<Vec<_>>()))
                    .sum()
            };
            let score = clients
                .iter()
                .zip(&responses)
                .map(|(c, r)| {
                    let nu = if c.query == QueryFn::CurrentState {
                        state_var
                    } else {
                        sample_variance(r)
                    };
                    c.alpha * nu
                })
                .sum();
            scores.push(score);
        }
        Ok(Some(scores))
    }
}
