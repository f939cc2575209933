//! Sensor polling policies.
//!
//! [`DqnScheduler`] covers both deep Q-network agents; [`MonteCarloScheduler`]
//! is the sampling lookahead. Action `0` means "poll nobody" and sensor
//! actions are 1-based.

mod dqn;
mod montecarlo;
mod replay;

pub use dqn::{target_values, DqnParams, DqnScheduler, DqnVariant, Transition};
pub use montecarlo::{MonteCarloScheduler, QueryingClient};
pub use replay::{Eviction, ReplayBuffer, ReplayTuple};

use crate::numerics::{Matrix, RngStream, Vector};

/// Argmax with ties broken towards the lowest index.
pub fn argmax(values: &Vector) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Exploits iff a uniform draw `θ` strictly exceeds `ε`; otherwise picks
/// uniformly among all actions.
pub fn epsilon_greedy(values: &Vector, epsilon: f64, rng: &mut RngStream) -> usize {
    let theta = rng.uniform();
    if theta > epsilon {
        argmax(values)
    } else {
        rng.below(values.len())
    }
}

/// `max(0.1, ε - 0.005)`.
pub fn decay_epsilon(epsilon: f64) -> f64 {
    decay_epsilon_with(epsilon, 0.005, 0.1)
}

pub fn decay_epsilon_with(epsilon: f64, step: f64, floor: f64) -> f64 {
    (epsilon - step).max(floor)
}

/// `(trace(Ψ_pri), τ_1, …, τ_C)`.
pub fn proposed_observation(prior_cov: &Matrix, taus: &[u64]) -> Vector {
    let mut o = Vec::with_capacity(taus.len() + 1);
    o.push(prior_cov.trace());
    o.extend(taus.iter().map(|&t| t as f64));
    Vector::from_vec(o)
}

/// `(x̂_pri, vec(Ψ_pri), τ)` with `Ψ_pri` flattened row by row.
pub fn benchmark_observation(prior_mean: &Vector, prior_cov: &Matrix, taus: &[u64]) -> Vector {
    let m = prior_mean.len();
    let mut o = Vec::with_capacity(m + m * m + taus.len());
    o.extend(prior_mean.iter().copied());
    for r in prior_cov.row_iter() {
        o.extend(r.iter().copied());
    }
    o.extend(taus.iter().map(|&t| t as f64));
    Vector::from_vec(o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::StreamId;

    #[test]
    fn greedy_examples() {
        let mut rng = RngStream::new(1, StreamId::Exploration);
        let v = Vector::from_vec(vec![1.0, 3.0, 3.0]);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&v, 0.0, &mut rng), 1);
        }
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[epsilon_greedy(&v, 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn decay_examples() {
        assert_eq!(decay_epsilon(1.0), 0.995);
        assert_eq!(decay_epsilon(0.1), 0.1);
        assert_eq!(decay_epsilon(0.102), 0.1);
    }

    #[test]
    fn observation_layouts() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.25, 2.0]);
        let o = proposed_observation(&cov, &[0, 4]);
        assert_eq!(o.as_slice(), &[3.0, 0.0, 4.0]);
        let mean = Vector::from_vec(vec![7.0, 8.0]);
        let o = benchmark_observation(&mean, &cov, &[1, 2]);
        assert_eq!(o.as_slice(), &[7.0, 8.0, 1.0, 0.5, 0.25, 2.0, 1.0, 2.0]);
        let o = benchmark_observation(&Vector::zeros(20), &Matrix::identity(20, 20), &[0, 0]);
        assert_eq!(o.len(), 422);
    }

    proptest::proptest! {
        #[test]
        fn epsilon_stays_bounded(start in 0.1f64..=1.0, steps in 0usize..400) {
            let mut e = start;
            for _ in 0..steps {
                let next = decay_epsilon(e);
                proptest::prop_assert!(next <= e && next >= 0.1);
                e = next;
            }
        }
    }
}
