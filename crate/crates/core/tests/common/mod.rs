#![allow(dead_code)]

use gosched::cqpoints::CqPointSet;
use gosched::dynamics::Nlsd;
use gosched::estimator::{CrossCov, Cqkf, FilterOptions, FilterState, Innovation, Propagator};
use gosched::neural::{td_loss, Mlp, Mode, INIT_RANGE};
use gosched::numerics::{Matrix, RngStream, StreamId, Vector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest relative error between backpropagated and central-difference
/// gradients of the TD loss at a random point. `coords` limits the check to
/// that many randomly chosen parameters.
pub fn gradient_check(sizes: &[usize], seed: u64, batch: usize, coords: Option<usize>) -> f64 {
    let mut rng = RngStream::new(seed, StreamId::Custom(1));
    let mut net = Mlp::init(sizes, INIT_RANGE, &[], &mut rng).unwrap();
    let in_dim = sizes[0];
    let out_dim = *sizes.last().unwrap();
    let input = Matrix::from_fn(in_dim, batch, |_, _| rng.random_range(-1.0..1.0));
    let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..out_dim)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();

    let loss_at = |net: &Mlp| {
        let (out, _) = net.forward_batch(&input, Mode::Eval).unwrap();
        td_loss(&out, &actions, &targets).0
    };
    let (out, cache) = net.forward_batch(&input, Mode::Eval).unwrap();
    let (_, grad_out) = td_loss(&out, &actions, &targets);
    let analytic = net.backward(&cache, &grad_out).flatten();

    let params = net.parameters();
    assert_eq!(analytic.len(), params.len());
    let idx: Vec<usize> = match coords {
        Some(k) if k < params.len() => rand::seq::index::sample(&mut rng, params.len(), k).into_vec(),
        _ => (0..params.len()).collect(),
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut p = params.clone();
    for &i in &idx {
        p[i] = params[i] + h;
        net.set_parameters(&p).unwrap();
        let up = loss_at(&net);
        p[i] = params[i] - h;
        net.set_parameters(&p).unwrap();
        let down = loss_at(&net);
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-8 {
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    net.set_parameters(&params).unwrap();
    worst
}

/// Textbook linear Kalman filter.
pub struct Kalman {
    pub x: Vector,
    pub p: Matrix,
}

impl Kalman {
    pub fn predict(&mut self, a: &Matrix, q: &Matrix) {
        self.x = a * &self.x;
        self.p = a * &self.p * a.transpose() + q;
    }

    /// Scalar measurement `y = h x + v`, `v ~ N(0, r)`.
    pub fn update(&mut self, h: &Matrix, r: f64, y: f64) {
        let ph = &self.p * h.transpose();
        let s = (h * &ph)[(0, 0)] + r;
        let k = ph / s;
        let innov = y - (h * &self.x)[(0, 0)];
        self.x += &k * innov;
        self.p -= &k * k.transpose() * s;
    }
}

pub struct OracleReport {
    pub max_mean_err: f64,
    pub max_cov_err: f64,
    pub steps: usize,
}

/// Runs the CQKF with a known linear propagator beside a reference Kalman
/// filter for `steps` steps, polling one sensor per step (sometimes none),
/// and reports the worst mean and covariance (Frobenius) gaps.
pub fn kalman_oracle(m: usize, n: usize, nprime: usize, innovation: Innovation, steps: usize, seed: u64) -> OracleReport {
    let mut rng = RngStream::new(seed, StreamId::Custom(2));
    let a = Matrix::from_fn(m, m, |i, j| if i == j { 0.95 } else { 0.1 / (1.0 + (i + 2 * j) as f64) });
    let h = Matrix::from_fn(n, m, |i, j| if i == j % n { 1.0 } else { 0.3 / (1.0 + (i + j) as f64) });
    let q = Matrix::from_fn(m, m, |i, j| if i == j { 0.02 } else { 0.004 });
    let r = Matrix::from_fn(n, n, |i, j| if i == j { 0.5 + 0.1 * i as f64 } else { 0.0 });
    let filter = Cqkf {
        points: CqPointSet::generate(m, nprime).unwrap(),
        process_noise: q.clone(),
        measurement_noise: r.clone(),
        h: h.clone(),
        propagator: Propagator::Known(Nlsd::Custom(a.clone())),
        options: FilterOptions { cross_cov: CrossCov::Standard, innovation },
    };
    let mut fs = FilterState::initial(m, 0.5, 0.1);
    let mut kf = Kalman { x: fs.post_mean.clone(), p: fs.post_cov.clone() };
    let qchol = q.clone().cholesky().unwrap().l();
    let mut x = Vector::from_fn(m, |i, _| 0.5 - 0.1 * i as f64);
    let mut report = OracleReport { max_mean_err: 0.0, max_cov_err: 0.0, steps };
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    for t in 0..steps {
        let noise = Vector::from_fn(m, |_, _| normal());
        x = &a * &x + &qchol * noise;
        kf.predict(&a, &q);
        // Every fifth step the packet is lost.
        let delivery = if t % 5 == 4 {
            None
        } else {
            let p = t % n;
            let hp = h.rows(p, 1).into_owned();
            let y = (&hp * &x)[(0, 0)] + r[(p, p)].sqrt() * normal();
            kf.update(&hp, r[(p, p)], y);
            Some((y, p + 1))
        };
        fs = filter.step(&fs, delivery).unwrap();
        report.max_mean_err = report.max_mean_err.max((&fs.post_mean - &kf.x).amax());
        report.max_cov_err = report.max_cov_err.max((&fs.post_cov - &kf.p).norm());
    }
    report
}

/// Mean, variance and fourth central moment of a sum of independent
/// Bernoulli variables.
pub fn poisson_binomial_moments(probs: &[f64]) -> (f64, f64, f64) {
    let mut dist = vec![1.0];
    for &p in probs {
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &w) in dist.iter().enumerate() {
            next[k] += w * (1.0 - p);
            next[k + 1] += w * p;
        }
        dist = next;
    }
    let mean: f64 = dist.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
    let central = |power: i32| -> f64 { dist.iter().enumerate().map(|(k, w)| (k as f64 - mean).powi(power) * w).sum() };
    (mean, central(2), central(4))
}

/// `P(lo <= X <= hi)` for `X ~ N(mean, var)`.
pub fn gaussian_interval(mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    let d = Normal::new(mean, var.sqrt()).unwrap();
    d.cdf(hi) - d.cdf(lo)
}

/// Standard error of the unbiased sample variance of `s` draws from a law
/// with variance `var` and fourth central moment `mu4`.
pub fn sample_variance_se(var: f64, mu4: f64, s: usize) -> f64 {
    let s = s as f64;
    ((mu4 - var * var * (s - 3.0) / (s - 1.0)) / s).sqrt()
}
