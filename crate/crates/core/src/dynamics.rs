//! Ground-truth world: state evolution, sensor observations and the
//! packet-erasure channel between sensors and the edge node.

use crate::numerics::{GaussianSampler, Matrix, RngStream, Vector};
use crate::{Error, Result};

/// State dynamics function `f(·)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nlsd {
    /// `x + 0.05 x ⊙ (1 - x ⊙ x)`
    Logistic,
    /// `x ⊙ roll(x)` with `roll(x) = [x_2, …, x_M, x_1]`
    Roll,
    /// Linear map `A x`, mainly for testing against a Kalman filter.
    Custom(Matrix),
}

impl Nlsd {
    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            Nlsd::Logistic => nlsd_logistic(x),
            Nlsd::Roll => nlsd_roll(x),
            Nlsd::Custom(a) => a * x,
        }
    }
}

pub fn nlsd_logistic(x: &Vector) -> Vector {
    x.map(|v| v + 0.05 * v * (1.0 - v * v))
}

pub fn nlsd_roll(x: &Vector) -> Vector {
    let m = x.len();
    Vector::from_fn(m, |i, _| x[i] * x[(i + 1) % m])
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub m: usize,
    pub n: usize,
    pub process_noise: Matrix,
    pub measurement_noise: Matrix,
    pub h: Matrix,
    pub nlsd: Nlsd,
    pub x0: Vector,
}

impl WorldConfig {
    /// Dimensions and noise levels used throughout the experiments:
    /// `M = N = 20`, `Σ_v1 = 2.5e-3·I`, `Σ_v2 = I`, `H = I`, `x(0) = 0`.
    pub fn standard(nlsd: Nlsd) -> Self {
        let (m, n) = (20, 20);
        Self {
            m,
            n,
            process_noise: Matrix::identity(m, m) * 2.5e-3,
            measurement_noise: Matrix::identity(n, n),
            h: Matrix::identity(n, m),
            nlsd,
            x0: Vector::zeros(m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 {
            return bad("M and N must be positive".into());
        }
        if self.h.shape() != (self.n, self.m) {
            return bad(format!(
                "H must be {}x{}, got {}x{}",
                self.n,
                self.m,
                self.h.nrows(),
                self.h.ncols()
            ));
        }
        if self.process_noise.shape() != (self.m, self.m) {
            return bad("process noise covariance must be MxM".into());
        }
        if self.measurement_noise.shape() != (self.n, self.n) {
            return bad("measurement noise covariance must be NxN".into());
        }
        if self.x0.len() != self.m {
            return bad("initial state must have length M".into());
        }
        if let Nlsd::Custom(a) = &self.nlsd {
            if a.shape() != (self.m, self.m) {
                return bad("custom dynamics matrix must be MxM".into());
            }
        }
        for (name, cov) in [
            ("process", &self.process_noise),
            ("measurement", &self.measurement_noise),
        ] {
            if cov.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name} noise covariance has non-finite entries"));
            }
            if (cov - cov.transpose()).amax() > 1e-9 {
                return bad(format!("{name} noise covariance is not symmetric"));
            }
            if cov.iter().any(|&v| v != 0.0) {
                crate::numerics::cholesky(cov).map_err(|_| {
                    Error::InvalidConfig(format!("{name} noise covariance is not positive definite"))
                })?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: usize,
    pub x: Vector,
}

impl WorldState {
    pub fn initial(cfg: &WorldConfig) -> Self {
        Self {
            t: 0,
            x: cfg.x0.clone(),
        }
    }
}

/// Samplers for both noise processes, built once per experiment.
#[derive(Debug, Clone)]
pub struct World {
    pub cfg: WorldConfig,
    process: GaussianSampler,
    measurement: GaussianSampler,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<Self> {
        cfg.validate()?;
        let process = GaussianSampler::new(&Vector::zeros(cfg.m), &cfg.process_noise)?;
        let measurement = GaussianSampler::new(&Vector::zeros(cfg.n), &cfg.measurement_noise)?;
        Ok(Self {
            cfg,
            process,
            measurement,
        })
    }

    /// `x(t) = f(x(t-1)) + v_1(t)`
    pub fn step_state(&self, w: &WorldState, rng: &mut RngStream) -> WorldState {
        let x = self.cfg.nlsd.apply(&w.x) + self.process.sample(rng);
        WorldState { t: w.t + 1, x }
    }

    /// `y(t) = H x(t) + v_2(t)`, all `N` sensors.
    pub fn observe(&self, w: &WorldState, rng: &mut RngStream) -> Vector {
        &self.cfg.h * &w.x + self.measurement.sample(rng)
    }
}

/// `ℏ_p = 0.02 ⌈(p-1)/10⌉` for sensor `p` (1-based).
pub fn erasure_prob(p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::IdleAction);
    }
    Ok(0.02 * (p - 1).div_ceil(10) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delivery {
    Delivered(f64),
    Erased,
}

/// Channel decision for a uniform draw `theta`: delivered iff `θ ≥ ℏ_p`.
pub fn transmit_with(p: usize, y_p: f64, theta: f64) -> Result<Delivery> {
    Ok(if theta >= erasure_prob(p)? {
        Delivery::Delivered(y_p)
    } else {
        Delivery::Erased
    })
}

pub fn transmit(p: usize, y_p: f64, rng: &mut RngStream) -> Result<Delivery> {
    transmit_with(p, y_p, rng.uniform())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_variance, StreamId};

    fn quiet(nlsd: Nlsd, m: usize) -> WorldConfig {
        WorldConfig {
            m,
            n: m,
            process_noise: Matrix::zeros(m, m),
            measurement_noise: Matrix::zeros(m, m),
            h: Matrix::identity(m, m),
            nlsd,
            x0: Vector::zeros(m),
        }
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(nlsd_logistic(&Vector::zeros(3)), Vector::zeros(3));
        let ones = Vector::from_element(3, 1.0);
        assert_eq!(nlsd_logistic(&ones), ones);
        let v = nlsd_logistic(&Vector::from_vec(vec![0.5]));
        assert!((v[0] - 0.51875).abs() < 1e-15);
    }

    #[test]
    fn roll_examples() {
        let (a, b, c) = (2.0, 3.0, 5.0);
        let v = nlsd_roll(&Vector::from_vec(vec![a, b, c]));
        assert_eq!(v.as_slice(), &[a * b, b * c, c * a]);
        let ones = Vector::from_element(4, 1.0);
        assert_eq!(nlsd_roll(&ones), ones);
        assert_eq!(nlsd_roll(&Vector::zeros(4)), Vector::zeros(4));
    }

    #[test]
    fn noiseless_fixed_points() {
        let mut rng = RngStream::new(1, StreamId::Dynamics);
        let world = World::new(quiet(Nlsd::Logistic, 3)).unwrap();
        let mut s = WorldState::initial(&world.cfg);
        for _ in 0..10 {
            s = world.step_state(&s, &mut rng);
        }
        assert_eq!(s.t, 10);
        assert_eq!(s.x, Vector::zeros(3));

        let mut cfg = quiet(Nlsd::Roll, 3);
        cfg.x0 = Vector::from_element(3, 1.0);
        let world = World::new(cfg).unwrap();
        let mut s = WorldState::initial(&world.cfg);
        for _ in 0..10 {
            s = world.step_state(&s, &mut rng);
        }
        assert_eq!(s.x, Vector::from_element(3, 1.0));
    }

    #[test]
    fn process_noise_variance_matches() {
        let world = World::new(WorldConfig::standard(Nlsd::Logistic)).unwrap();
        let mut rng = RngStream::new(5, StreamId::Dynamics);
        let mut s = WorldState::initial(&world.cfg);
        let mut innovations = vec![Vec::new(); world.cfg.m];
        for _ in 0..10_000 {
            let next = world.step_state(&s, &mut rng);
            let pred = nlsd_logistic(&s.x);
            for (k, inn) in innovations.iter_mut().enumerate() {
                inn.push(next.x[k] - pred[k]);
            }
            assert!(next.x.iter().all(|v| v.is_finite()));
            s = next;
        }
        for inn in &innovations {
            let v = sample_variance(inn);
            assert!((v - 2.5e-3).abs() < 2.5e-4, "variance {v}");
        }
    }

    #[test]
    fn observation_noise_and_projection() {
        let mut rng = RngStream::new(9, StreamId::Measurement);
        let world = World::new(quiet(Nlsd::Logistic, 2)).unwrap();
        let s = WorldState {
            t: 0,
            x: Vector::from_vec(vec![0.3, -0.4]),
        };
        assert_eq!(world.observe(&s, &mut rng), s.x);

        let world = World::new(WorldConfig::standard(Nlsd::Logistic)).unwrap();
        let s = WorldState {
            t: 0,
            x: Vector::from_element(20, 0.2),
        };
        let draws: Vec<Vector> = (0..10_000).map(|_| world.observe(&s, &mut rng)).collect();
        for k in 0..20 {
            let col: Vec<f64> = draws.iter().map(|y| y[k]).collect();
            let v = sample_variance(&col);
            assert!((v - 1.0).abs() < 0.1, "sensor {k} variance {v}");
        }

        let cfg = WorldConfig {
            m: 2,
            n: 1,
            process_noise: Matrix::zeros(2, 2),
            measurement_noise: Matrix::identity(1, 1),
            h: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            nlsd: Nlsd::Logistic,
            x0: Vector::zeros(2),
        };
        let world = World::new(cfg).unwrap();
        let s = WorldState {
            t: 0,
            x: Vector::from_vec(vec![3.0, 7.0]),
        };
        let mean = (0..10_000).map(|_| world.observe(&s, &mut rng)[0]).sum::<f64>() / 1e4;
        assert!((mean - 3.0).abs() < 0.04);
    }

    #[test]
    fn erasure_probabilities() {
        assert_eq!(erasure_prob(1).unwrap(), 0.0);
        assert_eq!(erasure_prob(11).unwrap(), 0.02);
        assert_eq!(erasure_prob(12).unwrap(), 0.04);
        assert_eq!(erasure_prob(20).unwrap(), 0.04);
        assert!(matches!(erasure_prob(0), Err(Error::IdleAction)));
    }

    #[test]
    fn channel_inequality_direction() {
        assert_eq!(transmit_with(1, 2.0, 0.0).unwrap(), Delivery::Delivered(2.0));
        assert_eq!(transmit_with(11, 2.0, 0.02).unwrap(), Delivery::Delivered(2.0));
        assert_eq!(transmit_with(11, 2.0, 0.0199).unwrap(), Delivery::Erased);
        assert!(transmit_with(0, 2.0, 0.5).is_err());
    }

    #[test]
    fn channel_erasure_rate() {
        let mut rng = RngStream::new(17, StreamId::Channel);
        let trials = 100_000;
        let erased = (0..trials)
            .filter(|_| transmit(11, 0.0, &mut rng).unwrap() == Delivery::Erased)
            .count();
        let rate = erased as f64 / trials as f64;
        assert!((rate - 0.02).abs() < 0.003, "rate {rate}");
        assert!((0..1000).all(|_| transmit(1, 0.0, &mut rng).unwrap() != Delivery::Erased));
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut cfg = WorldConfig::standard(Nlsd::Roll);
        cfg.h = Matrix::identity(3, 3);
        assert!(World::new(cfg).is_err());
        let mut cfg = WorldConfig::standard(Nlsd::Roll);
        cfg.process_noise[(0, 0)] = -1.0;
        assert!(World::new(cfg).is_err());
    }
}
