//! Cubature quadrature Kalman filter with Holt-smoothed dynamics.
//!
//! The edge node does not know `f(·)`. The prediction step instead pushes
//! the cubature points through a Holt level/trend model whose parameters
//! are refreshed exactly once per time step. A [`Propagator::Known`] mode
//! substitutes the true dynamics so that the filter can be compared with a
//! classic Kalman filter on linear systems.

use nalgebra::Cholesky;

use crate::cqpoints::CqPointSet;
use crate::dynamics::Nlsd;
use crate::numerics::{cholesky, symmetrize, Matrix, Vector};
use crate::{Error, Result};

/// Holt's double exponential smoothing state.
#[derive(Debug, Clone, PartialEq)]
pub struct HoltParams {
    /// ϖ, level smoothing constant.
    pub level_gain: f64,
    /// ς, trend smoothing constant.
    pub trend_gain: f64,
    /// a(t)
    pub level: Vector,
    /// b(t)
    pub trend: Vector,
}

impl HoltParams {
    pub fn new(level_gain: f64, trend_gain: f64, m: usize) -> Self {
        Self {
            level_gain,
            trend_gain,
            level: Vector::zeros(m),
            trend: Vector::zeros(m),
        }
    }

    /// Propagates sampling points (one per column):
    ///
    /// ```text
    /// ζ* = ϖ(1+ς)ζ + (1+ς)(1-ϖ)ζ - ς a + (1-ς) b
    /// ```
    ///
    /// The first two terms add up to `(1+ς)ζ`, so ϖ only enters through
    /// the level recursion. They are kept separate to mirror the model.
    pub fn transform(&self, z: &Matrix) -> Matrix {
        let (w, s) = (self.level_gain, self.trend_gain);
        let offset = &self.trend * (1.0 - s) - &self.level * s;
        let mut out = z * (w * (1.0 + s)) + z * ((1.0 + s) * (1.0 - w));
        for mut col in out.column_iter_mut() {
            col += &offset;
        }
        out
    }

    /// `a(t) = ϖ x̂_pos(t-1) + (1-ϖ) a(t-1)`,
    /// `b(t) = ς (a(t) - a(t-1)) + (1-ς) b(t-1)`.
    pub fn updated(&self, prev_posterior_mean: &Vector) -> Self {
        let (w, s) = (self.level_gain, self.trend_gain);
        let level = prev_posterior_mean * w + &self.level * (1.0 - w);
        let trend = (&level - &self.level) * s + &self.trend * (1.0 - s);
        Self {
            level_gain: w,
            trend_gain: s,
            level,
            trend,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Propagator {
    Holt,
    Known(Nlsd),
}

/// Which sampling points pair with the measurement points in the
/// cross-covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossCov {
    /// Propagated prior points `Z*(t-1)` retained from the prediction.
    #[default]
    Paper,
    /// Re-drawn prior points `Z(t)`, as in textbook sigma-point filters.
    Standard,
}

/// How the single polled measurement enters the gain and covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Innovation {
    /// Full `N × N` innovation covariance; only the polled component of the
    /// innovation moves the mean, `Ψ_pos = Ψ_pri - K Ψ_yy Kᵀ`.
    #[default]
    Full,
    /// Scalar innovation of the polled sensor only.
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterOptions {
    pub cross_cov: CrossCov,
    pub innovation: Innovation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub prior_mean: Vector,
    pub prior_cov: Matrix,
    pub post_mean: Vector,
    pub post_cov: Matrix,
    pub holt: HoltParams,
    /// `Z*(t-1)`, filled by [`Cqkf::predict`] and consumed by the update.
    pub propagated: Option<Matrix>,
}

impl FilterState {
    /// `x̂_pos(0) = 0`, `Ψ_pos(0) = I`, `a(0) = b(0) = 0`.
    pub fn initial(m: usize, level_gain: f64, trend_gain: f64) -> Self {
        Self {
            prior_mean: Vector::zeros(m),
            prior_cov: Matrix::identity(m, m),
            post_mean: Vector::zeros(m),
            post_cov: Matrix::identity(m, m),
            holt: HoltParams::new(level_gain, trend_gain, m),
            propagated: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.post_mean.len()
    }

    fn with_posterior(&self, mean: Vector, cov: Matrix) -> Self {
        Self {
            post_mean: mean,
            post_cov: cov,
            ..self.clone()
        }
    }

    /// Posterior := prior, used when nothing was received.
    pub fn posterior_from_prior(&self) -> Self {
        self.with_posterior(self.prior_mean.clone(), self.prior_cov.clone())
    }
}

/// Posterior ingredients for one sensor, independent of the measured value.
#[derive(Debug, Clone)]
pub struct GainColumn {
    /// `K 1_p`
    pub gain: Vector,
    /// `ŷ_p`
    pub predicted: f64,
    pub post_cov: Matrix,
}

impl GainColumn {
    pub fn posterior_mean(&self, prior_mean: &Vector, y: f64) -> Vector {
        prior_mean + &self.gain * (y - self.predicted)
    }
}

/// Filter configuration shared by every step of one experiment.
#[derive(Debug, Clone)]
pub struct Cqkf {
    pub points: CqPointSet,
    pub process_noise: Matrix,
    pub measurement_noise: Matrix,
    pub h: Matrix,
    pub propagator: Propagator,
    pub options: FilterOptions,
}

impl Cqkf {
    fn sigma_points(&self, mean: &Vector, cov: &Matrix) -> Result<Matrix> {
        let l = cholesky(cov)?;
        let mut z = l * self.points.points();
        for mut col in z.column_iter_mut() {
            col += mean;
        }
        Ok(z)
    }

    /// Prior mean and covariance from the previous posterior. Holt
    /// parameters advance here and nowhere else.
    pub fn predict(&self, fs: &FilterState) -> Result<FilterState> {
        let z = self.sigma_points(&fs.post_mean, &fs.post_cov)?;
        let (propagated, holt) = match &self.propagator {
            Propagator::Holt => (fs.holt.transform(&z), fs.holt.updated(&fs.post_mean)),
            Propagator::Known(f) => {
                let mut out = Matrix::zeros(z.nrows(), z.ncols());
                for (i, col) in z.column_iter().enumerate() {
                    out.set_column(i, &f.apply(&col.into_owned()));
                }
                (out, fs.holt.clone())
            }
        };
        let prior_mean = self.points.weighted_mean(&propagated);
        let prior_cov = symmetrize(
            &(self.points.weighted_outer(&propagated, &propagated)
                - &prior_mean * prior_mean.transpose()
                + &self.process_noise),
        );
        Ok(FilterState {
            prior_mean,
            prior_cov,
            post_mean: fs.post_mean.clone(),
            post_cov: fs.post_cov.clone(),
            holt,
            propagated: Some(propagated),
        })
    }

    /// Gain column and posterior covariance for polling sensor `p`
    /// (1-based). Does not depend on the measured value.
    pub fn gain_column(&self, fs: &FilterState, p: usize) -> Result<GainColumn> {
        let n = self.h.nrows();
        if p == 0 || p > n {
            return Err(Error::DimensionMismatch(format!(
                "sensor index {p} outside 1..={n}"
            )));
        }
        let prev = fs.propagated.as_ref().ok_or_else(|| {
            Error::DimensionMismatch("update called without a preceding prediction".into())
        })?;
        let z = self.sigma_points(&fs.prior_mean, &fs.prior_cov)?;
        let zy = &self.h * &z;
        let y_hat = self.points.weighted_mean(&zy);
        let yy = symmetrize(
            &(self.points.weighted_outer(&zy, &zy) - &y_hat * y_hat.transpose()
                + &self.measurement_noise),
        );
        let pairing = match self.options.cross_cov {
            CrossCov::Paper => prev,
            CrossCov::Standard => &z,
        };
        let xy = self.points.weighted_outer(pairing, &zy) - &fs.prior_mean * y_hat.transpose();
        let idx = p - 1;

        let (gain, reduction) = match self.options.innovation {
            Innovation::Full => {
                let k = gain_matrix(&xy, &yy)?;
                let reduction = &k * &yy * k.transpose();
                (k.column(idx).into_owned(), reduction)
            }
            Innovation::Scalar => {
                let s = yy[(idx, idx)];
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::InnovationSingular);
                }
                let k = xy.column(idx) / s;
                let reduction = &k * k.transpose() * s;
                (k, reduction)
            }
        };
        let post_cov = make_spd(&(&fs.prior_cov - reduction));
        Ok(GainColumn {
            gain,
            predicted: y_hat[idx],
            post_cov,
        })
    }

    /// Posterior after receiving `y` from sensor `p`.
    pub fn update(&self, fs: &FilterState, y: f64, p: usize) -> Result<FilterState> {
        let g = self.gain_column(fs, p)?;
        Ok(fs.with_posterior(g.posterior_mean(&fs.prior_mean, y), g.post_cov))
    }

    /// Posterior for this step from an already predicted state.
    pub fn posterior(&self, predicted: &FilterState, delivery: Option<(f64, usize)>) -> Result<FilterState> {
        match delivery {
            Some((y, p)) if p > 0 => self.update(predicted, y, p),
            _ => Ok(predicted.posterior_from_prior()),
        }
    }

    /// One full filter step: prediction, then update iff a measurement
    /// arrived.
    pub fn step(&self, fs: &FilterState, delivery: Option<(f64, usize)>) -> Result<FilterState> {
        let predicted = self.predict(fs)?;
        self.posterior(&predicted, delivery)
    }
}

fn gain_matrix(xy: &Matrix, yy: &Matrix) -> Result<Matrix> {
    if let Some(ch) = Cholesky::new(yy.clone()) {
        return Ok(ch.solve(&xy.transpose()).transpose());
    }
    let inv = yy.clone().try_inverse().ok_or(Error::InnovationSingular)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::InnovationSingular);
    }
    Ok(xy * inv)
}

/// Symmetrizes and, if the result is not positive definite, adds the
/// smallest diagonal jitter from the Cholesky schedule that makes it so.
/// Falls back to clamping eigenvalues at `1e-9`.
pub fn make_spd(m: &Matrix) -> Matrix {
    let sym = symmetrize(m);
    if Cholesky::new(sym.clone()).is_some() {
        return sym;
    }
    let mut eps = 1e-9;
    for _ in 0..8 {
        let jittered = &sym + Matrix::identity(sym.nrows(), sym.ncols()) * eps;
        if Cholesky::new(jittered.clone()).is_some() {
            return jittered;
        }
        eps *= 2.0;
    }
    let mut eig = sym.symmetric_eigen();
    eig.eigenvalues.apply(|v| *v = v.max(1e-9));
    symmetrize(&eig.recompose())
}
