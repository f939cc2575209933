//! Numerical primitives shared by the filter, the schedulers and the
//! simulator: Cholesky factorization with jitter, the Gamma function,
//! Chebyshev-Laguerre polynomials and their roots, and seeded Gaussian
//! sampling.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Named random streams derived from one master seed.
///
/// Each consumer of randomness owns its own stream so that, for example,
/// changing how often a scheduler explores does not perturb the simulated
/// world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    Dynamics,
    Measurement,
    Channel,
    Clients,
    Exploration,
    MseSampling,
    WeightInit,
    Minibatch,
    Dropout,
    MonteCarlo,
    Respond,
    /// Free-form stream for callers outside the experiment loop.
    Custom(u32),
}

impl StreamId {
    fn index(self) -> u64 {
        match self {
            StreamId::Dynamics => 1,
            StreamId::Measurement => 2,
            StreamId::Channel => 3,
            StreamId::Clients => 4,
            StreamId::Exploration => 5,
            StreamId::MseSampling => 6,
            StreamId::WeightInit => 7,
            StreamId::Minibatch => 8,
            StreamId::Dropout => 9,
            StreamId::MonteCarlo => 10,
            StreamId::Respond => 11,
            StreamId::Custom(k) => 1_000 + u64::from(k),
        }
    }
}

/// A reproducible random number stream identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: StreamId,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream.index());
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        rand::Rng::random_range(self, 0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

const JITTER_START: f64 = 1e-9;
const JITTER_RETRIES: usize = 8;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// The input is symmetrized as `(m + mᵀ)/2` first. If the plain
/// factorization fails, `ε·I` is added with `ε` starting at `1e-9` and
/// doubling, for at most eight retries.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let sym = symmetrize(m);
    if let Some(l) = factor(&sym) {
        return Ok(l);
    }
    let mut eps = JITTER_START;
    for _ in 0..JITTER_RETRIES {
        let mut jittered = sym.clone();
        for i in 0..jittered.nrows() {
            jittered[(i, i)] += eps;
        }
        if let Some(l) = factor(&jittered) {
            return Ok(l);
        }
        eps *= 2.0;
    }
    Err(Error::NotPositiveDefinite)
}

fn factor(a: &Matrix) -> Option<Matrix> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// The Gamma function for positive real arguments.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma of non-positive argument {x}")));
    }
    // Exact on small integers.
    if x.fract() == 0.0 && x <= 171.0 {
        return Ok((1..x as u64).fold(1.0, |acc, k| acc * k as f64));
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    use std::f64::consts::PI;
    if x < 0.5 {
        return PI / ((PI * x).sin() * lanczos(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Coefficients of the monic Chebyshev-Laguerre polynomial of degree
/// `nprime` with parameter `iota = M/2 - 1`, in ascending powers.
///
/// ```text
/// L(λ) = Σ_{k=0..n'} C(n', k) (-1)^k (n'+ι)! / (n'+ι-k)! λ^(n'-k)
/// ```
///
/// The returned vector has `nprime + 1` entries, the last one being 1.
pub fn cl_poly(nprime: usize, iota: f64) -> Result<Vector> {
    if nprime == 0 {
        return Err(Error::Domain("polynomial order must be at least 1".into()));
    }
    let top = nprime as f64 + iota + 1.0;
    let gamma_top = gamma_fn(top)?;
    let mut coeffs = Vector::zeros(nprime + 1);
    let mut binom = 1.0;
    for k in 0..=nprime {
        if k > 0 {
            binom *= (nprime - k + 1) as f64 / k as f64;
        }
        let ratio = gamma_top / gamma_fn(top - k as f64)?;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[nprime - k] = sign * binom * ratio;
    }
    Ok(coeffs)
}

/// Horner evaluation of a polynomial (ascending coefficients) and its
/// first derivative.
pub fn poly_eval_deriv(coeffs: &Vector, lambda: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    for &c in coeffs.iter().rev() {
        deriv = deriv * lambda + value;
        value = value * lambda + c;
    }
    (value, deriv)
}

/// Companion matrix of a monic polynomial given in ascending coefficients.
///
/// Its eigenvalues are the polynomial roots; [`cl_poly_roots`] uses
/// bracketing instead, this form is kept as a cross-check.
pub fn companion_matrix(coeffs: &Vector) -> Matrix {
    let n = coeffs.len() - 1;
    let mut d = Matrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        d[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        d[(n - 1, j)] = -coeffs[j];
    }
    d
}

const ROOT_GRID_PER_DEGREE: usize = 4_000;

/// Real roots of a Chebyshev-Laguerre polynomial, ascending.
///
/// The roots are real, simple and lie in `(0, 4n' + 2ι + 2)`. They are
/// isolated by sign changes on a uniform grid, refined by bisection, then
/// polished with Newton steps.
pub fn cl_poly_roots(coeffs: &Vector) -> Result<Vector> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Err(Error::RootIsolation {
            found: 0,
            expected: 0,
        });
    }
    // ℓ_{n'-1} = -n'(n'+ι), so ι is recoverable from the coefficients.
    let n = degree as f64;
    let iota = -coeffs[degree - 1] / n - n;
    let upper = 4.0 * n + 2.0 * iota + 2.0;
    let cells = ROOT_GRID_PER_DEGREE * degree;
    let h = upper / cells as f64;

    let eval = |x: f64| poly_eval_deriv(coeffs, x).0;
    let mut roots = Vec::with_capacity(degree);
    let mut a = 0.0;
    let mut fa = eval(a);
    for i in 1..=cells {
        let b = h * i as f64;
        let fb = eval(b);
        if fb == 0.0 {
            roots.push(b);
        } else if fa != 0.0 && fa.signum() != fb.signum() {
            roots.push(bisect(&eval, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    if roots.len() < degree {
        return Err(Error::RootIsolation {
            found: roots.len(),
            expected: degree,
        });
    }
    roots.truncate(degree);
    let polished = roots
        .into_iter()
        .map(|r| newton_polish(coeffs, r))
        .collect::<Vec<_>>();
    Ok(Vector::from_vec(polished))
}

fn bisect(eval: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn newton_polish(coeffs: &Vector, mut x: f64) -> f64 {
    for _ in 0..4 {
        let (f, df) = poly_eval_deriv(coeffs, x);
        if f == 0.0 || df == 0.0 {
            break;
        }
        let next = x - f / df;
        if poly_eval_deriv(coeffs, next).0.abs() >= f.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Precomputed factor for repeated draws from one Gaussian.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vector,
    factor: Option<Matrix>,
}

impl GaussianSampler {
    /// An identically zero covariance yields a degenerate sampler that
    /// always returns the mean.
    pub fn new(mean: &Vector, cov: &Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let factor = if cov.iter().all(|&v| v == 0.0) {
            None
        } else {
            Some(cholesky(cov)?)
        };
        Ok(Self {
            mean: mean.clone(),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vector {
        match &self.factor {
            None => self.mean.clone(),
            Some(l) => {
                let z = Vector::from_fn(self.mean.len(), |_, _| rng.standard_normal());
                &self.mean + l * z
            }
        }
    }
}

/// One draw from `N(mean, cov)`.
pub fn gaussian_sample(mean: &Vector, cov: &Matrix, rng: &mut RngStream) -> Result<Vector> {
    Ok(GaussianSampler::new(mean, cov)?.sample(rng))
}

/// Unbiased sample variance (divisor `n - 1`). Returns 0 for fewer than two
/// values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    // Shifting by the first value keeps identical inputs at exactly zero.
    let shift = values[0];
    let mean = values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
    values.iter().map(|v| (v - shift - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}
