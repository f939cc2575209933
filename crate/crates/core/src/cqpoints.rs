//! Cubature quadrature point sets.
//!
//! A third-degree spherical cubature rule (the `2M` axis intersections of
//! the unit hypersphere) is combined with an `n'`-point Chebyshev-Laguerre
//! radial rule, giving `2Mn'` points that reproduce the first two moments
//! of a standard Gaussian.

use serde::Serialize;

use crate::numerics::{cl_poly, cl_poly_roots, gamma_fn, poly_eval_deriv, Matrix, Vector};
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Points `ξ_i` (columns of [`CqPointSet::points`]) and their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CqPointSet {
    dim: usize,
    order: usize,
    points: Matrix,
    weights: Vector,
}

impl CqPointSet {
    /// Builds the point set for state dimension `dim` and radial order
    /// `order`.
    ///
    /// Point `j' + (j-1)n'` (1-based) is `√(2λ_j') ψ_j`, where the cubature
    /// directions run `ψ_j = e_j` for `j = 1..M` then `ψ_{M+j} = -e_j`.
    pub fn generate(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 || order == 0 {
            return Err(Error::Domain(format!(
                "cubature point set needs M >= 1 and n' >= 1, got M={dim}, n'={order}"
            )));
        }
        let iota = dim as f64 / 2.0 - 1.0;
        let coeffs = cl_poly(order, iota)?;
        let roots = cl_poly_roots(&coeffs)?;

        let nfact = gamma_fn(order as f64 + 1.0)?;
        let scale = nfact / (2.0 * dim as f64) * gamma_fn(iota + order as f64 + 1.0)?
            / gamma_fn(dim as f64 / 2.0)?;
        let radial: Vec<(f64, f64)> = roots
            .iter()
            .map(|&lambda| {
                let (_, dl) = poly_eval_deriv(&coeffs, lambda);
                ((2.0 * lambda).sqrt(), scale / (lambda * dl * dl))
            })
            .collect();

        let count = 2 * dim * order;
        let mut points = Matrix::zeros(dim, count);
        let mut weights = Vector::zeros(count);
        for j in 0..2 * dim {
            let (axis, sign) = if j < dim { (j, 1.0) } else { (j - dim, -1.0) };
            for (jp, &(radius, weight)) in radial.iter().enumerate() {
                let i = jp + j * order;
                points[(axis, i)] = sign * radius;
                weights[i] = weight;
            }
        }

        let total = weights.sum();
        assert!(
            (total - 1.0).abs() < WEIGHT_SUM_TOL,
            "cubature weights sum to {total} for M={dim}, n'={order}"
        );
        Ok(Self {
            dim,
            order,
            points,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `M × 2Mn'` matrix, one point per column.
    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    /// Weighted mean of a set of column points.
    pub fn weighted_mean(&self, pts: &Matrix) -> Vector {
        pts * &self.weights
    }

    /// `Σ w_i a_i b_iᵀ` for column point sets `a` and `b`.
    pub fn weighted_outer(&self, a: &Matrix, b: &Matrix) -> Matrix {
        let mut scaled = a.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(self.weights.iter()) {
            col *= w;
        }
        scaled * b.transpose()
    }

    pub fn to_json(&self) -> CqPointsJson {
        CqPointsJson {
            m: self.dim,
            nprime: self.order,
            weights: self.weights.iter().copied().collect(),
            points: self
                .points
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        }
    }
}

/// Wire form emitted by the `cqpoints` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct CqPointsJson {
    #[serde(rename = "M")]
    pub m: usize,
    pub nprime: usize,
    pub weights: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}
