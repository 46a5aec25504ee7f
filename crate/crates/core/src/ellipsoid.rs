//! Ellipsoidal confidence sets.
//!
//! Every bounded quantity in the pipeline (process noise, measurement noise,
//! estimation error) lives in a set `{x : (x-c)^T P^{-1} (x-c) <= beta}` with
//! `P` symmetric positive-definite. Containment tests go through a Cholesky
//! factor of `P` rather than an explicit inverse.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative symmetry tolerance for shape matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Absolute pivot floor below which a Cholesky factorization is rejected.
pub const PIVOT_FLOOR: f64 = 1e-12;
/// Relative slack on the containment test, absorbing round-off.
pub const CONTAINS_SLACK: f64 = 1e-9;

/// Lower-triangular Cholesky factor with strictly positive diagonal.
#[derive(Debug, Clone)]
pub struct LowerTriangularFactor {
    l: DMatrix<f64>,
}

impl LowerTriangularFactor {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L z = rhs` by forward substitution.
    pub fn forward_solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut z = rhs.clone();
        for i in 0..n {
            for j in 0..i {
                let zj = z[j];
                z[i] -= self.l[(i, j)] * zj;
            }
            z[i] /= self.l[(i, i)];
        }
        z
    }

    /// Solves `L L^T x = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = self.forward_solve(rhs);
        // back substitution on L^T
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let xj = x[j];
                x[i] -= self.l[(j, i)] * xj;
            }
            x[i] /= self.l[(i, i)];
        }
        x
    }
}

/// Computes the lower Cholesky factor `L` with `L L^T = p`.
pub fn cholesky_lower(p: &DMatrix<f64>) -> Result<LowerTriangularFactor> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            got: p.ncols(),
            context: "cholesky_lower: square matrix required",
        });
    }
    check_symmetric(p)?;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = p[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= PIVOT_FLOOR {
            return Err(Error::NotPositiveDefinite { pivot, index: j });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(LowerTriangularFactor { l })
}

fn check_symmetric(p: &DMatrix<f64>) -> Result<()> {
    let scale = p.amax().max(1e-300);
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        for j in (i + 1)..p.ncols() {
            worst = worst.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    let rel = worst / scale;
    if rel > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            asymmetry: rel,
            tolerance: SYMMETRY_TOL,
        });
    }
    Ok(())
}

/// The set `{x : (x - center)^T shape^{-1} (x - center) <= scale}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    scale: f64,
    factor: LowerTriangularFactor,
}

impl Ellipsoid {
    /// Builds an ellipsoid, validating symmetry and positive-definiteness of
    /// `shape` and nonnegativity of `scale` (`scale = 0` is the point set).
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>, scale: f64) -> Result<Self> {
        if shape.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: shape.nrows(),
                context: "ellipsoid shape vs center",
            });
        }
        if !(scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ellipsoid scale must be nonnegative, got {scale}"
            )));
        }
        let factor = cholesky_lower(&shape)?;
        Ok(Self {
            center,
            shape,
            scale,
            factor,
        })
    }

    /// Origin-centered ellipsoid with `scale = 1`, the noise-set form.
    pub fn origin(shape: DMatrix<f64>) -> Result<Self> {
        let n = shape.nrows();
        Self::new(DVector::zeros(n), shape, 1.0)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn factor(&self) -> &LowerTriangularFactor {
        &self.factor
    }

    /// Mahalanobis quadratic form `(x - c)^T P^{-1} (x - c)`, via the
    /// factored solve.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
                context: "ellipsoid containment",
            });
        }
        let d = x - &self.center;
        let z = self.factor.forward_solve(&d);
        Ok(z.dot(&z))
    }

    /// Membership test with relative round-off slack.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        Ok(self.quadratic_form(x)? <= self.scale * (1.0 + CONTAINS_SLACK))
    }

    /// Draws a point uniformly from the solid ellipsoid: uniform direction on
    /// the sphere, radius proportional to `u^(1/n)`, mapped through
    /// `sqrt(scale) * L`.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        self.sample_radius(rng, false)
    }

    /// Draws a point uniformly from the boundary shell (worst-case mode).
    pub fn sample_boundary<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        self.sample_radius(rng, true)
    }

    fn sample_radius<R: Rng>(&self, rng: &mut R, boundary: bool) -> DVector<f64> {
        let n = self.dim();
        if self.scale == 0.0 {
            return self.center.clone();
        }
        let mut z = DVector::zeros(n);
        loop {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            let norm = z.norm();
            if norm > 1e-12 {
                z /= norm;
                break;
            }
        }
        let r = if boundary {
            1.0
        } else {
            let u: f64 = rng.random();
            u.powf(1.0 / n as f64)
        };
        let dir = self.factor.matrix() * z;
        &self.center + dir * (r * self.scale.sqrt())
    }
}
