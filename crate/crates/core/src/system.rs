//! Plant model: time-varying linear dynamics, Laplace privacy noise and the
//! bounded process-noise set, plus the ship-navigation coefficient schedules.

use nalgebra::{dmatrix, DMatrix, DVector};
use rand::Rng;

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};

/// Deterministic map from a time index to a coefficient matrix.
///
/// All schedules used by the simulator are closed-form; keeping them as an
/// enum makes evaluation pure and configs serializable.
#[derive(Debug, Clone)]
pub enum MatrixSchedule {
    Constant(DMatrix<f64>),
    /// Ship state matrix `C_k` (2x2, sinusoidal lower-right entry).
    ShipC,
    /// Ship process-noise input `F_k` (2x1, sinusoidal first entry).
    ShipF,
    /// Ship measurement row `H_k` for sensor `index` (1-based).
    ShipH { index: usize },
    /// Ship measurement-noise gain `D_k` for sensor `index` (1-based).
    ShipD { index: usize },
}

impl MatrixSchedule {
    pub fn eval(&self, k: usize) -> DMatrix<f64> {
        match self {
            MatrixSchedule::Constant(m) => m.clone(),
            MatrixSchedule::ShipC => ship_matrices(k).0,
            MatrixSchedule::ShipF => ship_matrices(k).1,
            MatrixSchedule::ShipH { index } => ship_sensor_matrices(*index, k).0,
            MatrixSchedule::ShipD { index } => ship_sensor_matrices(*index, k).1,
        }
    }

    pub fn nrows(&self) -> usize {
        self.eval(0).nrows()
    }

    pub fn ncols(&self) -> usize {
        self.eval(0).ncols()
    }
}

/// Ship-navigation dynamics coefficients `(C_k, F_k)`; `sin` takes the
/// integer step index in radians.
pub fn ship_matrices(k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = (k as f64).sin();
    let c = dmatrix![0.9653, -0.0021; -0.054, 0.7654 + 0.2 * s];
    let f = dmatrix![0.22 + 0.22 * s; 0.22];
    (c, f)
}

/// Ship measurement coefficients `(H_k^i, D_k^i)` for 1-based sensor `i`.
pub fn ship_sensor_matrices(i: usize, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = (k as f64).sin();
    let h = dmatrix![0.0, 1.1 + 0.11 * (i as f64 + 1.0) - 0.11 * s];
    let d = dmatrix![1.0 / (i as f64 + 1.0)];
    (h, d)
}

/// Laplace privacy-noise parameterization. The decaying mode is the
/// analytical model (scale `c * q^k`); the constant mode matches the
/// simulation study, which pins the scale to a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyNoiseParams {
    Decaying { c: f64, q: f64 },
    Constant { b: f64 },
}

impl PrivacyNoiseParams {
    pub fn decaying(c: f64, q: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "privacy noise scale c must be positive, got {c}"
            )));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "privacy decay rate q must lie in (0,1), got {q}"
            )));
        }
        Ok(Self::Decaying { c, q })
    }

    pub fn constant(b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "privacy noise scale b must be positive, got {b}"
            )));
        }
        Ok(Self::Constant { b })
    }
}

/// Laplace scale at step `k`: `c * q^k` in decaying mode, `b` otherwise.
pub fn laplace_scale(p: &PrivacyNoiseParams, k: usize) -> f64 {
    match *p {
        PrivacyNoiseParams::Decaying { c, q } => c * q.powi(k as i32),
        PrivacyNoiseParams::Constant { b } => b,
    }
}

/// Second moment `M_k = 2 b_k^2` of the privacy noise at step `k`.
pub fn laplace_second_moment(p: &PrivacyNoiseParams, k: usize) -> f64 {
    let b = laplace_scale(p, k);
    2.0 * b * b
}

/// Draws from `Laplace(0, b)` by inverse CDF.
pub fn sample_laplace<R: Rng>(b: f64, rng: &mut R) -> f64 {
    debug_assert!(b > 0.0);
    let u: f64 = rng.random();
    laplace_inverse_cdf(b, u)
}

fn laplace_inverse_cdf(b: f64, u: f64) -> f64 {
    let t = u - 0.5;
    -b * t.signum() * (1.0 - 2.0 * t.abs()).ln()
}

/// The time-varying plant `x_{k+1} = C_k (x_k + eta_k) + F_k w_k`.
#[derive(Debug, Clone)]
pub struct PlantParams {
    pub c: MatrixSchedule,
    pub f: MatrixSchedule,
    pub process_noise: Ellipsoid,
    pub privacy: PrivacyNoiseParams,
    pub x0: DVector<f64>,
}

impl PlantParams {
    pub fn new(
        c: MatrixSchedule,
        f: MatrixSchedule,
        process_noise: Ellipsoid,
        privacy: PrivacyNoiseParams,
        x0: DVector<f64>,
    ) -> Result<Self> {
        let n_x = x0.len();
        if c.nrows() != n_x || c.ncols() != n_x {
            return Err(Error::DimensionMismatch {
                expected: n_x,
                got: c.nrows(),
                context: "plant C schedule",
            });
        }
        if f.nrows() != n_x {
            return Err(Error::DimensionMismatch {
                expected: n_x,
                got: f.nrows(),
                context: "plant F schedule rows",
            });
        }
        if process_noise.dim() != f.ncols() {
            return Err(Error::DimensionMismatch {
                expected: f.ncols(),
                got: process_noise.dim(),
                context: "process noise ellipsoid vs F columns",
            });
        }
        Ok(Self {
            c,
            f,
            process_noise,
            privacy,
            x0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.x0.len()
    }
}

/// Advances the plant one step. Also returns the privacy-masked state
/// `zeta_k = x_k + eta_k` that the dynamics act on.
pub fn step_plant(
    params: &PlantParams,
    x_k: &DVector<f64>,
    k: usize,
    eta_k: &DVector<f64>,
    w_k: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x_k.len() != params.state_dim() || eta_k.len() != params.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.state_dim(),
            got: x_k.len().min(eta_k.len()),
            context: "step_plant state/noise",
        });
    }
    let q = params.process_noise.quadratic_form(w_k)?;
    let bound = params.process_noise.scale() * (1.0 + crate::ellipsoid::CONTAINS_SLACK);
    if q > bound {
        return Err(Error::NoiseOutOfBound { value: q, bound });
    }
    let zeta = x_k + eta_k;
    let next = params.c.eval(k) * &zeta + params.f.eval(k) * w_k;
    Ok((next, zeta))
}
