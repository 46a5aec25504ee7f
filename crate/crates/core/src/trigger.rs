//! Per-sensor dynamic event-triggered scheduler.
//!
//! A sensor broadcasts its residual only when the weighted gap since the last
//! transmission, scaled by `theta`, exceeds the auxiliary variable `delta`.
//! `delta` itself evolves as `delta' = rho * delta - l`, which dynamically
//! widens or narrows the inter-event interval.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Validated trigger parameters: `sigma in [0,1)`, `rho in (0,1)`,
/// `theta >= 1/rho`, `delta0 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerParams {
    sigma: f64,
    rho: f64,
    theta: f64,
    delta0: f64,
}

impl TriggerParams {
    pub fn new(sigma: f64, rho: f64, theta: f64, delta0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&sigma) {
            return Err(Error::InvalidParameter(format!(
                "trigger sigma must lie in [0,1), got {sigma}"
            )));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "trigger rho must lie in (0,1), got {rho}"
            )));
        }
        if !(theta >= 1.0 / rho) {
            return Err(Error::InvalidParameter(format!(
                "trigger theta must satisfy theta >= 1/rho, got theta={theta}, rho={rho}"
            )));
        }
        if !(delta0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trigger delta0 must be nonnegative, got {delta0}"
            )));
        }
        Ok(Self {
            sigma,
            rho,
            theta,
            delta0,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }
}

/// Scheduler state for one sensor.
#[derive(Debug, Clone)]
pub struct TriggerState {
    pub delta: f64,
    pub last_tx_residual: DVector<f64>,
    pub last_tx_time: Option<usize>,
}

impl TriggerState {
    pub fn new(params: &TriggerParams, output_dim: usize) -> Self {
        Self {
            delta: params.delta0(),
            last_tx_residual: DVector::zeros(output_dim),
            last_tx_time: None,
        }
    }
}

/// Outcome of one scheduler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerDecision {
    pub fired: bool,
    /// Event-function value fed into the `delta` update.
    pub l_used: f64,
    pub delta_next: f64,
}

/// Event function `h^T Psi h - sigma * y_last^T Psi y_last`.
pub fn event_function(
    h: &DVector<f64>,
    y_last: &DVector<f64>,
    psi: &DMatrix<f64>,
    sigma: f64,
) -> Result<f64> {
    let n = psi.nrows();
    if h.len() != n || y_last.len() != n || psi.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.len(),
            context: "event_function weight vs residuals",
        });
    }
    Ok(quad(h, psi) - sigma * quad(y_last, psi))
}

fn quad(v: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

/// Runs the trigger test at step `k` and advances the scheduler state.
///
/// Fires iff `theta * l_pre > delta` (strict; ties do not fire). On a fired
/// step the transmitted residual becomes `y_now` and the `delta` update uses
/// the post-transmission event value (`h = 0`), which keeps `delta`
/// nonnegative.
pub fn trigger_step(
    state: &TriggerState,
    params: &TriggerParams,
    k: usize,
    y_now: &DVector<f64>,
    psi: &DMatrix<f64>,
) -> Result<(TriggerDecision, TriggerState)> {
    let h = y_now - &state.last_tx_residual;
    let l_pre = event_function(&h, &state.last_tx_residual, psi, params.sigma())?;
    let fired = params.theta() * l_pre > state.delta;
    let (l_used, next) = if fired {
        let zero = DVector::zeros(y_now.len());
        let l_post = event_function(&zero, y_now, psi, params.sigma())?;
        (
            l_post,
            TriggerState {
                delta: params.rho() * state.delta - l_post,
                last_tx_residual: y_now.clone(),
                last_tx_time: Some(k),
            },
        )
    } else {
        (
            l_pre,
            TriggerState {
                delta: params.rho() * state.delta - l_pre,
                last_tx_residual: state.last_tx_residual.clone(),
                last_tx_time: state.last_tx_time,
            },
        )
    };
    Ok((
        TriggerDecision {
            fired,
            l_used,
            delta_next: next.delta,
        },
        next,
    ))
}
