//! Privacy-preserving distributed set-membership state estimation with
//! dynamic event-triggered communication.
//!
//! A network of sensors observes a time-varying linear plant whose state is
//! masked by Laplace privacy noise. Each sensor maintains an ellipsoidal
//! confidence set guaranteed to contain the true state, designs its gains
//! once per step by solving a small semidefinite program, and broadcasts its
//! measurement residual only when a dynamic event-triggered rule fires.
//!
//! Module map:
//! - [`ellipsoid`]: ellipsoidal sets, Cholesky factorization, sampling
//! - [`system`]: plant dynamics, noise models, ship coefficient schedules
//! - [`network`]: topology and per-sensor measurement model
//! - [`trigger`]: dynamic event-triggered scheduler
//! - [`sdp`]: log-det barrier solver for linear matrix inequalities
//! - [`estimator`]: per-step gain design and confidence-set recursion
//! - [`analysis`]: steady-state second moments and the privacy budget
//! - [`sim`]: scenario configuration, closed-loop simulation, CSV output

pub mod analysis;
pub mod ellipsoid;
pub mod error;
pub mod estimator;
pub mod network;
pub mod sdp;
pub mod sim;
pub mod system;
pub mod trigger;

pub use analysis::{privacy_epsilon, solve_steady_state, SteadyStateReport};
pub use ellipsoid::{cholesky_lower, Ellipsoid, LowerTriangularFactor};
pub use error::{Error, Result};
pub use estimator::{
    design_gains, predict, update_confidence, verify_lmi, EstimatorState, GainSolution,
    ObjectiveMode, SignMode, StepContext,
};
pub use network::{measure, residual, SensorParams, Topology};
pub use sim::{
    metrics, run_simulation, write_csv, MetricsSummary, Scenario, ScenarioConfig, Simulation,
    SimulationLog,
};
pub use system::{
    laplace_scale, laplace_second_moment, sample_laplace, step_plant, MatrixSchedule, PlantParams,
    PrivacyNoiseParams,
};
pub use trigger::{trigger_step, TriggerDecision, TriggerParams, TriggerState};
