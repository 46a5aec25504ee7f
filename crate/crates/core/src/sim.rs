//! Scenario configuration, the closed-loop simulation, metrics and CSV
//! output.
//!
//! Per-step sequencing: (1) solve the gain LMI from the current estimates,
//! shape factors and trigger variables; (2) sensors measure and run the
//! trigger test with the freshly solved weights; (3) estimators predict from
//! the latest transmitted residuals; (4) confidence sets update; (5) the
//! plant advances. All randomness comes from one seeded stream, so a
//! (config, seed) pair reproduces byte-identical logs.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::estimator::{
    self, EstimatorState, GainSolution, ObjectiveMode, SignMode, StepContext,
};
use crate::network::{measure, residual, SensorParams, Topology};
use crate::sdp::SolverOptions;
use crate::system::{
    laplace_scale, sample_laplace, step_plant, MatrixSchedule, PlantParams, PrivacyNoiseParams,
};
use crate::trigger::{trigger_step, TriggerParams, TriggerState};

// ---------------------------------------------------------------------------
// config file schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { matrix: Vec<Vec<f64>> },
    ShipC,
    ShipF,
    ShipH { index: usize },
    ShipD { index: usize },
}

impl ScheduleSpec {
    fn to_schedule(&self) -> Result<MatrixSchedule> {
        Ok(match self {
            ScheduleSpec::Constant { matrix } => {
                MatrixSchedule::Constant(nested_to_matrix(matrix)?)
            }
            ScheduleSpec::ShipC => MatrixSchedule::ShipC,
            ScheduleSpec::ShipF => MatrixSchedule::ShipF,
            ScheduleSpec::ShipH { index } => MatrixSchedule::ShipH { index: *index },
            ScheduleSpec::ShipD { index } => MatrixSchedule::ShipD { index: *index },
        })
    }
}

fn nested_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Config("matrix must be non-empty".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessNoiseMode {
    Uniform,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub x0: Vec<f64>,
    pub c: ScheduleSpec,
    pub f: ScheduleSpec,
    pub process_noise_shape: Vec<Vec<f64>>,
    #[serde(default = "default_process_mode")]
    pub process_noise_mode: ProcessNoiseMode,
}

fn default_process_mode() -> ProcessNoiseMode {
    ProcessNoiseMode::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyMode {
    Constant,
    Decaying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    pub mode: PrivacyMode,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub q: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Rejection-clip Laplace draws to the kappa confidence ball so the
    /// containment guarantee's premise holds exactly.
    #[serde(default = "default_true")]
    pub clip: bool,
}

fn default_kappa() -> f64 {
    9.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignModeConfig {
    BoundedPrivacy,
    LiteralSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveConfig {
    Trace,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_sign_mode")]
    pub sign_mode: SignModeConfig,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_objective")]
    pub objective: ObjectiveConfig,
    /// Whether a node's own residual enters its prediction sum.
    #[serde(default)]
    pub include_self: bool,
}

fn default_sign_mode() -> SignModeConfig {
    SignModeConfig::BoundedPrivacy
}

fn default_mu() -> f64 {
    1e-10
}

fn default_objective() -> ObjectiveConfig {
    ObjectiveConfig::Trace
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sign_mode: default_sign_mode(),
            mu: default_mu(),
            objective: default_objective(),
            include_self: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub adjacency: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub xhat0: Vec<f64>,
    pub u0: Vec<Vec<f64>>,
    pub beta: f64,
    pub h: ScheduleSpec,
    pub d: ScheduleSpec,
    pub measurement_noise_shape: Vec<Vec<f64>>,
    pub sigma: f64,
    pub rho: f64,
    pub theta: f64,
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    pub plant: PlantConfig,
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub topology: TopologyConfig,
    pub sensors: Vec<SensorConfig>,
}

fn default_out_dir() -> String {
    "out".into()
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The five-sensor ship-navigation study configuration.
    ///
    /// The sensor graph is a directed ring (each sensor listens to its
    /// successor) plus one chord, with unit weights.
    pub fn ship() -> Self {
        let sigmas = [0.98, 0.9, 0.8, 0.85, 0.93];
        let delta0s = [0.25, 0.2, 0.15, 0.1, 0.05];
        let xhat0s = [
            vec![1.8, 3.7],
            vec![1.6, 3.8],
            vec![1.8, 3.55],
            vec![1.35, 3.3],
            vec![1.5, 3.9],
        ];
        let mut adjacency = vec![vec![0.0; 5]; 5];
        for i in 0..5 {
            adjacency[i][(i + 1) % 5] = 1.0; // ring: i listens to i+1
        }
        adjacency[0][2] = 1.0; // chord
        let sensors = (0..5)
            .map(|i| SensorConfig {
                xhat0: xhat0s[i].clone(),
                u0: vec![vec![40.0, 0.0], vec![0.0, 40.0]],
                beta: 1.0,
                h: ScheduleSpec::ShipH { index: i + 1 },
                d: ScheduleSpec::ShipD { index: i + 1 },
                measurement_noise_shape: vec![vec![0.2]],
                sigma: sigmas[i],
                rho: 0.7,
                theta: 30.0,
                delta0: delta0s[i],
            })
            .collect();
        Self {
            horizon: 100,
            seed: 0,
            out_dir: default_out_dir(),
            plant: PlantConfig {
                x0: vec![1.7, 3.7],
                c: ScheduleSpec::ShipC,
                f: ScheduleSpec::ShipF,
                process_noise_shape: vec![vec![0.4]],
                process_noise_mode: ProcessNoiseMode::Uniform,
            },
            privacy: PrivacyConfig {
                mode: PrivacyMode::Constant,
                b: Some(1.0),
                c: None,
                q: None,
                kappa: default_kappa(),
                clip: true,
            },
            estimator: EstimatorConfig::default(),
            topology: TopologyConfig { adjacency },
            sensors,
        }
    }
}

// ---------------------------------------------------------------------------
// validated runtime scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: PlantParams,
    pub sensors: Vec<SensorParams>,
    pub topology: Topology,
    pub trigger: Vec<TriggerParams>,
    pub xhat0: Vec<DVector<f64>>,
    pub u0: Vec<DMatrix<f64>>,
    pub beta: Vec<f64>,
    pub kappa: f64,
    pub clip_privacy: bool,
    pub process_boundary: bool,
    pub sign_mode: SignMode,
    pub mu: f64,
    pub objective: ObjectiveMode,
    pub horizon: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let privacy = match cfg.privacy.mode {
            PrivacyMode::Constant => PrivacyNoiseParams::constant(
                cfg.privacy
                    .b
                    .ok_or_else(|| Error::Config("privacy.b required in constant mode".into()))?,
            )?,
            PrivacyMode::Decaying => PrivacyNoiseParams::decaying(
                cfg.privacy
                    .c
                    .ok_or_else(|| Error::Config("privacy.c required in decaying mode".into()))?,
                cfg.privacy
                    .q
                    .ok_or_else(|| Error::Config("privacy.q required in decaying mode".into()))?,
            )?,
        };
        let plant = PlantParams::new(
            cfg.plant.c.to_schedule()?,
            cfg.plant.f.to_schedule()?,
            Ellipsoid::origin(nested_to_matrix(&cfg.plant.process_noise_shape)?)?,
            privacy,
            DVector::from_vec(cfg.plant.x0.clone()),
        )?;
        let topology = Topology::new(
            nested_to_matrix(&cfg.topology.adjacency)?,
            cfg.estimator.include_self,
        )?;
        if topology.n_nodes() != cfg.sensors.len() {
            return Err(Error::Config(format!(
                "topology has {} nodes but {} sensors configured",
                topology.n_nodes(),
                cfg.sensors.len()
            )));
        }
        let mut sensors = Vec::new();
        let mut trigger = Vec::new();
        let mut xhat0 = Vec::new();
        let mut u0 = Vec::new();
        let mut beta = Vec::new();
        let mut n_y = None;
        for s in &cfg.sensors {
            let params = SensorParams::new(
                s.h.to_schedule()?,
                s.d.to_schedule()?,
                Ellipsoid::origin(nested_to_matrix(&s.measurement_noise_shape)?)?,
            )?;
            match n_y {
                None => n_y = Some(params.output_dim()),
                Some(ny) if ny != params.output_dim() => {
                    return Err(Error::Config(
                        "all sensors must share one output dimension".into(),
                    ));
                }
                _ => {}
            }
            sensors.push(params);
            trigger.push(TriggerParams::new(s.sigma, s.rho, s.theta, s.delta0)?);
            xhat0.push(DVector::from_vec(s.xhat0.clone()));
            u0.push(nested_to_matrix(&s.u0)?);
            beta.push(s.beta);
        }
        Ok(Self {
            plant,
            sensors,
            topology,
            trigger,
            xhat0,
            u0,
            beta,
            kappa: cfg.privacy.kappa,
            clip_privacy: cfg.privacy.clip,
            process_boundary: cfg.plant.process_noise_mode == ProcessNoiseMode::Boundary,
            sign_mode: match cfg.estimator.sign_mode {
                SignModeConfig::BoundedPrivacy => SignMode::BoundedPrivacy,
                SignModeConfig::LiteralSign => SignMode::LiteralSign,
            },
            mu: cfg.estimator.mu,
            objective: match cfg.estimator.objective {
                ObjectiveConfig::Trace => ObjectiveMode::TraceUNext,
                ObjectiveConfig::Feasibility => ObjectiveMode::Feasibility,
            },
            horizon: cfg.horizon,
            seed: cfg.seed,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn privacy(&self) -> &PrivacyNoiseParams {
        &self.plant.privacy
    }
}

// ---------------------------------------------------------------------------
// simulation loop
// ---------------------------------------------------------------------------

/// One logged simulation step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub xhat: Vec<DVector<f64>>,
    pub u: Vec<DMatrix<f64>>,
    pub contained: Vec<bool>,
    pub fired: Vec<bool>,
    /// Auxiliary trigger variable after this step's update.
    pub delta: Vec<f64>,
    pub l_used: Vec<f64>,
    pub trace_u_next: f64,
    pub eps: [f64; 4],
    pub lmi_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationLog {
    pub n_sensors: usize,
    pub n_x: usize,
    pub records: Vec<StepRecord>,
}

/// Stepping simulation engine; `run_simulation` drives it over the horizon.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    solver_opts: SolverOptions,
    rng: ChaCha12Rng,
    x: DVector<f64>,
    est: EstimatorState,
    trig: Vec<TriggerState>,
    last_residuals: Vec<DVector<f64>>,
    warm: Option<Vec<f64>>,
    r_inv: DMatrix<f64>,
    q_inv: Vec<DMatrix<f64>>,
    k: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, seed: u64) -> Result<Self> {
        let est = EstimatorState::new(
            scenario.xhat0.clone(),
            scenario.u0.clone(),
            scenario.beta.clone(),
        )?;
        let trig = scenario
            .trigger
            .iter()
            .zip(&scenario.sensors)
            .map(|(p, s)| TriggerState::new(p, s.output_dim()))
            .collect();
        let n_y = scenario.sensors[0].output_dim();
        let r_inv = invert_spd(scenario.plant.process_noise.shape())?;
        let q_inv = scenario
            .sensors
            .iter()
            .map(|s| invert_spd(s.measurement_noise.shape()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario,
            solver_opts: SolverOptions::default(),
            rng: ChaCha12Rng::seed_from_u64(seed),
            x: scenario.plant.x0.clone(),
            est,
            trig,
            last_residuals: vec![DVector::zeros(n_y); scenario.n_sensors()],
            warm: None,
            r_inv,
            q_inv,
            k: 0,
        })
    }

    pub fn step_context(&self) -> StepContext {
        let sc = self.scenario;
        let n = sc.n_sensors();
        let k = self.k;
        let b_k = laplace_scale(sc.privacy(), k);
        StepContext {
            k,
            n_x: sc.plant.state_dim(),
            n_w: sc.plant.process_noise.dim(),
            n_y: sc.sensors[0].output_dim(),
            n_v: sc.sensors.iter().map(|s| s.noise_dim()).collect(),
            c_k: sc.plant.c.eval(k),
            f_k: sc.plant.f.eval(k),
            h_k: sc.sensors.iter().map(|s| s.h.eval(k)).collect(),
            d_k: sc.sensors.iter().map(|s| s.d.eval(k)).collect(),
            r_inv: self.r_inv.clone(),
            q_inv: self.q_inv.clone(),
            m_inv: 1.0 / (2.0 * b_k * b_k),
            adjacency: DMatrix::from_fn(n, n, |i, j| sc.topology.weight(i, j)),
            beta: self.est.beta.clone(),
            xhat: self.est.xhat.clone(),
            l: self.est.l.iter().map(|l| l.matrix().clone()).collect(),
            delta: self.trig.iter().map(|t| t.delta).collect(),
            sigma: sc.trigger.iter().map(|t| t.sigma()).collect(),
            theta: sc.trigger.iter().map(|t| t.theta()).collect(),
            kappa: sc.kappa,
            sign_mode: sc.sign_mode,
            mu: sc.mu,
            objective: sc.objective,
        }
    }

    /// Advances one step, returning its log record.
    pub fn step(&mut self) -> Result<StepRecord> {
        let sc = self.scenario;
        let n = sc.n_sensors();
        let k = self.k;

        // (1) gain design
        let ctx = self.step_context();
        let gains: GainSolution =
            estimator::design_gains(&ctx, &self.solver_opts, self.warm.as_deref())?;

        // (2) measure + trigger with the solved weights
        let mut fired = vec![false; n];
        let mut delta = vec![0.0; n];
        let mut l_used = vec![0.0; n];
        for i in 0..n {
            let v = sc.sensors[i].measurement_noise.sample_uniform(&mut self.rng);
            let y = measure(&sc.sensors[i], k, &self.x, &v)?;
            let ytilde = residual(&sc.sensors[i], k, &y, &self.est.xhat[i])?;
            let (decision, next) =
                trigger_step(&self.trig[i], &sc.trigger[i], k, &ytilde, &gains.psi[i])?;
            if decision.fired {
                self.last_residuals[i] = ytilde;
            }
            fired[i] = decision.fired;
            delta[i] = decision.delta_next;
            l_used[i] = decision.l_used;
            self.trig[i] = next;
        }

        // containment of the true state in the current confidence sets
        let mut contained = vec![false; n];
        for i in 0..n {
            contained[i] = self.est.confidence_set(i)?.contains(&self.x)?;
        }

        let record = StepRecord {
            k,
            x: self.x.clone(),
            xhat: self.est.xhat.clone(),
            u: self.est.u.clone(),
            contained,
            fired,
            delta,
            l_used,
            trace_u_next: gains.trace_u_next,
            eps: gains.eps,
            lmi_residual: gains.lmi_residual,
        };

        // (3) predict, (4) confidence update
        let next_xhat = estimator::predict(&self.est, &gains, &sc.topology, &self.last_residuals)?;
        self.est = estimator::update_confidence(&self.est, &gains, next_xhat)?;

        // (5) plant step
        let eta = self.draw_privacy_noise(k);
        let w = if sc.process_boundary {
            sc.plant.process_noise.sample_boundary(&mut self.rng)
        } else {
            sc.plant.process_noise.sample_uniform(&mut self.rng)
        };
        let (x_next, _zeta) = step_plant(&sc.plant, &self.x, k, &eta, &w)?;
        self.x = x_next;

        self.warm = Some(gains.assignment);
        self.k += 1;
        Ok(record)
    }

    /// Componentwise Laplace draws; in clipped mode, rejected until
    /// `eta^T eta <= kappa * 2 b_k^2`.
    fn draw_privacy_noise(&mut self, k: usize) -> DVector<f64> {
        let sc = self.scenario;
        let n_x = sc.plant.state_dim();
        let b = laplace_scale(sc.privacy(), k);
        let bound = sc.kappa * 2.0 * b * b;
        loop {
            let eta = DVector::from_fn(n_x, |_, _| sample_laplace(b, &mut self.rng));
            if !sc.clip_privacy || eta.norm_squared() <= bound {
                return eta;
            }
        }
    }

    pub fn current_step(&self) -> usize {
        self.k
    }
}

fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite {
            pivot: 0.0,
            index: 0,
        })
}

/// Runs the full horizon with the given seed (overriding the config seed).
pub fn run_simulation(scenario: &Scenario, seed: u64) -> Result<SimulationLog> {
    let mut sim = Simulation::new(scenario, seed)?;
    let mut records = Vec::with_capacity(scenario.horizon);
    for _ in 0..scenario.horizon {
        records.push(sim.step()?);
    }
    Ok(SimulationLog {
        n_sensors: scenario.n_sensors(),
        n_x: scenario.plant.state_dim(),
        records,
    })
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SensorMetrics {
    pub containment_rate: f64,
    pub trigger_rate: f64,
    /// Mean gap between consecutive firings; infinite when fewer than two
    /// firings occurred.
    pub mean_inter_event_interval: f64,
    pub mean_error_norm: f64,
    pub max_error_norm: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsSummary {
    pub per_sensor: Vec<SensorMetrics>,
    pub overall_containment_rate: f64,
    pub overall_trigger_rate: f64,
    pub overall_mean_interval: f64,
}

pub fn metrics(log: &SimulationLog) -> MetricsSummary {
    let steps = log.records.len();
    let n = log.n_sensors;
    let mut per_sensor = Vec::with_capacity(n);
    let mut all_intervals = Vec::new();
    let mut total_contained = 0usize;
    let mut total_fired = 0usize;
    for i in 0..n {
        let mut contained = 0usize;
        let mut fires = Vec::new();
        let mut err_sum = 0.0;
        let mut err_max = 0.0f64;
        for rec in &log.records {
            if rec.contained[i] {
                contained += 1;
            }
            if rec.fired[i] {
                fires.push(rec.k);
            }
            let e = (&rec.x - &rec.xhat[i]).norm();
            err_sum += e;
            err_max = err_max.max(e);
        }
        let intervals: Vec<f64> = fires.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        all_intervals.extend(intervals.iter().copied());
        total_contained += contained;
        total_fired += fires.len();
        per_sensor.push(SensorMetrics {
            containment_rate: contained as f64 / steps.max(1) as f64,
            trigger_rate: fires.len() as f64 / steps.max(1) as f64,
            mean_inter_event_interval: mean_or_inf(&intervals),
            mean_error_norm: err_sum / steps.max(1) as f64,
            max_error_norm: err_max,
        });
    }
    MetricsSummary {
        per_sensor,
        overall_containment_rate: total_contained as f64 / (steps * n).max(1) as f64,
        overall_trigger_rate: total_fired as f64 / (steps * n).max(1) as f64,
        overall_mean_interval: mean_or_inf(&all_intervals),
    }
}

fn mean_or_inf(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::INFINITY
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// 17-significant-digit float formatting shared by every CSV column.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `states.csv`, `triggers.csv`, `ellipsoids.csv`, `gains.csv` and
/// `summary.csv` into `dir`.
pub fn write_csv(log: &SimulationLog, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_states(log, &dir.join("states.csv"))?;
    write_triggers(log, &dir.join("triggers.csv"))?;
    write_ellipsoids(log, &dir.join("ellipsoids.csv"))?;
    write_gains(log, &dir.join("gains.csv"))?;
    write_summary(log, &dir.join("summary.csv"))?;
    Ok(())
}

fn writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn write_states(log: &SimulationLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["k".to_string()];
    for d in 1..=log.n_x {
        header.push(format!("x{d}"));
    }
    for i in 1..=log.n_sensors {
        for d in 1..=log.n_x {
            header.push(format!("xhat{i}_{d}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for rec in &log.records {
        let mut row = vec![rec.k.to_string()];
        row.extend(rec.x.iter().map(|&v| fmt_float(v)));
        for xh in &rec.xhat {
            row.extend(xh.iter().map(|&v| fmt_float(v)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn write_triggers(log: &SimulationLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "k,sensor,fired,delta,l_used")?;
    for rec in &log.records {
        for i in 0..log.n_sensors {
            writeln!(
                w,
                "{},{},{},{},{}",
                rec.k,
                i + 1,
                u8::from(rec.fired[i]),
                fmt_float(rec.delta[i]),
                fmt_float(rec.l_used[i])
            )?;
        }
    }
    Ok(())
}

fn write_ellipsoids(log: &SimulationLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["k".to_string(), "sensor".to_string()];
    for r in 1..=log.n_x {
        for c in 1..=log.n_x {
            header.push(format!("u{r}{c}"));
        }
    }
    header.push("contained".to_string());
    writeln!(w, "{}", header.join(","))?;
    for rec in &log.records {
        for i in 0..log.n_sensors {
            let mut row = vec![rec.k.to_string(), (i + 1).to_string()];
            for r in 0..log.n_x {
                for c in 0..log.n_x {
                    row.push(fmt_float(rec.u[i][(r, c)]));
                }
            }
            row.push(u8::from(rec.contained[i]).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

fn write_gains(log: &SimulationLog, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    writeln!(w, "k,trace_u_next,eps1,eps2,eps3,eps4,lmi_residual")?;
    for rec in &log.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            rec.k,
            fmt_float(rec.trace_u_next),
            fmt_float(rec.eps[0]),
            fmt_float(rec.eps[1]),
            fmt_float(rec.eps[2]),
            fmt_float(rec.eps[3]),
            fmt_float(rec.lmi_residual)
        )?;
    }
    Ok(())
}

fn write_summary(log: &SimulationLog, path: &Path) -> Result<()> {
    let m = metrics(log);
    let mut w = writer(path)?;
    writeln!(
        w,
        "sensor,containment_rate,trigger_rate,mean_inter_event_interval,mean_error_norm,max_error_norm"
    )?;
    for (i, s) in m.per_sensor.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            i + 1,
            fmt_float(s.containment_rate),
            fmt_float(s.trigger_rate),
            fmt_float(s.mean_inter_event_interval),
            fmt_float(s.mean_error_norm),
            fmt_float(s.max_error_norm)
        )?;
    }
    writeln!(
        w,
        "overall,{},{},{},,",
        fmt_float(m.overall_containment_rate),
        fmt_float(m.overall_trigger_rate),
        fmt_float(m.overall_mean_interval)
    )?;
    Ok(())
}
