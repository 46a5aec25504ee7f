//! Command-line front end for the distributed set-membership estimation
//! simulator.
//!
//! Exit codes: 0 on success, 2 when the gain design is infeasible (or the
//! privacy budget is undefined), 3 on configuration errors, 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use dsme_core::sim::{metrics, run_simulation, write_csv, Scenario, ScenarioConfig, Simulation};
use dsme_core::system::laplace_second_moment;
use dsme_core::{privacy_epsilon, solve_steady_state, Error};

#[derive(Parser)]
#[command(name = "dsme", version, about = "Privacy-preserving distributed set-membership state estimation with event-triggered communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop simulation and write CSV logs.
    Simulate(SimulateArgs),
    /// Second-moment steady state of the plant frozen at step 0.
    SteadyState(SteadyStateArgs),
    /// Differential-privacy budget for a decaying noise schedule.
    PrivacyBudget(PrivacyBudgetArgs),
    /// Simulate up to a step and report that step's matrix-inequality residual.
    CheckLmi(CheckLmiArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario TOML; omit to use the built-in five-sensor ship study.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Override the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SteadyStateArgs {
    /// Scenario TOML; omit to use the built-in five-sensor ship study.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Args)]
struct PrivacyBudgetArgs {
    /// Sensitivity bound on the published quantity.
    #[arg(long)]
    varsigma: f64,
    /// Noise magnitude coefficient of the decaying schedule.
    #[arg(long)]
    c: f64,
    /// Noise decay rate, in (0, 1).
    #[arg(long)]
    q: f64,
    /// Scalar bound on the estimator gain.
    #[arg(long)]
    a_hat: f64,
}

#[derive(Args)]
struct CheckLmiArgs {
    /// Scenario TOML; omit to use the built-in five-sensor ship study.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Step whose gain design is checked.
    #[arg(long, default_value_t = 0)]
    step: usize,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: &Option<PathBuf>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => ScenarioConfig::from_path(p),
        None => Ok(ScenarioConfig::ship()),
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Error> {
    let mut cfg = load_config(&args.config)?;
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let scenario = Scenario::from_config(&cfg)?;
    let log = run_simulation(&scenario, seed)?;
    write_csv(&log, &out_dir)?;
    let m = metrics(&log);
    println!(
        "steps={} sensors={} seed={seed} out={}",
        log.records.len(),
        log.n_sensors,
        out_dir.display()
    );
    println!(
        "containment_rate={:.4} trigger_rate={:.4} mean_inter_event_interval={:.4}",
        m.overall_containment_rate, m.overall_trigger_rate, m.overall_mean_interval
    );
    for (i, s) in m.per_sensor.iter().enumerate() {
        println!(
            "sensor {} containment={:.4} trigger_rate={:.4} interval={:.4} mean_err={:.4} max_err={:.4}",
            i + 1,
            s.containment_rate,
            s.trigger_rate,
            s.mean_inter_event_interval,
            s.mean_error_norm,
            s.max_error_norm
        );
    }
    Ok(())
}

fn steady_state(args: &SteadyStateArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config)?;
    let scenario = Scenario::from_config(&cfg)?;
    let c0 = scenario.plant.c.eval(0);
    let f0 = scenario.plant.f.eval(0);
    let n = c0.nrows();
    let m0 = DMatrix::identity(n, n) * laplace_second_moment(scenario.privacy(), 0);
    let r0 = scenario.plant.process_noise.shape().clone();
    let report = solve_steady_state(
        &c0,
        &f0,
        &m0,
        &r0,
        args.tol,
        args.max_iter,
        Some(&scenario.plant.c),
    )?;
    println!(
        "spectral_radius={:.12} converged={} iterations={} residual={:.3e}",
        report.spectral_radius, report.converged, report.iterations, report.residual
    );
    for k in 0..report.rho_over_period.len() {
        println!("rho(C_{k})={:.12}", report.rho_over_period[k]);
    }
    for r in 0..report.g.nrows() {
        let row: Vec<String> = (0..report.g.ncols())
            .map(|c| format!("{:.12e}", report.g[(r, c)]))
            .collect();
        println!("g[{r}] = [{}]", row.join(", "));
    }
    Ok(())
}

fn privacy_budget(args: &PrivacyBudgetArgs) -> Result<(), Error> {
    let eps = privacy_epsilon(args.varsigma, args.c, args.q, args.a_hat)?;
    println!("epsilon={eps:.12e}");
    Ok(())
}

fn check_lmi(args: &CheckLmiArgs) -> Result<(), Error> {
    let cfg = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let scenario = Scenario::from_config(&cfg)?;
    if args.step >= cfg.horizon {
        return Err(Error::Config(format!(
            "step {} is outside the horizon {}",
            args.step, cfg.horizon
        )));
    }
    let mut sim = Simulation::new(&scenario, seed)?;
    let mut record = None;
    for _ in 0..=args.step {
        record = Some(sim.step()?);
    }
    let rec = record.expect("at least one step was taken");
    println!(
        "step={} lmi_residual={:.6e} trace_u_next={:.6e} eps=[{:.4e}, {:.4e}, {:.4e}, {:.4e}]",
        rec.k, rec.lmi_residual, rec.trace_u_next, rec.eps[0], rec.eps[1], rec.eps[2], rec.eps[3]
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::SteadyState(args) => steady_state(args),
        Command::PrivacyBudget(args) => privacy_budget(args),
        Command::CheckLmi(args) => check_lmi(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Infeasible { .. } | Error::BudgetUndefined { .. } => ExitCode::from(2),
                Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
