//! Subcommand dispatch.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mshe_core::analysis::{
    estimate_lojasiewicz, fit_decay, random_unit_field, trajectory_rng, DecayModel,
};
use mshe_core::stationary::DEFAULT_NEWTON_TOL;
use mshe_core::{
    assemble_linearization, attractor_sweep, build_domain, energy, find_equilibrium, spectrum,
    Domain, Equilibrium, Field, Integrator, Monitors, Trajectory,
};
use serde_json::{json, Value};

use crate::config::{load_config, InitSpec, RunConfig};
use crate::error::CliError;
use crate::io::{
    column, document, emit_timeseries, load_field, path_or, read_timeseries, write_json,
    Checkpoint, LoadedField, SCHEMA_VERSION,
};

#[derive(Parser, Debug)]
#[command(
    name = "mshe",
    version,
    about = "Constrained Swift-Hohenberg flow on the unit L2 sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the flow and write the diagnostic time series as CSV.
    Simulate(SimArgs),
    /// Solve for an equilibrium by bordered Newton.
    Equilibrium(EqArgs),
    /// Equilibrium plus linearized spectrum and stability class.
    Spectrum(EqArgs),
    /// Fit a decay law to a column of a trajectory CSV.
    DecayFit(FitArgs),
    /// Estimate the Łojasiewicz exponent along a run.
    Theta(ThetaArgs),
    /// Integrate an ensemble of random initial fields and cluster the limits.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SimArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EqArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `mode:<k>` or `file:<path>`; defaults to the configured initial data.
    #[arg(long)]
    guess: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Exponential,
    Polynomial,
    Auto,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "residual_M")]
    column: String,
    #[arg(long, value_enum, default_value = "auto")]
    model: ModelArg,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
}

#[derive(Args, Debug)]
struct ThetaArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trajectory CSV to analyse instead of running the configured simulation.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    guess: Option<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

/// Runs one invocation and returns its exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Equilibrium(a) => equilibrium(a, false),
        Command::Spectrum(a) => equilibrium(a, true),
        Command::DecayFit(a) => decay_fit(a),
        Command::Theta(a) => theta(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn domain_of(cfg: &RunConfig) -> Result<Arc<Domain>, CliError> {
    build_domain(cfg.domain).map_err(|e| CliError::Config {
        key: "domain".into(),
        msg: e.to_string(),
    })
}

fn init_field(cfg: &RunConfig, domain: &Arc<Domain>) -> Result<LoadedField, CliError> {
    Ok(match &cfg.init {
        InitSpec::Mode { k } => {
            LoadedField::Plain(Field::basis_mode(domain, *k).map_err(|e| CliError::Config {
                key: "init.k".into(),
                msg: e.to_string(),
            })?)
        }
        InitSpec::Random { seed } => {
            LoadedField::Plain(random_unit_field(domain, &mut trajectory_rng(*seed, 0)))
        }
        InitSpec::File { path } => load_field(path, domain)?,
    })
}

fn parse_guess(
    spec: Option<&str>,
    cfg: &RunConfig,
    domain: &Arc<Domain>,
) -> Result<Field, CliError> {
    let loaded = match spec {
        None => init_field(cfg, domain)?,
        Some(s) => {
            if let Some(k) = s.strip_prefix("mode:") {
                let k: usize = k
                    .parse()
                    .map_err(|_| CliError::Usage(format!("--guess: bad mode index in {s:?}")))?;
                LoadedField::Plain(
                    Field::basis_mode(domain, k)
                        .map_err(|e| CliError::Usage(format!("--guess: {e}")))?,
                )
            } else if let Some(p) = s.strip_prefix("file:") {
                load_field(Path::new(p), domain)?
            } else {
                return Err(CliError::Usage(format!(
                    "--guess must be mode:<k> or file:<path>, got {s:?}"
                )));
            }
        }
    };
    Ok(match loaded {
        LoadedField::Plain(f) | LoadedField::Resume(_, f) => f,
    })
}

fn integrator_for(cfg: &RunConfig, domain: &Arc<Domain>) -> Result<Integrator, CliError> {
    let numeric = |e: mshe_core::DynamicsError| CliError::Config {
        key: "init".into(),
        msg: e.to_string(),
    };
    match init_field(cfg, domain)? {
        LoadedField::Plain(f) => Integrator::new(&f, cfg.params, cfg.scheme).map_err(numeric),
        LoadedField::Resume(cp, f) => {
            if cp.params != cfg.params {
                return Err(CliError::Config {
                    key: "init.path".into(),
                    msg: "checkpoint params differ from the configured params".into(),
                });
            }
            if cp.scheme.dt != cfg.scheme.dt || cp.scheme.scheme != cfg.scheme.scheme {
                return Err(CliError::Config {
                    key: "init.path".into(),
                    msg: "checkpoint time step or scheme differs from the configuration".into(),
                });
            }
            Integrator::resume(
                f,
                cp.step,
                cp.dissipation_integral,
                cp.initial_energy,
                cfg.params,
                cfg.scheme,
            )
            .map_err(numeric)
        }
    }
}

fn checkpoint_of(it: &Integrator) -> Checkpoint {
    Checkpoint {
        schema_version: SCHEMA_VERSION,
        kind: Checkpoint::KIND.into(),
        time: it.time(),
        step: it.step_index(),
        modes: it.state().field().modes().to_vec(),
        domain: it.state().field().domain().spec(),
        params: *it.params(),
        scheme: *it.scheme(),
        dissipation_integral: it.dissipation_integral(),
        initial_energy: it.initial_energy(),
    }
}

fn monitors_json(m: &Monitors) -> Value {
    serde_json::to_value(m).unwrap_or(Value::Null)
}

/// Runs the configured simulation; on divergence the partial series is
/// written before the error is returned.
fn run_simulation(
    cfg: &RunConfig,
    csv_out: Option<&Path>,
) -> Result<(Trajectory, Integrator), CliError> {
    let domain = domain_of(cfg)?;
    let mut it = integrator_for(cfg, &domain)?;
    match it.run() {
        Ok(traj) => {
            if let Some(p) = csv_out {
                emit_timeseries(&traj.records, p)?;
            }
            Ok((traj, it))
        }
        Err(fail) => {
            if let Some(p) = csv_out {
                if !fail.partial.records.is_empty() {
                    emit_timeseries(&fail.partial.records, p)?;
                }
            }
            Err(CliError::Divergence(fail.error.to_string()))
        }
    }
}

fn simulate(a: SimArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let csv = path_or(a.out, &cfg.outputs.trajectory_path, "trajectory")?;
    let (traj, it) = run_simulation(&cfg, Some(&csv))?;
    if let Some(p) = &cfg.outputs.checkpoint_path {
        write_json(p, &checkpoint_of(&it))?;
    }
    if let Some(p) = &cfg.outputs.report_path {
        let doc = document(
            "simulation",
            &cfg,
            json!({
                "initial_energy": traj.initial_energy,
                "final": traj.records.last(),
                "steps": it.step_index(),
                "monitors": monitors_json(&traj.monitors),
            }),
        );
        write_json(p, &doc)?;
    }
    Ok(())
}

fn equilibrium_json(eq: &Equilibrium) -> Value {
    json!({
        "modes": eq.field.modes(),
        "mu": eq.mu,
        "residual_norm": eq.residual_norm,
        "iterations": eq.iterations,
        "mu_defect": eq.mu_defect(),
        "energy": energy(&eq.field, &eq.params),
    })
}

fn emit(out: Option<&Path>, doc: &Value) -> Result<(), CliError> {
    match out {
        Some(p) => write_json(p, doc),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(doc).map_err(|e| CliError::Usage(e.to_string()))?
            );
            Ok(())
        }
    }
}

fn solve(cfg: &RunConfig, guess: Option<&str>) -> Result<Equilibrium, CliError> {
    let domain = domain_of(cfg)?;
    let g = parse_guess(guess, cfg, &domain)?;
    find_equilibrium(&g, &cfg.params, DEFAULT_NEWTON_TOL)
        .map_err(|e| CliError::Newton(e.to_string()))
}

fn equilibrium(a: EqArgs, with_spectrum: bool) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let eq = solve(&cfg, a.guess.as_deref())?;
    let out = a.out.or_else(|| cfg.outputs.report_path.clone());
    let doc = if with_spectrum {
        let op = assemble_linearization(&eq, &cfg.params);
        let rep = spectrum(&op).map_err(|e| CliError::Numerical(e.to_string()))?;
        document(
            "spectrum",
            &cfg,
            json!({
                "equilibrium": equilibrium_json(&eq),
                "eigenvalues": rep.eigenvalues,
                "tangent_rates": rep.tangent_rates,
                "classification": rep.classification,
                "symmetry_defect": rep.symmetry_defect,
            }),
        )
    } else {
        document("equilibrium", &cfg, equilibrium_json(&eq))
    };
    emit(out.as_deref(), &doc)
}

fn decay_fit(a: FitArgs) -> Result<(), CliError> {
    let cfg = a.config.as_deref().map(load_config).transpose()?;
    let records = read_timeseries(&a.input)?;
    let times = column(&records, "t")?;
    let values = column(&records, &a.column)?;
    let model = match a.model {
        ModelArg::Exponential => DecayModel::Exponential,
        ModelArg::Polynomial => DecayModel::Polynomial,
        ModelArg::Auto => DecayModel::Auto,
    };
    let window = match (a.t_min, a.t_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    };
    let fit =
        fit_decay(&times, &values, model, window).map_err(|e| CliError::Analysis(e.to_string()))?;
    let doc = document(
        "decay_fit",
        &cfg,
        json!({
            "input": a.input,
            "column": a.column,
            "fit": fit,
        }),
    );
    emit(a.out.as_deref(), &doc)
}

fn theta(a: ThetaArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config)?;
    let (traj, endpoint) = match &a.input {
        Some(p) => {
            let records = read_timeseries(p)?;
            let traj = Trajectory {
                params: cfg.params,
                scheme: cfg.scheme,
                initial_energy: records.first().map_or(f64::NAN, |r| r.energy),
                records,
                states: Vec::new(),
                monitors: Monitors::default(),
            };
            (traj, None)
        }
        None => {
            let (traj, it) = run_simulation(&cfg, None)?;
            (traj, Some(it.state().field().clone()))
        }
    };
    let eq = match (&a.guess, endpoint) {
        (None, Some(end)) => find_equilibrium(&end, &cfg.params, DEFAULT_NEWTON_TOL)
            .map_err(|e| CliError::Newton(e.to_string()))?,
        (guess, _) => solve(&cfg, guess.as_deref())?,
    };
    let est = estimate_lojasiewicz(&traj, &eq).map_err(|e| CliError::Analysis(e.to_string()))?;
    let doc = document(
        "theta",
        &cfg,
        json!({
            "estimate": est,
            "equilibrium": equilibrium_json(&eq),
        }),
    );
    emit(
        a.out.as_deref().or(cfg.outputs.report_path.as_deref()),
        &doc,
    )
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = a.seeds {
        if s == 0 {
            return Err(CliError::Usage("--seeds must be at least 1".into()));
        }
        cfg.seeds = s;
    }
    if let Some(r) = a.rng_seed {
        cfg.rng_seed = r;
    }
    let domain = domain_of(&cfg)?;
    let rep = attractor_sweep(cfg.seeds, &domain, &cfg.params, &cfg.scheme, cfg.rng_seed)
        .map_err(|e| CliError::Analysis(e.to_string()))?;
    let doc = document(
        "attractor",
        &cfg,
        serde_json::to_value(&rep).map_err(|e| CliError::Usage(e.to_string()))?,
    );
    emit(
        a.out.as_deref().or(cfg.outputs.report_path.as_deref()),
        &doc,
    )
}
