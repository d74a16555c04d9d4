//! `ruinband` — simulation, estimation, Lundberg solving, Cramér
//! approximation, renewal-oracle grids, confidence intervals, and Monte Carlo
//! coverage for Lévy-driven insurance surplus models.
//!
//! Exit codes: 0 success, 2 validation/input errors, 3 numerical failures.

mod config;

use clap::{Args, Parser, Subcommand};
use ruinband::confidence::{
    build_interval_opts, coverage_experiment, CoverageConfig, CoverageResult, IntervalVariant,
};
use ruinband::cramer::CramerSummary;
use ruinband::estimate::estimate;
use ruinband::lundberg::solve_adjustment;
use ruinband::models::{Family, ModelSpec};
use ruinband::renewal::{solve_dot_psi, solve_psi, DEFAULT_CELLS, DEFAULT_UMAX};
use ruinband::simulate::{simulate_classical, simulate_gamma_jumps, simulate_perturbed};
use ruinband::ObservationSet;
use std::io::Write;
use std::path::PathBuf;

const SPEC_VERSION: &str = "1";

#[derive(Parser)]
#[command(
    name = "ruinband",
    version,
    about = "Ruin-probability inference for Lévy insurance surplus models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an observation set and write claims/grid CSV files
    Simulate(Opts),
    /// Estimate model parameters from claims/grid CSV files (JSON report)
    Estimate(Opts),
    /// Solve the Lundberg equation for the adjustment coefficient (JSON)
    Lundberg(Opts),
    /// Tabulate Cramér approximation vs renewal oracle and psi-gradients (CSV)
    Approx(Opts),
    /// Build a delta-method confidence interval from a dataset (JSON)
    Ci(Opts),
    /// Run a Monte Carlo coverage experiment (JSON, optional CSV row)
    Coverage(Opts),
}

/// Shared option surface; each subcommand validates the subset it needs.
/// Every value can also come from `--config` (flag wins over file).
#[derive(Args, Debug, Default)]
struct Opts {
    /// Flat key = value config file; flags override its entries
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Model family: classical-exp | perturbed-exp | gamma-sub
    #[arg(long)]
    family: Option<String>,
    /// Mean claim size mu (currency), exponential-claim families
    #[arg(long)]
    mu: Option<f64>,
    /// Claim intensity lambda (claims/time), exponential-claim families
    #[arg(long)]
    lambda: Option<f64>,
    /// Gamma Lévy density weight a (jumps/time)
    #[arg(long)]
    a: Option<f64>,
    /// Gamma Lévy density decay b (1/currency)
    #[arg(long)]
    b: Option<f64>,
    /// Premium rate c (currency/time)
    #[arg(long)]
    c: Option<f64>,
    /// Diffusion coefficient D = sigma^2/2 (currency^2/time), perturbed family
    #[arg(long = "D")]
    d: Option<f64>,
    /// Observation horizon T (time)
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Surplus sampling step h (time), perturbed family
    #[arg(long)]
    h: Option<f64>,
    /// Jump observation threshold epsilon (currency), gamma family
    #[arg(long)]
    epsilon: Option<f64>,
    /// Initial capital u (currency)
    #[arg(long)]
    u: Option<f64>,
    /// Renewal grid horizon u_max (currency), default 30
    #[arg(long = "u-max")]
    u_max: Option<f64>,
    /// Renewal grid step (currency), default u_max/4096
    #[arg(long)]
    step: Option<f64>,
    /// Confidence level in (0,1)
    #[arg(long)]
    level: Option<f64>,
    /// Monte Carlo replicates
    #[arg(long)]
    replicates: Option<usize>,
    /// RNG master seed (fallback: RUINBAND_SEED env var, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Interval variant: I (oracle center) | J (Cramér center, default)
    #[arg(long)]
    variant: Option<String>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// Output path: directory for simulate, file otherwise (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Claims CSV path (input for estimate/ci)
    #[arg(long)]
    claims: Option<PathBuf>,
    /// Grid CSV path (input for estimate/ci, perturbed family)
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Append the coverage result as one CSV row to this file
    #[arg(long = "csv-row")]
    csv_row: Option<PathBuf>,
}

enum CliError {
    Validation(String),
    Numerical(String),
}

impl From<ruinband::Error> for CliError {
    fn from(e: ruinband::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl Opts {
    /// Fill unset fields from the config file, if one was given.
    fn merge_config(&mut self) -> CliResult<()> {
        let Some(path) = &self.config else {
            return Ok(());
        };
        let map = config::parse_config(path).map_err(invalid)?;
        macro_rules! fill {
            ($field:ident, $key:expr) => {
                if self.$field.is_none() {
                    self.$field = config::get_parsed(&map, $key).map_err(invalid)?;
                }
            };
        }
        fill!(family, "family");
        fill!(mu, "mu");
        fill!(lambda, "lambda");
        fill!(a, "a");
        fill!(b, "b");
        fill!(c, "c");
        fill!(d, "D");
        fill!(horizon, "T");
        fill!(h, "h");
        fill!(epsilon, "epsilon");
        fill!(u, "u");
        fill!(u_max, "u-max");
        fill!(step, "step");
        fill!(level, "level");
        fill!(replicates, "replicates");
        fill!(seed, "seed");
        fill!(variant, "variant");
        fill!(workers, "workers");
        fill!(out, "out");
        fill!(claims, "claims");
        fill!(grid, "grid");
        fill!(csv_row, "csv-row");
        Ok(())
    }

    fn family(&self) -> CliResult<Family> {
        match self.family.as_deref() {
            None => Err(invalid("--family is required")),
            Some("classical-exp") => Ok(Family::ClassicalExp),
            Some("perturbed-exp") => Ok(Family::PerturbedExp),
            Some("gamma-sub") => Ok(Family::GammaSub),
            Some(other) => Err(invalid(format!(
                "unknown family '{other}' (expected classical-exp | perturbed-exp | gamma-sub)"
            ))),
        }
    }

    fn require(&self, name: &str, v: Option<f64>) -> CliResult<f64> {
        let v = v.ok_or_else(|| invalid(format!("--{name} is required")))?;
        if !v.is_finite() {
            return Err(invalid(format!("--{name} must be finite, got {v}")));
        }
        Ok(v)
    }

    fn require_positive(&self, name: &str, v: Option<f64>) -> CliResult<f64> {
        let v = self.require(name, v)?;
        if v <= 0.0 {
            return Err(invalid(format!("--{name} must be > 0, got {v}")));
        }
        Ok(v)
    }

    /// Assemble the model from the family tag and its parameter block.
    fn model(&self) -> CliResult<ModelSpec> {
        let c = self.require_positive("c", self.c)?;
        let model = match self.family()? {
            Family::ClassicalExp => ModelSpec::ClassicalExp {
                c,
                mu: self.require_positive("mu", self.mu)?,
                lambda: self.require_positive("lambda", self.lambda)?,
            },
            Family::PerturbedExp => ModelSpec::PerturbedExp {
                c,
                mu: self.require_positive("mu", self.mu)?,
                lambda: self.require_positive("lambda", self.lambda)?,
                d: self.require_positive("D", self.d)?,
            },
            Family::GammaSub => ModelSpec::GammaSub {
                c,
                a: self.require_positive("a", self.a)?,
                b: self.require_positive("b", self.b)?,
            },
        };
        model.validate()?;
        Ok(model)
    }

    fn seed(&self) -> CliResult<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("RUINBAND_SEED") {
            Ok(raw) => raw
                .parse::<u64>()
                .map_err(|e| invalid(format!("RUINBAND_SEED = '{raw}' is not a u64: {e}"))),
            Err(_) => Ok(0),
        }
    }

    fn variant(&self) -> CliResult<IntervalVariant> {
        match self.variant.as_deref() {
            None => Ok(IntervalVariant::J),
            Some(s) => Ok(s.parse::<IntervalVariant>()?),
        }
    }

    fn level(&self) -> CliResult<f64> {
        let level = self.level.unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return Err(invalid(format!("--level must be in (0,1), got {level}")));
        }
        Ok(level)
    }

    /// Read the observation set named by --claims/--grid for this family.
    fn observations(&self) -> CliResult<ObservationSet> {
        let family = self.family()?;
        let horizon = self.require_positive("T", self.horizon)?;
        let claims = self
            .claims
            .as_ref()
            .ok_or_else(|| invalid("--claims <FILE> is required for this command"))?;
        let threshold = match family {
            Family::GammaSub => self.require_positive("epsilon", self.epsilon)?,
            _ => 0.0,
        };
        Ok(ObservationSet::from_csv(
            family,
            horizon,
            threshold,
            claims,
            self.grid.as_ref(),
        )?)
    }

    fn emit_json(&self, value: serde_json::Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&value)
            .map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
        match &self.out {
            None => {
                println!("{text}");
                Ok(())
            }
            Some(path) => std::fs::write(path, text + "\n")
                .map_err(|e| invalid(format!("cannot write {}: {e}", path.display()))),
        }
    }
}

fn with_spec_version(mut value: serde_json::Value) -> serde_json::Value {
    if let Some(map) = value.as_object_mut() {
        map.insert("spec_version".into(), SPEC_VERSION.into());
    }
    value
}

fn cmd_simulate(opts: &Opts) -> CliResult<()> {
    let model = opts.model()?;
    let horizon = opts.require_positive("T", opts.horizon)?;
    let seed = opts.seed()?;
    let obs = match model.family() {
        Family::ClassicalExp => simulate_classical(&model, horizon, seed)?,
        Family::PerturbedExp => {
            let h = opts.require_positive("h", opts.h)?;
            simulate_perturbed(&model, horizon, h, seed)?
        }
        Family::GammaSub => {
            let eps = opts.require_positive("epsilon", opts.epsilon)?;
            simulate_gamma_jumps(&model, horizon, eps, seed)?
        }
    };
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
    let claims_path = dir.join("claims.csv");
    obs.write_claims_csv(&claims_path)?;
    let mut files = vec![claims_path.display().to_string()];
    if obs.grid_obs.is_some() {
        let grid_path = dir.join("grid.csv");
        obs.write_grid_csv(&grid_path)?;
        files.push(grid_path.display().to_string());
    }
    let summary = with_spec_version(serde_json::json!({
        "family": model.family().as_str(),
        "T": horizon,
        "seed": seed,
        "claims": obs.claims.len(),
        "files": files,
    }));
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(())
}

fn cmd_estimate(opts: &Opts) -> CliResult<()> {
    let obs = opts.observations()?;
    let c = opts.require_positive("c", opts.c)?;
    let report = estimate(&obs, c)?;
    opts.emit_json(with_spec_version(report.to_json()))
}

fn cmd_lundberg(opts: &Opts) -> CliResult<()> {
    let model = opts.model()?;
    let sol = solve_adjustment(&model)?;
    let value = serde_json::to_value(sol).expect("solution serializes");
    opts.emit_json(with_spec_version(value))
}

fn cmd_approx(opts: &Opts) -> CliResult<()> {
    let model = opts.model()?;
    let u_max = opts.require_positive("u-max", opts.u_max.or(Some(DEFAULT_UMAX)))?;
    let step = match opts.step {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(invalid(format!("--step must be > 0, got {s}"))),
        None => u_max / DEFAULT_CELLS as f64,
    };
    let summary = CramerSummary::for_model(&model)?;
    let psi = solve_psi(&model, u_max, step)?;
    let dots = solve_dot_psi(&model, u_max, step)?;
    let (n1, n2) = match model.family() {
        Family::GammaSub => ("dpsi_a", "dpsi_b"),
        _ => ("dpsi_mu", "dpsi_lambda"),
    };
    let mut out: Box<dyn Write> = match &opts.out {
        None => Box::new(std::io::stdout().lock()),
        Some(path) => Box::new(
            std::fs::File::create(path)
                .map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
                .map(std::io::BufWriter::new)?,
        ),
    };
    let emit = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(out, "u,psi_cramer,psi_oracle,{n1},{n2},dpsi_D")?;
        for (i, v) in psi.values.iter().enumerate() {
            let u = i as f64 * psi.step;
            let cramer = ruinband::cramer::psi_cramer(summary.c_theta, summary.gamma, u);
            writeln!(
                out,
                "{u},{cramer},{v},{},{},{}",
                dots[0].values[i], dots[1].values[i], dots[2].values[i]
            )?;
        }
        Ok(())
    };
    emit(&mut out).map_err(|e| invalid(format!("write failed: {e}")))
}

fn cmd_ci(opts: &Opts) -> CliResult<()> {
    let obs = opts.observations()?;
    let c = opts.require_positive("c", opts.c)?;
    let u = opts.require_positive("u", opts.u)?;
    let report = estimate(&obs, c)?;
    let interval = build_interval_opts(&report, u, opts.level()?, opts.variant()?, opts.step)?;
    let value = serde_json::to_value(&interval).expect("interval serializes");
    opts.emit_json(with_spec_version(value))
}

fn cmd_coverage(opts: &Opts) -> CliResult<()> {
    let model = opts.model()?;
    let cfg = CoverageConfig {
        model,
        t: opts.require_positive("T", opts.horizon)?,
        u: opts.require_positive("u", opts.u)?,
        level: opts.level()?,
        replicates: opts
            .replicates
            .ok_or_else(|| invalid("--replicates is required"))?,
        seed: opts.seed()?,
        variant: opts.variant()?,
        grid_step: opts.h,
        threshold: opts.epsilon,
        workers: opts.workers,
    };
    let result = coverage_experiment(&cfg)?;
    if let Some(path) = &opts.csv_row {
        append_csv_row(path, &result)
            .map_err(|e| invalid(format!("cannot append {}: {e}", path.display())))?;
    }
    let value = serde_json::to_value(&result).expect("coverage result serializes");
    opts.emit_json(with_spec_version(value))
}

fn append_csv_row(path: &std::path::Path, result: &CoverageResult) -> std::io::Result<()> {
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(f, "{}", CoverageResult::csv_header())?;
    }
    writeln!(f, "{}", result.to_csv_row())
}

fn run(cli: Cli) -> CliResult<()> {
    let (mut opts, runner): (Opts, fn(&Opts) -> CliResult<()>) = match cli.command {
        Command::Simulate(o) => (o, cmd_simulate),
        Command::Estimate(o) => (o, cmd_estimate),
        Command::Lundberg(o) => (o, cmd_lundberg),
        Command::Approx(o) => (o, cmd_approx),
        Command::Ci(o) => (o, cmd_ci),
        Command::Coverage(o) => (o, cmd_coverage),
    };
    opts.merge_config()?;
    runner(&opts)
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(3);
        }
    }
}
