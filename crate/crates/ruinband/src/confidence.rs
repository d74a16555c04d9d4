//! Delta-method asymptotic confidence intervals for the ruin probability and
//! Monte Carlo coverage experiments validating them.
//!
//! Two variants: `J` centers the interval on the Cramér approximation
//! `C e^{-gamma u}` at the estimated parameters (the practical default);
//! `I` centers it on the renewal-oracle value of `psi` at the estimated
//! parameters. Both use half width `z_{alpha/2} sigma*(theta_hat, u)/sqrt(T)`.

use crate::cramer::{psi_cramer, CramerSummary};
use crate::error::{Error, Result};
use crate::estimate::{estimate, EstimateReport};
use crate::lundberg::{solve_adjustment, LundbergSolution};
use crate::models::{Family, ModelSpec};
use crate::renewal::solve_psi;
use crate::simulate::{
    replicate_rng, simulate_classical_with, simulate_gamma_jumps_with, simulate_perturbed_with,
};
use crate::special::z_two_sided;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Grid cells for the renewal oracle behind the `I` variant.
const ORACLE_CELLS: usize = 4096;
/// Finer grid for the true-psi reference inside coverage runs.
const REFERENCE_CELLS: usize = 8192;

/// Interval construction variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalVariant {
    /// Center on the renewal-oracle `psi_{theta_hat}(u)`.
    I,
    /// Center on the Cramér approximation `C e^{-gamma u}` (practical default).
    J,
}

impl std::str::FromStr for IntervalVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" => Ok(IntervalVariant::I),
            "J" => Ok(IntervalVariant::J),
            other => Err(Error::Validation(format!(
                "unknown interval variant '{other}'"
            ))),
        }
    }
}

/// A delta-method confidence interval with all intermediate estimates.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub variant: IntervalVariant,
    pub u: f64,
    pub level: f64,
    pub center: f64,
    pub half_width: f64,
    /// Raw endpoints `center -+ half_width`; `lo` may be negative.
    pub lo: f64,
    pub hi: f64,
    /// Endpoints clipped to [0, 1], reported alongside the raw pair.
    pub lo_clipped: f64,
    pub hi_clipped: f64,
    /// `sigma*(theta_hat, u)` used in the half width.
    pub sigma_star: f64,
    /// Set when `u/sqrt(T) > 0.5`, where the asymptotic regime
    /// (`u_T -> ∞`, `u_T/sqrt(T) -> 0`) is doubtful.
    pub asymptotic_regime_warning: bool,
    pub estimate: EstimateReport,
    pub lundberg: LundbergSolution,
    pub cramer: CramerSummary,
}

/// Build the interval at the estimated parameters.
pub fn build_interval(
    est: &EstimateReport,
    u: f64,
    level: f64,
    variant: IntervalVariant,
) -> Result<IntervalReport> {
    build_interval_opts(est, u, level, variant, None)
}

/// As [`build_interval`], with an override for the oracle grid step used by
/// the `I` variant.
pub fn build_interval_opts(
    est: &EstimateReport,
    u: f64,
    level: f64,
    variant: IntervalVariant,
    oracle_step: Option<f64>,
) -> Result<IntervalReport> {
    if !(u > 0.0) {
        return Err(Error::Validation(format!("u must be > 0, got {u}")));
    }
    if !(est.horizon > 0.0) {
        return Err(Error::Validation(
            "estimate carries a non-positive horizon".into(),
        ));
    }
    let model = est.model;
    if !model.npc_check() {
        return Err(Error::NpcViolatedAtEstimate {
            c: model.c(),
            m: model.levy_mean(),
        });
    }
    let z = z_two_sided(level)?;
    let lundberg = solve_adjustment(&model)?;
    let cramer = CramerSummary::compute(&model, lundberg.gamma)?;
    let sigma_star = cramer.sigma_star(&est.sigma_star_matrix(), u)?;
    let half_width = z * sigma_star / est.horizon.sqrt();
    let center = match variant {
        IntervalVariant::J => psi_cramer(cramer.c_theta, lundberg.gamma, u),
        IntervalVariant::I => {
            let step = oracle_step.unwrap_or(u / ORACLE_CELLS as f64);
            let grid = solve_psi(&model, u, step)?;
            *grid.values.last().expect("non-empty grid")
        }
    };
    let (lo, hi) = (center - half_width, center + half_width);
    Ok(IntervalReport {
        variant,
        u,
        level,
        center,
        half_width,
        lo,
        hi,
        lo_clipped: lo.clamp(0.0, 1.0),
        hi_clipped: hi.clamp(0.0, 1.0),
        sigma_star,
        asymptotic_regime_warning: u / est.horizon.sqrt() > 0.5,
        estimate: est.clone(),
        lundberg,
        cramer,
    })
}

/// Configuration of a Monte Carlo coverage experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageConfig {
    /// True model generating the data.
    pub model: ModelSpec,
    /// Horizon per replicate.
    pub t: f64,
    /// Initial capital the interval targets.
    pub u: f64,
    /// Nominal confidence level.
    pub level: f64,
    pub replicates: usize,
    /// Master seed; replicate `i` draws from stream `i`.
    pub seed: u64,
    pub variant: IntervalVariant,
    /// Surplus grid step (required for the perturbed family).
    pub grid_step: Option<f64>,
    /// Jump threshold (required for the gamma family).
    pub threshold: Option<f64>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// Outcome of a coverage experiment.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageResult {
    pub replicates: usize,
    /// Replicates whose pipeline completed.
    pub completed: usize,
    pub hits: usize,
    /// Replicates dropped because some stage errored (counted, not fatal).
    pub failures: usize,
    /// `hits / completed`.
    pub coverage: f64,
    pub nominal: f64,
    /// True `psi_{theta_0}(u)` the intervals are tested against.
    pub true_psi: f64,
    pub failure_example: Option<String>,
    pub config: CoverageConfig,
}

impl CoverageResult {
    pub fn csv_header() -> &'static str {
        "family,c,alpha1,alpha2,D,T,u,level,variant,replicates,completed,hits,failures,coverage,true_psi,seed"
    }

    /// One-line CSV row for sweep scripts.
    pub fn to_csv_row(&self) -> String {
        let m = &self.config.model;
        let a = m.alpha();
        format!(
            "{},{},{},{},{},{},{},{},{:?},{},{},{},{},{},{},{}",
            m.family(),
            m.c(),
            a[0],
            a[1],
            m.d(),
            self.config.t,
            self.config.u,
            self.nominal,
            self.config.variant,
            self.replicates,
            self.completed,
            self.hits,
            self.failures,
            self.coverage,
            self.true_psi,
            self.config.seed,
        )
    }
}

/// True ruin probability at the experiment's model: the classical family has
/// the exact closed form `(lambda mu / c) e^{-gamma u}`; the others use the
/// renewal oracle on a grid fine enough that the reference error is far below
/// any interval width.
fn true_psi(model: &ModelSpec, u: f64) -> Result<f64> {
    match *model {
        ModelSpec::ClassicalExp { c, mu, lambda } => {
            let gamma = 1.0 / mu - lambda / c;
            Ok(lambda * mu / c * (-gamma * u).exp())
        }
        _ => {
            let grid = solve_psi(model, u, u / REFERENCE_CELLS as f64)?;
            Ok(*grid.values.last().expect("non-empty grid"))
        }
    }
}

/// Run the coverage experiment: for every replicate simulate, estimate, build
/// the interval, and test whether the true `psi_{theta_0}(u)` lies inside the
/// raw interval. Per-replicate failures are counted and dropped. Replicate
/// RNG streams make the result independent of the worker count.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageResult> {
    cfg.model.validate()?;
    cfg.model.require_npc()?;
    if cfg.replicates < 100 {
        return Err(Error::Validation(format!(
            "coverage needs at least 100 replicates, got {}",
            cfg.replicates
        )));
    }
    if !(cfg.t > 0.0) || !(cfg.u > 0.0) {
        return Err(Error::Validation("T and u must be > 0".into()));
    }
    match cfg.model.family() {
        Family::PerturbedExp if cfg.grid_step.is_none() => {
            return Err(Error::Validation(
                "perturbed-family coverage requires a grid step".into(),
            ))
        }
        Family::GammaSub if cfg.threshold.is_none() => {
            return Err(Error::Validation(
                "gamma-family coverage requires a threshold".into(),
            ))
        }
        _ => {}
    }

    let psi0 = true_psi(&cfg.model, cfg.u)?;
    let run_replicate = |rep: usize| -> Result<bool> {
        let mut rng = replicate_rng(cfg.seed, rep as u64);
        let obs = match cfg.model.family() {
            Family::ClassicalExp => simulate_classical_with(&cfg.model, cfg.t, &mut rng, cfg.seed)?,
            Family::PerturbedExp => simulate_perturbed_with(
                &cfg.model,
                cfg.t,
                cfg.grid_step.expect("checked above"),
                &mut rng,
                cfg.seed,
            )?,
            Family::GammaSub => simulate_gamma_jumps_with(
                &cfg.model,
                cfg.t,
                cfg.threshold.expect("checked above"),
                &mut rng,
                cfg.seed,
            )?,
        };
        let est = estimate(&obs, cfg.model.c())?;
        let interval = build_interval(&est, cfg.u, cfg.level, cfg.variant)?;
        Ok(interval.lo <= psi0 && psi0 <= interval.hi)
    };

    let outcomes: Vec<Result<bool>> = match cfg.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| {
                    Error::Validation(format!("cannot build worker pool of size {w}: {e}"))
                })?;
            pool.install(|| {
                (0..cfg.replicates)
                    .into_par_iter()
                    .map(run_replicate)
                    .collect()
            })
        }
        None => (0..cfg.replicates)
            .into_par_iter()
            .map(run_replicate)
            .collect(),
    };

    // Deterministic reduction in replicate order.
    let mut hits = 0usize;
    let mut failures = 0usize;
    let mut failure_example = None;
    for out in outcomes {
        match out {
            Ok(true) => hits += 1,
            Ok(false) => {}
            Err(e) => {
                failures += 1;
                failure_example.get_or_insert_with(|| e.to_string());
            }
        }
    }
    let completed = cfg.replicates - failures;
    Ok(CoverageResult {
        replicates: cfg.replicates,
        completed,
        hits,
        failures,
        coverage: if completed > 0 {
            hits as f64 / completed as f64
        } else {
            0.0
        },
        nominal: cfg.level,
        true_psi: psi0,
        failure_example,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_classical;

    fn classical_truth_estimate(t: f64) -> EstimateReport {
        // theta_hat pinned to the truth c=2, lambda=1, mu=1.
        EstimateReport {
            model: ModelSpec::ClassicalExp {
                c: 2.0,
                mu: 1.0,
                lambda: 1.0,
            },
            sigma_hat: [[1.0, 0.0], [0.0, 1.0]],
            horizon: t,
            iterations: 0,
            residual: 0.0,
            clamped_d: false,
        }
    }

    #[test]
    fn interval_example_from_closed_forms() {
        // J at truth, T = 1e4, u = 5: center (lambda mu/c) e^{-2.5} and
        // half width z * (lambda/c) sqrt(1 + lambda mu^2/c^2) * 5 e^{-2.5}/100,
        // frozen from a 30-digit evaluation.
        let est = classical_truth_estimate(10_000.0);
        let rep = build_interval(&est, 5.0, 0.95, IntervalVariant::J).unwrap();
        assert!(
            (rep.center - 0.041_042_499_311_949_4).abs() < 1e-12,
            "center = {}",
            rep.center
        );
        assert!(
            (rep.half_width - 0.004_496_834_471_065_311).abs() < 1e-9,
            "half_width = {}",
            rep.half_width
        );
        assert_eq!(rep.lo, rep.center - rep.half_width);
        assert_eq!(rep.hi, rep.center + rep.half_width);
        assert!(!rep.asymptotic_regime_warning);
    }

    #[test]
    fn zero_covariance_degenerates_the_interval() {
        let mut est = classical_truth_estimate(10_000.0);
        est.sigma_hat = [[0.0; 2]; 2];
        let rep = build_interval(&est, 5.0, 0.95, IntervalVariant::J).unwrap();
        assert_eq!(rep.half_width, 0.0);
        assert_eq!(rep.lo, rep.hi);
    }

    #[test]
    fn raw_and_clipped_endpoints() {
        // Tiny T blows the width past 0: raw lo < 0, clipped lo = 0, and
        // u/sqrt(T) = 1/sqrt(3) > 0.5 flags the asymptotic-regime warning.
        let est = classical_truth_estimate(3.0);
        let rep = build_interval(&est, 1.0, 0.95, IntervalVariant::J).unwrap();
        assert!(rep.lo < 0.0, "lo = {}", rep.lo);
        assert_eq!(rep.lo_clipped, 0.0);
        assert!(rep.hi_clipped <= 1.0);
        assert!(rep.asymptotic_regime_warning);
    }

    #[test]
    fn npc_violation_at_estimate_is_reported() {
        let mut est = classical_truth_estimate(100.0);
        est.model = ModelSpec::ClassicalExp {
            c: 2.0,
            mu: 2.0,
            lambda: 1.5,
        };
        assert!(matches!(
            build_interval(&est, 5.0, 0.95, IntervalVariant::J),
            Err(Error::NpcViolatedAtEstimate { .. })
        ));
    }

    #[test]
    fn variant_centers_agree_for_classical() {
        // J equals the Cramér value exactly; I is the oracle value; for
        // exponential claims they coincide within the oracle tolerance.
        let est = classical_truth_estimate(10_000.0);
        let j = build_interval(&est, 5.0, 0.95, IntervalVariant::J).unwrap();
        let i = build_interval(&est, 5.0, 0.95, IntervalVariant::I).unwrap();
        assert_eq!(
            j.center,
            psi_cramer(j.cramer.c_theta, j.lundberg.gamma, 5.0)
        );
        assert!(
            (i.center - j.center).abs() < 1e-4,
            "I = {}, J = {}",
            i.center,
            j.center
        );
        // Same sigma*, so same width.
        assert_eq!(i.half_width, j.half_width);
    }

    #[test]
    fn width_scales_as_one_over_sqrt_t() {
        let mut est = classical_truth_estimate(2500.0);
        let w1 = build_interval(&est, 5.0, 0.95, IntervalVariant::J)
            .unwrap()
            .half_width;
        est.horizon = 10_000.0;
        let w2 = build_interval(&est, 5.0, 0.95, IntervalVariant::J)
            .unwrap()
            .half_width;
        assert!(
            (w1 * 2500.0f64.sqrt() - w2 * 10_000.0f64.sqrt()).abs() < 1e-15,
            "w1 = {w1}, w2 = {w2}"
        );
    }

    #[test]
    fn coverage_requires_replicates() {
        let cfg = CoverageConfig {
            model: ModelSpec::ClassicalExp {
                c: 2.0,
                mu: 1.0,
                lambda: 1.0,
            },
            t: 400.0,
            u: 2.0,
            level: 0.9,
            replicates: 0,
            seed: 1,
            variant: IntervalVariant::J,
            grid_step: None,
            threshold: None,
            workers: None,
        };
        assert!(coverage_experiment(&cfg).is_err());
    }

    #[test]
    fn coverage_is_deterministic_and_monotone_in_level() {
        let mut cfg = CoverageConfig {
            model: ModelSpec::ClassicalExp {
                c: 2.0,
                mu: 1.0,
                lambda: 1.0,
            },
            t: 400.0,
            u: 2.0,
            level: 0.8,
            replicates: 120,
            seed: 99,
            variant: IntervalVariant::J,
            grid_step: None,
            threshold: None,
            workers: Some(2),
        };
        let r80 = coverage_experiment(&cfg).unwrap();
        let again = coverage_experiment(&cfg).unwrap();
        assert_eq!(r80.hits, again.hits, "same seed set must reproduce exactly");
        assert!(r80.hits <= r80.replicates);

        cfg.level = 0.9;
        let r90 = coverage_experiment(&cfg).unwrap();
        cfg.level = 0.95;
        let r95 = coverage_experiment(&cfg).unwrap();
        // Nested intervals on the identical seed set: hits cannot decrease.
        assert!(r80.hits <= r90.hits && r90.hits <= r95.hits);
        // Sanity: not everything degenerate.
        assert!(r95.coverage > 0.5 && r80.coverage < 1.0);
    }

    #[test]
    fn coverage_worker_count_does_not_change_the_outcome() {
        let mut cfg = CoverageConfig {
            model: ModelSpec::ClassicalExp {
                c: 2.0,
                mu: 1.0,
                lambda: 1.0,
            },
            t: 300.0,
            u: 2.0,
            level: 0.9,
            replicates: 100,
            seed: 5,
            variant: IntervalVariant::J,
            grid_step: None,
            threshold: None,
            workers: Some(1),
        };
        let serial = coverage_experiment(&cfg).unwrap();
        cfg.workers = Some(4);
        let parallel = coverage_experiment(&cfg).unwrap();
        assert_eq!(serial.hits, parallel.hits);
        assert_eq!(serial.failures, parallel.failures);
    }

    #[test]
    fn coverage_runs_end_to_end_for_gamma_and_perturbed() {
        // Exercises the family-specific pipelines per replicate: gamma MLE
        // with the quadrature-path Cramér summary, and the perturbed
        // estimator with its quadratic-variation diffusion recovery.
        let gamma_cfg = CoverageConfig {
            model: ModelSpec::GammaSub {
                c: 1.5,
                a: 1.0,
                b: 1.0,
            },
            t: 2000.0,
            u: 2.0,
            level: 0.9,
            replicates: 100,
            seed: 21,
            variant: IntervalVariant::J,
            grid_step: None,
            threshold: Some(0.5),
            workers: Some(4),
        };
        let r = coverage_experiment(&gamma_cfg).unwrap();
        assert!(
            r.failures < 10,
            "failures = {} ({:?})",
            r.failures,
            r.failure_example
        );
        assert!(
            r.coverage > 0.3 && r.coverage <= 1.0,
            "coverage = {}",
            r.coverage
        );
        assert!(r.true_psi > 0.0 && r.true_psi < 1.0);

        let perturbed_cfg = CoverageConfig {
            model: ModelSpec::PerturbedExp {
                c: 2.0,
                mu: 1.0,
                lambda: 1.0,
                d: 0.4,
            },
            t: 500.0,
            u: 2.0,
            level: 0.9,
            replicates: 100,
            seed: 22,
            variant: IntervalVariant::J,
            grid_step: Some(0.02),
            threshold: None,
            workers: Some(4),
        };
        let r = coverage_experiment(&perturbed_cfg).unwrap();
        assert!(
            r.failures < 10,
            "failures = {} ({:?})",
            r.failures,
            r.failure_example
        );
        assert!(
            r.coverage > 0.3 && r.coverage <= 1.0,
            "coverage = {}",
            r.coverage
        );

        // Required knobs are enforced.
        let mut missing = perturbed_cfg.clone();
        missing.grid_step = None;
        assert!(coverage_experiment(&missing).is_err());
        let mut missing = gamma_cfg.clone();
        missing.threshold = None;
        assert!(coverage_experiment(&missing).is_err());
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let cfg = CoverageConfig {
            model: ModelSpec::GammaSub {
                c: 1.0,
                a: 1.0,
                b: 2.0,
            },
            t: 500.0,
            u: 2.0,
            level: 0.9,
            replicates: 100,
            seed: 3,
            variant: IntervalVariant::J,
            grid_step: None,
            threshold: Some(0.5),
            workers: Some(2),
        };
        let res = coverage_experiment(&cfg).unwrap();
        let header_fields = CoverageResult::csv_header().split(',').count();
        let row_fields = res.to_csv_row().split(',').count();
        assert_eq!(header_fields, row_fields);
        assert!(res.completed + res.failures == res.replicates);
    }

    #[test]
    fn interval_report_serializes_with_inputs() {
        let m = ModelSpec::ClassicalExp {
            c: 2.0,
            mu: 1.0,
            lambda: 1.0,
        };
        let obs = simulate_classical(&m, 2000.0, 17).unwrap();
        let est = estimate(&obs, 2.0).unwrap();
        let rep = build_interval(&est, 3.0, 0.9, IntervalVariant::J).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        for key in [
            "variant",
            "u",
            "level",
            "center",
            "half_width",
            "lo",
            "hi",
            "estimate",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }
}
