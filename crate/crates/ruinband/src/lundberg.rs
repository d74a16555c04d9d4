//! Adjustment-coefficient solver for the modified Lundberg equation
//! `kappa(r) = 0`, plus the asymptotic variance of the plug-in estimator
//! `gamma_hat = gamma_{theta_hat}`.

use crate::error::{Error, Result};
use crate::models::{ModelSpec, P};
use serde::{Deserialize, Serialize};

/// Relative clearance by which the bracket stays away from the pole.
const POLE_CLEARANCE: f64 = 1e-9;
/// Maximum refinement iterations of the safeguarded secant.
const MAX_ITER: usize = 200;

/// Root of the Lundberg equation together with solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LundbergSolution {
    /// Adjustment coefficient, the unique positive root of `kappa`.
    pub gamma: f64,
    /// `kappa(gamma)` at the returned root.
    pub residual: f64,
    /// Bracket enclosing the root when refinement stopped.
    pub bracket: (f64, f64),
    /// Refinement iterations used.
    pub iterations: usize,
}

/// Residual target: `|kappa(gamma)| <= 1e-12 * max(1, c*gamma)`.
fn residual_tol(c: f64, x: f64) -> f64 {
    1e-12 * (c * x).max(1.0)
}

/// Solve `kappa(r) = 0` for the unique positive root on `(0, U)` with
/// `U = min(c/D, pole)`. Under [NPC], `kappa` starts negative
/// (`kappa'(0) = m - c < 0`) and is strictly convex, so it crosses zero at
/// most once before the pole; the bracket expansion doubles toward `U` until
/// the sign change appears and a bisection-safeguarded secant (Illinois)
/// refines it.
pub fn solve_adjustment(model: &ModelSpec) -> Result<LundbergSolution> {
    model.validate()?;
    model.require_npc()?;

    let c = model.c();
    let d = model.d();
    let upper_raw = if d > 0.0 {
        model.mgf_pole().min(c / d)
    } else {
        model.mgf_pole()
    };
    let upper = upper_raw * (1.0 - POLE_CLEARANCE);

    // Expand [lo, hi] toward the pole until kappa(hi) > 0.
    let mut lo = 1e-12 * upper;
    let mut f_lo = model.kappa(lo)?;
    if f_lo >= 0.0 {
        // Only possible when NPC holds with a margin below rounding.
        return Err(Error::NoRoot {
            lo,
            hi: upper,
            context: "kappa not negative near 0; NPC margin below resolution".into(),
        });
    }
    let mut hi = 0.5 * upper;
    let mut f_hi = model.kappa(hi)?;
    let mut expand = 0;
    while f_hi <= 0.0 {
        expand += 1;
        if expand > 64 || upper - hi <= f64::EPSILON * upper {
            return Err(Error::NoRoot {
                lo,
                hi: upper,
                context: format!("kappa stays negative up to {hi} (defective case)"),
            });
        }
        lo = hi;
        f_lo = f_hi;
        hi = upper - 0.5 * (upper - hi);
        f_hi = model.kappa(hi)?;
    }

    // Illinois-modified regula falsi on the bracket. kappa also vanishes at
    // the trivial root r = 0 with kappa' < 0 there, so acceptance demands an
    // increasing crossing (kappa' > 0) and a converged Newton step, not just
    // a small residual.
    let mut iterations = 0usize;
    let mut last_side = 0i8;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) || iterations.is_multiple_of(8) {
            x = 0.5 * (lo + hi);
        }
        let f = model.kappa(x)?;
        let slope = model.kappa_prime_r(x)?;
        if f.abs() <= residual_tol(c, x) && slope > 0.0 && (f / slope).abs() <= 1e-9 * x {
            return Ok(LundbergSolution {
                gamma: x,
                residual: f,
                bracket: (lo, hi),
                iterations,
            });
        }
        if f < 0.0 {
            lo = x;
            f_lo = f;
            if last_side == -1 {
                f_hi *= 0.5;
            }
            last_side = -1;
        } else {
            hi = x;
            f_hi = f;
            if last_side == 1 {
                f_lo *= 0.5;
            }
            last_side = 1;
        }
        if hi - lo <= f64::EPSILON * hi {
            // Bracket pinched at floating resolution around the sign change.
            let x = 0.5 * (lo + hi);
            let f = model.kappa(x)?;
            if f.abs() <= residual_tol(c, x) {
                return Ok(LundbergSolution {
                    gamma: x,
                    residual: f,
                    bracket: (lo, hi),
                    iterations,
                });
            }
            break;
        }
    }
    Err(Error::NoRoot {
        lo,
        hi,
        context: format!("residual above tolerance after {iterations} iterations"),
    })
}

/// Asymptotic variance of `sqrt(T)(gamma_hat - gamma_0)`:
/// `grad_alpha kappa(gamma)^T Sigma grad_alpha kappa(gamma) / kappa'(gamma)^2`.
/// The squared denominator makes the sign convention of `kappa'` immaterial.
pub fn gamma_hat_variance(
    model: &ModelSpec,
    gamma: f64,
    sigma_alpha: &[[f64; P]; P],
) -> Result<f64> {
    let grad = model.grad_alpha_kappa(gamma)?;
    let kp = model.kappa_prime_r(gamma)?;
    if kp.abs() < 1e-10 {
        return Err(Error::DegenerateDenominator { value: kp.abs() });
    }
    let mut quad = 0.0;
    for i in 0..P {
        for j in 0..P {
            quad += grad[i] * sigma_alpha[i][j] * grad[j];
        }
    }
    Ok(quad / (kp * kp))
}
