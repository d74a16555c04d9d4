//! Cramér-type asymptotics: the constant `C` in `psi(u) ~ C e^{-gamma u}`,
//! the tilted mean `mu_theta`, the Laplace transform of the kernel gradient
//! at `-gamma`, the delta-method coefficient `zeta`, and the scale
//! `sigma*(theta, u)` used by the confidence intervals.
//!
//! Every quantity has two routes: a closed form assembled from the model's
//! Lévy moments and an adaptive-quadrature evaluation of the defining
//! integral. The exponential-claim families use the closed route in
//! production; the gamma subordinator (whose transform has no closed form
//! here) uses the quadrature route. Tests pin both routes together.

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec, ThetaGrad, DIM};
use crate::quad;
use serde::{Deserialize, Serialize};

/// Absolute tolerance for the production quadratures.
const QUAD_TOL: f64 = 1e-12;

/// All Cramér-level quantities for one model at its adjustment coefficient.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CramerSummary {
    /// Adjustment coefficient used to build the summary.
    pub gamma: f64,
    /// Cramér constant `C = (c - m) / (∫ z e^{gamma z} nu(dz) - c + 2 D gamma)`.
    pub c_theta: f64,
    /// Tilted mean `mu_theta = ∫ x e^{gamma x} g(x) dx`.
    pub mu_theta: f64,
    /// `L g'(-gamma) = ∫ e^{gamma x} grad_theta g(x) dx`, componentwise.
    pub laplace_grad_g: ThetaGrad,
    /// Delta-method coefficient `zeta = C * laplace_grad_g / mu_theta`.
    pub zeta: ThetaGrad,
}

/// Exponential decay rate of the tilted ladder integrands: the slowest
/// untilted rate is `min(pole, c/D)`, so after the `e^{gamma x}` tilt the
/// envelope decays at that rate minus `gamma` (positive whenever the
/// adjustment coefficient exists).
fn tilted_decay_rate(model: &ModelSpec, gamma: f64) -> f64 {
    let d = model.d();
    let raw = if d > 0.0 {
        model.mgf_pole().min(model.c() / d)
    } else {
        model.mgf_pole()
    };
    raw - gamma
}

/// Cramér constant via the general formula with the per-family closed form of
/// `∫ z e^{gamma z} nu(dz)`. For exponential claims in the classical model it
/// collapses to `lambda*mu/c`.
pub fn cramer_constant(model: &ModelSpec, gamma: f64) -> Result<f64> {
    if gamma >= model.mgf_pole() {
        return Err(Error::MomentDiverges {
            gamma,
            pole: model.mgf_pole(),
        });
    }
    let tilted = model.levy_tilted_mean(gamma)?;
    let denom = tilted - model.c() + 2.0 * model.d() * gamma;
    Ok((model.c() - model.levy_mean()) / denom)
}

/// Cramér approximation `psi(u) ≈ C e^{-gamma u}`.
pub fn psi_cramer(c_theta: f64, gamma: f64, u: f64) -> f64 {
    c_theta * (-gamma * u).exp()
}

/// Tilted mean by adaptive quadrature of `x e^{gamma x} g(x)` on `[0, x_max]`
/// with an analytic exponential tail bound.
pub fn mu_theta(model: &ModelSpec, gamma: f64) -> Result<f64> {
    let rate = tilted_decay_rate(model, gamma);
    quad::integrate_semi_infinite(|x| x * model.tilted_ladder_g(gamma, x), 0.0, rate, QUAD_TOL)
}

/// Closed form of the tilted mean, from integrating the defining convolution:
/// `mu_theta = (∫ z e^{gamma z} nu(dz) - c + 2 D gamma) / (gamma (c - D gamma))`.
pub fn mu_theta_closed(model: &ModelSpec, gamma: f64) -> Result<f64> {
    let tilted = model.levy_tilted_mean(gamma)?;
    let (c, d) = (model.c(), model.d());
    Ok((tilted - c + 2.0 * d * gamma) / (gamma * (c - d * gamma)))
}

/// `∫ e^{gamma x} grad_theta g(x) dx` componentwise by adaptive quadrature.
/// Components that are identically zero (the D-slot of fixed-D families) stay
/// exactly zero.
pub fn laplace_grad_g(model: &ModelSpec, gamma: f64) -> Result<ThetaGrad> {
    let rate = tilted_decay_rate(model, gamma);
    let mut out = [0.0; DIM];
    let zero = match model.family() {
        Family::PerturbedExp => [false; DIM],
        _ => [false, false, true],
    };
    for k in 0..DIM {
        if zero[k] {
            continue;
        }
        out[k] = quad::integrate_semi_infinite(
            |x| model.tilted_grad_g(gamma, x)[k],
            0.0,
            rate,
            QUAD_TOL,
        )?;
    }
    Ok(out)
}

/// Closed `(L_mu, L_lambda, L_D)` for the exponential-claim families, via the
/// resolvents `p_mu = (1/mu - gamma)^{-1}` and `p_D = (c/D - gamma)^{-1}`.
/// `None` for the gamma subordinator.
pub fn laplace_grad_g_closed(model: &ModelSpec, gamma: f64) -> Option<ThetaGrad> {
    match *model {
        ModelSpec::ClassicalExp { c, mu, lambda } => {
            let p_mu = 1.0 / (1.0 / mu - gamma);
            Some([lambda / (c * mu * mu) * p_mu * p_mu, p_mu / c, 0.0])
        }
        ModelSpec::PerturbedExp { c, mu, lambda, d } => {
            let p_mu = 1.0 / (1.0 / mu - gamma);
            let p_d = 1.0 / (c / d - gamma);
            let w = c * mu - d;
            let l_mu = lambda / (mu * w) * p_mu * p_mu + lambda * d / (w * w) * (p_d - p_mu);
            let l_lambda = mu / w * (p_mu - p_d);
            let l_d =
                lambda * mu / (w * w) * (p_mu - p_d) - lambda * mu * c / (d * d * w) * p_d * p_d;
            Some([l_mu, l_lambda, l_d])
        }
        ModelSpec::GammaSub { .. } => None,
    }
}

/// Closed tilted mean for the perturbed family in resolvent form,
/// `mu_theta = lambda mu / (c mu - D) * (p_mu^2 - p_D^2)`; agrees with
/// [`mu_theta_closed`] and with the quadrature route.
pub fn mu_theta_perturbed_resolvent(model: &ModelSpec, gamma: f64) -> Option<f64> {
    match *model {
        ModelSpec::PerturbedExp { c, mu, lambda, d } => {
            let p_mu = 1.0 / (1.0 / mu - gamma);
            let p_d = 1.0 / (c / d - gamma);
            Some(lambda * mu / (c * mu - d) * (p_mu * p_mu - p_d * p_d))
        }
        _ => None,
    }
}

/// Delta-method coefficient `zeta(theta) = C mu^{-1} L g'(-gamma)`, solving
/// the Lundberg equation internally.
pub fn zeta(model: &ModelSpec) -> Result<ThetaGrad> {
    Ok(CramerSummary::for_model(model)?.zeta)
}

impl CramerSummary {
    /// Assemble the summary at a solved adjustment coefficient. Exponential
    /// families take the closed route; the gamma subordinator evaluates the
    /// transform and tilted mean purely by quadrature.
    pub fn compute(model: &ModelSpec, gamma: f64) -> Result<CramerSummary> {
        let c_theta = cramer_constant(model, gamma)?;
        let (mu, lap) = match model.family() {
            Family::ClassicalExp | Family::PerturbedExp => {
                let mu = mu_theta_closed(model, gamma)?;
                let lap = laplace_grad_g_closed(model, gamma).expect("closed form exists");
                (mu, lap)
            }
            Family::GammaSub => (mu_theta(model, gamma)?, laplace_grad_g(model, gamma)?),
        };
        let mut zeta = [0.0; DIM];
        for k in 0..DIM {
            zeta[k] = c_theta * lap[k] / mu;
        }
        Ok(CramerSummary {
            gamma,
            c_theta,
            mu_theta: mu,
            laplace_grad_g: lap,
            zeta,
        })
    }

    /// Solve the Lundberg equation and assemble the summary in one step.
    pub fn for_model(model: &ModelSpec) -> Result<CramerSummary> {
        let sol = crate::lundberg::solve_adjustment(model)?;
        Self::compute(model, sol.gamma)
    }

    /// Asymptote `psi_dot(u) ≈ zeta * u * e^{-gamma u}` componentwise.
    pub fn dot_psi_asymptotic(&self, u: f64) -> ThetaGrad {
        let scale = u * (-self.gamma * u).exp();
        let mut out = self.zeta;
        for v in &mut out {
            *v *= scale;
        }
        out
    }

    /// Asymptote `psi_ddot(u) ≈ C [mu^{-1} L g'(-gamma)]^{⊗2} u^2 e^{-gamma u}`,
    /// i.e. the rank-one matrix `zeta zeta^T / C` times `u^2 e^{-gamma u}`.
    pub fn ddot_psi_asymptotic(&self, u: f64) -> [[f64; DIM]; DIM] {
        let scale = u * u * (-self.gamma * u).exp() / self.c_theta;
        let mut out = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                out[i][j] = self.zeta[i] * self.zeta[j] * scale;
            }
        }
        out
    }

    /// Prefactor `[zeta^T Sigma* zeta]^{1/2}` of the delta-method scale.
    pub fn sigma_star_prefactor(&self, sigma_star: &[[f64; DIM]; DIM]) -> Result<f64> {
        let mut q = 0.0;
        for i in 0..DIM {
            for j in 0..DIM {
                q += self.zeta[i] * sigma_star[i][j] * self.zeta[j];
            }
        }
        if q < -1e-14 {
            return Err(Error::NegativeQuadForm { value: q });
        }
        Ok(q.max(0.0).sqrt())
    }

    /// Full scale `sigma*(theta, u) = [zeta^T Sigma* zeta]^{1/2} u e^{-gamma u}`.
    pub fn sigma_star(&self, sigma_star: &[[f64; DIM]; DIM], u: f64) -> Result<f64> {
        Ok(self.sigma_star_prefactor(sigma_star)? * u * (-self.gamma * u).exp())
    }
}
