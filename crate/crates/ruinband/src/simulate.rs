//! Synthetic observation sets per model family: claim arrivals and sizes,
//! discrete-grid surplus observations with diffusion increments, and
//! thresholded jumps of the gamma subordinator.
//!
//! Reproducibility: every replicate draws from its own counter-based ChaCha
//! stream derived from `(master seed, replicate index)`, so Monte Carlo
//! experiments parallelize without losing determinism.

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::special::e1_unchecked;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use std::io::Write;
use std::path::Path;

/// One simulated (or ingested) data set from a surplus model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    /// Family the data was generated from (or is assumed to follow).
    pub family: Family,
    /// Observation horizon `T`.
    pub horizon: f64,
    /// Grid spacing `h` of the surplus observations, when present.
    pub grid_step: Option<f64>,
    /// Claim/jump records `(time, size)`, times strictly increasing in `[0, T]`.
    pub claims: Vec<(f64, f64)>,
    /// Surplus values `R_{ih}` for `i = 0..=n`, when observed on a grid.
    pub grid_obs: Option<Vec<f64>>,
    /// Jump observation threshold `epsilon` (0 for fully observed claims).
    pub threshold: f64,
    /// Seed the set was generated from (0 when ingested from files).
    pub seed: u64,
}

/// Counter-based stream for replicate `index` of a master seed. Streams are
/// independent, so replicate results do not depend on scheduling order.
pub fn replicate_rng(master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn check_horizon(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Validation(format!(
            "horizon T must be >= 0, got {t}"
        )));
    }
    Ok(())
}

/// Poisson arrivals on `[0, t]` as sorted uniform order statistics.
fn poisson_arrivals(rate: f64, t: f64, rng: &mut ChaCha12Rng) -> Vec<f64> {
    if t == 0.0 || rate == 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(rate * t).expect("positive rate").sample(rng) as usize;
    let mut times: Vec<f64> = (0..n).map(|_| t * rng.random::<f64>()).collect();
    times.sort_unstable_by(|a, b| a.total_cmp(b));
    times
}

/// Simulate the classical compound Poisson model: Poisson(lambda T) claims,
/// arrival times as uniform order statistics, sizes iid Exp(mean mu).
pub fn simulate_classical(model: &ModelSpec, t: f64, seed: u64) -> Result<ObservationSet> {
    let mut rng = replicate_rng(seed, 0);
    simulate_classical_with(model, t, &mut rng, seed)
}

/// As [`simulate_classical`] but drawing from a caller-supplied stream, for
/// replicate-parallel experiments.
pub fn simulate_classical_with(
    model: &ModelSpec,
    t: f64,
    rng: &mut ChaCha12Rng,
    seed_label: u64,
) -> Result<ObservationSet> {
    let ModelSpec::ClassicalExp { mu, lambda, .. } = *model else {
        return Err(Error::Validation(
            "simulate_classical requires a classical-exp model".into(),
        ));
    };
    model.validate()?;
    check_horizon(t)?;
    let claims = draw_exp_claims(mu, lambda, t, rng);
    Ok(ObservationSet {
        family: Family::ClassicalExp,
        horizon: t,
        grid_step: None,
        claims,
        grid_obs: None,
        threshold: 0.0,
        seed: seed_label,
    })
}

fn draw_exp_claims(mu: f64, lambda: f64, t: f64, rng: &mut ChaCha12Rng) -> Vec<(f64, f64)> {
    let times = poisson_arrivals(lambda, t, rng);
    let size_dist = Exp::new(1.0 / mu).expect("positive rate");
    times
        .into_iter()
        .map(|ti| (ti, size_dist.sample(rng)))
        .collect()
}

/// Simulate the diffusion-perturbed model under sampling scheme (I): all
/// jumps are observed, plus the surplus on the grid `{0, h, ..., nh}` with
/// exact Gaussian increments of variance `2 D h`. `u0 = 0`; estimators depend
/// only on increments and claims. A classical-exp model is accepted as the
/// degenerate `D = 0` case.
pub fn simulate_perturbed(model: &ModelSpec, t: f64, h: f64, seed: u64) -> Result<ObservationSet> {
    let mut rng = replicate_rng(seed, 0);
    simulate_perturbed_with(model, t, h, &mut rng, seed)
}

/// As [`simulate_perturbed`] but drawing from a caller-supplied stream.
pub fn simulate_perturbed_with(
    model: &ModelSpec,
    t: f64,
    h: f64,
    rng: &mut ChaCha12Rng,
    seed_label: u64,
) -> Result<ObservationSet> {
    let (mu, lambda, c, d) = match *model {
        ModelSpec::PerturbedExp { c, mu, lambda, d } => (mu, lambda, c, d),
        ModelSpec::ClassicalExp { c, mu, lambda } => (mu, lambda, c, 0.0),
        ModelSpec::GammaSub { .. } => {
            return Err(Error::Validation(
                "simulate_perturbed requires an exponential-claims model".into(),
            ))
        }
    };
    model.validate()?;
    check_horizon(t)?;
    if !(h > 0.0) {
        return Err(Error::Validation(format!(
            "grid step h must be > 0, got {h}"
        )));
    }
    let n = (t / h).round() as usize;
    if n == 0 {
        return Err(Error::Validation(format!(
            "T/h rounds to zero cells (T = {t}, h = {h})"
        )));
    }

    let claims = draw_exp_claims(mu, lambda, t, rng);

    let gauss = Normal::new(0.0, h.sqrt()).expect("positive std");
    let vol = (2.0 * d).sqrt();
    let mut grid = Vec::with_capacity(n + 1);
    let mut w = 0.0;
    let mut claim_idx = 0usize;
    let mut claim_sum = 0.0;
    grid.push(0.0); // u0 = 0
    for i in 1..=n {
        w += gauss.sample(rng);
        let ti = i as f64 * h;
        while claim_idx < claims.len() && claims[claim_idx].0 <= ti {
            claim_sum += claims[claim_idx].1;
            claim_idx += 1;
        }
        grid.push(c * ti + vol * w - claim_sum);
    }

    Ok(ObservationSet {
        family: model.family(),
        horizon: t,
        grid_step: Some(h),
        claims,
        grid_obs: Some(grid),
        threshold: 0.0,
        seed: seed_label,
    })
}

/// Inverse-CDF sampler for jump sizes of the gamma subordinator above a
/// threshold: density `z^{-1} e^{-bz} / E1(b eps)` on `(eps, ∞)`. A
/// precomputed monotone table of the log tail function brackets the inverse;
/// a few safeguarded Newton steps on `E1(bz) = target` polish it to 1e-12.
pub struct ThresholdJumpSampler {
    b: f64,
    eps: f64,
    zs: Vec<f64>,
    ln_tail: Vec<f64>,
    total_mass: f64,
}

impl ThresholdJumpSampler {
    pub fn new(a: f64, b: f64, eps: f64) -> Result<ThresholdJumpSampler> {
        if !(eps > 0.0) {
            return Err(Error::EpsilonZero);
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Validation(format!(
                "need a, b > 0, got a = {a}, b = {b}"
            )));
        }
        const TABLE: usize = 256;
        let z_hi = eps + 60.0 / b;
        let mut zs = Vec::with_capacity(TABLE + 1);
        let mut ln_tail = Vec::with_capacity(TABLE + 1);
        for k in 0..=TABLE {
            let z = eps + (z_hi - eps) * k as f64 / TABLE as f64;
            zs.push(z);
            ln_tail.push(e1_unchecked(b * z).ln());
        }
        Ok(ThresholdJumpSampler {
            b,
            eps,
            zs,
            ln_tail,
            total_mass: a * e1_unchecked(b * eps),
        })
    }

    /// Poisson intensity of observable jumps: `a * E1(b eps)`.
    pub fn intensity(&self) -> f64 {
        self.total_mass
    }

    /// Map a uniform variate in (0, 1) to a jump size.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        let u = u.clamp(1e-300, 1.0 - 1e-16);
        // Survival level: E1(b z) = u * E1(b eps); log-linear table lookup.
        let target_ln = u.ln() + self.ln_tail[0];
        if target_ln <= *self.ln_tail.last().expect("non-empty table") {
            return *self.zs.last().expect("non-empty table");
        }
        // ln_tail is strictly decreasing; find the bracketing cell.
        let idx = match self
            .ln_tail
            .binary_search_by(|v| target_ln.total_cmp(v).then(std::cmp::Ordering::Greater))
        {
            Ok(i) | Err(i) => i.clamp(1, self.ln_tail.len() - 1),
        };
        let (z_lo, z_hi) = (self.zs[idx - 1], self.zs[idx]);
        let (l_lo, l_hi) = (self.ln_tail[idx - 1], self.ln_tail[idx]);
        let mut z = z_lo + (z_hi - z_lo) * (target_ln - l_lo) / (l_hi - l_lo);
        // Newton on F(z) = E1(b z) - exp(target_ln); F'(z) = -e^{-bz}/z.
        let target = target_ln.exp();
        for _ in 0..40 {
            let f = e1_unchecked(self.b * z) - target;
            let fp = -(-self.b * z).exp() / z;
            let mut step = f / fp;
            if !step.is_finite() {
                break;
            }
            // Keep the iterate inside the bracketing cell.
            let next = (z - step).clamp(z_lo, z_hi);
            step = z - next;
            z = next;
            if step.abs() <= 1e-12 * z {
                break;
            }
        }
        z.max(self.eps)
    }
}

/// Simulate the thresholded jump record `J_Z(eps, ∞)` of the gamma
/// subordinator: Poisson(`T a E1(b eps)`) many jumps, sizes iid from the
/// normalized tail density.
pub fn simulate_gamma_jumps(
    model: &ModelSpec,
    t: f64,
    eps: f64,
    seed: u64,
) -> Result<ObservationSet> {
    let mut rng = replicate_rng(seed, 0);
    simulate_gamma_jumps_with(model, t, eps, &mut rng, seed)
}

/// As [`simulate_gamma_jumps`] but drawing from a caller-supplied stream.
pub fn simulate_gamma_jumps_with(
    model: &ModelSpec,
    t: f64,
    eps: f64,
    rng: &mut ChaCha12Rng,
    seed_label: u64,
) -> Result<ObservationSet> {
    let ModelSpec::GammaSub { a, b, .. } = *model else {
        return Err(Error::Validation(
            "simulate_gamma_jumps requires a gamma-sub model".into(),
        ));
    };
    model.validate()?;
    check_horizon(t)?;
    let sampler = ThresholdJumpSampler::new(a, b, eps)?;
    let times = poisson_arrivals(sampler.intensity(), t, rng);
    let claims: Vec<(f64, f64)> = times
        .into_iter()
        .map(|ti| (ti, sampler.sample_from_uniform(rng.random::<f64>())))
        .collect();
    Ok(ObservationSet {
        family: Family::GammaSub,
        horizon: t,
        grid_step: None,
        claims,
        grid_obs: None,
        threshold: eps,
        seed: seed_label,
    })
}

// ---------------------------------------------------------------------------
// CSV serialization: claims file (index,time,size), grid file (i,t,R).
// ---------------------------------------------------------------------------

impl ObservationSet {
    /// Write the claims CSV (`index,time,size`, header row, '.' decimals).
    pub fn write_claims_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "index,time,size")?;
        for (i, (t, s)) in self.claims.iter().enumerate() {
            writeln!(f, "{i},{t},{s}")?;
        }
        Ok(())
    }

    /// Write the grid CSV (`i,t,R`); error when no grid is present.
    pub fn write_grid_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let (h, grid) = match (self.grid_step, &self.grid_obs) {
            (Some(h), Some(g)) => (h, g),
            _ => return Err(Error::MissingGrid("observation set has no grid".into())),
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "i,t,R")?;
        for (i, r) in grid.iter().enumerate() {
            writeln!(f, "{i},{},{r}", i as f64 * h)?;
        }
        Ok(())
    }

    /// Read an observation set back from the CSV pair written above. The
    /// horizon, family, and threshold are not stored in the files and must be
    /// supplied by the caller.
    pub fn from_csv<P: AsRef<Path>>(
        family: Family,
        horizon: f64,
        threshold: f64,
        claims_path: P,
        grid_path: Option<P>,
    ) -> Result<ObservationSet> {
        check_horizon(horizon)?;
        let mut claims = Vec::new();
        let mut rdr = csv::Reader::from_path(claims_path)?;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::Io(format!(
                    "claims row has {} fields, need 3",
                    rec.len()
                )));
            }
            let t: f64 = parse_field(&rec[1], "time")?;
            let s: f64 = parse_field(&rec[2], "size")?;
            claims.push((t, s));
        }
        let (grid_step, grid_obs) = match grid_path {
            None => (None, None),
            Some(p) => {
                let mut rdr = csv::Reader::from_path(p)?;
                let mut ts = Vec::new();
                let mut rs = Vec::new();
                for rec in rdr.records() {
                    let rec = rec?;
                    if rec.len() < 3 {
                        return Err(Error::Io(format!(
                            "grid row has {} fields, need 3",
                            rec.len()
                        )));
                    }
                    ts.push(parse_field(&rec[1], "t")?);
                    rs.push(parse_field(&rec[2], "R")?);
                }
                if rs.len() < 2 {
                    return Err(Error::MissingGrid("grid file has fewer than 2 rows".into()));
                }
                let h = ts[1] - ts[0];
                if !(h > 0.0) {
                    return Err(Error::Io(format!(
                        "grid times must be strictly increasing, got step {h}"
                    )));
                }
                (Some(h), Some(rs))
            }
        };
        Ok(ObservationSet {
            family,
            horizon,
            grid_step,
            claims,
            grid_obs,
            threshold,
            seed: 0,
        })
    }
}

fn parse_field(s: &str, name: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Io(format!("bad {name} value '{s}': {e}")))
}
