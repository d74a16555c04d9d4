//! Numerical solver for the defective renewal equation of the ruin
//! probability, `psi(u) = ∫_0^u psi(u-x) g(x) dx + h(u)`, and for its
//! parameter-differentiated version. This is the brute-force oracle against
//! which closed forms and asymptotics are tested.
//!
//! The scheme is trapezoidal Nyström marching from `u = 0`, solving for the
//! diagonal term at each node (order 2). The gamma subordinator's kernel has
//! an integrable log singularity at 0; its first cell is handled by product
//! integration with the exact cell moments of the kernel, which keeps the
//! order-2 convergence.

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec, ThetaGrad, DIM};
use serde::{Deserialize, Serialize};

/// Default grid resolution: `step = u_max / DEFAULT_CELLS`.
pub const DEFAULT_CELLS: usize = 4096;
/// Default horizon for grid solves.
pub const DEFAULT_UMAX: f64 = 30.0;

/// A function sampled on the uniform grid `{0, step, 2 step, ..., n step}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunction {
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn u_max(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    /// Value at `u` by linear interpolation between grid nodes.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(0.0..=self.u_max() + 1e-9 * self.step).contains(&u) {
            return Err(Error::Domain(format!(
                "u = {u} outside grid [0, {}]",
                self.u_max()
            )));
        }
        let t = (u / self.step).min((self.values.len() - 1) as f64);
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return Ok(*self.values.last().expect("non-empty grid"));
        }
        let w = t - i as f64;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }
}

/// Quadrature of one convolution kernel on the grid. Regular kernels use
/// plain trapezoid node values. The gamma family's log-singular kernel uses
/// product integration on every cell: the unknown function is interpolated
/// linearly across the cell and integrated against the exact kernel moments,
/// which keeps second order where the kernel's unbounded derivatives near 0
/// would drop plain trapezoid to first order.
enum GridKernel {
    Trapezoid {
        values: Vec<f64>,
    },
    /// `w_self[j]`, `w_prev[j]`: weights of `f[i-j]` and `f[i-j-1]` from the
    /// cell `[x_j, x_{j+1}]` in the convolution at node `i`.
    Product {
        w_self: Vec<f64>,
        w_prev: Vec<f64>,
    },
}

impl GridKernel {
    /// Build from node values or, when `cell_moments` is available (singular
    /// kernel), from exact per-cell moments.
    fn new(
        n: usize,
        step: f64,
        eval: impl Fn(f64) -> f64,
        cell_moments: Option<impl Fn(f64, f64) -> (f64, f64)>,
    ) -> GridKernel {
        match cell_moments {
            None => GridKernel::Trapezoid {
                values: (0..=n).map(|j| eval(j as f64 * step)).collect(),
            },
            Some(moments) => {
                let mut w_self = Vec::with_capacity(n);
                let mut w_prev = Vec::with_capacity(n);
                for j in 0..n {
                    let (m0, m1) = moments(j as f64 * step, (j + 1) as f64 * step);
                    w_self.push(m0 - m1 / step);
                    w_prev.push(m1 / step);
                }
                GridKernel::Product { w_self, w_prev }
            }
        }
    }

    /// Convolution `∫_0^{u_i} f(u_i - x) k(x) dx` for a known grid function.
    fn convolve_known(&self, f: &[f64], i: usize, step: f64) -> f64 {
        if i == 0 {
            return 0.0;
        }
        match self {
            GridKernel::Trapezoid { values } => {
                let mut acc = step * (0.5 * f[i] * values[0] + 0.5 * f[0] * values[i]);
                for j in 1..i {
                    acc += step * f[i - j] * values[j];
                }
                acc
            }
            GridKernel::Product { w_self, w_prev } => {
                let mut acc = 0.0;
                for j in 0..i {
                    acc += f[i - j] * w_self[j] + f[i - j - 1] * w_prev[j];
                }
                acc
            }
        }
    }

    /// Weight multiplying the unknown diagonal value `z_i` in the marching
    /// step, so that `z_i (1 - w) = forcing + known part`.
    fn diagonal_weight(&self, step: f64) -> f64 {
        match self {
            GridKernel::Trapezoid { values } => 0.5 * step * values[0],
            GridKernel::Product { w_self, .. } => w_self[0],
        }
    }

    /// One marching step: solve for `z_i` in
    /// `z_i = ∫_0^{u_i} z(u_i - x) k(x) dx + rhs_i` given `z_0..z_{i-1}`.
    fn march(&self, z: &[f64], i: usize, step: f64, rhs: f64) -> f64 {
        debug_assert!(i >= 1 && z.len() >= i);
        let mut acc = rhs;
        match self {
            GridKernel::Trapezoid { values } => {
                acc += step * 0.5 * z[0] * values[i];
                for j in 1..i {
                    acc += step * z[i - j] * values[j];
                }
            }
            GridKernel::Product { w_self, w_prev } => {
                acc += z[i - 1] * w_prev[0];
                for j in 1..i {
                    acc += z[i - j] * w_self[j] + z[i - j - 1] * w_prev[j];
                }
            }
        }
        acc / (1.0 - self.diagonal_weight(step))
    }
}

fn grid_dims(u_max: f64, step: f64) -> Result<(usize, f64)> {
    if !(u_max > 0.0) || !(step > 0.0) {
        return Err(Error::Validation(format!(
            "u_max and step must be > 0, got u_max = {u_max}, step = {step}"
        )));
    }
    if step > u_max / 100.0 {
        return Err(Error::StepTooCoarse { step, u_max });
    }
    let n = (u_max / step).round() as usize;
    Ok((n, u_max / n as f64))
}

/// Solve the defective renewal equation for the ruin probability on
/// `{0, step, ..., u_max}`: `psi(0) = h(0)` and trapezoidal marching above.
pub fn solve_psi(model: &ModelSpec, u_max: f64, step: f64) -> Result<GridFunction> {
    model.validate()?;
    model.require_npc()?;
    let (n, step) = grid_dims(u_max, step)?;
    let g = ladder_kernel(model, n, step);
    let mut psi = Vec::with_capacity(n + 1);
    psi.push(model.ladder_h(0.0));
    for i in 1..=n {
        let rhs = model.ladder_h(i as f64 * step);
        let next = g.march(&psi, i, step, rhs);
        psi.push(next);
    }
    Ok(GridFunction { step, values: psi })
}

fn ladder_kernel(model: &ModelSpec, n: usize, step: f64) -> GridKernel {
    let singular = model.ladder_g_cell_moments(step).is_some();
    GridKernel::new(
        n,
        step,
        |x| model.ladder_g(x),
        singular.then_some(|x0: f64, x1: f64| {
            model
                .ladder_g_cell_moments_on(x0, x1)
                .expect("singular kernel has moments")
        }),
    )
}

/// Solve the differentiated renewal equation for `psi_dot` componentwise:
/// same kernel `g`, forcing `h_dot + psi * g_dot` built from the solved
/// `psi` grid. Fixed-D families return an identically zero D-component.
pub fn solve_dot_psi(model: &ModelSpec, u_max: f64, step: f64) -> Result<[GridFunction; DIM]> {
    let psi = solve_psi(model, u_max, step)?;
    let (n, step) = grid_dims(u_max, step)?;
    let g = ladder_kernel(model, n, step);
    let grad_singular = model.grad_g_cell_moments_on(0.0, step);
    let free_d = model.family() == Family::PerturbedExp;

    let mut out: Vec<GridFunction> = Vec::with_capacity(DIM);
    for k in 0..DIM {
        if k == 2 && !free_d {
            out.push(GridFunction {
                step,
                values: vec![0.0; n + 1],
            });
            continue;
        }
        let gk = GridKernel::new(
            n,
            step,
            |x| model.grad_g(x)[k],
            grad_singular[k].map(|_| {
                move |x0: f64, x1: f64| {
                    model.grad_g_cell_moments_on(x0, x1)[k].expect("singular component")
                }
            }),
        );
        let mut dot = Vec::with_capacity(n + 1);
        dot.push(model.grad_h(0.0)[k]);
        for i in 1..=n {
            let u = i as f64 * step;
            let forcing = model.grad_h(u)[k] + gk.convolve_known(&psi.values, i, step);
            dot.push(g.march(&dot, i, step, forcing));
        }
        out.push(GridFunction { step, values: dot });
    }
    Ok(out.try_into().map_err(|_| ()).expect("DIM components"))
}

/// Central finite differences of `solve_psi` in each theta coordinate at a
/// fixed `u`. The independent cross-check for [`solve_dot_psi`].
pub fn finite_diff_dot_psi(model: &ModelSpec, u: f64, rel_step: f64) -> Result<ThetaGrad> {
    if !(1e-6..=1e-2).contains(&rel_step) {
        return Err(Error::Validation(format!(
            "rel_step must lie in [1e-6, 1e-2], got {rel_step}"
        )));
    }
    if !(u > 0.0) {
        return Err(Error::Validation(format!("u must be > 0, got {u}")));
    }
    let step = u / DEFAULT_CELLS as f64;
    let theta = model.theta();
    let free_d = model.family() == Family::PerturbedExp;
    let mut grad = [0.0; DIM];
    let psi_at = |m: &ModelSpec| -> Result<f64> {
        let grid = solve_psi(m, u, step)?;
        Ok(*grid.values.last().expect("non-empty grid"))
    };
    for k in 0..DIM {
        if k == 2 && !free_d {
            continue;
        }
        let base = theta.as_array()[k];
        let delta = rel_step * base;
        let up = psi_at(&model.with_theta(&theta.bumped(k, delta))?)?;
        let dn = psi_at(&model.with_theta(&theta.bumped(k, -delta))?)?;
        grad[k] = (up - dn) / (2.0 * delta);
    }
    Ok(grad)
}
