//! Inner Lagrangian minimization over the box.
//!
//! For fixed multipliers `x >= 0` the inner problem
//! `min_{u in box} 1/2 u'Qu + (q + G'x)'u + x'g` is smooth and strongly
//! convex, so a constant-momentum accelerated projected gradient method
//! converges linearly. Every iteration produces a gradient-mapping bound on
//! the suboptimality of the projected point, which is used as the stopping
//! certificate.

use crate::error::{Error, Result};
use crate::problem::{NormalizedQp, ProblemConstants};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// target accuracy `L(u, x) - d(x) <= delta`
    pub delta: f64,
    pub max_iterations: usize,
    pub use_certified_stop: bool,
}

impl InnerConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            max_iterations: 1_000_000,
            use_certified_stop: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("inner accuracy must be positive, got {}", self.delta),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub u_tilde: Vec<f64>,
    /// projections onto the box performed
    pub iterations_used: usize,
    /// upper bound on `L(u_tilde, x) - d(x)`
    pub certificate_value: f64,
    pub certified: bool,
}

/// A-priori number of projections after which the accelerated method is
/// `delta`-accurate from any start in a box of diameter `r_p`.
pub fn inner_iteration_bound(delta: f64, r_p: f64, l_f: f64, sigma_f: f64) -> Result<usize> {
    if !r_p.is_finite() {
        return Err(Error::RequiresCompactBox {
            what: "inner iteration bound",
        });
    }
    for (name, v) in [("delta", delta), ("L_f", l_f), ("sigma_f", sigma_f)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be positive and finite, got {v}"),
            });
        }
    }
    let n = (l_f / sigma_f).sqrt() * (l_f * r_p * r_p / (2.0 * delta)).ln();
    Ok(if n.is_finite() && n >= 1.0 { n.floor() as usize } else { 1 })
}

/// Scratch buffers reused across inner solves. One per thread.
#[derive(Debug, Default, Clone)]
pub struct InnerWorkspace {
    lin: Vec<f64>,
    grad: Vec<f64>,
    u_prev: Vec<f64>,
    u_plus: Vec<f64>,
    v: Vec<f64>,
}

impl InnerWorkspace {
    pub fn new(n: usize) -> Self {
        let mut ws = Self::default();
        ws.resize(n);
        ws
    }

    fn resize(&mut self, n: usize) {
        for b in [&mut self.lin, &mut self.grad, &mut self.u_prev, &mut self.u_plus, &mut self.v] {
            b.resize(n, 0.0);
        }
    }
}

/// Writes `q + G'x` into `lin`.
fn linear_term(np: &NormalizedQp, x: &[f64], lin: &mut [f64]) {
    np.g_mat.mul_t_vec_into(x, lin);
    for (l, q) in lin.iter_mut().zip(&np.linear) {
        *l += q;
    }
}

/// One projected gradient step from `v`; returns the gradient-mapping bound.
fn gradient_map_step(
    np: &NormalizedQp,
    consts: &ProblemConstants,
    lin: &[f64],
    v: &[f64],
    grad: &mut [f64],
    u_plus: &mut [f64],
) -> f64 {
    np.hessian.mul_vec_into(v, grad);
    let step = 1.0 / consts.l_f;
    let (lb, ub) = (np.bounds.lb(), np.bounds.ub());
    let mut sq = 0.0;
    for i in 0..v.len() {
        let t = (v[i] - step * (grad[i] + lin[i])).max(lb[i]).min(ub[i]);
        let d = v[i] - t;
        sq += d * d;
        u_plus[i] = t;
    }
    consts.l_f * consts.l_f * sq / (2.0 * consts.sigma_f)
}

/// Projected gradient step at `u` and its suboptimality bound for the
/// resulting point: `L(u_plus, x) - d(x) <= L_f^2 ||u - u_plus||^2 / (2 sigma_f)`.
pub fn gradient_map_certificate(
    np: &NormalizedQp,
    consts: &ProblemConstants,
    u: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, f64)> {
    np.check_multipliers(x)?;
    let n = np.dim();
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            context: "inner point",
            expected: n,
            actual: u.len(),
        });
    }
    let mut lin = vec![0.0; n];
    linear_term(np, x, &mut lin);
    let mut grad = vec![0.0; n];
    let mut u_plus = vec![0.0; n];
    let bound = gradient_map_step(np, consts, &lin, u, &mut grad, &mut u_plus);
    Ok((u_plus, bound))
}

pub fn solve_inner(
    np: &NormalizedQp,
    consts: &ProblemConstants,
    x: &[f64],
    warm: &[f64],
    cfg: &InnerConfig,
) -> Result<InnerResult> {
    solve_inner_with(np, consts, x, warm, cfg, &mut InnerWorkspace::new(np.dim()))
}

/// [`solve_inner`] with caller-provided scratch space.
///
/// Stops at the first iteration whose certificate is at most `delta`, or
/// after `min(N_delta, max_iterations)` projections.
pub fn solve_inner_with(
    np: &NormalizedQp,
    consts: &ProblemConstants,
    x: &[f64],
    warm: &[f64],
    cfg: &InnerConfig,
    ws: &mut InnerWorkspace,
) -> Result<InnerResult> {
    cfg.validate()?;
    np.check_multipliers(x)?;
    let n = np.dim();
    if warm.len() != n {
        return Err(Error::DimensionMismatch {
            context: "inner warm start",
            expected: n,
            actual: warm.len(),
        });
    }
    ws.resize(n);
    let cap = match inner_iteration_bound(cfg.delta, consts.r_p, consts.l_f, consts.sigma_f) {
        Ok(nd) => nd.min(cfg.max_iterations),
        Err(Error::RequiresCompactBox { .. }) => cfg.max_iterations,
        Err(e) => return Err(e),
    };
    let a_priori = consts.r_p.is_finite() && cap < cfg.max_iterations;

    linear_term(np, x, &mut ws.lin);
    ws.u_prev.copy_from_slice(warm);
    np.bounds.project_in_place(&mut ws.u_prev);
    ws.v.copy_from_slice(&ws.u_prev);

    let (sl, ss) = (consts.l_f.sqrt(), consts.sigma_f.sqrt());
    let kappa = (sl - ss) / (sl + ss);
    let mut bound = f64::INFINITY;
    let mut used = 0;
    while used < cap {
        bound = gradient_map_step(np, consts, &ws.lin, &ws.v, &mut ws.grad, &mut ws.u_plus);
        used += 1;
        if cfg.use_certified_stop && bound <= cfg.delta {
            break;
        }
        for i in 0..n {
            let up = ws.u_plus[i];
            ws.v[i] = up + kappa * (up - ws.u_prev[i]);
        }
        std::mem::swap(&mut ws.u_prev, &mut ws.u_plus);
    }
    let certified = bound <= cfg.delta;
    let u_tilde = if certified && cfg.use_certified_stop {
        ws.u_plus.clone()
    } else {
        // after the swap the newest iterate lives in u_prev
        ws.u_prev.clone()
    };
    if cfg.use_certified_stop && !certified && !a_priori {
        return Err(Error::InnerNotCertified {
            iterations: used,
            delta: cfg.delta,
            bound,
        });
    }
    Ok(InnerResult {
        u_tilde,
        iterations_used: used,
        certificate_value: bound,
        certified,
    })
}

/// Dual function value `d(x) = min_u L(u, x)` estimated from a near-exact
/// inner solve; used by tests and diagnostics.
pub fn dual_value_estimate(np: &NormalizedQp, consts: &ProblemConstants, x: &[f64], delta: f64) -> Result<(f64, Vec<f64>)> {
    let mut cfg = InnerConfig::new(delta);
    cfg.max_iterations = 10_000_000;
    let r = solve_inner(np, consts, x, &vec![0.0; np.dim()], &cfg)?;
    Ok((np.lagrangian(&r.u_tilde, x)?, r.u_tilde))
}
