//! The outer dual loop.
//!
//! Each iteration solves the inner problem at the current dual point `y^k`
//! to accuracy `delta`, takes a projected dual gradient step of length
//! `1/(2 L_d)` to get `x^k`, and (for the fast variant) extrapolates towards
//! a weighted sum of all past dual gradients. Primal points are recovered
//! either from the most recent inner solution or from a running weighted
//! average of all of them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certify;
use crate::error::{Error, Result};
use crate::inner::{solve_inner_with, InnerConfig, InnerResult, InnerWorkspace};
use crate::linalg;
use crate::problem::{NormalizedQp, ProblemConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// dual gradient method, `theta_k = 0`
    #[serde(rename = "IDGM")]
    Idgm,
    /// dual fast gradient method, `theta_k = 2/(k+3)`
    #[serde(rename = "IDFGM")]
    Idfgm,
}

impl Variant {
    /// Exponent of the dual rate `O(1/k^p)`.
    pub fn p_theta(self) -> u32 {
        match self {
            Variant::Idgm => 1,
            Variant::Idfgm => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Idgm => "IDGM",
            Variant::Idfgm => "IDFGM",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "idgm" => Ok(Variant::Idgm),
            "idfgm" => Ok(Variant::Idfgm),
            _ => Err(Error::InvalidParameter {
                name: "algorithm",
                reason: format!("expected idgm or idfgm, got {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Recovery {
    #[serde(rename = "last")]
    LastIterate,
    #[serde(rename = "average")]
    Average,
}

impl Recovery {
    pub fn name(self) -> &'static str {
        match self {
            Recovery::LastIterate => "last",
            Recovery::Average => "average",
        }
    }
}

impl fmt::Display for Recovery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recovery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "last" | "last-iterate" | "lastiterate" => Ok(Recovery::LastIterate),
            "average" | "avg" => Ok(Recovery::Average),
            _ => Err(Error::InvalidParameter {
                name: "recovery",
                reason: format!("expected last or average, got {s:?}"),
            }),
        }
    }
}

pub fn theta(k: usize, variant: Variant) -> f64 {
    match variant {
        Variant::Idgm => 0.0,
        Variant::Idfgm => 2.0 / (k as f64 + 3.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    /// largest inner accuracy admitted by the certificate for `eps`
    Certificate,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Converged,
    MaxIterations,
    CertificateHorizonReached,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::CertificateHorizonReached => "certificate_horizon_reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub variant: Variant,
    pub recovery: Recovery,
    pub eps: f64,
    pub delta: DeltaPolicy,
    pub max_outer: usize,
    /// known optimal value; enables the `|f - f*| <= eps` stop
    pub f_ref: Option<f64>,
    /// without `f_ref`, stop once `f(u) - (lower bound on f*) <= eps`
    pub gap_stop: bool,
    /// dual radius for certificates; defaults to the problem constants' value
    pub rd: Option<f64>,
    /// cap the run at the certificate's outer bound
    pub certificate_horizon: bool,
    pub inner_max_iterations: usize,
    /// nonzero dual start; certificates then no longer apply as stated
    pub dual_start: Option<Vec<f64>>,
    pub primal_start: Option<Vec<f64>>,
    pub record_trace: bool,
}

impl SolveConfig {
    pub fn new(variant: Variant, recovery: Recovery, eps: f64) -> Self {
        Self {
            variant,
            recovery,
            eps,
            delta: DeltaPolicy::Certificate,
            max_outer: 100_000,
            f_ref: None,
            gap_stop: true,
            rd: None,
            certificate_horizon: true,
            inner_max_iterations: 1_000_000,
            dual_start: None,
            primal_start: None,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub f: f64,
    pub infeas: f64,
    /// `L(u^k, y^k)`
    pub dtilde: f64,
    pub inner_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u_out: Vec<f64>,
    pub x_out: Vec<f64>,
    pub status: Status,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub trace: Vec<TraceRecord>,
    pub f: f64,
    pub infeas: f64,
    pub delta: f64,
    /// best certified lower bound on the optimal value seen during the run
    pub dual_lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterState {
    /// number of completed iterations
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z_sum: Vec<f64>,
    pub x_hat_sum: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub u_last: Vec<f64>,
    pub weight_sum: f64,
}

impl OuterState {
    fn new(y0: Vec<f64>, n: usize) -> Self {
        let p = y0.len();
        Self {
            k: 0,
            x: y0.clone(),
            y: y0,
            z_sum: vec![0.0; p],
            x_hat_sum: vec![0.0; p],
            u_hat: vec![0.0; n],
            u_last: vec![0.0; n],
            weight_sum: 0.0,
        }
    }
}

/// `[y + grad / (2 L_d)]_+`
pub fn dual_gradient_step(y: &[f64], grad: &[f64], l_d: f64) -> Vec<f64> {
    let s = 0.5 / l_d;
    y.iter().zip(grad).map(|(yi, gi)| (yi + s * gi).max(0.0)).collect()
}

/// `(1 - theta_k) x^k + theta_k [y^0 + z_sum / (2 L_d)]_+` where `z_sum`
/// already holds `sum_{j<=k} (j+1)/2 grad^j`.
pub fn fast_extrapolation_step(x: &[f64], z_sum: &[f64], y0: &[f64], l_d: f64, k: usize) -> Vec<f64> {
    let t = theta(k, Variant::Idfgm);
    let s = 0.5 / l_d;
    x.iter()
        .zip(z_sum.iter().zip(y0))
        .map(|(xi, (zi, y0i))| (1.0 - t) * xi + t * (y0i + s * zi).max(0.0))
        .collect()
}

/// Folds `u_k` into the running primal average: uniform weights for the
/// gradient method, weights `j+1` for the fast method.
pub fn primal_average_update(u_hat: &mut [f64], weight_sum: &mut f64, u_k: &[f64], k: usize, variant: Variant) {
    let w = match variant {
        Variant::Idgm => 1.0,
        Variant::Idfgm => (k + 1) as f64,
    };
    *weight_sum += w;
    if k == 0 {
        u_hat.copy_from_slice(u_k);
        return;
    }
    let r = w / *weight_sum;
    for (h, u) in u_hat.iter_mut().zip(u_k) {
        *h += r * (u - *h);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finalized {
    pub x_hat: Vec<f64>,
    pub x_final: Vec<f64>,
    pub u_final: Vec<f64>,
    /// `L(u, x)` at the averaged and at the final dual point, minus their certificates
    pub dual_lower_bound: f64,
    pub inner_iterations: usize,
}

/// Gradient-method final point: average the dual iterates, take one
/// projected dual gradient step from the average and return the inner
/// solution there.
pub fn idgm_finalize(
    np: &NormalizedQp,
    consts: &ProblemConstants,
    state: &OuterState,
    inner: &InnerConfig,
    warm: &[f64],
) -> Result<Finalized> {
    if state.k == 0 {
        return Err(Error::InvalidParameter {
            name: "state",
            reason: "finalization needs at least one completed iteration".into(),
        });
    }
    let mut ws = InnerWorkspace::new(np.dim());
    let inv = 1.0 / state.k as f64;
    let x_hat: Vec<f64> = state.x_hat_sum.iter().map(|v| v * inv).collect();
    let r1 = solve_inner_with(np, consts, &x_hat, warm, inner, &mut ws)?;
    let grad = np.dual_inexact_grad(&r1.u_tilde);
    let x_final = dual_gradient_step(&x_hat, &grad, consts.l_d);
    let r2 = solve_inner_with(np, consts, &x_final, &r1.u_tilde, inner, &mut ws)?;
    let lb = lower_bound(np, &r1, &x_hat, inner.delta)?.max(lower_bound(np, &r2, &x_final, inner.delta)?);
    Ok(Finalized {
        x_hat,
        x_final,
        u_final: r2.u_tilde,
        dual_lower_bound: lb,
        inner_iterations: r1.iterations_used + r2.iterations_used,
    })
}

/// `d(x) >= L(u, x) - (certified gap)`, and `d(x) <= f*`.
fn lower_bound(np: &NormalizedQp, r: &InnerResult, x: &[f64], delta: f64) -> Result<f64> {
    let gap = if r.certified { r.certificate_value } else { delta };
    Ok(np.lagrangian(&r.u_tilde, x)? - gap)
}

/// Iteration-by-iteration driver. [`solve`] wraps it with stopping rules;
/// tests use it directly to inspect every iterate.
pub struct Idfom<'a> {
    np: &'a NormalizedQp,
    consts: &'a ProblemConstants,
    variant: Variant,
    recovery: Recovery,
    inner: InnerConfig,
    y0: Vec<f64>,
    state: OuterState,
    ws: InnerWorkspace,
    ws_last: InnerWorkspace,
    /// warm start for solves at `y^k`
    warm: Vec<f64>,
    /// warm start for the extra fast-method solve at `x^k`
    warm_last: Vec<f64>,
    /// `u^k = u~(y^k)` from the most recent step
    u_k: Vec<f64>,
    dtilde_x: Option<f64>,
    total_inner: usize,
    dual_lb: f64,
}

/// What one outer iteration produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub k: usize,
    pub dtilde_y: f64,
    /// `L(v^k, x^k)` when the last iterate is solved for at `x^k`
    pub dtilde_x: Option<f64>,
    pub inner_iters: usize,
}

impl<'a> Idfom<'a> {
    pub fn new(
        np: &'a NormalizedQp,
        consts: &'a ProblemConstants,
        variant: Variant,
        recovery: Recovery,
        inner: InnerConfig,
        dual_start: Option<&[f64]>,
        primal_start: Option<&[f64]>,
    ) -> Result<Self> {
        let (n, p) = (np.dim(), np.num_rows());
        let y0 = match dual_start {
            Some(y) if y.len() != p => {
                return Err(Error::DimensionMismatch {
                    context: "dual start",
                    expected: p,
                    actual: y.len(),
                })
            }
            Some(y) => linalg::nonneg_project(y),
            None => vec![0.0; p],
        };
        let warm = match primal_start {
            Some(u) if u.len() != n => {
                return Err(Error::DimensionMismatch {
                    context: "primal start",
                    expected: n,
                    actual: u.len(),
                })
            }
            Some(u) => u.to_vec(),
            None => np.bounds.center(),
        };
        Ok(Self {
            np,
            consts,
            variant,
            recovery,
            inner,
            state: OuterState::new(y0.clone(), n),
            y0,
            ws: InnerWorkspace::new(n),
            ws_last: InnerWorkspace::new(n),
            warm_last: warm.clone(),
            warm,
            u_k: vec![0.0; n],
            dtilde_x: None,
            total_inner: 0,
            dual_lb: f64::NEG_INFINITY,
        })
    }

    pub fn state(&self) -> &OuterState {
        &self.state
    }

    /// `u~(y^k)` of the last completed iteration.
    pub fn u_k(&self) -> &[f64] {
        &self.u_k
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.total_inner
    }

    pub fn dual_lower_bound(&self) -> f64 {
        self.dual_lb
    }

    pub fn inner_config(&self) -> &InnerConfig {
        &self.inner
    }

    /// Primal point reported under the configured recovery.
    pub fn output(&self) -> &[f64] {
        match self.recovery {
            Recovery::Average => &self.state.u_hat,
            Recovery::LastIterate => &self.state.u_last,
        }
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let k = self.state.k;
        let np = self.np;
        let consts = self.consts;
        let at = |e: Error| Error::AtOuterIteration {
            iteration: k,
            source: Box::new(e),
        };

        let r = solve_inner_with(np, consts, &self.state.y, &self.warm, &self.inner, &mut self.ws).map_err(at)?;
        let mut inner_iters = r.iterations_used;
        let grad = np.dual_inexact_grad(&r.u_tilde);
        let dtilde_y = np.lagrangian(&r.u_tilde, &self.state.y).map_err(at)?;
        self.dual_lb = self.dual_lb.max(dtilde_y - if r.certified { r.certificate_value } else { self.inner.delta });

        let x = dual_gradient_step(&self.state.y, &grad, consts.l_d);
        let y_next = match self.variant {
            Variant::Idgm => x.clone(),
            Variant::Idfgm => {
                let w = 0.5 * (k + 1) as f64;
                for (z, g) in self.state.z_sum.iter_mut().zip(&grad) {
                    *z += w * g;
                }
                fast_extrapolation_step(&x, &self.state.z_sum, &self.y0, consts.l_d, k)
            }
        };

        primal_average_update(&mut self.state.u_hat, &mut self.state.weight_sum, &r.u_tilde, k, self.variant);
        for (s, xi) in self.state.x_hat_sum.iter_mut().zip(&x) {
            *s += xi;
        }

        self.dtilde_x = None;
        match (self.variant, self.recovery) {
            (Variant::Idfgm, Recovery::LastIterate) => {
                let rl = solve_inner_with(np, consts, &x, &self.warm_last, &self.inner, &mut self.ws_last).map_err(at)?;
                inner_iters += rl.iterations_used;
                let dx = np.lagrangian(&rl.u_tilde, &x).map_err(at)?;
                self.dual_lb = self.dual_lb.max(dx - if rl.certified { rl.certificate_value } else { self.inner.delta });
                self.dtilde_x = Some(dx);
                self.warm_last.copy_from_slice(&rl.u_tilde);
                self.state.u_last = rl.u_tilde;
            }
            _ => self.state.u_last.copy_from_slice(&r.u_tilde),
        }

        debug_assert!(x.iter().chain(&y_next).all(|v| *v >= 0.0));
        self.warm.copy_from_slice(&r.u_tilde);
        self.u_k = r.u_tilde;
        self.state.x = x;
        self.state.y = y_next;
        self.state.k = k + 1;
        self.total_inner += inner_iters;
        Ok(StepReport {
            k,
            dtilde_y,
            dtilde_x: self.dtilde_x,
            inner_iters,
        })
    }
}

/// Resolves the inner accuracy and the optional iteration horizon.
pub fn resolve_delta_and_horizon(consts: &ProblemConstants, cfg: &SolveConfig) -> Result<(f64, Option<usize>)> {
    if !(cfg.eps > 0.0 && cfg.eps.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must be positive and finite, got {}", cfg.eps),
        });
    }
    let r_d = cfg.rd.unwrap_or(consts.r_d_default);
    let delta = match cfg.delta {
        DeltaPolicy::Certificate => certify::delta_rule(cfg.variant, cfg.recovery, cfg.eps, consts, r_d)?,
        DeltaPolicy::Fixed(d) if d > 0.0 && d.is_finite() => d,
        DeltaPolicy::Fixed(d) => {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must be positive and finite, got {d}"),
            })
        }
    };
    let horizon = if cfg.certificate_horizon {
        match certify::outer_bound(cfg.variant, cfg.recovery, cfg.eps, consts, r_d) {
            Ok(h) => Some(h),
            Err(Error::RequiresCompactBox { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok((delta, horizon))
}

/// Stop measure: `max(|f - f_ref|, infeas)` with a reference value,
/// otherwise `max(f - lower bound, infeas)`.
fn stop_measure(cfg: &SolveConfig, f: f64, infeas: f64, dual_lb: f64) -> Option<f64> {
    match cfg.f_ref {
        Some(fr) => Some((f - fr).abs().max(infeas)),
        None if cfg.gap_stop => Some((f - dual_lb).max(infeas)),
        None => None,
    }
}

pub fn solve(np: &NormalizedQp, consts: &ProblemConstants, cfg: &SolveConfig) -> Result<SolveResult> {
    let (delta, horizon) = resolve_delta_and_horizon(consts, cfg)?;
    let inner = InnerConfig {
        delta,
        max_iterations: cfg.inner_max_iterations,
        use_certified_stop: true,
    };
    let mut run = Idfom::new(
        np,
        consts,
        cfg.variant,
        cfg.recovery,
        inner,
        cfg.dual_start.as_deref(),
        cfg.primal_start.as_deref(),
    )?;
    let mut trace = Vec::new();
    let max_outer = cfg.max_outer.max(1);
    let (status, mut f, mut infeas) = loop {
        let rep = run.step()?;
        let u = run.output();
        let f = np.objective(u);
        let infeas = np.infeasibility(u);
        if cfg.record_trace {
            trace.push(TraceRecord {
                k: rep.k,
                f,
                infeas,
                dtilde: rep.dtilde_y,
                inner_iters: rep.inner_iters,
            });
        }
        let done = run.state().k;
        if stop_measure(cfg, f, infeas, run.dual_lower_bound()).is_some_and(|m| m <= cfg.eps) {
            break (Status::Converged, f, infeas);
        }
        if horizon.is_some_and(|h| done >= h) {
            break (Status::CertificateHorizonReached, f, infeas);
        }
        if done >= max_outer {
            break (Status::MaxIterations, f, infeas);
        }
    };

    let mut u_out = run.output().to_vec();
    let mut x_out = run.state().x.clone();
    let mut total = run.total_inner_iterations();
    let mut dual_lb = run.dual_lower_bound();
    if cfg.variant == Variant::Idgm && cfg.recovery == Recovery::LastIterate {
        let fin = idgm_finalize(np, consts, run.state(), run.inner_config(), run.u_k()).map_err(|e| {
            Error::AtOuterIteration {
                iteration: run.state().k,
                source: Box::new(e),
            }
        })?;
        total += fin.inner_iterations;
        dual_lb = dual_lb.max(fin.dual_lower_bound);
        let ff = np.objective(&fin.u_final);
        let fi = np.infeasibility(&fin.u_final);
        // keep a converged point if the redefined one would fail the stop test
        let keep_old = status == Status::Converged && stop_measure(cfg, ff, fi, dual_lb).is_some_and(|m| m > cfg.eps);
        if !keep_old {
            u_out = fin.u_final;
            x_out = fin.x_final;
            f = ff;
            infeas = fi;
        }
    }
    Ok(SolveResult {
        u_out,
        x_out,
        status,
        outer_iterations: run.state().k,
        total_inner_iterations: total,
        trace,
        f,
        infeas,
        delta,
        dual_lower_bound: dual_lb,
    })
}

fn fmt_f64(v: f64) -> String {
    // Display gives the shortest string that parses back to the same bits
    format!("{v}")
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["k", "f", "infeas", "dtilde", "inner_iters"])?;
    for t in trace {
        wr.write_record([
            t.k.to_string(),
            fmt_f64(t.f),
            fmt_f64(t.infeas),
            fmt_f64(t.dtilde),
            t.inner_iters.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
