//! Condensed linear MPC and a closed-loop simulator.
//!
//! The predicted states `x_k = A^k x0 + sum_{i<k} A^{k-1-i} B u_i` are
//! substituted into the cost and the state constraints so that the only
//! decision variable is the stacked input sequence. The Hessian and the
//! constraint matrix depend on the model and weights only; the current state
//! and the previously applied input enter through vectors.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Bounds, DenseMatrix};
use crate::outer::{self, SolveConfig, Status};
use crate::problem::{self, NormalizedQp, ProblemConstants, QpProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

impl LtiModel {
    pub fn new(a: DenseMatrix, b: DenseMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                context: "A columns",
                expected: a.rows(),
                actual: a.cols(),
            });
        }
        if b.rows() != a.rows() {
            return Err(Error::DimensionMismatch {
                context: "B rows",
                expected: a.rows(),
                actual: b.rows(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn nx(&self) -> usize {
        self.a.rows()
    }

    pub fn nu(&self) -> usize {
        self.b.cols()
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nx()];
        self.a.mul_vec_into(x, &mut out);
        let mut bu = vec![0.0; self.nx()];
        self.b.mul_vec_into(u, &mut bu);
        for (o, v) in out.iter_mut().zip(&bu) {
            *o += v;
        }
        out
    }
}

/// Self-balancing two-wheeled robot, zero-order hold at 8 ms.
/// States `(h, hdot, theta, thetadot)`, input PWM duty cycle in percent.
pub fn balancing_robot_model() -> LtiModel {
    let a = DenseMatrix::from_rows(
        &[
            vec![1.0, 0.0054, -2e-4, 1e-4],
            vec![0.0, 0.4717, -0.0465, 0.0211],
            vec![0.0, 0.03, 1.0049, 0.0068],
            vec![0.0, 6.0742, 1.0721, 0.7633],
        ],
        4,
    )
    .expect("constant matrix");
    let b = DenseMatrix::from_rows(&[vec![0.0002], vec![0.0448], vec![-0.0025], vec![-0.5147]], 1).expect("constant matrix");
    LtiModel { a, b }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalCost {
    /// terminal weight equal to the stage weight
    Stage,
    /// solution of the discrete algebraic Riccati equation
    Riccati,
    Matrix(DenseMatrix),
}

/// Unit of the robot's angle state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AngleUnit {
    Degrees,
    Radians,
}

impl AngleUnit {
    /// Converts an angle given in degrees into model units.
    pub fn from_degrees(self, deg: f64) -> f64 {
        match self {
            AngleUnit::Degrees => deg,
            AngleUnit::Radians => deg.to_radians(),
        }
    }

    /// Converts an angle given in radians into model units.
    pub fn from_radians(self, rad: f64) -> f64 {
        match self {
            AngleUnit::Degrees => rad.to_degrees(),
            AngleUnit::Radians => rad,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSpec {
    pub horizon: usize,
    pub q_stage: DenseMatrix,
    pub r_stage: DenseMatrix,
    pub terminal: TerminalCost,
    /// weight of `(u_k - u_{k-1})^2`
    pub beta: f64,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    /// per-state bounds on predicted states `x_1..x_N`; infinite entries are
    /// not constrained
    pub state_lb: Vec<f64>,
    pub state_ub: Vec<f64>,
}

impl MpcSpec {
    fn validate(&self, model: &LtiModel) -> Result<()> {
        let (nx, nu) = (model.nx(), model.nu());
        if self.horizon == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("input-rate weight must be nonnegative, got {}", self.beta),
            });
        }
        for (ctx, exp, act) in [
            ("Q_stage rows", nx, self.q_stage.rows()),
            ("Q_stage columns", nx, self.q_stage.cols()),
            ("R_stage rows", nu, self.r_stage.rows()),
            ("R_stage columns", nu, self.r_stage.cols()),
            ("u_min", nu, self.u_min.len()),
            ("u_max", nu, self.u_max.len()),
            ("state_lb", nx, self.state_lb.len()),
            ("state_ub", nx, self.state_ub.len()),
        ] {
            if exp != act {
                return Err(Error::DimensionMismatch {
                    context: ctx,
                    expected: exp,
                    actual: act,
                });
            }
        }
        let qe = linalg::symmetric_eigenvalues(&self.q_stage.symmetrized()?)?;
        if qe[0] < -1e-12 * qe[nx - 1].abs().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "Q_stage",
                reason: format!("must be positive semidefinite, lambda_min = {:e}", qe[0]),
            });
        }
        linalg::eig_extremes_spd(&self.r_stage).map_err(|_| Error::InvalidParameter {
            name: "R_stage",
            reason: "must be positive definite".into(),
        })?;
        Ok(())
    }
}

/// The robot scenario: `Q = diag(1, 1, 600, 1)`, `R = 2`, `|u| <= 12`,
/// `|h| <= 0.5`, `|theta| <= 15 deg` and a Riccati terminal weight.
pub fn balancing_robot_spec(horizon: usize, beta: f64, unit: AngleUnit) -> MpcSpec {
    let inf = f64::INFINITY;
    let th = unit.from_degrees(15.0);
    MpcSpec {
        horizon,
        q_stage: DenseMatrix::diag(&[1.0, 1.0, 600.0, 1.0]),
        r_stage: DenseMatrix::diag(&[2.0]),
        terminal: TerminalCost::Riccati,
        beta,
        u_min: vec![-12.0],
        u_max: vec![12.0],
        state_lb: vec![-0.5, -inf, -th, -inf],
        state_ub: vec![0.5, inf, th, inf],
    }
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    let data: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
    DenseMatrix::new(m.nrows(), m.ncols(), data).expect("finite Riccati iterate")
}

/// Stabilizing solution of `P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA`, by
/// iterating the Riccati recursion from `P = Q`.
pub fn solve_dare(model: &LtiModel, q: &DenseMatrix, r: &DenseMatrix) -> Result<DenseMatrix> {
    let (a, b, q, r) = (to_na(&model.a), to_na(&model.b), to_na(q), to_na(r));
    let mut p = q.clone();
    for _ in 0..200_000 {
        let bt_p = b.transpose() * &p;
        let s = &r + &bt_p * &b;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter {
                name: "R_stage",
                reason: "R + B'PB became singular in the Riccati recursion".into(),
            })?;
        let at_p = a.transpose() * &p;
        let next = &q + &at_p * &a - &at_p * &b * s_inv * bt_p * &a;
        let next = (&next + next.transpose()) * 0.5;
        let diff = (&next - &p).abs().max();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if diff <= 1e-12 * p.abs().max().max(1.0) {
            return Ok(from_na(&p));
        }
    }
    Err(Error::InvalidParameter {
        name: "model",
        reason: "Riccati recursion did not converge (is (A, B) stabilizable?)".into(),
    })
}

/// Condensed QP data for a fixed model and spec.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub h: DenseMatrix,
    /// state-constraint rows `Gbar` (selected rows of the prediction map)
    pub g_c: DenseMatrix,
    pub input_bounds: Bounds,
    /// lower/upper bounds of each constraint row
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    /// `(k, s)`: row constrains state component `s` of `x_k`, `k` in `1..=N`
    pub row_source: Vec<(usize, usize)>,
    /// `Gamma' W Phi`, maps `x0` into the linear term
    pub q_x0: DenseMatrix,
    /// `-beta D' E`, maps `u_prev` into the linear term
    pub q_uprev: DenseMatrix,
    /// stacked `A^k`, `k = 1..N`
    pub phi: DenseMatrix,
    pub nx: usize,
    pub nu: usize,
    pub horizon: usize,
}

pub fn condense(model: &LtiModel, spec: &MpcSpec) -> Result<CondensedQp> {
    spec.validate(model)?;
    let (nx, nu, n) = (model.nx(), model.nu(), spec.horizon);
    let p_term = match &spec.terminal {
        TerminalCost::Stage => spec.q_stage.clone(),
        TerminalCost::Riccati => solve_dare(model, &spec.q_stage, &spec.r_stage)?,
        TerminalCost::Matrix(m) => {
            if m.rows() != nx || m.cols() != nx {
                return Err(Error::DimensionMismatch {
                    context: "terminal weight",
                    expected: nx,
                    actual: m.rows(),
                });
            }
            m.clone()
        }
    };

    // powers A^0..A^N and the blocks A^j B
    let mut powers = vec![DenseMatrix::identity(nx)];
    for k in 1..=n {
        powers.push(model.a.matmul(&powers[k - 1])?);
    }
    let ab: Vec<DenseMatrix> = (0..n).map(|j| powers[j].matmul(&model.b)).collect::<Result<_>>()?;

    let mut gamma = DenseMatrix::zeros(n * nx, n * nu);
    let mut phi = DenseMatrix::zeros(n * nx, nx);
    for k in 1..=n {
        for r in 0..nx {
            for c in 0..nx {
                phi.set((k - 1) * nx + r, c, powers[k].get(r, c));
            }
        }
        for i in 0..k {
            let blk = &ab[k - 1 - i];
            for r in 0..nx {
                for c in 0..nu {
                    gamma.set((k - 1) * nx + r, i * nu + c, blk.get(r, c));
                }
            }
        }
    }

    let mut w = DenseMatrix::zeros(n * nx, n * nx);
    for k in 0..n {
        let blk = if k + 1 == n { &p_term } else { &spec.q_stage };
        for r in 0..nx {
            for c in 0..nx {
                w.set(k * nx + r, k * nx + c, blk.get(r, c));
            }
        }
    }
    let gt_w = gamma.transpose().matmul(&w)?;
    let mut h = gt_w.matmul(&gamma)?;
    let mut dtd = DenseMatrix::zeros(n * nu, n * nu);
    for k in 0..n {
        for c in 0..nu {
            let i = k * nu + c;
            dtd.set(i, i, if k + 1 < n { 2.0 } else { 1.0 });
            if k + 1 < n {
                dtd.set(i, i + nu, -1.0);
                dtd.set(i + nu, i, -1.0);
            }
        }
    }
    for k in 0..n {
        for r in 0..nu {
            for c in 0..nu {
                let (i, j) = (k * nu + r, k * nu + c);
                h.set(i, j, h.get(i, j) + spec.r_stage.get(r, c));
            }
        }
    }
    h = h.add(&dtd.scaled(spec.beta))?.symmetrized()?;
    let q_x0 = gt_w.matmul(&phi)?;
    // D'E u_prev puts -u_prev into the first block
    let mut q_uprev = DenseMatrix::zeros(n * nu, nu);
    for c in 0..nu {
        q_uprev.set(c, c, spec.beta);
    }

    let mut rows = Vec::new();
    let mut row_source = Vec::new();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for k in 1..=n {
        for s in 0..nx {
            let (l, u) = (spec.state_lb[s], spec.state_ub[s]);
            if l.is_finite() || u.is_finite() {
                rows.push(gamma.row((k - 1) * nx + s).to_vec());
                row_source.push((k, s));
                lo.push(l);
                hi.push(u);
            }
        }
    }
    let g_c = DenseMatrix::from_rows(&rows, n * nu)?;
    let input_bounds = Bounds::new(
        (0..n).flat_map(|_| spec.u_min.iter().copied()).collect(),
        (0..n).flat_map(|_| spec.u_max.iter().copied()).collect(),
    )?;
    Ok(CondensedQp {
        h,
        g_c,
        input_bounds,
        row_lower: lo,
        row_upper: hi,
        row_source,
        q_x0,
        q_uprev,
        phi,
        nx,
        nu,
        horizon: n,
    })
}

impl CondensedQp {
    /// `Gamma' W Phi x0 - beta D' E u_prev`
    pub fn linear_term(&self, x0: &[f64], u_prev: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.h.rows()];
        self.q_x0.mul_vec_into(x0, &mut q);
        let mut up = vec![0.0; self.h.rows()];
        self.q_uprev.mul_vec_into(u_prev, &mut up);
        for (a, b) in q.iter_mut().zip(&up) {
            *a -= b;
        }
        q
    }

    /// Free response `(Phi x0)` at the constrained rows.
    pub fn constraint_offset(&self, x0: &[f64]) -> Vec<f64> {
        let mut free = vec![0.0; self.phi.rows()];
        self.phi.mul_vec_into(x0, &mut free);
        self.row_source.iter().map(|&(k, s)| free[(k - 1) * self.nx + s]).collect()
    }

    pub fn qp(&self, x0: &[f64], u_prev: &[f64]) -> Result<QpProblem> {
        QpProblem::new(
            self.h.clone(),
            self.linear_term(x0, u_prev),
            self.input_bounds.clone(),
            self.g_c.clone(),
            self.constraint_offset(x0),
            self.row_lower.clone(),
            self.row_upper.clone(),
        )
    }
}

/// Normalized QP whose matrices are built once; only `q` and `g` are
/// rewritten per state.
struct QpTemplate {
    np: NormalizedQp,
    consts: ProblemConstants,
    /// for each normalized row: (condensed row, sign, bound)
    map: Vec<(usize, f64, f64)>,
}

impl QpTemplate {
    fn new(c: &CondensedQp) -> Result<Self> {
        let np = problem::normalize(&c.qp(&vec![0.0; c.nx], &vec![0.0; c.nu])?)?;
        let consts = problem::constants(&np)?;
        let mut map = Vec::new();
        for i in 0..c.row_lower.len() {
            if c.row_upper[i].is_finite() {
                map.push((i, 1.0, c.row_upper[i]));
            }
            if c.row_lower[i].is_finite() {
                map.push((i, -1.0, c.row_lower[i]));
            }
        }
        Ok(Self { np, consts, map })
    }

    fn update(&mut self, c: &CondensedQp, x0: &[f64], u_prev: &[f64]) {
        self.np.linear = c.linear_term(x0, u_prev);
        let off = c.constraint_offset(x0);
        for (g, &(i, sign, bound)) in self.np.g_vec.iter_mut().zip(&self.map) {
            // upper: gbar - cub ; lower: clb - gbar
            *g = if sign > 0.0 { off[i] - bound } else { bound - off[i] };
        }
        self.consts = self.consts.refreshed_for(&self.np);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceConfig {
    /// kick every `period` steps; 0 disables
    pub period: usize,
    /// `(state index, additive change)`
    pub kicks: Vec<(usize, f64)>,
}

impl DisturbanceConfig {
    pub fn none() -> Self {
        Self {
            period: 0,
            kicks: Vec::new(),
        }
    }

    /// `+0.05` on the angle and `-0.05` on the horizontal speed every 20
    /// steps, in model units. With the angle in degrees a kick of 0.05 rad
    /// (2.9 deg) already leaves the region the saturated input can recover.
    pub fn robot_default() -> Self {
        Self {
            period: 20,
            kicks: vec![(2, 0.05), (1, -0.05)],
        }
    }

    pub fn applies_at(&self, t: usize) -> bool {
        self.period > 0 && t > 0 && t % self.period == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStep {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub outer_iters: usize,
    pub inner_total: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub steps: Vec<SimStep>,
    /// state after the last applied input
    pub final_state: Vec<f64>,
}

/// Receding-horizon loop: at each step the QP is rebuilt for the current
/// state, solved with dual and primal warm starts from the previous step,
/// and the first input is applied. Disturbances are added to the state at
/// the scheduled steps before the controller sees it.
pub fn simulate_closed_loop(
    model: &LtiModel,
    spec: &MpcSpec,
    x0: &[f64],
    solver: &SolveConfig,
    steps: usize,
    disturbance: &DisturbanceConfig,
) -> Result<Simulation> {
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "must be at least 1".into(),
        });
    }
    if x0.len() != model.nx() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: model.nx(),
            actual: x0.len(),
        });
    }
    if let Some(&(s, _)) = disturbance.kicks.iter().find(|(s, _)| *s >= model.nx()) {
        return Err(Error::DimensionMismatch {
            context: "disturbance state index",
            expected: model.nx(),
            actual: s + 1,
        });
    }
    let cq = condense(model, spec)?;
    let mut tpl = QpTemplate::new(&cq)?;
    let nu = model.nu();
    let mut x = x0.to_vec();
    let mut u_prev = vec![0.0; nu];
    let mut cfg = solver.clone();
    cfg.record_trace = false;
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        if disturbance.applies_at(t) {
            for &(s, d) in &disturbance.kicks {
                x[s] += d;
            }
        }
        tpl.update(&cq, &x, &u_prev);
        let r = outer::solve(&tpl.np, &tpl.consts, &cfg).map_err(|e| Error::AtSimulationStep {
            step: t,
            source: Box::new(e),
        })?;
        let u: Vec<f64> = r.u_out[..nu].to_vec();
        // shift the input sequence by one block for the next warm start
        let mut shifted = r.u_out[nu..].to_vec();
        shifted.extend_from_slice(&r.u_out[r.u_out.len() - nu..]);
        cfg.primal_start = Some(shifted);
        cfg.dual_start = Some(r.x_out.clone());
        out.push(SimStep {
            t,
            x: x.clone(),
            u: u.clone(),
            outer_iters: r.outer_iterations,
            inner_total: r.total_inner_iterations,
            status: r.status,
        });
        x = model.step(&x, &u);
        u_prev = u;
    }
    Ok(Simulation {
        steps: out,
        final_state: x,
    })
}

/// Trajectory CSV for single-input, four-state models.
pub fn write_trajectory_csv<W: Write>(sim: &Simulation, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "h", "hdot", "theta", "thetadot", "u", "outer_iters", "solve_inner_total"])?;
    for s in &sim.steps {
        if s.x.len() != 4 || s.u.len() != 1 {
            return Err(Error::DimensionMismatch {
                context: "trajectory CSV state",
                expected: 4,
                actual: s.x.len(),
            });
        }
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.x.iter().map(|v| format!("{v}")));
        rec.push(format!("{}", s.u[0]));
        rec.push(s.outer_iters.to_string());
        rec.push(s.inner_total.to_string());
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
