//! Random test problems, exact reference solutions and the experiment
//! runners behind the `bench-*` subcommands.
//!
//! The oracle enumerates active sets and solves each KKT system with
//! nalgebra, so it shares no code with the first-order solvers. For
//! instances too large to enumerate, [`reference_solve`] warm-starts an
//! active-set refinement from a moderate-accuracy solver run and accepts the
//! result only if it passes the same KKT checks.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inner::InnerConfig;
use crate::linalg::{self, Bounds, DenseMatrix};
use crate::outer::{self, DeltaPolicy, Idfom, Recovery, SolveConfig, Variant};
use crate::problem::{self, NormalizedQp, ProblemConstants, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomQpConfig {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// condition number of `Q`
    pub cond: f64,
    pub box_halfwidth: f64,
}

impl RandomQpConfig {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            seed,
            cond: 10.0,
            box_halfwidth: 10.0,
        }
    }
}

/// Seeded random QP with `sigma_f = 1`, `L_f = cond`, constraints
/// `G u + g <= 0` strictly satisfied at the box center with slack in
/// `[0.1, 1]`, and box `[-w, w]^n`.
///
/// Draws from ChaCha8 seeded with `seed_from_u64(seed)` in the order: `M`
/// (row-major), `q`, `G` (row-major), slacks. Entries of `q` are standard
/// normal divided by `sqrt(n)` so that `||q||`, `f*` and `L_d ||x*||^2` stay
/// of order one as `n` grows while the fraction of active rows stays fixed.
pub fn random_qp(cfg: &RandomQpConfig) -> Result<QpProblem> {
    let &RandomQpConfig {
        n,
        p,
        seed,
        cond,
        box_halfwidth,
    } = cfg;
    if n == 0 || !(cond >= 1.0) || !(box_halfwidth > 0.0) {
        return Err(Error::InvalidParameter {
            name: "random QP config",
            reason: format!("need n >= 1, cond >= 1, box_halfwidth > 0; got n={n} cond={cond} w={box_halfwidth}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |k: usize| -> Vec<f64> { (0..k).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let m = DenseMatrix::new(n, n, normal(n * n))?;
    let scale = 1.0 / (n as f64).sqrt();
    let q: Vec<f64> = normal(n).into_iter().map(|v| v * scale).collect();
    let g_data = normal(p * n);
    let slack = Uniform::new_inclusive(0.1, 1.0).map_err(|e| Error::Oracle(e.to_string()))?;
    let s: Vec<f64> = (0..p).map(|_| slack.sample(&mut rng)).collect();

    let mtm = m.transpose().matmul(&m)?.symmetrized()?;
    let ev = linalg::symmetric_eigenvalues(&mtm)?;
    let (lo, hi) = (ev[0], ev[n - 1]);
    let hess = if cond == 1.0 || hi - lo <= 1e-12 * hi.abs().max(1.0) {
        DenseMatrix::identity(n)
    } else {
        // shift so that (hi + mu) / (lo + mu) = cond, then scale lambda_min to 1
        let mu = (hi - cond * lo) / (cond - 1.0);
        let mut h = mtm.add(&DenseMatrix::identity(n).scaled(mu))?;
        h = h.scaled(1.0 / (lo + mu));
        h.symmetrized()?
    };
    let g_mat = DenseMatrix::new(p, n, g_data)?;
    let bounds = Bounds::uniform(n, -box_halfwidth, box_halfwidth)?;
    let center = bounds.center();
    let gu0 = linalg::mat_vec(&g_mat, &center)?;
    let g_vec: Vec<f64> = gu0.iter().zip(&s).map(|(a, si)| -a - si).collect();
    QpProblem::with_inequalities(hess, q, bounds, g_mat, g_vec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    pub u_star: Vec<f64>,
    pub f_star: f64,
    /// multipliers of the rows of `G u + g <= 0`
    pub x_star: Vec<f64>,
    pub active_rows: Vec<usize>,
    pub at_lower: Vec<usize>,
    pub at_upper: Vec<usize>,
    /// `||Q u + q + G'x - box multipliers||_inf`
    pub kkt_residual: f64,
}

/// Candidate limit for [`oracle_solve`].
pub const ORACLE_CANDIDATE_LIMIT: f64 = 1e7;
pub const ORACLE_MAX_DIM: usize = 12;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Fix {
    Free,
    Lower,
    Upper,
}

struct KktCandidate {
    u: Vec<f64>,
    x: Vec<f64>,
}

/// Solves the equality-constrained QP in which the coordinates in `fix` are
/// pinned to their bounds and the rows in `active` hold with equality.
fn solve_kkt(np: &NormalizedQp, fix: &[Fix], active: &[usize]) -> Option<KktCandidate> {
    let n = np.dim();
    let free: Vec<usize> = (0..n).filter(|&i| fix[i] == Fix::Free).collect();
    let (nf, na) = (free.len(), active.len());
    if na > nf {
        return None;
    }
    let mut u = vec![0.0; n];
    for i in 0..n {
        match fix[i] {
            Fix::Lower => u[i] = np.bounds.lb()[i],
            Fix::Upper => u[i] = np.bounds.ub()[i],
            Fix::Free => {}
        }
    }
    let m = nf + na;
    let mut k = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            k[(a, b)] = np.hessian.get(i, j);
        }
        let mut r = -np.linear[i];
        for j in 0..n {
            if fix[j] != Fix::Free {
                r -= np.hessian.get(i, j) * u[j];
            }
        }
        rhs[a] = r;
    }
    for (c, &row) in active.iter().enumerate() {
        let grow = np.g_mat.row(row);
        for (a, &i) in free.iter().enumerate() {
            k[(nf + c, a)] = grow[i];
            k[(a, nf + c)] = grow[i];
        }
        let mut r = -np.g_vec[row];
        for j in 0..n {
            if fix[j] != Fix::Free {
                r -= grow[j] * u[j];
            }
        }
        rhs[nf + c] = r;
    }
    let sol = if m == 0 { rhs } else { k.lu().solve(&rhs)? };
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    for (a, &i) in free.iter().enumerate() {
        u[i] = sol[a];
    }
    let mut x = vec![0.0; np.num_rows()];
    for (c, &row) in active.iter().enumerate() {
        x[row] = sol[nf + c];
    }
    Some(KktCandidate { u, x })
}

/// Tolerance scale for KKT acceptance.
fn kkt_scale(np: &NormalizedQp) -> f64 {
    1.0 + linalg::norm_inf(&np.linear) + linalg::norm_inf(&np.g_vec)
}

/// Checks primal feasibility, multiplier signs and box-multiplier signs.
/// Returns the solution record on success.
fn validate(np: &NormalizedQp, cand: KktCandidate, tol: f64) -> Option<OracleSolution> {
    let KktCandidate { u, x } = cand;
    if x.iter().any(|&v| v < -tol) {
        return None;
    }
    let gu = np.constraint_value(&u);
    if gu.iter().any(|&v| v > tol) {
        return None;
    }
    let (lb, ub) = (np.bounds.lb(), np.bounds.ub());
    if u.iter().enumerate().any(|(i, &v)| v < lb[i] - tol || v > ub[i] + tol) {
        return None;
    }
    if x.iter().zip(&gu).any(|(xi, gi)| (xi * gi).abs() > tol) {
        return None;
    }
    let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
    let r = np.lagrangian_grad(&u, &x).ok()?;
    let (mut at_lower, mut at_upper) = (Vec::new(), Vec::new());
    let mut resid: f64 = 0.0;
    for i in 0..u.len() {
        let on_lb = (u[i] - lb[i]).abs() <= tol;
        let on_ub = (u[i] - ub[i]).abs() <= tol;
        // r + nu_ub - nu_lb = 0 with nu >= 0
        let leftover = if on_lb && r[i] >= 0.0 {
            at_lower.push(i);
            0.0
        } else if on_ub && r[i] <= 0.0 {
            at_upper.push(i);
            0.0
        } else {
            r[i].abs()
        };
        resid = resid.max(leftover);
    }
    if resid > tol {
        return None;
    }
    let active_rows = (0..x.len()).filter(|&i| x[i] > 0.0 || gu[i].abs() <= tol).collect();
    Some(OracleSolution {
        f_star: np.objective(&u),
        u_star: u,
        x_star: x,
        active_rows,
        at_lower,
        at_upper,
        kkt_residual: resid,
    })
}

/// Exact solution by active-set enumeration.
///
/// Candidates are visited in order of increasing number of active
/// constraints; under strict convexity the first one that satisfies the KKT
/// conditions is the unique minimizer.
pub fn oracle_solve(np: &NormalizedQp) -> Result<OracleSolution> {
    let (n, p) = (np.dim(), np.num_rows());
    let count = 3f64.powi(n as i32) * 2f64.powi(p as i32);
    if n > ORACLE_MAX_DIM || count > ORACLE_CANDIDATE_LIMIT {
        return Err(Error::Oracle(format!(
            "instance too large for enumeration (n = {n}, rows = {p}, {count:.3e} candidates); use high-accuracy reference mode"
        )));
    }
    let tol = 1e-9 * kkt_scale(np);
    let slots = n + p;
    let (lb, ub) = (np.bounds.lb(), np.bounds.ub());
    for size in 0..=slots {
        let mut comb: Vec<usize> = (0..size).collect();
        loop {
            let boxes: Vec<usize> = comb.iter().copied().filter(|&s| s < n).collect();
            let rows: Vec<usize> = comb.iter().copied().filter(|&s| s >= n).map(|s| s - n).collect();
            if rows.len() <= n - boxes.len() {
                for mask in 0u32..(1u32 << boxes.len()) {
                    let mut fix = vec![Fix::Free; n];
                    let mut ok = true;
                    for (b, &i) in boxes.iter().enumerate() {
                        let upper = mask >> b & 1 == 1;
                        let bound = if upper { ub[i] } else { lb[i] };
                        if !bound.is_finite() {
                            ok = false;
                            break;
                        }
                        fix[i] = if upper { Fix::Upper } else { Fix::Lower };
                    }
                    if !ok {
                        continue;
                    }
                    if let Some(sol) = solve_kkt(np, &fix, &rows).and_then(|c| validate(np, c, tol)) {
                        return Ok(sol);
                    }
                }
            }
            if !next_combination(&mut comb, slots) {
                break;
            }
        }
    }
    Err(Error::Oracle("no active set satisfies the KKT conditions (numerically degenerate instance)".into()))
}

/// Advances `comb` to the next k-subset of `0..m` in lexicographic order.
fn next_combination(comb: &mut [usize], m: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < m - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// High-accuracy solution for instances beyond the oracle's reach.
///
/// A fast-gradient run to moderate accuracy supplies a starting guess; a
/// primal-dual active-set iteration then identifies the optimal active set
/// and the KKT system is solved exactly. The result passes the same checks
/// as the oracle or an error is returned.
pub fn reference_solve(np: &NormalizedQp, consts: &ProblemConstants) -> Result<OracleSolution> {
    let n = np.dim();
    let mut cfg = SolveConfig::new(Variant::Idfgm, Recovery::LastIterate, 1e-4 * kkt_scale(np));
    cfg.delta = DeltaPolicy::Fixed(1e-10);
    cfg.certificate_horizon = false;
    cfg.max_outer = 20_000;
    cfg.record_trace = false;
    let warm = outer::solve(np, consts, &cfg)?;
    let tol = 1e-9 * kkt_scale(np);

    let (lb, ub) = (np.bounds.lb(), np.bounds.ub());
    let mut u = warm.u_out;
    let mut x = warm.x_out;
    let mut prev: Option<(Vec<Fix>, Vec<usize>)> = None;
    for _ in 0..100 {
        let r = np.lagrangian_grad(&u, &x)?;
        let gu = np.constraint_value(&u);
        let c = 1.0;
        let fix: Vec<Fix> = (0..n)
            .map(|i| {
                if lb[i].is_finite() && r[i] + c * (lb[i] - u[i]) > 0.0 {
                    Fix::Lower
                } else if ub[i].is_finite() && -r[i] + c * (u[i] - ub[i]) > 0.0 {
                    Fix::Upper
                } else {
                    Fix::Free
                }
            })
            .collect();
        let active: Vec<usize> = (0..np.num_rows()).filter(|&i| x[i] + c * gu[i] > 0.0).collect();
        if prev.as_ref().is_some_and(|(f, a)| *f == fix && *a == active) {
            break;
        }
        let cand = solve_kkt(np, &fix, &active)
            .ok_or_else(|| Error::Oracle("singular KKT system during active-set refinement".into()))?;
        u = cand.u;
        x = cand.x;
        prev = Some((fix, active));
    }
    validate(np, KktCandidate { u, x }, tol)
        .ok_or_else(|| Error::Oracle("active-set refinement did not reach a KKT point".into()))
}

/// Oracle when the instance is small enough, reference mode otherwise.
pub fn exact_solve(np: &NormalizedQp, consts: &ProblemConstants) -> Result<OracleSolution> {
    match oracle_solve(np) {
        Ok(s) => Ok(s),
        Err(Error::Oracle(_)) => reference_solve(np, consts),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityConfig {
    pub qp: RandomQpConfig,
    pub eps: f64,
    pub deltas: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub variant: Variant,
    pub delta: f64,
    pub k: usize,
    pub subopt: f64,
    pub infeas: f64,
}

/// Per-iteration `|f(u_hat^k) - f*|` and infeasibility of the averaged
/// primal iterate for both variants and every `delta`.
pub fn run_sensitivity(cfg: &SensitivityConfig) -> Result<Vec<SensitivityRow>> {
    let np = problem::normalize(&random_qp(&cfg.qp)?)?;
    let consts = problem::constants(&np)?;
    let star = exact_solve(&np, &consts)?;
    let mut rows = Vec::new();
    for variant in [Variant::Idgm, Variant::Idfgm] {
        for &delta in &cfg.deltas {
            let mut run = Idfom::new(&np, &consts, variant, Recovery::Average, InnerConfig::new(delta), None, None)?;
            for _ in 0..cfg.iterations {
                let rep = run.step()?;
                let u = run.output();
                rows.push(SensitivityRow {
                    variant,
                    delta,
                    k: rep.k,
                    subopt: (np.objective(u) - star.f_star).abs(),
                    infeas: np.infeasibility(u),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["variant", "delta", "k", "subopt", "infeas"])?;
    for r in rows {
        wr.write_record([
            r.variant.name().to_string(),
            format!("{}", r.delta),
            r.k.to_string(),
            format!("{}", r.subopt),
            format!("{}", r.infeas),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub eps: f64,
    /// rows per variable; `p = ceil(p_ratio * n)`
    pub p_ratio: f64,
    pub first_seed: u64,
    pub max_outer: usize,
    pub jobs: usize,
}

impl ScalingConfig {
    pub fn new(dims: Vec<usize>, trials: usize, eps: f64) -> Self {
        Self {
            dims,
            trials,
            eps,
            p_ratio: 1.5,
            first_seed: 0,
            max_outer: 100_000,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub variant: Variant,
    pub recovery: Recovery,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub wall_ms: f64,
    /// solver status was `Converged`
    pub converged: bool,
    /// certificate outer bound with `R_d = ||x*||`
    pub outer_bound: usize,
}

fn scaling_cell(n: usize, seed: u64, cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    let p = (cfg.p_ratio * n as f64).ceil() as usize;
    let np = problem::normalize(&random_qp(&RandomQpConfig::new(n, p, seed))?)?;
    let consts = problem::constants(&np)?;
    let star = exact_solve(&np, &consts)?;
    let rd = linalg::norm(&star.x_star);
    let rd = if rd > 0.0 { rd } else { consts.r_d_default };
    let mut rows = Vec::with_capacity(4);
    for variant in [Variant::Idgm, Variant::Idfgm] {
        for recovery in [Recovery::LastIterate, Recovery::Average] {
            let mut sc = SolveConfig::new(variant, recovery, cfg.eps);
            sc.f_ref = Some(star.f_star);
            sc.rd = Some(rd);
            sc.certificate_horizon = false;
            sc.max_outer = cfg.max_outer;
            sc.record_trace = false;
            let t0 = Instant::now();
            let r = outer::solve(&np, &consts, &sc)?;
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            rows.push(ScalingRow {
                n,
                p,
                seed,
                variant,
                recovery,
                outer_iters: r.outer_iterations,
                total_inner_iters: r.total_inner_iterations,
                wall_ms,
                converged: r.status == outer::Status::Converged,
                outer_bound: crate::certify::outer_bound(variant, recovery, cfg.eps, &consts, rd)?,
            });
        }
    }
    Ok(rows)
}

/// Runs every (dimension, seed) cell, in parallel over `jobs` threads.
/// Rows come back in (dimension, seed) order regardless of scheduling.
pub fn run_scaling(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    let cells: Vec<(usize, u64)> = cfg
        .dims
        .iter()
        .flat_map(|&n| (0..cfg.trials as u64).map(move |t| (n, t)))
        .map(|(n, t)| (n, cfg.first_seed + t))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "jobs",
            reason: e.to_string(),
        })?;
    let results: Vec<Result<Vec<ScalingRow>>> =
        pool.install(|| cells.par_iter().map(|&(n, seed)| scaling_cell(n, seed, cfg)).collect());
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["n", "p", "seed", "variant", "recovery", "outer_iters", "total_inner_iters", "wall_ms"])?;
    for r in rows {
        wr.write_record([
            r.n.to_string(),
            r.p.to_string(),
            r.seed.to_string(),
            r.variant.name().to_string(),
            r.recovery.name().to_string(),
            r.outer_iters.to_string(),
            r.total_inner_iters.to_string(),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kkt_example() -> NormalizedQp {
        problem::normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::identity(1),
                vec![0.0],
                Bounds::uniform(1, -10.0, 10.0).unwrap(),
                DenseMatrix::diag(&[-1.0]),
                vec![1.0],
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn random_qp_is_deterministic() {
        let c = RandomQpConfig::new(6, 9, 42);
        assert_eq!(random_qp(&c).unwrap(), random_qp(&c).unwrap());
        assert_ne!(random_qp(&c).unwrap(), random_qp(&RandomQpConfig::new(6, 9, 43)).unwrap());
    }

    #[test]
    fn random_qp_has_slater_point_and_condition() {
        let c = RandomQpConfig::new(12, 18, 3);
        let np = problem::normalize(&random_qp(&c).unwrap()).unwrap();
        let center = np.bounds.center();
        assert!(np.constraint_value(&center).iter().all(|&v| v <= -0.1 + 1e-12));
        let k = problem::constants(&np).unwrap();
        assert!((k.sigma_f - 1.0).abs() < 1e-9 && (k.l_f - 10.0).abs() < 1e-8);
    }

    #[test]
    fn oracle_scalar_example() {
        let s = oracle_solve(&kkt_example()).unwrap();
        assert!((s.u_star[0] - 1.0).abs() < 1e-12);
        assert!((s.f_star - 0.5).abs() < 1e-12);
        assert!((s.x_star[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.active_rows, vec![0]);
    }

    #[test]
    fn oracle_interior_minimum() {
        let np = problem::normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::diag(&[2.0, 4.0]),
                vec![1.0, -2.0],
                Bounds::uniform(2, -10.0, 10.0).unwrap(),
                DenseMatrix::identity(2),
                vec![-5.0, -5.0],
            )
            .unwrap(),
        )
        .unwrap();
        let s = oracle_solve(&np).unwrap();
        assert_eq!(s.u_star, vec![-0.5, 0.5]);
        assert_eq!(s.x_star, vec![0.0, 0.0]);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let np = problem::normalize(&random_qp(&RandomQpConfig::new(13, 2, 0)).unwrap()).unwrap();
        assert!(matches!(oracle_solve(&np), Err(Error::Oracle(m)) if m.contains("reference mode")));
    }

    #[test]
    fn oracle_kkt_invariants() {
        for seed in 0..20 {
            let np = problem::normalize(&random_qp(&RandomQpConfig::new(5, 4, seed)).unwrap()).unwrap();
            let s = oracle_solve(&np).unwrap();
            assert!(s.kkt_residual <= 1e-9);
            let gu = np.constraint_value(&s.u_star);
            for (x, g) in s.x_star.iter().zip(&gu) {
                assert!(*x >= 0.0 && (x * g).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn reference_matches_oracle() {
        for seed in 0..10 {
            let np = problem::normalize(&random_qp(&RandomQpConfig::new(6, 5, 100 + seed)).unwrap()).unwrap();
            let k = problem::constants(&np).unwrap();
            let a = oracle_solve(&np).unwrap();
            let b = reference_solve(&np, &k).unwrap();
            assert!((a.f_star - b.f_star).abs() <= 1e-9, "seed {seed}");
            assert!(linalg::dist(&a.u_star, &b.u_star) <= 1e-7);
        }
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn scaling_rows_are_ordered_and_complete() {
        let mut cfg = ScalingConfig::new(vec![4, 6], 2, 1e-2);
        cfg.jobs = 3;
        let rows = run_scaling(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 4);
        let keys: Vec<(usize, u64)> = rows.iter().map(|r| (r.n, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.converged));
    }
}
