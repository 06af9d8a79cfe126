//! QP data model and primal-side evaluations.
//!
//! A [`QpProblem`] carries two-sided linear constraints
//! `clb <= Gbar u + gbar <= cub` on top of a box. [`normalize`] turns those
//! into the one-sided system `G u + g <= 0` that the dual methods work with,
//! and [`constants`] extracts the smoothness and size constants used by the
//! step sizes and the complexity certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Bounds, DenseMatrix};

/// `min 1/2 u'Qu + q'u  s.t.  u in [lb, ub],  clb <= Gbar u + gbar <= cub`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DenseMatrix,
    pub linear: Vec<f64>,
    pub bounds: Bounds,
    pub constraint_matrix: DenseMatrix,
    pub constraint_offset: Vec<f64>,
    pub constraint_lower: Vec<f64>,
    pub constraint_upper: Vec<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DenseMatrix,
        linear: Vec<f64>,
        bounds: Bounds,
        constraint_matrix: DenseMatrix,
        constraint_offset: Vec<f64>,
        constraint_lower: Vec<f64>,
        constraint_upper: Vec<f64>,
    ) -> Result<Self> {
        let n = hessian.rows();
        check_len("Q columns", n, hessian.cols())?;
        check_len("q", n, linear.len())?;
        check_len("box", n, bounds.len())?;
        check_len("Gbar columns", n, constraint_matrix.cols())?;
        let m = constraint_matrix.rows();
        check_len("gbar", m, constraint_offset.len())?;
        check_len("clb", m, constraint_lower.len())?;
        check_len("cub", m, constraint_upper.len())?;
        if linear.iter().chain(&constraint_offset).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("q or gbar"));
        }
        for (i, (&lo, &hi)) in constraint_lower.iter().zip(&constraint_upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidConstraintBounds {
                    index: i,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self {
            hessian,
            linear,
            bounds,
            constraint_matrix,
            constraint_offset,
            constraint_lower,
            constraint_upper,
        })
    }

    /// Problem with one-sided constraints `G u + g <= 0` only.
    pub fn with_inequalities(
        hessian: DenseMatrix,
        linear: Vec<f64>,
        bounds: Bounds,
        g_mat: DenseMatrix,
        g_vec: Vec<f64>,
    ) -> Result<Self> {
        let m = g_mat.rows();
        Self::new(
            hessian,
            linear,
            bounds,
            g_mat,
            g_vec,
            vec![f64::NEG_INFINITY; m],
            vec![0.0; m],
        )
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_offset.len()
    }

    /// Largest violation of the two-sided constraints and the box at `u`.
    pub fn max_violation(&self, u: &[f64]) -> f64 {
        let gu = linalg::mat_vec(&self.constraint_matrix, u).unwrap_or_default();
        let rows = gu
            .iter()
            .zip(&self.constraint_offset)
            .zip(self.constraint_lower.iter().zip(&self.constraint_upper))
            .map(|((a, b), (lo, hi))| {
                let v = a + b;
                (lo - v).max(v - hi).max(0.0)
            });
        let boxv = u
            .iter()
            .zip(self.bounds.lb().iter().zip(self.bounds.ub()))
            .map(|(&x, (&l, &h))| (l - x).max(x - h).max(0.0));
        rows.chain(boxv).fold(0.0, f64::max)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: QpProblemJson = serde_json::from_str(s)?;
        raw.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&QpProblemJson::from(self))?)
    }
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Wire format of a problem file. Infinite bounds are encoded as `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpProblemJson {
    #[serde(rename = "Q")]
    pub hessian: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub lb: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub ub: Option<Vec<Option<f64>>>,
    #[serde(rename = "Gbar", default)]
    pub gbar_mat: Vec<Vec<f64>>,
    #[serde(default)]
    pub gbar: Vec<f64>,
    #[serde(default)]
    pub clb: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub cub: Option<Vec<Option<f64>>>,
}

fn decode_bounds(v: Option<Vec<Option<f64>>>, len: usize, missing: f64) -> Vec<f64> {
    match v {
        Some(v) => v.into_iter().map(|x| x.unwrap_or(missing)).collect(),
        None => vec![missing; len],
    }
}

fn encode_bounds(v: &[f64]) -> Option<Vec<Option<f64>>> {
    Some(v.iter().map(|x| x.is_finite().then_some(*x)).collect())
}

impl TryFrom<QpProblemJson> for QpProblem {
    type Error = Error;

    fn try_from(raw: QpProblemJson) -> Result<Self> {
        let n = raw.q.len();
        let hessian = DenseMatrix::from_rows(&raw.hessian, n)?;
        let lb = decode_bounds(raw.lb, n, f64::NEG_INFINITY);
        let ub = decode_bounds(raw.ub, n, f64::INFINITY);
        let m = raw.gbar_mat.len();
        let gbar_mat = DenseMatrix::from_rows(&raw.gbar_mat, n)?;
        let gbar = if raw.gbar.is_empty() { vec![0.0; m] } else { raw.gbar };
        let clb = decode_bounds(raw.clb, m, f64::NEG_INFINITY);
        let cub = decode_bounds(raw.cub, m, f64::INFINITY);
        QpProblem::new(hessian, raw.q, Bounds::new(lb, ub)?, gbar_mat, gbar, clb, cub)
    }
}

impl From<&QpProblem> for QpProblemJson {
    fn from(p: &QpProblem) -> Self {
        Self {
            hessian: p.hessian.to_rows(),
            q: p.linear.clone(),
            lb: encode_bounds(p.bounds.lb()),
            ub: encode_bounds(p.bounds.ub()),
            gbar_mat: p.constraint_matrix.to_rows(),
            gbar: p.constraint_offset.clone(),
            clb: encode_bounds(&p.constraint_lower),
            cub: encode_bounds(&p.constraint_upper),
        }
    }
}

/// QP with one-sided constraints `G u + g <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedQp {
    pub hessian: DenseMatrix,
    pub linear: Vec<f64>,
    pub bounds: Bounds,
    pub g_mat: DenseMatrix,
    pub g_vec: Vec<f64>,
}

impl NormalizedQp {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn num_rows(&self) -> usize {
        self.g_vec.len()
    }

    /// `f(u) = 1/2 u'Qu + q'u`
    pub fn objective(&self, u: &[f64]) -> f64 {
        let mut qu = vec![0.0; self.dim()];
        self.hessian.mul_vec_into(u, &mut qu);
        0.5 * linalg::dot(u, &qu) + linalg::dot(&self.linear, u)
    }

    /// `g(u) = G u + g`
    pub fn constraint_value(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_rows()];
        self.g_mat.mul_vec_into(u, &mut out);
        for (o, b) in out.iter_mut().zip(&self.g_vec) {
            *o += b;
        }
        out
    }

    /// `||[G u + g]_+||`
    pub fn infeasibility(&self, u: &[f64]) -> f64 {
        positive_part_norm(&self.constraint_value(u))
    }

    /// `L(u, x) = f(u) + <x, G u + g>`; rejects negative multipliers.
    pub fn lagrangian(&self, u: &[f64], x: &[f64]) -> Result<f64> {
        self.check_multipliers(x)?;
        Ok(self.objective(u) + linalg::dot(x, &self.constraint_value(u)))
    }

    /// `Q u + q + G' x`
    pub fn lagrangian_grad(&self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_multipliers(x)?;
        let mut grad = vec![0.0; self.dim()];
        self.hessian.mul_vec_into(u, &mut grad);
        let mut gtx = vec![0.0; self.dim()];
        self.g_mat.mul_t_vec_into(x, &mut gtx);
        for ((gi, qi), ti) in grad.iter_mut().zip(&self.linear).zip(&gtx) {
            *gi += qi + ti;
        }
        Ok(grad)
    }

    /// Inexact dual gradient `G u_tilde + g`.
    pub fn dual_inexact_grad(&self, u_tilde: &[f64]) -> Vec<f64> {
        self.constraint_value(u_tilde)
    }

    pub(crate) fn check_multipliers(&self, x: &[f64]) -> Result<()> {
        check_len("multipliers", self.num_rows(), x.len())?;
        if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeMultiplier { index, value });
        }
        Ok(())
    }
}

pub fn positive_part_norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| if x > 0.0 { x * x } else { 0.0 }).sum::<f64>().sqrt()
}

/// Rewrites `clb <= Gbar u + gbar <= cub` as `G u + g <= 0`.
///
/// A finite `cub_i` yields the row `(Gbar_i, gbar_i - cub_i)`, a finite `clb_i`
/// yields `(-Gbar_i, clb_i - gbar_i)`; equality rows therefore appear twice
/// with opposite signs.
pub fn normalize(p: &QpProblem) -> Result<NormalizedQp> {
    let n = p.dim();
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for i in 0..p.num_constraints() {
        let (lo, hi) = (p.constraint_lower[i], p.constraint_upper[i]);
        if !lo.is_finite() && !hi.is_finite() {
            return Err(Error::VacuousConstraint(i));
        }
        let row = p.constraint_matrix.row(i);
        let off = p.constraint_offset[i];
        if hi.is_finite() {
            rows.push(row.to_vec());
            offs.push(off - hi);
        }
        if lo.is_finite() {
            rows.push(row.iter().map(|v| -v).collect());
            offs.push(lo - off);
        }
    }
    Ok(NormalizedQp {
        hessian: p.hessian.clone(),
        linear: p.linear.clone(),
        bounds: p.bounds.clone(),
        g_mat: DenseMatrix::from_rows(&rows, n)?,
        g_vec: offs,
    })
}

/// Smoothness, convexity and size constants of a normalized QP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    /// strong convexity constant `lambda_min(Q)`
    pub sigma_f: f64,
    /// gradient Lipschitz constant `lambda_max(Q)`
    pub l_f: f64,
    /// `||G||_F`
    pub c_g: f64,
    /// `||G||_2`
    pub g_norm: f64,
    /// dual gradient Lipschitz constant `||G||_2^2 / sigma_f`
    pub l_d: f64,
    /// bound on `max ||grad f||` over the box
    #[serde(serialize_with = "crate::serde_ext::finite_or_null")]
    pub lbar_f: f64,
    /// box diameter
    #[serde(serialize_with = "crate::serde_ext::finite_or_null")]
    pub r_p: f64,
    /// `max{1, 1/c_g, L_f/c_g}`
    pub r_d_default: f64,
}

impl ProblemConstants {
    /// Recomputes the terms that depend on `q` and the box, reusing the
    /// spectral quantities. Used when only vectors change between solves.
    pub fn refreshed_for(&self, np: &NormalizedQp) -> Self {
        let mut c = *self;
        c.lbar_f = lbar_f(np, self.l_f);
        c.r_p = np.bounds.diameter();
        c
    }
}

fn lbar_f(np: &NormalizedQp, l_f: f64) -> f64 {
    // ||Q||_2 = lambda_max(Q) for symmetric positive definite Q
    let m = np.bounds.max_norm();
    if m.is_finite() {
        l_f * m + linalg::norm(&np.linear)
    } else {
        f64::INFINITY
    }
}

pub fn constants(np: &NormalizedQp) -> Result<ProblemConstants> {
    let (sigma_f, l_f) = linalg::eig_extremes_spd(&np.hessian)?;
    let c_g = linalg::frobenius_norm(&np.g_mat);
    let g_norm = linalg::spectral_norm(&np.g_mat)?;
    // any positive constant bounds the Lipschitz modulus of a constant dual gradient
    let l_d = if g_norm > 0.0 { g_norm * g_norm / sigma_f } else { 1.0 };
    let r_d_default = if c_g > 0.0 {
        1f64.max(1.0 / c_g).max(l_f / c_g)
    } else {
        1.0
    };
    Ok(ProblemConstants {
        sigma_f,
        l_f,
        c_g,
        g_norm,
        l_d,
        lbar_f: lbar_f(np, l_f),
        r_p: np.bounds.diameter(),
        r_d_default,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_problem(q: f64, g: f64, gv: f64) -> NormalizedQp {
        normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::diag(&[q]),
                vec![0.0],
                Bounds::uniform(1, -10.0, 10.0).unwrap(),
                DenseMatrix::diag(&[g]),
                vec![gv],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn one_row(lo: f64, hi: f64) -> QpProblem {
        QpProblem::new(
            DenseMatrix::identity(2),
            vec![0.0, 0.0],
            Bounds::unbounded(2),
            DenseMatrix::from_rows(&[vec![1.0, 2.0]], 2).unwrap(),
            vec![0.5],
            vec![lo],
            vec![hi],
        )
        .unwrap()
    }

    #[test]
    fn normalize_upper_only_keeps_row() {
        let np = normalize(&one_row(f64::NEG_INFINITY, 0.0)).unwrap();
        assert_eq!(np.g_mat.to_rows(), vec![vec![1.0, 2.0]]);
        assert_eq!(np.g_vec, vec![0.5]);
    }

    #[test]
    fn normalize_equality_gives_opposing_rows() {
        let np = normalize(&one_row(3.0, 3.0)).unwrap();
        assert_eq!(np.g_mat.to_rows(), vec![vec![1.0, 2.0], vec![-1.0, -2.0]]);
        assert_eq!(np.g_vec, vec![0.5 - 3.0, 3.0 - 0.5]);
    }

    #[test]
    fn normalize_counts_finite_bounds() {
        let p = QpProblem::new(
            DenseMatrix::identity(2),
            vec![0.0, 0.0],
            Bounds::unbounded(2),
            DenseMatrix::identity(2),
            vec![0.0, 0.0],
            vec![-1.0, -2.0],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(normalize(&p).unwrap().num_rows(), 4);
    }

    #[test]
    fn normalize_rejects_vacuous_row() {
        let p = one_row(f64::NEG_INFINITY, f64::INFINITY);
        assert_eq!(normalize(&p), Err(Error::VacuousConstraint(0)));
    }

    #[test]
    fn problem_rejects_crossed_bounds() {
        let r = QpProblem::new(
            DenseMatrix::identity(1),
            vec![0.0],
            Bounds::unbounded(1),
            DenseMatrix::identity(1),
            vec![0.0],
            vec![1.0],
            vec![0.0],
        );
        assert!(matches!(r, Err(Error::InvalidConstraintBounds { index: 0, .. })));
    }

    #[test]
    fn constants_identity() {
        let n = 3;
        let np = normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::identity(n),
                vec![0.0; n],
                Bounds::uniform(n, -1.0, 1.0).unwrap(),
                DenseMatrix::identity(n),
                vec![0.0; n],
            )
            .unwrap(),
        )
        .unwrap();
        let c = constants(&np).unwrap();
        assert_relative_eq!(c.sigma_f, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.l_f, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.l_d, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.c_g, 3f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(c.r_p, 12f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(c.lbar_f, 3f64.sqrt(), max_relative = 1e-12);
        assert!(c.l_d <= c.c_g * c.c_g / c.sigma_f);
    }

    #[test]
    fn constants_diagonal() {
        let np = normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::diag(&[2.0, 8.0]),
                vec![0.0; 2],
                Bounds::unbounded(2),
                DenseMatrix::from_rows(&[vec![1.0, 0.0]], 2).unwrap(),
                vec![0.0],
            )
            .unwrap(),
        )
        .unwrap();
        let c = constants(&np).unwrap();
        assert_relative_eq!(c.l_d, 0.5, max_relative = 1e-12);
        assert_eq!(c.r_p, f64::INFINITY);
        assert_eq!(c.lbar_f, f64::INFINITY);
    }

    #[test]
    fn r_d_default_formula() {
        // c_g = 0.1, L_f = 1 => max{1, 10, 10}
        let np = normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::identity(1),
                vec![0.0],
                Bounds::unbounded(1),
                DenseMatrix::diag(&[0.1]),
                vec![0.0],
            )
            .unwrap(),
        )
        .unwrap();
        let c = constants(&np).unwrap();
        assert_relative_eq!(c.r_d_default, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn constants_reject_indefinite() {
        let np = normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::diag(&[1.0, -0.5]),
                vec![0.0; 2],
                Bounds::unbounded(2),
                DenseMatrix::zeros(0, 2),
                vec![],
            )
            .unwrap(),
        )
        .unwrap();
        assert!(matches!(constants(&np), Err(Error::NotStronglyConvex(_))));
    }

    #[test]
    fn evaluations() {
        let np = scalar_problem(1.0, 1.0, -1.0);
        assert_eq!(np.objective(&[2.0]), 2.0);
        assert_eq!(np.infeasibility(&[0.5]), 0.0);
        assert_eq!(np.constraint_value(&[3.0]), vec![2.0]);
        assert_eq!(np.infeasibility(&[3.0]), 2.0);

        assert_eq!(np.lagrangian(&[1.0], &[0.0]).unwrap(), np.objective(&[1.0]));
        assert_eq!(np.lagrangian_grad(&[1.0], &[0.0]).unwrap(), vec![1.0]);
        assert_eq!(np.lagrangian(&[1.0], &[2.0]).unwrap(), 0.5);
        assert_eq!(np.lagrangian_grad(&[1.0], &[2.0]).unwrap(), vec![3.0]);
        assert!(matches!(
            np.lagrangian(&[1.0], &[-1.0]),
            Err(Error::NegativeMultiplier { index: 0, .. })
        ));
    }

    #[test]
    fn dual_inexact_grad_with_zero_matrix_is_offset() {
        let np = normalize(
            &QpProblem::with_inequalities(
                DenseMatrix::identity(2),
                vec![0.0; 2],
                Bounds::unbounded(2),
                DenseMatrix::zeros(2, 2),
                vec![-1.0, 0.5],
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(np.dual_inexact_grad(&[3.0, -4.0]), vec![-1.0, 0.5]);
    }

    #[test]
    fn lagrangian_grad_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        let p = 3;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let q = m.transpose().matmul(&m).unwrap().add(&DenseMatrix::identity(n)).unwrap();
        let gm = DenseMatrix::new(p, n, (0..p * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let np = NormalizedQp {
            hessian: q,
            linear: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bounds: Bounds::unbounded(n),
            g_mat: gm,
            g_vec: (0..p).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0)).collect();
        let grad = np.lagrangian_grad(&u, &x).unwrap();
        let h = 1e-5;
        for i in 0..n {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let fd = (np.lagrangian(&up, &x).unwrap() - np.lagrangian(&um, &x).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6, "coordinate {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn json_round_trip_preserves_bits_and_infinities() {
        let p = QpProblem::new(
            DenseMatrix::from_rows(&[vec![2.0, 0.1], vec![0.1, 1.0 / 3.0]], 2).unwrap(),
            vec![0.1, -1e-300],
            Bounds::new(vec![f64::NEG_INFINITY, -1.0], vec![std::f64::consts::PI, f64::INFINITY]).unwrap(),
            DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.7, -0.3]], 2).unwrap(),
            vec![0.0, 1e-17],
            vec![f64::NEG_INFINITY, -2.5],
            vec![1.0, f64::INFINITY],
        )
        .unwrap();
        let s = p.to_json_string().unwrap();
        assert!(s.contains("null"));
        let back = QpProblem::from_json_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_optional_fields() {
        let p = QpProblem::from_json_str(r#"{"Q": [[1.0]], "q": [0.0], "lb": [-1], "ub": [1]}"#).unwrap();
        assert_eq!(p.num_constraints(), 0);
        let bad = QpProblem::from_json_str(r#"{"Q": [[1.0, 0.0]], "q": [0.0]}"#);
        assert!(matches!(bad, Err(Error::DimensionMismatch { .. })));
    }
}
