//! Dense kernels: matrix-vector products, projections and spectral estimates.
//!
//! Vectors are plain `[f64]` slices. Matrices are dense and row-major. All
//! matrix-vector products in the crate go through [`DenseMatrix::mul_vec_into`]
//! and [`DenseMatrix::mul_t_vec_into`] so that [`profile`] can account for them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix storage",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows; an empty slice yields a `0 x cols` matrix.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Dense product `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matrix product",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: "matrix sum",
                expected: self.rows * self.cols,
                actual: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `(M + M^T) / 2`; requires a square matrix.
    pub fn symmetrized(&self) -> Result<DenseMatrix> {
        self.require_square("symmetrize")?;
        let n = self.rows;
        let mut s = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        Ok(s)
    }

    fn require_square(&self, context: &'static str) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.rows,
                actual: self.cols,
            });
        }
        Ok(())
    }

    /// `out = self * v`. Dimensions are the caller's responsibility.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        let timer = profile::Timer::start();
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
        timer.finish();
    }

    /// `out = self^T * v`. Dimensions are the caller's responsibility.
    pub fn mul_t_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        let timer = profile::Timer::start();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        timer.finish();
    }
}

/// Exact dense product `M v`.
pub fn mat_vec(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if m.cols != v.len() {
        return Err(Error::DimensionMismatch {
            context: "mat_vec",
            expected: m.cols,
            actual: v.len(),
        });
    }
    let mut out = vec![0.0; m.rows];
    m.mul_vec_into(v, &mut out);
    Ok(out)
}

/// `M^T v`.
pub fn mat_t_vec(m: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if m.rows != v.len() {
        return Err(Error::DimensionMismatch {
            context: "mat_t_vec",
            expected: m.rows,
            actual: v.len(),
        });
    }
    let mut out = vec![0.0; m.cols];
    m.mul_t_vec_into(v, &mut out);
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators let the compiler keep the loop in vector registers
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Frobenius norm `sqrt(sum m_ij^2)`.
pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Eigenvalues of a symmetric matrix in ascending order.
///
/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson-type shifts. Only the lower triangle is read.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    m.require_square("symmetric_eigenvalues")?;
    if !m.is_finite() {
        return Err(Error::NonFinite("symmetric matrix"));
    }
    let n = m.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut a, n, &mut d, &mut e);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.total_cmp(y));
    Ok(d)
}

fn tridiagonalize(a: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[at(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[at(i, l)];
            } else {
                for k in 0..=l {
                    a[at(i, k)] /= scale;
                    h += a[at(i, k)] * a[at(i, k)];
                }
                let f = a[at(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[at(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[at(j, k)] * a[at(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[at(k, j)] * a[at(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[at(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[at(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[at(j, k)] -= f * e[k] + g * a[at(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[at(i, l)];
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for (i, di) in d.iter_mut().enumerate() {
        *di = a[at(i, i)];
    }
}

fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::Oracle("tridiagonal QL failed to converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of the symmetric part of a
/// positive definite matrix.
pub fn eig_extremes_spd(q: &DenseMatrix) -> Result<(f64, f64)> {
    if !q.is_finite() {
        return Err(Error::NonFinite("Q"));
    }
    let eig = symmetric_eigenvalues(&q.symmetrized()?)?;
    let (lmin, lmax) = match (eig.first(), eig.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(Error::InvalidParameter {
                name: "Q",
                reason: "empty matrix".into(),
            })
        }
    };
    if lmin <= 0.0 {
        return Err(Error::NotStronglyConvex(lmin));
    }
    Ok((lmin, lmax))
}

/// Largest singular value `sqrt(lambda_max(M^T M))`.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix"));
    }
    if m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    // form the smaller Gram matrix
    let gram = if m.rows <= m.cols {
        m.matmul(&m.transpose())?
    } else {
        m.transpose().matmul(m)?
    };
    let eig = symmetric_eigenvalues(&gram)?;
    Ok(eig.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Box `[lb, ub]` with extended-real bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl Bounds {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        if lb.len() != ub.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lb.len(),
                actual: ub.len(),
            });
        }
        for (i, (&l, &u)) in lb.iter().zip(&ub).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidBox { index: i, lb: l, ub: u });
            }
        }
        Ok(Self { lb, ub })
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn len(&self) -> usize {
        self.lb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lb.is_empty()
    }

    pub fn lb(&self) -> &[f64] {
        &self.lb
    }

    pub fn ub(&self) -> &[f64] {
        &self.ub
    }

    pub fn is_bounded(&self) -> bool {
        self.lb.iter().chain(&self.ub).all(|v| v.is_finite())
    }

    /// `||ub - lb||`, or `+inf` for an unbounded box.
    pub fn diameter(&self) -> f64 {
        if !self.is_bounded() {
            return f64::INFINITY;
        }
        dist(&self.ub, &self.lb)
    }

    /// `max_{u in box} ||u||`, or `+inf` for an unbounded box.
    pub fn max_norm(&self) -> f64 {
        if !self.is_bounded() {
            return f64::INFINITY;
        }
        self.lb
            .iter()
            .zip(&self.ub)
            .map(|(l, u)| (l * l).max(u * u))
            .sum::<f64>()
            .sqrt()
    }

    /// Midpoint of the box with infinite sides replaced by the finite bound or 0.
    pub fn center(&self) -> Vec<f64> {
        self.lb
            .iter()
            .zip(&self.ub)
            .map(|(&l, &u)| match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l.max(0.0),
                (false, true) => u.min(0.0),
                (false, false) => 0.0,
            })
            .collect()
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.len()
            && v
                .iter()
                .zip(self.lb.iter().zip(&self.ub))
                .all(|(&x, (&l, &u))| x >= l && x <= u)
    }

    #[inline]
    pub fn project_in_place(&self, v: &mut [f64]) {
        for (x, (&l, &u)) in v.iter_mut().zip(self.lb.iter().zip(&self.ub)) {
            *x = x.clamp(l, u);
        }
    }
}

/// Componentwise clamp onto the box.
pub fn box_project(v: &[f64], bounds: &Bounds) -> Result<Vec<f64>> {
    if v.len() != bounds.len() {
        return Err(Error::DimensionMismatch {
            context: "box_project",
            expected: bounds.len(),
            actual: v.len(),
        });
    }
    let mut out = v.to_vec();
    bounds.project_in_place(&mut out);
    Ok(out)
}

/// Projection onto the nonnegative orthant; `-0.0` is normalized to `0.0`.
pub fn nonneg_project(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

#[inline]
pub fn nonneg_project_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
}

/// Wall-clock accounting of matrix-vector products, per thread.
///
/// Disabled by default; [`profile::start`] resets and enables the counters for
/// the calling thread and [`profile::stop`] returns what was accumulated.
pub mod profile {
    use std::cell::Cell;
    use std::time::{Duration, Instant};

    thread_local! {
        static ENABLED: Cell<bool> = const { Cell::new(false) };
        static CALLS: Cell<u64> = const { Cell::new(0) };
        static NANOS: Cell<u64> = const { Cell::new(0) };
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
    pub struct MatVecProfile {
        pub calls: u64,
        pub elapsed: Duration,
    }

    pub(crate) struct Timer(Option<Instant>);

    impl Timer {
        #[inline]
        pub(crate) fn start() -> Self {
            if ENABLED.with(Cell::get) {
                Timer(Some(Instant::now()))
            } else {
                Timer(None)
            }
        }

        #[inline]
        pub(crate) fn finish(self) {
            if let Some(t0) = self.0 {
                let ns = t0.elapsed().as_nanos() as u64;
                CALLS.with(|c| c.set(c.get() + 1));
                NANOS.with(|c| c.set(c.get() + ns));
            }
        }
    }

    pub fn start() {
        CALLS.with(|c| c.set(0));
        NANOS.with(|c| c.set(0));
        ENABLED.with(|c| c.set(true));
    }

    pub fn snapshot() -> MatVecProfile {
        MatVecProfile {
            calls: CALLS.with(Cell::get),
            elapsed: Duration::from_nanos(NANOS.with(Cell::get)),
        }
    }

    pub fn stop() -> MatVecProfile {
        ENABLED.with(|c| c.set(false));
        snapshot()
    }
}
