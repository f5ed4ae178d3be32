//! Small dense complex linear algebra.
//!
//! Column vectors (`ColVec`) and row covectors (`RowVec`) are kept as distinct
//! types. A row covector paired with a column vector is the plain bilinear
//! product `q p = sum q_i p_i`; complex conjugation is never applied, so the
//! dagger in `q†` means "row vector", not Hermitian adjoint.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LaxError, Result};

pub type C64 = Complex64;

/// Relative tolerance used by identity checks unless a caller overrides it.
pub const DEFAULT_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-14;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn is_finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Shared behaviour of column vectors and row covectors.
pub trait Projective: Sized + Clone {
    fn entries(&self) -> &[C64];
    fn from_entries(entries: Vec<C64>) -> Self;

    fn len(&self) -> usize {
        self.entries().len()
    }

    fn is_empty(&self) -> bool {
        self.entries().is_empty()
    }

    fn norm(&self) -> f64 {
        self.entries()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn scaled(&self, s: C64) -> Self {
        Self::from_entries(self.entries().iter().map(|z| z * s).collect())
    }

    fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| is_finite(*z))
    }

    /// Index of the largest-magnitude entry, lowest index on ties.
    fn argmax_abs(&self) -> usize {
        let mut best = 0;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, z) in self.entries().iter().enumerate() {
            let a = z.norm();
            if a > best_abs {
                best = i;
                best_abs = a;
            }
        }
        best
    }
}

macro_rules! vector_type {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<C64>);

        impl $name {
            pub fn new(entries: Vec<C64>) -> Self {
                Self(entries)
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![C64::new(0.0, 0.0); n])
            }

            /// The `i`-th standard basis vector of length `n`.
            pub fn basis(n: usize, i: usize) -> Self {
                let mut v = Self::zeros(n);
                v.0[i] = C64::new(1.0, 0.0);
                v
            }

            pub fn from_real(entries: &[f64]) -> Self {
                Self(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
            }

            pub fn iter(&self) -> std::slice::Iter<'_, C64> {
                self.0.iter()
            }
        }

        impl Projective for $name {
            fn entries(&self) -> &[C64] {
                &self.0
            }
            fn from_entries(entries: Vec<C64>) -> Self {
                Self(entries)
            }
        }

        impl Index<usize> for $name {
            type Output = C64;
            fn index(&self, i: usize) -> &C64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $name {
            fn index_mut(&mut self, i: usize) -> &mut C64 {
                &mut self.0[i]
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                assert_eq!(self.len(), rhs.len(), "vector length mismatch");
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                assert_eq!(self.len(), rhs.len(), "vector length mismatch");
                $name(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(self.0.iter().map(|a| -a).collect())
            }
        }

        impl Mul<C64> for &$name {
            type Output = $name;
            fn mul(self, s: C64) -> $name {
                self.scaled(s)
            }
        }
    };
}

vector_type!(ColVec, "Column vector `p`.");
vector_type!(
    RowVec,
    "Row covector `q†` (transpose only, never conjugated)."
);

impl RowVec {
    /// Bilinear pairing `q† p`.
    pub fn dot(&self, p: &ColVec) -> C64 {
        assert_eq!(self.len(), p.len(), "pairing length mismatch");
        self.0.iter().zip(&p.0).map(|(a, b)| a * b).sum()
    }

    pub fn try_dot(&self, p: &ColVec) -> Result<C64> {
        check_dims(self.len(), p.len())?;
        Ok(self.dot(p))
    }
}

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from rows; the result must be square with `r >= 2`.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(LaxError::DimensionMismatch {
                expected: 2,
                actual: n,
            });
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            check_dims(n, row.len())?;
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn row(&self, i: usize) -> RowVec {
        RowVec(self.data[i * self.n..(i + 1) * self.n].to_vec())
    }

    pub fn col(&self, j: usize) -> ColVec {
        ColVec((0..self.n).map(|i| self[(i, j)]).collect())
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> CMatrix {
        let mut t = CMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, s: C64) -> CMatrix {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| is_finite(*z))
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self[(i, j)].norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        check_dims(self.n, rhs.n)?;
        Ok(self * rhs)
    }

    pub fn matvec(&self, v: &ColVec) -> Result<ColVec> {
        check_dims(self.n, v.len())?;
        Ok(self * v)
    }

    pub fn vecmat(&self, w: &RowVec) -> Result<RowVec> {
        check_dims(self.n, w.len())?;
        Ok(w * self)
    }

    fn lu(&self) -> Result<Lu> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = self.max_abs();
        if scale == 0.0 {
            return Err(LaxError::SingularMatrix { pivot: 0 });
        }
        for k in 0..n {
            let (piv, piv_abs) =
                (k..n)
                    .map(|i| (i, a[i * n + k].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if piv_abs <= PIVOT_EPS * scale {
                return Err(LaxError::SingularMatrix { pivot: k });
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let d = a[k * n + k];
            for i in (k + 1)..n {
                let f = a[i * n + k] / d;
                a[i * n + k] = f;
                for j in (k + 1)..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= f * u;
                }
            }
        }
        Ok(Lu { n, a, perm, sign })
    }

    /// Determinant via LU with partial pivoting. A singular matrix has
    /// determinant zero.
    pub fn det(&self) -> C64 {
        match self.lu() {
            Ok(lu) => {
                let prod: C64 = (0..lu.n).map(|i| lu.a[i * lu.n + i]).product();
                prod * lu.sign
            }
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        let lu = self.lu()?;
        let n = self.n;
        let mut inv = CMatrix::zeros(n);
        for col in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[col] = C64::new(1.0, 0.0);
            let x = lu.solve(&e);
            for row in 0..n {
                inv[(row, col)] = x[row];
            }
        }
        Ok(inv)
    }

    /// Singular values in descending order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<f64> {
        let n = self.n;
        let mut cols: Vec<Vec<C64>> = (0..n).map(|j| self.col(j).0).collect();
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let alpha: f64 = cols[i].iter().map(|z| z.norm_sqr()).sum();
                    let beta: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum();
                    let gamma: C64 = cols[i]
                        .iter()
                        .zip(&cols[j])
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    let g = gamma.norm();
                    if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                        continue;
                    }
                    off = off.max(g / (alpha * beta).sqrt());
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = if zeta >= 0.0 { 1.0 } else { -1.0 }
                        / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = cs * t;
                    let (head, tail) = cols.split_at_mut(j);
                    for (x, y) in head[i].iter_mut().zip(tail[0].iter_mut()) {
                        let (a, b) = (*x, *y * phase.conj());
                        *x = a * cs - b * sn;
                        *y = (a * sn + b * cs) * phase;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut sv: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        sv
    }

    /// `sigma_2 / sigma_1`; zero for an exactly rank-one matrix.
    pub fn rank_one_defect(&self) -> f64 {
        let sv = self.singular_values();
        if sv[0] == 0.0 {
            return 0.0;
        }
        sv[1] / sv[0]
    }

    /// Relative distance `|self - other| / max(|self|, |other|)`.
    pub fn rel_diff(&self, other: &CMatrix) -> f64 {
        let scale = self.norm().max(other.norm());
        if scale == 0.0 {
            return 0.0;
        }
        (self - other).norm() / scale
    }
}

struct Lu {
    n: usize,
    a: Vec<C64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut y: Vec<C64> = (0..n).map(|i| rhs[self.perm[i]]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.a[i * n + k];
                let yk = y[k];
                y[i] -= l * yk;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.a[i * n + k];
                let yk = y[k];
                y[i] -= u * yk;
            }
            y[i] /= self.a[i * n + i];
        }
        y
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Mul<&ColVec> for &CMatrix {
    type Output = ColVec;
    fn mul(self, v: &ColVec) -> ColVec {
        assert_eq!(self.n, v.len(), "matrix-vector dimension mismatch");
        ColVec(
            (0..self.n)
                .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
                .collect(),
        )
    }
}

impl Mul<&CMatrix> for &RowVec {
    type Output = RowVec;
    fn mul(self, m: &CMatrix) -> RowVec {
        assert_eq!(self.len(), m.n, "vector-matrix dimension mismatch");
        RowVec(
            (0..m.n)
                .map(|j| (0..m.n).map(|i| self[i] * m[(i, j)]).sum())
                .collect(),
        )
    }
}

impl Mul<C64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, s: C64) -> CMatrix {
        self.scaled(s)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<C64>>::deserialize(deserializer)?;
        CMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(LaxError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Rank-one matrix `p q†`.
pub fn outer(p: &ColVec, q: &RowVec) -> Result<CMatrix> {
    check_dims(p.len(), q.len())?;
    let n = p.len();
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = p[i] * q[j];
        }
    }
    Ok(m)
}

/// Splits a rank-one matrix into `p q†`, using the column through its
/// largest entry.
pub fn rank_one_factor(g: &CMatrix) -> Result<(ColVec, RowVec)> {
    let n = g.dim();
    let (mut bi, mut bj, mut best) = (0, 0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let a = g[(i, j)].norm();
            if a > best {
                (bi, bj, best) = (i, j, a);
            }
        }
    }
    if best == 0.0 {
        return Err(LaxError::ZeroVector);
    }
    let pivot = g[(bi, bj)];
    let p = g.col(bj);
    let q = g.row(bi).scaled(pivot.inv());
    Ok((p, q))
}

/// Representative convention for a projective vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Entry `i` equals one.
    ComponentOne(usize),
    /// Entries sum to one.
    SumOne,
    /// Largest-magnitude entry equals one (lowest index on ties).
    #[default]
    MaxMagnitudeOne,
}

impl Normalization {
    /// Linear normalizations carry linear relations between normalized
    /// vectors over to their coefficients.
    pub fn is_linear(self) -> bool {
        !matches!(self, Normalization::MaxMagnitudeOne)
    }
}

/// Returns `([v], nu)` with `v = nu * [v]`.
pub fn normalize<V: Projective>(v: &V, mode: Normalization) -> Result<(V, C64)> {
    let norm = v.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(LaxError::ZeroVector);
    }
    let nu = match mode {
        Normalization::ComponentOne(i) => {
            if i >= v.len() {
                return Err(LaxError::DimensionMismatch {
                    expected: v.len(),
                    actual: i,
                });
            }
            let x = v.entries()[i];
            if x.norm() <= 1e-12 * norm {
                return Err(LaxError::UnusableComponent { index: i });
            }
            x
        }
        Normalization::SumOne => {
            let s: C64 = v.entries().iter().sum();
            if s.norm() <= 1e-12 * norm {
                return Err(LaxError::UnusableComponent { index: 0 });
            }
            s
        }
        Normalization::MaxMagnitudeOne => v.entries()[v.argmax_abs()],
    };
    Ok((v.scaled(nu.inv()), nu))
}

/// Colinearity residual `|u - lambda v| / |u|` for the least-squares `lambda`.
pub fn colinearity_residual<V: Projective>(u: &V, v: &V) -> Result<f64> {
    check_dims(u.len(), v.len())?;
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Err(LaxError::ZeroVector);
    }
    let vu: C64 = v
        .entries()
        .iter()
        .zip(u.entries())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let lambda = vu / (nv * nv);
    let r: f64 = u
        .entries()
        .iter()
        .zip(v.entries())
        .map(|(a, b)| (a - lambda * b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(r / nu)
}

/// Projective equality of two representatives.
pub fn proj_eq<V: Projective>(u: &V, v: &V, tol: f64) -> Result<bool> {
    Ok(colinearity_residual(u, v)? < tol)
}
