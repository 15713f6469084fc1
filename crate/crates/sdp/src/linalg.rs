//! Dense row-major matrices and the handful of factorizations the solver needs:
//! Cholesky, triangular solves and the symmetric eigendecomposition
//! (Householder tridiagonalization followed by implicit QL).

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut m = self.clone();
        m.scale(s);
        m
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        axpy(s, &other.data, &mut self.data);
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut m = self.clone();
        m.add_scaled(-T::one(), other);
        m
    }

    /// Replaces a square matrix by `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        let half = T::lit(0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (self.data[i * n + j] + self.data[j * n + i]) * half;
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(
            T::zero(),
            |acc, &v| if v.abs() > acc { v.abs() } else { acc },
        )
    }

    /// Frobenius inner product `Σ A_ij B_ij`.
    pub fn frobenius_dot(&self, other: &Self) -> T {
        dot(&self.data, &other.data)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut acc = [T::zero(); 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Four dot products of `rows[r][..len]` against `pivot[..len]` in one pass.
#[inline]
fn dot4<T: Real>(rows: [&[T]; 4], pivot: &[T]) -> [T; 4] {
    let mut acc = [T::zero(); 4];
    for (k, &p) in pivot.iter().enumerate() {
        acc[0] += rows[0][k] * p;
        acc[1] += rows[1][k] * p;
        acc[2] += rows[2][k] * p;
        acc[3] += rows[3][k] * p;
    }
    acc
}

/// Lower Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

/// Returned when a pivot is not strictly positive; carries the failing row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("matrix is not positive definite (pivot {0})")]
pub struct NotPositiveDefinite(pub usize);

impl<T: Real> Cholesky<T> {
    /// Factors `a`, reading only its lower triangle.
    pub fn new(a: &Matrix<T>) -> Result<Self, NotPositiveDefinite> {
        let mut l = a.clone();
        cholesky_in_place(&mut l)?;
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ z = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let row = self.l.row(i);
            b[i] /= row[i];
            let bi = b[i];
            for k in 0..i {
                b[k] -= row[k] * bi;
            }
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        self.solve_lower_in_place(b);
        self.solve_upper_in_place(b);
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Explicit `L⁻¹` (lower triangular).
    pub fn lower_inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            // forward substitution only touches rows >= j
            for i in j..n {
                let row = self.l.row(i);
                let s = e[i] - dot(&row[j..i], &e[j..i]);
                e[i] = s / row[i];
            }
            for i in j..n {
                inv[(i, j)] = e[i];
            }
        }
        inv
    }

    /// Explicit `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let li = self.lower_inverse();
        let lit = li.transpose();
        let mut out = Matrix::zeros(n, n);
        // (L⁻ᵀ L⁻¹)_ij = Σ_{k ≥ max(i,j)} Li_ki Li_kj
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&lit.row(i)[i..], &lit.row(j)[i..]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn log_det(&self) -> T {
        (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<T>() * T::lit(2.0)
    }
}

/// In-place Cholesky on the lower triangle; the strict upper triangle is zeroed.
pub fn cholesky_in_place<T: Real>(a: &mut Matrix<T>) -> Result<(), NotPositiveDefinite> {
    assert!(a.is_square());
    let n = a.nrows();
    let data = a.as_mut_slice();
    let mut i0 = 0;
    while i0 < n {
        let ib = (n - i0).min(4);
        let (done, rest) = data.split_at_mut(i0 * n);
        // Columns left of the current row block.
        if ib == 4 {
            for j in 0..i0 {
                let lj = &done[j * n..j * n + j];
                let djj = done[j * n + j];
                let (r0, tail) = rest.split_at(n);
                let (r1, tail) = tail.split_at(n);
                let (r2, tail) = tail.split_at(n);
                let r3 = &tail[..n];
                let d = dot4([&r0[..j], &r1[..j], &r2[..j], &r3[..j]], lj);
                for r in 0..4 {
                    let idx = r * n + j;
                    rest[idx] = (rest[idx] - d[r]) / djj;
                }
            }
        } else {
            for j in 0..i0 {
                let lj = &done[j * n..j * n + j];
                let djj = done[j * n + j];
                for r in 0..ib {
                    let row = &rest[r * n..r * n + j];
                    let s = dot(row, lj);
                    rest[r * n + j] = (rest[r * n + j] - s) / djj;
                }
            }
        }
        // Triangle inside the row block.
        for r in 0..ib {
            let i = i0 + r;
            for j in i0..i {
                let jr = j - i0;
                let (head, tail) = rest.split_at_mut(r * n);
                let lj = &head[jr * n..jr * n + j];
                let djj = head[jr * n + j];
                let s = dot(&tail[..j], lj);
                tail[j] = (tail[j] - s) / djj;
            }
            let row = &mut rest[r * n..(r + 1) * n];
            let s = dot(&row[..i], &row[..i]);
            let d = row[i] - s;
            if !(d > T::zero()) || !d.is_finite() {
                return Err(NotPositiveDefinite(i));
            }
            row[i] = d.sqrt();
            for v in &mut row[i + 1..] {
                *v = T::zero();
            }
        }
        i0 += ib;
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix: eigenvalues ascending and the
/// matching orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEigen<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        assert!(a.is_square(), "eigendecomposition of a non-square matrix");
        let n = a.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: Matrix::zeros(0, 0),
            };
        }
        let mut v = a.clone();
        v.symmetrize();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tred2(&mut v, &mut d, &mut e);
        tql2(&mut v, &mut d, &mut e);
        Self {
            values: d,
            vectors: v,
        }
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    /// Eigenvector `k` as an owned column.
    pub fn vector(&self, k: usize) -> Vec<T> {
        (0..self.vectors.nrows())
            .map(|i| self.vectors[(i, k)])
            .collect()
    }
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues<T: Real>(a: &Matrix<T>) -> Vec<T> {
    SymEigen::new(a).values
}

// Householder reduction to tridiagonal form (EISPACK tred2).
fn tred2<T: Real>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = v.nrows();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

// Implicit QL on the tridiagonal form (EISPACK tql2), then ascending sort.
fn tql2<T: Real>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = v.nrows();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter > 60 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    // Selection sort keeps the column swaps simple; n is small.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for r in 0..n {
                let tmp = v[(r, i)];
                v[(r, i)] = v[(r, k)];
                v[(r, k)] = tmp;
            }
        }
    }
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Real>(a: &Matrix<T>) -> T {
    SymEigen::new(a).min()
}

/// Largest `t ≤ cap` with `X + t·dX ⪰ 0`, given the Cholesky factor of `X ≻ 0`.
pub fn max_step_to_boundary<T: Real>(chol: &Cholesky<T>, dx: &Matrix<T>, cap: T) -> T {
    let n = chol.dim();
    if n == 0 {
        return cap;
    }
    // L⁻¹ dX L⁻ᵀ
    let li = chol.lower_inverse();
    let tmp = li.matmul(dx);
    let mut m = tmp.matmul(&li.transpose());
    m.symmetrize();
    let lmin = min_eigenvalue(&m);
    if lmin < T::zero() {
        (-T::one() / lmin).min(cap)
    } else {
        cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd(n: usize, seed: u64) -> Matrix<f64> {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b = Matrix::from_fn(n, n, |_, _| next());
        let mut a = b.matmul(&b.transpose());
        for i in 0..n {
            a[(i, i)] += 0.1;
        }
        a
    }

    #[test]
    fn cholesky_reconstructs() {
        for &n in &[1usize, 2, 3, 4, 5, 7, 8, 9, 13, 30] {
            let a = random_spd(n, n as u64);
            let ch = Cholesky::new(&a).unwrap();
            let l = ch.factor();
            let back = l.matmul(&l.transpose());
            assert!(back.sub(&a).max_abs() < 1e-12, "n = {n}");
            let x: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
            let b = a.matvec(&x);
            let sol = ch.solve(&b);
            for (u, v) in sol.iter().zip(&x) {
                assert!((u - v).abs() < 1e-8);
            }
            let inv = ch.inverse();
            assert!(inv.matmul(&a).sub(&Matrix::identity(n)).max_abs() < 1e-8);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert_eq!(Cholesky::new(&a).unwrap_err(), NotPositiveDefinite(1));
    }

    #[test]
    fn eigen_decomposition_reconstructs() {
        for &n in &[1usize, 2, 3, 6, 17] {
            let a = random_spd(n, 100 + n as u64);
            let eig = SymEigen::new(&a);
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
            let v = &eig.vectors;
            let mut d = Matrix::zeros(n, n);
            for i in 0..n {
                d[(i, i)] = eig.values[i];
            }
            let back = v.matmul(&d).matmul(&v.transpose());
            assert!(back.sub(&a).max_abs() < 1e-10, "n = {n}");
            assert!(v.transpose().matmul(v).sub(&Matrix::identity(n)).max_abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        // path-graph Laplacian: eigenvalues 0, 1, 3
        let a: Matrix<f64> = Matrix::from_rows(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ]);
        let ev = sym_eigenvalues(&a);
        for (got, want) in ev.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn step_to_boundary() {
        let x: Matrix<f64> = Matrix::identity(2);
        let dx = Matrix::from_rows(&[vec![-2.0, 0.0], vec![0.0, 1.0]]);
        let ch = Cholesky::new(&x).unwrap();
        assert!((max_step_to_boundary(&ch, &dx, 10.0) - 0.5).abs() < 1e-14);
        assert_eq!(max_step_to_boundary(&ch, &Matrix::identity(2), 10.0), 10.0);
    }
}
