//! Small dense linear-algebra kernels.
//!
//! Everything here is written for moderate sizes: the dense oracle sectors
//! (a few thousand states at most), projected Krylov problems, and the
//! `2L x 2L` tangent-space matrices of the mean-field flow.

use std::ops::{Index, IndexMut};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{cplx, czero, Cplx, Real};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Copy + Zero> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Matrix<T> {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Determinant by partial-pivot LU.
    pub fn determinant(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap())
                .unwrap();
            if a[(p, k)] == T::zero() {
                return T::zero();
            }
            if p != k {
                for c in 0..n {
                    a.data.swap(p * n + c, k * n + c);
                }
                det = -det;
            }
            let piv = a[(k, k)];
            det *= piv;
            for i in k + 1..n {
                let f = a[(i, k)] / piv;
                for c in k..n {
                    let v = a[(k, c)];
                    a[(i, c)] -= f * v;
                }
            }
        }
        det
    }
}

impl<T: Real> Matrix<Cplx<T>> {
    pub fn matvec_c(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).fold(czero(), |acc, (a, b)| acc + a * b))
            .collect()
    }
}

/// Implicit QL iteration on a symmetric tridiagonal matrix.
///
/// `diag` holds the diagonal; `off[i]` couples `i` and `i + 1` (the last
/// entry is ignored). On return `diag` holds the (unsorted) eigenvalues.
/// Every plane rotation of columns `(i, i + 1)` is reported through `rotate`
/// so callers can accumulate eigenvectors in any coefficient field.
fn tridiagonal_ql<T: Real>(
    diag: &mut [T],
    off: &mut [T],
    mut rotate: impl FnMut(usize, T, T),
) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    off[n - 1] = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence("tridiagonal QL exceeded 60 sweeps".into()));
            }
            let mut g = (diag[l + 1] - diag[l]) / (two * off[l]);
            let mut r = g.hypot(T::one());
            g = diag[m] - diag[l] + off[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == T::zero() {
                    diag[i + 1] -= p;
                    off[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + two * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                rotate(i, s, c);
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = T::zero();
        }
    }
    Ok(())
}

fn ascending_order<T: Real>(values: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Eigenvalues (ascending) of a real symmetric tridiagonal matrix.
pub fn tridiagonal_eigenvalues<T: Real>(diag: &[T], off: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    tridiagonal_ql(&mut d, &mut e, |_, _, _| {})?;
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(d)
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix. Columns of
/// the returned matrix are the normalized eigenvectors, ordered like the
/// ascending eigenvalues.
pub fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z = Matrix::<T>::identity(n);
    tridiagonal_ql(&mut d, &mut e, |i, s, c| {
        for k in 0..n {
            let f = z[(k, i + 1)];
            let zi = z[(k, i)];
            z[(k, i + 1)] = s * zi + c * f;
            z[(k, i)] = c * zi - s * f;
        }
    })?;
    let order = ascending_order(&d);
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| z[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigenvalues (unordered) of a symmetric tridiagonal matrix together with
/// the listed rows of its eigenvector matrix; `rows_out[r][j]` pairs with
/// `values[j]`. Costs `O(n^2)` per tracked row.
pub(crate) fn tridiagonal_eigen_rows<T: Real>(diag: &[T], off: &[T], rows: &[usize]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z: Vec<Vec<T>> = rows
        .iter()
        .map(|&r| (0..n).map(|c| if c == r { T::one() } else { T::zero() }).collect())
        .collect();
    tridiagonal_ql(&mut d, &mut e, |i, s, c| {
        for row in z.iter_mut() {
            let f = row[i + 1];
            let zi = row[i];
            row[i + 1] = s * zi + c * f;
            row[i] = c * zi - s * f;
        }
    })?;
    Ok((d, z))
}

/// Eigen-decomposition of a dense Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    /// Ascending eigenvalues.
    pub values: Vec<T>,
    /// Eigenvectors as columns, present when requested.
    pub vectors: Option<Matrix<Cplx<T>>>,
}

/// Householder reduction to real tridiagonal form followed by implicit QL.
///
/// Only the lower triangle of `a` is trusted to be consistent with the upper
/// one; the caller is responsible for Hermiticity.
pub fn hermitian_eigen<T: Real>(a: &Matrix<Cplx<T>>, want_vectors: bool) -> Result<HermitianEigen<T>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("hermitian_eigen needs a square matrix".into()));
    }
    let mut h = a.clone();
    let mut q = if want_vectors {
        Some(Matrix::from_fn(n, n, |r, c| if r == c { cplx(T::one(), T::zero()) } else { czero() }))
    } else {
        None
    };
    let two = T::lit(2.0);
    let mut v = vec![czero::<T>(); n];
    let mut p = vec![czero::<T>(); n];

    for k in 0..n.saturating_sub(2) {
        let xnorm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<T>().sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > T::zero() { x0 / x0.norm() } else { cplx(T::one(), T::zero()) };
        let alpha = -phase * xnorm;
        for vi in v.iter_mut() {
            *vi = czero();
        }
        for i in k + 1..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for vi in v[k + 1..].iter_mut() {
            *vi = *vi / vnorm;
        }
        // p = 2 H v over the trailing block (rows < k see zeros in the v support).
        for i in k..n {
            let mut acc = czero();
            for j in k + 1..n {
                acc += h[(i, j)] * v[j];
            }
            p[i] = acc * two;
        }
        let mut vp: Cplx<T> = czero();
        for i in k + 1..n {
            vp += v[i].conj() * p[i];
        }
        let kk = vp.re; // (tau / 2) v^H p with tau = 2
        for i in k..n {
            p[i] -= v[i] * kk;
        }
        for i in k..n {
            for j in k..n {
                let upd = v[i] * p[j].conj() + p[i] * v[j].conj();
                h[(i, j)] -= upd;
            }
        }
        h[(k + 1, k)] = alpha;
        h[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            h[(i, k)] = czero();
            h[(k, i)] = czero();
        }
        if let Some(q) = q.as_mut() {
            for r in 0..n {
                let mut qv = czero();
                for j in k + 1..n {
                    qv += q[(r, j)] * v[j];
                }
                let qv2 = qv * two;
                for j in k + 1..n {
                    let upd = qv2 * v[j].conj();
                    q[(r, j)] -= upd;
                }
            }
        }
    }

    let mut d: Vec<T> = (0..n).map(|i| h[(i, i)].re).collect();
    let mut e = vec![T::zero(); n];
    // Diagonal unitary making the off-diagonal real and non-negative.
    let mut phases = vec![cplx(T::one(), T::zero()); n];
    for k in 0..n.saturating_sub(1) {
        let t = h[(k + 1, k)];
        let m = t.norm();
        e[k] = m;
        phases[k + 1] = if m > T::zero() { phases[k] * (t / m) } else { phases[k] };
    }

    match q {
        None => {
            tridiagonal_ql(&mut d, &mut e, |_, _, _| {})?;
            d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            Ok(HermitianEigen { values: d, vectors: None })
        }
        Some(mut z) => {
            for r in 0..n {
                for c in 0..n {
                    z[(r, c)] = z[(r, c)] * phases[c];
                }
            }
            tridiagonal_ql(&mut d, &mut e, |i, s, c| {
                for k in 0..n {
                    let f = z[(k, i + 1)];
                    let zi = z[(k, i)];
                    z[(k, i + 1)] = zi * s + f * c;
                    z[(k, i)] = zi * c - f * s;
                }
            })?;
            let order = ascending_order(&d);
            let values = order.iter().map(|&i| d[i]).collect();
            let mut sorted = z.clone();
            for (c, &src) in order.iter().enumerate() {
                for r in 0..n {
                    sorted[(r, c)] = z[(r, src)];
                }
            }
            Ok(HermitianEigen { values, vectors: Some(sorted) })
        }
    }
}

/// Eigenvalues of a general real square matrix via complex Hessenberg
/// reduction and shifted QR. Intended for the small tangent-space matrices
/// of the mean-field flow.
pub fn general_eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<Cplx<T>>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidArgument("general_eigenvalues needs a square matrix".into()));
    }
    let mut h = Matrix::from_fn(n, n, |r, c| cplx(a[(r, c)], T::zero()));
    hessenberg_in_place(&mut h);
    let eps = T::epsilon();
    let mut out = vec![czero::<T>(); n];
    if n == 0 {
        return Ok(out);
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let max_iter = 60 * n.max(1);
    loop {
        if hi == 0 {
            out[0] = h[(0, 0)];
            break;
        }
        // locate the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let s = if s == T::zero() { T::one() } else { s };
            if h[(lo, lo - 1)].norm() <= eps * s {
                h[(lo, lo - 1)] = czero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            out[hi] = h[(hi, hi)];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence("shifted QR did not converge".into()));
        }
        let shift = if iter % 11 == 0 {
            // exceptional shift to break cycles
            h[(hi, hi)] + cplx(h[(hi, hi - 1)].norm() * T::lit(0.75), h[(hi, hi - 1)].norm())
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        let mut rots = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let x = h[(k, k)];
            let y = h[(k + 1, k)];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == T::zero() {
                (cplx(T::one(), T::zero()), czero())
            } else {
                (x / r, y / r)
            };
            for col in k..=hi {
                let a0 = h[(k, col)];
                let a1 = h[(k + 1, col)];
                h[(k, col)] = c.conj() * a0 + s.conj() * a1;
                h[(k + 1, col)] = -s * a0 + c * a1;
            }
            rots.push((c, s));
        }
        for (idx, k) in (lo..hi).enumerate() {
            let (c, s) = rots[idx];
            for row in lo..=(k + 1).min(hi) {
                let x = h[(row, k)];
                let y = h[(row, k + 1)];
                h[(row, k)] = x * c + y * s;
                h[(row, k + 1)] = -x * s.conj() + y * c.conj();
            }
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }
    Ok(out)
}

fn wilkinson_shift<T: Real>(a: Cplx<T>, b: Cplx<T>, c: Cplx<T>, d: Cplx<T>) -> Cplx<T> {
    let half = T::lit(0.5);
    let tr = (a + d) * half;
    let det = a * d - b * c;
    let disc = (tr * tr - det).sqrt();
    let l1 = tr + disc;
    let l2 = tr - disc;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg_in_place<T: Real>(h: &mut Matrix<Cplx<T>>) {
    let n = h.rows();
    let two = T::lit(2.0);
    for k in 0..n.saturating_sub(2) {
        let xnorm = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<T>().sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() > T::zero() { x0 / x0.norm() } else { cplx(T::one(), T::zero()) };
        let alpha = -phase * xnorm;
        let mut v = vec![czero::<T>(); n];
        for i in k + 1..n {
            v[i] = h[(i, k)];
        }
        v[k + 1] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        for z in v.iter_mut() {
            *z = *z / vnorm;
        }
        // H <- (I - 2 v v^H) H
        for c in 0..n {
            let mut s = czero();
            for i in k + 1..n {
                s += v[i].conj() * h[(i, c)];
            }
            let s = s * two;
            for i in k + 1..n {
                let upd = v[i] * s;
                h[(i, c)] -= upd;
            }
        }
        // H <- H (I - 2 v v^H)
        for r in 0..n {
            let mut s = czero();
            for j in k + 1..n {
                s += h[(r, j)] * v[j];
            }
            let s = s * two;
            for j in k + 1..n {
                let upd = s * v[j].conj();
                h[(r, j)] -= upd;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = czero();
        }
    }
}

/// Thin singular value decomposition `A = U diag(s) V^T`.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: Matrix<T>,
    pub s: Vec<T>,
    pub v: Matrix<T>,
}

/// One-sided Jacobi SVD. Accurate for the small, possibly rank-deficient
/// Jacobians of the shooting solver.
pub fn svd<T: Real>(a: &Matrix<T>) -> Result<Svd<T>> {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (m, n) = (a.rows(), a.cols());
    let mut u = a.clone();
    let mut v = Matrix::<T>::identity(n);
    // off-diagonal Gram entries cannot drop below roundoff of an m-term sum
    let eps = T::epsilon() * T::of_usize(m).sqrt().max(T::one()) * T::lit(2.0);
    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() || alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("Jacobi SVD exceeded 80 sweeps".into()));
    }
    let mut s = vec![T::zero(); n];
    for j in 0..n {
        let norm = (0..m).map(|i| u[(i, j)] * u[(i, j)]).sum::<T>().sqrt();
        s[j] = norm;
        if norm > T::zero() {
            for i in 0..m {
                u[(i, j)] /= norm;
            }
        }
    }
    // descending singular values
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u_sorted = u.clone();
    let mut v_sorted = v.clone();
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..m {
            u_sorted[(i, dst)] = u[(i, src)];
        }
        for i in 0..n {
            v_sorted[(i, dst)] = v[(i, src)];
        }
    }
    let s_sorted = order.iter().map(|&i| s[i]).collect();
    Ok(Svd { u: u_sorted, s: s_sorted, v: v_sorted })
}

/// Minimum-norm least-squares solution of `A x = b`, discarding singular
/// values below `rcond * s_max`.
pub fn least_squares<T: Real>(a: &Matrix<T>, b: &[T], rcond: T) -> Result<Vec<T>> {
    assert_eq!(a.rows(), b.len());
    let dec = svd(a)?;
    let n = a.cols();
    let smax = dec.s.first().copied().unwrap_or(T::zero());
    let mut x = vec![T::zero(); n];
    for (j, &sj) in dec.s.iter().enumerate() {
        if sj <= rcond * smax || sj == T::zero() {
            continue;
        }
        let coef = (0..a.rows()).map(|i| dec.u[(i, j)] * b[i]).sum::<T>() / sj;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * dec.v[(i, j)];
        }
    }
    Ok(x)
}
