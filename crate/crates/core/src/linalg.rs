//! Small dense complex linear algebra.
//!
//! Everything here works on row-major `CMatrix` values of desk-scale size
//! (a few hundred rows at most). Eigen- and singular-value routines are
//! cyclic Jacobi methods: slow asymptotically, but accurate to full relative
//! precision on small singular values, which the rank tolerances rely on.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| re(x)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Outer product `u v†`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn set_column(&mut self, j: usize, col: &[C64]) {
        for (i, z) in col.iter().enumerate() {
            self[(i, j)] = *z;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(re(s))
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (r2, c2) = (other.rows, other.cols);
        CMatrix::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> CMatrix {
        let adj = self.adjoint();
        CMatrix::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + adj[(i, j)]) * 0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix: `M = V diag(values) V†`.
/// Eigenvalues ascending; eigenvectors are the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(self.vectors.rows(), self.vectors.rows());
        for l in 0..n {
            let w = self.vectors.column(l);
            let o = CMatrix::outer(&w, &w).scale_real(self.values[l]);
            out = &out + &o;
        }
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic complex Jacobi eigensolver. Only the Hermitian part of `m` is used.
pub fn eigh(m: &CMatrix) -> HermitianEigen {
    assert!(m.is_square(), "eigh requires a square matrix");
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm();
    if n <= 1 || scale == 0.0 {
        let values = (0..n).map(|i| a[(i, i)].re).collect();
        return HermitianEigen { values, vectors: v };
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 || mag <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // U = D P with D = diag(.., e^{-i phi} at q, ..) and the real
                // rotation P (P_pp = c, P_pq = s, P_qp = -s, P_qq = c).
                let u_pp = re(cs);
                let u_pq = re(sn);
                let u_qp = -phase.conj() * sn;
                let u_qq = phase.conj() * cs;
                // A <- A U
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                }
                // A <- U† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = re(a[(p, p)].re);
                a[(q, q)] = re(a[(q, q)].re);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| v[(r, order[col])]);
    HermitianEigen { values, vectors }
}

/// Singular values (descending) by one-sided Jacobi on the columns.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    // Work on whichever orientation has fewer columns.
    let a = if m.cols() > m.rows() { m.adjoint() } else { m.clone() };
    let (rows, cols) = (a.rows(), a.cols());
    let mut colsv: Vec<Vec<C64>> = (0..cols).map(|j| a.column(j)).collect();
    let _ = rows;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha: f64 = colsv[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = colsv[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = dot(&colsv[p], &colsv[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                let (left, right) = colsv.split_at_mut(q);
                let x = &mut left[p];
                let y = &mut right[0];
                for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
                    let yp = *yi * phase.conj();
                    let nx = *xi * cs - yp * sn;
                    let ny = *xi * sn + yp * cs;
                    *xi = nx;
                    *yi = ny;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = colsv.iter().map(|col| norm(col)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: number of singular values above `tol * sigma_max`.
pub fn matrix_rank(m: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Thin Householder QR: `m = q r` with `q` (rows x k) having orthonormal
/// columns and `r` (k x cols) upper triangular, `k = min(rows, cols)`.
/// Rank-deficient input still yields orthonormal `q`.
pub fn qr_thin(m: &CMatrix) -> (CMatrix, CMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    let k = rows.min(cols);
    let mut r = m.clone();
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(k);
    for j in 0..k {
        let x: Vec<C64> = (j..rows).map(|i| r[(i, j)]).collect();
        let xnorm = norm(&x);
        let mut v = x.clone();
        if xnorm > 0.0 {
            let x0 = x[0];
            let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
            v[0] += phase * xnorm;
            let vn = norm(&v);
            for z in v.iter_mut() {
                *z /= vn;
            }
        } else {
            for z in v.iter_mut() {
                *z = ZERO;
            }
        }
        // R <- (I - 2 v v†) R on rows j..
        if norm(&v) > 0.0 {
            for col in 0..cols {
                let mut s = ZERO;
                for (t, i) in (j..rows).enumerate() {
                    s += v[t].conj() * r[(i, col)];
                }
                for (t, i) in (j..rows).enumerate() {
                    r[(i, col)] -= v[t] * s * 2.0;
                }
            }
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of I.
    let mut q = CMatrix::zeros(rows, k);
    for i in 0..k {
        q[(i, i)] = ONE;
    }
    for j in (0..k).rev() {
        let v = &reflectors[j];
        if norm(v) == 0.0 {
            continue;
        }
        for col in 0..k {
            let mut s = ZERO;
            for (t, i) in (j..rows).enumerate() {
                s += v[t].conj() * q[(i, col)];
            }
            for (t, i) in (j..rows).enumerate() {
                q[(i, col)] -= v[t] * s * 2.0;
            }
        }
    }
    let r_thin = CMatrix::from_fn(k, cols, |i, j| if i <= j { r[(i, j)] } else { ZERO });
    (q, r_thin)
}

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting. `b` may have several columns.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(Error::invalid("solve: shape mismatch"));
    }
    let m = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, pmag) = (col..n)
            .map(|i| (i, lu[(i, col)].norm()))
            .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pmag <= 1e-300 || pmag <= f64::EPSILON * 1e-3 * scale {
            return Err(Error::Numerical("solve: singular matrix".into()));
        }
        if piv != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            for j in 0..m {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(piv, j)];
                x[(piv, j)] = tmp;
            }
        }
        let d = lu[(col, col)];
        for i in (col + 1)..n {
            let f = lu[(i, col)] / d;
            if f == ZERO {
                continue;
            }
            for j in col..n {
                let t = lu[(col, j)];
                lu[(i, j)] -= f * t;
            }
            for j in 0..m {
                let t = x[(col, j)];
                x[(i, j)] -= f * t;
            }
        }
    }
    for col in (0..n).rev() {
        let d = lu[(col, col)];
        for j in 0..m {
            let mut s = x[(col, j)];
            for k in (col + 1)..n {
                s -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = s / d;
        }
    }
    Ok(x)
}

/// Smallest eigenvalue of the Hermitian part.
pub fn lambda_min(m: &CMatrix) -> f64 {
    eigh(m).values.first().copied().unwrap_or(0.0)
}

/// Largest eigenvalue of the Hermitian part.
pub fn lambda_max(m: &CMatrix) -> f64 {
    eigh(m).values.last().copied().unwrap_or(0.0)
}

/// `F` with `m = F† F`, keeping eigenvalues above `rel_tol * lambda_max`.
/// Rows of `F` are `sqrt(lambda) w†`.
pub fn psd_factor(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let e = eigh(m);
    let lmax = e.values.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..e.values.len())
        .filter(|&l| lmax > 0.0 && e.values[l] > rel_tol * lmax)
        .collect();
    let n = m.rows();
    CMatrix::from_fn(keep.len(), n, |row, col| {
        let l = keep[row];
        e.vectors[(col, l)].conj() * e.values[l].sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(rows, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for seed in 0..20 {
            let n = 1 + (seed as usize % 9);
            let a = random(n, n, seed).hermitian_part();
            let e = eigh(&a);
            assert!(e.reconstruct().max_abs_diff(&a) < 1e-12);
            let vv = e.vectors.adjoint().matmul(&e.vectors);
            assert!(vv.max_abs_diff(&CMatrix::identity(n)) < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigh_matches_nalgebra() {
        use nalgebra::{Complex, DMatrix};
        let a = random(6, 6, 99).hermitian_part();
        let na = DMatrix::from_fn(6, 6, |i, j| Complex::new(a[(i, j)].re, a[(i, j)].im));
        let mut expected: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        expected.sort_by(f64::total_cmp);
        let got = eigh(&a).values;
        for (x, y) in got.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_values_match_nalgebra() {
        use nalgebra::{Complex, DMatrix};
        for (r, cc, seed) in [(4, 7, 1u64), (7, 3, 2), (5, 5, 3)] {
            let a = random(r, cc, seed);
            let na = DMatrix::from_fn(r, cc, |i, j| Complex::new(a[(i, j)].re, a[(i, j)].im));
            let mut expected: Vec<f64> = na.singular_values().iter().copied().collect();
            expected.sort_by(|a, b| b.total_cmp(a));
            let got = singular_values(&a);
            assert_eq!(got.len(), expected.len());
            for (x, y) in got.iter().zip(&expected) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rank_of_small_examples() {
        assert_eq!(matrix_rank(&CMatrix::identity(3), 1e-9), 3);
        let swap = CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(matrix_rank(&swap, 1e-9), 2);
        let u = vec![c(1.0, 0.5), c(-0.3, 0.0), c(0.0, 2.0)];
        let v = vec![c(0.2, 0.0), c(1.0, -1.0)];
        assert_eq!(matrix_rank(&CMatrix::outer(&u, &v), 1e-9), 1);
        assert_eq!(matrix_rank(&CMatrix::zeros(3, 3), 1e-9), 0);
    }

    #[test]
    fn tiny_singular_value_is_resolved() {
        // diag(1, 1e-12) rotated: eig of M†M would lose the small value.
        let d = CMatrix::diag(&[ONE, re(1e-12)]);
        let (q, _) = qr_thin(&random(2, 2, 5));
        let m = q.matmul(&d).matmul(&q.adjoint());
        let sv = singular_values(&m);
        assert!((sv[1] / 1e-12 - 1.0).abs() < 1e-3);
        assert_eq!(matrix_rank(&m, 1e-9), 1);
    }

    #[test]
    fn qr_reconstructs_and_is_isometric() {
        for (r, cc, seed) in [(5, 3, 1u64), (3, 5, 2), (4, 4, 3)] {
            let a = random(r, cc, seed);
            let (q, rr) = qr_thin(&a);
            assert!(q.matmul(&rr).max_abs_diff(&a) < 1e-12);
            let k = r.min(cc);
            assert!(q.adjoint().matmul(&q).max_abs_diff(&CMatrix::identity(k)) < 1e-12);
        }
        // rank deficient: zero column still gives orthonormal q
        let mut a = random(4, 3, 7);
        a.set_column(1, &[ZERO; 4]);
        let (q, rr) = qr_thin(&a);
        assert!(q.matmul(&rr).max_abs_diff(&a) < 1e-12);
        assert!(q.adjoint().matmul(&q).max_abs_diff(&CMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn solve_recovers_solution() {
        let a = random(5, 5, 11);
        let x = random(5, 2, 12);
        let b = a.matmul(&x);
        let got = solve(&a, &b).unwrap();
        assert!(got.max_abs_diff(&x) < 1e-10);
        assert!(solve(&CMatrix::zeros(2, 2), &CMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn psd_factor_roundtrip() {
        let b = random(3, 5, 4);
        let m = b.adjoint().matmul(&b);
        let f = psd_factor(&m, 1e-12);
        assert_eq!(f.rows(), 3);
        assert!(f.adjoint().matmul(&f).max_abs_diff(&m) < 1e-12);
    }
}
