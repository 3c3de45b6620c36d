//! Dense complex tensors and Hermitian matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Complex multiway array, row-major (last site fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![ZERO; len] }
    }

    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid("tensor dimensions must be positive"));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::invalid(format!(
                "tensor of shape {:?} needs {} entries, got {}",
                shape,
                len,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("tensor entries must be finite"));
        }
        Ok(Self { shape, data })
    }

    /// Builds without the finiteness check; used on contraction results so
    /// that callers can inspect overflow.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| linalg::re(x)).collect())
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for k in 0..t.data.len() {
            t.data[k] = f(&idx);
            increment(&mut idx, shape);
        }
        t
    }

    /// Product tensor `v_1 ⊗ … ⊗ v_n`.
    pub fn product(vectors: &[Vec<C64>]) -> Self {
        let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        Self::from_fn(&shape, |idx| idx.iter().zip(vectors).map(|(&j, v)| v[j]).product())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for s in (0..self.shape.len()).rev() {
            idx[s] = k % self.shape[s];
            k /= self.shape[s];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let k = self.linear_index(idx);
        self.data[k] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// `‖self − other‖_F`.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        Ok(frobenius_norm(&self.sub(other)?))
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn sum(&self) -> C64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// True when every entry is real and at least `-tol`.
    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.data.iter().all(|z| z.im.abs() <= tol && z.re >= -tol)
    }

    /// Reorders sites: site `s` of the result is site `perm[s]` of `self`.
    pub fn permute_sites(&self, perm: &[usize]) -> Result<DenseTensor> {
        let n = self.shape.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("permute_sites: not a permutation"));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut src = vec![0usize; n];
        Ok(DenseTensor::from_fn(&shape, |idx| {
            for (s, &p) in perm.iter().enumerate() {
                src[p] = idx[s];
            }
            self.get(&src)
        }))
    }

    /// Flattens into a matrix with the 1-based `left_sites` as rows and the
    /// remaining sites as columns, each side in increasing site order.
    pub fn unfold(&self, left_sites: &[usize]) -> Result<CMatrix> {
        unfold(self, left_sites)
    }

    /// Row-major reshape into `rows x (len / rows)`.
    pub fn reshape_matrix(&self, rows: usize) -> Result<CMatrix> {
        if rows == 0 || !self.data.len().is_multiple_of(rows) {
            return Err(Error::invalid("reshape_matrix: incompatible row count"));
        }
        CMatrix::from_vec(rows, self.data.len() / rows, self.data.clone())
    }

    pub fn as_vector(&self) -> &[C64] {
        &self.data
    }

    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            shape: self.shape.clone(),
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_json(j: &TensorJson) -> Result<Self> {
        if j.re.len() != j.im.len() {
            return Err(Error::invalid("tensor json: re/im length mismatch"));
        }
        let data = j.re.iter().zip(&j.im).map(|(&a, &b)| C64::new(a, b)).collect();
        Self::new(j.shape.clone(), data)
    }
}

/// Odometer increment of a row-major multi-index.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for s in (0..shape.len()).rev() {
        idx[s] += 1;
        if idx[s] < shape[s] {
            return;
        }
        idx[s] = 0;
    }
}

/// Serialized form `{"shape": [...], "re": [...], "im": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorJson {
    pub shape: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Serialize for DenseTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TensorJson::deserialize(d)?;
        DenseTensor::from_json(&j).map_err(serde::de::Error::custom)
    }
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorJson {
            shape: vec![self.rows(), self.cols()],
            re: self.data().iter().map(|z| z.re).collect(),
            im: self.data().iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = TensorJson::deserialize(d)?;
        if j.shape.len() != 2 || j.re.len() != j.im.len() {
            return Err(serde::de::Error::custom("matrix json needs a 2-d shape"));
        }
        let data = j.re.iter().zip(&j.im).map(|(&a, &b)| C64::new(a, b)).collect();
        CMatrix::from_vec(j.shape[0], j.shape[1], data).map_err(serde::de::Error::custom)
    }
}

pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    t.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn unfold(t: &DenseTensor, left_sites: &[usize]) -> Result<CMatrix> {
    let n = t.order();
    let mut left = vec![false; n];
    for &s in left_sites {
        if s == 0 || s > n {
            return Err(Error::invalid(format!("unfold: site {s} out of range 1..={n}")));
        }
        left[s - 1] = true;
    }
    let nl = left.iter().filter(|&&b| b).count();
    if nl == 0 || nl == n {
        return Err(Error::invalid("unfold: bipartition must be nonempty and proper"));
    }
    let lsites: Vec<usize> = (0..n).filter(|&s| left[s]).collect();
    let rsites: Vec<usize> = (0..n).filter(|&s| !left[s]).collect();
    let rows: usize = lsites.iter().map(|&s| t.shape[s]).product();
    let cols: usize = rsites.iter().map(|&s| t.shape[s]).product();
    let mut m = CMatrix::zeros(rows, cols);
    let mut idx = vec![0usize; n];
    for k in 0..t.data.len() {
        let r = lsites.iter().fold(0, |acc, &s| acc * t.shape[s] + idx[s]);
        let c = rsites.iter().fold(0, |acc, &s| acc * t.shape[s] + idx[s]);
        m[(r, c)] = t.data[k];
        increment(&mut idx, &t.shape);
    }
    Ok(m)
}

/// Multiplies `maps[s]` into site `s` of `t`: the result is
/// `(⊗_s maps[s]) t`, with site `s` of dimension `maps[s].rows()`.
pub fn apply_site_maps(t: &DenseTensor, maps: &[CMatrix]) -> Result<DenseTensor> {
    if maps.len() != t.order() {
        return Err(Error::invalid("apply_site_maps: one map per site required"));
    }
    let mut cur = t.clone();
    for (s, m) in maps.iter().enumerate() {
        if m.cols() != cur.shape[s] {
            return Err(Error::invalid(format!(
                "apply_site_maps: map {s} has {} columns, site dimension is {}",
                m.cols(),
                cur.shape[s]
            )));
        }
        let outer: usize = cur.shape[..s].iter().product();
        let inner: usize = cur.shape[s + 1..].iter().product();
        let (din, dout) = (cur.shape[s], m.rows());
        let mut data = vec![ZERO; outer * dout * inner];
        for a in 0..outer {
            for k in 0..din {
                let src = &cur.data[(a * din + k) * inner..(a * din + k + 1) * inner];
                for j in 0..dout {
                    let w = m[(j, k)];
                    if w == ZERO {
                        continue;
                    }
                    let dst = &mut data[(a * dout + j) * inner..(a * dout + j + 1) * inner];
                    for (d, x) in dst.iter_mut().zip(src) {
                        *d += w * x;
                    }
                }
            }
        }
        let mut shape = cur.shape.clone();
        shape[s] = dout;
        cur = DenseTensor::from_raw(shape, data);
    }
    Ok(cur)
}

pub fn matrix_rank(m: &CMatrix, tol: f64) -> usize {
    linalg::matrix_rank(m, tol)
}

/// Square complex matrix that is Hermitian up to
/// `HERMITIAN_TOL * max(1, ‖M‖_F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("hermitian matrix must be square"));
        }
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL * m.frobenius_norm().max(1.0) {
            return Err(Error::invalid(format!("matrix is not hermitian (deviation {dev:.3e})")));
        }
        Ok(Self(m))
    }

    /// Takes the Hermitian part without checking.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        Self(m.hermitian_part())
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn eigen(&self) -> linalg::HermitianEigen {
        linalg::eigh(&self.0)
    }
}

/// `λ_min(M) ≥ −tol·max(1, ‖M‖_F)`.
pub fn is_psd(m: &HermitianMatrix, tol: f64) -> bool {
    psd_check(m.matrix(), tol)
}

pub(crate) fn psd_check(m: &CMatrix, tol: f64) -> bool {
    linalg::lambda_min(m) >= -tol * m.frobenius_norm().max(1.0)
}

pub fn lambda_max(m: &HermitianMatrix) -> f64 {
    linalg::lambda_max(m.matrix())
}

/// Operator on `⊗_i C^{d_i}` with row-major site ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipartiteMatrix {
    pub dims: Vec<usize>,
    pub matrix: CMatrix,
}

impl MultipartiteMatrix {
    pub fn new(dims: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let d: usize = dims.iter().product();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::invalid(format!(
                "operator of size {}x{} does not match site dims {:?}",
                matrix.rows(),
                matrix.cols(),
                dims
            )));
        }
        Ok(Self { dims, matrix })
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Diagonal as a tensor over the sites.
    pub fn diagonal(&self) -> DenseTensor {
        let d = self.matrix.rows();
        DenseTensor::from_raw(self.dims.clone(), (0..d).map(|k| self.matrix[(k, k)]).collect())
    }

    /// Shape `[d_1..d_n, d_1..d_n]` tensor view: row sites then column sites.
    pub fn to_tensor(&self) -> DenseTensor {
        let mut shape = self.dims.clone();
        shape.extend_from_slice(&self.dims);
        DenseTensor::from_raw(shape, self.matrix.data().to_vec())
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        psd_check(&self.matrix, tol)
    }
}

/// `ρ_T = Σ_j T_j |j⟩⟨j|`, the diagonal embedding of `T`.
pub fn diag_embed(t: &DenseTensor) -> MultipartiteMatrix {
    MultipartiteMatrix { dims: t.shape.clone(), matrix: CMatrix::diag(&t.data) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re, ONE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn w(n: usize) -> DenseTensor {
        DenseTensor::from_fn(&vec![2; n], |idx| {
            if idx.iter().sum::<usize>() == 1 { ONE } else { ZERO }
        })
    }

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let b = CMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        b.adjoint().matmul(&b)
    }

    #[test]
    fn norms() {
        assert_eq!(frobenius_norm(&DenseTensor::zeros(&[2, 3])), 0.0);
        assert!((frobenius_norm(&w(3)) - 3f64.sqrt()).abs() < 1e-15);
        let id = DenseTensor::from_real(vec![2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((frobenius_norm(&id) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unfold_examples() {
        let m = unfold(&w(2), &[1]).unwrap();
        assert_eq!(m, CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap());
        let prod = DenseTensor::product(&[vec![ONE, c(0.0, 2.0)], vec![re(0.5), ONE, ONE], vec![ONE, re(-1.0)]]);
        for left in [vec![1], vec![2], vec![1, 3]] {
            assert_eq!(matrix_rank(&unfold(&prod, &left).unwrap(), DEFAULT_RANK_TOL), 1);
        }
        assert_eq!(matrix_rank(&unfold(&w(4), &[1, 2]).unwrap(), DEFAULT_RANK_TOL), 2);
        assert!(unfold(&w(3), &[]).is_err());
        assert!(unfold(&w(3), &[1, 2, 3]).is_err());
        assert!(unfold(&w(3), &[4]).is_err());
    }

    #[test]
    fn psd_and_lambda_max() {
        let id = HermitianMatrix::new(CMatrix::identity(3)).unwrap();
        assert!(is_psd(&id, 1e-12));
        let d = HermitianMatrix::new(CMatrix::diag(&[ONE, re(-1.0)])).unwrap();
        assert!(!is_psd(&d, 1e-12));
        let d = HermitianMatrix::new(CMatrix::diag(&[re(3.0), ONE])).unwrap();
        assert!((lambda_max(&d) - 3.0).abs() < 1e-14);
        assert!(HermitianMatrix::new(CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn diag_embed_examples() {
        let t = DenseTensor::from_real(vec![2], &[0.3, 0.7]).unwrap();
        let rho = diag_embed(&t);
        assert_eq!(rho.matrix, CMatrix::diag(&[re(0.3), re(0.7)]));
        let rho = diag_embed(&w(3));
        assert_eq!(rho.matrix.rows(), 8);
        assert_eq!(rho.diagonal(), w(3));
        assert!(rho.is_psd(1e-12));
        let neg = DenseTensor::from_real(vec![2, 2], &[1.0, -0.1, 0.0, 0.2]).unwrap();
        assert!(!diag_embed(&neg).is_psd(1e-12));
    }

    #[test]
    fn lambda_max_superadditive_on_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let d = 1 + trial % 8;
            let a = random_psd(d, &mut rng);
            let b = random_psd(d, &mut rng);
            let la = linalg::lambda_max(&a);
            let lb = linalg::lambda_max(&b);
            let lab = linalg::lambda_max(&(&a + &b));
            assert!(la.max(lb) <= lab + 1e-10);
        }
    }

    #[test]
    fn lambda_max_of_tensor_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=4usize {
            let rho = random_psd(2, &mut rng);
            let l = linalg::lambda_max(&rho);
            let mut p = rho.clone();
            for _ in 1..n {
                p = p.kron(&rho);
            }
            let lp = linalg::lambda_max(&p);
            assert!((lp / l.powi(n as i32) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let t = random_tensor(&[2, 3, 2], 9);
        let s = serde_json::to_string(&t).unwrap();
        let back: DenseTensor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn unfolding_preserves_norm(seed in 0u64..1000, mask in 1u32..15) {
            let t = random_tensor(&[2, 3, 2, 2], seed);
            let left: Vec<usize> = (0..4).filter(|s| mask >> s & 1 == 1).map(|s| s + 1).collect();
            prop_assume!(left.len() < 4);
            let m = unfold(&t, &left).unwrap();
            prop_assert!((m.frobenius_norm() - frobenius_norm(&t)).abs() < 1e-12);
        }

        #[test]
        fn unfolding_rank_ignores_side_order(seed in 0u64..1000) {
            // rank-2 tensor: sum of two products
            let a = random_tensor(&[2, 3, 2, 2], seed);
            let t = a.permute_sites(&[1, 0, 3, 2]).unwrap();
            let r1 = matrix_rank(&unfold(&a, &[1, 2]).unwrap(), DEFAULT_RANK_TOL);
            let r2 = matrix_rank(&unfold(&t, &[1, 2]).unwrap(), DEFAULT_RANK_TOL);
            prop_assert_eq!(r1, r2);
        }
    }
}
