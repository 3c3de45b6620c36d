//! Random instances of every decomposition type, for tests and experiments.
//! Symmetric instances are drawn at orbit representatives and transported.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decomp::{
    NonnegativeDecomposition, PsdDecomposition, PurificationDecomposition, SeparableDecomposition,
    UnconstrainedDecomposition,
};
use crate::correlations::{KrausChannel, Povm};
use crate::error::Result;
use crate::linalg::{self, c, CMatrix, C64};
use crate::wsc::GroupAction;

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    c(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.random::<f64>(), 0.0))
}

/// `B† B` with `B` of shape `rank x dim`.
pub fn random_psd_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMatrix {
    let b = gaussian_matrix(rank, dim, rng);
    b.adjoint().matmul(&b).hermitian_part()
}

fn local_sizes(action: &GroupAction, r: usize) -> Vec<usize> {
    action
        .orbit_representatives()
        .into_iter()
        .map(|v| r.pow(action.complex().local_degree(v) as u32))
        .collect()
}

pub fn random_unconstrained<R: Rng + ?Sized>(action: &GroupAction, r: usize, d: usize, rng: &mut R) -> Result<UnconstrainedDecomposition> {
    let reps = local_sizes(action, r).into_iter().map(|l| gaussian_matrix(d, l, rng)).collect();
    UnconstrainedDecomposition::from_representatives(action, r, reps)
}

pub fn random_nonnegative<R: Rng + ?Sized>(action: &GroupAction, r: usize, d: usize, rng: &mut R) -> Result<NonnegativeDecomposition> {
    let reps = local_sizes(action, r).into_iter().map(|l| uniform_matrix(d, l, rng)).collect();
    NonnegativeDecomposition::new(UnconstrainedDecomposition::from_representatives(action, r, reps)?)
}

pub fn random_psd<R: Rng + ?Sized>(action: &GroupAction, r: usize, d: usize, rng: &mut R) -> Result<PsdDecomposition> {
    let reps = local_sizes(action, r)
        .into_iter()
        .map(|l| (0..d).map(|_| random_psd_matrix(l, l, rng)).collect())
        .collect();
    PsdDecomposition::from_representatives(action, r, reps)
}

pub fn random_separable<R: Rng + ?Sized>(action: &GroupAction, r: usize, d: usize, rng: &mut R) -> Result<SeparableDecomposition> {
    let reps = local_sizes(action, r)
        .into_iter()
        .map(|l| (0..l).map(|_| random_psd_matrix(d, d, rng)).collect())
        .collect();
    SeparableDecomposition::from_representatives(action, r, reps)
}

pub fn random_purification<R: Rng + ?Sized>(
    action: &GroupAction,
    r: usize,
    d: usize,
    ancilla: usize,
    rng: &mut R,
) -> Result<PurificationDecomposition> {
    let reps = local_sizes(action, r)
        .into_iter()
        .map(|l| (0..l).map(|_| gaussian_matrix(d, ancilla, rng)).collect())
        .collect();
    PurificationDecomposition::from_representatives(action, r, reps)
}

/// `S^{-1/2} M_j S^{-1/2}` for random psd `M_j` with `S = Σ_j M_j`.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Povm {
    let ms: Vec<CMatrix> = (0..outcomes).map(|_| random_psd_matrix(dim, dim, rng)).collect();
    let s = ms.iter().fold(CMatrix::zeros(dim, dim), |acc, m| &acc + m);
    let e = linalg::eigh(&s);
    let inv_sqrt = CMatrix::from_fn(dim, dim, |a, b| {
        (0..dim).map(|l| e.vectors[(a, l)] * e.vectors[(b, l)].conj() / e.values[l].sqrt()).sum()
    });
    let elements = ms.iter().map(|m| inv_sqrt.matmul(m).matmul(&inv_sqrt).hermitian_part()).collect();
    Povm::new_unchecked(elements).expect("square elements")
}

/// Kraus operators sliced from a random isometry `C^{d_in} → C^{count} ⊗ C^{d_out}`.
/// `count` is raised to `⌈d_in / d_out⌉` when smaller.
pub fn random_channel<R: Rng + ?Sized>(d_in: usize, d_out: usize, count: usize, rng: &mut R) -> KrausChannel {
    let count = count.max(d_in.div_ceil(d_out));
    let (q, _) = linalg::qr_thin(&gaussian_matrix(count * d_out, d_in, rng));
    let kraus = (0..count)
        .map(|k| CMatrix::from_fn(d_out, d_in, |x, y| q[(k * d_out + x, y)]))
        .collect();
    KrausChannel::new_unchecked(kraus).expect("equal shapes")
}
