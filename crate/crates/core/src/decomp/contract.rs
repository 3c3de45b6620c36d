//! Contractions of decompositions to global tensors and operators.
//!
//! Two routes compute `Σ_α ⊗_i M_i[:, α|_i]`:
//!
//! - sequential: absorb vertices in order, keeping a leg open for every
//!   facet copy that touches both absorbed and pending vertices; a copy is
//!   summed out when its last vertex is absorbed. Cost is governed by the
//!   largest number of simultaneously open legs.
//! - exhaustive: enumerate every global assignment `α ∈ I^{F~}`. Used as
//!   an oracle.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ONE, ZERO};
use crate::tensor::{self, DenseTensor, MultipartiteMatrix};
use crate::wsc::WeightedSimplicialComplex;

use super::{
    local_digits, NonnegativeDecomposition, PsdDecomposition, PurificationDecomposition,
    SeparableDecomposition, UnconstrainedDecomposition,
};

pub const ENUMERATION_CAP: u128 = 1 << 30;
pub const PSD_NEGATIVITY_TOL: f64 = 1e-9;
pub const APPLY_LOCALS_TOL: f64 = 1e-10;

/// Sequential contraction of per-vertex local matrices `M_i` of shape
/// `d_i x r^{|F~_i|}`.
pub fn contract_locals(wsc: &WeightedSimplicialComplex, r: usize, locals: &[CMatrix]) -> Result<DenseTensor> {
    let n = wsc.n();
    if locals.len() != n {
        return Err(Error::invalid(format!("expected {n} locals, got {}", locals.len())));
    }
    let copies = wsc.facet_copies();
    let last: Vec<usize> = copies.iter().map(|c| 63 - c.mask.leading_zeros() as usize).collect();
    let mut open: Vec<usize> = Vec::new();
    // state[(p * open_size) + o]
    let mut state = vec![ONE];
    let mut p_size = 1usize;
    for (i, m) in locals.iter().enumerate() {
        let ci = wsc.copies_at(i);
        let mut union: Vec<usize> = open.iter().chain(ci).copied().collect();
        union.sort_unstable();
        union.dedup();
        let new_open: Vec<usize> = union.iter().copied().filter(|&c| last[c] != i).collect();
        let u_size = (r as u128).pow(union.len() as u32);
        let work = u_size * p_size as u128 * m.rows() as u128;
        if u_size > ENUMERATION_CAP || work > 1 << 36 {
            return Err(Error::Resource(format!(
                "sequential contraction needs {u_size} open-leg assignments at vertex {}",
                i + 1
            )));
        }
        let u_size = u_size as usize;
        let pos_of = |c: usize| union.iter().position(|&u| u == c).expect("leg in union");
        let open_pos: Vec<usize> = open.iter().map(|&c| pos_of(c)).collect();
        let local_pos: Vec<usize> = ci.iter().map(|&c| pos_of(c)).collect();
        let new_pos: Vec<usize> = new_open.iter().map(|&c| pos_of(c)).collect();
        let old_size = r.pow(open.len() as u32);
        let new_size = r.pow(new_open.len() as u32);
        let d = m.rows();
        let mut next = vec![ZERO; p_size * d * new_size];
        let mut digits = vec![0usize; union.len()];
        for u in 0..u_size {
            let mut rem = u;
            for k in (0..union.len()).rev() {
                digits[k] = rem % r;
                rem /= r;
            }
            let oi = open_pos.iter().fold(0, |acc, &k| acc * r + digits[k]);
            let bi = local_pos.iter().fold(0, |acc, &k| acc * r + digits[k]);
            let ni = new_pos.iter().fold(0, |acc, &k| acc * r + digits[k]);
            for j in 0..d {
                let w = m[(j, bi)];
                if w == ZERO {
                    continue;
                }
                for p in 0..p_size {
                    let x = state[p * old_size + oi];
                    if x != ZERO {
                        next[(p * d + j) * new_size + ni] += x * w;
                    }
                }
            }
        }
        state = next;
        p_size *= d;
        open = new_open;
    }
    debug_assert!(open.is_empty());
    let shape: Vec<usize> = locals.iter().map(|m| m.rows()).collect();
    Ok(DenseTensor::from_raw(shape, state))
}

fn enumeration_size(wsc: &WeightedSimplicialComplex, r: usize, factor: u32) -> Result<usize> {
    let total = (r as u128).checked_pow(wsc.num_copies() as u32 * factor);
    match total {
        Some(t) if t <= ENUMERATION_CAP => Ok(t as usize),
        _ => Err(Error::Resource(format!(
            "exhaustive enumeration of r^{} = {}^{} global assignments exceeds 2^30",
            wsc.num_copies() as u32 * factor,
            r,
            wsc.num_copies() as u32 * factor
        ))),
    }
}

/// Per-vertex local index of a global assignment.
fn restrict(wsc: &WeightedSimplicialComplex, alpha: &[usize], i: usize, r: usize) -> usize {
    wsc.copies_at(i).iter().fold(0, |acc, &c| acc * r + alpha[c])
}

/// Exhaustive-enumeration oracle for [`contract_locals`].
pub fn contract_locals_exhaustive(
    wsc: &WeightedSimplicialComplex,
    r: usize,
    locals: &[CMatrix],
) -> Result<DenseTensor> {
    let total = enumeration_size(wsc, r, 1)?;
    let nc = wsc.num_copies();
    let shape: Vec<usize> = locals.iter().map(|m| m.rows()).collect();
    let mut out = DenseTensor::zeros(&shape);
    for a in 0..total {
        let alpha = local_digits(a, nc, r);
        let vectors: Vec<Vec<C64>> = (0..wsc.n())
            .map(|i| locals[i].column(restrict(wsc, &alpha, i, r)))
            .collect();
        let term = DenseTensor::product(&vectors);
        for (o, t) in out.data_mut().iter_mut().zip(term.data()) {
            *o += t;
        }
    }
    Ok(out)
}

/// `T = Σ_α ⊗_i v^[i]_{α|_i}`.
pub fn contract_vector(dec: &UnconstrainedDecomposition) -> Result<DenseTensor> {
    contract_locals(dec.complex(), dec.r(), dec.locals())
}

pub fn contract_vector_exhaustive(dec: &UnconstrainedDecomposition) -> Result<DenseTensor> {
    contract_locals_exhaustive(dec.complex(), dec.r(), dec.locals())
}

pub fn contract_nonnegative(dec: &NonnegativeDecomposition) -> Result<DenseTensor> {
    contract_vector(dec.inner())
}

/// `T_j = Σ_{α,α'} Π_i (E^[i]_{j_i})_{α|_i, α'|_i}`, evaluated through the
/// bond-`r²` unconstrained decomposition. Fails if an entry is negative
/// beyond `PSD_NEGATIVITY_TOL · max(1, max|T|)`.
pub fn contract_psd(dec: &PsdDecomposition) -> Result<DenseTensor> {
    let t = contract_vector(&super::psd_to_unconstrained(dec))?;
    check_psd_contraction(&t)?;
    Ok(t)
}

fn check_psd_contraction(t: &DenseTensor) -> Result<()> {
    let tol = PSD_NEGATIVITY_TOL * t.max_abs().max(1.0);
    if let Some((k, z)) = t.data().iter().enumerate().find(|(_, z)| z.re < -tol || z.im.abs() > tol) {
        return Err(Error::invalid(format!(
            "psd contraction has entry {:?} = {z}, not a nonnegative real",
            t.multi_index(k)
        )));
    }
    Ok(())
}

/// Double-enumeration oracle for [`contract_psd`].
pub fn contract_psd_exhaustive(dec: &PsdDecomposition) -> Result<DenseTensor> {
    let wsc = dec.complex();
    let r = dec.r();
    let total = enumeration_size(wsc, r, 2)?;
    let nc = wsc.num_copies();
    let mut out = DenseTensor::zeros(&dec.dims());
    for a in 0..total {
        let both = local_digits(a, 2 * nc, r);
        let (alpha, alpha2) = both.split_at(nc);
        let vectors: Vec<Vec<C64>> = (0..wsc.n())
            .map(|i| {
                let (b, b2) = (restrict(wsc, alpha, i, r), restrict(wsc, alpha2, i, r));
                dec.local(i).iter().map(|e| e[(b, b2)]).collect()
            })
            .collect();
        let term = DenseTensor::product(&vectors);
        for (o, t) in out.data_mut().iter_mut().zip(term.data()) {
            *o += t;
        }
    }
    Ok(out)
}

/// Flattens a family of `a x b` matrices into columns of length `a·b`
/// (row-major) so it contracts as a vector decomposition.
fn flatten_family(fam: &[CMatrix]) -> CMatrix {
    let (a, b) = (fam[0].rows(), fam[0].cols());
    CMatrix::from_fn(a * b, fam.len(), |k, beta| fam[beta][(k / b, k % b)])
}

/// Contracts operator-valued locals and regroups sites `(j_1 k_1, …)` into
/// an `(Π a_i) x (Π b_i)` matrix.
fn contract_operator(
    wsc: &WeightedSimplicialComplex,
    r: usize,
    families: &[Vec<CMatrix>],
    exhaustive: bool,
) -> Result<CMatrix> {
    let flat: Vec<CMatrix> = families.iter().map(|f| flatten_family(f)).collect();
    let t = if exhaustive {
        contract_locals_exhaustive(wsc, r, &flat)?
    } else {
        contract_locals(wsc, r, &flat)?
    };
    let a: Vec<usize> = families.iter().map(|f| f[0].rows()).collect();
    let b: Vec<usize> = families.iter().map(|f| f[0].cols()).collect();
    let rows: usize = a.iter().product();
    let cols: usize = b.iter().product();
    let n = a.len();
    let mut m = CMatrix::zeros(rows, cols);
    let mut idx = vec![0usize; n];
    let shape = t.shape().to_vec();
    for k in 0..t.len() {
        let (mut row, mut col) = (0, 0);
        for s in 0..n {
            row = row * a[s] + idx[s] / b[s];
            col = col * b[s] + idx[s] % b[s];
        }
        m[(row, col)] = t.data()[k];
        tensor::increment(&mut idx, &shape);
    }
    Ok(m)
}

/// `ρ = Σ_α ⊗_i A^[i]_{α|_i}`.
pub fn contract_matrix(dec: &SeparableDecomposition) -> Result<MultipartiteMatrix> {
    let m = contract_operator(dec.complex(), dec.r(), dec.locals(), false)?;
    MultipartiteMatrix::new(dec.dims(), m)
}

pub fn contract_matrix_exhaustive(dec: &SeparableDecomposition) -> Result<MultipartiteMatrix> {
    let m = contract_operator(dec.complex(), dec.r(), dec.locals(), true)?;
    MultipartiteMatrix::new(dec.dims(), m)
}

/// The decomposed operator `L = Σ_α ⊗_i L^[i]_{α|_i}`.
pub fn purification_operator(dec: &PurificationDecomposition) -> Result<CMatrix> {
    contract_operator(dec.complex(), dec.r(), dec.locals(), false)
}

/// `ρ = L L†`.
pub fn contract_purification(dec: &PurificationDecomposition) -> Result<MultipartiteMatrix> {
    let l = purification_operator(dec)?;
    let rho = l.matmul(&l.adjoint()).hermitian_part();
    MultipartiteMatrix::new(dec.dims(), rho)
}

/// `|Ω_r⟩ = Σ_α ⊗_i |α|_i⟩`, site `i` of dimension `r^{|F~_i|}`.
pub fn structure_tensor(wsc: &WeightedSimplicialComplex, r: usize) -> Result<DenseTensor> {
    if r == 0 {
        return Err(Error::invalid("bond dimension must be positive"));
    }
    let locals: Vec<CMatrix> = (0..wsc.n()).map(|i| CMatrix::identity(wsc.local_size(i, r))).collect();
    contract_locals(wsc, r, &locals)
}

/// The local maps `W^[i] = Σ_β |v^[i]_β⟩⟨β|`, after checking that
/// `⊗_i W^[i] |Ω_r⟩` reproduces the contraction. Returns the maps and the
/// relative deviation.
pub fn apply_locals(dec: &UnconstrainedDecomposition) -> Result<(Vec<CMatrix>, f64)> {
    let omega = structure_tensor(dec.complex(), dec.r())?;
    let via_omega = tensor::apply_site_maps(&omega, dec.locals())?;
    let direct = contract_vector(dec)?;
    let dev = via_omega.distance(&direct)? / direct.frobenius_norm().max(f64::MIN_POSITIVE);
    let dev = if direct.frobenius_norm() == 0.0 { via_omega.frobenius_norm() } else { dev };
    if !(dev <= APPLY_LOCALS_TOL) {
        return Err(Error::construction("local maps applied to the structure tensor disagree with the contraction", dev));
    }
    Ok((dec.locals().to_vec(), dev))
}
