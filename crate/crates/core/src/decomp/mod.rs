//! The five decomposition types on a weighted simplicial complex with a
//! group action, their validation, and conversions between them.
//!
//! Local families are indexed by local assignments `β ∈ I^{F~_i}`, encoded
//! as mixed-radix integers over the copies at vertex `i` in canonical order
//! (facet mask ascending, copy ordinal ascending), first copy most
//! significant.
//!
//! Every vertex stores its own locals. Symmetric decompositions are built
//! from orbit representatives by transport, so copies along an orbit are
//! bitwise equal.

mod contract;
mod json;

pub use contract::*;
pub use json::{Decomposition, DecompositionJson, LocalJson};
pub(crate) use json::{stack, unstack};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::tensor::psd_check;
use crate::wsc::{local_index_map, GroupAction, WeightedSimplicialComplex};

pub const PSD_TOL: f64 = 1e-10;
pub const NONNEG_TOL: f64 = 1e-12;

/// Digits of local index `b` over `m` legs of range `r`, first most significant.
pub fn local_digits(b: usize, m: usize, r: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    let mut rem = b;
    for k in (0..m).rev() {
        out[k] = rem % r;
        rem /= r;
    }
    out
}

pub fn local_index(digits: &[usize], r: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * r + d)
}

/// Complex, action and bond dimension shared by all variants.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    action: GroupAction,
    r: usize,
}

impl Frame {
    pub fn new(action: &GroupAction, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("bond dimension must be positive"));
        }
        let wsc = action.complex();
        for i in 0..wsc.n() {
            let m = wsc.copies_at(i).len() as u32;
            if r.checked_pow(m).is_none_or(|s| s > 1 << 26) {
                return Err(Error::Resource(format!("local index set r^{m} too large at vertex {}", i + 1)));
            }
        }
        Ok(Self { action: action.clone(), r })
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn complex(&self) -> &WeightedSimplicialComplex {
        self.action.complex()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.complex().n()
    }

    /// `r^{|F~_i|}` for 0-based `i`.
    pub fn local_size(&self, i: usize) -> usize {
        self.complex().local_size(i, self.r)
    }

    pub fn local_legs(&self, i: usize) -> usize {
        self.complex().copies_at(i).len()
    }

    /// 0-based orbit representatives, ascending.
    pub fn representatives(&self) -> Vec<usize> {
        self.action.orbit_representatives().into_iter().map(|v| v - 1).collect()
    }

    /// Builds per-vertex data from representative data by transport.
    fn transport_all<T>(&self, reps: &[T], mv: impl Fn(&T, &[usize]) -> T) -> Result<Vec<T>> {
        let rep_ids = self.representatives();
        if reps.len() != rep_ids.len() {
            return Err(Error::invalid(format!(
                "expected locals for {} orbit representatives, got {}",
                rep_ids.len(),
                reps.len()
            )));
        }
        Ok((0..self.n())
            .map(|i| {
                let (rep, g) = self.action.transport(i);
                let k = rep_ids.iter().position(|x| x == rep).expect("representative listed");
                let map = local_index_map(self.complex(), g, *rep, self.r);
                mv(&reps[k], &map)
            })
            .collect())
    }

    /// For every generator and vertex: `(generator, i, g(i), map)`.
    fn symmetry_pairs(&self) -> Vec<(usize, usize, usize, Vec<usize>)> {
        let mut out = Vec::new();
        for (gi, g) in self.action.generators().iter().enumerate() {
            for i in 0..self.n() {
                out.push((gi, i, g.vertex[i], local_index_map(self.complex(), g, i, self.r)));
            }
        }
        out
    }
}

fn move_columns(m: &CMatrix, map: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.rows(), m.cols());
    for (b, &gb) in map.iter().enumerate() {
        for j in 0..m.rows() {
            out[(j, gb)] = m[(j, b)];
        }
    }
    out
}

fn move_both(m: &CMatrix, map: &[usize]) -> CMatrix {
    let mut out = CMatrix::zeros(m.rows(), m.cols());
    for (b, &gb) in map.iter().enumerate() {
        for (b2, &gb2) in map.iter().enumerate() {
            out[(gb, gb2)] = m[(b, b2)];
        }
    }
    out
}

fn move_family(f: &[CMatrix], map: &[usize]) -> Vec<CMatrix> {
    let mut out = f.to_vec();
    for (b, &gb) in map.iter().enumerate() {
        out[gb] = f[b].clone();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape { vertex: usize, message: String },
    Psd { vertex: usize, index: usize, lambda_min: f64 },
    Hermitian { vertex: usize, index: usize, deviation: f64 },
    Negative { vertex: usize, beta: usize, entry: usize, value: f64 },
    NotReal { vertex: usize, beta: usize, entry: usize, imag: f64 },
    Symmetry { generator: usize, vertex: usize, image: usize, deviation: f64 },
    NonFinite { vertex: usize },
}

/// List of violated invariants; empty iff valid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

/// Local vectors `v^[i]_β ∈ C^{d_i}`, stored as `d_i x r^{|F~_i|}` matrices
/// whose column `β` is `v^[i]_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnconstrainedDecomposition {
    frame: Frame,
    locals: Vec<CMatrix>,
}

impl UnconstrainedDecomposition {
    pub fn new(action: &GroupAction, r: usize, locals: Vec<CMatrix>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        check_count(&frame, locals.len())?;
        for (i, m) in locals.iter().enumerate() {
            if m.cols() != frame.local_size(i) || m.rows() == 0 {
                return Err(Error::invalid(format!(
                    "vertex {}: local needs d x {} entries, got {}x{}",
                    i + 1,
                    frame.local_size(i),
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Self { frame, locals })
    }

    /// Locals given at the orbit representatives, in ascending order.
    pub fn from_representatives(action: &GroupAction, r: usize, reps: Vec<CMatrix>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        let locals = frame.transport_all(&reps, move_columns)?;
        Self::new(action, r, locals)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn action(&self) -> &GroupAction {
        self.frame.action()
    }

    pub fn complex(&self) -> &WeightedSimplicialComplex {
        self.frame.complex()
    }

    pub fn r(&self) -> usize {
        self.frame.r
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.locals.iter().map(|m| m.rows()).collect()
    }

    /// `W^[i] = Σ_β |v^[i]_β⟩⟨β|` for 0-based `i`.
    pub fn local(&self, i: usize) -> &CMatrix {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[CMatrix] {
        &self.locals
    }

    pub fn into_locals(self) -> Vec<CMatrix> {
        self.locals
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        for (i, m) in self.locals.iter().enumerate() {
            if !m.is_finite() {
                rep.push(Violation::NonFinite { vertex: i + 1 });
            }
        }
        for (gi, i, gi_v, map) in self.frame.symmetry_pairs() {
            let moved = move_columns(&self.locals[i], &map);
            if moved.rows() != self.locals[gi_v].rows() {
                rep.push(Violation::Shape {
                    vertex: gi_v + 1,
                    message: format!("physical dimension differs from vertex {}", i + 1),
                });
                continue;
            }
            let dev = moved.max_abs_diff(&self.locals[gi_v]);
            if dev > 0.0 {
                rep.push(Violation::Symmetry { generator: gi, vertex: i + 1, image: gi_v + 1, deviation: dev });
            }
        }
        rep
    }
}

fn check_count(frame: &Frame, got: usize) -> Result<()> {
    if got != frame.n() {
        return Err(Error::invalid(format!("expected {} local families, got {}", frame.n(), got)));
    }
    Ok(())
}

/// Unconstrained decomposition whose local vectors are entrywise
/// nonnegative (stored as complex with zero imaginary part).
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegativeDecomposition(UnconstrainedDecomposition);

impl NonnegativeDecomposition {
    /// Wraps without checking; call `validate` for the sign constraints.
    pub fn new_unchecked(inner: UnconstrainedDecomposition) -> Self {
        Self(inner)
    }

    pub fn new(inner: UnconstrainedDecomposition) -> Result<Self> {
        let d = Self(inner);
        let rep = d.validate();
        if !rep.is_valid() {
            return Err(Error::invalid(format!("not a valid nonnegative decomposition: {:?}", rep.violations[0])));
        }
        Ok(d)
    }

    pub fn from_real_locals(action: &GroupAction, r: usize, locals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        // locals[i][β][j]
        let mats = locals
            .into_iter()
            .map(|fam| {
                let d = fam.first().map_or(0, |v| v.len());
                let cols = fam.len();
                CMatrix::from_fn(d, cols, |j, b| linalg::re(fam[b][j]))
            })
            .collect();
        Self::new(UnconstrainedDecomposition::new(action, r, mats)?)
    }

    pub fn inner(&self) -> &UnconstrainedDecomposition {
        &self.0
    }

    pub fn into_inner(self) -> UnconstrainedDecomposition {
        self.0
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = self.0.validate();
        for (i, m) in self.0.locals.iter().enumerate() {
            for b in 0..m.cols() {
                for j in 0..m.rows() {
                    let z = m[(j, b)];
                    if z.im.abs() > NONNEG_TOL {
                        rep.push(Violation::NotReal { vertex: i + 1, beta: b, entry: j, imag: z.im });
                    }
                    if z.re < -NONNEG_TOL {
                        rep.push(Violation::Negative { vertex: i + 1, beta: b, entry: j, value: z.re });
                    }
                }
            }
        }
        rep
    }
}

/// Local psd matrices `E^[i]_j` on `C^{I^{F~_i}}`, one per physical index.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdDecomposition {
    frame: Frame,
    locals: Vec<Vec<CMatrix>>,
}

impl PsdDecomposition {
    pub fn new(action: &GroupAction, r: usize, locals: Vec<Vec<CMatrix>>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        check_count(&frame, locals.len())?;
        for (i, fam) in locals.iter().enumerate() {
            let l = frame.local_size(i);
            if fam.is_empty() || fam.iter().any(|e| e.rows() != l || e.cols() != l) {
                return Err(Error::invalid(format!(
                    "vertex {}: need a nonempty family of {l}x{l} matrices",
                    i + 1
                )));
            }
        }
        Ok(Self { frame, locals })
    }

    pub fn from_representatives(action: &GroupAction, r: usize, reps: Vec<Vec<CMatrix>>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        let locals = frame.transport_all(&reps, |fam, map| fam.iter().map(|e| move_both(e, map)).collect())?;
        Self::new(action, r, locals)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn action(&self) -> &GroupAction {
        self.frame.action()
    }

    pub fn complex(&self) -> &WeightedSimplicialComplex {
        self.frame.complex()
    }

    pub fn r(&self) -> usize {
        self.frame.r
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.locals.iter().map(|f| f.len()).collect()
    }

    /// `E^[i]_j` for 0-based vertex `i`.
    pub fn local(&self, i: usize) -> &[CMatrix] {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[Vec<CMatrix>] {
        &self.locals
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        for (i, fam) in self.locals.iter().enumerate() {
            for (j, e) in fam.iter().enumerate() {
                if !e.is_finite() {
                    rep.push(Violation::NonFinite { vertex: i + 1 });
                    continue;
                }
                let dev = e.hermitian_deviation();
                if dev > PSD_TOL * e.frobenius_norm().max(1.0) {
                    rep.push(Violation::Hermitian { vertex: i + 1, index: j, deviation: dev });
                }
                if !psd_check(e, PSD_TOL) {
                    rep.push(Violation::Psd { vertex: i + 1, index: j, lambda_min: linalg::lambda_min(e) });
                }
            }
        }
        for (gi, i, gv, map) in self.frame.symmetry_pairs() {
            if self.locals[i].len() != self.locals[gv].len() {
                rep.push(Violation::Shape { vertex: gv + 1, message: format!("physical dimension differs from vertex {}", i + 1) });
                continue;
            }
            let dev = self.locals[i]
                .iter()
                .zip(&self.locals[gv])
                .map(|(e, f)| move_both(e, &map).max_abs_diff(f))
                .fold(0.0, f64::max);
            if dev > 0.0 {
                rep.push(Violation::Symmetry { generator: gi, vertex: i + 1, image: gv + 1, deviation: dev });
            }
        }
        rep
    }
}

/// Local psd matrices `A^[i]_β ∈ M_{d_i}`, one per local assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableDecomposition {
    frame: Frame,
    locals: Vec<Vec<CMatrix>>,
}

impl SeparableDecomposition {
    pub fn new(action: &GroupAction, r: usize, locals: Vec<Vec<CMatrix>>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        check_count(&frame, locals.len())?;
        for (i, fam) in locals.iter().enumerate() {
            let d = fam.first().map_or(0, |a| a.rows());
            if fam.len() != frame.local_size(i) || d == 0 || fam.iter().any(|a| a.rows() != d || a.cols() != d) {
                return Err(Error::invalid(format!(
                    "vertex {}: need {} square matrices of equal size",
                    i + 1,
                    frame.local_size(i)
                )));
            }
        }
        Ok(Self { frame, locals })
    }

    pub fn from_representatives(action: &GroupAction, r: usize, reps: Vec<Vec<CMatrix>>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        let locals = frame.transport_all(&reps, |f, map| move_family(f, map))?;
        Self::new(action, r, locals)
    }

    /// `A^[i]_β = diag(v^[i]_β)`.
    pub fn from_nonnegative(dec: &NonnegativeDecomposition) -> Self {
        let u = dec.inner();
        let locals = u
            .locals
            .iter()
            .map(|m| (0..m.cols()).map(|b| CMatrix::diag(&m.column(b))).collect())
            .collect();
        Self { frame: u.frame.clone(), locals }
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn action(&self) -> &GroupAction {
        self.frame.action()
    }

    pub fn complex(&self) -> &WeightedSimplicialComplex {
        self.frame.complex()
    }

    pub fn r(&self) -> usize {
        self.frame.r
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.locals.iter().map(|f| f[0].rows()).collect()
    }

    pub fn local(&self, i: usize) -> &[CMatrix] {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[Vec<CMatrix>] {
        &self.locals
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        for (i, fam) in self.locals.iter().enumerate() {
            for (b, a) in fam.iter().enumerate() {
                if !a.is_finite() {
                    rep.push(Violation::NonFinite { vertex: i + 1 });
                    continue;
                }
                let dev = a.hermitian_deviation();
                if dev > PSD_TOL * a.frobenius_norm().max(1.0) {
                    rep.push(Violation::Hermitian { vertex: i + 1, index: b, deviation: dev });
                }
                if !psd_check(a, PSD_TOL) {
                    rep.push(Violation::Psd { vertex: i + 1, index: b, lambda_min: linalg::lambda_min(a) });
                }
            }
        }
        family_symmetry(&self.frame, &self.locals, &mut rep);
        rep
    }
}

fn family_symmetry(frame: &Frame, locals: &[Vec<CMatrix>], rep: &mut ValidationReport) {
    for (gi, i, gv, map) in frame.symmetry_pairs() {
        let moved = move_family(&locals[i], &map);
        let mut dev: f64 = 0.0;
        for (a, b) in moved.iter().zip(&locals[gv]) {
            if a.rows() != b.rows() || a.cols() != b.cols() {
                dev = f64::INFINITY;
                break;
            }
            dev = dev.max(a.max_abs_diff(b));
        }
        if dev > 0.0 {
            rep.push(Violation::Symmetry { generator: gi, vertex: i + 1, image: gv + 1, deviation: dev });
        }
    }
}

/// Local matrices `L^[i]_β ∈ M_{d_i, d'_i}`; the decomposed operator is
/// `L = Σ_α ⊗_i L^[i]_{α|_i}` and the state is `L L†`.
#[derive(Clone, Debug, PartialEq)]
pub struct PurificationDecomposition {
    frame: Frame,
    locals: Vec<Vec<CMatrix>>,
}

impl PurificationDecomposition {
    pub fn new(action: &GroupAction, r: usize, locals: Vec<Vec<CMatrix>>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        check_count(&frame, locals.len())?;
        for (i, fam) in locals.iter().enumerate() {
            let (d, e) = fam.first().map_or((0, 0), |a| (a.rows(), a.cols()));
            if fam.len() != frame.local_size(i) || d == 0 || e == 0 || fam.iter().any(|a| a.rows() != d || a.cols() != e) {
                return Err(Error::invalid(format!(
                    "vertex {}: need {} matrices of equal shape",
                    i + 1,
                    frame.local_size(i)
                )));
            }
        }
        Ok(Self { frame, locals })
    }

    pub fn from_representatives(action: &GroupAction, r: usize, reps: Vec<Vec<CMatrix>>) -> Result<Self> {
        let frame = Frame::new(action, r)?;
        let locals = frame.transport_all(&reps, |f, map| move_family(f, map))?;
        Self::new(action, r, locals)
    }

    /// Purification of the diagonal embedding of a psd decomposition's
    /// tensor: with `E_j = Y_j Y_j†`, `(L_β)_{j,(j,k)} = (Y_j)_{β,k}`.
    /// Ancilla dimension is `d_i · r^{|F~_i|}`.
    pub fn from_psd(dec: &PsdDecomposition) -> Result<Self> {
        let frame = dec.frame.clone();
        let reps: Vec<Vec<CMatrix>> = frame
            .representatives()
            .into_iter()
            .map(|i| {
                let fam = &dec.locals[i];
                let d = fam.len();
                let l = frame.local_size(i);
                let ys: Vec<CMatrix> = fam.iter().map(|e| linalg::psd_factor(e, 0.0).adjoint()).collect();
                (0..l)
                    .map(|b| {
                        let mut m = CMatrix::zeros(d, d * l);
                        for (j, y) in ys.iter().enumerate() {
                            for k in 0..y.cols() {
                                m[(j, j * l + k)] = y[(b, k)];
                            }
                        }
                        m
                    })
                    .collect()
            })
            .collect();
        Self::from_representatives(dec.action(), dec.r(), reps)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn action(&self) -> &GroupAction {
        self.frame.action()
    }

    pub fn complex(&self) -> &WeightedSimplicialComplex {
        self.frame.complex()
    }

    pub fn r(&self) -> usize {
        self.frame.r
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.locals.iter().map(|f| f[0].rows()).collect()
    }

    pub fn ancilla_dims(&self) -> Vec<usize> {
        self.locals.iter().map(|f| f[0].cols()).collect()
    }

    pub fn local(&self, i: usize) -> &[CMatrix] {
        &self.locals[i]
    }

    pub fn locals(&self) -> &[Vec<CMatrix>] {
        &self.locals
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        for (i, fam) in self.locals.iter().enumerate() {
            if fam.iter().any(|a| !a.is_finite()) {
                rep.push(Violation::NonFinite { vertex: i + 1 });
            }
        }
        family_symmetry(&self.frame, &self.locals, &mut rep);
        rep
    }
}

/// Bond-`r²` unconstrained decomposition with the same contraction:
/// `⟨j|v_γ⟩ = (E_j)_{β,β'}` where leg `k` of `γ` is `β_k·r + β'_k`.
pub fn psd_to_unconstrained(dec: &PsdDecomposition) -> UnconstrainedDecomposition {
    let r = dec.r();
    let r2 = r * r;
    let locals: Vec<CMatrix> = dec
        .locals
        .iter()
        .enumerate()
        .map(|(i, fam)| {
            let m = dec.frame.local_legs(i);
            let size = r2.pow(m as u32);
            let mut w = CMatrix::zeros(fam.len(), size);
            for g in 0..size {
                let legs = local_digits(g, m, r2);
                let b: Vec<usize> = legs.iter().map(|l| l / r).collect();
                let b2: Vec<usize> = legs.iter().map(|l| l % r).collect();
                let (bi, bi2) = (local_index(&b, r), local_index(&b2, r));
                for (j, e) in fam.iter().enumerate() {
                    w[(j, g)] = e[(bi, bi2)];
                }
            }
            w
        })
        .collect();
    UnconstrainedDecomposition::new(dec.action(), r2, locals).expect("shapes follow from the input")
}
