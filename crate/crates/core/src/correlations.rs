//! Correspondences between decompositions and correlation models:
//! nonnegative decompositions and hidden-variable models, psd
//! decompositions and states measured by local POVMs, purifications and
//! states sent through local channels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{
    contract_nonnegative, contract_psd, contract_purification, contract_vector, stack, unstack, DecompositionJson,
    Decomposition, NonnegativeDecomposition, PsdDecomposition, PurificationDecomposition, UnconstrainedDecomposition,
};
use crate::error::{Error, Result};
use crate::linalg::{self, re, CMatrix, C64, ZERO};
use crate::tensor::{apply_site_maps, increment, DenseTensor, HermitianMatrix, MultipartiteMatrix, TensorJson};
use crate::wsc::{local_index_map, make_simplex, symmetric_action, GroupAction};

pub const DIST_NEG_TOL: f64 = 1e-12;
pub const DIST_SUM_TOL: f64 = 1e-10;
pub const POVM_TOL: f64 = 1e-10;
pub const CPTP_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const EIGEN_REL_THRESHOLD: f64 = 1e-10;
pub const KRAUS_REL_TOL: f64 = 1e-12;
pub const STATE_NORM_TOL: f64 = 1e-10;
pub const CONSTRUCTION_NORM_TOL: f64 = 1e-9;
pub const HVM_TOL: f64 = 1e-10;

/// Real entrywise-nonnegative tensor summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution(DenseTensor);

impl Distribution {
    pub fn new(t: DenseTensor) -> Result<Self> {
        Self::with_renormalize(t, false)
    }

    /// With `renormalize`, a positive total is scaled to one before the sum
    /// check.
    pub fn with_renormalize(t: DenseTensor, renormalize: bool) -> Result<Self> {
        if let Some(z) = t.data().iter().find(|z| z.im.abs() > DIST_NEG_TOL || z.re < -DIST_NEG_TOL) {
            return Err(Error::invalid(format!("distribution entry {z} is not a nonnegative real")));
        }
        let mut t = t;
        let total = t.sum().re;
        if renormalize && total > 0.0 {
            t = t.scale(re(1.0 / total));
        }
        let total = t.sum().re;
        if (total - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.0
    }
}

/// Latent variable with `r` values, a prior, and per-site conditionals
/// `conditionals[i][α][j] = P(X_i = j | Λ = α)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariableModel {
    pub prior: Vec<f64>,
    pub conditionals: Vec<Vec<Vec<f64>>>,
}

fn probability_vector_deviation(p: &[f64]) -> f64 {
    let neg = p.iter().fold(0.0f64, |m, &x| m.max(-x));
    neg.max((p.iter().sum::<f64>() - 1.0).abs())
}

impl HiddenVariableModel {
    pub fn new(prior: Vec<f64>, conditionals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let m = Self { prior, conditionals };
        let dev = m.deviation()?;
        if dev > HVM_TOL {
            return Err(Error::invalid(format!("hidden-variable model is not normalized (deviation {dev:.3e})")));
        }
        Ok(m)
    }

    pub fn r(&self) -> usize {
        self.prior.len()
    }

    pub fn n(&self) -> usize {
        self.conditionals.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.conditionals.iter().map(|c| c.first().map_or(0, |v| v.len())).collect()
    }

    /// Largest normalization defect over the prior and every conditional.
    pub fn deviation(&self) -> Result<f64> {
        let r = self.r();
        if r == 0 || self.conditionals.is_empty() {
            return Err(Error::invalid("hidden-variable model needs r >= 1 and n >= 1"));
        }
        let mut dev = probability_vector_deviation(&self.prior);
        for site in &self.conditionals {
            if site.len() != r || site.iter().any(|v| v.is_empty() || v.len() != site[0].len()) {
                return Err(Error::invalid("conditionals must be r vectors of equal length per site"));
            }
            for v in site {
                dev = dev.max(probability_vector_deviation(v));
            }
        }
        Ok(dev)
    }

    pub fn is_symmetric(&self) -> bool {
        self.conditionals.windows(2).all(|w| w[0] == w[1])
    }
}

/// `Σ_α P(α) ∏_i P(X_i = j_i | α)`.
pub fn eval_hvm(model: &HiddenVariableModel) -> DenseTensor {
    let dims = model.dims();
    DenseTensor::from_fn(&dims, |idx| {
        let s: f64 = (0..model.r())
            .map(|a| model.prior[a] * idx.iter().enumerate().map(|(i, &j)| model.conditionals[i][a][j]).product::<f64>())
            .sum();
        re(s)
    })
}

fn require_simplex(action: &GroupAction) -> Result<()> {
    if !action.complex().is_simplex() {
        return Err(Error::invalid("hidden-variable correspondence needs the simplex complex"));
    }
    Ok(())
}

/// Conditionals by per-value normalization of the local vectors; the prior
/// collects the product of the site masses. Values whose local vector
/// vanishes at some site are dropped.
pub fn nn_to_hvm(dec: &NonnegativeDecomposition) -> Result<HiddenVariableModel> {
    let inner = dec.inner();
    require_simplex(inner.action())?;
    Distribution::new(contract_nonnegative(dec)?)?;
    let (n, r) = (inner.n(), inner.r());
    let mut prior = Vec::new();
    let mut conditionals: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    for a in 0..r {
        let cols: Vec<Vec<f64>> = (0..n).map(|i| inner.local(i).column(a).iter().map(|z| z.re).collect()).collect();
        let masses: Vec<f64> = cols.iter().map(|c| c.iter().sum()).collect();
        if masses.iter().any(|&m| m <= 0.0) {
            continue;
        }
        prior.push(masses.iter().product());
        for i in 0..n {
            conditionals[i].push(cols[i].iter().map(|x| x / masses[i]).collect());
        }
    }
    if prior.is_empty() {
        return Err(Error::invalid("every latent value has a vanishing local vector"));
    }
    Ok(HiddenVariableModel { prior, conditionals })
}

/// Symmetric models (identical conditionals at every site) spread the prior
/// as `P(α)^{1/n}` over the sites on the full permutation action; otherwise
/// the prior sits at site 1 under trivial symmetry.
pub fn hvm_to_nn(model: &HiddenVariableModel) -> Result<NonnegativeDecomposition> {
    model.deviation()?;
    let (n, r) = (model.n(), model.r());
    let simplex = make_simplex(n)?;
    let local = |i: usize, share: &dyn Fn(usize) -> f64| {
        let d = model.conditionals[i][0].len();
        CMatrix::from_fn(d, r, |j, a| re(model.conditionals[i][a][j] * share(a)))
    };
    let inner = if model.is_symmetric() {
        let action = symmetric_action(&simplex)?;
        let share = |a: usize| model.prior[a].max(0.0).powf(1.0 / n as f64);
        UnconstrainedDecomposition::from_representatives(&action, r, vec![local(0, &share)])?
    } else {
        let action = GroupAction::trivial(&simplex);
        let locals = (0..n)
            .map(|i| if i == 0 { local(i, &|a| model.prior[a].max(0.0)) } else { local(i, &|_| 1.0) })
            .collect();
        UnconstrainedDecomposition::new(&action, r, locals)?
    };
    NonnegativeDecomposition::new(inner)
}

/// Eigenvalues (ascending) and orthonormal eigenvector columns at a vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

fn check_family_symmetry(action: &GroupAction, r: usize, family: &[CMatrix]) -> Result<()> {
    let wsc = action.complex();
    for g in action.generators() {
        for i in 0..wsc.n() {
            let gi = g.vertex[i];
            let map = local_index_map(wsc, g, i, r);
            let (a, b) = (&family[i], &family[gi]);
            let tol = SYMMETRY_TOL * a.frobenius_norm().max(1.0);
            for (x, &gx) in map.iter().enumerate() {
                for (y, &gy) in map.iter().enumerate() {
                    let dev = (b[(gx, gy)] - a[(x, y)]).norm();
                    if dev > tol {
                        return Err(Error::invalid(format!(
                            "family is not symmetric: vertex {} vs {} deviates by {dev:.3e}",
                            i + 1,
                            gi + 1
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Per-vertex eigendecompositions of a symmetric Hermitian family, computed
/// at orbit representatives and relabeled along the orbit.
pub fn g_symmetric_eigendecomposition(action: &GroupAction, r: usize, family: &[CMatrix]) -> Result<Vec<LocalEigen>> {
    let wsc = action.complex();
    if family.len() != wsc.n() {
        return Err(Error::invalid("one matrix per vertex required"));
    }
    for (i, k) in family.iter().enumerate() {
        let l = wsc.local_size(i, r);
        if k.rows() != l || k.cols() != l {
            return Err(Error::invalid(format!("matrix at vertex {} must be {l}x{l}", i + 1)));
        }
        HermitianMatrix::new(k.clone())?;
    }
    action.require_external()?;
    check_family_symmetry(action, r, family)?;
    let reps: Vec<usize> = action.orbit_representatives().iter().map(|v| v - 1).collect();
    let rep_eigs: Vec<linalg::HermitianEigen> = reps.iter().map(|&v| linalg::eigh(&family[v].hermitian_part())).collect();
    Ok((0..wsc.n())
        .map(|i| {
            let (rep, g) = action.transport(i);
            let k = reps.iter().position(|x| x == rep).expect("representative");
            let e = &rep_eigs[k];
            let map = local_index_map(wsc, g, *rep, r);
            let mut vectors = CMatrix::zeros(e.vectors.rows(), e.vectors.cols());
            for (b, &gb) in map.iter().enumerate() {
                for l in 0..e.vectors.cols() {
                    vectors[(gb, l)] = e.vectors[(b, l)];
                }
            }
            LocalEigen { values: e.values.clone(), vectors }
        })
        .collect())
}

/// Collection of psd operators summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
}

/// Validity numbers of a POVM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmCheck {
    pub min_eigenvalue: f64,
    pub completeness_deviation: f64,
    pub valid: bool,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let p = Self::new_unchecked(elements)?;
        let check = p.check();
        if !check.valid {
            return Err(Error::invalid(format!(
                "not a POVM: completeness deviation {:.3e}, minimum eigenvalue {:.3e}",
                check.completeness_deviation, check.min_eigenvalue
            )));
        }
        Ok(p)
    }

    /// Checks shapes only.
    pub fn new_unchecked(elements: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::invalid("POVM needs at least one element"));
        };
        let m = first.rows();
        if elements.iter().any(|e| e.rows() != m || e.cols() != m) {
            return Err(Error::invalid("POVM elements must be square of equal size"));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn check(&self) -> PovmCheck {
        let m = self.dim();
        let mut sum = CMatrix::zeros(m, m);
        let mut min_eig = f64::INFINITY;
        let mut herm = 0.0f64;
        for e in &self.elements {
            sum = &sum + e;
            herm = herm.max(e.hermitian_deviation());
            min_eig = min_eig.min(linalg::lambda_min(&e.hermitian_part()));
        }
        let completeness_deviation = sum.max_abs_diff(&CMatrix::identity(m)).max(herm);
        PovmCheck {
            min_eigenvalue: min_eig,
            completeness_deviation,
            valid: completeness_deviation <= POVM_TOL && min_eig >= -POVM_TOL,
        }
    }

    pub fn to_json(&self) -> TensorJson {
        stack(&self.elements).to_json()
    }

    pub fn from_json(j: &TensorJson) -> Result<Self> {
        Self::new_unchecked(unstack(&DenseTensor::from_json(j)?)?)
    }
}

/// Channel given by Kraus operators of shape `output x input`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<CMatrix>,
}

/// Validity numbers of a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptpCheck {
    pub choi_lambda_min: f64,
    pub trace_preservation_deviation: f64,
    pub valid: bool,
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(kraus)?;
        let check = ch.check();
        if !check.valid {
            return Err(Error::invalid(format!(
                "not CPTP: trace-preservation deviation {:.3e}, Choi minimum eigenvalue {:.3e}",
                check.trace_preservation_deviation, check.choi_lambda_min
            )));
        }
        Ok(ch)
    }

    pub fn new_unchecked(kraus: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return Err(Error::invalid("channel needs at least one Kraus operator"));
        };
        let (o, i) = (first.rows(), first.cols());
        if kraus.iter().any(|k| k.rows() != o || k.cols() != i) {
            return Err(Error::invalid("Kraus operators must share one shape"));
        }
        Ok(Self { kraus })
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus[0].rows()
    }

    /// `‖Σ_k A_k† A_k − I‖_max`.
    pub fn trace_preservation_deviation(&self) -> f64 {
        let d = self.input_dim();
        let mut sum = CMatrix::zeros(d, d);
        for k in &self.kraus {
            sum = &sum + &k.adjoint().matmul(k);
        }
        sum.max_abs_diff(&CMatrix::identity(d))
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.output_dim(), self.output_dim());
        for k in &self.kraus {
            out = &out + &k.matmul(rho).matmul(&k.adjoint());
        }
        out
    }

    pub fn check(&self) -> CptpCheck {
        let choi_lambda_min = linalg::lambda_min(choi_matrix(self).matrix());
        let trace_preservation_deviation = self.trace_preservation_deviation();
        CptpCheck {
            choi_lambda_min,
            trace_preservation_deviation,
            valid: trace_preservation_deviation <= CPTP_TOL && choi_lambda_min >= -CPTP_TOL,
        }
    }

    pub fn to_json(&self) -> TensorJson {
        stack(&self.kraus).to_json()
    }

    pub fn from_json(j: &TensorJson) -> Result<Self> {
        Self::new_unchecked(unstack(&DenseTensor::from_json(j)?)?)
    }
}

/// `Σ_{a,b} |a⟩⟨b| ⊗ f(|a⟩⟨b|)` for a linear map `f` on `d_in x d_in`
/// matrices.
pub fn choi_of_map(d_in: usize, f: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
    let blocks: Vec<Vec<CMatrix>> = (0..d_in)
        .map(|a| {
            (0..d_in)
                .map(|b| {
                    let mut e = CMatrix::zeros(d_in, d_in);
                    e[(a, b)] = re(1.0);
                    f(&e)
                })
                .collect()
        })
        .collect();
    let d_out = blocks[0][0].rows();
    CMatrix::from_fn(d_in * d_out, d_in * d_out, |row, col| {
        blocks[row / d_out][col / d_out][(row % d_out, col % d_out)]
    })
}

pub fn choi_matrix(ch: &KrausChannel) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(&choi_of_map(ch.input_dim(), |e| ch.apply(e)))
}

/// Complete positivity and trace preservation read off a Choi matrix with
/// input index first.
pub fn check_choi(choi: &CMatrix, d_in: usize) -> Result<CptpCheck> {
    if !choi.is_square() || !choi.rows().is_multiple_of(d_in) {
        return Err(Error::invalid("Choi matrix size must be a multiple of the input dimension"));
    }
    let d_out = choi.rows() / d_in;
    let mut dev = choi.hermitian_deviation();
    for a in 0..d_in {
        for b in 0..d_in {
            let tr: C64 = (0..d_out).map(|x| choi[(a * d_out + x, b * d_out + x)]).sum();
            let target = if a == b { re(1.0) } else { ZERO };
            dev = dev.max((tr - target).norm());
        }
    }
    let choi_lambda_min = linalg::lambda_min(&choi.hermitian_part());
    Ok(CptpCheck {
        choi_lambda_min,
        trace_preservation_deviation: dev,
        valid: dev <= CPTP_TOL && choi_lambda_min >= -CPTP_TOL,
    })
}

/// Measure-and-prepare channel `ρ ↦ Σ_j |j⟩⟨j| tr(A_j ρ)` with Kraus
/// operators `|j⟩⟨φ_{j,m}|` from spectral factorizations of the elements.
pub fn povm_to_channel(p: &Povm) -> Result<KrausChannel> {
    let (k, m) = (p.outcomes(), p.dim());
    let mut kraus = Vec::new();
    for (j, a) in p.elements().iter().enumerate() {
        let f = linalg::psd_factor(&a.hermitian_part(), KRAUS_REL_TOL);
        for row in 0..f.rows() {
            kraus.push(CMatrix::from_fn(k, m, |x, y| if x == j { f[(row, y)] } else { ZERO }));
        }
    }
    if kraus.is_empty() {
        return Err(Error::invalid("POVM has only zero elements"));
    }
    KrausChannel::new(kraus)
}

/// Local operations attached to every vertex of a model.
#[derive(Clone, Debug, PartialEq)]
pub enum LocalOps {
    Povms(Vec<Povm>),
    Channels(Vec<KrausChannel>),
}

/// State given by an unconstrained decomposition, with identical local
/// measurements or channels along every orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    state: UnconstrainedDecomposition,
    ops: LocalOps,
}

/// Validity numbers of a quantum model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub flavor: String,
    pub state_norm_deviation: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub povms: Vec<PovmCheck>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<CptpCheck>,
    pub valid: bool,
}

fn broadcast<T: Clone>(action: &GroupAction, reps: Vec<T>) -> Result<Vec<T>> {
    let rep_ids = action.orbit_representatives();
    if reps.len() != rep_ids.len() {
        return Err(Error::invalid(format!("expected {} representative operations, got {}", rep_ids.len(), reps.len())));
    }
    Ok((0..action.complex().n())
        .map(|i| {
            let rep = action.transport(i).0 + 1;
            reps[rep_ids.iter().position(|&v| v == rep).expect("representative")].clone()
        })
        .collect())
}

impl QuantumModel {
    /// Operations are given per orbit representative (ascending) and copied
    /// to the whole orbit.
    pub fn from_representatives(state: UnconstrainedDecomposition, ops: LocalOps) -> Result<Self> {
        let action = state.action().clone();
        let ops = match ops {
            LocalOps::Povms(p) => LocalOps::Povms(broadcast(&action, p)?),
            LocalOps::Channels(c) => LocalOps::Channels(broadcast(&action, c)?),
        };
        let dims = state.dims();
        for (i, &d) in dims.iter().enumerate() {
            let want = match &ops {
                LocalOps::Povms(p) => p[i].dim(),
                LocalOps::Channels(c) => c[i].input_dim(),
            };
            if want != d {
                return Err(Error::invalid(format!(
                    "operation at vertex {} acts on dimension {want}, state has {d}",
                    i + 1
                )));
            }
        }
        Ok(Self { state, ops })
    }

    pub fn state(&self) -> &UnconstrainedDecomposition {
        &self.state
    }

    pub fn ops(&self) -> &LocalOps {
        &self.ops
    }

    pub fn action(&self) -> &GroupAction {
        self.state.action()
    }

    pub fn r(&self) -> usize {
        self.state.r()
    }

    pub fn flavor(&self) -> &'static str {
        match self.ops {
            LocalOps::Povms(_) => "povm",
            LocalOps::Channels(_) => "channel",
        }
    }

    pub fn state_norm(&self) -> Result<f64> {
        Ok(contract_vector(&self.state)?.frobenius_norm())
    }

    pub fn report(&self) -> Result<ModelReport> {
        let state_norm_deviation = (self.state_norm()? - 1.0).abs();
        let reps: Vec<usize> = self.action().orbit_representatives().iter().map(|v| v - 1).collect();
        let (povms, channels) = match &self.ops {
            LocalOps::Povms(p) => (reps.iter().map(|&v| p[v].check()).collect::<Vec<_>>(), Vec::new()),
            LocalOps::Channels(c) => (Vec::new(), reps.iter().map(|&v| c[v].check()).collect::<Vec<_>>()),
        };
        let valid = state_norm_deviation <= STATE_NORM_TOL
            && povms.iter().all(|c| c.valid)
            && channels.iter().all(|c| c.valid);
        Ok(ModelReport { flavor: self.flavor().into(), state_norm_deviation, povms, channels, valid })
    }

    pub fn to_json(&self) -> QuantumModelJson {
        let reps = self.action().orbit_representatives();
        let state = Decomposition::Unconstrained(self.state.clone()).to_json();
        let ops = |f: &dyn Fn(usize) -> TensorJson| {
            reps.iter().map(|&v| VertexOpJson { vertex: v, tensor: f(v - 1) }).collect::<Vec<_>>()
        };
        match &self.ops {
            LocalOps::Povms(p) => QuantumModelJson {
                flavor: "povm".into(),
                state,
                povms: Some(ops(&|i| p[i].to_json())),
                channels: None,
            },
            LocalOps::Channels(c) => QuantumModelJson {
                flavor: "channel".into(),
                state,
                povms: None,
                channels: Some(ops(&|i| c[i].to_json())),
            },
        }
    }

    /// Loads without validating operations; use `report` for that.
    pub fn from_json(j: &QuantumModelJson) -> Result<Self> {
        let state = match Decomposition::from_json(&j.state)? {
            Decomposition::Unconstrained(u) => u,
            other => return Err(Error::invalid(format!("model state must be unconstrained, got {}", other.kind()))),
        };
        let reps = state.action().orbit_representatives();
        let pick = |list: &Option<Vec<VertexOpJson>>| -> Result<Vec<TensorJson>> {
            let list = list.as_ref().ok_or_else(|| Error::invalid(format!("{} model lacks its operations", j.flavor)))?;
            reps.iter()
                .map(|v| {
                    list.iter()
                        .find(|o| o.vertex == *v)
                        .map(|o| o.tensor.clone())
                        .ok_or_else(|| Error::invalid(format!("missing operation for representative vertex {v}")))
                })
                .collect()
        };
        let ops = match j.flavor.as_str() {
            "povm" => LocalOps::Povms(pick(&j.povms)?.iter().map(Povm::from_json).collect::<Result<_>>()?),
            "channel" => LocalOps::Channels(pick(&j.channels)?.iter().map(KrausChannel::from_json).collect::<Result<_>>()?),
            other => return Err(Error::invalid(format!("unknown model flavor '{other}'"))),
        };
        Self::from_representatives(state, ops)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexOpJson {
    pub vertex: usize,
    pub tensor: TensorJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumModelJson {
    pub flavor: String,
    pub state: DecompositionJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povms: Option<Vec<VertexOpJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<VertexOpJson>>,
}

/// Change of basis onto the support of `S`: `T = Σ λ^{-1/2} |w⟩⟨ℓ|` and
/// `W = Σ λ^{1/2} |ℓ⟩⟨w|`, keeping `λ > threshold · λ_max`.
fn support_maps(e: &LocalEigen) -> (CMatrix, CMatrix) {
    let lmax = e.values.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..e.values.len()).filter(|&l| lmax > 0.0 && e.values[l] > EIGEN_REL_THRESHOLD * lmax).collect();
    let l = e.vectors.rows();
    let t = CMatrix::from_fn(l, keep.len(), |b, k| e.vectors[(b, keep[k])] * e.values[keep[k]].powf(-0.5));
    let w = CMatrix::from_fn(keep.len(), l, |k, b| e.vectors[(b, keep[k])].conj() * e.values[keep[k]].sqrt());
    (t, w)
}

fn sum_matrices(ms: impl Iterator<Item = CMatrix>, size: usize) -> CMatrix {
    ms.fold(CMatrix::zeros(size, size), |acc, m| &acc + &m)
}

fn check_state_norm(state: &UnconstrainedDecomposition) -> Result<()> {
    let norm = contract_vector(state)?.frobenius_norm();
    let deviation = (norm - 1.0).abs();
    if deviation > CONSTRUCTION_NORM_TOL {
        return Err(Error::construction(format!("resource state has norm {norm}"), deviation));
    }
    Ok(())
}

/// State plus local POVMs reproducing the distribution of a psd
/// decomposition, with the same bond and symmetry.
pub fn psd_to_quantum_model(dec: &PsdDecomposition) -> Result<QuantumModel> {
    let action = dec.action();
    action.require_external()?;
    Distribution::new(contract_psd(dec)?)?;
    let r = dec.r();
    let n = dec.n();
    let sums: Vec<CMatrix> = (0..n)
        .map(|i| sum_matrices(dec.local(i).iter().cloned(), dec.frame().local_size(i)).hermitian_part())
        .collect();
    let eigs = g_symmetric_eigendecomposition(action, r, &sums)?;
    let mut ws = Vec::new();
    let mut povms = Vec::new();
    for v in action.orbit_representatives() {
        let i = v - 1;
        let (t, w) = support_maps(&eigs[i]);
        let elements: Vec<CMatrix> = dec.local(i).iter().map(|b| t.adjoint().matmul(b).matmul(&t)).collect();
        let p = Povm::new_unchecked(elements)?;
        let check = p.check();
        if !check.valid {
            return Err(Error::construction(
                format!("local measurement at vertex {v} is not a POVM"),
                check.completeness_deviation.max(-check.min_eigenvalue),
            ));
        }
        ws.push(w);
        povms.push(p);
    }
    let state = UnconstrainedDecomposition::from_representatives(action, r, ws)?;
    check_state_norm(&state)?;
    QuantumModel::from_representatives(state, LocalOps::Povms(povms))
}

fn reps0(action: &GroupAction) -> Vec<usize> {
    action.orbit_representatives().iter().map(|v| v - 1).collect()
}

/// `B_j = X† A_j X` with `X` the state's local at each representative.
pub fn quantum_model_to_psd(model: &QuantumModel) -> Result<PsdDecomposition> {
    let LocalOps::Povms(povms) = model.ops() else {
        return Err(Error::invalid("quantum_model_to_psd needs a POVM model"));
    };
    let state = model.state();
    let reps = reps0(state.action())
        .into_iter()
        .map(|i| {
            let x = state.local(i);
            povms[i].elements().iter().map(|a| x.adjoint().matmul(a).matmul(x)).collect()
        })
        .collect();
    PsdDecomposition::from_representatives(state.action(), state.r(), reps)
}

fn outcome_tuples(dims: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = dims.iter().product();
    let mut idx = vec![0; dims.len()];
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        out.push(idx.clone());
        increment(&mut idx, dims);
    }
    out
}

/// `P(j) = ⟨ψ| ⊗_i A^{[i]}_{j_i} |ψ⟩` over all outcome tuples.
pub fn eval_quantum_model(model: &QuantumModel) -> Result<DenseTensor> {
    let LocalOps::Povms(povms) = model.ops() else {
        return Err(Error::invalid("eval_quantum_model needs a POVM model; use apply_channel_model"));
    };
    let psi = contract_vector(model.state())?;
    let dims: Vec<usize> = povms.iter().map(|p| p.outcomes()).collect();
    let values: Vec<Result<C64>> = outcome_tuples(&dims)
        .par_iter()
        .map(|j| {
            let maps: Vec<CMatrix> = j.iter().enumerate().map(|(i, &x)| povms[i].elements()[x].clone()).collect();
            let phi = apply_site_maps(&psi, &maps)?;
            Ok(re(linalg::dot(psi.data(), phi.data()).re))
        })
        .collect();
    DenseTensor::new(dims, values.into_iter().collect::<Result<Vec<_>>>()?)
}

/// `⊗_i E_i (|ψ⟩⟨ψ|)`, summed over Kraus tuples.
pub fn apply_channel_model(model: &QuantumModel) -> Result<MultipartiteMatrix> {
    let LocalOps::Channels(channels) = model.ops() else {
        return Err(Error::invalid("apply_channel_model needs a channel model"));
    };
    let psi = contract_vector(model.state())?;
    let out_dims: Vec<usize> = channels.iter().map(|c| c.output_dim()).collect();
    let total: usize = out_dims.iter().product();
    let counts: Vec<usize> = channels.iter().map(|c| c.kraus().len()).collect();
    let parts: Vec<Result<CMatrix>> = outcome_tuples(&counts)
        .par_iter()
        .map(|k| {
            let maps: Vec<CMatrix> = k.iter().enumerate().map(|(i, &x)| channels[i].kraus()[x].clone()).collect();
            let phi = apply_site_maps(&psi, &maps)?;
            Ok(CMatrix::outer(phi.data(), phi.data()))
        })
        .collect();
    let mut rho = CMatrix::zeros(total, total);
    for p in parts {
        rho = &rho + &p?;
    }
    MultipartiteMatrix::new(out_dims, rho)
}

/// State plus local channels reproducing `LL†` of a purification, with the
/// same bond and symmetry.
pub fn purification_to_channel_model(dec: &PurificationDecomposition) -> Result<QuantumModel> {
    let action = dec.action();
    action.require_external()?;
    let tr = contract_purification(dec)?.trace();
    if (tr.re - 1.0).abs() > CONSTRUCTION_NORM_TOL || tr.im.abs() > CONSTRUCTION_NORM_TOL {
        return Err(Error::invalid(format!("purified operator has trace {tr}, not 1")));
    }
    let r = dec.r();
    let n = dec.n();
    // B_k with (B_k)_{ℓ,β} = (L_β)_{ℓ,k}
    let slices = |i: usize| -> Vec<CMatrix> {
        let fam = dec.local(i);
        let (d, anc) = (fam[0].rows(), fam[0].cols());
        (0..anc).map(|k| CMatrix::from_fn(d, fam.len(), |l, b| fam[b][(l, k)])).collect()
    };
    let sums: Vec<CMatrix> = (0..n)
        .map(|i| {
            let l = dec.frame().local_size(i);
            sum_matrices(slices(i).into_iter().map(|b| b.adjoint().matmul(&b)), l).hermitian_part()
        })
        .collect();
    let eigs = g_symmetric_eigendecomposition(action, r, &sums)?;
    let mut ws = Vec::new();
    let mut channels = Vec::new();
    for v in action.orbit_representatives() {
        let i = v - 1;
        let (t, w) = support_maps(&eigs[i]);
        let ch = KrausChannel::new_unchecked(slices(i).iter().map(|b| b.matmul(&t)).collect())?;
        let check = ch.check();
        if !check.valid {
            return Err(Error::construction(
                format!(
                    "local channel at vertex {v} is not CPTP (Choi minimum eigenvalue {:.3e}, trace deviation {:.3e})",
                    check.choi_lambda_min, check.trace_preservation_deviation
                ),
                check.trace_preservation_deviation.max(-check.choi_lambda_min),
            ));
        }
        ws.push(w);
        channels.push(ch);
    }
    let state = UnconstrainedDecomposition::from_representatives(action, r, ws)?;
    check_state_norm(&state)?;
    QuantumModel::from_representatives(state, LocalOps::Channels(channels))
}

/// `L_β = Σ_k A_k |v_β⟩⟨k|` with `v_β` the state's local columns.
pub fn channel_model_to_purification(model: &QuantumModel) -> Result<PurificationDecomposition> {
    let LocalOps::Channels(channels) = model.ops() else {
        return Err(Error::invalid("channel_model_to_purification needs a channel model"));
    };
    let state = model.state();
    let reps = reps0(state.action())
        .into_iter()
        .map(|i| {
            let x = state.local(i);
            let ks = channels[i].kraus();
            (0..x.cols())
                .map(|b| {
                    let v = x.column(b);
                    let cols: Vec<Vec<C64>> = ks.iter().map(|a| a.matvec(&v)).collect();
                    CMatrix::from_fn(ks[0].rows(), ks.len(), |l, k| cols[k][l])
                })
                .collect()
        })
        .collect();
    PurificationDecomposition::from_representatives(state.action(), state.r(), reps)
}

fn scale_per_vertex(n: usize, total: f64, power: f64) -> f64 {
    total.powf(-power / n as f64)
}

/// Psd decomposition rescaled uniformly so its contraction sums to one.
pub fn normalize_psd(dec: &PsdDecomposition) -> Result<PsdDecomposition> {
    let total = contract_psd(dec)?.sum().re;
    if !(total > 0.0) {
        return Err(Error::invalid("contraction has no positive mass"));
    }
    let s = scale_per_vertex(dec.n(), total, 1.0);
    let locals = dec.locals().iter().map(|f| f.iter().map(|m| m.scale_real(s)).collect()).collect();
    PsdDecomposition::new(dec.action(), dec.r(), locals)
}

/// Purification rescaled uniformly so that `tr(LL†) = 1`.
pub fn normalize_purification(dec: &PurificationDecomposition) -> Result<PurificationDecomposition> {
    let total = contract_purification(dec)?.trace().re;
    if !(total > 0.0) {
        return Err(Error::invalid("purified operator is zero"));
    }
    let s = scale_per_vertex(dec.n(), total, 0.5);
    let locals = dec.locals().iter().map(|f| f.iter().map(|m| m.scale_real(s)).collect()).collect();
    PurificationDecomposition::new(dec.action(), dec.r(), locals)
}

/// State decomposition rescaled uniformly to unit norm.
pub fn normalize_state(dec: &UnconstrainedDecomposition) -> Result<UnconstrainedDecomposition> {
    let norm = contract_vector(dec)?.frobenius_norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("state is zero"));
    }
    let s = scale_per_vertex(dec.n(), norm, 1.0);
    let locals = dec.locals().iter().map(|m| m.scale_real(s)).collect();
    UnconstrainedDecomposition::new(dec.action(), dec.r(), locals)
}

/// Any model file the command line reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelFile {
    Quantum(QuantumModelJson),
    HiddenVariable(HiddenVariableModel),
    Povm { povm: TensorJson },
    Channel { kraus: TensorJson },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{contract_matrix, structure_tensor, SeparableDecomposition};
    use crate::families::w_eps_psd;
    use crate::linalg::ONE;
    use crate::random::{random_channel, random_nonnegative, random_povm, random_psd, random_purification, random_unconstrained};
    use crate::wsc::{cyclic_action, make_cycle, make_line};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn actions(n: usize) -> Vec<GroupAction> {
        let s = make_simplex(n).unwrap();
        let c = make_cycle(n).unwrap();
        vec![
            GroupAction::trivial(&s),
            symmetric_action(&s).unwrap(),
            GroupAction::trivial(&c),
            cyclic_action(&c).unwrap(),
            GroupAction::trivial(&make_line(n).unwrap()),
        ]
    }

    #[test]
    fn distribution_checks() {
        let t = DenseTensor::from_real(vec![2], &[0.25, 0.75]).unwrap();
        assert!(Distribution::new(t.clone()).is_ok());
        assert!(Distribution::new(t.scale(re(2.0))).is_err());
        assert!(Distribution::with_renormalize(t.scale(re(2.0)), true).is_ok());
        assert!(Distribution::new(DenseTensor::from_real(vec![2], &[-0.5, 1.5]).unwrap()).is_err());
    }

    #[test]
    fn hvm_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for action in [GroupAction::trivial(&make_simplex(3).unwrap()), symmetric_action(&make_simplex(3).unwrap()).unwrap()] {
            let dec = random_nonnegative(&action, 2, 2, &mut rng).unwrap();
            let total = contract_nonnegative(&dec).unwrap().sum().re;
            let s = total.powf(-1.0 / 3.0);
            let u = dec.inner();
            let scaled = UnconstrainedDecomposition::new(u.action(), 2, u.locals().iter().map(|m| m.scale_real(s)).collect()).unwrap();
            let dec = NonnegativeDecomposition::new(scaled).unwrap();
            let p = contract_nonnegative(&dec).unwrap();
            let model = nn_to_hvm(&dec).unwrap();
            assert!((model.prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(eval_hvm(&model).max_abs_diff(&p).unwrap() < 1e-12);
            let back = hvm_to_nn(&model).unwrap();
            assert!(contract_nonnegative(&back).unwrap().max_abs_diff(&p).unwrap() < 1e-12);
            assert_eq!(model.is_symmetric(), !action.is_trivial());
            if model.is_symmetric() {
                assert!(!back.inner().action().is_trivial());
            }
        }
    }

    #[test]
    fn hvm_examples() {
        let model = HiddenVariableModel::new(vec![1.0], vec![vec![vec![0.3, 0.7]], vec![vec![0.5, 0.5]]]).unwrap();
        let t = contract_nonnegative(&hvm_to_nn(&model).unwrap()).unwrap();
        assert!((t.get(&[1, 0]).re - 0.35).abs() < 1e-15);
        let back = nn_to_hvm(&hvm_to_nn(&model).unwrap()).unwrap();
        assert_eq!(back.prior.len(), 1);
        assert!((back.prior[0] - 1.0).abs() < 1e-15);
        // coin mixture of two products
        let mix = HiddenVariableModel::new(
            vec![0.4, 0.6],
            vec![vec![vec![1.0, 0.0], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]],
        )
        .unwrap();
        let t = contract_nonnegative(&hvm_to_nn(&mix).unwrap()).unwrap();
        assert!((t.get(&[0, 0]).re - 0.2).abs() < 1e-15);
        assert!((t.get(&[1, 1]).re - (0.4 * 0.0 * 0.5 + 0.6 * 0.8)).abs() < 1e-15);
        assert!(HiddenVariableModel::new(vec![0.5], vec![vec![vec![1.0]]]).is_err());
    }

    #[test]
    fn hvm_drops_dead_latent_values() {
        let action = GroupAction::trivial(&make_simplex(2).unwrap());
        let locals = vec![
            CMatrix::from_real(2, 2, &[0.5, 0.0, 0.5, 0.0]).unwrap(),
            CMatrix::from_real(2, 2, &[0.5, 1.0, 0.5, 1.0]).unwrap(),
        ];
        let dec = NonnegativeDecomposition::new(UnconstrainedDecomposition::new(&action, 2, locals).unwrap()).unwrap();
        assert_eq!(nn_to_hvm(&dec).unwrap().r(), 1);
    }

    #[test]
    fn g_symmetric_eigen_transports() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let action = cyclic_action(&make_cycle(4).unwrap()).unwrap();
        let dec = random_psd(&action, 2, 2, &mut rng).unwrap();
        let fam: Vec<CMatrix> = (0..4).map(|i| dec.local(i)[0].clone()).collect();
        let eigs = g_symmetric_eigendecomposition(&action, 2, &fam).unwrap();
        for (i, e) in eigs.iter().enumerate() {
            assert_eq!(e.values, eigs[0].values);
            let v = &e.vectors;
            assert!(v.adjoint().matmul(v).max_abs_diff(&CMatrix::identity(4)) < 1e-12);
            let rec = linalg::HermitianEigen { values: e.values.clone(), vectors: v.clone() }.reconstruct();
            assert!(rec.max_abs_diff(&fam[i]) < 1e-10);
        }
        let mut broken = fam.clone();
        broken[1] = CMatrix::identity(4);
        assert!(g_symmetric_eigendecomposition(&action, 2, &broken).is_err());
    }

    #[test]
    fn povm_model_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for action in actions(3) {
            let dec = normalize_psd(&random_psd(&action, 2, 2, &mut rng).unwrap()).unwrap();
            let p = contract_psd(&dec).unwrap();
            let model = psd_to_quantum_model(&dec).unwrap();
            assert!(model.report().unwrap().valid);
            assert_eq!(model.r(), 2);
            assert!(eval_quantum_model(&model).unwrap().max_abs_diff(&p).unwrap() < 1e-9);
            let back = quantum_model_to_psd(&model).unwrap();
            assert_eq!(back.r(), 2);
            assert!(contract_psd(&back).unwrap().max_abs_diff(&p).unwrap() < 1e-9);
            if let LocalOps::Povms(ps) = model.ops() {
                if !action.is_trivial() {
                    assert!(ps.windows(2).all(|w| w[0] == w[1]));
                }
            }
            let j = serde_json::to_string(&model.to_json()).unwrap();
            let loaded = QuantumModel::from_json(&serde_json::from_str(&j).unwrap()).unwrap();
            assert_eq!(loaded, model);
        }
    }

    #[test]
    fn model_to_psd_from_random_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let action = symmetric_action(&make_simplex(3).unwrap()).unwrap();
        let state = normalize_state(&random_unconstrained(&action, 2, 3, &mut rng).unwrap()).unwrap();
        let povm = random_povm(3, 2, &mut rng);
        let model = QuantumModel::from_representatives(state, LocalOps::Povms(vec![povm])).unwrap();
        let p = eval_quantum_model(&model).unwrap();
        assert!((p.sum().re - 1.0).abs() < 1e-10);
        let dec = quantum_model_to_psd(&model).unwrap();
        assert!(dec.validate().is_valid());
        assert!(contract_psd(&dec).unwrap().max_abs_diff(&p).unwrap() < 1e-10);
        let again = psd_to_quantum_model(&dec).unwrap();
        assert!(eval_quantum_model(&again).unwrap().max_abs_diff(&p).unwrap() < 1e-9);
    }

    #[test]
    fn eval_examples() {
        // GHZ with computational-basis POVMs
        let s = make_simplex(3).unwrap();
        let action = symmetric_action(&s).unwrap();
        let h = 0.5f64.powf(1.0 / 6.0);
        let x = CMatrix::from_real(2, 2, &[h, 0.0, 0.0, h]).unwrap();
        let state = UnconstrainedDecomposition::from_representatives(&action, 2, vec![x]).unwrap();
        assert!((contract_vector(&state).unwrap().frobenius_norm() - 1.0).abs() < 1e-12);
        let z = Povm::new(vec![CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap(), CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap()]).unwrap();
        let model = QuantumModel::from_representatives(state.clone(), LocalOps::Povms(vec![z])).unwrap();
        let p = eval_quantum_model(&model).unwrap();
        assert!((p.get(&[0, 0, 0]).re - 0.5).abs() < 1e-12 && (p.get(&[1, 1, 1]).re - 0.5).abs() < 1e-12);
        assert!(p.get(&[0, 1, 0]).norm() < 1e-12);
        // maximally mixed elements give the uniform distribution
        let mixed = Povm::new(vec![CMatrix::identity(2).scale_real(0.5); 2]).unwrap();
        let model = QuantumModel::from_representatives(state, LocalOps::Povms(vec![mixed])).unwrap();
        let p = eval_quantum_model(&model).unwrap();
        assert!(p.data().iter().all(|z| (z.re - 0.125).abs() < 1e-12));
        assert_eq!(structure_tensor(&s, 2).unwrap().get(&[1, 1, 1]), ONE);
    }

    #[test]
    fn scalar_psd_gives_trivial_povms() {
        let action = GroupAction::trivial(&make_simplex(2).unwrap());
        let locals = vec![
            vec![CMatrix::from_real(1, 1, &[0.25]).unwrap(), CMatrix::from_real(1, 1, &[0.75]).unwrap()],
            vec![CMatrix::from_real(1, 1, &[0.5]).unwrap(), CMatrix::from_real(1, 1, &[0.5]).unwrap()],
        ];
        let dec = PsdDecomposition::new(&action, 1, locals).unwrap();
        let model = psd_to_quantum_model(&dec).unwrap();
        if let LocalOps::Povms(p) = model.ops() {
            assert!(p.iter().all(|x| x.dim() == 1));
        }
        assert!(eval_quantum_model(&model).unwrap().max_abs_diff(&contract_psd(&dec).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn ti_psd_on_cycle_gives_identical_povms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let action = cyclic_action(&make_cycle(3).unwrap()).unwrap();
        let dec = normalize_psd(&random_psd(&action, 2, 2, &mut rng).unwrap()).unwrap();
        let model = psd_to_quantum_model(&dec).unwrap();
        let LocalOps::Povms(p) = model.ops() else { panic!("povm model") };
        assert!(p[0] == p[1] && p[1] == p[2]);
    }

    #[test]
    fn channel_model_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for action in actions(3) {
            let dec = normalize_purification(&random_purification(&action, 2, 2, 2, &mut rng).unwrap()).unwrap();
            let rho = contract_purification(&dec).unwrap();
            let model = purification_to_channel_model(&dec).unwrap();
            assert!(model.report().unwrap().valid);
            let out = apply_channel_model(&model).unwrap();
            assert!(out.matrix.max_abs_diff(&rho.matrix) < 1e-9);
            let back = channel_model_to_purification(&model).unwrap();
            assert_eq!(back.r(), 2);
            let again = contract_purification(&back).unwrap();
            assert!(again.matrix.max_abs_diff(&rho.matrix) < 1e-9);
        }
    }

    #[test]
    fn channel_model_from_random_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let action = cyclic_action(&make_cycle(3).unwrap()).unwrap();
        let state = normalize_state(&random_unconstrained(&action, 2, 2, &mut rng).unwrap()).unwrap();
        let ch = random_channel(2, 3, 2, &mut rng);
        let model = QuantumModel::from_representatives(state, LocalOps::Channels(vec![ch])).unwrap();
        let rho = apply_channel_model(&model).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        let dec = channel_model_to_purification(&model).unwrap();
        assert!(contract_purification(&dec).unwrap().matrix.max_abs_diff(&rho.matrix) < 1e-10);
    }

    #[test]
    fn purification_of_psd_family_state() {
        let psd = normalize_psd(&w_eps_psd(3, 1e-3).unwrap()).unwrap();
        let pur = PurificationDecomposition::from_psd(&psd).unwrap();
        let model = purification_to_channel_model(&pur).unwrap();
        let rho = apply_channel_model(&model).unwrap();
        let target = crate::tensor::diag_embed(&crate::families::w_state(3).unwrap().scale(re(1.0 / 3.0)));
        assert!(rho.matrix.max_abs_diff(&target.matrix) < 4e-3);
        assert!(rho.matrix.max_abs_diff(&contract_purification(&pur).unwrap().matrix) < 1e-8);
    }

    #[test]
    fn choi_examples() {
        let id = KrausChannel::new(vec![CMatrix::identity(2)]).unwrap();
        let j = choi_matrix(&id);
        assert_eq!(linalg::matrix_rank(j.matrix(), 1e-9), 1);
        let dep: Vec<CMatrix> = (0..2)
            .flat_map(|a| (0..2).map(move |b| CMatrix::from_fn(2, 2, |x, y| if x == a && y == b { re(0.5f64.sqrt()) } else { ZERO })))
            .collect();
        let dep = KrausChannel::new(dep).unwrap();
        assert!(choi_matrix(&dep).matrix().max_abs_diff(&CMatrix::identity(4).scale_real(0.5)) < 1e-14);
        let transpose = choi_of_map(2, |m| m.transpose());
        let check = check_choi(&transpose, 2).unwrap();
        assert!((check.choi_lambda_min + 1.0).abs() < 1e-12);
        assert!(!check.valid);
        assert!(check_choi(choi_matrix(&dep).matrix(), 2).unwrap().valid);
    }

    #[test]
    fn povm_to_channel_outputs_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_povm(3, 4, &mut rng);
        let ch = povm_to_channel(&p).unwrap();
        assert!(ch.check().valid);
        for _ in 0..100 {
            let rho = crate::random::random_psd_matrix(3, 2, &mut rng);
            let rho = rho.scale_real(1.0 / rho.trace().re);
            let out = ch.apply(&rho);
            let off: f64 = (0..4).flat_map(|a| (0..4).filter(move |&b| b != a).map(move |b| (a, b))).map(|(a, b)| out[(a, b)].norm()).sum();
            assert!(off < 1e-12);
            assert!((out.trace().re - 1.0).abs() < 1e-12);
            for j in 0..4 {
                assert!((out[(j, j)].re - p.elements()[j].matmul(&rho).trace().re).abs() < 1e-12);
            }
        }
        let basis = Povm::new(vec![CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap(), CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap()]).unwrap();
        assert_eq!(povm_to_channel(&basis).unwrap().kraus().len(), 2);
    }

    #[test]
    fn invalid_povm_reported() {
        let bad = Povm::new_unchecked(vec![CMatrix::identity(2), CMatrix::identity(2)]).unwrap();
        let c = bad.check();
        assert!(!c.valid && (c.completeness_deviation - 1.0).abs() < 1e-15);
        assert!(Povm::new(vec![CMatrix::identity(2), CMatrix::identity(2)]).is_err());
    }

    #[test]
    fn psd_family_points_admit_bond_two_models() {
        for eps in [1e-1, 3e-2, 1e-2] {
            let dec = normalize_psd(&w_eps_psd(5, eps).unwrap()).unwrap();
            let model = psd_to_quantum_model(&dec).unwrap();
            assert_eq!(model.r(), 2);
            assert!(model.report().unwrap().valid);
        }
        // the limit has rank 5 > 2^2, so no bond-2 psd decomposition reaches it
        assert!(crate::ranks::reference_lookup(crate::ranks::Quantity::Rank, 5).unwrap().value > 4);
    }

    #[test]
    fn separable_diag_matches_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let action = GroupAction::trivial(&make_simplex(2).unwrap());
        let nn = random_nonnegative(&action, 2, 2, &mut rng).unwrap();
        let sep = SeparableDecomposition::from_nonnegative(&nn);
        let rho = contract_matrix(&sep).unwrap();
        assert!(rho.diagonal().max_abs_diff(&contract_nonnegative(&nn).unwrap()).unwrap() < 1e-14);
    }
}
