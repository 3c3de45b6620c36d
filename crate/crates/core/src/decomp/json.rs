//! JSON form of decompositions: the complex, the action, the bond dimension
//! and one local tensor per orbit representative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::tensor::{DenseTensor, TensorJson};
use crate::wsc::{ActionJson, GroupAction, WeightedSimplicialComplex, WscJson};

use super::{
    NonnegativeDecomposition, PsdDecomposition, PurificationDecomposition, SeparableDecomposition,
    UnconstrainedDecomposition, ValidationReport,
};

/// Local tensor at a 1-based representative vertex. Shapes by kind:
/// unconstrained/nonnegative `[d, L]`, psd `[d, L, L]`, separable
/// `[L, d, d]`, purification `[L, d, d']`, with `L = r^{|F~_i|}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalJson {
    pub vertex: usize,
    pub tensor: TensorJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub kind: String,
    pub complex: WscJson,
    pub action: ActionJson,
    pub r: usize,
    pub locals: Vec<LocalJson>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decomposition {
    Unconstrained(UnconstrainedDecomposition),
    Nonnegative(NonnegativeDecomposition),
    Psd(PsdDecomposition),
    Separable(SeparableDecomposition),
    Purification(PurificationDecomposition),
}

fn matrix_tensor(m: &CMatrix) -> DenseTensor {
    DenseTensor::from_raw(vec![m.rows(), m.cols()], m.data().to_vec())
}

pub(crate) fn stack(mats: &[CMatrix]) -> DenseTensor {
    let (a, b) = (mats[0].rows(), mats[0].cols());
    let data = mats.iter().flat_map(|m| m.data().iter().copied()).collect();
    DenseTensor::from_raw(vec![mats.len(), a, b], data)
}

pub(crate) fn unstack(t: &DenseTensor) -> Result<Vec<CMatrix>> {
    if t.order() != 3 {
        return Err(Error::invalid("expected a 3-way local tensor"));
    }
    let (k, a, b) = (t.shape()[0], t.shape()[1], t.shape()[2]);
    (0..k)
        .map(|s| CMatrix::from_vec(a, b, t.data()[s * a * b..(s + 1) * a * b].to_vec()))
        .collect()
}

fn unmatrix(t: &DenseTensor) -> Result<CMatrix> {
    if t.order() != 2 {
        return Err(Error::invalid("expected a 2-way local tensor"));
    }
    CMatrix::from_vec(t.shape()[0], t.shape()[1], t.data().to_vec())
}

impl Decomposition {
    pub fn kind(&self) -> &'static str {
        match self {
            Decomposition::Unconstrained(_) => "unconstrained",
            Decomposition::Nonnegative(_) => "nonnegative",
            Decomposition::Psd(_) => "psd",
            Decomposition::Separable(_) => "separable",
            Decomposition::Purification(_) => "purification",
        }
    }

    pub fn action(&self) -> &GroupAction {
        match self {
            Decomposition::Unconstrained(d) => d.action(),
            Decomposition::Nonnegative(d) => d.inner().action(),
            Decomposition::Psd(d) => d.action(),
            Decomposition::Separable(d) => d.action(),
            Decomposition::Purification(d) => d.action(),
        }
    }

    pub fn r(&self) -> usize {
        match self {
            Decomposition::Unconstrained(d) => d.r(),
            Decomposition::Nonnegative(d) => d.inner().r(),
            Decomposition::Psd(d) => d.r(),
            Decomposition::Separable(d) => d.r(),
            Decomposition::Purification(d) => d.r(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            Decomposition::Unconstrained(d) => d.validate(),
            Decomposition::Nonnegative(d) => d.validate(),
            Decomposition::Psd(d) => d.validate(),
            Decomposition::Separable(d) => d.validate(),
            Decomposition::Purification(d) => d.validate(),
        }
    }

    pub fn to_json(&self) -> DecompositionJson {
        let action = self.action();
        let reps: Vec<usize> = action.orbit_representatives();
        let local_tensor = |i: usize| -> DenseTensor {
            match self {
                Decomposition::Unconstrained(d) => matrix_tensor(d.local(i)),
                Decomposition::Nonnegative(d) => matrix_tensor(d.inner().local(i)),
                Decomposition::Psd(d) => stack(d.local(i)),
                Decomposition::Separable(d) => stack(d.local(i)),
                Decomposition::Purification(d) => stack(d.local(i)),
            }
        };
        DecompositionJson {
            kind: self.kind().to_string(),
            complex: action.complex().to_json(),
            action: action.to_json(),
            r: self.r(),
            locals: reps
                .into_iter()
                .map(|v| LocalJson { vertex: v, tensor: local_tensor(v - 1).to_json() })
                .collect(),
        }
    }

    pub fn from_json(j: &DecompositionJson) -> Result<Self> {
        let complex = WeightedSimplicialComplex::from_json(&j.complex)?;
        let action = GroupAction::from_json(&complex, &j.action)?;
        let reps = action.orbit_representatives();
        let mut tensors = Vec::with_capacity(reps.len());
        for v in &reps {
            let entry = j
                .locals
                .iter()
                .find(|l| l.vertex == *v)
                .ok_or_else(|| Error::invalid(format!("missing local tensor for representative vertex {v}")))?;
            tensors.push(DenseTensor::from_json(&entry.tensor)?);
        }
        let r = j.r;
        Ok(match j.kind.as_str() {
            "unconstrained" | "nonnegative" => {
                let mats = tensors.iter().map(unmatrix).collect::<Result<Vec<_>>>()?;
                let u = UnconstrainedDecomposition::from_representatives(&action, r, mats)?;
                if j.kind == "nonnegative" {
                    Decomposition::Nonnegative(NonnegativeDecomposition::new_unchecked(u))
                } else {
                    Decomposition::Unconstrained(u)
                }
            }
            "psd" => {
                let fams = tensors.iter().map(unstack).collect::<Result<Vec<_>>>()?;
                Decomposition::Psd(PsdDecomposition::from_representatives(&action, r, fams)?)
            }
            "separable" => {
                let fams = tensors.iter().map(unstack).collect::<Result<Vec<_>>>()?;
                Decomposition::Separable(SeparableDecomposition::from_representatives(&action, r, fams)?)
            }
            "purification" => {
                let fams = tensors.iter().map(unstack).collect::<Result<Vec<_>>>()?;
                Decomposition::Purification(PurificationDecomposition::from_representatives(&action, r, fams)?)
            }
            other => return Err(Error::invalid(format!("unknown decomposition kind '{other}'"))),
        })
    }
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DecompositionJson::deserialize(d)?;
        Decomposition::from_json(&j).map_err(serde::de::Error::custom)
    }
}
