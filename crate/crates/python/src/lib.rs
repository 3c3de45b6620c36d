//! Python bindings. Structured results come back as plain dicts and lists.

use brlab_core::correlations::{
    channel_model_to_purification, eval_hvm, eval_quantum_model, hvm_to_nn, nn_to_hvm, normalize_psd, normalize_purification,
    psd_to_quantum_model, purification_to_channel_model, quantum_model_to_psd, ModelFile, QuantumModel,
};
use brlab_core::decomp::{contract_matrix, contract_nonnegative, contract_psd, contract_purification, contract_vector, Decomposition};
use brlab_core::families::{self, Family};
use brlab_core::ranks::{self, AlsOptions, Quantity};
use brlab_core::tensor::MultipartiteMatrix;
use brlab_core::wsc::{self, cyclic_action, symmetric_action};
use brlab_core::{random, tree, DenseTensor, GroupAction, WeightedSimplicialComplex, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

create_exception!(brlab, BrlabError, PyException);

fn err(e: brlab_core::Error) -> PyErr {
    BrlabError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> PyResult<T> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Dense complex tensor, row-major with the last site fastest.
#[pyclass(name = "Tensor", module = "brlab", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyTensor(DenseTensor);

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<C64>) -> PyResult<Self> {
        DenseTensor::new(shape, data).map(PyTensor).map_err(err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    /// Flat entries in storage order.
    fn data(&self) -> Vec<C64> {
        self.0.data().to_vec()
    }

    fn get(&self, index: Vec<usize>) -> PyResult<C64> {
        if index.len() != self.0.order() || index.iter().zip(self.0.shape()).any(|(&i, &d)| i >= d) {
            return Err(PyValueError::new_err(format!("index {index:?} out of range for shape {:?}", self.0.shape())));
        }
        Ok(self.0.get(&index))
    }

    fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    fn distance(&self, other: &PyTensor) -> PyResult<f64> {
        self.0.distance(&other.0).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse(text).map(PyTensor)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.0.shape())
    }
}

/// Weighted simplicial complex on vertices `1..=n`.
#[pyclass(name = "Complex", module = "brlab", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyComplex(WeightedSimplicialComplex);

#[pymethods]
impl PyComplex {
    /// `weights` lists `(vertices, weight)` pairs with 1-based vertices.
    #[new]
    fn new(n: usize, weights: Vec<(Vec<usize>, u32)>) -> PyResult<Self> {
        WeightedSimplicialComplex::new(n, &weights).map(PyComplex).map_err(err)
    }

    #[staticmethod]
    fn simplex(n: usize) -> PyResult<Self> {
        wsc::make_simplex(n).map(PyComplex).map_err(err)
    }

    #[staticmethod]
    fn cycle(n: usize) -> PyResult<Self> {
        wsc::make_cycle(n).map(PyComplex).map_err(err)
    }

    #[staticmethod]
    fn line(n: usize) -> PyResult<Self> {
        wsc::make_line(n).map(PyComplex).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn facets(&self) -> Vec<Vec<usize>> {
        self.0.facets()
    }

    fn weight(&self, vertices: Vec<usize>) -> u32 {
        self.0.weight_of(&vertices)
    }

    fn is_tree(&self) -> bool {
        self.0.is_tree()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!("Complex(n={}, facets={:?})", self.0.n(), self.0.facets())
    }
}

fn action_for(complex: &WeightedSimplicialComplex, action: &str) -> PyResult<GroupAction> {
    match action {
        "trivial" => Ok(GroupAction::trivial(complex)),
        "cyclic" => cyclic_action(complex).map_err(err),
        "symmetric" => symmetric_action(complex).map_err(err),
        other => Err(PyValueError::new_err(format!("action must be trivial, cyclic or symmetric, got '{other}'"))),
    }
}

fn matrix_to_py<'py>(py: Python<'py>, m: &MultipartiteMatrix) -> PyResult<Bound<'py, PyAny>> {
    let cols = m.matrix.cols();
    let rows: Vec<Vec<C64>> = m.matrix.data().chunks(cols).map(|r| r.to_vec()).collect();
    (m.dims.clone(), rows).into_pyobject(py).map(|b| b.into_any())
}

/// Any of the five decomposition kinds, tagged by `kind`.
#[pyclass(name = "Decomposition", module = "brlab", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyDecomposition(Decomposition);

#[pymethods]
impl PyDecomposition {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse(text).map(PyDecomposition)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Seeded random instance of `kind` on `complex` with bond `r` and
    /// physical dimension `d`.
    #[staticmethod]
    #[pyo3(signature = (kind, complex, r, d, seed, action = "trivial", ancilla = 2))]
    fn random(kind: &str, complex: &PyComplex, r: usize, d: usize, seed: u64, action: &str, ancilla: usize) -> PyResult<Self> {
        let action = action_for(&complex.0, action)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dec = match kind {
            "unconstrained" => Decomposition::Unconstrained(random::random_unconstrained(&action, r, d, &mut rng).map_err(err)?),
            "nonnegative" => Decomposition::Nonnegative(random::random_nonnegative(&action, r, d, &mut rng).map_err(err)?),
            "psd" => Decomposition::Psd(random::random_psd(&action, r, d, &mut rng).map_err(err)?),
            "separable" => Decomposition::Separable(random::random_separable(&action, r, d, &mut rng).map_err(err)?),
            "purification" => Decomposition::Purification(random::random_purification(&action, r, d, ancilla, &mut rng).map_err(err)?),
            other => return Err(PyValueError::new_err(format!("unknown decomposition kind '{other}'"))),
        };
        Ok(PyDecomposition(dec))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    #[getter]
    fn r(&self) -> usize {
        self.0.r()
    }

    fn complex(&self) -> PyComplex {
        PyComplex(self.0.action().complex().clone())
    }

    /// Violated invariants; empty when valid.
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.validate().violations)
    }

    /// Contracted tensor for vector-valued kinds.
    fn contract(&self) -> PyResult<PyTensor> {
        let t = match &self.0 {
            Decomposition::Unconstrained(d) => contract_vector(d),
            Decomposition::Nonnegative(d) => contract_nonnegative(d),
            Decomposition::Psd(d) => contract_psd(d),
            other => {
                return Err(PyValueError::new_err(format!("{} decompositions contract to a matrix; use density_matrix", other.kind())))
            }
        };
        t.map(PyTensor).map_err(err)
    }

    /// `(dims, rows)` of the contracted operator for matrix-valued kinds.
    fn density_matrix<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let m = match &self.0 {
            Decomposition::Separable(d) => contract_matrix(d),
            Decomposition::Purification(d) => contract_purification(d),
            other => return Err(PyValueError::new_err(format!("{} decompositions contract to a tensor; use contract", other.kind()))),
        };
        matrix_to_py(py, &m.map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Decomposition(kind={}, r={}, n={})", self.0.kind(), self.0.r(), self.0.action().complex().n())
    }
}

#[pyfunction]
fn w_state(n: usize) -> PyResult<PyTensor> {
    families::w_state(n).map(PyTensor).map_err(err)
}

/// Family member at `eps`. `param` is `p` for w-ti-nonneg and `k` for two-domain.
#[pyfunction]
#[pyo3(signature = (name, n, eps, param = None))]
fn family(name: &str, n: usize, eps: f64, param: Option<usize>) -> PyResult<PyDecomposition> {
    let dec = match Family::from_label(name, param).map_err(err)? {
        Family::WUnconstrained => Decomposition::Unconstrained(families::w_eps_unconstrained(n, eps).map_err(err)?),
        Family::WPsd => Decomposition::Psd(families::w_eps_psd(n, eps).map_err(err)?),
        Family::WTiUnconstrained => Decomposition::Unconstrained(families::w_eps_ti_unconstrained(n, eps).map_err(err)?),
        Family::WTiPsd => Decomposition::Psd(families::w_eps_ti_psd(n, eps).map_err(err)?),
        Family::WTiNonneg { p } => Decomposition::Nonnegative(families::w_eps_ti_nonneg(n, eps, p).map_err(err)?),
        Family::TwoDomain { k } => Decomposition::Nonnegative(families::two_domain_eps(n, k, eps).map_err(err)?),
    };
    Ok(PyDecomposition(dec))
}

/// Tensor the family converges to.
#[pyfunction]
#[pyo3(signature = (name, n, param = None))]
fn family_target(name: &str, n: usize, param: Option<usize>) -> PyResult<PyTensor> {
    Family::from_label(name, param).and_then(|f| f.target(n)).map(PyTensor).map_err(err)
}

/// Errors over a log grid (default 13 points from 1e-1 to 1e-4) with the fitted slope.
#[pyfunction]
#[pyo3(signature = (name, n, grid = None, param = None))]
fn convergence_study<'py>(py: Python<'py>, name: &str, n: usize, grid: Option<Vec<f64>>, param: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let family = Family::from_label(name, param).map_err(err)?;
    let grid = grid.unwrap_or_else(families::default_grid);
    let study = py.detach(|| families::convergence_study(family, n, &grid)).map_err(err)?;
    to_py(py, &study)
}

#[pyfunction]
fn flattening_lower_bound(tensor: &PyTensor) -> usize {
    ranks::flattening_lower_bound(&tensor.0)
}

/// Flattening bound and multi-start ALS residual per target rank.
#[pyfunction]
#[pyo3(signature = (tensor, ranks_to_try, seed, starts = 20, iters = 2000, label = "T"))]
fn rank_report<'py>(
    py: Python<'py>,
    tensor: &PyTensor,
    ranks_to_try: Vec<usize>,
    seed: u64,
    starts: usize,
    iters: usize,
    label: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let w_n = ranks::parse_w_label(label).ok();
    let opts = AlsOptions::new(starts, iters, seed);
    let report = py.detach(|| ranks::rank_report(label, &tensor.0, &ranks_to_try, &opts, w_n)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn reference_ranks<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &ranks::reference_ranks())
}

/// `quantity` is one of rank, border_rank, ti_osr_lower_bound,
/// ti_psd_osr_lower_bound, ti_nn_osr_border_upper_bound.
#[pyfunction]
fn reference_lookup<'py>(py: Python<'py>, quantity: &str, n: usize) -> PyResult<Bound<'py, PyAny>> {
    let q: Quantity = serde_json::from_value(serde_json::Value::String(quantity.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown quantity '{quantity}'")))?;
    to_py(py, &ranks::reference_lookup(q, n))
}

/// Model JSON for a psd, purification or nonnegative decomposition.
#[pyfunction]
fn to_model(dec: &PyDecomposition) -> PyResult<String> {
    let text = match &dec.0 {
        Decomposition::Psd(p) => {
            let m = normalize_psd(p).and_then(|p| psd_to_quantum_model(&p)).map_err(err)?;
            serde_json::to_string(&m.to_json())
        }
        Decomposition::Purification(p) => {
            let m = normalize_purification(p).and_then(|p| purification_to_channel_model(&p)).map_err(err)?;
            serde_json::to_string(&m.to_json())
        }
        Decomposition::Nonnegative(nn) => serde_json::to_string(&nn_to_hvm(nn).map_err(err)?),
        other => return Err(PyValueError::new_err(format!("no model for {} decompositions", other.kind()))),
    };
    text.map_err(|e| PyValueError::new_err(e.to_string()))
}

fn quantum_or_hvm(text: &str) -> PyResult<ModelFile> {
    match parse(text)? {
        m @ (ModelFile::Quantum(_) | ModelFile::HiddenVariable(_)) => Ok(m),
        _ => Err(PyValueError::new_err("expected a quantum or hidden-variable model")),
    }
}

#[pyfunction]
fn from_model(text: &str) -> PyResult<PyDecomposition> {
    let dec = match quantum_or_hvm(text)? {
        ModelFile::Quantum(j) => {
            let m = QuantumModel::from_json(&j).map_err(err)?;
            match m.flavor() {
                "povm" => Decomposition::Psd(quantum_model_to_psd(&m).map_err(err)?),
                _ => Decomposition::Purification(channel_model_to_purification(&m).map_err(err)?),
            }
        }
        ModelFile::HiddenVariable(h) => Decomposition::Nonnegative(hvm_to_nn(&h).map_err(err)?),
        _ => unreachable!(),
    };
    Ok(PyDecomposition(dec))
}

/// Outcome distribution of a POVM or hidden-variable model.
#[pyfunction]
fn eval_model(text: &str) -> PyResult<PyTensor> {
    match quantum_or_hvm(text)? {
        ModelFile::Quantum(j) => {
            let m = QuantumModel::from_json(&j).map_err(err)?;
            if m.flavor() != "povm" {
                return Err(PyValueError::new_err("channel models produce a density matrix; use Decomposition.density_matrix"));
            }
            eval_quantum_model(&m).map(PyTensor).map_err(err)
        }
        ModelFile::HiddenVariable(h) => {
            h.deviation().map_err(err)?;
            Ok(PyTensor(eval_hvm(&h)))
        }
        _ => unreachable!(),
    }
}

/// Completeness, CPTP and normalization deviations of a model.
#[pyfunction]
fn model_report<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    match parse(text)? {
        ModelFile::Quantum(j) => to_py(py, &QuantumModel::from_json(&j).and_then(|m| m.report()).map_err(err)?),
        ModelFile::HiddenVariable(h) => to_py(py, &serde_json::json!({ "flavor": "hidden-variable", "deviation": h.deviation().map_err(err)? })),
        ModelFile::Povm { povm } => to_py(py, &brlab_core::correlations::Povm::from_json(&povm).map_err(err)?.check()),
        ModelFile::Channel { kraus } => to_py(py, &brlab_core::correlations::KrausChannel::from_json(&kraus).map_err(err)?.check()),
    }
}

/// Left-canonical form of an unconstrained tree decomposition and its isometry deviation.
#[pyfunction]
#[pyo3(signature = (dec, root = None))]
fn left_canonical(dec: &PyDecomposition, root: Option<usize>) -> PyResult<(PyDecomposition, f64)> {
    let Decomposition::Unconstrained(u) = &dec.0 else {
        return Err(PyValueError::new_err("left_canonical takes an unconstrained decomposition"));
    };
    let c = tree::left_canonical_rooted(u, root).map_err(err)?;
    let dev = tree::isometry_deviation(&c, root).map_err(err)?;
    Ok((PyDecomposition(Decomposition::Unconstrained(c)), dev))
}

/// Trace-normalized separable tree decomposition and the pruned bond values.
#[pyfunction]
#[pyo3(signature = (dec, root = None))]
fn normalize_separable_tree<'py>(py: Python<'py>, dec: &PyDecomposition, root: Option<usize>) -> PyResult<(PyDecomposition, Bound<'py, PyAny>)> {
    let Decomposition::Separable(s) = &dec.0 else {
        return Err(PyValueError::new_err("normalize_separable_tree takes a separable decomposition"));
    };
    let (out, pruned) = tree::normalize_separable_tree_rooted(s, root).map_err(err)?;
    Ok((PyDecomposition(Decomposition::Separable(out)), to_py(py, &pruned)?))
}

/// Closure report for a sequence on a tree, and the limit decomposition.
#[pyfunction]
fn closure_check<'py>(py: Python<'py>, seq: Vec<PyDecomposition>) -> PyResult<(Bound<'py, PyAny>, PyDecomposition)> {
    let seq: Vec<Decomposition> = seq.into_iter().map(|d| d.0).collect();
    let (report, limit) = tree::closure_check(&seq).map_err(err)?;
    Ok((to_py(py, &report)?, PyDecomposition(limit)))
}

#[pymodule]
pub fn brlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", brlab_core::VERSION)?;
    m.add("BrlabError", m.py().get_type::<BrlabError>())?;
    m.add_class::<PyTensor>()?;
    m.add_class::<PyComplex>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_function(wrap_pyfunction!(w_state, m)?)?;
    m.add_function(wrap_pyfunction!(family, m)?)?;
    m.add_function(wrap_pyfunction!(family_target, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(flattening_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(rank_report, m)?)?;
    m.add_function(wrap_pyfunction!(reference_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(reference_lookup, m)?)?;
    m.add_function(wrap_pyfunction!(to_model, m)?)?;
    m.add_function(wrap_pyfunction!(from_model, m)?)?;
    m.add_function(wrap_pyfunction!(eval_model, m)?)?;
    m.add_function(wrap_pyfunction!(model_report, m)?)?;
    m.add_function(wrap_pyfunction!(left_canonical, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_separable_tree, m)?)?;
    m.add_function(wrap_pyfunction!(closure_check, m)?)?;
    Ok(())
}
