//! Gauge fixing on tree complexes: left-canonical form for unconstrained
//! decompositions, trace rebalancing for separable decompositions, and a
//! finite-sequence closure check built on both.

use serde::{Deserialize, Serialize};

use crate::decomp::{
    contract_matrix, contract_vector, local_digits, Decomposition, SeparableDecomposition, UnconstrainedDecomposition,
};
use crate::error::{Error, Result};
use crate::families::fit_line;
use crate::linalg::{self, re, CMatrix, ZERO};
use crate::tensor::DenseTensor;
use crate::wsc::WeightedSimplicialComplex;

/// Leaf-to-root elimination order of a tree complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeOrder {
    root: usize,
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    parent_copy: Vec<Option<usize>>,
}

impl TreeOrder {
    /// `root` is 1-based; the default is the highest vertex.
    pub fn new(wsc: &WeightedSimplicialComplex, root: Option<usize>) -> Result<Self> {
        if !wsc.is_tree() {
            return Err(Error::NotTree("complex is not a tree".into()));
        }
        let n = wsc.n();
        let root = match root {
            Some(v) if (1..=n).contains(&v) => v - 1,
            Some(v) => return Err(Error::invalid(format!("root {v} out of range 1..={n}"))),
            None => n - 1,
        };
        let copies = wsc.facet_copies();
        let mut parent = vec![None; n];
        let mut parent_copy = vec![None; n];
        let mut seen = vec![false; n];
        let mut bfs = vec![root];
        seen[root] = true;
        let mut head = 0;
        while head < bfs.len() {
            let v = bfs[head];
            head += 1;
            for &c in wsc.copies_at(v) {
                let mask = copies[c].mask & !(1u64 << v);
                if mask == 0 {
                    continue;
                }
                let u = mask.trailing_zeros() as usize;
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some(v);
                    parent_copy[u] = Some(c);
                    bfs.push(u);
                }
            }
        }
        let order = bfs.into_iter().skip(1).rev().collect();
        Ok(Self { root, order, parent, parent_copy })
    }

    /// 0-based root.
    pub fn root(&self) -> usize {
        self.root
    }

    /// 0-based non-root vertices, every vertex after all of its children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Position of the parent edge among the legs of `v`, and of the same
    /// edge among the legs of the parent.
    fn legs(&self, wsc: &WeightedSimplicialComplex, v: usize) -> (usize, usize, usize) {
        let c = self.parent_copy[v].expect("non-root vertex");
        let p = self.parent[v].expect("non-root vertex");
        let kv = wsc.copies_at(v).iter().position(|&x| x == c).expect("edge at vertex");
        let kp = wsc.copies_at(p).iter().position(|&x| x == c).expect("edge at parent");
        (p, kv, kp)
    }
}

/// Local index with leg `k` replaced by `a`, and the remaining legs.
fn split_leg(beta: usize, m: usize, r: usize, k: usize) -> (usize, usize) {
    let digits = local_digits(beta, m, r);
    let rest = digits.iter().enumerate().filter(|&(i, _)| i != k).fold(0, |acc, (_, &d)| acc * r + d);
    (digits[k], rest)
}

/// Rows `(j, other legs)`, columns the value of leg `k`.
fn leg_matrix(w: &CMatrix, m: usize, r: usize, k: usize) -> CMatrix {
    let rest_size = w.cols() / r;
    let mut out = CMatrix::zeros(w.rows() * rest_size, r);
    for beta in 0..w.cols() {
        let (a, rest) = split_leg(beta, m, r, k);
        for j in 0..w.rows() {
            out[(j * rest_size + rest, a)] = w[(j, beta)];
        }
    }
    out
}

fn from_leg_matrix(mat: &CMatrix, d: usize, m: usize, r: usize, k: usize) -> CMatrix {
    let l = r.pow(m as u32);
    let rest_size = l / r;
    let mut out = CMatrix::zeros(d, l);
    for beta in 0..l {
        let (a, rest) = split_leg(beta, m, r, k);
        for j in 0..d {
            out[(j, beta)] = mat[(j * rest_size + rest, a)];
        }
    }
    out
}

/// `w'[·, leg k = a] = Σ_b R[a, b] w[·, leg k = b]`.
fn apply_to_leg(w: &CMatrix, m: usize, r: usize, k: usize, rmat: &CMatrix) -> CMatrix {
    let lm = leg_matrix(w, m, r, k);
    let moved = lm.matmul(&rmat.transpose());
    from_leg_matrix(&moved, w.rows(), m, r, k)
}

fn require_plain_tree(wsc: &WeightedSimplicialComplex, trivial: bool) -> Result<()> {
    if !wsc.is_tree() {
        return Err(Error::NotTree("complex is not a tree".into()));
    }
    if !trivial {
        return Err(Error::invalid("tree normalization needs the trivial group action"));
    }
    Ok(())
}

/// QR sweep from the leaves to the root: every non-root local becomes an
/// isometry from its parent edge (padded with zero columns when the local
/// space is smaller than the bond) and the triangular factor moves into the
/// parent.
pub fn left_canonical(dec: &UnconstrainedDecomposition) -> Result<UnconstrainedDecomposition> {
    left_canonical_rooted(dec, None)
}

pub fn left_canonical_rooted(dec: &UnconstrainedDecomposition, root: Option<usize>) -> Result<UnconstrainedDecomposition> {
    let wsc = dec.complex();
    require_plain_tree(wsc, dec.action().is_trivial())?;
    let order = TreeOrder::new(wsc, root)?;
    let r = dec.r();
    let mut locals = dec.locals().to_vec();
    for &v in order.order() {
        let (p, kv, kp) = order.legs(wsc, v);
        let mv = wsc.copies_at(v).len();
        let lm = leg_matrix(&locals[v], mv, r, kv);
        let (q, rr) = linalg::qr_thin(&lm);
        let kk = q.cols();
        let qpad = CMatrix::from_fn(lm.rows(), r, |x, a| if a < kk { q[(x, a)] } else { ZERO });
        let rpad = CMatrix::from_fn(r, r, |a, b| if a < kk { rr[(a, b)] } else { ZERO });
        locals[v] = from_leg_matrix(&qpad, locals[v].rows(), mv, r, kv);
        locals[p] = apply_to_leg(&locals[p], wsc.copies_at(p).len(), r, kp, &rpad);
    }
    UnconstrainedDecomposition::new(dec.action(), r, locals)
}

/// Largest `‖M†M − diag(1,…,1,0,…,0)‖_max` over non-root vertices, with `M`
/// the local as a map from the parent edge.
pub fn isometry_deviation(dec: &UnconstrainedDecomposition, root: Option<usize>) -> Result<f64> {
    let wsc = dec.complex();
    let order = TreeOrder::new(wsc, root)?;
    let r = dec.r();
    let mut dev = 0.0f64;
    for &v in order.order() {
        let (_, kv, _) = order.legs(wsc, v);
        let lm = leg_matrix(dec.local(v), wsc.copies_at(v).len(), r, kv);
        let kk = lm.rows().min(r);
        let target = CMatrix::from_fn(r, r, |a, b| if a == b && a < kk { re(1.0) } else { ZERO });
        dev = dev.max(lm.adjoint().matmul(&lm).max_abs_diff(&target));
    }
    Ok(dev)
}

/// Edge value dropped by `normalize_separable_tree`: 1-based vertices of
/// the edge and the 0-based value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedValue {
    pub edge: (usize, usize),
    pub value: usize,
}

/// Trace rebalancing from the leaves to the root. For every non-root vertex
/// and every value `a` of its parent edge, the traces of the local matrices
/// with that value, summed over the child edges, become 1; the removed
/// scalar multiplies the parent's matrices with the same value. At a leaf
/// this makes every local matrix trace 1, and the root traces sum to `tr ρ`.
/// Values whose matrices are all zero are zeroed on both ends and reported.
pub fn normalize_separable_tree(dec: &SeparableDecomposition) -> Result<(SeparableDecomposition, Vec<PrunedValue>)> {
    normalize_separable_tree_rooted(dec, None)
}

pub fn normalize_separable_tree_rooted(
    dec: &SeparableDecomposition,
    root: Option<usize>,
) -> Result<(SeparableDecomposition, Vec<PrunedValue>)> {
    let wsc = dec.complex();
    require_plain_tree(wsc, dec.action().is_trivial())?;
    let order = TreeOrder::new(wsc, root)?;
    let r = dec.r();
    let mut locals = dec.locals().to_vec();
    let mut pruned = Vec::new();
    for &v in order.order() {
        let (p, kv, kp) = order.legs(wsc, v);
        let (mv, mp) = (wsc.copies_at(v).len(), wsc.copies_at(p).len());
        let mut mass = vec![0.0; r];
        for (beta, a_mat) in locals[v].iter().enumerate() {
            mass[split_leg(beta, mv, r, kv).0] += a_mat.trace().re;
        }
        if !mass.iter().all(|m| m.is_finite()) {
            return Err(Error::Numerical("non-finite trace in separable decomposition".into()));
        }
        for (beta, a_mat) in locals[v].iter_mut().enumerate() {
            let s = mass[split_leg(beta, mv, r, kv).0];
            *a_mat = if s > 0.0 { a_mat.scale_real(1.0 / s) } else { CMatrix::zeros(a_mat.rows(), a_mat.cols()) };
        }
        for (beta, a_mat) in locals[p].iter_mut().enumerate() {
            let s = mass[split_leg(beta, mp, r, kp).0];
            *a_mat = if s > 0.0 { a_mat.scale_real(s) } else { CMatrix::zeros(a_mat.rows(), a_mat.cols()) };
        }
        for (a, &s) in mass.iter().enumerate() {
            if s <= 0.0 {
                let (x, y) = if v < p { (v + 1, p + 1) } else { (p + 1, v + 1) };
                pruned.push(PrunedValue { edge: (x, y), value: a });
            }
        }
    }
    Ok((SeparableDecomposition::new(dec.action(), r, locals)?, pruned))
}

/// Largest defect of the per-edge-value trace sums at non-root vertices
/// (values with zero mass are skipped).
pub fn trace_balance_deviation(dec: &SeparableDecomposition, root: Option<usize>) -> Result<f64> {
    let wsc = dec.complex();
    let order = TreeOrder::new(wsc, root)?;
    let r = dec.r();
    let mut dev = 0.0f64;
    for &v in order.order() {
        let (_, kv, _) = order.legs(wsc, v);
        let mut mass = vec![0.0; r];
        for (beta, a_mat) in dec.local(v).iter().enumerate() {
            mass[split_leg(beta, wsc.copies_at(v).len(), r, kv).0] += a_mat.trace().re;
        }
        for m in mass {
            if m != 0.0 {
                dev = dev.max((m - 1.0).abs());
            }
        }
    }
    Ok(dev)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementNorms {
    pub index: usize,
    /// Largest non-root local size: Frobenius norm for unconstrained
    /// locals, trace for separable ones, entry modulus when unnormalized.
    pub max_local: f64,
    pub root_local: f64,
    /// `‖ψ‖` or `tr ρ` of the element.
    pub scale: f64,
    pub cauchy_tail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub variant: String,
    pub tree: bool,
    pub normalized: bool,
    pub r: usize,
    pub elements: Vec<ElementNorms>,
    pub cauchy: bool,
    pub bounded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_bond: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_slope: Option<f64>,
}

pub const CLOSURE_SLACK: f64 = 1e-8;

fn flat(d: &Decomposition) -> Result<DenseTensor> {
    match d {
        Decomposition::Unconstrained(u) => contract_vector(u),
        Decomposition::Nonnegative(u) => contract_vector(u.inner()),
        Decomposition::Separable(s) => Ok(contract_matrix(s)?.to_tensor()),
        Decomposition::Psd(p) => crate::decomp::contract_psd(p),
        Decomposition::Purification(p) => Ok(crate::decomp::contract_purification(p)?.to_tensor()),
    }
}

/// `tail[k] = max_{l,m ≥ k} ‖c_l − c_m‖`.
fn cauchy_tails(cs: &[DenseTensor]) -> Result<Vec<f64>> {
    let k = cs.len();
    let mut tails = vec![0.0; k];
    for a in (0..k).rev() {
        let mut t = if a + 1 < k { tails[a + 1] } else { 0.0 };
        for c in cs.iter().skip(a + 1) {
            t = f64::max(t, cs[a].distance(c)?);
        }
        tails[a] = t;
    }
    Ok(tails)
}

fn is_cauchy(tails: &[f64], scale: f64) -> bool {
    if tails.len() < 2 {
        return true;
    }
    let first = tails[0];
    first <= 1e-12 * scale.max(1.0) || tails[tails.len() - 2] <= 0.5 * first
}

fn common_frame(seq: &[Decomposition]) -> Result<(WeightedSimplicialComplex, usize, &'static str)> {
    let first = seq.first().ok_or_else(|| Error::invalid("closure check needs a nonempty sequence"))?;
    let wsc = first.action().complex().clone();
    let r = first.r();
    for d in seq {
        if d.action().complex() != &wsc || d.r() != r {
            return Err(Error::invalid("all elements must share the complex and the bond"));
        }
    }
    Ok((wsc, r, first.kind()))
}

/// Normalizes every element, reports the largest local sizes, and takes the
/// last normalized element as the limit witness.
pub fn closure_check(seq: &[Decomposition]) -> Result<(ClosureReport, Decomposition)> {
    let (wsc, r, kind) = common_frame(seq)?;
    if !wsc.is_tree() {
        return Err(Error::NotTree("closure check needs a tree complex; use the unnormalized diagnostic".into()));
    }
    let contractions = seq.iter().map(flat).collect::<Result<Vec<_>>>()?;
    let tails = cauchy_tails(&contractions)?;
    let order = TreeOrder::new(&wsc, None)?;
    let root = order.root();
    let mut elements = Vec::new();
    let mut normalized = Vec::new();
    let mut bounded = true;
    for (idx, d) in seq.iter().enumerate() {
        let (norm_dec, max_local, root_local, scale, limit_ok) = match d {
            Decomposition::Unconstrained(u) => {
                let c = left_canonical(u)?;
                let max_local = order.order().iter().map(|&v| c.local(v).frobenius_norm()).fold(0.0, f64::max);
                let root_local = c.local(root).frobenius_norm();
                let scale = contractions[idx].frobenius_norm();
                let ok = max_local <= (r as f64).sqrt() + CLOSURE_SLACK && root_local <= scale + CLOSURE_SLACK;
                (Decomposition::Unconstrained(c), max_local, root_local, scale, ok)
            }
            Decomposition::Separable(s) => separable_norms(s, &order)?,
            Decomposition::Nonnegative(nn) => {
                let s = SeparableDecomposition::from_nonnegative(nn);
                separable_norms(&s, &order)?
            }
            other => return Err(Error::invalid(format!("closure check does not handle {} decompositions", other.kind()))),
        };
        bounded &= limit_ok;
        elements.push(ElementNorms { index: idx, max_local, root_local, scale, cauchy_tail: tails[idx] });
        normalized.push(norm_dec);
    }
    let limit = normalized.pop().expect("nonempty");
    let last = contractions.last().expect("nonempty");
    let limit_deviation = flat(&limit)?.distance(last)? / last.frobenius_norm().max(f64::MIN_POSITIVE);
    let report = ClosureReport {
        variant: kind.into(),
        tree: true,
        normalized: true,
        r,
        cauchy: is_cauchy(&tails, last.frobenius_norm()),
        bounded,
        elements,
        limit_bond: Some(limit.r()),
        limit_deviation: Some(limit_deviation),
        growth_slope: None,
    };
    Ok((report, limit))
}

fn separable_norms(
    s: &SeparableDecomposition,
    order: &TreeOrder,
) -> Result<(Decomposition, f64, f64, f64, bool)> {
    let (c, _) = normalize_separable_tree(s)?;
    let tr = |v: usize| c.local(v).iter().map(|m| m.trace().re).fold(0.0, f64::max);
    let max_local = order.order().iter().map(|&v| tr(v)).fold(0.0, f64::max);
    let root_local = tr(order.root());
    let scale = contract_matrix(&c)?.trace().re;
    let ok = max_local <= 1.0 + CLOSURE_SLACK && root_local <= scale + CLOSURE_SLACK;
    Ok((Decomposition::Separable(c), max_local, root_local, scale, ok))
}

/// Largest local entry modulus of every element without normalization, on
/// any complex. With one positive parameter per element, also fits the
/// log-log growth slope of that maximum against the parameter.
pub fn unnormalized_norm_diagnostic(seq: &[Decomposition], params: Option<&[f64]>) -> Result<ClosureReport> {
    let (wsc, r, kind) = common_frame(seq)?;
    let contractions = seq.iter().map(flat).collect::<Result<Vec<_>>>()?;
    let tails = cauchy_tails(&contractions)?;
    let elements: Vec<ElementNorms> = seq
        .iter()
        .enumerate()
        .map(|(idx, d)| {
            let max_local = local_max_entry(d);
            ElementNorms {
                index: idx,
                max_local,
                root_local: max_local,
                scale: contractions[idx].frobenius_norm(),
                cauchy_tail: tails[idx],
            }
        })
        .collect();
    let growth_slope = match params {
        Some(p) if p.len() == seq.len() && p.len() >= 2 => {
            let xs: Vec<f64> = p.iter().map(|x| x.ln()).collect();
            let ys: Vec<f64> = elements.iter().map(|e| e.max_local.ln()).collect();
            Some(fit_line(&xs, &ys)?.slope)
        }
        Some(_) => return Err(Error::invalid("one parameter per element required")),
        None => None,
    };
    let first = elements.first().map_or(0.0, |e| e.max_local);
    let last = elements.last().map_or(0.0, |e| e.max_local);
    Ok(ClosureReport {
        variant: kind.into(),
        tree: wsc.is_tree(),
        normalized: false,
        r,
        cauchy: is_cauchy(&tails, contractions.last().map_or(1.0, |c| c.frobenius_norm())),
        bounded: growth_slope.map_or(last <= first * (1.0 + CLOSURE_SLACK), |s| s >= -CLOSURE_SLACK),
        elements,
        limit_bond: None,
        limit_deviation: None,
        growth_slope,
    })
}

fn local_max_entry(d: &Decomposition) -> f64 {
    let mats: Vec<&CMatrix> = match d {
        Decomposition::Unconstrained(u) => u.locals().iter().collect(),
        Decomposition::Nonnegative(u) => u.inner().locals().iter().collect(),
        Decomposition::Psd(p) => p.locals().iter().flatten().collect(),
        Decomposition::Separable(s) => s.locals().iter().flatten().collect(),
        Decomposition::Purification(p) => p.locals().iter().flatten().collect(),
    };
    mats.iter().map(|m| m.max_abs()).fold(0.0, f64::max)
}
