//! Rank bounds and witnesses: flattening lower bounds, multi-start
//! alternating least squares (unconstrained and nonnegative), the
//! symmetric psd rank-2 residual oracle for 3-qubit tensors, and the table of
//! known ranks of `W_n`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{NonnegativeDecomposition, UnconstrainedDecomposition};
use crate::error::{Error, Result};
use crate::families::{psd_family_matrices, w_eps_psd, w_eps_unconstrained, w_eps_unconstrained_error, w_state};
use crate::linalg::{self, re, CMatrix, C64, ZERO};
use crate::random::{gaussian, gaussian_matrix, uniform_matrix};
use crate::tensor::{matrix_rank, DenseTensor, DEFAULT_RANK_TOL};
use crate::wsc::{make_simplex, GroupAction};

pub const ALS_DAMPING: f64 = 1e-12;
pub const DEFAULT_STARTS: usize = 20;
pub const DEFAULT_ITERS: usize = 2000;
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Largest matrix rank over all single-site and contiguous-interval
/// unfoldings.
pub fn flattening_lower_bound(t: &DenseTensor) -> usize {
    let n = t.order();
    if n < 2 {
        return usize::from(t.max_abs() > 0.0);
    }
    let mut cuts: Vec<Vec<usize>> = (1..=n).map(|i| vec![i]).collect();
    for a in 1..=n {
        for b in a + 1..=n {
            if b - a + 1 < n {
                cuts.push((a..=b).collect());
            }
        }
    }
    cuts.iter()
        .map(|cut| matrix_rank(&t.unfold(cut).expect("valid cut"), DEFAULT_RANK_TOL))
        .max()
        .unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlsOptions {
    pub starts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once the relative residual change of a sweep falls below this.
    pub rel_tol: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self { starts: DEFAULT_STARTS, max_iters: DEFAULT_ITERS, seed: 0, rel_tol: DEFAULT_REL_TOL }
    }
}

impl AlsOptions {
    pub fn new(starts: usize, max_iters: usize, seed: u64) -> Self {
        Self { starts, max_iters, seed, ..Self::default() }
    }
}

/// Best run of a multi-start optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct AlsOutcome<D> {
    pub decomposition: D,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning start; the warm start, if any, has index `starts`.
    pub best_start: usize,
    pub max_factor_norm: f64,
    /// Residual after initialization and after every sweep.
    pub history: Vec<f64>,
}

fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

/// Mode-ordered copies of a tensor: copy `i` has site `i` first.
struct ModeViews {
    shape: Vec<usize>,
    views: Vec<Vec<C64>>,
}

impl ModeViews {
    fn new(t: &DenseTensor) -> Self {
        let n = t.order();
        let views = (0..n)
            .map(|i| {
                let mut perm = vec![i];
                perm.extend((0..n).filter(|&k| k != i));
                t.permute_sites(&perm).expect("permutation").data().to_vec()
            })
            .collect();
        Self { shape: t.shape().to_vec(), views }
    }

    /// `R[j_i, α] = Σ T[j] ∏_{k≠i} conj(U_k[j_k, α])`.
    fn mttkrp(&self, factors: &[CMatrix], i: usize) -> CMatrix {
        let n = self.shape.len();
        let r = factors[0].cols();
        let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let mut out = CMatrix::zeros(self.shape[i], r);
        for a in 0..r {
            let mut cur = self.views[i].clone();
            for &k in others.iter().rev() {
                let dk = self.shape[k];
                let col: Vec<C64> = factors[k].column(a).iter().map(|z| z.conj()).collect();
                cur = cur.chunks(dk).map(|chunk| chunk.iter().zip(&col).map(|(x, y)| x * y).sum()).collect();
            }
            out.set_column(a, &cur);
        }
        out
    }
}

/// `Σ_α ⊗_i U_i[:, α]`.
pub fn cp_tensor(factors: &[CMatrix]) -> DenseTensor {
    let shape: Vec<usize> = factors.iter().map(|f| f.rows()).collect();
    let r = factors.first().map_or(0, |f| f.cols());
    let mut acc = vec![ZERO; shape.iter().product()];
    for a in 0..r {
        let mut cur = vec![C64::new(1.0, 0.0)];
        for f in factors {
            let col = f.column(a);
            cur = cur.iter().flat_map(|x| col.iter().map(move |y| x * y)).collect();
        }
        acc.iter_mut().zip(&cur).for_each(|(s, v)| *s += v);
    }
    DenseTensor::new(shape, acc).expect("consistent shape")
}

/// `⊙_{k≠i} U_k^T conj(U_k)`.
fn gram_product(factors: &[CMatrix], i: usize) -> CMatrix {
    let r = factors[0].cols();
    let mut m = CMatrix::from_fn(r, r, |_, _| re(1.0));
    for (k, f) in factors.iter().enumerate() {
        if k == i {
            continue;
        }
        let h = f.transpose().matmul(&f.conj());
        m = CMatrix::from_fn(r, r, |a, b| m[(a, b)] * h[(a, b)]);
    }
    m
}

fn max_factor_norm(factors: &[CMatrix]) -> f64 {
    factors.iter().map(|f| f.frobenius_norm()).fold(0.0, f64::max)
}

struct Run {
    factors: Vec<CMatrix>,
    residual: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn sweep_loop(
    t: &DenseTensor,
    views: &ModeViews,
    mut factors: Vec<CMatrix>,
    opts: &AlsOptions,
    update: impl Fn(&mut [CMatrix], usize, &CMatrix, &CMatrix),
) -> Run {
    let scale = t.frobenius_norm().max(1.0);
    let mut residual = cp_tensor(&factors).distance(t).unwrap_or(f64::INFINITY);
    let mut history = vec![residual];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        for i in 0..factors.len() {
            let rhs = views.mttkrp(&factors, i);
            let gram = gram_product(&factors, i);
            update(&mut factors, i, &gram, &rhs);
        }
        iterations += 1;
        let next = cp_tensor(&factors).distance(t).unwrap_or(f64::INFINITY);
        history.push(next);
        let change = (residual - next).abs();
        residual = next;
        if !residual.is_finite() {
            break;
        }
        if change <= opts.rel_tol * residual.max(f64::MIN_POSITIVE) || residual <= 1e-15 * scale {
            converged = true;
            break;
        }
    }
    Run { factors, residual, iterations, converged, history }
}

fn pick_best(runs: Vec<Run>) -> (usize, Run) {
    let mut best: Option<(usize, Run)> = None;
    for (k, run) in runs.into_iter().enumerate() {
        let better = match &best {
            None => true,
            Some((_, b)) => run.residual < b.residual || (b.residual.is_nan() && !run.residual.is_nan()),
        };
        if better {
            best = Some((k, run));
        }
    }
    best.expect("at least one start")
}

fn check_factor_shapes(t: &DenseTensor, r: usize, factors: &[CMatrix]) -> Result<()> {
    if factors.len() != t.order() || factors.iter().zip(t.shape()).any(|(f, &d)| f.rows() != d || f.cols() != r) {
        return Err(Error::invalid("warm-start factors must be d_i x r for every site"));
    }
    Ok(())
}

fn sigma_frame(n: usize) -> Result<GroupAction> {
    Ok(GroupAction::trivial(&make_simplex(n)?))
}

fn als_update(factors: &mut [CMatrix], i: usize, gram: &CMatrix, rhs: &CMatrix) {
    let r = gram.rows();
    let lambda = ALS_DAMPING * (0..r).map(|a| gram[(a, a)].re).fold(1.0, f64::max);
    let damped = CMatrix::from_fn(r, r, |a, b| gram[(b, a)] + if a == b { re(lambda) } else { ZERO });
    if let Ok(sol) = linalg::solve(&damped, &rhs.transpose()) {
        if sol.is_finite() {
            factors[i] = sol.transpose();
        }
    }
}

/// Multi-start alternating least squares for the rank-`r` model on the
/// simplex with trivial symmetry.
pub fn als_cp(
    t: &DenseTensor,
    r: usize,
    opts: &AlsOptions,
    warm_start: Option<&[CMatrix]>,
) -> Result<AlsOutcome<UnconstrainedDecomposition>> {
    if r == 0 || opts.starts == 0 && warm_start.is_none() {
        return Err(Error::invalid("als_cp needs r >= 1 and at least one start"));
    }
    if let Some(w) = warm_start {
        check_factor_shapes(t, r, w)?;
    }
    let views = ModeViews::new(t);
    let mut inits: Vec<Vec<CMatrix>> = (0..opts.starts)
        .map(|s| {
            let mut rng = start_rng(opts.seed, s);
            t.shape().iter().map(|&d| gaussian_matrix(d, r, &mut rng)).collect()
        })
        .collect();
    if let Some(w) = warm_start {
        inits.push(w.to_vec());
    }
    let runs: Vec<Run> = inits.into_par_iter().map(|f| sweep_loop(t, &views, f, opts, als_update)).collect();
    let (best_start, run) = pick_best(runs);
    let decomposition = UnconstrainedDecomposition::new(&sigma_frame(t.order())?, r, run.factors.clone())?;
    Ok(AlsOutcome {
        max_factor_norm: max_factor_norm(&run.factors),
        decomposition,
        residual: run.residual,
        iterations: run.iterations,
        converged: run.converged,
        best_start,
        history: run.history,
    })
}

fn hals_update(factors: &mut [CMatrix], i: usize, gram: &CMatrix, rhs: &CMatrix) {
    let r = gram.rows();
    let u = &mut factors[i];
    for a in 0..r {
        let denom = gram[(a, a)].re + ALS_DAMPING;
        for j in 0..u.rows() {
            let mut grad = rhs[(j, a)].re;
            for b in 0..r {
                grad -= u[(j, b)].re * gram[(b, a)].re;
            }
            let v = (u[(j, a)].re + grad / denom).max(0.0);
            u[(j, a)] = re(v);
        }
    }
}

/// Multi-start hierarchical ALS with nonnegativity projection.
pub fn als_nonnegative(
    t: &DenseTensor,
    r: usize,
    opts: &AlsOptions,
    warm_start: Option<&[CMatrix]>,
) -> Result<AlsOutcome<NonnegativeDecomposition>> {
    if r == 0 || opts.starts == 0 && warm_start.is_none() {
        return Err(Error::invalid("als_nonnegative needs r >= 1 and at least one start"));
    }
    if !t.is_nonnegative(0.0) {
        return Err(Error::invalid("als_nonnegative requires a real entrywise nonnegative tensor"));
    }
    if let Some(w) = warm_start {
        check_factor_shapes(t, r, w)?;
        if w.iter().any(|f| f.data().iter().any(|z| z.im != 0.0 || z.re < 0.0)) {
            return Err(Error::invalid("warm-start factors must be real and nonnegative"));
        }
    }
    let views = ModeViews::new(t);
    let mut inits: Vec<Vec<CMatrix>> = (0..opts.starts)
        .map(|s| {
            let mut rng = start_rng(opts.seed, s);
            t.shape().iter().map(|&d| uniform_matrix(d, r, &mut rng)).collect()
        })
        .collect();
    if let Some(w) = warm_start {
        inits.push(w.to_vec());
    }
    let runs: Vec<Run> = inits.into_par_iter().map(|f| sweep_loop(t, &views, f, opts, hals_update)).collect();
    let (best_start, run) = pick_best(runs);
    let inner = UnconstrainedDecomposition::new(&sigma_frame(t.order())?, r, run.factors.clone())?;
    Ok(AlsOutcome {
        max_factor_norm: max_factor_norm(&run.factors),
        decomposition: NonnegativeDecomposition::new(inner)?,
        residual: run.residual,
        iterations: run.iterations,
        converged: run.converged,
        best_start,
        history: run.history,
    })
}

/// Result of the symmetric psd rank-2 oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmPsdOutcome {
    pub residual: f64,
    pub matrices: (CMatrix, CMatrix),
    /// `None` when the zero point wins.
    pub best_start: Option<usize>,
}

fn cholesky_pair(x: &[f64]) -> (CMatrix, CMatrix) {
    let make = |p: &[f64]| {
        let l = CMatrix::from_vec(2, 2, vec![re(p[0]), ZERO, C64::new(p[1], p[2]), re(p[3])]).expect("2x2");
        l.matmul(&l.adjoint())
    };
    (make(&x[0..4]), make(&x[4..8]))
}

/// `⟨M| A_{j1} ⋆ A_{j2} ⋆ A_{j3} |M⟩` for all `j ∈ {0,1}^3`, row-major.
pub fn symm_psd2_model(a0: &CMatrix, a1: &CMatrix) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (k, slot) in out.iter_mut().enumerate() {
        let pick = |bit: usize| if (k >> (2 - bit)) & 1 == 1 { a1 } else { a0 };
        let mut s = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                s += pick(0)[(a, b)] * pick(1)[(a, b)] * pick(2)[(a, b)];
            }
        }
        *slot = s.re;
    }
    out
}

fn symm_residuals(x: &[f64], target: &[f64; 8]) -> [f64; 8] {
    let (a0, a1) = cholesky_pair(x);
    let m = symm_psd2_model(&a0, &a1);
    std::array::from_fn(|k| m[k] - target[k])
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Levenberg–Marquardt on the 8 Cholesky parameters with a central
/// difference Jacobian. Returns the final parameters and cost.
fn levenberg_marquardt(mut x: Vec<f64>, target: &[f64; 8], iters: usize) -> (Vec<f64>, f64) {
    let mut res = symm_residuals(&x, target);
    let mut cost = sq(&res);
    let mut mu = 1e-3;
    for _ in 0..iters {
        if cost == 0.0 {
            break;
        }
        let mut jac = [[0.0; 8]; 8];
        for p in 0..8 {
            let h = 1e-6 * x[p].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[p] += h;
            xm[p] -= h;
            let (rp, rm) = (symm_residuals(&xp, target), symm_residuals(&xm, target));
            for k in 0..8 {
                jac[k][p] = (rp[k] - rm[k]) / (2.0 * h);
            }
        }
        let jtj = CMatrix::from_fn(8, 8, |a, b| re((0..8).map(|k| jac[k][a] * jac[k][b]).sum()));
        let jtr: Vec<f64> = (0..8).map(|a| (0..8).map(|k| jac[k][a] * res[k]).sum()).collect();
        let mut accepted = false;
        while mu < 1e16 {
            let sys = CMatrix::from_fn(8, 8, |a, b| jtj[(a, b)] + if a == b { re(mu * (1.0 + jtj[(a, a)].re)) } else { ZERO });
            let rhs = CMatrix::from_fn(8, 1, |a, _| re(-jtr[a]));
            let Ok(step) = linalg::solve(&sys, &rhs) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = (0..8).map(|p| x[p] + step[(p, 0)].re).collect();
            let cres = symm_residuals(&cand, target);
            let ccost = sq(&cres);
            if ccost.is_finite() && ccost < cost {
                let rel = (cost - ccost) / cost;
                x = cand;
                res = cres;
                cost = ccost;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                if rel < DEFAULT_REL_TOL {
                    return (x, cost);
                }
                break;
            }
            mu *= 2.0;
        }
        if !accepted {
            break;
        }
    }
    (x, cost)
}

/// Best residual of `T ≈ ⟨M| A_{j1} ⋆ A_{j2} ⋆ A_{j3} |M⟩` over psd 2×2
/// pairs `(A_0, A_1)`, from `starts` Gaussian starting points plus the zero
/// point.
pub fn symm_psd2_residual(t: &DenseTensor, starts: usize, iters: usize, seed: u64) -> Result<SymmPsdOutcome> {
    if t.shape() != [2, 2, 2] {
        return Err(Error::invalid("symm_psd2_residual needs a 2x2x2 tensor"));
    }
    if !t.is_nonnegative(0.0) {
        return Err(Error::invalid("symm_psd2_residual needs an entrywise nonnegative tensor"));
    }
    let target: [f64; 8] = std::array::from_fn(|k| t.data()[k].re);
    let zero = CMatrix::zeros(2, 2);
    let mut best = SymmPsdOutcome { residual: sq(&target).sqrt(), matrices: (zero.clone(), zero), best_start: None };
    let runs: Vec<(Vec<f64>, f64)> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = start_rng(seed, s);
            let x0: Vec<f64> = (0..8).map(|_| gaussian(&mut rng).re * std::f64::consts::SQRT_2).collect();
            levenberg_marquardt(x0, &target, iters)
        })
        .collect();
    for (s, (x, cost)) in runs.into_iter().enumerate() {
        if cost.sqrt() < best.residual {
            best = SymmPsdOutcome { residual: cost.sqrt(), matrices: cholesky_pair(&x), best_start: Some(s) };
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    AtMost,
    AtLeast,
}

/// One known value or bound, with a neutral anchor label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub quantity: String,
    pub tensor: String,
    pub relation: Relation,
    pub value: String,
    pub anchor: String,
    pub reproduced: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Rank,
    BorderRank,
    TiOsrLowerBound,
    TiPsdOsrLowerBound,
    TiNnOsrBorderUpperBound,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Rank => "rank",
            Quantity::BorderRank => "brank",
            Quantity::TiOsrLowerBound => "tiosr",
            Quantity::TiPsdOsrLowerBound => "tipsdosr",
            Quantity::TiNnOsrBorderUpperBound => "btinnosr",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub quantity: String,
    pub relation: Relation,
    pub value: usize,
    pub anchor: String,
}

pub fn reference_ranks() -> Vec<ReferenceEntry> {
    let e = |q: &str, t: &str, rel, v: &str, a: &str, how: &str| ReferenceEntry {
        quantity: q.into(),
        tensor: t.into(),
        relation: rel,
        value: v.into(),
        anchor: a.into(),
        reproduced: how.into(),
    };
    vec![
        e("rank", "W_n", Relation::Equal, "n", "w-rank", "upper-bound witness by ALS; the lower bound is a proof and is not reproduced numerically"),
        e("brank", "W_n", Relation::Equal, "2", "w-border-rank", "rank-2 family converging at slope 1; flattening bound 2"),
        e("bsymmrank", "W_n", Relation::Equal, "2", "w-border-rank", "symmetric rank-2 family"),
        e("tiosr", "W_n", Relation::AtLeast, "sqrt(n)", "w-ti-lower-bound", "cited only"),
        e("rank", "T", Relation::AtMost, "psdrank(T)^2", "psd-to-unconstrained", "psd_to_unconstrained bond r^2"),
        e("tipsdosr", "W_n", Relation::AtLeast, "Omega(n^(1/4))", "w-ti-psd-lower-bound", "cited only"),
        e("btinnosr", "W_n", Relation::AtMost, "p for every p >= 2 dividing n-1", "w-ti-nonneg-border", "t.i. nonnegative family"),
    ]
}

/// Numeric value of `quantity` for `W_n`, if the table determines one.
pub fn reference_lookup(quantity: Quantity, n: usize) -> Option<ReferenceValue> {
    if n < 2 {
        return None;
    }
    let (relation, value, anchor) = match quantity {
        Quantity::Rank => (Relation::Equal, n, "w-rank"),
        Quantity::BorderRank => (Relation::Equal, 2, "w-border-rank"),
        Quantity::TiOsrLowerBound => {
            let mut s = (n as f64).sqrt().floor() as usize;
            while s * s < n {
                s += 1;
            }
            (Relation::AtLeast, s, "w-ti-lower-bound")
        }
        Quantity::TiPsdOsrLowerBound => return None,
        Quantity::TiNnOsrBorderUpperBound => {
            let p = (2..n).find(|p| (n - 1).is_multiple_of(*p))?;
            (Relation::AtMost, p, "w-ti-nonneg-border")
        }
    };
    Some(ReferenceValue { quantity: quantity.name().into(), relation, value, anchor: anchor.into() })
}

/// Parses labels such as `W5` or `w_7`.
pub fn parse_w_label(label: &str) -> Result<usize> {
    let digits = label.trim_start_matches(['W', 'w']).trim_start_matches('_');
    digits
        .parse::<usize>()
        .ok()
        .filter(|&n| n >= 2)
        .ok_or_else(|| Error::invalid(format!("expected a tensor label like W5, got '{label}'")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResidual {
    pub r: usize,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_factor_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub label: String,
    pub flattening_lower_bound: usize,
    pub residuals: Vec<RankResidual>,
    pub reference: Vec<ReferenceValue>,
}

/// Flattening bound plus best ALS residuals at each target rank. Every rank
/// after the first also starts from the previous best with an extra zero
/// column, so residuals never increase with rank.
pub fn rank_report(label: &str, t: &DenseTensor, ranks: &[usize], opts: &AlsOptions, w_n: Option<usize>) -> Result<RankReport> {
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut residuals = Vec::new();
    let mut prev: Option<(usize, Vec<CMatrix>)> = None;
    for &r in &sorted {
        let warm = prev.as_ref().map(|(pr, f)| pad_columns(f, r - pr));
        let out = als_cp(t, r, opts, warm.as_deref())?;
        residuals.push(RankResidual {
            r,
            residual: out.residual,
            iterations: out.iterations,
            converged: out.converged,
            max_factor_norm: out.max_factor_norm,
        });
        prev = Some((r, out.decomposition.into_locals()));
    }
    let reference = w_n
        .map(|n| {
            [Quantity::Rank, Quantity::BorderRank, Quantity::TiOsrLowerBound, Quantity::TiNnOsrBorderUpperBound]
                .iter()
                .filter_map(|&q| reference_lookup(q, n))
                .collect()
        })
        .unwrap_or_default();
    Ok(RankReport { label: label.into(), flattening_lower_bound: flattening_lower_bound(t), residuals, reference })
}

fn pad_columns(factors: &[CMatrix], extra: usize) -> Vec<CMatrix> {
    factors
        .iter()
        .map(|f| CMatrix::from_fn(f.rows(), f.cols() + extra, |j, a| if a < f.cols() { f[(j, a)] } else { ZERO }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonnegFloor {
    pub r: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub n: usize,
    pub epsilon: f64,
    pub unconstrained_witness_residual: f64,
    pub unconstrained_witness_closed_form: f64,
    pub psd_witness_residual: f64,
    pub nonnegative_floors: Vec<NonnegFloor>,
    /// Radius below which no nonnegative rank-(n−1) tensor approximates
    /// `W_n`: the measured rank-(n−1) floor.
    pub eps_n: f64,
    /// Rank-2 witnesses fit inside the ε-ball that rank n−1 cannot reach.
    pub separated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub seed: u64,
    pub starts: usize,
    pub max_iters: usize,
    pub rows: Vec<SeparationRow>,
}

pub const SEPARATION_EPS: f64 = 1e-3;

pub fn separation_experiment(n_list: &[usize], opts: &AlsOptions) -> Result<SeparationReport> {
    if n_list.iter().any(|&n| !(3..=7).contains(&n)) {
        return Err(Error::invalid("separation_experiment supports n in 3..=7"));
    }
    let eps = SEPARATION_EPS;
    let mut rows = Vec::new();
    for &n in n_list {
        let w = w_state(n)?;
        let unc = crate::decomp::contract_vector(&w_eps_unconstrained(n, eps)?)?.distance(&w)?;
        let psd = crate::decomp::contract_psd(&w_eps_psd(n, eps)?)?.distance(&w)?;
        let mut floors = Vec::new();
        for r in 2..n {
            let out = als_nonnegative(&w, r, opts, None)?;
            floors.push(NonnegFloor { r, residual: out.residual });
        }
        let eps_n = floors.last().map_or(0.0, |f| f.residual);
        rows.push(SeparationRow {
            n,
            epsilon: eps,
            unconstrained_witness_residual: unc,
            unconstrained_witness_closed_form: w_eps_unconstrained_error(n, eps),
            psd_witness_residual: psd,
            separated: eps_n > unc.max(psd),
            nonnegative_floors: floors,
            eps_n,
        });
    }
    Ok(SeparationReport { seed: opts.seed, starts: opts.starts, max_iters: opts.max_iters, rows })
}

/// Parameters of the floor oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub starts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { starts: 100, iters: 2000, seed: 42 }
    }
}

/// Measured residual floors for `W_3` at bond 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Floors {
    pub version: String,
    pub oracle: OracleParams,
    pub delta_nn_w3_r2: f64,
    pub delta_psd_w3_symmetric_r2: f64,
}

pub fn measure_floors(params: OracleParams) -> Result<Floors> {
    let w3 = w_state(3)?;
    let opts = AlsOptions::new(params.starts, params.iters, params.seed);
    let nn = als_nonnegative(&w3, 2, &opts, None)?;
    let psd = symm_psd2_residual(&w3, params.starts, params.iters, params.seed)?;
    Ok(Floors {
        version: crate::VERSION.to_string(),
        oracle: params,
        delta_nn_w3_r2: nn.residual,
        delta_psd_w3_symmetric_r2: psd.residual,
    })
}

/// Relative position of a regression measurement against a frozen floor.
pub fn floor_within(measured: f64, frozen: f64, rel_slack: f64) -> bool {
    measured >= 1e-4 * frozen && (measured - frozen).abs() <= rel_slack * frozen
}

/// Witness pair `(A_0, A_1)` from the psd family at `n = 3`.
pub fn psd_family_w3_pair(eps: f64) -> (CMatrix, CMatrix) {
    psd_family_matrices(3, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{contract_vector, structure_tensor};
    use crate::families::w_eps_unconstrained;
    use crate::random::random_psd_matrix;
    use crate::linalg::ONE;

    fn product3() -> DenseTensor {
        DenseTensor::product(&[vec![re(0.3), re(0.7)], vec![re(1.0), re(2.0)], vec![re(0.5), re(0.25)]])
    }

    #[test]
    fn flattening_examples() {
        for n in 2..=8 {
            assert_eq!(flattening_lower_bound(&w_state(n).unwrap()), 2);
        }
        let ghz = structure_tensor(&make_simplex(3).unwrap(), 3).unwrap();
        assert_eq!(flattening_lower_bound(&ghz), 3);
        assert_eq!(flattening_lower_bound(&product3()), 1);
    }

    #[test]
    fn als_recovers_product_and_w3() {
        let opts = AlsOptions::new(4, 500, 1);
        assert!(als_cp(&product3(), 1, &opts, None).unwrap().residual < 1e-10);
        let out = als_cp(&w_state(3).unwrap(), 3, &AlsOptions::new(10, 2000, 7), None).unwrap();
        assert!(out.residual < 1e-8, "{}", out.residual);
        assert!(flattening_lower_bound(&w_state(3).unwrap()) <= 3);
    }

    #[test]
    fn als_warm_start_from_family() {
        let warm = w_eps_unconstrained(5, 1e-3).unwrap().into_locals();
        let out = als_cp(&w_state(5).unwrap(), 2, &AlsOptions::new(2, 50, 3), Some(&warm)).unwrap();
        assert!(out.residual <= 5e-3);
    }

    #[test]
    fn als_sweeps_do_not_increase_residual() {
        let t = w_state(4).unwrap();
        for r in [2, 3] {
            let out = als_cp(&t, r, &AlsOptions::new(1, 300, 5), None).unwrap();
            for w in out.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * t.frobenius_norm().max(1.0), "{} > {}", w[1], w[0]);
            }
            let nn = als_nonnegative(&t, r, &AlsOptions::new(1, 300, 5), None).unwrap();
            for w in nn.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn als_is_deterministic() {
        let t = w_state(4).unwrap();
        let a = als_cp(&t, 2, &AlsOptions::new(3, 100, 11), None).unwrap();
        let b = als_cp(&t, 2, &AlsOptions::new(3, 100, 11), None).unwrap();
        assert_eq!(a.residual.to_bits(), b.residual.to_bits());
        assert_eq!(a.decomposition, b.decomposition);
    }

    #[test]
    fn nonnegative_examples() {
        let opts = AlsOptions::new(10, 2000, 2);
        assert!(als_nonnegative(&product3(), 1, &opts, None).unwrap().residual < 1e-8);
        let w3 = w_state(3).unwrap();
        assert!(als_nonnegative(&w3, 3, &opts, None).unwrap().residual < 1e-6);
        let floor = als_nonnegative(&w3, 2, &opts, None).unwrap().residual;
        assert!(floor > 1e-3, "{floor}");
        let mut neg = w3.clone();
        neg.set(&[0, 0, 0], re(-1.0));
        assert!(als_nonnegative(&neg, 2, &opts, None).is_err());
    }

    #[test]
    fn symm_psd2_examples() {
        let zero = DenseTensor::zeros(&[2, 2, 2]);
        let out = symm_psd2_residual(&zero, 3, 100, 0).unwrap();
        assert_eq!(out.residual, 0.0);
        assert!(out.best_start.is_none());
        let mut rng = start_rng(9, 0);
        let (a0, a1) = (random_psd_matrix(2, 2, &mut rng), random_psd_matrix(2, 2, &mut rng));
        let m = symm_psd2_model(&a0, &a1);
        let t = DenseTensor::new(vec![2, 2, 2], m.iter().map(|&x| re(x)).collect()).unwrap();
        assert!(symm_psd2_residual(&t, 20, 2000, 1).unwrap().residual < 1e-7);
        let w3 = symm_psd2_residual(&w_state(3).unwrap(), 10, 500, 42).unwrap();
        assert!(w3.residual > 0.0);
        assert!(w3.residual < w_state(3).unwrap().frobenius_norm());
    }

    #[test]
    fn symm_psd2_model_matches_family() {
        let (a0, a1) = psd_family_w3_pair(1e-2);
        let m = symm_psd2_model(&a0, &a1);
        let t = crate::decomp::contract_psd(&w_eps_psd(3, 1e-2).unwrap()).unwrap();
        for k in 0..8 {
            assert!((t.data()[k].re - m[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_table() {
        assert_eq!(reference_lookup(Quantity::Rank, 5).unwrap().value, 5);
        assert_eq!(reference_lookup(Quantity::BorderRank, 7).unwrap().value, 2);
        assert_eq!(reference_lookup(Quantity::TiOsrLowerBound, 9).unwrap().value, 3);
        assert_eq!(reference_lookup(Quantity::TiOsrLowerBound, 5).unwrap().value, 3);
        assert_eq!(reference_lookup(Quantity::TiNnOsrBorderUpperBound, 5).unwrap().value, 2);
        assert_eq!(reference_lookup(Quantity::TiNnOsrBorderUpperBound, 8).unwrap().value, 7);
        assert!(reference_lookup(Quantity::TiPsdOsrLowerBound, 5).is_none());
        for n in 2..=8 {
            let fb = flattening_lower_bound(&w_state(n).unwrap());
            assert!(fb <= reference_lookup(Quantity::Rank, n).unwrap().value);
            assert!(fb <= reference_lookup(Quantity::BorderRank, n).unwrap().value);
        }
        assert_eq!(reference_ranks().len(), 7);
        assert_eq!(parse_w_label("W5").unwrap(), 5);
        assert!(parse_w_label("X").is_err());
    }

    #[test]
    fn rank_report_residuals_nonincreasing() {
        let t = w_state(4).unwrap();
        let rep = rank_report("W4", &t, &[1, 2, 3, 4], &AlsOptions::new(3, 300, 0), Some(4)).unwrap();
        assert_eq!(rep.flattening_lower_bound, 2);
        for w in rep.residuals.windows(2) {
            assert!(w[1].residual <= w[0].residual + 1e-12);
        }
        assert!(rep.residuals.last().unwrap().residual < 1e-6);
        assert_eq!(rep.reference[0].value, 4);
    }

    #[test]
    fn separation_small() {
        let rep = separation_experiment(&[3, 4], &AlsOptions::new(5, 500, 0)).unwrap();
        let r3 = &rep.rows[0];
        assert!(r3.psd_witness_residual <= 4e-3);
        assert!((r3.unconstrained_witness_residual / (3f64.sqrt() * 1e-3) - 1.0).abs() < 1e-3);
        assert!(rep.rows[1].nonnegative_floors.iter().all(|f| f.residual > 0.0));
        assert!(separation_experiment(&[8], &AlsOptions::default()).is_err());
    }

    #[test]
    fn cp_tensor_matches_contraction() {
        let dec = w_eps_unconstrained(4, 0.1).unwrap();
        let a = cp_tensor(dec.locals());
        let b = contract_vector(&dec).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
        assert_eq!(cp_tensor(&[CMatrix::from_vec(1, 1, vec![ONE]).unwrap()]).get(&[0]), ONE);
    }
}
