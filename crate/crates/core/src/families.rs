//! Target tensors, explicit approximating families, and convergence studies.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{
    contract_nonnegative, contract_psd, contract_vector, NonnegativeDecomposition, PsdDecomposition,
    UnconstrainedDecomposition,
};
use crate::error::{Error, Result};
use crate::linalg::{re, CMatrix, C64, ONE, ZERO};
use crate::tensor::DenseTensor;
use crate::wsc::{cyclic_action, make_cycle, make_simplex, symmetric_action, GroupAction, WeightedSimplicialComplex};

/// `W_n`: unit entries exactly at the Hamming-weight-1 bitstrings.
pub fn w_state(n: usize) -> Result<DenseTensor> {
    if n < 2 {
        return Err(Error::invalid("W state needs n >= 2"));
    }
    Ok(DenseTensor::from_fn(&vec![2; n], |idx| if idx.iter().sum::<usize>() == 1 { ONE } else { ZERO }))
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!("n must be at least {min}, got {n}")));
    }
    Ok(())
}

/// Symmetric bond-2 decomposition of
/// `(1/ε)(|0⟩ + ε|1⟩)^{⊗n} − (1/ε)|0…0⟩` on the simplex.
pub fn w_eps_unconstrained(n: usize, eps: f64) -> Result<UnconstrainedDecomposition> {
    check_n(n, 3)?;
    check_eps(eps)?;
    if eps < 1e-8 {
        log::warn!("epsilon {eps:e} below 1e-8: the two O(1/epsilon) terms cancel catastrophically");
    }
    let action = symmetric_action(&make_simplex(n)?)?;
    let s = eps.powf(-1.0 / n as f64);
    let root = C64::from_polar(s, PI / n as f64);
    let v = CMatrix::from_vec(2, 2, vec![re(s), root, re(s * eps), ZERO])?;
    UnconstrainedDecomposition::from_representatives(&action, 2, vec![v])
}

/// `‖W_n^ε − W_n‖_F = sqrt(Σ_{k≥2} C(n,k) ε^{2(k−1)})`.
pub fn w_eps_unconstrained_error(n: usize, eps: f64) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 1..=n {
        binom *= (n + 1 - k) as f64 / k as f64;
        if k >= 2 {
            sum += binom * eps.powi(2 * (k as i32 - 1));
        }
    }
    sum.sqrt()
}

/// The constant that makes the weight-1 entries of the psd family equal 1.
pub fn psd_family_constant(n: usize) -> f64 {
    (2.0 * (1.0 - (PI / n as f64).cos())).powf(-1.0 / (n as f64 - 1.0))
}

/// The two rank-one psd matrices `(A_0, A_1)` of the psd family.
pub fn psd_family_matrices(n: usize, eps: f64) -> (CMatrix, CMatrix) {
    let a0s = psd_family_constant(n) * eps.powf(-1.0 / (n as f64 - 1.0));
    let ph = C64::from_polar(1.0, PI / n as f64);
    let a0 = CMatrix::from_vec(2, 2, vec![re(a0s), ph * a0s, ph.conj() * a0s, re(a0s)]).expect("2x2");
    let a1 = CMatrix::from_vec(2, 2, vec![re(eps); 4]).expect("2x2");
    (a0, a1)
}

/// Symmetric bond-2 psd decomposition on the simplex approximating `W_n`.
pub fn w_eps_psd(n: usize, eps: f64) -> Result<PsdDecomposition> {
    check_n(n, 3)?;
    check_eps(eps)?;
    let action = symmetric_action(&make_simplex(n)?)?;
    let (a0, a1) = psd_family_matrices(n, eps);
    PsdDecomposition::from_representatives(&action, 2, vec![vec![a0, a1]])
}

/// Column index at vertex 1 of a cycle for bond values `(left, right)`,
/// where `left` is on `{n,1}` and `right` on `{1,2}`. The canonical order at
/// vertex 1 lists `{1,2}` first.
fn cycle_rep_index(left: usize, right: usize, r: usize) -> usize {
    right * r + left
}

/// Translation-invariant cycle decomposition whose local at every site is
/// `v_{left,right}` from `f`.
fn ti_cycle_vector(
    n: usize,
    r: usize,
    d: usize,
    f: impl Fn(usize, usize) -> Vec<C64>,
) -> Result<UnconstrainedDecomposition> {
    let action = cyclic_action(&make_cycle(n)?)?;
    let mut m = CMatrix::zeros(d, r * r);
    for a in 0..r {
        for b in 0..r {
            m.set_column(cycle_rep_index(a, b, r), &f(a, b));
        }
    }
    UnconstrainedDecomposition::from_representatives(&action, r, vec![m])
}

/// Translation-invariant bond-2 cycle decomposition with
/// `v_12 = v_21 = 0`, `v_11 = ε^{-1/n}(1, ε)`, `v_22 = ε^{-1/n}(e^{iπ/n}, 0)`.
pub fn w_eps_ti_unconstrained(n: usize, eps: f64) -> Result<UnconstrainedDecomposition> {
    check_n(n, 3)?;
    check_eps(eps)?;
    let s = eps.powf(-1.0 / n as f64);
    let root = C64::from_polar(s, PI / n as f64);
    ti_cycle_vector(n, 2, 2, |a, b| match (a, b) {
        (0, 0) => vec![re(s), re(s * eps)],
        (1, 1) => vec![root, ZERO],
        _ => vec![ZERO, ZERO],
    })
}

/// Translation-invariant cycle psd decomposition lifting the psd family:
/// `E_j` is `A_j` placed on the span of `{|a, a⟩}` of the two bond legs.
pub fn w_eps_ti_psd(n: usize, eps: f64) -> Result<PsdDecomposition> {
    check_n(n, 3)?;
    check_eps(eps)?;
    let action = cyclic_action(&make_cycle(n)?)?;
    let (a0, a1) = psd_family_matrices(n, eps);
    let lift = |a: &CMatrix| {
        let mut e = CMatrix::zeros(4, 4);
        for x in 0..2 {
            for y in 0..2 {
                e[(cycle_rep_index(x, x, 2), cycle_rep_index(y, y, 2))] = a[(x, y)];
            }
        }
        e
    };
    PsdDecomposition::from_representatives(&action, 2, vec![vec![lift(&a0), lift(&a1)]])
}

/// Translation-invariant nonnegative cycle decomposition with
/// `A_0 = ε^{-1/(n-1)} P` (cyclic shift on `p` letters), `A_1 = ε I_p`,
/// and the overall prefactor `1/p` spread evenly over the sites.
pub fn w_eps_ti_nonneg(n: usize, eps: f64, p: usize) -> Result<NonnegativeDecomposition> {
    check_n(n, 3)?;
    check_eps(eps)?;
    if p < 2 || !(n - 1).is_multiple_of(p) {
        return Err(Error::invalid(format!("p = {p} must be at least 2 and divide n - 1 = {}", n - 1)));
    }
    let pref = (1.0 / p as f64).powf(1.0 / n as f64);
    let a0 = pref * eps.powf(-1.0 / (n as f64 - 1.0));
    let a1 = pref * eps;
    let u = ti_cycle_vector(n, p, 2, |a, b| {
        let shift = if b == (a + 1) % p { a0 } else { 0.0 };
        let diag = if a == b { a1 } else { 0.0 };
        vec![re(shift), re(diag)]
    })?;
    NonnegativeDecomposition::new(u)
}

/// Entry of the t.i. nonnegative family's contraction at Hamming weight
/// `k`: `(1/p) ε^{n(k-1)/(n-1)} tr(P^{n-k})`, with `tr(P^m) = p` when
/// `p | m` and 0 otherwise.
pub fn ti_nonneg_entry(n: usize, p: usize, k: usize, eps: f64) -> f64 {
    if !(n - k).is_multiple_of(p) {
        return 0.0;
    }
    eps.powf(n as f64 * (k as f64 - 1.0) / (n as f64 - 1.0))
}

fn two_domain_checks(n: usize, k: usize) -> Result<()> {
    check_n(n, 3)?;
    if k < 2 {
        return Err(Error::invalid("two-domain family needs k >= 2"));
    }
    Ok(())
}

/// Local vector at a cycle site with `(left, right)` bond values; site `n`
/// uses the `w` vectors.
fn two_domain_local(k: usize, eps: f64, last: bool, a: usize, b: usize) -> Vec<C64> {
    let mut v = vec![ZERO; k * k];
    let coeff = match (last, a == b) {
        (_, true) => 1.0,
        (false, false) => eps,
        (true, false) => 1.0 / eps,
    };
    v[a * k + b] = re(coeff);
    v
}

/// Builds per-vertex locals on a cycle with trivial symmetry from
/// `f(vertex, left, right)`.
fn cycle_locals(
    wsc: &WeightedSimplicialComplex,
    r: usize,
    d: usize,
    f: impl Fn(usize, usize, usize) -> Vec<C64>,
) -> Vec<CMatrix> {
    let n = wsc.n();
    let copies = wsc.facet_copies();
    (0..n)
        .map(|i| {
            let legs = wsc.copies_at(i);
            let left_mask = (1u64 << i) | (1u64 << ((i + n - 1) % n));
            let left_first = copies[legs[0]].mask == left_mask;
            let mut m = CMatrix::zeros(d, r * r);
            for a in 0..r {
                for b in 0..r {
                    let col = if left_first { a * r + b } else { b * r + a };
                    m.set_column(col, &f(i, a, b));
                }
            }
            m
        })
        .collect()
}

/// Nonnegative cycle decomposition `τ^ε` of bond `k`, site dimension `k²`.
pub fn two_domain_eps(n: usize, k: usize, eps: f64) -> Result<NonnegativeDecomposition> {
    two_domain_checks(n, k)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let wsc = make_cycle(n)?;
    let action = GroupAction::trivial(&wsc);
    let locals = cycle_locals(&wsc, k, k * k, |i, a, b| two_domain_local(k, eps, i == n - 1, a, b));
    NonnegativeDecomposition::new(UnconstrainedDecomposition::new(&action, k, locals)?)
}

/// Laurent polynomial in ε with integer coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Laurent(BTreeMap<i32, i64>);

impl Laurent {
    pub fn monomial(exp: i32, coeff: i64) -> Self {
        let mut m = BTreeMap::new();
        if coeff != 0 {
            m.insert(exp, coeff);
        }
        Laurent(m)
    }

    pub fn one() -> Self {
        Self::monomial(0, 1)
    }

    pub fn add_assign(&mut self, other: &Laurent) {
        for (&e, &c) in &other.0 {
            let slot = self.0.entry(e).or_insert(0);
            *slot += c;
            if *slot == 0 {
                self.0.remove(&e);
            }
        }
    }

    pub fn mul(&self, other: &Laurent) -> Laurent {
        let mut out = Laurent::default();
        for (&e1, &c1) in &self.0 {
            for (&e2, &c2) in &other.0 {
                out.add_assign(&Laurent::monomial(e1 + e2, c1 * c2));
            }
        }
        out
    }

    pub fn min_degree(&self) -> Option<i32> {
        self.0.keys().next().copied()
    }

    pub fn coefficient(&self, exp: i32) -> i64 {
        self.0.get(&exp).copied().unwrap_or(0)
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.0.iter().map(|(&e, &c)| c as f64 * eps.powi(e)).sum()
    }
}

/// Exact entries of `τ^ε` as Laurent polynomials in ε, by enumerating the
/// bond assignments. On the diagonal `ε + (1 − ε) = 1` exactly.
pub fn two_domain_symbolic(n: usize, k: usize) -> Result<Vec<(Vec<usize>, Laurent)>> {
    two_domain_checks(n, k)?;
    let total = (k as u64).checked_pow(n as u32).filter(|&t| t <= 1 << 24).ok_or_else(|| {
        Error::Resource(format!("two-domain enumeration k^n = {k}^{n} too large"))
    })?;
    let mut entries: BTreeMap<Vec<usize>, Laurent> = BTreeMap::new();
    for a in 0..total as usize {
        let alpha = crate::decomp::local_digits(a, n, k);
        let mut poly = Laurent::one();
        let mut phys = Vec::with_capacity(n);
        for i in 0..n {
            let (l, r) = (alpha[i], alpha[(i + 1) % n]);
            phys.push(l * k + r);
            let factor = match (i == n - 1, l == r) {
                (_, true) => Laurent::one(),
                (false, false) => Laurent::monomial(1, 1),
                (true, false) => Laurent::monomial(-1, 1),
            };
            poly = poly.mul(&factor);
        }
        entries.entry(phys).or_default().add_assign(&poly);
    }
    Ok(entries.into_iter().collect())
}

/// `τ = lim_{ε→0} τ^ε`, keeping the ε^0 coefficient of every entry.
pub fn two_domain_limit(n: usize, k: usize) -> Result<DenseTensor> {
    let entries = two_domain_symbolic(n, k)?;
    let mut t = DenseTensor::zeros(&vec![k * k; n]);
    for (idx, poly) in entries {
        if let Some(m) = poly.min_degree() {
            if m < 0 {
                return Err(Error::Numerical(format!("entry {idx:?} diverges as epsilon -> 0")));
            }
        }
        t.set(&idx, re(poly.coefficient(0) as f64));
    }
    Ok(t)
}

/// Floating oracle for the limit: Richardson step `2τ^{ε/2} − τ^ε`.
pub fn two_domain_extrapolated(n: usize, k: usize, eps: f64) -> Result<DenseTensor> {
    let a = contract_nonnegative(&two_domain_eps(n, k, eps)?)?;
    let b = contract_nonnegative(&two_domain_eps(n, k, eps / 2.0)?)?;
    b.scale(re(2.0)).sub(&a)
}

/// Named families with their parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    WUnconstrained,
    WPsd,
    WTiUnconstrained,
    WTiPsd,
    WTiNonneg { p: usize },
    TwoDomain { k: usize },
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::WUnconstrained => "w-unconstrained",
            Family::WPsd => "w-psd",
            Family::WTiUnconstrained => "w-ti-unconstrained",
            Family::WTiPsd => "w-ti-psd",
            Family::WTiNonneg { .. } => "w-ti-nonneg",
            Family::TwoDomain { .. } => "two-domain",
        }
    }

    /// Parses a label; `p` and `k` come from `param`.
    pub fn from_label(label: &str, param: Option<usize>) -> Result<Self> {
        Ok(match label {
            "w-unconstrained" => Family::WUnconstrained,
            "w-psd" => Family::WPsd,
            "w-ti-unconstrained" => Family::WTiUnconstrained,
            "w-ti-psd" => Family::WTiPsd,
            "w-ti-nonneg" => Family::WTiNonneg { p: param.unwrap_or(2) },
            "two-domain" => Family::TwoDomain { k: param.unwrap_or(2) },
            other => return Err(Error::invalid(format!("unknown family '{other}'"))),
        })
    }

    pub fn param(&self) -> Option<usize> {
        match self {
            Family::WTiNonneg { p } => Some(*p),
            Family::TwoDomain { k } => Some(*k),
            _ => None,
        }
    }

    /// Contraction of the family member at `eps`.
    pub fn contract(&self, n: usize, eps: f64) -> Result<DenseTensor> {
        match *self {
            Family::WUnconstrained => contract_vector(&w_eps_unconstrained(n, eps)?),
            Family::WPsd => contract_psd(&w_eps_psd(n, eps)?),
            Family::WTiUnconstrained => contract_vector(&w_eps_ti_unconstrained(n, eps)?),
            Family::WTiPsd => contract_psd(&w_eps_ti_psd(n, eps)?),
            Family::WTiNonneg { p } => contract_nonnegative(&w_eps_ti_nonneg(n, eps, p)?),
            Family::TwoDomain { k } => contract_nonnegative(&two_domain_eps(n, k, eps)?),
        }
    }

    /// The tensor the study measures distance to.
    pub fn target(&self, n: usize) -> Result<DenseTensor> {
        match *self {
            Family::WTiNonneg { p } => Ok(w_state(n)?.scale(re(1.0 / p as f64))),
            Family::TwoDomain { k } => two_domain_limit(n, k),
            _ => w_state(n),
        }
    }
}

/// `count` log-spaced points from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, count: usize) -> Result<Vec<f64>> {
    if !(hi > lo && lo > 0.0) || count < 2 {
        return Err(Error::invalid("grid needs hi > lo > 0 and at least two points"));
    }
    let (a, b) = (hi.log10(), lo.log10());
    Ok((0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect())
}

pub fn default_grid() -> Vec<f64> {
    log_grid(1e-1, 1e-4, 13).expect("valid default grid")
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub rms_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let m = xs.len();
    if m < 2 || ys.len() != m {
        return Err(Error::invalid("fit needs at least two points"));
    }
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let slope_stderr = if m > 2 { (ssr / (m - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit { slope, intercept, slope_stderr, rms_residual: (ssr / m as f64).sqrt() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub epsilon: f64,
    pub error: f64,
    pub included_in_fit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Errors of a family against its target along a decreasing ε grid, with a
/// log-log fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub family: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<usize>,
    pub points: Vec<StudyPoint>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub coefficient: f64,
    pub fit_residual: f64,
    pub strictly_decreasing: bool,
}

/// Summary written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub family: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<usize>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub coefficient: f64,
    pub fit_residual: f64,
    pub points: usize,
    pub points_in_fit: usize,
    pub strictly_decreasing: bool,
}

impl ConvergenceStudy {
    pub fn summary(&self) -> StudySummary {
        StudySummary {
            family: self.family.clone(),
            n: self.n,
            param: self.param,
            slope: self.slope,
            slope_stderr: self.slope_stderr,
            coefficient: self.coefficient,
            fit_residual: self.fit_residual,
            points: self.points.len(),
            points_in_fit: self.points.iter().filter(|p| p.included_in_fit).count(),
            strictly_decreasing: self.strictly_decreasing,
        }
    }

    /// `epsilon,error,included_in_fit` rows, 17 significant digits, LF.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,error,included_in_fit\n");
        for p in &self.points {
            s.push_str(&format!("{:.16e},{:.16e},{}\n", p.epsilon, p.error, p.included_in_fit));
        }
        s
    }
}

/// Evaluates `family` on `grid` (strictly decreasing, at least 4 points).
/// Points whose error is non-finite or below `1e3 · machine ε · ‖target‖`
/// are kept in the table but excluded from the fit.
pub fn convergence_study(family: Family, n: usize, grid: &[f64]) -> Result<ConvergenceStudy> {
    if grid.len() < 4 {
        return Err(Error::invalid("grid needs at least 4 points"));
    }
    if grid.iter().any(|&e| !(e > 0.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("grid must be strictly decreasing and positive"));
    }
    let target = family.target(n)?;
    let floor = 1e3 * f64::EPSILON * target.frobenius_norm();
    let points: Vec<StudyPoint> = grid
        .par_iter()
        .map(|&eps| match family.contract(n, eps).and_then(|t| t.distance(&target)) {
            Ok(err) if err.is_finite() => {
                let keep = err >= floor && err > 0.0;
                StudyPoint {
                    epsilon: eps,
                    error: err,
                    included_in_fit: keep,
                    note: (!keep).then(|| "below noise floor".to_string()),
                }
            }
            Ok(err) => StudyPoint { epsilon: eps, error: err, included_in_fit: false, note: Some("non-finite".into()) },
            Err(e) => StudyPoint { epsilon: eps, error: f64::NAN, included_in_fit: false, note: Some(e.to_string()) },
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        points.iter().filter(|p| p.included_in_fit).map(|p| (p.epsilon.ln(), p.error.ln())).unzip();
    let fit = fit_line(&xs, &ys)?;
    let strictly_decreasing = points.windows(2).all(|w| w[1].error < w[0].error);
    Ok(ConvergenceStudy {
        family: family.label().to_string(),
        n,
        param: family.param(),
        points,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        coefficient: fit.intercept.exp(),
        fit_residual: fit.rms_residual,
        strictly_decreasing,
    })
}

/// Hamming weight of a binary multi-index.
pub fn weight(idx: &[usize]) -> usize {
    idx.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{matrix_rank, DEFAULT_RANK_TOL};

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn w_state_basics() {
        let w3 = w_state(3).unwrap();
        for idx in [[0, 0, 1], [0, 1, 0], [1, 0, 0]] {
            assert_eq!(w3.get(&idx), ONE);
        }
        assert_eq!(w3.data().iter().filter(|z| **z != ZERO).count(), 3);
        assert_eq!(w_state(2).unwrap().unfold(&[1]).unwrap(), CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap());
        let w5 = w_state(5).unwrap();
        assert_eq!(matrix_rank(&w5.unfold(&[3]).unwrap(), DEFAULT_RANK_TOL), 2);
        assert!(w_state(1).is_err());
    }

    #[test]
    fn unconstrained_family_error_closed_form() {
        let eps = 0.01;
        let t = contract_vector(&w_eps_unconstrained(3, eps).unwrap()).unwrap();
        let err = t.distance(&w_state(3).unwrap()).unwrap();
        assert!((err - (3.0 * eps * eps + eps.powi(4)).sqrt()).abs() < 1e-12);
        assert!((err - 0.01732).abs() < 1e-5);
        for n in 3..=6 {
            let dec = w_eps_unconstrained(n, 0.05).unwrap();
            assert!(dec.validate().is_valid());
            let t = contract_vector(&dec).unwrap();
            let err = t.distance(&w_state(n).unwrap()).unwrap();
            assert!((err / w_eps_unconstrained_error(n, 0.05) - 1.0).abs() < 1e-10);
        }
        assert!(w_eps_unconstrained(3, 0.0).is_err());
    }

    #[test]
    fn psd_family_entries() {
        assert!((psd_family_constant(5) - 1.27202).abs() < 1e-5);
        let (a0, a1) = psd_family_matrices(5, 0.1);
        let e0 = crate::linalg::eigh(&a0).values;
        assert!(e0[0].abs() < 1e-14);
        assert!((e0[1] - 2.0 * psd_family_constant(5) / 0.1f64.powf(0.25)).abs() < 1e-12);
        assert!(crate::linalg::lambda_min(&a1) > -1e-15);
        for n in [3, 5, 7] {
            let dec = w_eps_psd(n, 0.1).unwrap();
            assert!(dec.validate().is_valid());
            let t = contract_psd(&dec).unwrap();
            assert!(t.get(&vec![0; n]).norm() < 1e-12);
            for i in 0..n {
                let mut idx = vec![0; n];
                idx[i] = 1;
                assert!((t.get(&idx) - ONE).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_family_weight_k_entries() {
        // weight-k entry: C^{n-k} ε^{k-(n-k)/(n-1)} (2 + 2cos((n-k)π/n))
        let (n, eps) = (5usize, 0.1);
        let t = contract_psd(&w_eps_psd(n, eps).unwrap()).unwrap();
        let cst = psd_family_constant(n);
        for k in 0..=n {
            let mut idx = vec![0; n];
            idx.iter_mut().take(k).for_each(|x| *x = 1);
            let nk = (n - k) as f64;
            let expect = cst.powf(nk) * eps.powf(k as f64 - nk / (n as f64 - 1.0)) * (2.0 + 2.0 * (nk * PI / n as f64).cos());
            assert!((t.get(&idx).re - expect).abs() < 1e-12 * expect.abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn ti_psd_matches_symmetric_family() {
        for n in [3, 5] {
            let a = contract_psd(&w_eps_ti_psd(n, 1e-2).unwrap()).unwrap();
            let b = contract_psd(&w_eps_psd(n, 1e-2).unwrap()).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-9);
        }
        let dec = w_eps_ti_psd(5, 0.1).unwrap();
        assert!(dec.validate().is_valid());
        assert_eq!(dec.local(0)[0].rows(), 4);
    }

    #[test]
    fn ti_unconstrained_is_shift_invariant_and_converges() {
        let n = 5;
        let t = contract_vector(&w_eps_ti_unconstrained(n, 0.1).unwrap()).unwrap();
        let shifted = t.permute_sites(&[1, 2, 3, 4, 0]).unwrap();
        assert!(t.max_abs_diff(&shifted).unwrap() < 1e-14);
        let w = w_state(n).unwrap();
        let e1 = t.distance(&w).unwrap();
        let e2 = contract_vector(&w_eps_ti_unconstrained(n, 1e-2).unwrap()).unwrap().distance(&w).unwrap();
        assert!(e2 < e1);
        assert!((e2 / w_eps_unconstrained_error(n, 1e-2) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ti_nonneg_entries_follow_trace_formula() {
        for (n, p) in [(5, 2), (5, 4), (7, 2), (7, 3), (9, 2), (9, 4)] {
            let eps = 0.1;
            let dec = w_eps_ti_nonneg(n, eps, p).unwrap();
            assert!(dec.validate().is_valid());
            let t = contract_nonnegative(&dec).unwrap();
            for k in 0..t.len() {
                let idx = t.multi_index(k);
                let w = weight(&idx);
                let expect = ti_nonneg_entry(n, p, w, eps);
                let got = t.data()[k].re;
                assert!((got - expect).abs() <= 1e-12 * expect.max(1.0), "n={n} p={p} w={w}");
                if expect == 0.0 {
                    assert_eq!(got, 0.0);
                }
            }
        }
        // weight-1 entries are 1 and weight-3 entries ε^{2.5} at n = 5, p = 2
        let t = contract_nonnegative(&w_eps_ti_nonneg(5, 0.1, 2).unwrap()).unwrap();
        assert!((t.get(&[1, 0, 0, 0, 0]).re - 1.0).abs() < 1e-14);
        assert!((t.get(&[1, 1, 1, 0, 0]).re - 0.1f64.powf(2.5)).abs() < 1e-15);
        assert!(w_eps_ti_nonneg(5, 0.1, 3).is_err());
    }

    #[test]
    fn two_domain_family() {
        let dec = two_domain_eps(4, 2, 0.5).unwrap();
        assert!(dec.validate().is_valid());
        assert!(contract_nonnegative(&dec).unwrap().is_nonnegative(0.0));
        assert!(two_domain_eps(4, 2, 1.0).is_err());
        for (n, k) in [(3, 2), (4, 2), (4, 3), (5, 2)] {
            let limit = two_domain_limit(n, k).unwrap();
            assert!(limit.is_nonnegative(0.0));
            // constant assignments survive
            for a in 0..k {
                assert_eq!(limit.get(&vec![a * k + a; n]), ONE);
            }
            let extrap = two_domain_extrapolated(n, k, 1e-6).unwrap();
            assert!(limit.max_abs_diff(&extrap).unwrap() < 1e-6);
            // symbolic entries agree with the floating contraction
            let eps = 0.3;
            let t = contract_nonnegative(&two_domain_eps(n, k, eps).unwrap()).unwrap();
            for (idx, poly) in two_domain_symbolic(n, k).unwrap() {
                assert!((t.get(&idx).re - poly.eval(eps)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_domain_limit_counts() {
        // k constant terms plus (n-1)·k·(k-1) single-wall terms
        for (n, k) in [(4, 2), (5, 3)] {
            let limit = two_domain_limit(n, k).unwrap();
            let nnz = limit.data().iter().filter(|z| **z != ZERO).count();
            assert_eq!(nnz, k + (n - 1) * k * (k - 1));
        }
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 * x - 2.0).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-14 && (f.intercept + 2.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-14);
    }

    #[test]
    fn study_slopes() {
        let grid = default_grid();
        assert_eq!(grid.len(), 13);
        let s = convergence_study(Family::WUnconstrained, 3, &grid).unwrap();
        assert!((s.slope - 1.0).abs() < 0.02);
        assert!((s.coefficient / 3f64.sqrt() - 1.0).abs() < 0.01);
        assert!(s.strictly_decreasing);
        let s = convergence_study(Family::WPsd, 5, &grid).unwrap();
        assert!((s.slope - 1.25).abs() < 0.05, "{}", s.slope);
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 14);
        assert!(convergence_study(Family::WPsd, 5, &[0.1, 0.2, 0.01, 0.001]).is_err());
    }

    #[test]
    fn binomial_helper_matches() {
        assert_eq!(binom(5, 2), 10.0);
    }
}
