//! Weighted simplicial complexes and group actions on them.
//!
//! Subsets of `{1..n}` are bitmasks (bit `i-1` for vertex `i`). Public
//! queries speak 1-based vertices; `pub(crate)` helpers are 0-based.

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_VERTICES: usize = 63;
pub const DEFAULT_GROUP_CAP: usize = 1_000_000;

pub type Mask = u64;

pub fn mask_of(vertices: &[usize]) -> Mask {
    vertices.iter().fold(0, |m, &v| m | 1 << (v - 1))
}

/// 1-based vertices of a mask, ascending.
pub fn vertices_of(mask: Mask) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()
}

fn is_subset(a: Mask, b: Mask) -> bool {
    a & !b == 0
}

/// One element of the facet multiset: a facet and which of its copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacetCopy {
    pub mask: Mask,
    pub ordinal: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSimplicialComplex {
    n: usize,
    /// Listed weights. Unlisted faces of a listed positive subset, and
    /// unlisted singletons, have weight 1; everything else 0.
    explicit: BTreeMap<Mask, u32>,
    facets: Vec<Mask>,
    copies: Vec<FacetCopy>,
    vertex_copies: Vec<Vec<usize>>,
}

impl WeightedSimplicialComplex {
    /// Builds from `(subset, weight)` pairs with 1-based vertices.
    pub fn new(n: usize, weights: &[(Vec<usize>, u32)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("complex needs at least one vertex"));
        }
        if n > MAX_VERTICES {
            return Err(Error::invalid(format!("at most {MAX_VERTICES} vertices supported")));
        }
        let mut explicit = BTreeMap::new();
        for (subset, w) in weights {
            if subset.is_empty() {
                continue;
            }
            if let Some(&v) = subset.iter().find(|&&v| v == 0 || v > n) {
                return Err(Error::invalid(format!("vertex {v} out of range 1..={n}")));
            }
            let m = mask_of(subset);
            if explicit.insert(m, *w).is_some_and(|old| old != *w) {
                return Err(Error::invalid(format!("conflicting weights for {subset:?}")));
            }
        }
        Self::from_explicit(n, explicit)
    }

    fn from_explicit(n: usize, explicit: BTreeMap<Mask, u32>) -> Result<Self> {
        for v in 1..=n {
            if explicit.get(&(1 << (v - 1))) == Some(&0) {
                return Err(Error::invalid(format!("singleton {{{v}}} must have positive weight")));
            }
        }
        // Divisibility and downward-closed support among listed subsets.
        for (&s2, &w2) in &explicit {
            if w2 == 0 {
                continue;
            }
            for (&s1, &w1) in &explicit {
                if s1 != s2 && is_subset(s1, s2) {
                    if w1 == 0 {
                        return Err(Error::invalid(format!(
                            "support not downward closed: {:?} has weight 0 inside {:?}",
                            vertices_of(s1),
                            vertices_of(s2)
                        )));
                    }
                    if w2 % w1 != 0 {
                        return Err(Error::invalid(format!(
                            "weight {} of {:?} does not divide weight {} of {:?}",
                            w1,
                            vertices_of(s1),
                            w2,
                            vertices_of(s2)
                        )));
                    }
                }
            }
        }
        let mut positive: Vec<Mask> = explicit.iter().filter(|(_, &w)| w > 0).map(|(&m, _)| m).collect();
        for v in 0..n {
            positive.push(1 << v);
        }
        positive.sort_unstable();
        positive.dedup();
        let facets: Vec<Mask> = positive
            .iter()
            .copied()
            .filter(|&s| !positive.iter().any(|&t| t != s && is_subset(s, t)))
            .collect();
        let mut wsc = Self { n, explicit, facets, copies: Vec::new(), vertex_copies: vec![Vec::new(); n] };
        let mut copies = Vec::new();
        for &f in &wsc.facets {
            for ordinal in 0..wsc.weight(f) {
                copies.push(FacetCopy { mask: f, ordinal });
            }
        }
        for (pos, c) in copies.iter().enumerate() {
            for v in 0..n {
                if c.mask >> v & 1 == 1 {
                    wsc.vertex_copies[v].push(pos);
                }
            }
        }
        wsc.copies = copies;
        Ok(wsc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of a subset given as a bitmask.
    pub fn weight(&self, s: Mask) -> u32 {
        if s == 0 {
            return 1;
        }
        if let Some(&w) = self.explicit.get(&s) {
            return w;
        }
        if s.count_ones() == 1 && s.trailing_zeros() < self.n as u32 {
            return 1;
        }
        if self.explicit.iter().any(|(&t, &w)| w > 0 && is_subset(s, t)) {
            1
        } else {
            0
        }
    }

    pub fn weight_of(&self, vertices: &[usize]) -> u32 {
        self.weight(mask_of(vertices))
    }

    /// Inclusion-maximal simplices as 1-based vertex lists, by ascending mask.
    pub fn facets(&self) -> Vec<Vec<usize>> {
        self.facets.iter().map(|&m| vertices_of(m)).collect()
    }

    pub fn facet_masks(&self) -> &[Mask] {
        &self.facets
    }

    /// The facet multiset in canonical order.
    pub fn facet_copies(&self) -> &[FacetCopy] {
        &self.copies
    }

    pub fn num_copies(&self) -> usize {
        self.copies.len()
    }

    /// Positions (into `facet_copies`) of copies containing 0-based vertex `i`.
    pub(crate) fn copies_at(&self, i: usize) -> &[usize] {
        &self.vertex_copies[i]
    }

    /// `|F~_v|` for 1-based `v`.
    pub fn local_degree(&self, v: usize) -> usize {
        self.vertex_copies[v - 1].len()
    }

    /// Number of local assignments `r^{|F~_i|}` at 0-based vertex `i`.
    pub(crate) fn local_size(&self, i: usize, r: usize) -> usize {
        r.pow(self.vertex_copies[i].len() as u32)
    }

    /// True iff every facet has at most two vertices, all weights are 0 or 1,
    /// and the facet graph is connected and acyclic.
    pub fn is_tree(&self) -> bool {
        if self.facets.iter().any(|f| f.count_ones() > 2) {
            return false;
        }
        if self.explicit.values().any(|&w| w > 1) {
            return false;
        }
        let edges: Vec<(usize, usize)> = self
            .facets
            .iter()
            .filter(|f| f.count_ones() == 2)
            .map(|&f| {
                let v = vertices_of(f);
                (v[0] - 1, v[1] - 1)
            })
            .collect();
        if edges.len() + 1 != self.n {
            return false;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn is_cycle(&self) -> bool {
        if self.n < 3 {
            return false;
        }
        let expected = make_cycle(self.n).expect("n >= 3");
        self.facets == expected.facets && self.copies.len() == self.n
    }

    pub fn is_simplex(&self) -> bool {
        let full = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        self.facets == [full] && self.copies.len() == 1
    }

    /// Checks divisibility and downward closure over every pair of subsets.
    /// Exponential in `n`; intended for `n ≤ 20`.
    pub fn check_divisibility_exhaustive(&self) -> bool {
        let total: u64 = 1 << self.n;
        let w: Vec<u32> = (0..total).map(|s| self.weight(s)).collect();
        for s2 in 1..total {
            if w[s2 as usize] == 0 {
                continue;
            }
            // iterate nonempty submasks
            let mut s1 = (s2 - 1) & s2;
            while s1 > 0 {
                let w1 = w[s1 as usize];
                if w1 == 0 || !w[s2 as usize].is_multiple_of(w1) {
                    return false;
                }
                s1 = (s1 - 1) & s2;
            }
        }
        true
    }

    pub fn to_json(&self) -> WscJson {
        WscJson {
            n: self.n,
            weights: self
                .explicit
                .iter()
                .map(|(&m, &w)| WeightEntry { subset: vertices_of(m), w })
                .collect(),
        }
    }

    pub fn from_json(j: &WscJson) -> Result<Self> {
        let pairs: Vec<(Vec<usize>, u32)> = j.weights.iter().map(|e| (e.subset.clone(), e.w)).collect();
        Self::new(j.n, &pairs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub subset: Vec<usize>,
    pub w: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WscJson {
    pub n: usize,
    pub weights: Vec<WeightEntry>,
}

impl Serialize for WeightedSimplicialComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightedSimplicialComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = WscJson::deserialize(d)?;
        Self::from_json(&j).map_err(serde::de::Error::custom)
    }
}

/// Full simplex on `n` vertices: every subset has weight 1.
pub fn make_simplex(n: usize) -> Result<WeightedSimplicialComplex> {
    if n == 0 {
        return Err(Error::invalid("simplex needs n >= 1"));
    }
    WeightedSimplicialComplex::new(n, &[((1..=n).collect(), 1)])
}

/// Cycle `{1,2},{2,3},…,{n,1}`.
pub fn make_cycle(n: usize) -> Result<WeightedSimplicialComplex> {
    if n < 3 {
        return Err(Error::invalid("cycle needs n >= 3"));
    }
    let edges: Vec<(Vec<usize>, u32)> = (1..=n).map(|i| (vec![i, i % n + 1], 1)).collect();
    WeightedSimplicialComplex::new(n, &edges)
}

/// Line `{1,2},…,{n-1,n}`.
pub fn make_line(n: usize) -> Result<WeightedSimplicialComplex> {
    if n < 2 {
        return Err(Error::invalid("line needs n >= 2"));
    }
    let edges: Vec<(Vec<usize>, u32)> = (1..n).map(|i| (vec![i, i + 1], 1)).collect();
    WeightedSimplicialComplex::new(n, &edges)
}

/// A group element: images of 0-based vertices and of facet-copy positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    pub vertex: Vec<usize>,
    pub copy: Vec<usize>,
}

impl GroupElement {
    pub fn identity(n: usize, copies: usize) -> Self {
        Self { vertex: (0..n).collect(), copy: (0..copies).collect() }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            vertex: other.vertex.iter().map(|&v| self.vertex[v]).collect(),
            copy: other.copy.iter().map(|&c| self.copy[c]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.vertex.iter().enumerate().all(|(i, &v)| i == v) && self.copy.iter().enumerate().all(|(i, &c)| i == c)
    }

    fn apply_mask(&self, s: Mask) -> Mask {
        let mut out = 0;
        for (v, &img) in self.vertex.iter().enumerate() {
            if s >> v & 1 == 1 {
                out |= 1 << img;
            }
        }
        out
    }
}

/// Permutation action on the vertices together with a compatible action on
/// the facet multiset.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupAction {
    complex: WeightedSimplicialComplex,
    generators: Vec<GroupElement>,
    /// For each 0-based vertex: (orbit representative, element mapping the
    /// representative to it).
    transport: Vec<(usize, GroupElement)>,
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&x| x < p.len() && !std::mem::replace(&mut seen[x], true))
}

impl GroupAction {
    /// Trivial group.
    pub fn trivial(complex: &WeightedSimplicialComplex) -> Self {
        Self::from_elements(complex.clone(), Vec::new()).expect("trivial action is valid")
    }

    /// Builds from 1-based vertex permutations and optional facet-copy maps
    /// (0-based canonical copy positions). Missing copy maps are induced from
    /// the vertex action, which requires every facet to have weight 1.
    pub fn new(
        complex: &WeightedSimplicialComplex,
        generators: &[Vec<usize>],
        facet_maps: Option<&[Vec<usize>]>,
    ) -> Result<Self> {
        let n = complex.n();
        let mut gens = Vec::with_capacity(generators.len());
        for (gi, g) in generators.iter().enumerate() {
            if g.len() != n || g.iter().any(|&v| v == 0 || v > n) {
                return Err(Error::invalid(format!("generator {gi} is not a map on 1..={n}")));
            }
            let vertex: Vec<usize> = g.iter().map(|&v| v - 1).collect();
            if !is_permutation(&vertex) {
                return Err(Error::invalid(format!("generator {gi} is not a permutation")));
            }
            let copy = match facet_maps {
                Some(maps) => {
                    let m = maps.get(gi).ok_or_else(|| Error::invalid("facet_maps shorter than generators"))?;
                    if m.len() != complex.num_copies() || !is_permutation(m) {
                        return Err(Error::invalid(format!(
                            "facet map {gi} is not a permutation of {} copies",
                            complex.num_copies()
                        )));
                    }
                    m.clone()
                }
                None => induced_copy_map(complex, &vertex)?,
            };
            gens.push(GroupElement { vertex, copy });
        }
        Self::from_elements(complex.clone(), gens)
    }

    fn from_elements(complex: WeightedSimplicialComplex, generators: Vec<GroupElement>) -> Result<Self> {
        for (gi, g) in generators.iter().enumerate() {
            for (pos, c) in complex.copies.iter().enumerate() {
                let img = complex.copies[g.copy[pos]];
                if img.mask != g.apply_mask(c.mask) {
                    return Err(Error::invalid(format!(
                        "generator {gi}: copy of {:?} sent to a copy of {:?}, expected {:?}",
                        vertices_of(c.mask),
                        vertices_of(img.mask),
                        vertices_of(g.apply_mask(c.mask))
                    )));
                }
            }
            for (&s, &w) in &complex.explicit {
                if complex.weight(g.apply_mask(s)) != w {
                    return Err(Error::invalid(format!(
                        "generator {gi} does not preserve the weight of {:?}",
                        vertices_of(s)
                    )));
                }
            }
        }
        let n = complex.n();
        let id = GroupElement::identity(n, complex.num_copies());
        let mut transport: Vec<Option<(usize, GroupElement)>> = vec![None; n];
        for start in 0..n {
            if transport[start].is_some() {
                continue;
            }
            transport[start] = Some((start, id.clone()));
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                let (_, gv) = transport[v].clone().expect("visited");
                for g in &generators {
                    let u = g.vertex[v];
                    if transport[u].is_none() {
                        transport[u] = Some((start, g.compose(&gv)));
                        queue.push_back(u);
                    }
                }
            }
        }
        let transport = transport.into_iter().map(|t| t.expect("every vertex reached")).collect();
        Ok(Self { complex, generators, transport })
    }

    pub fn complex(&self) -> &WeightedSimplicialComplex {
        &self.complex
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.iter().all(|g| g.is_identity())
    }

    /// Breadth-first closure over generator words, failing past `cap` elements.
    pub fn elements(&self, cap: usize) -> Result<Vec<GroupElement>> {
        let id = GroupElement::identity(self.complex.n(), self.complex.num_copies());
        let mut seen: HashSet<GroupElement> = HashSet::from([id.clone()]);
        let mut out = vec![id];
        let mut k = 0;
        while k < out.len() {
            for g in &self.generators {
                let h = g.compose(&out[k]);
                if seen.insert(h.clone()) {
                    if out.len() >= cap {
                        return Err(Error::Resource(format!("group has more than {cap} elements")));
                    }
                    out.push(h);
                }
            }
            k += 1;
        }
        Ok(out)
    }

    /// True iff every element fixing a vertex fixes all facet copies there.
    pub fn is_external(&self) -> Result<bool> {
        self.is_external_with_cap(DEFAULT_GROUP_CAP)
    }

    pub fn is_external_with_cap(&self, cap: usize) -> Result<bool> {
        for g in self.elements(cap)? {
            for i in 0..self.complex.n() {
                if g.vertex[i] == i && self.complex.copies_at(i).iter().any(|&c| g.copy[c] != c) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub(crate) fn require_external(&self) -> Result<()> {
        if self.is_external()? {
            Ok(())
        } else {
            Err(Error::NotExternal("some element fixes a vertex but moves a facet copy there".into()))
        }
    }

    /// Smallest 1-based vertex of each orbit, ascending.
    pub fn orbit_representatives(&self) -> Vec<usize> {
        let mut reps: Vec<usize> = self.transport.iter().map(|(r, _)| r + 1).collect();
        reps.sort_unstable();
        reps.dedup();
        reps
    }

    /// Orbits as sorted 1-based vertex lists, in order of representative.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        self.orbit_representatives()
            .into_iter()
            .map(|r| (0..self.complex.n()).filter(|&i| self.transport[i].0 == r - 1).map(|i| i + 1).collect())
            .collect()
    }

    /// 0-based representative of 0-based vertex `i` and an element `g`
    /// with `g(rep) = i`.
    pub(crate) fn transport(&self, i: usize) -> &(usize, GroupElement) {
        &self.transport[i]
    }

    pub fn to_json(&self) -> ActionJson {
        ActionJson {
            generators: self.generators.iter().map(|g| g.vertex.iter().map(|v| v + 1).collect()).collect(),
            facet_maps: Some(self.generators.iter().map(|g| g.copy.clone()).collect()),
        }
    }

    pub fn from_json(complex: &WeightedSimplicialComplex, j: &ActionJson) -> Result<Self> {
        Self::new(complex, &j.generators, j.facet_maps.as_deref())
    }
}

pub(crate) fn local_index_map(wsc: &WeightedSimplicialComplex, g: &GroupElement, i: usize, r: usize) -> Vec<usize> {
    let gi = g.vertex[i];
    let src = wsc.copies_at(i);
    let dst = wsc.copies_at(gi);
    let m = src.len();
    // position k at i goes to position perm[k] at g(i)
    let perm: Vec<usize> = src
        .iter()
        .map(|&c| dst.iter().position(|&d| d == g.copy[c]).expect("copy action respects collapse"))
        .collect();
    let size = r.pow(m as u32);
    let mut out = vec![0; size];
    let mut digits = vec![0usize; m];
    let mut target = vec![0usize; m];
    for (b, slot) in out.iter_mut().enumerate() {
        let mut rem = b;
        for k in (0..m).rev() {
            digits[k] = rem % r;
            rem /= r;
        }
        for k in 0..m {
            target[perm[k]] = digits[k];
        }
        *slot = target.iter().fold(0, |acc, &d| acc * r + d);
    }
    out
}

fn induced_copy_map(complex: &WeightedSimplicialComplex, vertex: &[usize]) -> Result<Vec<usize>> {
    let g = GroupElement { vertex: vertex.to_vec(), copy: Vec::new() };
    complex
        .copies
        .iter()
        .map(|c| {
            if complex.weight(c.mask) != 1 {
                return Err(Error::invalid("facet maps required when some facet has weight > 1"));
            }
            let target = g.apply_mask(c.mask);
            complex
                .copies
                .iter()
                .position(|d| d.mask == target)
                .ok_or_else(|| Error::invalid("vertex permutation does not map facets to facets"))
        })
        .collect()
}

/// Translation group `i ↦ i+1 (mod n)` on a cycle.
pub fn cyclic_action(complex: &WeightedSimplicialComplex) -> Result<GroupAction> {
    if !complex.is_cycle() {
        return Err(Error::invalid("cyclic_action requires a cycle complex"));
    }
    let n = complex.n();
    let shift: Vec<usize> = (1..=n).map(|i| i % n + 1).collect();
    GroupAction::new(complex, &[shift], None)
}

/// Full permutation group on a simplex, generated by adjacent transpositions.
pub fn symmetric_action(complex: &WeightedSimplicialComplex) -> Result<GroupAction> {
    if !complex.is_simplex() {
        return Err(Error::invalid("symmetric_action requires a simplex complex"));
    }
    let n = complex.n();
    let gens: Vec<Vec<usize>> = (1..n)
        .map(|k| {
            let mut p: Vec<usize> = (1..=n).collect();
            p.swap(k - 1, k);
            p
        })
        .collect();
    let maps: Vec<Vec<usize>> = vec![vec![0]; gens.len()];
    GroupAction::new(complex, &gens, Some(&maps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionJson {
    pub generators: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facet_maps: Option<Vec<Vec<usize>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reflection_line3() -> GroupAction {
        let l = make_line(3).unwrap();
        GroupAction::new(&l, &[vec![3, 2, 1]], None).unwrap()
    }

    #[test]
    fn simplex_facets() {
        assert_eq!(make_simplex(3).unwrap().facets(), vec![vec![1, 2, 3]]);
        assert_eq!(make_simplex(1).unwrap().facets(), vec![vec![1]]);
        assert_eq!(make_simplex(5).unwrap().local_degree(1), 1);
        assert!(make_simplex(0).is_err());
    }

    #[test]
    fn cycle_and_line_facets() {
        let c5 = make_cycle(5).unwrap();
        assert_eq!(c5.facets().len(), 5);
        for v in 1..=5 {
            assert_eq!(c5.local_degree(v), 2);
        }
        assert!(c5.facets().contains(&vec![1, 5]));
        assert_eq!(make_cycle(3).unwrap().local_degree(2), 2);
        assert!(!make_cycle(4).unwrap().is_tree());
        assert!(make_cycle(2).is_err());
        assert_eq!(make_line(4).unwrap().facets().len(), 3);
        assert_eq!(make_line(2).unwrap().facets(), vec![vec![1, 2]]);
        assert!(make_line(6).unwrap().is_tree());
        assert!(make_line(1).is_err());
    }

    #[test]
    fn tree_detection() {
        assert!(make_line(5).unwrap().is_tree());
        assert!(!make_cycle(5).unwrap().is_tree());
        assert!(!make_simplex(3).unwrap().is_tree());
        let star = WeightedSimplicialComplex::new(4, &[(vec![1, 4], 1), (vec![2, 4], 1), (vec![3, 4], 1)]).unwrap();
        assert!(star.is_tree());
        let doubled = WeightedSimplicialComplex::new(2, &[(vec![1, 2], 2)]).unwrap();
        assert!(!doubled.is_tree());
        assert_eq!(doubled.num_copies(), 2);
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(WeightedSimplicialComplex::new(2, &[(vec![1, 2], 3), (vec![1], 2)]).is_err());
        assert!(WeightedSimplicialComplex::new(3, &[(vec![1, 2, 3], 1), (vec![1, 2], 0)]).is_err());
        assert!(WeightedSimplicialComplex::new(2, &[(vec![1], 0)]).is_err());
        assert!(WeightedSimplicialComplex::new(2, &[(vec![1, 2], 4), (vec![1], 2), (vec![2], 4)]).is_ok());
    }

    #[test]
    fn cyclic_action_properties() {
        let c3 = make_cycle(3).unwrap();
        let a3 = cyclic_action(&c3).unwrap();
        assert_eq!(a3.orbits(), vec![vec![1, 2, 3]]);
        let c5 = make_cycle(5).unwrap();
        let a5 = cyclic_action(&c5).unwrap();
        let g = &a5.generators()[0];
        let pos51 = c5.facet_copies().iter().position(|c| c.mask == mask_of(&[1, 5])).unwrap();
        assert_eq!(c5.facet_copies()[g.copy[pos51]].mask, mask_of(&[1, 2]));
        assert!(a5.is_external().unwrap());
        assert_eq!(a5.orbit_representatives(), vec![1]);
        assert!(cyclic_action(&make_cycle(4).unwrap()).unwrap().is_external().unwrap());
        assert!(cyclic_action(&make_line(4).unwrap()).is_err());
    }

    #[test]
    fn symmetric_action_properties() {
        let s3 = symmetric_action(&make_simplex(3).unwrap()).unwrap();
        assert_eq!(s3.orbits(), vec![vec![1, 2, 3]]);
        assert_eq!(s3.elements(100).unwrap().len(), 6);
        let s2 = symmetric_action(&make_simplex(2).unwrap()).unwrap();
        assert_eq!(s2.generators()[0].copy, vec![0]);
        assert!(symmetric_action(&make_simplex(4).unwrap()).unwrap().is_external().unwrap());
        assert!(symmetric_action(&make_cycle(3).unwrap()).is_err());
    }

    #[test]
    fn externality_and_orbits() {
        let refl = reflection_line3();
        assert!(!refl.is_external().unwrap());
        assert_eq!(refl.orbit_representatives(), vec![1, 2]);
        assert_eq!(refl.orbits(), vec![vec![1, 3], vec![2]]);
        let triv = GroupAction::trivial(&make_simplex(3).unwrap());
        assert!(triv.is_external().unwrap());
        assert_eq!(triv.orbit_representatives(), vec![1, 2, 3]);
    }

    #[test]
    fn group_cap_is_enforced() {
        let s6 = symmetric_action(&make_simplex(6).unwrap()).unwrap();
        assert!(matches!(s6.elements(100), Err(Error::Resource(_))));
        assert_eq!(s6.elements(1000).unwrap().len(), 720);
    }

    #[test]
    fn bad_actions_rejected() {
        let l3 = make_line(3).unwrap();
        // 1 -> 2 -> 3 -> 1 does not preserve the line
        assert!(GroupAction::new(&l3, &[vec![2, 3, 1]], None).is_err());
        let d = WeightedSimplicialComplex::new(2, &[(vec![1, 2], 2)]).unwrap();
        assert!(GroupAction::new(&d, &[vec![2, 1]], None).is_err());
        let swap_copies = GroupAction::new(&d, &[vec![2, 1]], Some(&[vec![1, 0]])).unwrap();
        assert!(swap_copies.is_external().unwrap());
        // fixes both vertices but swaps the copies
        let inner = GroupAction::new(&d, &[vec![1, 2]], Some(&[vec![1, 0]])).unwrap();
        assert!(!inner.is_external().unwrap());
    }

    #[test]
    fn local_index_map_on_cycle() {
        let c3 = make_cycle(3).unwrap();
        let a = cyclic_action(&c3).unwrap();
        let g = &a.generators()[0];
        // vertex 1 lies in {1,2} (pos 0) and {1,3} (pos 1): β = (a, b)
        // vertex 2 lies in {1,2} (pos 0) and {2,3} (pos 2)
        // g sends {1,2} -> {2,3} and {1,3} -> {1,2}, so gβ at vertex 2 = (b, a)
        let map = local_index_map(a.complex(), g, 0, 2);
        assert_eq!(map, vec![0, 2, 1, 3]);
    }

    #[test]
    fn json_roundtrip() {
        let c = make_cycle(4).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: WeightedSimplicialComplex = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let a = cyclic_action(&c).unwrap();
        let j = serde_json::to_string(&a.to_json()).unwrap();
        let back = GroupAction::from_json(&c, &serde_json::from_str(&j).unwrap()).unwrap();
        assert_eq!(back, a);
        let parsed: WscJson = serde_json::from_str(r#"{"n":3,"weights":[{"subset":[1,2,3],"w":1}]}"#).unwrap();
        let s3 = WeightedSimplicialComplex::from_json(&parsed).unwrap();
        assert!(s3.is_simplex());
        assert_eq!(s3.weight_of(&[1, 3]), 1);
    }

    fn arb_complex() -> impl Strategy<Value = WeightedSimplicialComplex> {
        prop_oneof![
            (1usize..8).prop_map(|n| make_simplex(n).unwrap()),
            (3usize..10).prop_map(|n| make_cycle(n).unwrap()),
            (2usize..10).prop_map(|n| make_line(n).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn constructors_satisfy_divisibility(c in arb_complex()) {
            prop_assert!(c.check_divisibility_exhaustive());
        }

        #[test]
        fn orbits_partition_vertices(n in 3usize..9, kind in 0u8..3) {
            let action = match kind {
                0 => cyclic_action(&make_cycle(n).unwrap()).unwrap(),
                1 => symmetric_action(&make_simplex(n.min(6)).unwrap()).unwrap(),
                _ => GroupAction::trivial(&make_line(n).unwrap()),
            };
            let total: usize = action.orbits().iter().map(|o| o.len()).sum();
            prop_assert_eq!(total, action.complex().n());
        }

        #[test]
        fn actions_preserve_weights_and_collapse(n in 3usize..8) {
            let c = make_cycle(n).unwrap();
            let a = cyclic_action(&c).unwrap();
            for g in a.elements(1000).unwrap() {
                for s in 1u64..(1 << n) {
                    prop_assert_eq!(c.weight(g.apply_mask(s)), c.weight(s));
                }
                for (pos, copy) in c.facet_copies().iter().enumerate() {
                    prop_assert_eq!(c.facet_copies()[g.copy[pos]].mask, g.apply_mask(copy.mask));
                }
            }
        }
    }
}
