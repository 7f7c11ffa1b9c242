//! Simplicial complexes on the factor set and their separator structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::varset::VarSet;

/// Largest factor count accepted by the exhaustive separator searches.
pub const MAX_SEARCH_FACTORS: usize = 16;

/// A simplicial complex on `{1, ..., m}` given by its facets.
///
/// Facets are reduced (no facet contains another), vertices missing from
/// every facet are added as singletons, and facets are sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Complex {
    m: usize,
    facets: Vec<VarSet>,
}

/// Components in running-intersection order with their dividers;
/// `dividers[k - 1]` belongs to `components[k]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub components: Vec<VarSet>,
    pub dividers: Vec<VarSet>,
}

impl Complex {
    pub fn new(m: usize, facets: impl IntoIterator<Item = VarSet>) -> Result<Self> {
        let all = VarSet::full(m);
        let mut fs: Vec<VarSet> = Vec::new();
        for f in facets {
            if !f.is_subset(all) {
                let bad = f.difference(all).min().unwrap();
                return Err(Error::FactorOutOfRange { factor: bad, m });
            }
            if !f.is_empty() {
                fs.push(f);
            }
        }
        let mut covered = VarSet::empty();
        for f in &fs {
            covered = covered.union(*f);
        }
        for v in all.difference(covered).iter() {
            fs.push(VarSet::singleton(v));
        }
        Ok(Complex {
            m,
            facets: reduce(fs),
        })
    }

    /// Convenience constructor from label lists.
    pub fn from_lists(m: usize, facets: &[&[usize]]) -> Result<Self> {
        Complex::new(m, facets.iter().map(|f| VarSet::of(f)))
    }

    pub fn saturated(m: usize) -> Self {
        Complex {
            m,
            facets: vec![VarSet::full(m)],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn facets(&self) -> &[VarSet] {
        &self.facets
    }

    pub fn vertices(&self) -> VarSet {
        VarSet::full(self.m)
    }

    /// The complex with an extra facet.
    pub fn with_facet(&self, f: VarSet) -> Result<Complex> {
        let mut fs = self.facets.clone();
        fs.push(f);
        Complex::new(self.m, fs)
    }

    pub fn is_partial_edge(&self, s: VarSet) -> bool {
        self.facets.iter().any(|f| s.is_subset(*f))
    }

    /// Connected components of the subhypergraph induced by `within`.
    pub fn components_within(&self, within: VarSet) -> Vec<VarSet> {
        let edges: Vec<VarSet> = self
            .facets
            .iter()
            .map(|f| f.intersection(within))
            .filter(|e| !e.is_empty())
            .collect();
        let mut comps: Vec<VarSet> = Vec::new();
        let mut seen = VarSet::empty();
        for v in within.iter() {
            if seen.contains(v) {
                continue;
            }
            let mut comp = VarSet::singleton(v);
            loop {
                let mut grown = comp;
                for e in &edges {
                    if !e.intersection(grown).is_empty() {
                        grown = grown.union(*e);
                    }
                }
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            seen = seen.union(comp);
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components_within(self.vertices()).len() <= 1
    }

    fn separated(&self, s: VarSet, u: usize, v: usize) -> bool {
        let rest = self.vertices().difference(s);
        !self
            .components_within(rest)
            .iter()
            .any(|c| c.contains(u) && c.contains(v))
    }

    /// True iff removing the partial edge `s` disconnects the rest.
    pub fn is_separator(&self, s: VarSet) -> Result<bool> {
        if !self.is_partial_edge(s) {
            return Err(Error::NotPartialEdge(s));
        }
        let rest = self.vertices().difference(s);
        Ok(self.components_within(rest).len() > 1)
    }

    fn guard(&self) -> Result<()> {
        if self.m > MAX_SEARCH_FACTORS {
            return Err(Error::TooManyFactors {
                m: self.m,
                limit: MAX_SEARCH_FACTORS,
            });
        }
        Ok(())
    }

    /// All nonempty partial edges, each listed once, in increasing size.
    pub fn partial_edges(&self) -> Vec<VarSet> {
        let mut out: Vec<VarSet> = Vec::new();
        for f in &self.facets {
            for s in f.subsets() {
                if !s.is_empty() && !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out.sort_by_key(|s| (s.len(), *s));
        out
    }

    /// Partial-edge separators `S` for which some pair of vertices is
    /// separated by `S` and by no proper subset of `S`.
    pub fn dividers(&self) -> Result<Vec<VarSet>> {
        self.guard()?;
        let mut out = Vec::new();
        for s in self.partial_edges() {
            if !self.is_separator(s)? {
                continue;
            }
            let rest = self.vertices().difference(s);
            let comps = self.components_within(rest);
            let mut found = false;
            'pairs: for (a, ca) in comps.iter().enumerate() {
                for cb in comps.iter().skip(a + 1) {
                    for u in ca.iter() {
                        for v in cb.iter() {
                            // Separation is monotone in S, so testing the
                            // maximal proper subsets suffices.
                            let minimal = s
                                .iter()
                                .all(|x| !self.separated(s.difference(VarSet::singleton(x)), u, v));
                            if minimal {
                                found = true;
                                break 'pairs;
                            }
                        }
                    }
                }
            }
            if found {
                out.push(s);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Maximal sets of pairwise tightly connected vertices (no partial-edge
    /// separator between them), in a running-intersection order.
    pub fn maximal_compact_components(&self) -> Result<Decomposition> {
        let top = self.components_within(self.vertices());
        if top.len() > 1 {
            return Err(Error::Disconnected(top));
        }
        self.compact_components()
    }

    /// Like [`Complex::maximal_compact_components`], but also accepts a
    /// disconnected complex; pieces are then joined by empty dividers.
    pub fn compact_components(&self) -> Result<Decomposition> {
        self.guard()?;
        let all = self.vertices();
        let m = self.m;
        let mut tight = vec![vec![true; m + 1]; m + 1];
        let mut separators = vec![VarSet::empty()];
        separators.extend(self.partial_edges());
        for s in separators {
            let comps = self.components_within(all.difference(s));
            if comps.len() < 2 {
                continue;
            }
            for (a, ca) in comps.iter().enumerate() {
                for cb in comps.iter().skip(a + 1) {
                    for u in ca.iter() {
                        for v in cb.iter() {
                            tight[u][v] = false;
                            tight[v][u] = false;
                        }
                    }
                }
            }
        }
        let cliques = maximal_cliques(m, |u, v| tight[u][v]);
        let h = Complex::new(m, cliques)?;
        h.junction_tree()
    }

    /// Graham (GYO) reduction.
    pub fn is_acyclic(&self) -> bool {
        let mut edges: Vec<VarSet> = self.facets.clone();
        loop {
            let mut changed = false;
            // Drop vertices that occur in exactly one edge.
            let mut union = VarSet::empty();
            for e in &edges {
                union = union.union(*e);
            }
            for v in union.iter() {
                let holders: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].contains(v)).collect();
                if holders.len() == 1 {
                    let e = &mut edges[holders[0]];
                    *e = e.difference(VarSet::singleton(v));
                    changed = true;
                }
            }
            // Drop empty edges and edges contained in another edge.
            let mut kept: Vec<VarSet> = Vec::new();
            for (i, e) in edges.iter().enumerate() {
                if e.is_empty() {
                    changed = true;
                    continue;
                }
                let covered = edges
                    .iter()
                    .enumerate()
                    .any(|(j, f)| j != i && e.is_subset(*f) && (e != f || j < i));
                if covered {
                    changed = true;
                } else {
                    kept.push(*e);
                }
            }
            edges = kept;
            if edges.is_empty() {
                return true;
            }
            if !changed {
                return false;
            }
        }
    }

    /// A perfect sequence of the facets with `S_k = B_{k-1} ∩ C_k`.
    ///
    /// Built as a maximum-weight spanning tree on intersection sizes, grown
    /// from the lexicographically smallest facet.
    pub fn junction_tree(&self) -> Result<Decomposition> {
        if !self.is_acyclic() {
            return Err(Error::Cyclic);
        }
        let fs = &self.facets;
        let k = fs.len();
        let mut in_tree = vec![false; k];
        let mut order = vec![0usize];
        in_tree[0] = true;
        let mut dividers = Vec::new();
        while order.len() < k {
            let mut best: Option<(usize, usize, VarSet)> = None;
            for (c, f) in fs.iter().enumerate() {
                if in_tree[c] {
                    continue;
                }
                for &t in &order {
                    let w = f.intersection(fs[t]);
                    let better = match &best {
                        None => true,
                        Some((bc, _, bw)) => w.len() > bw.len() || (w.len() == bw.len() && fs[c] < fs[*bc]),
                    };
                    if better {
                        best = Some((c, t, w));
                    }
                }
            }
            let (c, _, _) = best.expect("nonempty remainder");
            let mut history = VarSet::empty();
            for &t in &order {
                history = history.union(fs[t]);
            }
            let s = history.intersection(fs[c]);
            if !order.iter().any(|&t| s.is_subset(fs[t])) {
                return Err(Error::Internal(format!(
                    "running intersection fails at {}",
                    fs[c]
                )));
            }
            in_tree[c] = true;
            order.push(c);
            dividers.push(s);
        }
        Ok(Decomposition {
            components: order.iter().map(|&i| fs[i]).collect(),
            dividers,
        })
    }
}

impl Decomposition {
    /// Checks `(C_1 ∪ ... ∪ C_{k-1}) ∩ C_k = S_k` and that the components
    /// cover `all`.
    pub fn verify(&self, all: VarSet) -> bool {
        if self.components.len() != self.dividers.len() + 1 {
            return false;
        }
        let mut history = VarSet::empty();
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 && history.intersection(*c) != self.dividers[k - 1] {
                return false;
            }
            history = history.union(*c);
        }
        history == all
    }

    /// Distinct dividers, sorted.
    pub fn divider_set(&self) -> Vec<VarSet> {
        let mut d = self.dividers.clone();
        d.sort();
        d.dedup();
        d
    }
}

fn reduce(mut fs: Vec<VarSet>) -> Vec<VarSet> {
    fs.sort_by_key(|f| std::cmp::Reverse(f.len()));
    let mut out: Vec<VarSet> = Vec::new();
    for f in fs {
        if !out.iter().any(|g| f.is_subset(*g)) {
            out.push(f);
        }
    }
    out.sort();
    out
}

/// Bron–Kerbosch with pivoting over vertices `1..=m`.
pub(crate) fn maximal_cliques(m: usize, adj: impl Fn(usize, usize) -> bool) -> Vec<VarSet> {
    let nbrs: Vec<VarSet> = (0..=m)
        .map(|u| {
            if u == 0 {
                return VarSet::empty();
            }
            (1..=m).filter(|&v| v != u && adj(u, v)).collect()
        })
        .collect();
    let mut out = Vec::new();
    fn bk(r: VarSet, p: VarSet, x: VarSet, nbrs: &[VarSet], out: &mut Vec<VarSet>) {
        if p.is_empty() && x.is_empty() {
            out.push(r);
            return;
        }
        let pivot = p.union(x).iter().max_by_key(|&u| nbrs[u].intersection(p).len()).unwrap();
        let mut p = p;
        let mut x = x;
        for v in p.difference(nbrs[pivot]).iter() {
            let sv = VarSet::singleton(v);
            bk(r.union(sv), p.intersection(nbrs[v]), x.intersection(nbrs[v]), nbrs, out);
            p = p.difference(sv);
            x = x.union(sv);
        }
    }
    bk(VarSet::empty(), VarSet::full(m), VarSet::empty(), &nbrs, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(m: usize, f: &[&[usize]]) -> Complex {
        Complex::from_lists(m, f).unwrap()
    }

    #[test]
    fn reduction_and_isolated_vertices() {
        let c = cx(4, &[&[1, 2], &[1], &[2, 3]]);
        assert_eq!(
            c.facets(),
            &[VarSet::of(&[1, 2]), VarSet::of(&[2, 3]), VarSet::of(&[4])]
        );
    }

    #[test]
    fn separators_on_a_path() {
        let c = cx(3, &[&[1, 2], &[2, 3]]);
        assert!(c.is_partial_edge(VarSet::of(&[2])));
        assert!(!c.is_partial_edge(VarSet::of(&[1, 3])));
        assert!(c.is_separator(VarSet::of(&[2])).unwrap());
        assert!(c.is_separator(VarSet::of(&[1, 3])).is_err());
        assert_eq!(c.dividers().unwrap(), vec![VarSet::of(&[2])]);
        let d = c.maximal_compact_components().unwrap();
        assert_eq!(d.components, vec![VarSet::of(&[1, 2]), VarSet::of(&[2, 3])]);
        assert_eq!(d.dividers, vec![VarSet::of(&[2])]);
    }

    #[test]
    fn triangle_is_cyclic() {
        assert!(!cx(3, &[&[1, 2], &[2, 3], &[1, 3]]).is_acyclic());
        assert!(cx(3, &[&[1, 2, 3]]).is_acyclic());
        assert!(cx(3, &[&[1, 2, 3]]).dividers().unwrap().is_empty());
    }

    #[test]
    fn disconnected_is_reported() {
        let c = cx(3, &[&[1, 2], &[3]]);
        assert!(matches!(c.maximal_compact_components(), Err(Error::Disconnected(_))));
        let jt = c.junction_tree().unwrap();
        assert_eq!(jt.dividers, vec![VarSet::empty()]);
    }

    #[test]
    fn cliques_of_four_cycle() {
        let c = cx(4, &[&[1, 2], &[2, 3], &[3, 4], &[1, 4]]);
        assert!(!c.is_acyclic());
        let d = c.maximal_compact_components().unwrap();
        assert_eq!(d.components, vec![VarSet::full(4)]);
    }
}
