//! Exact structural queries on a [`Subspace`]: saturation, intersections with
//! marginal and slice spaces, conformality, connectivity, decomposition into
//! maximal extended compact components, and the hierarchical closure.

use std::collections::HashMap;

use super::{Subspace, Term};
use crate::error::{Error, Result};
use crate::exact;
use crate::hypergraph::{maximal_cliques, Complex, Decomposition};
use crate::table::Shape;
use crate::varset::VarSet;

/// Largest factor count for the exhaustive decomposition search.
pub const MAX_DECOMPOSE_FACTORS: usize = 12;

/// Largest factor count for the interaction (ANOVA) expansion.
pub const MAX_CLOSURE_FACTORS: usize = 10;

/// Maximal extended compact components of a model, in running-intersection
/// order, with the marginal model `L ∩ L_C` of each component.
#[derive(Clone, Debug)]
pub struct ModelDecomposition {
    pub components: Vec<VarSet>,
    pub dividers: Vec<VarSet>,
    pub component_models: Vec<Subspace>,
}

impl ModelDecomposition {
    pub fn as_decomposition(&self) -> Decomposition {
        Decomposition {
            components: self.components.clone(),
            dividers: self.dividers.clone(),
        }
    }
}

impl Subspace {
    /// For each support position, the index of its `d`-marginal cell.
    fn support_marginal_map(&self, d: VarSet) -> Vec<usize> {
        let map = self.shape.marginal_map(d);
        self.support.iter().map(|&i| map[i]).collect()
    }

    /// Number of `d`-marginal cells that contain at least one support cell.
    fn nonempty_marginal_cells(&self, d: VarSet) -> usize {
        let map = self.support_marginal_map(d);
        let mut seen = vec![false; self.shape.marginal(d).num_cells()];
        for j in map {
            seen[j] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Columns `g(a) - g(rep(a))` whose left kernel is `L ∩ L_D`.
    fn marginal_constraints(&self, d: VarSet) -> Vec<Vec<i64>> {
        let map = self.support_marginal_map(d);
        let mut rep: HashMap<usize, usize> = HashMap::new();
        let mut cols = Vec::new();
        for (p, &j) in map.iter().enumerate() {
            match rep.get(&j) {
                None => {
                    rep.insert(j, p);
                }
                Some(&q) => cols.push(self.basis.iter().map(|g| g[p] - g[q]).collect()),
            }
        }
        cols
    }

    fn combine(&self, coeffs: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
        coeffs
            .iter()
            .map(|c| {
                let mut acc = vec![0i128; self.support.len()];
                for (ci, g) in c.iter().zip(&self.basis) {
                    if *ci == 0 {
                        continue;
                    }
                    for (a, &x) in acc.iter_mut().zip(g) {
                        *a += *ci as i128 * x as i128;
                    }
                }
                let g = acc.iter().fold(0i128, |g, &x| num_integer::gcd(g, x));
                acc.iter()
                    .map(|&x| {
                        let x = if g > 1 { x / g } else { x };
                        i64::try_from(x).map_err(|_| Error::Overflow("subspace intersection"))
                    })
                    .collect()
            })
            .collect()
    }

    /// Generators (over the support) of `L ∩ L_D`.
    pub fn intersect_marginal(&self, d: VarSet) -> Result<Vec<Vec<i64>>> {
        self.shape.check_factors(d)?;
        let cols = self.marginal_constraints(d);
        let kernel = exact::left_kernel(&cols, self.dim())?;
        self.combine(&kernel)
    }

    pub fn dim_intersect_marginal(&self, d: VarSet) -> usize {
        let cols = self.marginal_constraints(d);
        self.dim() - exact::rank(&cols, self.dim())
    }

    /// True iff `L_D ⊆ L`, i.e. the sufficient statistic fixes the
    /// `D`-marginal.
    pub fn is_saturated(&self, d: VarSet) -> Result<bool> {
        self.shape.check_factors(d)?;
        if d.is_empty() {
            return Ok(true);
        }
        Ok(self.dim_intersect_marginal(d) == self.nonempty_marginal_cells(d))
    }

    /// Generators (over the support) of `L ∩ L^{j_B}`.
    pub fn intersect_slice(&self, b: VarSet, level: &[usize]) -> Result<Vec<Vec<i64>>> {
        self.shape.check_factors(b)?;
        let cols: Vec<Vec<i64>> = self
            .support
            .iter()
            .enumerate()
            .filter(|(_, &i)| {
                let c = self.shape.cell(i);
                !b.iter().zip(level).all(|(f, &l)| c[f - 1] == l)
            })
            .map(|(p, _)| self.basis.iter().map(|g| g[p]).collect())
            .collect();
        let kernel = exact::left_kernel(&cols, self.dim())?;
        self.combine(&kernel)
    }

    /// True iff `L = sum_k (L ∩ L_{parts[k]})`.
    pub fn is_conformal(&self, parts: &[VarSet]) -> Result<bool> {
        let mut rows = Vec::new();
        for &p in parts {
            rows.extend(self.intersect_marginal(p)?);
        }
        Ok(exact::rank(&rows, self.support.len()) == self.dim())
    }

    /// True iff, inside the `within`-marginal, a cell lies in the support
    /// exactly when each of its projections onto `parts` does. Always true
    /// without structural zeros.
    pub fn support_factorizes_within(&self, within: VarSet, parts: &[VarSet]) -> bool {
        if !self.has_mask() {
            return true;
        }
        let wshape = if within == self.shape.all_factors() {
            self.shape.clone()
        } else {
            self.shape.marginal(within)
        };
        let wmap = self.shape.marginal_map(within);
        let mut wsupp = vec![false; wshape.num_cells()];
        for &i in &self.support {
            wsupp[wmap[i]] = true;
        }
        let local: Vec<VarSet> = parts.iter().map(|p| p.relabel_within(within)).collect();
        let psupp: Vec<(Vec<usize>, Vec<bool>)> = local
            .iter()
            .map(|&p| {
                let map = wshape.marginal_map(p);
                let mut s = vec![false; wshape.marginal(p).num_cells()];
                for (c, &j) in map.iter().enumerate() {
                    if wsupp[c] {
                        s[j] = true;
                    }
                }
                (map, s)
            })
            .collect();
        (0..wshape.num_cells()).all(|c| {
            let product = psupp.iter().all(|(map, s)| s[map[c]]);
            product == wsupp[c]
        })
    }

    pub fn support_factorizes(&self, parts: &[VarSet]) -> bool {
        self.support_factorizes_within(self.shape.all_factors(), parts)
    }

    /// Conformal to `parts` and, under structural zeros, with a support that
    /// factorizes accordingly.
    pub fn splits_along(&self, parts: &[VarSet]) -> Result<bool> {
        Ok(self.support_factorizes(parts) && self.is_conformal(parts)?)
    }

    /// Vertex groups that any splitting bipartition must respect.
    fn group_closure(&self) -> Result<Option<Complex>> {
        if !self.has_mask() && self.m() <= MAX_CLOSURE_FACTORS {
            Ok(Some(self.hierarchical_closure()?))
        } else {
            Ok(None)
        }
    }

    fn split_groups(closure: &Option<Complex>, within: VarSet) -> Vec<VarSet> {
        match closure {
            Some(c) => c.components_within(within),
            None => within.iter().map(VarSet::singleton).collect(),
        }
    }

    /// The finest partition `{A_k}` of the factors such that `L` is conformal
    /// to `{L_{A_k}}`.
    pub fn connected_components(&self) -> Result<Vec<VarSet>> {
        let all = self.shape.all_factors();
        if self.m() > MAX_DECOMPOSE_FACTORS {
            return Err(Error::TooManyFactors {
                m: self.m(),
                limit: MAX_DECOMPOSE_FACTORS,
            });
        }
        let groups = Self::split_groups(&self.group_closure()?, all);
        if groups.len() < 2 {
            return Ok(vec![all]);
        }
        let mut valid: Vec<VarSet> = Vec::new();
        let g = groups.len();
        for bits in 1u32..(1u32 << (g - 1)) {
            // Group 0 always sits in the complement, so each bipartition is seen once.
            let a: VarSet = (0..g - 1)
                .filter(|k| bits & (1 << k) != 0)
                .fold(VarSet::empty(), |acc, k| acc.union(groups[k + 1]));
            let b = all.difference(a);
            if self.splits_along(&[a, b])? {
                valid.push(a);
            }
        }
        // Common refinement of all valid bipartitions.
        let mut atoms: Vec<VarSet> = Vec::new();
        for v in all.iter() {
            let sig: Vec<bool> = valid.iter().map(|a| a.contains(v)).collect();
            match atoms.iter_mut().find(|at| {
                let u = VarSet::min(**at).unwrap();
                valid.iter().map(|a| a.contains(u)).collect::<Vec<_>>() == sig
            }) {
                Some(at) => at.insert(v),
                None => atoms.push(VarSet::singleton(v)),
            }
        }
        atoms.sort();
        Ok(atoms)
    }

    /// Smallest complex `Δ` with `L ⊆ L_Δ`, from the interaction (ANOVA)
    /// expansion of every generator. Undefined under structural zeros.
    pub fn hierarchical_closure(&self) -> Result<Complex> {
        if self.has_mask() {
            return Err(Error::MaskedClosure);
        }
        let m = self.m();
        if m > MAX_CLOSURE_FACTORS {
            return Err(Error::TooManyFactors {
                m,
                limit: MAX_CLOSURE_FACTORS,
            });
        }
        let subsets: Vec<VarSet> = (0u32..1 << m).map(VarSet::from_bits).collect();
        let maps: Vec<Vec<usize>> = subsets.iter().map(|&f| self.shape.marginal_map(f)).collect();
        let sizes: Vec<i128> = subsets
            .iter()
            .map(|&f| self.shape.marginal(f).num_cells() as i128)
            .collect();
        let mut present = vec![false; subsets.len()];
        for g in &self.basis {
            // Sums of g over the complement of F, scaled by |I_F|.
            let scaled: Vec<Vec<i128>> = subsets
                .iter()
                .map(|&f| {
                    let map = &maps[f.bits() as usize];
                    let size = sizes[f.bits() as usize];
                    let mut t = vec![0i128; size as usize];
                    for (c, &x) in g.iter().enumerate() {
                        t[map[c]] += x as i128;
                    }
                    for v in t.iter_mut() {
                        *v *= size;
                    }
                    t
                })
                .collect();
            for &e in &subsets {
                if e.is_empty() || present[e.bits() as usize] {
                    continue;
                }
                let terms: Vec<(i128, &Vec<usize>, &Vec<i128>)> = e
                    .subsets()
                    .map(|f| {
                        let sign = if (e.len() - f.len()) % 2 == 0 { 1 } else { -1 };
                        let k = f.bits() as usize;
                        (sign, &maps[k], &scaled[k])
                    })
                    .collect();
                // Möbius inversion evaluated on every cell of the table.
                present[e.bits() as usize] =
                    (0..g.len()).any(|c| terms.iter().map(|(sign, map, t)| sign * t[map[c]]).sum::<i128>() != 0);
            }
        }
        let present: Vec<VarSet> = subsets.into_iter().filter(|e| present[e.bits() as usize]).collect();
        Complex::new(m, present)
    }

    /// Maximal extended compact components and dividers of a connected model.
    pub fn decompose(&self) -> Result<ModelDecomposition> {
        let m = self.m();
        if m > MAX_DECOMPOSE_FACTORS {
            return Err(Error::TooManyFactors {
                m,
                limit: MAX_DECOMPOSE_FACTORS,
            });
        }
        let comps = self.connected_components()?;
        if comps.len() > 1 {
            return Err(Error::Disconnected(comps));
        }
        let all = self.shape.all_factors();
        let closure = self.group_closure()?;
        let mut tight = vec![vec![true; m + 1]; m + 1];
        let mut saturated: HashMap<VarSet, bool> = HashMap::new();
        let mut candidates: Vec<VarSet> = all.subsets().filter(|s| !s.is_empty() && s.len() + 2 <= m).collect();
        candidates.sort_by_key(|s| (s.len(), *s));
        for s in candidates {
            // Saturation is inherited by subsets, so an unsaturated subset rules S out.
            let inherited = s
                .iter()
                .map(|x| s.difference(VarSet::singleton(x)))
                .filter(|t| !t.is_empty())
                .all(|t| saturated.get(&t).copied().unwrap_or(true));
            let sat = inherited && self.is_saturated(s)?;
            saturated.insert(s, sat);
            if !sat {
                continue;
            }
            let rest = all.difference(s);
            let groups = Self::split_groups(&closure, rest);
            let g = groups.len();
            if g < 2 {
                continue;
            }
            for bits in 1u32..(1u32 << (g - 1)) {
                let a2: VarSet = (0..g - 1)
                    .filter(|k| bits & (1 << k) != 0)
                    .fold(VarSet::empty(), |acc, k| acc.union(groups[k + 1]));
                let a1 = rest.difference(a2);
                let known = a1.iter().all(|u| a2.iter().all(|v| !tight[u][v]));
                if known {
                    continue;
                }
                if self.splits_along(&[a1.union(s), a2.union(s)])? {
                    for u in a1.iter() {
                        for v in a2.iter() {
                            tight[u][v] = false;
                            tight[v][u] = false;
                        }
                    }
                }
            }
        }
        let cliques = maximal_cliques(m, |u, v| tight[u][v]);
        let h = Complex::new(m, cliques)?;
        if !h.is_acyclic() {
            return Err(Error::Internal(format!(
                "compact components {:?} are not acyclic",
                h.facets()
            )));
        }
        let d = h.junction_tree()?;
        let component_models = d
            .components
            .iter()
            .map(|&c| self.component_model(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelDecomposition {
            components: d.components,
            dividers: d.dividers,
            component_models,
        })
    }

    /// The smallest decomposable model of which `L` is an HSM, with a perfect
    /// sequence of its cliques.
    pub fn ambient_decomposable(&self) -> Result<(Complex, Decomposition)> {
        let d = self.decompose()?;
        let h = Complex::new(self.m(), d.components.iter().copied())?;
        if !h.is_acyclic() {
            return Err(Error::Internal("ambient model is not decomposable".into()));
        }
        Ok((h, d.as_decomposition()))
    }

    /// Checks the three conditions of a hierarchical subspace model of `L_Δ`:
    /// containment, saturation of every divider, and conformality to the
    /// maximal compact components. Under structural zeros the support must
    /// also factorize along the components.
    pub fn is_hsm_of(&self, delta: &Complex) -> Result<bool> {
        if delta.m() != self.m() {
            return Err(Error::ShapeMismatch(format!(
                "complex on {} factors, model on {}",
                delta.m(),
                self.m()
            )));
        }
        let ld = Subspace::hierarchical(self.shape.clone(), delta, Some(self.mask.clone()))?;
        if !self.is_subspace_of(&ld)? {
            return Ok(false);
        }
        for s in delta.dividers()? {
            if !self.is_saturated(s)? {
                return Ok(false);
            }
        }
        let comps = delta.compact_components()?;
        if !self.is_conformal(&comps.components)? {
            return Ok(false);
        }
        Ok(self.junction_steps_factorize(&comps))
    }

    /// Support factorization at every step of a perfect sequence.
    pub fn junction_steps_factorize(&self, d: &Decomposition) -> bool {
        let mut history = VarSet::empty();
        for (k, &c) in d.components.iter().enumerate() {
            if k > 0 {
                let within = history.union(c);
                if !self.support_factorizes_within(within, &[history, c]) {
                    return false;
                }
            }
            history = history.union(c);
        }
        true
    }

    /// `L` is an HSM of its own hierarchical closure.
    pub fn is_tight_hsm(&self) -> Result<bool> {
        let closure = self.hierarchical_closure()?;
        self.is_hsm_of(&closure)
    }

    /// Marginal mask of the `c`-marginal: a cell is masked when its whole
    /// preimage is.
    pub fn marginal_mask(&self, c: VarSet) -> Vec<bool> {
        let map = self.shape.marginal_map(c);
        let mut masked = vec![true; self.shape.marginal(c).num_cells()];
        for &i in &self.support {
            masked[map[i]] = false;
        }
        masked
    }

    /// The marginal model `L ∩ L_C` as a subspace on the `C`-marginal table.
    pub fn component_model(&self, c: VarSet) -> Result<Subspace> {
        self.shape.check_factors(c)?;
        if c == self.shape.all_factors() {
            return Ok(self.clone());
        }
        if c.is_empty() {
            return Err(Error::InvalidModel("empty component".into()));
        }
        let local_shape = self.shape.marginal(c);
        let local_mask = self.marginal_mask(c);
        let m = self.m();
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .filter(|t| !matches!(t, Term::Constant | Term::Explicit { .. }) && t.factors(m).is_subset(c))
            .map(|t| remap_term(t, c))
            .collect();
        let target = self.dim_intersect_marginal(c);
        let candidate = Subspace::new(local_shape.clone(), Some(local_mask.clone()), terms.clone())?;
        if candidate.dim() == target {
            return Ok(candidate);
        }
        let rows = self.intersect_marginal(c)?;
        let map = self.shape.marginal_map(c);
        let dense: Vec<Vec<i64>> = rows
            .iter()
            .map(|r| {
                let mut d = vec![0i64; local_shape.num_cells()];
                for (p, &i) in self.support.iter().enumerate() {
                    d[map[i]] = r[p];
                }
                d
            })
            .collect();
        terms.push(Term::Explicit {
            label: format!("L∩L{c}"),
            rows: dense,
        });
        let out = Subspace::new(local_shape, Some(local_mask), terms)?;
        if out.dim() != target {
            return Err(Error::Internal(format!(
                "marginal model on {c} has dimension {}, expected {target}",
                out.dim()
            )));
        }
        Ok(out)
    }

    /// Shape and mask of the slice with the factors of `b` fixed at `level`.
    pub fn slice_frame(&self, b: VarSet, level: &[usize]) -> Result<(Shape, Vec<usize>, Vec<bool>)> {
        let rest = self.shape.all_factors().difference(b);
        if rest.is_empty() {
            return Err(Error::InvalidModel("a slice needs at least one free factor".into()));
        }
        let sshape = self.shape.marginal(rest);
        let mut full = vec![0usize; self.m()];
        for (f, &l) in b.iter().zip(level) {
            full[f - 1] = l;
        }
        let rf = rest.to_vec();
        let mut cells = Vec::with_capacity(sshape.num_cells());
        let mut mask = Vec::with_capacity(sshape.num_cells());
        for s in 0..sshape.num_cells() {
            let sc = sshape.cell(s);
            for (k, &f) in rf.iter().enumerate() {
                full[f - 1] = sc[k];
            }
            let idx = self.shape.index(&full);
            cells.push(idx);
            mask.push(self.mask[idx]);
        }
        Ok((sshape, cells, mask))
    }

    /// The slice model `L ∩ L^{j_B}` restricted to its slice, as a subspace on
    /// the remaining factors. The slice indicator must lie in `L`.
    pub fn slice_model(&self, b: VarSet, level: &[usize]) -> Result<Subspace> {
        let (sshape, cells, smask) = self.slice_frame(b, level)?;
        if smask.iter().all(|&z| z) {
            return Err(Error::InvalidModel("slice is entirely structural zeros".into()));
        }
        let rows = self.intersect_slice(b, level)?;
        let pos: HashMap<usize, usize> = self.support.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let dense: Vec<Vec<i64>> = rows
            .iter()
            .map(|r| cells.iter().map(|i| pos.get(i).map(|&p| r[p]).unwrap_or(0)).collect())
            .collect();
        let n = dense.len();
        let out = Subspace::new(
            sshape,
            Some(smask),
            vec![Term::Explicit {
                label: format!("L∩L^{b}"),
                rows: dense,
            }],
        )?;
        if out.dim() != n {
            return Err(Error::InvalidModel(format!(
                "slice {b}={:?} does not contain its own indicator",
                level.iter().map(|l| l + 1).collect::<Vec<_>>()
            )));
        }
        Ok(out)
    }

    /// The smallest factor `f` with `L = sum_j (L ∩ L^{j_f})`, if any.
    pub fn slice_partition_factor(&self) -> Result<Option<usize>> {
        if self.m() < 2 {
            return Ok(None);
        }
        for f in 1..=self.m() {
            let b = VarSet::singleton(f);
            let mut total = 0;
            for l in 0..self.shape.levels()[f - 1] {
                total += self.intersect_slice(b, &[l])?.len();
            }
            if total == self.dim() {
                return Ok(Some(f));
            }
        }
        Ok(None)
    }
}

fn remap_term(t: &Term, c: VarSet) -> Term {
    match t {
        Term::Main(f) => Term::Main(c.position(*f).expect("factor in component") + 1),
        Term::Interaction(d) => Term::Interaction(d.relabel_within(c)),
        Term::Diagonal(d) => Term::Diagonal(d.relabel_within(c)),
        Term::Covariate { label, parts } => Term::Covariate {
            label: label.clone(),
            parts: parts
                .iter()
                .map(|p| super::CovariatePart {
                    d: p.d.relabel_within(c),
                    values: p.values.clone(),
                })
                .collect(),
        },
        Term::Csi { d, b, level } => Term::Csi {
            d: d.relabel_within(c),
            b: b.relabel_within(c),
            level: level.clone(),
        },
        other => other.clone(),
    }
}
