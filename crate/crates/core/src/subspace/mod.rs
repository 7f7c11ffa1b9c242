//! Log-affine models as integer subspaces of the cell space.
//!
//! A [`Subspace`] lives on the support of a table (cells that are not
//! structural zeros). It is generated by named [`Term`]s whose integer rows
//! are reduced to an independent generating set at construction.

mod analysis;
mod split;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::{self, SpanBuilder};
use crate::hypergraph::Complex;
use crate::table::Shape;
use crate::varset::VarSet;

pub use analysis::{ModelDecomposition, MAX_CLOSURE_FACTORS, MAX_DECOMPOSE_FACTORS};
pub use split::{split_model, split_terms, SplitClique, SplitSlice};

/// One additive covariate piece `phi(i_D)`; `values` is row-major over `I_D`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovariatePart {
    pub d: VarSet,
    pub values: Vec<i64>,
}

/// A named block of generators.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Constant,
    /// Indicators of the levels of one factor.
    Main(usize),
    /// Indicators of the `D`-marginal cells (the space `L_D`).
    Interaction(VarSet),
    /// A single generator `sum_p phi_p(i_{D_p})`.
    Covariate { label: String, parts: Vec<CovariatePart> },
    /// One indicator per level `l`: all factors of `D` at level `l`.
    Diagonal(VarSet),
    /// Context-specific interaction: indicators of `i_{D \ B}` times `1{i_B = j_B}`.
    /// `level` is 0-based and follows the increasing order of `B`.
    Csi { d: VarSet, b: VarSet, level: Vec<usize> },
    /// Arbitrary rows, dense over all cells of the table.
    Explicit { label: String, rows: Vec<Vec<i64>> },
}

impl Term {
    /// Factors the generators of this term depend on.
    pub fn factors(&self, m: usize) -> VarSet {
        match self {
            Term::Constant => VarSet::empty(),
            Term::Main(f) => VarSet::singleton(*f),
            Term::Interaction(d) | Term::Diagonal(d) => *d,
            Term::Covariate { parts, .. } => parts.iter().fold(VarSet::empty(), |a, p| a.union(p.d)),
            Term::Csi { d, b, .. } => d.union(*b),
            Term::Explicit { .. } => VarSet::full(m),
        }
    }

    /// True for terms whose rows are 0/1 indicators of disjoint cell sets.
    pub fn is_indicator_block(&self) -> bool {
        matches!(
            self,
            Term::Constant | Term::Main(_) | Term::Interaction(_) | Term::Diagonal(_) | Term::Csi { .. }
        )
    }

    pub fn describe(&self) -> String {
        match self {
            Term::Constant => "constant".into(),
            Term::Main(f) => format!("main({f})"),
            Term::Interaction(d) => format!("interaction{d}"),
            Term::Covariate { label, .. } => format!("covariate[{label}]"),
            Term::Diagonal(d) => format!("diag{d}"),
            Term::Csi { d, b, level } => {
                let lv: Vec<String> = level.iter().map(|l| (l + 1).to_string()).collect();
                format!("csi{d}|{b}={}", lv.join(","))
            }
            Term::Explicit { label, rows } => format!("explicit[{label}; {} rows]", rows.len()),
        }
    }

    fn validate(&self, shape: &Shape) -> Result<()> {
        let m = shape.m();
        let check = |d: VarSet| shape.check_factors(d);
        match self {
            Term::Constant => Ok(()),
            Term::Main(f) => {
                if *f == 0 || *f > m {
                    Err(Error::FactorOutOfRange { factor: *f, m })
                } else {
                    Ok(())
                }
            }
            Term::Interaction(d) => check(*d),
            Term::Diagonal(d) => {
                check(*d)?;
                if d.len() < 2 {
                    return Err(Error::InvalidModel(format!("diag term needs two or more factors, got {d}")));
                }
                Ok(())
            }
            Term::Covariate { label, parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidModel(format!("covariate {label} has no parts")));
                }
                for p in parts {
                    check(p.d)?;
                    let need = shape.marginal(p.d).num_cells();
                    if p.values.len() != need {
                        return Err(Error::InvalidModel(format!(
                            "covariate {label} on {} needs {need} values, got {}",
                            p.d,
                            p.values.len()
                        )));
                    }
                }
                Ok(())
            }
            Term::Csi { d, b, level } => {
                check(*d)?;
                check(*b)?;
                if level.len() != b.len() {
                    return Err(Error::InvalidModel(format!(
                        "csi term on {d} given {} levels for B = {b}",
                        level.len()
                    )));
                }
                for (f, &l) in b.iter().zip(level) {
                    if l >= shape.levels()[f - 1] {
                        return Err(Error::InvalidModel(format!(
                            "csi level {} exceeds the {} levels of factor {f}",
                            l + 1,
                            shape.levels()[f - 1]
                        )));
                    }
                }
                Ok(())
            }
            Term::Explicit { label, rows } => {
                if let Some(r) = rows.iter().find(|r| r.len() != shape.num_cells()) {
                    return Err(Error::InvalidModel(format!(
                        "explicit term {label}: row of length {} for {} cells",
                        r.len(),
                        shape.num_cells()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Generator rows, dense over all cells.
    pub fn dense_rows(&self, shape: &Shape) -> Vec<Vec<i64>> {
        let n = shape.num_cells();
        let indicator_rows = |d: VarSet, keep: &dyn Fn(&[usize]) -> bool| {
            let ms = shape.marginal(d);
            let map = shape.marginal_map(d);
            let mut rows = vec![vec![0i64; n]; ms.num_cells()];
            for (idx, &j) in map.iter().enumerate() {
                if keep(&shape.cell(idx)) {
                    rows[j][idx] = 1;
                }
            }
            rows
        };
        match self {
            Term::Constant => vec![vec![1; n]],
            Term::Main(f) => indicator_rows(VarSet::singleton(*f), &|_| true),
            Term::Interaction(d) => indicator_rows(*d, &|_| true),
            Term::Covariate { parts, .. } => {
                let mut row = vec![0i64; n];
                for p in parts {
                    let map = shape.marginal_map(p.d);
                    for (idx, &j) in map.iter().enumerate() {
                        row[idx] += p.values[j];
                    }
                }
                vec![row]
            }
            Term::Diagonal(d) => {
                let levels = d.iter().map(|f| shape.levels()[f - 1]).min().unwrap_or(0);
                (0..levels)
                    .map(|l| {
                        (0..n)
                            .map(|idx| {
                                let c = shape.cell(idx);
                                i64::from(d.iter().all(|f| c[f - 1] == l))
                            })
                            .collect()
                    })
                    .collect()
            }
            Term::Csi { d, b, level } => {
                let free = d.difference(*b);
                let on_slice = |c: &[usize]| b.iter().zip(level).all(|(f, &l)| c[f - 1] == l);
                indicator_rows(free, &on_slice)
            }
            Term::Explicit { rows, .. } => rows.clone(),
        }
    }
}

/// Integer generators of a log-affine model restricted to a support.
#[derive(Clone, Debug)]
pub struct Subspace {
    shape: Shape,
    mask: Vec<bool>,
    support: Vec<usize>,
    terms: Vec<Term>,
    term_rows: Vec<Vec<Vec<i64>>>,
    basis: Vec<Vec<i64>>,
}

impl Subspace {
    /// Builds the span of `terms` plus the constant on the cells not in `mask`.
    pub fn new(shape: Shape, mask: Option<Vec<bool>>, terms: Vec<Term>) -> Result<Self> {
        let mask = mask.unwrap_or_else(|| vec![false; shape.num_cells()]);
        if mask.len() != shape.num_cells() {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} entries for {} cells",
                mask.len(),
                shape.num_cells()
            )));
        }
        let support: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        if support.is_empty() {
            return Err(Error::InvalidModel("support is empty".into()));
        }
        let mut all_terms = Vec::with_capacity(terms.len() + 1);
        if !terms.iter().any(|t| matches!(t, Term::Constant)) {
            all_terms.push(Term::Constant);
        }
        all_terms.extend(terms);
        let mut term_rows = Vec::with_capacity(all_terms.len());
        let mut span = SpanBuilder::new(support.len());
        let mut basis = Vec::new();
        for t in &all_terms {
            t.validate(&shape)?;
            let rows: Vec<Vec<i64>> = t
                .dense_rows(&shape)
                .into_iter()
                .map(|r| support.iter().map(|&i| r[i]).collect::<Vec<i64>>())
                .filter(|r| r.iter().any(|&x| x != 0))
                .collect();
            for r in &rows {
                if span.push(r) {
                    basis.push(r.clone());
                }
            }
            term_rows.push(rows);
        }
        Ok(Subspace {
            shape,
            mask,
            support,
            terms: all_terms,
            term_rows,
            basis,
        })
    }

    pub fn builder(shape: Shape) -> SubspaceBuilder {
        SubspaceBuilder {
            shape,
            mask: None,
            terms: Vec::new(),
        }
    }

    /// `L_Delta`: the span of marginal indicators of every facet.
    pub fn hierarchical(shape: Shape, complex: &Complex, mask: Option<Vec<bool>>) -> Result<Self> {
        if complex.m() != shape.m() {
            return Err(Error::ShapeMismatch(format!(
                "complex on {} factors, table has {}",
                complex.m(),
                shape.m()
            )));
        }
        let terms = complex.facets().iter().map(|f| Term::Interaction(*f)).collect();
        Subspace::new(shape, mask, terms)
    }

    /// Builds a subspace from rows given over the support of `mask`.
    pub fn from_support_rows(shape: Shape, mask: Vec<bool>, label: &str, rows: Vec<Vec<i64>>) -> Result<Self> {
        let support: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        let dense = rows
            .into_iter()
            .map(|r| {
                let mut d = vec![0i64; shape.num_cells()];
                for (p, &i) in support.iter().enumerate() {
                    d[i] = r[p];
                }
                d
            })
            .collect();
        Subspace::new(
            shape,
            Some(mask),
            vec![Term::Explicit {
                label: label.to_string(),
                rows: dense,
            }],
        )
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn m(&self) -> usize {
        self.shape.m()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn has_mask(&self) -> bool {
        self.mask.iter().any(|&z| z)
    }

    /// Dense indices of the support cells, increasing.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Rows of each term restricted to the support (all-zero rows dropped).
    pub fn term_rows(&self) -> &[Vec<Vec<i64>>] {
        &self.term_rows
    }

    /// Independent generators over the support.
    pub fn basis(&self) -> &[Vec<i64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_saturated_model(&self) -> bool {
        self.dim() == self.support.len()
    }

    /// Expands a row over the support to all cells (zero on the mask).
    pub fn to_dense(&self, row: &[i64]) -> Vec<i64> {
        let mut d = vec![0; self.shape.num_cells()];
        for (p, &i) in self.support.iter().enumerate() {
            d[i] = row[p];
        }
        d
    }

    pub fn configuration(&self) -> Configuration {
        Configuration {
            shape: self.shape.clone(),
            support: self.support.clone(),
            rows: self.basis.clone(),
        }
    }

    /// True if every generator of `self` lies in `other` (same shape and mask).
    pub fn is_subspace_of(&self, other: &Subspace) -> Result<bool> {
        self.same_frame(other)?;
        let mut span = SpanBuilder::new(self.support.len());
        for r in &other.basis {
            span.push(r);
        }
        Ok(self.basis.iter().all(|r| span.contains(r)))
    }

    pub(crate) fn same_frame(&self, other: &Subspace) -> Result<()> {
        if self.shape != other.shape || self.mask != other.mask {
            return Err(Error::ShapeMismatch(
                "subspaces live on different shapes or supports".into(),
            ));
        }
        Ok(())
    }

    /// Rank of the stacked generators of both subspaces.
    pub fn dim_of_sum(&self, other: &Subspace) -> Result<usize> {
        self.same_frame(other)?;
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        Ok(exact::rank(&rows, self.support.len()))
    }
}

pub struct SubspaceBuilder {
    shape: Shape,
    mask: Option<Vec<bool>>,
    terms: Vec<Term>,
}

impl SubspaceBuilder {
    pub fn mask(mut self, mask: Vec<bool>) -> Self {
        if mask.iter().any(|&z| z) {
            self.mask = Some(mask);
        }
        self
    }

    pub fn term(mut self, t: Term) -> Self {
        self.terms.push(t);
        self
    }

    pub fn main_effects(mut self) -> Self {
        for f in 1..=self.shape.m() {
            self.terms.push(Term::Main(f));
        }
        self
    }

    pub fn interaction(self, d: VarSet) -> Self {
        self.term(Term::Interaction(d))
    }

    pub fn hierarchical(mut self, complex: &Complex) -> Self {
        for f in complex.facets() {
            self.terms.push(Term::Interaction(*f));
        }
        self
    }

    pub fn covariate(self, label: &str, parts: Vec<CovariatePart>) -> Self {
        self.term(Term::Covariate {
            label: label.to_string(),
            parts,
        })
    }

    /// `phi(i_D) = prod_j i_j` with 1-based levels.
    pub fn uniform_association(self, d: VarSet) -> Self {
        let part = uniform_association(&self.shape, d);
        self.covariate(&format!("uniform{d}"), vec![part])
    }

    /// `phi(i_D) = 1` when every `i_j <= cut_j` (1-based cut points).
    pub fn change_point(self, d: VarSet, cut: &[usize]) -> Self {
        let part = change_point(&self.shape, d, cut);
        self.covariate(&format!("change_point{d}"), vec![part])
    }

    pub fn diagonal(self, d: VarSet) -> Self {
        self.term(Term::Diagonal(d))
    }

    pub fn csi(self, d: VarSet, b: VarSet, level: Vec<usize>) -> Self {
        self.term(Term::Csi { d, b, level })
    }

    pub fn build(self) -> Result<Subspace> {
        Subspace::new(self.shape, self.mask, self.terms)
    }
}

pub fn uniform_association(shape: &Shape, d: VarSet) -> CovariatePart {
    let ms = shape.marginal(d);
    let values = ms
        .cells()
        .map(|c| c.iter().map(|&l| l as i64 + 1).product())
        .collect();
    CovariatePart { d, values }
}

pub fn change_point(shape: &Shape, d: VarSet, cut: &[usize]) -> CovariatePart {
    let ms = shape.marginal(d);
    let values = ms
        .cells()
        .map(|c| i64::from(c.iter().zip(cut).all(|(&l, &k)| l < k)))
        .collect();
    CovariatePart { d, values }
}

/// The integer matrix `A` of a model, with columns indexed by support cells.
#[derive(Clone, Debug)]
pub struct Configuration {
    shape: Shape,
    support: Vec<usize>,
    rows: Vec<Vec<i64>>,
}

impl Configuration {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    /// `A x` for a dense table (masked cells are ignored).
    pub fn apply_dense(&self, x: &[i64]) -> Vec<i64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(&self.support).map(|(a, &i)| a * x[i]).sum())
            .collect()
    }

    /// `A z` for a sparse vector keyed by dense cell index. Entries on cells
    /// outside the support make the result `None`.
    pub fn apply_sparse(&self, entries: &[(usize, i64)]) -> Option<Vec<i64>> {
        let mut pos = Vec::with_capacity(entries.len());
        for &(c, v) in entries {
            pos.push((self.support.binary_search(&c).ok()?, v));
        }
        Some(
            self.rows
                .iter()
                .map(|r| pos.iter().map(|&(p, v)| r[p] * v).sum())
                .collect(),
        )
    }

    /// Stable hash of the shape, the support and the row space of `A`.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{:?}\n", self.shape.levels()));
        h.update(format!("{:?}\n", self.support));
        h.update(exact::canonical_row_space(&self.rows, self.support.len()));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
