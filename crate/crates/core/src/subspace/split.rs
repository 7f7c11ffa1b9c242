//! Split models of degree one: a decomposable root whose cliques carry
//! slice-specific decomposable interaction structure.

use super::{Subspace, Term};
use crate::error::{Error, Result};
use crate::exact::SpanBuilder;
use crate::hypergraph::Complex;
use crate::table::Shape;
use crate::varset::VarSet;

/// Interaction facets used inside one slice `i_Z = level` (0-based levels,
/// increasing order of `Z`). An empty facet list keeps only the slice total.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSlice {
    pub level: Vec<usize>,
    pub facets: Vec<VarSet>,
}

/// One root clique `C` with its split set `Z(C)` and a slice structure for
/// every level of `I_Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitClique {
    pub clique: VarSet,
    pub z: VarSet,
    pub slices: Vec<SplitSlice>,
}

impl SplitClique {
    /// A clique that is not split: `N_C = L_C`.
    pub fn whole(clique: VarSet) -> Self {
        SplitClique {
            clique,
            z: VarSet::empty(),
            slices: vec![SplitSlice {
                level: vec![],
                facets: vec![clique],
            }],
        }
    }
}

fn slice_terms(c: &SplitClique, s: &SplitSlice) -> Vec<Term> {
    if s.facets.is_empty() {
        return vec![Term::Csi {
            d: VarSet::empty(),
            b: c.z,
            level: s.level.clone(),
        }];
    }
    s.facets
        .iter()
        .map(|&d| {
            if c.z.is_empty() {
                Term::Interaction(d)
            } else {
                Term::Csi {
                    d,
                    b: c.z,
                    level: s.level.clone(),
                }
            }
        })
        .collect()
}

/// Validates a degree-one split specification and returns its CSI terms.
pub fn split_terms(shape: &Shape, cliques: &[SplitClique]) -> Result<Vec<Term>> {
    let m = shape.m();
    if cliques.is_empty() {
        return Err(Error::InvalidModel("split model needs at least one clique".into()));
    }
    let root = Complex::new(m, cliques.iter().map(|c| c.clique))?;
    if root.facets().len() != cliques.len() || cliques.iter().any(|c| !root.facets().contains(&c.clique)) {
        return Err(Error::InvalidModel(
            "root cliques must be distinct, maximal and cover every factor".into(),
        ));
    }
    if !root.is_acyclic() {
        return Err(Error::InvalidModel("root cliques are not decomposable".into()));
    }
    let mut terms = Vec::new();
    for c in cliques {
        shape.check_factors(c.clique)?;
        if !c.z.is_subset(c.clique) {
            return Err(Error::InvalidModel(format!("split set {} is not inside {}", c.z, c.clique)));
        }
        let free = c.clique.difference(c.z);
        let zshape = if c.z.is_empty() { Shape::scalar() } else { shape.marginal(c.z) };
        let mut seen = vec![false; zshape.num_cells()];
        for s in &c.slices {
            if s.level.len() != c.z.len() {
                return Err(Error::InvalidModel(format!(
                    "slice of {} has {} levels for Z = {}",
                    c.clique,
                    s.level.len(),
                    c.z
                )));
            }
            for (f, &l) in c.z.iter().zip(&s.level) {
                if l >= shape.levels()[f - 1] {
                    return Err(Error::InvalidModel(format!("level {} out of range for factor {f}", l + 1)));
                }
            }
            let idx = if c.z.is_empty() { 0 } else { zshape.index(&s.level) };
            if seen[idx] {
                return Err(Error::InvalidModel(format!("slice {:?} of {} given twice", s.level, c.clique)));
            }
            seen[idx] = true;
            if let Some(d) = s.facets.iter().find(|d| !d.is_subset(free)) {
                return Err(Error::InvalidModel(format!(
                    "slice facet {d} of {} leaves C \\ Z = {free}",
                    c.clique
                )));
            }
            if !s.facets.is_empty() && !Complex::new(m, s.facets.iter().copied())?.is_acyclic() {
                return Err(Error::InvalidModel(format!("slice complex of {} is not decomposable", c.clique)));
            }
            // Every intersection with another clique must fit inside one slice facet.
            for other in cliques.iter().filter(|o| o.clique != c.clique) {
                let need = c.clique.intersection(other.clique).difference(c.z);
                let covered = need.is_empty() || s.facets.iter().any(|d| need.is_subset(*d));
                if !covered {
                    return Err(Error::SplitCondition {
                        clique: c.clique,
                        other: other.clique,
                        reason: format!(
                            "no slice facet at level {:?} contains {need}",
                            s.level.iter().map(|l| l + 1).collect::<Vec<_>>()
                        ),
                    });
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            let lv: Vec<usize> = zshape.cell(missing).iter().map(|l| l + 1).collect();
            return Err(Error::InvalidModel(format!("clique {} has no slice for Z level {lv:?}", c.clique)));
        }
        for s in &c.slices {
            let own = slice_terms(c, s);
            check_saturation(shape, c, s, &own, cliques)?;
            terms.extend(own);
        }
    }
    Ok(terms)
}

/// Exact check that `L_{C∩C'}^{j_Z}` lies in the slice space `N_C^{j_Z}`.
fn check_saturation(shape: &Shape, c: &SplitClique, s: &SplitSlice, own: &[Term], all: &[SplitClique]) -> Result<()> {
    let mut span = SpanBuilder::new(shape.num_cells());
    for t in own {
        for r in t.dense_rows(shape) {
            span.push(&r);
        }
    }
    for other in all.iter().filter(|o| o.clique != c.clique) {
        let inter = c.clique.intersection(other.clique).difference(c.z);
        let probe = Term::Csi {
            d: inter,
            b: c.z,
            level: s.level.clone(),
        };
        if !probe.dense_rows(shape).iter().all(|r| span.contains(r)) {
            return Err(Error::SplitCondition {
                clique: c.clique,
                other: other.clique,
                reason: "intersection interaction is not contained in the slice model".into(),
            });
        }
    }
    Ok(())
}

/// Builds the split model `sum_C sum_j N_C^j` together with any extra terms.
pub fn split_model(shape: Shape, mask: Option<Vec<bool>>, cliques: &[SplitClique], extra: Vec<Term>) -> Result<Subspace> {
    let mut terms = split_terms(&shape, cliques)?;
    terms.extend(extra);
    Subspace::new(shape, mask, terms)
}
