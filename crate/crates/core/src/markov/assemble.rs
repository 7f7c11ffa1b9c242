//! Lifting of component bases and their assembly along a perfect sequence.

use std::collections::{BTreeMap, HashSet};

use log::{debug, warn};

use super::base::two_clique_basis;
use super::{MarkovBasis, Move};
use crate::error::{Error, Result};
use crate::hypergraph::Complex;
use crate::subspace::{Subspace, Term, MAX_CLOSURE_FACTORS, MAX_DECOMPOSE_FACTORS};
use crate::table::Shape;
use crate::varset::VarSet;

#[derive(Clone, Copy, Debug)]
pub struct BasisOptions {
    /// Use a lattice basis (flagged uncertified) for components without a
    /// known construction instead of failing.
    pub allow_lattice: bool,
    /// Upper bound on the number of lifted moves produced by one `ext` call.
    pub max_lifts: usize,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            allow_lattice: false,
            max_lifts: 2_000_000,
        }
    }
}

fn sub_shape(shape: &Shape, d: VarSet) -> Shape {
    if d.is_empty() {
        Shape::scalar()
    } else if d == shape.all_factors() {
        shape.clone()
    } else {
        shape.marginal(d)
    }
}

/// Row-major offsets inside the `w`-marginal contributed by the coordinates
/// of each cell of the `part`-marginal (`part ⊆ w`).
fn offsets(shape: &Shape, w: VarSet, part: VarSet) -> Vec<usize> {
    let wf = w.to_vec();
    let mut stride = vec![1usize; wf.len()];
    for p in (0..wf.len().saturating_sub(1)).rev() {
        stride[p] = stride[p + 1] * shape.levels()[wf[p + 1] - 1];
    }
    let ps = sub_shape(shape, part);
    let pos: Vec<usize> = part.iter().map(|f| w.position(f).expect("part inside w")).collect();
    (0..ps.num_cells())
        .map(|c| {
            let coords = if part.is_empty() { vec![] } else { ps.cell(c) };
            coords.iter().zip(&pos).map(|(&x, &p)| x * stride[p]).sum()
        })
        .collect()
}

/// Lifts moves on the `v`-marginal to the `w`-marginal (`v ⊆ w`, labels of
/// `shape`). Positive and negative cells of each move are paired by their
/// `s`-coordinates, and every pair receives its own level of the new
/// factors `w \ v`. Lifts that touch a structural zero of `w_mask` are
/// dropped.
pub fn ext(
    shape: &Shape,
    v: VarSet,
    basis: &MarkovBasis,
    w: VarSet,
    s: VarSet,
    w_mask: &[bool],
    max_lifts: usize,
) -> Result<Vec<Move>> {
    if !v.is_subset(w) || !s.is_subset(v) {
        return Err(Error::Internal(format!("bad lift {v} -> {w} over {s}")));
    }
    let a = w.difference(v);
    let vshape = sub_shape(shape, v);
    let off_v = offsets(shape, w, v);
    let off_a = offsets(shape, w, a);
    let s_pos: Vec<usize> = s.iter().map(|f| v.position(f).unwrap()).collect();
    let s_key = |c: usize| -> Vec<usize> {
        let coords = vshape.cell(c);
        s_pos.iter().map(|&p| coords[p]).collect()
    };
    let levels = off_a.len();
    let mut out: HashSet<Move> = HashSet::new();
    for (index, mv) in basis.moves().iter().enumerate() {
        let (pos, neg) = mv.split();
        let mut groups: BTreeMap<Vec<usize>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for c in pos {
            groups.entry(s_key(c)).or_default().0.push(c);
        }
        for c in neg {
            groups.entry(s_key(c)).or_default().1.push(c);
        }
        let mut pairs = Vec::new();
        for (_, (p, n)) in groups {
            if p.len() != n.len() {
                return Err(Error::InvalidMove {
                    index,
                    residual: p.len() as i64 - n.len() as i64,
                });
            }
            pairs.extend(p.into_iter().zip(n));
        }
        let d = pairs.len() as u32;
        let count = (levels as u128).checked_pow(d).unwrap_or(u128::MAX);
        if count + out.len() as u128 > max_lifts as u128 {
            return Err(Error::CapExceeded { cap: max_lifts });
        }
        let mut k = vec![0usize; pairs.len()];
        'tuples: loop {
            let mut entries = Vec::with_capacity(2 * pairs.len());
            let mut ok = true;
            for (t, &(p, n)) in pairs.iter().enumerate() {
                let cp = off_v[p] + off_a[k[t]];
                let cn = off_v[n] + off_a[k[t]];
                if w_mask[cp] || w_mask[cn] {
                    ok = false;
                    break;
                }
                entries.push((cp, 1));
                entries.push((cn, -1));
            }
            if ok {
                if let Some(m) = Move::new(entries) {
                    out.insert(m);
                }
            }
            for t in 0..k.len() {
                k[t] += 1;
                if k[t] < levels {
                    continue 'tuples;
                }
                k[t] = 0;
            }
            break;
        }
    }
    Ok(out.into_iter().collect())
}

/// Assembles a basis of `model` from bases of its component models along
/// a perfect sequence `components` (each `S_k = (C_1 ∪ … ∪ C_{k-1}) ∩ C_k`).
/// `component_bases[k]` lives on the `C_k`-marginal.
pub fn assemble(model: &Subspace, components: &[VarSet], component_bases: &[MarkovBasis], opts: &BasisOptions) -> Result<MarkovBasis> {
    if components.is_empty() || components.len() != component_bases.len() {
        return Err(Error::Internal("one basis per component is required".into()));
    }
    let shape = model.shape();
    let mut h = components[0];
    let mut basis_h = component_bases[0].clone();
    for (&c, bc) in components.iter().zip(component_bases).skip(1) {
        let w = h.union(c);
        let s = h.intersection(c);
        let w_mask = model.marginal_mask(w);
        let wshape = sub_shape(shape, w);
        let mut moves = ext(shape, h, &basis_h, w, s, &w_mask, opts.max_lifts)?;
        moves.extend(ext(shape, c, bc, w, s, &w_mask, opts.max_lifts)?);
        let two = two_clique_basis(&wshape, &w_mask, h.relabel_within(w), c.relabel_within(w))?;
        moves.extend(two.moves().iter().cloned());
        let certified = basis_h.is_certified() && bc.is_certified();
        basis_h = MarkovBasis::new(wshape, w_mask, moves);
        if !certified {
            basis_h = basis_h.mark_uncertified();
        }
        debug!("assembled {} moves on {w}", basis_h.len());
        h = w;
    }
    if h != shape.all_factors() {
        return Err(Error::Internal(format!("components cover only {h}")));
    }
    basis_h.validate(&model.configuration())?;
    Ok(basis_h)
}

/// The complex `Δ` with `L = L_Δ` on the support, if `L` is hierarchical.
fn hierarchical_complex(l: &Subspace) -> Result<Option<Complex>> {
    let m = l.m();
    let candidate = if !l.has_mask() && m <= MAX_CLOSURE_FACTORS {
        l.hierarchical_closure()?
    } else {
        let mut sets = Vec::new();
        for (t, rows) in l.terms().iter().zip(l.term_rows()) {
            if rows.is_empty() {
                continue;
            }
            match t {
                Term::Constant => {}
                Term::Main(f) => sets.push(VarSet::singleton(*f)),
                Term::Interaction(d) => sets.push(*d),
                Term::Csi { d, b, .. } if b.is_empty() => sets.push(*d),
                _ => return Ok(None),
            }
        }
        Complex::new(m, sets)?
    };
    let ld = Subspace::hierarchical(l.shape().clone(), &candidate, Some(l.mask().to_vec()))?;
    Ok((ld.dim() == l.dim() && l.is_subspace_of(&ld)?).then_some(candidate))
}

/// Builds a Markov basis for `model`: directly for hierarchical decomposable
/// models, by assembly over connected components or maximal compact
/// components, and as a union of slice bases for models that split along
/// the levels of one factor.
pub fn auto_basis(model: &Subspace, opts: &BasisOptions) -> Result<MarkovBasis> {
    let b = basis_in_frame(model, model.shape().all_factors(), opts)?;
    b.validate(&model.configuration())?;
    Ok(b)
}

fn basis_in_frame(l: &Subspace, frame: VarSet, opts: &BasisOptions) -> Result<MarkovBasis> {
    let shape = l.shape().clone();
    let mask = l.mask().to_vec();
    if l.is_saturated_model() {
        return Ok(MarkovBasis::empty(shape, mask));
    }
    let m = l.m();
    if let Some(delta) = hierarchical_complex(l)? {
        if delta.is_acyclic() {
            let jt = delta.junction_tree()?;
            if jt.components.len() == 2 {
                return two_clique_basis(&shape, &mask, jt.components[0], jt.components[1]);
            }
            if !l.has_mask() || l.junction_steps_factorize(&jt) {
                let empties: Vec<MarkovBasis> = jt
                    .components
                    .iter()
                    .map(|&c| MarkovBasis::empty(sub_shape(&shape, c), l.marginal_mask(c)))
                    .collect();
                return assemble(l, &jt.components, &empties, opts);
            }
        }
    }
    if m >= 2 && m <= MAX_DECOMPOSE_FACTORS {
        let comps = l.connected_components()?;
        let parts = if comps.len() > 1 {
            Some(comps)
        } else {
            let d = l.decompose()?;
            (d.components.len() > 1 && l.junction_steps_factorize(&d.as_decomposition())).then_some(d.components)
        };
        if let Some(parts) = parts {
            let mut bases = Vec::with_capacity(parts.len());
            for &c in &parts {
                let sub = l.component_model(c)?;
                bases.push(basis_in_frame(&sub, c.unlabel_within(frame), opts)?);
            }
            return assemble(l, &parts, &bases, opts);
        }
        if let Some(f) = l.slice_partition_factor()? {
            return slice_union(l, f, frame, opts);
        }
    }
    if opts.allow_lattice {
        warn!("no Markov basis construction for the model on {frame}; using a lattice basis");
        return MarkovBasis::lattice(l);
    }
    Err(Error::MissingComponentBasis(vec![frame]))
}

/// Union of the slice bases of a model that splits along factor `f`.
fn slice_union(l: &Subspace, f: usize, frame: VarSet, opts: &BasisOptions) -> Result<MarkovBasis> {
    let b = VarSet::singleton(f);
    let rest = frame.difference(VarSet::singleton(frame.to_vec()[f - 1]));
    let mut moves = Vec::new();
    let mut certified = true;
    for level in 0..l.shape().levels()[f - 1] {
        let (_, cells, smask) = l.slice_frame(b, &[level])?;
        if smask.iter().all(|&z| z) {
            continue;
        }
        let sm = l.slice_model(b, &[level])?;
        let sb = basis_in_frame(&sm, rest, opts)?;
        certified &= sb.is_certified();
        for mv in sb.moves() {
            moves.extend(Move::new(mv.entries().iter().map(|&(c, v)| (cells[c], v))));
        }
    }
    let out = MarkovBasis::new(l.shape().clone(), l.mask().to_vec(), moves);
    Ok(if certified { out } else { out.mark_uncertified() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_counts_lifts() {
        // Degree-2 move on a 2x2 marginal lifted over a 3-level factor.
        let shape = Shape::new(vec![2, 2, 3]).unwrap();
        let v = VarSet::of(&[1, 2]);
        let vb = MarkovBasis::new(
            shape.marginal(v),
            vec![false; 4],
            Move::new([(0, 1), (3, 1), (1, -1), (2, -1)]),
        );
        let lifts = ext(&shape, v, &vb, shape.all_factors(), VarSet::of(&[2]), &vec![false; 12], 1000).unwrap();
        assert_eq!(lifts.len(), 9);
    }

    #[test]
    fn unpaired_move_is_rejected() {
        let shape = Shape::new(vec![2, 2, 2]).unwrap();
        let v = VarSet::of(&[1, 2]);
        // Moves mass between the two levels of factor 2.
        let vb = MarkovBasis::new(shape.marginal(v), vec![false; 4], Move::new([(0, 1), (1, -1)]));
        let err = ext(&shape, v, &vb, shape.all_factors(), VarSet::of(&[2]), &vec![false; 8], 1000).unwrap_err();
        assert!(matches!(err, Error::InvalidMove { .. }));
    }

    #[test]
    fn common_association_has_no_known_basis() {
        let shape = Shape::new(vec![3, 3]).unwrap();
        let l = Subspace::builder(shape).main_effects().uniform_association(VarSet::of(&[1, 2])).build().unwrap();
        assert!(matches!(auto_basis(&l, &BasisOptions::default()), Err(Error::MissingComponentBasis(_))));
        let lat = auto_basis(&l, &BasisOptions { allow_lattice: true, ..Default::default() }).unwrap();
        assert!(!lat.is_certified());
    }
}
