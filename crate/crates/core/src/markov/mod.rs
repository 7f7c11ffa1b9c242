//! Moves, Markov bases and their construction for hierarchical subspace
//! models.

mod assemble;
mod base;
pub mod fiber;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::exact;
use crate::subspace::{Configuration, Subspace};
use crate::table::{one_based, Shape};
use crate::varset::VarSet;

pub use assemble::{assemble, auto_basis, ext, BasisOptions};
pub use base::{chordless_cycle_moves, quasi_independence, two_clique_basis};

/// An integer table with zero sufficient statistic, stored sparsely by
/// dense cell index. The sign is normalized so that the entry on the
/// smallest cell is positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    entries: Vec<(usize, i64)>,
}

impl Move {
    /// Builds a move from (cell, value) pairs; repeated cells are summed and
    /// zeros dropped. Returns `None` for the zero vector.
    pub fn new(entries: impl IntoIterator<Item = (usize, i64)>) -> Option<Move> {
        let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
        for (c, v) in entries {
            *acc.entry(c).or_insert(0) += v;
        }
        let mut e: Vec<(usize, i64)> = acc.into_iter().filter(|&(_, v)| v != 0).collect();
        if e.is_empty() {
            return None;
        }
        if e[0].1 < 0 {
            for x in e.iter_mut() {
                x.1 = -x.1;
            }
        }
        Some(Move { entries: e })
    }

    pub fn entries(&self) -> &[(usize, i64)] {
        &self.entries
    }

    /// Sum of the positive entries.
    pub fn degree(&self) -> u64 {
        self.entries.iter().filter(|e| e.1 > 0).map(|e| e.1 as u64).sum()
    }

    pub fn to_dense(&self, cells: usize) -> Vec<i64> {
        let mut d = vec![0; cells];
        for &(c, v) in &self.entries {
            d[c] = v;
        }
        d
    }

    /// Positive and negative cells, each repeated by multiplicity.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &(c, v) in &self.entries {
            let list = if v > 0 { &mut pos } else { &mut neg };
            for _ in 0..v.unsigned_abs() {
                list.push(c);
            }
        }
        (pos, neg)
    }

    /// Bracket notation `[{cells}||{cells}]` with 1-based coordinates.
    pub fn display(&self, shape: &Shape) -> String {
        let (p, n) = self.split();
        let f = |v: &[usize]| {
            v.iter()
                .map(|&c| {
                    let s: Vec<String> = one_based(&shape.cell(c)).iter().map(|x| x.to_string()).collect();
                    format!("({})", s.join(","))
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("[{{{}}}||{{{}}}]", f(&p), f(&n))
    }
}

/// A set of moves for one configuration.
#[derive(Clone, Debug)]
pub struct MarkovBasis {
    shape: Shape,
    mask: Vec<bool>,
    moves: Vec<Move>,
    certified: bool,
}

impl MarkovBasis {
    /// Deduplicates and sorts `moves`.
    pub fn new(shape: Shape, mask: Vec<bool>, moves: impl IntoIterator<Item = Move>) -> MarkovBasis {
        let set: HashSet<Move> = moves.into_iter().collect();
        let mut moves: Vec<Move> = set.into_iter().collect();
        moves.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| a.cmp(b)));
        MarkovBasis {
            shape,
            mask,
            moves,
            certified: true,
        }
    }

    pub fn empty(shape: Shape, mask: Vec<bool>) -> MarkovBasis {
        MarkovBasis::new(shape, mask, [])
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// False for lattice bases that are not known to connect fibers.
    pub fn is_certified(&self) -> bool {
        self.certified
    }

    pub fn mark_uncertified(mut self) -> Self {
        self.certified = false;
        self
    }

    pub fn max_degree(&self) -> u64 {
        self.moves.iter().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Checks `A z = 0` and that no move touches a structural zero.
    pub fn validate(&self, config: &Configuration) -> Result<()> {
        if config.shape() != &self.shape {
            return Err(Error::ShapeMismatch("basis and configuration shapes differ".into()));
        }
        for (index, m) in self.moves.iter().enumerate() {
            match config.apply_sparse(m.entries()) {
                None => {
                    return Err(Error::InvalidMove {
                        index,
                        residual: i64::MAX,
                    })
                }
                Some(r) => {
                    let worst = r.iter().map(|v| v.abs()).max().unwrap_or(0);
                    if worst != 0 {
                        return Err(Error::InvalidMove { index, residual: worst });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn union(&self, other: &MarkovBasis) -> Result<MarkovBasis> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("bases live on different shapes".into()));
        }
        let mut b = MarkovBasis::new(
            self.shape.clone(),
            self.mask.clone(),
            self.moves.iter().chain(other.moves.iter()).cloned(),
        );
        b.certified = self.certified && other.certified;
        Ok(b)
    }

    /// Moves supported entirely on the slice `i_B = level` (0-based levels).
    pub fn restrict_to_slice(&self, b: VarSet, level: &[usize]) -> Result<MarkovBasis> {
        self.shape.check_factors(b)?;
        let keep = |c: usize| {
            let cell = self.shape.cell(c);
            b.iter().zip(level).all(|(f, &l)| cell[f - 1] == l)
        };
        let moves = self.moves.iter().filter(|m| m.entries.iter().all(|&(c, _)| keep(c))).cloned();
        let mut out = MarkovBasis::new(self.shape.clone(), self.mask.clone(), moves);
        out.certified = self.certified;
        Ok(out)
    }

    fn support(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| !self.mask[i]).collect()
    }

    /// Text format: a line `R C`, then one move per row over the support
    /// cells in row-major order.
    pub fn to_text(&self) -> String {
        let support = self.support();
        let mut out = format!("{} {}\n", self.moves.len(), support.len());
        for m in &self.moves {
            let dense = m.to_dense(self.shape.num_cells());
            let row: Vec<String> = support.iter().map(|&i| dense[i].to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the text format against a model and validates every move.
    pub fn from_text(text: &str, model: &Subspace) -> Result<MarkovBasis> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty basis file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        if dims.len() != 2 {
            return Err(Error::Parse(format!("header must be \"R C\", got {header:?}")));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let support = model.support();
        if cols != support.len() {
            return Err(Error::ShapeMismatch(format!(
                "basis has {cols} columns, model support has {} cells",
                support.len()
            )));
        }
        let config = model.configuration();
        let mut moves = Vec::with_capacity(rows);
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {rows} rows, found {r}")))?;
            let vals: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("row {}: bad entry {t:?}", r + 1))))
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(Error::Parse(format!("row {}: {} entries, expected {cols}", r + 1, vals.len())));
            }
            let entries: Vec<(usize, i64)> = support.iter().zip(&vals).map(|(&c, &v)| (c, v)).collect();
            let az = config.apply_sparse(&entries).expect("support cells");
            if let Some(worst) = az.iter().map(|v| v.abs()).max().filter(|&w| w != 0) {
                return Err(Error::InvalidMove {
                    index: r,
                    residual: worst,
                });
            }
            if let Some(m) = Move::new(entries) {
                moves.push(m);
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse(format!("more than {rows} rows in basis file")));
        }
        Ok(MarkovBasis::new(model.shape().clone(), model.mask().to_vec(), moves))
    }

    /// A lattice basis of `ker A`; it generates the lattice but need not
    /// connect fibers.
    pub fn lattice(model: &Subspace) -> Result<MarkovBasis> {
        let support = model.support();
        let kernel = exact::nullspace(model.basis(), support.len())?;
        let moves = kernel
            .into_iter()
            .filter_map(|v| Move::new(support.iter().zip(v).map(|(&c, x)| (c, x))));
        Ok(MarkovBasis::new(model.shape().clone(), model.mask().to_vec(), moves).mark_uncertified())
    }
}

impl fmt::Display for MarkovBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.moves {
            writeln!(f, "{}", m.display(&self.shape))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indep22() -> Subspace {
        Subspace::builder(Shape::new(vec![2, 2]).unwrap()).main_effects().build().unwrap()
    }

    #[test]
    fn canonical_sign() {
        let a = Move::new([(0, -1), (1, 1), (2, 1), (3, -1)]).unwrap();
        let b = Move::new([(0, 1), (1, -1), (2, -1), (3, 1)]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.degree(), 2);
        assert!(Move::new([(0, 1), (0, -1)]).is_none());
    }

    #[test]
    fn text_round_trip() {
        let l = indep22();
        let b = MarkovBasis::from_text("1 4\n1 -1 -1 1\n", &l).unwrap();
        assert_eq!(b.len(), 1);
        let again = MarkovBasis::from_text(&b.to_text(), &l).unwrap();
        assert_eq!(again.moves(), b.moves());
        assert_eq!(b.to_string().trim(), "[{(1,1),(2,2)}||{(1,2),(2,1)}]");
    }

    #[test]
    fn bad_row_is_rejected() {
        let err = MarkovBasis::from_text("1 4\n1 -1 0 0\n", &indep22()).unwrap_err();
        assert!(matches!(err, Error::InvalidMove { index: 0, .. }));
        assert!(MarkovBasis::from_text("1 3\n1 -1 0\n", &indep22()).is_err());
    }

    #[test]
    fn lattice_basis_is_flagged() {
        let b = MarkovBasis::lattice(&indep22()).unwrap();
        assert_eq!(b.len(), 1);
        assert!(!b.is_certified());
    }
}
