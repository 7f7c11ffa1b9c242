//! Base-case bases: two-way quasi-independence and two-clique hierarchical
//! models, possibly with structural zeros.

use super::{MarkovBasis, Move};
use crate::error::{Error, Result};
use crate::table::Shape;
use crate::varset::VarSet;

/// Binomial moves of the chordless cycles of the bipartite graph with an
/// edge `(r, c)` for every available cell. Each move is returned as
/// `(row, col, ±1)` triples. These generate the toric ideal of the graph,
/// so they form a Markov basis for quasi-independence on that support.
pub fn chordless_cycle_moves(rows: usize, cols: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<(usize, usize, i64)>> {
    let adj: Vec<Vec<bool>> = (0..rows).map(|r| (0..cols).map(|c| edge(r, c)).collect()).collect();
    let complete = adj.iter().all(|row| row.iter().all(|&e| e));
    let mut out = Vec::new();
    if complete {
        for r1 in 0..rows {
            for r2 in r1 + 1..rows {
                for c1 in 0..cols {
                    for c2 in c1 + 1..cols {
                        out.push(vec![(r1, c1, 1), (r2, c2, 1), (r1, c2, -1), (r2, c1, -1)]);
                    }
                }
            }
        }
        return out;
    }
    // Induced paths r0 c1 r1 c2 ... starting from their smallest row.
    for r0 in 0..rows {
        let mut path_rows = vec![r0];
        let mut path_cols: Vec<usize> = Vec::new();
        extend(&adj, &mut path_rows, &mut path_cols, &mut out);
    }
    out
}

fn extend(adj: &[Vec<bool>], prow: &mut Vec<usize>, pcol: &mut Vec<usize>, out: &mut Vec<Vec<(usize, usize, i64)>>) {
    let r0 = prow[0];
    let last_row = *prow.last().unwrap();
    let cols = adj[0].len();
    // Append a column adjacent to the last row.
    for c in 0..cols {
        if !adj[last_row][c] || pcol.contains(&c) {
            continue;
        }
        // No chords to earlier rows except the start, which closes the cycle.
        let inner: &[usize] = if prow.len() > 1 { &prow[1..prow.len() - 1] } else { &[] };
        if inner.iter().any(|&r| adj[r][c]) {
            continue;
        }
        let closes = prow.len() > 1 && adj[r0][c];
        if prow.len() == 1 {
            if pcol.is_empty() {
                pcol.push(c);
                extend_row(adj, prow, pcol, out);
                pcol.pop();
            }
            continue;
        }
        if closes {
            // Cycle r0 c1 r1 ... r_{k-1} c_k r0 with k >= 2; orient each cycle once.
            if pcol[0] < c {
                let mut mv = Vec::with_capacity(2 * prow.len());
                for (t, &r) in prow.iter().enumerate() {
                    let c_in = if t == 0 { c } else { pcol[t - 1] };
                    let c_out = pcol.get(t).copied().unwrap_or(c);
                    mv.push((r, c_out, 1));
                    mv.push((r, c_in, -1));
                }
                out.push(mv);
            }
            continue;
        }
        pcol.push(c);
        extend_row(adj, prow, pcol, out);
        pcol.pop();
    }
}

fn extend_row(adj: &[Vec<bool>], prow: &mut Vec<usize>, pcol: &mut Vec<usize>, out: &mut Vec<Vec<(usize, usize, i64)>>) {
    let r0 = prow[0];
    let last_col = *pcol.last().unwrap();
    for r in r0 + 1..adj.len() {
        if !adj[r][last_col] || prow.contains(&r) {
            continue;
        }
        if pcol[..pcol.len() - 1].iter().any(|&c| adj[r][c]) {
            continue;
        }
        prow.push(r);
        extend(adj, prow, pcol, out);
        prow.pop();
    }
}

/// Markov basis of the two-way quasi-independence model: an `I×J` table
/// with structural zeros given by `mask`.
pub fn quasi_independence(shape: &Shape, mask: &[bool]) -> Result<MarkovBasis> {
    if shape.m() != 2 {
        return Err(Error::InvalidShape("quasi-independence needs a two-way table".into()));
    }
    let (r, c) = (shape.levels()[0], shape.levels()[1]);
    let moves = chordless_cycle_moves(r, c, |i, j| !mask[i * c + j])
        .into_iter()
        .filter_map(|mv| Move::new(mv.into_iter().map(|(i, j, v)| (i * c + j, v))));
    Ok(MarkovBasis::new(shape.clone(), mask.to_vec(), moves))
}

/// Basis of the hierarchical model `L_{V1} + L_{V2}` on `shape` (labels
/// `1..=m`, `V1 ∪ V2` all factors): quasi-independence between the
/// `V1 \ S` and `V2 \ S` cells inside every slice of `S = V1 ∩ V2`.
pub fn two_clique_basis(shape: &Shape, mask: &[bool], v1: VarSet, v2: VarSet) -> Result<MarkovBasis> {
    let all = shape.all_factors();
    if v1.union(v2) != all {
        return Err(Error::InvalidModel(format!("{v1} and {v2} do not cover the factors")));
    }
    let s = v1.intersection(v2);
    let a1 = v1.difference(s);
    let a2 = v2.difference(s);
    if a1.is_empty() || a2.is_empty() {
        return Ok(MarkovBasis::empty(shape.clone(), mask.to_vec()));
    }
    let sub = |d: VarSet| if d.is_empty() { Shape::scalar() } else { shape.marginal(d) };
    let (ss, s1, s2) = (sub(s), sub(a1), sub(a2));
    let place = |fs: VarSet, coords: &[usize], full: &mut [usize]| {
        for (f, &l) in fs.iter().zip(coords) {
            full[f - 1] = l;
        }
    };
    let mut moves = Vec::new();
    let mut full = vec![0usize; shape.m()];
    for j in 0..ss.num_cells() {
        let jc = if s.is_empty() { vec![] } else { ss.cell(j) };
        let mut cell_of = |i: usize, k: usize| {
            place(s, &jc, &mut full);
            place(a1, &s1.cell(i), &mut full);
            place(a2, &s2.cell(k), &mut full);
            shape.index(&full)
        };
        let idx: Vec<Vec<usize>> = (0..s1.num_cells())
            .map(|i| (0..s2.num_cells()).map(|k| cell_of(i, k)).collect())
            .collect();
        // Rows or columns without any available cell play no part.
        let rows: Vec<usize> = (0..s1.num_cells()).filter(|&i| idx[i].iter().any(|&c| !mask[c])).collect();
        let cols: Vec<usize> = (0..s2.num_cells()).filter(|&k| idx.iter().any(|r| !mask[r[k]])).collect();
        for mv in chordless_cycle_moves(rows.len(), cols.len(), |a, b| !mask[idx[rows[a]][cols[b]]]) {
            moves.extend(Move::new(mv.into_iter().map(|(a, b, v)| (idx[rows[a]][cols[b]], v))));
        }
    }
    Ok(MarkovBasis::new(shape.clone(), mask.to_vec(), moves))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_mask(n: usize) -> Vec<bool> {
        (0..n * n).map(|i| i / n == i % n).collect()
    }

    #[test]
    fn independence_swaps() {
        let shape = Shape::new(vec![3, 4]).unwrap();
        let b = quasi_independence(&shape, &vec![false; 12]).unwrap();
        assert_eq!(b.len(), 3 * 6);
        assert_eq!(b.max_degree(), 2);
    }

    #[test]
    fn diagonal_zeros_need_degree_three() {
        let shape = Shape::new(vec![4, 4]).unwrap();
        let b = quasi_independence(&shape, &diag_mask(4)).unwrap();
        let loop3 = Move::new([(1, 1), (6, 1), (8, 1), (2, -1), (4, -1), (9, -1)]).unwrap();
        assert!(b.moves().contains(&loop3));
        assert_eq!(b.max_degree(), 3);
        let shape3 = Shape::new(vec![3, 3]).unwrap();
        assert_eq!(quasi_independence(&shape3, &diag_mask(3)).unwrap().len(), 1);
    }

    #[test]
    fn two_by_two_with_one_zero_has_no_moves() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        assert!(quasi_independence(&shape, &[true, false, false, false]).unwrap().is_empty());
    }

    #[test]
    fn conditional_independence_slices() {
        let shape = Shape::new(vec![2, 3, 2]).unwrap();
        let b = two_clique_basis(&shape, &vec![false; 12], VarSet::of(&[1, 2]), VarSet::of(&[2, 3])).unwrap();
        assert_eq!(b.len(), 3);
    }
}
