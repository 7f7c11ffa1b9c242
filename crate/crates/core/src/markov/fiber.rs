//! Brute-force fiber enumeration, used to check that a set of moves
//! connects every fiber of small tables.

use std::collections::HashMap;

use super::Move;
use crate::error::{Error, Result};
use crate::subspace::Configuration;

/// Outcome of a connectivity check over all tables with `1 ≤ n ≤ n_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberReport {
    pub n_max: u64,
    pub tables: usize,
    pub fibers: usize,
    pub components: usize,
    /// Sample sizes at which some fiber splits into several components.
    pub disconnected_at: Vec<u64>,
}

impl FiberReport {
    pub fn connected(&self) -> bool {
        self.fibers == self.components
    }
}

const LANE: u32 = 4;

fn lane(t: u128, p: usize) -> i64 {
    ((t >> (LANE as usize * p)) & 0xF) as i64
}

/// All tables on `s` cells with total `n`, packed four bits per cell.
fn compositions(s: usize, n: u64, cap: usize) -> Result<Vec<u128>> {
    fn rec(s: usize, p: usize, left: u64, acc: u128, out: &mut Vec<u128>, cap: usize) -> Result<()> {
        if p + 1 == s {
            if out.len() >= cap {
                return Err(Error::CapExceeded { cap });
            }
            out.push(acc | ((left as u128) << (LANE as usize * p)));
            return Ok(());
        }
        for v in 0..=left {
            rec(s, p + 1, left - v, acc | ((v as u128) << (LANE as usize * p)), out, cap)?;
        }
        Ok(())
    }
    let mut out = Vec::new();
    if s > 0 {
        rec(s, 0, n, 0, &mut out, cap)?;
    }
    Ok(out)
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

fn check_frame(support: usize, n_max: u64) -> Result<()> {
    if support > 32 || n_max > 15 {
        return Err(Error::InvalidModel(format!(
            "fiber enumeration handles at most 32 cells and n <= 15 (got {support} cells, n = {n_max})"
        )));
    }
    Ok(())
}

/// Moves as (support position, value) pairs.
fn local_moves(config: &Configuration, moves: &[Move]) -> Result<Vec<Vec<(usize, i64)>>> {
    let pos: HashMap<usize, usize> = config.support().iter().enumerate().map(|(p, &c)| (c, p)).collect();
    moves
        .iter()
        .enumerate()
        .map(|(index, m)| {
            m.entries()
                .iter()
                .map(|&(c, v)| pos.get(&c).map(|&p| (p, v)).ok_or(Error::InvalidMove { index, residual: i64::MAX }))
                .collect()
        })
        .collect()
}

fn unpack(t: u128, s: usize) -> Vec<i64> {
    (0..s).map(|p| lane(t, p)).collect()
}

/// Checks that `moves` connect every fiber of the configuration for all
/// sample sizes up to `n_max`. At most `cap` tables are enumerated per
/// sample size.
pub fn check_connectivity(config: &Configuration, moves: &[Move], n_max: u64, cap: usize) -> Result<FiberReport> {
    let s = config.support().len();
    check_frame(s, n_max)?;
    let local = local_moves(config, moves)?;
    let mut report = FiberReport {
        n_max,
        tables: 0,
        fibers: 0,
        components: 0,
        disconnected_at: Vec::new(),
    };
    for n in 1..=n_max {
        let tables = compositions(s, n, cap)?;
        let index: HashMap<u128, u32> = tables.iter().enumerate().map(|(i, &t)| (t, i as u32)).collect();
        let mut fibers: HashMap<Vec<i64>, ()> = HashMap::new();
        for &t in &tables {
            let x = unpack(t, s);
            fibers.insert(config.rows().iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect(), ());
        }
        let mut parent: Vec<u32> = (0..tables.len() as u32).collect();
        for (i, &t) in tables.iter().enumerate() {
            for mv in &local {
                if mv.iter().all(|&(p, v)| lane(t, p) + v >= 0) {
                    let mut u = t;
                    for &(p, v) in mv {
                        let shift = LANE as usize * p;
                        u = (u & !(0xF << shift)) | (((lane(t, p) + v) as u128) << shift);
                    }
                    let j = index[&u];
                    let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j));
                    if a != b {
                        parent[a as usize] = b;
                    }
                }
            }
        }
        let comps = (0..tables.len() as u32).filter(|&i| find(&mut parent, i) == i).count();
        report.tables += tables.len();
        report.fibers += fibers.len();
        report.components += comps;
        if comps != fibers.len() {
            report.disconnected_at.push(n);
        }
    }
    Ok(report)
}

/// All tables in the fiber of `x` (dense counts over the full table).
pub fn fiber_enumerate(config: &Configuration, x: &[u64], cap: usize) -> Result<Vec<Vec<u64>>> {
    let support = config.support();
    let s = support.len();
    let n: u64 = support.iter().map(|&c| x[c]).sum();
    check_frame(s, n)?;
    let dense: Vec<i64> = x.iter().map(|&v| v as i64).collect();
    let target = config.apply_dense(&dense);
    let mut out = Vec::new();
    for t in compositions(s, n, cap)? {
        let local = unpack(t, s);
        let stat: Vec<i64> = config.rows().iter().map(|r| r.iter().zip(&local).map(|(a, b)| a * b).sum()).collect();
        if stat == target {
            let mut full = vec![0u64; x.len()];
            for (p, &c) in support.iter().enumerate() {
                full[c] = local[p] as u64;
            }
            out.push(full);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::quasi_independence;
    use crate::subspace::Subspace;
    use crate::table::Shape;

    fn indep(r: usize, c: usize) -> Subspace {
        Subspace::builder(Shape::new(vec![r, c]).unwrap()).main_effects().build().unwrap()
    }

    #[test]
    fn permutation_fiber_has_six_tables() {
        let l = indep(3, 3);
        let x = [1, 0, 0, 0, 1, 0, 0, 0, 1];
        assert_eq!(fiber_enumerate(&l.configuration(), &x, 10_000).unwrap().len(), 6);
    }

    #[test]
    fn swaps_connect_independence() {
        let l = indep(2, 3);
        let b = quasi_independence(l.shape(), l.mask()).unwrap();
        let r = check_connectivity(&l.configuration(), b.moves(), 5, 100_000).unwrap();
        assert!(r.connected(), "{r:?}");
    }

    #[test]
    fn missing_moves_are_detected() {
        let l = indep(2, 3);
        let b = quasi_independence(l.shape(), l.mask()).unwrap();
        let r = check_connectivity(&l.configuration(), &b.moves()[..1], 3, 100_000).unwrap();
        assert!(!r.connected());
        assert!(r.disconnected_at.contains(&2));
    }
}
