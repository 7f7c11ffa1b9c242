//! Exact linear algebra over the rationals.
//!
//! Rows are kept as primitive integer vectors (row space over Q is invariant
//! under nonzero scaling), so elimination is fraction-free. Every routine runs
//! first in checked `i128` and restarts in `BigInt` on overflow.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub(crate) trait Exact: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Option<Self>;
    fn gcd(&self, o: &Self) -> Self;
    fn div_exact(&self, o: &Self) -> Self;
    fn to_big(&self) -> BigInt;
}

impl Exact for i128 {
    fn zero() -> Self {
        0
    }
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_neg(&self) -> bool {
        *self < 0
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(*o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(*o)
    }
    fn neg(&self) -> Option<Self> {
        self.checked_neg()
    }
    fn gcd(&self, o: &Self) -> Self {
        Integer::gcd(self, o)
    }
    fn div_exact(&self, o: &Self) -> Self {
        self / o
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Exact for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn neg(&self) -> Option<Self> {
        Some(-self)
    }
    fn gcd(&self, o: &Self) -> Self {
        Integer::gcd(self, o)
    }
    fn div_exact(&self, o: &Self) -> Self {
        self / o
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

/// Divides out the content of `v` and makes its leading nonzero entry positive.
fn make_primitive<T: Exact>(v: &mut [T]) -> Option<()> {
    let mut g = T::zero();
    for x in v.iter() {
        if !x.is_zero() {
            g = g.gcd(x);
        }
    }
    if g.is_zero() {
        return Some(());
    }
    let lead_neg = v.iter().find(|x| !x.is_zero()).map(|x| x.is_neg()).unwrap_or(false);
    let g = if lead_neg { g.neg()? } else { g };
    for x in v.iter_mut() {
        if !x.is_zero() {
            *x = x.div_exact(&g);
        }
    }
    Some(())
}

/// `v <- a*v - b*p` with `a = p[col]/g`, `b = v[col]/g`, clearing `v[col]`.
fn eliminate<T: Exact>(v: &mut [T], p: &[T], col: usize) -> Option<()> {
    if v[col].is_zero() {
        return Some(());
    }
    let g = p[col].gcd(&v[col]);
    let a = p[col].div_exact(&g);
    let b = v[col].div_exact(&g);
    for (x, y) in v.iter_mut().zip(p.iter()) {
        let ax = if x.is_zero() { T::zero() } else { a.mul(x)? };
        *x = if y.is_zero() { ax } else { ax.sub(&b.mul(y)?)? };
    }
    make_primitive(v)
}

/// Row-reduced echelon form with primitive integer rows and positive pivots.
#[derive(Debug, Clone)]
pub(crate) struct Echelon<T> {
    pub rows: Vec<Vec<T>>,
    pub pivots: Vec<usize>,
}

fn gauss_jordan<T: Exact>(input: &[Vec<i64>], ncols: usize) -> Option<Echelon<T>> {
    let mut rows: Vec<Vec<T>> = input
        .iter()
        .map(|r| r.iter().map(|&x| T::from_i64(x)).collect())
        .collect();
    for r in rows.iter_mut() {
        make_primitive(r)?;
    }
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..ncols {
        if next == rows.len() {
            break;
        }
        let Some(pr) = (next..rows.len()).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(next, pr);
        make_primitive(&mut rows[next])?;
        if rows[next][col].is_neg() {
            for x in rows[next].iter_mut() {
                *x = x.neg()?;
            }
        }
        let pivot = rows[next].clone();
        for (i, r) in rows.iter_mut().enumerate() {
            if i != next {
                eliminate(r, &pivot, col)?;
            }
        }
        pivots.push(col);
        next += 1;
    }
    rows.truncate(next);
    Some(Echelon { rows, pivots })
}

fn rref_any(input: &[Vec<i64>], ncols: usize) -> Echelon<BigInt> {
    match gauss_jordan::<i128>(input, ncols) {
        Some(e) => Echelon {
            rows: e.rows.iter().map(|r| r.iter().map(|x| x.to_big()).collect()).collect(),
            pivots: e.pivots,
        },
        None => gauss_jordan::<BigInt>(input, ncols).expect("BigInt elimination cannot overflow"),
    }
}

pub fn rank(rows: &[Vec<i64>], ncols: usize) -> usize {
    match gauss_jordan::<i128>(rows, ncols) {
        Some(e) => e.pivots.len(),
        None => gauss_jordan::<BigInt>(rows, ncols).map(|e| e.pivots.len()).unwrap_or(0),
    }
}

/// Integer basis of `{v : M v = 0}` for `M` given by `rows` (each of length `ncols`).
/// Each basis vector is primitive.
pub fn nullspace(rows: &[Vec<i64>], ncols: usize) -> Result<Vec<Vec<i64>>> {
    let e = rref_any(rows, ncols);
    let mut is_pivot = vec![None; ncols];
    for (i, &p) in e.pivots.iter().enumerate() {
        is_pivot[p] = Some(i);
    }
    let mut out = Vec::new();
    for free in 0..ncols {
        if is_pivot[free].is_some() {
            continue;
        }
        let mut l = BigInt::one();
        for (i, &p) in e.pivots.iter().enumerate() {
            if !Zero::is_zero(&e.rows[i][free]) {
                l = l.lcm(&e.rows[i][p]);
            }
        }
        let mut v = vec![<BigInt as Zero>::zero(); ncols];
        v[free] = l.clone();
        for (i, &p) in e.pivots.iter().enumerate() {
            let a = &e.rows[i][free];
            if !Zero::is_zero(a) {
                v[p] = -(a * &l) / &e.rows[i][p];
            }
        }
        make_primitive(&mut v);
        out.push(to_i64_vec(&v)?);
    }
    Ok(out)
}

/// Basis of `{c : c^T M = 0}` where `M` has the given columns (each of length `nrows`).
pub fn left_kernel(columns: &[Vec<i64>], nrows: usize) -> Result<Vec<Vec<i64>>> {
    nullspace(columns, nrows)
}

fn to_i64_vec(v: &[BigInt]) -> Result<Vec<i64>> {
    v.iter()
        .map(|x| ToPrimitive::to_i64(x).ok_or(Error::Overflow("kernel vector entry")))
        .collect()
}

/// Incremental independence test: accepts rows one at a time and reports
/// whether each one enlarges the span.
#[derive(Debug, Clone)]
pub struct SpanBuilder {
    ncols: usize,
    state: SpanState,
    count: usize,
}

#[derive(Debug, Clone)]
enum SpanState {
    Small(Vec<(usize, Vec<i128>)>),
    Big(Vec<(usize, Vec<BigInt>)>),
}

fn reduce_against<T: Exact>(basis: &[(usize, Vec<T>)], v: &mut [T]) -> Option<()> {
    make_primitive(v)?;
    for (col, p) in basis {
        eliminate(v, p, *col)?;
    }
    Some(())
}

impl SpanBuilder {
    pub fn new(ncols: usize) -> Self {
        SpanBuilder {
            ncols,
            state: SpanState::Small(Vec::new()),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.count
    }

    /// Returns true if `row` is independent of the rows accepted so far (and
    /// accepts it).
    pub fn push(&mut self, row: &[i64]) -> bool {
        assert_eq!(row.len(), self.ncols);
        if let SpanState::Small(basis) = &mut self.state {
            let mut v: Vec<i128> = row.iter().map(|&x| x as i128).collect();
            match reduce_against(basis, &mut v) {
                Some(()) => {
                    return match v.iter().position(|x| *x != 0) {
                        Some(col) => {
                            basis.push((col, v));
                            self.count += 1;
                            true
                        }
                        None => false,
                    };
                }
                None => {
                    let big = basis
                        .iter()
                        .map(|(c, r)| (*c, r.iter().map(|x| x.to_big()).collect()))
                        .collect();
                    self.state = SpanState::Big(big);
                }
            }
        }
        let SpanState::Big(basis) = &mut self.state else {
            unreachable!()
        };
        let mut v: Vec<BigInt> = row.iter().map(|&x| BigInt::from(x)).collect();
        reduce_against(basis, &mut v).expect("BigInt elimination cannot overflow");
        match v.iter().position(|x| !Zero::is_zero(x)) {
            Some(col) => {
                basis.push((col, v));
                self.count += 1;
                true
            }
            None => false,
        }
    }

    /// True if `row` lies in the current span (does not modify the builder).
    pub fn contains(&self, row: &[i64]) -> bool {
        assert_eq!(row.len(), self.ncols);
        match &self.state {
            SpanState::Small(basis) => {
                let mut v: Vec<i128> = row.iter().map(|&x| x as i128).collect();
                if reduce_against(basis, &mut v).is_some() {
                    return v.iter().all(|x| *x == 0);
                }
                let big: Vec<(usize, Vec<BigInt>)> = basis
                    .iter()
                    .map(|(c, r)| (*c, r.iter().map(|x| x.to_big()).collect()))
                    .collect();
                contains_big(&big, row)
            }
            SpanState::Big(basis) => contains_big(basis, row),
        }
    }
}

fn contains_big(basis: &[(usize, Vec<BigInt>)], row: &[i64]) -> bool {
    let mut v: Vec<BigInt> = row.iter().map(|&x| BigInt::from(x)).collect();
    reduce_against(basis, &mut v).expect("BigInt elimination cannot overflow");
    v.iter().all(Zero::is_zero)
}

/// Canonical text form of the row space (reduced echelon form with primitive
/// rows), used for fingerprints.
pub fn canonical_row_space(rows: &[Vec<i64>], ncols: usize) -> String {
    let e = rref_any(rows, ncols);
    let mut out = String::new();
    for r in &e.rows {
        let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_vec(rows: &[Vec<i64>], v: &[i64]) -> Vec<i128> {
        rows.iter()
            .map(|r| r.iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum())
            .collect()
    }

    #[test]
    fn rank_of_independence_design() {
        // 2x2 table: constant, row 1, row 2, col 1, col 2 indicators.
        let rows = vec![
            vec![1, 1, 1, 1],
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![1, 0, 1, 0],
            vec![0, 1, 0, 1],
        ];
        assert_eq!(rank(&rows, 4), 3);
    }

    #[test]
    fn nullspace_vectors_are_annihilated() {
        let rows = vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1], vec![1, 0, 1, 0]];
        let ns = nullspace(&rows, 4).unwrap();
        assert_eq!(ns.len(), 1);
        assert_eq!(mat_vec(&rows, &ns[0]), vec![0, 0, 0]);
        let v = &ns[0];
        assert_eq!(v.iter().map(|x| x.abs()).max(), Some(1));
    }

    #[test]
    fn span_builder_detects_dependence() {
        let mut sb = SpanBuilder::new(3);
        assert!(sb.push(&[1, 2, 3]));
        assert!(sb.push(&[0, 1, 1]));
        assert!(!sb.push(&[2, 5, 7]));
        assert!(sb.contains(&[1, 3, 4]));
        assert!(!sb.contains(&[0, 0, 1]));
        assert_eq!(sb.dim(), 2);
    }

    #[test]
    fn overflow_falls_back_to_bigint() {
        // Hilbert-like integer matrix scaled to force large intermediates.
        let n = 14;
        let rows: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| 3_i64.pow(((i * j) % 30) as u32) + (i as i64) - (j as i64)).collect())
            .collect();
        let r = rank(&rows, n);
        let ns = nullspace(&rows, n);
        assert!(r <= n);
        if let Ok(ns) = ns {
            assert_eq!(ns.len(), n - r);
            for v in ns {
                assert!(mat_vec(&rows, &v).iter().all(|&x| x == 0));
            }
        }
    }
}
