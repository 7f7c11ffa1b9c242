use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A set of factors, stored as a bitmask.
///
/// Factors are labelled `1..=m` in every public constructor, accessor and
/// in the `Display`/serde forms; bit `f - 1` is set for factor `f`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VarSet(u32);

pub const MAX_FACTORS: usize = 32;

impl VarSet {
    pub const fn empty() -> Self {
        VarSet(0)
    }

    /// The full set `{1, ..., m}`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_FACTORS);
        if m == MAX_FACTORS {
            VarSet(u32::MAX)
        } else {
            VarSet((1u32 << m) - 1)
        }
    }

    /// Builds a set from 1-based factor labels.
    ///
    /// Panics on a zero label; this is a programming error, not input validation.
    pub fn of(factors: &[usize]) -> Self {
        let mut bits = 0u32;
        for &f in factors {
            assert!(f >= 1 && f <= MAX_FACTORS, "factor label {f} out of range");
            bits |= 1 << (f - 1);
        }
        VarSet(bits)
    }

    pub const fn from_bits(bits: u32) -> Self {
        VarSet(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn singleton(f: usize) -> Self {
        VarSet::of(&[f])
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, f: usize) -> bool {
        f >= 1 && f <= MAX_FACTORS && self.0 & (1 << (f - 1)) != 0
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset(self, other: VarSet) -> bool {
        self.is_subset(other) && self != other
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersection(self, other: VarSet) -> VarSet {
        VarSet(self.0 & other.0)
    }

    pub fn difference(self, other: VarSet) -> VarSet {
        VarSet(self.0 & !other.0)
    }

    pub fn insert(&mut self, f: usize) {
        *self = self.union(VarSet::singleton(f));
    }

    /// 1-based factor labels in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..MAX_FACTORS).filter(move |i| bits & (1 << i) != 0).map(|i| i + 1)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn min(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize + 1)
        }
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = VarSet> {
        // Standard submask enumeration, emitted in increasing bit order.
        let mask = self.0;
        let mut subs = Vec::with_capacity(1 << self.len());
        let mut s = 0u32;
        loop {
            subs.push(VarSet(s));
            if s == mask {
                break;
            }
            s = (s.wrapping_sub(mask)) & mask;
        }
        subs.into_iter()
    }

    /// Position of factor `f` within the sorted list of `self`, i.e. its local
    /// 0-based axis once a table is marginalized onto `self`.
    pub fn position(self, f: usize) -> Option<usize> {
        if !self.contains(f) {
            return None;
        }
        let below = self.0 & ((1u32 << (f - 1)) - 1);
        Some(below.count_ones() as usize)
    }

    /// Renumbers `self` (a subset of `within`) to local labels `1..=|within|`.
    pub fn relabel_within(self, within: VarSet) -> VarSet {
        debug_assert!(self.is_subset(within));
        let mut out = VarSet::empty();
        for f in self.iter() {
            out.insert(within.position(f).expect("subset") + 1);
        }
        out
    }

    /// Inverse of [`VarSet::relabel_within`].
    pub fn unlabel_within(self, within: VarSet) -> VarSet {
        let globals: Vec<usize> = within.to_vec();
        VarSet::of(&self.iter().map(|f| globals[f - 1]).collect::<Vec<_>>())
    }

    /// Lexicographic key on the sorted factor list.
    pub fn lex_key(self) -> Vec<usize> {
        self.to_vec()
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, v) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl PartialOrd for VarSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VarSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.lex_key().cmp(&other.lex_key())
    }
}

impl FromIterator<usize> for VarSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        VarSet::of(&iter.into_iter().collect::<Vec<_>>())
    }
}

impl Serialize for VarSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for VarSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        if let Some(bad) = v.iter().find(|&&f| f == 0 || f > MAX_FACTORS) {
            return Err(serde::de::Error::custom(format!(
                "factor label {bad} out of range 1..={MAX_FACTORS}"
            )));
        }
        Ok(VarSet::of(&v))
    }
}
