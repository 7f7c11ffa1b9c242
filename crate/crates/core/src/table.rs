//! Dense multiway contingency tables with structural zeros.
//!
//! Cells are addressed by 0-based level coordinates in the Rust API and by
//! 1-based coordinates in the JSON and CSV file formats. Storage is row-major
//! with the last factor varying fastest.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::varset::{VarSet, MAX_FACTORS};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    levels: Vec<usize>,
}

impl Shape {
    /// A shape with `m >= 1` factors, each with at least two levels.
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidShape("a table needs at least one factor".into()));
        }
        if levels.len() > MAX_FACTORS {
            return Err(Error::InvalidShape(format!(
                "{} factors exceeds the supported maximum {MAX_FACTORS}",
                levels.len()
            )));
        }
        if let Some(pos) = levels.iter().position(|&l| l < 2) {
            return Err(Error::InvalidShape(format!(
                "factor {} has {} level(s); every factor needs at least 2",
                pos + 1,
                levels[pos]
            )));
        }
        Ok(Shape { levels })
    }

    /// Zero-factor shape holding a single cell (the empty marginal).
    pub fn scalar() -> Self {
        Shape { levels: Vec::new() }
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn m(&self) -> usize {
        self.levels.len()
    }

    pub fn all_factors(&self) -> VarSet {
        VarSet::full(self.m())
    }

    pub fn num_cells(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn check_factors(&self, d: VarSet) -> Result<()> {
        match d.iter().find(|&f| f > self.m()) {
            Some(f) => Err(Error::FactorOutOfRange { factor: f, m: self.m() }),
            None => Ok(()),
        }
    }

    pub fn index(&self, cell: &[usize]) -> usize {
        debug_assert_eq!(cell.len(), self.m());
        let mut idx = 0;
        for (c, l) in cell.iter().zip(&self.levels) {
            debug_assert!(c < l);
            idx = idx * l + c;
        }
        idx
    }

    pub fn checked_index(&self, cell: &[usize]) -> Result<usize> {
        if cell.len() != self.m() {
            return Err(Error::InvalidCell(format!(
                "cell has {} coordinates, table has {} factors",
                cell.len(),
                self.m()
            )));
        }
        for (j, (c, l)) in cell.iter().zip(&self.levels).enumerate() {
            if c >= l {
                return Err(Error::InvalidCell(format!(
                    "level {} of factor {} exceeds {}",
                    c + 1,
                    j + 1,
                    l
                )));
            }
        }
        Ok(self.index(cell))
    }

    pub fn cell(&self, mut idx: usize) -> Vec<usize> {
        let mut cell = vec![0; self.m()];
        for j in (0..self.m()).rev() {
            cell[j] = idx % self.levels[j];
            idx /= self.levels[j];
        }
        cell
    }

    pub fn cells(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_cells()).map(move |i| self.cell(i))
    }

    /// Shape of the `d`-marginal; factors keep their relative order.
    pub fn marginal(&self, d: VarSet) -> Shape {
        Shape {
            levels: d.iter().map(|f| self.levels[f - 1]).collect(),
        }
    }

    /// For every cell of `self`, the index of its `d`-marginal cell.
    pub fn marginal_map(&self, d: VarSet) -> Vec<usize> {
        let factors: Vec<usize> = d.iter().map(|f| f - 1).collect();
        let mshape = self.marginal(d);
        let mut out = Vec::with_capacity(self.num_cells());
        let mut sub = vec![0; factors.len()];
        for idx in 0..self.num_cells() {
            let cell = self.cell(idx);
            for (k, &j) in factors.iter().enumerate() {
                sub[k] = cell[j];
            }
            out.push(mshape.index(&sub));
        }
        out
    }

    /// Projects a cell of `self` onto the factors in `d`.
    pub fn project(&self, cell: &[usize], d: VarSet) -> Vec<usize> {
        d.iter().map(|f| cell[f - 1]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    shape: Shape,
    counts: Vec<u64>,
    mask: Vec<bool>,
    n: u64,
}

impl Table {
    /// Builds a table; `structural_zeros` lists 0-based cells.
    pub fn new(shape: Shape, counts: Vec<u64>, structural_zeros: &[Vec<usize>]) -> Result<Self> {
        let mut mask = vec![false; shape.num_cells()];
        for z in structural_zeros {
            mask[shape.checked_index(z)?] = true;
        }
        Table::with_mask(shape, counts, mask)
    }

    pub fn from_counts(shape: Shape, counts: Vec<u64>) -> Result<Self> {
        let mask = vec![false; shape.num_cells()];
        Table::with_mask(shape, counts, mask)
    }

    pub fn with_mask(shape: Shape, counts: Vec<u64>, mask: Vec<bool>) -> Result<Self> {
        if counts.len() != shape.num_cells() {
            return Err(Error::InvalidTable(format!(
                "expected {} counts for shape {:?}, got {}",
                shape.num_cells(),
                shape.levels(),
                counts.len()
            )));
        }
        if mask.len() != counts.len() {
            return Err(Error::InvalidTable("mask length differs from cell count".into()));
        }
        if let Some(idx) = (0..counts.len()).find(|&i| mask[i] && counts[i] != 0) {
            return Err(Error::InvalidTable(format!(
                "structural zero at cell {:?} holds count {}",
                one_based(&shape.cell(idx)),
                counts[idx]
            )));
        }
        let n = counts.iter().sum();
        Ok(Table { shape, counts, mask, n })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn has_structural_zeros(&self) -> bool {
        self.mask.iter().any(|&z| z)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn get(&self, cell: &[usize]) -> u64 {
        self.counts[self.shape.index(cell)]
    }

    pub fn is_structural_zero(&self, cell: &[usize]) -> bool {
        self.mask[self.shape.index(cell)]
    }

    pub fn structural_zeros(&self) -> Vec<Vec<usize>> {
        (0..self.counts.len())
            .filter(|&i| self.mask[i])
            .map(|i| self.shape.cell(i))
            .collect()
    }

    /// Dense indices of cells that are not structural zeros.
    pub fn support(&self) -> Vec<usize> {
        (0..self.counts.len()).filter(|&i| !self.mask[i]).collect()
    }

    pub fn support_dimension(&self) -> usize {
        self.mask.iter().filter(|&&z| !z).count()
    }

    /// Same shape and mask, new counts (which must vanish on the mask).
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Table> {
        Table::with_mask(self.shape.clone(), counts, self.mask.clone())
    }

    /// The `d`-marginal table. A marginal cell is a structural zero when every
    /// cell in its preimage is.
    pub fn marginal(&self, d: VarSet) -> Result<Table> {
        self.shape.check_factors(d)?;
        let mshape = self.shape.marginal(d);
        let map = self.shape.marginal_map(d);
        let mut counts = vec![0u64; mshape.num_cells()];
        let mut all_masked = vec![true; mshape.num_cells()];
        for (i, &j) in map.iter().enumerate() {
            counts[j] += self.counts[i];
            all_masked[j] &= self.mask[i];
        }
        Ok(Table {
            shape: mshape,
            n: self.n,
            counts,
            mask: all_masked,
        })
    }

    /// The subtable with factors in `b` fixed at `levels` (0-based, in the
    /// increasing order of `b`). The result is over the remaining factors.
    pub fn slice(&self, b: VarSet, levels: &[usize]) -> Result<Table> {
        self.shape.check_factors(b)?;
        if levels.len() != b.len() {
            return Err(Error::InvalidCell(format!(
                "{} slice levels given for {} factors",
                levels.len(),
                b.len()
            )));
        }
        for (f, &l) in b.iter().zip(levels) {
            if l >= self.shape.levels()[f - 1] {
                return Err(Error::InvalidCell(format!(
                    "level {} of factor {f} exceeds {}",
                    l + 1,
                    self.shape.levels()[f - 1]
                )));
            }
        }
        if b.is_empty() {
            return Ok(self.clone());
        }
        let rest = self.shape.all_factors().difference(b);
        let rshape = if rest.is_empty() {
            Shape::scalar()
        } else {
            self.shape.marginal(rest)
        };
        let mut counts = Vec::with_capacity(rshape.num_cells());
        let mut mask = Vec::with_capacity(rshape.num_cells());
        let mut full = vec![0; self.shape.m()];
        for (f, &l) in b.iter().zip(levels) {
            full[f - 1] = l;
        }
        let rest_factors = rest.to_vec();
        for r in 0..rshape.num_cells() {
            let sub = rshape.cell(r);
            for (k, &f) in rest_factors.iter().enumerate() {
                full[f - 1] = sub[k];
            }
            let idx = self.shape.index(&full);
            counts.push(self.counts[idx]);
            mask.push(self.mask[idx]);
        }
        let n = counts.iter().sum();
        Ok(Table {
            shape: rshape,
            counts,
            mask,
            n,
        })
    }

    /// Cellwise sum; a cell stays a structural zero only if it is one in both.
    pub fn plus(&self, other: &Table) -> Result<Table> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape.levels(),
                other.shape.levels()
            )));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        Table::with_mask(self.shape.clone(), counts, mask)
    }

    pub fn to_file(&self) -> TableFile {
        TableFile {
            shape: self.shape.levels().to_vec(),
            counts: self.counts.clone(),
            structural_zeros: self.structural_zeros().iter().map(|c| one_based(c)).collect(),
        }
    }

    pub fn from_file(file: TableFile) -> Result<Table> {
        let shape = Shape::new(file.shape)?;
        let zeros = file
            .structural_zeros
            .iter()
            .map(|c| zero_based(c))
            .collect::<Result<Vec<_>>>()?;
        Table::new(shape, file.counts, &zeros)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Table> {
        Table::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Table::from_csv(text.as_bytes(), None),
            _ => Table::from_json(&text),
        }
    }

    /// Reads the one-row-per-cell CSV layout `i_1,...,i_m,count`. A header
    /// row is detected and skipped. Unlisted cells are 0 and a count of `NA`
    /// marks a structural zero. Without an explicit shape, each factor's
    /// level count is the largest level that appears.
    pub fn from_csv<R: Read>(reader: R, shape: Option<Vec<usize>>) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<(Vec<usize>, Option<u64>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.is_empty() || rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if line == 0 && rec.get(0).map(|f| f.parse::<usize>().is_err()).unwrap_or(false) {
                continue;
            }
            let fields: Vec<&str> = rec.iter().collect();
            if fields.len() < 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected i_1,...,i_m,count",
                    line + 1
                )));
            }
            let (coords, count) = fields.split_at(fields.len() - 1);
            let cell = coords
                .iter()
                .map(|c| {
                    c.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("line {}: bad level {c:?}", line + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            let count = match count[0] {
                "NA" | "na" => None,
                s => Some(
                    s.parse::<u64>()
                        .map_err(|_| Error::Parse(format!("line {}: bad count {s:?}", line + 1)))?,
                ),
            };
            if let Some(prev) = rows.first() {
                if prev.0.len() != cell.len() {
                    return Err(Error::Parse(format!(
                        "line {}: {} coordinates, expected {}",
                        line + 1,
                        cell.len(),
                        prev.0.len()
                    )));
                }
            }
            rows.push((zero_based(&cell)?, count));
        }
        let m = rows
            .first()
            .map(|r| r.0.len())
            .ok_or_else(|| Error::Parse("CSV contains no cells".into()))?;
        let levels = match shape {
            Some(s) => s,
            None => (0..m)
                .map(|j| rows.iter().map(|r| r.0[j] + 1).max().unwrap_or(1))
                .collect(),
        };
        let shape = Shape::new(levels)?;
        let mut counts = vec![0u64; shape.num_cells()];
        let mut mask = vec![false; shape.num_cells()];
        for (cell, count) in rows {
            let idx = shape.checked_index(&cell)?;
            match count {
                Some(c) => counts[idx] += c,
                None => mask[idx] = true,
            }
        }
        Table::with_mask(shape, counts, mask)
    }
}

/// JSON layout of a table file; coordinates are 1-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableFile {
    pub shape: Vec<usize>,
    pub counts: Vec<u64>,
    #[serde(default)]
    pub structural_zeros: Vec<Vec<usize>>,
}

pub fn one_based(cell: &[usize]) -> Vec<usize> {
    cell.iter().map(|c| c + 1).collect()
}

pub fn zero_based(cell: &[usize]) -> Result<Vec<usize>> {
    cell.iter()
        .map(|&c| {
            c.checked_sub(1)
                .ok_or_else(|| Error::InvalidCell("levels are 1-based; found 0".into()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t222() -> Table {
        Table::from_counts(Shape::new(vec![2, 2, 2]).unwrap(), (1..=8).collect()).unwrap()
    }

    #[test]
    fn marginal_sums_and_identity() {
        let t = t222();
        let m = t.marginal(VarSet::of(&[1])).unwrap();
        assert_eq!(m.counts(), &[10, 26]);
        let m13 = t.marginal(VarSet::of(&[1, 3])).unwrap();
        assert_eq!(m13.counts(), &[4, 6, 12, 14]);
        assert_eq!(t.marginal(VarSet::full(3)).unwrap(), t);
        let e = t.marginal(VarSet::empty()).unwrap();
        assert_eq!(e.counts(), &[36]);
    }

    #[test]
    fn marginal_rejects_bad_factor() {
        assert!(matches!(
            t222().marginal(VarSet::of(&[4])),
            Err(Error::FactorOutOfRange { factor: 4, m: 3 })
        ));
    }

    #[test]
    fn slice_fixes_levels() {
        let t = t222();
        let s = t.slice(VarSet::of(&[2]), &[1]).unwrap();
        assert_eq!(s.shape().levels(), &[2, 2]);
        assert_eq!(s.counts(), &[3, 4, 7, 8]);
        assert_eq!(t.slice(VarSet::empty(), &[]).unwrap(), t);
        assert!(t.slice(VarSet::of(&[2]), &[2]).is_err());
    }

    #[test]
    fn masked_cell_must_be_zero() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        assert!(Table::new(shape.clone(), vec![1, 1, 1, 1], &[vec![0, 0]]).is_err());
        let t = Table::new(shape, vec![0, 1, 1, 1], &[vec![0, 0]]).unwrap();
        assert_eq!(t.support_dimension(), 3);
    }

    #[test]
    fn shape_validation() {
        assert!(Shape::new(vec![]).is_err());
        assert!(Shape::new(vec![2, 1]).is_err());
    }

    #[test]
    fn csv_reads_na_and_defaults() {
        let text = "i1,i2,count\n1,1,NA\n1,2,5\n2,1,3\n";
        let t = Table::from_csv(text.as_bytes(), None).unwrap();
        assert_eq!(t.shape().levels(), &[2, 2]);
        assert_eq!(t.counts(), &[0, 5, 3, 0]);
        assert!(t.is_structural_zero(&[0, 0]));
        assert!(!t.is_structural_zero(&[1, 1]));
    }

    #[test]
    fn json_round_trip_keeps_mask() {
        let shape = Shape::new(vec![2, 3]).unwrap();
        let t = Table::new(shape, vec![0, 1, 2, 3, 4, 5], &[vec![0, 0]]).unwrap();
        let back = Table::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
