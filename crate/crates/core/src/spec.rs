//! JSON model specifications.
//!
//! ```json
//! {"shape": [3, 3, 3],
//!  "terms": [{"kind": "uniform_assoc", "D": [1, 2]},
//!            {"kind": "csi", "D": [2], "B": [3], "level": [1]}]}
//! ```
//!
//! Factor labels and levels are 1-based. Main effects and the constant are
//! always included.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Complex;
use crate::subspace::{self, CovariatePart, SplitClique, SplitSlice, Subspace, Term};
use crate::table::{zero_based, Shape, Table};
use crate::varset::VarSet;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermSpec {
    Interaction {
        #[serde(rename = "D")]
        d: VarSet,
    },
    UniformAssoc {
        #[serde(rename = "D")]
        d: VarSet,
    },
    ChangePoint {
        #[serde(rename = "D")]
        d: VarSet,
        cut: Vec<usize>,
    },
    Diag {
        #[serde(rename = "D")]
        d: VarSet,
    },
    Csi {
        #[serde(rename = "D")]
        d: VarSet,
        #[serde(rename = "B")]
        b: VarSet,
        level: Vec<usize>,
    },
    /// A user covariate over the `D`-marginal, row-major.
    Covariate {
        #[serde(rename = "D")]
        d: VarSet,
        values: Vec<i64>,
    },
    /// One parameter shared by several covariate pieces.
    Shared {
        #[serde(default)]
        label: Option<String>,
        parts: Vec<PartSpec>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartSpec {
    UniformAssoc {
        #[serde(rename = "D")]
        d: VarSet,
    },
    ChangePoint {
        #[serde(rename = "D")]
        d: VarSet,
        cut: Vec<usize>,
    },
    Covariate {
        #[serde(rename = "D")]
        d: VarSet,
        values: Vec<i64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    pub level: Vec<usize>,
    #[serde(default)]
    pub facets: Vec<VarSet>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitCliqueSpec {
    pub clique: VarSet,
    #[serde(default, rename = "Z")]
    pub z: VarSet,
    #[serde(default)]
    pub slices: Vec<SliceSpec>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub structural_zeros: Vec<Vec<usize>>,
    /// Hierarchical facets, added as interaction terms.
    #[serde(default)]
    pub facets: Vec<VarSet>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub split: Vec<SplitCliqueSpec>,
}

fn part(shape: &Shape, p: &PartSpec) -> Result<CovariatePart> {
    match p {
        PartSpec::UniformAssoc { d } => {
            shape.check_factors(*d)?;
            Ok(subspace::uniform_association(shape, *d))
        }
        PartSpec::ChangePoint { d, cut } => {
            shape.check_factors(*d)?;
            if cut.len() != d.len() {
                return Err(Error::InvalidModel(format!("change point on {d} needs {} cuts", d.len())));
            }
            Ok(subspace::change_point(shape, *d, cut))
        }
        PartSpec::Covariate { d, values } => {
            shape.check_factors(*d)?;
            Ok(CovariatePart { d: *d, values: values.clone() })
        }
    }
}

impl TermSpec {
    pub fn to_term(&self, shape: &Shape) -> Result<Term> {
        Ok(match self {
            TermSpec::Interaction { d } => Term::Interaction(*d),
            TermSpec::UniformAssoc { d } => Term::Covariate {
                label: format!("uniform{d}"),
                parts: vec![part(shape, &PartSpec::UniformAssoc { d: *d })?],
            },
            TermSpec::ChangePoint { d, cut } => Term::Covariate {
                label: format!("change_point{d}"),
                parts: vec![part(shape, &PartSpec::ChangePoint { d: *d, cut: cut.clone() })?],
            },
            TermSpec::Diag { d } => Term::Diagonal(*d),
            TermSpec::Csi { d, b, level } => Term::Csi {
                d: *d,
                b: *b,
                level: zero_based(level)?,
            },
            TermSpec::Covariate { d, values } => Term::Covariate {
                label: format!("covariate{d}"),
                parts: vec![part(shape, &PartSpec::Covariate { d: *d, values: values.clone() })?],
            },
            TermSpec::Shared { label, parts } => Term::Covariate {
                label: label.clone().unwrap_or_else(|| "shared".into()),
                parts: parts.iter().map(|p| part(shape, p)).collect::<Result<_>>()?,
            },
        })
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ModelSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::new(self.shape.clone())
    }

    /// Structural-zero mask declared by the spec (all false if none).
    pub fn mask(&self) -> Result<Vec<bool>> {
        let shape = self.shape()?;
        let mut mask = vec![false; shape.num_cells()];
        for c in &self.structural_zeros {
            mask[shape.checked_index(&zero_based(c)?)?] = true;
        }
        Ok(mask)
    }

    pub fn split_cliques(&self) -> Result<Vec<SplitClique>> {
        self.split
            .iter()
            .map(|c| {
                let slices = if c.slices.is_empty() && c.z.is_empty() {
                    vec![SplitSlice { level: vec![], facets: vec![c.clique] }]
                } else {
                    c.slices
                        .iter()
                        .map(|s| {
                            Ok(SplitSlice {
                                level: zero_based(&s.level)?,
                                facets: s.facets.clone(),
                            })
                        })
                        .collect::<Result<_>>()?
                };
                Ok(SplitClique { clique: c.clique, z: c.z, slices })
            })
            .collect()
    }

    pub fn terms(&self) -> Result<Vec<Term>> {
        let shape = self.shape()?;
        let mut terms: Vec<Term> = (1..=shape.m()).map(Term::Main).collect();
        if !self.split.is_empty() {
            terms.extend(subspace::split_terms(&shape, &self.split_cliques()?)?);
        }
        terms.extend(self.facets.iter().map(|f| Term::Interaction(*f)));
        for t in &self.terms {
            terms.push(t.to_term(&shape)?);
        }
        Ok(terms)
    }

    /// Builds the model on the spec's own support.
    pub fn build(&self) -> Result<Subspace> {
        Subspace::new(self.shape()?, Some(self.mask()?), self.terms()?)
    }

    /// Builds the model on the support of `table`. A spec that declares
    /// structural zeros must agree with the table.
    pub fn build_for(&self, table: &Table) -> Result<Subspace> {
        let shape = self.shape()?;
        if &shape != table.shape() {
            return Err(Error::ShapeMismatch(format!(
                "model shape {:?}, table shape {:?}",
                shape.levels(),
                table.shape().levels()
            )));
        }
        let own = self.mask()?;
        if !self.structural_zeros.is_empty() && own != table.mask() {
            return Err(Error::ShapeMismatch(
                "structural zeros of the model and the table differ".into(),
            ));
        }
        Subspace::new(shape, Some(table.mask().to_vec()), self.terms()?)
    }

    /// The complex spanned by the facets and split root, if any are given.
    pub fn declared_complex(&self) -> Result<Option<Complex>> {
        let m = self.shape.len();
        let mut facets: Vec<VarSet> = self.facets.clone();
        facets.extend(self.split.iter().map(|c| c.clique));
        if facets.is_empty() {
            return Ok(None);
        }
        Ok(Some(Complex::new(m, facets)?))
    }
}
