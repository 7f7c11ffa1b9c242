//! Built-in tables and model specifications, addressable as `builtin:<name>`.

use crate::error::{Error, Result};
use crate::spec::ModelSpec;
use crate::table::Table;

/// Wood pewee song triples, 4×4×4 with `(i,i,k)` and `(i,j,j)` structural zeros.
pub const PEWEE: &str = include_str!("../data/pewee.json");
/// Women and mathematics survey, 2^6. Factors: attendance, sex, school,
/// agreement, preference, plans.
pub const WAM: &str = include_str!("../data/wam.json");

const TABLES: &[(&str, &str)] = &[("pewee", PEWEE), ("wam", WAM)];

const MODELS: &[(&str, &str)] = &[
    ("pewee-model1", include_str!("../data/pewee_model1.json")),
    ("pewee-model2", include_str!("../data/pewee_model2.json")),
    ("wam-model1", include_str!("../data/wam_model1.json")),
    ("wam-model2", include_str!("../data/wam_model2.json")),
    ("uniform-ci", include_str!("../data/uniform_ci.json")),
    ("uniform-common", include_str!("../data/uniform_common.json")),
    ("five-way", include_str!("../data/five_way.json")),
];

pub fn table_names() -> Vec<&'static str> {
    TABLES.iter().map(|t| t.0).collect()
}

pub fn model_names() -> Vec<&'static str> {
    MODELS.iter().map(|t| t.0).collect()
}

pub fn table(name: &str) -> Result<Table> {
    let text = TABLES
        .iter()
        .find(|t| t.0 == name)
        .map(|t| t.1)
        .ok_or_else(|| Error::InvalidTable(format!("no built-in table named {name:?}")))?;
    Table::from_json(text)
}

pub fn model(name: &str) -> Result<ModelSpec> {
    let text = MODELS
        .iter()
        .find(|t| t.0 == name)
        .map(|t| t.1)
        .ok_or_else(|| Error::InvalidModel(format!("no built-in model named {name:?}")))?;
    ModelSpec::from_json(text)
}

pub fn model_json(name: &str) -> Option<&'static str> {
    MODELS.iter().find(|t| t.0 == name).map(|t| t.1)
}

pub fn pewee() -> Table {
    table("pewee").expect("built-in table parses")
}

pub fn wam() -> Table {
    table("wam").expect("built-in table parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_have_published_totals() {
        assert_eq!(pewee().n(), 198);
        assert_eq!(pewee().support_dimension(), 36);
        assert_eq!(wam().n(), 1190);
    }

    #[test]
    fn all_models_build() {
        for name in model_names() {
            let l = model(name).unwrap().build().unwrap();
            assert!(l.dim() > 0, "{name}");
        }
    }
}
