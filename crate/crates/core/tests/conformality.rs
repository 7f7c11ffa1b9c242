use hsm::{datasets, VarSet};

#[test]
fn separate_coefficients_are_conformal() {
    let l = datasets::model("uniform-ci").unwrap().build().unwrap();
    assert!(l.is_conformal(&[VarSet::of(&[1, 2]), VarSet::of(&[2, 3])]).unwrap());
    assert_eq!(l.decompose().unwrap().components, vec![VarSet::of(&[1, 2]), VarSet::of(&[2, 3])]);
}

#[test]
fn common_coefficient_is_not_conformal() {
    let l = datasets::model("uniform-common").unwrap().build().unwrap();
    assert!(!l.is_conformal(&[VarSet::of(&[1, 2]), VarSet::of(&[2, 3])]).unwrap());
    assert_eq!(l.decompose().unwrap().components, vec![VarSet::of(&[1, 2, 3])]);
}
