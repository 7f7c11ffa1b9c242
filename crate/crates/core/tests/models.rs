use hsm::subspace::{split_model, CovariatePart, SplitClique, SplitSlice};
use hsm::{Complex, Shape, Subspace, VarSet};

fn vs(f: &[usize]) -> VarSet {
    VarSet::of(f)
}

fn five_way() -> Subspace {
    let shape = Shape::new(vec![2; 5]).unwrap();
    let pairs = [[1, 2], [1, 3], [2, 3], [2, 4], [3, 5], [4, 5]];
    let parts = pairs
        .iter()
        .map(|p| hsm::subspace::uniform_association(&shape, vs(p)))
        .collect::<Vec<CovariatePart>>();
    Subspace::builder(shape).main_effects().covariate("theta", parts).build().unwrap()
}

#[test]
fn five_way_closure_and_tightness() {
    let l = five_way();
    assert_eq!(l.dim(), 7);
    let closure = l.hierarchical_closure().unwrap();
    let expect = Complex::from_lists(5, &[&[1, 2], &[1, 3], &[2, 3], &[2, 4], &[3, 5], &[4, 5]]).unwrap();
    assert_eq!(closure, expect);
    assert_eq!(closure.dividers().unwrap(), vec![vs(&[2, 3])]);
    let cc = closure.maximal_compact_components().unwrap();
    assert_eq!(cc.components, vec![vs(&[1, 2, 3]), vs(&[2, 3, 4, 5])]);
    assert!(!l.is_tight_hsm().unwrap());
    assert!(l.is_hsm_of(&closure.with_facet(vs(&[1, 4])).unwrap()).unwrap());
    assert!(l.is_hsm_of(&closure.with_facet(vs(&[1, 5])).unwrap()).unwrap());
}

fn wam_model2() -> Subspace {
    let shape = Shape::new(vec![2; 6]).unwrap();
    let cl = vec![
        SplitClique::whole(vs(&[1, 2, 3, 5])),
        SplitClique {
            clique: vs(&[2, 3, 4, 5]),
            z: vs(&[3]),
            slices: vec![
                SplitSlice { level: vec![0], facets: vec![vs(&[2, 5]), vs(&[4, 5])] },
                SplitSlice { level: vec![1], facets: vec![vs(&[2, 4, 5])] },
            ],
        },
        SplitClique::whole(vs(&[3, 4, 5, 6])),
    ];
    split_model(shape, None, &cl, vec![]).unwrap()
}

#[test]
fn wam_model_two() {
    let l = wam_model2();
    assert_eq!(l.dim(), 30);
    let d = l.decompose().unwrap();
    assert_eq!(d.components, vec![vs(&[1, 2, 3, 5]), vs(&[2, 3, 4, 5]), vs(&[3, 4, 5, 6])]);
    let m1 = Complex::from_lists(6, &[&[1, 2, 3, 5], &[2, 3, 4, 5], &[3, 4, 5, 6]]).unwrap();
    assert!(l.is_hsm_of(&m1).unwrap());
    assert_eq!(Subspace::hierarchical(Shape::new(vec![2; 6]).unwrap(), &m1, None).unwrap().dim(), 32);
}
