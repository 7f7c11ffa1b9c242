mod common;

use common::pewee_mask;
use hsm::markov::fiber::check_connectivity;
use hsm::markov::{auto_basis, quasi_independence, BasisOptions, Move};
use hsm::{datasets, Complex, Shape, Subspace, VarSet};

const CAP: usize = 2_000_000;

fn connected_up_to(l: &Subspace, n: u64) {
    let b = auto_basis(l, &BasisOptions::default()).unwrap();
    b.validate(&l.configuration()).unwrap();
    assert!(b.is_certified());
    let r = check_connectivity(&l.configuration(), b.moves(), n, CAP).unwrap();
    assert!(r.connected(), "{r:?}");
}

#[test]
fn conditional_independence_connects() {
    let shape = Shape::new(vec![3, 3, 3]).unwrap();
    let delta = Complex::from_lists(3, &[&[1, 2], &[2, 3]]).unwrap();
    connected_up_to(&Subspace::hierarchical(shape, &delta, None).unwrap(), 6);
}

#[test]
fn diagonal_quasi_independence_connects() {
    for k in [3, 4] {
        let shape = Shape::new(vec![k, k]).unwrap();
        let mask: Vec<bool> = (0..k * k).map(|i| i / k == i % k).collect();
        let l = Subspace::builder(shape).mask(mask).main_effects().build().unwrap();
        connected_up_to(&l, 6);
        let direct = quasi_independence(l.shape(), l.mask()).unwrap();
        assert_eq!(direct.len(), auto_basis(&l, &BasisOptions::default()).unwrap().len());
    }
}

#[test]
fn pewee_style_models_connect() {
    let shape = Shape::new(vec![3, 3, 3]).unwrap();
    let delta = Complex::from_lists(3, &[&[1, 2], &[2, 3]]).unwrap();
    let m1 = Subspace::hierarchical(shape.clone(), &delta, Some(pewee_mask(3))).unwrap();
    connected_up_to(&m1, 6);
    let m2 = Subspace::builder(shape)
        .mask(pewee_mask(3))
        .main_effects()
        .diagonal(VarSet::of(&[1, 2]))
        .diagonal(VarSet::of(&[2, 3]))
        .build()
        .unwrap();
    connected_up_to(&m2, 6);
}

#[test]
fn oracle_models_connect() {
    for (name, l) in common::oracle_models() {
        eprintln!("{name}");
        connected_up_to(&l, 6);
    }
}

#[test]
fn loop_of_degree_three_on_pewee_marginal() {
    let shape = Shape::new(vec![4, 4]).unwrap();
    let mask: Vec<bool> = (0..16).map(|i| i / 4 == i % 4).collect();
    let b = quasi_independence(&shape, &mask).unwrap();
    let idx = |i: usize, j: usize| (i - 1) * 4 + (j - 1);
    let lp = Move::new([
        (idx(1, 2), 1),
        (idx(2, 3), 1),
        (idx(3, 1), 1),
        (idx(1, 3), -1),
        (idx(2, 1), -1),
        (idx(3, 2), -1),
    ])
    .unwrap();
    assert!(b.moves().contains(&lp));
    assert!(b.to_string().contains("[{(1,2),(2,3),(3,1)}||{(1,3),(2,1),(3,2)}]"));
}

#[test]
fn builtin_models_have_bases() {
    for (name, table) in [("pewee-model1", "pewee"), ("pewee-model2", "pewee"), ("wam-model1", "wam"), ("wam-model2", "wam")] {
        let t = datasets::table(table).unwrap();
        let l = datasets::model(name).unwrap().build_for(&t).unwrap();
        let b = auto_basis(&l, &BasisOptions::default()).unwrap();
        eprintln!("{name}: {} moves, max degree {}", b.len(), b.max_degree());
        assert!(b.is_certified());
        assert!(!b.is_empty());
    }
}
