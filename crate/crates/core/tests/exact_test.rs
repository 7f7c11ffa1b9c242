use std::time::Instant;

use hsm::datasets;
use hsm::markov::{auto_basis, BasisOptions};
use hsm::mcmc::{exact_test, histogram_series, ChainConfig};

fn run(table: &str, small: &str, big: Option<&str>, seed: u64) -> hsm::mcmc::TestResult {
    let t = datasets::table(table).unwrap();
    let l0 = datasets::model(small).unwrap().build_for(&t).unwrap();
    let l1 = big.map(|b| datasets::model(b).unwrap().build_for(&t).unwrap());
    let basis = auto_basis(&l0, &BasisOptions::default()).unwrap();
    let cfg = ChainConfig { seed, ..Default::default() };
    exact_test(&t, &l0, l1.as_ref(), &basis, &cfg).unwrap()
}

#[test]
fn wam_model2_within_model1() {
    let start = Instant::now();
    let r = run("wam", "wam-model2", Some("wam-model1"), 0);
    eprintln!("wam: p = {} ± {} acc {} in {:?}", r.p_hat, r.ci_halfwidth, r.acceptance_rate, start.elapsed());
    assert!((r.observed_statistic - 1.851).abs() < 0.01);
    assert_eq!(r.df, 2);
    assert!((0.36..=0.44).contains(&r.p_hat), "{}", r.p_hat);
    let hist = histogram_series(&r, 40);
    let width = hist[0].upper - hist[0].lower;
    let mass: f64 = hist.iter().map(|h| h.density * width).sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn pewee_models_reject() {
    let r1 = run("pewee", "pewee-model1", None, 1);
    eprintln!("pewee 1: G2 {} p = {}", r1.observed_statistic, r1.p_hat);
    assert_eq!(r1.df, 16);
    assert!(r1.p_hat < 1e-3);
    let r2 = run("pewee", "pewee-model2", Some("pewee-model1"), 2);
    eprintln!("pewee 2: G2 {} p = {}", r2.observed_statistic, r2.p_hat);
    assert_eq!(r2.df, 10);
    assert!(r2.p_hat < 1e-3);
}

#[test]
fn same_seed_same_result() {
    let t = datasets::table("wam").unwrap();
    let l0 = datasets::model("wam-model2").unwrap().build_for(&t).unwrap();
    let basis = auto_basis(&l0, &BasisOptions::default()).unwrap();
    let cfg = ChainConfig { steps: 3000, burn_in: 500, seed: 9, ..Default::default() };
    let a = exact_test(&t, &l0, None, &basis, &cfg).unwrap();
    let b = exact_test(&t, &l0, None, &basis, &cfg).unwrap();
    assert_eq!(a, b);
}
