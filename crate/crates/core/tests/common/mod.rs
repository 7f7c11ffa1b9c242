//! Shared helpers for the integration tests and the acceptance harness.
#![allow(dead_code)]

use hsm::fit::{fit_component, FitOptions, FitPlan};
use hsm::subspace::CovariatePart;
use hsm::{Complex, Shape, Subspace, Table, Term, VarSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn vs(f: &[usize]) -> VarSet {
    VarSet::of(f)
}

pub struct RandomHsm {
    pub model: Subspace,
    pub delta: Complex,
    pub table: Table,
}

fn random_subset<R: Rng>(rng: &mut R, from: VarSet, min: usize, max: usize) -> VarSet {
    let mut f = from.to_vec();
    f.shuffle(rng);
    let k = rng.random_range(min..=max.min(f.len()));
    VarSet::of(&f[..k])
}

/// A random model built from terms that each live inside one clique of a
/// random decomposable complex, with every separator saturated.
pub fn random_hsm(seed: u64) -> RandomHsm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=5);
    let levels: Vec<usize> = (0..m).map(|_| rng.random_range(2..=4)).collect();
    let shape = Shape::new(levels).unwrap();
    let mut order: Vec<usize> = (1..=m).collect();
    order.shuffle(&mut rng);
    let first = rng.random_range(1..=m.min(3));
    let mut cliques = vec![VarSet::of(&order[..first])];
    let mut separators = Vec::new();
    let mut next = first;
    while next < m {
        let parent = cliques[rng.random_range(0..cliques.len())];
        let s = random_subset(&mut rng, parent, 0, 2.min(parent.len()));
        let add = rng.random_range(1..=2).min(m - next);
        let c = s.union(VarSet::of(&order[next..next + add]));
        next += add;
        separators.push(s);
        cliques.push(c);
    }
    let mut b = Subspace::builder(shape.clone()).main_effects();
    for s in &separators {
        if s.len() > 1 {
            b = b.interaction(*s);
        }
    }
    for &c in &cliques {
        for _ in 0..rng.random_range(1..=3) {
            b = match rng.random_range(0..4) {
                0 if c.len() >= 2 => b.interaction(random_subset(&mut rng, c, 2, c.len())),
                1 if c.len() >= 2 => {
                    let parts = (0..rng.random_range(1..=2))
                        .map(|_| {
                            let d = random_subset(&mut rng, c, 2, 2);
                            let cells = shape.marginal(d).num_cells();
                            CovariatePart {
                                d,
                                values: (0..cells).map(|_| rng.random_range(-2..=3)).collect(),
                            }
                        })
                        .collect();
                    b.covariate(&format!("phi{}", rng.random::<u32>()), parts)
                }
                2 if c.len() >= 2 => {
                    let cond = random_subset(&mut rng, c, 1, 1);
                    let d = random_subset(&mut rng, c.difference(cond), 1, c.len() - 1);
                    let f = cond.min().unwrap();
                    let level = rng.random_range(0..shape.levels()[f - 1]);
                    b.term(Term::Csi { d, b: cond, level: vec![level] })
                }
                3 if c.len() >= 2 => b.uniform_association(random_subset(&mut rng, c, 2, 2)),
                _ => b,
            };
        }
    }
    let model = b.build().unwrap();
    let delta = Complex::new(m, cliques).unwrap();
    let counts = (0..shape.num_cells()).map(|_| rng.random_range(1..=25)).collect();
    let table = Table::from_counts(shape, counts).unwrap();
    RandomHsm { model, delta, table }
}

pub struct FactorizationCheck {
    pub is_hsm: bool,
    pub components: usize,
    pub max_prob_diff: f64,
    pub max_divider_diff: f64,
}

/// Localized fit against a whole-table Newton fit on the same generators.
pub fn check_factorization(case: &RandomHsm) -> FactorizationCheck {
    let l = &case.model;
    let t = &case.table;
    let plan = FitPlan::new(l).unwrap();
    let local = plan.fit(t, &FitOptions::default()).unwrap();
    let generic = Subspace::from_support_rows(l.shape().clone(), l.mask().to_vec(), "whole", l.basis().to_vec()).unwrap();
    let whole = fit_component(&generic, t).unwrap();
    let max_prob_diff = local
        .p_hat
        .iter()
        .zip(&whole.p_hat)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let n = t.n() as f64;
    let mut max_divider_diff: f64 = 0.0;
    for s in plan.dividers().into_iter().filter(|s| !s.is_empty()) {
        let map = l.shape().marginal_map(s);
        let cells = l.shape().marginal(s).num_cells();
        let mut fitted = vec![0.0; cells];
        let mut observed = vec![0.0; cells];
        for (i, (&p, &x)) in local.p_hat.iter().zip(t.counts()).enumerate() {
            fitted[map[i]] += n * p;
            observed[map[i]] += x as f64;
        }
        for (a, b) in fitted.iter().zip(&observed) {
            max_divider_diff = max_divider_diff.max((a - b).abs());
        }
    }
    FactorizationCheck {
        is_hsm: l.is_hsm_of(&case.delta).unwrap(),
        components: plan.components().len(),
        max_prob_diff,
        max_divider_diff,
    }
}

pub struct Occupancy {
    pub states: usize,
    pub frequencies: Vec<f64>,
    /// Batch-means standard errors of the frequencies.
    pub std_errors: Vec<f64>,
    /// Independent-sampling multinomial standard error at the same length.
    pub iid_std_error: f64,
}

/// Runs `steps` Metropolis steps on the 3x3 fiber with all margins 1 and
/// records how often each of its states is occupied.
pub fn permutation_fiber_occupancy(steps: usize, seed: u64) -> Occupancy {
    use hsm::markov::fiber::fiber_enumerate;
    use hsm::markov::quasi_independence;
    use hsm::mcmc::mh_step;
    use std::collections::HashMap;

    let shape = Shape::new(vec![3, 3]).unwrap();
    let l = Subspace::builder(shape.clone()).main_effects().build().unwrap();
    let start = vec![1u64, 0, 0, 0, 1, 0, 0, 0, 1];
    let fiber = fiber_enumerate(&l.configuration(), &start, 10_000).unwrap();
    let index: HashMap<Vec<u64>, usize> = fiber.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    let basis = quasi_independence(&shape, l.mask()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = start;
    let batches = 100;
    let size = steps / batches;
    let k = fiber.len();
    let mut batch_freq = vec![vec![0.0; k]; batches];
    for step in 0..batches * size {
        mh_step(&mut x, &basis, &mut rng);
        batch_freq[step / size][index[&x]] += 1.0 / size as f64;
    }
    let mut frequencies = vec![0.0; k];
    let mut std_errors = vec![0.0; k];
    for s in 0..k {
        let means: Vec<f64> = batch_freq.iter().map(|b| b[s]).collect();
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
        frequencies[s] = mean;
        std_errors[s] = (var / batches as f64).sqrt();
    }
    let p = 1.0 / k as f64;
    Occupancy {
        states: k,
        frequencies,
        std_errors,
        iid_std_error: (p * (1.0 - p) / (batches * size) as f64).sqrt(),
    }
}

/// `(i,i,k)` and `(i,j,j)` structural zeros on a `k×k×k` table.
pub fn pewee_mask(k: usize) -> Vec<bool> {
    let shape = Shape::new(vec![k; 3]).unwrap();
    (0..shape.num_cells())
        .map(|c| {
            let x = shape.cell(c);
            x[0] == x[1] || x[1] == x[2]
        })
        .collect()
}

/// Factors 2 and 3 independent at level 1 of factor 1, saturated at level 2.
pub fn small_split_model() -> Subspace {
    use hsm::subspace::{split_model, SplitClique, SplitSlice};
    let clique = SplitClique {
        clique: vs(&[1, 2, 3]),
        z: vs(&[1]),
        slices: vec![
            SplitSlice { level: vec![0], facets: vec![vs(&[2]), vs(&[3])] },
            SplitSlice { level: vec![1], facets: vec![vs(&[2, 3])] },
        ],
    };
    split_model(Shape::new(vec![2, 3, 3]).unwrap(), None, &[clique], vec![]).unwrap()
}

/// Models checked against the fiber oracle.
pub fn oracle_models() -> Vec<(&'static str, Subspace)> {
    let s333 = Shape::new(vec![3, 3, 3]).unwrap();
    let ci = Complex::from_lists(3, &[&[1, 2], &[2, 3]]).unwrap();
    let s33 = Shape::new(vec![3, 3]).unwrap();
    let diag: Vec<bool> = (0..9).map(|i| i / 3 == i % 3).collect();
    vec![
        ("CI 3x3x3", Subspace::hierarchical(s333.clone(), &ci, None).unwrap()),
        ("quasi-independence 3x3 diagonal", Subspace::builder(s33).mask(diag).main_effects().build().unwrap()),
        ("pewee-style [12][23] 3x3x3", Subspace::hierarchical(s333.clone(), &ci, Some(pewee_mask(3))).unwrap()),
        (
            "pewee-style quasi-independence 3x3x3",
            Subspace::builder(s333).mask(pewee_mask(3)).main_effects().build().unwrap(),
        ),
        ("split 2x3x3", small_split_model()),
    ]
}
