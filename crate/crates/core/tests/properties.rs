use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hsm::fit::{fit_hsm, FitPlan, FitOptions};
use hsm::markov::fiber::check_connectivity;
use hsm::markov::{auto_basis, quasi_independence, BasisOptions, MarkovBasis, Move};
use hsm::mcmc::mh_step;
use hsm::{Complex, Shape, Subspace, Table, VarSet};

fn masked_two_way() -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (2usize..=4, 2usize..=4).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(prop::bool::weighted(0.2), r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn move_sign_is_canonical(entries in prop::collection::vec((0usize..20, -3i64..=3), 1..8)) {
        let neg: Vec<(usize, i64)> = entries.iter().map(|&(c, v)| (c, -v)).collect();
        prop_assert_eq!(Move::new(entries), Move::new(neg));
    }

    #[test]
    fn varset_relabel_round_trip(bits in 1u32..(1 << 8), sub in 0u32..(1 << 8)) {
        let within = VarSet::from_bits(bits);
        let s = VarSet::from_bits(sub & bits);
        prop_assert_eq!(s.relabel_within(within).unlabel_within(within), s);
    }

    #[test]
    fn quasi_independence_bases_connect((r, c, mask) in masked_two_way()) {
        let shape = Shape::new(vec![r, c]).unwrap();
        prop_assume!(mask.iter().any(|z| !z));
        let l = Subspace::builder(shape.clone()).mask(mask.clone()).main_effects().build().unwrap();
        let b = quasi_independence(&shape, &mask).unwrap();
        b.validate(&l.configuration()).unwrap();
        let n = if r * c - mask.iter().filter(|&&z| z).count() > 12 { 3 } else { 4 };
        let report = check_connectivity(&l.configuration(), b.moves(), n, 1_000_000).unwrap();
        prop_assert!(report.connected(), "{:?}", report);
    }

    #[test]
    fn basis_text_round_trip((r, c, mask) in masked_two_way()) {
        let shape = Shape::new(vec![r, c]).unwrap();
        prop_assume!(mask.iter().any(|z| !z));
        let l = Subspace::builder(shape.clone()).mask(mask.clone()).main_effects().build().unwrap();
        let b = quasi_independence(&shape, &mask).unwrap();
        let again = MarkovBasis::from_text(&b.to_text(), &l).unwrap();
        prop_assert_eq!(again.moves(), b.moves());
    }

    #[test]
    fn mh_steps_stay_in_the_fiber(counts in prop::collection::vec(0u64..5, 12), seed in any::<u64>()) {
        let shape = Shape::new(vec![2, 3, 2]).unwrap();
        let delta = Complex::from_lists(3, &[&[1, 2], &[2, 3]]).unwrap();
        let l = Subspace::hierarchical(shape, &delta, None).unwrap();
        let b = auto_basis(&l, &BasisOptions::default()).unwrap();
        let config = l.configuration();
        let to_i = |x: &[u64]| x.iter().map(|&v| v as i64).collect::<Vec<_>>();
        let stat = config.apply_dense(&to_i(&counts));
        let mut x = counts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            mh_step(&mut x, &b, &mut rng);
            prop_assert_eq!(config.apply_dense(&to_i(&x)), stat.clone());
        }
    }

    #[test]
    fn fitted_probabilities_match_margins(counts in prop::collection::vec(1u64..30, 18)) {
        let shape = Shape::new(vec![3, 2, 3]).unwrap();
        let l = Subspace::builder(shape.clone())
            .main_effects()
            .uniform_association(VarSet::of(&[1, 2]))
            .interaction(VarSet::of(&[2, 3]))
            .build()
            .unwrap();
        let t = Table::from_counts(shape, counts).unwrap();
        let f = fit_hsm(&l, &t).unwrap();
        let total: f64 = f.p_hat.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let n = t.n() as f64;
        let fitted: Vec<f64> = f.fitted_counts();
        for g in l.basis() {
            let dense = l.to_dense(g);
            let a: f64 = dense.iter().zip(&fitted).map(|(&d, &m)| d as f64 * m).sum();
            let b: f64 = dense.iter().zip(t.counts()).map(|(&d, &x)| d as f64 * x as f64).sum();
            prop_assert!((a - b).abs() <= 1e-8 * n, "{} vs {}", a, b);
        }
    }

    #[test]
    fn loglik_plan_matches_fit(counts in prop::collection::vec(1u64..30, 16)) {
        let shape = Shape::new(vec![2, 2, 2, 2]).unwrap();
        let delta = Complex::from_lists(4, &[&[1, 2], &[2, 3], &[3, 4]]).unwrap();
        let l = Subspace::hierarchical(shape.clone(), &delta, None).unwrap();
        let t = Table::from_counts(shape, counts.clone()).unwrap();
        let plan = FitPlan::new(&l).unwrap();
        let ll = plan.loglik(&counts, &FitOptions::default()).unwrap();
        let f = fit_hsm(&l, &t).unwrap();
        prop_assert!((ll - f.loglik).abs() < 1e-8 * f.loglik.abs().max(1.0));
    }

    #[test]
    fn marginals_preserve_total(counts in prop::collection::vec(0u64..10, 24), bits in 1u32..8) {
        let shape = Shape::new(vec![2, 3, 4]).unwrap();
        let t = Table::from_counts(shape, counts).unwrap();
        let m = t.marginal(VarSet::from_bits(bits)).unwrap();
        prop_assert_eq!(m.n(), t.n());
    }
}
