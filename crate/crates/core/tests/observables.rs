use digitfreq_core::measures::{BernoulliLaw, Law, MarkovLaw};
use digitfreq_core::observables::{decompose, mean_f, mean_f_monte_carlo, Observable, TableValues};
use digitfreq_core::rng::StreamSeed;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

const CAP: u64 = 100_000;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn simplex(raw: &[i64]) -> Vec<BigRational> {
    let total: i64 = raw.iter().sum();
    raw.iter().map(|&x| rat(x, total)).collect()
}

proptest! {
    #[test]
    fn decomposition_telescopes_and_centers(
        raw in proptest::collection::vec(1i64..10, 2..4),
        arity in 1usize..4,
        seed in proptest::collection::vec((-20i64..20, 1i64..7), 27),
    ) {
        let m = raw.len() as u32;
        let size = (m as usize).pow(arity as u32);
        let values: Vec<BigRational> = seed.iter().take(size).map(|&(p, q)| rat(p, q)).collect();
        let f = Observable::table(m, arity, TableValues::Exact(values)).unwrap();
        let law = Law::Bernoulli(BernoulliLaw::from_rationals(simplex(&raw)).unwrap());
        let d = decompose(&f, &law.marginal(), CAP).unwrap();
        prop_assert!(d.exact_tables().is_some());
        prop_assert_eq!(d.telescoping_error(), 0.0);
        prop_assert_eq!(d.centering_error(), 0.0);
    }

    #[test]
    fn indicator_mean_is_product_of_weights(
        raw in proptest::collection::vec(1i64..10, 2..5),
        word in proptest::collection::vec(0u64..5, 1..5),
    ) {
        let m = raw.len() as u64;
        let weights = simplex(&raw);
        let word: Vec<u64> = word.into_iter().map(|d| d % m).collect();
        let law = Law::Bernoulli(BernoulliLaw::from_rationals(weights.clone()).unwrap());
        let f = Observable::indicator_product(word.clone()).unwrap();
        let mean = mean_f(&f, &law.marginal(), CAP).unwrap();
        let product = word.iter().fold(rat(1, 1), |acc, &d| acc * &weights[d as usize]);
        prop_assert_eq!(mean.exact, Some(product));
    }
}

#[test]
fn markov_marginal_decomposes_exactly() {
    let joint = vec![vec![rat(2, 5), rat(1, 10)], vec![rat(1, 10), rat(2, 5)]];
    let law = Law::Markov(MarkovLaw::from_rationals(joint).unwrap());
    let f = Observable::table(2, 3, TableValues::Exact((0..8).map(|c| rat(c * c - 3, 2)).collect())).unwrap();
    let d = decompose(&f, &law.marginal(), CAP).unwrap();
    assert_eq!(d.telescoping_error(), 0.0);
    assert_eq!(d.centering_error(), 0.0);
    assert!(d.mean_exact().is_some_and(|m| !m.is_zero()));
}

#[test]
fn monte_carlo_mean_within_four_stderr() {
    let cases: Vec<(Law, Observable)> = vec![
        (
            Law::Bernoulli(BernoulliLaw::new(vec![0.6, 0.4]).unwrap()),
            Observable::indicator_product(vec![0, 1, 0]).unwrap(),
        ),
        (
            Law::Bernoulli(BernoulliLaw::new(vec![0.2, 0.3, 0.5]).unwrap()),
            Observable::table(3, 2, TableValues::Real((0..9).map(|c| (c as f64).sin()).collect())).unwrap(),
        ),
    ];
    for (i, (law, f)) in cases.iter().enumerate() {
        let exact = mean_f(f, &law.marginal(), CAP).unwrap().value;
        let mc = mean_f_monte_carlo(f, &law.marginal(), StreamSeed::new(9 + i as u64, 0), 200_000).unwrap();
        assert!((mc.estimate - exact).abs() <= 4.0 * mc.stderr, "case {i}: {} vs {exact}", mc.estimate);
    }
}
