use digitfreq_core::measures::FiniteMarkovChain;
use digitfreq_core::mixing::{
    brute_force_psi, coefficients, markov_psi, mixingale_decay, size_minus_half, two_state_chain, DecayClass,
};
use digitfreq_core::observables::{Observable, TableValues};
use digitfreq_core::schedules::{IndexFn, Schedule};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn chain3(raw: &[i64]) -> FiniteMarkovChain {
    let rows: Vec<Vec<BigRational>> = raw
        .chunks(3)
        .map(|r| {
            let total: i64 = r.iter().sum();
            r.iter().map(|&x| rat(x, total)).collect()
        })
        .collect();
    FiniteMarkovChain::from_rationals(rows, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psi_dominates_alpha_and_phi(raw in proptest::collection::vec(1i64..10, 9), n in 0u64..12) {
        let c = coefficients(&chain3(&raw), n).unwrap();
        prop_assert!(4.0 * c.alpha <= c.psi + 1e-12);
        prop_assert!(2.0 * c.phi <= c.psi + 1e-12);
    }

    #[test]
    fn three_state_brute_force_agrees(raw in proptest::collection::vec(1i64..10, 9), n in 1u64..5, h in 1usize..4) {
        let chain = chain3(&raw);
        let exact = markov_psi(&chain, n).unwrap();
        prop_assert!((exact - brute_force_psi(&chain, n, h).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn mixingale_norms_nonincreasing_in_m(a in 1i64..8, b in 1i64..8, values in proptest::collection::vec(-5i64..6, 4)) {
        let chain = two_state_chain(rat(a, 8), rat(b, 8)).unwrap();
        let f = Observable::table(2, 2, TableValues::Exact(values.iter().map(|&v| rat(v, 1)).collect())).unwrap();
        let s = Schedule::with_default_epsilon(vec!["n".parse::<IndexFn>().unwrap(), "2n".parse().unwrap()]).unwrap();
        let ms: Vec<u64> = (0..=20).collect();
        let rows = mixingale_decay(&chain, &f, &s, 2, &ms, &[24]).unwrap();
        prop_assert!(rows.windows(2).all(|w| w[1].norm <= w[0].norm + 1e-12));
    }
}

#[test]
fn geometric_psi_is_size_minus_half() {
    for (a, b) in [(1, 4), (1, 8), (3, 4), (1, 2)] {
        let chain = two_state_chain(rat(a, 8), rat(b, 8)).unwrap();
        let report = size_minus_half(|n| markov_psi(&chain, n).unwrap(), 5000, 0.1).unwrap();
        assert!(report.verdict, "({a},{b}): {:?}", report.class);
    }
    let chain = two_state_chain(rat(1, 4), rat(1, 4)).unwrap();
    let report = size_minus_half(|n| markov_psi(&chain, n).unwrap(), 100_000, 0.1).unwrap();
    assert!(matches!(report.class, DecayClass::Exponential { .. }), "{:?}", report.class);
}

#[test]
fn independent_chain_has_zero_coefficients() {
    let chain = two_state_chain(rat(1, 2), rat(1, 2)).unwrap();
    let c = coefficients(&chain, 1).unwrap();
    assert_eq!((c.psi, c.phi, c.alpha, c.rho), (0.0, 0.0, 0.0, 0.0));
}
