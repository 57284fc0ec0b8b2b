use digitfreq_core::schedules::{IndexFn, Schedule};
use num_rational::Ratio;
use proptest::prelude::*;

fn polynomial_schedule(coeffs: &[(u64, u64)]) -> Schedule {
    // q_i(n) = a_i n^2 + (b_i + i) n, with a_i nondecreasing keeps the gaps.
    let fns: Vec<IndexFn> = coeffs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let text = if a == 0 {
                format!("{}n", b + 2 * i as u64 + 1)
            } else {
                format!("{a}n^2 + {}n", b + 2 * i as u64 + 1)
            };
            text.parse().unwrap()
        })
        .collect();
    Schedule::new(fns, Ratio::new(1, 2)).unwrap()
}

proptest! {
    #[test]
    fn indices_monotone_in_i_and_n(mut coeffs in proptest::collection::vec((0u64..3, 0u64..3), 1..4), n_max in 2u64..500) {
        coeffs.sort();
        let s = polynomial_schedule(&coeffs);
        prop_assume!(s.validate(n_max).is_ok());
        for n in 1..=n_max {
            let idx = s.indices(n).unwrap();
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            if n > 1 {
                let prev = s.indices(n - 1).unwrap();
                prop_assert!(prev.iter().zip(&idx).all(|(a, b)| a < b));
            }
        }
    }

    #[test]
    fn max_index_monotone(mut coeffs in proptest::collection::vec((0u64..3, 0u64..3), 1..4), n in 1u64..10_000) {
        coeffs.sort();
        let s = polynomial_schedule(&coeffs);
        prop_assert!(s.max_index(n).unwrap() <= s.max_index(n + 1).unwrap());
    }

    #[test]
    fn index_functions_round_trip(a in 0u64..5, b in 1u64..5, c in 0u64..5) {
        let text = if a == 0 { format!("{b}n + {c}") } else { format!("{a}n^2 + {b}n + {c}") };
        let f: IndexFn = text.parse().unwrap();
        let again: IndexFn = f.to_string().parse().unwrap();
        prop_assert_eq!(f, again);
    }
}

#[test]
fn swapped_functions_fail_validation() {
    let s = Schedule::with_default_epsilon(vec!["2n".parse().unwrap(), "n".parse().unwrap()]).unwrap();
    let v = s.validate(10).unwrap_err();
    assert_eq!((v.index, v.n), (2, 1));
}

#[test]
fn largest_epsilon_is_exact() {
    let s = Schedule::linear(3);
    assert_eq!(s.largest_epsilon(100), Some(Ratio::new(1, 1)));
}
