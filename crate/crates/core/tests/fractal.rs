use digitfreq_core::digitkit::DigitSource;
use digitfreq_core::fractal::{
    cf_bound_certificate, construct_gzb, construct_up_point, hd_bernoulli, hd_markov, local_dimension_trace,
    perturb_bernoulli, PointMode,
};
use digitfreq_core::measures::{sample_stream, BernoulliLaw, Law};
use digitfreq_core::rng::StreamSeed;
use digitfreq_core::schedules::{IndexFn, Schedule};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow};
use proptest::prelude::*;

const TWO_LN_GOLDEN: f64 = 0.962_423_650_119_206_895_0;
const LYAPUNOV_UNIFORM_12: f64 = 1.3455;

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

#[test]
fn bernoulli_dimension_peaks_only_at_uniform() {
    for m in 2..=4usize {
        let steps = 12;
        for c in compositions(steps, m) {
            let r: Vec<f64> = c.iter().map(|&x| x as f64 / steps as f64).collect();
            let v = hd_bernoulli(&r, m as u32).unwrap().value;
            assert!((0.0..=1.0).contains(&v), "{r:?} -> {v}");
            let uniform = c.iter().all(|&x| x * m as u32 == steps);
            assert!(uniform || v < 1.0 - 1e-9, "{r:?} -> {v}");
            if uniform {
                assert_eq!(v, 1.0);
            }
        }
    }
}

proptest! {
    #[test]
    fn product_form_matches_bernoulli(raw in proptest::collection::vec(0.05f64..1.0, 2..5)) {
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let joint: Vec<Vec<f64>> = q.iter().map(|a| q.iter().map(|b| a * b).collect()).collect();
        let a = hd_markov(&joint).unwrap().value;
        let b = hd_bernoulli(&q, q.len() as u32).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn valid_perturbations_satisfy_entropy_inequality(
        raw in proptest::collection::vec(0.0f64..1.0, 2..6),
        zero_mask in proptest::collection::vec(any::<bool>(), 6),
        delta in 1e-4f64..0.2,
    ) {
        let mut r: Vec<f64> = raw.iter().zip(&zero_mask).map(|(&x, &z)| if z { 0.0 } else { x + 0.01 }).collect();
        prop_assume!(r.iter().any(|&x| x > 0.0));
        let total: f64 = r.iter().sum();
        r.iter_mut().for_each(|x| *x /= total);
        let p = perturb_bernoulli(&r, delta).unwrap();
        if p.valid {
            prop_assert!(p.inequality_holds(1e-12));
        }
        if p.noop {
            prop_assert_eq!(&p.perturbed, &r);
        }
    }
}

#[test]
fn perturbed_dimension_converges_as_delta_shrinks() {
    let r = [0.6, 0.4, 0.0];
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&d| {
            let p = perturb_bernoulli(&r, d).unwrap();
            (p.hd_perturbed.unwrap() - p.hd_original).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(*gaps.last().unwrap() < 1e-4, "{gaps:?}");
}

#[test]
fn local_dimension_respects_perturbed_entropy() {
    let p = perturb_bernoulli(&[0.7, 0.3, 0.0], 0.05).unwrap();
    let law = Law::Bernoulli(BernoulliLaw::new(p.perturbed.clone()).unwrap());
    let bound = hd_bernoulli(&p.perturbed, 3).unwrap().value + 0.02;
    let n = 100_000;
    for seed in 0..8 {
        let stream = sample_stream(&law, StreamSeed::new(seed, 0), n + 1);
        let grid: Vec<u64> = (1..=10).map(|k| k * n / 10).collect();
        let trace = local_dimension_trace(&law, &stream, &grid).unwrap();
        let tail = trace.points.iter().skip(5).map(|p| p.value).fold(f64::MIN, f64::max);
        assert!(tail <= bound, "seed {seed}: {tail} > {bound}");
    }
}

#[test]
fn gzb_preserves_frequencies_and_inserts_large_digits() {
    let n = 100_000u64;
    let nu = BernoulliLaw::positive_integers_exact(vec![
        BigRational::new(BigInt::from(1), BigInt::from(2)),
        BigRational::new(BigInt::from(1), BigInt::from(2)),
    ])
    .unwrap();
    let s = Schedule::with_default_epsilon(vec!["n".parse::<IndexFn>().unwrap(), "2n".parse().unwrap()]).unwrap();
    let z = construct_up_point(&nu, PointMode::Iid, StreamSeed::new(5, 0), Some(2 * n + 2)).unwrap();
    let b = BigRational::from_integer(BigInt::from(2));
    let g = construct_gzb(&z, &b, &s, 6).unwrap();
    for ins in g.insertions() {
        let hits = s.indices(ins.k).unwrap();
        assert!(!hits.contains(&ins.index));
        assert_eq!(ins.index, ins.k * ins.k + ins.m);
        let big_b = BigUint::from(2u32).pow((ins.k * ins.k) as u32);
        let v = g.digit_exact(ins.index).unwrap();
        assert!(v > big_b && v < &big_b * 2u32, "k = {}", ins.k);
    }
    let mut differing = 0u64;
    for k in 1..=n {
        let idx = s.indices(k).unwrap();
        let a: Vec<u64> = idx.iter().map(|&i| z.digit(i).unwrap()).collect();
        let c: Vec<u64> = idx.iter().map(|&i| g.digit(i).unwrap()).collect();
        differing += u64::from(a != c);
    }
    let tol = (n as f64).sqrt() / n as f64 + 0.005;
    assert!((differing as f64 / n as f64) <= tol, "{differing} tuples differ");
}

#[test]
fn cf_certificates() {
    let point = BernoulliLaw::positive_integers_exact(vec![BigRational::one()]).unwrap();
    let c = cf_bound_certificate(&point, &[StreamSeed::new(0, 0)], 10_000).unwrap();
    assert!((c.lyapunov - TWO_LN_GOLDEN).abs() / TWO_LN_GOLDEN <= 0.005);
    assert_eq!((c.entropy, c.lower_bound, c.structural_bound), (0.0, 0.5, 0.5));

    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let nu = BernoulliLaw::positive_integers_exact(vec![half.clone(), half]).unwrap();
    let seeds: Vec<StreamSeed> = (0..50).map(|s| StreamSeed::new(s, 0)).collect();
    let c = cf_bound_certificate(&nu, &seeds, 10_000).unwrap();
    assert!((c.lyapunov - LYAPUNOV_UNIFORM_12).abs() <= 0.01, "{}", c.lyapunov);
    assert!(!c.insufficient_n);
    assert_eq!(c.lower_bound, 0.5f64.max(2f64.ln() / c.lyapunov));
}
