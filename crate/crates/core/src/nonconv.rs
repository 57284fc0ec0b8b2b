//! Nonconventional sums `S(N) = sum_{n <= N} F(X(q_1(n)), .., X(q_l(n)))`,
//! their components `S_i(N) = sum_{n <= N} F_i(X(q_1(n)), .., X(q_i(n)))`,
//! and the digit-word counters `N_alpha(x, N)` and `N_{alpha,beta}(x, N)`.
//!
//! Counting is exact: each run tallies how often every digit tuple occurs
//! and only then weighs the tallies by `F`, so sums over rational `F` are
//! exact rationals and the work parallelizes over `n` with a deterministic
//! reduction.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::digitkit::{Alphabet, Digit, DigitError, DigitSource};
use crate::measures::{sample_stream, Law, Marginal};
use crate::observables::{
    decode, decompose, encode, mean_f, Decomposition, Mean, Observable, ObservableError, DEFAULT_TUPLE_CAP,
};
use crate::rng::StreamSeed;
use crate::schedules::{Schedule, ScheduleError};

/// Dense tallies are used up to this many tuples, hash maps beyond.
const DENSE_LIMIT: u128 = 1 << 16;

/// Smallest dyadic checkpoint of the default grid.
pub const FIRST_CHECKPOINT: u64 = 1 << 10;

/// Normalization tolerance of a frequency spec.
pub const SPEC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonconvError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Digit(#[from] DigitError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("observable has arity {observable}, schedule has {schedule}")]
    ArityMismatch { observable: usize, schedule: usize },
    #[error("checkpoints must be increasing, positive and end at N = {n}")]
    BadCheckpoints { n: u64 },
    #[error("stream has {available} digits, the run reads index {needed}")]
    StreamTooShort { needed: u64, available: u64 },
    #[error("digit {digit} lies outside the decomposition alphabet {alphabet}")]
    OutsideDecomposition { digit: Digit, alphabet: u32 },
    #[error("reconstruction S(N) = N Fbar + sum S_i(N) fails at N = {n} by {error}")]
    Reconstruction { n: u64, error: f64 },
    #[error("frequency spec: {0}")]
    Spec(String),
}

/// Powers of two from `2^10` below `N`, then `N`; shorter runs start at 1.
pub fn default_checkpoints(n: u64) -> Vec<u64> {
    if n == 0 {
        return Vec::new();
    }
    let start = if n > FIRST_CHECKPOINT { FIRST_CHECKPOINT } else { 1 };
    let mut out: Vec<u64> = std::iter::successors(Some(start), |&c| c.checked_mul(2))
        .take_while(|&c| c < n)
        .collect();
    out.push(n);
    out
}

fn check_checkpoints(checkpoints: &[u64], n: u64) -> Result<(), NonconvError> {
    let increasing = checkpoints.windows(2).all(|w| w[0] < w[1]);
    if checkpoints.is_empty() || !increasing || checkpoints[0] == 0 || *checkpoints.last().unwrap() != n {
        return Err(NonconvError::BadCheckpoints { n });
    }
    Ok(())
}

/// Who produced a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<StreamSeed>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub checkpoints: Vec<u64>,
    /// `S(N)/N` at each checkpoint.
    pub averages: Vec<f64>,
    /// `S(N)` at each checkpoint, when `F` is rational.
    pub sums_exact: Option<Vec<BigRational>>,
    pub target: f64,
    pub target_exact: Option<BigRational>,
    /// `S_i(N)/N` for `i = 1..l`, indexed `[checkpoint][i - 1]`.
    pub components: Option<Vec<Vec<f64>>>,
    pub provenance: Option<Provenance>,
}

impl ConvergenceTrace {
    pub fn final_average(&self) -> f64 {
        *self.averages.last().expect("trace has checkpoints")
    }

    /// `|S(N)/N - Fbar|` at the last checkpoint.
    pub fn final_deviation(&self) -> f64 {
        (self.final_average() - self.target).abs()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }
}

/// Occurrence counts of digit tuples.
#[derive(Debug, Clone)]
enum Tally {
    Dense { m: u64, width: usize, counts: Vec<u64> },
    Sparse(HashMap<Vec<Digit>, u64>),
}

impl Tally {
    fn new(alphabet: Alphabet, width: usize) -> Self {
        match alphabet {
            Alphabet::Finite(m) if (m as u128).saturating_pow(width as u32) <= DENSE_LIMIT => Tally::Dense {
                m: m as u64,
                width,
                counts: vec![0; (m as usize).pow(width as u32)],
            },
            _ => Tally::Sparse(HashMap::new()),
        }
    }

    fn add(&mut self, tuple: &[Digit]) {
        match self {
            Tally::Dense { m, counts, .. } => counts[encode(tuple, *m)] += 1,
            Tally::Sparse(map) => *map.entry(tuple.to_vec()).or_insert(0) += 1,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        match (&mut self, other) {
            (Tally::Dense { counts, .. }, Tally::Dense { counts: o, .. }) => {
                counts.iter_mut().zip(o).for_each(|(a, b)| *a += b);
            }
            (Tally::Sparse(map), Tally::Sparse(o)) => {
                for (k, v) in o {
                    *map.entry(k).or_insert(0) += v;
                }
            }
            _ => unreachable!("tallies of one run share a layout"),
        }
        self
    }

    /// Nonzero entries in a deterministic order.
    fn entries(&self) -> Vec<(Vec<Digit>, u64)> {
        match self {
            Tally::Dense { m, width, counts } => counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(code, &c)| (decode(code, *m, *width), c))
                .collect(),
            Tally::Sparse(map) => {
                let mut v: Vec<(Vec<Digit>, u64)> = map.iter().map(|(k, &c)| (k.clone(), c)).collect();
                v.sort_unstable();
                v
            }
        }
    }
}

/// Tallies the tuples `(X(k_1), .., X(k_w))` for `n` in `from..=to`, where
/// `indices(n, out)` writes the `k`'s.
fn tally_range<S, I>(stream: &S, width: usize, from: u64, to: u64, indices: &I) -> Result<Tally, NonconvError>
where
    S: DigitSource + ?Sized,
    I: Fn(u64, &mut [u64]) -> Result<(), ScheduleError> + Sync,
{
    let alphabet = stream.alphabet();
    if from > to {
        return Ok(Tally::new(alphabet, width));
    }
    const CHUNK: u64 = 1 << 14;
    let chunks: Vec<(u64, u64)> = (0..=(to - from) / CHUNK)
        .map(|c| (from + c * CHUNK, (from + (c + 1) * CHUNK - 1).min(to)))
        .collect();
    chunks
        .into_par_iter()
        .map(|(a, b)| {
            let mut tally = Tally::new(alphabet, width);
            let mut idx = vec![0u64; width];
            let mut tuple = vec![0 as Digit; width];
            for n in a..=b {
                indices(n, &mut idx)?;
                for (slot, &k) in tuple.iter_mut().zip(&idx) {
                    *slot = stream.digit(k)?;
                }
                tally.add(&tuple);
            }
            Ok::<_, NonconvError>(tally)
        })
        .try_reduce(|| Tally::new(alphabet, width), |a, b| Ok(a.merge(b)))
}

/// Fails early when a finite stream cannot serve index `needed`, and fills
/// the prefix buffer of sequential generators before the parallel scan.
fn prepare_stream<S: DigitSource + ?Sized>(stream: &S, needed: u64) -> Result<(), NonconvError> {
    if let Some(available) = stream.len() {
        if needed >= available {
            return Err(NonconvError::StreamTooShort { needed, available });
        }
    }
    stream.digit(needed)?;
    Ok(())
}

struct Accumulator<'a> {
    f: &'a Observable,
    decomposition: Option<&'a Decomposition>,
    exact: bool,
    sum: f64,
    sum_exact: BigRational,
    components: Vec<f64>,
    components_exact: Vec<BigRational>,
}

impl<'a> Accumulator<'a> {
    fn new(f: &'a Observable, decomposition: Option<&'a Decomposition>) -> Self {
        let l = f.arity();
        let exact = match decomposition {
            Some(d) => d.exact_tables().is_some(),
            None => f.is_exact(),
        };
        Self {
            f,
            decomposition,
            exact,
            sum: 0.0,
            sum_exact: BigRational::zero(),
            components: vec![0.0; l],
            components_exact: vec![BigRational::zero(); l],
        }
    }

    fn absorb(&mut self, tally: &Tally) -> Result<(), NonconvError> {
        let l = self.f.arity();
        for (tuple, count) in tally.entries() {
            let c = BigRational::from_integer(BigInt::from(count));
            match self.decomposition {
                None => {
                    self.sum += count as f64 * self.f.evaluate(&tuple);
                    if self.exact {
                        self.sum_exact += &c * self.f.evaluate_exact(&tuple).expect("exact observable");
                    }
                }
                Some(d) => {
                    if let Some(&digit) = tuple.iter().find(|&&x| x >= d.alphabet() as u64) {
                        return Err(NonconvError::OutsideDecomposition {
                            digit,
                            alphabet: d.alphabet(),
                        });
                    }
                    let code = encode(&tuple, d.alphabet() as u64);
                    self.sum += count as f64 * d.table()[code];
                    for i in 1..=l {
                        self.components[i - 1] += count as f64 * d.component(i, &tuple);
                    }
                    if self.exact {
                        self.sum_exact += &c * &d.table_exact().expect("exact table")[code];
                        for i in 1..=l {
                            self.components_exact[i - 1] += &c * d.component_exact(i, &tuple).expect("exact");
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

struct RunOutput {
    averages: Vec<f64>,
    sums_exact: Option<Vec<BigRational>>,
    components: Option<Vec<Vec<f64>>>,
}

fn run<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    f: &Observable,
    decomposition: Option<&Decomposition>,
    target: &Mean,
    n: u64,
    checkpoints: &[u64],
) -> Result<RunOutput, NonconvError> {
    if f.arity() != schedule.arity() {
        return Err(NonconvError::ArityMismatch {
            observable: f.arity(),
            schedule: schedule.arity(),
        });
    }
    check_checkpoints(checkpoints, n)?;
    schedule.ensure_valid(n)?;
    prepare_stream(stream, schedule.max_index(n)?)?;
    let l = schedule.arity();
    let indices = |k: u64, out: &mut [u64]| schedule.indices_into(k, out);
    let mut acc = Accumulator::new(f, decomposition);
    let mut averages = Vec::with_capacity(checkpoints.len());
    let mut sums_exact = Vec::new();
    let mut components = Vec::new();
    let mut done = 0;
    for &c in checkpoints {
        let tally = tally_range(stream, l, done + 1, c, &indices)?;
        acc.absorb(&tally)?;
        done = c;
        let nf = c as f64;
        if acc.exact {
            let avg = &acc.sum_exact / BigRational::from_integer(BigInt::from(c));
            averages.push(avg.to_f64().unwrap_or(f64::NAN));
            sums_exact.push(acc.sum_exact.clone());
        } else {
            averages.push(acc.sum / nf);
        }
        if decomposition.is_some() {
            check_reconstruction(&acc, target, c)?;
            components.push(if acc.exact {
                acc.components_exact
                    .iter()
                    .map(|s| s.to_f64().unwrap_or(f64::NAN) / nf)
                    .collect()
            } else {
                acc.components.iter().map(|s| s / nf).collect()
            });
        }
    }
    Ok(RunOutput {
        averages,
        sums_exact: acc.exact.then_some(sums_exact),
        components: decomposition.map(|_| components),
    })
}

fn check_reconstruction(acc: &Accumulator<'_>, target: &Mean, n: u64) -> Result<(), NonconvError> {
    if let (true, Some(mean)) = (acc.exact, &target.exact) {
        let rebuilt: BigRational = mean * BigRational::from_integer(BigInt::from(n))
            + acc.components_exact.iter().cloned().sum::<BigRational>();
        if rebuilt != acc.sum_exact {
            let error = (&rebuilt - &acc.sum_exact).to_f64().unwrap_or(f64::NAN).abs();
            return Err(NonconvError::Reconstruction { n, error });
        }
        return Ok(());
    }
    let rebuilt = target.value * n as f64 + acc.components.iter().sum::<f64>();
    let error = (rebuilt - acc.sum).abs();
    let scale = n as f64 * acc.f.sup_abs().max(1.0);
    if error > 1e-9 * scale {
        return Err(NonconvError::Reconstruction { n, error });
    }
    Ok(())
}

/// `S(N)/N` along `checkpoints` (the last one must be `N`) with target
/// `Fbar = int F d(mu x .. x mu)`.
pub fn run_slln<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    f: &Observable,
    marginal: &Marginal,
    n: u64,
    checkpoints: &[u64],
) -> Result<ConvergenceTrace, NonconvError> {
    let target = mean_f(f, marginal, DEFAULT_TUPLE_CAP)?;
    let out = run(stream, schedule, f, None, &target, n, checkpoints)?;
    Ok(ConvergenceTrace {
        checkpoints: checkpoints.to_vec(),
        averages: out.averages,
        sums_exact: out.sums_exact,
        target: target.value,
        target_exact: target.exact,
        components: None,
        provenance: None,
    })
}

/// Component averages `S_i(N)/N` next to `S(N)/N`; checks
/// `S(N) = N Fbar + sum_i S_i(N)` at every checkpoint, exactly for rational
/// data.
pub fn run_components<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    f: &Observable,
    decomposition: &Decomposition,
    n: u64,
    checkpoints: &[u64],
) -> Result<ConvergenceTrace, NonconvError> {
    let target = Mean {
        value: decomposition.mean(),
        exact: decomposition.mean_exact().cloned(),
    };
    let out = run(stream, schedule, f, Some(decomposition), &target, n, checkpoints)?;
    Ok(ConvergenceTrace {
        checkpoints: checkpoints.to_vec(),
        averages: out.averages,
        sums_exact: out.sums_exact,
        target: target.value,
        target_exact: target.exact,
        components: out.components,
        provenance: None,
    })
}

/// Runs `run_slln` (with components when the marginal is finite) on fresh
/// samples of `law` for each seed, in parallel.
pub fn run_ensemble(
    law: &Law,
    schedule: &Schedule,
    f: &Observable,
    n: u64,
    seeds: &[StreamSeed],
    with_components: bool,
) -> Result<Vec<ConvergenceTrace>, NonconvError> {
    let marginal = law.marginal();
    let decomposition = if with_components {
        Some(decompose(f, &marginal, DEFAULT_TUPLE_CAP)?)
    } else {
        None
    };
    let checkpoints = default_checkpoints(n);
    let count = schedule.max_index(n)? + 2;
    seeds
        .par_iter()
        .map(|&seed| {
            let stream = sample_stream(law, seed, count);
            let trace = match &decomposition {
                Some(d) => run_components(&stream, schedule, f, d, n, &checkpoints)?,
                None => run_slln(&stream, schedule, f, &marginal, n, &checkpoints)?,
            };
            Ok(trace.with_provenance(Provenance {
                config_hash: String::new(),
                seed: Some(seed),
            }))
        })
        .collect()
}

/// All digit tuples `(a_{q_1(k)}, .., a_{q_l(k)})`, `k <= N`, with counts.
pub fn count_all_frequencies<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    n: u64,
) -> Result<BTreeMap<Vec<Digit>, u64>, NonconvError> {
    schedule.ensure_valid(n)?;
    prepare_stream(stream, schedule.max_index(n)?)?;
    let indices = |k: u64, out: &mut [u64]| schedule.indices_into(k, out);
    let tally = tally_range(stream, schedule.arity(), 1, n, &indices)?;
    Ok(tally.entries().into_iter().collect())
}

/// `N_alpha(x, N) = #{k <= N : (a_{q_1(k)}, .., a_{q_l(k)}) = alpha}` for the
/// requested words.
pub fn count_frequencies<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    words: &[Vec<Digit>],
    n: u64,
) -> Result<BTreeMap<Vec<Digit>, u64>, NonconvError> {
    check_word_lengths(words.iter(), schedule.arity())?;
    let all = count_all_frequencies(stream, schedule, n)?;
    Ok(words
        .iter()
        .map(|w| (w.clone(), all.get(w).copied().unwrap_or(0)))
        .collect())
}

fn check_word_lengths<'a>(mut words: impl Iterator<Item = &'a Vec<Digit>>, l: usize) -> Result<(), NonconvError> {
    if let Some(w) = words.find(|w| w.len() != l) {
        return Err(NonconvError::ArityMismatch {
            observable: w.len(),
            schedule: l,
        });
    }
    Ok(())
}

/// Pair tuples `(alpha, beta)` with `alpha` read at `q_i(k)` and `beta` at
/// `q_i(k) + 1`, with counts.
pub fn count_all_pair_frequencies<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    n: u64,
) -> Result<BTreeMap<(Vec<Digit>, Vec<Digit>), u64>, NonconvError> {
    schedule.ensure_valid(n)?;
    prepare_stream(stream, schedule.max_index(n)? + 1)?;
    let l = schedule.arity();
    let indices = |k: u64, out: &mut [u64]| -> Result<(), ScheduleError> {
        let (a, b) = out.split_at_mut(l);
        schedule.indices_into(k, a)?;
        for (y, x) in b.iter_mut().zip(a.iter()) {
            *y = x + 1;
        }
        Ok(())
    };
    let tally = tally_range(stream, 2 * l, 1, n, &indices)?;
    Ok(tally
        .entries()
        .into_iter()
        .map(|(t, c)| ((t[..l].to_vec(), t[l..].to_vec()), c))
        .collect())
}

/// `N_{alpha,beta}(x, N)` for the requested pairs.
pub fn count_pair_frequencies<S: DigitSource + ?Sized>(
    stream: &S,
    schedule: &Schedule,
    pairs: &[(Vec<Digit>, Vec<Digit>)],
    n: u64,
) -> Result<BTreeMap<(Vec<Digit>, Vec<Digit>), u64>, NonconvError> {
    check_word_lengths(pairs.iter().flat_map(|(a, b)| [a, b]), schedule.arity())?;
    let all = count_all_pair_frequencies(stream, schedule, n)?;
    Ok(pairs
        .iter()
        .map(|p| (p.clone(), all.get(p).copied().unwrap_or(0)))
        .collect())
}

/// Target word frequencies `p_alpha` over `l`-words.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySpec {
    arity: usize,
    targets: BTreeMap<Vec<Digit>, f64>,
}

impl FrequencySpec {
    pub fn new(arity: usize, targets: BTreeMap<Vec<Digit>, f64>) -> Result<Self, NonconvError> {
        check_word_lengths(targets.keys(), arity)?;
        if let Some((w, p)) = targets.iter().find(|(_, &p)| !(p >= 0.0)) {
            return Err(NonconvError::Spec(format!("negative target {p} for {w:?}")));
        }
        let total: f64 = targets.values().sum();
        if (total - 1.0).abs() > SPEC_TOL {
            return Err(NonconvError::Spec(format!("targets sum to {total}")));
        }
        Ok(Self { arity, targets })
    }

    /// `p_alpha = prod_i r_{alpha_i}` over `{0..m-1}^l`.
    pub fn product(weights: &[f64], arity: usize) -> Result<Self, NonconvError> {
        let m = weights.len() as u64;
        let targets = (0..m.pow(arity as u32) as usize)
            .map(|c| {
                let w = decode(c, m, arity);
                let p = w.iter().map(|&d| weights[d as usize]).product();
                (w, p)
            })
            .collect();
        Self::new(arity, targets)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn targets(&self) -> &BTreeMap<Vec<Digit>, f64> {
        &self.targets
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipRow {
    pub word: Vec<Digit>,
    pub frequency: f64,
    pub target: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub n: u64,
    pub rows: Vec<MembershipRow>,
    pub sup_deviation: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

/// `|N_alpha / N - p_alpha|` for every word in the spec or in the counts.
pub fn check_membership(
    counts: &BTreeMap<Vec<Digit>, u64>,
    n: u64,
    spec: &FrequencySpec,
    tolerance: f64,
) -> MembershipReport {
    let mut words: Vec<&Vec<Digit>> = spec.targets.keys().chain(counts.keys()).collect();
    words.sort();
    words.dedup();
    let rows: Vec<MembershipRow> = words
        .into_iter()
        .map(|w| {
            let frequency = counts.get(w).copied().unwrap_or(0) as f64 / n as f64;
            let target = spec.targets.get(w).copied().unwrap_or(0.0);
            MembershipRow {
                word: w.clone(),
                frequency,
                target,
                deviation: (frequency - target).abs(),
            }
        })
        .collect();
    let sup_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    MembershipReport {
        n,
        rows,
        sup_deviation,
        tolerance,
        within_tolerance: sup_deviation <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digitkit::DigitStream;
    use crate::measures::BernoulliLaw;
    use crate::schedules::IndexFn;
    use num_rational::Ratio;

    fn poly(c: &[i64]) -> IndexFn {
        IndexFn::Poly(c.to_vec())
    }

    fn sched(fns: Vec<IndexFn>) -> Schedule {
        Schedule::new(fns, Ratio::new(1, 2)).unwrap()
    }

    fn third() -> DigitStream {
        DigitStream::rational(1u32, 3u32, 2).unwrap()
    }

    fn zeros() -> DigitStream {
        DigitStream::rational(0u32, 1u32, 2).unwrap()
    }

    fn fair() -> Marginal {
        Law::Bernoulli(BernoulliLaw::uniform(2)).marginal()
    }

    #[test]
    fn checkpoints_grid() {
        assert_eq!(default_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(default_checkpoints(4096), vec![1024, 2048, 4096]);
        assert_eq!(default_checkpoints(5000), vec![1024, 2048, 4096, 5000]);
    }

    #[test]
    fn all_zero_stream_average_one() {
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 2])]);
        let f = Observable::indicator_product(vec![0, 0]).unwrap();
        let t = run_slln(&zeros(), &s, &f, &fair(), 100, &default_checkpoints(100)).unwrap();
        assert!(t.averages.iter().all(|&a| a == 1.0));
        assert_eq!(t.target, 0.25);
    }

    #[test]
    fn third_stream_counts() {
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 2])]);
        let f = Observable::indicator_product(vec![1, 0]).unwrap();
        let t = run_slln(&third(), &s, &f, &fair(), 10, &[10]).unwrap();
        assert_eq!(t.averages, vec![0.5]);
        let words = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        let c = count_frequencies(&third(), &s, &words, 10).unwrap();
        let counts: Vec<u64> = words.iter().map(|w| c[w]).collect();
        assert_eq!(counts, vec![5, 0, 5, 0]);
    }

    #[test]
    fn pair_counts() {
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 2])]);
        let c = count_pair_frequencies(&zeros(), &s, &[(vec![0, 0], vec![0, 0])], 5).unwrap();
        assert_eq!(c[&(vec![0, 0], vec![0, 0])], 5);

        let s = sched(vec![poly(&[0, 1])]);
        let all = count_all_pair_frequencies(&third(), &s, 10).unwrap();
        assert_eq!(all.get(&(vec![0], vec![1])), Some(&5));
        assert_eq!(all.get(&(vec![1], vec![0])), Some(&5));
        assert_eq!(all.len(), 2);
        let singles = count_all_frequencies(&third(), &s, 10).unwrap();
        for (alpha, &n_alpha) in &singles {
            let marginal: u64 = all.iter().filter(|((a, _), _)| a == alpha).map(|(_, c)| c).sum();
            assert_eq!(marginal, n_alpha);
        }
    }

    #[test]
    fn constant_components_vanish() {
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 2])]);
        let f = Observable::constant(crate::observables::Value::Exact(BigRational::new(3.into(), 4.into())), 2).unwrap();
        let d = decompose(&f, &fair(), DEFAULT_TUPLE_CAP).unwrap();
        let law = Law::Bernoulli(BernoulliLaw::uniform(2));
        let stream = sample_stream(&law, StreamSeed::new(1, 0), 10_000);
        let t = run_components(&stream, &s, &f, &d, 1000, &default_checkpoints(1000)).unwrap();
        for row in t.components.unwrap() {
            assert!(row.iter().all(|&x| x == 0.0));
        }
        assert!(t.averages.iter().all(|&a| a == 0.75));
    }

    #[test]
    fn unary_component_is_centered_sum() {
        let s = sched(vec![poly(&[0, 1])]);
        let law = Law::Bernoulli(BernoulliLaw::from_rationals(vec![
            BigRational::new(1.into(), 3.into()),
            BigRational::new(2.into(), 3.into()),
        ]).unwrap());
        let f = Observable::indicator_product(vec![1]).unwrap();
        let d = decompose(&f, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap();
        let stream = sample_stream(&law, StreamSeed::new(4, 0), 3000);
        let t = run_components(&stream, &s, &f, &d, 2000, &default_checkpoints(2000)).unwrap();
        for (k, &n) in t.checkpoints.iter().enumerate() {
            let s_n = t.sums_exact.as_ref().unwrap()[k].clone();
            let s1 = s_n - BigRational::new(2.into(), 3.into()) * BigRational::from_integer(n.into());
            let got = t.components.as_ref().unwrap()[k][0];
            assert!((got - s1.to_f64().unwrap() / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn errors_surface() {
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 1])]);
        let f = Observable::indicator_product(vec![0, 0]).unwrap();
        assert!(matches!(
            run_slln(&zeros(), &s, &f, &fair(), 10, &[10]),
            Err(NonconvError::Schedule(_))
        ));
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 2])]);
        let short = DigitStream::materialized(Alphabet::Finite(2), vec![0; 15]).unwrap();
        assert!(matches!(
            run_slln(&short, &s, &f, &fair(), 10, &[10]),
            Err(NonconvError::StreamTooShort { .. })
        ));
        assert!(matches!(
            run_slln(&zeros(), &s, &f, &fair(), 10, &[5]),
            Err(NonconvError::BadCheckpoints { .. })
        ));
        let g = Observable::indicator_product(vec![0]).unwrap();
        assert!(matches!(
            run_slln(&zeros(), &s, &g, &fair(), 10, &[10]),
            Err(NonconvError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn membership_examples() {
        let spec = FrequencySpec::product(&[0.5, 0.5], 1).unwrap();
        let counts: BTreeMap<Vec<Digit>, u64> = [(vec![0], 5), (vec![1], 5)].into_iter().collect();
        let r = check_membership(&counts, 10, &spec, 0.0);
        assert_eq!(r.sup_deviation, 0.0);
        assert!(r.within_tolerance);

        let degenerate = FrequencySpec::new(1, [(vec![0], 1.0)].into_iter().collect()).unwrap();
        let law = Law::Bernoulli(BernoulliLaw::new(vec![0.7, 0.3]).unwrap());
        let stream = sample_stream(&law, StreamSeed::new(8, 0), 200_001);
        let s = sched(vec![poly(&[0, 1])]);
        let counts = count_all_frequencies(&stream, &s, 200_000).unwrap();
        let r = check_membership(&counts, 200_000, &degenerate, 0.01);
        assert!((r.sup_deviation - 0.3).abs() < 0.01);
        assert!(!r.within_tolerance);
    }

    #[test]
    fn spec_validation() {
        assert!(FrequencySpec::new(1, [(vec![0], 0.5)].into_iter().collect()).is_err());
        assert!(FrequencySpec::new(2, [(vec![0], 1.0)].into_iter().collect()).is_err());
    }

    #[test]
    fn infinite_alphabet_run() {
        let law = Law::Bernoulli(crate::measures::GaussMarginal::law(1000));
        let s = sched(vec![poly(&[0, 1]), poly(&[0, 2])]);
        let stream = sample_stream(&law, StreamSeed::new(2, 0), 1 << 17);
        let f = Observable::indicator_product(vec![1, 1]).unwrap();
        let t = run_slln(&stream, &s, &f, &law.marginal(), 1 << 16, &default_checkpoints(1 << 16)).unwrap();
        assert!(t.final_deviation() < 0.01, "{}", t.final_deviation());
    }
}
