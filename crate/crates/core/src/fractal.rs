//! Hausdorff dimension formulas for digit-frequency sets, the perturbation
//! used for their upper bounds, local dimensions along cylinder intervals,
//! and explicit points of `U_p` and `G_z(b)` for continued fractions.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digitkit::{continuant_denominator, ln_biguint, Alphabet, Digit, DigitError, DigitSource, DigitStream};
use crate::linalg::Matrix;
use crate::measures::{
    sample_stream, BernoulliLaw, Law, MarkovLaw, MeasureError, TruncatedCfGenerator, WEIGHT_TOL,
};
use crate::rng::StreamSeed;
use crate::schedules::{Schedule, ScheduleError};

/// Bit budget for `b^{k^2}` in the `G_z(b)` construction.
pub const MAX_GZB_BITS: u64 = 1 << 24;
/// Relative standard error above which a Lyapunov estimate is flagged.
pub const LYAPUNOV_REL_STDERR: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FractalError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Digit(#[from] DigitError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("expected {expected} weights for base {expected}, got {got}")]
    BaseMismatch { expected: u32, got: usize },
    #[error("base must be at least 2, got {0}")]
    BadBase(u32),
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("b must exceed 1, got {0}")]
    BadGrowth(String),
    #[error("b^(k_max^2) needs about {bits} bits, over the budget {cap}")]
    Budget { bits: u64, cap: u64 },
    #[error("no insertion slot k^2 + m, 0 <= m <= {arity}, avoids the schedule at k = {k}")]
    NoInsertionSlot { k: u64, arity: usize },
    #[error("law must have a finite alphabet")]
    InfiniteAlphabet,
    #[error("law must have finite support on the positive integers")]
    NotFiniteCf,
    #[error("local dimensions need a Bernoulli or Markov law")]
    UnsupportedLaw,
    #[error("need at least one seed and n >= 1")]
    EmptyEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `-sum r_j ln r_j / ln m`.
    BernoulliEntropy,
    /// `-sum q_i q_ij ln q_ij / ln m`.
    MarkovEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionResult {
    pub formula: Formula,
    pub value: f64,
    pub base: u32,
    pub inputs: Vec<Vec<f64>>,
    /// Terms dropped under `0 ln 0 = 0`.
    pub zero_terms: usize,
    pub stationary: Option<Vec<f64>>,
    pub transition: Option<Vec<Vec<f64>>>,
}

/// `sum -x ln x` with `0 ln 0 = 0`, and the number of zero terms.
fn entropy(xs: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let mut h = 0.0;
    let mut zeros = 0;
    for x in xs {
        if x == 0.0 {
            zeros += 1;
        } else {
            h -= x * x.ln();
        }
    }
    (h, zeros)
}

fn check_probability(r: &[f64]) -> Result<(), FractalError> {
    if let Some((index, &value)) = r.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
        return Err(MeasureError::NegativeWeight { index, value }.into());
    }
    let total: f64 = r.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(MeasureError::NotNormalized { sum: total }.into());
    }
    Ok(())
}

/// Dimension of the set of base-`m` points with independent digit
/// frequencies `r`.
pub fn hd_bernoulli(r: &[f64], m: u32) -> Result<DimensionResult, FractalError> {
    if m < 2 {
        return Err(FractalError::BadBase(m));
    }
    if r.len() != m as usize {
        return Err(FractalError::BaseMismatch { expected: m, got: r.len() });
    }
    check_probability(r)?;
    let (h, zero_terms) = entropy(r.iter().copied());
    let positive: Vec<f64> = r.iter().copied().filter(|&x| x > 0.0).collect();
    // Equal positive weights: the entropy is exactly ln k.
    let value = if positive.iter().all(|&x| x == positive[0]) {
        (positive.len() as f64).ln() / (m as f64).ln()
    } else {
        h / (m as f64).ln()
    };
    Ok(DimensionResult {
        formula: Formula::BernoulliEntropy,
        value: value.clamp(0.0, 1.0),
        base: m,
        inputs: vec![r.to_vec()],
        zero_terms,
        stationary: None,
        transition: None,
    })
}

/// Dimension of the set of base-`m` points with Markov pair frequencies
/// `R`; rejects `R` with unequal row and column marginals (the set is empty)
/// and `R` without a positive power.
pub fn hd_markov(joint: &[Vec<f64>]) -> Result<DimensionResult, FractalError> {
    let law = MarkovLaw::new(joint.to_vec())?;
    Ok(markov_result(&law))
}

pub fn hd_markov_law(law: &MarkovLaw) -> DimensionResult {
    markov_result(law)
}

fn markov_result(law: &MarkovLaw) -> DimensionResult {
    let m = law.size() as u32;
    let q = law.stationary();
    let joint = law.joint();
    // q_i q_ij = r_ij, so the sum runs over the joint entries.
    let mut h = 0.0;
    let mut zero_terms = 0;
    for (i, row) in joint.iter().enumerate() {
        for &r in row {
            if r == 0.0 {
                zero_terms += 1;
            } else {
                h -= r * (r.ln() - q[i].ln());
            }
        }
    }
    DimensionResult {
        formula: Formula::MarkovEntropy,
        value: (h / (m as f64).ln()).clamp(0.0, 1.0),
        base: m,
        inputs: joint.to_vec(),
        zero_terms,
        stationary: Some(q.to_vec()),
        transition: Some(law.transition().to_vec()),
    }
}

/// `r^{(delta)}`: zero slots receive `delta / l`, positive ones lose
/// `delta / k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedBernoulli {
    pub original: Vec<f64>,
    pub delta: f64,
    pub perturbed: Vec<f64>,
    pub k: usize,
    pub l: usize,
    /// No zero slot to fill: the input is returned unchanged.
    pub noop: bool,
    /// `r_j > delta/k` for `r_j > 0` and
    /// `ln(delta/l) <= k^{-1} sum_{r_j > 0} ln(r_j - delta/k)`.
    pub valid: bool,
    /// `sum r_j ln r^{(delta)}_j`.
    pub cross_entropy: f64,
    /// `sum r^{(delta)}_j ln r^{(delta)}_j`.
    pub self_entropy: f64,
    pub hd_original: f64,
    /// `None` when a perturbed weight is not positive.
    pub hd_perturbed: Option<f64>,
}

impl PerturbedBernoulli {
    /// `sum r_j ln r^{(delta)}_j >= sum r^{(delta)}_j ln r^{(delta)}_j`.
    pub fn inequality_holds(&self, tol: f64) -> bool {
        self.cross_entropy >= self.self_entropy - tol
    }
}

fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

pub fn perturb_bernoulli(r: &[f64], delta: f64) -> Result<PerturbedBernoulli, FractalError> {
    if !(delta > 0.0) {
        return Err(FractalError::BadDelta(delta));
    }
    let m = r.len() as u32;
    let hd_original = hd_bernoulli(r, m)?.value;
    let k = r.iter().filter(|&&x| x > 0.0).count();
    let l = r.len() - k;
    let (perturbed, noop, valid) = if l == 0 {
        (r.to_vec(), true, true)
    } else {
        let dk = delta / k as f64;
        let dl = delta / l as f64;
        let p: Vec<f64> = r.iter().map(|&x| if x > 0.0 { x - dk } else { dl }).collect();
        let big_enough = r.iter().all(|&x| x == 0.0 || x > dk);
        let valid = big_enough && {
            let avg = r.iter().filter(|&&x| x > 0.0).map(|&x| (x - dk).ln()).sum::<f64>() / k as f64;
            dl.ln() <= avg
        };
        (p, false, valid)
    };
    let positive = perturbed.iter().all(|&x| x > 0.0) || noop;
    let cross_entropy = r.iter().zip(&perturbed).map(|(&a, &b)| xlny(a, b)).sum();
    let self_entropy = perturbed.iter().map(|&b| xlny(b, b)).sum();
    let hd_perturbed = if positive {
        Some(hd_bernoulli(&perturbed, m).map(|d| d.value).unwrap_or(f64::NAN))
    } else {
        None
    };
    Ok(PerturbedBernoulli {
        original: r.to_vec(),
        delta,
        perturbed,
        k,
        l,
        noop,
        valid,
        cross_entropy,
        self_entropy,
        hd_original,
        hd_perturbed,
    })
}

/// Row-wise analog on the joint matrix: `R^{(delta)}`, `Q^{(delta)}` and the
/// stationary `q^{(delta)}` of `Q^{(delta)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedMarkov {
    pub original: Vec<Vec<f64>>,
    pub delta: f64,
    pub perturbed: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub q_delta: Option<Vec<f64>>,
    pub k: Vec<usize>,
    pub l: Vec<usize>,
    pub noop: bool,
    /// The smallness condition as printed:
    /// `ln(delta/l_i) <= k_i^{-1} sum ln((r_ij - delta/k_i)/q_i)`.
    pub printed_condition: bool,
    /// The condition with `ln(delta/(l_i q_i))` on the left, which is what
    /// the cross-entropy inequality needs.
    pub valid: bool,
    /// `sum r_ij ln q^{(delta)}_ij`.
    pub cross_entropy: f64,
    /// `sum r^{(delta)}_ij ln q^{(delta)}_ij`.
    pub self_entropy: f64,
    pub hd_original: f64,
    /// `-sum q^{(delta)}_i q^{(delta)}_ij ln q^{(delta)}_ij / ln m`.
    pub hd_perturbed: Option<f64>,
    /// `-sum r^{(delta)}_ij max(1, q^{(delta)}_i / q_i) ln q^{(delta)}_ij / ln m`.
    pub w_bound: Option<f64>,
}

impl PerturbedMarkov {
    pub fn inequality_holds(&self, tol: f64) -> bool {
        self.cross_entropy >= self.self_entropy - tol
    }
}

pub fn perturb_markov(joint: &[Vec<f64>], delta: f64) -> Result<PerturbedMarkov, FractalError> {
    if !(delta > 0.0) {
        return Err(FractalError::BadDelta(delta));
    }
    let law = MarkovLaw::new(joint.to_vec())?;
    let hd_original = markov_result(&law).value;
    let q = law.stationary().to_vec();
    let m = joint.len();
    let mut perturbed = joint.to_vec();
    let mut ks = Vec::with_capacity(m);
    let mut ls = Vec::with_capacity(m);
    let (mut printed, mut valid) = (true, true);
    for (i, row) in joint.iter().enumerate() {
        let k = row.iter().filter(|&&x| x > 0.0).count();
        let l = m - k;
        ks.push(k);
        ls.push(l);
        if l == 0 {
            continue;
        }
        let dk = delta / k as f64;
        let dl = delta / l as f64;
        perturbed[i] = row.iter().map(|&x| if x > 0.0 { x - dk } else { dl }).collect();
        let big_enough = row.iter().all(|&x| x == 0.0 || x > dk);
        let avg = if big_enough {
            row.iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| ((x - dk) / q[i]).ln())
                .sum::<f64>()
                / k as f64
        } else {
            f64::NEG_INFINITY
        };
        printed &= big_enough && dl.ln() <= avg;
        valid &= big_enough && (dl / q[i]).ln() <= avg;
    }
    let noop = ls.iter().all(|&l| l == 0);
    let transition: Vec<Vec<f64>> = perturbed
        .iter()
        .zip(&q)
        .map(|(row, &qi)| row.iter().map(|&x| x / qi).collect())
        .collect();
    let positive = transition.iter().flatten().all(|&x| x > 0.0) || noop;
    let cross_entropy = joint
        .iter()
        .zip(&transition)
        .flat_map(|(r, t)| r.iter().zip(t))
        .map(|(&a, &b)| xlny(a, b))
        .sum();
    let self_entropy = perturbed
        .iter()
        .zip(&transition)
        .flat_map(|(r, t)| r.iter().zip(t))
        .map(|(&a, &b)| xlny(a, b))
        .sum();
    let q_delta = if positive {
        Matrix::from_rows(&transition).stationary_vector()
    } else {
        None
    };
    let ln_m = (m as f64).ln();
    let (hd_perturbed, w_bound) = match &q_delta {
        Some(qd) => {
            let hd = -transition
                .iter()
                .enumerate()
                .flat_map(|(i, t)| t.iter().map(move |&x| qd[i] * xlny(x, x)))
                .sum::<f64>()
                / ln_m;
            let w = -perturbed
                .iter()
                .zip(&transition)
                .enumerate()
                .flat_map(|(i, (r, t))| {
                    let scale = (qd[i] / q[i]).max(1.0);
                    r.iter().zip(t).map(move |(&a, &b)| scale * xlny(a, b))
                })
                .sum::<f64>()
                / ln_m;
            (Some(hd), Some(w))
        }
        None => (None, None),
    };
    Ok(PerturbedMarkov {
        original: joint.to_vec(),
        delta,
        perturbed,
        q,
        transition,
        q_delta,
        k: ks,
        l: ls,
        noop,
        printed_condition: printed,
        valid,
        cross_entropy,
        self_entropy,
        hd_original,
        hd_perturbed,
        w_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalDimensionPoint {
    pub n: u64,
    /// `-ln mu(I_n(x)) / (n ln m)`; `-inf` marks a zero-mass cylinder.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalDimensionTrace {
    pub points: Vec<LocalDimensionPoint>,
    /// Rank of the first zero-mass cylinder, after which the trace stops.
    pub degenerate_at: Option<u64>,
}

impl LocalDimensionTrace {
    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.value)
    }
}

/// `ln mu(I_n(x)) / ln |I_n(x)|` along a grid of ranks, for `x` given by
/// its base-`m` digits.
pub fn local_dimension_trace<S: DigitSource + ?Sized>(
    law: &Law,
    stream: &S,
    grid: &[u64],
) -> Result<LocalDimensionTrace, FractalError> {
    let m = law.alphabet().size().ok_or(FractalError::InfiniteAlphabet)?;
    let ln_m = (m as f64).ln();
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    grid.retain(|&n| n > 0);
    let top = grid.last().copied().unwrap_or(0);
    let digits = stream.prefix(top)?;
    // ln mu(I_n) = sum_j m_j ln r_j (Bernoulli) or
    // ln q_{a_0} + sum_{ij} m_ij ln q_ij (Markov), from digit counts.
    let (weights, first): (Vec<f64>, Option<&[f64]>) = match law {
        Law::Bernoulli(b) => ((0..m as u64).map(|d| b.weight(d)).collect(), None),
        Law::Markov(mk) => (mk.transition().iter().flatten().copied().collect(), Some(mk.stationary())),
        Law::Chain(_) => return Err(FractalError::UnsupportedLaw),
    };
    let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut counts = vec![0u64; weights.len()];
    let mut touched: Vec<usize> = Vec::new();
    let mut head = 0.0;
    let mut points = Vec::with_capacity(grid.len());
    let mut next = grid.iter().peekable();
    for (t, &d) in digits.iter().enumerate() {
        if d >= m as u64 {
            return Err(DigitError::OutsideAlphabet {
                digit: d,
                position: t,
                alphabet: Alphabet::Finite(m),
            }
            .into());
        }
        let slot = match first {
            None => Some(d as usize),
            Some(q) if t == 0 => {
                head = q[d as usize].ln();
                None
            }
            Some(_) => Some(digits[t - 1] as usize * m as usize + d as usize),
        };
        if let Some(c) = slot {
            if counts[c] == 0 {
                touched.push(c);
            }
            counts[c] += 1;
        }
        let n = t as u64 + 1;
        if head == f64::NEG_INFINITY || slot.is_some_and(|c| weights[c] == 0.0) {
            points.push(LocalDimensionPoint {
                n,
                value: f64::NEG_INFINITY,
            });
            return Ok(LocalDimensionTrace {
                points,
                degenerate_at: Some(n),
            });
        }
        if next.peek() == Some(&&n) {
            next.next();
            // Counts sharing a weight are merged first so that equal weights
            // give an exactly rounded ratio.
            let mut groups: Vec<(f64, u64)> = Vec::new();
            for &c in &touched {
                match groups.iter_mut().find(|g| g.0 == logs[c]) {
                    Some(g) => g.1 += counts[c],
                    None => groups.push((logs[c], counts[c])),
                }
            }
            let log_mass = head + groups.iter().map(|&(l, k)| k as f64 * l).sum::<f64>();
            points.push(LocalDimensionPoint {
                n,
                value: -log_mass / (n as f64 * ln_m),
            });
        }
    }
    Ok(LocalDimensionTrace {
        points,
        degenerate_at: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointMode {
    /// Digits iid from `r`: a typical point of `mu_r`.
    Iid,
    /// Continued-fraction digit `a_n` drawn from the truncation of `r` to
    /// `{1, .., n}`, so `a_n <= n`.
    TruncatedCf,
}

pub fn construct_up_point(
    target: &BernoulliLaw,
    mode: PointMode,
    seed: StreamSeed,
    count: Option<u64>,
) -> Result<DigitStream, FractalError> {
    match mode {
        PointMode::Iid => {
            let law = Law::Bernoulli(target.clone());
            Ok(match count {
                Some(c) => sample_stream(&law, seed, c),
                None => crate::measures::sample_unbounded(&law, seed),
            })
        }
        PointMode::TruncatedCf => {
            if target.alphabet() != Alphabet::PositiveIntegers {
                return Err(FractalError::NotFiniteCf);
            }
            Ok(DigitStream::generated(Arc::new(TruncatedCfGenerator::new(target)), seed, count))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Insertion {
    pub k: u64,
    pub m: u64,
    /// Digit position `k^2 + m(k)`.
    pub index: u64,
    /// Decimal digits of the inserted partial quotient.
    pub value: String,
}

/// A point of `G_z(b)`: the digits of `z` with `a_{k^2 + m(k)}` replaced by
/// an integer in `(b^{k^2}, 2 b^{k^2})` for `k = 1..=k_max`.
#[derive(Debug, Clone)]
pub struct GzbStream {
    base: DigitStream,
    inserted: BTreeMap<u64, BigUint>,
    insertions: Vec<Insertion>,
}

impl GzbStream {
    pub fn insertions(&self) -> &[Insertion] {
        &self.insertions
    }

    pub fn base(&self) -> &DigitStream {
        &self.base
    }

    /// Full-precision digit.
    pub fn digit_exact(&self, index: u64) -> Result<BigUint, DigitError> {
        match self.inserted.get(&index) {
            Some(v) => Ok(v.clone()),
            None => Ok(BigUint::from(self.base.digit(index)?)),
        }
    }
}

impl DigitSource for GzbStream {
    /// Inserted digits are unbounded, so counts go through sparse tallies.
    fn alphabet(&self) -> Alphabet {
        Alphabet::PositiveIntegers
    }

    /// Inserted digits beyond `u64` saturate.
    fn digit(&self, index: u64) -> Result<Digit, DigitError> {
        match self.inserted.get(&index) {
            Some(v) => Ok(v.to_u64().unwrap_or(Digit::MAX)),
            None => self.base.digit(index),
        }
    }

    fn len(&self) -> Option<u64> {
        self.base.len()
    }
}

/// Integer in the open interval `(B, 2B)`: `ceil(3B/2)` when it lies
/// inside, else `floor(B) + 1`.
pub fn gzb_digit(big_b: &BigRational) -> BigUint {
    let mid = (big_b * BigRational::new(BigInt::from(3), BigInt::from(2))).ceil();
    let two_b = big_b * BigRational::from_integer(BigInt::from(2));
    let pick = if &mid > big_b && mid < two_b {
        mid
    } else {
        big_b.floor() + BigRational::one()
    };
    pick.to_integer().to_biguint().expect("positive digit")
}

/// Least `m` in `0..=l` with `k^2 + m` different from every `q_i(k)`.
pub fn insertion_offset(schedule: &Schedule, k: u64) -> Result<u64, FractalError> {
    let l = schedule.arity();
    let sq = k * k;
    let hits: Vec<u64> = (1..=l).map(|i| schedule.eval(i, k)).collect::<Result<_, _>>()?;
    (0..=l as u64)
        .find(|m| !hits.contains(&(sq + m)))
        .ok_or(FractalError::NoInsertionSlot { k, arity: l })
}

pub fn construct_gzb(
    z: &DigitStream,
    b: &BigRational,
    schedule: &Schedule,
    k_max: u64,
) -> Result<GzbStream, FractalError> {
    if b <= &BigRational::one() {
        return Err(FractalError::BadGrowth(b.to_string()));
    }
    let bits_per_power = b.numer().bits().max(b.denom().bits());
    let bits = bits_per_power.saturating_mul(k_max.saturating_mul(k_max));
    if bits > MAX_GZB_BITS {
        return Err(FractalError::Budget { bits, cap: MAX_GZB_BITS });
    }
    let mut inserted = BTreeMap::new();
    let mut insertions = Vec::new();
    for k in 1..=k_max {
        let m = insertion_offset(schedule, k)?;
        let index = k * k + m;
        let big_b = num_traits::pow::Pow::pow(b, BigUint::from(k * k));
        let value = gzb_digit(&big_b);
        insertions.push(Insertion {
            k,
            m,
            index,
            value: value.to_string(),
        });
        inserted.insert(index, value);
    }
    Ok(GzbStream {
        base: z.clone(),
        inserted,
        insertions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfCertificate {
    /// `h_nu = -sum r_j ln r_j`.
    pub entropy: f64,
    /// Mean of `(2/n) ln q_n` over the seeds.
    pub lyapunov: f64,
    pub lyapunov_stderr: f64,
    pub per_seed: Vec<f64>,
    pub n: u64,
    /// `h_nu / lambda`.
    pub ratio: f64,
    /// `max(1/2, h_nu / lambda)`: a lower-bound witness for this `nu` only.
    pub lower_bound: f64,
    pub structural_bound: f64,
    /// Relative standard error above one percent.
    pub insufficient_n: bool,
}

/// Lower-bound certificate for the dimension of continued-fraction digit
/// frequency sets from one Bernoulli measure `nu` with finite support.
pub fn cf_bound_certificate(nu: &BernoulliLaw, seeds: &[StreamSeed], n: u64) -> Result<CfCertificate, FractalError> {
    if nu.alphabet() != Alphabet::PositiveIntegers || nu.distribution().tail() != crate::measures::Tail::None {
        return Err(FractalError::NotFiniteCf);
    }
    if seeds.is_empty() || n == 0 {
        return Err(FractalError::EmptyEstimate);
    }
    let (entropy, _) = entropy(nu.distribution().prefix().iter().copied());
    let law = Law::Bernoulli(nu.clone());
    let per_seed: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| -> Result<f64, FractalError> {
            let digits = sample_stream(&law, seed, n).prefix(n)?;
            let q = continuant_denominator(&digits)?;
            Ok(2.0 * ln_biguint(&q) / n as f64)
        })
        .collect::<Result<_, _>>()?;
    let s = per_seed.len() as f64;
    let lyapunov = per_seed.iter().sum::<f64>() / s;
    let lyapunov_stderr = if per_seed.len() > 1 {
        (per_seed.iter().map(|x| (x - lyapunov).powi(2)).sum::<f64>() / (s - 1.0) / s).sqrt()
    } else {
        0.0
    };
    let ratio = entropy / lyapunov;
    Ok(CfCertificate {
        entropy,
        lyapunov,
        lyapunov_stderr,
        per_seed,
        n,
        ratio,
        lower_bound: ratio.max(0.5),
        structural_bound: 0.5,
        insufficient_n: lyapunov_stderr > LYAPUNOV_REL_STDERR * lyapunov,
    })
}
