//! Observables `F(x_1, .., x_l)` of digit tuples and the martingale-difference
//! decomposition `F = F_0 + F_1 + .. + F_l` with
//! `G_i(x_1..x_i) = int F dmu(x_{i+1}) .. dmu(x_l)`, `F_i = G_i - G_{i-1}`,
//! `F_0 = G_0 = Fbar`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::digitkit::{Alphabet, Digit};
use crate::measures::Marginal;
use crate::rng::{CounterRng, StreamSeed};

/// Default bound on `alphabet^l` for exact summation.
pub const DEFAULT_TUPLE_CAP: u64 = 10_000_000;

/// Tolerance for real-valued decomposition identities.
pub const DECOMPOSITION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("{tuples} tuples exceed the cap of {cap}")]
    CapExceeded { tuples: u128, cap: u64 },
    #[error("exact integration needs a finite alphabet")]
    InfiniteAlphabet,
    #[error("table is defined on {table} symbols but the law uses {law}")]
    AlphabetMismatch { table: u32, law: Alphabet },
    #[error("table needs {expected} values, got {found}")]
    TableSize { expected: u128, found: usize },
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("monte carlo needs at least two samples")]
    TooFewSamples,
}

/// A real number held exactly when possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(BigRational),
    Real(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Value::Real(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Value::Exact(q) => Some(q),
            Value::Real(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(q) => write!(f, "{q}"),
            Value::Real(x) => write!(f, "{x}"),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<BigRational> for Value {
    fn from(q: BigRational) -> Self {
        Value::Exact(q)
    }
}

/// Declared Hölder data `(K, iota, kappa)` for the regularity and growth
/// bounds on `F`. Not verified symbolically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderConstants {
    pub k: f64,
    pub iota: f64,
    pub kappa: f64,
}

impl HolderConstants {
    /// Constants valid for any `F` bounded by `sup` on integer digits:
    /// distinct tuples are at distance at least 1, so `K = 2 sup` works
    /// with `iota = kappa = 1`.
    pub fn for_bounded(sup: f64) -> Self {
        Self {
            k: if sup > 0.0 { 2.0 * sup } else { 1.0 },
            iota: 1.0,
            kappa: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableValues {
    Exact(Vec<BigRational>),
    Real(Vec<f64>),
}

impl TableValues {
    fn len(&self) -> usize {
        match self {
            TableValues::Exact(v) => v.len(),
            TableValues::Real(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    /// `prod_i 1{x_i = word_i}`.
    IndicatorProduct(Vec<Digit>),
    /// Values on `{0..m-1}^l` in lexicographic order, first coordinate most significant.
    Table { alphabet: u32, values: TableValues },
    Constant(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    arity: usize,
    kind: ObservableKind,
    holder: HolderConstants,
}

/// Lexicographic code of a tuple over `{0..m-1}`.
pub fn encode(xs: &[Digit], m: u64) -> usize {
    xs.iter().fold(0u64, |acc, &x| acc * m + x) as usize
}

/// Inverse of [`encode`].
pub fn decode(mut code: usize, m: u64, len: usize) -> Vec<Digit> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = code as u64 % m;
        code /= m as usize;
    }
    out
}

fn tuple_count(m: u64, arity: usize) -> u128 {
    (m as u128).saturating_pow(arity as u32)
}

impl Observable {
    pub fn indicator_product(word: Vec<Digit>) -> Result<Self, ObservableError> {
        if word.is_empty() {
            return Err(ObservableError::ZeroArity);
        }
        Ok(Self {
            arity: word.len(),
            kind: ObservableKind::IndicatorProduct(word),
            holder: HolderConstants::for_bounded(1.0),
        })
    }

    pub fn constant(value: Value, arity: usize) -> Result<Self, ObservableError> {
        if arity == 0 {
            return Err(ObservableError::ZeroArity);
        }
        let sup = value.to_f64().abs();
        Ok(Self {
            arity,
            kind: ObservableKind::Constant(value),
            holder: HolderConstants::for_bounded(sup),
        })
    }

    pub fn table(alphabet: u32, arity: usize, values: TableValues) -> Result<Self, ObservableError> {
        if arity == 0 {
            return Err(ObservableError::ZeroArity);
        }
        let expected = tuple_count(alphabet as u64, arity);
        if expected != values.len() as u128 {
            return Err(ObservableError::TableSize {
                expected,
                found: values.len(),
            });
        }
        let sup = match &values {
            TableValues::Exact(v) => v.iter().map(|x| x.abs().to_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max),
            TableValues::Real(v) => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
        };
        Ok(Self {
            arity,
            kind: ObservableKind::Table { alphabet, values },
            holder: HolderConstants::for_bounded(sup),
        })
    }

    /// Tabulates `f` over `{0..m-1}^l`.
    pub fn table_from_fn(
        alphabet: u32,
        arity: usize,
        f: impl Fn(&[Digit]) -> f64,
    ) -> Result<Self, ObservableError> {
        let n = tuple_count(alphabet as u64, arity);
        if n > DEFAULT_TUPLE_CAP as u128 {
            return Err(ObservableError::CapExceeded {
                tuples: n,
                cap: DEFAULT_TUPLE_CAP,
            });
        }
        let values = (0..n as usize)
            .map(|c| f(&decode(c, alphabet as u64, arity)))
            .collect();
        Self::table(alphabet, arity, TableValues::Real(values))
    }

    pub fn with_holder(mut self, holder: HolderConstants) -> Self {
        self.holder = holder;
        self
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> &ObservableKind {
        &self.kind
    }

    pub fn holder(&self) -> HolderConstants {
        self.holder
    }

    /// True when every value is an exact rational.
    pub fn is_exact(&self) -> bool {
        match &self.kind {
            ObservableKind::IndicatorProduct(_) => true,
            ObservableKind::Table { values, .. } => matches!(values, TableValues::Exact(_)),
            ObservableKind::Constant(v) => matches!(v, Value::Exact(_)),
        }
    }

    /// Alphabet size a table is restricted to.
    pub fn table_alphabet(&self) -> Option<u32> {
        match &self.kind {
            ObservableKind::Table { alphabet, .. } => Some(*alphabet),
            _ => None,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match &self.kind {
            ObservableKind::IndicatorProduct(_) => 1.0,
            ObservableKind::Constant(v) => v.to_f64().abs(),
            ObservableKind::Table { values, .. } => match values {
                TableValues::Exact(v) => v.iter().map(|x| x.abs().to_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max),
                TableValues::Real(v) => v.iter().map(|x| x.abs()).fold(0.0, f64::max),
            },
        }
    }

    pub fn evaluate(&self, xs: &[Digit]) -> f64 {
        debug_assert_eq!(xs.len(), self.arity);
        match &self.kind {
            ObservableKind::IndicatorProduct(w) => {
                if xs == w.as_slice() {
                    1.0
                } else {
                    0.0
                }
            }
            ObservableKind::Constant(v) => v.to_f64(),
            ObservableKind::Table { alphabet, values } => {
                if xs.iter().any(|&x| x >= *alphabet as u64) {
                    return 0.0;
                }
                let c = encode(xs, *alphabet as u64);
                match values {
                    TableValues::Exact(v) => v[c].to_f64().unwrap_or(f64::NAN),
                    TableValues::Real(v) => v[c],
                }
            }
        }
    }

    pub fn evaluate_exact(&self, xs: &[Digit]) -> Option<BigRational> {
        match &self.kind {
            ObservableKind::IndicatorProduct(w) => Some(if xs == w.as_slice() {
                BigRational::one()
            } else {
                BigRational::zero()
            }),
            ObservableKind::Constant(v) => v.exact().cloned(),
            ObservableKind::Table { alphabet, values } => match values {
                TableValues::Exact(v) => {
                    if xs.iter().any(|&x| x >= *alphabet as u64) {
                        return Some(BigRational::zero());
                    }
                    Some(v[encode(xs, *alphabet as u64)].clone())
                }
                TableValues::Real(_) => None,
            },
        }
    }

    /// Dense table over `{0..m-1}^l`, real-valued.
    fn real_table(&self, m: u64) -> Vec<f64> {
        let n = tuple_count(m, self.arity) as usize;
        match &self.kind {
            ObservableKind::Table { alphabet, values: TableValues::Real(v) } if *alphabet as u64 == m => v.clone(),
            _ => (0..n).map(|c| self.evaluate(&decode(c, m, self.arity))).collect(),
        }
    }

    fn exact_table(&self, m: u64) -> Option<Vec<BigRational>> {
        if !self.is_exact() {
            return None;
        }
        if let ObservableKind::Table { alphabet, values: TableValues::Exact(v) } = &self.kind {
            if *alphabet as u64 == m {
                return Some(v.clone());
            }
        }
        let n = tuple_count(m, self.arity) as usize;
        (0..n).map(|c| self.evaluate_exact(&decode(c, m, self.arity))).collect()
    }
}

/// `F-bar`, exact when both the observable and the law are rational.
#[derive(Debug, Clone, PartialEq)]
pub struct Mean {
    pub value: f64,
    pub exact: Option<BigRational>,
}

/// Alphabet size for exact integration of `f` against `marginal`.
fn integration_alphabet(f: &Observable, marginal: &Marginal) -> Result<u64, ObservableError> {
    let law_alphabet = marginal.alphabet();
    match (f.table_alphabet(), law_alphabet) {
        (_, Alphabet::PositiveIntegers) => Err(ObservableError::InfiniteAlphabet),
        (Some(t), Alphabet::Finite(m)) if m > t => Err(ObservableError::AlphabetMismatch {
            table: t,
            law: law_alphabet,
        }),
        (Some(t), Alphabet::Finite(_)) => Ok(t as u64),
        (None, Alphabet::Finite(m)) => Ok(m as u64),
    }
}

fn check_cap(m: u64, arity: usize, cap: u64) -> Result<(), ObservableError> {
    let tuples = tuple_count(m, arity);
    if tuples > cap as u128 {
        return Err(ObservableError::CapExceeded { tuples, cap });
    }
    Ok(())
}

/// `F-bar = int F d(mu x .. x mu)` summed exactly over all tuples.
///
/// Indicator products and constants integrate in closed form on any
/// alphabet; tables sum over `alphabet^l` tuples subject to `cap`.
pub fn mean_f(f: &Observable, marginal: &Marginal, cap: u64) -> Result<Mean, ObservableError> {
    match f.kind() {
        ObservableKind::IndicatorProduct(word) => {
            let value = word.iter().map(|&d| marginal.weight(d)).product();
            let exact = word
                .iter()
                .map(|&d| marginal.weight_exact(d))
                .try_fold(BigRational::one(), |acc, w| w.map(|w| acc * w));
            Ok(Mean { value, exact })
        }
        ObservableKind::Constant(v) => Ok(Mean {
            value: v.to_f64(),
            exact: v.exact().cloned(),
        }),
        ObservableKind::Table { .. } => {
            let d = decompose(f, marginal, cap)?;
            Ok(Mean {
                value: d.mean(),
                exact: d.mean_exact().cloned(),
            })
        }
    }
}

/// Monte Carlo estimate of `F-bar` from iid tuples of the marginal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloMean {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

pub fn mean_f_monte_carlo(
    f: &Observable,
    marginal: &Marginal,
    seed: StreamSeed,
    samples: u64,
) -> Result<MonteCarloMean, ObservableError> {
    if samples < 2 {
        return Err(ObservableError::TooFewSamples);
    }
    let rng = CounterRng::new(seed);
    let l = f.arity() as u64;
    let dist = marginal.distribution();
    let mut xs = vec![0; f.arity()];
    // Welford running moments.
    let (mut mean, mut m2) = (0.0, 0.0);
    for s in 0..samples {
        for (j, x) in xs.iter_mut().enumerate() {
            *x = dist.sample(rng.uniform(s * l + j as u64, 0));
        }
        let y = f.evaluate(&xs);
        let delta = y - mean;
        mean += delta / (s + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(MonteCarloMean {
        estimate: mean,
        stderr: (var / samples as f64).sqrt(),
        samples,
    })
}

/// Tables `G_0, .., G_l` and `F_1, .., F_l` over one scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTables<T> {
    /// `levels[i]` is `G_i` on `{0..m-1}^i`.
    levels: Vec<Vec<T>>,
    /// `components[i - 1]` is `F_i` on `{0..m-1}^i`.
    components: Vec<Vec<T>>,
}

impl<T: Clone + Num> DecompositionTables<T> {
    fn build(table: Vec<T>, weights: &[T], arity: usize) -> Self {
        let m = weights.len();
        let mut levels = vec![table];
        for _ in 0..arity {
            let upper = levels.last().expect("nonempty");
            let lower: Vec<T> = upper
                .chunks(m)
                .map(|block| {
                    block
                        .iter()
                        .zip(weights)
                        .fold(T::zero(), |acc, (g, w)| acc + g.clone() * w.clone())
                })
                .collect();
            levels.push(lower);
        }
        levels.reverse();
        let components = (1..=arity)
            .map(|i| {
                levels[i]
                    .iter()
                    .enumerate()
                    .map(|(c, g)| g.clone() - levels[i - 1][c / m].clone())
                    .collect()
            })
            .collect();
        Self { levels, components }
    }

    pub fn mean(&self) -> &T {
        &self.levels[0][0]
    }

    /// `F_i` table, `i` from 1.
    pub fn component(&self, i: usize) -> &[T] {
        &self.components[i - 1]
    }

    /// `G_i` table, `i` from 0.
    pub fn level(&self, i: usize) -> &[T] {
        &self.levels[i]
    }
}

/// The decomposition of `F` against a finite-alphabet marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    alphabet: u32,
    arity: usize,
    weights: Vec<f64>,
    weights_exact: Option<Vec<BigRational>>,
    table: Vec<f64>,
    table_exact: Option<Vec<BigRational>>,
    real: DecompositionTables<f64>,
    exact: Option<DecompositionTables<BigRational>>,
}

pub fn decompose(f: &Observable, marginal: &Marginal, cap: u64) -> Result<Decomposition, ObservableError> {
    let m = integration_alphabet(f, marginal)?;
    check_cap(m, f.arity(), cap)?;
    let weights: Vec<f64> = (0..m).map(|d| marginal.weight(d)).collect();
    let weights_exact: Option<Vec<BigRational>> = (0..m).map(|d| marginal.weight_exact(d)).collect();
    let table = f.real_table(m);
    let table_exact = weights_exact.as_ref().and_then(|_| f.exact_table(m));
    let real = DecompositionTables::build(table.clone(), &weights, f.arity());
    let exact = match (&table_exact, &weights_exact) {
        (Some(t), Some(w)) => Some(DecompositionTables::build(t.clone(), w, f.arity())),
        _ => None,
    };
    Ok(Decomposition {
        alphabet: m as u32,
        arity: f.arity(),
        weights,
        weights_exact,
        table,
        table_exact,
        real,
        exact,
    })
}

impl Decomposition {
    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn mean(&self) -> f64 {
        match &self.exact {
            Some(e) => e.mean().to_f64().unwrap_or(f64::NAN),
            None => *self.real.mean(),
        }
    }

    pub fn mean_exact(&self) -> Option<&BigRational> {
        self.exact.as_ref().map(|e| e.mean())
    }

    pub fn real_tables(&self) -> &DecompositionTables<f64> {
        &self.real
    }

    pub fn exact_tables(&self) -> Option<&DecompositionTables<BigRational>> {
        self.exact.as_ref()
    }

    /// `F` restricted to the integration alphabet.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_exact(&self) -> Option<&[BigRational]> {
        self.table_exact.as_deref()
    }

    /// `F_i(x_1, .., x_i)`, `i` from 1.
    pub fn component(&self, i: usize, prefix: &[Digit]) -> f64 {
        let c = encode(&prefix[..i], self.alphabet as u64);
        match &self.exact {
            Some(e) => e.component(i)[c].to_f64().unwrap_or(f64::NAN),
            None => self.real.component(i)[c],
        }
    }

    pub fn component_exact(&self, i: usize, prefix: &[Digit]) -> Option<BigRational> {
        let c = encode(&prefix[..i], self.alphabet as u64);
        self.exact.as_ref().map(|e| e.component(i)[c].clone())
    }

    /// Largest `|F - F_0 - sum F_i|` over all tuples; exactly zero in
    /// rational mode.
    pub fn telescoping_error(&self) -> f64 {
        let m = self.alphabet as u64;
        if let (Some(e), Some(t)) = (&self.exact, &self.table_exact) {
            let worst = (0..t.len())
                .map(|c| {
                    let mut s = e.mean().clone();
                    for i in 1..=self.arity {
                        s += &e.component(i)[c / m.pow((self.arity - i) as u32) as usize];
                    }
                    (&t[c] - s).abs()
                })
                .max()
                .unwrap_or_else(BigRational::zero);
            return worst.to_f64().unwrap_or(f64::NAN);
        }
        (0..self.table.len())
            .map(|c| {
                let mut s = *self.real.mean();
                for i in 1..=self.arity {
                    s += self.real.component(i)[c / m.pow((self.arity - i) as u32) as usize];
                }
                (self.table[c] - s).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|sum_x mu(x) F_i(prefix, x)|` over all `i` and prefixes.
    pub fn centering_error(&self) -> f64 {
        let m = self.alphabet as usize;
        if let (Some(e), Some(w)) = (&self.exact, &self.weights_exact) {
            let mut worst = BigRational::zero();
            for i in 1..=self.arity {
                for block in e.component(i).chunks(m) {
                    let s: BigRational = block.iter().zip(w).map(|(a, b)| a * b).sum();
                    worst = worst.max(s.abs());
                }
            }
            return worst.to_f64().unwrap_or(f64::NAN);
        }
        let mut worst: f64 = 0.0;
        for i in 1..=self.arity {
            for block in self.real.component(i).chunks(m) {
                let s: f64 = block.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }

    /// `sup |F_i|` for each `i`.
    pub fn component_sups(&self) -> Vec<f64> {
        (1..=self.arity)
            .map(|i| self.real.component(i).iter().map(|x| x.abs()).fold(0.0, f64::max))
            .collect()
    }
}

/// Rational from a decimal or `p/q` string.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str_radix(p.trim(), 10).ok()?;
        let q = BigInt::from_str_radix(q.trim(), 10).ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num = BigInt::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
    let den = BigInt::from(10u32).pow(frac.len() as u32);
    let q = BigRational::new(num, den);
    Some(if neg { -q } else { q })
}

/// Nearest rational representation of a float, exact in binary.
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_f64(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{BernoulliLaw, Law};

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn fair() -> Marginal {
        Law::Bernoulli(BernoulliLaw::uniform(2)).marginal()
    }

    #[test]
    fn mean_examples() {
        let f = Observable::indicator_product(vec![0, 0]).unwrap();
        let m = mean_f(&f, &fair(), DEFAULT_TUPLE_CAP).unwrap();
        assert_eq!(m.exact, Some(rat(1, 4)));

        let law = Law::Bernoulli(BernoulliLaw::new(vec![0.7, 0.3]).unwrap());
        let f = Observable::indicator_product(vec![0, 1, 0]).unwrap();
        let m = mean_f(&f, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap();
        assert!((m.value - 0.147).abs() < 1e-15);

        let f = Observable::constant(Value::Exact(rat(-3, 7)), 4).unwrap();
        assert_eq!(mean_f(&f, &fair(), DEFAULT_TUPLE_CAP).unwrap().exact, Some(rat(-3, 7)));
    }

    #[test]
    fn decomposition_of_indicator_pair() {
        let f = Observable::indicator_product(vec![0, 0]).unwrap();
        let d = decompose(&f, &fair(), DEFAULT_TUPLE_CAP).unwrap();
        let e = d.exact_tables().unwrap();
        assert_eq!(e.mean(), &rat(1, 4));
        assert_eq!(e.component(1), &[rat(1, 4), rat(-1, 4)]);
        assert_eq!(e.component(2), &[rat(1, 2), rat(-1, 2), rat(0, 1), rat(0, 1)]);
        assert_eq!(d.telescoping_error(), 0.0);
        assert_eq!(d.centering_error(), 0.0);
    }

    #[test]
    fn decomposition_of_constant_and_unary() {
        let f = Observable::constant(Value::Exact(rat(5, 2)), 3).unwrap();
        let d = decompose(&f, &fair(), DEFAULT_TUPLE_CAP).unwrap();
        assert_eq!(d.mean_exact(), Some(&rat(5, 2)));
        for i in 1..=3 {
            assert!(d.exact_tables().unwrap().component(i).iter().all(|x| x.is_zero()));
        }

        let values = vec![rat(1, 1), rat(4, 1), rat(-2, 1)];
        let f = Observable::table(3, 1, TableValues::Exact(values.clone())).unwrap();
        let law = Law::Bernoulli(BernoulliLaw::from_rationals(vec![rat(1, 2), rat(1, 3), rat(1, 6)]).unwrap());
        let d = decompose(&f, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap();
        let mean = d.mean_exact().unwrap().clone();
        assert_eq!(mean, rat(1, 2) + rat(4, 3) - rat(2, 6));
        let f1: Vec<BigRational> = values.iter().map(|v| v - &mean).collect();
        assert_eq!(d.exact_tables().unwrap().component(1), f1.as_slice());
    }

    #[test]
    fn cap_enforced() {
        let f = Observable::indicator_product(vec![0; 30]).unwrap();
        // Closed form does not need the cap.
        assert!(mean_f(&f, &fair(), 1000).is_ok());
        assert!(matches!(
            decompose(&f, &fair(), 1000),
            Err(ObservableError::CapExceeded { .. })
        ));
    }

    #[test]
    fn infinite_alphabet_rules() {
        let gauss = Law::Bernoulli(crate::measures::GaussMarginal::law(100)).marginal();
        let f = Observable::indicator_product(vec![1, 2]).unwrap();
        let m = mean_f(&f, &gauss, DEFAULT_TUPLE_CAP).unwrap();
        let expect = crate::measures::GaussMarginal::weight(1) * crate::measures::GaussMarginal::weight(2);
        assert!((m.value - expect).abs() < 1e-15);
        assert_eq!(decompose(&f, &gauss, DEFAULT_TUPLE_CAP), Err(ObservableError::InfiniteAlphabet));
    }

    #[test]
    fn monte_carlo_within_four_stderr() {
        let law = Law::Bernoulli(BernoulliLaw::new(vec![0.5, 0.3, 0.2]).unwrap());
        let marginal = law.marginal();
        let f = Observable::table_from_fn(3, 2, |x| (x[0] as f64 - 1.0) * (x[1] as f64 + 0.5)).unwrap();
        let exact = mean_f(&f, &marginal, DEFAULT_TUPLE_CAP).unwrap().value;
        for seed in 0..5 {
            let mc = mean_f_monte_carlo(&f, &marginal, StreamSeed::new(seed, 7), 50_000).unwrap();
            assert_eq!(mc.samples, 50_000);
            assert!((mc.estimate - exact).abs() <= 4.0 * mc.stderr, "seed {seed}: {mc:?} vs {exact}");
        }
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("1/3"), Some(rat(1, 3)));
        assert_eq!(parse_rational("0.25"), Some(rat(1, 4)));
        assert_eq!(parse_rational("-2"), Some(rat(-2, 1)));
        assert_eq!(parse_rational(".5"), Some(rat(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn law_strategy() -> impl Strategy<Value = Vec<BigRational>> {
            proptest::collection::vec(1i64..20, 2..4).prop_map(|w| {
                let total: i64 = w.iter().sum();
                w.into_iter().map(|x| rat(x, total)).collect()
            })
        }

        proptest! {
            #[test]
            fn indicator_mean_is_product(weights in law_strategy(), raw in proptest::collection::vec(0u64..10, 1..5)) {
                let m = weights.len() as u64;
                let word: Vec<Digit> = raw.into_iter().map(|d| d % m).collect();
                let law = Law::Bernoulli(BernoulliLaw::from_rationals(weights.clone()).unwrap());
                let f = Observable::indicator_product(word.clone()).unwrap();
                let got = mean_f(&f, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap().exact.unwrap();
                let expect: BigRational = word.iter().map(|&d| weights[d as usize].clone()).product();
                prop_assert_eq!(got.clone(), expect);
                // The decomposition path agrees with the closed form.
                let table = Observable::table(m as u32, word.len(), TableValues::Exact(
                    (0..m.pow(word.len() as u32) as usize)
                        .map(|c| f.evaluate_exact(&decode(c, m, word.len())).unwrap())
                        .collect(),
                )).unwrap();
                let via_table = mean_f(&table, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap().exact.unwrap();
                prop_assert_eq!(via_table, got);
            }

            #[test]
            fn telescoping_and_centering_exact(
                weights in law_strategy(),
                arity in 1usize..4,
                seed in proptest::collection::vec(-20i64..20, 64),
            ) {
                let m = weights.len() as u64;
                let n = m.pow(arity as u32) as usize;
                let values: Vec<BigRational> = (0..n).map(|c| rat(seed[c % seed.len()] * (c as i64 + 1), 7)).collect();
                let f = Observable::table(m as u32, arity, TableValues::Exact(values)).unwrap();
                let law = Law::Bernoulli(BernoulliLaw::from_rationals(weights).unwrap());
                let d = decompose(&f, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap();
                prop_assert_eq!(d.telescoping_error(), 0.0);
                prop_assert_eq!(d.centering_error(), 0.0);
            }

            #[test]
            fn telescoping_and_centering_real(
                raw in proptest::collection::vec(0.01f64..1.0, 2..5),
                arity in 1usize..4,
                seed in proptest::collection::vec(-5.0f64..5.0, 125),
            ) {
                let total: f64 = raw.iter().sum();
                let mut w: Vec<f64> = raw.iter().map(|x| x / total).collect();
                let fix = 1.0 - w.iter().sum::<f64>();
                w[0] += fix;
                let m = w.len() as u32;
                let law = Law::Bernoulli(BernoulliLaw::new(w).unwrap());
                let f = Observable::table_from_fn(m, arity, |x| seed[encode(x, m as u64) % seed.len()]).unwrap();
                let d = decompose(&f, &law.marginal(), DEFAULT_TUPLE_CAP).unwrap();
                prop_assert!(d.telescoping_error() <= DECOMPOSITION_TOL);
                prop_assert!(d.centering_error() <= DECOMPOSITION_TOL);
            }
        }
    }
}
