//! Exact digit streams.
//!
//! A point of `[0, 1)` is never held as a float: it is a digit stream in base
//! `m` or a continued-fraction digit stream, and the dynamics (`x -> {mx}` and
//! the Gauss map) act by shifting the stream.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use parking_lot::RwLock;
use thiserror::Error;

use crate::rng::{CounterRng, StreamSeed};

pub type Digit = u64;
pub type DigitWord = Vec<Digit>;

/// Sequential generators materialize at most this many digits.
pub const MAX_BUFFERED_DIGITS: u64 = 1 << 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DigitError {
    #[error("denominator must be nonzero")]
    ZeroDenominator,
    #[error("{numerator}/{denominator} is not in [0, 1)")]
    OutOfUnitInterval {
        numerator: String,
        denominator: String,
    },
    #[error("continued fractions need 0 < x < 1, got {numerator}/{denominator}")]
    NoContinuedFraction {
        numerator: String,
        denominator: String,
    },
    #[error("base must be at least 2, got {0}")]
    BadBase(u64),
    #[error("digit {digit} at position {position} is outside alphabet {alphabet}")]
    OutsideAlphabet {
        digit: Digit,
        position: usize,
        alphabet: Alphabet,
    },
    #[error("stream exhausted: digit {index} requested, only {length} available")]
    Exhausted { index: u64, length: u64 },
    #[error("continuants need digits >= 1, found 0 at position {0}")]
    ZeroPartialQuotient(usize),
    #[error("sequential generator cannot reach digit {index} (buffer cap {cap})")]
    BufferCap { index: u64, cap: u64 },
    #[error("malformed digit word: {0}")]
    Parse(String),
}

/// Digit alphabet: `{0, .., m-1}` or the positive integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alphabet {
    Finite(u32),
    PositiveIntegers,
}

impl Alphabet {
    pub fn contains(&self, d: Digit) -> bool {
        match *self {
            Alphabet::Finite(m) => d < m as u64,
            Alphabet::PositiveIntegers => d >= 1,
        }
    }

    pub fn size(&self) -> Option<u32> {
        match *self {
            Alphabet::Finite(m) => Some(m),
            Alphabet::PositiveIntegers => None,
        }
    }

    /// Smallest digit of the alphabet.
    pub fn first(&self) -> Digit {
        match self {
            Alphabet::Finite(_) => 0,
            Alphabet::PositiveIntegers => 1,
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::Finite(m) => write!(f, "{m}"),
            Alphabet::PositiveIntegers => write!(f, "inf"),
        }
    }
}

impl FromStr for Alphabet {
    type Err = DigitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(Alphabet::PositiveIntegers);
        }
        match s.parse::<u32>() {
            Ok(m) if m >= 2 => Ok(Alphabet::Finite(m)),
            _ => Err(DigitError::Parse(format!("bad alphabet `{s}`"))),
        }
    }
}

/// Random access to the digits of a point.
pub trait DigitSource: Send + Sync {
    fn alphabet(&self) -> Alphabet;

    fn digit(&self, index: u64) -> Result<Digit, DigitError>;

    /// Number of available digits, `None` for infinite streams.
    fn len(&self) -> Option<u64>;

    fn prefix(&self, count: u64) -> Result<DigitWord, DigitError> {
        (0..count).map(|i| self.digit(i)).collect()
    }
}

/// A digit process backing a generated stream.
///
/// Processes whose digit at `index` is a pure function of the counter RNG
/// return it from `state_at`; the others are advanced sequentially through
/// `next_state` into the stream's prefix buffer.
pub trait DigitGenerator: Send + Sync + fmt::Debug {
    fn alphabet(&self) -> Alphabet;

    /// Hidden state at `index`, when computable without the prefix.
    fn state_at(&self, rng: &CounterRng, index: u64) -> Option<u64>;

    /// Hidden state at `index` given the state at `index - 1`.
    fn next_state(&self, rng: &CounterRng, index: u64, previous: Option<u64>) -> u64;

    /// Observed digit for a hidden state.
    fn emit(&self, state: u64) -> Digit {
        state
    }
}

#[derive(Debug)]
struct Generated {
    generator: Arc<dyn DigitGenerator>,
    rng: CounterRng,
    seed: StreamSeed,
    // Single writer appends, readers take the shared lock.
    buffer: RwLock<Vec<u64>>,
}

impl Generated {
    fn digit(&self, index: u64) -> Result<Digit, DigitError> {
        if let Some(state) = self.generator.state_at(&self.rng, index) {
            return Ok(self.generator.emit(state));
        }
        {
            let buf = self.buffer.read();
            if let Some(&s) = buf.get(index as usize) {
                return Ok(self.generator.emit(s));
            }
        }
        if index >= MAX_BUFFERED_DIGITS {
            return Err(DigitError::BufferCap {
                index,
                cap: MAX_BUFFERED_DIGITS,
            });
        }
        let mut buf = self.buffer.write();
        while buf.len() as u64 <= index {
            let t = buf.len() as u64;
            let prev = buf.last().copied();
            let s = self.generator.next_state(&self.rng, t, prev);
            buf.push(s);
        }
        Ok(self.generator.emit(buf[index as usize]))
    }
}

#[derive(Debug)]
enum Source {
    Materialized(Vec<Digit>),
    Rational {
        numerator: BigUint,
        denominator: BigUint,
        base: u32,
    },
    Generator(Generated),
}

/// An immutable digit stream; `shift` is cheap and shares the source.
#[derive(Debug, Clone)]
pub struct DigitStream {
    alphabet: Alphabet,
    source: Arc<Source>,
    offset: u64,
    length_hint: Option<u64>,
}

impl DigitStream {
    pub fn materialized(alphabet: Alphabet, digits: DigitWord) -> Result<Self, DigitError> {
        if let Some(position) = digits.iter().position(|&d| !alphabet.contains(d)) {
            return Err(DigitError::OutsideAlphabet {
                digit: digits[position],
                position,
                alphabet,
            });
        }
        let len = digits.len() as u64;
        Ok(Self {
            alphabet,
            source: Arc::new(Source::Materialized(digits)),
            offset: 0,
            length_hint: Some(len),
        })
    }

    /// The infinite base-`base` expansion of `numerator/denominator`.
    pub fn rational(
        numerator: impl Into<BigUint>,
        denominator: impl Into<BigUint>,
        base: u32,
    ) -> Result<Self, DigitError> {
        let (numerator, denominator) = (numerator.into(), denominator.into());
        check_unit_interval(&numerator, &denominator, base as u64)?;
        // Reduce so repeated reads share the smallest modulus.
        let g = numerator.gcd(&denominator);
        let (numerator, denominator) = if g.is_zero() {
            (numerator, denominator)
        } else {
            (&numerator / &g, &denominator / &g)
        };
        Ok(Self {
            alphabet: Alphabet::Finite(base),
            source: Arc::new(Source::Rational {
                numerator,
                denominator,
                base,
            }),
            offset: 0,
            length_hint: None,
        })
    }

    pub fn generated(
        generator: Arc<dyn DigitGenerator>,
        seed: StreamSeed,
        length_hint: Option<u64>,
    ) -> Self {
        Self {
            alphabet: generator.alphabet(),
            source: Arc::new(Source::Generator(Generated {
                generator,
                rng: CounterRng::new(seed),
                seed,
                buffer: RwLock::new(Vec::new()),
            })),
            offset: 0,
            length_hint,
        }
    }

    /// Drops the first `k` digits.
    pub fn shift(&self, k: u64) -> Result<Self, DigitError> {
        if let Source::Materialized(d) = self.source.as_ref() {
            let available = d.len() as u64 - self.offset;
            if k > available {
                return Err(DigitError::Exhausted {
                    index: k,
                    length: available,
                });
            }
        }
        Ok(Self {
            alphabet: self.alphabet,
            source: Arc::clone(&self.source),
            offset: self.offset + k,
            length_hint: self.length_hint.map(|n| n.saturating_sub(k)),
        })
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn length_hint(&self) -> Option<u64> {
        self.length_hint
    }

    /// Seed of a generator-backed stream.
    pub fn seed(&self) -> Option<StreamSeed> {
        match self.source.as_ref() {
            Source::Generator(g) => Some(g.seed),
            _ => None,
        }
    }
}

impl DigitSource for DigitStream {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn digit(&self, index: u64) -> Result<Digit, DigitError> {
        let at = self.offset + index;
        match self.source.as_ref() {
            Source::Materialized(d) => d.get(at as usize).copied().ok_or(DigitError::Exhausted {
                index,
                length: d.len() as u64 - self.offset,
            }),
            Source::Rational {
                numerator,
                denominator,
                base,
            } => Ok(rational_digit(numerator, denominator, *base, at)),
            Source::Generator(g) => g.digit(at),
        }
    }

    fn len(&self) -> Option<u64> {
        match self.source.as_ref() {
            Source::Materialized(d) => Some(d.len() as u64 - self.offset),
            _ => None,
        }
    }
}

fn check_unit_interval(num: &BigUint, den: &BigUint, base: u64) -> Result<(), DigitError> {
    if base < 2 {
        return Err(DigitError::BadBase(base));
    }
    if den.is_zero() {
        return Err(DigitError::ZeroDenominator);
    }
    if num >= den {
        return Err(DigitError::OutOfUnitInterval {
            numerator: num.to_string(),
            denominator: den.to_string(),
        });
    }
    Ok(())
}

/// Digit `i` of `num/den` in base `base`: `floor(base * (num * base^i mod den) / den)`.
fn rational_digit(num: &BigUint, den: &BigUint, base: u32, i: u64) -> Digit {
    if let (Some(n), Some(d)) = (num.to_u64(), den.to_u64()) {
        let d128 = d as u128;
        let r = (n as u128 * pow_mod(base as u128, i, d128)) % d128;
        return ((r * base as u128) / d128) as Digit;
    }
    let r = (num * BigUint::from(base).modpow(&BigUint::from(i), den)) % den;
    ((r * base) / den).to_u64().expect("digit below base")
}

fn pow_mod(mut b: u128, mut e: u64, m: u128) -> u128 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    acc
}

/// First `count` base-`base` digits of `numerator/denominator` by long division.
///
/// Exact rationals never produce a tail of all `base-1` digits: terminating
/// expansions end in zeros.
pub fn expand_rational(
    numerator: impl Into<BigUint>,
    denominator: impl Into<BigUint>,
    base: u32,
    count: usize,
) -> Result<DigitWord, DigitError> {
    let (num, den) = (numerator.into(), denominator.into());
    check_unit_interval(&num, &den, base as u64)?;
    let mut rem = num;
    let b = BigUint::from(base);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        rem *= &b;
        let (q, r) = rem.div_rem(&den);
        out.push(q.to_u64().expect("digit below base"));
        rem = r;
    }
    Ok(out)
}

/// Continued-fraction digits of a rational in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfExpansion {
    /// First `min(count, length)` digits.
    pub digits: DigitWord,
    /// Total number of digits before the Euclidean algorithm terminates.
    pub length: usize,
}

impl CfExpansion {
    pub fn terminated(&self) -> bool {
        self.digits.len() == self.length
    }
}

pub fn expand_cf(
    numerator: impl Into<BigUint>,
    denominator: impl Into<BigUint>,
    count: usize,
) -> Result<CfExpansion, DigitError> {
    let (mut p, mut q) = (numerator.into(), denominator.into());
    if q.is_zero() {
        return Err(DigitError::ZeroDenominator);
    }
    if p.is_zero() || p >= q {
        return Err(DigitError::NoContinuedFraction {
            numerator: p.to_string(),
            denominator: q.to_string(),
        });
    }
    let mut digits = Vec::new();
    let mut length = 0;
    // x = p/q = 1/(a + r/p) with a = q div p.
    while !p.is_zero() {
        let (a, r) = q.div_rem(&p);
        if digits.len() < count {
            digits.push(a.to_u64().unwrap_or(Digit::MAX));
        }
        length += 1;
        q = p;
        p = r;
    }
    Ok(CfExpansion { digits, length })
}

/// Convergents `(p_n, q_n)` of `1/(a_1 + 1/(a_2 + ...))` with
/// `p_{-1} = 1, p_0 = 0, q_{-1} = 0, q_0 = 1`.
pub fn continuants(digits: &[Digit]) -> Result<Vec<(BigUint, BigUint)>, DigitError> {
    if let Some(pos) = digits.iter().position(|&a| a == 0) {
        return Err(DigitError::ZeroPartialQuotient(pos));
    }
    let (mut p2, mut p1) = (BigUint::one(), BigUint::zero());
    let (mut q2, mut q1) = (BigUint::zero(), BigUint::one());
    let mut out = Vec::with_capacity(digits.len());
    for &a in digits {
        let p = &p1 * a + &p2;
        let q = &q1 * a + &q2;
        out.push((p.clone(), q.clone()));
        p2 = std::mem::replace(&mut p1, p);
        q2 = std::mem::replace(&mut q1, q);
    }
    Ok(out)
}

/// Final denominator `q_n` only, without keeping the history.
pub fn continuant_denominator(digits: &[Digit]) -> Result<BigUint, DigitError> {
    if let Some(pos) = digits.iter().position(|&a| a == 0) {
        return Err(DigitError::ZeroPartialQuotient(pos));
    }
    let (mut q2, mut q1) = (BigUint::zero(), BigUint::one());
    for &a in digits {
        let q = &q1 * a + &q2;
        q2 = std::mem::replace(&mut q1, q);
    }
    Ok(q1)
}

/// Natural log of a big integer without overflow.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits f64").ln();
    }
    let shift = bits - 60;
    let top = (x >> shift).to_f64().expect("60 bits fit f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// A rank-`n` basic interval of base `m`: the points whose first `n` digits
/// equal `digits`. Its length `m^{-n}` is kept as `(base, n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CylinderInterval {
    base: u32,
    digits: DigitWord,
}

impl CylinderInterval {
    pub fn new(base: u32, digits: DigitWord) -> Result<Self, DigitError> {
        if base < 2 {
            return Err(DigitError::BadBase(base as u64));
        }
        let alphabet = Alphabet::Finite(base);
        if let Some(position) = digits.iter().position(|&d| !alphabet.contains(d)) {
            return Err(DigitError::OutsideAlphabet {
                digit: digits[position],
                position,
                alphabet,
            });
        }
        Ok(Self { base, digits })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn rank(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[Digit] {
        &self.digits
    }

    /// `ln |I| = -n ln m`.
    pub fn ln_length(&self) -> f64 {
        -(self.rank() as f64) * (self.base as f64).ln()
    }

    pub fn extend(&self, digit: Digit) -> Result<Self, DigitError> {
        let mut digits = self.digits.clone();
        digits.push(digit);
        Self::new(self.base, digits)
    }

    /// Whether `other` lies inside `self`.
    pub fn contains(&self, other: &CylinderInterval) -> bool {
        self.base == other.base
            && other.rank() >= self.rank()
            && other.digits[..self.rank()] == self.digits[..]
    }

    /// Exact endpoints `[left, left + m^{-n})`.
    pub fn bounds(&self) -> (BigRational, BigRational) {
        let base = BigUint::from(self.base);
        let mut left = BigUint::zero();
        for &d in &self.digits {
            left = left * &base + d;
        }
        let den = base.pow(self.rank() as u32);
        let l = BigRational::new(left.clone().into(), den.clone().into());
        let r = BigRational::new((left + 1u32).into(), den.into());
        (l, r)
    }
}

/// Writes the plain-text digit-word format:
/// a header `alphabet=<m|inf> count=<n>` then space separated digits.
pub fn format_word(alphabet: Alphabet, digits: &[Digit]) -> String {
    let mut out = format!("alphabet={alphabet} count={}\n", digits.len());
    let body: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
    out.push_str(&body.join(" "));
    out.push('\n');
    out
}

pub fn parse_word(text: &str) -> Result<(Alphabet, DigitWord), DigitError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DigitError::Parse("missing header".into()))?;
    let mut alphabet = None;
    let mut count = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("alphabet", v)) => alphabet = Some(v.parse::<Alphabet>()?),
            Some(("count", v)) => {
                count = Some(
                    v.parse::<usize>()
                        .map_err(|_| DigitError::Parse(format!("bad count `{v}`")))?,
                )
            }
            _ => return Err(DigitError::Parse(format!("unknown header field `{field}`"))),
        }
    }
    let alphabet = alphabet.ok_or_else(|| DigitError::Parse("header lacks alphabet".into()))?;
    let count = count.ok_or_else(|| DigitError::Parse("header lacks count".into()))?;
    let digits = lines
        .flat_map(str::split_whitespace)
        .map(|t| {
            t.parse::<Digit>()
                .map_err(|_| DigitError::Parse(format!("bad digit `{t}`")))
        })
        .collect::<Result<DigitWord, _>>()?;
    if digits.len() != count {
        return Err(DigitError::Parse(format!(
            "header says {count} digits, found {}",
            digits.len()
        )));
    }
    if let Some(position) = digits.iter().position(|&d| !alphabet.contains(d)) {
        return Err(DigitError::OutsideAlphabet {
            digit: digits[position],
            position,
            alphabet,
        });
    }
    Ok((alphabet, digits))
}
