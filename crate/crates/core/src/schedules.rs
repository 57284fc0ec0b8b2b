//! Index families `q_1(n) < .. < q_l(n)` and the growth/separation check
//! `q_i(n) >= q_{i-1}(n) + eps n`, `q_i(n+1) >= q_i(n) + eps`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

/// Separation constant used when none is given.
pub const DEFAULT_EPSILON: (u64, u64) = (1, 2);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("schedule needs at least one index function")]
    Empty,
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(Ratio<u64>),
    #[error("exponential base must be at least 2, got {0}")]
    BadBase(u64),
    #[error("exponential scale must be positive")]
    BadScale,
    #[error("q_{index}({n}) overflows 64 bits")]
    Overflow { index: usize, n: u64 },
    #[error("q_{index}({n}) = {value} is not a positive integer")]
    NonPositive { index: usize, n: u64, value: i128 },
    #[error("cannot parse index function `{0}`")]
    Parse(String),
    #[error("schedule fails at i = {}, n = {}: {}", .0.index, .0.n, .0.kind)]
    Invalid(Violation),
}

/// One index function `n -> q(n)` on the positive integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexFn {
    /// Integer coefficients, constant term first.
    Poly(Vec<i64>),
    /// `floor(scale * base^n)`.
    Exp { base: u64, scale: Ratio<u64> },
}

impl IndexFn {
    /// `q(n) = j n`.
    pub fn linear(j: i64) -> Self {
        IndexFn::Poly(vec![0, j])
    }

    /// Value at `n`, or `None` when it does not fit in `i128`.
    fn eval_wide(&self, n: u64) -> Option<i128> {
        match self {
            IndexFn::Poly(c) => {
                let x = n as i128;
                c.iter()
                    .rev()
                    .try_fold(0i128, |acc, &a| acc.checked_mul(x)?.checked_add(a as i128))
            }
            IndexFn::Exp { base, scale } => {
                let n32 = u32::try_from(n).ok()?;
                let p = BigUint::from(*base).pow(n32) * *scale.numer() / *scale.denom();
                p.to_i128()
            }
        }
    }
}

impl fmt::Display for IndexFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexFn::Poly(c) => {
                let terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| **a != 0)
                    .map(|(k, a)| match k {
                        0 => a.to_string(),
                        1 => format!("{a}n"),
                        _ => format!("{a}n^{k}"),
                    })
                    .collect();
                if terms.is_empty() {
                    write!(f, "0")
                } else {
                    write!(f, "{}", terms.join(" + "))
                }
            }
            IndexFn::Exp { base, scale } => write!(f, "floor({scale} * {base}^n)"),
        }
    }
}

/// Parses `n^2 + 2n`, `3n - 1`, `2*n^2`, `2^n`, `3/2 * 2^n` and the
/// `floor(..)` form printed by `Display`.
impl FromStr for IndexFn {
    type Err = ScheduleError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || ScheduleError::Parse(text.to_string());
        let mut t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(inner) = t.strip_prefix("floor(").and_then(|r| r.strip_suffix(')')) {
            t = inner.to_string();
        }
        if let Some(pos) = t.find("^n") {
            if pos + 2 != t.len() {
                return Err(bad());
            }
            let head = &t[..pos];
            let (scale, base) = match head.rfind('*') {
                Some(star) => (&head[..star], &head[star + 1..]),
                None => ("1", head),
            };
            let base: u64 = base.parse().map_err(|_| bad())?;
            let scale: Ratio<u64> = scale.parse().map_err(|_| bad())?;
            return Ok(IndexFn::Exp { base, scale });
        }
        let mut coeffs: Vec<i64> = Vec::new();
        let mut rest = t.as_str();
        if rest.is_empty() {
            return Err(bad());
        }
        while !rest.is_empty() {
            let sign = match rest.as_bytes()[0] {
                b'-' => {
                    rest = &rest[1..];
                    -1
                }
                b'+' => {
                    rest = &rest[1..];
                    1
                }
                _ => 1,
            };
            let end = rest[1.min(rest.len())..]
                .find(['+', '-'])
                .map_or(rest.len(), |e| e + 1);
            let term = &rest[..end];
            rest = &rest[end..];
            let (coef, power) = match term.find('n') {
                None => (term, 0usize),
                Some(k) => {
                    let coef = term[..k].trim_end_matches('*');
                    let power = match &term[k + 1..] {
                        "" => 1,
                        p => p.strip_prefix('^').and_then(|p| p.parse().ok()).ok_or_else(bad)?,
                    };
                    (if coef.is_empty() { "1" } else { coef }, power)
                }
            };
            let c: i64 = coef.parse().map_err(|_| bad())?;
            if coeffs.len() <= power {
                coeffs.resize(power + 1, 0);
            }
            coeffs[power] = coeffs[power].checked_add(sign * c).ok_or_else(bad)?;
        }
        Ok(IndexFn::Poly(coeffs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `q_i(n) < q_{i-1}(n) + eps n`.
    Separation,
    /// `q_i(n) < q_i(n-1) + eps`.
    Growth,
    /// `q_i(n) <= 0`.
    NonPositive,
    /// `q_i(n)` exceeds 64 bits.
    Overflow,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Separation => "separation q_i(n) >= q_(i-1)(n) + eps n",
            ViolationKind::Growth => "growth q_i(n+1) >= q_i(n) + eps",
            ViolationKind::NonPositive => "value is not a positive integer",
            ViolationKind::Overflow => "value overflows 64 bits",
        };
        f.write_str(s)
    }
}

/// First failing `(i, n)`, with `i` counted from 1. Growth violations are
/// attributed to the earlier index `n` of the pair `(n, n + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub n: u64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    functions: Vec<IndexFn>,
    epsilon: Ratio<u64>,
}

impl Schedule {
    pub fn new(functions: Vec<IndexFn>, epsilon: Ratio<u64>) -> Result<Self, ScheduleError> {
        if functions.is_empty() {
            return Err(ScheduleError::Empty);
        }
        if epsilon.is_zero() || epsilon > Ratio::from_integer(1) {
            return Err(ScheduleError::BadEpsilon(epsilon));
        }
        for f in &functions {
            if let IndexFn::Exp { base, scale } = f {
                if *base < 2 {
                    return Err(ScheduleError::BadBase(*base));
                }
                if scale.is_zero() {
                    return Err(ScheduleError::BadScale);
                }
            }
        }
        Ok(Self { functions, epsilon })
    }

    pub fn with_default_epsilon(functions: Vec<IndexFn>) -> Result<Self, ScheduleError> {
        Self::new(functions, Ratio::new(DEFAULT_EPSILON.0, DEFAULT_EPSILON.1))
    }

    /// `q_j(n) = j n` for `j = 1..l`.
    pub fn linear(l: usize) -> Self {
        Self::with_default_epsilon((1..=l as i64).map(IndexFn::linear).collect())
            .expect("linear schedule")
    }

    pub fn arity(&self) -> usize {
        self.functions.len()
    }

    pub fn functions(&self) -> &[IndexFn] {
        &self.functions
    }

    pub fn epsilon(&self) -> Ratio<u64> {
        self.epsilon
    }

    /// `q_i(n)` with `i` counted from 1.
    pub fn eval(&self, i: usize, n: u64) -> Result<u64, ScheduleError> {
        let v = self.functions[i - 1]
            .eval_wide(n)
            .ok_or(ScheduleError::Overflow { index: i, n })?;
        if v <= 0 {
            return Err(ScheduleError::NonPositive { index: i, n, value: v });
        }
        u64::try_from(v).map_err(|_| ScheduleError::Overflow { index: i, n })
    }

    /// `q_i(n)` as a signed value, defined also at `n = 0`.
    pub fn eval_signed(&self, i: usize, n: u64) -> Option<i128> {
        self.functions[i - 1].eval_wide(n)
    }

    /// `(q_1(n), .., q_l(n))` written into `out`.
    pub fn indices_into(&self, n: u64, out: &mut [u64]) -> Result<(), ScheduleError> {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.eval(i + 1, n)?;
        }
        Ok(())
    }

    pub fn indices(&self, n: u64) -> Result<Vec<u64>, ScheduleError> {
        let mut out = vec![0; self.arity()];
        self.indices_into(n, &mut out)?;
        Ok(out)
    }

    /// Exhaustive check for `1 <= n <= n_max`. Pairs `(n, n + 1)` are only
    /// checked inside the range. The scan runs over `n`, then `i`, with the
    /// separation test before the growth test.
    pub fn validate(&self, n_max: u64) -> Result<(), Violation> {
        let l = self.arity();
        let (num, den) = (*self.epsilon.numer() as u128, *self.epsilon.denom() as u128);
        let mut current = vec![0u64; l];
        let mut next = vec![0u64; l];
        let fill = |n: u64, out: &mut [u64]| -> Result<(), Violation> {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = self.eval(i + 1, n).map_err(|e| Violation {
                    index: i + 1,
                    n,
                    kind: match e {
                        ScheduleError::NonPositive { .. } => ViolationKind::NonPositive,
                        _ => ViolationKind::Overflow,
                    },
                })?;
            }
            Ok(())
        };
        if n_max == 0 {
            return Ok(());
        }
        fill(1, &mut current)?;
        for n in 1..=n_max {
            if n < n_max {
                fill(n + 1, &mut next)?;
            }
            for i in 0..l {
                if i > 0 {
                    // q_i - q_{i-1} >= (num/den) n
                    let gap = current[i] as i128 - current[i - 1] as i128;
                    if gap < 0 || (gap as u128) * den < num * n as u128 {
                        return Err(Violation {
                            index: i + 1,
                            n,
                            kind: ViolationKind::Separation,
                        });
                    }
                }
                if n < n_max {
                    let step = next[i] as i128 - current[i] as i128;
                    if step < 0 || (step as u128) * den < num {
                        return Err(Violation {
                            index: i + 1,
                            n,
                            kind: ViolationKind::Growth,
                        });
                    }
                }
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(())
    }

    /// `validate` as a `Result` with a descriptive error.
    pub fn ensure_valid(&self, n_max: u64) -> Result<(), ScheduleError> {
        self.validate(n_max).map_err(ScheduleError::Invalid)
    }

    /// `q_l(N)`: the largest digit index a run of length `N` reads.
    pub fn max_index(&self, n: u64) -> Result<u64, ScheduleError> {
        self.eval(self.arity(), n)
    }

    /// Largest `eps <= 1` for which the schedule validates on `1..=n_max`,
    /// computed exactly as the minimum of the observed ratios. `None` when no
    /// positive `eps` works.
    pub fn largest_epsilon(&self, n_max: u64) -> Option<Ratio<u64>> {
        let l = self.arity();
        let mut best = Ratio::from_integer(1u64);
        let mut prev: Option<Vec<u64>> = None;
        for n in 1..=n_max {
            let cur = self.indices(n).ok()?;
            for i in 1..l {
                let gap = cur[i].checked_sub(cur[i - 1]).filter(|&g| g > 0)?;
                best = best.min(Ratio::new(gap, n));
            }
            if let Some(p) = &prev {
                for i in 0..l {
                    let step = cur[i].checked_sub(p[i]).filter(|&s| s > 0)?;
                    best = best.min(Ratio::from_integer(step));
                }
            }
            prev = Some(cur);
        }
        Some(best)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.functions.iter().map(|q| q.to_string()).collect();
        write!(f, "({}) with eps = {}", parts.join(", "), self.epsilon)
    }
}
