//! Dependence coefficients of finite stationary Markov chains, the
//! interpolation bounds for `varpi_{q,p}`, the size `-1/2` predicate, and
//! exact mixingale norms `|| E(Ybar_i(n) | G^{(i)}_{n-m}) ||_2`.
//!
//! Past and future sigma-algebras reduce to single states by the Markov
//! property: for `A` in the past and `B` in the future of a stationary chain,
//! `P(A ∩ B)` depends on `A` only through the state at the boundary.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::digitkit::Digit;
use crate::linalg::{Matrix, Scalar};
use crate::measures::{FiniteMarkovChain, Law};
use crate::observables::{decode, decompose, encode, HolderConstants, Observable, ObservableError, DEFAULT_TUPLE_CAP};
use crate::schedules::{Schedule, ScheduleError};

/// Largest chain handled by the exact mixingale computation.
pub const MAX_MIXINGALE_STATES: usize = 16;
/// Largest arity handled by the exact mixingale computation.
pub const MAX_MIXINGALE_ARITY: usize = 3;
/// Enumeration cap for the brute-force coefficient oracle.
pub const MAX_BRUTE_FORCE_WORDS: u128 = 100_000;
/// Subset enumeration for `alpha` is limited to this many states.
pub const MAX_ALPHA_STATES: usize = 16;
/// Size `-1/2` verdict threshold on the log-log slope of `a_n sqrt(n) L_n`.
pub const SIZE_SLOPE_TOL: f64 = 0.01;
/// Minimum `R^2` for an exponential classification.
pub const EXPONENTIAL_R2: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixingError {
    #[error("chain must be irreducible and aperiodic")]
    NotPrimitive,
    #[error("{what}: {size} exceeds the cap {cap}")]
    CapExceeded { what: &'static str, size: u128, cap: u128 },
    #[error("interpolation needs q >= p >= 1, got p = {p}, q = {q}")]
    BadExponents { p: f64, q: f64 },
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("component index {i} outside 1..={arity}")]
    BadComponent { i: usize, arity: usize },
    #[error("size -1/2 test needs n_max >= 30, got {0}")]
    RangeTooShort(u64),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

fn require_primitive(chain: &FiniteMarkovChain) -> Result<(), MixingError> {
    if chain.is_primitive() {
        Ok(())
    } else {
        Err(MixingError::NotPrimitive)
    }
}

/// `P^n - 1 pi`, computed as `(P - 1 pi)^n` for `n >= 1` so that the
/// floating-point path keeps relative accuracy far below machine epsilon.
fn deviation<T: Scalar>(p: &Matrix<T>, pi: &[T], n: u64) -> Matrix<T> {
    let proj = Matrix::repeated_row(pi);
    if n == 0 {
        Matrix::identity(p.size()).sub(&proj)
    } else {
        p.sub(&proj).pow(n)
    }
}

fn psi_of<T: Scalar>(dev: &Matrix<T>, pi: &[T]) -> T {
    let s = dev.size();
    let mut best = T::zero();
    for i in 0..s {
        for j in 0..s {
            let v = (dev.get(i, j).clone() / pi[j].clone()).abs();
            if v > best {
                best = v;
            }
        }
    }
    best
}

fn phi_of<T: Scalar>(dev: &Matrix<T>) -> T {
    let s = dev.size();
    let two = T::one() + T::one();
    let mut best = T::zero();
    for i in 0..s {
        let v = (0..s).fold(T::zero(), |acc, j| acc + dev.get(i, j).clone().abs()) / two.clone();
        if v > best {
            best = v;
        }
    }
    best
}

fn alpha_of<T: Scalar>(dev: &Matrix<T>, pi: &[T]) -> T {
    let s = dev.size();
    let two = T::one() + T::one();
    // d_ij = pi_i (P^n_ij - pi_j); for fixed A the best B collects the
    // positive column sums, which equal half the absolute sum.
    let d: Vec<Vec<T>> = (0..s)
        .map(|i| (0..s).map(|j| pi[i].clone() * dev.get(i, j).clone()).collect())
        .collect();
    let mut best = T::zero();
    for mask in 1u32..(1u32 << s) {
        let mut total = T::zero();
        for j in 0..s {
            let col = (0..s)
                .filter(|&i| mask & (1 << i) != 0)
                .fold(T::zero(), |acc, i| acc + d[i][j].clone());
            total = total + col.abs();
        }
        let v = total / two.clone();
        if v > best {
            best = v;
        }
    }
    best
}

/// `psi(n) = max_{i,j} |P^n_ij / pi_j - 1|`.
pub fn markov_psi(chain: &FiniteMarkovChain, n: u64) -> Result<f64, MixingError> {
    if let Some(v) = markov_psi_exact(chain, n)? {
        return Ok(v.to_f64().unwrap_or(f64::NAN));
    }
    Ok(psi_of(&deviation(chain.transition(), chain.stationary(), n), chain.stationary()))
}

pub fn markov_psi_exact(chain: &FiniteMarkovChain, n: u64) -> Result<Option<BigRational>, MixingError> {
    require_primitive(chain)?;
    Ok(match (chain.transition_exact(), chain.stationary_exact()) {
        (Some(p), Some(pi)) => Some(psi_of(&deviation(p, pi, n), pi)),
        _ => None,
    })
}

/// `phi(n) = max_i (1/2) sum_j |P^n_ij - pi_j|`.
pub fn markov_phi(chain: &FiniteMarkovChain, n: u64) -> Result<f64, MixingError> {
    require_primitive(chain)?;
    Ok(match (chain.transition_exact(), chain.stationary_exact()) {
        (Some(p), Some(pi)) => phi_of(&deviation(p, pi, n)).to_f64().unwrap_or(f64::NAN),
        _ => phi_of(&deviation(chain.transition(), chain.stationary(), n)),
    })
}

/// `alpha(n) = max_{A,B} |P(xi_0 in A, xi_n in B) - pi(A) pi(B)|`.
pub fn markov_alpha(chain: &FiniteMarkovChain, n: u64) -> Result<f64, MixingError> {
    require_primitive(chain)?;
    let s = chain.states();
    if s > MAX_ALPHA_STATES {
        return Err(MixingError::CapExceeded {
            what: "alpha subset enumeration states",
            size: s as u128,
            cap: MAX_ALPHA_STATES as u128,
        });
    }
    Ok(match (chain.transition_exact(), chain.stationary_exact()) {
        (Some(p), Some(pi)) => alpha_of(&deviation(p, pi, n), pi).to_f64().unwrap_or(f64::NAN),
        _ => alpha_of(&deviation(chain.transition(), chain.stationary(), n), chain.stationary()),
    })
}

/// `rho(n)`: largest singular value of `D^{1/2} (P^n - 1 pi) D^{-1/2}`,
/// `D = diag(pi)`, i.e. the maximal correlation of `xi_0` and `xi_n`.
pub fn markov_rho(chain: &FiniteMarkovChain, n: u64) -> Result<f64, MixingError> {
    require_primitive(chain)?;
    let dev = match (chain.transition_exact(), chain.stationary_exact()) {
        (Some(p), Some(pi)) => deviation(p, pi, n).map_f64(),
        _ => deviation(chain.transition(), chain.stationary(), n),
    };
    let pi = chain.stationary();
    let s = chain.states();
    let m = DMatrix::from_fn(s, s, |i, j| {
        let (a, b) = (pi[i].sqrt(), pi[j].sqrt());
        a * dev.get(i, j) / b
    });
    Ok(m.singular_values().iter().copied().fold(0.0, f64::max))
}

/// The four coefficients at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub n: u64,
    pub psi: f64,
    pub phi: f64,
    pub rho: f64,
    pub alpha: f64,
}

pub fn coefficients(chain: &FiniteMarkovChain, n: u64) -> Result<Coefficients, MixingError> {
    Ok(Coefficients {
        n,
        psi: markov_psi(chain, n)?,
        phi: markov_phi(chain, n)?,
        rho: markov_rho(chain, n)?,
        alpha: markov_alpha(chain, n)?,
    })
}

/// Least-squares line `y = slope x + intercept` with `R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Fit of `ln y` against `x` over the positive entries.
pub fn log_linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0 && y.is_finite())
        .map(|(&x, &y)| (x, y.ln()))
        .unzip();
    fit_line(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub rows: Vec<Coefficients>,
    /// Fit of `ln psi(n)` against `n`.
    pub psi_fit: Option<LineFit>,
    /// `X(m)` is measurable with respect to `F_{m-n, m+n}`, so the
    /// approximation rates `beta_p(n)` vanish identically.
    pub beta_identically_zero: bool,
}

pub fn mixing_report(chain: &FiniteMarkovChain, grid: &[u64]) -> Result<MixingReport, MixingError> {
    require_primitive(chain)?;
    let rows: Vec<Coefficients> = grid
        .par_iter()
        .map(|&n| coefficients(chain, n))
        .collect::<Result<_, _>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.psi).collect();
    Ok(MixingReport {
        psi_fit: log_linear_fit(&xs, &ys),
        rows,
        beta_identically_zero: true,
    })
}

/// Forward probabilities of an observed word: joint mass of the word and the
/// hidden state at its last position, starting from `start`.
fn forward(chain: &FiniteMarkovChain, start: &[f64], word: &[Digit]) -> Vec<f64> {
    let obs = chain.observation();
    let mask = |v: Vec<f64>, d: Digit| -> Vec<f64> {
        v.into_iter()
            .enumerate()
            .map(|(s, x)| if obs[s] == d { x } else { 0.0 })
            .collect()
    };
    let mut alpha = mask(start.to_vec(), word[0]);
    for &d in &word[1..] {
        alpha = mask(chain.transition().left_mul(&alpha), d);
    }
    alpha
}

/// Finite-horizon oracle for `psi(n)`: the supremum of
/// `|P(A ∩ B) / (P(A) P(B)) - 1|` over observed cylinders `A` of length
/// `<= h` ending at time 0 and `B` of length `<= h` starting at time `n`.
pub fn brute_force_psi(chain: &FiniteMarkovChain, n: u64, h: usize) -> Result<f64, MixingError> {
    require_primitive(chain)?;
    let a = chain.observation_alphabet().size().expect("finite observation alphabet") as u64;
    let words_at_h = (a as u128).saturating_pow(h as u32);
    if words_at_h > MAX_BRUTE_FORCE_WORDS {
        return Err(MixingError::CapExceeded {
            what: "cylinder words",
            size: words_at_h,
            cap: MAX_BRUTE_FORCE_WORDS,
        });
    }
    let words: Vec<Vec<Digit>> = (1..=h)
        .flat_map(|len| (0..a.pow(len as u32) as usize).map(move |c| decode(c, a, len)))
        .collect();
    let pi = chain.stationary();
    let pn = chain.transition().pow(n);
    let masses: Vec<f64> = words.iter().map(|w| forward(chain, pi, w).iter().sum()).collect();
    let best = words
        .par_iter()
        .enumerate()
        .map(|(ia, wa)| {
            if masses[ia] <= 0.0 {
                return 0.0;
            }
            let at_n = pn.left_mul(&forward(chain, pi, wa));
            words
                .iter()
                .enumerate()
                .filter(|(ib, _)| masses[*ib] > 0.0)
                .map(|(ib, wb)| {
                    let joint: f64 = forward(chain, &at_n, wb).iter().sum();
                    (joint / (masses[ia] * masses[ib]) - 1.0).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Upper bounds for `varpi_{q,p}(n)`, `q >= p >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationBounds {
    pub p: f64,
    pub q: f64,
    /// `(2 alpha)^{1/p - 1/q}`.
    pub from_alpha: f64,
    /// `2^{1 + 1/p - 1/q} rho^{1 - 1/p + 1/q}`.
    pub from_rho: f64,
    /// `2^{1 + 1/p} phi^{1 - 1/p}`.
    pub from_phi: f64,
    pub from_psi: f64,
    pub min: f64,
}

/// `p` and `q` may be `f64::INFINITY`.
pub fn interpolation_bounds(c: &Coefficients, p: f64, q: f64) -> Result<InterpolationBounds, MixingError> {
    if !(p >= 1.0) || !(q >= p) {
        return Err(MixingError::BadExponents { p, q });
    }
    let (ip, iq) = (1.0 / p, 1.0 / q);
    let from_alpha = (2.0 * c.alpha).powf(ip - iq);
    let from_rho = 2f64.powf(1.0 + ip - iq) * c.rho.powf(1.0 - ip + iq);
    let from_phi = 2f64.powf(1.0 + ip) * c.phi.powf(1.0 - ip);
    let from_psi = c.psi;
    let min = [from_alpha, from_rho, from_phi, from_psi].into_iter().fold(f64::INFINITY, f64::min);
    Ok(InterpolationBounds {
        p,
        q,
        from_alpha,
        from_rho,
        from_phi,
        from_psi,
        min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayClass {
    /// `a_n = 0` on the tested range.
    Zero,
    /// Positive terms followed by exact zeros.
    EventuallyZero { last_positive: u64 },
    /// `ln a_n` is linear in `n` with negative slope.
    Exponential { rate: f64, r2: f64 },
    /// Tail slope of `ln(a_n sqrt(n) L_n)` against `ln n`.
    PowerLaw { tail_slope: f64, r2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeHalfReport {
    pub delta: f64,
    pub n_max: u64,
    pub class: DecayClass,
    pub verdict: bool,
    /// `max a_n sqrt(n) L_n` over the sampled range: the witness constant.
    pub witness_sup: f64,
    /// `sum (n L_n)^{-1}` partial sum over the sampled range.
    pub weight_partial_sum: f64,
}

/// `L_n = ln n (ln ln n)^{1 + delta}`.
pub fn l_n(n: f64, delta: f64) -> f64 {
    n.ln() * n.ln().ln().powf(1.0 + delta)
}

/// Integer grid on `[3, n_max]`: every point when small, log-spaced otherwise.
fn size_grid(n_max: u64) -> Vec<u64> {
    if n_max <= 4000 {
        return (3..=n_max).collect();
    }
    let k = 2000;
    let (a, b) = (3f64.ln(), (n_max as f64).ln());
    let mut g: Vec<u64> = (0..=k)
        .map(|i| (a + (b - a) * i as f64 / k as f64).exp().round() as u64)
        .map(|n| n.clamp(3, n_max))
        .collect();
    g.dedup();
    g
}

/// Whether `a_n = O((n^{1/2} L_n)^{-1})`, judged on `[3, n_max]`:
/// exponential decay qualifies outright; otherwise the weighted sequence
/// `a_n sqrt(n) L_n` must not grow over the last decade (log-log slope at
/// most 0.01).
pub fn size_minus_half(a: impl Fn(u64) -> f64, n_max: u64, delta: f64) -> Result<SizeHalfReport, MixingError> {
    if !(delta > 0.0) {
        return Err(MixingError::BadDelta(delta));
    }
    if n_max < 30 {
        return Err(MixingError::RangeTooShort(n_max));
    }
    let grid = size_grid(n_max);
    let values: Vec<f64> = grid.iter().map(|&n| a(n).abs()).collect();
    let weighted: Vec<f64> = grid
        .iter()
        .zip(&values)
        .map(|(&n, v)| v * (n as f64).sqrt() * l_n(n as f64, delta))
        .collect();
    let witness_sup = weighted.iter().copied().fold(0.0, f64::max);
    let weight_partial_sum = grid.iter().map(|&n| 1.0 / (n as f64 * l_n(n as f64, delta))).sum();
    let report = |class, verdict| SizeHalfReport {
        delta,
        n_max,
        class,
        verdict,
        witness_sup,
        weight_partial_sum,
    };

    let last_positive = values.iter().rposition(|&v| v > 0.0);
    let Some(last) = last_positive else {
        return Ok(report(DecayClass::Zero, true));
    };
    // Fit the positive prefix so f64 underflow of a geometric sequence still
    // reads as exponential.
    let xs: Vec<f64> = grid[..=last].iter().map(|&n| n as f64).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let exp_fit = log_linear_fit(&xs, &values[..=last]);
    let pow_fit = log_linear_fit(&lx, &values[..=last]);
    if let (Some(e), Some(p)) = (exp_fit, pow_fit) {
        if last >= 2 && e.r2 >= EXPONENTIAL_R2 && e.slope < 0.0 && e.r2 > p.r2 {
            return Ok(report(
                DecayClass::Exponential {
                    rate: -e.slope,
                    r2: e.r2,
                },
                true,
            ));
        }
    }
    if last + 1 < values.len() {
        return Ok(report(
            DecayClass::EventuallyZero {
                last_positive: grid[last],
            },
            true,
        ));
    }

    let start = grid.partition_point(|&n| (n as f64) < n_max as f64 / 10.0);
    let tail = log_linear_fit(&lx[start..], &weighted[start..]).unwrap_or(LineFit {
        slope: 0.0,
        intercept: 0.0,
        r2: 1.0,
    });
    Ok(report(
        DecayClass::PowerLaw {
            tail_slope: tail.slope,
            r2: tail.r2,
        },
        tail.slope <= SIZE_SLOPE_TOL,
    ))
}

/// Exact data the conditional-expectation sums run over.
struct ChainData<T> {
    p: Matrix<T>,
    pi: Vec<T>,
    obs: Vec<Digit>,
    m: u64,
}

impl<T: Scalar> ChainData<T> {
    fn states(&self) -> usize {
        self.p.size()
    }

    /// Joint law of the observed prefix `x_1..x_k` at `times[..k]` and the
    /// hidden state at `t0 >= times[k-1]`, keyed by prefix code.
    fn forward_joint(&self, times: &[u64], k: usize, t0: u64) -> Vec<Vec<T>> {
        let s = self.states();
        if k == 0 {
            return vec![self.pi.clone()];
        }
        let mut table: Vec<Vec<T>> = vec![vec![T::zero(); s]; self.m as usize];
        for st in 0..s {
            table[self.obs[st] as usize][st] = self.pi[st].clone();
        }
        for j in 1..k {
            let step = self.p.pow(times[j] - times[j - 1]);
            let mut next = vec![vec![T::zero(); s]; table.len() * self.m as usize];
            for (code, v) in table.iter().enumerate() {
                let moved = step.left_mul(v);
                for (st, x) in moved.into_iter().enumerate() {
                    if !x.is_zero() {
                        let c = code * self.m as usize + self.obs[st] as usize;
                        next[c][st] = next[c][st].clone() + x;
                    }
                }
            }
            table = next;
        }
        let last = self.p.pow(t0 - times[k - 1]);
        table.iter().map(|v| last.left_mul(v)).collect()
    }

    /// `B_{k+1}`: expected `F_i` given the observed prefix `x_1..x_k` and the
    /// hidden state at `times[k]`, keyed by prefix code then state.
    fn backward(&self, times: &[u64], k: usize, component: &[T]) -> Vec<Vec<T>> {
        let i = times.len();
        let s = self.states();
        let m = self.m as usize;
        // B_i(prefix_{i-1}, state) = F_i(prefix, obs(state)).
        let mut b: Vec<Vec<T>> = (0..m.pow(i as u32 - 1))
            .map(|code| (0..s).map(|st| component[code * m + self.obs[st] as usize].clone()).collect())
            .collect();
        for j in (k + 1..i).rev() {
            // From B_{j+1} keyed by prefix of length j to B_j keyed by length j-1.
            let step = self.p.pow(times[j] - times[j - 1]);
            b = (0..m.pow(j as u32 - 1))
                .map(|code| {
                    (0..s)
                        .map(|st| {
                            let next = &b[code * m + self.obs[st] as usize];
                            (0..s).fold(T::zero(), |acc, u| acc + step.get(st, u).clone() * next[u].clone())
                        })
                        .collect()
                })
                .collect();
        }
        b
    }

    /// `E F_i(X(t_1), .., X(t_i))`.
    fn expectation(&self, times: &[u64], component: &[T]) -> T {
        let b = self.backward(times, 0, component);
        self.pi
            .iter()
            .zip(&b[0])
            .fold(T::zero(), |acc, (p, v)| acc + p.clone() * v.clone())
    }

    /// `|| E(F_i - E F_i | X(s), s <= t0) ||_2^2`.
    fn conditional_norm_sq(&self, times: &[u64], t0: u64, component: &[T]) -> T {
        let i = times.len();
        let s = self.states();
        let k = times.iter().filter(|&&t| t <= t0).count();
        let joint = self.forward_joint(times, k, t0);
        // h(prefix, state at t0)
        let h: Vec<Vec<T>> = if k == i {
            (0..joint.len())
                .map(|code| vec![component[code].clone(); s])
                .collect()
        } else {
            let b = self.backward(times, k, component);
            let step = self.p.pow(times[k] - t0);
            b.iter()
                .map(|v| {
                    (0..s)
                        .map(|st| (0..s).fold(T::zero(), |acc, u| acc + step.get(st, u).clone() * v[u].clone()))
                        .collect()
                })
                .collect()
        };
        let mean = joint
            .iter()
            .zip(&h)
            .flat_map(|(jv, hv)| jv.iter().zip(hv))
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        joint
            .iter()
            .zip(&h)
            .flat_map(|(jv, hv)| jv.iter().zip(hv))
            .fold(T::zero(), |acc, (a, b)| {
                let d = b.clone() - mean.clone();
                acc + a.clone() * d.clone() * d
            })
    }
}

/// Setup shared by the mixingale and centering tables.
struct Prepared {
    real: ChainData<f64>,
    exact: Option<ChainData<BigRational>>,
    component: Vec<f64>,
    component_exact: Option<Vec<BigRational>>,
}

fn prepare(chain: &FiniteMarkovChain, f: &Observable, i: usize) -> Result<Prepared, MixingError> {
    require_primitive(chain)?;
    if chain.states() > MAX_MIXINGALE_STATES {
        return Err(MixingError::CapExceeded {
            what: "chain states",
            size: chain.states() as u128,
            cap: MAX_MIXINGALE_STATES as u128,
        });
    }
    if f.arity() > MAX_MIXINGALE_ARITY {
        return Err(MixingError::CapExceeded {
            what: "observable arity",
            size: f.arity() as u128,
            cap: MAX_MIXINGALE_ARITY as u128,
        });
    }
    if i == 0 || i > f.arity() {
        return Err(MixingError::BadComponent { i, arity: f.arity() });
    }
    let marginal = Law::Chain(chain.clone()).marginal();
    let d = decompose(f, &marginal, DEFAULT_TUPLE_CAP)?;
    let m = d.alphabet() as u64;
    let obs = chain.observation().to_vec();
    let real = ChainData {
        p: chain.transition().clone(),
        pi: chain.stationary().to_vec(),
        obs: obs.clone(),
        m,
    };
    let exact = match (chain.transition_exact(), chain.stationary_exact(), d.exact_tables()) {
        (Some(p), Some(pi), Some(_)) => Some(ChainData {
            p: p.clone(),
            pi: pi.to_vec(),
            obs,
            m,
        }),
        _ => None,
    };
    Ok(Prepared {
        real,
        component: d.real_tables().component(i).to_vec(),
        component_exact: exact.as_ref().and_then(|_| d.exact_tables().map(|e| e.component(i).to_vec())),
        exact,
    })
}

fn schedule_times(schedule: &Schedule, i: usize, n: u64) -> Result<Vec<u64>, MixingError> {
    (1..=i).map(|j| schedule.eval(j, n).map_err(MixingError::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingaleRow {
    pub n: u64,
    pub m: u64,
    pub norm: f64,
}

/// `|| E(Ybar_i(n) | G^{(i)}_{n-m}) ||_2` with `Ybar_i(n)` the centered
/// `F_i(X(q_1(n)), .., X(q_i(n)))` and `G^{(i)}_k` the past up to time
/// `q_i(k)` (trivial for `k < 0`).
///
/// Conditioning on the past up to `t0 = q_i(n-m)` reduces to the observed
/// coordinates `X(q_j(n))` with `q_j(n) <= t0` and the hidden state at `t0`.
pub fn mixingale_decay(
    chain: &FiniteMarkovChain,
    f: &Observable,
    schedule: &Schedule,
    i: usize,
    m_grid: &[u64],
    n_grid: &[u64],
) -> Result<Vec<MixingaleRow>, MixingError> {
    let prep = prepare(chain, f, i)?;
    if schedule.arity() < i {
        return Err(MixingError::BadComponent { i, arity: schedule.arity() });
    }
    let pairs: Vec<(u64, u64)> = n_grid
        .iter()
        .flat_map(|&n| m_grid.iter().map(move |&m| (n, m)))
        .collect();
    pairs
        .par_iter()
        .map(|&(n, m)| {
            if m > n {
                return Ok(MixingaleRow { n, m, norm: 0.0 });
            }
            let times = schedule_times(schedule, i, n)?;
            let t0 = schedule.eval_signed(i, n - m).ok_or(ScheduleError::Overflow { index: i, n: n - m })?;
            if t0 < 0 {
                return Ok(MixingaleRow { n, m, norm: 0.0 });
            }
            let t0 = t0 as u64;
            let norm_sq = match (&prep.exact, &prep.component_exact) {
                (Some(e), Some(c)) => e.conditional_norm_sq(&times, t0, c).to_f64().unwrap_or(f64::NAN),
                _ => prep.real.conditional_norm_sq(&times, t0, &prep.component).max(0.0),
            };
            Ok(MixingaleRow {
                n,
                m,
                norm: norm_sq.sqrt(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenteringRow {
    pub n: u64,
    pub value: f64,
    pub exact: Option<String>,
}

/// `|E F_i(X(q_1(n)), .., X(q_i(n)))|` along `n_grid`.
pub fn centering_decay(
    chain: &FiniteMarkovChain,
    f: &Observable,
    schedule: &Schedule,
    i: usize,
    n_grid: &[u64],
) -> Result<Vec<CenteringRow>, MixingError> {
    let prep = prepare(chain, f, i)?;
    n_grid
        .par_iter()
        .map(|&n| {
            let times = schedule_times(schedule, i, n)?;
            Ok(match (&prep.exact, &prep.component_exact) {
                (Some(e), Some(c)) => {
                    let v = e.expectation(&times, c).abs();
                    CenteringRow {
                        n,
                        value: v.to_f64().unwrap_or(f64::NAN),
                        exact: Some(v.to_string()),
                    }
                }
                _ => CenteringRow {
                    n,
                    value: prep.real.expectation(&times, &prep.component).abs(),
                    exact: None,
                },
            })
        })
        .collect()
}

/// Parameters witnessing the moment and mixing-rate assumption for a finite
/// chain and a bounded observable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub moment_order: f64,
    pub holder_k: f64,
    pub holder_iota: f64,
    pub holder_kappa: f64,
    /// `1/p + (iota + 2)/m + theta/q <= 1/2` and `theta < kappa - d/p`.
    pub exponents_ok: bool,
    /// Finite alphabets have all moments.
    pub moments_finite: bool,
    pub beta_identically_zero: bool,
    /// Size `-1/2` of `varpi_{p,q}(n) <= psi(n)`.
    pub rate: SizeHalfReport,
    pub holds: bool,
}

pub fn assumption_report(
    chain: &FiniteMarkovChain,
    holder: HolderConstants,
    arity: usize,
    observation_dim: usize,
    n_max: u64,
    delta: f64,
) -> Result<AssumptionReport, MixingError> {
    require_primitive(chain)?;
    let d = (arity.saturating_sub(1)) * observation_dim;
    let kappa = holder.kappa;
    // p large enough that kappa - d/p >= kappa/2, then split the budget 1/2.
    let p = (8.0 * (d as f64 + 1.0) / kappa).max(8.0);
    let theta = (kappa - d as f64 / p) / 2.0;
    let q = 8.0 * theta.max(1.0);
    let moment_order = 8.0 * (holder.iota + 2.0);
    let lhs = 1.0 / p + (holder.iota + 2.0) / moment_order + theta / q;
    let exponents_ok = lhs <= 0.5 && theta > 0.0 && theta < kappa - d as f64 / p;
    // psi(n) by repeated multiplication of the deviation matrix.
    let pi = chain.stationary().to_vec();
    let step = deviation(chain.transition(), &pi, 1);
    let grid = size_grid(n_max);
    let mut lookup = std::collections::HashMap::new();
    let mut cur = Matrix::identity(chain.states());
    let mut gi = 0;
    for n in 1..=*grid.last().unwrap_or(&0) {
        cur = cur.mul(&step);
        if grid.get(gi) == Some(&n) {
            lookup.insert(n, psi_of(&cur, &pi));
            gi += 1;
        }
    }
    let rate = size_minus_half(|n| lookup.get(&n).copied().unwrap_or(0.0), n_max, delta)?;
    let holds = exponents_ok && rate.verdict;
    Ok(AssumptionReport {
        d,
        p,
        q,
        theta,
        moment_order,
        holder_k: holder.k,
        holder_iota: holder.iota,
        holder_kappa: kappa,
        exponents_ok,
        moments_finite: true,
        beta_identically_zero: true,
        rate,
        holds,
    })
}

/// The symmetric 2-state chain `[[1-a, a], [b, 1-b]]` with rational entries.
pub fn two_state_chain(a: BigRational, b: BigRational) -> Result<FiniteMarkovChain, crate::measures::MeasureError> {
    let one = BigRational::one();
    FiniteMarkovChain::from_rationals(vec![vec![&one - &a, a], vec![b.clone(), one - b]], None)
}

/// Digit tuple code helper re-exported for report writers.
pub fn tuple_code(xs: &[Digit], m: u64) -> usize {
    encode(xs, m)
}
