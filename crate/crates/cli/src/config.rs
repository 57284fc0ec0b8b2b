//! Run configuration: a TOML document tagged by `experiment`, with every
//! numeric model parameter given as an exact decimal or a `p/q` string.

use std::fmt;

use digitfreq_core::digitkit::Digit;
use digitfreq_core::fractal::PointMode;
use digitfreq_core::measures::{BernoulliLaw, FiniteMarkovChain, GaussMarginal, Law, MarkovLaw, DEFAULT_PREFIX};
use digitfreq_core::observables::{parse_rational, Observable, TableValues, Value};
use digitfreq_core::rng::StreamSeed;
use digitfreq_core::schedules::{IndexFn, Schedule};
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A number written as a TOML integer, float, or string (`"1/3"`, `"0.25"`).
/// Floats are read through their shortest decimal form, so `0.4` is `2/5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn rational(&self) -> Result<BigRational, CliError> {
        match self {
            Num::Int(i) => Ok(BigRational::from_integer(BigInt::from(*i))),
            Num::Float(x) => parse_rational(&format!("{x}"))
                .ok_or_else(|| CliError::Parse(format!("`{x}` is not a finite decimal"))),
            Num::Text(s) => parse_rational(s).ok_or_else(|| CliError::Parse(format!("`{s}` is not a number"))),
        }
    }

    pub fn f64(&self) -> Result<f64, CliError> {
        match self {
            Num::Text(s) if s.trim().eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            _ => Ok(self.rational()?.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Int(i) => write!(f, "{i}"),
            Num::Float(x) => write!(f, "{x}"),
            Num::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    /// Digits `0..m-1`, or `1, 2, ..` with `positive_integers = true`.
    Bernoulli {
        weights: Vec<Num>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        positive_integers: bool,
    },
    Markov {
        #[serde(rename = "R")]
        joint: Vec<Vec<Num>>,
    },
    GaussMarginal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prefix: Option<usize>,
    },
    FiniteChain {
        #[serde(rename = "P")]
        transition: Vec<Vec<Num>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        obs: Option<Vec<Digit>>,
    },
}

fn rationals(v: &[Num]) -> Result<Vec<BigRational>, CliError> {
    v.iter().map(Num::rational).collect()
}

fn matrix(v: &[Vec<Num>]) -> Result<Vec<Vec<BigRational>>, CliError> {
    v.iter().map(|r| rationals(r)).collect()
}

impl LawSpec {
    pub fn build(&self) -> Result<Law, CliError> {
        Ok(match self {
            LawSpec::Bernoulli {
                weights,
                positive_integers: false,
            } => Law::Bernoulli(BernoulliLaw::from_rationals(rationals(weights)?)?),
            LawSpec::Bernoulli {
                weights,
                positive_integers: true,
            } => Law::Bernoulli(BernoulliLaw::positive_integers_exact(rationals(weights)?)?),
            LawSpec::Markov { joint } => Law::Markov(MarkovLaw::from_rationals(matrix(joint)?)?),
            LawSpec::GaussMarginal { prefix } => Law::Bernoulli(GaussMarginal::law(prefix.unwrap_or(DEFAULT_PREFIX))),
            LawSpec::FiniteChain { transition, obs } => {
                Law::Chain(FiniteMarkovChain::from_rationals(matrix(transition)?, obs.clone())?)
            }
        })
    }

    pub fn bernoulli(&self) -> Result<BernoulliLaw, CliError> {
        match self.build()? {
            Law::Bernoulli(b) => Ok(b),
            _ => Err(CliError::Validation("this experiment needs a Bernoulli law".into())),
        }
    }

    /// Chains directly, Markov laws through their transition matrix.
    pub fn chain(&self) -> Result<FiniteMarkovChain, CliError> {
        match self.build()? {
            Law::Chain(c) => Ok(c),
            Law::Markov(m) => {
                let rows = m
                    .transition_exact()
                    .ok_or_else(|| CliError::Validation("markov law lost its exact form".into()))?;
                Ok(FiniteMarkovChain::from_rationals(rows, None)?)
            }
            Law::Bernoulli(b) => {
                let w = b
                    .distribution()
                    .exact_prefix()
                    .filter(|_| b.alphabet().size().is_some())
                    .ok_or_else(|| CliError::Validation("chain needs a finite exact law".into()))?
                    .to_vec();
                Ok(FiniteMarkovChain::from_rationals(vec![w; b.alphabet().size().unwrap() as usize], None)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Index functions such as `"n"`, `"2n"`, `"n^2 + 2n"`, `"2^n"`.
    pub functions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Num>,
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Schedule, CliError> {
        let fns: Vec<IndexFn> = self
            .functions
            .iter()
            .map(|f| f.parse().map_err(|e: digitfreq_core::schedules::ScheduleError| CliError::Parse(e.to_string())))
            .collect::<Result<_, _>>()?;
        match &self.epsilon {
            None => Ok(Schedule::with_default_epsilon(fns)?),
            Some(e) => {
                let r = e.rational()?;
                let bad = || CliError::Validation(format!("epsilon {e} must lie in (0, 1]"));
                if !r.is_positive() {
                    return Err(bad());
                }
                let num = r.numer().to_u64().ok_or_else(bad)?;
                let den = r.denom().to_u64().ok_or_else(bad)?;
                Ok(Schedule::new(fns, Ratio::new(num, den))?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    IndicatorProduct {
        word: Vec<Digit>,
    },
    /// Values on `{0..m-1}^arity`, first coordinate most significant.
    Table {
        alphabet: u32,
        arity: usize,
        values: Vec<Num>,
    },
    Constant {
        value: Num,
        arity: usize,
    },
}

impl ObservableSpec {
    pub fn build(&self) -> Result<Observable, CliError> {
        Ok(match self {
            ObservableSpec::IndicatorProduct { word } => Observable::indicator_product(word.clone())?,
            ObservableSpec::Table { alphabet, arity, values } => {
                Observable::table(*alphabet, *arity, TableValues::Exact(rationals(values)?))?
            }
            ObservableSpec::Constant { value, arity } => Observable::constant(Value::Exact(value.rational()?), *arity)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GzbSpec {
    /// `b > 1`.
    pub b: Num,
    pub k_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SllnRun,
    FreqCount,
    PairCount,
    DimFormula,
    DimEstimate,
    MixingReport,
    MixingaleDecay,
    ConstructPoint,
    CfBound,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SllnRun => "slln-run",
            Experiment::FreqCount => "freq-count",
            Experiment::PairCount => "pair-count",
            Experiment::DimFormula => "dim-formula",
            Experiment::DimEstimate => "dim-estimate",
            Experiment::MixingReport => "mixing-report",
            Experiment::MixingaleDecay => "mixingale-decay",
            Experiment::ConstructPoint => "construct-point",
            Experiment::CfBound => "cf-bound",
        }
    }

    /// Experiments whose output depends on the seed list.
    pub fn seeded(self) -> bool {
        !matches!(
            self,
            Experiment::DimFormula | Experiment::MixingReport | Experiment::MixingaleDecay
        )
    }
}

/// One experiment. Fields not used by the chosen experiment are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    /// slln-run: also trace the components `S_i(N)/N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<bool>,
    /// freq-count: restrict the table to these words.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<Vec<Digit>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Num>,
    /// dim-estimate ranks, mixing-report lags, mixingale-decay values of n.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<u64>>,
    /// mixingale-decay lags m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<u64>>,
    /// mixingale-decay values of n for the centering table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centering_grid: Option<Vec<u64>>,
    /// mixingale-decay component index i.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    /// mixing-report interpolation exponents, `"inf"` allowed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Num>,
    /// mixing-report: cylinder depth of the brute-force psi check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brute_force_depth: Option<usize>,
    /// mixing-report: exponent in `L_n = ln n (ln ln n)^{1+delta}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Num>,
    /// mixing-report: range of the size -1/2 test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_range: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PointMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gzb: Option<GzbSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Canonical text: the serialization of the parsed config. Parsing the
    /// canonical text and serializing again gives the same bytes.
    pub fn canonical(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn hash(&self) -> Result<String, CliError> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![0])
    }

    pub fn stream_seeds(&self) -> Vec<StreamSeed> {
        self.seed_list().into_iter().map(|s| StreamSeed::new(s, 0)).collect()
    }

    pub fn require<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field
            .as_ref()
            .ok_or_else(|| CliError::Parse(format!("{} needs `{name}`", self.experiment.name())))
    }

    pub fn law(&self) -> Result<&LawSpec, CliError> {
        self.require(&self.law, "law")
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        self.require(&self.schedule, "schedule")?.build()
    }

    pub fn observable(&self) -> Result<Observable, CliError> {
        self.require(&self.observable, "observable")?.build()
    }

    pub fn n(&self) -> Result<u64, CliError> {
        self.require(&self.n, "n").copied()
    }
}

/// `a..b` (exclusive), `a..=b`, or a comma list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Parse(format!("bad seed range `{text}`"));
    let t = text.trim();
    if let Some((a, b)) = t.split_once("..=") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        return if a <= b { Ok((a..=b).collect()) } else { Err(bad()) };
    }
    if let Some((a, b)) = t.split_once("..") {
        let (a, b): (u64, u64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
        return if a < b { Ok((a..b).collect()) } else { Err(bad()) };
    }
    t.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SLLN: &str = r#"
experiment = "slln-run"
n = 1024
seeds = [1, 2]

[law]
kind = "bernoulli"
weights = ["1/2", 0.5]

[schedule]
functions = ["n", "2n", "n^2 + 2n"]

[observable]
kind = "indicator_product"
word = [0, 0, 0]
"#;

    #[test]
    fn round_trip_is_byte_identical() {
        let c = RunConfig::parse(SLLN).unwrap();
        let text = c.canonical().unwrap();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.canonical().unwrap(), text);
        assert_eq!(c.hash().unwrap().len(), 64);
    }

    #[test]
    fn builds_models() {
        let c = RunConfig::parse(SLLN).unwrap();
        assert_eq!(c.schedule().unwrap().indices(3).unwrap(), vec![3, 6, 15]);
        assert_eq!(c.observable().unwrap().arity(), 3);
        assert!(matches!(c.law().unwrap().build().unwrap(), Law::Bernoulli(_)));
        assert_eq!(Num::Float(0.4).rational().unwrap(), BigRational::new(2.into(), 5.into()));
        assert_eq!(Num::Text("inf".into()).f64().unwrap(), f64::INFINITY);
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(matches!(RunConfig::parse("experiment = \"slln-run\"\nbogus = 1\n"), Err(CliError::Parse(_))));
        assert!(RunConfig::parse("experiment = \"nope\"\n").is_err());
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("5, 7").unwrap(), vec![5, 7]);
        assert!(parse_seeds("3..1").is_err());
    }
}
