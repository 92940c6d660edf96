//! Experiment files: an `[experiment]` header followed by `[[check]]` tables.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Mode;
use crate::measure::Prob;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentHeader,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckConfig>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentHeader {
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Draws used wherever a check asks for a sampled budget without a count.
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub description: Option<String>,
}

fn default_mode() -> Mode {
    Mode::Exact
}

fn default_samples() -> u64 {
    100_000
}

/// `budget = "exact"`, `budget = "sampled"` or `budget = 50000`.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum BudgetSpec {
    Named(NamedBudget),
    Samples(u64),
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum NamedBudget {
    Exact,
    Sampled,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        BudgetSpec::Named(NamedBudget::Exact)
    }
}

/// A coset representative `c_m = offset + (Σ m_i) · slope`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CosetRep {
    pub offset: Vec<u32>,
    pub slope: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    Uniform {
        ring: String,
        #[serde(default = "one")]
        rank: usize,
        #[serde(default)]
        dims: Option<[usize; 2]>,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
    },
    Bernoulli {
        ring: String,
        #[serde(default = "one")]
        rank: usize,
        #[serde(default)]
        dims: Option<[usize; 2]>,
        /// Probabilities of the module codes, as fractions like "3/4".
        probs: Vec<String>,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
    },
    Kernel {
        kernel: String,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
    },
    Coset {
        kernel: String,
        coset: CosetRep,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
    },
    Point {
        ring: String,
        #[serde(default = "one")]
        rank: usize,
        #[serde(default)]
        dims: Option<[usize; 2]>,
        coset: CosetRep,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
    },
}

impl MeasureConfig {
    /// Parses the body of an inline table, e.g.
    /// `kind = "uniform", ring = "zmod:2", extents = [4]`.
    pub fn parse_inline(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrap {
            m: MeasureConfig,
        }
        let doc = format!("m = {{ {text} }}");
        toml::from_str::<Wrap>(&doc).map(|w| w.m).map_err(|e| {
            let column = e.span().map_or(0, |s| s.start.saturating_sub(5) + 1);
            Error::parse("measure description", 1, column, e.message().to_string())
        })
    }
}

fn one() -> usize {
    1
}

fn default_trials() -> u64 {
    20
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct CheckConfig {
    pub name: String,
    #[serde(flatten)]
    pub body: CheckBody,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CheckBody {
    /// Frobenius fast-forward against repeated multiplication and naive iteration.
    Frobenius {
        rule: String,
        ks: Vec<u32>,
        extents: Vec<usize>,
        #[serde(default = "default_trials")]
        trials: u64,
    },
    /// `Φ(c) = c` on a torus.
    FixedPoint { rule: String, coset: CosetRep, extents: Vec<usize> },
    /// Every coboundary of the representative lies in the kernel shift.
    Coset {
        kernel: String,
        coset: CosetRep,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
        #[serde(default = "yes")]
        expect: bool,
    },
    /// Window kernel count, cross-checked by enumeration when small.
    WindowKernel {
        kernel: String,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default)]
        mode: Option<Mode>,
        #[serde(default)]
        expect_count: Option<u64>,
    },
    /// Recurrent values of `Σ φ_h^{p^k} − 1`.
    FPhi { rule: String, expect: Vec<u32> },
    /// Absence of `φ̄`-torsion in the window quotient.
    Torsion {
        kernel: String,
        phibar: u32,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        expect: bool,
    },
    /// `Φ(S) ⊆ S` and `Φ(S) = S` at window scale.
    Invariance {
        rule: String,
        kernel: String,
        extents: Vec<usize>,
        #[serde(default)]
        origin: Option<Vec<i64>>,
        #[serde(default = "yes")]
        expect_invariant: bool,
        #[serde(default = "yes")]
        expect_surjective: bool,
    },
    /// Fourier sweep of a measure against the Haar criterion.
    HaarSweep {
        measure: MeasureConfig,
        char_extents: Vec<usize>,
        #[serde(default)]
        char_origin: Option<Vec<i64>>,
        #[serde(default)]
        budget: BudgetSpec,
        /// "subgroup", "coset" or "delta".
        expect: String,
    },
    /// Single-site mixing deviations along an `n` schedule.
    Mixing {
        measure: MeasureConfig,
        offsets: Vec<Vec<i64>>,
        #[serde(default)]
        value: Option<Vec<u32>>,
        #[serde(default)]
        n_schedule: Option<Vec<i64>>,
        #[serde(default)]
        budget: BudgetSpec,
    },
    /// Plug-in block entropy against an expected value.
    Entropy {
        measure: MeasureConfig,
        block_extents: Vec<usize>,
        #[serde(default)]
        budget: BudgetSpec,
        expect_bits: f64,
        tolerance: f64,
    },
    /// Pushforward sweeps, invariance and mixing, classified.
    Rigidity {
        rule: String,
        measure: MeasureConfig,
        char_extents: Vec<usize>,
        #[serde(default)]
        char_origin: Option<Vec<i64>>,
        #[serde(default)]
        t_schedule: Option<Vec<u64>>,
        #[serde(default)]
        n_schedule: Option<Vec<i64>>,
        #[serde(default)]
        budget: BudgetSpec,
        /// "consistent", "inconsistent", "inconclusive" or "not-consistent".
        expect: String,
    },
    /// CRT splitting commutes with the rule.
    Crt {
        rule: String,
        extents: Vec<usize>,
        #[serde(default = "default_trials")]
        trials: u64,
    },
}

impl CheckBody {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckBody::Frobenius { .. } => "frobenius",
            CheckBody::FixedPoint { .. } => "fixed-point",
            CheckBody::Coset { .. } => "coset",
            CheckBody::WindowKernel { .. } => "window-kernel",
            CheckBody::FPhi { .. } => "f-phi",
            CheckBody::Torsion { .. } => "torsion",
            CheckBody::Invariance { .. } => "invariance",
            CheckBody::HaarSweep { .. } => "haar-sweep",
            CheckBody::Mixing { .. } => "mixing",
            CheckBody::Entropy { .. } => "entropy",
            CheckBody::Rigidity { .. } => "rigidity",
            CheckBody::Crt { .. } => "crt",
        }
    }
}

pub(crate) fn parse_prob(text: &str) -> Result<Prob> {
    let bad = || Error::InvalidParameter(format!("bad probability `{text}`"));
    match text.split_once('/') {
        Some((a, b)) => {
            let (a, b): (i128, i128) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b == 0 {
                return Err(bad());
            }
            Ok(Prob::new(a, b))
        }
        None => Ok(Prob::from_integer(text.trim().parse().map_err(|_| bad())?)),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::parse("experiment config", line, column, e.message().to_string())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let cfg: ExperimentConfig = r#"
[experiment]
name = "t"
seed = 3

[[check]]
name = "fp"
kind = "f-phi"
rule = "rule ring=zmod:2 rank=1 H=(0):1;(1):1;(2):1"
expect = [0]

[[check]]
name = "sweep"
kind = "haar-sweep"
char_extents = [2]
budget = 1000
expect = "delta"
measure = { kind = "uniform", ring = "zmod:2", extents = [4] }
"#
        .parse()
        .unwrap();
        assert_eq!(cfg.checks.len(), 2);
        assert_eq!(cfg.experiment.mode, Mode::Exact);
        assert!(matches!(cfg.checks[1].body, CheckBody::HaarSweep { budget: BudgetSpec::Samples(1000), .. }));
    }

    #[test]
    fn errors_carry_positions() {
        let err = "[experiment]\nname = \"x\"\nseed = \"oops\"\n".parse::<ExperimentConfig>().unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 8)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[experiment]\nname = \"x\"\nseed = 1\n[[check]]\nname = \"a\"\nkind = \"f-phi\"\nrule = \"r\"\nexpect = []\nexpcet = 1\n";
        assert!(text.parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn probabilities() {
        assert_eq!(parse_prob("3/4").unwrap(), Prob::new(3, 4));
        assert_eq!(parse_prob("1").unwrap(), Prob::from_integer(1));
        assert!(parse_prob("1/0").is_err());
    }
}
