//! The rigidity experiment: push a measure forward under a linear CA and
//! test whether what is seen looks like the Haar measure of an invariant
//! coset shift.

use serde::{Deserialize, Serialize};

use super::handle::MeasureHandle;
use super::stats::{
    fourier_sweep, haar_criterion, mixing_statistic, single_site_family, Budget, FourierRow, HaarVerdict, MixingResult,
    EXACT_TOL, SAMPLED_SIGMAS,
};
use crate::error::{Error, Result};
use crate::lattice::{Coord, Mode, WindowSpec};
use crate::poly::LocalRule;

/// Default time schedule `{0,1,2,4,8} ∪ {p, p²}`.
pub fn default_t_schedule(p: Option<u32>) -> Vec<u64> {
    let mut t = vec![0, 1, 2, 4, 8];
    if let Some(p) = p {
        t.push(p as u64);
        t.push(p as u64 * p as u64);
    }
    t.sort_unstable();
    t.dedup();
    t
}

pub fn default_n_schedule() -> Vec<i64> {
    vec![1, 2, 4, 8, 16]
}

#[derive(Clone, Debug)]
pub struct RigidityOptions {
    /// Characters based on this window are swept.
    pub char_window: WindowSpec,
    pub t_schedule: Vec<u64>,
    pub n_schedule: Vec<i64>,
    pub fourier_budget: Budget,
    pub mixing_budget: Budget,
    pub char_limit: u128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ConsistentWithCosetHaar,
    Inconsistent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub t: u64,
    /// Largest `|μ̂_t[χ] − μ̂_0[χ]|` over the sweep.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub exact: bool,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    #[serde(flatten)]
    pub result: MixingResult,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TVerdict {
    pub t: u64,
    #[serde(flatten)]
    pub verdict: HaarVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub rule: String,
    pub measure: String,
    pub provenance: Vec<String>,
    pub unit_coefficients: bool,
    pub char_window: String,
    pub t_schedule: Vec<u64>,
    pub n_schedule: Vec<i64>,
    pub fourier: Vec<FourierRow>,
    pub haar: Vec<TVerdict>,
    pub invariance: Vec<InvarianceRow>,
    pub mixing: Vec<MixingRow>,
    pub mixing_skipped: Vec<i64>,
    pub t0_violation: bool,
    pub classification: Classification,
    pub scope: String,
}

impl RigidityReport {
    pub fn consistent(&self) -> bool {
        self.classification == Classification::ConsistentWithCosetHaar
    }
}

/// Runs the Fourier sweeps, invariance comparisons and mixing probes and
/// classifies the evidence. Verdicts on exact values failing make the result
/// inconsistent; failures seen only in sampled values make it inconclusive.
pub fn rigidity_experiment(phi: &LocalRule, mu0: &MeasureHandle, opts: &RigidityOptions) -> Result<RigidityReport> {
    if phi.module() != mu0.module() {
        return Err(Error::RingMismatch {
            left: phi.ring().to_string(),
            right: mu0.ring().to_string(),
        });
    }
    if !opts.t_schedule.contains(&0) {
        return Err(Error::InvalidParameter("the t schedule must include 0".into()));
    }
    let ring = phi.ring();
    let unit_coefficients = phi.coefficients().iter().all(|&c| ring.is_unit(c));

    let mut fourier = Vec::new();
    let mut haar = Vec::new();
    let mut sweeps: Vec<(u64, Vec<FourierRow>)> = Vec::new();
    for &t in &opts.t_schedule {
        let mu = mu0.pushforward(phi, t)?;
        let rows = fourier_sweep(&mu, &opts.char_window, t, opts.fourier_budget, opts.char_limit)?;
        haar.push(TVerdict {
            t,
            verdict: haar_criterion(&rows, true)?,
        });
        fourier.extend(rows.iter().cloned());
        sweeps.push((t, rows));
    }

    let base = &sweeps.iter().find(|(t, _)| *t == 0).expect("t=0 present").1;
    let invariance = sweeps
        .iter()
        .filter(|(t, _)| *t != 0)
        .map(|(t, rows)| {
            let mut max_deviation: f64 = 0.0;
            let mut tolerance: f64 = EXACT_TOL;
            let mut exact = true;
            for (a, b) in rows.iter().zip(base) {
                let d = (a.estimate().value() - b.estimate().value()).norm();
                max_deviation = max_deviation.max(d);
                if !(a.exact && b.exact) {
                    exact = false;
                    let s = SAMPLED_SIGMAS * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt() + EXACT_TOL;
                    tolerance = tolerance.max(s);
                }
            }
            InvarianceRow {
                t: *t,
                max_deviation,
                tolerance,
                exact,
                consistent: max_deviation < tolerance,
            }
        })
        .collect::<Vec<_>>();

    let offsets: Vec<Coord> = phi.offsets().cloned().collect();
    let zero = vec![0; mu0.module().rank()];
    let family = single_site_family(&offsets, &zero);
    let mut mixing = Vec::new();
    let mut mixing_skipped = Vec::new();
    for &n in &opts.n_schedule {
        let sites: Vec<Coord> = offsets.iter().map(|h| h.iter().map(|x| x * n).collect()).collect();
        let fits = match mu0.mode() {
            Mode::Exact => sites.iter().all(|s| mu0.window().contains(s)),
            Mode::Torus => {
                let mut idx: Vec<usize> = sites.iter().map(|s| mu0.window().wrapped_index(s)).collect();
                idx.sort_unstable();
                idx.dedup();
                idx.len() == sites.len()
            }
        };
        if !fits {
            mixing_skipped.push(n);
            continue;
        }
        let result = mixing_statistic(mu0, &family, n, opts.mixing_budget)?;
        mixing.push(result);
    }
    // H-mixing asks for the deviation to vanish in the limit; the largest
    // tested n is held to the tolerance.
    let last = mixing.len().saturating_sub(1);
    let mixing: Vec<MixingRow> = mixing
        .into_iter()
        .enumerate()
        .map(|(i, result)| {
            let tol = if result.exact {
                EXACT_TOL
            } else {
                SAMPLED_SIGMAS * result.stderr + EXACT_TOL
            };
            MixingRow {
                consistent: i != last || result.deviation.abs() < tol,
                result,
            }
        })
        .collect();

    let t0_violation = haar.iter().any(|v| v.t == 0 && !v.verdict.consistent);
    let exact_failure = haar.iter().any(|v| v.verdict.has_exact_violation())
        || invariance.iter().any(|r| r.exact && !r.consistent)
        || mixing.iter().any(|r| r.result.exact && !r.consistent);
    let any_failure = haar.iter().any(|v| !v.verdict.consistent)
        || invariance.iter().any(|r| !r.consistent)
        || mixing.iter().any(|r| !r.consistent);
    let classification = if exact_failure {
        Classification::Inconsistent
    } else if any_failure {
        Classification::Inconclusive
    } else {
        Classification::ConsistentWithCosetHaar
    };
    let scope = format!(
        "characters based on {}; t in {:?}; single-site cylinders at the rule offsets for n in {:?}; no claim beyond these",
        opts.char_window, opts.t_schedule, opts.n_schedule
    );
    Ok(RigidityReport {
        rule: phi.to_text("rule"),
        measure: mu0.label().to_string(),
        provenance: mu0.provenance().to_vec(),
        unit_coefficients,
        char_window: opts.char_window.to_string(),
        t_schedule: opts.t_schedule.clone(),
        n_schedule: opts.n_schedule.clone(),
        fourier,
        haar,
        invariance,
        mixing,
        mixing_skipped,
        t0_violation,
        classification,
        scope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Prob;
    use crate::ring::{ModuleSpec, Ring};

    fn opts(w: &WindowSpec, budget: Budget) -> RigidityOptions {
        RigidityOptions {
            char_window: w.clone(),
            t_schedule: default_t_schedule(Some(2)),
            n_schedule: default_n_schedule(),
            fourier_budget: budget,
            mixing_budget: budget,
            char_limit: 1 << 12,
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(default_t_schedule(Some(3)), vec![0, 1, 2, 3, 4, 8, 9]);
        assert_eq!(default_t_schedule(None), vec![0, 1, 2, 4, 8]);
    }

    #[test]
    fn biased_bernoulli_flags_t0() {
        let m = ModuleSpec::scalar(Ring::zmod(2).unwrap());
        let phi = LocalRule::parse("rule ring=zmod:2 rank=1 H=(0):1;(1):1").unwrap();
        let w = WindowSpec::at_zero((1, 0), &[30]).unwrap();
        let mu = MeasureHandle::bernoulli(&m, &w, Mode::Exact, vec![Prob::new(3, 4), Prob::new(1, 4)], 0).unwrap();
        let b = WindowSpec::at_zero((1, 0), &[2]).unwrap();
        let r = rigidity_experiment(&phi, &mu, &opts(&b, Budget::Exact)).unwrap();
        assert!(r.t0_violation);
        assert_eq!(r.classification, Classification::Inconsistent);
    }
}
