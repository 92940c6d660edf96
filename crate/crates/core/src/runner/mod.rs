//! Config-driven experiment runs producing deterministic reports.

pub mod config;
pub mod report;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{BudgetSpec, CheckBody, CheckConfig, CosetRep, ExperimentConfig, ExperimentHeader, MeasureConfig};
pub use report::{write_outputs, CheckOutcome, Failure, Report, Table};

use crate::crt::{conjugacy_check, CrtDecomposition};
use crate::error::{Error, Result};
use crate::lattice::{Coord, Mode, WindowConfig, WindowSpec};
use crate::measure::experiment::{default_n_schedule, default_t_schedule, rigidity_experiment, Classification, RigidityOptions};
use crate::measure::stats::{
    block_entropy, fourier_sweep, haar_criterion, mixing_statistic, single_site_family, Budget, EXACT_TOL, SAMPLED_SIGMAS,
};
use crate::measure::{MeasureHandle, ENUMERATION_LIMIT};
use crate::poly::{frobenius_power, prime_char, LocalRule};
use crate::ring::{compute_f_phi, ModuleSpec, Ring};
use crate::rng::{derive_seed, draw_rng};
use crate::shifts::{
    coset_from_cocycle, coset_shift_check, invariance_and_surjectivity_check, probe_vectors, submodule_condition_check,
    torsion_free_check, KernelShiftSpec, WindowBasis,
};

/// Bundled experiment files.
pub const BUNDLED: &[(&str, &str)] = &[
    ("example_checkerboard", include_str!("../../configs/example_checkerboard.toml")),
    ("frobenius_suite", include_str!("../../configs/frobenius_suite.toml")),
    ("measure_suite", include_str!("../../configs/measure_suite.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Lift the enumeration guard.
    pub force: bool,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Replaces the seed in the file.
    pub seed: Option<u64>,
    /// Replaces the default mode in the file.
    pub mode: Option<Mode>,
}

impl RunOptions {
    fn limit(&self) -> u128 {
        if self.force {
            u128::MAX
        } else {
            ENUMERATION_LIMIT
        }
    }
}

/// Parses a file and checks every descriptor it names.
pub fn load(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = text.parse()?;
    let mut names = BTreeSet::new();
    for check in &cfg.checks {
        if !names.insert(check.name.as_str()) {
            return Err(Error::InvalidParameter(format!("duplicate check name `{}`", check.name)));
        }
        validate(&check.body).map_err(|e| Error::InvalidParameter(format!("check `{}`: {e}", check.name)))?;
    }
    Ok(cfg)
}

fn validate_measure(m: &MeasureConfig) -> Result<()> {
    match m {
        MeasureConfig::Uniform { ring, .. } | MeasureConfig::Point { ring, .. } => Ring::parse(ring).map(|_| ()),
        MeasureConfig::Bernoulli { ring, probs, .. } => {
            Ring::parse(ring)?;
            probs.iter().try_for_each(|p| config::parse_prob(p).map(|_| ()))
        }
        MeasureConfig::Kernel { kernel, .. } | MeasureConfig::Coset { kernel, .. } => KernelShiftSpec::parse(kernel).map(|_| ()),
    }
}

fn validate(body: &CheckBody) -> Result<()> {
    match body {
        CheckBody::Frobenius { rule, .. }
        | CheckBody::FixedPoint { rule, .. }
        | CheckBody::FPhi { rule, .. }
        | CheckBody::Crt { rule, .. } => LocalRule::parse(rule).map(|_| ()),
        CheckBody::Coset { kernel, .. } | CheckBody::WindowKernel { kernel, .. } | CheckBody::Torsion { kernel, .. } => {
            KernelShiftSpec::parse(kernel).map(|_| ())
        }
        CheckBody::Invariance { rule, kernel, .. } => {
            LocalRule::parse(rule)?;
            KernelShiftSpec::parse(kernel).map(|_| ())
        }
        CheckBody::HaarSweep { measure, expect, .. } => {
            if !["subgroup", "coset", "delta"].contains(&expect.as_str()) {
                return Err(Error::InvalidParameter(format!("unknown expectation `{expect}`")));
            }
            validate_measure(measure)
        }
        CheckBody::Mixing { measure, .. } | CheckBody::Entropy { measure, .. } => validate_measure(measure),
        CheckBody::Rigidity {
            rule, measure, expect, ..
        } => {
            if !["consistent", "inconsistent", "inconclusive", "not-consistent"].contains(&expect.as_str()) {
                return Err(Error::InvalidParameter(format!("unknown expectation `{expect}`")));
            }
            LocalRule::parse(rule)?;
            validate_measure(measure)
        }
    }
}

/// Runs every check. Checks run concurrently; the report keeps file order.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let work = || {
        let mut header = cfg.experiment.clone();
        if let Some(seed) = opts.seed {
            header.seed = seed;
        }
        if let Some(mode) = opts.mode {
            header.mode = mode;
        }
        let checks: Vec<CheckOutcome> = cfg
            .checks
            .par_iter()
            .map(|check| {
                let ctx = Ctx {
                    header: &header,
                    seed: derive_seed(header.seed, &check.name),
                    limit: opts.limit(),
                };
                match run_check(&ctx, &check.body) {
                    Ok(mut out) => {
                        out.name = check.name.clone();
                        out
                    }
                    Err(e) => CheckOutcome::failed(&check.name, check.body.kind(), format!("error: {e}")),
                }
            })
            .collect();
        Report::new(header, checks)
    };
    match opts.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

struct Ctx<'a> {
    header: &'a ExperimentHeader,
    seed: u64,
    limit: u128,
}

impl Ctx<'_> {
    fn budget(&self, b: BudgetSpec) -> Budget {
        match b {
            BudgetSpec::Named(config::NamedBudget::Exact) => Budget::Exact,
            BudgetSpec::Named(config::NamedBudget::Sampled) => Budget::Samples(self.header.samples),
            BudgetSpec::Samples(n) => Budget::Samples(n),
        }
    }
}

fn window(dims: (usize, usize), origin: &Option<Vec<i64>>, extents: &[usize]) -> Result<WindowSpec> {
    match origin {
        Some(o) => WindowSpec::new(dims, o, extents),
        None => WindowSpec::at_zero(dims, extents),
    }
}

fn default_dims(dims: Option<[usize; 2]>, extents: &[usize]) -> (usize, usize) {
    dims.map_or((extents.len(), 0), |[d, e]| (d, e))
}

fn coset_config(rep: &CosetRep, w: &WindowSpec, module: &ModuleSpec, mode: Mode) -> Result<WindowConfig> {
    coset_from_cocycle(&rep.offset, &rep.slope, w, module, mode)
}

fn build_measure(ctx: &Ctx, m: &MeasureConfig) -> Result<MeasureHandle> {
    measure_from_config(m, ctx.header.mode, ctx.seed)
}

/// Builds the measure a config table describes; `mode` applies when the
/// table names none.
pub fn measure_from_config(m: &MeasureConfig, default_mode: Mode, seed: u64) -> Result<MeasureHandle> {
    let mode_or = |mode: &Option<Mode>| mode.unwrap_or(default_mode);
    match m {
        MeasureConfig::Uniform {
            ring,
            rank,
            dims,
            extents,
            origin,
            mode,
        } => {
            let module = ModuleSpec::new(Ring::parse(ring)?, *rank)?;
            let w = window(default_dims(*dims, extents), origin, extents)?;
            Ok(MeasureHandle::uniform(&module, &w, mode_or(mode), seed))
        }
        MeasureConfig::Bernoulli {
            ring,
            rank,
            dims,
            probs,
            extents,
            origin,
            mode,
        } => {
            let module = ModuleSpec::new(Ring::parse(ring)?, *rank)?;
            let w = window(default_dims(*dims, extents), origin, extents)?;
            let probs = probs.iter().map(|p| config::parse_prob(p)).collect::<Result<_>>()?;
            MeasureHandle::bernoulli(&module, &w, mode_or(mode), probs, seed)
        }
        MeasureConfig::Kernel {
            kernel,
            extents,
            origin,
            mode,
        } => {
            let s = KernelShiftSpec::parse(kernel)?;
            let w = window(s.dims(), origin, extents)?;
            Ok(MeasureHandle::kernel_haar(&WindowBasis::new(&s, &w, mode_or(mode))?, seed))
        }
        MeasureConfig::Coset {
            kernel,
            coset,
            extents,
            origin,
            mode,
        } => {
            let s = KernelShiftSpec::parse(kernel)?;
            let w = window(s.dims(), origin, extents)?;
            let c = coset_config(coset, &w, s.module(), mode_or(mode))?;
            MeasureHandle::coset(&c, &s, seed)
        }
        MeasureConfig::Point {
            ring,
            rank,
            dims,
            coset,
            extents,
            origin,
            mode,
        } => {
            let module = ModuleSpec::new(Ring::parse(ring)?, *rank)?;
            let w = window(default_dims(*dims, extents), origin, extents)?;
            Ok(MeasureHandle::point_mass(&coset_config(coset, &w, &module, mode_or(mode))?, seed))
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

fn run_check(ctx: &Ctx, body: &CheckBody) -> Result<CheckOutcome> {
    let kind = body.kind();
    match body {
        CheckBody::Frobenius {
            rule,
            ks,
            extents,
            trials,
        } => {
            let rule = LocalRule::parse(rule)?;
            let p = prime_char(rule.ring(), "Frobenius check")? as u64;
            let poly = rule.to_poly();
            let w = WindowSpec::at_zero(rule.dims(), extents)?;
            let mut rows = Vec::new();
            let mut passed = true;
            for &k in ks {
                let steps = p.pow(k);
                let fast = frobenius_power(&rule, k)?;
                let structural = fast == poly.pow(steps);
                let mut matched = 0u64;
                for trial in 0..*trials {
                    let c = WindowConfig::random(
                        w.clone(),
                        rule.module().clone(),
                        Mode::Torus,
                        &mut draw_rng(ctx.seed, trial),
                    );
                    if fast.apply(&c)? == poly.iterate(&c, steps)? {
                        matched += 1;
                    }
                }
                passed &= structural && matched == *trials;
                rows.push(json!({"k": k, "steps": steps, "structural": structural, "trials": trials, "matched": matched}));
            }
            Ok(CheckOutcome::new(
                kind,
                passed,
                format!("Frobenius fast-forward for k in {ks:?} over {}", rule.ring()),
                json!({"rule": rule.to_text("rule"), "window": w.to_string()}),
            )
            .with_table(Table::from_values("frobenius", &["k", "steps", "structural", "trials", "matched"], rows)))
        }
        CheckBody::FixedPoint { rule, coset, extents } => {
            let rule = LocalRule::parse(rule)?;
            let w = WindowSpec::at_zero(rule.dims(), extents)?;
            let c = coset_config(coset, &w, rule.module(), Mode::Torus)?;
            let image = rule.to_poly().apply(&c)?;
            let fixed = image == c;
            Ok(CheckOutcome::new(
                kind,
                fixed,
                format!("Φ(c) = c on the torus {w}: {fixed}"),
                json!({"rule": rule.to_text("rule"), "window": w.to_string(), "fixed": fixed}),
            ))
        }
        CheckBody::Coset {
            kernel,
            coset,
            extents,
            origin,
            mode,
            expect,
        } => {
            let s = KernelShiftSpec::parse(kernel)?;
            let w = window(s.dims(), origin, extents)?;
            let c = coset_config(coset, &w, s.module(), mode.unwrap_or(ctx.header.mode))?;
            let vs = probe_vectors(s.dims(), 8, &mut draw_rng(ctx.seed, 0));
            let check = coset_shift_check(&c, &s, &vs)?;
            let in_kernel = s.contains(&c)?;
            let failure = check.failure.as_ref().map(|(v, site)| json!({"vector": v.to_vec(), "site": site.to_vec()}));
            Ok(CheckOutcome::new(
                kind,
                check.holds == *expect,
                format!("coset shift check on {w}: {} (expected {expect})", check.holds),
                json!({
                    "kernel": s.to_text(),
                    "window": w.to_string(),
                    "holds": check.holds,
                    "representative_in_kernel": in_kernel,
                    "probes": vs.iter().map(|v| v.to_vec()).collect::<Vec<_>>(),
                    "failure": failure,
                }),
            ))
        }
        CheckBody::WindowKernel {
            kernel,
            extents,
            origin,
            mode,
            expect_count,
        } => {
            let s = KernelShiftSpec::parse(kernel)?;
            let w = window(s.dims(), origin, extents)?;
            let mode = mode.unwrap_or(ctx.header.mode);
            let basis = WindowBasis::new(&s, &w, mode)?;
            let count = basis.solution_count();
            let total = (s.module().size() as u128).checked_pow(w.volume() as u32);
            let enumerated = match total {
                Some(n) if n <= ctx.limit => {
                    let mut hits = 0u128;
                    for code in 0..n {
                        let mut rest = code;
                        let q = s.module().size() as u128;
                        let values = (0..w.volume())
                            .flat_map(|_| {
                                let d = (rest % q) as u64;
                                rest /= q;
                                s.module().decode(d)
                            })
                            .collect();
                        let word = WindowConfig::new(w.clone(), s.module().clone(), mode, values)?;
                        if s.contains(&word)? {
                            hits += 1;
                        }
                    }
                    Some(hits)
                }
                _ => None,
            };
            let ring = s.ring();
            let gens = vec![ring.one(), ring.from_int(-1)];
            let closure = submodule_condition_check(&basis, &gens, &mut draw_rng(ctx.seed, 0))?;
            let passed = count.is_some()
                && expect_count.is_none_or(|e| count == Some(e as u128))
                && enumerated.is_none_or(|e| count == Some(e))
                && closure.holds;
            Ok(CheckOutcome::new(
                kind,
                passed,
                format!(
                    "{} solutions on {w}{}",
                    count.map_or("uncountable".to_string(), |c| c.to_string()),
                    enumerated.map_or(String::new(), |e| format!(", enumeration finds {e}"))
                ),
                json!({
                    "kernel": s.to_text(),
                    "window": w.to_string(),
                    "mode": mode,
                    "solution_count": count.map(|c| c.to_string()),
                    "log2_count": basis.log2_count(),
                    "enumerated": enumerated.map(|c| c.to_string()),
                    "expected": expect_count.map(|c| c.to_string()),
                    "constraints": basis.constraint_count(),
                    "closure_holds": closure.holds,
                    "closure_exhaustive": closure.exhaustive,
                    "closure_tuples": closure.tuples_tested,
                }),
            ))
        }
        CheckBody::FPhi { rule, expect } => {
            let rule = LocalRule::parse(rule)?;
            let p = prime_char(rule.ring(), "recurrent values")?;
            let f = compute_f_phi(rule.ring(), &rule.coefficients(), p)?;
            let got: BTreeSet<u32> = f.values.iter().copied().collect();
            let want: BTreeSet<u32> = expect.iter().copied().collect();
            Ok(CheckOutcome::new(
                kind,
                got == want,
                format!("F_Φ = {got:?} (expected {want:?})"),
                json!({"rule": rule.to_text("rule"), "values": got, "preperiod": f.preperiod, "period": f.period}),
            ))
        }
        CheckBody::Torsion {
            kernel,
            phibar,
            extents,
            origin,
            expect,
        } => {
            let s = KernelShiftSpec::parse(kernel)?;
            let w = window(s.dims(), origin, extents)?;
            let free = torsion_free_check(&s, &w, *phibar)?;
            let full = WindowBasis::new(&s, &w, Mode::Exact)?.is_full();
            Ok(CheckOutcome::new(
                kind,
                free == *expect,
                format!("quotient on {w} torsion-free for φ̄ = {phibar}: {free} (expected {expect})"),
                json!({"kernel": s.to_text(), "window": w.to_string(), "phibar": phibar, "torsion_free": free, "kernel_is_everything": full}),
            ))
        }
        CheckBody::Invariance {
            rule,
            kernel,
            extents,
            origin,
            expect_invariant,
            expect_surjective,
        } => {
            let rule = LocalRule::parse(rule)?;
            let s = KernelShiftSpec::parse(kernel)?;
            let w = window(s.dims(), origin, extents)?;
            let r = invariance_and_surjectivity_check(&rule, &s, &w, &mut draw_rng(ctx.seed, 0))?;
            Ok(CheckOutcome::new(
                kind,
                r.invariant == *expect_invariant && r.surjective == *expect_surjective,
                format!("invariant {}, surjective {} on {w}", r.invariant, r.surjective),
                json!({
                    "rule": rule.to_text("rule"),
                    "kernel": s.to_text(),
                    "window": w.to_string(),
                    "invariant": r.invariant,
                    "surjective": r.surjective,
                    "image_dims": r.image_dims,
                    "kernel_dims": r.kernel_dims,
                }),
            ))
        }
        CheckBody::HaarSweep {
            measure,
            char_extents,
            char_origin,
            budget,
            expect,
        } => {
            let mu = build_measure(ctx, measure)?;
            let b = window(mu.window().dims(), char_origin, char_extents)?;
            let rows = fourier_sweep(&mu, &b, 0, ctx.budget(*budget), ctx.limit)?;
            let (passed, verdict) = match expect.as_str() {
                "subgroup" => {
                    let v = haar_criterion(&rows, false)?;
                    (v.consistent, to_value(&v))
                }
                "coset" => {
                    let v = haar_criterion(&rows, true)?;
                    (v.consistent, to_value(&v))
                }
                _ => {
                    let bad: Vec<&str> = rows
                        .iter()
                        .filter(|r| {
                            let e = r.estimate();
                            let target = if r.chi == "trivial" { 1.0 } else { 0.0 };
                            (e.value() - target).norm() >= e.tolerance()
                        })
                        .map(|r| r.chi.as_str())
                        .collect();
                    (bad.is_empty(), json!({"violations": bad}))
                }
            };
            let non_unit_phases = rows
                .iter()
                .filter(|r| (r.modulus - 1.0).abs() < 1e-9 && (r.re - 1.0).abs() >= 1e-9)
                .count();
            Ok(CheckOutcome::new(
                kind,
                passed,
                format!("{} characters on {b} against `{expect}`", rows.len()),
                json!({
                    "measure": mu.label(),
                    "provenance": mu.provenance(),
                    "window": mu.window().to_string(),
                    "char_window": b.to_string(),
                    "verdict": verdict,
                    "non_unit_phases": non_unit_phases,
                }),
            )
            .with_table(Table::from_rows("fourier", &rows)))
        }
        CheckBody::Mixing {
            measure,
            offsets,
            value,
            n_schedule,
            budget,
        } => {
            let mu = build_measure(ctx, measure)?;
            let offsets: Vec<Coord> = offsets.iter().map(|o| Coord::from_slice(o)).collect();
            let value = value.clone().unwrap_or_else(|| vec![0; mu.module().rank()]);
            let family = single_site_family(&offsets, &value);
            let ns = n_schedule.clone().unwrap_or_else(default_n_schedule);
            let budget = ctx.budget(*budget);
            let results = ns
                .iter()
                .map(|&n| mixing_statistic(&mu, &family, n, budget))
                .collect::<Result<Vec<_>>>()?;
            let tol = |r: &crate::measure::MixingResult| {
                if r.exact {
                    EXACT_TOL
                } else {
                    SAMPLED_SIGMAS * r.stderr + EXACT_TOL
                }
            };
            let nonincreasing = results
                .windows(2)
                .all(|w| w[1].deviation.abs() <= w[0].deviation.abs() + tol(&w[1]));
            let vanishes = results.last().is_some_and(|r| r.deviation.abs() < tol(r));
            Ok(CheckOutcome::new(
                kind,
                nonincreasing && vanishes,
                format!("mixing deviations along n = {ns:?}: nonincreasing {nonincreasing}, final within tolerance {vanishes}"),
                json!({"measure": mu.label(), "window": mu.window().to_string(), "offsets": offsets.iter().map(|o| o.to_vec()).collect::<Vec<_>>(), "value": value}),
            )
            .with_table(Table::from_rows("mixing", &results)))
        }
        CheckBody::Entropy {
            measure,
            block_extents,
            budget,
            expect_bits,
            tolerance,
        } => {
            let mu = build_measure(ctx, measure)?;
            let block = WindowSpec::new(mu.window().dims(), mu.window().origin(), block_extents)?;
            let e = block_entropy(&mu, &block, ctx.budget(*budget))?;
            Ok(CheckOutcome::new(
                kind,
                (e.bits_per_site - expect_bits).abs() <= *tolerance,
                format!("{:.4} bits/site on {block} (expected {expect_bits} ± {tolerance})", e.bits_per_site),
                json!({"measure": mu.label(), "block": block.to_string(), "estimate": e}),
            ))
        }
        CheckBody::Rigidity {
            rule,
            measure,
            char_extents,
            char_origin,
            t_schedule,
            n_schedule,
            budget,
            expect,
        } => {
            let rule = LocalRule::parse(rule)?;
            let mu = build_measure(ctx, measure)?;
            let b = window(mu.window().dims(), char_origin, char_extents)?;
            let budget = ctx.budget(*budget);
            let opts = RigidityOptions {
                char_window: b,
                t_schedule: t_schedule
                    .clone()
                    .unwrap_or_else(|| default_t_schedule(rule.ring().prime_characteristic())),
                n_schedule: n_schedule.clone().unwrap_or_else(default_n_schedule),
                fourier_budget: budget,
                mixing_budget: budget,
                char_limit: ctx.limit,
            };
            let report = rigidity_experiment(&rule, &mu, &opts)?;
            let passed = match expect.as_str() {
                "consistent" => report.classification == Classification::ConsistentWithCosetHaar,
                "inconsistent" => report.classification == Classification::Inconsistent,
                "inconclusive" => report.classification == Classification::Inconclusive,
                _ => report.classification != Classification::ConsistentWithCosetHaar,
            };
            let mut details = to_value(&report);
            let fourier = details.as_object_mut().and_then(|o| o.remove("fourier"));
            let mixing = details.as_object_mut().and_then(|o| o.remove("mixing"));
            let mut out = CheckOutcome::new(
                kind,
                passed,
                format!("classified {} (expected {expect})", to_value(&report.classification).as_str().unwrap_or("?")),
                details,
            );
            if let Some(Value::Array(rows)) = fourier {
                out = out.with_table(Table::from_values("fourier", &["chi", "t", "re", "im", "modulus", "stderr", "exact"], rows));
            }
            if let Some(Value::Array(rows)) = mixing {
                out = out.with_table(Table::from_values(
                    "mixing",
                    &["n", "observed", "product", "deviation", "stderr", "exact", "consistent"],
                    rows,
                ));
            }
            Ok(out)
        }
        CheckBody::Crt { rule, extents, trials } => {
            let rule = LocalRule::parse(rule)?;
            let d = CrtDecomposition::new(rule.ring())?;
            let r = conjugacy_check(&rule, &d, extents, *trials, ctx.seed, None)?;
            let components: Vec<Value> = d
                .components()
                .iter()
                .map(|c| json!({"prime": c.prime, "exponent": c.exponent, "ring": c.ring.to_string(), "supported": c.supported()}))
                .collect();
            Ok(CheckOutcome::new(
                kind,
                r.holds,
                format!("splitting commutes with Φ over {} trials: {}", r.trials, r.holds),
                json!({
                    "rule": rule.to_text("rule"),
                    "components": components,
                    "component_rules": d.component_polys(&rule).iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "report": to_value(&r),
                }),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_load() {
        for (name, text) in BUNDLED {
            let cfg = load(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.experiment.name, *name);
        }
    }

    #[test]
    fn bad_ring_is_a_diagnostic() {
        let text = "[experiment]\nname = \"x\"\nseed = 1\n[[check]]\nname = \"a\"\nkind = \"f-phi\"\nrule = \"rule ring=zmod:0 rank=1 H=(0):1\"\nexpect = []\n";
        let err = load(text).unwrap_err().to_string();
        assert!(err.contains("check `a`"), "{err}");
    }
}
