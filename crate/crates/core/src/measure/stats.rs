//! Fourier coefficients, the Haar criterion, mixing statistics and block
//! entropy, computed exactly or from seeded draws.
//!
//! Sampled estimates split the draw indices into fixed chunks and merge
//! integer tallies in chunk order, so results do not depend on the number of
//! worker threads.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::character::{phase_to_complex, CharacterSpec, Psi};
use super::handle::{prob_to_f64, Law, MeasureHandle, Pin, ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::lattice::{Coord, WindowSpec};
use crate::linalg::Subspace;
use crate::ring::Elem;

/// Draws per parallel chunk.
pub const CHUNK: u64 = 4096;

/// Tolerance for verdicts on exactly computed values.
pub const EXACT_TOL: f64 = 1e-9;

/// Number of standard errors allowed for sampled verdicts.
pub const SAMPLED_SIGMAS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "samples")]
pub enum Budget {
    Exact,
    Samples(u64),
}

impl Budget {
    pub fn is_exact(&self) -> bool {
        matches!(self, Budget::Exact)
    }
}

/// A complex estimate with its standard error (zero for exact values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    pub exact: bool,
}

impl Estimate {
    pub fn exact(z: Complex64) -> Self {
        Estimate {
            re: z.re,
            im: z.im,
            stderr: 0.0,
            exact: true,
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn modulus(&self) -> f64 {
        self.value().norm()
    }

    /// Allowed distance from a target value.
    pub fn tolerance(&self) -> f64 {
        if self.exact {
            EXACT_TOL
        } else {
            SAMPLED_SIGMAS * self.stderr + EXACT_TOL
        }
    }
}

fn chunks(n: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    let count = n.div_ceil(CHUNK);
    (0..count).into_par_iter().map(move |c| (c * CHUNK, ((c + 1) * CHUNK).min(n)))
}

fn sample_count(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidParameter("sampled estimates need at least 2 draws".into()));
    }
    Ok(n)
}

/// `μ̂[χ]`, exactly or as the mean of `χ` over draws.
pub fn fourier(mu: &MeasureHandle, chi: &CharacterSpec, budget: Budget) -> Result<Estimate> {
    match budget {
        Budget::Exact => Ok(Estimate::exact(mu.fourier_exact(chi)?)),
        Budget::Samples(n) => {
            let n = sample_count(n)?;
            let ring = mu.ring().clone();
            let psi = Psi::new(&ring);
            let m = psi.modulus() as usize;
            let rank = mu.module().rank();
            let idx = chi.indices_in(mu.window(), mu.mode() == crate::lattice::Mode::Torus)?;
            let cols: Vec<usize> = idx.iter().flat_map(|&i| (0..rank).map(move |c| i * rank + c)).collect();
            let duals: Vec<Elem> = chi.duals().iter().flat_map(|(_, d)| d.iter().copied()).collect();
            // Tally of phases k in Z/m over all draws.
            let tallies: Vec<Vec<u64>> = chunks(n)
                .map(|(a, b)| {
                    let mut t = vec![0u64; m];
                    for i in a..b {
                        let vals = mu.sample_at(i, &cols);
                        let k: u64 = duals.iter().zip(&vals).map(|(&u, &x)| psi.phase(ring.mul(u, x)) as u64).sum();
                        t[(k % m as u64) as usize] += 1;
                    }
                    t
                })
                .collect();
            let mut tally = vec![0u64; m];
            for t in tallies {
                for (acc, x) in tally.iter_mut().zip(t) {
                    *acc += x;
                }
            }
            let mean: Complex64 = tally
                .iter()
                .enumerate()
                .map(|(k, &c)| phase_to_complex(k as u64, m as u64) * c as f64)
                .sum::<Complex64>()
                / n as f64;
            let nf = n as f64;
            let var = (nf / (nf - 1.0)) * (1.0 - mean.norm_sqr()).max(0.0);
            Ok(Estimate {
                re: mean.re,
                im: mean.im,
                stderr: (var / nf).sqrt(),
                exact: false,
            })
        }
    }
}

/// One evaluated coefficient as it appears in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierRow {
    pub chi: String,
    pub t: u64,
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub stderr: f64,
    pub exact: bool,
}

impl FourierRow {
    pub fn new(chi: &CharacterSpec, t: u64, e: &Estimate) -> Self {
        FourierRow {
            chi: chi.label(),
            t,
            re: e.re,
            im: e.im,
            modulus: e.modulus(),
            stderr: e.stderr,
            exact: e.exact,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            re: self.re,
            im: self.im,
            stderr: self.stderr,
            exact: self.exact,
        }
    }
}

/// Every coefficient of `μ` on characters based on `window`.
pub fn fourier_sweep(mu: &MeasureHandle, window: &WindowSpec, t: u64, budget: Budget, limit: u128) -> Result<Vec<FourierRow>> {
    let chars = CharacterSpec::all(window, mu.module(), limit)?;
    chars
        .par_iter()
        .map(|chi| Ok(FourierRow::new(chi, t, &fourier(mu, chi, budget)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub chi: String,
    pub t: u64,
    pub re: f64,
    pub im: f64,
    pub exact: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarVerdict {
    pub consistent: bool,
    /// Whether only moduli were tested (coset Haar).
    pub moduli: bool,
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl HaarVerdict {
    pub fn has_exact_violation(&self) -> bool {
        self.violations.iter().any(|v| v.exact)
    }
}

/// Tests that every coefficient is 0 or 1 (or, with `moduli`, that every
/// modulus is 0 or 1, as for Haar measures of cosets).
pub fn haar_criterion(rows: &[FourierRow], moduli: bool) -> Result<HaarVerdict> {
    if !rows.iter().any(|r| r.chi == "trivial") {
        return Err(Error::MissingTrivialCharacter);
    }
    let mut violations = Vec::new();
    for r in rows {
        let e = r.estimate();
        let tol = e.tolerance();
        let z = e.value();
        let ok = if moduli {
            let m = z.norm();
            m < tol || (m - 1.0).abs() < tol
        } else {
            z.norm() < tol || (z - 1.0).norm() < tol
        };
        let trivial_ok = r.chi != "trivial" || (z - 1.0).norm() < tol;
        if !ok || !trivial_ok {
            violations.push(Violation {
                chi: r.chi.clone(),
                t: r.t,
                re: r.re,
                im: r.im,
                exact: r.exact,
                reason: if moduli {
                    format!("modulus {:.6} is neither 0 nor 1", z.norm())
                } else {
                    format!("value {:.6}{:+.6}i is neither 0 nor 1", z.re, z.im)
                },
            });
        }
    }
    Ok(HaarVerdict {
        consistent: violations.is_empty(),
        moduli,
        checked: rows.len(),
        violations,
    })
}

/// A cylinder: pinned values at sites, relative to an offset.
#[derive(Clone, Debug)]
pub struct CylinderFamily {
    pub offset: Coord,
    pub pins: Vec<Pin>,
}

fn translate_pins(pins: &[Pin], v: &[i64]) -> Vec<Pin> {
    pins.iter()
        .map(|(s, x)| (s.iter().zip(v).map(|(a, b)| a + b).collect(), x.clone()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingResult {
    pub n: i64,
    pub observed: f64,
    pub product: f64,
    pub deviation: f64,
    pub stderr: f64,
    pub exact: bool,
}

/// `μ[⋂_h σ^{-nh} B_h]` against `Π_h μ[σ^{-nh} B_h]`.
pub fn mixing_statistic(mu: &MeasureHandle, family: &[CylinderFamily], n: i64, budget: Budget) -> Result<MixingResult> {
    let shifted: Vec<Vec<Pin>> = family
        .iter()
        .map(|f| {
            let v: Vec<i64> = f.offset.iter().map(|x| n * x).collect();
            translate_pins(&f.pins, &v)
        })
        .collect();
    let all: Vec<Pin> = shifted.iter().flatten().cloned().collect();
    match budget {
        Budget::Exact => {
            let observed = mu.cylinder_exact(&all)?;
            let mut product = 1.0;
            for pins in &shifted {
                product *= mu.cylinder_exact(pins)?;
            }
            Ok(MixingResult {
                n,
                observed,
                product,
                deviation: observed - product,
                stderr: 0.0,
                exact: true,
            })
        }
        Budget::Samples(count) => {
            let count = sample_count(count)?;
            let groups: Vec<(Vec<usize>, Vec<Elem>)> = shifted
                .iter()
                .map(|pins| {
                    let sites: Vec<Coord> = pins.iter().map(|(s, _)| s.clone()).collect();
                    let cols = mu.columns(&sites)?;
                    let want: Vec<Elem> = pins.iter().flat_map(|(_, x)| x.iter().copied()).collect();
                    Ok((cols, want))
                })
                .collect::<Result<_>>()?;
            let cols: Vec<usize> = groups.iter().flat_map(|(c, _)| c.iter().copied()).collect();
            let k = groups.len();
            // Tally of the indicator pattern of the k events, as a bitmask.
            let tallies: Vec<BTreeMap<u64, u64>> = chunks(count)
                .map(|(a, b)| {
                    let mut t = BTreeMap::new();
                    for i in a..b {
                        let vals = mu.sample_at(i, &cols);
                        let mut mask = 0u64;
                        let mut pos = 0;
                        for (g, (c, want)) in groups.iter().enumerate() {
                            if vals[pos..pos + c.len()] == want[..] {
                                mask |= 1 << g;
                            }
                            pos += c.len();
                        }
                        *t.entry(mask).or_insert(0) += 1;
                    }
                    t
                })
                .collect();
            let mut tally: BTreeMap<u64, u64> = BTreeMap::new();
            for t in tallies {
                for (m, c) in t {
                    *tally.entry(m).or_insert(0) += c;
                }
            }
            let nf = count as f64;
            let full = (1u64 << k) - 1;
            let joint = *tally.get(&full).unwrap_or(&0) as f64 / nf;
            let marg: Vec<f64> = (0..k)
                .map(|g| tally.iter().filter(|(m, _)| *m & (1 << g) != 0).map(|(_, c)| *c).sum::<u64>() as f64 / nf)
                .collect();
            let product: f64 = marg.iter().product();
            // Delta method: deviation = E[J] - Π E[I_g]; gradient (1, -Π_{h≠g} p_h).
            let grads: Vec<f64> = (0..k)
                .map(|g| -(0..k).filter(|&h| h != g).map(|h| marg[h]).product::<f64>())
                .collect();
            let mut var = 0.0;
            for (&mask, &c) in &tally {
                let f = if mask == full { 1.0 } else { 0.0 }
                    + (0..k).map(|g| if mask & (1 << g) != 0 { grads[g] } else { 0.0 }).sum::<f64>();
                let mean = joint + (0..k).map(|g| grads[g] * marg[g]).sum::<f64>();
                var += c as f64 * (f - mean).powi(2);
            }
            var /= nf - 1.0;
            Ok(MixingResult {
                n,
                observed: joint,
                product,
                deviation: joint - product,
                stderr: (var / nf).sqrt(),
                exact: false,
            })
        }
    }
}

/// Single-site cylinders `{x_h = a}` at each offset `h`, the basic probe of
/// H-mixing.
pub fn single_site_family(offsets: &[Coord], value: &[Elem]) -> Vec<CylinderFamily> {
    offsets
        .iter()
        .map(|h| CylinderFamily {
            offset: h.clone(),
            pins: vec![(Coord::from_elem(0, h.len()), value.into())],
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub bits_per_site: f64,
    pub sites: usize,
    pub exact: bool,
    pub samples: u64,
    pub note: String,
}

fn shannon_bits<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum::<f64>() + 0.0
}

/// Plug-in block entropy per site of `μ` on `block`. Only a diagnostic: it
/// bounds the entropy rate from above, it does not compute it.
pub fn block_entropy(mu: &MeasureHandle, block: &WindowSpec, budget: Budget) -> Result<EntropyEstimate> {
    let sites: Vec<Coord> = block.coords().collect();
    let cols = mu.columns(&sites)?;
    let v = sites.len();
    let note = "plug-in block entropy; an upper-bound style diagnostic, not the entropy rate".to_string();
    let done = |bits: f64, exact: bool, samples: u64| EntropyEstimate {
        bits_per_site: bits / v as f64,
        sites: v,
        exact,
        samples,
        note: note.clone(),
    };
    match budget {
        Budget::Exact => match mu.law() {
            Law::Haar(h) => {
                let mut bits = 0.0;
                for s in h.spans() {
                    let rows = s.rows().iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
                    let rank = Subspace::span(s.field(), cols.len(), rows).dim();
                    bits += rank as f64 * (s.field().size() as f64).log2();
                }
                Ok(done(bits, true, 0))
            }
            Law::Bernoulli(site) => {
                let h = shannon_bits(site.probs().iter().map(prob_to_f64));
                Ok(done(h * v as f64, true, 0))
            }
            _ => {
                let dist = mu.exact_distribution(ENUMERATION_LIMIT)?;
                let mut marg: BTreeMap<Vec<Elem>, super::handle::Prob> = BTreeMap::new();
                for (w, p) in dist {
                    let key = cols.iter().map(|&c| w[c]).collect();
                    *marg.entry(key).or_default() += p;
                }
                Ok(done(shannon_bits(marg.values().map(prob_to_f64)), true, 0))
            }
        },
        Budget::Samples(n) => {
            let n = sample_count(n)?;
            let tallies: Vec<BTreeMap<Vec<Elem>, u64>> = chunks(n)
                .map(|(a, b)| {
                    let mut t = BTreeMap::new();
                    for i in a..b {
                        *t.entry(mu.sample_at(i, &cols)).or_insert(0) += 1;
                    }
                    t
                })
                .collect();
            let mut tally: BTreeMap<Vec<Elem>, u64> = BTreeMap::new();
            for t in tallies {
                for (w, c) in t {
                    *tally.entry(w).or_insert(0) += c;
                }
            }
            let bits = shannon_bits(tally.values().map(|&c| c as f64 / n as f64));
            Ok(done(bits, false, n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Mode;
    use crate::ring::{ModuleSpec, Ring};

    fn z(m: u32) -> ModuleSpec {
        ModuleSpec::scalar(Ring::zmod(m).unwrap())
    }

    #[test]
    fn uniform_sweep_is_delta_at_trivial() {
        let w = WindowSpec::at_zero((1, 1), &[2, 2]).unwrap();
        let mu = MeasureHandle::uniform(&z(3), &w, Mode::Exact, 0);
        let rows = fourier_sweep(&mu, &w, 0, Budget::Exact, 1 << 10).unwrap();
        assert_eq!(rows.len(), 81);
        assert_eq!(rows[0].chi, "trivial");
        assert_eq!(rows[0].re, 1.0);
        assert!(rows[1..].iter().all(|r| r.modulus == 0.0));
        assert!(haar_criterion(&rows, false).unwrap().consistent);
    }

    #[test]
    fn haar_criterion_needs_trivial() {
        assert!(matches!(haar_criterion(&[], false), Err(Error::MissingTrivialCharacter)));
    }

    #[test]
    fn sampled_fourier_is_worker_independent() {
        let w = WindowSpec::at_zero((1, 0), &[3]).unwrap();
        let mu = MeasureHandle::uniform(&z(5), &w, Mode::Exact, 11);
        let chi = CharacterSpec::single(w.clone(), &z(5), &[1], &[2]).unwrap();
        let a = fourier(&mu, &chi, Budget::Samples(10_000)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| fourier(&mu, &chi, Budget::Samples(10_000))).unwrap();
        assert_eq!(a, b);
        assert!(a.modulus() < 4.0 * a.stderr + 1e-12 || a.modulus() < 0.05);
    }

    #[test]
    fn product_measure_mixing_is_exact_zero() {
        let w = WindowSpec::at_zero((1, 0), &[8]).unwrap();
        let probs = vec![super::super::handle::Prob::new(1, 3), super::super::handle::Prob::new(2, 3)];
        let mu = MeasureHandle::bernoulli(&z(2), &w, Mode::Exact, probs, 0).unwrap();
        let fam = single_site_family(&[Coord::from_slice(&[0]), Coord::from_slice(&[1])], &[1]);
        let r = mixing_statistic(&mu, &fam, 3, Budget::Exact).unwrap();
        assert!((r.observed - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(r.deviation, 0.0);
        let s = mixing_statistic(&mu, &fam, 3, Budget::Samples(20_000)).unwrap();
        assert!(s.deviation.abs() < 4.0 * s.stderr + 1e-3);
    }

    #[test]
    fn entropy_of_point_mass_and_uniform() {
        let w = WindowSpec::at_zero((1, 0), &[4]).unwrap();
        let block = WindowSpec::at_zero((1, 0), &[2]).unwrap();
        let c = crate::lattice::WindowConfig::zeros(w.clone(), z(6), Mode::Exact);
        let pm = MeasureHandle::point_mass(&c, 0);
        assert_eq!(block_entropy(&pm, &block, Budget::Samples(1000)).unwrap().bits_per_site, 0.0);
        assert_eq!(block_entropy(&pm, &block, Budget::Exact).unwrap().bits_per_site, 0.0);
        let u = MeasureHandle::uniform(&z(6), &w, Mode::Exact, 0);
        let e = block_entropy(&u, &block, Budget::Exact).unwrap();
        assert!((e.bits_per_site - 6f64.log2()).abs() < 1e-12);
    }
}
