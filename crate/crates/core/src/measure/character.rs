//! Characters of `A^B` for `A = R^n`: a dual ring element per site and
//! module component.
//!
//! Every ring carries a fixed additive character `ψ : R → Q/Z` with values
//! in `(1/c) Z / Z`, `c` the characteristic: `x/m` on `zmod(m)`, `Tr(x)/p` on
//! `gf(p,k)`, and the sum of the factor characters on products. The dual
//! index `u` names the character `a ↦ ψ(u·a)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{Coord, WindowConfig, WindowSpec};
use crate::ring::{Elem, ModuleSpec, Ring, RingKind};

/// The additive character `ψ` of a ring as integer phases modulo the
/// characteristic.
#[derive(Clone, Debug)]
pub struct Psi {
    modulus: u64,
    table: Vec<u32>,
}

impl Psi {
    pub fn new(ring: &Ring) -> Self {
        let modulus = ring.characteristic();
        let table = match ring.kind() {
            RingKind::Zmod(_) => ring.elements().collect(),
            RingKind::Gf { .. } => ring.elements().map(|x| ring.trace(x).expect("field trace")).collect(),
            RingKind::Product(factors) => {
                let parts: Vec<Psi> = factors.iter().map(Psi::new).collect();
                ring.elements()
                    .map(|x| {
                        let codes = ring.split_product(x);
                        let total: u64 = codes
                            .iter()
                            .zip(&parts)
                            .map(|(&c, psi)| psi.table[c as usize] as u64 * (modulus / psi.modulus))
                            .sum();
                        (total % modulus) as u32
                    })
                    .collect()
            }
        };
        Psi { modulus, table }
    }

    /// Denominator of the phases.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    #[inline]
    pub fn phase(&self, x: Elem) -> u32 {
        self.table[x as usize]
    }
}

/// `exp(2πi k / modulus)`.
pub fn phase_to_complex(k: u64, modulus: u64) -> Complex64 {
    let k = k % modulus;
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * k == modulus {
        return Complex64::new(-1.0, 0.0);
    }
    Complex64::from_polar(1.0, TAU * k as f64 / modulus as f64)
}

/// A character of `A^M` based on a window `B`, given by its nontrivial
/// site duals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CharacterSpec {
    window: WindowSpec,
    rank: usize,
    duals: Vec<(Coord, SmallVec<[Elem; 4]>)>,
}

impl CharacterSpec {
    pub fn trivial(window: WindowSpec, rank: usize) -> Self {
        CharacterSpec {
            window,
            rank,
            duals: Vec::new(),
        }
    }

    pub fn new(window: WindowSpec, module: &ModuleSpec, duals: Vec<(Coord, SmallVec<[Elem; 4]>)>) -> Result<Self> {
        let rank = module.rank();
        let mut kept = Vec::new();
        for (site, dual) in duals {
            if !window.contains(&site) {
                return Err(Error::InvalidParameter(format!("character site {site:?} lies outside {window}")));
            }
            if dual.len() != rank || dual.iter().any(|&u| !module.ring().contains(u)) {
                return Err(Error::InvalidParameter(format!("bad dual {dual:?} at site {site:?}")));
            }
            if dual.iter().any(|&u| u != 0) {
                kept.push((site, dual));
            }
        }
        kept.sort();
        if kept.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("character lists a site twice".into()));
        }
        Ok(CharacterSpec {
            window,
            rank,
            duals: kept,
        })
    }

    /// A character with a single nontrivial site.
    pub fn single(window: WindowSpec, module: &ModuleSpec, site: &[i64], dual: &[Elem]) -> Result<Self> {
        CharacterSpec::new(window, module, vec![(Coord::from_slice(site), dual.into())])
    }

    /// Parses a label as produced by [`label`](Self::label).
    pub fn parse(window: WindowSpec, module: &ModuleSpec, text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "trivial" || text.is_empty() {
            return Ok(CharacterSpec::trivial(window, module.rank()));
        }
        let mut duals = Vec::new();
        for part in text.split(';') {
            let bad = || Error::InvalidParameter(format!("bad character term `{part}`"));
            let (site, dual) = part.trim().rsplit_once(':').ok_or_else(bad)?;
            let site = site.strip_prefix('(').and_then(|s| s.strip_suffix(')')).ok_or_else(bad)?;
            let site: Option<Coord> = site.split(',').map(|x| x.trim().parse().ok()).collect();
            let dual: Option<SmallVec<[Elem; 4]>> = dual.split(',').map(|x| x.trim().parse().ok()).collect();
            duals.push((site.ok_or_else(bad)?, dual.ok_or_else(bad)?));
        }
        CharacterSpec::new(window, module, duals)
    }

    /// Every character based on `window`, trivial first, refusing more than `limit`.
    pub fn all(window: &WindowSpec, module: &ModuleSpec, limit: u128) -> Result<Vec<CharacterSpec>> {
        let q = module.ring().size() as u128;
        let slots = (window.volume() * module.rank()) as u32;
        let count = q.checked_pow(slots).unwrap_or(u128::MAX);
        if count > limit {
            return Err(Error::ResourceLimit {
                what: format!("character sweep on {window}"),
                size: count,
                limit,
            });
        }
        let rank = module.rank();
        Ok((0..count)
            .map(|mut i| {
                let mut duals = Vec::new();
                for site in window.coords() {
                    let dual: SmallVec<[Elem; 4]> = (0..rank)
                        .map(|_| {
                            let d = (i % q) as Elem;
                            i /= q;
                            d
                        })
                        .collect();
                    if dual.iter().any(|&u| u != 0) {
                        duals.push((site, dual));
                    }
                }
                CharacterSpec {
                    window: window.clone(),
                    rank,
                    duals,
                }
            })
            .collect())
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn duals(&self) -> &[(Coord, SmallVec<[Elem; 4]>)] {
        &self.duals
    }

    pub fn is_trivial(&self) -> bool {
        self.duals.is_empty()
    }

    pub fn label(&self) -> String {
        if self.duals.is_empty() {
            return "trivial".into();
        }
        self.duals
            .iter()
            .map(|(site, dual)| {
                let s: Vec<String> = site.iter().map(|x| x.to_string()).collect();
                let d: Vec<String> = dual.iter().map(|x| x.to_string()).collect();
                format!("({}):{}", s.join(","), d.join(","))
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Storage indices of the character sites inside `w` (wrapping if asked).
    pub(crate) fn indices_in(&self, w: &WindowSpec, wrap: bool) -> Result<Vec<usize>> {
        if !wrap && !w.contains_window(&self.window) {
            return Err(Error::CharacterOutsideWindow {
                character: self.window.to_string(),
                window: w.to_string(),
            });
        }
        Ok(self
            .duals
            .iter()
            .map(|(site, _)| if wrap { w.wrapped_index(site) } else { w.index_of(site).expect("inside") })
            .collect())
    }

    /// Phase of `χ(word)` from flattened site-major values of window `w`.
    pub(crate) fn phase_of_values(&self, ring: &Ring, psi: &Psi, indices: &[usize], values: &[Elem]) -> u64 {
        let mut k = 0u64;
        for ((_, dual), &i) in self.duals.iter().zip(indices) {
            for (c, &u) in dual.iter().enumerate() {
                k += psi.phase(ring.mul(u, values[i * self.rank + c])) as u64;
            }
        }
        k % psi.modulus()
    }

    /// `χ(word)` as a phase `k` meaning `exp(2πi k / psi.modulus())`.
    pub fn phase(&self, psi: &Psi, word: &WindowConfig) -> Result<u64> {
        let idx = self.indices_in(word.window(), false)?;
        Ok(self.phase_of_values(word.ring(), psi, &idx, word.values()))
    }

    pub fn eval(&self, word: &WindowConfig) -> Result<Complex64> {
        let psi = Psi::new(word.ring());
        Ok(phase_to_complex(self.phase(&psi, word)?, psi.modulus()))
    }
}
