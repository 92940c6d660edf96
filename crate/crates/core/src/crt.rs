//! Chinese-remainder splitting of a ring by the prime factors of its
//! characteristic, applied sitewise to configurations, rules and measures.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Coord, Mode, WindowConfig, WindowSpec};
use crate::measure::MeasureHandle;
use crate::poly::{LocalRule, ShiftPolynomial};
use crate::ring::{factorize, Elem, ModuleSpec, Ring, RingKind};
use crate::rng::draw_rng;

/// Rings up to this size have their maps checked exhaustively on construction.
pub const EXHAUSTIVE_CHECK: u32 = 4096;

#[derive(Clone, Debug)]
pub struct Component {
    pub prime: u64,
    pub exponent: u32,
    pub ring: Ring,
    /// `q_j = m / p_j^{s_j}`.
    pub cofactor: u64,
    /// `r ↦ r^j`, indexed by source element.
    forward: Vec<Elem>,
    /// The source element of `e_j R` carrying each component element.
    embed: Vec<Elem>,
}

impl Component {
    /// Rigidity results need prime characteristic.
    pub fn supported(&self) -> bool {
        self.exponent == 1
    }
}

#[derive(Clone, Debug)]
pub struct CrtDecomposition {
    source: Ring,
    components: Vec<Component>,
}

/// The part of `ring` living over the prime `p`, with the projection and the
/// embedding back into `ring`.
fn component_of(ring: &Ring, p: u64) -> Result<Option<(Ring, Vec<Elem>, Vec<Elem>)>> {
    match ring.kind() {
        RingKind::Zmod(m) => {
            let m = m as u64;
            if !m.is_multiple_of(p) {
                return Ok(None);
            }
            let mut pe = 1;
            while m.is_multiple_of(pe * p) {
                pe *= p;
            }
            let q = m / pe;
            // Bezout: z·q ≡ 1 (mod p^s), so e = z·q is the idempotent for p.
            let z = (1..=pe).find(|z| (z * q) % pe == 1 % pe).expect("q invertible mod p^s");
            let e = (z * q) % m;
            let comp = Ring::zmod(pe as u32)?;
            let forward = ring.elements().map(|r| (r as u64 % pe) as Elem).collect();
            let embed = (0..pe).map(|x| ((x * e) % m) as Elem).collect();
            Ok(Some((comp, forward, embed)))
        }
        RingKind::Gf { p: q, .. } => {
            if q as u64 != p {
                return Ok(None);
            }
            let id: Vec<Elem> = ring.elements().collect();
            Ok(Some((ring.clone(), id.clone(), id)))
        }
        RingKind::Product(factors) => {
            let mut kept = Vec::new();
            for (i, f) in factors.iter().enumerate() {
                if let Some(c) = component_of(f, p)? {
                    kept.push((i, c));
                }
            }
            if kept.is_empty() {
                return Ok(None);
            }
            let comp = if kept.len() == 1 {
                kept[0].1 .0.clone()
            } else {
                Ring::product(&kept.iter().map(|(_, c)| c.0.clone()).collect::<Vec<_>>())?
            };
            let forward = ring
                .elements()
                .map(|r| {
                    let parts = ring.split_product(r);
                    let sub: Vec<Elem> = kept.iter().map(|(i, c)| c.1[parts[*i] as usize]).collect();
                    comp.join_product(&sub)
                })
                .collect();
            let embed = comp
                .elements()
                .map(|x| {
                    let sub = comp.split_product(x);
                    let mut parts = vec![0; factors.len()];
                    for ((i, c), &s) in kept.iter().zip(&sub) {
                        parts[*i] = c.2[s as usize];
                    }
                    ring.join_product(&parts)
                })
                .collect();
            Ok(Some((comp, forward, embed)))
        }
    }
}

impl CrtDecomposition {
    pub fn new(ring: &Ring) -> Result<Self> {
        let m = ring.characteristic();
        if m < 2 {
            return Err(Error::InvalidParameter("characteristic 1 has no decomposition".into()));
        }
        let mut components = Vec::new();
        for (p, s) in factorize(m) {
            let (comp, forward, embed) = component_of(ring, p)?.expect("prime divides the characteristic");
            components.push(Component {
                prime: p,
                exponent: s,
                ring: comp,
                cofactor: m / p.pow(s),
                forward,
                embed,
            });
        }
        let d = CrtDecomposition {
            source: ring.clone(),
            components,
        };
        if ring.size() <= EXHAUSTIVE_CHECK {
            d.verify()?;
        }
        Ok(d)
    }

    pub fn parse(ring: &str) -> Result<Self> {
        CrtDecomposition::new(&Ring::parse(ring)?)
    }

    fn verify(&self) -> Result<()> {
        let r = &self.source;
        let mut seen = BTreeSet::new();
        for x in r.elements() {
            let parts = self.forward(x);
            if self.inverse(&parts) != x || !seen.insert(parts.clone()) {
                return Err(Error::InvalidParameter(format!("component maps of {r} are not inverse at {x}")));
            }
        }
        let count: u128 = self.components.iter().map(|c| c.ring.size() as u128).product();
        if count != r.size() as u128 {
            return Err(Error::InvalidParameter(format!("component sizes of {r} do not multiply out")));
        }
        Ok(())
    }

    pub fn source(&self) -> &Ring {
        &self.source
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// A single component: the characteristic is a prime power.
    pub fn is_degenerate(&self) -> bool {
        self.components.len() == 1
    }

    pub fn is_squarefree(&self) -> bool {
        self.components.iter().all(Component::supported)
    }

    pub fn component(&self, j: usize) -> Result<&Component> {
        self.components.get(j).ok_or(Error::ComponentOutOfRange {
            index: j,
            count: self.components.len(),
        })
    }

    pub fn forward(&self, x: Elem) -> Vec<Elem> {
        self.components.iter().map(|c| c.forward[x as usize]).collect()
    }

    pub fn project(&self, x: Elem, j: usize) -> Elem {
        self.components[j].forward[x as usize]
    }

    pub fn inverse(&self, parts: &[Elem]) -> Elem {
        let r = &self.source;
        self.components
            .iter()
            .zip(parts)
            .fold(r.zero(), |acc, (c, &x)| r.add(acc, c.embed[x as usize]))
    }

    /// `I_j = {r : q_j r = 0}`.
    pub fn ideal(&self, j: usize) -> Result<Vec<Elem>> {
        let q = self.component(j)?.cofactor as i64;
        Ok(self.source.elements().filter(|&r| self.source.int_mul(q, r) == 0).collect())
    }

    /// `φ_h ↦ φ_h^j` for every coefficient; terms vanishing in the component
    /// are dropped.
    pub fn component_polys(&self, phi: &LocalRule) -> Vec<ShiftPolynomial> {
        (0..self.len())
            .map(|j| {
                ShiftPolynomial::from_terms(
                    self.components[j].ring.clone(),
                    phi.dims(),
                    phi.terms().iter().map(|(h, c)| (h.clone(), self.project(*c, j))),
                )
            })
            .collect()
    }

    fn component_module(&self, module: &ModuleSpec, j: usize) -> Result<ModuleSpec> {
        ModuleSpec::new(self.components[j].ring.clone(), module.rank())
    }
}

/// Sitewise application of the forward map.
pub fn split_config(c: &WindowConfig, d: &CrtDecomposition) -> Result<Vec<WindowConfig>> {
    if c.ring() != d.source() {
        return Err(Error::RingMismatch {
            left: c.ring().to_string(),
            right: d.source().to_string(),
        });
    }
    (0..d.len())
        .map(|j| {
            let module = d.component_module(c.module(), j)?;
            let values = c.values().iter().map(|&x| d.project(x, j)).collect();
            Ok(WindowConfig::from_raw(c.window().clone(), module, c.mode(), values))
        })
        .collect()
}

/// Inverse of [`split_config`].
pub fn merge_config(parts: &[WindowConfig], d: &CrtDecomposition) -> Result<WindowConfig> {
    if parts.len() != d.len() {
        return Err(Error::ComponentOutOfRange {
            index: parts.len(),
            count: d.len(),
        });
    }
    let first = &parts[0];
    for (j, part) in parts.iter().enumerate() {
        if part.ring() != &d.components[j].ring {
            return Err(Error::RingMismatch {
                left: part.ring().to_string(),
                right: d.components[j].ring.to_string(),
            });
        }
        if part.window() != first.window() || part.rank() != first.rank() || part.mode() != first.mode() {
            return Err(Error::WindowMismatch(format!("component {j} has a different window, rank or mode")));
        }
    }
    let module = ModuleSpec::new(d.source().clone(), first.rank())?;
    let values = (0..first.values().len())
        .map(|i| {
            let comps: Vec<Elem> = parts.iter().map(|p| p.values()[i]).collect();
            d.inverse(&comps)
        })
        .collect();
    Ok(WindowConfig::from_raw(first.window().clone(), module, first.mode(), values))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub trial: u64,
    pub component: usize,
    pub site: Coord,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConjugacyReport {
    pub holds: bool,
    pub trials: u64,
    pub counterexample: Option<Counterexample>,
}

/// Checks `split(Φ c) = (Φ_j split(c)_j)_j` on random tori. `components`
/// overrides the component rules (for falsification controls).
pub fn conjugacy_check(
    phi: &LocalRule,
    d: &CrtDecomposition,
    extents: &[usize],
    trials: u64,
    seed: u64,
    components: Option<&[ShiftPolynomial]>,
) -> Result<ConjugacyReport> {
    let polys = match components {
        Some(p) => {
            if p.len() != d.len() {
                return Err(Error::ComponentOutOfRange {
                    index: p.len(),
                    count: d.len(),
                });
            }
            p.to_vec()
        }
        None => d.component_polys(phi),
    };
    let window = WindowSpec::at_zero(phi.dims(), extents)?;
    let poly = phi.to_poly();
    for trial in 0..trials {
        let c = WindowConfig::random(window.clone(), phi.module().clone(), Mode::Torus, &mut draw_rng(seed, trial));
        let lhs = split_config(&poly.apply(&c)?, d)?;
        let parts = split_config(&c, d)?;
        for (j, ((l, part), pj)) in lhs.iter().zip(&parts).zip(&polys).enumerate() {
            let rhs = pj.apply(part)?;
            if let Some(i) = (0..window.volume()).find(|&i| l.site(i) != rhs.site(i)) {
                return Ok(ConjugacyReport {
                    holds: false,
                    trials: trial + 1,
                    counterexample: Some(Counterexample {
                        trial,
                        component: j,
                        site: window.coord_of(i),
                    }),
                });
            }
        }
    }
    Ok(ConjugacyReport {
        holds: true,
        trials,
        counterexample: None,
    })
}

/// The `j`-th marginal of a measure on the split space.
pub fn project_measure(mu: &MeasureHandle, d: &CrtDecomposition, j: usize) -> Result<MeasureHandle> {
    let comp = d.component(j)?;
    if mu.ring() != d.source() {
        return Err(Error::RingMismatch {
            left: mu.ring().to_string(),
            right: d.source().to_string(),
        });
    }
    let module = d.component_module(mu.module(), j)?;
    mu.map_sites(&module, comp.forward.clone(), &format!("CRT component {j} ({})", comp.ring))
}
