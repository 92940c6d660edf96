//! Measures on a window: exact laws with closed-form Fourier coefficients and
//! cylinder probabilities, plus reproducible sampling where draw `i` depends
//! only on `(seed, i)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::Rng;
use smallvec::SmallVec;

use super::character::{phase_to_complex, CharacterSpec, Psi};
use crate::error::{Error, Result};
use crate::lattice::{Coord, Mode, WindowConfig, WindowSpec};
use crate::linalg::{solve, FieldSplit, Subspace};
use crate::poly::{ApplyPlan, LocalRule, ShiftPolynomial};
use crate::rng::draw_rng;
use crate::ring::{Elem, ModuleSpec, Ring};
use crate::shifts::{coset_shift_check, window_kernel, KernelShiftSpec, WindowBasis};

/// Exact probability.
pub type Prob = Ratio<i128>;

/// Enumerations larger than this are refused unless forced.
pub const ENUMERATION_LIMIT: u128 = 1 << 20;

/// Characters summed over when inverting Fourier coefficients into a
/// cylinder probability.
pub const INVERSION_LIMIT: u128 = 1 << 16;

pub(crate) fn prob_to_f64(p: &Prob) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// `Σ_k groups[k] · exp(2πi k / n)`, exactly zero when all groups agree.
pub(crate) fn phase_sum(groups: &[Prob]) -> Complex64 {
    let n = groups.len() as u64;
    if n >= 2 && groups.iter().all(|g| *g == groups[0]) {
        return Complex64::new(0.0, 0.0);
    }
    if n <= 2 {
        let re = groups[0] - groups.get(1).copied().unwrap_or_else(Prob::zero);
        return Complex64::new(prob_to_f64(&re), 0.0);
    }
    groups
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_zero())
        .map(|(k, g)| phase_to_complex(k as u64, n) * prob_to_f64(g))
        .sum()
}

/// Haar measure of an affine subgroup `offset + Σ_j span_j` of `A^W`, with
/// the group split over the field components of the ring.
#[derive(Clone, Debug)]
pub struct AffineHaar {
    split: FieldSplit,
    offset: Vec<Elem>,
    spans: Vec<Subspace>,
}

impl AffineHaar {
    fn ncols(&self) -> usize {
        self.offset.len()
    }

    pub fn spans(&self) -> &[Subspace] {
        &self.spans
    }

    pub fn offset(&self) -> &[Elem] {
        &self.offset
    }

    pub fn count(&self) -> Option<u128> {
        let mut total: u128 = 1;
        for (s, f) in self.spans.iter().zip(self.split.fields()) {
            total = total.checked_mul((f.size() as u128).checked_pow(s.dim() as u32)?)?;
        }
        Some(total)
    }

    fn coefficients(&self, rng: &mut impl Rng) -> Vec<Vec<Elem>> {
        self.spans
            .iter()
            .zip(self.split.fields())
            .map(|(s, f)| (0..s.dim()).map(|_| rng.gen_range(0..f.size())).collect())
            .collect()
    }

    fn value_at(&self, coeffs: &[Vec<Elem>], col: usize) -> Elem {
        let ring = self.split.ring();
        let mut parts: SmallVec<[Elem; 4]> = SmallVec::new();
        for ((s, f), a) in self.spans.iter().zip(self.split.fields()).zip(coeffs) {
            let mut acc = 0;
            for (row, &x) in s.rows().iter().zip(a) {
                if x != 0 && row[col] != 0 {
                    acc = f.add(acc, f.mul(x, row[col]));
                }
            }
            parts.push(acc);
        }
        ring.add(self.offset[col], self.split.inverse(&parts))
    }

    fn assemble(&self, coeffs: &[Vec<Elem>]) -> Vec<Elem> {
        (0..self.ncols()).map(|c| self.value_at(coeffs, c)).collect()
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<Elem> {
        let coeffs = self.coefficients(rng);
        self.assemble(&coeffs)
    }

    fn sample_at(&self, rng: &mut impl Rng, cols: &[usize]) -> Vec<Elem> {
        let coeffs = self.coefficients(rng);
        cols.iter().map(|&c| self.value_at(&coeffs, c)).collect()
    }

    fn word(&self, mut index: u128) -> Vec<Elem> {
        let coeffs: Vec<Vec<Elem>> = self
            .spans
            .iter()
            .zip(self.split.fields())
            .map(|(s, f)| {
                (0..s.dim())
                    .map(|_| {
                        let d = (index % f.size() as u128) as Elem;
                        index /= f.size() as u128;
                        d
                    })
                    .collect()
            })
            .collect();
        self.assemble(&coeffs)
    }

    /// Probability that the columns take the pinned values.
    fn cylinder(&self, pins: &[(usize, Elem)]) -> Result<Prob> {
        let ring = self.split.ring();
        let mut prob = Prob::one();
        for (j, (s, f)) in self.spans.iter().zip(self.split.fields()).enumerate() {
            let eqs: Vec<(Vec<Elem>, Elem)> = pins
                .iter()
                .map(|&(col, value)| {
                    let row: Vec<Elem> = s.rows().iter().map(|r| r[col]).collect();
                    (row, self.split.component(ring.sub(value, self.offset[col]), j))
                })
                .collect();
            if solve(f, s.dim(), &eqs).is_none() {
                return Ok(Prob::zero());
            }
            let projected: Vec<Vec<Elem>> = s.rows().iter().map(|r| pins.iter().map(|&(c, _)| r[c]).collect()).collect();
            let rank = Subspace::span(f, pins.len(), projected).dim() as u32;
            let denom = (f.size() as i128).checked_pow(rank).ok_or_else(|| Error::ResourceLimit {
                what: "exact cylinder probability".into(),
                size: u128::MAX,
                limit: i128::MAX as u128,
            })?;
            prob /= Prob::from_integer(denom);
        }
        Ok(prob)
    }

    /// Whether the character (given per column) is trivial on every span.
    fn annihilates(&self, psi: &Psi, chi: &[(usize, Elem)]) -> bool {
        let ring = self.split.ring();
        for (j, (s, f)) in self.spans.iter().zip(self.split.fields()).enumerate() {
            let gens = f.additive_generators();
            for row in s.rows() {
                for &g in &gens {
                    let mut k = 0u64;
                    for &(col, u) in chi {
                        let x = self.split.embed(j, f.mul(g, row[col]));
                        k += psi.phase(ring.mul(u, x)) as u64;
                    }
                    if !k.is_multiple_of(psi.modulus()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn pushforward(&self, poly: &ShiftPolynomial, plan: &ApplyPlan, window: &WindowSpec, mode: Mode, rank: usize) -> Result<AffineHaar> {
        let out = plan.out_window();
        let offset = plan.apply_values(&self.offset, rank);
        let mut spans = Vec::with_capacity(self.spans.len());
        for (j, (s, f)) in self.spans.iter().zip(self.split.fields()).enumerate() {
            let comp = ShiftPolynomial::from_terms(
                f.clone(),
                poly.dims(),
                poly.terms().iter().map(|(h, &c)| (h.clone(), self.split.component(c, j))),
            );
            let comp_plan = ApplyPlan::with_output(&comp, window, mode, Some(out))?;
            let rows = s.rows().iter().map(|r| comp_plan.apply_values(r, rank)).collect();
            spans.push(Subspace::span(f, out.volume() * rank, rows));
        }
        Ok(AffineHaar {
            split: self.split.clone(),
            offset,
            spans,
        })
    }
}

/// An i.i.d. product law with a common site distribution over module codes.
#[derive(Clone, Debug)]
pub struct SiteLaw {
    probs: Vec<Prob>,
    cumulative: Vec<u64>,
    denom: u64,
}

impl SiteLaw {
    pub fn new(probs: Vec<Prob>) -> Result<Self> {
        if probs.iter().any(|p| *p < Prob::zero()) || probs.iter().copied().sum::<Prob>() != Prob::one() {
            return Err(Error::InvalidParameter("site probabilities must be nonnegative and sum to 1".into()));
        }
        let denom = probs
            .iter()
            .fold(1i128, |acc, p| num_integer::lcm(acc, *p.denom()));
        let denom = u64::try_from(denom).map_err(|_| Error::InvalidParameter("site law denominators too large".into()))?;
        let mut acc = 0u64;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += (p * Prob::from_integer(denom as i128)).to_integer() as u64;
                acc
            })
            .collect();
        Ok(SiteLaw { probs, cumulative, denom })
    }

    pub fn uniform(size: u64) -> Self {
        SiteLaw::new(vec![Prob::new(1, size as i128); size as usize]).expect("uniform law")
    }

    pub fn probs(&self) -> &[Prob] {
        &self.probs
    }

    fn sample(&self, rng: &mut impl Rng) -> u64 {
        let x = rng.gen_range(0..self.denom);
        self.cumulative.partition_point(|&c| c <= x) as u64
    }
}

/// A finitely supported law on words.
#[derive(Clone, Debug)]
pub struct Distribution {
    probs: BTreeMap<Vec<Elem>, Prob>,
    words: Vec<Vec<Elem>>,
    cumulative: Vec<u128>,
    denom: u128,
}

impl Distribution {
    pub fn new(probs: BTreeMap<Vec<Elem>, Prob>) -> Result<Self> {
        let probs: BTreeMap<_, _> = probs.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        if probs.values().any(|p| *p < Prob::zero()) || probs.values().copied().sum::<Prob>() != Prob::one() {
            return Err(Error::InvalidParameter("word probabilities must be nonnegative and sum to 1".into()));
        }
        let denom = probs.values().fold(1i128, |acc, p| num_integer::lcm(acc, *p.denom())) as u128;
        let mut acc = 0u128;
        let mut words = Vec::with_capacity(probs.len());
        let mut cumulative = Vec::with_capacity(probs.len());
        for (w, p) in &probs {
            acc += (p * Prob::from_integer(denom as i128)).to_integer() as u128;
            words.push(w.clone());
            cumulative.push(acc);
        }
        Ok(Distribution {
            probs,
            words,
            cumulative,
            denom,
        })
    }

    pub fn probs(&self) -> &BTreeMap<Vec<Elem>, Prob> {
        &self.probs
    }

    fn sample(&self, rng: &mut impl Rng) -> &[Elem] {
        let x = rng.gen_range(0..self.denom);
        &self.words[self.cumulative.partition_point(|&c| c <= x)]
    }
}

/// How a measure is represented.
#[derive(Clone, Debug)]
pub enum Law {
    /// Haar measure of an affine subgroup (uniform, kernel, coset, point mass).
    Haar(AffineHaar),
    /// Independent sites with a common law.
    Bernoulli(SiteLaw),
    /// An explicit word distribution.
    Enumerated(Distribution),
    /// Image of another measure under a shift polynomial.
    Pushforward {
        base: Box<MeasureHandle>,
        poly: ShiftPolynomial,
        plan: Arc<ApplyPlan>,
    },
    /// Image of another measure under a sitewise ring homomorphism.
    SiteMap { base: Box<MeasureHandle>, table: Vec<Elem> },
}

/// A measure on a window together with its sampling seed and provenance.
#[derive(Clone, Debug)]
pub struct MeasureHandle {
    window: WindowSpec,
    module: ModuleSpec,
    mode: Mode,
    seed: u64,
    label: String,
    provenance: Vec<String>,
    law: Law,
}

/// A pinned value: a site and its module components.
pub type Pin = (Coord, SmallVec<[Elem; 4]>);

fn field_split(ring: &Ring) -> Option<FieldSplit> {
    FieldSplit::new(ring).ok()
}

impl MeasureHandle {
    fn build(window: WindowSpec, module: ModuleSpec, mode: Mode, seed: u64, label: &str, law: Law) -> Self {
        MeasureHandle {
            window,
            module,
            mode,
            seed,
            label: label.to_string(),
            provenance: vec![label.to_string()],
            law,
        }
    }

    /// Independent uniform sites (the Haar measure of the full shift).
    pub fn uniform(module: &ModuleSpec, window: &WindowSpec, mode: Mode, seed: u64) -> Self {
        let ncols = window.volume() * module.rank();
        let law = match field_split(module.ring()) {
            Some(split) => Law::Haar(AffineHaar {
                spans: split.fields().iter().map(|f| Subspace::full(f, ncols)).collect(),
                split,
                offset: vec![0; ncols],
            }),
            None => Law::Bernoulli(SiteLaw::uniform(module.size())),
        };
        MeasureHandle::build(window.clone(), module.clone(), mode, seed, "uniform Bernoulli", law)
    }

    /// Haar measure of the window kernel.
    pub fn kernel_haar(basis: &WindowBasis, seed: u64) -> Self {
        let ncols = basis.window().volume() * basis.module().rank();
        let law = Law::Haar(AffineHaar {
            split: basis.split().clone(),
            offset: vec![0; ncols],
            spans: basis.field_spans(),
        });
        let label = format!("kernel Haar [{}]", basis.spec().label());
        MeasureHandle::build(basis.window().clone(), basis.module().clone(), basis.mode(), seed, &label, law)
    }

    /// Haar measure of `c + S_w`, after checking that `c` spans a coset shift.
    pub fn coset(c: &WindowConfig, s: &KernelShiftSpec, seed: u64) -> Result<Self> {
        let axes = c.window().axes();
        let gens: Vec<Coord> = (0..axes)
            .map(|i| {
                let mut v: Coord = SmallVec::from_elem(0, axes);
                v[i] = 1;
                v
            })
            .collect();
        let check = coset_shift_check(c, s, &gens)?;
        if !check.holds {
            let (v, site) = check.failure.expect("failure recorded");
            return Err(Error::InvalidCoset(format!(
                "coboundary along {v:?} violates the constraint at {site:?}"
            )));
        }
        let basis = WindowBasis::new(s, c.window(), c.mode())?;
        let mut h = MeasureHandle::kernel_haar(&basis, seed);
        if let Law::Haar(haar) = &mut h.law {
            haar.offset = c.values().to_vec();
        }
        h.label = format!("coset Haar [{}]", s.label());
        h.provenance = vec![h.label.clone()];
        Ok(h)
    }

    pub fn point_mass(c: &WindowConfig, seed: u64) -> Self {
        let ncols = c.values().len();
        let law = match field_split(c.ring()) {
            Some(split) => Law::Haar(AffineHaar {
                spans: split.fields().iter().map(|f| Subspace::zero(f, ncols)).collect(),
                split,
                offset: c.values().to_vec(),
            }),
            None => Law::Enumerated(
                Distribution::new([(c.values().to_vec(), Prob::one())].into_iter().collect()).expect("point mass"),
            ),
        };
        MeasureHandle::build(c.window().clone(), c.module().clone(), c.mode(), seed, "point mass", law)
    }

    /// Independent sites with law `probs` over module codes.
    pub fn bernoulli(module: &ModuleSpec, window: &WindowSpec, mode: Mode, probs: Vec<Prob>, seed: u64) -> Result<Self> {
        if probs.len() as u64 != module.size() {
            return Err(Error::InvalidParameter(format!(
                "site law needs {} probabilities, got {}",
                module.size(),
                probs.len()
            )));
        }
        let law = Law::Bernoulli(SiteLaw::new(probs)?);
        Ok(MeasureHandle::build(window.clone(), module.clone(), mode, seed, "Bernoulli", law))
    }

    pub fn from_distribution(
        module: &ModuleSpec,
        window: &WindowSpec,
        mode: Mode,
        probs: BTreeMap<Vec<Elem>, Prob>,
        seed: u64,
    ) -> Result<Self> {
        let n = window.volume() * module.rank();
        if probs.keys().any(|w| w.len() != n || w.iter().any(|&x| !module.ring().contains(x))) {
            return Err(Error::InvalidParameter("distribution word does not fit the window".into()));
        }
        let law = Law::Enumerated(Distribution::new(probs)?);
        Ok(MeasureHandle::build(window.clone(), module.clone(), mode, seed, "enumerated", law))
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        if let Some(first) = self.provenance.last_mut() {
            *first = label.to_string();
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Law::Pushforward { base, .. } | Law::SiteMap { base, .. } = &mut self.law {
            **base = base.as_ref().clone().with_seed(seed);
        }
        self
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn module(&self) -> &ModuleSpec {
        &self.module
    }

    pub fn ring(&self) -> &Ring {
        self.module.ring()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    /// Draw `index`: a pure function of `(seed, index)`.
    pub fn sample(&self, index: u64) -> WindowConfig {
        let values = self.sample_values(index);
        WindowConfig::from_raw(self.window.clone(), self.module.clone(), self.mode, values)
    }

    fn sample_values(&self, index: u64) -> Vec<Elem> {
        let mut rng = draw_rng(self.seed, index);
        match &self.law {
            Law::Haar(h) => h.sample(&mut rng),
            Law::Bernoulli(site) => {
                let mut out = Vec::with_capacity(self.window.volume() * self.module.rank());
                for _ in 0..self.window.volume() {
                    out.extend(self.module.decode(site.sample(&mut rng)));
                }
                out
            }
            Law::Enumerated(d) => d.sample(&mut rng).to_vec(),
            Law::Pushforward { base, plan, .. } => plan.apply_values(&base.sample_values(index), self.module.rank()),
            Law::SiteMap { base, table } => base.sample_values(index).iter().map(|&x| table[x as usize]).collect(),
        }
    }

    /// The values of draw `index` at the given flattened columns
    /// (`site · rank + component`); agrees with [`sample`](Self::sample).
    pub fn sample_at(&self, index: u64, cols: &[usize]) -> Vec<Elem> {
        match &self.law {
            Law::Haar(h) => h.sample_at(&mut draw_rng(self.seed, index), cols),
            _ => {
                let all = self.sample_values(index);
                cols.iter().map(|&c| all[c]).collect()
            }
        }
    }

    /// Flattened columns of a site list (wrapping on tori).
    pub fn columns(&self, sites: &[Coord]) -> Result<Vec<usize>> {
        let rank = self.module.rank();
        let mut cols = Vec::with_capacity(sites.len() * rank);
        for s in sites {
            let idx = match self.mode {
                Mode::Torus => self.window.wrapped_index(s),
                Mode::Exact => self.window.index_of(s).ok_or_else(|| Error::OutOfWindow {
                    inner: format!("{s:?}"),
                    outer: self.window.to_string(),
                })?,
            };
            cols.extend((0..rank).map(|c| idx * rank + c));
        }
        Ok(cols)
    }

    /// Number of words carrying positive probability, when known exactly.
    pub fn support_size(&self) -> Option<u128> {
        match &self.law {
            Law::Haar(h) => h.count(),
            Law::Enumerated(d) => Some(d.probs.len() as u128),
            Law::Bernoulli(site) => {
                let k = site.probs.iter().filter(|p| !p.is_zero()).count() as u128;
                k.checked_pow(self.window.volume() as u32)
            }
            _ => None,
        }
    }

    /// The full word distribution, refusing more than `limit` words.
    pub fn exact_distribution(&self, limit: u128) -> Result<BTreeMap<Vec<Elem>, Prob>> {
        let refuse = |size: u128| Error::ResourceLimit {
            what: format!("exact distribution of `{}` on {}", self.label, self.window),
            size,
            limit,
        };
        match &self.law {
            Law::Haar(h) => {
                let n = h.count().unwrap_or(u128::MAX);
                if n > limit {
                    return Err(refuse(n));
                }
                let p = Prob::new(1, n as i128);
                Ok((0..n).map(|i| (h.word(i), p)).collect())
            }
            Law::Bernoulli(site) => {
                let support: Vec<(u64, Prob)> = site
                    .probs
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(a, p)| (a as u64, *p))
                    .collect();
                let v = self.window.volume() as u32;
                let n = (support.len() as u128).checked_pow(v).unwrap_or(u128::MAX);
                if n > limit {
                    return Err(refuse(n));
                }
                let k = support.len() as u128;
                Ok((0..n)
                    .map(|mut i| {
                        let mut word = Vec::new();
                        let mut p = Prob::one();
                        for _ in 0..v {
                            let (a, pa) = support[(i % k) as usize];
                            i /= k;
                            word.extend(self.module.decode(a));
                            p *= pa;
                        }
                        (word, p)
                    })
                    .collect())
            }
            Law::Enumerated(d) => {
                if d.probs.len() as u128 > limit {
                    return Err(refuse(d.probs.len() as u128));
                }
                Ok(d.probs.clone())
            }
            Law::Pushforward { base, plan, .. } => {
                let src = base.exact_distribution(limit)?;
                let mut out: BTreeMap<Vec<Elem>, Prob> = BTreeMap::new();
                for (w, p) in src {
                    *out.entry(plan.apply_values(&w, self.module.rank())).or_insert_with(Prob::zero) += p;
                }
                Ok(out)
            }
            Law::SiteMap { base, table } => {
                let src = base.exact_distribution(limit)?;
                let mut out: BTreeMap<Vec<Elem>, Prob> = BTreeMap::new();
                for (w, p) in src {
                    let mapped: Vec<Elem> = w.iter().map(|&x| table[x as usize]).collect();
                    *out.entry(mapped).or_insert_with(Prob::zero) += p;
                }
                Ok(out)
            }
        }
    }

    fn character_columns(&self, chi: &CharacterSpec) -> Result<Vec<(usize, Elem)>> {
        if chi.rank() != self.module.rank() {
            return Err(Error::InvalidParameter("character rank differs from the module rank".into()));
        }
        let rank = self.module.rank();
        let idx = chi.indices_in(&self.window, self.mode == Mode::Torus)?;
        let mut cols: BTreeMap<usize, Elem> = BTreeMap::new();
        let ring = self.ring();
        for ((_, dual), i) in chi.duals().iter().zip(idx) {
            for (c, &u) in dual.iter().enumerate() {
                let e = cols.entry(i * rank + c).or_insert(0);
                *e = ring.add(*e, u);
            }
        }
        Ok(cols.into_iter().filter(|(_, u)| *u != 0).collect())
    }

    /// The exact Fourier coefficient `∫ χ dμ`.
    pub fn fourier_exact(&self, chi: &CharacterSpec) -> Result<Complex64> {
        let cols = self.character_columns(chi)?;
        self.fourier_cols(&cols)
    }

    fn fourier_cols(&self, cols: &[(usize, Elem)]) -> Result<Complex64> {
        let ring = self.ring();
        let psi = Psi::new(ring);
        let n = psi.modulus();
        if cols.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        match &self.law {
            Law::Haar(h) => {
                if !h.annihilates(&psi, cols) {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let k: u64 = cols.iter().map(|&(c, u)| psi.phase(ring.mul(u, h.offset[c])) as u64).sum();
                Ok(phase_to_complex(k % n, n))
            }
            Law::Bernoulli(site) => {
                let rank = self.module.rank();
                let mut by_site: BTreeMap<usize, SmallVec<[Elem; 4]>> = BTreeMap::new();
                for &(col, u) in cols {
                    by_site.entry(col / rank).or_insert_with(|| SmallVec::from_elem(0, rank))[col % rank] = u;
                }
                let mut value = Complex64::new(1.0, 0.0);
                for dual in by_site.values() {
                    let mut groups = vec![Prob::zero(); n as usize];
                    for (a, p) in site.probs.iter().enumerate() {
                        if p.is_zero() {
                            continue;
                        }
                        let comps = self.module.decode(a as u64);
                        let k: u64 = dual.iter().zip(&comps).map(|(&u, &x)| psi.phase(ring.mul(u, x)) as u64).sum();
                        groups[(k % n) as usize] += p;
                    }
                    let s = phase_sum(&groups);
                    if s == Complex64::new(0.0, 0.0) {
                        return Ok(s);
                    }
                    value *= s;
                }
                Ok(value)
            }
            Law::Enumerated(d) => {
                let mut groups = vec![Prob::zero(); n as usize];
                for (w, p) in &d.probs {
                    let k: u64 = cols.iter().map(|&(c, u)| psi.phase(ring.mul(u, w[c])) as u64).sum();
                    groups[(k % n) as usize] += p;
                }
                Ok(phase_sum(&groups))
            }
            Law::Pushforward { base, poly, plan } => {
                let rank = self.module.rank();
                let out = plan.out_window();
                let mut pulled: BTreeMap<usize, Elem> = BTreeMap::new();
                for &(col, u) in cols {
                    let (site, c) = (col / rank, col % rank);
                    let m = out.coord_of(site);
                    for (h, &phi) in poly.terms() {
                        let src: Coord = m.iter().zip(h).map(|(x, y)| x + y).collect();
                        let idx = match self.mode {
                            Mode::Torus => base.window.wrapped_index(&src),
                            Mode::Exact => base.window.index_of(&src).expect("stencil inside base window"),
                        };
                        let e = pulled.entry(idx * rank + c).or_insert(0);
                        *e = ring.add(*e, ring.mul(phi, u));
                    }
                }
                let pulled: Vec<(usize, Elem)> = pulled.into_iter().filter(|(_, u)| *u != 0).collect();
                base.fourier_cols(&pulled)
            }
            Law::SiteMap { base, table } => {
                let src_ring = base.ring();
                let src_psi = Psi::new(src_ring);
                let gens = src_ring.additive_generators();
                let mut pulled = Vec::with_capacity(cols.len());
                for &(col, u) in cols {
                    // The source dual u' with ψ_src(u'x) = ψ(u f(x)) for all x.
                    let target = |x: Elem| psi.phase(ring.mul(u, table[x as usize])) as u64 * src_psi.modulus();
                    let found = src_ring.elements().find(|&v| {
                        gens.iter()
                            .all(|&g| src_psi.phase(src_ring.mul(v, g)) as u64 * n == target(g))
                    });
                    let v = found.ok_or_else(|| Error::Unsupported("site map does not pull characters back".into()))?;
                    if v != 0 {
                        pulled.push((col, v));
                    }
                }
                base.fourier_cols(&pulled)
            }
        }
    }

    /// Exact probability that every pinned site carries its value.
    pub fn cylinder_exact(&self, pins: &[Pin]) -> Result<f64> {
        let rank = self.module.rank();
        let sites: Vec<Coord> = pins.iter().map(|(s, _)| s.clone()).collect();
        let cols = self.columns(&sites)?;
        let mut pinned: BTreeMap<usize, Elem> = BTreeMap::new();
        for ((_, value), chunk) in pins.iter().zip(cols.chunks(rank)) {
            for (&col, &v) in chunk.iter().zip(value.iter()) {
                if let Some(prev) = pinned.insert(col, v) {
                    if prev != v {
                        return Ok(0.0);
                    }
                }
            }
        }
        let pinned: Vec<(usize, Elem)> = pinned.into_iter().collect();
        match &self.law {
            Law::Haar(h) => Ok(prob_to_f64(&h.cylinder(&pinned)?)),
            Law::Bernoulli(site) => {
                let mut by_site: BTreeMap<usize, SmallVec<[Elem; 4]>> = BTreeMap::new();
                for &(col, v) in &pinned {
                    by_site.entry(col / rank).or_insert_with(|| SmallVec::from_elem(u32::MAX, rank))[col % rank] = v;
                }
                let mut p = Prob::one();
                for comps in by_site.values() {
                    let mut q = Prob::zero();
                    for (a, pa) in site.probs.iter().enumerate() {
                        let dec = self.module.decode(a as u64);
                        if comps.iter().zip(&dec).all(|(&want, &got)| want == u32::MAX || want == got) {
                            q += pa;
                        }
                    }
                    p *= q;
                }
                Ok(prob_to_f64(&p))
            }
            Law::Enumerated(d) => {
                let p: Prob = d
                    .probs
                    .iter()
                    .filter(|(w, _)| pinned.iter().all(|&(c, v)| w[c] == v))
                    .map(|(_, p)| *p)
                    .sum();
                Ok(prob_to_f64(&p))
            }
            _ => self.cylinder_by_inversion(&pinned),
        }
    }

    /// `μ[x_P = b] = |R|^{-|P|} Σ_{χ on P} conj(χ(b)) μ̂[χ]`.
    fn cylinder_by_inversion(&self, pinned: &[(usize, Elem)]) -> Result<f64> {
        let ring = self.ring();
        let psi = Psi::new(ring);
        let q = ring.size() as u128;
        let count = q.checked_pow(pinned.len() as u32).unwrap_or(u128::MAX);
        if count > INVERSION_LIMIT {
            return Err(Error::ResourceLimit {
                what: "cylinder probability by Fourier inversion".into(),
                size: count,
                limit: INVERSION_LIMIT,
            });
        }
        let mut total = Complex64::new(0.0, 0.0);
        for mut i in 0..count {
            let mut cols = Vec::with_capacity(pinned.len());
            let mut k = 0u64;
            for &(col, b) in pinned {
                let u = (i % q) as Elem;
                i /= q;
                if u != 0 {
                    cols.push((col, u));
                    k += psi.phase(ring.mul(u, b)) as u64;
                }
            }
            let coeff = self.fourier_cols(&cols)?;
            total += coeff * phase_to_complex(k % psi.modulus(), psi.modulus()).conj();
        }
        Ok(total.re / count as f64)
    }

    /// `Φ^t_*(μ)`. Haar laws are transported exactly; other laws are kept
    /// lazily and evaluated through the base measure.
    pub fn pushforward(&self, phi: &LocalRule, t: u64) -> Result<MeasureHandle> {
        if phi.ring() != self.ring() {
            return Err(Error::RingMismatch {
                left: phi.ring().to_string(),
                right: self.ring().to_string(),
            });
        }
        if t == 0 {
            return Ok(self.clone());
        }
        let poly = phi.to_poly().pow_lucas(t);
        self.pushforward_poly(&poly, &format!("pushforward by Φ, t={t}"))
    }

    pub fn pushforward_poly(&self, poly: &ShiftPolynomial, note: &str) -> Result<MeasureHandle> {
        let plan = ApplyPlan::new(poly, &self.window, self.mode)?;
        let out = plan.out_window().clone();
        let rank = self.module.rank();
        let law = match &self.law {
            Law::Haar(h) => Law::Haar(h.pushforward(poly, &plan, &self.window, self.mode, rank)?),
            _ => Law::Pushforward {
                base: Box::new(self.clone()),
                poly: poly.clone(),
                plan: Arc::new(plan),
            },
        };
        let mut provenance = self.provenance.clone();
        provenance.push(note.to_string());
        Ok(MeasureHandle {
            window: out,
            module: self.module.clone(),
            mode: self.mode,
            seed: self.seed,
            label: format!("{} | {note}", self.label),
            provenance,
            law,
        })
    }

    /// Image under a sitewise ring map onto `target` (used for projections).
    pub fn map_sites(&self, target: &ModuleSpec, table: Vec<Elem>, note: &str) -> Result<MeasureHandle> {
        if table.len() != self.ring().size() as usize || table.iter().any(|&x| !target.ring().contains(x)) {
            return Err(Error::InvalidParameter("site map table does not match the rings".into()));
        }
        if target.rank() != self.module.rank() {
            return Err(Error::InvalidParameter("site maps preserve the rank".into()));
        }
        let mut provenance = self.provenance.clone();
        provenance.push(note.to_string());
        Ok(MeasureHandle {
            window: self.window.clone(),
            module: target.clone(),
            mode: self.mode,
            seed: self.seed,
            label: format!("{} | {note}", self.label),
            provenance,
            law: Law::SiteMap {
                base: Box::new(self.clone()),
                table,
            },
        })
    }

    /// Haar measure of the window kernel of `s` on `w`.
    pub fn kernel_haar_on(s: &KernelShiftSpec, w: &WindowSpec, seed: u64) -> Result<Self> {
        Ok(MeasureHandle::kernel_haar(&window_kernel(s, w)?, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(m: u32) -> ModuleSpec {
        ModuleSpec::scalar(Ring::zmod(m).unwrap())
    }

    #[test]
    fn uniform_two_sites() {
        let w = WindowSpec::at_zero((1, 0), &[2]).unwrap();
        let h = MeasureHandle::uniform(&z(2), &w, Mode::Exact, 1);
        let d = h.exact_distribution(16).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.values().all(|p| *p == Prob::new(1, 4)));
    }

    #[test]
    fn sample_at_agrees_with_sample() {
        let s = KernelShiftSpec::parse("kernel ring=zmod:3 rank=2 dims=1,1 H=(0,0):1;(1,0):2;(0,1):1").unwrap();
        let w = WindowSpec::at_zero((1, 1), &[4, 3]).unwrap();
        let h = MeasureHandle::kernel_haar_on(&s, &w, 5).unwrap();
        for i in 0..20 {
            let full = h.sample(i);
            assert!(s.contains(&full).unwrap());
            let cols = [0, 3, 7, 23];
            let part = h.sample_at(i, &cols);
            assert_eq!(part, cols.iter().map(|&c| full.values()[c]).collect::<Vec<_>>());
        }
    }

    #[test]
    fn bernoulli_fourier_closed_form() {
        let w = WindowSpec::at_zero((1, 0), &[2]).unwrap();
        let probs = vec![Prob::new(3, 4), Prob::new(1, 4)];
        let h = MeasureHandle::bernoulli(&z(2), &w, Mode::Exact, probs, 0).unwrap();
        let chi = CharacterSpec::single(w.clone(), &z(2), &[1], &[1]).unwrap();
        let v = h.fourier_exact(&chi).unwrap();
        assert!((v.re - 0.5).abs() < 1e-15 && v.im == 0.0);
        let pins: Vec<Pin> = vec![(Coord::from_slice(&[0]), smallvec::smallvec![0]), (Coord::from_slice(&[1]), smallvec::smallvec![1])];
        assert!((h.cylinder_exact(&pins).unwrap() - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn pushforward_of_bernoulli_matches_enumeration() {
        let w = WindowSpec::at_zero((1, 0), &[4]).unwrap();
        let probs = vec![Prob::new(1, 2), Prob::new(1, 3), Prob::new(1, 6)];
        let h = MeasureHandle::bernoulli(&z(3), &w, Mode::Exact, probs, 0).unwrap();
        let phi = LocalRule::parse("rule ring=zmod:3 rank=1 H=(0):1;(1):2").unwrap();
        let pushed = h.pushforward(&phi, 2).unwrap();
        let dist = pushed.exact_distribution(1 << 10).unwrap();
        let enumerated =
            MeasureHandle::from_distribution(&z(3), pushed.window(), Mode::Exact, dist, 0).unwrap();
        for chi in CharacterSpec::all(pushed.window(), &z(3), 1 << 10).unwrap() {
            let a = pushed.fourier_exact(&chi).unwrap();
            let b = enumerated.fourier_exact(&chi).unwrap();
            assert!((a - b).norm() < 1e-12, "{}", chi.label());
        }
        let pins: Vec<Pin> = vec![(Coord::from_slice(&[0]), smallvec::smallvec![2])];
        let p1 = pushed.cylinder_exact(&pins).unwrap();
        let p2 = enumerated.cylinder_exact(&pins).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
    }
}
