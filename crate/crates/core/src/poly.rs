//! Linear local rules and their shift polynomials `Φ = F(σ)`: products,
//! powers, the prime-characteristic Frobenius fast-forward, and evaluation on
//! windowed configurations.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{offset_hull, Coord, Mode, WindowConfig, WindowSpec};
use crate::ring::{Elem, ModuleSpec, Ring, RingDescriptor};

/// A linear local rule `a ↦ Σ_h φ_h a_{m+h}` with nonzero coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalRule {
    module: ModuleSpec,
    dims: (usize, usize),
    terms: Vec<(Coord, Elem)>,
}

impl LocalRule {
    pub fn new(module: ModuleSpec, dims: (usize, usize), terms: Vec<(Coord, Elem)>) -> Result<Self> {
        let axes = dims.0 + dims.1;
        if axes == 0 {
            return Err(Error::InvalidParameter("a rule needs at least one axis".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidParameter("a rule needs at least one offset".into()));
        }
        let ring = module.ring();
        let mut seen = std::collections::BTreeSet::new();
        for (h, c) in &terms {
            if h.len() != axes {
                return Err(Error::InvalidParameter(format!("offset {h:?} does not have {axes} components")));
            }
            if h[dims.0..].iter().any(|&x| x < 0) {
                return Err(Error::InvalidParameter(format!(
                    "offset {h:?} has a negative natural-axis component"
                )));
            }
            if *c == 0 || !ring.contains(*c) {
                return Err(Error::InvalidParameter(format!("coefficient {c} must be a nonzero element of {ring}")));
            }
            if !seen.insert(h.clone()) {
                return Err(Error::InvalidParameter(format!("offset {h:?} listed twice")));
            }
        }
        Ok(LocalRule { module, dims, terms })
    }

    /// Convenience constructor over `R^1` from integer offsets.
    pub fn scalar(ring: Ring, dims: (usize, usize), terms: &[(&[i64], Elem)]) -> Result<Self> {
        LocalRule::new(
            ModuleSpec::scalar(ring),
            dims,
            terms.iter().map(|(h, c)| (Coord::from_slice(h), *c)).collect(),
        )
    }

    /// Parses `rule ring=<desc> rank=<n> [dims=D,E] H=(h…):c;…`.
    pub fn parse(text: &str) -> Result<Self> {
        parse_rule(text, "rule")
    }

    /// Parses the same format with the `kernel` prefix.
    pub fn parse_kernel(text: &str) -> Result<Self> {
        parse_rule(text, "kernel")
    }

    pub fn module(&self) -> &ModuleSpec {
        &self.module
    }

    pub fn ring(&self) -> &Ring {
        self.module.ring()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn terms(&self) -> &[(Coord, Elem)] {
        &self.terms
    }

    pub fn offsets(&self) -> impl Iterator<Item = &Coord> {
        self.terms.iter().map(|(h, _)| h)
    }

    pub fn coefficients(&self) -> Vec<Elem> {
        self.terms.iter().map(|(_, c)| *c).collect()
    }

    pub fn to_poly(&self) -> ShiftPolynomial {
        ShiftPolynomial::from_rule(self)
    }

    /// Text form with the given prefix (`rule` or `kernel`).
    pub fn to_text(&self, prefix: &str) -> String {
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|(h, c)| {
                let h: Vec<String> = h.iter().map(|x| x.to_string()).collect();
                format!("({}):{}", h.join(","), c)
            })
            .collect();
        format!(
            "{prefix} ring={} rank={} dims={},{} H={}",
            self.ring(),
            self.module.rank(),
            self.dims.0,
            self.dims.1,
            terms.join(";")
        )
    }
}

impl fmt::Display for LocalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text("rule"))
    }
}

fn parse_rule(text: &str, prefix: &'static str) -> Result<LocalRule> {
    const WHAT: &str = "rule";
    let err = |col: usize, msg: String| Error::parse(WHAT, 1, col, msg);
    let text = text.trim_end();
    let mut tokens = Vec::new();
    let mut col = 1;
    for tok in text.split(' ') {
        if !tok.is_empty() {
            tokens.push((col, tok));
        }
        col += tok.len() + 1;
    }
    match tokens.first() {
        Some((_, t)) if *t == prefix => {}
        _ => return Err(err(1, format!("expected `{prefix}`"))),
    }
    let (mut ring, mut rank, mut dims, mut h) = (None, None, None, None);
    for &(col, tok) in &tokens[1..] {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| err(col, format!("expected key=value, got `{tok}`")))?;
        let vcol = col + key.len() + 1;
        match key {
            "ring" => {
                let desc = RingDescriptor::parse(value).map_err(|e| match e {
                    Error::Parse { column, message, .. } => err(vcol + column - 1, message),
                    other => other,
                })?;
                ring = Some(Ring::new(&desc)?);
            }
            "rank" => rank = Some(value.parse::<usize>().map_err(|_| err(vcol, format!("bad rank `{value}`")))?),
            "dims" => {
                let parts: Vec<&str> = value.split(',').collect();
                let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
                match parsed.as_deref() {
                    Some([d, e]) => dims = Some((*d, *e)),
                    _ => return Err(err(vcol, format!("bad dims `{value}` (expected D,E)"))),
                }
            }
            "H" => h = Some((vcol, value)),
            _ => return Err(err(col, format!("unknown key `{key}`"))),
        }
    }
    let ring = ring.ok_or_else(|| err(1, "missing ring=".into()))?;
    let rank = rank.unwrap_or(1);
    let (hcol, hval) = h.ok_or_else(|| err(1, "missing H=".into()))?;
    let mut terms = Vec::new();
    let mut col = hcol;
    for term in hval.split(';') {
        let bad = || err(col, format!("bad term `{term}` (expected (h1,…,hd):c)"));
        let (off, coef) = term.rsplit_once(':').ok_or_else(bad)?;
        let off = off.strip_prefix('(').and_then(|o| o.strip_suffix(')')).ok_or_else(bad)?;
        let h: Option<Coord> = off.split(',').map(|x| x.trim().parse::<i64>().ok()).collect();
        let c = coef.parse::<Elem>().map_err(|_| bad())?;
        terms.push((h.ok_or_else(bad)?, c));
        col += term.len() + 1;
    }
    let axes = terms[0].0.len();
    let dims = dims.unwrap_or((axes, 0));
    LocalRule::new(ModuleSpec::new(ring, rank)?, dims, terms)
}

/// A finitely supported map offset → nonzero coefficient, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftPolynomial {
    ring: Ring,
    dims: (usize, usize),
    terms: BTreeMap<Coord, Elem>,
}

fn add_coords(a: &[i64], b: &[i64]) -> Coord {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl ShiftPolynomial {
    pub fn zero(ring: Ring, dims: (usize, usize)) -> Self {
        ShiftPolynomial {
            ring,
            dims,
            terms: BTreeMap::new(),
        }
    }

    pub fn monomial(ring: Ring, dims: (usize, usize), offset: &[i64], coeff: Elem) -> Self {
        let mut p = ShiftPolynomial::zero(ring, dims);
        if coeff != 0 {
            p.terms.insert(Coord::from_slice(offset), coeff);
        }
        p
    }

    /// The identity `σ^0`.
    pub fn one(ring: Ring, dims: (usize, usize)) -> Self {
        let one = ring.one();
        ShiftPolynomial::monomial(ring, dims, &vec![0; dims.0 + dims.1], one)
    }

    pub fn from_rule(rule: &LocalRule) -> Self {
        ShiftPolynomial {
            ring: rule.ring().clone(),
            dims: rule.dims(),
            terms: rule.terms().iter().cloned().collect(),
        }
    }

    /// Builds from arbitrary terms, summing repeated offsets and dropping zeros.
    pub fn from_terms(ring: Ring, dims: (usize, usize), terms: impl IntoIterator<Item = (Coord, Elem)>) -> Self {
        let mut p = ShiftPolynomial::zero(ring, dims);
        for (h, c) in terms {
            p.add_term(h, c);
        }
        p
    }

    fn add_term(&mut self, h: Coord, c: Elem) {
        let ring = &self.ring;
        match self.terms.entry(h) {
            std::collections::btree_map::Entry::Vacant(v) => {
                if c != 0 {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = ring.add(*o.get(), c);
                if s == 0 {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn terms(&self) -> &BTreeMap<Coord, Elem> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Per-axis bounding box of the support.
    pub fn hull(&self) -> (Coord, Coord) {
        offset_hull(self.dims.0 + self.dims.1, self.terms.keys())
    }

    /// Reads the polynomial back as a rule over `R^rank`.
    pub fn to_rule(&self, rank: usize) -> Result<LocalRule> {
        LocalRule::new(
            ModuleSpec::new(self.ring.clone(), rank)?,
            self.dims,
            self.terms.iter().map(|(h, c)| (h.clone(), *c)).collect(),
        )
    }

    fn check_same(&self, other: &ShiftPolynomial) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: other.ring.to_string(),
            });
        }
        if self.dims != other.dims {
            return Err(Error::InvalidParameter("polynomials over different lattices".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &ShiftPolynomial) -> Result<ShiftPolynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (h, c) in &other.terms {
            out.add_term(h.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &ShiftPolynomial) -> Result<ShiftPolynomial> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (h, c) in &other.terms {
            out.add_term(h.clone(), self.ring.neg(*c));
        }
        Ok(out)
    }

    /// Convolution product; `(F·G)(σ) = F(σ) ∘ G(σ)`.
    pub fn mul(&self, other: &ShiftPolynomial) -> Result<ShiftPolynomial> {
        self.check_same(other)?;
        let mut out = ShiftPolynomial::zero(self.ring.clone(), self.dims);
        for (h, a) in &self.terms {
            for (g, b) in &other.terms {
                out.add_term(add_coords(h, g), self.ring.mul(*a, *b));
            }
        }
        Ok(out)
    }

    /// `F^t` by repeated multiplication. Short exponents of sparse polynomials
    /// multiply by `F` one step at a time, since squaring two dense
    /// intermediate powers is quadratic in their size; anything else uses
    /// square-and-multiply.
    pub fn pow(&self, mut t: u64) -> ShiftPolynomial {
        let mut acc = ShiftPolynomial::one(self.ring.clone(), self.dims);
        if self.terms.len() <= 8 && t <= 4096 {
            for _ in 0..t {
                acc = acc.mul(self).expect("same ring");
            }
            return acc;
        }
        let mut base = self.clone();
        while t > 0 {
            if t & 1 == 1 {
                acc = acc.mul(&base).expect("same ring");
            }
            t >>= 1;
            if t > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        acc
    }

    /// `Σ_h f_h^{p^k} σ^{p^k h}`, which equals `F^{p^k}` in characteristic `p`.
    pub fn frobenius(&self, k: u32) -> Result<ShiftPolynomial> {
        let p = prime_char(&self.ring, "frobenius power")? as u64;
        let scale = p.pow(k) as i64;
        Ok(ShiftPolynomial::from_terms(
            self.ring.clone(),
            self.dims,
            self.terms.iter().map(|(h, c)| {
                let h: Coord = h.iter().map(|x| x * scale).collect();
                (h, self.ring.frobenius(*c, p, k))
            }),
        ))
    }

    /// `F^t` through the base-`p` digits of `t`:
    /// `F^t = Π_i Frob^i(F^{d_i})`. Falls back to [`pow`](Self::pow) when the
    /// characteristic is not prime.
    pub fn pow_lucas(&self, t: u64) -> ShiftPolynomial {
        let Some(p) = self.ring.prime_characteristic() else {
            return self.pow(t);
        };
        let p = p as u64;
        let mut acc = ShiftPolynomial::one(self.ring.clone(), self.dims);
        let (mut rest, mut i) = (t, 0u32);
        while rest > 0 {
            let d = rest % p;
            if d > 0 {
                let digit = self.pow(d).frobenius(i).expect("prime characteristic");
                acc = acc.mul(&digit).expect("same ring");
            }
            rest /= p;
            i += 1;
        }
        acc
    }

    /// Evaluates `Σ_h f_h c_{m+h}`. Exact mode keeps the sites whose whole
    /// stencil lies in the window; torus mode wraps.
    pub fn apply(&self, c: &WindowConfig) -> Result<WindowConfig> {
        let plan = ApplyPlan::new(self, c.window(), c.mode())?;
        if c.ring() != &self.ring {
            return Err(Error::RingMismatch {
                left: self.ring.to_string(),
                right: c.ring().to_string(),
            });
        }
        Ok(plan.apply(c))
    }

    /// `t`-fold naive iteration of `apply`.
    pub fn iterate(&self, c: &WindowConfig, t: u64) -> Result<WindowConfig> {
        if c.mode() == Mode::Torus {
            let plan = ApplyPlan::new(self, c.window(), Mode::Torus)?;
            let mut cur = c.clone();
            for _ in 0..t {
                cur = plan.apply(&cur);
            }
            return Ok(cur);
        }
        let mut cur = c.clone();
        for _ in 0..t {
            cur = self.apply(&cur)?;
        }
        Ok(cur)
    }
}

impl fmt::Display for ShiftPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(h, c)| {
                let h: Vec<String> = h.iter().map(|x| x.to_string()).collect();
                format!("{c}·σ^({})", h.join(","))
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

pub(crate) fn prime_char(ring: &Ring, op: &'static str) -> Result<u32> {
    ring.prime_characteristic().ok_or(Error::UnsupportedCharacteristic {
        op,
        characteristic: ring.characteristic(),
    })
}

/// `Σ_h φ_h^{p^k} σ^{p^k h}`, computed term by term.
pub fn frobenius_power(rule: &LocalRule, k: u32) -> Result<ShiftPolynomial> {
    rule.to_poly().frobenius(k)
}

/// Precomputed gather tables for evaluating a polynomial on a fixed window.
#[derive(Clone, Debug)]
pub struct ApplyPlan {
    ring: Ring,
    out_window: WindowSpec,
    in_volume: usize,
    mode: Mode,
    coeffs: Vec<Elem>,
    /// `sources[t][i]` is the input site read by term `t` at output site `i`.
    sources: Vec<Vec<u32>>,
}

const PAR_THRESHOLD: usize = 1 << 14;

impl ApplyPlan {
    pub fn new(poly: &ShiftPolynomial, window: &WindowSpec, mode: Mode) -> Result<Self> {
        ApplyPlan::with_output(poly, window, mode, None)
    }

    /// Like [`new`](Self::new) but with a prescribed output window, which must
    /// keep every stencil inside `window` in exact mode.
    pub fn with_output(
        poly: &ShiftPolynomial,
        window: &WindowSpec,
        mode: Mode,
        out_window: Option<&WindowSpec>,
    ) -> Result<Self> {
        if window.dims() != poly.dims {
            return Err(Error::InvalidParameter(format!(
                "polynomial over dims {:?} applied to a window over dims {:?}",
                poly.dims,
                window.dims()
            )));
        }
        let out_window = match (out_window, mode) {
            (Some(w), _) => w.clone(),
            (None, Mode::Torus) => window.clone(),
            (None, Mode::Exact) => {
                let (lo, hi) = poly.hull();
                window.shrink(&lo, &hi)?
            }
        };
        if mode == Mode::Exact {
            let (lo, hi) = poly.hull();
            let (olo, ohi) = (out_window.origin(), out_window.extents());
            let fits = (0..window.axes()).all(|a| {
                olo[a] + lo[a] >= window.origin()[a]
                    && olo[a] + ohi[a] as i64 - 1 + hi[a] < window.origin()[a] + window.extents()[a] as i64
            });
            if !poly.is_empty() && !fits {
                return Err(Error::OutOfWindow {
                    inner: out_window.to_string(),
                    outer: window.to_string(),
                });
            }
        }
        let sources = poly
            .terms
            .keys()
            .map(|h| {
                out_window
                    .coords()
                    .map(|m| {
                        let src = add_coords(&m, h);
                        match mode {
                            Mode::Torus => window.wrapped_index(&src) as u32,
                            Mode::Exact => window.index_of(&src).expect("stencil inside window") as u32,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(ApplyPlan {
            ring: poly.ring.clone(),
            out_window,
            in_volume: window.volume(),
            mode,
            coeffs: poly.terms.values().copied().collect(),
            sources,
        })
    }

    pub fn out_window(&self) -> &WindowSpec {
        &self.out_window
    }

    /// Applies to raw site-major values with `rank` components per site.
    pub fn apply_values(&self, input: &[Elem], rank: usize) -> Vec<Elem> {
        debug_assert_eq!(input.len(), self.in_volume * rank);
        let n = self.out_window.volume();
        let mut out = vec![0 as Elem; n * rank];
        let site = |i: usize, dst: &mut [Elem]| {
            if let Some(m) = self.ring.zmod_modulus() {
                for (c, d) in dst.iter_mut().enumerate() {
                    let mut acc = 0u64;
                    for (t, src) in self.sources.iter().enumerate() {
                        acc += self.coeffs[t] as u64 * input[src[i] as usize * rank + c] as u64;
                    }
                    *d = (acc % m as u64) as Elem;
                }
            } else {
                for (c, d) in dst.iter_mut().enumerate() {
                    let mut acc = 0;
                    for (t, src) in self.sources.iter().enumerate() {
                        let v = input[src[i] as usize * rank + c];
                        acc = self.ring.add(acc, self.ring.mul(self.coeffs[t], v));
                    }
                    *d = acc;
                }
            }
        };
        if n * self.sources.len() >= PAR_THRESHOLD {
            out.par_chunks_mut(rank).enumerate().for_each(|(i, dst)| site(i, dst));
        } else {
            out.chunks_mut(rank).enumerate().for_each(|(i, dst)| site(i, dst));
        }
        out
    }

    pub fn apply(&self, c: &WindowConfig) -> WindowConfig {
        let values = self.apply_values(c.values(), c.rank());
        WindowConfig::from_raw(self.out_window.clone(), c.module().clone(), self.mode, values)
    }
}

/// Offsets as a coordinate list, for building rules in code.
pub fn coord(xs: &[i64]) -> Coord {
    SmallVec::from_slice(xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly1(ring: &Ring, terms: &[(i64, Elem)]) -> ShiftPolynomial {
        ShiftPolynomial::from_terms(ring.clone(), (1, 0), terms.iter().map(|&(h, c)| (coord(&[h]), c)))
    }

    #[test]
    fn binomial_squares() {
        let z2 = Ring::zmod(2).unwrap();
        let f = poly1(&z2, &[(0, 1), (1, 1)]);
        assert_eq!(f.mul(&f).unwrap(), poly1(&z2, &[(0, 1), (2, 1)]));
        assert_eq!(f.pow(3), poly1(&z2, &[(0, 1), (1, 1), (2, 1), (3, 1)]));
        assert_eq!(f.pow(4), poly1(&z2, &[(0, 1), (4, 1)]));
        let z3 = Ring::zmod(3).unwrap();
        let g = poly1(&z3, &[(0, 1), (1, 1)]);
        assert_eq!(g.mul(&g).unwrap(), poly1(&z3, &[(0, 1), (1, 2), (2, 1)]));
    }

    #[test]
    fn frobenius_examples() {
        let z2 = Ring::zmod(2).unwrap();
        let r = LocalRule::scalar(z2.clone(), (1, 0), &[(&[0], 1), (&[1], 1)]).unwrap();
        assert_eq!(frobenius_power(&r, 1).unwrap(), poly1(&z2, &[(0, 1), (2, 1)]));
        let z3 = Ring::zmod(3).unwrap();
        let r = LocalRule::scalar(z3.clone(), (1, 0), &[(&[0], 1), (&[1], 2)]).unwrap();
        let f = frobenius_power(&r, 1).unwrap();
        assert_eq!(f, poly1(&z3, &[(0, 1), (3, 2)]));
        assert_eq!(f, r.to_poly().pow(3));
    }

    #[test]
    fn rule_text_round_trip() {
        let text = "rule ring=prod:[zmod:2;zmod:3] rank=2 dims=1,1 H=(-1,0):1;(0,2):5";
        let r = LocalRule::parse(text).unwrap();
        assert_eq!(r.to_string(), text);
        let k = LocalRule::parse_kernel("kernel ring=zmod:2 rank=1 H=(0):1;(1):1").unwrap();
        assert_eq!(k.dims(), (1, 0));
        assert!(LocalRule::parse("rule ring=zmod:2 H=(0,-1):1 dims=1,1").is_err());
        match LocalRule::parse("rule ring=zmod:2 rank=1 H=(0):1;(1):x") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 33),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_coefficient_rejected() {
        let z2 = Ring::zmod(2).unwrap();
        assert!(LocalRule::scalar(z2, (1, 0), &[(&[0], 0)]).is_err());
    }

    #[test]
    fn lucas_matches_square_and_multiply() {
        let f4 = Ring::gf(2, 2).unwrap();
        let f = ShiftPolynomial::from_terms(
            f4,
            (1, 1),
            [(coord(&[0, 0]), 2), (coord(&[1, 0]), 3), (coord(&[-1, 1]), 1)],
        );
        for t in [0, 1, 2, 3, 5, 8, 13] {
            assert_eq!(f.pow_lucas(t), f.pow(t), "t = {t}");
        }
    }
}
