//! Finite commutative rings with canonical integer element codes, free
//! modules `R^n` over them, and the coefficient-derived invariants of a
//! linear rule (the stabilised generated subring and the set of recurrent
//! `Σ φ_h^{p^k} − 1` values).
//!
//! Element codes:
//! * `zmod:m`: the residue `0..m`.
//! * `gf:p:k:c0,…,ck`: a polynomial of degree `< k` over `Z/p`, encoded by
//!   its coefficients as base-`p` digits, constant term least significant.
//! * `prod:[R1;…;RJ]`: a mixed-radix tuple code with the first factor least
//!   significant.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Canonical code of a ring element.
pub type Elem = u32;

/// Upper bound on the number of ring elements.
pub const MAX_RING_SIZE: u64 = 1 << 16;

/// Upper bound on the number of module elements.
pub const MAX_MODULE_SIZE: u64 = 1 << 48;

/// Textual description of a ring, as used in rule, config and file headers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RingDescriptor {
    Zmod(u32),
    Gf { p: u32, k: u32, modulus: Vec<u32> },
    Product(Vec<RingDescriptor>),
}

/// Bundled irreducible moduli (Conway polynomials) for small fields.
pub fn default_modulus(p: u32, k: u32) -> Option<Vec<u32>> {
    let coeffs: &[u32] = match (p, k) {
        (2, 1) => &[1, 1],
        (2, 2) => &[1, 1, 1],
        (2, 3) => &[1, 1, 0, 1],
        (2, 4) => &[1, 1, 0, 0, 1],
        (3, 1) => &[1, 1],
        (3, 2) => &[2, 2, 1],
        (3, 3) => &[1, 2, 0, 1],
        (3, 4) => &[2, 0, 0, 2, 1],
        (5, 1) => &[3, 1],
        (5, 2) => &[2, 4, 1],
        (5, 3) => &[3, 3, 0, 1],
        (5, 4) => &[2, 4, 4, 0, 1],
        _ => return None,
    };
    Some(coeffs.to_vec())
}

impl RingDescriptor {
    pub fn zmod(m: u32) -> Self {
        RingDescriptor::Zmod(m)
    }

    /// `gf(p, k)` with the bundled default modulus.
    pub fn gf(p: u32, k: u32) -> Result<Self> {
        let modulus = default_modulus(p, k).ok_or_else(|| {
            Error::InvalidParameter(format!("no bundled modulus for gf({p},{k}); give one explicitly"))
        })?;
        Ok(RingDescriptor::Gf { p, k, modulus })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parser = DescParser {
            s: text.as_bytes(),
            pos: 0,
        };
        let desc = parser.descriptor()?;
        if parser.pos != parser.s.len() {
            return Err(parser.error("trailing characters after ring descriptor"));
        }
        Ok(desc)
    }
}

impl FromStr for RingDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RingDescriptor::parse(s)
    }
}

impl fmt::Display for RingDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingDescriptor::Zmod(m) => write!(f, "zmod:{m}"),
            RingDescriptor::Gf { p, k, modulus } => {
                write!(f, "gf:{p}:{k}:")?;
                for (i, c) in modulus.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            RingDescriptor::Product(parts) => {
                f.write_str("prod:[")?;
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{part}")?;
                }
                f.write_str("]")
            }
        }
    }
}

struct DescParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl DescParser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::parse("ring descriptor", 1, self.pos + 1, message)
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.s[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{lit}`")))
        }
    }

    fn number(&mut self) -> Result<u32> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a decimal integer"));
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
        text.parse::<u32>().map_err(|_| {
            Error::parse("ring descriptor", 1, start + 1, "integer out of range")
        })
    }

    fn descriptor(&mut self) -> Result<RingDescriptor> {
        if self.eat("zmod:") {
            Ok(RingDescriptor::Zmod(self.number()?))
        } else if self.eat("gf:") {
            let p = self.number()?;
            self.expect(":")?;
            let k = self.number()?;
            if self.eat(":") {
                let mut modulus = vec![self.number()?];
                while self.eat(",") {
                    modulus.push(self.number()?);
                }
                Ok(RingDescriptor::Gf { p, k, modulus })
            } else {
                let at = self.pos;
                default_modulus(p, k)
                    .map(|modulus| RingDescriptor::Gf { p, k, modulus })
                    .ok_or_else(|| {
                        Error::parse(
                            "ring descriptor",
                            1,
                            at + 1,
                            format!("no bundled modulus for gf:{p}:{k}; list coefficients c0,…,c{k}"),
                        )
                    })
            }
        } else if self.eat("prod:[") {
            let mut parts = vec![self.descriptor()?];
            while self.eat(";") {
                parts.push(self.descriptor()?);
            }
            self.expect("]")?;
            Ok(RingDescriptor::Product(parts))
        } else {
            Err(self.error("expected `zmod:`, `gf:` or `prod:[`"))
        }
    }
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Prime factorisation by trial division, ascending primes.
pub(crate) fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            let mut e = 0;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn poly_to_string(coeffs: &[u32]) -> String {
    let mut terms = Vec::new();
    for (i, &c) in coeffs.iter().enumerate().rev() {
        if c == 0 {
            continue;
        }
        let mono = match i {
            0 => String::new(),
            1 => "x".to_string(),
            _ => format!("x^{i}"),
        };
        terms.push(match (c, i) {
            (_, 0) => c.to_string(),
            (1, _) => mono,
            _ => format!("{c}{mono}"),
        });
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join("+")
    }
}

/// Remainder of `a` by the monic polynomial `b` over `Z/p`.
fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - db;
        if lead != 0 {
            for (i, &bc) in b.iter().enumerate() {
                let t = (lead as u64 * bc as u64 % p as u64) as u32;
                r[shift + i] = (r[shift + i] + p - t) % p;
            }
        }
        r.pop();
    }
    r
}

struct GfTables {
    p: u32,
    k: u32,
    log: Vec<u32>,
    exp: Vec<u32>,
}

impl GfTables {
    fn build(p: u32, k: u32, modulus: &[u32]) -> Self {
        let size = p.pow(k);
        let to_digits = |mut x: u32| -> Vec<u32> {
            (0..k)
                .map(|_| {
                    let d = x % p;
                    x /= p;
                    d
                })
                .collect()
        };
        let from_digits = |d: &[u32]| -> u32 { d.iter().rev().fold(0, |acc, &c| acc * p + c) };
        let mulmod = |a: u32, b: u32| -> u32 {
            let (da, db) = (to_digits(a), to_digits(b));
            let mut prod = vec![0u32; 2 * k as usize - 1];
            for (i, &x) in da.iter().enumerate() {
                for (j, &y) in db.iter().enumerate() {
                    prod[i + j] = ((prod[i + j] as u64 + x as u64 * y as u64) % p as u64) as u32;
                }
            }
            let mut r = poly_rem(&prod, modulus, p);
            r.resize(k as usize, 0);
            from_digits(&r)
        };
        let order = size - 1;
        let mut exp = Vec::with_capacity(order as usize);
        for g in 1..size {
            exp.clear();
            let mut x = 1u32;
            loop {
                exp.push(x);
                x = mulmod(x, g);
                if x == 1 || exp.len() > order as usize {
                    break;
                }
            }
            if exp.len() == order as usize {
                break;
            }
        }
        debug_assert_eq!(exp.len(), order as usize);
        let mut log = vec![0u32; size as usize];
        for (i, &x) in exp.iter().enumerate() {
            log[x as usize] = i as u32;
        }
        GfTables { p, k, log, exp }
    }

    #[inline]
    fn add(&self, mut a: u32, mut b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        let (mut out, mut place) = (0, 1);
        for _ in 0..self.k {
            out += ((a % self.p + b % self.p) % self.p) * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    #[inline]
    fn neg(&self, mut a: u32) -> u32 {
        if self.p == 2 {
            return a;
        }
        let (mut out, mut place) = (0, 1);
        for _ in 0..self.k {
            out += ((self.p - a % self.p) % self.p) * place;
            a /= self.p;
            place *= self.p;
        }
        out
    }

    #[inline]
    fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let n = self.exp.len();
        self.exp[(self.log[a as usize] as usize + self.log[b as usize] as usize) % n]
    }

    fn inv(&self, a: u32) -> u32 {
        let n = self.exp.len();
        self.exp[(n - self.log[a as usize] as usize) % n]
    }
}

enum Arith {
    Zmod(u32),
    Gf(GfTables),
    Product { factors: Vec<Ring>, radices: Vec<u32> },
}

struct RingInner {
    desc: RingDescriptor,
    size: u32,
    characteristic: u64,
    arith: Arith,
}

/// A finite commutative ring with unity. Cheap to clone; immutable.
#[derive(Clone)]
pub struct Ring(Arc<RingInner>);

/// Borrowed view of how a ring is built.
#[derive(Clone, Copy, Debug)]
pub enum RingKind<'a> {
    Zmod(u32),
    Gf { p: u32, k: u32 },
    Product(&'a [Ring]),
}

impl PartialEq for Ring {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.desc == other.0.desc
    }
}

impl Eq for Ring {}

impl std::hash::Hash for Ring {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.desc.hash(state)
    }
}

impl fmt::Debug for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring({})", self.0.desc)
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.desc.fmt(f)
    }
}

impl FromStr for Ring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ring::parse(s)
    }
}

impl Ring {
    /// Builds a ring from its descriptor, verifying every precondition.
    pub fn new(desc: &RingDescriptor) -> Result<Ring> {
        let (size, arith) = match desc {
            RingDescriptor::Zmod(m) => {
                if *m < 2 {
                    return Err(Error::InvalidParameter(format!("zmod modulus must be >= 2, got {m}")));
                }
                if *m as u64 > MAX_RING_SIZE {
                    return Err(Error::InvalidParameter(format!(
                        "zmod modulus {m} exceeds {MAX_RING_SIZE}"
                    )));
                }
                (*m, Arith::Zmod(*m))
            }
            RingDescriptor::Gf { p, k, modulus } => {
                let (p, k) = (*p, *k);
                if !is_prime(p as u64) {
                    return Err(Error::InvalidParameter(format!("gf characteristic {p} is not prime")));
                }
                if k == 0 {
                    return Err(Error::InvalidParameter("gf degree must be >= 1".into()));
                }
                let size = (p as u64).checked_pow(k).filter(|&s| s <= MAX_RING_SIZE).ok_or_else(|| {
                    Error::InvalidParameter(format!("gf({p},{k}) has more than {MAX_RING_SIZE} elements"))
                })? as u32;
                if modulus.len() != k as usize + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "gf modulus needs {} coefficients, got {}",
                        k + 1,
                        modulus.len()
                    )));
                }
                if let Some(c) = modulus.iter().find(|&&c| c >= p) {
                    return Err(Error::InvalidParameter(format!("modulus coefficient {c} not reduced mod {p}")));
                }
                if modulus[k as usize] != 1 {
                    return Err(Error::InvalidParameter("gf modulus must be monic".into()));
                }
                if let Some(factor) = find_factor(modulus, p) {
                    return Err(Error::ReducibleModulus {
                        modulus: poly_to_string(modulus),
                        factor: poly_to_string(&factor),
                    });
                }
                (size, Arith::Gf(GfTables::build(p, k, modulus)))
            }
            RingDescriptor::Product(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidParameter("product of zero rings".into()));
                }
                let factors = parts.iter().map(Ring::new).collect::<Result<Vec<_>>>()?;
                let mut size = 1u64;
                for f in &factors {
                    size *= f.size() as u64;
                    if size > MAX_RING_SIZE {
                        return Err(Error::InvalidParameter(format!(
                            "product ring has more than {MAX_RING_SIZE} elements"
                        )));
                    }
                }
                let radices = factors.iter().map(|f| f.size()).collect();
                (size as u32, Arith::Product { factors, radices })
            }
        };
        let mut ring = Ring(Arc::new(RingInner {
            desc: desc.clone(),
            size,
            characteristic: 0,
            arith,
        }));
        let one = ring.one();
        let (mut acc, mut characteristic) = (one, 1u64);
        while acc != 0 {
            acc = ring.add(acc, one);
            characteristic += 1;
        }
        Arc::get_mut(&mut ring.0).expect("sole owner").characteristic = characteristic;
        Ok(ring)
    }

    pub fn parse(text: &str) -> Result<Ring> {
        Ring::new(&RingDescriptor::parse(text)?)
    }

    pub fn zmod(m: u32) -> Result<Ring> {
        Ring::new(&RingDescriptor::Zmod(m))
    }

    /// `gf(p, k)` using the bundled default modulus.
    pub fn gf(p: u32, k: u32) -> Result<Ring> {
        Ring::new(&RingDescriptor::gf(p, k)?)
    }

    pub fn product(factors: &[Ring]) -> Result<Ring> {
        Ring::new(&RingDescriptor::Product(factors.iter().map(|f| f.descriptor().clone()).collect()))
    }

    pub fn descriptor(&self) -> &RingDescriptor {
        &self.0.desc
    }

    pub fn kind(&self) -> RingKind<'_> {
        match &self.0.arith {
            Arith::Zmod(m) => RingKind::Zmod(*m),
            Arith::Gf(g) => RingKind::Gf { p: g.p, k: g.k },
            Arith::Product { factors, .. } => RingKind::Product(factors),
        }
    }

    pub fn size(&self) -> u32 {
        self.0.size
    }

    pub fn elements(&self) -> std::ops::Range<Elem> {
        0..self.0.size
    }

    pub fn contains(&self, x: Elem) -> bool {
        x < self.0.size
    }

    pub fn zero(&self) -> Elem {
        0
    }

    pub fn one(&self) -> Elem {
        match &self.0.arith {
            Arith::Zmod(_) | Arith::Gf(_) => 1,
            Arith::Product { factors, radices } => {
                let ones: SmallVec<[Elem; 4]> = factors.iter().map(|f| f.one()).collect();
                join_code(&ones, radices)
            }
        }
    }

    /// Smallest `c > 0` with `c·1 = 0`.
    pub fn characteristic(&self) -> u64 {
        self.0.characteristic
    }

    pub fn prime_characteristic(&self) -> Option<u32> {
        let c = self.characteristic();
        is_prime(c).then_some(c as u32)
    }

    pub fn zmod_modulus(&self) -> Option<u32> {
        match &self.0.arith {
            Arith::Zmod(m) => Some(*m),
            _ => None,
        }
    }

    pub fn is_field(&self) -> bool {
        match &self.0.arith {
            Arith::Zmod(m) => is_prime(*m as u64),
            Arith::Gf(_) => true,
            Arith::Product { factors, .. } => factors.len() == 1 && factors[0].is_field(),
        }
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        match &self.0.arith {
            Arith::Zmod(m) => ((a as u64 + b as u64) % *m as u64) as Elem,
            Arith::Gf(g) => g.add(a, b),
            Arith::Product { factors, radices } => zip_code(a, b, factors, radices, |r, x, y| r.add(x, y)),
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        match &self.0.arith {
            Arith::Zmod(m) => (*m - a) % *m,
            Arith::Gf(g) => g.neg(a),
            Arith::Product { factors, radices } => zip_code(a, 0, factors, radices, |r, x, _| r.neg(x)),
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        match &self.0.arith {
            Arith::Zmod(m) => (a as u64 * b as u64 % *m as u64) as Elem,
            Arith::Gf(g) => g.mul(a, b),
            Arith::Product { factors, radices } => zip_code(a, b, factors, radices, |r, x, y| r.mul(x, y)),
        }
    }

    pub fn pow(&self, x: Elem, mut e: u64) -> Elem {
        let (mut base, mut acc) = (x, self.one());
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `x^(p^k)` by `k` successive `p`-th powers.
    pub fn frobenius(&self, x: Elem, p: u64, k: u32) -> Elem {
        (0..k).fold(x, |acc, _| self.pow(acc, p))
    }

    /// `n·x` for an integer `n`.
    pub fn int_mul(&self, n: i64, x: Elem) -> Elem {
        let mut k = n.unsigned_abs() % self.characteristic();
        let (mut base, mut acc) = (x, 0);
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(acc, base);
            }
            base = self.add(base, base);
            k >>= 1;
        }
        if n < 0 {
            self.neg(acc)
        } else {
            acc
        }
    }

    pub fn from_int(&self, n: i64) -> Elem {
        self.int_mul(n, self.one())
    }

    /// Returns the inverse when `x` is a unit.
    pub fn inverse(&self, x: Elem) -> Option<Elem> {
        match &self.0.arith {
            Arith::Zmod(m) => {
                use num_integer::Integer;
                let g = (x as i64).extended_gcd(&(*m as i64));
                (g.gcd == 1).then(|| g.x.rem_euclid(*m as i64) as Elem)
            }
            Arith::Gf(g) => (x != 0).then(|| g.inv(x)),
            Arith::Product { factors, radices } => {
                let parts = split_code(x, radices);
                let inv = factors
                    .iter()
                    .zip(parts.iter())
                    .map(|(f, &c)| f.inverse(c))
                    .collect::<Option<SmallVec<[Elem; 4]>>>()?;
                Some(join_code(&inv, radices))
            }
        }
    }

    pub fn is_unit(&self, x: Elem) -> bool {
        self.inverse(x).is_some()
    }

    /// Factor codes of a product-ring element (a single code otherwise).
    pub fn split_product(&self, x: Elem) -> SmallVec<[Elem; 4]> {
        match &self.0.arith {
            Arith::Product { radices, .. } => split_code(x, radices),
            _ => smallvec::smallvec![x],
        }
    }

    pub fn join_product(&self, parts: &[Elem]) -> Elem {
        match &self.0.arith {
            Arith::Product { radices, .. } => join_code(parts, radices),
            _ => parts[0],
        }
    }

    /// Absolute trace to the prime field, returned as an integer `0..p`.
    /// Only defined for `zmod(p)` and `gf(p,k)`.
    pub fn trace(&self, x: Elem) -> Option<u32> {
        match &self.0.arith {
            Arith::Zmod(m) if is_prime(*m as u64) => Some(x),
            Arith::Gf(g) => {
                let mut acc = 0;
                let mut y = x;
                for _ in 0..g.k {
                    acc = g.add(acc, y);
                    y = self.pow(y, g.p as u64);
                }
                debug_assert!(acc < g.p, "trace lies in the prime field");
                Some(acc)
            }
            _ => None,
        }
    }

    /// A generating set of the additive group.
    pub fn additive_generators(&self) -> Vec<Elem> {
        match &self.0.arith {
            Arith::Zmod(_) => vec![1],
            Arith::Gf(g) => (0..g.k).map(|e| g.p.pow(e)).collect(),
            Arith::Product { factors, radices } => {
                let mut out = Vec::new();
                for (i, f) in factors.iter().enumerate() {
                    for gen in f.additive_generators() {
                        let mut parts: SmallVec<[Elem; 4]> = smallvec::smallvec![0; factors.len()];
                        parts[i] = gen;
                        out.push(join_code(&parts, radices));
                    }
                }
                out
            }
        }
    }
}

fn find_factor(modulus: &[u32], p: u32) -> Option<Vec<u32>> {
    let k = modulus.len() - 1;
    for d in 1..=k / 2 {
        for low in 0..p.pow(d as u32) {
            let mut f: Vec<u32> = Vec::with_capacity(d + 1);
            let mut x = low;
            for _ in 0..d {
                f.push(x % p);
                x /= p;
            }
            f.push(1);
            if poly_rem(modulus, &f, p).iter().all(|&c| c == 0) {
                return Some(f);
            }
        }
    }
    None
}

#[inline]
fn split_code(mut x: Elem, radices: &[u32]) -> SmallVec<[Elem; 4]> {
    radices
        .iter()
        .map(|&r| {
            let d = x % r;
            x /= r;
            d
        })
        .collect()
}

#[inline]
fn join_code(parts: &[Elem], radices: &[u32]) -> Elem {
    parts.iter().zip(radices).rev().fold(0, |acc, (&d, &r)| acc * r + d)
}

#[inline]
fn zip_code(a: Elem, b: Elem, factors: &[Ring], radices: &[u32], op: impl Fn(&Ring, Elem, Elem) -> Elem) -> Elem {
    let (mut a, mut b) = (a, b);
    let (mut out, mut place) = (0, 1);
    for (f, &r) in factors.iter().zip(radices) {
        out += op(f, a % r, b % r) * place;
        a /= r;
        b /= r;
        place *= r;
    }
    out
}

/// The free module `R^n` with componentwise action. Module element codes are
/// mixed radix with component 0 least significant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModuleSpec {
    ring: Ring,
    rank: usize,
}

impl ModuleSpec {
    pub fn new(ring: Ring, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidParameter("module rank must be >= 1".into()));
        }
        let size = (ring.size() as u64).checked_pow(rank as u32);
        if size.is_none_or(|s| s > MAX_MODULE_SIZE) {
            return Err(Error::InvalidParameter(format!(
                "module {}^{rank} has more than {MAX_MODULE_SIZE} elements",
                ring
            )));
        }
        Ok(ModuleSpec { ring, rank })
    }

    /// `R^1`.
    pub fn scalar(ring: Ring) -> Self {
        ModuleSpec { ring, rank: 1 }
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> u64 {
        (self.ring.size() as u64).pow(self.rank as u32)
    }

    pub fn encode(&self, comps: &[Elem]) -> u64 {
        debug_assert_eq!(comps.len(), self.rank);
        let q = self.ring.size() as u64;
        comps.iter().rev().fold(0, |acc, &c| acc * q + c as u64)
    }

    pub fn decode(&self, mut code: u64) -> SmallVec<[Elem; 4]> {
        let q = self.ring.size() as u64;
        (0..self.rank)
            .map(|_| {
                let d = code % q;
                code /= q;
                d as Elem
            })
            .collect()
    }
}

/// The subring-without-forced-unity generated by `gens`: the smallest
/// subset containing `gens` that is closed under `+` and `·`.
pub fn subring_closure(ring: &Ring, gens: &[Elem]) -> BTreeSet<Elem> {
    let mut member = vec![false; ring.size() as usize];
    let mut list: Vec<Elem> = Vec::new();
    let mut insert = |x: Elem, list: &mut Vec<Elem>| {
        if !member[x as usize] {
            member[x as usize] = true;
            list.push(x);
        }
    };
    for &g in gens {
        insert(g, &mut list);
    }
    let mut i = 0;
    while i < list.len() {
        let x = list[i];
        for j in 0..=i {
            let y = list[j];
            insert(ring.add(x, y), &mut list);
            insert(ring.mul(x, y), &mut list);
        }
        i += 1;
    }
    list.into_iter().collect()
}

/// The descending chain `R_0 ⊇ R_1 ⊇ …` of subrings generated by the
/// `p^j`-th coefficient powers, truncated at the first repeat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubringChain {
    pub chain: Vec<BTreeSet<Elem>>,
    /// First index `J` with `R_J = R_{J+1}`.
    pub stable_index: usize,
}

impl SubringChain {
    pub fn stable(&self) -> &BTreeSet<Elem> {
        &self.chain[self.stable_index]
    }
}

fn check_prime_char(ring: &Ring, coeffs: &[Elem], p: u32, op: &'static str) -> Result<()> {
    let c = ring.characteristic();
    if !is_prime(c) {
        return Err(Error::UnsupportedCharacteristic { op, characteristic: c });
    }
    if c != p as u64 {
        return Err(Error::InvalidParameter(format!("p = {p} differs from the characteristic {c}")));
    }
    if coeffs.is_empty() || coeffs.iter().any(|&x| x == 0 || !ring.contains(x)) {
        return Err(Error::InvalidParameter("coefficients must be nonzero ring elements".into()));
    }
    Ok(())
}

/// Stabilised subring generated by `{φ_h^{p^j}}`.
pub fn compute_r_phi(ring: &Ring, coeffs: &[Elem], p: u32) -> Result<SubringChain> {
    check_prime_char(ring, coeffs, p, "coefficient subring")?;
    let mut powers = coeffs.to_vec();
    let mut chain = vec![subring_closure(ring, &powers)];
    loop {
        for x in powers.iter_mut() {
            *x = ring.pow(*x, p as u64);
        }
        let next = subring_closure(ring, &powers);
        let last = chain.last().unwrap();
        assert!(next.is_subset(last), "subring chain must descend");
        if &next == last {
            let stable_index = chain.len() - 1;
            return Ok(SubringChain { chain, stable_index });
        }
        chain.push(next);
    }
}

/// Values of `(Σ_h φ_h^{p^k}) − 1` that recur infinitely often in `k ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrentValues {
    pub values: BTreeSet<Elem>,
    /// Number of initial `k` values (starting from `k = 1`) outside the cycle.
    pub preperiod: usize,
    pub period: usize,
}

pub fn compute_f_phi(ring: &Ring, coeffs: &[Elem], p: u32) -> Result<RecurrentValues> {
    check_prime_char(ring, coeffs, p, "recurrent phibar values")?;
    let step = |v: &[Elem]| -> Vec<Elem> { v.iter().map(|&x| ring.pow(x, p as u64)).collect() };
    let phibar = |v: &[Elem]| -> Elem {
        let sum = v.iter().fold(0, |acc, &x| ring.add(acc, x));
        ring.sub(sum, ring.one())
    };
    let mut seen: HashMap<Vec<Elem>, usize> = HashMap::new();
    let mut states: Vec<Vec<Elem>> = Vec::new();
    let mut state = step(coeffs);
    loop {
        if let Some(&first) = seen.get(&state) {
            let values = states[first..].iter().map(|s| phibar(s)).collect();
            return Ok(RecurrentValues {
                values,
                preperiod: first,
                period: states.len() - first,
            });
        }
        seen.insert(state.clone(), states.len());
        let next = step(&state);
        states.push(std::mem::replace(&mut state, next));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_round_trip() {
        for text in ["zmod:6", "gf:2:2:1,1,1", "prod:[zmod:2;gf:3:2:2,2,1]", "prod:[prod:[zmod:2;zmod:3];zmod:5]"] {
            let d = RingDescriptor::parse(text).unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert_eq!(RingDescriptor::parse("gf:2:2").unwrap().to_string(), "gf:2:2:1,1,1");
    }

    #[test]
    fn descriptor_errors_carry_columns() {
        match RingDescriptor::parse("prod:[zmod:2;zmd:3]") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 14),
            other => panic!("unexpected {other:?}"),
        }
        assert!(RingDescriptor::parse("gf:7:9").is_err());
        assert!(RingDescriptor::parse("zmod:6x").is_err());
    }

    #[test]
    fn zmod_basics() {
        let z2 = Ring::zmod(2).unwrap();
        assert_eq!(z2.add(1, 1), 0);
        let z6 = Ring::zmod(6).unwrap();
        assert_eq!(z6.size(), 6);
        assert_eq!(z6.characteristic(), 6);
        assert_eq!(z6.inverse(5), Some(5));
        assert!(!z6.is_unit(2));
        assert!(matches!(Ring::zmod(1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn gf4_unit_group_is_cyclic_of_order_three() {
        let f = Ring::parse("gf:2:2:1,1,1").unwrap();
        assert_eq!(f.size(), 4);
        let orders: Vec<usize> = (1..4)
            .map(|g| (1..=3).find(|&e| f.pow(g, e as u64) == 1).unwrap())
            .collect();
        assert_eq!(orders, vec![1, 3, 3]);
        assert!((1..4).all(|x| f.is_unit(x)));
        assert_eq!(f.characteristic(), 2);
    }

    #[test]
    fn reducible_modulus_names_factor() {
        // x^2 + 1 = (x + 1)^2 over Z/2
        match Ring::parse("gf:2:2:1,0,1") {
            Err(Error::ReducibleModulus { factor, .. }) => assert_eq!(factor, "x+1"),
            other => panic!("unexpected {other:?}"),
        }
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2 over Z/2: no linear factor
        match Ring::parse("gf:2:4:1,0,1,0,1") {
            Err(Error::ReducibleModulus { factor, .. }) => assert_eq!(factor, "x^2+x+1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bundled_moduli_are_irreducible() {
        for p in [2, 3, 5] {
            for k in 1..=4 {
                let r = Ring::gf(p, k).unwrap();
                assert_eq!(r.characteristic(), p as u64);
                assert!((1..r.size()).all(|x| r.mul(x, r.inverse(x).unwrap()) == 1));
            }
        }
    }

    #[test]
    fn product_characteristic_is_lcm() {
        let r = Ring::parse("prod:[zmod:2;zmod:3]").unwrap();
        assert_eq!(r.characteristic(), 6);
        assert_eq!(r.one(), 1 + 2);
    }

    #[test]
    fn trace_of_gf4() {
        let f = Ring::gf(2, 2).unwrap();
        // Tr(x) = x + x^2; Tr(1) = 0, Tr(g) = g + g + 1 = 1
        assert_eq!(f.trace(0), Some(0));
        assert_eq!(f.trace(1), Some(0));
        assert_eq!(f.trace(2), Some(1));
        assert_eq!(f.trace(3), Some(1));
    }

    #[test]
    fn closures() {
        let z5 = Ring::zmod(5).unwrap();
        assert_eq!(subring_closure(&z5, &[1]), (0..5).collect());
        let z6 = Ring::zmod(6).unwrap();
        assert_eq!(subring_closure(&z6, &[2]), [0, 2, 4].into_iter().collect());
        let f4 = Ring::gf(2, 2).unwrap();
        assert_eq!(subring_closure(&f4, &[1]), [0, 1].into_iter().collect());
    }

    #[test]
    fn stable_subrings() {
        let z2 = Ring::zmod(2).unwrap();
        let c = compute_r_phi(&z2, &[1, 1, 1], 2).unwrap();
        assert_eq!(c.stable(), &[0, 1].into_iter().collect());
        let f4 = Ring::gf(2, 2).unwrap();
        let c = compute_r_phi(&f4, &[2, 2], 2).unwrap();
        assert_eq!(c.stable(), &(0..4).collect());
        let z3 = Ring::zmod(3).unwrap();
        let c = compute_r_phi(&z3, &[1, 2], 3).unwrap();
        assert_eq!(c.stable(), &(0..3).collect());
        let z6 = Ring::zmod(6).unwrap();
        assert!(matches!(
            compute_r_phi(&z6, &[1], 6),
            Err(Error::UnsupportedCharacteristic { .. })
        ));
    }

    #[test]
    fn recurrent_values() {
        let z2 = Ring::zmod(2).unwrap();
        assert_eq!(compute_f_phi(&z2, &[1, 1, 1], 2).unwrap().values, [0].into_iter().collect());
        let z3 = Ring::zmod(3).unwrap();
        assert_eq!(compute_f_phi(&z3, &[1, 1], 3).unwrap().values, [1].into_iter().collect());
    }
}
