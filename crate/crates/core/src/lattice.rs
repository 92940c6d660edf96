//! Finite rectangular windows of `M = Z^D × N^E`, module-valued
//! configurations on them, shifts, restriction, and the text file format.
//!
//! Axes are ordered with the `D` integer axes first and the `E` natural axes
//! last. Sites are stored row-major (last axis fastest); each site holds
//! `rank` ring codes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::ring::{Elem, ModuleSpec, Ring, RingDescriptor};

/// A lattice point or offset.
pub type Coord = SmallVec<[i64; 4]>;

/// Evaluation mode of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The domain shrinks so that only fully determined sites are kept.
    Exact,
    /// Every axis wraps around.
    Torus,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Torus => "torus",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "torus" => Ok(Mode::Torus),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}` (expected exact or torus)"))),
        }
    }
}

/// The box `{origin + v : 0 ≤ v < extents}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    dims: (usize, usize),
    origin: Coord,
    extents: SmallVec<[usize; 4]>,
}

impl WindowSpec {
    pub fn new(dims: (usize, usize), origin: &[i64], extents: &[usize]) -> Result<Self> {
        let axes = dims.0 + dims.1;
        if axes == 0 {
            return Err(Error::InvalidParameter("a window needs at least one axis".into()));
        }
        if origin.len() != axes || extents.len() != axes {
            return Err(Error::InvalidParameter(format!(
                "window over {axes} axes needs {axes} origin and extent entries"
            )));
        }
        if extents.contains(&0) {
            return Err(Error::InvalidParameter("window extents must be positive".into()));
        }
        if origin[dims.0..].iter().any(|&o| o < 0) {
            return Err(Error::InvalidParameter("window leaves N^E: natural-axis origin < 0".into()));
        }
        Ok(WindowSpec {
            dims,
            origin: origin.into(),
            extents: extents.into(),
        })
    }

    /// Window anchored at the origin.
    pub fn at_zero(dims: (usize, usize), extents: &[usize]) -> Result<Self> {
        WindowSpec::new(dims, &vec![0; extents.len()], extents)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn axes(&self) -> usize {
        self.extents.len()
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn volume(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_natural_axis(&self, axis: usize) -> bool {
        axis >= self.dims.0
    }

    pub fn contains(&self, m: &[i64]) -> bool {
        self.index_of(m).is_some()
    }

    pub fn index_of(&self, m: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for ((&x, &o), &e) in m.iter().zip(&self.origin).zip(&self.extents) {
            let r = x - o;
            if r < 0 || r >= e as i64 {
                return None;
            }
            idx = idx * e + r as usize;
        }
        Some(idx)
    }

    /// Index of `m` after wrapping every axis into the window.
    pub fn wrapped_index(&self, m: &[i64]) -> usize {
        let mut idx = 0usize;
        for ((&x, &o), &e) in m.iter().zip(&self.origin).zip(&self.extents) {
            idx = idx * e + (x - o).rem_euclid(e as i64) as usize;
        }
        idx
    }

    pub fn coord_of(&self, mut index: usize) -> Coord {
        let mut c: Coord = SmallVec::from_elem(0, self.axes());
        for a in (0..self.axes()).rev() {
            c[a] = self.origin[a] + (index % self.extents[a]) as i64;
            index /= self.extents[a];
        }
        c
    }

    /// All sites in storage order.
    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.volume()).map(|i| self.coord_of(i))
    }

    pub fn contains_window(&self, other: &WindowSpec) -> bool {
        self.axes() == other.axes()
            && (0..self.axes()).all(|a| {
                other.origin[a] >= self.origin[a]
                    && other.origin[a] + other.extents[a] as i64 <= self.origin[a] + self.extents[a] as i64
            })
    }

    pub fn intersect(&self, other: &WindowSpec) -> Option<WindowSpec> {
        if self.dims != other.dims {
            return None;
        }
        let mut origin = Coord::new();
        let mut extents = SmallVec::<[usize; 4]>::new();
        for a in 0..self.axes() {
            let lo = self.origin[a].max(other.origin[a]);
            let hi = (self.origin[a] + self.extents[a] as i64).min(other.origin[a] + other.extents[a] as i64);
            if hi <= lo {
                return None;
            }
            origin.push(lo);
            extents.push((hi - lo) as usize);
        }
        Some(WindowSpec {
            dims: self.dims,
            origin,
            extents,
        })
    }

    /// Smallest window containing both.
    pub fn hull(&self, other: &WindowSpec) -> WindowSpec {
        let mut origin = Coord::new();
        let mut extents = SmallVec::<[usize; 4]>::new();
        for a in 0..self.axes() {
            let lo = self.origin[a].min(other.origin[a]);
            let hi = (self.origin[a] + self.extents[a] as i64).max(other.origin[a] + other.extents[a] as i64);
            origin.push(lo);
            extents.push((hi - lo) as usize);
        }
        WindowSpec {
            dims: self.dims,
            origin,
            extents,
        }
    }

    /// `self + v`; fails if the result leaves `N^E`.
    pub fn translate(&self, v: &[i64]) -> Result<WindowSpec> {
        let origin: Vec<i64> = self.origin.iter().zip(v).map(|(o, d)| o + d).collect();
        WindowSpec::new(self.dims, &origin, &self.extents)
    }

    /// `{m ∈ M : m + [lo, hi] ⊆ self}` for a per-axis offset box `[lo, hi]`.
    pub fn shrink(&self, lo: &[i64], hi: &[i64]) -> Result<WindowSpec> {
        let mut origin = Coord::new();
        let mut extents = SmallVec::<[usize; 4]>::new();
        for a in 0..self.axes() {
            let mut start = self.origin[a] - lo[a];
            let end = self.origin[a] + self.extents[a] as i64 - hi[a];
            if self.is_natural_axis(a) {
                start = start.max(0);
            }
            if end <= start {
                return Err(Error::DomainExhausted(format!(
                    "no site of {self} has its offsets [{lo:?}, {hi:?}] inside the window"
                )));
            }
            origin.push(start);
            extents.push((end - start) as usize);
        }
        Ok(WindowSpec {
            dims: self.dims,
            origin,
            extents,
        })
    }

    /// `self ⊕ [lo, hi]`: every site read when evaluating offsets in `[lo, hi]`
    /// at sites of `self`.
    pub fn expand(&self, lo: &[i64], hi: &[i64]) -> Result<WindowSpec> {
        let origin: Vec<i64> = (0..self.axes()).map(|a| self.origin[a] + lo[a]).collect();
        let extents: Vec<usize> = (0..self.axes())
            .map(|a| (self.extents[a] as i64 + hi[a] - lo[a]) as usize)
            .collect();
        WindowSpec::new(self.dims, &origin, &extents)
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.axes())
            .map(|a| format!("{}..{}", self.origin[a], self.origin[a] + self.extents[a] as i64))
            .collect();
        write!(f, "[{}]", parts.join(" x "))
    }
}

/// Per-axis bounding box `[lo, hi]` of a set of offsets.
pub fn offset_hull<'a>(axes: usize, offsets: impl IntoIterator<Item = &'a Coord>) -> (Coord, Coord) {
    let mut lo: Coord = SmallVec::from_elem(i64::MAX, axes);
    let mut hi: Coord = SmallVec::from_elem(i64::MIN, axes);
    let mut any = false;
    for h in offsets {
        any = true;
        for a in 0..axes {
            lo[a] = lo[a].min(h[a]);
            hi[a] = hi[a].max(h[a]);
        }
    }
    if !any {
        return (SmallVec::from_elem(0, axes), SmallVec::from_elem(0, axes));
    }
    (lo, hi)
}

/// Module values on a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    window: WindowSpec,
    module: ModuleSpec,
    mode: Mode,
    values: Vec<Elem>,
}

impl WindowConfig {
    /// `values` holds `rank` ring codes per site, sites in storage order.
    pub fn new(window: WindowSpec, module: ModuleSpec, mode: Mode, values: Vec<Elem>) -> Result<Self> {
        let expected = window.volume() * module.rank();
        if values.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "config needs {expected} ring values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| !module.ring().contains(v)) {
            return Err(Error::InvalidParameter(format!("value {bad} is not an element of {}", module.ring())));
        }
        Ok(WindowConfig {
            window,
            module,
            mode,
            values,
        })
    }

    pub(crate) fn from_raw(window: WindowSpec, module: ModuleSpec, mode: Mode, values: Vec<Elem>) -> Self {
        debug_assert_eq!(values.len(), window.volume() * module.rank());
        WindowConfig {
            window,
            module,
            mode,
            values,
        }
    }

    pub fn zeros(window: WindowSpec, module: ModuleSpec, mode: Mode) -> Self {
        let n = window.volume() * module.rank();
        WindowConfig::from_raw(window, module, mode, vec![0; n])
    }

    /// Every site holds the module element with components `value`.
    pub fn constant(window: WindowSpec, module: ModuleSpec, mode: Mode, value: &[Elem]) -> Result<Self> {
        if value.len() != module.rank() {
            return Err(Error::InvalidParameter("constant value has the wrong rank".into()));
        }
        let values = value.iter().copied().cycle().take(window.volume() * module.rank()).collect();
        WindowConfig::new(window, module, mode, values)
    }

    /// Builds a config from a per-site function returning `rank` components.
    pub fn from_fn(
        window: WindowSpec,
        module: ModuleSpec,
        mode: Mode,
        mut f: impl FnMut(&[i64]) -> SmallVec<[Elem; 4]>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(window.volume() * module.rank());
        for m in window.coords() {
            values.extend(f(&m));
        }
        WindowConfig::new(window, module, mode, values)
    }

    /// Independent uniform site values.
    pub fn random(window: WindowSpec, module: ModuleSpec, mode: Mode, rng: &mut impl rand::Rng) -> Self {
        let q = module.ring().size();
        let values = (0..window.volume() * module.rank()).map(|_| rng.gen_range(0..q)).collect();
        WindowConfig::from_raw(window, module, mode, values)
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

    pub fn rank(&self) -> usize {
        self.module.rank()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn values(&self) -> &[Elem] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Elem> {
        self.values
    }

    pub fn site(&self, index: usize) -> &[Elem] {
        let r = self.rank();
        &self.values[index * r..(index + 1) * r]
    }

    pub fn get(&self, m: &[i64]) -> Option<&[Elem]> {
        self.window.index_of(m).map(|i| self.site(i))
    }

    pub fn module_code(&self, index: usize) -> u64 {
        self.module.encode(self.site(index))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    fn check_compatible(&self, other: &WindowConfig) -> Result<()> {
        if self.module != other.module {
            return Err(Error::RingMismatch {
                left: format!("{}^{}", self.ring(), self.rank()),
                right: format!("{}^{}", other.ring(), other.rank()),
            });
        }
        if self.window != other.window {
            return Err(Error::WindowMismatch(format!("{} vs {}", self.window, other.window)));
        }
        Ok(())
    }

    pub fn add(&self, other: &WindowConfig) -> Result<WindowConfig> {
        self.check_compatible(other)?;
        let ring = self.ring();
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| ring.add(a, b)).collect();
        Ok(WindowConfig::from_raw(self.window.clone(), self.module.clone(), self.mode, values))
    }

    pub fn sub(&self, other: &WindowConfig) -> Result<WindowConfig> {
        self.check_compatible(other)?;
        let ring = self.ring();
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| ring.sub(a, b)).collect();
        Ok(WindowConfig::from_raw(self.window.clone(), self.module.clone(), self.mode, values))
    }

    /// Scalar action `r · c`.
    pub fn scale(&self, r: Elem) -> WindowConfig {
        let ring = self.ring();
        let values = self.values.iter().map(|&a| ring.mul(r, a)).collect();
        WindowConfig::from_raw(self.window.clone(), self.module.clone(), self.mode, values)
    }

    /// Values on the sites of `window`, read with wrap-around in torus mode.
    /// In exact mode `window` must be contained in the stored window.
    pub(crate) fn read_window(&self, window: &WindowSpec, wrap: bool) -> Result<Vec<Elem>> {
        if !wrap && !self.window.contains_window(window) {
            return Err(Error::OutOfWindow {
                inner: window.to_string(),
                outer: self.window.to_string(),
            });
        }
        let r = self.rank();
        let mut values = Vec::with_capacity(window.volume() * r);
        for m in window.coords() {
            let idx = if wrap {
                self.window.wrapped_index(&m)
            } else {
                self.window.index_of(&m).expect("contained")
            };
            values.extend_from_slice(&self.values[idx * r..(idx + 1) * r]);
        }
        Ok(values)
    }

    /// `σ^v(c)_m = c_{m+v}`.
    pub fn shift(&self, v: &[i64]) -> Result<WindowConfig> {
        if v.len() != self.window.axes() {
            return Err(Error::InvalidParameter("shift vector has the wrong number of axes".into()));
        }
        match self.mode {
            Mode::Torus => {
                let values = self.read_window(&self.window.translate_unchecked(v), true)?;
                Ok(WindowConfig::from_raw(self.window.clone(), self.module.clone(), self.mode, values))
            }
            Mode::Exact => {
                let out = self.window.shrink(v, v)?;
                let values = self.read_window(&out.translate_unchecked(v), false)?;
                Ok(WindowConfig::from_raw(out, self.module.clone(), self.mode, values))
            }
        }
    }

    pub fn restrict(&self, sub: &WindowSpec) -> Result<WindowConfig> {
        let values = self.read_window(sub, false)?;
        Ok(WindowConfig::from_raw(sub.clone(), self.module.clone(), self.mode, values))
    }

    /// Canonical text encoding.
    pub fn encode(&self) -> String {
        use fmt::Write;
        let w = &self.window;
        let mut out = String::new();
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(" ");
        writeln!(out, "MODSHIFT-CFG v1").unwrap();
        writeln!(out, "{}", self.ring()).unwrap();
        writeln!(out, "rank {}", self.rank()).unwrap();
        writeln!(out, "dims {} {}", w.dims.0, w.dims.1).unwrap();
        writeln!(out, "origin {}", join(&mut w.origin.iter().map(|x| x.to_string()))).unwrap();
        writeln!(out, "extents {}", join(&mut w.extents.iter().map(|x| x.to_string()))).unwrap();
        writeln!(out, "mode {}", self.mode).unwrap();
        let row = *w.extents.last().unwrap();
        for start in (0..w.volume()).step_by(row) {
            let line = join(&mut (start..start + row).map(|i| self.module_code(i).to_string()));
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn decode(text: &str) -> Result<WindowConfig> {
        decode_config(text)
    }
}

impl WindowSpec {
    fn translate_unchecked(&self, v: &[i64]) -> WindowSpec {
        WindowSpec {
            dims: self.dims,
            origin: self.origin.iter().zip(v).map(|(o, d)| o + d).collect(),
            extents: self.extents.clone(),
        }
    }
}

const WHAT: &str = "config file";

fn header_line<'a>(lines: &mut std::iter::Enumerate<std::str::Split<'a, char>>, key: &str) -> Result<(usize, &'a str)> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| Error::parse(WHAT, 0, 1, format!("missing `{key}` line")))?;
    let lineno = no + 1;
    if key.is_empty() {
        return Ok((lineno, line));
    }
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::parse(WHAT, lineno, 1, format!("expected `{key} …`")))?;
    Ok((lineno, rest))
}

fn parse_ints<T: FromStr>(text: &str, lineno: usize, col0: usize) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut col = col0;
    for tok in text.split(' ') {
        out.push(
            tok.parse::<T>()
                .map_err(|_| Error::parse(WHAT, lineno, col, format!("`{tok}` is not a valid integer")))?,
        );
        col += tok.len() + 1;
    }
    Ok(out)
}

fn decode_config(text: &str) -> Result<WindowConfig> {
    let body = text
        .strip_suffix('\n')
        .ok_or_else(|| Error::parse(WHAT, text.lines().count().max(1), 1, "file must end with a newline"))?;
    let mut lines = body.split('\n').enumerate();
    let (_, magic) = header_line(&mut lines, "")?;
    if magic != "MODSHIFT-CFG v1" {
        return Err(Error::parse(WHAT, 1, 1, "expected `MODSHIFT-CFG v1`"));
    }
    let (ln, desc) = header_line(&mut lines, "")?;
    let desc = RingDescriptor::parse(desc).map_err(|e| match e {
        Error::Parse { column, message, .. } => Error::parse(WHAT, ln, column, message),
        other => other,
    })?;
    let ring = Ring::new(&desc)?;
    let (ln, rank) = header_line(&mut lines, "rank")?;
    let rank = parse_ints::<usize>(rank, ln, 6)?;
    let (ln, dims) = header_line(&mut lines, "dims")?;
    let dims = parse_ints::<usize>(dims, ln, 6)?;
    if rank.len() != 1 || dims.len() != 2 {
        return Err(Error::parse(WHAT, ln, 1, "malformed rank/dims header"));
    }
    let module = ModuleSpec::new(ring, rank[0])?;
    let (ln, origin) = header_line(&mut lines, "origin")?;
    let origin = parse_ints::<i64>(origin, ln, 8)?;
    let (ln, extents) = header_line(&mut lines, "extents")?;
    let extents = parse_ints::<usize>(extents, ln, 9)?;
    let window = WindowSpec::new((dims[0], dims[1]), &origin, &extents)
        .map_err(|e| Error::parse(WHAT, ln, 1, e.to_string()))?;
    let (ln, mode) = header_line(&mut lines, "mode")?;
    let mode: Mode = mode.parse().map_err(|e: Error| Error::parse(WHAT, ln, 6, e.to_string()))?;

    let row = *extents.last().unwrap();
    let rows = window.volume() / row;
    let msize = module.size();
    let mut values = Vec::with_capacity(window.volume() * module.rank());
    for r in 0..rows {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, 8 + r, 1, format!("expected {rows} value rows, found {r}")))?;
        let ln = no + 1;
        let codes = parse_ints::<u64>(line, ln, 1)?;
        if codes.len() != row {
            return Err(Error::parse(WHAT, ln, 1, format!("expected {row} values, found {}", codes.len())));
        }
        let mut col = 1;
        for (tok, code) in line.split(' ').zip(codes) {
            if code >= msize {
                return Err(Error::parse(
                    WHAT,
                    ln,
                    col,
                    format!("value {code} out of range for {}^{}", module.ring(), module.rank()),
                ));
            }
            values.extend(module.decode(code));
            col += tok.len() + 1;
        }
    }
    if let Some((no, _)) = lines.next() {
        return Err(Error::parse(WHAT, no + 1, 1, "unexpected extra rows"));
    }
    WindowConfig::new(window, module, mode, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn z(m: u32) -> ModuleSpec {
        ModuleSpec::scalar(Ring::zmod(m).unwrap())
    }

    fn checkerboard(n: usize, mode: Mode) -> WindowConfig {
        let w = WindowSpec::at_zero((1, 1), &[n, n]).unwrap();
        WindowConfig::from_fn(w, z(2), mode, |m| smallvec::smallvec![((m[0] + m[1]).rem_euclid(2)) as Elem]).unwrap()
    }

    #[test]
    fn checkerboard_text() {
        let c = checkerboard(2, Mode::Torus);
        let text = c.encode();
        assert_eq!(
            text,
            "MODSHIFT-CFG v1\nzmod:2\nrank 1\ndims 1 1\norigin 0 0\nextents 2 2\nmode torus\n0 1\n1 0\n"
        );
        assert_eq!(WindowConfig::decode(&text).unwrap(), c);
    }

    #[test]
    fn out_of_range_value_reports_position() {
        let text = "MODSHIFT-CFG v1\nzmod:6\nrank 1\ndims 1 0\norigin 0\nextents 3\nmode exact\n1 7 2\n";
        match WindowConfig::decode(text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (8, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn checkerboard_shift_complements() {
        let c = checkerboard(4, Mode::Torus);
        let s = c.shift(&[1, 0]).unwrap();
        assert!(s.values().iter().zip(c.values()).all(|(a, b)| *a == 1 - *b));
    }

    #[test]
    fn exact_shift_shrinks() {
        let c = checkerboard(4, Mode::Exact);
        let s = c.shift(&[1, 2]).unwrap();
        assert_eq!(s.window().origin(), &[-1, 0]);
        assert_eq!(s.window().extents(), &[4, 2]);
        assert!(c.shift(&[0, 4]).is_err());
    }

    #[test]
    fn restrict_corner() {
        let c = checkerboard(4, Mode::Exact);
        let corner = WindowSpec::new((1, 1), &[2, 2], &[2, 2]).unwrap();
        let r = c.restrict(&corner).unwrap();
        assert_eq!(r.values(), &[0, 1, 1, 0]);
        assert!(c.restrict(&WindowSpec::new((1, 1), &[3, 3], &[2, 2]).unwrap()).is_err());
    }

    #[test]
    fn rank_two_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = WindowSpec::new((2, 1), &[-1, 4, 0], &[2, 3, 2]).unwrap();
        let m = ModuleSpec::new(Ring::parse("gf:3:2").unwrap(), 2).unwrap();
        let c = WindowConfig::random(w, m, Mode::Exact, &mut rng);
        assert_eq!(WindowConfig::decode(&c.encode()).unwrap(), c);
    }
}
