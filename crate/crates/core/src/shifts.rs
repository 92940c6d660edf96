//! Submodule shifts presented as kernels of a constraint rule, their window
//! solution spaces, coset and cocycle constructions, torsion and
//! topological mixing checks.

use std::collections::BTreeMap;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::lattice::{Coord, Mode, WindowConfig, WindowSpec};
use crate::linalg::{nullspace, solve, FieldSplit, Nullspace, Subspace};
use crate::poly::{LocalRule, ShiftPolynomial};
use crate::ring::{Elem, ModuleSpec, Ring};

/// The shift `S = ker Ψ = {a : Σ_b ψ_b a_{m+b} = 0 for all m}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelShiftSpec {
    constraint: LocalRule,
    label: String,
}

impl KernelShiftSpec {
    pub fn new(constraint: LocalRule, label: impl Into<String>) -> Self {
        KernelShiftSpec {
            constraint,
            label: label.into(),
        }
    }

    /// Parses `kernel ring=<desc> rank=<n> [dims=D,E] H=…`.
    pub fn parse(text: &str) -> Result<Self> {
        let rule = LocalRule::parse_kernel(text)?;
        Ok(KernelShiftSpec::new(rule, text.trim()))
    }

    pub fn constraint(&self) -> &LocalRule {
        &self.constraint
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn module(&self) -> &ModuleSpec {
        self.constraint.module()
    }

    pub fn ring(&self) -> &Ring {
        self.constraint.ring()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.constraint.dims()
    }

    pub fn to_text(&self) -> String {
        self.constraint.to_text("kernel")
    }

    /// Sites `m` whose whole stencil `m + B` lies in `w` (`None` if there are none).
    pub fn anchors(&self, w: &WindowSpec) -> Option<WindowSpec> {
        let (lo, hi) = self.constraint.to_poly().hull();
        w.shrink(&lo, &hi).ok()
    }

    /// First site where the constraint fails, if any. Exact-mode words are
    /// checked at their in-window anchors, torus words at every site.
    pub fn first_violation(&self, word: &WindowConfig) -> Result<Option<Coord>> {
        if word.ring() != self.ring() {
            return Err(Error::RingMismatch {
                left: self.ring().to_string(),
                right: word.ring().to_string(),
            });
        }
        if word.window().dims() != self.dims() {
            return Err(Error::WindowMismatch(format!(
                "word over dims {:?}, constraint over dims {:?}",
                word.window().dims(),
                self.dims()
            )));
        }
        let image = match self.constraint.to_poly().apply(word) {
            Ok(image) => image,
            Err(Error::DomainExhausted(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let rank = word.rank();
        Ok(image
            .values()
            .iter()
            .position(|&x| x != 0)
            .map(|i| image.window().coord_of(i / rank)))
    }

    pub fn contains(&self, word: &WindowConfig) -> Result<bool> {
        Ok(self.first_violation(word)?.is_none())
    }
}

/// The solution space, inside one window, of every constraint whose stencil
/// fits in the window.
#[derive(Clone, Debug)]
pub struct WindowBasis {
    spec: KernelShiftSpec,
    window: WindowSpec,
    mode: Mode,
    split: FieldSplit,
    components: Vec<Nullspace>,
    constraints: usize,
}

fn constraint_rows(spec: &KernelShiftSpec, w: &WindowSpec, mode: Mode, split: &FieldSplit, j: usize) -> Vec<Vec<Elem>> {
    let anchors = match mode {
        Mode::Torus => Some(w.clone()),
        Mode::Exact => spec.anchors(w),
    };
    let Some(anchors) = anchors else {
        return Vec::new();
    };
    let field = &split.fields()[j];
    anchors
        .coords()
        .map(|m| {
            let mut row = vec![0; w.volume()];
            for (b, psi) in spec.constraint().terms() {
                let site: Coord = m.iter().zip(b).map(|(x, y)| x + y).collect();
                let idx = match mode {
                    Mode::Torus => w.wrapped_index(&site),
                    Mode::Exact => w.index_of(&site).expect("anchor stencil inside window"),
                };
                row[idx] = field.add(row[idx], split.component(*psi, j));
            }
            row
        })
        .collect()
}

/// Solution space of the in-window constraints of `s` on `w`.
pub fn window_kernel(s: &KernelShiftSpec, w: &WindowSpec) -> Result<WindowBasis> {
    WindowBasis::new(s, w, Mode::Exact)
}

/// Solution space of the wrapped constraints of `s` on the torus `w`.
pub fn torus_kernel(s: &KernelShiftSpec, w: &WindowSpec) -> Result<WindowBasis> {
    WindowBasis::new(s, w, Mode::Torus)
}

impl WindowBasis {
    pub fn new(s: &KernelShiftSpec, w: &WindowSpec, mode: Mode) -> Result<Self> {
        if w.dims() != s.dims() {
            return Err(Error::WindowMismatch(format!(
                "window over dims {:?}, constraint over dims {:?}",
                w.dims(),
                s.dims()
            )));
        }
        let split = FieldSplit::new(s.ring()).map_err(|_| Error::UnsupportedCharacteristic {
            op: "window kernel (route through crt)",
            characteristic: s.ring().characteristic(),
        })?;
        let mut constraints = 0;
        let components = (0..split.fields().len())
            .map(|j| {
                let rows = constraint_rows(s, w, mode, &split, j);
                constraints = rows.len();
                nullspace(&split.fields()[j], w.volume(), rows)
            })
            .collect();
        Ok(WindowBasis {
            spec: s.clone(),
            window: w.clone(),
            mode,
            split,
            components,
            constraints,
        })
    }

    pub fn spec(&self) -> &KernelShiftSpec {
        &self.spec
    }

    pub fn window(&self) -> &WindowSpec {
        &self.window
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn module(&self) -> &ModuleSpec {
        self.spec.module()
    }

    pub fn split(&self) -> &FieldSplit {
        &self.split
    }

    /// Number of constraint anchors used.
    pub fn constraint_count(&self) -> usize {
        self.constraints
    }

    /// Per field component: the scalar (rank one) solution space.
    pub fn components(&self) -> &[Nullspace] {
        &self.components
    }

    /// Free sites of field component `j`, in storage order.
    pub fn free_sites(&self, j: usize) -> Vec<Coord> {
        self.components[j].free.iter().map(|&i| self.window.coord_of(i)).collect()
    }

    /// `log2` of the number of words in the solution set.
    pub fn log2_count(&self) -> f64 {
        let rank = self.module().rank() as f64;
        self.components
            .iter()
            .zip(self.split.fields())
            .map(|(ns, f)| rank * ns.free.len() as f64 * (f.size() as f64).log2())
            .sum()
    }

    /// Number of words in the solution set, or `None` if it overflows `u128`.
    pub fn solution_count(&self) -> Option<u128> {
        let rank = self.module().rank() as u32;
        let mut total: u128 = 1;
        for (ns, f) in self.components.iter().zip(self.split.fields()) {
            let e = rank.checked_mul(ns.free.len() as u32)?;
            total = total.checked_mul((f.size() as u128).checked_pow(e)?)?;
        }
        Some(total)
    }

    pub fn is_full(&self) -> bool {
        self.components.iter().all(|ns| ns.free.len() == self.window.volume())
    }

    /// Basis vectors of each field component over `volume · rank`
    /// coordinates (site-major, rank inner), in reduced echelon form.
    pub fn field_spans(&self) -> Vec<Subspace> {
        let (v, rank) = (self.window.volume(), self.module().rank());
        self.components
            .iter()
            .zip(self.split.fields())
            .map(|(ns, f)| {
                let mut rows = Vec::with_capacity(ns.basis.len() * rank);
                for c in 0..rank {
                    for b in &ns.basis {
                        let mut row = vec![0; v * rank];
                        for (i, &x) in b.iter().enumerate() {
                            row[i * rank + c] = x;
                        }
                        rows.push(row);
                    }
                }
                Subspace::span(f, v * rank, rows)
            })
            .collect()
    }

    /// A generating set of the solution module: each field basis vector
    /// embedded into `R`, placed in each module component.
    pub fn basis(&self) -> Vec<WindowConfig> {
        let (v, rank) = (self.window.volume(), self.module().rank());
        let mut out = Vec::new();
        for (j, ns) in self.components.iter().enumerate() {
            for c in 0..rank {
                for b in &ns.basis {
                    let mut values = vec![0; v * rank];
                    for (i, &x) in b.iter().enumerate() {
                        values[i * rank + c] = self.split.embed(j, x);
                    }
                    out.push(WindowConfig::from_raw(self.window.clone(), self.module().clone(), self.mode, values));
                }
            }
        }
        out
    }

    /// The word with field-component free values `coeffs[j][c][f]`.
    fn assemble(&self, mut coeff: impl FnMut(usize, usize, usize) -> Elem) -> WindowConfig {
        let (v, rank) = (self.window.volume(), self.module().rank());
        let fields = self.split.fields();
        let mut parts: Vec<Vec<Elem>> = Vec::with_capacity(fields.len());
        for (j, (ns, f)) in self.components.iter().zip(fields).enumerate() {
            let mut comp = vec![0; v * rank];
            for c in 0..rank {
                for (fi, b) in ns.basis.iter().enumerate() {
                    let a = coeff(j, c, fi);
                    if a == 0 {
                        continue;
                    }
                    for (i, &x) in b.iter().enumerate() {
                        if x != 0 {
                            let slot = &mut comp[i * rank + c];
                            *slot = f.add(*slot, f.mul(a, x));
                        }
                    }
                }
            }
            parts.push(comp);
        }
        let values = self.split.merge_vec(&parts);
        WindowConfig::from_raw(self.window.clone(), self.module().clone(), self.mode, values)
    }

    /// A uniformly distributed solution word.
    pub fn sample(&self, rng: &mut impl Rng) -> WindowConfig {
        let sizes: Vec<u32> = self.split.fields().iter().map(|f| f.size()).collect();
        self.assemble(|j, _, _| rng.gen_range(0..sizes[j]))
    }

    /// The `index`-th word in a fixed enumeration order of the solution set.
    pub fn word(&self, mut index: u128) -> WindowConfig {
        let rank = self.module().rank();
        let mut digits: Vec<Vec<Vec<Elem>>> = Vec::new();
        for (ns, f) in self.components.iter().zip(self.split.fields()) {
            let q = f.size() as u128;
            let per_c: Vec<Vec<Elem>> = (0..rank)
                .map(|_| {
                    ns.free
                        .iter()
                        .map(|_| {
                            let d = (index % q) as Elem;
                            index /= q;
                            d
                        })
                        .collect()
                })
                .collect();
            digits.push(per_c);
        }
        self.assemble(|j, c, f| digits[j][c][f])
    }

    /// All solution words, refusing sets larger than `limit`.
    pub fn enumerate(&self, limit: u128) -> Result<Vec<WindowConfig>> {
        let count = self.solution_count().unwrap_or(u128::MAX);
        if count > limit {
            return Err(Error::ResourceLimit {
                what: format!("enumeration of the window kernel on {}", self.window),
                size: count,
                limit,
            });
        }
        Ok((0..count).map(|i| self.word(i)).collect())
    }

    /// Membership by checking every in-window constraint.
    pub fn contains(&self, word: &WindowConfig) -> Result<bool> {
        if word.window() != &self.window || word.module() != self.module() {
            return Err(Error::WindowMismatch(format!(
                "word on {} vs kernel on {}",
                word.window(),
                self.window
            )));
        }
        let checked = word.clone().with_mode(self.mode);
        self.spec.contains(&checked)
    }

    /// Membership through the computed spans (used to cross-check `contains`).
    pub fn contains_via_span(&self, word: &WindowConfig) -> bool {
        let parts = self.split.split_vec(word.values());
        self.field_spans().iter().zip(&parts).all(|(s, v)| s.contains(v))
    }

    /// True iff no word outside the set is mapped into it by `x ↦ φ̄x`.
    pub fn is_torsion_free(&self, phibar: Elem) -> bool {
        self.components
            .iter()
            .enumerate()
            .all(|(j, ns)| self.split.component(phibar, j) != 0 || ns.free.len() == self.window.volume())
    }
}

/// `kernel_membership`.
pub fn kernel_membership(b: &WindowBasis, word: &WindowConfig) -> Result<bool> {
    b.contains(word)
}

/// A set of words on a window that can be sampled and tested.
pub trait WordSet {
    fn window(&self) -> &WindowSpec;
    fn module(&self) -> &ModuleSpec;
    fn size(&self) -> Option<u128>;
    fn contains(&self, word: &WindowConfig) -> Result<bool>;
    fn sample(&self, rng: &mut dyn rand::RngCore) -> WindowConfig;
    fn word(&self, index: u128) -> WindowConfig;
}

impl WordSet for WindowBasis {
    fn window(&self) -> &WindowSpec {
        &self.window
    }

    fn module(&self) -> &ModuleSpec {
        self.spec.module()
    }

    fn size(&self) -> Option<u128> {
        self.solution_count()
    }

    fn contains(&self, word: &WindowConfig) -> Result<bool> {
        WindowBasis::contains(self, word)
    }

    fn sample(&self, mut rng: &mut dyn rand::RngCore) -> WindowConfig {
        WindowBasis::sample(self, &mut rng)
    }

    fn word(&self, index: u128) -> WindowConfig {
        WindowBasis::word(self, index)
    }
}

/// The coset `rep + S_w`.
#[derive(Clone, Debug)]
pub struct CosetSet {
    pub rep: WindowConfig,
    pub kernel: WindowBasis,
}

impl CosetSet {
    pub fn new(rep: WindowConfig, kernel: WindowBasis) -> Result<Self> {
        if rep.window() != kernel.window() || rep.module() != kernel.module() {
            return Err(Error::WindowMismatch(format!(
                "representative on {} vs kernel on {}",
                rep.window(),
                kernel.window()
            )));
        }
        let rep = rep.with_mode(kernel.mode());
        Ok(CosetSet { rep, kernel })
    }
}

impl WordSet for CosetSet {
    fn window(&self) -> &WindowSpec {
        self.kernel.window()
    }

    fn module(&self) -> &ModuleSpec {
        self.kernel.module()
    }

    fn size(&self) -> Option<u128> {
        self.kernel.solution_count()
    }

    fn contains(&self, word: &WindowConfig) -> Result<bool> {
        self.kernel.contains(&word.clone().with_mode(self.kernel.mode()).sub(&self.rep)?)
    }

    fn sample(&self, mut rng: &mut dyn rand::RngCore) -> WindowConfig {
        self.rep.add(&self.kernel.sample(&mut rng)).expect("same window")
    }

    fn word(&self, index: u128) -> WindowConfig {
        self.rep.add(&self.kernel.word(index)).expect("same window")
    }
}

/// Outcome of a closure test over tuples of words.
#[derive(Clone, Debug)]
pub struct ClosureReport {
    pub holds: bool,
    pub exhaustive: bool,
    pub tuples_tested: u64,
    pub counterexample: Option<Vec<WindowConfig>>,
}

/// Tuples tested exhaustively when the tuple space is at most this large.
pub const EXHAUSTIVE_TUPLES: u128 = 1 << 16;
/// Number of random tuples tested otherwise.
pub const SAMPLED_TUPLES: u64 = 10_000;

/// Tests whether `Σ r_h s_h` stays in the set for tuples `(s_h)` from it.
pub fn submodule_condition_check(set: &dyn WordSet, gens: &[Elem], rng: &mut dyn rand::RngCore) -> Result<ClosureReport> {
    let ring = set.module().ring().clone();
    let combine = |words: &[WindowConfig]| -> Result<WindowConfig> {
        let mut acc = WindowConfig::zeros(words[0].window().clone(), set.module().clone(), words[0].mode());
        for (w, &r) in words.iter().zip(gens) {
            acc = acc.add(&w.scale(r))?;
        }
        Ok(acc)
    };
    if gens.iter().any(|&g| !ring.contains(g)) {
        return Err(Error::InvalidParameter("generator outside the ring".into()));
    }
    let h = gens.len() as u32;
    let tuples = set.size().and_then(|n| n.checked_pow(h));
    let mut tested = 0u64;
    match tuples {
        Some(total) if total <= EXHAUSTIVE_TUPLES => {
            let n = set.size().expect("finite");
            let words: Vec<WindowConfig> = (0..n).map(|i| set.word(i)).collect();
            for t in 0..total {
                let mut rest = t;
                let tuple: Vec<WindowConfig> = (0..h)
                    .map(|_| {
                        let w = words[(rest % n) as usize].clone();
                        rest /= n;
                        w
                    })
                    .collect();
                tested += 1;
                if !set.contains(&combine(&tuple)?)? {
                    return Ok(ClosureReport {
                        holds: false,
                        exhaustive: true,
                        tuples_tested: tested,
                        counterexample: Some(tuple),
                    });
                }
            }
            Ok(ClosureReport {
                holds: true,
                exhaustive: true,
                tuples_tested: tested,
                counterexample: None,
            })
        }
        _ => {
            for _ in 0..SAMPLED_TUPLES {
                let tuple: Vec<WindowConfig> = (0..h).map(|_| set.sample(rng)).collect();
                tested += 1;
                if !set.contains(&combine(&tuple)?)? {
                    return Ok(ClosureReport {
                        holds: false,
                        exhaustive: false,
                        tuples_tested: tested,
                        counterexample: Some(tuple),
                    });
                }
            }
            Ok(ClosureReport {
                holds: true,
                exhaustive: false,
                tuples_tested: tested,
                counterexample: None,
            })
        }
    }
}

/// Invariance `Φ(S) ⊆ S` and surjectivity `Φ(S) = S` at window scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub surjective: bool,
    /// Per field component: dimension of the image and of the target kernel.
    pub image_dims: Vec<usize>,
    pub kernel_dims: Vec<usize>,
}

/// Pushes the kernel on `w ⊕ hull(H)` through `Φ` and compares the image,
/// restricted to `w`, with the kernel on `w`.
pub fn invariance_and_surjectivity_check(
    phi: &LocalRule,
    s: &KernelShiftSpec,
    w: &WindowSpec,
    rng: &mut impl Rng,
) -> Result<InvarianceReport> {
    if phi.ring() != s.ring() {
        return Err(Error::RingMismatch {
            left: phi.ring().to_string(),
            right: s.ring().to_string(),
        });
    }
    let scalar = KernelShiftSpec::new(
        LocalRule::new(
            ModuleSpec::scalar(s.ring().clone()),
            s.dims(),
            s.constraint().terms().to_vec(),
        )?,
        s.label(),
    );
    let poly = phi.to_poly();
    let (lo, hi) = poly.hull();
    let big = w.expand(&lo, &hi)?;
    let source = window_kernel(&scalar, &big)?;
    let target = window_kernel(&scalar, w)?;
    let mut images = Vec::new();
    for b in source.basis() {
        images.push(poly.apply(&b)?.restrict(w)?);
    }
    let mut invariant = true;
    for img in &images {
        invariant &= target.contains(img)?;
    }
    for _ in 0..8 {
        let x = source.sample(rng);
        invariant &= target.contains(&poly.apply(&x)?.restrict(w)?)?;
    }
    let split = target.split();
    let mut image_dims = Vec::new();
    let mut kernel_dims = Vec::new();
    for (j, f) in split.fields().iter().enumerate() {
        let rows: Vec<Vec<Elem>> = images
            .iter()
            .map(|img| img.values().iter().map(|&x| split.component(x, j)).collect())
            .collect();
        image_dims.push(Subspace::span(f, w.volume(), rows).dim());
        kernel_dims.push(target.components()[j].free.len());
    }
    let surjective = invariant && image_dims == kernel_dims;
    Ok(InvarianceReport {
        invariant,
        surjective,
        image_dims,
        kernel_dims,
    })
}

/// `σ^v(c) − c` for each `v`: on the same window for tori, on
/// `W ∩ (W − v)` in exact mode.
pub fn coboundary(c: &WindowConfig, vs: &[Coord]) -> Result<Vec<WindowConfig>> {
    vs.iter()
        .map(|v| {
            let shifted = c.shift(v)?;
            match c.mode() {
                Mode::Torus => shifted.sub(c),
                Mode::Exact => {
                    let common = shifted
                        .window()
                        .intersect(c.window())
                        .ok_or_else(|| Error::DomainExhausted(format!("{} and its shift by {v:?} are disjoint", c.window())))?;
                    shifted.restrict(&common)?.sub(&c.restrict(&common)?)
                }
            }
        })
        .collect()
}

/// A cocycle `m ↦ b^m` given by its values on the lattice generators.
#[derive(Clone, Debug)]
pub struct Cocycle {
    generators: Vec<WindowConfig>,
}

fn unit_vector(axes: usize, i: usize, sign: i64) -> Coord {
    let mut v: Coord = SmallVec::from_elem(0, axes);
    v[i] = sign;
    v
}

impl Cocycle {
    pub fn new(generators: Vec<WindowConfig>) -> Result<Self> {
        let axes = generators.first().map(|g| g.window().axes()).unwrap_or(0);
        if generators.len() != axes {
            return Err(Error::InvalidParameter("a cocycle needs one generator image per axis".into()));
        }
        Ok(Cocycle { generators })
    }

    /// The coboundary cocycle `b^m = σ^m(c) − c`.
    pub fn from_coboundary(c: &WindowConfig) -> Result<Self> {
        let axes = c.window().axes();
        let vs: Vec<Coord> = (0..axes).map(|i| unit_vector(axes, i, 1)).collect();
        Cocycle::new(coboundary(c, &vs)?)
    }

    /// The linear cocycle `b^m = (m_1 + ⋯ + m_{D+E}) a` with constant `a`.
    pub fn linear(a: &[Elem], window: &WindowSpec, module: &ModuleSpec, mode: Mode) -> Result<Self> {
        let g = WindowConfig::constant(window.clone(), module.clone(), mode, a)?;
        Cocycle::new(vec![g; window.axes()])
    }

    pub fn generators(&self) -> &[WindowConfig] {
        &self.generators
    }

    /// `b^m` from the generators through `b^{n+u} = σ^u(b^n) + b^u`, with
    /// `b^{−e} = −σ^{−e}(b^e)` on integer axes.
    pub fn eval(&self, m: &[i64]) -> Result<WindowConfig> {
        let first = &self.generators[0];
        let axes = first.window().axes();
        let d = first.window().dims().0;
        if m.len() != axes {
            return Err(Error::InvalidParameter("lattice vector has the wrong number of axes".into()));
        }
        if m[d..].iter().any(|&x| x < 0) {
            return Err(Error::InvalidParameter("natural-axis components must be nonnegative".into()));
        }
        let combine = |a: &WindowConfig, b: &WindowConfig| -> Result<WindowConfig> {
            let common = a
                .window()
                .intersect(b.window())
                .ok_or_else(|| Error::DomainExhausted("cocycle domains became disjoint".into()))?;
            a.restrict(&common)?.add(&b.restrict(&common)?)
        };
        let mut acc = WindowConfig::zeros(first.window().clone(), first.module().clone(), first.mode());
        for (i, &mi) in m.iter().enumerate() {
            let step_gen = if mi >= 0 {
                self.generators[i].clone()
            } else {
                let back = unit_vector(axes, i, -1);
                let s = self.generators[i].shift(&back)?;
                s.scale(s.ring().neg(s.ring().one()))
            };
            let step = unit_vector(axes, i, mi.signum());
            for _ in 0..mi.unsigned_abs() {
                acc = combine(&acc.shift(&step)?, &step_gen)?;
            }
        }
        Ok(acc)
    }
}

/// `c_m = c0 + (m_1 + ⋯ + m_{D+E}) a` on `w`.
pub fn coset_from_cocycle(c0: &[Elem], a: &[Elem], w: &WindowSpec, module: &ModuleSpec, mode: Mode) -> Result<WindowConfig> {
    let ring = module.ring().clone();
    if c0.len() != module.rank() || a.len() != module.rank() {
        return Err(Error::InvalidParameter("c0 and a must have the module rank".into()));
    }
    WindowConfig::from_fn(w.clone(), module.clone(), mode, |m| {
        let s: i64 = m.iter().sum();
        c0.iter().zip(a).map(|(&x, &y)| ring.add(x, ring.int_mul(s, y))).collect()
    })
}

/// Outcome of a coset check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetCheck {
    pub holds: bool,
    /// The first probe vector whose coboundary left `S`, and where.
    pub failure: Option<(Coord, Coord)>,
}

/// True iff every coboundary `σ^v(c) − c` lies in `S`.
pub fn coset_shift_check(c: &WindowConfig, s: &KernelShiftSpec, vs: &[Coord]) -> Result<CosetCheck> {
    for (v, b) in vs.iter().zip(coboundary(c, vs)?) {
        if let Some(site) = s.first_violation(&b)? {
            return Ok(CosetCheck {
                holds: false,
                failure: Some((v.clone(), site)),
            });
        }
    }
    Ok(CosetCheck {
        holds: true,
        failure: None,
    })
}

/// Lattice generators plus `extra` random vectors with entries in `[-3, 3]`
/// (natural axes `[0, 3]`).
pub fn probe_vectors(dims: (usize, usize), extra: usize, rng: &mut impl Rng) -> Vec<Coord> {
    let axes = dims.0 + dims.1;
    let mut out: Vec<Coord> = (0..axes).map(|i| unit_vector(axes, i, 1)).collect();
    for _ in 0..extra {
        out.push((0..axes).map(|a| if a < dims.0 { rng.gen_range(-3..=3) } else { rng.gen_range(0..=3) }).collect());
    }
    out
}

/// True iff `A^w / S_w` has no `φ̄`-torsion.
pub fn torsion_free_check(s: &KernelShiftSpec, w: &WindowSpec, phibar: Elem) -> Result<bool> {
    Ok(window_kernel(s, w)?.is_torsion_free(phibar))
}

/// True iff `φ̄ · c` satisfies the constraints.
pub fn phibar_coset_containment(c: &WindowConfig, s: &KernelShiftSpec, phibar: Elem) -> Result<bool> {
    s.contains(&c.scale(phibar))
}

/// Whether some word of the kernel on the hull of the translated windows
/// `B_h + n h` carries every pinned word `b_h` on its translate.
pub fn topological_mixing_check(s: &KernelShiftSpec, pins: &[(Coord, WindowConfig)], n: i64) -> Result<bool> {
    let Some((_, first)) = pins.first() else {
        return Ok(true);
    };
    let rank = first.rank();
    let mut fixed: BTreeMap<Coord, SmallVec<[Elem; 4]>> = BTreeMap::new();
    let mut hull: Option<WindowSpec> = None;
    for (h, word) in pins {
        if word.ring() != s.ring() || word.rank() != rank {
            return Err(Error::RingMismatch {
                left: s.module().ring().to_string(),
                right: word.ring().to_string(),
            });
        }
        let shift: Coord = h.iter().map(|x| x * n).collect();
        let placed = word.window().translate(&shift)?;
        hull = Some(match hull {
            None => placed.clone(),
            Some(u) => u.hull(&placed),
        });
        for (i, m) in word.window().coords().enumerate() {
            let site: Coord = m.iter().zip(&shift).map(|(x, y)| x + y).collect();
            let value: SmallVec<[Elem; 4]> = word.site(i).into();
            if let Some(prev) = fixed.get(&site) {
                if *prev != value {
                    return Err(Error::InfeasiblePin {
                        site: format!("{site:?}"),
                        first: format!("{prev:?}"),
                        second: format!("{value:?}"),
                    });
                }
            } else {
                fixed.insert(site, value);
            }
        }
    }
    let u = hull.expect("nonempty");
    let split = FieldSplit::new(s.ring()).map_err(|_| Error::UnsupportedCharacteristic {
        op: "topological mixing check",
        characteristic: s.ring().characteristic(),
    })?;
    for (j, f) in split.fields().iter().enumerate() {
        let base = constraint_rows(s, &u, Mode::Exact, &split, j);
        for c in 0..rank {
            let mut eqs: Vec<(Vec<Elem>, Elem)> = base.iter().map(|r| (r.clone(), 0)).collect();
            for (site, value) in &fixed {
                let mut row = vec![0; u.volume()];
                row[u.index_of(site).expect("inside hull")] = 1;
                eqs.push((row, split.component(value[c], j)));
            }
            if solve(f, u.volume(), &eqs).is_none() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One-layer extension certificate: every kernel word on `w` is the
/// restriction of a kernel word on `w` grown by one site in every direction
/// (natural axes are not grown below zero).
pub fn extension_certificate(s: &KernelShiftSpec, w: &WindowSpec) -> Result<bool> {
    let axes = w.axes();
    let d = w.dims().0;
    let lo: Vec<i64> = (0..axes)
        .map(|a| if a >= d && w.origin()[a] == 0 { 0 } else { -1 })
        .collect();
    let hi = vec![1i64; axes];
    let big = w.expand(&lo, &hi)?;
    let inner = window_kernel(s, w)?;
    let outer = window_kernel(s, &big)?;
    let positions: Vec<usize> = w.coords().map(|m| big.index_of(&m).expect("inside")).collect();
    for (j, f) in inner.split().fields().iter().enumerate() {
        let projected: Vec<Vec<Elem>> = outer.components()[j]
            .basis
            .iter()
            .map(|b| positions.iter().map(|&p| b[p]).collect())
            .collect();
        if Subspace::span(f, w.volume(), projected).dim() != inner.components()[j].free.len() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The polynomial `Φ − Id`, whose kernel is the fixed-point shift of `Φ`.
pub fn fixed_point_constraint(phi: &LocalRule) -> Result<ShiftPolynomial> {
    let p = phi.to_poly();
    p.sub(&ShiftPolynomial::one(phi.ring().clone(), phi.dims()))
}
