//! Exact linear algebra over the finite fields a ring splits into.
//!
//! A ring that is a product of fields (`zmod(p)`, `gf(p,k)`, squarefree
//! `zmod(m)` and products of these) is handled one field component at a time.
//! Elimination is reduced row echelon form with pivots chosen column by
//! column, taking the first eligible row, so results are deterministic.

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::ring::{factorize, Elem, Ring, RingKind};

/// Isomorphism `R ≅ F_1 × … × F_J` onto a product of finite fields.
#[derive(Clone, Debug)]
pub struct FieldSplit {
    ring: Ring,
    fields: Vec<Ring>,
    forward: Vec<SmallVec<[Elem; 4]>>,
    inverse: Vec<Elem>,
}

fn split_maps(ring: &Ring) -> Result<(Vec<Ring>, Vec<SmallVec<[Elem; 4]>>)> {
    match ring.kind() {
        RingKind::Zmod(m) => {
            let factors = factorize(m as u64);
            if factors.iter().any(|&(_, e)| e > 1) {
                return Err(Error::Unsupported(format!(
                    "{ring} is not a product of fields (characteristic {m} is not squarefree)"
                )));
            }
            let fields = factors
                .iter()
                .map(|&(p, _)| Ring::zmod(p as u32))
                .collect::<Result<Vec<_>>>()?;
            let forward = ring
                .elements()
                .map(|x| factors.iter().map(|&(p, _)| x % p as u32).collect())
                .collect();
            Ok((fields, forward))
        }
        RingKind::Gf { .. } => Ok((vec![ring.clone()], ring.elements().map(|x| smallvec::smallvec![x]).collect())),
        RingKind::Product(factors) => {
            let parts = factors.iter().map(split_maps).collect::<Result<Vec<_>>>()?;
            let fields = parts.iter().flat_map(|(f, _)| f.iter().cloned()).collect();
            let forward = ring
                .elements()
                .map(|x| {
                    let codes = ring.split_product(x);
                    codes
                        .iter()
                        .zip(&parts)
                        .flat_map(|(&c, (_, fw))| fw[c as usize].iter().copied())
                        .collect()
                })
                .collect();
            Ok((fields, forward))
        }
    }
}

impl FieldSplit {
    pub fn new(ring: &Ring) -> Result<Self> {
        let (fields, forward) = split_maps(ring)?;
        let mut inverse = vec![u32::MAX; ring.size() as usize];
        let split = FieldSplit {
            ring: ring.clone(),
            fields,
            forward,
            inverse: Vec::new(),
        };
        for x in ring.elements() {
            let idx = split.index(&split.forward[x as usize]);
            debug_assert_eq!(inverse[idx], u32::MAX, "field split must be injective");
            inverse[idx] = x;
        }
        Ok(FieldSplit { inverse, ..split })
    }

    fn index(&self, parts: &[Elem]) -> usize {
        parts
            .iter()
            .zip(&self.fields)
            .rev()
            .fold(0usize, |acc, (&c, f)| acc * f.size() as usize + c as usize)
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn fields(&self) -> &[Ring] {
        &self.fields
    }

    pub fn forward(&self, x: Elem) -> &[Elem] {
        &self.forward[x as usize]
    }

    pub fn component(&self, x: Elem, j: usize) -> Elem {
        self.forward[x as usize][j]
    }

    pub fn inverse(&self, parts: &[Elem]) -> Elem {
        self.inverse[self.index(parts)]
    }

    /// The ring element that is `x` in component `j` and zero elsewhere.
    pub fn embed(&self, j: usize, x: Elem) -> Elem {
        let mut parts: SmallVec<[Elem; 4]> = SmallVec::from_elem(0, self.fields.len());
        parts[j] = x;
        self.inverse(&parts)
    }

    /// Splits a vector of ring values into one vector per field.
    pub fn split_vec(&self, v: &[Elem]) -> Vec<Vec<Elem>> {
        (0..self.fields.len())
            .map(|j| v.iter().map(|&x| self.component(x, j)).collect())
            .collect()
    }

    pub fn merge_vec(&self, parts: &[Vec<Elem>]) -> Vec<Elem> {
        let n = parts.first().map_or(0, |p| p.len());
        let mut buf: SmallVec<[Elem; 4]> = SmallVec::from_elem(0, self.fields.len());
        (0..n)
            .map(|i| {
                for (j, p) in parts.iter().enumerate() {
                    buf[j] = p[i];
                }
                self.inverse(&buf)
            })
            .collect()
    }
}

/// `target ← target − factor · src`.
fn axpy(field: &Ring, target: &mut [Elem], factor: Elem, src: &[Elem]) {
    if factor == 0 {
        return;
    }
    if let Some(p) = field.zmod_modulus() {
        let neg = (p - factor) as u64;
        for (t, &s) in target.iter_mut().zip(src) {
            if s != 0 {
                *t = ((*t as u64 + neg * s as u64) % p as u64) as Elem;
            }
        }
    } else {
        for (t, &s) in target.iter_mut().zip(src) {
            if s != 0 {
                *t = field.sub(*t, field.mul(factor, s));
            }
        }
    }
}

fn scale_row(field: &Ring, row: &mut [Elem], factor: Elem) {
    for x in row.iter_mut() {
        *x = field.mul(*x, factor);
    }
}

/// Reduced row echelon form in place; returns pivot columns. Zero rows are
/// removed. Only the first `ncols` columns are eligible as pivots.
pub fn rref(field: &Ring, rows: &mut Vec<Vec<Elem>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        let Some(found) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, found);
        let inv = field.inverse(rows[r][col]).expect("nonzero field element");
        scale_row(field, &mut rows[r], inv);
        let pivot_row = std::mem::take(&mut rows[r]);
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r {
                let f = row[col];
                axpy(field, row, f, &pivot_row);
            }
        }
        rows[r] = pivot_row;
        pivots.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// A subspace of `F^ncols` held as its reduced row echelon basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subspace {
    field: Ring,
    ncols: usize,
    rows: Vec<Vec<Elem>>,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn span(field: &Ring, ncols: usize, mut vectors: Vec<Vec<Elem>>) -> Self {
        let pivots = rref(field, &mut vectors, ncols);
        Subspace {
            field: field.clone(),
            ncols,
            rows: vectors,
            pivots,
        }
    }

    pub fn zero(field: &Ring, ncols: usize) -> Self {
        Subspace::span(field, ncols, Vec::new())
    }

    pub fn full(field: &Ring, ncols: usize) -> Self {
        let rows = (0..ncols)
            .map(|i| {
                let mut v = vec![0; ncols];
                v[i] = 1;
                v
            })
            .collect();
        Subspace {
            field: field.clone(),
            ncols,
            rows,
            pivots: (0..ncols).collect(),
        }
    }

    pub fn field(&self) -> &Ring {
        &self.field
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Elem>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Reduces `v` against the basis; the result is zero iff `v` lies in the span.
    pub fn reduce(&self, v: &mut [Elem]) {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            let f = v[p];
            axpy(&self.field, v, f, row);
        }
    }

    pub fn contains(&self, v: &[Elem]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|&x| x == 0)
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.rows.iter().all(|r| other.contains(r))
    }

    /// `Σ coeffs_i · row_i`.
    pub fn combine(&self, coeffs: &[Elem]) -> Vec<Elem> {
        let mut out = vec![0; self.ncols];
        for (row, &c) in self.rows.iter().zip(coeffs) {
            let neg = self.field.neg(c);
            axpy(&self.field, &mut out, neg, row);
        }
        out
    }
}

/// Solution space of a homogeneous system, parameterised by its free columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nullspace {
    pub free: Vec<usize>,
    /// One basis vector per free column: that column set to 1, the other free
    /// columns 0.
    pub basis: Vec<Vec<Elem>>,
}

pub fn nullspace(field: &Ring, ncols: usize, equations: Vec<Vec<Elem>>) -> Nullspace {
    let mut rows = equations;
    let pivots = rref(field, &mut rows, ncols);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let free: Vec<usize> = (0..ncols).filter(|&c| !is_pivot[c]).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![0; ncols];
            v[f] = 1;
            for (row, &p) in rows.iter().zip(&pivots) {
                v[p] = field.neg(row[f]);
            }
            v
        })
        .collect();
    Nullspace { free, basis }
}

/// A particular solution of `A x = b` (free columns set to zero), or `None`
/// when the system is inconsistent. Each equation is `(row, rhs)`.
pub fn solve(field: &Ring, ncols: usize, equations: &[(Vec<Elem>, Elem)]) -> Option<Vec<Elem>> {
    let mut rows: Vec<Vec<Elem>> = equations
        .iter()
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    let pivots = rref(field, &mut rows, ncols + 1);
    if pivots.last() == Some(&ncols) {
        return None;
    }
    let mut x = vec![0; ncols];
    for (row, &p) in rows.iter().zip(&pivots) {
        x[p] = row[ncols];
    }
    Some(x)
}
