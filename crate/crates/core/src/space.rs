//! Sparse vectors over ℓ²(ℤ) / ℓ²(ℕ), coordinate subspaces and direct sums.
//!
//! Everything here is exact up to floating rounding of the coefficients:
//! a coefficient is only dropped when it is exactly zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of candidate indices scanned when looking for
/// the first members of a subspace.
const INDEX_SCAN_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// ℓ²(ℤ)
    #[default]
    Bilateral,
    /// ℓ²(ℕ₀)
    Unilateral,
}

impl SpaceKind {
    pub fn admits(self, index: i64) -> bool {
        match self {
            SpaceKind::Bilateral => true,
            SpaceKind::Unilateral => index >= 0,
        }
    }

    pub(crate) fn check(self, other: SpaceKind) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch { expected: self, found: other })
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceKind::Bilateral => f.write_str("bilateral"),
            SpaceKind::Unilateral => f.write_str("unilateral"),
        }
    }
}

/// Enumerates basis indices in net order: ascending `|i|`, nonnegative first.
#[derive(Debug, Clone)]
pub struct IndexOrder {
    kind: SpaceKind,
    next: i64,
}

impl IndexOrder {
    pub fn new(kind: SpaceKind) -> Self {
        Self { kind, next: 0 }
    }
}

impl Iterator for IndexOrder {
    type Item = i64;

    fn next(&mut self) -> Option<i64> {
        let current = self.next;
        self.next = match self.kind {
            SpaceKind::Unilateral => current + 1,
            SpaceKind::Bilateral if current > 0 => -current,
            SpaceKind::Bilateral => -current + 1,
        };
        Some(current)
    }
}

/// Sort key matching [`IndexOrder`].
pub fn index_order_key(i: i64) -> (u64, bool) {
    (i.unsigned_abs(), i < 0)
}

/// Finitely supported vector with complex coefficients. No stored zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    kind: SpaceKind,
    entries: BTreeMap<i64, Complex64>,
}

impl SparseVector {
    pub fn zero(kind: SpaceKind) -> Self {
        Self { kind, entries: BTreeMap::new() }
    }

    /// The basis vector `e_index`.
    pub fn basis(kind: SpaceKind, index: i64) -> Result<Self> {
        Self::from_entries(kind, [(index, Complex64::new(1.0, 0.0))])
    }

    pub fn from_entries<I>(kind: SpaceKind, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let mut v = Self::zero(kind);
        for (i, c) in entries {
            v.add_at(i, c)?;
        }
        Ok(v)
    }

    pub fn from_real<I>(kind: SpaceKind, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        Self::from_entries(kind, entries.into_iter().map(|(i, c)| (i, Complex64::new(c, 0.0))))
    }

    /// Builds a vector from entries already known to be valid (nonzero,
    /// admissible indices).
    pub(crate) fn from_map_unchecked(kind: SpaceKind, entries: BTreeMap<i64, Complex64>) -> Self {
        debug_assert!(entries.iter().all(|(i, c)| kind.admits(*i) && *c != Complex64::new(0.0, 0.0)));
        Self { kind, entries }
    }

    /// Adds `c` to the coefficient at `index`, pruning an exact zero result.
    pub fn add_at(&mut self, index: i64, c: Complex64) -> Result<()> {
        if !self.kind.admits(index) {
            return Err(Error::NegativeIndex(index));
        }
        let slot = self.entries.entry(index).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
        if *slot == Complex64::new(0.0, 0.0) {
            self.entries.remove(&index);
        }
        Ok(())
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn get(&self, index: i64) -> Complex64 {
        self.entries.get(&index).copied().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.entries.iter().map(|(i, c)| (*i, *c))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.keys().copied()
    }

    #[allow(clippy::len_without_is_empty)] // `is_zero` plays that role
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest and largest supported index.
    pub fn support_bounds(&self) -> Option<(i64, i64)> {
        let lo = *self.entries.keys().next()?;
        let hi = *self.entries.keys().next_back()?;
        Some((lo, hi))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, by: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(i, c)| (*i, c * by))
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .collect();
        Self { kind: self.kind, entries }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.kind.check(other.kind)?;
        let mut out = self.clone();
        for (i, c) in other.entries() {
            out.add_at(i, c)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// `‖self − other‖` without materializing the difference.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.kind.check(other.kind)?;
        Ok(self.distance_sqr_unchecked(other, 1.0).sqrt())
    }

    /// `‖scale·self − other‖²`.
    pub(crate) fn distance_sqr_unchecked(&self, other: &Self, scale: f64) -> f64 {
        let mut acc = 0.0;
        let mut a = self.entries.iter().peekable();
        let mut b = other.entries.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (Some((ia, ca)), Some((ib, cb))) => {
                    if ia == ib {
                        acc += (**ca * scale - **cb).norm_sqr();
                        a.next();
                        b.next();
                    } else if ia < ib {
                        acc += (**ca * scale).norm_sqr();
                        a.next();
                    } else {
                        acc += cb.norm_sqr();
                        b.next();
                    }
                }
                (Some((_, ca)), None) => {
                    acc += (**ca * scale).norm_sqr();
                    a.next();
                }
                (None, Some((_, cb))) => {
                    acc += cb.norm_sqr();
                    b.next();
                }
                (None, None) => break,
            }
        }
        acc
    }

    /// Keeps only the entries whose index satisfies `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(i64) -> bool) -> Self {
        let entries = self.entries.iter().filter(|(i, _)| keep(**i)).map(|(i, c)| (*i, *c)).collect();
        Self { kind: self.kind, entries }
    }

    /// Multiplies by `2^exp` exactly (barring over/underflow).
    pub(crate) fn scale_pow2(&self, exp: i64) -> Self {
        if exp == 0 {
            return self.clone();
        }
        let factor = pow2(exp);
        self.scale(Complex64::new(factor, 0.0))
    }
}

/// Unbiased binary exponent of `|x|` (subnormals included); 0 for zero
/// and non-finite values.
pub(crate) fn binary_exponent(x: f64) -> i32 {
    if x == 0.0 || !x.is_finite() {
        return 0;
    }
    let bits = x.abs().to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        let m = bits & ((1u64 << 52) - 1);
        -1022 - (m.leading_zeros() as i32 - 12)
    } else {
        raw - 1023
    }
}

/// `2^exp` as an `f64`, saturating to 0 or infinity.
pub(crate) fn pow2(exp: i64) -> f64 {
    let e = exp.clamp(-2000, 2000) as i32;
    // powi is exact for powers of two inside the representable range.
    if e > 1023 {
        f64::INFINITY
    } else if e < -1074 {
        0.0
    } else if e >= -1022 {
        2f64.powi(e)
    } else {
        2f64.powi(-1022) * 2f64.powi(e + 1022)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoefficientRepr {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SparseVectorRepr {
    #[serde(default)]
    space: SpaceKind,
    entries: Vec<(i64, CoefficientRepr)>,
}

impl Serialize for SparseVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self
            .entries()
            .map(|(i, c)| {
                let repr = if c.im == 0.0 { CoefficientRepr::Real(c.re) } else { CoefficientRepr::Complex([c.re, c.im]) };
                (i, repr)
            })
            .collect();
        SparseVectorRepr { space: self.kind, entries }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = SparseVectorRepr::deserialize(deserializer)?;
        let entries = repr.entries.into_iter().map(|(i, c)| match c {
            CoefficientRepr::Real(re) => (i, Complex64::new(re, 0.0)),
            CoefficientRepr::Complex([re, im]) => (i, Complex64::new(re, im)),
        });
        SparseVector::from_entries(repr.space, entries).map_err(serde::de::Error::custom)
    }
}

/// Index set of a coordinate subspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexSet {
    /// Indices whose residue mod `modulus` lies in `residues`.
    Residues { modulus: u64, residues: BTreeSet<u64> },
    /// Indices `≥ start`.
    HalfLine { start: i64 },
    Finite { indices: BTreeSet<i64> },
    Complement { of: Box<IndexSet> },
}

impl IndexSet {
    pub fn residues(modulus: u64, residues: impl IntoIterator<Item = u64>) -> Self {
        IndexSet::Residues { modulus, residues: residues.into_iter().collect() }
    }

    pub fn full() -> Self {
        Self::residues(1, [0])
    }

    pub fn contains(&self, i: i64) -> bool {
        match self {
            IndexSet::Residues { modulus, residues } => residues.contains(&(i.rem_euclid(*modulus as i64) as u64)),
            IndexSet::HalfLine { start } => i >= *start,
            IndexSet::Finite { indices } => indices.contains(&i),
            IndexSet::Complement { of } => !of.contains(i),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            IndexSet::Residues { modulus, residues } => {
                if *modulus == 0 || *modulus > i64::MAX as u64 {
                    return Err(Error::InvalidSubspace(format!("modulus {modulus} out of range")));
                }
                if let Some(r) = residues.iter().find(|r| **r >= *modulus) {
                    return Err(Error::InvalidSubspace(format!("residue {r} not below modulus {modulus}")));
                }
                Ok(())
            }
            IndexSet::HalfLine { .. } | IndexSet::Finite { .. } => Ok(()),
            IndexSet::Complement { of } => of.validate(),
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            IndexSet::Complement { of } => (**of).clone(),
            IndexSet::Residues { modulus, residues } => {
                IndexSet::Residues { modulus: *modulus, residues: (0..*modulus).filter(|r| !residues.contains(r)).collect() }
            }
            other => IndexSet::Complement { of: Box::new(other.clone()) },
        }
    }

    fn is_empty_in(&self, kind: SpaceKind) -> bool {
        match self {
            IndexSet::Residues { residues, .. } => residues.is_empty(),
            IndexSet::HalfLine { .. } => false,
            IndexSet::Finite { indices } => !indices.iter().any(|i| kind.admits(*i)),
            IndexSet::Complement { of } => of.is_full_in(kind),
        }
    }

    fn is_full_in(&self, kind: SpaceKind) -> bool {
        match self {
            IndexSet::Residues { modulus, residues } => residues.len() as u64 == *modulus,
            IndexSet::HalfLine { start } => kind == SpaceKind::Unilateral && *start <= 0,
            IndexSet::Finite { .. } => false,
            IndexSet::Complement { of } => of.is_empty_in(kind),
        }
    }

    /// The index set `{i + offset : i ∈ self}`.
    pub fn translate(&self, offset: i64) -> Self {
        match self {
            IndexSet::Residues { modulus, residues } => {
                let m = *modulus as i64;
                IndexSet::Residues {
                    modulus: *modulus,
                    residues: residues.iter().map(|r| (*r as i64 + offset).rem_euclid(m) as u64).collect(),
                }
            }
            IndexSet::HalfLine { start } => IndexSet::HalfLine { start: start + offset },
            IndexSet::Finite { indices } => IndexSet::Finite { indices: indices.iter().map(|i| i + offset).collect() },
            IndexSet::Complement { of } => IndexSet::Complement { of: Box::new(of.translate(offset)) },
        }
    }
}

/// Closed span of `{e_i : i ∈ index_set}` inside a sequence space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CoordinateSubspaceRepr", into = "CoordinateSubspaceRepr")]
pub struct CoordinateSubspace {
    space: SpaceKind,
    index_set: IndexSet,
}

#[derive(Serialize, Deserialize)]
struct CoordinateSubspaceRepr {
    #[serde(default)]
    space: SpaceKind,
    #[serde(flatten)]
    index_set: IndexSet,
}

impl TryFrom<CoordinateSubspaceRepr> for CoordinateSubspace {
    type Error = Error;

    fn try_from(r: CoordinateSubspaceRepr) -> Result<Self> {
        CoordinateSubspace::new(r.space, r.index_set)
    }
}

impl From<CoordinateSubspace> for CoordinateSubspaceRepr {
    fn from(m: CoordinateSubspace) -> Self {
        CoordinateSubspaceRepr { space: m.space, index_set: m.index_set }
    }
}

impl CoordinateSubspace {
    pub fn new(space: SpaceKind, index_set: IndexSet) -> Result<Self> {
        index_set.validate()?;
        Ok(Self { space, index_set })
    }

    pub fn residues(space: SpaceKind, modulus: u64, residues: impl IntoIterator<Item = u64>) -> Result<Self> {
        Self::new(space, IndexSet::residues(modulus, residues))
    }

    pub fn half_line(space: SpaceKind, start: i64) -> Self {
        Self { space, index_set: IndexSet::HalfLine { start } }
    }

    pub fn finite(space: SpaceKind, indices: impl IntoIterator<Item = i64>) -> Self {
        Self { space, index_set: IndexSet::Finite { indices: indices.into_iter().collect() } }
    }

    pub fn whole(space: SpaceKind) -> Self {
        Self { space, index_set: IndexSet::full() }
    }

    pub fn space(&self) -> SpaceKind {
        self.space
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn contains_index(&self, i: i64) -> bool {
        self.space.admits(i) && self.index_set.contains(i)
    }

    pub fn contains(&self, v: &SparseVector) -> bool {
        v.kind() == self.space && v.support().all(|i| self.contains_index(i))
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty_in(self.space)
    }

    pub fn is_full(&self) -> bool {
        self.index_set.is_full_in(self.space)
    }

    /// `M ≠ {0}` and `M ≠ H`.
    pub fn is_nontrivial(&self) -> bool {
        !self.is_empty() && !self.is_full()
    }

    pub fn complement(&self) -> Self {
        Self { space: self.space, index_set: self.index_set.complement() }
    }

    /// Image of the subspace under the index map `i ↦ i + offset`, with
    /// indices falling outside the space dropped.
    ///
    /// On the unilateral space a forward translate of a residue class or of
    /// a complement need not be a coordinate subspace of the same shape;
    /// those cases are rejected unless the image is still exact.
    pub fn translate(&self, offset: i64) -> Result<Self> {
        let index_set = match (&self.index_set, self.space) {
            (set, SpaceKind::Bilateral) => set.translate(offset),
            (_, SpaceKind::Unilateral) if offset == 0 => self.index_set.clone(),
            (IndexSet::Finite { indices }, SpaceKind::Unilateral) => IndexSet::Finite {
                indices: indices.iter().filter(|i| **i >= 0).map(|i| i + offset).filter(|i| *i >= 0).collect(),
            },
            (IndexSet::HalfLine { start }, SpaceKind::Unilateral) => IndexSet::HalfLine { start: (*start).max(0) + offset },
            (IndexSet::Residues { modulus, residues }, SpaceKind::Unilateral) => {
                let p = *modulus as i64;
                // Every member j of the translated class must have a preimage j - offset ≥ 0.
                let exact = offset < 0 || residues.iter().all(|r| (*r as i64 + offset).rem_euclid(p) >= offset);
                if !exact {
                    return Err(Error::Unsupported(format!(
                        "translate of a residue subspace by {offset} on the unilateral space is not a residue subspace"
                    )));
                }
                self.index_set.translate(offset)
            }
            (IndexSet::Complement { .. }, SpaceKind::Unilateral) => {
                return Err(Error::Unsupported("translate of a complement on the unilateral space".into()));
            }
        };
        Ok(Self { space: self.space, index_set })
    }

    /// Orthogonal distance from `v` to the subspace.
    pub fn distance(&self, v: &SparseVector) -> Result<f64> {
        self.space.check(v.kind())?;
        Ok(self.distance_sqr_unchecked(v).sqrt())
    }

    pub(crate) fn distance_sqr_unchecked(&self, v: &SparseVector) -> f64 {
        v.entries().filter(|(i, _)| !self.contains_index(*i)).map(|(_, c)| c.norm_sqr()).sum()
    }

    /// The first `count` indices of the subspace in [`IndexOrder`].
    pub fn first_indices(&self, count: usize) -> Vec<i64> {
        if let IndexSet::Finite { indices } = &self.index_set {
            let mut v: Vec<i64> = indices.iter().copied().filter(|i| self.space.admits(*i)).collect();
            v.sort_by_key(|i| index_order_key(*i));
            v.truncate(count);
            return v;
        }
        if self.is_empty() {
            return Vec::new();
        }
        IndexOrder::new(self.space)
            .take(INDEX_SCAN_LIMIT)
            .filter(|i| self.contains_index(*i))
            .take(count)
            .collect()
    }
}

/// `(left, right)` in a direct sum `H ⊕ H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSumVector {
    pub left: SparseVector,
    pub right: SparseVector,
}

impl DirectSumVector {
    pub fn new(left: SparseVector, right: SparseVector) -> Self {
        Self { left, right }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.left.norm_sqr() + self.right.norm_sqr()
    }

    /// `√(‖left‖² + ‖right‖²)`
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectSumSubspace {
    pub left: CoordinateSubspace,
    pub right: CoordinateSubspace,
}

impl DirectSumSubspace {
    pub fn new(left: CoordinateSubspace, right: CoordinateSubspace) -> Self {
        Self { left, right }
    }

    pub fn contains(&self, p: &DirectSumVector) -> bool {
        self.left.contains(&p.left) && self.right.contains(&p.right)
    }
}

/// A point of either a sequence space or a direct sum of two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Pair(DirectSumVector),
    Single(SparseVector),
}

impl From<SparseVector> for Element {
    fn from(v: SparseVector) -> Self {
        Element::Single(v)
    }
}

impl From<DirectSumVector> for Element {
    fn from(p: DirectSumVector) -> Self {
        Element::Pair(p)
    }
}

impl Element {
    pub fn pair(left: SparseVector, right: SparseVector) -> Self {
        Element::Pair(DirectSumVector::new(left, right))
    }

    pub fn zero_like(&self) -> Self {
        match self {
            Element::Single(v) => Element::Single(SparseVector::zero(v.kind())),
            Element::Pair(p) => Element::pair(SparseVector::zero(p.left.kind()), SparseVector::zero(p.right.kind())),
        }
    }

    pub fn as_single(&self) -> Result<&SparseVector> {
        match self {
            Element::Single(v) => Ok(v),
            Element::Pair(_) => Err(Error::ShapeMismatch("expected a single vector, found a pair".into())),
        }
    }

    pub fn as_pair(&self) -> Result<&DirectSumVector> {
        match self {
            Element::Pair(p) => Ok(p),
            Element::Single(_) => Err(Error::ShapeMismatch("expected a direct-sum pair, found a single vector".into())),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        match self {
            Element::Single(v) => v.norm_sqr(),
            Element::Pair(p) => p.norm_sqr(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Element::Single(v) => v.is_zero(),
            Element::Pair(p) => p.left.is_zero() && p.right.is_zero(),
        }
    }

    pub fn support_len(&self) -> usize {
        match self {
            Element::Single(v) => v.len(),
            Element::Pair(p) => p.left.len() + p.right.len(),
        }
    }

    /// Smallest and largest supported index over all components.
    pub fn support_bounds(&self) -> Option<(i64, i64)> {
        match self {
            Element::Single(v) => v.support_bounds(),
            Element::Pair(p) => match (p.left.support_bounds(), p.right.support_bounds()) {
                (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
                (x, None) => x,
                (None, y) => y,
            },
        }
    }

    pub fn zip_with(
        &self,
        other: &Self,
        mut f: impl FnMut(&SparseVector, &SparseVector) -> Result<SparseVector>,
    ) -> Result<Self> {
        match (self, other) {
            (Element::Single(a), Element::Single(b)) => Ok(Element::Single(f(a, b)?)),
            (Element::Pair(a), Element::Pair(b)) => Ok(Element::pair(f(&a.left, &b.left)?, f(&a.right, &b.right)?)),
            _ => Err(Error::ShapeMismatch("cannot combine a single vector with a pair".into())),
        }
    }

    pub fn map(&self, mut f: impl FnMut(&SparseVector) -> Result<SparseVector>) -> Result<Self> {
        match self {
            Element::Single(v) => Ok(Element::Single(f(v)?)),
            Element::Pair(p) => Ok(Element::pair(f(&p.left)?, f(&p.right)?)),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, by: Complex64) -> Self {
        self.map(|v| Ok(v.scale(by))).expect("scaling cannot fail")
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.distance_sqr_scaled(other, 1.0)?.sqrt())
    }

    /// `‖scale·self − other‖²`.
    pub(crate) fn distance_sqr_scaled(&self, other: &Self, scale: f64) -> Result<f64> {
        match (self, other) {
            (Element::Single(a), Element::Single(b)) => {
                a.kind().check(b.kind())?;
                Ok(a.distance_sqr_unchecked(b, scale))
            }
            (Element::Pair(a), Element::Pair(b)) => {
                a.left.kind().check(b.left.kind())?;
                a.right.kind().check(b.right.kind())?;
                Ok(a.left.distance_sqr_unchecked(&b.left, scale) + a.right.distance_sqr_unchecked(&b.right, scale))
            }
            _ => Err(Error::ShapeMismatch("cannot compare a single vector with a pair".into())),
        }
    }
}

/// A coordinate subspace or a direct sum of two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Subspace {
    Pair(DirectSumSubspace),
    Single(CoordinateSubspace),
}

impl From<CoordinateSubspace> for Subspace {
    fn from(m: CoordinateSubspace) -> Self {
        Subspace::Single(m)
    }
}

impl From<DirectSumSubspace> for Subspace {
    fn from(m: DirectSumSubspace) -> Self {
        Subspace::Pair(m)
    }
}

impl Subspace {
    pub fn pair(left: CoordinateSubspace, right: CoordinateSubspace) -> Self {
        Subspace::Pair(DirectSumSubspace::new(left, right))
    }

    pub fn contains(&self, x: &Element) -> bool {
        match (self, x) {
            (Subspace::Single(m), Element::Single(v)) => m.contains(v),
            (Subspace::Pair(m), Element::Pair(p)) => m.contains(p),
            _ => false,
        }
    }

    pub fn is_nontrivial(&self) -> bool {
        match self {
            Subspace::Single(m) => m.is_nontrivial(),
            Subspace::Pair(m) => {
                !(m.left.is_empty() && m.right.is_empty()) && !(m.left.is_full() && m.right.is_full())
            }
        }
    }

    pub fn as_single(&self) -> Result<&CoordinateSubspace> {
        match self {
            Subspace::Single(m) => Ok(m),
            Subspace::Pair(_) => Err(Error::ShapeMismatch("expected a single subspace, found a direct sum".into())),
        }
    }

    pub fn as_pair(&self) -> Result<&DirectSumSubspace> {
        match self {
            Subspace::Pair(m) => Ok(m),
            Subspace::Single(_) => Err(Error::ShapeMismatch("expected a direct-sum subspace".into())),
        }
    }

    /// Orthogonal distance of `x` to the subspace (componentwise for pairs).
    pub fn distance(&self, x: &Element) -> Result<f64> {
        Ok(self.distance_sqr(x)?.sqrt())
    }

    pub(crate) fn distance_sqr(&self, x: &Element) -> Result<f64> {
        match (self, x) {
            (Subspace::Single(m), Element::Single(v)) => {
                m.space().check(v.kind())?;
                Ok(m.distance_sqr_unchecked(v))
            }
            (Subspace::Pair(m), Element::Pair(p)) => {
                m.left.space().check(p.left.kind())?;
                m.right.space().check(p.right.kind())?;
                Ok(m.left.distance_sqr_unchecked(&p.left) + m.right.distance_sqr_unchecked(&p.right))
            }
            _ => Err(Error::ShapeMismatch("subspace and element shapes differ".into())),
        }
    }
}

/// `‖v‖ = √(Σ|c_i|²)`
pub fn norm(v: &SparseVector) -> f64 {
    v.norm()
}

/// Distance from `v` to the coordinate subspace `m`.
pub fn distance_to_subspace(v: &SparseVector, m: &CoordinateSubspace) -> Result<f64> {
    m.distance(v)
}

pub fn direct_sum_norm(p: &DirectSumVector) -> f64 {
    p.norm()
}

/// Deterministic finite net of `m`: every vector supported on the first
/// `support_size` indices of `m` (in [`IndexOrder`]) with coefficients drawn
/// from `grid` and norm at most `radius_cap`.
///
/// Vectors are enumerated lexicographically in grid order, the first index
/// being the most significant digit. If `m` has fewer than `support_size`
/// indices the net uses all of them.
pub fn make_net(m: &CoordinateSubspace, support_size: usize, grid: &[f64], radius_cap: f64) -> Result<Vec<SparseVector>> {
    if support_size == 0 {
        return Err(Error::InvalidParameter("net support size must be at least 1".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidParameter("net grid values must be finite".into()));
    }
    if m.is_empty() {
        return Err(Error::EmptySubspace);
    }
    let indices = m.first_indices(support_size);
    if indices.is_empty() {
        return Err(Error::EmptySubspace);
    }
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut digits = vec![0usize; indices.len()];
    loop {
        let v = SparseVector::from_real(m.space(), indices.iter().zip(&digits).map(|(i, d)| (*i, grid[*d])))?;
        if v.norm() <= radius_cap {
            out.push(v);
        }
        // Odometer increment, last position fastest.
        let mut pos = indices.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < grid.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bil(entries: &[(i64, f64)]) -> SparseVector {
        SparseVector::from_real(SpaceKind::Bilateral, entries.iter().copied()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&SparseVector::basis(SpaceKind::Bilateral, 0).unwrap()), 1.0);
        assert_eq!(norm(&SparseVector::zero(SpaceKind::Bilateral)), 0.0);
        assert_eq!(norm(&bil(&[(2, 3.0), (5, -4.0)])), 5.0);
    }

    #[test]
    fn distance_examples() {
        let evens = CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).unwrap();
        assert_eq!(distance_to_subspace(&bil(&[(0, 1.0), (1, 1.0)]), &evens).unwrap(), 1.0);
        assert_eq!(distance_to_subspace(&bil(&[(0, 1.0), (-4, 7.0)]), &evens).unwrap(), 0.0);
        assert_eq!(distance_to_subspace(&bil(&[(1, 2.0)]), &evens).unwrap(), 2.0);
    }

    #[test]
    fn distance_rejects_kind_mismatch() {
        let m = CoordinateSubspace::half_line(SpaceKind::Unilateral, 0);
        let err = distance_to_subspace(&bil(&[(0, 1.0)]), &m).unwrap_err();
        assert!(matches!(err, Error::SpaceMismatch { .. }));
    }

    #[test]
    fn direct_sum_norm_examples() {
        let z = SparseVector::zero(SpaceKind::Bilateral);
        assert_eq!(direct_sum_norm(&DirectSumVector::new(bil(&[(0, 1.0)]), z.clone())), 1.0);
        assert_eq!(direct_sum_norm(&DirectSumVector::new(bil(&[(0, 3.0)]), bil(&[(1, 4.0)]))), 5.0);
        assert_eq!(direct_sum_norm(&DirectSumVector::new(z.clone(), z)), 0.0);
    }

    #[test]
    fn net_examples() {
        let h = CoordinateSubspace::half_line(SpaceKind::Unilateral, 0);
        let net = make_net(&h, 1, &[-1.0, 0.0, 1.0], 2.0).unwrap();
        let e0 = SparseVector::basis(SpaceKind::Unilateral, 0).unwrap();
        assert_eq!(net, vec![e0.scale(Complex64::new(-1.0, 0.0)), SparseVector::zero(SpaceKind::Unilateral), e0]);

        let evens = CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).unwrap();
        let net = make_net(&evens, 1, &[1.0, 2.0], 10.0).unwrap();
        assert!(net.iter().all(|v| v.support().eq([0])));

        let net = make_net(&evens, 3, &[0.0], 1.0).unwrap();
        assert_eq!(net, vec![SparseVector::zero(SpaceKind::Bilateral)]);
    }

    #[test]
    fn net_of_empty_subspace_is_an_error() {
        let empty = CoordinateSubspace::residues(SpaceKind::Bilateral, 3, []).unwrap();
        assert_eq!(make_net(&empty, 2, &[1.0], 1.0), Err(Error::EmptySubspace));
        let none = CoordinateSubspace::finite(SpaceKind::Unilateral, [-3, -1]);
        assert_eq!(make_net(&none, 2, &[1.0], 1.0), Err(Error::EmptySubspace));
    }

    #[test]
    fn net_respects_radius_cap_and_membership() {
        let m = CoordinateSubspace::residues(SpaceKind::Bilateral, 3, [1, 2]).unwrap();
        let net = make_net(&m, 3, &[-1.0, 0.5, 1.0], 1.5).unwrap();
        assert!(!net.is_empty());
        for v in &net {
            assert!(m.contains(v));
            assert!(v.norm() <= 1.5);
        }
        assert_eq!(m.first_indices(4), vec![1, -1, 2, -2]);
    }

    #[test]
    fn index_order_is_symmetric_nonnegative_first() {
        let order: Vec<i64> = IndexOrder::new(SpaceKind::Bilateral).take(5).collect();
        assert_eq!(order, vec![0, 1, -1, 2, -2]);
        let order: Vec<i64> = IndexOrder::new(SpaceKind::Unilateral).take(3).collect();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn nontriviality() {
        assert!(!CoordinateSubspace::whole(SpaceKind::Bilateral).is_nontrivial());
        assert!(!CoordinateSubspace::residues(SpaceKind::Bilateral, 4, []).unwrap().is_nontrivial());
        assert!(CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [1]).unwrap().is_nontrivial());
        assert!(!CoordinateSubspace::half_line(SpaceKind::Unilateral, 0).is_nontrivial());
        assert!(CoordinateSubspace::half_line(SpaceKind::Unilateral, 3).is_nontrivial());
        assert!(CoordinateSubspace::half_line(SpaceKind::Bilateral, -3).is_nontrivial());
    }

    #[test]
    fn unilateral_rejects_negative_indices() {
        assert_eq!(SparseVector::basis(SpaceKind::Unilateral, -1), Err(Error::NegativeIndex(-1)));
    }

    #[test]
    fn cancellation_prunes_exact_zeros() {
        let v = bil(&[(3, 1.5)]);
        assert!(v.sub(&v).unwrap().is_zero());
    }

    #[test]
    fn invalid_residues_rejected() {
        assert!(CoordinateSubspace::residues(SpaceKind::Bilateral, 0, []).is_err());
        assert!(CoordinateSubspace::residues(SpaceKind::Bilateral, 3, [3]).is_err());
    }

    #[test]
    fn serde_literals() {
        let m: CoordinateSubspace =
            serde_json::from_str(r#"{"space":"bilateral","kind":"residues","modulus":2,"residues":[0]}"#).unwrap();
        assert_eq!(m, CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).unwrap());
        let v: SparseVector = serde_json::from_str(r#"{"space":"bilateral","entries":[[0,0.1],[3,[0.5,-1]]]}"#).unwrap();
        assert_eq!(v.get(0).re, 0.1);
        assert_eq!(v.get(3), Complex64::new(0.5, -1.0));
        let e: Element = serde_json::from_str(&serde_json::to_string(&Element::pair(v.clone(), v.clone())).unwrap()).unwrap();
        assert_eq!(e, Element::pair(v.clone(), v));
        assert!(serde_json::from_str::<SparseVector>(r#"{"space":"unilateral","entries":[[-1,1]]}"#).is_err());
    }

    #[test]
    fn translate_unilateral_subspaces() {
        let m = CoordinateSubspace::finite(SpaceKind::Unilateral, [0, 2, 5]);
        assert_eq!(m.translate(-2).unwrap().first_indices(10), vec![0, 3]);
        let h = CoordinateSubspace::half_line(SpaceKind::Unilateral, 4);
        assert_eq!(h.translate(-6).unwrap().first_indices(2), vec![0, 1]);
        let evens = CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).unwrap();
        assert_eq!(evens.translate(1).unwrap(), CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [1]).unwrap());
        let uni_evens = CoordinateSubspace::residues(SpaceKind::Unilateral, 2, [0]).unwrap();
        assert_eq!(uni_evens.translate(1).unwrap().first_indices(2), vec![1, 3]);
        assert!(uni_evens.translate(2).is_err());
    }
}
