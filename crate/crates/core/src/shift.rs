//! Weighted shifts, the backward shift and operator expressions built from
//! them, with exact sparse action.
//!
//! A forward weighted shift acts by `T e_n = w_n e_{n+1}`, so that
//! `‖Tⁿ e_m‖ = ∏_{j=m}^{m+n−1} w_j` and `T⁻¹ e_{n+1} = (1/w_n) e_n`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{CoordinateSubspace, Element, IndexOrder, IndexSet, SpaceKind, SparseVector, Subspace};
use crate::weights::{ScaledFloat, WeightSequence};

/// Forward weighted shift `T e_n = w_n e_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightedShiftRepr", into = "WeightedShiftRepr")]
pub struct WeightedShift {
    weights: WeightSequence,
    space: SpaceKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightedShiftRepr {
    weights: WeightSequence,
    #[serde(default)]
    space: SpaceKind,
}

impl TryFrom<WeightedShiftRepr> for WeightedShift {
    type Error = Error;

    fn try_from(r: WeightedShiftRepr) -> Result<Self> {
        WeightedShift::new(r.weights, r.space)
    }
}

impl From<WeightedShift> for WeightedShiftRepr {
    fn from(t: WeightedShift) -> Self {
        WeightedShiftRepr { weights: t.weights, space: t.space }
    }
}

impl WeightedShift {
    pub fn new(weights: WeightSequence, space: SpaceKind) -> Result<Self> {
        weights.validate()?;
        Ok(Self { weights, space })
    }

    pub fn bilateral(weights: WeightSequence) -> Self {
        Self::new(weights, SpaceKind::Bilateral).expect("weights were validated at construction")
    }

    /// The unweighted forward shift.
    pub fn unweighted(space: SpaceKind) -> Self {
        Self { weights: WeightSequence::Constant { c: 1.0 }, space }
    }

    pub fn weights(&self) -> &WeightSequence {
        &self.weights
    }

    pub fn space(&self) -> SpaceKind {
        self.space
    }

    /// Bilateral shifts with weights bounded away from zero are invertible;
    /// every generator here has a positive infimum.
    pub fn is_invertible(&self) -> bool {
        self.space == SpaceKind::Bilateral && self.weights.inf() > 0.0
    }

    fn require_invertible(&self) -> Result<()> {
        if self.is_invertible() {
            Ok(())
        } else {
            Err(Error::NotInvertible(format!("{} weighted shift", self.space)))
        }
    }

    /// `Tⁿ v` for any integer `n`, one product per support index.
    pub fn apply_power(&self, v: &SparseVector, n: i64) -> Result<SparseVector> {
        if v.kind() != self.space {
            return Err(Error::SpaceMismatch { expected: self.space, found: v.kind() });
        }
        if n == 0 {
            return Ok(v.clone());
        }
        if n < 0 {
            self.require_invertible()?;
        }
        let steps = n.unsigned_abs();
        let mut out = BTreeMap::new();
        for (i, c) in v.entries() {
            let (target, factor) = if n > 0 {
                (checked_offset(i, n)?, self.weights.product(i, steps))
            } else {
                let j = checked_offset(i, n)?;
                (j, self.weights.product(j, steps).recip())
            };
            let coeff = scale_complex(c, factor);
            if coeff != Complex64::new(0.0, 0.0) {
                out.insert(target, coeff);
            }
        }
        Ok(SparseVector::from_map_unchecked(self.space, out))
    }

    /// `sup_n w_n`
    pub fn operator_norm_bound(&self) -> f64 {
        self.weights.sup()
    }
}

fn checked_offset(i: i64, n: i64) -> Result<i64> {
    i.checked_add(n).ok_or_else(|| Error::Overflow(format!("index {i} shifted by {n}")))
}

/// `c · factor`, applying the power-of-two part of `factor` exactly.
fn scale_complex(c: Complex64, factor: ScaledFloat) -> Complex64 {
    let m = c * factor.mantissa();
    let e = factor.exponent();
    if e == 0 {
        return m;
    }
    let half = e / 2;
    let s1 = crate::space::pow2(half);
    let s2 = crate::space::pow2(e - half);
    Complex64::new(m.re * s1 * s2, m.im * s1 * s2)
}

/// Which index range the backward product `∏ 1/w_{−j}` runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BackwardIndexConvention {
    /// `∏_{j=1+m}^{n+m} 1/w_{−j}`, i.e. reciprocal weights at `−m−n, …, −m−1`.
    #[default]
    #[serde(rename = "thm12")]
    MirroredBase,
    /// `∏_{j=1−m}^{n−m} 1/w_{−j}`, i.e. reciprocal weights at `m−n, …, m−1`;
    /// this equals `‖T^{−n} e_m‖`.
    #[serde(rename = "thm13")]
    InversePath,
}

impl std::str::FromStr for BackwardIndexConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm12" => Ok(BackwardIndexConvention::MirroredBase),
            "thm13" => Ok(BackwardIndexConvention::InversePath),
            other => Err(Error::InvalidParameter(format!("unknown backward index convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductDirection {
    Forward,
    Backward,
}

/// Log of the weight product controlling `‖Tⁿ e_m‖` (forward) or the
/// reciprocal product on the negative side (backward).
pub fn shift_power_norm(
    t: &WeightedShift,
    m: i64,
    n: u64,
    direction: ProductDirection,
    convention: BackwardIndexConvention,
) -> Result<f64> {
    let len = n;
    let n = i64::try_from(n).map_err(|_| Error::Overflow(format!("power {len}")))?;
    match direction {
        ProductDirection::Forward => Ok(t.weights.log_product(m, len)),
        ProductDirection::Backward => {
            t.require_invertible()?;
            let start = match convention {
                BackwardIndexConvention::MirroredBase => m.checked_neg().and_then(|x| x.checked_sub(n)),
                BackwardIndexConvention::InversePath => m.checked_sub(n),
            }
            .ok_or_else(|| Error::Overflow(format!("backward product from {m} over {n} steps")))?;
            Ok(-t.weights.log_product(start, len))
        }
    }
}

/// A scalar literal: a real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar(pub Complex64);

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Real(f64),
            Complex([f64; 2]),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Real(re) => Scalar(Complex64::new(re, 0.0)),
            Repr::Complex([re, im]) => Scalar(Complex64::new(re, im)),
        })
    }
}

/// Expression tree of bounded operators on a sequence space or a direct sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorExpr {
    Shift(WeightedShift),
    /// `B e_n = e_{n−1}`; on ℓ²(ℕ), `B e_0 = 0`.
    Backward {
        #[serde(default)]
        space: SpaceKind,
    },
    Identity,
    Scale {
        by: Scalar,
        of: Box<OperatorExpr>,
    },
    Power {
        n: i64,
        of: Box<OperatorExpr>,
    },
    /// `outer ∘ inner`
    Compose {
        outer: Box<OperatorExpr>,
        inner: Box<OperatorExpr>,
    },
    DirectSum {
        left: Box<OperatorExpr>,
        right: Box<OperatorExpr>,
    },
}

/// Shape of the space an expression acts on, when it can be inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Single(Option<SpaceKind>),
    Pair(Option<SpaceKind>, Option<SpaceKind>),
}

/// Basis-to-basis operators `e_s ↦ c_s e_{s+offset}` (or 0). Every
/// expression other than a direct sum has this form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Monomial {
    pub offset: i64,
    /// Lowest intermediate offset along the path; on ℓ²(ℕ) the image of
    /// `e_s` is nonzero iff `s + min_prefix ≥ 0`.
    pub min_prefix: i64,
    /// The operator is identically zero.
    pub vanishes: bool,
}

impl Monomial {
    const IDENTITY: Monomial = Monomial { offset: 0, min_prefix: 0, vanishes: false };

    fn then(self, outer: Monomial) -> Option<Monomial> {
        Some(Monomial {
            offset: self.offset.checked_add(outer.offset)?,
            min_prefix: self.min_prefix.min(self.offset.checked_add(outer.min_prefix)?),
            vanishes: self.vanishes || outer.vanishes,
        })
    }

    /// `self^n`, `n ≥ 0`.
    pub fn pow(self, n: i64) -> Option<Monomial> {
        if n < 0 {
            // Inverses only exist on ℓ²(ℤ), where annihilation never happens.
            let offset = self.offset.checked_mul(n)?;
            return Some(Monomial { offset, min_prefix: offset.min(0), vanishes: self.vanishes });
        }
        if n == 0 {
            return Some(Monomial::IDENTITY);
        }
        let offset = self.offset.checked_mul(n)?;
        let min_prefix = if self.offset >= 0 {
            self.min_prefix
        } else {
            self.offset.checked_mul(n - 1)?.checked_add(self.min_prefix)?
        };
        Some(Monomial { offset, min_prefix, vanishes: self.vanishes })
    }

    /// Image index of `e_s`, or `None` if it is annihilated.
    pub fn image(&self, s: i64, space: SpaceKind) -> Option<i64> {
        if self.vanishes {
            return None;
        }
        if space == SpaceKind::Unilateral && s.checked_add(self.min_prefix).is_none_or(|x| x < 0) {
            return None;
        }
        s.checked_add(self.offset)
    }
}

/// Result of an exact invariance decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariance {
    Holds,
    Fails,
    /// The operator shape has no symbolic rule; use a sampled check.
    Undecided,
}

impl Invariance {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Invariance::Holds
        } else {
            Invariance::Fails
        }
    }

    pub fn holds(self) -> Option<bool> {
        match self {
            Invariance::Holds => Some(true),
            Invariance::Fails => Some(false),
            Invariance::Undecided => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommuteReport {
    pub commutes: bool,
    pub max_residual: f64,
}

impl OperatorExpr {
    pub fn shift(weights: WeightSequence) -> Self {
        OperatorExpr::Shift(WeightedShift::bilateral(weights))
    }

    /// `λB` on ℓ²(ℕ).
    pub fn rolewicz(lambda: f64) -> Self {
        OperatorExpr::Backward { space: SpaceKind::Unilateral }.scaled(Complex64::new(lambda, 0.0))
    }

    pub fn scaled(self, by: Complex64) -> Self {
        OperatorExpr::Scale { by: Scalar(by), of: Box::new(self) }
    }

    pub fn pow(self, n: i64) -> Self {
        OperatorExpr::Power { n, of: Box::new(self) }
    }

    pub fn after(self, inner: OperatorExpr) -> Self {
        OperatorExpr::Compose { outer: Box::new(self), inner: Box::new(inner) }
    }

    pub fn direct_sum(left: OperatorExpr, right: OperatorExpr) -> Self {
        OperatorExpr::DirectSum { left: Box::new(left), right: Box::new(right) }
    }

    pub fn as_shift(&self) -> Option<&WeightedShift> {
        match self {
            OperatorExpr::Shift(t) => Some(t),
            _ => None,
        }
    }

    pub fn domain(&self) -> Domain {
        fn merge(a: Option<SpaceKind>, b: Option<SpaceKind>) -> Option<SpaceKind> {
            a.or(b)
        }
        match self {
            OperatorExpr::Shift(t) => Domain::Single(Some(t.space)),
            OperatorExpr::Backward { space } => Domain::Single(Some(*space)),
            OperatorExpr::Identity => Domain::Single(None),
            OperatorExpr::Scale { of, .. } | OperatorExpr::Power { of, .. } => of.domain(),
            OperatorExpr::Compose { outer, inner } => match (outer.domain(), inner.domain()) {
                (Domain::Single(a), Domain::Single(b)) => Domain::Single(merge(a, b)),
                (Domain::Pair(a, b), Domain::Pair(c, d)) => Domain::Pair(merge(a, c), merge(b, d)),
                (Domain::Pair(a, b), Domain::Single(None)) | (Domain::Single(None), Domain::Pair(a, b)) => {
                    Domain::Pair(a, b)
                }
                (d, _) => d,
            },
            OperatorExpr::DirectSum { left, right } => {
                let side = |d: Domain| match d {
                    Domain::Single(k) => k,
                    Domain::Pair(a, _) => a,
                };
                Domain::Pair(side(left.domain()), side(right.domain()))
            }
        }
    }

    pub fn is_invertible(&self) -> bool {
        match self {
            OperatorExpr::Shift(t) => t.is_invertible(),
            OperatorExpr::Backward { space } => *space == SpaceKind::Bilateral,
            OperatorExpr::Identity => true,
            OperatorExpr::Scale { by, of } => by.0 != Complex64::new(0.0, 0.0) && of.is_invertible(),
            OperatorExpr::Power { n, of } => *n == 0 || of.is_invertible(),
            OperatorExpr::Compose { outer, inner } => outer.is_invertible() && inner.is_invertible(),
            OperatorExpr::DirectSum { left, right } => left.is_invertible() && right.is_invertible(),
        }
    }

    /// The basis-to-basis form of the expression, if it has one.
    pub fn monomial(&self) -> Option<Monomial> {
        match self {
            OperatorExpr::Shift(_) => Some(Monomial { offset: 1, min_prefix: 0, vanishes: false }),
            OperatorExpr::Backward { space } => Some(Monomial {
                offset: -1,
                min_prefix: if *space == SpaceKind::Unilateral { -1 } else { 0 },
                vanishes: false,
            }),
            OperatorExpr::Identity => Some(Monomial::IDENTITY),
            OperatorExpr::Scale { by, of } => {
                let m = of.monomial()?;
                Some(Monomial { vanishes: m.vanishes || by.0 == Complex64::new(0.0, 0.0), ..m })
            }
            OperatorExpr::Power { n, of } => of.monomial()?.pow(*n),
            OperatorExpr::Compose { outer, inner } => inner.monomial()?.then(outer.monomial()?),
            OperatorExpr::DirectSum { .. } => None,
        }
    }

    /// Action on a single vector.
    pub fn apply_vec(&self, v: &SparseVector) -> Result<SparseVector> {
        match self {
            OperatorExpr::Shift(t) => t.apply_power(v, 1),
            OperatorExpr::Backward { space } => backward_power(*space, v, 1),
            OperatorExpr::Identity => Ok(v.clone()),
            OperatorExpr::Scale { by, of } => Ok(of.apply_vec(v)?.scale(by.0)),
            OperatorExpr::Power { n, of } => of.apply_power_vec(v, *n),
            OperatorExpr::Compose { outer, inner } => outer.apply_vec(&inner.apply_vec(v)?),
            OperatorExpr::DirectSum { .. } => {
                Err(Error::ShapeMismatch("a direct-sum operator needs a pair, got a single vector".into()))
            }
        }
    }

    fn apply_inverse_vec(&self, v: &SparseVector) -> Result<SparseVector> {
        match self {
            OperatorExpr::Compose { outer, inner } => inner.apply_inverse_vec(&outer.apply_inverse_vec(v)?),
            other => other.apply_power_vec(v, -1),
        }
    }

    /// `selfⁿ v`; negative `n` requires invertibility.
    pub fn apply_power_vec(&self, v: &SparseVector, n: i64) -> Result<SparseVector> {
        if n == 0 {
            return Ok(v.clone());
        }
        match self {
            OperatorExpr::Shift(t) => t.apply_power(v, n),
            OperatorExpr::Backward { space } => backward_power(*space, v, n),
            OperatorExpr::Identity => Ok(v.clone()),
            OperatorExpr::Scale { by, of } => {
                if n < 0 && by.0 == Complex64::new(0.0, 0.0) {
                    return Err(Error::NotInvertible("zero multiple".into()));
                }
                let exp = i32::try_from(n).map_err(|_| Error::Overflow(format!("scalar power {n}")))?;
                Ok(of.apply_power_vec(v, n)?.scale(by.0.powi(exp)))
            }
            OperatorExpr::Power { n: m, of } => {
                let total = m.checked_mul(n).ok_or_else(|| Error::Overflow(format!("power {m}·{n}")))?;
                of.apply_power_vec(v, total)
            }
            OperatorExpr::Compose { .. } => {
                if n < 0 && !self.is_invertible() {
                    return Err(Error::NotInvertible("composition".into()));
                }
                let mut cur = v.clone();
                for _ in 0..n.unsigned_abs() {
                    cur = if n > 0 { self.apply_vec(&cur)? } else { self.apply_inverse_vec(&cur)? };
                }
                Ok(cur)
            }
            OperatorExpr::DirectSum { .. } => {
                Err(Error::ShapeMismatch("a direct-sum operator needs a pair, got a single vector".into()))
            }
        }
    }

    /// Action on a vector or a direct-sum pair.
    pub fn apply(&self, x: &Element) -> Result<Element> {
        self.apply_power(x, 1)
    }

    /// `selfⁿ x`; direct sums act componentwise.
    pub fn apply_power(&self, x: &Element, n: i64) -> Result<Element> {
        match (self, x) {
            (_, _) if n == 0 => Ok(x.clone()),
            (OperatorExpr::DirectSum { left, right }, Element::Pair(p)) => {
                Ok(Element::pair(left.apply_power_vec(&p.left, n)?, right.apply_power_vec(&p.right, n)?))
            }
            (OperatorExpr::Identity, _) => Ok(x.clone()),
            (OperatorExpr::Scale { by, of }, Element::Pair(_)) => {
                if n < 0 && by.0 == Complex64::new(0.0, 0.0) {
                    return Err(Error::NotInvertible("zero multiple".into()));
                }
                let exp = i32::try_from(n).map_err(|_| Error::Overflow(format!("scalar power {n}")))?;
                Ok(of.apply_power(x, n)?.scale(by.0.powi(exp)))
            }
            (OperatorExpr::Power { n: m, of }, Element::Pair(_)) => {
                let total = m.checked_mul(n).ok_or_else(|| Error::Overflow(format!("power {m}·{n}")))?;
                of.apply_power(x, total)
            }
            (OperatorExpr::Compose { outer, inner }, Element::Pair(_)) => {
                if n < 0 {
                    return Err(Error::Unsupported("negative powers of composed direct-sum operators".into()));
                }
                let mut cur = x.clone();
                for _ in 0..n {
                    cur = outer.apply(&inner.apply(&cur)?)?;
                }
                Ok(cur)
            }
            (_, Element::Pair(_)) => Err(Error::ShapeMismatch("a single-space operator cannot act on a pair".into())),
            (_, Element::Single(v)) => Ok(Element::Single(self.apply_power_vec(v, n)?)),
        }
    }

    /// An upper bound for the operator norm.
    pub fn operator_norm_bound(&self) -> f64 {
        match self {
            OperatorExpr::Shift(t) => t.operator_norm_bound(),
            OperatorExpr::Backward { .. } | OperatorExpr::Identity => 1.0,
            OperatorExpr::Scale { by, of } => by.0.norm() * of.operator_norm_bound(),
            OperatorExpr::Power { n, of } => {
                if *n >= 0 {
                    of.operator_norm_bound().powi((*n).min(i32::MAX as i64) as i32)
                } else if let OperatorExpr::Shift(t) = of.as_ref() {
                    (1.0 / t.weights().inf()).powi((-*n).min(i32::MAX as i64) as i32)
                } else {
                    f64::INFINITY
                }
            }
            OperatorExpr::Compose { outer, inner } => outer.operator_norm_bound() * inner.operator_norm_bound(),
            OperatorExpr::DirectSum { left, right } => left.operator_norm_bound().max(right.operator_norm_bound()),
        }
    }
}

fn backward_power(space: SpaceKind, v: &SparseVector, n: i64) -> Result<SparseVector> {
    if v.kind() != space {
        return Err(Error::SpaceMismatch { expected: space, found: v.kind() });
    }
    if n < 0 && space == SpaceKind::Unilateral {
        return Err(Error::NotInvertible("backward shift on the unilateral space".into()));
    }
    let offset = n.checked_neg().ok_or_else(|| Error::Overflow(format!("power {n}")))?;
    let mut out = BTreeMap::new();
    for (i, c) in v.entries() {
        let j = checked_offset(i, offset)?;
        if space.admits(j) {
            out.insert(j, c);
        }
    }
    Ok(SparseVector::from_map_unchecked(space, out))
}

/// `op` applied to each basis vector, as the image index (if any).
fn monomial_invariance(m: Monomial, sub: &CoordinateSubspace) -> bool {
    if m.vanishes {
        return true;
    }
    let space = sub.space();
    let d = m.offset;
    // Smallest surviving index of the space.
    let lo = match space {
        SpaceKind::Bilateral => None,
        SpaceKind::Unilateral => Some(0i64.max(-m.min_prefix)),
    };
    let survives = |s: i64| space.admits(s) && lo.is_none_or(|l| s >= l);
    match normalize(sub.index_set()) {
        IndexSet::Residues { modulus, residues } => {
            let p = modulus as i64;
            residues.iter().all(|r| residues.contains(&((*r as i64 + d).rem_euclid(p) as u64)))
        }
        IndexSet::HalfLine { start } => {
            if d >= 0 {
                return true;
            }
            let first = match lo {
                Some(l) => start.max(l),
                None => start,
            };
            first.saturating_add(d) >= start
        }
        IndexSet::Finite { indices } => {
            indices.iter().filter(|s| survives(**s)).all(|s| s.checked_add(d).is_some_and(|t| indices.contains(&t)))
        }
        IndexSet::Complement { of } => match *of {
            // s ∉ F surviving ⇒ s + d ∉ F  ⇔  every t ∈ F has t − d ∈ F or not surviving.
            IndexSet::Finite { indices } => indices
                .iter()
                .filter(|t| space.admits(**t))
                .all(|t| t.checked_sub(d).is_none_or(|s| !survives(s) || indices.contains(&s))),
            IndexSet::HalfLine { start } => {
                if d <= 0 {
                    return true;
                }
                let t = match space {
                    SpaceKind::Bilateral => start,
                    SpaceKind::Unilateral => start.max(0),
                };
                t.checked_sub(d).is_none_or(|s| !survives(s) || s >= start)
            }
            _ => unreachable!("normalize removes nested complements and residue complements"),
        },
    }
}

fn normalize(set: &IndexSet) -> IndexSet {
    match set {
        IndexSet::Complement { of } => match of.as_ref() {
            IndexSet::Complement { of: inner } => normalize(inner),
            IndexSet::Residues { .. } => normalize(&of.complement()),
            _ => set.clone(),
        },
        other => other.clone(),
    }
}

/// Exact decision of `opⁿ M ⊆ M` for coordinate `M`.
pub fn invariance_check(op: &OperatorExpr, subspace: &Subspace, n: i64) -> Invariance {
    match (op, subspace) {
        (OperatorExpr::DirectSum { left, right }, Subspace::Pair(m)) => {
            let l = invariance_check(left, &Subspace::Single(m.left.clone()), n);
            let r = invariance_check(right, &Subspace::Single(m.right.clone()), n);
            match (l, r) {
                (Invariance::Fails, _) | (_, Invariance::Fails) => Invariance::Fails,
                (Invariance::Holds, Invariance::Holds) => Invariance::Holds,
                _ => Invariance::Undecided,
            }
        }
        (_, Subspace::Single(m)) => match op.monomial().and_then(|mono| mono.pow(n)) {
            Some(mono) => Invariance::from_bool(monomial_invariance(mono, m)),
            None => Invariance::Undecided,
        },
        _ => Invariance::Undecided,
    }
}

/// Sampled evidence for `opⁿ M ⊆ M`: checks the images of the first
/// `window` basis vectors of `M` (of each component, for direct sums).
pub fn sampled_invariance_check(op: &OperatorExpr, subspace: &Subspace, n: i64, window: usize) -> Result<bool> {
    match subspace {
        Subspace::Single(m) => {
            for i in m.first_indices(window) {
                let image = op.apply_power(&SparseVector::basis(m.space(), i)?.into(), n)?;
                if !subspace.contains(&image) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Subspace::Pair(m) => {
            let zl = SparseVector::zero(m.left.space());
            let zr = SparseVector::zero(m.right.space());
            for i in m.left.first_indices(window) {
                let image = op.apply_power(&Element::pair(SparseVector::basis(m.left.space(), i)?, zr.clone()), n)?;
                if !subspace.contains(&image) {
                    return Ok(false);
                }
            }
            for i in m.right.first_indices(window) {
                let image = op.apply_power(&Element::pair(zl.clone(), SparseVector::basis(m.right.space(), i)?), n)?;
                if !subspace.contains(&image) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Maximum of `‖(ab − ba) e‖` over basis vectors `e_i`, `|i| ≤ window`
/// (both summands for direct sums).
pub fn commute_check(a: &OperatorExpr, b: &OperatorExpr, window: u64, tol: f64) -> Result<CommuteReport> {
    if window == 0 {
        return Err(Error::InvalidParameter("commutation window must be at least 1".into()));
    }
    let w = i64::try_from(window).map_err(|_| Error::Overflow("window".into()))?;
    let domain = match (a.domain(), b.domain()) {
        (Domain::Pair(x, y), Domain::Pair(u, v)) => Domain::Pair(x.or(u), y.or(v)),
        (Domain::Pair(x, y), _) | (_, Domain::Pair(x, y)) => Domain::Pair(x, y),
        (Domain::Single(x), Domain::Single(y)) => Domain::Single(x.or(y)),
    };
    let indices = |kind: SpaceKind| IndexOrder::new(kind).take_while(move |i| i.abs() <= w).collect::<Vec<_>>();
    let mut basis: Vec<Element> = Vec::new();
    match domain {
        Domain::Single(k) => {
            let k = k.unwrap_or_default();
            for i in indices(k) {
                basis.push(SparseVector::basis(k, i)?.into());
            }
        }
        Domain::Pair(l, r) => {
            let (l, r) = (l.unwrap_or_default(), r.unwrap_or_default());
            for i in indices(l) {
                basis.push(Element::pair(SparseVector::basis(l, i)?, SparseVector::zero(r)));
            }
            for i in indices(r) {
                basis.push(Element::pair(SparseVector::zero(l), SparseVector::basis(r, i)?));
            }
        }
    }
    let mut max_residual: f64 = 0.0;
    for e in &basis {
        let ab = a.apply(&b.apply(e)?)?;
        let ba = b.apply(&a.apply(e)?)?;
        max_residual = max_residual.max(ab.distance(&ba)?);
    }
    Ok(CommuteReport { commutes: max_residual <= tol, max_residual })
}

/// `sup_n w_n`
pub fn operator_norm_bound(t: &WeightedShift) -> f64 {
    t.operator_norm_bound()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::NegativeRule;

    const B: SpaceKind = SpaceKind::Bilateral;
    const U: SpaceKind = SpaceKind::Unilateral;

    fn e(kind: SpaceKind, i: i64) -> SparseVector {
        SparseVector::basis(kind, i).unwrap()
    }

    fn good_shift() -> WeightedShift {
        WeightedShift::bilateral(WeightSequence::piecewise(0.5, 2.0).unwrap())
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn apply_examples() {
        let t = OperatorExpr::shift(WeightSequence::constant(2.0).unwrap());
        assert_eq!(t.apply_vec(&e(B, 0)).unwrap(), e(B, 1).scale(c(2.0)));
        let rolewicz = OperatorExpr::rolewicz(2.0);
        assert!(rolewicz.apply_vec(&e(U, 0)).unwrap().is_zero());
        let sum = OperatorExpr::direct_sum(OperatorExpr::Identity, t);
        let out = sum.apply(&Element::pair(e(B, 0), e(B, 0))).unwrap();
        assert_eq!(out, Element::pair(e(B, 0), e(B, 1).scale(c(2.0))));
    }

    #[test]
    fn apply_power_examples() {
        let t = good_shift();
        assert_eq!(t.apply_power(&e(B, 0), 4).unwrap(), e(B, 4).scale(c(1.0 / 16.0)));
        assert_eq!(t.apply_power(&e(B, 0), -3).unwrap(), e(B, -3).scale(c(1.0 / 8.0)));
        let v = SparseVector::from_real(B, [(-2, 1.5), (7, -0.25)]).unwrap();
        assert_eq!(t.apply_power(&v, 0).unwrap(), v);
        let rolewicz = OperatorExpr::rolewicz(2.0);
        assert_eq!(rolewicz.apply_power_vec(&e(U, 5), 3).unwrap(), e(U, 2).scale(c(8.0)));
    }

    #[test]
    fn apply_errors() {
        let t = OperatorExpr::Shift(WeightedShift::new(WeightSequence::constant(2.0).unwrap(), U).unwrap());
        assert!(matches!(t.apply_power_vec(&e(U, 3), -1), Err(Error::NotInvertible(_))));
        assert!(matches!(t.apply_vec(&e(B, 3)), Err(Error::SpaceMismatch { .. })));
        let b = OperatorExpr::Backward { space: U };
        assert!(matches!(b.apply_power_vec(&e(U, 3), -1), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn composed_expression_matches_direct_action() {
        let t = OperatorExpr::shift(WeightSequence::piecewise(0.5, 3.0).unwrap());
        let expr = OperatorExpr::Backward { space: B }.after(t.clone()).scaled(c(3.0));
        let v = SparseVector::from_real(B, [(-2, 1.0), (1, 2.0)]).unwrap();
        let direct = OperatorExpr::Backward { space: B }.apply_vec(&t.apply_vec(&v).unwrap()).unwrap().scale(c(3.0));
        assert_eq!(expr.apply_vec(&v).unwrap(), direct);
        let back = expr.apply_power_vec(&expr.apply_power_vec(&v, 3).unwrap(), -3).unwrap();
        assert!(back.distance(&v).unwrap() < 1e-12);
    }

    #[test]
    fn shift_power_norm_examples() {
        let conv = BackwardIndexConvention::default();
        let fwd = ProductDirection::Forward;
        let half = WeightedShift::bilateral(WeightSequence::constant(0.5).unwrap());
        assert!((shift_power_norm(&half, 0, 3, fwd, conv).unwrap() - (1.0f64 / 8.0).ln()).abs() < 1e-15);
        let l = shift_power_norm(&good_shift(), 0, 20, fwd, conv).unwrap();
        assert!((l - 20.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((l.exp() - 9.5367431640625e-7).abs() < 1e-18);
        let two = WeightedShift::bilateral(WeightSequence::constant(2.0).unwrap());
        assert!((shift_power_norm(&two, 0, 10, fwd, conv).unwrap() - 10.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn backward_conventions_differ_off_zero() {
        let w = WeightedShift::bilateral(WeightSequence::table(-6, (1..=12).map(|k| k as f64 / 4.0).collect(), 1.0).unwrap());
        let bwd = ProductDirection::Backward;
        let m = 2;
        let n = 3;
        let mirrored: f64 = (1 + m..=n + m).map(|j| -w.weights().weight(-j).ln()).sum();
        let inverse: f64 = (1 - m..=n - m).map(|j| -w.weights().weight(-j).ln()).sum();
        let a = shift_power_norm(&w, m, n as u64, bwd, BackwardIndexConvention::MirroredBase).unwrap();
        let b = shift_power_norm(&w, m, n as u64, bwd, BackwardIndexConvention::InversePath).unwrap();
        assert!((a - mirrored).abs() < 1e-12);
        assert!((b - inverse).abs() < 1e-12);
        assert!((a - b).abs() > 1e-3);
        // InversePath is the norm of T^{-n} e_m.
        let inv = w.apply_power(&e(B, m), -n).unwrap();
        assert!((inv.norm().ln() - b).abs() < 1e-12);
        assert!(shift_power_norm(&WeightedShift::unweighted(U), 0, 1, bwd, BackwardIndexConvention::MirroredBase).is_err());
    }

    #[test]
    fn invariance_examples() {
        let t = OperatorExpr::shift(WeightSequence::constant(1.0).unwrap());
        let evens = Subspace::Single(CoordinateSubspace::residues(B, 2, [0]).unwrap());
        assert_eq!(invariance_check(&t, &evens, 2), Invariance::Holds);
        assert_eq!(invariance_check(&t, &evens, 1), Invariance::Fails);
        let half = Subspace::Single(CoordinateSubspace::half_line(B, 0));
        assert_eq!(invariance_check(&t, &half, 7), Invariance::Holds);
        assert_eq!(invariance_check(&t, &half, -1), Invariance::Fails);
        let sum = OperatorExpr::direct_sum(t.clone(), t.clone());
        let pair = Subspace::pair(CoordinateSubspace::residues(B, 2, [0]).unwrap(), CoordinateSubspace::half_line(B, 3));
        assert_eq!(invariance_check(&sum, &pair, 4), Invariance::Holds);
        assert_eq!(invariance_check(&sum, &pair, 3), Invariance::Fails);
        assert_eq!(invariance_check(&sum, &evens, 2), Invariance::Undecided);
    }

    #[test]
    fn invariance_on_unilateral_and_complements() {
        let b = OperatorExpr::Backward { space: U };
        // B^3 on span{e_i : i ≥ 2}: e_2 ↦ 0, e_3 ↦ e_0 ∉ M.
        let m = Subspace::Single(CoordinateSubspace::half_line(U, 2));
        assert_eq!(invariance_check(&b, &m, 3), Invariance::Fails);
        // Finite set {0, 1, 2} is invariant under backward powers on ℓ²(ℕ).
        let f = Subspace::Single(CoordinateSubspace::finite(U, [0, 1, 2]));
        assert_eq!(invariance_check(&b, &f, 2), Invariance::Holds);
        let fwd = OperatorExpr::shift(WeightSequence::constant(1.0).unwrap());
        // ℤ \ {0}: e_{-1} ↦ e_0.
        let punctured = Subspace::Single(CoordinateSubspace::finite(B, [0]).complement());
        assert_eq!(invariance_check(&fwd, &punctured, 1), Invariance::Fails);
        // {i < 0}: forward shifts leave it, backward shifts preserve it.
        let left = Subspace::Single(CoordinateSubspace::half_line(B, 0).complement());
        assert_eq!(invariance_check(&fwd, &left, 1), Invariance::Fails);
        assert_eq!(invariance_check(&OperatorExpr::Backward { space: B }, &left, 1), Invariance::Holds);
    }

    #[test]
    fn sampled_check_agrees_with_exact_on_simple_cases() {
        let t = OperatorExpr::shift(WeightSequence::piecewise(0.5, 2.0).unwrap());
        let evens = Subspace::Single(CoordinateSubspace::residues(B, 2, [0]).unwrap());
        assert!(sampled_invariance_check(&t, &evens, 2, 10).unwrap());
        assert!(!sampled_invariance_check(&t, &evens, 1, 10).unwrap());
    }

    #[test]
    fn commute_examples() {
        let b = OperatorExpr::Backward { space: U };
        let r = commute_check(&OperatorExpr::rolewicz(2.0), &b, 10, 0.0).unwrap();
        assert!(r.commutes);
        assert_eq!(r.max_residual, 0.0);

        let t = OperatorExpr::shift(WeightSequence::blocks(4, vec![0.5, 2.0], 0, NegativeRule::ReciprocalMirror).unwrap());
        let a = OperatorExpr::direct_sum(OperatorExpr::Identity, t.clone().pow(3));
        let tt = OperatorExpr::direct_sum(t.clone(), t);
        assert!(commute_check(&a, &tt, 10, 1e-12).unwrap().commutes);

        let f = OperatorExpr::Shift(WeightedShift::unweighted(U));
        let r = commute_check(&f, &b, 5, 1e-12).unwrap();
        assert!(!r.commutes);
        assert_eq!(r.max_residual, 1.0);

        assert!(commute_check(&f, &b, 0, 1.0).is_err());
    }

    #[test]
    fn norm_bounds() {
        assert_eq!(operator_norm_bound(&WeightedShift::bilateral(WeightSequence::constant(2.0).unwrap())), 2.0);
        assert_eq!(operator_norm_bound(&good_shift()), 2.0);
        let blocks = WeightSequence::blocks(4, vec![0.5, 2.0], 0, NegativeRule::ReciprocalMirror).unwrap();
        assert_eq!(operator_norm_bound(&WeightedShift::bilateral(blocks.clone())), 2.0);
        let cube = OperatorExpr::shift(blocks).pow(3);
        assert_eq!(cube.operator_norm_bound(), 8.0);
        assert_eq!(OperatorExpr::Identity.scaled(c(2.0)).operator_norm_bound(), 2.0);
    }

    #[test]
    fn expression_literals() {
        let op: OperatorExpr = serde_json::from_str(
            r#"{"op":"scale","by":2,"of":{"op":"backward","space":"unilateral"}}"#,
        )
        .unwrap();
        assert_eq!(op, OperatorExpr::rolewicz(2.0));
        let op: OperatorExpr = serde_json::from_str(
            r#"{"op":"direct_sum","left":{"op":"identity"},"right":{"op":"power","n":3,"of":{"op":"shift","weights":{"kind":"constant","c":2}}}}"#,
        )
        .unwrap();
        assert!(matches!(op, OperatorExpr::DirectSum { .. }));
        assert!(serde_json::from_str::<OperatorExpr>(r#"{"op":"shift","weights":{"kind":"constant","c":-1}}"#).is_err());
    }
}
