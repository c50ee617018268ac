//! Orbits, net-coverage density evidence, transitivity witnesses, return
//! sets and commutant transport.
//!
//! Orbit points are stored as `2^exp2 · value` and renormalized by exact
//! powers of two, so norms never overflow and a direct-sum orbit agrees
//! bit-for-bit with the orbits of its components.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::{commute_check, invariance_check, sampled_invariance_check, CommuteReport, OperatorExpr, WeightedShift};
use crate::space::{binary_exponent, pow2, CoordinateSubspace, Element, SpaceKind, SparseVector, Subspace};
use crate::weights::ScaledFloat;

/// Entries are rescaled once their largest binary exponent leaves
/// `[-RENORM_LIMIT, RENORM_LIMIT]`.
const RENORM_LIMIT: i32 = 256;
const SAMPLED_INVARIANCE_WINDOW: usize = 32;

/// A vector `2^exp2 · value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledVector {
    pub exp2: i64,
    pub value: SparseVector,
}

impl ScaledVector {
    fn new(value: SparseVector) -> Self {
        let mut s = Self { exp2: 0, value };
        s.renormalize();
        s
    }

    fn renormalize(&mut self) {
        let top = self
            .value
            .entries()
            .flat_map(|(_, c)| [c.re, c.im])
            .filter(|x| *x != 0.0)
            .map(binary_exponent)
            .max();
        if let Some(e) = top {
            if !(-RENORM_LIMIT..=RENORM_LIMIT).contains(&e) {
                self.value = self.value.scale_pow2(-(e as i64));
                self.exp2 += e as i64;
            }
        }
    }

    fn norm(&self) -> Option<ScaledFloat> {
        let sqr = self.value.norm_sqr();
        (sqr > 0.0).then(|| ScaledFloat::new(sqr.sqrt(), self.exp2))
    }

    fn distance_to_subspace(&self, m: &CoordinateSubspace) -> Result<Option<ScaledFloat>> {
        m.space().check(self.value.kind())?;
        let sqr = m.distance_sqr_unchecked(&self.value);
        Ok((sqr > 0.0).then(|| ScaledFloat::new(sqr.sqrt(), self.exp2)))
    }

    /// `‖point − target‖²`, `+∞` when the point is beyond `f64` range.
    fn distance_sqr_to(&self, target: &SparseVector) -> Result<f64> {
        self.value.kind().check(target.kind())?;
        if self.exp2 > 1023 && !self.value.is_zero() {
            // The largest entry is at least 2^(exp2 − RENORM_LIMIT − 1).
            return Ok(f64::INFINITY);
        }
        Ok(self.value.distance_sqr_unchecked(target, pow2(self.exp2)))
    }

    fn apply(&self, op: &OperatorExpr) -> Result<ScaledVector> {
        let mut next = ScaledVector { exp2: self.exp2, value: op.apply_vec(&self.value)? };
        next.renormalize();
        Ok(next)
    }

    fn to_vector(&self) -> SparseVector {
        self.value.scale_pow2(self.exp2)
    }
}

/// An orbit point; direct-sum components carry their own scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaledElement {
    Pair(ScaledVector, ScaledVector),
    Single(ScaledVector),
}

impl ScaledElement {
    pub fn new(value: Element) -> Self {
        match value {
            Element::Single(v) => ScaledElement::Single(ScaledVector::new(v)),
            Element::Pair(p) => ScaledElement::Pair(ScaledVector::new(p.left), ScaledVector::new(p.right)),
        }
    }

    /// The point in plain `f64` (saturating).
    pub fn to_element(&self) -> Element {
        match self {
            ScaledElement::Single(v) => Element::Single(v.to_vector()),
            ScaledElement::Pair(l, r) => Element::pair(l.to_vector(), r.to_vector()),
        }
    }

    fn parts(&self) -> impl Iterator<Item = &ScaledVector> {
        let (a, b) = match self {
            ScaledElement::Single(v) => (v, None),
            ScaledElement::Pair(l, r) => (l, Some(r)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_zero(&self) -> bool {
        self.parts().all(|v| v.value.is_zero())
    }

    pub fn support_len(&self) -> usize {
        self.parts().map(|v| v.value.len()).sum()
    }

    pub fn support_bounds(&self) -> Option<(i64, i64)> {
        self.parts()
            .filter_map(|v| v.value.support_bounds())
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)))
    }

    pub fn log_norm(&self) -> Option<f64> {
        scaled_norm(self.parts().filter_map(|v| v.norm())).map(ScaledFloat::ln)
    }

    pub fn log_distance_to(&self, m: &Subspace) -> Result<Option<f64>> {
        let parts = match (self, m) {
            (ScaledElement::Single(v), Subspace::Single(m)) => vec![v.distance_to_subspace(m)?],
            (ScaledElement::Pair(l, r), Subspace::Pair(m)) => {
                vec![l.distance_to_subspace(&m.left)?, r.distance_to_subspace(&m.right)?]
            }
            _ => return Err(Error::ShapeMismatch("orbit point and subspace shapes differ".into())),
        };
        Ok(scaled_norm(parts.into_iter().flatten()).map(ScaledFloat::ln))
    }

    /// `‖point − target‖²`; for pairs the sum of the component values.
    pub fn distance_sqr_to(&self, target: &Element) -> Result<f64> {
        match (self, target) {
            (ScaledElement::Single(v), Element::Single(t)) => v.distance_sqr_to(t),
            (ScaledElement::Pair(l, r), Element::Pair(t)) => Ok(l.distance_sqr_to(&t.left)? + r.distance_sqr_to(&t.right)?),
            _ => Err(Error::ShapeMismatch("orbit point and target shapes differ".into())),
        }
    }

    /// `‖point − target‖`, `+∞` when the point is beyond `f64` range.
    pub fn distance_to(&self, target: &Element) -> Result<f64> {
        Ok(self.distance_sqr_to(target)?.sqrt())
    }

    fn component(&self, left: bool) -> Result<ScaledElement> {
        match self {
            ScaledElement::Pair(l, r) => Ok(ScaledElement::Single(if left { l.clone() } else { r.clone() })),
            ScaledElement::Single(_) => Err(Error::ShapeMismatch("expected a direct-sum orbit point".into())),
        }
    }

    /// `op` applied to the point.
    pub fn step(&self, op: &OperatorExpr) -> Result<ScaledElement> {
        match (self, op) {
            (ScaledElement::Single(v), _) => Ok(ScaledElement::Single(v.apply(op)?)),
            (ScaledElement::Pair(l, r), OperatorExpr::DirectSum { left, right }) => {
                Ok(ScaledElement::Pair(l.apply(left)?, r.apply(right)?))
            }
            (ScaledElement::Pair(l, r), _) => {
                // Other expressions act on the pair jointly: use a common scale.
                let e = l.exp2.max(r.exp2);
                let joint = Element::pair(l.value.scale_pow2(l.exp2 - e), r.value.scale_pow2(r.exp2 - e));
                let image = op.apply(&joint)?;
                let p = image.as_pair()?;
                let mut a = ScaledVector { exp2: e, value: p.left.clone() };
                let mut b = ScaledVector { exp2: e, value: p.right.clone() };
                a.renormalize();
                b.renormalize();
                Ok(ScaledElement::Pair(a, b))
            }
        }
    }
}

/// Which orbit vectors are kept in memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryBudget {
    /// Vectors are kept at `0` and `⌈ratio^j⌉`.
    pub ratio: f64,
    /// Maximum support size of an orbit point.
    pub support_cap: usize,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self { ratio: 1.2, support_cap: 1 << 20 }
    }
}

impl MemoryBudget {
    fn retained_steps(&self, len: u64) -> Result<BTreeSet<u64>> {
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!("retention ratio must exceed 1, got {}", self.ratio)));
        }
        let mut out = BTreeSet::from([0]);
        let mut x = 1.0f64;
        while x.ceil() <= len as f64 {
            out.insert(x.ceil() as u64);
            x *= self.ratio;
        }
        Ok(out)
    }
}

/// One orbit step. `None` logs stand for an exact zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitStep {
    pub n: u64,
    pub support_lo: Option<i64>,
    pub support_hi: Option<i64>,
    pub support_len: usize,
    pub log_norm: Option<f64>,
    /// Log of the distance to the tracked subspace.
    pub log_distance: Option<f64>,
}

impl OrbitStep {
    fn record(n: u64, x: &ScaledElement, m: &Subspace) -> Result<Self> {
        let bounds = x.support_bounds();
        Ok(OrbitStep {
            n,
            support_lo: bounds.map(|b| b.0),
            support_hi: bounds.map(|b| b.1),
            support_len: x.support_len(),
            log_norm: x.log_norm(),
            log_distance: x.log_distance_to(m)?,
        })
    }

    pub fn norm(&self) -> f64 {
        self.log_norm.map_or(0.0, f64::exp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetainedVector {
    pub n: u64,
    pub point: ScaledElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub operator: OperatorExpr,
    pub start: Element,
    pub subspace: Subspace,
    pub length: u64,
    pub budget: MemoryBudget,
    pub steps: Vec<OrbitStep>,
    pub retained: Vec<RetainedVector>,
}

/// `{Tⁿx : 0 ≤ n ≤ len}` with per-step norms and distances to `m`.
pub fn compute_orbit(
    op: &OperatorExpr,
    x: &Element,
    len: u64,
    m: &Subspace,
    budget: &MemoryBudget,
) -> Result<OrbitTrace> {
    let keep = budget.retained_steps(len)?;
    let mut steps = Vec::with_capacity(usize::try_from(len).unwrap_or(0).saturating_add(1).min(1 << 24));
    let mut retained = Vec::new();
    let mut state = ScaledElement::new(x.clone());
    for n in 0..=len {
        if n > 0 {
            state = state.step(op)?;
        }
        let support = state.support_len();
        if support > budget.support_cap {
            return Err(Error::SupportCap { step: n as usize, len: support, cap: budget.support_cap });
        }
        steps.push(OrbitStep::record(n, &state, m)?);
        if keep.contains(&n) {
            retained.push(RetainedVector { n, point: state.clone() });
        }
    }
    Ok(OrbitTrace {
        operator: op.clone(),
        start: x.clone(),
        subspace: m.clone(),
        length: len,
        budget: *budget,
        steps,
        retained,
    })
}

impl OrbitTrace {
    /// `Tⁿx`, recomputed from the nearest retained vector.
    pub fn point_at(&self, n: u64) -> Result<ScaledElement> {
        if n > self.length {
            return Err(Error::InvalidParameter(format!("step {n} beyond orbit length {}", self.length)));
        }
        let base = self.retained.iter().rev().find(|r| r.n <= n);
        let (mut k, mut state) = match base {
            Some(r) => (r.n, r.point.clone()),
            None => (0, ScaledElement::new(self.start.clone())),
        };
        while k < n {
            state = state.step(&self.operator)?;
            k += 1;
        }
        Ok(state)
    }

    /// Runs `f` on every orbit point in order.
    pub fn replay(&self, mut f: impl FnMut(u64, &ScaledElement) -> Result<()>) -> Result<()> {
        let mut state = ScaledElement::new(self.start.clone());
        for n in 0..=self.length {
            if n > 0 {
                state = state.step(&self.operator)?;
            }
            f(n, &state)?;
        }
        Ok(())
    }

    /// Adds the given steps to the retained set.
    pub fn retain_steps(&mut self, steps: impl IntoIterator<Item = u64>) -> Result<()> {
        let have: BTreeSet<u64> = self.retained.iter().map(|r| r.n).collect();
        let want: BTreeSet<u64> = steps.into_iter().filter(|n| !have.contains(n) && *n <= self.length).collect();
        for n in want {
            let point = self.point_at(n)?;
            self.retained.push(RetainedVector { n, point });
        }
        self.retained.sort_by_key(|r| r.n);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCover {
    pub target: usize,
    pub best_distance: f64,
    pub witness_step: u64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub epsilon: f64,
    pub horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net: Option<String>,
    pub targets: Vec<TargetCover>,
    pub coverage: f64,
}

impl DensityReport {
    fn from_best(epsilon: f64, horizon: u64, best: Vec<(f64, u64)>) -> Self {
        let targets: Vec<TargetCover> = best
            .into_iter()
            .enumerate()
            .map(|(i, (d, n))| TargetCover { target: i, best_distance: d, witness_step: n, covered: d <= epsilon })
            .collect();
        let coverage = targets.iter().filter(|t| t.covered).count() as f64 / targets.len() as f64;
        DensityReport { epsilon, horizon, net: None, targets, coverage }
    }

    pub fn covered_count(&self) -> usize {
        self.targets.iter().filter(|t| t.covered).count()
    }

    pub fn with_net(mut self, description: impl Into<String>) -> Self {
        self.net = Some(description.into());
        self
    }
}

/// Best orbit approximation of every target. Ties go to the earliest step;
/// witness steps are added to the retained vectors.
pub fn density_report(orbit: &mut OrbitTrace, targets: &[Element], epsilon: f64) -> Result<DensityReport> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("density needs at least one target".into()));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let mut best = vec![(f64::INFINITY, 0u64); targets.len()];
    orbit.replay(|n, x| {
        let dists: Vec<f64> = if targets.len() >= 256 {
            targets.par_iter().map(|t| x.distance_to(t)).collect::<Result<_>>()?
        } else {
            targets.iter().map(|t| x.distance_to(t)).collect::<Result<_>>()?
        };
        for (b, d) in best.iter_mut().zip(dists) {
            if d < b.0 {
                *b = (d, n);
            }
        }
        Ok(())
    })?;
    let report = DensityReport::from_best(epsilon, orbit.length, best);
    orbit.retain_steps(report.targets.iter().filter(|t| t.covered).map(|t| t.witness_step))?;
    Ok(report)
}

/// How a transitivity witness was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessConstruction {
    /// `z = u + T^{−n} v`
    InversePower,
    /// `z = u + λ^{−n} Fⁿ v` for `λB` on ℓ²(ℕ)
    ForwardInsertion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitivityWitness {
    pub n: u64,
    pub construction: WitnessConstruction,
    pub z: SparseVector,
    /// `‖z − u‖`, `+∞` beyond `f64` range.
    #[serde(with = "finite_or_null")]
    pub err_near: f64,
    /// `‖Tⁿz − v‖`, `+∞` beyond `f64` range.
    #[serde(with = "finite_or_null")]
    pub err_far: f64,
    /// Logs of the errors; `None` when zero.
    pub log_err_near: Option<f64>,
    pub log_err_far: Option<f64>,
    pub invariant_ok: bool,
    pub z_in_subspace: bool,
}

/// Serializes `+∞` as `null`.
mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// `λ` when `op` is `λB` on ℓ²(ℕ).
fn as_rolewicz(op: &OperatorExpr) -> Option<Complex64> {
    match op {
        OperatorExpr::Scale { by, of } => match of.as_ref() {
            OperatorExpr::Backward { space: SpaceKind::Unilateral } => Some(by.0),
            _ => None,
        },
        _ => None,
    }
}

/// Euclidean norm of a vector whose entries are the given magnitudes;
/// exact for a single entry. `None` for the zero vector.
fn scaled_norm(terms: impl IntoIterator<Item = ScaledFloat>) -> Option<ScaledFloat> {
    let terms: Vec<ScaledFloat> = terms.into_iter().filter(|t| t.mantissa() != 0.0).collect();
    match terms.as_slice() {
        [] => None,
        [t] => Some(ScaledFloat::new(t.mantissa().abs(), t.exponent())),
        _ => {
            let top = terms.iter().map(|t| t.exponent() + binary_exponent(t.mantissa()) as i64).max()?;
            let sum: f64 = terms
                .iter()
                .map(|t| {
                    let x = t.mantissa().abs() * pow2(t.exponent() - top);
                    x * x
                })
                .sum();
            Some(ScaledFloat::new(sum.sqrt(), top))
        }
    }
}

/// `‖Tⁿ v‖` from weight products, `n` of either sign.
fn shift_power_norm_of(t: &WeightedShift, v: &SparseVector, n: i64) -> Option<ScaledFloat> {
    let len = n.unsigned_abs();
    scaled_norm(v.entries().map(|(i, c)| {
        let prod = if n >= 0 { t.weights().product(i, len) } else { t.weights().product(i + n, len).recip() };
        ScaledFloat::from_f64(c.norm()).mul(prod)
    }))
}

/// `|λ|ⁿ`
fn lambda_power(lambda: Complex64, n: u64) -> ScaledFloat {
    ScaledFloat::from_f64(lambda.norm()).powu(n)
}

/// `‖(λB)ⁿ u‖` and `‖λ^{−n} Fⁿ v‖`.
fn rolewicz_errors(lambda: Complex64, u: &SparseVector, v: &SparseVector, n: u64) -> (Option<ScaledFloat>, Option<ScaledFloat>) {
    let near = scaled_norm([ScaledFloat::from_f64(v.norm()).mul(lambda_power(lambda, n).recip())]);
    let tail = u.restrict(|i| i >= n as i64);
    let far = scaled_norm([ScaledFloat::from_f64(tail.norm()).mul(lambda_power(lambda, n))]);
    (near, far)
}

/// Witness for `T^{−n}U ∩ V ≠ ∅` near `u` and `v`.
pub fn transitivity_witness(
    op: &OperatorExpr,
    m: &CoordinateSubspace,
    u: &SparseVector,
    v: &SparseVector,
    n: u64,
) -> Result<TransitivityWitness> {
    let ni = i64::try_from(n).map_err(|_| Error::Overflow(format!("power {n}")))?;
    let (construction, z, near, far) = match (op, as_rolewicz(op)) {
        (OperatorExpr::Shift(t), _) if t.is_invertible() => {
            let back = t.apply_power(v, -ni)?;
            let z = u.add(&back)?;
            (WitnessConstruction::InversePower, z, shift_power_norm_of(t, v, -ni), shift_power_norm_of(t, u, ni))
        }
        (_, Some(lambda)) => {
            if lambda == Complex64::new(0.0, 0.0) {
                return Err(Error::NotInvertible("λ = 0".into()));
            }
            // λ^{−n} as modulus times phase, so large n cannot overflow.
            let k = i32::try_from(n).map_err(|_| Error::Overflow(format!("power {n}")))?;
            let coeff = (lambda / lambda.norm()).powi(-k) * lambda_power(lambda, n).recip().to_f64();
            let inserted = SparseVector::from_entries(u.kind(), v.entries().map(|(i, c)| (i + ni, c * coeff)))?;
            let (near, far) = rolewicz_errors(lambda, u, v, n);
            (WitnessConstruction::ForwardInsertion, u.add(&inserted)?, near, far)
        }
        _ => {
            return Err(Error::Unsupported(
                "transitivity witnesses need an invertible bilateral shift or λB on ℓ²(ℕ)".into(),
            ))
        }
    };
    let sub = Subspace::Single(m.clone());
    let invariant_ok = invariance_check(op, &sub, ni).holds().unwrap_or(false);
    let z_in_subspace = m.contains(&z);
    Ok(TransitivityWitness {
        n,
        construction,
        z,
        err_near: near.map_or(0.0, ScaledFloat::to_f64),
        err_far: far.map_or(0.0, ScaledFloat::to_f64),
        log_err_near: near.map(ScaledFloat::ln),
        log_err_far: far.map(ScaledFloat::ln),
        invariant_ok,
        z_in_subspace,
    })
}

/// Thresholds turning a finite return set into a classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationParams {
    /// A trailing run `[N₀, horizon]` counts as cofinite when its length is
    /// at least this fraction of the horizon.
    pub cofinite_window: f64,
    /// Non-cofinite sets with at least this fraction of the horizon are
    /// infinite-to-horizon.
    pub infinite_fraction: f64,
}

impl Default for ClassificationParams {
    fn default() -> Self {
        Self { cofinite_window: 0.5, infinite_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Empty,
    Finite,
    InfiniteToHorizon,
    CofiniteBeyond { n0: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSet {
    pub horizon: u64,
    pub members: Vec<u64>,
    pub classification: Classification,
    pub params: ClassificationParams,
}

impl ReturnSet {
    pub fn from_members(horizon: u64, mut members: Vec<u64>, params: ClassificationParams) -> Self {
        members.sort_unstable();
        members.dedup();
        let classification = classify(&members, horizon, &params);
        ReturnSet { horizon, members, classification, params }
    }

    pub fn contains(&self, n: u64) -> bool {
        self.members.binary_search(&n).is_ok()
    }

    pub fn intersection(&self, other: &ReturnSet) -> Vec<u64> {
        self.members.iter().copied().filter(|n| other.contains(*n)).collect()
    }

    pub fn is_cofinite(&self) -> bool {
        matches!(self.classification, Classification::CofiniteBeyond { .. })
    }
}

/// Classification of a sorted member list.
pub fn classify(members: &[u64], horizon: u64, params: &ClassificationParams) -> Classification {
    if members.is_empty() {
        return Classification::Empty;
    }
    let mut n0 = horizon + 1;
    for &n in members.iter().rev() {
        if n + 1 == n0 {
            n0 = n;
        } else {
            break;
        }
    }
    let run = horizon + 1 - n0;
    if n0 <= horizon && run as f64 >= params.cofinite_window * horizon as f64 {
        Classification::CofiniteBeyond { n0 }
    } else if members.len() as f64 >= params.infinite_fraction * horizon as f64 {
        Classification::InfiniteToHorizon
    } else {
        Classification::Finite
    }
}

/// Witness errors `(near, far)` per summand; `None` is an exact zero.
fn witness_errors(op: &OperatorExpr, u: &Element, v: &Element, n: u64) -> Result<Vec<(Option<ScaledFloat>, Option<ScaledFloat>)>> {
    let ni = i64::try_from(n).map_err(|_| Error::Overflow(format!("power {n}")))?;
    match (op, u, v) {
        (OperatorExpr::DirectSum { left, right }, Element::Pair(a), Element::Pair(b)) => {
            let mut out = witness_errors(left, &a.left.clone().into(), &b.left.clone().into(), n)?;
            out.extend(witness_errors(right, &a.right.clone().into(), &b.right.clone().into(), n)?);
            Ok(out)
        }
        (OperatorExpr::Shift(t), Element::Single(a), Element::Single(b)) if t.is_invertible() => {
            Ok(vec![(shift_power_norm_of(t, b, -ni), shift_power_norm_of(t, a, ni))])
        }
        (_, Element::Single(a), Element::Single(b)) if as_rolewicz(op).is_some() => {
            Ok(vec![rolewicz_errors(as_rolewicz(op).expect("checked"), a, b, n)])
        }
        _ => {
            // Sampled search over the candidates u + op^{−n} v and u.
            let z = if op.is_invertible() { Some(op.apply_power(v, -ni)?) } else { None };
            let (near, z) = match z {
                Some(back) => (back.norm(), u.add(&back)?),
                None => (0.0, u.clone()),
            };
            let far = op.apply_power(&z, ni)?.distance(v)?;
            Ok(vec![(scaled_norm([ScaledFloat::from_f64(near)]), scaled_norm([ScaledFloat::from_f64(far)]))])
        }
    }
}

/// `{n ≤ horizon : witness errors below the radii and opⁿ M ⊆ M}`. For
/// direct sums the balls are products of per-summand balls.
#[allow(clippy::too_many_arguments)]
pub fn return_set(
    op: &OperatorExpr,
    m: &Subspace,
    u_center: &Element,
    u_radius: f64,
    v_center: &Element,
    v_radius: f64,
    horizon: u64,
    params: &ClassificationParams,
) -> Result<ReturnSet> {
    if !(u_radius > 0.0 && v_radius > 0.0) {
        return Err(Error::InvalidParameter("ball radii must be positive".into()));
    }
    if !m.contains(u_center) || !m.contains(v_center) {
        return Err(Error::NotInSubspace("ball center".into()));
    }
    let (ru, rv) = (ScaledFloat::from_f64(u_radius), ScaledFloat::from_f64(v_radius));
    let members: Vec<u64> = (1..=horizon)
        .into_par_iter()
        .map(|n| -> Result<Option<u64>> {
            let ni = i64::try_from(n).map_err(|_| Error::Overflow(format!("power {n}")))?;
            let invariant = match invariance_check(op, m, ni).holds() {
                Some(b) => b,
                None => sampled_invariance_check(op, m, ni, SAMPLED_INVARIANCE_WINDOW)?,
            };
            if !invariant {
                return Ok(None);
            }
            let errs = witness_errors(op, u_center, v_center, n)?;
            let ok = errs.iter().all(|(near, far)| near.is_none_or(|x| x < ru) && far.is_none_or(|x| x < rv));
            Ok(ok.then_some(n))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ReturnSet::from_members(horizon, members, *params))
}

/// Component traces of a direct-sum orbit, read off the pair orbit.
pub fn project_orbit(trace: &OrbitTrace) -> Result<(OrbitTrace, OrbitTrace)> {
    let (OperatorExpr::DirectSum { left: lop, right: rop }, Subspace::Pair(m)) = (&trace.operator, &trace.subspace) else {
        return Err(Error::ShapeMismatch("projection needs a direct-sum orbit".into()));
    };
    let start = trace.start.as_pair()?;
    let keep = trace.budget.retained_steps(trace.length)?;
    let (ml, mr) = (Subspace::Single(m.left.clone()), Subspace::Single(m.right.clone()));
    let mut halves = [(lop, start.left.clone(), ml), (rop, start.right.clone(), mr)].map(|(op, x, sub)| OrbitTrace {
        operator: (**op).clone(),
        start: Element::Single(x),
        subspace: sub,
        length: trace.length,
        budget: trace.budget,
        steps: Vec::new(),
        retained: Vec::new(),
    });
    let extra: BTreeSet<u64> = trace.retained.iter().map(|r| r.n).collect();
    trace.replay(|n, x| {
        for (side, half) in halves.iter_mut().enumerate() {
            let c = x.component(side == 0)?;
            half.steps.push(OrbitStep::record(n, &c, &half.subspace)?);
            if keep.contains(&n) || extra.contains(&n) {
                half.retained.push(RetainedVector { n, point: c });
            }
        }
        Ok(())
    })?;
    let [l, r] = halves;
    Ok((l, r))
}

/// One distance triple of the projection law at a step and target pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSample {
    pub step: u64,
    pub target: usize,
    pub pair: f64,
    pub left: f64,
    pub right: f64,
}

impl ProjectionSample {
    pub fn violates(&self) -> bool {
        self.left > self.pair || self.right > self.pair
    }
}

/// Distances of every orbit point of a direct-sum orbit to every target
/// pair, with the matching component distances.
pub fn projection_samples(trace: &OrbitTrace, targets: &[(SparseVector, SparseVector)]) -> Result<Vec<ProjectionSample>> {
    trace.start.as_pair()?;
    let pairs: Vec<(Element, Element, Element)> = targets
        .iter()
        .map(|(a, b)| (Element::pair(a.clone(), b.clone()), Element::Single(a.clone()), Element::Single(b.clone())))
        .collect();
    let mut out = Vec::with_capacity(pairs.len() * (trace.length as usize + 1));
    trace.replay(|n, x| {
        let (l, r) = (x.component(true)?, x.component(false)?);
        for (i, (ab, a, b)) in pairs.iter().enumerate() {
            out.push(ProjectionSample {
                step: n,
                target: i,
                pair: x.distance_to(ab)?,
                left: l.distance_to(a)?,
                right: r.distance_to(b)?,
            });
        }
        Ok(())
    })?;
    Ok(out)
}

/// Result of mapping an orbit by an operator commuting with `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutantImage {
    pub commute: CommuteReport,
    pub image_subspace: Subspace,
    pub image: OrbitTrace,
    /// Largest `‖S(Tⁿx) − Tⁿ(Sx)‖` over the retained steps.
    pub transport_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityReport>,
}

/// `S·M` for monomial `S` on coordinate `M`.
pub fn image_subspace(s: &OperatorExpr, m: &CoordinateSubspace) -> Result<CoordinateSubspace> {
    let mono = s.monomial().ok_or_else(|| Error::Unsupported("S·M needs a monomial operator".into()))?;
    if mono.vanishes {
        return Err(Error::Unsupported("S vanishes".into()));
    }
    if m.space() == SpaceKind::Unilateral && mono.min_prefix < 0 {
        return Err(Error::Unsupported("S annihilates part of M".into()));
    }
    m.translate(mono.offset)
}

/// Orbit of `Sx` obtained by transporting the orbit of `x`, with density
/// against `S(targets)` in `S·M` when targets are given.
#[allow(clippy::too_many_arguments)]
pub fn map_orbit_by_commutant(
    t: &OperatorExpr,
    s: &OperatorExpr,
    orbit: &OrbitTrace,
    m: &CoordinateSubspace,
    targets: &[SparseVector],
    epsilon: f64,
    window: u64,
    tol: f64,
) -> Result<CommutantImage> {
    let commute = commute_check(t, s, window, tol)?;
    if !commute.commutes {
        return Err(Error::CommutationFailed { residual: commute.max_residual, tol });
    }
    let image_subspace = Subspace::Single(image_subspace(s, m)?);
    let sx = s.apply(&orbit.start)?;
    let mut image = compute_orbit(t, &sx, orbit.length, &image_subspace, &orbit.budget)?;
    let mut transport_residual: f64 = 0.0;
    for r in &orbit.retained {
        let mapped = r.point.step(s)?;
        let direct = image.point_at(r.n)?;
        let d = direct.distance_to(&mapped.to_element())?;
        transport_residual = transport_residual.max(d);
    }
    let density = if targets.is_empty() {
        None
    } else {
        let mapped: Vec<Element> = targets.iter().map(|x| s.apply(&x.clone().into())).collect::<Result<_>>()?;
        Some(density_report(&mut image, &mapped, epsilon)?)
    };
    Ok(CommutantImage { commute, image_subspace, image, transport_residual, density })
}
