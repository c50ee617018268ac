//! Weight-product transitivity criteria, the subspace-hypercyclic criterion
//! checker, criterion transfer across direct sums and the block-weight
//! counterexample pair.
//!
//! Every "satisfied" verdict is horizon-bounded: limits are checked up to a
//! finite `k` and a tolerance, never proved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shift::{
    invariance_check, sampled_invariance_check, shift_power_norm, BackwardIndexConvention, Invariance,
    OperatorExpr, ProductDirection, WeightedShift,
};
use crate::space::{make_net, CoordinateSubspace, Element, SpaceKind, SparseVector, Subspace};
use crate::weights::{NegativeRule, WeightSequence};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_HORIZON: usize = 20;

/// Number of basis vectors used when invariance has to be sampled.
const SAMPLED_INVARIANCE_WINDOW: usize = 32;

/// Strictly increasing positive iterate sequence `{n_k}`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum Iterates {
    Explicit { values: Vec<u64> },
    /// `n_k = step·k + offset`
    Arithmetic { step: u64, #[serde(default)] offset: u64 },
    /// `n_k` is the end of block `first_block + (k−1)·stride` for blocks of
    /// length `base^j`, i.e. `(base^{b+1} − 1)/(base − 1)`.
    BlockEnds { base: u64, first_block: u32, stride: u32 },
}

impl Iterates {
    pub fn explicit(values: Vec<u64>) -> Result<Self> {
        let it = Iterates::Explicit { values };
        it.validate()?;
        Ok(it)
    }

    pub fn arithmetic(step: u64, offset: u64) -> Result<Self> {
        let it = Iterates::Arithmetic { step, offset };
        it.validate()?;
        Ok(it)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Iterates::Explicit { values } => {
                if values.first() == Some(&0) {
                    return Err(Error::InvalidIterates("iterates must be positive".into()));
                }
                if values.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidIterates("iterates must be strictly increasing".into()));
                }
                Ok(())
            }
            Iterates::Arithmetic { step, offset } => {
                if *step == 0 {
                    return Err(Error::InvalidIterates("arithmetic step must be positive".into()));
                }
                step.checked_add(*offset).ok_or_else(|| Error::Overflow("first iterate".into()))?;
                Ok(())
            }
            Iterates::BlockEnds { base, stride, .. } => {
                if *base < 2 || *stride == 0 {
                    return Err(Error::InvalidIterates("block ends need base ≥ 2 and stride ≥ 1".into()));
                }
                Ok(())
            }
        }
    }

    /// `n_k` for `k ≥ 1`.
    pub fn nth(&self, k: usize) -> Result<u64> {
        if k == 0 {
            return Err(Error::InvalidIterates("iterates are indexed from k = 1".into()));
        }
        let overflow = || Error::Overflow(format!("iterate n_{k}"));
        match self {
            Iterates::Explicit { values } => values
                .get(k - 1)
                .copied()
                .ok_or_else(|| Error::InvalidIterates(format!("only {} explicit iterates, n_{k} requested", values.len()))),
            Iterates::Arithmetic { step, offset } => {
                step.checked_mul(k as u64).and_then(|x| x.checked_add(*offset)).ok_or_else(overflow)
            }
            Iterates::BlockEnds { base, first_block, stride } => {
                let block = (*stride as u64)
                    .checked_mul(k as u64 - 1)
                    .and_then(|x| x.checked_add(*first_block as u64))
                    .and_then(|b| u32::try_from(b).ok())
                    .ok_or_else(overflow)?;
                let b = *base as u128;
                let end = b.checked_pow(block + 1).map(|p| (p - 1) / (b - 1)).ok_or_else(overflow)?;
                u64::try_from(end).map_err(|_| overflow())
            }
        }
    }

    pub fn take(&self, count: usize) -> Result<Vec<u64>> {
        (1..=count).map(|k| self.nth(k)).collect()
    }

    /// All iterates `≤ horizon`.
    pub fn up_to(&self, horizon: u64) -> Result<Vec<u64>> {
        self.validate()?;
        let mut out = Vec::new();
        for k in 1.. {
            match self.nth(k) {
                Ok(n) if n <= horizon => out.push(n),
                Ok(_) | Err(Error::Overflow(_)) => break,
                Err(Error::InvalidIterates(_)) if matches!(self, Iterates::Explicit { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SatisfiedToHorizon,
    Violated,
    Undecided,
}

/// Concrete evidence attached to a `Violated` verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationWitness {
    pub k: usize,
    pub n_k: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// Log weight products (single shift or max over a direct sum).
    WeightProducts,
    /// Decay/approach norms of the subspace-hypercyclic criterion.
    Subspace,
}

/// One `k` of a criterion evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub k: usize,
    pub n_k: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forward_log: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backward_log: Option<f64>,
    /// `max ‖T^{n_k} x‖` over the first dense set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    /// `max ‖x_k‖` over the approximants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_norm: Option<f64>,
    /// `max ‖T^{n_k} x_k − y‖` over the second dense set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approx_error: Option<f64>,
    pub invariant: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invariance_sampled: bool,
    #[serde(default = "yes", skip_serializing_if = "Clone::clone")]
    pub approximants_in_subspace: bool,
}

fn yes() -> bool {
    true
}

/// Per-operator log-product traces kept alongside a direct-sum evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductTrace {
    pub label: String,
    pub forward_log: Vec<f64>,
    pub backward_log: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub verdict: Verdict,
    pub tol: f64,
    pub horizon: usize,
    pub rows: Vec<CriterionRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ViolationWitness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ProductTrace>,
}

impl CriterionReport {
    /// Recomputes the verdict from the recorded rows alone.
    pub fn recompute_verdict(&self) -> Verdict {
        judge(self.kind, &self.rows, self.tol).0
    }
}

/// Verdict from recorded rows.
fn judge(kind: CriterionKind, rows: &[CriterionRow], tol: f64) -> (Verdict, Option<ViolationWitness>) {
    if let Some(r) = rows.iter().find(|r| !r.invariant) {
        let detail = format!("T^{} M is not contained in M", r.n_k);
        return (Verdict::Violated, Some(ViolationWitness { k: r.k, n_k: r.n_k, sample: None, detail }));
    }
    if let Some(r) = rows.iter().find(|r| !r.approximants_in_subspace) {
        let detail = "approximant lies outside the subspace".to_string();
        return (Verdict::Violated, Some(ViolationWitness { k: r.k, n_k: r.n_k, sample: None, detail }));
    }
    let Some(last) = rows.last() else {
        return (Verdict::Undecided, None);
    };
    match kind {
        CriterionKind::WeightProducts => {
            let log_tol = tol.ln();
            let (Some(fwd), Some(bwd)) = (last.forward_log, last.backward_log) else {
                return (Verdict::Undecided, None);
            };
            let tail = &rows[rows.len() / 2..];
            let eventually_decreasing = |get: fn(&CriterionRow) -> Option<f64>, fin: f64| {
                tail.iter().filter_map(get).all(|v| fin <= v)
            };
            let ok_fwd = fwd <= log_tol && eventually_decreasing(|r| r.forward_log, fwd);
            let ok_bwd = bwd <= log_tol && eventually_decreasing(|r| r.backward_log, bwd);
            if ok_fwd && ok_bwd {
                (Verdict::SatisfiedToHorizon, None)
            } else {
                let side = if ok_fwd { "backward" } else { "forward" };
                let value = if ok_fwd { bwd } else { fwd };
                let detail = format!("{side} log-product {value} at the horizon exceeds log(tol) = {log_tol} or is not decreasing");
                (Verdict::Violated, Some(ViolationWitness { k: last.k, n_k: last.n_k, sample: None, detail }))
            }
        }
        CriterionKind::Subspace => {
            let (Some(decay), Some(norm), Some(err)) = (last.decay, last.approx_norm, last.approx_error) else {
                return (Verdict::Undecided, None);
            };
            if decay <= tol && norm <= tol && err <= tol {
                (Verdict::SatisfiedToHorizon, None)
            } else {
                let detail = format!(
                    "at the horizon: decay {decay:e}, approximant norm {norm:e}, approach error {err:e} (tol {tol:e})"
                );
                (Verdict::Violated, Some(ViolationWitness { k: last.k, n_k: last.n_k, sample: None, detail }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductCriterionParams {
    pub horizon: usize,
    pub tol: f64,
    #[serde(default)]
    pub convention: BackwardIndexConvention,
}

impl Default for ProductCriterionParams {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, tol: DEFAULT_TOL, convention: BackwardIndexConvention::default() }
    }
}

fn require_basis_member(m: &CoordinateSubspace, index: i64) -> Result<()> {
    if m.contains_index(index) {
        Ok(())
    } else {
        Err(Error::NotInSubspace(format!("e_{index}")))
    }
}

fn require_invertible(t: &WeightedShift) -> Result<()> {
    if t.is_invertible() {
        Ok(())
    } else {
        Err(Error::NotInvertible("the criterion needs an invertible bilateral shift".into()))
    }
}

fn shift_invariance(t: &WeightedShift, m: &CoordinateSubspace, n: u64) -> Result<bool> {
    let n = i64::try_from(n).map_err(|_| Error::Overflow(format!("iterate {n}")))?;
    let op = OperatorExpr::Shift(t.clone());
    // A pure shift power always has a symbolic rule.
    Ok(invariance_check(&op, &Subspace::Single(m.clone()), n) == Invariance::Holds)
}

fn product_logs(t: &WeightedShift, index: i64, n: u64, convention: BackwardIndexConvention) -> Result<(f64, f64)> {
    Ok((
        shift_power_norm(t, index, n, ProductDirection::Forward, convention)?,
        shift_power_norm(t, index, n, ProductDirection::Backward, convention)?,
    ))
}

/// Forward and backward weight products along `{n_k}` for an invertible
/// bilateral shift with `e_index ∈ M`, plus `T^{n_k} M ⊆ M` per `k`.
pub fn eval_forward_criterion(
    t: &WeightedShift,
    m: &CoordinateSubspace,
    index: i64,
    iterates: &Iterates,
    params: &ProductCriterionParams,
) -> Result<CriterionReport> {
    require_basis_member(m, index)?;
    require_invertible(t)?;
    iterates.validate()?;
    let rows = (1..=params.horizon)
        .map(|k| {
            let n = iterates.nth(k)?;
            let (fwd, bwd) = product_logs(t, index, n, params.convention)?;
            Ok(CriterionRow {
                k,
                n_k: n,
                forward_log: Some(fwd),
                backward_log: Some(bwd),
                decay: None,
                approx_norm: None,
                approx_error: None,
                invariant: shift_invariance(t, m, n)?,
                invariance_sampled: false,
                approximants_in_subspace: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (verdict, witness) = judge(CriterionKind::WeightProducts, &rows, params.tol);
    Ok(CriterionReport {
        kind: CriterionKind::WeightProducts,
        verdict,
        tol: params.tol,
        horizon: params.horizon,
        rows,
        witness,
        components: Vec::new(),
    })
}

/// Max-of-products criterion for `T₁ ⊕ T₂` on `M₁ ⊕ M₂` with
/// `e_m ∈ M₁`, `e_h ∈ M₂`.
#[allow(clippy::too_many_arguments)]
pub fn eval_direct_sum_criterion(
    t1: &WeightedShift,
    t2: &WeightedShift,
    m1: &CoordinateSubspace,
    m2: &CoordinateSubspace,
    m_index: i64,
    h_index: i64,
    iterates: &Iterates,
    params: &ProductCriterionParams,
) -> Result<CriterionReport> {
    require_basis_member(m1, m_index)?;
    require_basis_member(m2, h_index)?;
    require_invertible(t1)?;
    require_invertible(t2)?;
    iterates.validate()?;
    let mut left = ProductTrace { label: "left".into(), forward_log: Vec::new(), backward_log: Vec::new() };
    let mut right = ProductTrace { label: "right".into(), forward_log: Vec::new(), backward_log: Vec::new() };
    let mut rows = Vec::with_capacity(params.horizon);
    for k in 1..=params.horizon {
        let n = iterates.nth(k)?;
        let (f1, b1) = product_logs(t1, m_index, n, params.convention)?;
        let (f2, b2) = product_logs(t2, h_index, n, params.convention)?;
        left.forward_log.push(f1);
        left.backward_log.push(b1);
        right.forward_log.push(f2);
        right.backward_log.push(b2);
        rows.push(CriterionRow {
            k,
            n_k: n,
            forward_log: Some(f1.max(f2)),
            backward_log: Some(b1.max(b2)),
            decay: None,
            approx_norm: None,
            approx_error: None,
            invariant: shift_invariance(t1, m1, n)? && shift_invariance(t2, m2, n)?,
            invariance_sampled: false,
            approximants_in_subspace: true,
        });
    }
    let (verdict, witness) = judge(CriterionKind::WeightProducts, &rows, params.tol);
    Ok(CriterionReport {
        kind: CriterionKind::WeightProducts,
        verdict,
        tol: params.tol,
        horizon: params.horizon,
        rows,
        witness,
        components: vec![left, right],
    })
}

/// Identifies a dense-set sample; product sets pair up their factors' ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleId {
    Index(usize),
    Pair(Box<SampleId>, Box<SampleId>),
}

impl SampleId {
    fn flat(&self) -> Option<usize> {
        match self {
            SampleId::Index(i) => Some(*i),
            SampleId::Pair(..) => None,
        }
    }
}

/// Deterministic sample scheme for a dense subset of a subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenseSetSpec {
    /// The finite net of [`make_net`].
    Net {
        subspace: CoordinateSubspace,
        support_size: usize,
        grid: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_cap: Option<f64>,
    },
    Explicit { subspace: Subspace, samples: Vec<Element> },
    /// `D ⊕ D'`, sampled as all pairs in row-major order.
    Product { left: Box<DenseSetSpec>, right: Box<DenseSetSpec> },
}

impl DenseSetSpec {
    pub fn net(subspace: CoordinateSubspace, support_size: usize, grid: Vec<f64>) -> Self {
        DenseSetSpec::Net { subspace, support_size, grid, radius_cap: None }
    }

    pub fn subspace(&self) -> Subspace {
        match self {
            DenseSetSpec::Net { subspace, .. } => Subspace::Single(subspace.clone()),
            DenseSetSpec::Explicit { subspace, .. } => subspace.clone(),
            DenseSetSpec::Product { left, right } => match (left.subspace(), right.subspace()) {
                (Subspace::Single(l), Subspace::Single(r)) => Subspace::pair(l, r),
                // Nested products are not used; report the left shape.
                (l, _) => l,
            },
        }
    }

    /// The first `budget` samples.
    pub fn samples(&self, budget: usize) -> Result<Vec<(SampleId, Element)>> {
        match self {
            DenseSetSpec::Net { subspace, support_size, grid, radius_cap } => {
                let net = make_net(subspace, *support_size, grid, radius_cap.unwrap_or(f64::INFINITY))?;
                Ok(net.into_iter().take(budget).enumerate().map(|(i, v)| (SampleId::Index(i), v.into())).collect())
            }
            DenseSetSpec::Explicit { samples, .. } => {
                Ok(samples.iter().take(budget).cloned().enumerate().map(|(i, v)| (SampleId::Index(i), v)).collect())
            }
            DenseSetSpec::Product { left, right } => {
                let ls = left.samples(budget)?;
                let rs = right.samples(budget)?;
                let mut out = Vec::new();
                'outer: for (li, l) in &ls {
                    for (ri, r) in &rs {
                        if out.len() >= budget {
                            break 'outer;
                        }
                        let pair = Element::pair(l.as_single()?.clone(), r.as_single()?.clone());
                        out.push((SampleId::Pair(Box::new(li.clone()), Box::new(ri.clone())), pair));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Rule producing the approximants `x_k` for a target `y` of the second
/// dense set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApproximantRule {
    /// `x_k = T^{−n_k} y`
    InversePower,
    /// `x_k = 0`
    Zero,
    /// For the sample with index `s`, `x_k = T^{powers[s]} companions[k−1]`.
    OrbitTransport { powers: Vec<u32>, companions: Vec<SparseVector> },
    /// Componentwise rules on a direct sum.
    Pair { left: Box<ApproximantRule>, right: Box<ApproximantRule> },
}

impl ApproximantRule {
    pub fn approximant(&self, op: &OperatorExpr, k: usize, n_k: u64, id: &SampleId, y: &Element) -> Result<Element> {
        let n = i64::try_from(n_k).map_err(|_| Error::Overflow(format!("iterate {n_k}")))?;
        match self {
            ApproximantRule::InversePower => op.apply_power(y, -n),
            ApproximantRule::Zero => Ok(y.zero_like()),
            ApproximantRule::OrbitTransport { powers, companions } => {
                let s = id.flat().ok_or_else(|| Error::ShapeMismatch("orbit transport needs flat sample ids".into()))?;
                let power = *powers
                    .get(s)
                    .ok_or_else(|| Error::InvalidParameter(format!("no orbit power recorded for sample {s}")))?;
                let companion = companions
                    .get(k - 1)
                    .ok_or_else(|| Error::InvalidParameter(format!("no companion vector recorded for k = {k}")))?;
                op.apply_power(&Element::Single(companion.clone()), power as i64)
            }
            ApproximantRule::Pair { left, right } => {
                let OperatorExpr::DirectSum { left: lop, right: rop } = op else {
                    return Err(Error::ShapeMismatch("pair approximants need a direct-sum operator".into()));
                };
                let SampleId::Pair(lid, rid) = id else {
                    return Err(Error::ShapeMismatch("pair approximants need product samples".into()));
                };
                let y = y.as_pair()?;
                let l = left.approximant(lop, k, n_k, lid, &Element::Single(y.left.clone()))?;
                let r = right.approximant(rop, k, n_k, rid, &Element::Single(y.right.clone()))?;
                Ok(Element::pair(l.as_single()?.clone(), r.as_single()?.clone()))
            }
        }
    }
}

/// Iterates, dense sets and approximants witnessing the subspace criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionData {
    pub iterates: Iterates,
    pub dense_set_1: DenseSetSpec,
    pub dense_set_2: DenseSetSpec,
    pub approximants: ApproximantRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceCheckParams {
    pub tol: f64,
    pub horizon: usize,
    pub sample_budget: usize,
}

impl Default for SubspaceCheckParams {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, horizon: DEFAULT_HORIZON, sample_budget: 64 }
    }
}

/// Checks decay on the first dense set, approach on the second, and
/// `T^{n_k} M ⊆ M`, for `k ≤ horizon` over the first `sample_budget`
/// samples of each set.
pub fn check_subspace_criterion(
    op: &OperatorExpr,
    m: &Subspace,
    data: &CriterionData,
    params: &SubspaceCheckParams,
) -> Result<CriterionReport> {
    if !m.is_nontrivial() {
        return Err(Error::TrivialSubspace);
    }
    data.iterates.validate()?;
    let d1 = data.dense_set_1.samples(params.sample_budget)?;
    let d2 = data.dense_set_2.samples(params.sample_budget)?;
    for (_, x) in d1.iter().chain(&d2) {
        if !m.contains(x) {
            return Err(Error::NotInSubspace("dense-set sample".into()));
        }
    }
    let empty = d1.is_empty() || d2.is_empty();

    let rows: Vec<(CriterionRow, Option<usize>)> = (1..=params.horizon)
        .into_par_iter()
        .map(|k| -> Result<(CriterionRow, Option<usize>)> {
            let n_k = data.iterates.nth(k)?;
            let n = i64::try_from(n_k).map_err(|_| Error::Overflow(format!("iterate {n_k}")))?;
            let (invariant, invariance_sampled) = match invariance_check(op, m, n).holds() {
                Some(b) => (b, false),
                None => (sampled_invariance_check(op, m, n, SAMPLED_INVARIANCE_WINDOW)?, true),
            };
            let mut row = CriterionRow {
                k,
                n_k,
                forward_log: None,
                backward_log: None,
                decay: None,
                approx_norm: None,
                approx_error: None,
                invariant,
                invariance_sampled,
                approximants_in_subspace: true,
            };
            if empty {
                return Ok((row, None));
            }
            let mut decay: f64 = 0.0;
            for (_, x) in &d1 {
                decay = decay.max(op.apply_power(x, n)?.norm());
            }
            let mut norm: f64 = 0.0;
            let mut err: f64 = 0.0;
            let mut outside = None;
            for (idx, (id, y)) in d2.iter().enumerate() {
                let xk = data.approximants.approximant(op, k, n_k, id, y)?;
                if outside.is_none() && !m.contains(&xk) {
                    outside = Some(idx);
                }
                norm = norm.max(xk.norm());
                err = err.max(op.apply_power(&xk, n)?.distance(y)?);
            }
            row.decay = Some(decay);
            row.approx_norm = Some(norm);
            row.approx_error = Some(err);
            row.approximants_in_subspace = outside.is_none();
            Ok((row, outside))
        })
        .collect::<Result<Vec<_>>>()?;

    let outside_sample = rows.iter().find_map(|(r, s)| s.map(|s| (r.k, s)));
    let rows: Vec<CriterionRow> = rows.into_iter().map(|(r, _)| r).collect();
    let (verdict, mut witness) = if empty { (Verdict::Undecided, None) } else { judge(CriterionKind::Subspace, &rows, params.tol) };
    if let (Some(w), Some((k, s))) = (witness.as_mut(), outside_sample) {
        if w.k == k && rows.iter().all(|r| r.invariant) {
            w.sample = Some(s);
        }
    }
    Ok(CriterionReport {
        kind: CriterionKind::Subspace,
        verdict,
        tol: params.tol,
        horizon: params.horizon,
        rows,
        witness,
        components: Vec::new(),
    })
}

/// Criterion data for `T ⊕ T` on `M ⊕ M` built from data for `T` on `M`.
pub fn lift_criterion(data: &CriterionData) -> CriterionData {
    CriterionData {
        iterates: data.iterates.clone(),
        dense_set_1: DenseSetSpec::Product {
            left: Box::new(data.dense_set_1.clone()),
            right: Box::new(data.dense_set_1.clone()),
        },
        dense_set_2: DenseSetSpec::Product {
            left: Box::new(data.dense_set_2.clone()),
            right: Box::new(data.dense_set_2.clone()),
        },
        approximants: ApproximantRule::Pair {
            left: Box::new(data.approximants.clone()),
            right: Box::new(data.approximants.clone()),
        },
    }
}

/// `(T ⊕ T, M ⊕ M)` from `(T, M)`.
pub fn lift_problem(op: &OperatorExpr, m: &CoordinateSubspace) -> (OperatorExpr, Subspace) {
    (OperatorExpr::direct_sum(op.clone(), op.clone()), Subspace::pair(m.clone(), m.clone()))
}

/// Splits product-form data for `T₁ ⊕ T₂` into data for `T₁` and `T₂`.
pub fn split_criterion(data: &CriterionData) -> Result<(CriterionData, CriterionData)> {
    let (DenseSetSpec::Product { left: d1, right: d3 }, DenseSetSpec::Product { left: d2, right: d4 }) =
        (&data.dense_set_1, &data.dense_set_2)
    else {
        return Err(Error::NotProductForm);
    };
    let (la, ra) = match &data.approximants {
        ApproximantRule::Pair { left, right } => ((**left).clone(), (**right).clone()),
        ApproximantRule::OrbitTransport { .. } => return Err(Error::NotProductForm),
        other => (other.clone(), other.clone()),
    };
    let left = CriterionData {
        iterates: data.iterates.clone(),
        dense_set_1: (**d1).clone(),
        dense_set_2: (**d2).clone(),
        approximants: la,
    };
    let right = CriterionData {
        iterates: data.iterates.clone(),
        dense_set_1: (**d3).clone(),
        dense_set_2: (**d4).clone(),
        approximants: ra,
    };
    Ok((left, right))
}

/// Floor on `max(∏ w, ∏ a)` certified by [`build_example32_weights`].
pub const EXAMPLE32_FLOOR: f64 = 0.5;
/// Criterion horizon and tolerance of the per-component certificate.
pub const EXAMPLE32_CRITERION_HORIZON: usize = 6;
pub const EXAMPLE32_CRITERION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example32Certificate {
    pub horizon: u64,
    pub floor: f64,
    /// `min_{n ≤ N} max(ln ∏_{j<n} w_j, ln ∏_{j<n} a_j)` and its argmin.
    pub min_forward_max_log: f64,
    pub argmin_forward: u64,
    /// Same for `∏_{j=1}^{n} 1/w_{−j}` and `∏_{j=1}^{n} 1/a_{−j}`.
    pub min_backward_max_log: f64,
    pub argmin_backward: u64,
    pub w_report: CriterionReport,
    pub a_report: CriterionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example32 {
    pub w: WeightSequence,
    pub a: WeightSequence,
    pub w_iterates: Iterates,
    pub a_iterates: Iterates,
    pub certificate: Example32Certificate,
}

/// Two block weight sequences that each satisfy the single-shift product
/// criterion along their own iterates, while `max(∏ w, ∏ a) ≥ 1/2` for
/// every `n ≤ horizon` on both sides. Verified before returning.
///
/// Blocks have lengths `4^k` and alternate between `1/2` and `2`; `a` is
/// `w` shifted by one block, so `w_j a_j = 1` for every `j`. Negative
/// indices mirror the positive side with reciprocal weights, which makes
/// the backward products equal the forward ones.
pub fn build_example32_weights(horizon: u64) -> Result<Example32> {
    if horizon < 64 {
        return Err(Error::InvalidParameter(format!("horizon must be at least 64, got {horizon}")));
    }
    let w = WeightSequence::blocks(4, vec![0.5, 2.0], 0, NegativeRule::ReciprocalMirror)?;
    let a = WeightSequence::blocks(4, vec![0.5, 2.0], 1, NegativeRule::ReciprocalMirror)?;
    let w_iterates = Iterates::BlockEnds { base: 4, first_block: 0, stride: 2 };
    let a_iterates = Iterates::BlockEnds { base: 4, first_block: 1, stride: 2 };

    let whole = CoordinateSubspace::whole(SpaceKind::Bilateral);
    let params = ProductCriterionParams {
        horizon: EXAMPLE32_CRITERION_HORIZON,
        tol: EXAMPLE32_CRITERION_TOL,
        convention: BackwardIndexConvention::default(),
    };
    let tw = WeightedShift::bilateral(w.clone());
    let ta = WeightedShift::bilateral(a.clone());
    let w_report = eval_forward_criterion(&tw, &whole, 0, &w_iterates, &params)?;
    let a_report = eval_forward_criterion(&ta, &whole, 0, &a_iterates, &params)?;
    for report in [&w_report, &a_report] {
        if report.verdict != Verdict::SatisfiedToHorizon {
            let n = report.rows.last().map_or(0, |r| r.n_k);
            return Err(Error::ConstructionFailed { n, detail: "component criterion not satisfied".into() });
        }
    }

    // Brute-force scan, one weight at a time.
    let floor_log = EXAMPLE32_FLOOR.ln();
    let (mut fw, mut fa, mut bw, mut ba) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut min_fwd = (f64::INFINITY, 0u64);
    let mut min_bwd = (f64::INFINITY, 0u64);
    for n in 1..=horizon {
        let j = (n - 1) as i64;
        fw += w.weight(j).ln();
        fa += a.weight(j).ln();
        bw -= w.weight(-(n as i64)).ln();
        ba -= a.weight(-(n as i64)).ln();
        let f = fw.max(fa);
        let b = bw.max(ba);
        if f < min_fwd.0 {
            min_fwd = (f, n);
        }
        if b < min_bwd.0 {
            min_bwd = (b, n);
        }
        if f < floor_log {
            return Err(Error::ConstructionFailed { n, detail: format!("forward max log-product {f} below the floor") });
        }
        if b < floor_log {
            return Err(Error::ConstructionFailed { n, detail: format!("backward max log-product {b} below the floor") });
        }
    }

    Ok(Example32 {
        w,
        a,
        w_iterates,
        a_iterates,
        certificate: Example32Certificate {
            horizon,
            floor: EXAMPLE32_FLOOR,
            min_forward_max_log: min_fwd.0,
            argmin_forward: min_fwd.1,
            min_backward_max_log: min_bwd.0,
            argmin_backward: min_bwd.1,
            w_report,
            a_report,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapVerdict {
    DisjointToHorizon,
    Overlapping,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsequenceReport {
    pub horizon: u64,
    pub overlap: Vec<u64>,
    pub verdict: OverlapVerdict,
}

/// Common terms of two iterate sequences up to `horizon`.
pub fn common_subsequence_report(a: &Iterates, b: &Iterates, horizon: u64) -> Result<SubsequenceReport> {
    let xs = a.up_to(horizon)?;
    let ys: std::collections::BTreeSet<u64> = b.up_to(horizon)?.into_iter().collect();
    let overlap: Vec<u64> = xs.into_iter().filter(|x| ys.contains(x)).collect();
    let verdict = if overlap.is_empty() { OverlapVerdict::DisjointToHorizon } else { OverlapVerdict::Overlapping };
    Ok(SubsequenceReport { horizon, overlap, verdict })
}
