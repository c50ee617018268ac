//! Named, config-driven experiments with auditable reports.
//!
//! A report's verdict is a function of its recorded checks only, so it can
//! be recomputed from the serialized report. Reports hold no timings or
//! other run-dependent data; identical configs and seeds give identical
//! bytes.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    build_example32_weights, check_subspace_criterion, eval_direct_sum_criterion, lift_criterion, lift_problem,
    split_criterion, ApproximantRule, CriterionData, CriterionReport, DenseSetSpec, Iterates, ProductCriterionParams,
    SubspaceCheckParams, Verdict, DEFAULT_HORIZON, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::orbit::{
    compute_orbit, density_report, map_orbit_by_commutant, project_orbit, projection_samples, return_set,
    transitivity_witness, ClassificationParams, MemoryBudget, ProjectionSample, ReturnSet,
};
use crate::shift::{invariance_check, Invariance, OperatorExpr, WeightedShift};
use crate::space::{make_net, CoordinateSubspace, Element, SpaceKind, SparseVector, Subspace};
use crate::weights::{NegativeRule, WeightSequence};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Comparison used by a [`Check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

impl Relation {
    pub fn holds(self, observed: f64, bound: f64) -> bool {
        match self {
            Relation::Le => observed <= bound,
            Relation::Lt => observed < bound,
            Relation::Ge => observed >= bound,
            Relation::Eq => observed == bound,
        }
    }
}

/// One recorded assertion: `observed relation bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub relation: Relation,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, relation: Relation, bound: f64) -> Self {
        Check { name: name.into(), observed, relation, bound, passed: relation.holds(observed, bound) }
    }

    /// A yes/no assertion recorded as `observed == 1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Relation::Eq, 1.0)
    }

    pub fn recompute(&self) -> bool {
        self.relation.holds(self.observed, self.bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentVerdict {
    Pass,
    Fail,
    Undecided,
    ExtractionIncomplete,
}

fn verdict_from(checks: &[Check], pending: Option<ExperimentVerdict>) -> ExperimentVerdict {
    if checks.iter().any(|c| !c.recompute()) {
        ExperimentVerdict::Fail
    } else {
        pending.unwrap_or(ExperimentVerdict::Pass)
    }
}

/// Projection-law summary of one random direct-sum orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRun {
    pub run: usize,
    pub samples: usize,
    pub violations: usize,
    /// `min (pair − max(left, right))` over all samples.
    pub min_slack: f64,
    pub coverage_pair: f64,
    pub coverage_left: f64,
    pub coverage_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSummary {
    pub lambda: f64,
    pub n: u64,
    pub pairs: usize,
    pub max_err_near: f64,
    pub max_err_far: f64,
    pub max_combined: f64,
    pub closed_form_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormDecaySummary {
    pub lambda: f64,
    pub horizon: u64,
    pub norm_bound_violations: usize,
    pub monotonicity_violations: usize,
    pub target_scale: f64,
    pub targets: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutantSummary {
    pub case: String,
    pub commute_residual: f64,
    pub transport_residual: f64,
    pub norm_bound: f64,
    pub covers: usize,
    pub transported_covers: usize,
    pub transport_violations: usize,
    pub max_distance_ratio: f64,
    pub image_subspace: Subspace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCaseTrace {
    pub case: String,
    pub base: CriterionReport,
    pub lifted: CriterionReport,
    pub split_left_matches: bool,
    pub split_right_matches: bool,
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example32Trace {
    pub horizon: u64,
    pub w_verdict: Verdict,
    pub a_verdict: Verdict,
    pub pair_on_w_iterates: Verdict,
    pub pair_on_a_iterates: Verdict,
    pub min_forward_max_log: f64,
    pub min_backward_max_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStep {
    pub k: usize,
    pub delta: f64,
    pub n: u64,
    pub r: u64,
    pub x_decay: f64,
    pub u_norm: f64,
    pub approach_error: f64,
    pub invariant: bool,
}

/// Recorded evidence, one variant per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentTraces {
    Projection { runs: Vec<ProjectionRun>, negative_control_violations: usize },
    Mixing { mixing: ReturnSet, transitive: ReturnSet, direct_sum: ReturnSet, missing: Vec<u64>, negative_control_missing: usize },
    CriterionTransfer { cases: Vec<TransferCaseTrace>, example32: Option<Example32Trace> },
    Commutant { cases: Vec<CommutantSummary> },
    CriterionExtraction { accepted: Vec<ExtractionStep>, condition_i: Option<bool>, validation: Option<CriterionReport> },
    Rolewicz { witnesses: Vec<WitnessSummary>, decay: Vec<NormDecaySummary> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub verdict: ExperimentVerdict,
    /// Verdict when every check passes but the run could not conclude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<ExperimentVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub traces: ExperimentTraces,
}

impl ExperimentReport {
    fn new(config: &ExperimentConfig, seed: u64, checks: Vec<Check>, pending: Option<ExperimentVerdict>, notes: Vec<String>, traces: ExperimentTraces) -> Self {
        ExperimentReport {
            experiment: config.name().to_string(),
            seed,
            config: config.clone(),
            verdict: verdict_from(&checks, pending),
            checks,
            pending,
            notes,
            traces,
        }
    }

    /// Verdict recomputed from the recorded checks.
    pub fn recompute_verdict(&self) -> ExperimentVerdict {
        verdict_from(&self.checks, self.pending)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionConfig {
    pub left: OperatorExpr,
    pub right: OperatorExpr,
    pub left_subspace: CoordinateSubspace,
    pub right_subspace: CoordinateSubspace,
    pub runs: usize,
    pub orbit_length: u64,
    /// Random starts are supported on this many leading indices of each
    /// subspace, with coefficients uniform in `[-1, 1]`.
    pub start_support: usize,
    pub left_net: DenseSetSpec,
    pub right_net: DenseSetSpec,
    pub epsilon: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        let m = CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).expect("valid residues");
        let t = good_shift();
        let net = DenseSetSpec::net(m.clone(), 2, vec![-1.0, 0.0, 1.0]);
        ProjectionConfig {
            left: t.clone(),
            right: t,
            left_subspace: m.clone(),
            right_subspace: m,
            runs: 100,
            orbit_length: 500,
            start_support: 3,
            left_net: net.clone(),
            right_net: net,
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub mixing: OperatorExpr,
    pub mixing_subspace: CoordinateSubspace,
    pub mixing_center: SparseVector,
    pub transitive: OperatorExpr,
    pub transitive_subspace: CoordinateSubspace,
    pub transitive_center: SparseVector,
    pub radius: f64,
    pub horizon: u64,
    pub max_n0: u64,
    pub min_transitive_size: usize,
    #[serde(default)]
    pub classification: ClassificationParams,
}

impl Default for MixingConfig {
    fn default() -> Self {
        let whole = CoordinateSubspace::whole(SpaceKind::Bilateral);
        let e0 = SparseVector::basis(SpaceKind::Bilateral, 0).expect("valid index");
        MixingConfig {
            mixing: good_shift(),
            mixing_subspace: whole.clone(),
            mixing_center: e0.clone(),
            transitive: OperatorExpr::shift(block_weights(0)),
            transitive_subspace: whole,
            transitive_center: e0,
            radius: 0.5,
            horizon: 2000,
            max_n0: 200,
            min_transitive_size: 50,
            classification: ClassificationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferCase {
    pub name: String,
    pub operator: OperatorExpr,
    pub subspace: CoordinateSubspace,
    pub data: CriterionData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub cases: Vec<TransferCase>,
    pub tol: f64,
    pub horizon: usize,
    pub sample_budget: usize,
    /// Horizon of the block-weight counterexample, if it is to be run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example32_horizon: Option<u64>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        let m = CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).expect("valid residues");
        let net = DenseSetSpec::net(m.clone(), 2, vec![-1.0, 0.5, 1.0]);
        let data = |iterates: Iterates| CriterionData {
            iterates,
            dense_set_1: net.clone(),
            dense_set_2: net.clone(),
            approximants: ApproximantRule::InversePower,
        };
        TransferConfig {
            cases: vec![
                TransferCase {
                    name: "even_iterates".into(),
                    operator: good_shift(),
                    subspace: m.clone(),
                    data: data(Iterates::Arithmetic { step: 2, offset: 0 }),
                },
                TransferCase {
                    name: "all_iterates".into(),
                    operator: good_shift(),
                    subspace: m,
                    data: data(Iterates::Arithmetic { step: 1, offset: 0 }),
                },
            ],
            tol: DEFAULT_TOL,
            horizon: DEFAULT_HORIZON,
            sample_budget: 64,
            example32_horizon: Some(10_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutantCase {
    pub name: String,
    pub operator: OperatorExpr,
    pub commutant: OperatorExpr,
    pub subspace: CoordinateSubspace,
    pub start: SparseVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutantConfig {
    pub cases: Vec<CommutantCase>,
    pub orbit_length: u64,
    pub net_support: usize,
    pub net_grid: Vec<f64>,
    pub epsilon: f64,
    pub window: u64,
    pub tol: f64,
    /// Relative slack on `d' ≤ ‖S‖·d` for rounding in the image orbit.
    pub relative_slack: f64,
}

impl Default for CommutantConfig {
    fn default() -> Self {
        let b = SpaceKind::Bilateral;
        let evens = CoordinateSubspace::residues(b, 2, [0]).expect("valid residues");
        let start = SparseVector::from_real(b, [(0, 1.0), (2, 0.5)]).expect("valid vector");
        let half = OperatorExpr::shift(WeightSequence::constant(0.5).expect("valid weight"));
        CommutantConfig {
            cases: vec![
                CommutantCase {
                    name: "power".into(),
                    operator: good_shift(),
                    commutant: good_shift().pow(3),
                    subspace: evens.clone(),
                    start: start.clone(),
                },
                CommutantCase {
                    name: "scalar".into(),
                    operator: good_shift(),
                    commutant: OperatorExpr::Identity.scaled(Complex64::new(2.0, 0.0)),
                    subspace: evens.clone(),
                    start: start.clone(),
                },
                CommutantCase {
                    name: "unweighted_shift".into(),
                    operator: half,
                    commutant: OperatorExpr::Shift(WeightedShift::unweighted(b)),
                    subspace: evens,
                    start,
                },
            ],
            orbit_length: 200,
            net_support: 2,
            net_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            epsilon: 0.5,
            window: 32,
            tol: 1e-12,
            relative_slack: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionConfig {
    pub operator: OperatorExpr,
    pub subspace: CoordinateSubspace,
    pub x: SparseVector,
    pub y: SparseVector,
    pub deltas: Vec<f64>,
    pub horizon: u64,
}

impl ExtractionConfig {
    /// `T = W²` with `W` the bilateral shift with weights `1/2` on
    /// `n ≥ 0` and `2` on `n < 0`, `M` the even indices, `x = e₀` and
    /// `y = Σ_{j=1}^{10} T^{−10j} e₀`. Then `‖T^k x‖ = 4^{−k}` and
    /// `T^{10−k} y ≈ x − T^{10−k}·(small)`, so the search accepts
    /// `n_k = k` with companions `T^{10−k} y`.
    pub fn synthetic() -> Result<Self> {
        let b = SpaceKind::Bilateral;
        let t = good_shift().pow(2);
        let e0: Element = SparseVector::basis(b, 0)?.into();
        let mut y = SparseVector::zero(b);
        for j in 1..=10 {
            y = y.add(t.apply_power(&e0, -10 * j)?.as_single()?)?;
        }
        Ok(ExtractionConfig {
            operator: t,
            subspace: CoordinateSubspace::residues(b, 2, [0])?,
            x: SparseVector::basis(b, 0)?,
            y,
            deltas: (1..=10).map(|k| 0.5f64.powi(k)).collect(),
            horizon: 40,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolewiczConfig {
    pub lambdas: Vec<f64>,
    pub witness_n: u64,
    pub net_support: usize,
    pub net_grid: Vec<f64>,
    pub horizon: u64,
    pub epsilon: f64,
    /// Orbit start for `|λ| ≤ 1`.
    pub start: SparseVector,
    /// Coverage bound for `|λ| < 1`.
    pub max_coverage: f64,
    /// Absolute bound on the combined witness error for `|λ| > 1`.
    pub max_error: f64,
}

impl Default for RolewiczConfig {
    fn default() -> Self {
        let u = SpaceKind::Unilateral;
        RolewiczConfig {
            lambdas: vec![2.0, 0.5, 1.0],
            witness_n: 30,
            net_support: 4,
            net_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            horizon: 1000,
            epsilon: 0.5,
            start: SparseVector::from_real(u, (0..4).map(|i| (i, 0.5))).expect("valid vector"),
            max_coverage: 0.1,
            max_error: 1e-6,
        }
    }
}

/// Experiment configuration, tagged by experiment name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Projection(ProjectionConfig),
    Mixing(MixingConfig),
    CriterionTransfer(TransferConfig),
    Commutant(CommutantConfig),
    CriterionExtraction(ExtractionConfig),
    Rolewicz(RolewiczConfig),
}

pub const EXPERIMENT_NAMES: [&str; 6] =
    ["projection", "mixing", "criterion_transfer", "commutant", "criterion_extraction", "rolewicz"];

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Projection(_) => "projection",
            ExperimentConfig::Mixing(_) => "mixing",
            ExperimentConfig::CriterionTransfer(_) => "criterion_transfer",
            ExperimentConfig::Commutant(_) => "commutant",
            ExperimentConfig::CriterionExtraction(_) => "criterion_extraction",
            ExperimentConfig::Rolewicz(_) => "rolewicz",
        }
    }

    /// Default configuration of a named experiment.
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "projection" => ExperimentConfig::Projection(ProjectionConfig::default()),
            "mixing" => ExperimentConfig::Mixing(MixingConfig::default()),
            "criterion_transfer" => ExperimentConfig::CriterionTransfer(TransferConfig::default()),
            "commutant" => ExperimentConfig::Commutant(CommutantConfig::default()),
            "criterion_extraction" => ExperimentConfig::CriterionExtraction(ExtractionConfig::synthetic()?),
            "rolewicz" => ExperimentConfig::Rolewicz(RolewiczConfig::default()),
            other => return Err(Error::InvalidParameter(format!("unknown experiment {other:?}"))),
        })
    }
}

/// The default configuration of every experiment.
pub fn default_suite() -> Result<Vec<ExperimentConfig>> {
    EXPERIMENT_NAMES.iter().map(|n| ExperimentConfig::default_for(n)).collect()
}

pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    match config {
        ExperimentConfig::Projection(c) => run_projection_experiment(config, c, seed),
        ExperimentConfig::Mixing(c) => run_mixing_experiment(config, c, seed),
        ExperimentConfig::CriterionTransfer(c) => run_criterion_transfer_experiment(config, c, seed),
        ExperimentConfig::Commutant(c) => run_commutant_experiment(config, c, seed),
        ExperimentConfig::CriterionExtraction(c) => run_criterion_extraction(config, c, seed),
        ExperimentConfig::Rolewicz(c) => run_rolewicz_experiment(config, c, seed),
    }
}

/// Runs every config in order.
pub fn run_suite(configs: &[ExperimentConfig], seed: u64) -> Result<Vec<ExperimentReport>> {
    configs.iter().map(|c| run_experiment(c, seed)).collect()
}

fn good_shift() -> OperatorExpr {
    OperatorExpr::shift(WeightSequence::piecewise(0.5, 2.0).expect("valid weights"))
}

fn block_weights(phase: usize) -> WeightSequence {
    WeightSequence::blocks(4, vec![0.5, 2.0], phase, NegativeRule::ReciprocalMirror).expect("valid weights")
}

fn random_vector(rng: &mut ChaCha8Rng, m: &CoordinateSubspace, support: usize) -> Result<SparseVector> {
    let entries: Vec<(i64, f64)> = m.first_indices(support).into_iter().map(|i| (i, rng.gen_range(-1.0..=1.0))).collect();
    SparseVector::from_real(m.space(), entries)
}

fn singles(spec: &DenseSetSpec) -> Result<Vec<SparseVector>> {
    spec.samples(usize::MAX)?.into_iter().map(|(_, e)| e.as_single().cloned()).collect()
}

/// Counts projection-law violations among samples.
pub fn count_projection_violations(samples: &[ProjectionSample]) -> usize {
    samples.iter().filter(|s| s.violates()).count()
}

fn run_projection_experiment(config: &ExperimentConfig, c: &ProjectionConfig, seed: u64) -> Result<ExperimentReport> {
    let left_targets = singles(&c.left_net)?;
    let right_targets = singles(&c.right_net)?;
    let pairs: Vec<(SparseVector, SparseVector)> =
        left_targets.iter().flat_map(|a| right_targets.iter().map(move |b| (a.clone(), b.clone()))).collect();
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("projection nets are empty".into()));
    }
    let op = OperatorExpr::direct_sum(c.left.clone(), c.right.clone());
    let m = Subspace::pair(c.left_subspace.clone(), c.right_subspace.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Element> = (0..c.runs)
        .map(|_| {
            Ok(Element::pair(
                random_vector(&mut rng, &c.left_subspace, c.start_support)?,
                random_vector(&mut rng, &c.right_subspace, c.start_support)?,
            ))
        })
        .collect::<Result<_>>()?;
    let budget = MemoryBudget::default();
    let pair_elems: Vec<Element> = pairs.iter().map(|(a, b)| Element::pair(a.clone(), b.clone())).collect();
    let lt: Vec<Element> = left_targets.iter().cloned().map(Element::from).collect();
    let rt: Vec<Element> = right_targets.iter().cloned().map(Element::from).collect();

    let results: Vec<(ProjectionRun, usize)> = starts
        .par_iter()
        .enumerate()
        .map(|(run, start)| -> Result<(ProjectionRun, usize)> {
            let mut trace = compute_orbit(&op, start, c.orbit_length, &m, &budget)?;
            let samples = projection_samples(&trace, &pairs)?;
            let violations = count_projection_violations(&samples);
            let min_slack = samples.iter().map(|s| s.pair - s.left.max(s.right)).fold(f64::INFINITY, f64::min);
            // Negative control: a fake pair orbit with shrunk distances.
            let fake: Vec<ProjectionSample> =
                samples.iter().map(|s| ProjectionSample { pair: s.pair * 0.5, ..*s }).collect();
            let control = count_projection_violations(&fake);
            let (mut l, mut r) = project_orbit(&trace)?;
            let coverage_pair = density_report(&mut trace, &pair_elems, c.epsilon)?.coverage;
            let coverage_left = density_report(&mut l, &lt, c.epsilon)?.coverage;
            let coverage_right = density_report(&mut r, &rt, c.epsilon)?.coverage;
            let run = ProjectionRun {
                run,
                samples: samples.len(),
                violations,
                min_slack: if min_slack.is_finite() { min_slack } else { 0.0 },
                coverage_pair,
                coverage_left,
                coverage_right,
            };
            Ok((run, control))
        })
        .collect::<Result<_>>()?;

    let runs: Vec<ProjectionRun> = results.iter().map(|(r, _)| r.clone()).collect();
    let control: usize = results.iter().map(|(_, c)| c).sum();
    let total: usize = runs.iter().map(|r| r.violations).sum();
    let coverage_breaks = runs.iter().filter(|r| r.coverage_pair > r.coverage_left.min(r.coverage_right)).count();
    let checks = vec![
        Check::new("projection_law_violations", total as f64, Relation::Eq, 0.0),
        Check::new("coverage_bound_violations", coverage_breaks as f64, Relation::Eq, 0.0),
        Check::new("product_net_size", pairs.len() as f64, Relation::Ge, 1.0),
        Check::new("negative_control_violations", control as f64, Relation::Ge, if c.runs > 0 { 1.0 } else { 0.0 }),
    ];
    let traces = ExperimentTraces::Projection { runs, negative_control_violations: control };
    Ok(ExperimentReport::new(config, seed, checks, None, Vec::new(), traces))
}

fn run_mixing_experiment(config: &ExperimentConfig, c: &MixingConfig, seed: u64) -> Result<ExperimentReport> {
    let p = &c.classification;
    let u1: Element = c.mixing_center.clone().into();
    let u2: Element = c.transitive_center.clone().into();
    let m1 = Subspace::Single(c.mixing_subspace.clone());
    let m2 = Subspace::Single(c.transitive_subspace.clone());
    let r1 = return_set(&c.mixing, &m1, &u1, c.radius, &u1, c.radius, c.horizon, p)?;
    let r2 = return_set(&c.transitive, &m2, &u2, c.radius, &u2, c.radius, c.horizon, p)?;
    let op = OperatorExpr::direct_sum(c.mixing.clone(), c.transitive.clone());
    let m12 = Subspace::pair(c.mixing_subspace.clone(), c.transitive_subspace.clone());
    let pair = Element::pair(c.mixing_center.clone(), c.transitive_center.clone());
    let r12 = return_set(&op, &m12, &pair, c.radius, &pair, c.radius, c.horizon, p)?;

    let inter = r1.intersection(&r2);
    let missing: Vec<u64> = inter.iter().copied().filter(|n| !r12.contains(*n)).collect();
    // Negative control: drop one common element from the direct-sum set.
    let control = match inter.first() {
        Some(first) => {
            let shrunk: BTreeSet<u64> = r12.members.iter().copied().filter(|n| n != first).collect();
            inter.iter().filter(|n| !shrunk.contains(n)).count()
        }
        None => 0,
    };
    let n0 = match r1.classification {
        crate::orbit::Classification::CofiniteBeyond { n0 } => n0 as f64,
        _ => f64::MAX,
    };
    let mut notes = Vec::new();
    if r1.members.is_empty() || r2.members.is_empty() {
        notes.push("a component return set is empty; the inclusion holds vacuously".to_string());
    }
    let checks = vec![
        Check::flag("mixing_set_cofinite", r1.is_cofinite()),
        Check::new("mixing_n0", n0, Relation::Le, c.max_n0 as f64),
        Check::new("transitive_set_size", r2.members.len() as f64, Relation::Ge, c.min_transitive_size as f64),
        Check::new("intersection_missing_from_direct_sum", missing.len() as f64, Relation::Eq, 0.0),
        Check::flag("direct_sum_cofinite_iff_both", r12.is_cofinite() == (r1.is_cofinite() && r2.is_cofinite())),
        Check::new("negative_control_missing", control as f64, Relation::Ge, if inter.is_empty() { 0.0 } else { 1.0 }),
    ];
    let traces = ExperimentTraces::Mixing { mixing: r1, transitive: r2, direct_sum: r12, missing, negative_control_missing: control };
    Ok(ExperimentReport::new(config, seed, checks, None, notes, traces))
}

fn run_criterion_transfer_experiment(config: &ExperimentConfig, c: &TransferConfig, seed: u64) -> Result<ExperimentReport> {
    let params = SubspaceCheckParams { tol: c.tol, horizon: c.horizon, sample_budget: c.sample_budget };
    let lifted_params = SubspaceCheckParams {
        tol: std::f64::consts::SQRT_2 * c.tol,
        sample_budget: c.sample_budget.saturating_mul(c.sample_budget),
        ..params
    };
    let mut checks = Vec::new();
    let mut traces = Vec::new();
    for case in &c.cases {
        let m = Subspace::Single(case.subspace.clone());
        let base = check_subspace_criterion(&case.operator, &m, &case.data, &params)?;
        let (lop, lm) = lift_problem(&case.operator, &case.subspace);
        let lifted_data = lift_criterion(&case.data);
        let lifted = check_subspace_criterion(&lop, &lm, &lifted_data, &lifted_params)?;
        let (dl, dr) = split_criterion(&lifted_data)?;
        let left = check_subspace_criterion(&case.operator, &m, &dl, &params)?;
        let right = check_subspace_criterion(&case.operator, &m, &dr, &params)?;
        let s2 = std::f64::consts::SQRT_2;
        let over = |a: Option<f64>, b: Option<f64>| matches!((a, b), (Some(a), Some(b)) if b > s2 * a + 1e-12);
        let bound_violations = base
            .rows
            .iter()
            .zip(&lifted.rows)
            .filter(|(a, b)| over(a.decay, b.decay) || over(a.approx_norm, b.approx_norm) || over(a.approx_error, b.approx_error))
            .count();
        checks.push(Check::flag(format!("{}: lifted verdict agrees", case.name), base.verdict == lifted.verdict));
        checks.push(Check::flag(format!("{}: split traces equal", case.name), left.rows == base.rows && right.rows == base.rows));
        checks.push(Check::new(format!("{}: sqrt2 bound violations", case.name), bound_violations as f64, Relation::Eq, 0.0));
        traces.push(TransferCaseTrace {
            case: case.name.clone(),
            split_left_matches: left.rows == base.rows,
            split_right_matches: right.rows == base.rows,
            base,
            lifted,
            bound_violations,
        });
    }
    let example32 = match c.example32_horizon {
        Some(h) => {
            let ex = build_example32_weights(h)?;
            let whole = CoordinateSubspace::whole(SpaceKind::Bilateral);
            let tw = WeightedShift::bilateral(ex.w.clone());
            let ta = WeightedShift::bilateral(ex.a.clone());
            let p = ProductCriterionParams { horizon: ex.certificate.w_report.horizon, tol: ex.certificate.w_report.tol, ..Default::default() };
            let on_w = eval_direct_sum_criterion(&tw, &ta, &whole, &whole, 0, 0, &ex.w_iterates, &p)?;
            let on_a = eval_direct_sum_criterion(&tw, &ta, &whole, &whole, 0, 0, &ex.a_iterates, &p)?;
            let t = Example32Trace {
                horizon: h,
                w_verdict: ex.certificate.w_report.verdict,
                a_verdict: ex.certificate.a_report.verdict,
                pair_on_w_iterates: on_w.verdict,
                pair_on_a_iterates: on_a.verdict,
                min_forward_max_log: ex.certificate.min_forward_max_log,
                min_backward_max_log: ex.certificate.min_backward_max_log,
            };
            checks.push(Check::flag("example32: components satisfied", t.w_verdict == Verdict::SatisfiedToHorizon && t.a_verdict == Verdict::SatisfiedToHorizon));
            checks.push(Check::flag("example32: direct sum violated", t.pair_on_w_iterates == Verdict::Violated && t.pair_on_a_iterates == Verdict::Violated));
            checks.push(Check::new("example32: forward floor", t.min_forward_max_log, Relation::Ge, ex.certificate.floor.ln()));
            checks.push(Check::new("example32: backward floor", t.min_backward_max_log, Relation::Ge, ex.certificate.floor.ln()));
            Some(t)
        }
        None => None,
    };
    let traces = ExperimentTraces::CriterionTransfer { cases: traces, example32 };
    Ok(ExperimentReport::new(config, seed, checks, None, Vec::new(), traces))
}

fn run_commutant_experiment(config: &ExperimentConfig, c: &CommutantConfig, seed: u64) -> Result<ExperimentReport> {
    let budget = MemoryBudget::default();
    let mut checks = Vec::new();
    let mut summaries = Vec::new();
    for case in &c.cases {
        let m = Subspace::Single(case.subspace.clone());
        let net = make_net(&case.subspace, c.net_support, &c.net_grid, f64::INFINITY)?;
        let targets: Vec<Element> = net.iter().cloned().map(Element::from).collect();
        let mut orbit = compute_orbit(&case.operator, &case.start.clone().into(), c.orbit_length, &m, &budget)?;
        let original = density_report(&mut orbit, &targets, c.epsilon)?;
        let image = map_orbit_by_commutant(&case.operator, &case.commutant, &orbit, &case.subspace, &net, c.epsilon, c.window, c.tol)?;
        let norm_bound = case.commutant.operator_norm_bound();
        let mut violations = 0;
        let mut transported = 0;
        let mut max_ratio: f64 = 0.0;
        for t in original.targets.iter().filter(|t| t.covered) {
            let mapped_target = case.commutant.apply(&targets[t.target])?;
            let d = image.image.point_at(t.witness_step)?.distance_to(&mapped_target)?;
            if d > norm_bound * t.best_distance * (1.0 + c.relative_slack) {
                violations += 1;
            }
            if d <= norm_bound * c.epsilon * (1.0 + c.relative_slack) {
                transported += 1;
            }
            if t.best_distance > 0.0 {
                max_ratio = max_ratio.max(d / t.best_distance);
            }
        }
        checks.push(Check::new(format!("{}: commutation residual", case.name), image.commute.max_residual, Relation::Le, c.tol));
        checks.push(Check::new(format!("{}: orbit transport residual", case.name), image.transport_residual, Relation::Le, c.tol));
        checks.push(Check::new(format!("{}: transported cover violations", case.name), violations as f64, Relation::Eq, 0.0));
        summaries.push(CommutantSummary {
            case: case.name.clone(),
            commute_residual: image.commute.max_residual,
            transport_residual: image.transport_residual,
            norm_bound,
            covers: original.covered_count(),
            transported_covers: transported,
            transport_violations: violations,
            max_distance_ratio: max_ratio,
            image_subspace: image.image_subspace.clone(),
        });
    }
    Ok(ExperimentReport::new(config, seed, checks, None, Vec::new(), ExperimentTraces::Commutant { cases: summaries }))
}

/// `x ∈ ⋂_{n≥1} Tⁿ(M)` for a monomial operator and coordinate `M`, checked
/// over one period for residue sets and up to `horizon` otherwise.
fn in_all_images(op: &OperatorExpr, m: &CoordinateSubspace, x: &SparseVector, horizon: u64) -> Option<bool> {
    let mono = op.monomial()?;
    let span = match m.index_set() {
        crate::space::IndexSet::Residues { modulus, .. } => *modulus,
        _ => horizon,
    };
    for (idx, _) in x.entries() {
        for n in 1..=span as i64 {
            let p = mono.pow(n)?;
            let Some(s) = idx.checked_sub(p.offset) else { return Some(false) };
            if !m.space().admits(s) || !m.contains_index(s) || p.image(s, m.space()) != Some(idx) {
                return Some(false);
            }
        }
    }
    Some(true)
}

fn run_criterion_extraction(config: &ExperimentConfig, c: &ExtractionConfig, seed: u64) -> Result<ExperimentReport> {
    let op = &c.operator;
    let m = Subspace::Single(c.subspace.clone());
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    checks.push(Check::flag("x in M", c.subspace.contains(&c.x)));
    checks.push(Check::flag("y in M", c.subspace.contains(&c.y)));
    let condition_i = in_all_images(op, &c.subspace, &c.x, c.horizon);
    match condition_i {
        Some(ok) => checks.push(Check::flag("condition (i): x in every image of M", ok)),
        None => notes.push("condition (i) has no symbolic rule for this operator; not checked".into()),
    }
    let empty = |checks, notes| {
        ExperimentReport::new(
            config,
            seed,
            checks,
            Some(ExperimentVerdict::ExtractionIncomplete),
            notes,
            ExperimentTraces::CriterionExtraction { accepted: Vec::new(), condition_i, validation: None },
        )
    };
    if checks.iter().any(|ch| !ch.passed) {
        return Ok(empty(checks, notes));
    }

    // Orbits of x and of the companion y up to the horizon.
    let orbit = |v: &SparseVector| -> Result<Vec<Element>> {
        let mut out = vec![Element::Single(v.clone())];
        for _ in 0..c.horizon {
            let next = op.apply(out.last().expect("nonempty"))?;
            out.push(next);
        }
        Ok(out)
    };
    let xs = orbit(&c.x)?;
    let ys = orbit(&c.y)?;
    let x_el: Element = c.x.clone().into();
    let x_norms: Vec<f64> = xs.iter().map(Element::norm).collect();
    let y_norms: Vec<f64> = ys.iter().map(Element::norm).collect();
    let approach: Vec<f64> = ys.iter().map(|p| p.distance(&x_el)).collect::<Result<_>>()?;

    let mut accepted = Vec::new();
    let mut last_n = 0u64;
    for (k, &delta) in c.deltas.iter().enumerate() {
        let mut found = None;
        'search: for n in last_n + 1..=c.horizon {
            if x_norms[n as usize] > delta {
                continue;
            }
            for r in 0..=c.horizon - n {
                if y_norms[r as usize] <= delta && approach[(n + r) as usize] <= delta {
                    found = Some((n, r));
                    break 'search;
                }
            }
        }
        let Some((n, r)) = found else {
            notes.push(format!("no step found for delta = {delta:e} within horizon {}", c.horizon));
            break;
        };
        let invariant = invariance_check(op, &m, n as i64) == Invariance::Holds;
        accepted.push(ExtractionStep {
            k: k + 1,
            delta,
            n,
            r,
            x_decay: x_norms[n as usize],
            u_norm: y_norms[r as usize],
            approach_error: approach[(n + r) as usize],
            invariant,
        });
        last_n = n;
    }
    checks.push(Check::new(
        "condition (ii): invariance failures at accepted steps",
        accepted.iter().filter(|s| !s.invariant).count() as f64,
        Relation::Eq,
        0.0,
    ));
    if accepted.len() < c.deltas.len() || accepted.is_empty() {
        let mut report = empty(checks, notes);
        report.traces = ExperimentTraces::CriterionExtraction { accepted, condition_i, validation: None };
        return Ok(report);
    }

    let companions: Vec<SparseVector> = accepted.iter().map(|s| ys[s.r as usize].as_single().cloned()).collect::<Result<_>>()?;
    let data = CriterionData {
        iterates: Iterates::explicit(accepted.iter().map(|s| s.n).collect())?,
        dense_set_1: DenseSetSpec::Explicit { subspace: m.clone(), samples: vec![x_el.clone()] },
        dense_set_2: DenseSetSpec::Explicit { subspace: m.clone(), samples: vec![x_el] },
        approximants: ApproximantRule::OrbitTransport { powers: vec![0], companions },
    };
    let tol = *c.deltas.last().expect("nonempty");
    let params = SubspaceCheckParams { tol, horizon: accepted.len(), sample_budget: 1 };
    let validation = check_subspace_criterion(op, &m, &data, &params)?;
    checks.push(Check::flag("extracted data satisfies the criterion", validation.verdict == Verdict::SatisfiedToHorizon));
    let traces = ExperimentTraces::CriterionExtraction { accepted, condition_i, validation: Some(validation) };
    Ok(ExperimentReport::new(config, seed, checks, None, notes, traces))
}

fn run_rolewicz_experiment(config: &ExperimentConfig, c: &RolewiczConfig, seed: u64) -> Result<ExperimentReport> {
    let u = SpaceKind::Unilateral;
    let whole = CoordinateSubspace::whole(u);
    let net = make_net(&whole, c.net_support, &c.net_grid, f64::INFINITY)?;
    let unit_net: Vec<SparseVector> = net
        .iter()
        .filter(|v| !v.is_zero())
        .map(|v| v.scale(Complex64::new(1.0 / v.norm(), 0.0)))
        .collect();
    let mut checks = Vec::new();
    let mut witnesses = Vec::new();
    let mut decay = Vec::new();
    for &lambda in &c.lambdas {
        let op = OperatorExpr::rolewicz(lambda);
        if lambda.abs() > 1.0 {
            let errs: Vec<(f64, f64)> = net
                .par_iter()
                .flat_map_iter(|a| net.iter().map(move |b| (a, b)))
                .map(|(a, b)| transitivity_witness(&op, &whole, a, b, c.witness_n).map(|w| (w.err_near, w.err_far)))
                .collect::<Result<_>>()?;
            let max_near = errs.iter().map(|e| e.0).fold(0.0, f64::max);
            let max_far = errs.iter().map(|e| e.1).fold(0.0, f64::max);
            let max_combined = errs.iter().map(|e| e.0 + e.1).fold(0.0, f64::max);
            let max_v = net.iter().map(SparseVector::norm).fold(0.0, f64::max);
            let bound = lambda.abs().powi(-(c.witness_n as i32)) * max_v;
            checks.push(Check::new(format!("lambda {lambda}: max witness error vs closed form"), max_combined, Relation::Le, bound));
            checks.push(Check::new(format!("lambda {lambda}: max witness error"), max_combined, Relation::Le, c.max_error));
            witnesses.push(WitnessSummary {
                lambda,
                n: c.witness_n,
                pairs: errs.len(),
                max_err_near: max_near,
                max_err_far: max_far,
                max_combined,
                closed_form_bound: bound,
            });
        } else {
            let mut orbit = compute_orbit(&op, &c.start.clone().into(), c.horizon, &Subspace::Single(whole.clone()), &MemoryBudget::default())?;
            let start_log = c.start.norm().ln();
            let slack = 1e-12;
            let norm_bound_violations = orbit
                .steps
                .iter()
                .filter(|s| s.log_norm.is_some_and(|l| l > start_log + s.n as f64 * lambda.abs().ln() + slack))
                .count();
            let monotonicity_violations = orbit
                .steps
                .windows(2)
                .filter(|w| match (w[0].log_norm, w[1].log_norm) {
                    (Some(a), Some(b)) => b > a + slack,
                    (None, Some(_)) => true,
                    _ => false,
                })
                .count();
            // Targets of norm 1 below |λ| = 1, of norm 2 at |λ| = 1.
            let scale = if lambda.abs() < 1.0 { 1.0 } else { 2.0 };
            let targets: Vec<Element> = unit_net.iter().map(|v| v.scale(Complex64::new(scale, 0.0)).into()).collect();
            let density = density_report(&mut orbit, &targets, c.epsilon)?;
            checks.push(Check::new(format!("lambda {lambda}: norm bound violations"), norm_bound_violations as f64, Relation::Eq, 0.0));
            if lambda.abs() < 1.0 {
                checks.push(Check::new(format!("lambda {lambda}: unit-net coverage"), density.coverage, Relation::Lt, c.max_coverage));
            } else {
                checks.push(Check::new(format!("lambda {lambda}: nonincreasing norm violations"), monotonicity_violations as f64, Relation::Eq, 0.0));
                checks.push(Check::new(format!("lambda {lambda}: norm-2 target coverage"), density.coverage, Relation::Eq, 0.0));
            }
            decay.push(NormDecaySummary {
                lambda,
                horizon: c.horizon,
                norm_bound_violations,
                monotonicity_violations,
                target_scale: scale,
                targets: targets.len(),
                coverage: density.coverage,
            });
        }
    }
    Ok(ExperimentReport::new(config, seed, checks, None, Vec::new(), ExperimentTraces::Rolewicz { witnesses, decay }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(config: ExperimentConfig) -> ExperimentReport {
        run_experiment(&config, DEFAULT_SEED).unwrap()
    }

    fn failing(r: &ExperimentReport) -> Vec<&Check> {
        r.checks.iter().filter(|c| !c.passed).collect()
    }

    #[test]
    fn relations() {
        assert!(Relation::Le.holds(1.0, 1.0));
        assert!(!Relation::Lt.holds(1.0, 1.0));
        assert!(Relation::Ge.holds(2.0, 1.0));
        assert!(Check::flag("x", true).passed);
        assert!(!Check::flag("x", false).passed);
    }

    #[test]
    fn projection_small() {
        let cfg = ProjectionConfig { runs: 5, orbit_length: 60, ..Default::default() };
        let r = run(ExperimentConfig::Projection(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
    }

    #[test]
    fn projection_degenerate_net() {
        let m = CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [0]).unwrap();
        let zero = DenseSetSpec::Explicit { subspace: Subspace::Single(m), samples: vec![SparseVector::zero(SpaceKind::Bilateral).into()] };
        let cfg = ProjectionConfig { runs: 3, orbit_length: 20, left_net: zero.clone(), right_net: zero, ..Default::default() };
        let r = run(ExperimentConfig::Projection(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
    }

    #[test]
    fn mixing_default() {
        let r = run(ExperimentConfig::Mixing(MixingConfig::default()));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
    }

    #[test]
    fn mixing_with_empty_set_notes_it() {
        let cfg = MixingConfig {
            transitive: OperatorExpr::shift(WeightSequence::constant(2.0).unwrap()),
            min_transitive_size: 0,
            horizon: 100,
            ..Default::default()
        };
        let r = run(ExperimentConfig::Mixing(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
        assert!(!r.notes.is_empty());
    }

    #[test]
    fn both_mixing_gives_cofinite_direct_sum() {
        let cfg = MixingConfig { transitive: good_shift(), horizon: 200, ..Default::default() };
        let r = run(ExperimentConfig::Mixing(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
        let ExperimentTraces::Mixing { direct_sum, .. } = &r.traces else { panic!() };
        assert!(direct_sum.is_cofinite());
    }

    #[test]
    fn transfer_default() {
        let r = run(ExperimentConfig::CriterionTransfer(TransferConfig { example32_horizon: Some(1000), ..Default::default() }));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
        let ExperimentTraces::CriterionTransfer { cases, .. } = &r.traces else { panic!() };
        assert_eq!(cases[0].base.verdict, Verdict::SatisfiedToHorizon);
        assert_eq!(cases[1].base.verdict, Verdict::Violated);
        assert_eq!(cases[1].lifted.verdict, Verdict::Violated);
    }

    #[test]
    fn commutant_default() {
        let r = run(ExperimentConfig::Commutant(CommutantConfig::default()));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
        let ExperimentTraces::Commutant { cases } = &r.traces else { panic!() };
        let odd = Subspace::Single(CoordinateSubspace::residues(SpaceKind::Bilateral, 2, [1]).unwrap());
        assert_eq!(cases[2].image_subspace, odd);
        assert!(cases.iter().all(|c| c.covers > 0));
    }

    #[test]
    fn commutant_failure_is_an_error() {
        let mut cfg = CommutantConfig::default();
        cfg.cases[0].commutant = OperatorExpr::Backward { space: SpaceKind::Bilateral };
        let err = run_experiment(&ExperimentConfig::Commutant(cfg), DEFAULT_SEED).unwrap_err();
        assert!(matches!(err, Error::CommutationFailed { .. }));
    }

    #[test]
    fn extraction_synthetic() {
        let r = run(ExperimentConfig::CriterionExtraction(ExtractionConfig::synthetic().unwrap()));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?} {:?}", failing(&r), r.notes);
        let ExperimentTraces::CriterionExtraction { accepted, .. } = &r.traces else { panic!() };
        assert_eq!(accepted.iter().map(|s| s.n).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        assert!(accepted.iter().all(|s| s.n + s.r == 10));
    }

    #[test]
    fn extraction_edge_cases() {
        let mut cfg = ExtractionConfig::synthetic().unwrap();
        cfg.horizon = 0;
        let r = run(ExperimentConfig::CriterionExtraction(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::ExtractionIncomplete);

        let mut cfg = ExtractionConfig::synthetic().unwrap();
        cfg.subspace = CoordinateSubspace::half_line(SpaceKind::Bilateral, 0);
        cfg.y = SparseVector::zero(SpaceKind::Bilateral);
        let r = run(ExperimentConfig::CriterionExtraction(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::Fail);
        assert!(r.checks.iter().any(|c| c.name.starts_with("condition (i)") && !c.passed));
    }

    #[test]
    fn rolewicz_small() {
        let cfg = RolewiczConfig { net_support: 2, horizon: 200, ..Default::default() };
        let r = run(ExperimentConfig::Rolewicz(cfg));
        assert_eq!(r.verdict, ExperimentVerdict::Pass, "{:?}", failing(&r));
    }

    #[test]
    fn config_round_trip_and_names() {
        for name in EXPERIMENT_NAMES {
            let cfg = ExperimentConfig::default_for(name).unwrap();
            assert_eq!(cfg.name(), name);
            let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(ExperimentConfig::default_for("nope").is_err());
    }

    #[test]
    fn verdict_recomputes_after_tampering() {
        let mut r = run(ExperimentConfig::Mixing(MixingConfig { horizon: 300, ..Default::default() }));
        assert_eq!(r.recompute_verdict(), r.verdict);
        r.checks[3].observed = 5.0;
        assert_eq!(r.recompute_verdict(), ExperimentVerdict::Fail);
    }
}
