mod common;

use std::collections::BTreeSet;

use num_complex::Complex64;
use proptest::prelude::*;
use shiftdyn::criteria::{
    check_subspace_criterion, eval_direct_sum_criterion, eval_forward_criterion, lift_criterion, lift_problem,
    split_criterion, ApproximantRule, CriterionData, DenseSetSpec, Iterates, ProductCriterionParams, SubspaceCheckParams,
    build_example32_weights, Verdict,
};
use shiftdyn::experiments::{run_experiment, ExperimentConfig, MixingConfig, ProjectionConfig};
use shiftdyn::orbit::{
    compute_orbit, project_orbit, projection_samples, return_set, transitivity_witness, ClassificationParams, MemoryBudget,
};
use shiftdyn::shift::{
    invariance_check, shift_power_norm, BackwardIndexConvention, Invariance, OperatorExpr, ProductDirection, WeightedShift,
};
use shiftdyn::space::{
    distance_to_subspace, make_net, CoordinateSubspace, DirectSumVector, Element, SpaceKind, SparseVector, Subspace,
};
use shiftdyn::weights::{NegativeRule, WeightSequence};

const B: SpaceKind = SpaceKind::Bilateral;

fn coeff() -> impl Strategy<Value = f64> + Clone {
    (-16i32..=16).prop_filter("nonzero", |c| *c != 0).prop_map(|c| c as f64 / 8.0)
}

fn sparse(span: i64, max_len: usize) -> impl Strategy<Value = SparseVector> {
    prop::collection::btree_map(-span..=span, coeff(), 0..=max_len)
        .prop_map(|m| SparseVector::from_real(B, m).unwrap())
}

fn dyadic() -> impl Strategy<Value = f64> + Clone {
    prop::sample::select(vec![0.25, 0.5, 2.0, 4.0])
}

fn generic_weight() -> impl Strategy<Value = f64> + Clone {
    (1u32..=400).prop_map(|k| k as f64 / 100.0)
}

/// Bilateral weight sequences with a perturbed window around 0.
fn weights(value: impl Strategy<Value = f64> + Clone + 'static) -> impl Strategy<Value = WeightSequence> {
    (value.clone(), value.clone(), -20i64..=0, prop::collection::vec(value, 0..40)).prop_map(|(pos, neg, start, window)| {
        if window.is_empty() {
            WeightSequence::piecewise(pos, neg).unwrap()
        } else {
            WeightSequence::table(start, window, pos).unwrap()
        }
    })
}

fn residue_subspace() -> impl Strategy<Value = CoordinateSubspace> {
    (2u64..=8).prop_flat_map(|p| {
        prop::collection::btree_set(0..p, 1..p as usize)
            .prop_map(move |r| CoordinateSubspace::residues(B, p, r).unwrap())
    })
}

fn index_subspace() -> impl Strategy<Value = CoordinateSubspace> {
    prop_oneof![
        residue_subspace(),
        (-10i64..10).prop_map(|s| CoordinateSubspace::half_line(B, s)),
        prop::collection::btree_set(-10i64..=10, 0..8).prop_map(|s| CoordinateSubspace::finite(B, s)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Sequence spaces.

    #[test]
    fn pair_norm_is_sum_of_squares(u in sparse(30, 8), v in sparse(30, 8)) {
        let p = DirectSumVector::new(u.clone(), v.clone());
        let expect = u.norm_sqr() + v.norm_sqr();
        prop_assert!((p.norm_sqr() - expect).abs() <= 4.0 * f64::EPSILON * expect);
        prop_assert!((Element::Pair(p).norm().powi(2) - expect).abs() <= 4.0 * f64::EPSILON * expect.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn distance_zero_iff_support_inside(v in sparse(20, 6), m in index_subspace()) {
        let inside = v.support().all(|i| m.contains_index(i));
        prop_assert_eq!(distance_to_subspace(&v, &m).unwrap() == 0.0, inside);
        prop_assert_eq!(m.contains(&v), inside);
    }

    #[test]
    fn distances_to_complementary_subspaces(v in sparse(20, 8), m in index_subspace()) {
        let d = distance_to_subspace(&v, &m).unwrap();
        let dc = distance_to_subspace(&v, &m.complement()).unwrap();
        let n2 = v.norm_sqr();
        prop_assert!((d * d + dc * dc - n2).abs() <= 1e-12 * n2.max(1.0));
    }

    #[test]
    fn nets_are_stable_and_lexicographic(m in residue_subspace(), support in 1usize..=3, grid in prop::collection::vec(coeff(), 1..4)) {
        let a = make_net(&m, support, &grid, f64::INFINITY).unwrap();
        let b = make_net(&m, support, &grid, f64::INFINITY).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), grid.len().pow(support as u32));
        let idx = m.first_indices(support);
        let first: Vec<f64> = idx.iter().map(|i| a[0].get(*i).re).collect();
        prop_assert!(first.iter().all(|c| *c == grid[0] || grid[0] == 0.0));
    }

    // Shift operators.

    #[test]
    fn basis_orbit_matches_weight_product(w in weights(generic_weight()), m in -50i64..=50, n in 0u64..=100) {
        let t = WeightedShift::bilateral(w);
        let image = t.apply_power(&SparseVector::basis(B, m).unwrap(), n as i64).unwrap();
        prop_assert_eq!(image.support().collect::<Vec<_>>(), vec![m + n as i64]);
        let log = shift_power_norm(&t, m, n, ProductDirection::Forward, BackwardIndexConvention::default()).unwrap();
        prop_assert!((image.norm().ln() - log).abs() <= 1e-9 * log.abs().max(1.0));
    }

    #[test]
    fn inverse_power_round_trip(w in weights(generic_weight()), v in sparse(30, 6), n in 0i64..=60) {
        let t = WeightedShift::bilateral(w);
        let back = t.apply_power(&t.apply_power(&v, n).unwrap(), -n).unwrap();
        prop_assert_eq!(back.support().collect::<Vec<_>>(), v.support().collect::<Vec<_>>());
        for (i, c) in v.entries() {
            prop_assert!((back.get(i) - c).norm() <= 1e-12 * c.norm());
        }
    }

    #[test]
    fn invariance_preserves_membership(w in weights(dyadic()), m in index_subspace(), n in -12i64..=12, v in sparse(20, 6)) {
        let op = OperatorExpr::shift(w);
        let v = v.restrict(|i| m.contains_index(i));
        if invariance_check(&op, &Subspace::Single(m.clone()), n) == Invariance::Holds {
            let image = op.apply_power_vec(&v, n).unwrap();
            prop_assert!(m.contains(&image));
        }
    }

    #[test]
    fn residue_invariance_matches_period_walk(m in residue_subspace(), n in 0u64..=100) {
        let shiftdyn::space::IndexSet::Residues { modulus, residues } = m.index_set().clone() else { unreachable!() };
        let oracle = common::residue_invariance_oracle(modulus, &residues, n);
        let op = OperatorExpr::Shift(WeightedShift::unweighted(B));
        prop_assert_eq!(invariance_check(&op, &Subspace::Single(m), n as i64), Invariance::from_bool(oracle));
    }

    #[test]
    fn log_products_match_rationals(seed in any::<u64>(), start in -500i64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let window: Vec<f64> = (0..1000).map(|_| if rng.gen::<bool>() { 0.5 } else { 2.0 }).collect();
        let w = WeightSequence::table(start, window.clone(), 1.0).unwrap();
        let exact = common::ln_rational(&common::rational_product(&window));
        let got = w.log_product(start, 1000);
        prop_assert!((got - exact).abs() <= 1e-9 * exact.abs().max(1.0));
    }

    // Criteria.

    #[test]
    fn direct_sum_trace_is_pointwise_max(w1 in weights(dyadic()), w2 in weights(generic_weight()), step in 1u64..4, m in -5i64..5, h in -5i64..5) {
        let (t1, t2) = (WeightedShift::bilateral(w1), WeightedShift::bilateral(w2));
        let whole = CoordinateSubspace::whole(B);
        let it = Iterates::Arithmetic { step, offset: 0 };
        let p = ProductCriterionParams { horizon: 12, ..Default::default() };
        let a = eval_forward_criterion(&t1, &whole, m, &it, &p).unwrap();
        let b = eval_forward_criterion(&t2, &whole, h, &it, &p).unwrap();
        let s = eval_direct_sum_criterion(&t1, &t2, &whole, &whole, m, h, &it, &p).unwrap();
        for ((ra, rb), rs) in a.rows.iter().zip(&b.rows).zip(&s.rows) {
            prop_assert_eq!(rs.forward_log, Some(ra.forward_log.unwrap().max(rb.forward_log.unwrap())));
            prop_assert_eq!(rs.backward_log, Some(ra.backward_log.unwrap().max(rb.backward_log.unwrap())));
        }
    }

    #[test]
    fn inverse_power_approximants_hit_exactly(w in weights(dyadic()), g in weights(generic_weight()), step in 1u64..4) {
        let m = CoordinateSubspace::residues(B, 2, [0]).unwrap();
        let data = CriterionData {
            iterates: Iterates::Arithmetic { step: 2 * step, offset: 0 },
            dense_set_1: DenseSetSpec::net(m.clone(), 2, vec![-1.0, 0.5]),
            dense_set_2: DenseSetSpec::net(m.clone(), 2, vec![-1.0, 0.5]),
            approximants: ApproximantRule::InversePower,
        };
        let params = SubspaceCheckParams { horizon: 6, ..Default::default() };
        let sub = Subspace::Single(m);
        // Power-of-two weights: exact. Others: rounding of w and 1/w only.
        let r = check_subspace_criterion(&OperatorExpr::shift(w), &sub, &data, &params).unwrap();
        prop_assert!(r.rows.iter().all(|row| row.approx_error == Some(0.0)));
        let r = check_subspace_criterion(&OperatorExpr::shift(g), &sub, &data, &params).unwrap();
        prop_assert!(r.rows.iter().all(|row| row.approx_error.unwrap() <= 1e-13));
    }

    #[test]
    fn lift_is_bounded_and_split_restores(w in weights(dyadic()), p in 1u64..=3, step in 1u64..4, grid in prop::collection::vec(coeff(), 1..3)) {
        let m = CoordinateSubspace::residues(B, p + 1, [0]).unwrap();
        let op = OperatorExpr::shift(w);
        let data = CriterionData {
            iterates: Iterates::Arithmetic { step: (p + 1) * step, offset: 0 },
            dense_set_1: DenseSetSpec::net(m.clone(), 2, grid.clone()),
            dense_set_2: DenseSetSpec::net(m.clone(), 2, grid),
            approximants: ApproximantRule::InversePower,
        };
        let params = SubspaceCheckParams { horizon: 8, ..Default::default() };
        let base = check_subspace_criterion(&op, &Subspace::Single(m.clone()), &data, &params).unwrap();
        let (lop, lm) = lift_problem(&op, &m);
        let lifted_params = SubspaceCheckParams { sample_budget: params.sample_budget.pow(2), ..params };
        let lifted = check_subspace_criterion(&lop, &lm, &lift_criterion(&data), &lifted_params).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        for (a, b) in base.rows.iter().zip(&lifted.rows) {
            for (x, y) in [(a.decay, b.decay), (a.approx_norm, b.approx_norm), (a.approx_error, b.approx_error)] {
                let (x, y) = (x.unwrap(), y.unwrap());
                prop_assert!(y <= s2 * x * (1.0 + 1e-12) + 1e-300, "{} > sqrt2 * {}", y, x);
            }
        }
        let (l, r) = split_criterion(&lift_criterion(&data)).unwrap();
        for d in [l, r] {
            let again = check_subspace_criterion(&op, &Subspace::Single(m.clone()), &d, &params).unwrap();
            prop_assert_eq!(&again.rows, &base.rows);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn block_construction_always_certified(horizon in 64u64..4000) {
        let ex = build_example32_weights(horizon).unwrap();
        let c = &ex.certificate;
        prop_assert!(c.min_forward_max_log >= c.floor.ln());
        prop_assert!(c.min_backward_max_log >= c.floor.ln());
        prop_assert_eq!(c.w_report.verdict, Verdict::SatisfiedToHorizon);
        prop_assert_eq!(c.a_report.verdict, Verdict::SatisfiedToHorizon);
    }

    // Orbit engine.

    #[test]
    fn projection_law_on_random_orbits(seed in any::<u64>()) {
        let cfg = ProjectionConfig { runs: 2, orbit_length: 80, ..Default::default() };
        let r = run_experiment(&ExperimentConfig::Projection(cfg), seed).unwrap();
        let shiftdyn::experiments::ExperimentTraces::Projection { runs, negative_control_violations } = &r.traces else { unreachable!() };
        prop_assert!(runs.iter().all(|x| x.violations == 0 && x.coverage_pair <= x.coverage_left.min(x.coverage_right)));
        prop_assert!(*negative_control_violations > 0);
    }

    #[test]
    fn return_set_of_transitive_inside_mixing_tail(phase in 0usize..2, horizon in 100u64..600) {
        let p = ClassificationParams::default();
        let e0: Element = SparseVector::basis(B, 0).unwrap().into();
        let whole = Subspace::Single(CoordinateSubspace::whole(B));
        let mixing = OperatorExpr::shift(WeightSequence::piecewise(0.5, 2.0).unwrap());
        let transitive = OperatorExpr::shift(WeightSequence::blocks(4, vec![0.5, 2.0], phase, NegativeRule::ReciprocalMirror).unwrap());
        let r1 = return_set(&mixing, &whole, &e0, 0.5, &e0, 0.5, horizon, &p).unwrap();
        let r2 = return_set(&transitive, &whole, &e0, 0.5, &e0, 0.5, horizon, &p).unwrap();
        let shiftdyn::orbit::Classification::CofiniteBeyond { n0 } = r1.classification else { panic!("{:?}", r1.classification) };
        prop_assert!(r2.members.iter().filter(|n| **n >= n0).all(|n| r1.contains(*n)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bilateral_witness_identities(w in weights(dyadic()), u in sparse(20, 5), v in sparse(20, 5), n in 1u64..=40) {
        let t = WeightedShift::bilateral(w);
        let op = OperatorExpr::Shift(t.clone());
        let whole = CoordinateSubspace::whole(B);
        let wit = transitivity_witness(&op, &whole, &u, &v, n).unwrap();
        let ni = n as i64;
        prop_assert_eq!(t.apply_power(&wit.z, ni).unwrap().sub(&v).unwrap(), t.apply_power(&u, ni).unwrap());
        prop_assert_eq!(wit.z.sub(&u).unwrap(), t.apply_power(&v, -ni).unwrap());
    }

    #[test]
    fn witness_near_error_is_backward_product(w in weights(generic_weight()), u in sparse(20, 4), v in sparse(20, 5), n in 1u64..=40) {
        let t = WeightedShift::bilateral(w);
        let wit = transitivity_witness(&OperatorExpr::Shift(t.clone()), &CoordinateSubspace::whole(B), &u, &v, n).unwrap();
        let expect: f64 = v
            .entries()
            .map(|(m, c)| {
                let l = shift_power_norm(&t, m, n, ProductDirection::Backward, BackwardIndexConvention::InversePath).unwrap();
                c.norm_sqr() * (2.0 * l).exp()
            })
            .sum::<f64>()
            .sqrt();
        prop_assert!((wit.err_near - expect).abs() <= 1e-12 * expect.max(f64::MIN_POSITIVE), "{} vs {}", wit.err_near, expect);
    }

    #[test]
    fn residue_return_sets_lie_in_multiples(p in 2u64..=5, w in weights(dyadic()), horizon in 10u64..120) {
        let m = CoordinateSubspace::residues(B, p, [0]).unwrap();
        let e0: Element = SparseVector::basis(B, 0).unwrap().into();
        let r = return_set(&OperatorExpr::shift(w), &Subspace::Single(m), &e0, 0.5, &e0, 0.5, horizon, &ClassificationParams::default()).unwrap();
        prop_assert!(r.members.iter().all(|n| n % p == 0));
    }

    #[test]
    fn projected_orbits_match_component_orbits(w1 in weights(dyadic()), w2 in weights(generic_weight()), x in sparse(10, 4), y in sparse(10, 4), len in 1u64..200) {
        let (t1, t2) = (OperatorExpr::shift(w1), OperatorExpr::shift(w2));
        let whole = CoordinateSubspace::whole(B);
        let budget = MemoryBudget::default();
        let pair = compute_orbit(&OperatorExpr::direct_sum(t1.clone(), t2.clone()), &Element::pair(x.clone(), y.clone()), len, &Subspace::pair(whole.clone(), whole.clone()), &budget).unwrap();
        let (l, r) = project_orbit(&pair).unwrap();
        let lone = compute_orbit(&t1, &x.clone().into(), len, &Subspace::Single(whole.clone()), &budget).unwrap();
        let rone = compute_orbit(&t2, &y.clone().into(), len, &Subspace::Single(whole), &budget).unwrap();
        prop_assert_eq!(l.steps, lone.steps);
        prop_assert_eq!(r.steps, rone.steps);
        let targets = vec![(x.scale(Complex64::new(0.5, 0.0)), y)];
        prop_assert!(projection_samples(&pair, &targets).unwrap().iter().all(|s| !s.violates()));
    }
}

#[test]
fn experiments_are_deterministic_and_auditable() {
    let cfgs = [
        ExperimentConfig::Mixing(MixingConfig { horizon: 300, ..Default::default() }),
        ExperimentConfig::Projection(ProjectionConfig { runs: 4, orbit_length: 50, ..Default::default() }),
        ExperimentConfig::default_for("criterion_extraction").unwrap(),
        ExperimentConfig::default_for("commutant").unwrap(),
    ];
    for cfg in cfgs {
        let a = serde_json::to_vec_pretty(&run_experiment(&cfg, 7).unwrap()).unwrap();
        let b = serde_json::to_vec_pretty(&run_experiment(&cfg, 7).unwrap()).unwrap();
        assert_eq!(a, b, "{}", cfg.name());
        let parsed: shiftdyn::experiments::ExperimentReport = serde_json::from_slice(&a).unwrap();
        assert_eq!(parsed.recompute_verdict(), parsed.verdict);
        assert_eq!(serde_json::to_vec_pretty(&parsed).unwrap(), a);
    }
}

#[test]
fn residue_oracle_sanity() {
    let r: BTreeSet<u64> = [0, 2].into();
    assert!(common::residue_invariance_oracle(4, &r, 2));
    assert!(!common::residue_invariance_oracle(4, &r, 1));
}
