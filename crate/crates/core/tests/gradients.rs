mod common;

use collabopt::costs::{
    finite_difference_gradient, interior, objective, relative_gradient_error, smoothness_gradient, with_interior,
    CostKind, CostWeights, TrajectoryObjective, WeightedObjective,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn combined_gradient_matches_central_differences(
        seed in 0u64..1_000_000,
        w in prop::array::uniform5(0.01f64..1.0),
    ) {
        let p = common::random_problem(seed);
        let weights = CostWeights::new(w[0], w[1], w[2], w[3], w[4]).unwrap();
        let obj = WeightedObjective { ctx: &p.ctx, weights };
        let analytic = obj.evaluate(&p.traj, true).unwrap().gradient;
        let fd = finite_difference_gradient(&obj, &p.traj, 1e-6).unwrap();
        prop_assert!(relative_gradient_error(&analytic, &fd, 1e-8) <= 1e-4);
    }

    #[test]
    fn total_is_the_weighted_sum_of_the_parts(seed in 0u64..1_000_000, w in prop::array::uniform5(0.0f64..2.0)) {
        let p = common::random_problem(seed);
        let weights = CostWeights::new(w[0], w[1], w[2], w[3], w[4]).unwrap();
        let r = objective(&p.traj, &p.ctx, &weights).unwrap();
        let sum: f64 = CostKind::ALL.iter().map(|&k| weights.get(k) * r.kind(k)).sum();
        prop_assert!((r.total - sum).abs() <= 1e-9 * sum.abs().max(1.0));
    }

    #[test]
    fn gradient_is_linear_in_the_weights(seed in 0u64..1_000_000, scale in 0.1f64..10.0) {
        let p = common::random_problem(seed);
        let w = CostWeights::new(0.3, 0.2, 0.5, 0.7, 0.1).unwrap();
        let mut w2 = w;
        for k in CostKind::ALL {
            *w2.get_mut(k) *= scale;
        }
        let g1 = objective(&p.traj, &p.ctx, &w).unwrap().gradient;
        let g2 = objective(&p.traj, &p.ctx, &w2).unwrap().gradient;
        for (a, b) in g1.iter().zip(&g2) {
            prop_assert!((a * scale - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn smoothness_gradient_matches_the_objective() {
    for seed in 0..20 {
        let p = common::random_problem(seed);
        let from_objective = objective(&p.traj, &p.ctx, &CostWeights::only(CostKind::Smoothness)).unwrap().gradient;
        assert_eq!(smoothness_gradient(&p.traj), from_objective);
    }
}

#[test]
fn interior_roundtrip_keeps_endpoints() {
    let p = common::random_problem(7);
    let x: Vec<f64> = interior(&p.traj).iter().map(|v| v + 0.01).collect();
    let moved = with_interior(&p.traj, &x);
    assert_eq!(moved.start(), p.traj.start());
    assert_eq!(moved.end(), p.traj.end());
    assert_eq!(interior(&moved), x);
}
