mod support;

use corridor_core::bilevel::{compare_policies, evaluate_policy, grid_search, policy_grid, Quadrants};
use corridor_core::io::sweep_table;
use corridor_core::scenario::ObjectiveWeights;
use corridor_core::PolicyParams;

#[test]
fn objective_is_the_sum_of_its_terms() {
    let s = support::load("tiny.json");
    let w = ObjectiveWeights::default();
    for p in [PolicyParams::new(0, 0, 0), PolicyParams::new(5, 8, 2), PolicyParams::new(6, 9, 6)] {
        let pt = evaluate_policy(&s, p, &w, None).unwrap();
        let o = pt.objective;
        assert_eq!(o.total, o.travel_time + o.emission + o.fleet + o.price);
        assert!(pt.converged());
    }
}

#[test]
fn no_policy_has_no_fleet_or_price_terms() {
    let s = support::load("tiny.json");
    let pt = evaluate_policy(&s, PolicyParams::new(0, 0, 0), &ObjectiveWeights::default(), None).unwrap();
    assert_eq!(pt.objective.fleet, 0.0);
    assert_eq!(pt.objective.price, 0.0);
    assert_eq!(pt.objective.total, pt.objective.travel_time + pt.objective.emission);
}

#[test]
fn six_shuttles_cost_1644_a_day() {
    let s = support::load("tiny.json");
    let pt = evaluate_policy(&s, PolicyParams::new(0, 0, 6), &ObjectiveWeights::default(), None).unwrap();
    assert_eq!(pt.totals.fleet_cost, 1644.0);
    assert_eq!(pt.objective.fleet, 822.0);
}

#[test]
fn budget_flags_but_still_evaluates() {
    let mut s = support::load("tiny.json");
    s.mode_params.budget = 1000.0;
    let pt = evaluate_policy(&s, PolicyParams::new(0, 0, 4), &ObjectiveWeights::default(), None).unwrap();
    assert!(!pt.feasible);
    assert!(pt.objective.total.is_finite());
    let g = grid_search(&s, &[PolicyParams::new(0, 0, 4)], &ObjectiveWeights::default(), 1).unwrap();
    assert_eq!(g.optimum, None);
}

#[test]
fn unconverged_points_rank_last() {
    let mut s = support::load("tiny.json");
    s.solver.max_iter = 1;
    let pt = evaluate_policy(&s, PolicyParams::new(5, 8, 2), &ObjectiveWeights::default(), None).unwrap();
    assert!(!pt.converged());
    assert_eq!(pt.ranked_total(), f64::INFINITY);
}

#[test]
fn negative_weights_are_rejected() {
    let s = support::load("tiny.json");
    let w = ObjectiveWeights {
        price: -1.0,
        ..Default::default()
    };
    assert!(evaluate_policy(&s, PolicyParams::default(), &w, None).is_err());
}

#[test]
fn single_point_grid_is_its_own_optimum() {
    let s = support::load("tiny.json");
    let g = grid_search(&s, &[s.policy], &ObjectiveWeights::default(), 1).unwrap();
    assert_eq!(g.points.len(), 1);
    assert_eq!(g.optimum, Some(0));
}

#[test]
fn single_od_grid_ratios() {
    let s = support::load("a10_single_od.json");
    let b = &s.bilevel;
    let grid = policy_grid(&b.k_values, &b.tau_values, &b.fleet_values).unwrap();
    assert_eq!(grid.len(), 25);
    let ratio = |k, tau| grid.iter().find(|p| p.k == k && p.tau == tau).unwrap().d_max().unwrap();
    assert!((ratio(50, 72) - 0.694).abs() < 5e-4);
    assert!((ratio(58, 64) - 0.906).abs() < 5e-4);
    assert!((ratio(54, 64) - 0.844).abs() < 5e-4);
}

#[test]
fn multi_od_grid_size() {
    let s = support::load("a10_multi_od.json");
    let b = &s.bilevel;
    assert_eq!(policy_grid(&b.k_values, &b.tau_values, &b.fleet_values).unwrap().len(), 63);
}

#[test]
fn grid_optimum_is_exhaustive_and_thread_count_free() {
    let s = support::load("tiny.json");
    let w = ObjectiveWeights::default();
    let policies = policy_grid(&[5, 6, 7], &[8, 9], &[2, 6]).unwrap();
    let one = grid_search(&s, &policies, &w, 1).unwrap();
    let four = grid_search(&s, &policies, &w, 4).unwrap();
    assert_eq!(sweep_table(&one), sweep_table(&four));
    let best = one.optimum.unwrap();
    for p in &one.points {
        if p.feasible {
            assert!(one.points[best].ranked_total() <= p.ranked_total());
        }
    }
    assert_eq!(one.best_per_fleet.len(), 2);
    assert_eq!(one.best_per_ratio.len(), 6);
}

#[test]
fn slack_credit_scheme_matches_no_policy() {
    let s = support::load("a10_single_od.json");
    let w = ObjectiveWeights::default();
    let q = Quadrants {
        none: PolicyParams::new(0, 0, 2),
        tcs_only: PolicyParams::new(56, 64, 2),
        dras_only: PolicyParams::new(0, 0, 2),
        combined: PolicyParams::new(0, 0, 2),
    };
    let rows = compare_policies(&s, &q, &w).unwrap();
    let (a, b) = (&rows[0].point, &rows[1].point);
    assert_eq!(b.totals.price, 0.0);
    for k in 0..3 {
        assert!((a.mode_shares[k] - b.mode_shares[k]).abs() < 1e-6);
    }
    assert!((a.objective.total - b.objective.total).abs() < 1e-6 * a.objective.total);
    // identical policies give identical rows
    assert_eq!(rows[0].point.objective, rows[2].point.objective);
    assert_eq!(rows[2].point.objective, rows[3].point.objective);
}

#[test]
fn price_penalty_can_be_switched_off() {
    let s = support::load("tiny.json");
    let w = ObjectiveWeights {
        price: 0.0,
        ..Default::default()
    };
    let pt = evaluate_policy(&s, PolicyParams::new(5, 8, 2), &w, None).unwrap();
    assert!(pt.totals.price > 0.0);
    assert_eq!(pt.objective.price, 0.0);
}
