mod support;

use corridor_core::cost::{assemble_costs, logit_probabilities};
use corridor_core::market::{car_trips, market_residual};
use corridor_core::scenario::ScenarioFile;
use corridor_core::{PolicyParams, Scenario};
use proptest::prelude::*;
use support::softmax_oracle;

fn one_stream(k: u32, tau: u32, fleet: u32) -> Scenario {
    let file: ScenarioFile = serde_json::from_value(serde_json::json!({
        "grid": {"start": 0.0, "interval_length": 300.0, "interval_count": 3},
        "stations": [
            {"id": "a", "position": 0.0, "served_by": ["bus", "dras"]},
            {"id": "b", "position": 9000.0, "served_by": ["bus", "dras"]}
        ],
        "demand_groups": [
            {"id": "g", "origin": "a", "destination": "b", "departure_time": 10.0, "demand": 120.0},
            {"id": "g", "origin": "a", "destination": "b", "departure_time": 310.0, "demand": 300.0},
            {"id": "g", "origin": "a", "destination": "b", "departure_time": 610.0, "demand": 80.0}
        ]
    }))
    .unwrap();
    Scenario::from_file(file)
        .unwrap()
        .with_policy(PolicyParams::new(k, tau, fleet))
        .unwrap()
}

#[test]
fn softmax_oracle_agrees() {
    let p = logit_probabilities(&[Some(10.0f64), Some(12.0), Some(14.0)], 0.1).unwrap();
    let o = softmax_oracle(&[10.0, 12.0, 14.0], 0.1);
    for k in 0..3 {
        assert!((p[k] - o[k]).abs() < 1e-15);
    }
}

#[test]
fn missing_service_renormalises_the_pair() {
    let p = logit_probabilities(&[Some(3.0f64), Some(5.0), None], 0.1).unwrap();
    let o = softmax_oracle(&[3.0, 5.0], 0.1);
    assert_eq!(p[2], 0.0);
    assert!((p[0] - o[0]).abs() < 1e-15 && (p[1] - o[1]).abs() < 1e-15);
}

#[test]
fn credit_terms() {
    let s = one_stream(5, 8, 1);
    let tt = vec![[0.0f64; 3]; 3];
    let costs = assemble_costs(&s, &tt, &tt, 0.36);
    let c = costs[0];
    assert!((c[0].unwrap().credit - 1.08).abs() < 1e-12);
    assert!((c[1].unwrap().credit + 1.80).abs() < 1e-12);
    assert!((c[2].unwrap().credit + 1.80).abs() < 1e-12);
}

#[test]
fn an_hour_in_vehicle_costs_the_value_of_time() {
    let s = one_stream(0, 0, 1);
    let tt = vec![[3600.0f64; 3]; 3];
    let zero = vec![[0.0f64; 3]; 3];
    let costs = assemble_costs(&s, &tt, &zero, 0.0);
    for c in costs[1] {
        assert!((c.unwrap().in_vehicle - 10.5).abs() < 1e-12);
    }
}

#[test]
fn equal_conditions_give_equal_costs() {
    let s = one_stream(0, 0, 1);
    let tt = vec![[700.0f64; 3]; 3];
    let zero = vec![[0.0f64; 3]; 3];
    let costs = assemble_costs(&s, &tt, &zero, 0.0);
    let totals: Vec<f64> = costs[0].iter().map(|c| c.unwrap().total()).collect();
    assert!(totals.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn no_fleet_means_no_shuttle_option() {
    let s = one_stream(0, 0, 0);
    let tt = vec![[700.0f64; 3]; 3];
    let costs = assemble_costs(&s, &tt, &tt, 0.0);
    assert!(costs.iter().all(|c| c[2].is_none() && c[0].is_some()));
}

#[test]
fn market_examples() {
    let s = one_stream(5, 8, 0);
    assert_eq!(market_residual(&s, &[0.0f64; 3]), 500.0 * 5.0);
    let x = [5.0f64 / 8.0; 3];
    assert!(market_residual(&s, &x).abs() < 1e-9);
}

fn costs3() -> impl Strategy<Value = [f64; 3]> {
    [-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0]
}

proptest! {
    #[test]
    fn shifting_all_costs_changes_nothing(c in costs3(), shift in -1e3f64..1e3, theta in 0.01f64..2.0) {
        let a = logit_probabilities(&c.map(Some), theta).unwrap();
        let b = logit_probabilities(&c.map(|v| Some(v + shift)), theta).unwrap();
        for k in 0..3 {
            prop_assert!((a[k] - b[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn dearer_mode_loses_share(c in costs3(), which in 0usize..3, bump in 1e-3f64..20.0, theta in 0.01f64..2.0) {
        let a = logit_probabilities(&c.map(Some), theta).unwrap();
        // a share rounded to 0 or 1 cannot move in floating point
        prop_assume!(a[which] * (1.0 - a[which]) > 1e-9);
        let mut d = c;
        d[which] += bump;
        let b = logit_probabilities(&d.map(Some), theta).unwrap();
        prop_assert!(b[which] < a[which]);
    }

    #[test]
    fn shares_sum_to_one(c in costs3(), theta in 0.0f64..5.0, drop in 0usize..4) {
        let mut opts = c.map(Some);
        if drop < 3 {
            opts[drop] = None;
        }
        let p = logit_probabilities(&opts, theta).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        let live: Vec<f64> = opts.iter().flatten().copied().collect();
        let o = softmax_oracle(&live, theta);
        let got: Vec<f64> = (0..3).filter(|&k| opts[k].is_some()).map(|k| p[k]).collect();
        for (g, w) in got.iter().zip(&o) {
            prop_assert!((g - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn market_residual_is_affine_in_car_shares(
        x in prop::collection::vec(0.0f64..=1.0, 3),
        which in 0usize..3,
        dx in -0.5f64..0.5,
        k in 0u32..60,
        extra in 0u32..30,
    ) {
        let tau = k + extra;
        prop_assume!(tau > 0);
        let s = one_stream(k, tau, 0);
        let base = market_residual(&s, &x);
        let mut y = x.clone();
        y[which] += dx;
        let moved = market_residual(&s, &y);
        let slope = -s.streams[0].demand[which] * tau as f64;
        prop_assert!((moved - base - slope * dx).abs() <= 1e-9 * base.abs().max(1.0));
        prop_assert!((car_trips(&s, &x) * tau as f64 + base - s.total_demand() * k as f64).abs() < 1e-6);
    }
}
